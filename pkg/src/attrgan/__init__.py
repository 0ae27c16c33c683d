"""Attribute/background disentangling GAN with controllable transfer."""

__version__ = "0.1.0"
