"""Shared exception types."""


class ContractViolation(ValueError):
    """An argument broke a documented precondition."""


class ConfigurationError(ValueError):
    """Inputs are internally consistent but do not match the model config."""


class DivergenceError(RuntimeError):
    """A loss or output became non-finite; carries the component name."""

    def __init__(self, component: str, step: int | None = None):
        self.component = component
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite value in '{component}'{where}")


class CheckpointError(RuntimeError):
    """Checkpoint archive is missing, truncated, or does not match the config."""
