"""Command-line entry point.

Exit codes: 0 ok, 2 usage, 3 io, 4 checkpoint mismatch, 5 numeric divergence.
Failures print one line to stderr of the form ``error:<category>: <message>``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from . import synth, trainer
from .checkpoint import load_model
from .config import load_train_config
from .errors import CheckpointError, ContractViolation, DivergenceError
from .evaluator import evaluate, save_transfer_grids
from .modulation import TransferControl, transfer
from .networks import images_to_tensor, labels_to_tensor, tensor_to_images

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CHECKPOINT = 4
EXIT_DIVERGENCE = 5


class CliError(Exception):
    def __init__(self, category: str, code: int, message: str):
        self.category = category
        self.code = code
        super().__init__(message)


def _usage(message: str) -> CliError:
    return CliError("usage", EXIT_USAGE, message)


def _io(message: str) -> CliError:
    return CliError("io", EXIT_IO, message)


def _parse_bits(text: str, n: int) -> np.ndarray:
    if len(text) != n or any(c not in "01" for c in text):
        raise _usage(f"attribute bitstring must be {n} chars of 0/1, got {text!r}")
    return np.array([int(c) for c in text], dtype=np.int64)


def cmd_datagen(args) -> int:
    try:
        manifest = synth.generate_dataset(args.out, count=args.count, seed=args.seed,
                                          size=args.size, force=args.force)
    except FileExistsError as exc:
        raise _io(str(exc))
    print(f"wrote {manifest.count} samples ({manifest.train_count} train) to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    if not Path(args.config).exists():
        raise _io(f"no such config file: {args.config}")
    config = load_train_config(args.config)
    try:
        manifest = synth.load_manifest(args.data)
    except FileNotFoundError as exc:
        raise _io(str(exc))
    if manifest.image_size != config.model.image_size:
        raise _usage(
            f"dataset size {manifest.image_size} != config image_size {config.model.image_size}"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.use_deterministic_algorithms(True)

    resume_path = out_dir / "final.ckpt"
    if args.resume and resume_path.exists():
        state = trainer.load_state(resume_path)
    else:
        state = trainer.new_train_state(config)
    data = trainer.TrainData(manifest)
    trainer.run_training(state, data, log_path=out_dir / "train_log.csv",
                         checkpoint_dir=out_dir, quiet=args.quiet)
    print(f"finished at step {state.step}; checkpoint at {out_dir / 'final.ckpt'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = load_model(args.ckpt)
    try:
        manifest = synth.load_manifest(args.data)
    except FileNotFoundError as exc:
        raise _io(str(exc))
    report = evaluate(model, manifest, limit=args.limit)
    report.save(args.report)
    if args.grids is not None:
        save_transfer_grids(model, manifest, args.grids)
    print(report.to_json())
    return EXIT_OK


def cmd_transfer(args) -> int:
    model, config = load_model(args.ckpt)
    n = config.model.num_attributes
    target = _parse_bits(args.attrs, n)
    if not 0.0 <= args.theta <= 1.0:
        raise _usage(f"theta must lie in [0, 1], got {args.theta}")
    if not Path(args.input).exists():
        raise _io(f"no such image: {args.input}")
    image = synth.load_image_png(args.input)
    if image.shape[0] != config.model.image_size or image.shape[1] != config.model.image_size:
        raise _usage(
            f"image is {image.shape[1]}x{image.shape[0]}, checkpoint expects "
            f"{config.model.image_size}x{config.model.image_size}"
        )
    with torch.no_grad():
        out = transfer(model, images_to_tensor(image), labels_to_tensor(target),
                       TransferControl(args.theta))
    result = tensor_to_images(out)[0]
    if not np.isfinite(result).all():
        raise DivergenceError("transfer output")
    synth.save_image_png(result, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.ckpt, data_dir=args.data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrgan",
                                     description="attribute transfer workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate the synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=2000, help="number of samples")
    p.add_argument("--seed", type=int, default=0, help="global dataset seed")
    p.add_argument("--size", type=int, default=32, choices=(16, 32, 64), help="image size")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train from a JSON config")
    p.add_argument("--config", required=True, help="JSON training config")
    p.add_argument("--data", required=True, help="dataset directory from datagen")
    p.add_argument("--out", required=True, help="run directory for logs and checkpoints")
    p.add_argument("--resume", action="store_true", help="continue from final.ckpt if present")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the held-out split")
    p.add_argument("--ckpt", required=True, help="checkpoint archive")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--report", required=True, help="output JSON report path")
    p.add_argument("--limit", type=int, default=None, help="cap on eval samples")
    p.add_argument("--grids", default=None, help="directory for transfer grid images")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transfer", help="transfer attributes onto one image")
    p.add_argument("--ckpt", required=True, help="checkpoint archive")
    p.add_argument("--input", required=True, help="input PNG")
    p.add_argument("--attrs", required=True, help="target attribute bitstring, e.g. 1010")
    p.add_argument("--theta", type=float, default=1.0, help="transfer intensity in [0, 1]")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p.add_argument("--ckpt", required=True, help="checkpoint archive")
    p.add_argument("--data", required=True, help="dataset directory for sample browsing")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except ContractViolation as exc:
        print(f"error:usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"error:checkpoint: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except DivergenceError as exc:
        print(f"error:divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
