"""Checkpoint archive: a zip holding a JSON manifest plus raw tensor payloads.

Layout:
    manifest.json       format version, full config, tensor index, step,
                        rolling loss averages
    tensors/<name>.bin  row-major little-endian payload per named tensor

Tensor names are prefixed by section: ``model/`` for parameters and
normalization statistics, ``optim_g/`` and ``optim_d/`` for Adam moment
buffers, ``rng/state`` for the training RNG. Loading validates the name and
shape sets exactly; any mismatch is a hard error and no partial state is
installed.
"""

from __future__ import annotations

import json
import os
import zipfile
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig, train_config_from_dict, train_config_to_dict
from .errors import CheckpointError
from .networks import AttributeTransferModel

FORMAT_VERSION = "1"

_DTYPES = {"f4": np.dtype("<f4"), "i8": np.dtype("<i8"), "u1": np.dtype("u1")}


def _dtype_code(arr: np.ndarray) -> str:
    for code, dt in _DTYPES.items():
        if arr.dtype == dt:
            return code
    raise CheckpointError(f"unsupported dtype {arr.dtype}")


def _to_array(tensor: torch.Tensor) -> np.ndarray:
    arr = tensor.detach().cpu().numpy()
    if arr.dtype == np.float32:
        return arr.astype("<f4", copy=False)
    if arr.dtype == np.int64:
        return arr.astype("<i8", copy=False)
    if arr.dtype == np.uint8:
        return arr.astype("u1", copy=False)
    if arr.dtype == np.float64:   # Adam 'step' scalars
        return arr.astype("<f4")
    raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")


def _model_tensors(model: AttributeTransferModel) -> dict[str, torch.Tensor]:
    out = {f"model/{name}": p for name, p in model.named_parameters()}
    out.update({f"model/{name}": b for name, b in model.named_buffers()})
    return out


def _optimizer_tensors(prefix: str, opt: torch.optim.Adam,
                       named_params: list[tuple[str, torch.Tensor]]) -> dict[str, torch.Tensor]:
    out: dict[str, torch.Tensor] = {}
    for name, param in named_params:
        state = opt.state.get(param, {})
        exp_avg = state.get("exp_avg", torch.zeros_like(param))
        exp_avg_sq = state.get("exp_avg_sq", torch.zeros_like(param))
        step = state.get("step", torch.tensor(0.0))
        out[f"{prefix}/{name}/exp_avg"] = exp_avg
        out[f"{prefix}/{name}/exp_avg_sq"] = exp_avg_sq
        out[f"{prefix}/{name}/step"] = torch.as_tensor(step, dtype=torch.float32)
    return out


def write_archive(path: str | Path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Atomically write the archive (temp file + rename)."""
    path = Path(path)
    manifest = dict(meta)
    manifest["format_version"] = FORMAT_VERSION
    manifest["tensors"] = {
        name: {"shape": list(arr.shape), "dtype": _dtype_code(arr)}
        for name, arr in tensors.items()
    }
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name, arr in sorted(tensors.items()):
            zf.writestr(f"tensors/{name}.bin", np.ascontiguousarray(arr).tobytes())
    os.replace(tmp, path)


def read_archive(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    try:
        with zipfile.ZipFile(path, "r") as zf:
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(
                    f"unsupported format version {manifest.get('format_version')!r}"
                )
            tensors = {}
            for name, info in manifest["tensors"].items():
                raw = zf.read(f"tensors/{name}.bin")
                arr = np.frombuffer(raw, dtype=_DTYPES[info["dtype"]]).copy()
                expected = int(np.prod(info["shape"])) if info["shape"] else 1
                if arr.size != expected:
                    raise CheckpointError(f"payload size mismatch for tensor {name}")
                tensors[name] = arr.reshape(info["shape"])
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, EOFError) as exc:
        raise CheckpointError(f"corrupt checkpoint archive {path}: {exc}") from exc
    return tensors, manifest


def model_tensor_index(model: AttributeTransferModel) -> dict[str, torch.Tensor]:
    return _model_tensors(model)


def save_model(model: AttributeTransferModel, config: TrainConfig, path: str | Path,
               extra_meta: dict | None = None) -> None:
    """Inference checkpoint: parameters and normalization statistics only."""
    tensors = {name: _to_array(t) for name, t in _model_tensors(model).items()}
    meta = {"kind": "model", "config": train_config_to_dict(config)}
    if extra_meta:
        meta.update(extra_meta)
    write_archive(path, tensors, meta)


def _install_model_tensors(model: AttributeTransferModel,
                           tensors: dict[str, np.ndarray]) -> None:
    expected = _model_tensors(model)
    want = set(expected)
    have = {name for name in tensors if name.startswith("model/")}
    if want != have:
        missing = sorted(want - have)[:5]
        extra = sorted(have - want)[:5]
        raise CheckpointError(f"tensor name mismatch; missing={missing} unexpected={extra}")
    with torch.no_grad():
        for name, dest in expected.items():
            src = tensors[name]
            if tuple(src.shape) != tuple(dest.shape):
                raise CheckpointError(
                    f"shape mismatch for {name}: archive {src.shape} vs model {tuple(dest.shape)}"
                )
            dest.copy_(torch.as_tensor(src).to(dest.dtype).reshape(dest.shape))


def load_model(path: str | Path) -> tuple[AttributeTransferModel, TrainConfig]:
    """Build a model from the archived config and install its tensors."""
    tensors, manifest = read_archive(path)
    config = train_config_from_dict(manifest["config"])
    model = AttributeTransferModel(config.model)
    _install_model_tensors(model, tensors)
    model.eval()
    return model, config
