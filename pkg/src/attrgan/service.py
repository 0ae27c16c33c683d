"""Stateless HTTP facade over a loaded checkpoint.

All endpoints are side-effect-free reads of immutable state, so identical
requests always return identical bodies. Validation failures return 400;
a non-finite model output (corrupt checkpoint) returns 422.
"""

from __future__ import annotations

import base64
import hashlib
import io
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image

from . import synth
from .checkpoint import load_model
from .modulation import TransferControl, transfer
from .networks import images_to_tensor, tensor_to_images


def _encode_png(image: np.ndarray) -> bytes:
    u8 = np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _decode_png(raw: bytes, expected_size: int) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(raw)) as im:
            u8 = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"undecodable image payload: {exc}")
    if u8.shape[:2] != (expected_size, expected_size):
        raise HTTPException(
            status_code=400,
            detail=f"expected {expected_size}x{expected_size} image, got {u8.shape[1]}x{u8.shape[0]}",
        )
    return (u8.astype(np.float32) / 127.5) - 1.0


def _parse_bits(bits: str, n: int) -> np.ndarray:
    if not isinstance(bits, str) or len(bits) != n or any(c not in "01" for c in bits):
        raise HTTPException(status_code=400, detail=f"target bits must be {n} chars of 0/1")
    return np.array([int(c) for c in bits], dtype=np.int64)


def create_app(checkpoint_path: str | Path,
               data_dir: str | Path | None = None) -> FastAPI:
    model, config = load_model(checkpoint_path)
    model.eval()
    digest = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()[:16]
    manifest = synth.load_manifest(data_dir) if data_dir is not None else None
    n = config.model.num_attributes
    size = config.model.image_size

    app = FastAPI(title="attribute transfer service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/meta")
    def meta() -> dict:
        return {
            "num_attributes": n,
            "attribute_names": list(synth.ATTRIBUTE_NAMES[:n]),
            "image_size": size,
            "checkpoint_id": digest,
            "sample_count": manifest.count if manifest is not None else 0,
        }

    @app.get("/sample/{seed_id}")
    def sample(seed_id: int, bits: str | None = None) -> Response:
        if manifest is None:
            raise HTTPException(status_code=404, detail="no dataset attached")
        if not 0 <= seed_id < manifest.count:
            raise HTTPException(status_code=404, detail=f"seed_id outside [0, {manifest.count})")
        if bits is None:
            label = synth.dataset_label(seed_id, manifest.global_seed, n)
        else:
            label = _parse_bits(bits, n)
        rendered = synth.render(seed_id, label, size=manifest.image_size,
                                global_seed=manifest.global_seed)
        return Response(content=_encode_png(rendered.image), media_type="image/png")

    @app.post("/transfer")
    async def do_transfer(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")

        has_sample = body.get("sample_id") is not None
        has_image = body.get("image_b64") is not None
        if has_sample == has_image:
            raise HTTPException(
                status_code=400, detail="exactly one of sample_id or image_b64 required"
            )
        theta = body.get("theta")
        if not isinstance(theta, (int, float)) or not 0.0 <= float(theta) <= 1.0:
            raise HTTPException(status_code=400, detail="theta must lie in [0, 1]")
        target = _parse_bits(body.get("target_bits"), n)

        if has_sample:
            seed_id = body["sample_id"]
            if manifest is None or not isinstance(seed_id, int) \
                    or not 0 <= seed_id < manifest.count:
                raise HTTPException(status_code=400, detail="unknown sample_id")
            label = synth.dataset_label(seed_id, manifest.global_seed, n)
            image = synth.render(seed_id, label, size=size,
                                 global_seed=manifest.global_seed).image
        else:
            try:
                raw = base64.b64decode(body["image_b64"], validate=True)
            except Exception:
                raise HTTPException(status_code=400, detail="image_b64 is not valid base64")
            image = _decode_png(raw, size)

        with torch.no_grad():
            out = transfer(model, images_to_tensor(image),
                           torch.from_numpy(target[None].astype(np.float32)),
                           TransferControl(float(theta)))
        result = tensor_to_images(out)[0]
        if not np.isfinite(result).all():
            raise HTTPException(status_code=422, detail="non-finite model output")
        # score the 8-bit image actually returned, so clients can reproduce
        # the confidence from the payload bit-for-bit
        result = synth.quantize(result)
        _, confidence = synth.oracle_classify(result)
        return JSONResponse({
            "request": {
                "sample_id": body.get("sample_id"),
                "target_bits": body.get("target_bits"),
                "theta": float(theta),
            },
            "image_b64": base64.b64encode(_encode_png(result)).decode("ascii"),
            "confidence": [float(c) for c in confidence],
        })

    return app
