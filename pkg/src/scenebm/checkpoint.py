"""Checkpoint I/O: JSON with weights hex-encoded as 64-bit IEEE-754.

Every float is written as 16 lowercase hex characters (big-endian byte
order), so save -> load round-trips are bit-identical, including signed
zeros and non-finite values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from scenebm.model import ModelParams, NetworkConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed or incompatible checkpoint files."""


def _encode_vector(row: np.ndarray) -> list:
    return [struct.pack(">d", float(x)).hex() for x in row]


def _decode_vector(row) -> np.ndarray:
    return np.array([struct.unpack(">d", bytes.fromhex(h))[0] for h in row])


def _encode(arr: np.ndarray | None):
    if arr is None:
        return None
    if arr.ndim == 1:
        return _encode_vector(arr)
    return [_encode_vector(row) for row in arr]


def _decode(obj, shape) -> np.ndarray | None:
    if obj is None:
        return None
    if len(shape) == 1:
        arr = _decode_vector(obj)
    else:
        arr = (
            np.array([_decode_vector(row) for row in obj])
            if obj
            else np.zeros((0,))
        )
    return np.ascontiguousarray(arr.reshape(shape))


def save_checkpoint(params: ModelParams, path, history: dict | None = None) -> None:
    params.validate()
    biases = None
    if params.config.use_biases:
        biases = {
            "b_v": _encode(params.b_v),
            "b_r": _encode(params.b_r),
            "b_h1": _encode(params.b_h1),
            "b_h2": _encode(params.b_h2),
        }
    payload = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "weights": {
            "W_hv": _encode(params.W_hv),
            "W_rh": _encode(params.W_rh),
            "W_12": _encode(params.W_12),
            "w_tri": _encode(params.w_tri),
            "biases": biases,
        },
        "history": history or {},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path):
    """Return (params, history); params carries its NetworkConfig."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r}, expected {FORMAT_VERSION}"
        )
    try:
        config = NetworkConfig.from_dict(payload["config"])
        weights = payload["weights"]
        params = ModelParams(
            config=config,
            W_hv=_decode(weights["W_hv"], (config.H1, config.V)),
            W_rh=_decode(weights["W_rh"], (config.H1, config.rh_cols())),
            W_12=_decode(weights["W_12"], (config.H1, config.H2)),
            w_tri=_decode(weights.get("w_tri"), (config.Tc,)),
        )
        biases = weights.get("biases")
        if biases is not None:
            params.b_v = _decode(biases["b_v"], (config.V,))
            params.b_r = _decode(biases["b_r"], (config.R,))
            params.b_h1 = _decode(biases["b_h1"], (config.H1,))
            params.b_h2 = _decode(biases["b_h2"], (config.H2,))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    if not config.use_triway:
        params.w_tri = None
    return params, payload.get("history", {})
