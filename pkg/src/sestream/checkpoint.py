"""Self-describing parameter checkpoint.

Layout: 8-byte magic, u64 little-endian header length, JSON header (format
version, network configuration + hash, array manifest, free-form meta), then
raw float64 C-order array bytes.  The configuration hash is validated on
load.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict

import numpy as np

from .errors import DataError
from .unet import BlockCausalUNet, UNetConfig

MAGIC = b"SSECKPT1"
FORMAT_VERSION = 1


def _config_hash(cfg_dict: dict) -> str:
    blob = json.dumps(cfg_dict, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, model: BlockCausalUNet, extra: dict | None = None, meta: dict | None = None) -> None:
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, p in model.params:
        arrays[name] = np.ascontiguousarray(p.data, dtype=np.float64)
    for name, arr in (extra or {}).items():
        arrays[f"extra/{name}"] = np.ascontiguousarray(arr, dtype=np.float64)
    manifest = []
    offset = 0
    for name, arr in arrays.items():
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    cfg_dict = model.cfg.to_dict()
    header = {
        "format_version": FORMAT_VERSION,
        "config": cfg_dict,
        "config_hash": _config_hash(cfg_dict),
        "meta": meta or {},
        "arrays": manifest,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(arr.tobytes())


def load_checkpoint(path) -> tuple[UNetConfig, dict, dict, dict]:
    """Return (config, params, extra, meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise DataError(f"{path}: bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
        cfg_dict = header["config"]
        if _config_hash(cfg_dict) != header.get("config_hash"):
            raise DataError(f"{path}: configuration hash mismatch")
        payload = fh.read()
    cfg = UNetConfig.from_dict(cfg_dict)
    params: dict = {}
    extra: dict = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        off = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        if entry["name"].startswith("extra/"):
            extra[entry["name"][6:]] = arr
        else:
            params[entry["name"]] = arr
    return cfg, params, extra, header.get("meta", {})


def model_from_checkpoint(path) -> tuple[BlockCausalUNet, dict, dict]:
    """Build the network and load its weights; returns (model, extra, meta)."""
    cfg, params, extra, meta = load_checkpoint(path)
    model = BlockCausalUNet(cfg, seed=0)
    model.params.load_state_dict(params)
    model.invalidate_cache()
    return model, extra, meta
