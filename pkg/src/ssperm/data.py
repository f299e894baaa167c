"""Dataset loading, binary tensors, checkpoints and report files.

Binary tensors use the wire tensor layout with float64 elements:
``u8 ndim, u64 dims[ndim], f64 elements`` (little-endian, row-major).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .runtime.wire import decode_tensor, encode_tensor

F64LE = np.dtype("<f8")
U64LE = np.dtype("<u8")


def two_gaussians(n: int = 1000, d: int = 20, seed: int = 0, sep: float = 1.0):
    """Balanced two-class data: N(-sep/2, I) vs N(+sep/2, I); labels in {0, 1}."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, d)) + np.where(y[:, None] == 1, sep / 2, -sep / 2)
    return X, y[:, None].astype(np.float64)


def split(X, Y, val_frac: float = 0.2):
    n_val = int(round(len(X) * val_frac))
    cut = len(X) - n_val
    return X[:cut], Y[:cut], X[cut:], Y[cut:]


def load_csv(path, label: str | int = -1):
    """Read a CSV with a header row; ``label`` names or indexes the label column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path} has no data rows")
    if isinstance(label, str) and not label.lstrip("-").isdigit():
        if label not in header:
            raise ValueError(f"label column {label!r} not in header {header}")
        li = header.index(label)
    else:
        li = int(label) % len(header)
    try:
        M = np.asarray(rows, dtype=np.float64)
    except ValueError as e:
        raise ValueError(f"{path}: non-numeric value ({e})") from None
    if M.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match header width {len(header)}")
    X = np.delete(M, li, axis=1)
    return X, M[:, li : li + 1]


def write_tensor(path, arr) -> None:
    Path(path).write_bytes(encode_tensor(np.asarray(arr, dtype=np.float64), F64LE))


def read_tensor(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = decode_tensor(buf, 0, F64LE)
    if end != len(buf):
        raise ValueError(f"{path}: trailing bytes after tensor")
    return arr


def load_dataset(path, label: str | int = -1):
    """CSV or binary tensor (label in the last column for binary files)."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        return load_csv(p, label)
    M = read_tensor(p)
    if M.ndim != 2 or M.shape[1] < 2:
        raise ValueError(f"{path}: expected a 2-D tensor with a label column")
    li = int(label) % M.shape[1]
    return np.delete(M, li, axis=1), M[:, li : li + 1]


def dump_checkpoint(net, path) -> None:
    """Write this party's parameter shares (W, b per layer) as wire tensors."""
    parts = []
    for layer in net.layers:
        parts.append(encode_tensor(layer.W.data, U64LE))
        parts.append(encode_tensor(layer.b.data, U64LE))
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path) -> list[np.ndarray]:
    buf = Path(path).read_bytes()
    out, off = [], 0
    while off < len(buf):
        arr, off = decode_tensor(buf, off, U64LE)
        out.append(arr)
    return out


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_csv(rows: list[dict], path, fields=None) -> None:
    fields = fields or (list(rows[0].keys()) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
