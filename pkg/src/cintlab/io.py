"""On-disk formats: delimited images, the two-point binary, manifests.

All writers are atomic (write to a temp file in the target directory,
then rename) and deterministic: fixed float formatting, sorted JSON keys,
no timestamps.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile

import numpy as np

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_json",
    "read_json",
    "write_image_csv",
    "read_image_csv",
    "write_products_csv",
    "write_screen_csv",
    "write_twopoint_bin",
    "read_twopoint_bin",
    "write_record",
    "read_record",
]

TWOPOINT_MAGIC = b"C2PT"
TWOPOINT_VERSION = 1
_FLOAT_FMT = "%.17g"


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _sanitize(obj):
    """Replace non-finite floats by strings so the manifest stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_sanitize(obj), indent=2, sort_keys=True) + "\n"
    atomic_write_text(path, text)


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_image_csv(path, grid, values) -> None:
    """Columns y, re, im, abs with a header line."""
    values = np.asarray(values)
    re = np.real(values)
    im = np.imag(values) if np.iscomplexobj(values) else np.zeros_like(re)
    mag = np.abs(values)
    lines = ["y,re,im,abs"]
    for y, r, i, m in zip(np.asarray(grid), re, im, mag):
        lines.append(",".join(_FLOAT_FMT % v for v in (y, r, i, m)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_image_csv(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    grid = data[:, 0]
    values = data[:, 1] + 1j * data[:, 2]
    if np.all(data[:, 2] == 0):
        values = data[:, 1]
    return grid, values


def write_products_csv(path, kappa, kappa_tilde, P) -> None:
    """Columns kappa, kappa_tilde, re, im; row-major over (kappa, kappa_tilde)."""
    lines = ["kappa,kappa_tilde,re,im"]
    P = np.asarray(P)
    for i, k in enumerate(np.asarray(kappa)):
        for j, kt in enumerate(np.asarray(kappa_tilde)):
            v = P[i, j]
            lines.append(",".join(_FLOAT_FMT % x
                                  for x in (k, kt, v.real, v.imag)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_screen_csv(path, x, tau) -> None:
    """Columns n, x_n, tau_n."""
    lines = ["n,x_n,tau_n"]
    for n, (xn, tn) in enumerate(zip(np.asarray(x), np.asarray(tau))):
        lines.append(f"{n}," + ",".join(_FLOAT_FMT % v for v in (xn, tn)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_twopoint_bin(path, M) -> None:
    """Magic 'C2PT', u32 version=1, u64 G, f64 X_used, then G*G complex
    entries as little-endian (re, im) f64 pairs, row-major."""
    dense = M.to_dense()
    G = dense.shape[0]
    x_used = M.x_used if math.isfinite(M.x_used) else math.inf
    header = TWOPOINT_MAGIC + struct.pack("<IQd", TWOPOINT_VERSION, G, x_used)
    body = np.ascontiguousarray(dense, dtype="<c16").tobytes()
    atomic_write_bytes(path, header + body)


def read_twopoint_bin(path):
    """Returns (dense matrix, X_used)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != TWOPOINT_MAGIC:
            raise ValueError(f"bad two-point file magic: {magic!r}")
        version, G, x_used = struct.unpack("<IQd", f.read(4 + 8 + 8))
        if version != TWOPOINT_VERSION:
            raise ValueError(f"unsupported two-point format version {version}")
        data = np.frombuffer(f.read(), dtype="<c16")
    if data.size != G * G:
        raise ValueError("two-point file truncated")
    return data.reshape(G, G), x_used


def write_record(dir_path, record) -> None:
    """Record export: JSON manifest + raw complex payload."""
    os.makedirs(dir_path, exist_ok=True)
    payload = os.path.join(dir_path, "record.bin")
    atomic_write_bytes(payload, np.ascontiguousarray(record.r, dtype="<c16").tobytes())
    meta = {
        "N": int(len(record.r)),
        "dtype": "complex128-le",
        "payload": "record.bin",
        "screen_seed": record.screen_seed,
        "noise_seed": record.noise_seed,
        "meta": record.meta,
    }
    write_json(os.path.join(dir_path, "record.json"), meta)


def read_record(dir_path):
    meta = read_json(os.path.join(dir_path, "record.json"))
    r = np.frombuffer(
        open(os.path.join(dir_path, meta["payload"]), "rb").read(), dtype="<c16")
    if len(r) != meta["N"]:
        raise ValueError("record payload truncated")
    return r, meta
