"""Float-binary array container: little-endian float32 payload + text sidecar.

The sidecar <name>.txt documents shape, dtype and free-form metadata lines
so any tool (or a plain hexdump) can re-read the payload.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def save_array(arr, path, **metadata) -> Path:
    """Write `arr` as <path>.f32 plus a <path>.txt sidecar."""
    arr = np.asarray(arr, dtype="<f4")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bin_path = path.with_suffix(".f32")
    bin_path.write_bytes(arr.tobytes(order="C"))
    lines = ["tracelab-array v1",
             "dtype float32 little-endian",
             "order C",
             "shape " + " ".join(str(s) for s in arr.shape)]
    for key, value in sorted(metadata.items()):
        lines.append(f"{key} {value}")
    bin_path.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    return bin_path


def load_array(path):
    """Read an array written by save_array; returns (array, metadata dict)."""
    path = Path(path)
    bin_path = path if path.suffix == ".f32" else path.with_suffix(".f32")
    sidecar = bin_path.with_suffix(".txt")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing sidecar for {bin_path}")
    meta = {}
    shape = None
    for ln in sidecar.read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("tracelab-array"):
            continue
        key, _, rest = ln.partition(" ")
        if key == "shape":
            shape = tuple(int(x) for x in rest.split())
        elif key in ("dtype", "order"):
            continue
        else:
            meta[key] = rest
    if shape is None:
        raise ValueError(f"sidecar {sidecar} lacks a shape line")
    arr = np.frombuffer(bin_path.read_bytes(), dtype="<f4").reshape(shape)
    return arr.astype(np.float32), meta
