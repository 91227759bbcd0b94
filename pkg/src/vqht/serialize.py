"""Text container for complex matrices.

Format (one record per file):

    vqht-matrix v1
    kind: probe-params
    shape: 6 1
    dims: 2 3            <- optional tensor-factor dimensions
    meta: ns=0.1         <- repeatable key=value pairs
    data:
    <re> <im>            <- row-major, one entry per line, %.17g

17 significant digits round-trip IEEE doubles exactly, so save
followed by load reproduces the array bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

MAGIC = "vqht-matrix v1"


@dataclass
class MatrixRecord:
    array: np.ndarray
    kind: str = "matrix"
    dims: tuple = ()
    meta: dict = field(default_factory=dict)


def _fmt(x):
    return format(float(x), ".17g")


def save_matrix(path, array, kind="matrix", dims=(), meta=None):
    array = np.asarray(array, dtype=complex)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ValidationError("only 1-D or 2-D arrays are supported")
    lines = [MAGIC, f"kind: {kind}", f"shape: {array.shape[0]} {array.shape[1]}"]
    if dims:
        lines.append("dims: " + " ".join(str(int(d)) for d in dims))
    for key, value in (meta or {}).items():
        key = str(key)
        if "=" in key or "\n" in key or "\n" in str(value):
            raise ValidationError(f"meta key {key!r} not representable")
        lines.append(f"meta: {key}={value}")
    lines.append("data:")
    for entry in array.reshape(-1):
        lines.append(f"{_fmt(entry.real)} {_fmt(entry.imag)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix(path):
    with open(path, encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != MAGIC:
        raise ValidationError(f"{path}: not a {MAGIC} file")
    kind = "matrix"
    shape = None
    dims = ()
    meta = {}
    i = 1
    while i < len(raw):
        line = raw[i].strip()
        i += 1
        if line == "data:":
            break
        if not line:
            continue
        if ":" not in line:
            raise ValidationError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "kind":
            kind = value
        elif key == "shape":
            parts = value.split()
            if len(parts) != 2:
                raise ValidationError(f"{path}: bad shape {value!r}")
            shape = (int(parts[0]), int(parts[1]))
        elif key == "dims":
            dims = tuple(int(p) for p in value.split())
        elif key == "meta":
            mkey, sep, mval = value.partition("=")
            if not sep:
                raise ValidationError(f"{path}: bad meta entry {value!r}")
            meta[mkey.strip()] = mval.strip()
        else:
            raise ValidationError(f"{path}: unknown header key {key!r}")
    else:
        raise ValidationError(f"{path}: missing data section")
    if shape is None:
        raise ValidationError(f"{path}: missing shape header")
    n = shape[0] * shape[1]
    body = [ln for ln in raw[i:] if ln.strip()]
    if len(body) != n:
        raise ValidationError(f"{path}: expected {n} entries, got {len(body)}")
    flat = np.empty(n, dtype=complex)
    for j, line in enumerate(body):
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}: bad data line {line!r}")
        try:
            flat[j] = complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ValidationError(f"{path}: bad number on line {line!r}") \
                from exc
    return MatrixRecord(flat.reshape(shape), kind, dims, meta)
