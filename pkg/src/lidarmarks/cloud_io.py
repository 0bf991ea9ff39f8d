"""Reading and writing clouds and label sidecars in bit-stable formats.

Cloud file layout::

    FIELDS x y z range intensity reflectivity ring col valid
    COUNT <n>
    LAYERS <n_layers>
    COLS <n_cols>
    FRAME <id>            # optional
    DATA text|binary
    <payload>

Text payload: one point per row, whitespace separated, column order as
declared by FIELDS. Binary payload: little-endian packed records, per
point 3x float64 (x, y, z), float64 range, float32 intensity, uint16
reflectivity, uint16 ring, uint16 col, uint8 validity.

Label sidecar: one token per line from {road, marking, other}; line k
labels point k of the referenced cloud.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .cloud import PointCloud
from .errors import CorruptionError, SchemaError

REQUIRED_FIELDS = ("x", "y", "z", "range", "intensity", "reflectivity", "ring", "col")
ALL_FIELDS = REQUIRED_FIELDS + ("valid",)
LABEL_TOKENS = ("road", "marking", "other")

_BINARY_DTYPE = np.dtype([
    ("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("range", "<f8"),
    ("intensity", "<f4"), ("reflectivity", "<u2"),
    ("ring", "<u2"), ("col", "<u2"), ("valid", "u1"),
])

_FIELD_ATTR = {
    "x": "x", "y": "y", "z": "z", "range": "r",
    "intensity": "intensity", "reflectivity": "reflectivity",
    "ring": "ring", "col": "col", "valid": "valid",
}


def _parse_header(fh) -> dict:
    header = {"frame": "", "offset": 0}
    seen = set()
    while True:
        line = fh.readline()
        if not line:
            raise SchemaError("unexpected end of file inside header")
        header["offset"] += len(line)
        text = line.decode("ascii", errors="replace").strip()
        if not text:
            continue
        key, _, rest = text.partition(" ")
        if key in seen:
            raise SchemaError(f"duplicate header line '{key}'")
        seen.add(key)
        if key == "FIELDS":
            fields = tuple(rest.split())
            for f in fields:
                if f not in ALL_FIELDS:
                    raise SchemaError(f"unknown field '{f}'")
            for f in REQUIRED_FIELDS:
                if f not in fields:
                    raise SchemaError(f"missing required field '{f}'")
            header["fields"] = fields
        elif key in ("COUNT", "LAYERS", "COLS"):
            try:
                header[key.lower()] = int(rest)
            except ValueError as e:
                raise SchemaError(f"bad integer in header line '{text}'") from e
        elif key == "FRAME":
            header["frame"] = rest
        elif key == "DATA":
            if rest not in ("text", "binary"):
                raise SchemaError(f"unknown data layout '{rest}'")
            header["layout"] = rest
            break
        else:
            raise SchemaError(f"unknown header line '{key}'")
    for req in ("fields", "count", "layers", "cols", "layout"):
        if req not in header:
            raise SchemaError(f"missing header line '{req.upper()}'")
    return header


def read_cloud(path) -> PointCloud:
    """Parse a cloud file written by :func:`write_cloud`."""
    with open(path, "rb") as fh:
        header = _parse_header(fh)
        n = header["count"]
        fields = header["fields"]
        columns = {}
        if header["layout"] == "binary":
            payload = fh.read()
            expected = n * _BINARY_DTYPE.itemsize
            if len(payload) < expected:
                raise CorruptionError(
                    f"binary payload truncated: expected {expected} bytes, got {len(payload)}",
                    header["offset"] + len(payload),
                )
            if len(payload) > expected:
                raise CorruptionError(
                    f"trailing bytes after {n} records", header["offset"] + expected
                )
            rec = np.frombuffer(payload, dtype=_BINARY_DTYPE, count=n)
            for f in ALL_FIELDS:
                columns[f] = rec[f]
        else:
            try:
                data = np.loadtxt(io.BytesIO(fh.read()), dtype=np.float64, ndmin=2)
            except ValueError as e:
                raise SchemaError(f"malformed text payload: {e}") from e
            if data.size == 0:
                data = data.reshape(0, len(fields))
            if data.shape[0] != n:
                raise SchemaError(f"header COUNT {n} but payload has {data.shape[0]} rows")
            if data.shape[1] != len(fields):
                raise SchemaError(
                    f"{len(fields)} fields declared but rows have {data.shape[1]} columns"
                )
            for j, f in enumerate(fields):
                columns[f] = data[:, j]
        if "valid" not in columns:
            columns["valid"] = np.ones(n, dtype=bool)
        if n and columns["ring"].max() >= header["layers"]:
            raise SchemaError(
                f"ring index {int(columns['ring'].max())} >= declared layer count {header['layers']}"
            )
        return PointCloud(
            x=columns["x"], y=columns["y"], z=columns["z"], r=columns["range"],
            intensity=columns["intensity"], reflectivity=columns["reflectivity"],
            ring=columns["ring"], col=columns["col"],
            valid=columns["valid"].astype(bool),
            n_layers=header["layers"], n_cols=header["cols"], frame_id=header["frame"],
        )


def write_cloud(cloud: PointCloud, path, layout: str = "binary") -> None:
    """Write ``cloud`` to ``path``; output bytes are deterministic."""
    if layout not in ("text", "binary"):
        raise SchemaError(f"unknown data layout '{layout}'")
    lines = [
        "FIELDS " + " ".join(ALL_FIELDS),
        f"COUNT {len(cloud)}",
        f"LAYERS {cloud.n_layers}",
        f"COLS {cloud.n_cols}",
    ]
    if cloud.frame_id:
        lines.append(f"FRAME {cloud.frame_id}")
    lines.append(f"DATA {layout}")
    header = ("\n".join(lines) + "\n").encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            if layout == "binary":
                rec = np.empty(len(cloud), dtype=_BINARY_DTYPE)
                for f in ALL_FIELDS:
                    rec[f] = getattr(cloud, _FIELD_ATTR[f])
                fh.write(rec.tobytes())
            else:
                for k in range(len(cloud)):
                    fh.write((
                        f"{cloud.x[k]:.9g} {cloud.y[k]:.9g} {cloud.z[k]:.9g} "
                        f"{cloud.r[k]:.9g} {cloud.intensity[k]:.9g} "
                        f"{cloud.reflectivity[k]:.9g} {cloud.ring[k]:d} "
                        f"{cloud.col[k]:d} {int(cloud.valid[k]):d}\n"
                    ).encode("ascii"))
    except OSError as e:
        raise OSError(f"failed writing cloud to {path}: {e}") from e


def read_labels(path, expected_count: int | None = None) -> np.ndarray:
    """Read a label sidecar into an array of tokens."""
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            token = raw.strip()
            if not token:
                continue
            if token not in LABEL_TOKENS:
                raise SchemaError(f"unknown label token '{token}' at line {lineno}")
            labels.append(token)
    out = np.array(labels, dtype="U7")
    if expected_count is not None and out.size != expected_count:
        raise SchemaError(
            f"label count {out.size} does not match cloud point count {expected_count}"
        )
    return out


def write_labels(labels, path) -> None:
    arr = np.asarray(labels, dtype="U7")
    for token in np.unique(arr):
        if token not in LABEL_TOKENS:
            raise SchemaError(f"unknown label token '{token}'")
    try:
        with open(path, "w", encoding="ascii") as fh:
            for token in arr:
                fh.write(token + "\n")
    except OSError as e:
        raise OSError(f"failed writing labels to {path}: {e}") from e


def cloud_stem_paths(directory):
    """(cloud_path, label_path_or_None) pairs for every *.cloud in a directory."""
    out = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".cloud"):
            continue
        cloud_path = os.path.join(directory, name)
        label_path = os.path.join(directory, name[:-6] + ".labels")
        out.append((cloud_path, label_path if os.path.exists(label_path) else None))
    return out
