"""On-disk formats.

TensorFile (.snr): little-endian binary with header
    magic   4 bytes  b"SNR1"
    dtype   u8       1 = 32-bit float (the only defined code)
    rank    u8
    dims    rank x u64
    labels  per dim: u16 length + UTF-8 axis label
followed by the row-major float32 payload.  Round-trips are bit-exact.

Point clouds are ASCII PLY (element vertex, float x y z) written with
shortest round-trip float32 formatting, and heatmaps are 16-bit binary
PGM (P5, big-endian samples, min -> 0, max -> 65535).

Writes go through a temp file + rename so partially written artifacts
never appear under the final name.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile

import numpy as np

from .errors import FileFormatError
from .metrics import PointCloud

MAGIC = b"SNR1"
DTYPE_F32 = 1


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(path, array, axis_labels=None):
    """Serialize an array as float32; returns the written byte count."""
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    labels = tuple(axis_labels) if axis_labels is not None else tuple(f"dim{i}" for i in range(arr.ndim))
    if len(labels) != arr.ndim:
        raise FileFormatError("one axis label per dimension required")
    parts = [MAGIC, struct.pack("<BB", DTYPE_F32, arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    for lab in labels:
        enc = lab.encode("utf-8")
        parts.append(struct.pack("<H", len(enc)) + enc)
    parts.append(arr.tobytes(order="C"))
    blob = b"".join(parts)
    atomic_write_bytes(path, blob)
    return len(blob)


def read_tensor(path):
    """Read a TensorFile; returns (float32 array, axis labels)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise FileFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 6:
        raise FileFormatError(f"{path}: truncated header")
    dtype, rank = struct.unpack_from("<BB", data, 4)
    if dtype != DTYPE_F32:
        raise FileFormatError(f"{path}: unknown dtype code {dtype}")
    off = 6
    if len(data) < off + 8 * rank:
        raise FileFormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}Q", data, off)
    off += 8 * rank
    labels = []
    for _ in range(rank):
        (n,) = struct.unpack_from("<H", data, off)
        off += 2
        labels.append(data[off : off + n].decode("utf-8"))
        off += n
    count = int(np.prod(dims)) if rank else 1
    payload = data[off:]
    if len(payload) != 4 * count:
        raise FileFormatError(f"{path}: payload is {len(payload)} bytes, expected {4 * count}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return arr.copy(), tuple(labels)


def _fmt_f32(v):
    # numpy float32 repr is the shortest string that parses back bit-exactly
    return repr(np.float32(v)).removeprefix("np.float32(").removesuffix(")")


def write_ply(path, cloud):
    """ASCII PLY point cloud (element vertex, property float x/y/z)."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    pts = np.asarray(pts, dtype=np.float32).reshape(-1, 3)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    for p in pts:
        lines.append(f"{_fmt_f32(p[0])} {_fmt_f32(p[1])} {_fmt_f32(p[2])}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_ply(path):
    """Read an ASCII PLY with float x/y/z vertices; returns (N, 3) float32."""
    with open(path, "r", encoding="ascii") as fh:
        if fh.readline().strip() != "ply":
            raise FileFormatError(f"{path}: not a PLY file")
        n = None
        while True:
            line = fh.readline()
            if not line:
                raise FileFormatError(f"{path}: missing end_header")
            tok = line.split()
            if tok[:2] == ["element", "vertex"]:
                n = int(tok[2])
            elif tok and tok[0] == "end_header":
                break
        if n is None:
            raise FileFormatError(f"{path}: no vertex element")
        out = np.empty((n, 3), dtype=np.float32)
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) < 3:
                raise FileFormatError(f"{path}: truncated vertex list")
            out[i] = [np.float32(parts[0]), np.float32(parts[1]), np.float32(parts[2])]
    return out


def write_pgm16(path, array):
    """16-bit binary PGM heatmap: min -> 0, max -> 65535, linear."""
    a = np.asarray(array, dtype=float)
    if a.ndim != 2:
        raise FileFormatError("PGM rendering requires a rank-2 tensor")
    lo, hi = float(a.min()), float(a.max())
    if hi > lo:
        scaled = np.rint((a - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(a)
    data = scaled.astype(">u2").tobytes()
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode("ascii")
    atomic_write_bytes(path, header + data)


def read_pgm16(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        fields = []
        off = 0
        while len(fields) < 4:
            while data[off] in b" \t\r\n":
                off += 1
            if data[off : off + 1] == b"#":
                off = data.index(b"\n", off) + 1
                continue
            end = off
            while data[end] not in b" \t\r\n":
                end += 1
            fields.append(data[off:end])
            off = end
        off += 1
    except (IndexError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed PGM header") from exc
    if fields[0] != b"P5" or fields[3] != b"65535":
        raise FileFormatError(f"{path}: expected 16-bit P5 PGM")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data[off:], dtype=">u2").reshape(h, w)


# ---------------------------------------------------------------------------
# minimal deterministic TOML emitter (stdlib tomllib handles parsing)


def _toml_scalar(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        out = repr(f)
        return out if any(c in out for c in ".einf") else out + ".0"
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise FileFormatError(f"cannot serialize {type(v).__name__} to TOML")


def toml_dumps(table):
    """Serialize a dict to TOML. Scalars/lists first, then sub-tables,
    then arrays-of-tables; insertion order is preserved (deterministic
    output for deterministic input)."""

    def emit(table, prefix, out):
        scalars = {k: v for k, v in table.items() if not isinstance(v, (dict, list)) or (isinstance(v, list) and not (v and isinstance(v[0], dict)))}
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        arrays = {
            k: v for k, v in table.items() if isinstance(v, list) and v and isinstance(v[0], dict)
        }
        for k, v in scalars.items():
            out.append(f"{k} = {_toml_scalar(v)}")
        for k, v in subtables.items():
            out.append("")
            out.append(f"[{prefix}{k}]")
            emit(v, f"{prefix}{k}.", out)
        for k, rows in arrays.items():
            for row in rows:
                out.append("")
                out.append(f"[[{prefix}{k}]]")
                emit(row, f"{prefix}{k}.", out)

    out = []
    emit(table, "", out)
    return "\n".join(out).lstrip("\n") + "\n"


def write_toml(path, table):
    atomic_write_bytes(path, toml_dumps(table).encode("utf-8"))


def load_toml(path):
    import tomllib

    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
