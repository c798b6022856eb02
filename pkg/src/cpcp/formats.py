"""On-disk formats: DMAT1 matrices, SUPP1 supports, BASIS1 span bases,
and a JSON writer that renders every float at 17 significant digits.

DMAT1: text header line ``DMAT1 <rows> <cols>`` followed by rows*cols
little-endian float64 values in row-major order. SUPP1: text, header
``SUPP1 <rows> <cols> <count>`` then one ``i j`` line per entry (0-based).
BASIS1: header line ``BASIS1 <p> <rows> <cols>`` followed by p DMAT1
payloads in one stream.
"""

import math

import numpy as np

from .subspaces import SpanBasis, SupportSet


def _read_header_line(f):
    raw = bytearray()
    while True:
        ch = f.read(1)
        if not ch:
            raise ValueError("unexpected end of file while reading header")
        if ch == b"\n":
            break
        raw += ch
        if len(raw) > 256:
            raise ValueError("header line too long")
    return raw.decode("ascii")


def write_dmat_stream(f, a):
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    if a.ndim != 2:
        raise ValueError("DMAT1 stores 2-D matrices")
    f.write(f"DMAT1 {a.shape[0]} {a.shape[1]}\n".encode("ascii"))
    f.write(a.tobytes())


def read_dmat_stream(f):
    header = _read_header_line(f)
    parts = header.split()
    if len(parts) != 3 or parts[0] != "DMAT1":
        raise ValueError(f"bad DMAT1 header: {header!r}")
    rows, cols = int(parts[1]), int(parts[2])
    if rows <= 0 or cols <= 0:
        raise ValueError(f"bad DMAT1 dimensions {rows} x {cols}")
    nbytes = rows * cols * 8
    payload = f.read(nbytes)
    if len(payload) != nbytes:
        raise ValueError(
            f"truncated DMAT1 payload: expected {nbytes} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)


def write_dmat(path, a):
    with open(path, "wb") as f:
        write_dmat_stream(f, a)


def read_dmat(path):
    with open(path, "rb") as f:
        out = read_dmat_stream(f)
        if f.read(1):
            raise ValueError(f"trailing bytes after DMAT1 payload in {path}")
    return out


def write_support(path, omega):
    pairs = omega.pairs()
    with open(path, "w", encoding="ascii") as f:
        f.write(f"SUPP1 {omega.shape[0]} {omega.shape[1]} {len(pairs)}\n")
        for i, j in pairs:
            f.write(f"{i} {j}\n")


def read_support(path):
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().split()
        if len(header) != 4 or header[0] != "SUPP1":
            raise ValueError(f"bad SUPP1 header in {path}")
        rows, cols, count = int(header[1]), int(header[2]), int(header[3])
        mask = np.zeros((rows, cols), dtype=bool)
        for k in range(count):
            line = f.readline()
            if not line:
                raise ValueError(f"truncated SUPP1 file: expected {count} entries")
            i, j = (int(t) for t in line.split())
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"SUPP1 index ({i}, {j}) out of range")
            if mask[i, j]:
                raise ValueError(f"duplicate SUPP1 entry ({i}, {j})")
            mask[i, j] = True
    return SupportSet(rows, cols, mask)


def write_basis(path, basis):
    with open(path, "wb") as f:
        p = len(basis)
        rows, cols = basis.shape
        f.write(f"BASIS1 {p} {rows} {cols}\n".encode("ascii"))
        for g in basis:
            write_dmat_stream(f, g)


def read_basis(path):
    with open(path, "rb") as f:
        header = _read_header_line(f)
        parts = header.split()
        if len(parts) != 4 or parts[0] != "BASIS1":
            raise ValueError(f"bad BASIS1 header: {header!r}")
        p, rows, cols = int(parts[1]), int(parts[2]), int(parts[3])
        elements = []
        for _ in range(p):
            g = read_dmat_stream(f)
            if g.shape != (rows, cols):
                raise ValueError("BASIS1 element shape mismatch")
            elements.append(g)
        if f.read(1):
            raise ValueError(f"trailing bytes after BASIS1 payload in {path}")
    return SpanBasis(elements, shape=(rows, cols))


def _format_float(x):
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite value is not representable in JSON output")
    return format(x, ".17g")


def dumps_json(obj, indent=0):
    """Serialize nested dicts/lists/scalars; floats at 17 significant digits."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{inner}"{k}": {dumps_json(v, indent + 2)}' for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{inner}{dumps_json(v, indent + 2)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{out}"'
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path, obj):
    with open(path, "w", encoding="ascii") as f:
        f.write(dumps_json(obj))
        f.write("\n")
