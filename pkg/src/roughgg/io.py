"""On-disk formats: PGM rasters, the flux-field binary, trace CSV."""

from __future__ import annotations

import io
import struct

import numpy as np

from ._util import atomic_write_bytes, atomic_write_text, format_float
from .dmfield import FluxField
from .domain import RoughSet
from .errors import InputError
from .gridcore import MINUS, PLUS, Grid

MAGIC = b"DMF1"


def pgm_bytes(levels: np.ndarray) -> bytes:
    """P5 image from a 2D uint8 array indexed [ix, iy]; the first axis
    maps to image columns and the second to rows, top row = largest iy."""
    if levels.ndim != 2:
        raise InputError("PGM export needs a 2D array")
    img = levels.T[::-1, :]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_pgm(path: str, levels: np.ndarray) -> None:
    atomic_write_bytes(path, pgm_bytes(levels))


def trace_strip_levels(side_weights: dict, grid: Grid, height: int = 16) -> np.ndarray:
    """Trace densities unrolled along lexicographically ordered boundary
    facet sides, mapped to gray levels (128 = zero)."""
    keys = sorted(side_weights)
    if not keys:
        return np.full((1, height), 128, dtype=np.uint8)
    vals = np.array([side_weights[k] for k in keys]) / grid.facet_area
    vmax = np.abs(vals).max() or 1.0
    gray = np.clip(128 + 127 * vals / vmax, 0, 255).astype(np.uint8)
    return np.repeat(gray[:, None], height, axis=1)


def flux_field_bytes(F: FluxField) -> bytes:
    """Binary layout: magic, u8 n, u64 extents, f64 spacing, f64 origin,
    f64 sup bound; per axis the canonical facet array (lexicographic
    C-order, zero where two-sided); then a sparse section of two-sided
    records (u8 axis, u64 index, u8 side, f64 value)."""
    grid = F.grid
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", grid.n))
    buf.write(struct.pack(f"<{grid.n}Q", *grid.extents))
    buf.write(struct.pack("<d", grid.spacing))
    buf.write(struct.pack(f"<{grid.n}d", *grid.origin))
    buf.write(struct.pack("<d", F.sup_bound))
    twosided = []
    for a in range(grid.n):
        two = F.topology.crack[a] | F.topology.boundary[a]
        canonical = np.where(two, 0.0, F.vminus[a])
        buf.write(np.ascontiguousarray(canonical, dtype="<f8").tobytes())
        for i in np.argwhere(two):
            idx = tuple(int(v) for v in i)
            twosided.append((a, idx, MINUS, float(F.vminus[a][idx])))
            twosided.append((a, idx, PLUS, float(F.vplus[a][idx])))
    buf.write(struct.pack("<Q", len(twosided)))
    for a, idx, side, value in twosided:
        buf.write(struct.pack("<B", a))
        buf.write(struct.pack(f"<{grid.n}Q", *idx))
        buf.write(struct.pack("<Bd", side, value))
    return buf.getvalue()


def write_flux_field(path: str, F: FluxField) -> None:
    atomic_write_bytes(path, flux_field_bytes(F))


def read_flux_field(path: str, set_: RoughSet) -> FluxField:
    """Rebuild a flux field over an existing rough set (the binary does
    not carry the domain; grids must agree)."""
    with open(path, "rb") as handle:
        data = handle.read()
    off = 0
    if data[:4] != MAGIC:
        raise InputError("not a flux-field file (bad magic)")
    off = 4
    (n,) = struct.unpack_from("<B", data, off)
    off += 1
    extents = struct.unpack_from(f"<{n}Q", data, off)
    off += 8 * n
    (spacing,) = struct.unpack_from("<d", data, off)
    off += 8
    origin = struct.unpack_from(f"<{n}d", data, off)
    off += 8 * n
    (sup_bound,) = struct.unpack_from("<d", data, off)
    off += 8
    grid = set_.grid
    if (n, extents, spacing, origin) != (
        grid.n,
        tuple(grid.extents),
        grid.spacing,
        tuple(grid.origin),
    ):
        raise InputError("flux-field grid does not match the rough set")
    F = FluxField(set_, sup_bound)
    for a in range(n):
        shape = grid.facet_shape(a)
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        F.vminus[a][...] = arr
        F.vplus[a][...] = arr
    (records,) = struct.unpack_from("<Q", data, off)
    off += 8
    for _ in range(records):
        (a,) = struct.unpack_from("<B", data, off)
        off += 1
        idx = struct.unpack_from(f"<{n}Q", data, off)
        off += 8 * n
        side, value = struct.unpack_from("<Bd", data, off)
        off += 9
        if side == MINUS:
            F.vminus[a][tuple(idx)] = value
        else:
            F.vplus[a][tuple(idx)] = value
    return F


def trace_csv_text(side_weights: dict, grid: Grid) -> str:
    lines = ["axis," + ",".join(f"i{d}" for d in range(grid.n)) + ",side,g"]
    for key in sorted(side_weights):
        a, idx, side = key
        g = side_weights[key] / grid.facet_area
        lines.append(
            f"{a}," + ",".join(str(v) for v in idx) + f",{side},{format_float(g)}"
        )
    return "\n".join(lines) + "\n"


def write_trace_csv(path: str, side_weights: dict, grid: Grid) -> None:
    atomic_write_text(path, trace_csv_text(side_weights, grid))


def read_trace_csv(path: str, grid: Grid) -> dict:
    """Parse (axis, facet index, side) -> g rows back into a dict."""
    out = {}
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline()
        if not header.startswith("axis,"):
            raise InputError("trace CSV must start with the axis header")
        for line_no, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != grid.n + 3:
                raise InputError(f"trace CSV line {line_no}: wrong column count")
            try:
                axis = int(parts[0])
                idx = tuple(int(v) for v in parts[1 : 1 + grid.n])
                side = int(parts[1 + grid.n])
                g = float(parts[2 + grid.n])
            except ValueError as exc:
                raise InputError(f"trace CSV line {line_no}: {exc}") from exc
            if side not in (MINUS, PLUS):
                raise InputError(f"trace CSV line {line_no}: side must be 0 or 1")
            out[(axis, idx, side)] = g
    return out
