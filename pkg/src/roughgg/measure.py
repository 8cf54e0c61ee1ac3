"""Measure-theoretic classification and size estimation on rough sets.

Cells are labeled interior / exterior / essential-boundary by the volume
fraction of the body in a reference ball (one fixed radius, default 8
spacings, thresholds at tau and 1-tau).  The boundary decomposes into
reduced facets (indicator jumps), the explicit crack part, and
exterior-density boundary cells; their combined (n-1)-measure is the
quantity every bound in this package is measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from ._util import fft_context
from .domain import RoughSet
from .errors import InputError
from .gridcore import FacetArrays, Grid, unit_ball_volume
from .mollify import MollifierKernel

EXTERIOR = 0
ESSBOUNDARY = 1
INTERIOR = 2

DEFAULT_TAU = 0.05


@dataclass(frozen=True)
class DensityProfile:
    """Volume-fraction samples of a set in shrinking balls at one point."""

    point: tuple[float, ...]
    radii: tuple[float, ...]
    ratios: tuple[float, ...]

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.radii, self.radii[1:])):
            raise InputError("radii must be strictly decreasing")
        if any(not 0.0 <= r <= 1.0 for r in self.ratios):
            raise InputError("ratios must lie in [0, 1]")


@dataclass
class Classification:
    """Per-cell labels partitioning the grid, plus the raw density field."""

    labels: np.ndarray  # int8: EXTERIOR / ESSBOUNDARY / INTERIOR
    density_at_finest: np.ndarray
    r_star: float
    tau: float

    def count(self, label: int) -> int:
        return int((self.labels == label).sum())

    def to_pgm_levels(self) -> np.ndarray:
        out = np.zeros(self.labels.shape, dtype=np.uint8)
        out[self.labels == ESSBOUNDARY] = 128
        out[self.labels == INTERIOR] = 255
        return out


@dataclass
class BoundaryDecomposition:
    """Reduced facets, crack facets, exterior boundary cells, and the
    measure of the boundary minus the measure-theoretic exterior."""

    reduced: FacetArrays
    inside_lower: list[np.ndarray]  # per axis: body is on the lower side
    crack_part: FacetArrays
    exterior_part: np.ndarray  # bool cells
    reduced_measure: float
    crack_measure: float

    @property
    def star_measure(self) -> float:
        return self.reduced_measure + self.crack_measure


@dataclass
class FacetMeasure:
    """Uniform surface measure on a facet set (optionally length-corrected)."""

    facets: FacetArrays
    weight_per_facet: float
    total: float


@dataclass
class AhlforsReport:
    constant: float
    witnesses: list[tuple[tuple[float, ...], float, float]]


def _ball_count(set_: RoughSet, center, r: float) -> int:
    grid = set_.grid
    dx = grid.spacing
    center = np.asarray(center, dtype=float)
    lo_idx = np.maximum(np.floor((center - r - np.asarray(grid.origin)) / dx - 0.5), 0)
    hi_idx = np.minimum(
        np.ceil((center + r - np.asarray(grid.origin)) / dx + 0.5),
        np.asarray(grid.extents),
    )
    sl = tuple(slice(int(l), int(h)) for l, h in zip(lo_idx, hi_idx))
    sub = set_.cells[sl]
    if sub.size == 0:
        return 0
    coords = []
    for a in range(grid.n):
        shape = [1] * grid.n
        shape[a] = sl[a].stop - sl[a].start
        c = grid.origin[a] + (np.arange(sl[a].start, sl[a].stop) + 0.5) * dx
        coords.append((c - center[a]).reshape(shape) ** 2)
    d2 = sum(np.broadcast_arrays(*coords))
    return int((sub & (d2 <= r * r + 1e-12 * r * r)).sum())


def density(set_: RoughSet, center, r: float) -> float:
    """Volume fraction of the body in the closed ball B_r(center).

    Counts indicator-true cell centers, scaled by the analytic ball
    volume, clamped to [0, 1].
    """
    grid = set_.grid
    if r < 2.0 * grid.spacing:
        raise InputError(f"density radius {r} must be >= 2 spacings")
    center = np.asarray(center, dtype=float)
    glo, ghi = grid.bounds()
    if np.any(center - r < glo) or np.any(center + r > ghi):
        raise InputError("density ball exits the grid")
    count = _ball_count(set_, center, r)
    ratio = count * grid.cell_volume / (unit_ball_volume(grid.n) * r**grid.n)
    return float(min(1.0, max(0.0, ratio)))


def density_profile(set_: RoughSet, point, radii) -> DensityProfile:
    radii = tuple(float(r) for r in radii)
    if radii and radii[-1] < 4.0 * set_.grid.spacing:
        raise InputError("smallest profile radius must be >= 4 spacings")
    ratios = tuple(density(set_, point, r) for r in radii)
    return DensityProfile(tuple(float(x) for x in point), radii, ratios)


def _density_field(set_: RoughSet, r: float) -> np.ndarray:
    """Per-cell ball-fraction field (out-of-grid counts as exterior)."""
    grid = set_.grid
    radius_cells = r / grid.spacing
    ticks = int(math.floor(radius_cells + 1e-9))
    axes = [np.arange(-ticks, ticks + 1) for _ in range(grid.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    kernel = (sum(m**2 for m in mesh) <= radius_cells**2 * (1 + 1e-12)).astype(float)
    with fft_context():
        counts = fftconvolve(set_.cells.astype(float), kernel, mode="same")
    ratio = counts * grid.cell_volume / (unit_ball_volume(grid.n) * r**grid.n)
    return np.clip(ratio, 0.0, 1.0)


def classify(set_: RoughSet, r_star: float | None = None,
             tau: float = DEFAULT_TAU) -> Classification:
    """Label every cell interior / exterior / essential-boundary.

    Density at the reference radius decides the label; two exact overrides
    restore what openness guarantees in the vanishing-radius limit: a true
    cell whose full 3^n neighborhood is true is interior (and the mirrored
    rule for false cells), and cells touching a crack facet are interior
    since cracks live inside the body.
    """
    grid = set_.grid
    if r_star is None:
        r_star = 8.0 * grid.spacing
    if r_star < 4.0 * grid.spacing:
        raise InputError("classification radius must be >= 4 spacings")
    if not 0.0 < tau < 0.5:
        raise InputError("tau must lie in (0, 1/2)")
    dens = _density_field(set_, r_star)
    labels = np.full(grid.extents, ESSBOUNDARY, dtype=np.int8)
    labels[dens >= 1.0 - tau] = INTERIOR
    labels[dens <= tau] = EXTERIOR
    structure = np.ones((3,) * grid.n, dtype=bool)
    deep_in = ndimage.binary_erosion(set_.cells, structure=structure)
    deep_out = ndimage.binary_erosion(~set_.cells, structure=structure)
    labels[deep_in] = INTERIOR
    labels[deep_out] = EXTERIOR
    for a in range(grid.n):
        mask = set_.cracks.masks[a]
        if not mask.any():
            continue
        sl_lo = [slice(None)] * grid.n
        sl_hi = [slice(None)] * grid.n
        sl_lo[a] = slice(1, None)
        sl_hi[a] = slice(0, -1)
        adj = np.zeros(grid.extents, dtype=bool)
        adj |= mask[tuple(sl_lo)]  # lower cells
        adj |= mask[tuple(sl_hi)]  # upper cells
        labels[adj] = INTERIOR
    return Classification(labels=labels, density_at_finest=dens, r_star=r_star, tau=tau)


def reduced_facets(set_: RoughSet) -> tuple[FacetArrays, list[np.ndarray]]:
    """Facets separating indicator-true from indicator-false cells.

    Returns the facet masks and, per axis, the sub-mask where the body is
    on the lower side of the facet.
    """
    grid = set_.grid
    reduced = FacetArrays(grid)
    inside_lower = []
    for a in range(grid.n):
        shape = grid.facet_shape(a)
        lo_val = np.zeros(shape, dtype=bool)
        up_val = np.zeros(shape, dtype=bool)
        sl_lo = [slice(None)] * grid.n
        sl_up = [slice(None)] * grid.n
        sl_lo[a] = slice(1, None)
        sl_up[a] = slice(0, -1)
        lo_val[tuple(sl_lo)] = set_.cells
        up_val[tuple(sl_up)] = set_.cells
        mask = lo_val != up_val
        reduced.masks[a] = mask
        inside_lower.append(mask & lo_val)
    return reduced, inside_lower


def boundary_decomposition(set_: RoughSet, cls: Classification) -> BoundaryDecomposition:
    """Split the discrete boundary into the reduced part, the crack part,
    and exterior-density boundary cells, with the combined measure."""
    grid = set_.grid
    reduced, inside_lower = reduced_facets(set_)
    overlap = reduced.intersection_count(set_.cracks)
    if overlap:
        raise InputError("crack facets may not coincide with reduced facets")
    touching = np.zeros(grid.extents, dtype=bool)
    for a in range(grid.n):
        mask = reduced.masks[a]
        sl_lo = [slice(None)] * grid.n
        sl_hi = [slice(None)] * grid.n
        sl_lo[a] = slice(1, None)
        sl_hi[a] = slice(0, -1)
        touching |= mask[tuple(sl_lo)]
        touching |= mask[tuple(sl_hi)]
    exterior_part = touching & ~set_.cells & (cls.labels == EXTERIOR)
    return BoundaryDecomposition(
        reduced=reduced,
        inside_lower=inside_lower,
        crack_part=set_.cracks.copy(),
        exterior_part=exterior_part,
        reduced_measure=reduced.count() * grid.facet_area,
        crack_measure=set_.crack_length(),
    )


def perimeter(grid: Grid, cells: np.ndarray, eps: float,
              window=None) -> float:
    """Perimeter estimate: total variation of the mollified indicator.

    Integrates |grad(chi * rho_eps)| over the window; for a smooth set the
    value converges to the true perimeter as spacing and eps shrink with
    eps/spacing fixed.
    """
    if eps < 2.0 * grid.spacing:
        raise InputError(f"mollification width {eps} must be >= 2 spacings")
    if not np.asarray(cells).any():
        return 0.0
    kernel = MollifierKernel(eps, grid)
    w = kernel.smooth_cells(np.asarray(cells, dtype=float))
    grads = np.gradient(w, grid.spacing)
    if grid.n == 2:
        mag = np.hypot(grads[0], grads[1])
    else:
        mag = np.sqrt(sum(g**2 for g in grads))
    if window is not None:
        mag = mag[window.slices()]
    return float(mag.sum() * grid.cell_volume)


def hausdorff_measure(grid: Grid, facets: FacetArrays,
                      source_length: float | None = None) -> FacetMeasure:
    """Uniform (n-1)-measure on a facet set.

    With a polyline source attached (snapped cracks) the total is
    corrected to the source length; facet counting alone overestimates
    staircase-snapped slanted sets.
    """
    count = facets.count()
    raw_total = count * grid.facet_area
    if count == 0:
        return FacetMeasure(facets=facets.copy(), weight_per_facet=0.0, total=0.0)
    if source_length is None:
        return FacetMeasure(facets=facets.copy(), weight_per_facet=grid.facet_area,
                            total=raw_total)
    scale = source_length / raw_total
    return FacetMeasure(facets=facets.copy(),
                        weight_per_facet=grid.facet_area * scale,
                        total=float(source_length))


def ahlfors_constant(grid: Grid, facets: FacetArrays,
                     sample_count: int | None = None,
                     radii=None) -> AhlforsReport:
    """Best constant C with measure(set within B_r) <= C r^(n-1) over the
    sampled centers and radii (deterministic lexicographic stride)."""
    from scipy.spatial import cKDTree

    centers = facets.centers()
    if centers.shape[0] == 0:
        raise InputError("Ahlfors estimation needs a nonempty facet set")
    if radii is None:
        r = 4.0 * grid.spacing
        rmax = max(np.ptp(centers, axis=0).max(), 8.0 * grid.spacing)
        radii = []
        while r <= rmax:
            radii.append(r)
            r *= 2.0
    radii = [float(r) for r in radii]
    if min(radii) < 4.0 * grid.spacing:
        raise InputError("Ahlfors radii must be >= 4 spacings")
    stride = 1
    if sample_count is not None and centers.shape[0] > sample_count:
        stride = centers.shape[0] // sample_count
    sampled = centers[::stride]
    tree = cKDTree(centers)
    area = grid.facet_area
    witnesses = []
    best = 0.0
    for r in radii:
        counts = tree.query_ball_point(sampled, r, return_length=True)
        ratios = counts * area / r ** (grid.n - 1)
        j = int(np.argmax(ratios))
        witnesses.append((tuple(float(v) for v in sampled[j]), r, float(ratios[j])))
        best = max(best, float(ratios[j]))
    return AhlforsReport(constant=best, witnesses=witnesses)


@dataclass
class StarDiagnostic:
    """Refinement-ladder growth report for the boundary measure."""

    rows: list[dict]
    slope_total: float
    slope_reduced: float
    slope_crack: float | None

    @property
    def slope(self) -> float:
        """Growth rate of the worst component; ~0 supports finiteness."""
        slopes = [self.slope_total, self.slope_reduced]
        if self.slope_crack is not None:
            slopes.append(self.slope_crack)
        return max(slopes)


def _fit_loglog(xs, ys) -> float:
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.maximum(np.asarray(ys, dtype=float), 1e-300))
    A = np.stack([xs, np.ones_like(xs)], axis=1)
    coeff, *_ = np.linalg.lstsq(A, ys, rcond=None)
    return float(coeff[0])


def star_condition_diagnostic(spec, spacings) -> StarDiagnostic:
    """Fit log(boundary measure) against log(1/spacing) over a ladder.

    For the Cantor-cross generator the generation is tied to the spacing
    (k = round(log3(1/spacing))), so the crack component grows like
    (4/3)^k and its fitted slope is log(4/3)/log(3).  Flat slopes on every
    component support a finite boundary measure.
    """
    from .domain import cantor_cross, cantor_cross_spec, make_grid, rasterize

    spacings = [float(s) for s in spacings]
    if len(spacings) < 3:
        raise InputError("refinement ladder needs >= 3 levels")
    rows = []
    for dx in spacings:
        if getattr(spec, "preset", None) == "cantor-cross":
            k = max(0, int(round(-math.log(dx) / math.log(3.0))))
            level_spec = cantor_cross_spec(k)
            grid = make_grid(level_spec, dx)
            set_ = cantor_cross(k, grid)
        else:
            grid = make_grid(spec, dx)
            set_ = rasterize(spec, grid)
        cls = classify(set_)
        bd = boundary_decomposition(set_, cls)
        rows.append(
            {
                "spacing": dx,
                "star_measure": bd.star_measure,
                "reduced": bd.reduced_measure,
                "crack": bd.crack_measure,
            }
        )
    inv = [1.0 / r["spacing"] for r in rows]
    slope_total = _fit_loglog(inv, [r["star_measure"] for r in rows])
    slope_reduced = _fit_loglog(inv, [max(r["reduced"], 1e-300) for r in rows])
    has_crack = all(r["crack"] > 0.0 for r in rows)
    slope_crack = (
        _fit_loglog(inv, [r["crack"] for r in rows]) if has_crack else None
    )
    return StarDiagnostic(rows=rows, slope_total=slope_total,
                          slope_reduced=slope_reduced, slope_crack=slope_crack)
