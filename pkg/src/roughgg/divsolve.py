"""Divergence-free fields with prescribed normal trace on rough sets.

The discrete problem: find a flux field with zero cell balance whose
boundary/crack facet-side values reproduce prescribed trace densities.
Crack facets cut the cell graph, so the two sides of a crack take
independent prescriptions; compatibility (zero net prescribed flux) is
enforced per connected component of the crack-split graph.

Two routes are provided: a direct graph-Laplacian solve, and a two-step
decomposition that first solves a box-wide problem whose divergence is
the negated trace measure (an explicit facet lift plus a cut-edge box
Laplacian), reads the exterior flux on the reduced boundary off that
global field, and then solves the reduced crack-free data on the body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dmfield import FluxField, divergence_measure, facet_topology, trace_measure
from .domain import RoughSet
from .errors import CompatibilityError, InputError, InvariantViolation
from .gridcore import MINUS, PLUS, Window, side_orient

DIRECT_DENSE_LIMIT = 100_000


class TraceData:
    """Prescribed trace densities on boundary/crack facet sides.

    Stored per axis as density arrays on the minus/plus side with masks
    marking which sides are prescribed; every prescribed side must be a
    legal support side (reduced inside side or crack side).
    """

    def __init__(self, set_: RoughSet):
        self.set = set_
        grid = set_.grid
        topo = facet_topology(set_)
        self.topology = topo
        self.gminus = [np.zeros(grid.facet_shape(a)) for a in range(grid.n)]
        self.gplus = [np.zeros(grid.facet_shape(a)) for a in range(grid.n)]
        self.mask_minus = []
        self.mask_plus = []
        for a in range(grid.n):
            crack = topo.crack[a]
            bdry = topo.boundary[a]
            inside_lower = topo.inside_lower[a]
            self.mask_minus.append(crack | (bdry & inside_lower))
            self.mask_plus.append(crack | (bdry & ~inside_lower))

    def set_side(self, axis: int, fidx, side: int, g: float) -> None:
        mask = self.mask_minus if side == MINUS else self.mask_plus
        if not mask[axis][tuple(fidx)]:
            raise InputError(
                f"(axis {axis}, {tuple(fidx)}, side {side}) is not a trace side"
            )
        arr = self.gminus if side == MINUS else self.gplus
        arr[axis][tuple(fidx)] = g

    def fill(self, fn) -> "TraceData":
        """Prescribe g = fn(x, nu) from facet centers and exterior normals."""
        grid = self.set.grid
        for a in range(grid.n):
            X = np.stack(np.broadcast_arrays(*grid.facet_center_mesh(a)), axis=-1)
            for side, mask, arr in (
                (MINUS, self.mask_minus[a], self.gminus),
                (PLUS, self.mask_plus[a], self.gplus),
            ):
                if not mask.any():
                    continue
                nu = np.zeros(grid.n)
                nu[a] = side_orient(side)
                vals = fn(X, nu)
                arr[a][mask] = vals[mask]
        return self

    @staticmethod
    def from_trace_measure(tm) -> "TraceData":
        raise NotImplementedError("use from_sides with an explicit rough set")

    @staticmethod
    def from_sides(set_: RoughSet, sides: dict) -> "TraceData":
        td = TraceData(set_)
        for (axis, fidx, side), g in sides.items():
            td.set_side(axis, fidx, side, float(g))
        return td

    def sides(self) -> dict:
        out = {}
        grid = self.set.grid
        for a in range(grid.n):
            for side, mask, arr in (
                (MINUS, self.mask_minus[a], self.gminus[a]),
                (PLUS, self.mask_plus[a], self.gplus[a]),
            ):
                for i in np.argwhere(mask & (arr != 0.0)):
                    out[(a, tuple(int(v) for v in i), side)] = float(arr[tuple(i)])
        return out

    @property
    def integral(self) -> float:
        grid = self.set.grid
        total = 0.0
        for a in range(grid.n):
            total += float(self.gminus[a][self.mask_minus[a]].sum())
            total += float(self.gplus[a][self.mask_plus[a]].sum())
        return total * grid.facet_area

    def abs_integral(self) -> float:
        grid = self.set.grid
        total = 0.0
        for a in range(grid.n):
            total += float(np.abs(self.gminus[a][self.mask_minus[a]]).sum())
            total += float(np.abs(self.gplus[a][self.mask_plus[a]]).sum())
        return total * grid.facet_area

    def sup(self) -> float:
        worst = 0.0
        for a in range(self.set.grid.n):
            if self.mask_minus[a].any():
                worst = max(worst, float(np.abs(self.gminus[a][self.mask_minus[a]]).max()))
            if self.mask_plus[a].any():
                worst = max(worst, float(np.abs(self.gplus[a][self.mask_plus[a]]).max()))
        return worst

    def inflow_per_cell(self) -> np.ndarray:
        """Net prescribed outward flux attached to each body cell (the
        trace side belongs to its inside cell)."""
        grid = self.set.grid
        out = np.zeros(grid.extents)
        for a in range(grid.n):
            sl_lower = [slice(None)] * grid.n
            sl_upper = [slice(None)] * grid.n
            sl_lower[a] = slice(1, None)
            sl_upper[a] = slice(0, -1)
            gm = np.where(self.mask_minus[a], self.gminus[a], 0.0)
            gp = np.where(self.mask_plus[a], self.gplus[a], 0.0)
            # minus side belongs to the lower cell, plus side to the upper
            out += gm[tuple(sl_lower)]
            out += gp[tuple(sl_upper)]
        return out


def compatibility_check(td: TraceData) -> float:
    """Net prescribed flux; callers treat |value| <= 1e-10 (absolute scale
    of the data + 1) as compatible."""
    return td.integral


def is_compatible(td: TraceData) -> bool:
    return abs(td.integral) <= 1e-10 * (td.abs_integral() + 1.0)


@dataclass
class SolveReport:
    F: FluxField
    interior_div_residual: float
    trace_linf_gap: float
    trace_l1_gap: float
    mode: str
    kappa: float
    intermediate: tuple | None = None


def _laplacian_solve(cells: np.ndarray, edge_masks, b: np.ndarray,
                     tol: float, require_single_component: bool = False):
    """Solve the unit-weight graph Laplacian L u = b on the cells whose
    edges are the given facet masks; b must be balanced per component."""
    n_dims = cells.ndim
    node_id = -np.ones(cells.shape, dtype=np.int64)
    idx = np.argwhere(cells)
    node_id[tuple(idx.T)] = np.arange(idx.shape[0])
    n_nodes = idx.shape[0]
    if n_nodes == 0:
        raise InputError("empty body: nothing to solve on")
    rows, cols = [], []
    for a in range(n_dims):
        sl_lower = [slice(None)] * n_dims
        sl_upper = [slice(None)] * n_dims
        sl_lower[a] = slice(1, None)
        sl_upper[a] = slice(0, -1)
        lo_ids = np.full(edge_masks[a].shape, -1, dtype=np.int64)
        up_ids = np.full(edge_masks[a].shape, -1, dtype=np.int64)
        lo_ids[tuple(sl_lower)] = node_id
        up_ids[tuple(sl_upper)] = node_id
        em = edge_masks[a] & (lo_ids >= 0) & (up_ids >= 0)
        rows.append(lo_ids[em])
        cols.append(up_ids[em])
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    data = np.ones(rows.shape[0])
    adj = sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
    adj = adj + adj.T
    n_comp, comp = sp.csgraph.connected_components(adj, directed=False)
    if require_single_component and n_comp != 1:
        raise InvariantViolation("expected a connected solve graph")
    bn = b[cells]
    scale = float(np.abs(bn).sum()) + 1.0
    for c in range(n_comp):
        members = comp == c
        net = float(bn[members].sum())
        if abs(net) > 1e-10 * scale:
            raise CompatibilityError(
                f"prescribed trace is incompatible on component {c}: net flux {net}"
            )
        # remove the roundoff-level mean so the singular system is consistent
        bn = bn.copy()
        bn[members] -= net / members.sum()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = sp.diags(deg) - adj
    # ground one node per component: shifts each component by a constant,
    # which the flux (a pure gradient) never sees
    ground = np.zeros(n_nodes)
    first = np.full(n_comp, -1, dtype=np.int64)
    for i, c in enumerate(comp):
        if first[c] < 0:
            first[c] = i
    ground[first[first >= 0]] = 1.0
    lap = (lap + sp.diags(ground)).tocsr()
    if n_nodes <= DIRECT_DENSE_LIMIT:
        u = spla.spsolve(lap, bn)
    else:
        M = sp.diags(1.0 / lap.diagonal())
        u, info = spla.cg(lap, bn, rtol=min(tol, 1e-12), atol=0.0, M=M,
                          maxiter=20 * int(math.isqrt(n_nodes) + 1) * 100)
        if info != 0:
            raise InvariantViolation(f"conjugate gradient did not converge ({info})")
    u_cells = np.zeros(cells.shape)
    u_cells[cells] = u
    return u_cells, node_id, comp


def _gradient_fluxes(grid, cells, edge_masks, u_cells, dx):
    """Edge flux (u_lower - u_upper)/dx on the allowed edges."""
    out = []
    for a in range(grid.n):
        shape = grid.facet_shape(a)
        sl_lower = [slice(None)] * grid.n
        sl_upper = [slice(None)] * grid.n
        sl_lower[a] = slice(1, None)
        sl_upper[a] = slice(0, -1)
        u_lo = np.zeros(shape)
        u_up = np.zeros(shape)
        m_lo = np.zeros(shape, dtype=bool)
        m_up = np.zeros(shape, dtype=bool)
        u_lo[tuple(sl_lower)] = u_cells
        u_up[tuple(sl_upper)] = u_cells
        m_lo[tuple(sl_lower)] = cells
        m_up[tuple(sl_upper)] = cells
        em = edge_masks[a] & m_lo & m_up
        v = np.zeros(shape)
        v[em] = (u_lo[em] - u_up[em]) / dx
        out.append(v)
    return out


def _audit(F: FluxField, td: TraceData, mode: str, tol: float,
           intermediate=None) -> SolveReport:
    div = divergence_measure(F)
    scale = max(1.0, td.sup())
    residual = float(np.abs(div.cell_weights).max()) / F.grid.facet_area
    tm = trace_measure(F)
    linf = 0.0
    l1 = 0.0
    grid = F.grid
    for a in range(grid.n):
        for side, mask, arr in (
            (MINUS, td.mask_minus[a], td.gminus[a]),
            (PLUS, td.mask_plus[a], td.gplus[a]),
        ):
            for i in np.argwhere(mask):
                idx = tuple(int(v) for v in i)
                got = tm.density(a, idx, side)
                gap = abs(got - float(arr[idx]))
                linf = max(linf, gap)
                l1 += gap * grid.facet_area
    kappa = F.sup_bound / td.sup() if td.sup() > 0.0 else 0.0
    if residual > tol * scale * 10.0 + 1e-300:
        raise InvariantViolation(
            f"interior divergence residual {residual} above tolerance {tol}"
        )
    return SolveReport(F=F, interior_div_residual=residual, trace_linf_gap=linf,
                       trace_l1_gap=l1, mode=mode, kappa=kappa,
                       intermediate=intermediate)


def solve_direct(set_: RoughSet, td: TraceData, tol: float = 1e-10) -> SolveReport:
    """Divergence-free field with the prescribed trace, built from the
    Neumann problem on the crack-split cell graph.

    The prescribed side values are imposed exactly; the graph solve
    distributes them so every cell balance vanishes.  Raises
    CompatibilityError when some component has net prescribed flux.
    """
    grid = set_.grid
    dx = grid.spacing
    topo = facet_topology(set_)
    b = -dx * td.inflow_per_cell()
    b[~set_.cells] = 0.0
    u_cells, _, _ = _laplacian_solve(set_.cells, topo.interior, b, tol)
    fluxes = _gradient_fluxes(grid, set_.cells, topo.interior, u_cells, dx)
    F = FluxField(set_, 1.0)
    for a in range(grid.n):
        F.vminus[a][...] = fluxes[a]
        F.vplus[a][...] = fluxes[a]
        gm = np.where(td.mask_minus[a], td.gminus[a], 0.0)
        gp = np.where(td.mask_plus[a], td.gplus[a], 0.0)
        # side value = orientation * density reproduces the trace exactly
        F.vminus[a][td.mask_minus[a]] = gm[td.mask_minus[a]] * side_orient(MINUS)
        F.vplus[a][td.mask_plus[a]] = gp[td.mask_plus[a]] * side_orient(PLUS)
    F.sup_bound = max(
        float(max(np.abs(v).max() for v in F.vminus)),
        float(max(np.abs(v).max() for v in F.vplus)),
        1e-300,
    )
    return _audit(F, td, "DIRECT", tol)


def solve_decomposed(set_: RoughSet, td: TraceData, tol: float = 1e-10,
                     window: Window | None = None) -> SolveReport:
    """Two-step solve through the reduced-boundary problem.

    Step 1 builds a box-wide field G whose divergence is the negated
    trace measure (facet lift + cut-edge box Laplacian; only global
    compatibility is needed).  Step 2 reads the exterior flux h on the
    reduced facets off G; its integral vanishes identically (audited).
    Step 3 solves the crack-free data h on the body and adds the fields.
    """
    grid = set_.grid
    dx = grid.spacing
    window = window or Window.full(grid)
    if not window.strictly_contains_cells(set_.cells):
        raise InputError("decomposition window must strictly contain the set")
    if abs(td.integral) > 1e-10 * (td.abs_integral() + 1.0):
        raise CompatibilityError(
            f"globally incompatible trace data: integral {td.integral}"
        )
    box_cells = window.mask(grid)
    box_set = RoughSet(grid, box_cells)
    box_topo = facet_topology(box_set)
    edge_masks = [box_topo.interior[a] & ~set_.cracks.masks[a] for a in range(grid.n)]
    b = -dx * td.inflow_per_cell()
    b[~box_cells] = 0.0
    u_cells, _, _ = _laplacian_solve(box_cells, edge_masks, b, tol,
                                     require_single_component=True)
    fluxes = _gradient_fluxes(grid, box_cells, edge_masks, u_cells, dx)

    G = FluxField(box_set, 1.0)
    topo = facet_topology(set_)
    h_arrays = []
    for a in range(grid.n):
        G.vminus[a][...] = fluxes[a]
        G.vplus[a][...] = fluxes[a]
        # facet lift: side value sigma * g concentrates -mu on the facet
        gm = np.where(td.mask_minus[a], td.gminus[a], 0.0) * side_orient(MINUS)
        gp = np.where(td.mask_plus[a], td.gplus[a], 0.0) * side_orient(PLUS)
        G.vminus[a] = G.vminus[a] + gm
        G.vplus[a] = G.vplus[a] + gp
        # exterior one-sided flux on the reduced facets (lift-free side)
        bdry = topo.boundary[a]
        inside_lower = topo.inside_lower[a]
        sigma_inside = np.where(inside_lower, 1.0, -1.0)
        h = np.where(bdry, -sigma_inside * fluxes[a], 0.0)
        h_arrays.append(h)
    G.sup_bound = max(
        float(max(np.abs(v).max() for v in G.vminus)),
        float(max(np.abs(v).max() for v in G.vplus)),
        1e-300,
    )
    h_total = sum(float(h.sum()) for h in h_arrays) * grid.facet_area
    h_scale = sum(float(np.abs(h).sum()) for h in h_arrays) * grid.facet_area + 1.0
    if abs(h_total) > 1e-9 * h_scale:
        raise InvariantViolation(
            f"derived reduced-boundary data is unbalanced: integral {h_total}"
        )
    td_hat = TraceData(set_)
    for a in range(grid.n):
        bdry = topo.boundary[a]
        inside_lower = topo.inside_lower[a]
        td_hat.gminus[a][bdry & inside_lower] = h_arrays[a][bdry & inside_lower]
        td_hat.gplus[a][bdry & ~inside_lower] = h_arrays[a][bdry & ~inside_lower]
    hat_report = solve_direct(set_, td_hat, tol)
    Fhat = hat_report.F

    F = FluxField(set_, 1.0)
    for a in range(grid.n):
        F.vminus[a] = G.vminus[a] + Fhat.vminus[a]
        F.vplus[a] = G.vplus[a] + Fhat.vplus[a]
        live = topo.interior[a] | topo.crack[a] | topo.boundary[a]
        F.vminus[a][~live] = 0.0
        F.vplus[a][~live] = 0.0
        bdry = topo.boundary[a]
        inside_lower = topo.inside_lower[a]
        F.vplus[a][bdry & inside_lower] = 0.0
        F.vminus[a][bdry & ~inside_lower] = 0.0
    F.sup_bound = max(
        float(max(np.abs(v).max() for v in F.vminus)),
        float(max(np.abs(v).max() for v in F.vplus)),
        1e-300,
    )
    return _audit(F, td, "DECOMPOSED", tol,
                  intermediate=(G, h_arrays, Fhat))


def verify_solution(report: SolveReport, set_: RoughSet, td: TraceData,
                    tol: float = 1e-10) -> dict:
    """Independent audit: recompute the interior divergence and the trace
    measure of the returned field and compare against the prescription."""
    F = report.F
    div = divergence_measure(F)
    tv_inside = float(np.abs(div.cell_weights[set_.cells]).sum())
    scale = max(1.0, td.sup()) * max(1, set_.cell_count)
    div_ok = tv_inside / F.grid.facet_area <= tol * scale * 100.0
    tm = trace_measure(F)
    offenders = []
    grid = F.grid
    for a in range(grid.n):
        for side, mask, arr in (
            (MINUS, td.mask_minus[a], td.gminus[a]),
            (PLUS, td.mask_plus[a], td.gplus[a]),
        ):
            for i in np.argwhere(mask):
                idx = tuple(int(v) for v in i)
                gap = abs(tm.density(a, idx, side) - float(arr[idx]))
                if gap > 1e-8 * max(1.0, td.sup()):
                    offenders.append(((a, idx, side), gap))
    offenders.sort(key=lambda kv: -kv[1])
    ok = div_ok and not offenders
    return {
        "pass": ok,
        "interior_tv": tv_inside,
        "div_ok": div_ok,
        "trace_ok": not offenders,
        "worst_offenders": offenders[:3],
    }
