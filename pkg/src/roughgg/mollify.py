"""Discrete mollification kernels on the cell lattice."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .gridcore import Grid


class MollifierKernel:
    """Radial polynomial bump of width ``eps``, normalized to unit mass.

    Profile (1 - u^2)^3 on u = |x|/eps < 1, sampled on the cell lattice and
    renormalized so the discrete mass is exactly 1.
    """

    def __init__(self, eps: float, grid: Grid):
        if eps < 2.0 * grid.spacing:
            raise InputError(f"mollifier width {eps} must be >= 2 spacings")
        self.eps = float(eps)
        self.grid = grid
        radius = int(np.floor(eps / grid.spacing + 1e-12))
        axes = [np.arange(-radius, radius + 1) * grid.spacing for _ in range(grid.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        r2 = sum(m**2 for m in mesh)
        u2 = r2 / (eps * eps)
        profile = np.where(u2 < 1.0, (1.0 - np.minimum(u2, 1.0)) ** 3, 0.0)
        self.weights = profile / profile.sum()
        self.radius_cells = radius

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def smooth_cells(self, values: np.ndarray) -> np.ndarray:
        """Convolve a cell array with the kernel (zero padding outside)."""
        from scipy.signal import fftconvolve

        from ._util import fft_context

        with fft_context():
            out = fftconvolve(values.astype(float), self.weights, mode="same")
        return out


def smooth_cells_masked(kernel: MollifierKernel, values: np.ndarray,
                        mask: np.ndarray) -> np.ndarray:
    """Mollify a cell field defined only on ``mask``: the kernel is
    renormalized over the masked cells, so constants are preserved up to
    the mask boundary (one-sided smoothing)."""
    num = kernel.smooth_cells(np.where(mask, values, 0.0))
    den = kernel.smooth_cells(mask.astype(float))
    out = np.zeros(values.shape)
    good = mask & (den > 0.0)
    out[good] = num[good] / den[good]
    return out


def masked_gradient(values: np.ndarray, mask: np.ndarray, spacing: float) -> np.ndarray:
    """Per-axis central differences using only in-mask neighbors; one-sided
    at the mask edge, zero where no neighbor exists.  Shape (..., n)."""
    n = values.ndim
    out = np.zeros(values.shape + (n,))
    for a in range(n):
        fwd_val = np.roll(values, -1, axis=a)
        bwd_val = np.roll(values, 1, axis=a)
        fwd_ok = np.roll(mask, -1, axis=a)
        bwd_ok = np.roll(mask, 1, axis=a)
        edge_lo = [slice(None)] * n
        edge_hi = [slice(None)] * n
        edge_lo[a] = 0
        edge_hi[a] = -1
        bwd_ok = bwd_ok.copy()
        fwd_ok = fwd_ok.copy()
        bwd_ok[tuple(edge_lo)] = False
        fwd_ok[tuple(edge_hi)] = False
        both = fwd_ok & bwd_ok & mask
        fonly = fwd_ok & ~bwd_ok & mask
        bonly = ~fwd_ok & bwd_ok & mask
        g = np.zeros(values.shape)
        g[both] = (fwd_val[both] - bwd_val[both]) / (2.0 * spacing)
        g[fonly] = (fwd_val[fonly] - values[fonly]) / spacing
        g[bonly] = (values[bonly] - bwd_val[bonly]) / spacing
        out[..., a] = g
    return out
