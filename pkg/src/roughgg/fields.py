"""Analytic and seeded test fields used by demos and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .dmfield import FluxField
from .domain import RoughSet


def slit_jump_field(axis: int = 1):
    """Unit field normal to the coordinate plane, flipping sign across it:
    (0, sign(x2)) in 2D.  Divergence free away from the plane."""

    def f(X):
        out = np.zeros(X.shape)
        out[..., axis] = np.sign(X[..., axis])
        return out

    return f


def separated_smooth_field(scale: float = 1.0):
    """(sin x2, cos x1) in 2D: divergence free, and each component is
    constant along its own axis, so discrete cell balances vanish exactly."""

    def f(X):
        out = np.zeros(X.shape)
        out[..., 0] = scale * np.sin(X[..., 1])
        out[..., 1] = scale * np.cos(X[..., 0])
        if X.shape[-1] == 3:
            out[..., 2] = scale * np.sin(X[..., 0])
        return out

    return f


def linear_field():
    """Identity field (x1, x2, ...): constant divergence n."""

    def f(X):
        return X.copy()

    return f


def constant_field(vec):
    vec = np.asarray(vec, dtype=float)

    def f(X):
        out = np.zeros(X.shape)
        out[...] = vec
        return out

    return f


def seeded_trig_field(seed: int, sup_bound: float = 1.0, terms: int = 3):
    """Random bounded trigonometric field, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=(2, terms))
    freqs = rng.integers(1, 4, size=(2, terms)).astype(float)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, terms))
    norms = np.abs(coeffs).sum(axis=1)
    norms[norms == 0.0] = 1.0

    def f(X):
        out = np.zeros(X.shape)
        for a in range(min(2, X.shape[-1])):
            acc = np.zeros(X.shape[:-1])
            for t in range(terms):
                arg = freqs[a, t] * (X[..., 0] + 0.7 * X[..., 1]) + phases[a, t]
                acc += coeffs[a, t] * np.cos(arg)
            out[..., a] = sup_bound * acc / norms[a]
        return out

    return f


def random_facet_noise(set_: RoughSet, seed: int, sup_bound: float = 1.0) -> FluxField:
    """Independent uniform values on every live facet side; the roughest
    member of the bounded class, for worst-case property checks."""
    rng = np.random.default_rng(seed)
    F = FluxField(set_, sup_bound)
    for a in range(set_.grid.n):
        shape = set_.grid.facet_shape(a)
        vals = rng.uniform(-sup_bound, sup_bound, size=shape)
        live = F.topology.interior[a] | F.topology.crack[a] | F.topology.boundary[a]
        F.vminus[a][live] = vals[live]
        F.vplus[a][live] = vals[live]
        crack = F.topology.crack[a]
        F.vplus[a][crack] = rng.uniform(-sup_bound, sup_bound, size=shape)[crack]
        bdry = F.topology.boundary[a]
        inside_lower = F.topology.inside_lower[a]
        F.vplus[a][bdry & inside_lower] = 0.0
        F.vminus[a][bdry & ~inside_lower] = 0.0
    return F
