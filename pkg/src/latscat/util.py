"""Shared small helpers: seeded RNG, torus metric, log-log fitting."""

from __future__ import annotations

import numpy as np

# Fixed seed for every stochastic estimator in the package (reproducibility).
SEED = 0x5EED


def rng(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(SEED if seed is None else seed)


def angle_diff(xi, eta):
    """Componentwise torus distance min(|d|, 2pi-|d|), any broadcastable shape."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.abs(np.angle(np.exp(1j * (xi - eta))))


def torus_distance(xi, eta):
    """Euclidean distance on the flat torus (R/2pi Z)^d.

    Inputs are points with the torus dimension on the last axis; scalars work
    for d=1. Componentwise min(|d|, 2pi-|d|), combined in quadrature.
    """
    diff = angle_diff(xi, eta)
    if diff.ndim == 0:
        return float(diff)
    return np.sqrt(np.sum(diff**2, axis=-1))


def reduce_torus(xi):
    """Reduce torus coordinates to [0, 2pi); np.mod can round up to 2pi."""
    two_pi = 2.0 * np.pi
    r = np.mod(np.asarray(xi, dtype=float), two_pi)
    return np.where(r >= two_pi, 0.0, r)


def lstsq_loglog(x, y):
    """Least-squares line through (log10 x, log10 y).

    Returns (slope, intercept, max_abs_residual). Non-positive ordinates make
    the fit degenerate; callers should screen for that first.
    """
    lx = np.log10(np.asarray(x, dtype=float))
    ly = np.log10(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = np.max(np.abs(A @ coef - ly)) if len(lx) else 0.0
    return float(coef[0]), float(coef[1]), float(resid)
