"""Phase-space symbols a(x, xi) on R^d x T^d with class tags and support metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .util import torus_distance

# Recognized symbol-class tags: "S0", "Sm", "S0_h", "Sm_h", "S0_ht", ...
CLASS_TAGS = ("S", "S_h", "S_ht")


@dataclass(frozen=True)
class SupportMeta:
    """Ball-shaped numerical support: |x - x_center| <= x_radius and
    torus_distance(xi, xi_center) <= xi_radius."""

    x_center: np.ndarray
    x_radius: float
    xi_center: np.ndarray
    xi_radius: float

    def x_disjoint_from(self, other: "SupportMeta") -> bool:
        gap = np.linalg.norm(np.asarray(self.x_center) - np.asarray(other.x_center))
        return gap > self.x_radius + other.x_radius


@dataclass
class Symbol:
    """A function a(x, xi), x in R^d, xi in T^d.

    eval takes arrays with the coordinate dimension on the last axis (scalars
    fine for d=1) and broadcasts. Separable symbols a(x, xi) = b(x) c(xi)
    carry their factors so quantization can use the fast multiplier path.
    """

    dim: int
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    class_tag: str = "S"
    order: int = 0
    params: dict = field(default_factory=dict)
    support_meta: Optional[SupportMeta] = None
    x_part: Optional[Callable[[np.ndarray], np.ndarray]] = None
    xi_part: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def separable(self) -> bool:
        return self.x_part is not None and self.xi_part is not None

    def __call__(self, x, xi):
        return self.eval(x, xi)


def separable_symbol(dim, b, c, class_tag="S", order=0, support_meta=None, params=None):
    """Symbol a(x, xi) = b(x) c(xi)."""

    def ev(x, xi):
        return np.asarray(b(x)) * np.asarray(c(xi))

    return Symbol(dim=dim, eval=ev, class_tag=class_tag, order=order,
                  params=params or {}, support_meta=support_meta,
                  x_part=b, xi_part=c)


def multiplier_symbol(dim, c, class_tag="S", order=0):
    """xi-only symbol a(x, xi) = c(xi)."""
    return separable_symbol(dim, lambda x: np.ones(np.shape(x)[:-1] if dim > 1 else np.shape(x)), c,
                            class_tag=class_tag, order=order)


def position_symbol(dim, b, class_tag="S", order=0, support_meta=None):
    """x-only symbol a(x, xi) = b(x)."""
    return separable_symbol(dim, b, lambda xi: np.ones(np.shape(xi)[:-1] if dim > 1 else np.shape(xi)),
                            class_tag=class_tag, order=order, support_meta=support_meta)


def constant_symbol(dim, value=1.0):
    return separable_symbol(dim, lambda x: np.full(np.shape(x)[:-1] if dim > 1 else np.shape(x), value),
                            lambda xi: np.ones(np.shape(xi)[:-1] if dim > 1 else np.shape(xi)))


def check_bounded(symbol: Symbol, x_samples, xi_samples, bound=None):
    """Grid check that an S^0-tagged symbol is finite (and below `bound`)."""
    vals = symbol(x_samples, xi_samples)
    if not np.all(np.isfinite(vals)):
        raise ValueError("symbol evaluates non-finite on sample grid")
    m = float(np.max(np.abs(vals)))
    if bound is not None and m > bound:
        raise ValueError(f"symbol exceeds recorded bound: {m} > {bound}")
    return m


def check_support(symbol: Symbol, x_samples, xi_samples, tol=1e-14):
    """Grid check that |a| < tol outside support_meta (if present)."""
    meta = symbol.support_meta
    if meta is None:
        return True
    x = np.asarray(x_samples, dtype=float)
    xi = np.asarray(xi_samples, dtype=float)
    if symbol.dim == 1:
        dx = np.abs(x - float(np.asarray(meta.x_center).ravel()[0]))
        dxi = torus_distance(xi, float(np.asarray(meta.xi_center).ravel()[0]))
    else:
        dx = np.linalg.norm(x - np.asarray(meta.x_center), axis=-1)
        dxi = torus_distance(xi, np.asarray(meta.xi_center))
    outside = (dx > meta.x_radius) | (dxi > meta.xi_radius)
    vals = np.abs(symbol(x, xi))
    return bool(np.all(vals[outside] < tol)) if np.any(outside) else True
