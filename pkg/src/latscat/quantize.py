"""Semiclassical quantization Op^h(a) on the box, Fourier multipliers,
position weights, and matrix-free operator-norm estimation."""

from __future__ import annotations

import warnings
from typing import Callable, Optional

import numpy as np

from .model import Box, LinearMap
from .symbols import Symbol
from .util import rng

# Non-separable symbols materialize an N_tot^2 kernel; keep it bounded.
GENERAL_PATH_MAX_DIM = 4200

XI_TAIL_WARN = 1e-10
XI_TAIL_ERROR = 1e-6


class ResolutionError(ValueError):
    """The box momentum grid cannot resolve the symbol's xi-oscillations."""


class NormConvergenceError(RuntimeError):
    def __init__(self, message, last_estimate, residual):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.residual = residual


def _xi_grid(box: Box) -> np.ndarray:
    """Momentum grid over the box, shape (N_tot,) for d=1, (N_tot, d) else.

    FFT bin ordering per axis so multipliers line up with fftn."""
    ax = box.xi_axis()
    if box.dim == 1:
        return ax
    mesh = np.meshgrid(*([ax] * box.dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _fftn_flat(u, box: Box):
    return np.fft.fftn(np.asarray(u).reshape(box.shape)).ravel()


def _ifftn_flat(u, box: Box):
    return np.fft.ifftn(np.asarray(u).reshape(box.shape)).ravel()


def fourier_multiplier(c: Callable, box: Box) -> LinearMap:
    """Multiplier c(D): inverse-DFT . multiply . DFT on the periodic box.

    Exactly diagonal in the discrete plane-wave basis. `c` is evaluated on
    the box momentum grid.
    """
    cv = np.asarray(c(_xi_grid(box)), dtype=complex)
    cbar = np.conj(cv)
    herm = bool(np.max(np.abs(cv.imag)) < 1e-15) if cv.size else True

    # mode label xi tags the plane wave e^{+i n xi}; a packet filtered at
    # label xi then moves with velocity -v(-xi) = +v(xi) for the even symbols
    # of real symmetric stencils, which is the flow the kernel geometry uses
    def fwd(u):
        return _ifftn_flat(cv * _fftn_flat(u, box), box)

    def adj(u):
        return _ifftn_flat(cbar * _fftn_flat(u, box), box)

    return LinearMap(box.site_count, fwd, adj, hermitian=herm, label="c(D)")


def position_weight(s: float, box: Box) -> LinearMap:
    """Diagonal map u(n) -> (1+|n|^2)^(s/2) u(n)."""
    r2 = np.sum(box.sites().astype(float) ** 2, axis=1)
    w = (1.0 + r2) ** (s / 2.0)
    return LinearMap(box.site_count, lambda u: w * np.asarray(u),
                     lambda u: w * np.asarray(u), hermitian=True, label=f"<n>^{s}")


def _xi_tail_of_row(row: np.ndarray, box: Box) -> float:
    """Relative high-frequency mass of one x-row of the sampled symbol."""
    n1 = box.n_per_axis
    tail_cut = n1 // 3
    co = np.fft.fftn(np.asarray(row, dtype=complex).reshape(box.shape)) / box.site_count
    mass = np.sum(np.abs(co))
    if mass == 0.0:
        return 0.0
    k = np.fft.fftfreq(n1, d=1.0 / n1)
    if box.dim == 1:
        kinf = np.abs(k)
    else:
        mesh = np.meshgrid(*([k] * box.dim), indexing="ij")
        kinf = np.max(np.abs(np.stack(mesh)), axis=0)
    return float(np.sum(np.abs(co[kinf > tail_cut])) / mass)


def _check_xi_tail(ratio: float):
    if ratio > XI_TAIL_ERROR:
        raise ResolutionError(
            f"xi Fourier tail mass {ratio:.2e} exceeds {XI_TAIL_ERROR:.0e}; refine the box")
    if ratio > XI_TAIL_WARN:
        warnings.warn(f"op_h: xi Fourier tail mass {ratio:.2e} above {XI_TAIL_WARN:.0e}",
                      RuntimeWarning, stacklevel=3)


def op_h(a: Symbol, h: float, box: Box, check_resolution: bool = True) -> LinearMap:
    """Left quantization of a(h x, xi) on the box (periodic convolution).

    (A u)(n) = (1/N) sum_k a(h n, xi_k) e^{i n.xi_k} u^(xi_k).
    Separable symbols a = b(x) c(xi) use multiply-by-b(hn) o c(D).

    check_resolution=False quantizes the grid-sampled symbol without the
    xi-tail guard; the fixed-symbol cone probes use it on the small pinned
    boxes where the Phi ramp's slow Gevrey tails sit above the error bound
    while the probes' conclusions are insensitive at that level.
    """
    if not (0.0 < h <= 1.0):
        raise ValueError("h must lie in (0, 1]")
    if a.dim != box.dim:
        raise ValueError("symbol/box dimension mismatch")

    sites = box.sites().astype(float)
    if a.separable:
        x_arg = (h * sites[:, 0]) if box.dim == 1 else (h * sites)
        bv = np.asarray(a.x_part(x_arg), dtype=complex)
        if check_resolution and np.max(np.abs(bv)) > 0.0:
            _check_xi_tail(_xi_tail_of_row(np.asarray(a.xi_part(_xi_grid(box)),
                                                      dtype=complex), box))
        mult = fourier_multiplier(a.xi_part, box)
        bbar = np.conj(bv)

        def fwd(u):
            return bv * mult(u)

        def adj(u):
            return mult.adjoint_apply(bbar * np.asarray(u))

        return LinearMap(box.site_count, fwd, adj, label="Op^h(a)")

    if box.site_count > GENERAL_PATH_MAX_DIM:
        raise ValueError(
            f"general quantization path capped at {GENERAL_PATH_MAX_DIM} sites "
            f"(got {box.site_count}); use a separable symbol or a smaller box")
    xi = _xi_grid(box)
    N = box.site_count
    if box.dim == 1:
        x_arg = h * sites[:, 0]
        vals = np.asarray(a(x_arg[:, None], xi[None, :]), dtype=complex)
        phase = np.exp(1j * np.outer(sites[:, 0], xi))
        corr = np.exp(1j * xi * box.radius)
    else:
        vals = np.asarray(a(h * sites[:, None, :], xi[None, :, :]), dtype=complex)
        phase = np.exp(1j * (sites @ np.asarray(xi).T))
        corr = np.exp(1j * box.radius * np.sum(np.asarray(xi), axis=-1))
    masses = np.sum(np.abs(vals), axis=1)
    if check_resolution and np.max(masses) > 0.0:
        _check_xi_tail(_xi_tail_of_row(vals[int(np.argmax(masses))], box))
    # (A u)(n) = (1/N) sum_k a(h n, xi_k) e^{+i n xi_k} u^(xi_k), pairing the
    # e^{+i n xi} reconstruction with the e^{-i n' xi} analysis transform
    B = vals * phase * corr[None, :] / N
    BH = B.conj().T

    def fwd(u):
        return B @ _fftn_flat(u, box)

    def adj(u):
        return _ifftn_flat(BH @ np.asarray(u), box) * N

    return LinearMap(box.site_count, fwd, adj, label="Op^h(a)")


def operator_norm(A: LinearMap, tol: float = 1e-2, max_iter: int = 600,
                  seed: Optional[int] = None, return_info: bool = False):
    """Power iteration on A*A from a fixed-seed random start.

    Stops when the Rayleigh quotient stabilizes to relative tol/2 on two
    consecutive iterations; the Rayleigh residual is recorded as the
    certificate. Deterministic given the seed.
    """
    if not (0.0 < tol <= 0.1):
        raise ValueError("tol must lie in (0, 0.1]")
    g = rng(seed)
    v = g.standard_normal(A.dim) + 1j * g.standard_normal(A.dim)
    v /= np.linalg.norm(v)
    lam_prev = None
    hits = 0
    lam = 0.0
    resid = np.inf
    for it in range(1, max_iter + 1):
        w = A.adjoint_apply(A(v))
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            info = {"iterations": it, "residual": 0.0}
            return (0.0, info) if return_info else 0.0
        lam = float(np.real(np.vdot(v, w)))
        resid = float(np.linalg.norm(w - lam * v)) / max(lam, 1e-300)
        v = w / nw
        if lam_prev is not None and lam > 0:
            if abs(lam - lam_prev) <= 0.5 * tol * lam:
                hits += 1
                if hits >= 2 and it >= 5:
                    sigma = float(np.sqrt(max(lam, 0.0)))
                    info = {"iterations": it, "residual": resid}
                    return (sigma, info) if return_info else sigma
            else:
                hits = 0
        lam_prev = lam
    raise NormConvergenceError(
        f"operator_norm: no convergence in {max_iter} iterations "
        f"(last sigma ~ {np.sqrt(max(lam, 0.0)):.6e}, residual {resid:.2e})",
        last_estimate=float(np.sqrt(max(lam, 0.0))), residual=resid)


def commutator_action(A: LinearMap, B: LinearMap) -> LinearMap:
    """The map i(AB - BA); hermitian when A and B are."""
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")

    def fwd(u):
        return 1j * (A(B(u)) - B(A(u)))

    def adj(u):
        return 1j * (A.adjoint_apply(B.adjoint_apply(u)) - B.adjoint_apply(A.adjoint_apply(u)))

    return LinearMap(A.dim, fwd, adj, hermitian=A.hermitian and B.hermitian,
                     label=f"i[{A.label},{B.label}]")
