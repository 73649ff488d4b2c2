"""Time evolution e^{-itH} by Chebyshev expansion, smooth functional
calculus f(H), the local-decay probe, and the propagation-estimate probe."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft
import scipy.linalg as sla
from scipy.special import jv

from .escape import CutoffPhi
from .geometry import KernelPoint, classify, make_bump_pair
from .model import LatticeHamiltonian, LinearMap, ModelConfig, compose_maps
from .quantize import op_h, operator_norm, position_weight
from .resolvent import DecayFit
from .symbols import Symbol


class EnclosureError(RuntimeError):
    """Chebyshev iterates diverged: the spectral enclosure is violated."""


@dataclass(frozen=True)
class EnergyCutoff:
    """Smooth cutoff f with f = 1 on [lam - eps_f, lam + eps_f] and
    supp f inside [lam - 2 eps_f, lam + 2 eps_f], built from the Phi ramp."""

    lam: float
    eps_f: float
    phi: CutoffPhi = field(default_factory=CutoffPhi)

    def __post_init__(self):
        if self.eps_f <= 0:
            raise ValueError("eps_f must be positive")

    def profile(self, z):
        return np.asarray(self.phi(np.abs(np.asarray(z, dtype=float) - self.lam)
                                   / (2.0 * self.eps_f)))

    __call__ = profile

    @property
    def support(self):
        return (self.lam - 2.0 * self.eps_f, self.lam + 2.0 * self.eps_f)


@dataclass
class ChebyshevPlan:
    """First-kind Chebyshev series of a function on [center-radius, center+radius].

    The enclosure radius is the crude stencil bound sum|gamma| + max|V| + CAP
    strength, so the spectrum is covered with slack.
    """

    center: float
    radius: float
    coeffs: np.ndarray
    truncation_tol: float

    @classmethod
    def enclosure_for(cls, H: LatticeHamiltonian):
        return 0.0, H.spectral_bound() * (1.0 + 1e-9) + 1e-12

    @classmethod
    def for_function(cls, H: LatticeHamiltonian, f: Callable, tol: float = 1e-12,
                     n_nodes: int = 4096) -> "ChebyshevPlan":
        c, r = cls.enclosure_for(H)
        j = np.arange(n_nodes)
        nodes = np.cos(np.pi * (j + 0.5) / n_nodes)
        fv = np.asarray(f(c + r * nodes), dtype=complex)
        if np.max(np.abs(fv.imag)) == 0.0:
            fv = fv.real
        co = scipy.fft.dct(fv, type=2) / n_nodes
        co[0] *= 0.5
        mags = np.abs(co)
        top = mags.max() if mags.size else 0.0
        keep = np.nonzero(mags > tol * max(top, 1.0))[0]
        k_last = int(keep[-1]) + 1 if len(keep) else 1
        return cls(center=c, radius=r, coeffs=np.asarray(co[:k_last]), truncation_tol=tol)

    @classmethod
    def for_evolution(cls, H: LatticeHamiltonian, t: float, tol: float = 1e-13) -> "ChebyshevPlan":
        """Coefficients of e^{-itz}: (2 - delta_k0)(-i)^k J_k(rt) e^{-ict}."""
        c, r = cls.enclosure_for(H)
        rt = r * abs(t)
        k_max = int(1.25 * rt + 80)
        k = np.arange(k_max + 1)
        bes = jv(k, rt)
        keep = np.nonzero(np.abs(bes) > tol)[0]
        k_last = int(keep[-1]) + 1 if len(keep) else 1
        k = k[:k_last]
        co = (2.0 - (k == 0)) * (-1j) ** k * bes[:k_last] * np.exp(-1j * c * t)
        return cls(center=c, radius=r, coeffs=co, truncation_tol=tol)

    @property
    def n_terms(self) -> int:
        return len(self.coeffs)

    def apply(self, H: LinearMap, u, adjoint: bool = False):
        """Sum c_k T_k((H-c)/r) u with a divergence monitor on the iterates."""
        u = np.asarray(u, dtype=complex)
        co = np.conj(self.coeffs) if adjoint else self.coeffs
        c, r = self.center, self.radius
        Hap = H.adjoint_apply if adjoint else H
        T0 = u
        acc = co[0] * T0
        if len(co) == 1:
            return acc
        T1 = (Hap(u) - c * u) / r
        acc = acc + co[1] * T1
        cap = 50.0 * np.linalg.norm(u) + 1e-300
        for k in range(2, len(co)):
            T2 = 2.0 * (Hap(T1) - c * T1) / r - T0
            acc = acc + co[k] * T2
            T0, T1 = T1, T2
            if k % 64 == 0 and np.linalg.norm(T2) > cap:
                raise EnclosureError("Chebyshev iterates grow: enclosure violated")
        return acc


def _plan_cache(H: LatticeHamiltonian) -> dict:
    cache = getattr(H, "_cheb_plans", None)
    if cache is None:
        cache = {}
        setattr(H, "_cheb_plans", cache)
    return cache


def _function_plan(H: LatticeHamiltonian, cutoff: EnergyCutoff, tol: float) -> ChebyshevPlan:
    key = ("f", cutoff.lam, cutoff.eps_f, cutoff.phi.steepness, tol)
    cache = _plan_cache(H)
    if key not in cache:
        cache[key] = ChebyshevPlan.for_function(H, cutoff.profile, tol=tol)
    return cache[key]


def evolve(H: LatticeHamiltonian, u, t: float, tol: float = 1e-12):
    """e^{-itH} u for hermitian H via the Chebyshev/Bessel expansion.

    t < 0 is rejected (evolve with the adjoint instead). A CAP Hamiltonian
    falls back to the dense exponential on small boxes.
    """
    if t < 0:
        raise ValueError("t must be >= 0; use the adjoint for backward evolution")
    if not H.hermitian:
        if H.dim > 2048:
            raise NotImplementedError("CAP evolution only on dense-size boxes")
        M = H.dense()
        return sla.expm(-1j * t * M) @ np.asarray(u, dtype=complex)
    if t == 0.0:
        return np.array(u, dtype=complex, copy=True)
    plan = ChebyshevPlan.for_evolution(H, t, tol=min(tol, 1e-13))
    return plan.apply(H, u)


def evolve_map(H: LatticeHamiltonian, t: float, tol: float = 1e-12) -> LinearMap:
    """e^{-itH} as a LinearMap (adjoint is backward evolution)."""
    if not H.hermitian:
        raise ValueError("evolve_map needs a hermitian (CAP-free) Hamiltonian")
    plan = ChebyshevPlan.for_evolution(H, t, tol=min(tol, 1e-13))

    def fwd(u):
        return plan.apply(H, u)

    def adj(u):
        return plan.apply(H, u, adjoint=True)

    return LinearMap(H.dim, fwd, adj, label=f"U({t})")


def apply_f_of_H(H: LatticeHamiltonian, cutoff: EnergyCutoff, u, tol: float = 1e-12):
    """f(H) u by Chebyshev interpolation of the cutoff profile."""
    plan = _function_plan(H, cutoff, tol)
    return plan.apply(H, u)


def f_of_H_map(H: LatticeHamiltonian, cutoff: EnergyCutoff, tol: float = 1e-12) -> LinearMap:
    plan = _function_plan(H, cutoff, tol)
    return LinearMap(H.dim, lambda u: plan.apply(H, u),
                     lambda u: plan.apply(H, u, adjoint=True),
                     hermitian=H.hermitian, label="f(H)")


def shell_speed_max(model_cfg: ModelConfig, cutoff: EnergyCutoff, grid_n: int = 4096) -> float:
    """max |v| over momenta with p0 inside supp f (reflection-window speed)."""
    st = model_cfg.stencil
    ax = np.linspace(0.0, 2.0 * np.pi, grid_n, endpoint=False)
    if st.dim == 1:
        p = np.asarray(st.p0(ax), dtype=float)
        sp = np.abs(np.asarray(st.gradient(ax), dtype=float))
    else:
        mesh = np.meshgrid(*([ax] * st.dim), indexing="ij")
        xi = np.stack(mesh, axis=-1)
        p = np.asarray(st.p0(xi), dtype=float)
        sp = np.linalg.norm(np.asarray(st.gradient(xi), dtype=float), axis=-1)
    lo, hi = cutoff.support
    mask = (p >= lo) & (p <= hi)
    if not np.any(mask):
        return float(np.max(sp))
    return float(np.max(sp[mask]))


# ---------------------------------------------------------------------------
# local decay


@dataclass
class LocalDecayResult:
    t_grid: np.ndarray
    norms: np.ndarray
    fit: DecayFit             # log norm vs log <t> over the tail half
    kappa_hat: float
    rows: list

    def csv_rows(self):
        for r in self.rows:
            yield r


def local_decay_probe(model_cfg: ModelConfig, cutoff: EnergyCutoff, nu: float,
                      t_grid: Sequence[float], box_radius: Optional[int] = None,
                      dense_cap: int = 1400, norm_tol: float = 1e-2,
                      seed=None) -> LocalDecayResult:
    """Weighted propagator norms ||<n>^-nu e^{-itH} f(H) <n>^-nu|| over t_grid.

    The grid must stay inside the pre-reflection window 0.8 L / v_max.
    Boxes up to `dense_cap` sites use the exact eigendecomposition route;
    larger boxes fall back to power iteration on the Chebyshev propagator.
    """
    L = box_radius if box_radius is not None else (model_cfg.box_radius or 512)
    H = model_cfg.assemble(L, with_cap=False)
    vmax = shell_speed_max(model_cfg, cutoff)
    t_grid = np.asarray(sorted(float(t) for t in t_grid))
    window = 0.8 * L / max(vmax, 1e-12)
    if t_grid[-1] > window:
        raise ValueError(f"t_grid exceeds the reflection window {window:.1f}")
    W = position_weight(-nu, H.box)
    rows = []
    norms = np.zeros(len(t_grid))
    if H.dim <= dense_cap:
        Hd = H.dense()
        Hd = (Hd + Hd.conj().T) / 2.0
        evals, Q = np.linalg.eigh(Hd)
        f_ev = cutoff.profile(evals)
        wdiag = (1.0 + np.sum(H.box.sites().astype(float) ** 2, axis=1)) ** (-nu / 2.0)
        WQ = wdiag[:, None] * Q
        for i, t in enumerate(t_grid):
            t0 = time.perf_counter()
            M = (WQ * (np.exp(-1j * t * evals) * f_ev)) @ WQ.conj().T
            norms[i] = sla.svdvals(M)[0] if M.shape[0] <= 600 else np.linalg.svd(M, compute_uv=False)[0]
            rows.append({"h": 0.0, "t": t, "norm": norms[i], "chebyshev_terms": 0,
                         "seconds": time.perf_counter() - t0})
    else:
        f_map = f_of_H_map(H, cutoff)
        for i, t in enumerate(t_grid):
            t0 = time.perf_counter()
            U = evolve_map(H, t)
            M = compose_maps(W, U, f_map, W)
            norms[i], info = operator_norm(M, tol=norm_tol, return_info=True, seed=seed)
            rows.append({"h": 0.0, "t": t, "norm": norms[i],
                         "chebyshev_terms": ChebyshevPlan.for_evolution(H, t).n_terms,
                         "seconds": time.perf_counter() - t0})
    tail = slice(len(t_grid) // 2, None)
    fit = DecayFit.from_values(np.sqrt(1.0 + t_grid[tail] ** 2), norms[tail])
    kappa = -fit.slope if not fit.degenerate else float("nan")
    return LocalDecayResult(t_grid=t_grid, norms=norms, fit=fit, kappa_hat=kappa, rows=rows)


# ---------------------------------------------------------------------------
# propagation estimate


def _sites_of_support(values: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    return np.nonzero(np.abs(values) > threshold)[0]


@dataclass
class PropagationResult:
    h_list: tuple
    sup_norms: dict
    fit: DecayFit
    rows: list
    decay_expected: bool

    def csv_rows(self):
        for r in self.rows:
            yield r


def propagation_probe(model_cfg: ModelConfig, kp: KernelPoint, lam: float,
                      h_list: Sequence[float], t_horizon_rule: Optional[Callable] = None,
                      delta1: float = 0.2, delta2: float = 0.2,
                      cutoff: Optional[EnergyCutoff] = None, n_t: int = 32,
                      mode: str = "decay", classify_grid: int = 4096,
                      min_radius: int = 32, norm_tol: float = 1e-2,
                      jobs: int = 1, seed=None) -> PropagationResult:
    """sup over t in [0, T(h)] of ||Op^h(a1) e^{-itH} f(H) Op^h(a2)|| per h.

    T(h) defaults to min(h^-2, 0.8 L(h)/v_max). mode="decay" requires the
    kernel point off Sigma_0 u Sigma_+ u Sigma'_+ with both momenta on shell
    (error otherwise); mode="control" requires it on one of the sets;
    mode="offshell" skips both checks (the easy functional-calculus case
    where one momentum misses the cutoff support).
    """
    if model_cfg.stencil.dim != 1:
        raise NotImplementedError("propagation probe implemented for d=1")
    if cutoff is None:
        cutoff = EnergyCutoff(lam=lam, eps_f=0.25)
    if mode not in ("decay", "control", "offshell"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "offshell":
        p1 = float(model_cfg.stencil.p0(np.atleast_1d(kp.xi))[0])
        p2 = float(model_cfg.stencil.p0(np.atleast_1d(kp.eta))[0])
        if abs(p1 - lam) > 1e-9 or abs(p2 - lam) > 1e-9:
            raise ValueError("both momenta must sit on the energy shell")
        report = classify(kp, model_cfg.stencil, lam, tol=3.0 * delta1,
                          grid_n=classify_grid)
        outside = report.outside_all(sign=+1)
        if mode == "decay" and not outside:
            raise ValueError(f"hypothesis violation: classify puts the point inside "
                             f"{[k for k, v in report.distances.items() if v <= 3 * delta1]}")
        if mode == "control" and outside:
            raise ValueError("control mode expects an on-set kernel point")
    vmax = shell_speed_max(model_cfg, cutoff)
    x1 = float(kp.x[0])
    x2 = -float(kp.y[0])
    span = max(abs(x1), abs(x2), 0.5)
    a1, a2 = make_bump_pair((x1, float(kp.xi[0])), (x2, float(kp.eta[0])), delta1, delta2)
    def run_h(h):
        L = max(int(np.ceil(4.0 * span / h)), min_radius)
        H = model_cfg.assemble(L, with_cap=False)
        T = min(h**-2.0, 0.8 * L / max(vmax, 1e-12))
        if t_horizon_rule is not None:
            T = min(float(t_horizon_rule(h)), 0.8 * L / max(vmax, 1e-12))
        tg = np.concatenate([[0.0], np.geomspace(max(T / 512.0, 0.25), T, n_t - 1)])
        return h, _propagation_sup(H, a1, a2, h, cutoff, tg, norm_tol, seed=seed)

    from .resolvent import _pmap
    results = _pmap(run_h, sorted(float(v) for v in h_list), jobs)
    rows = []
    sups = {}
    for h, (sup_h, h_rows) in results:
        rows.extend({"h": h, **r} for r in h_rows)
        sups[h] = sup_h
    hs = sorted(sups)
    fit = DecayFit.from_values(hs, [sups[h] for h in hs]) if len(hs) >= 4 else None
    return PropagationResult(h_list=tuple(hs), sup_norms=sups, fit=fit, rows=rows,
                             decay_expected=(mode == "decay"))


def _propagation_sup(H: LatticeHamiltonian, a1: Symbol, a2: Symbol, h: float,
                     cutoff: EnergyCutoff, t_grid: np.ndarray, norm_tol: float,
                     seed=None):
    """Exact finite-rank norms via evolved columns when the right symbol has
    finite x-support; power iteration otherwise."""
    box = H.box
    sites = box.sites()[:, 0].astype(float)
    if a1.separable and a2.separable:
        b1 = np.asarray(a1.x_part(h * sites), dtype=complex)
        c1 = np.asarray(a1.xi_part(box.xi_axis()), dtype=complex)
        b2 = np.asarray(a2.x_part(h * sites), dtype=complex)
        c2 = np.asarray(a2.xi_part(box.xi_axis()), dtype=complex)
        S1 = _sites_of_support(b1)
        S2 = _sites_of_support(b2)
        if len(S2) == 0 or len(S1) == 0:
            return 0.0, [{"t": t, "norm": 0.0, "chebyshev_terms": 0, "seconds": 0.0}
                         for t in t_grid]
        N = box.site_count
        cols = np.zeros((N, len(S2)), dtype=complex)
        cols[S2, np.arange(len(S2))] = 1.0
        plan_f = _function_plan(H, cutoff, 1e-12)
        Z = plan_f.apply(H, cols)
        K2 = np.fft.ifft(np.abs(c2) ** 2)
        gram = (b2[S2, None] * np.conj(b2[S2][None, :])) * K2[(S2[:, None] - S2[None, :]) % N]
        gram = (gram + gram.conj().T) / 2.0
        sup = 0.0
        rows = []
        t_prev = 0.0
        terms_total = 0
        for t in t_grid:
            t0 = time.perf_counter()
            dt = t - t_prev
            terms = 0
            if dt > 0:
                plan = ChebyshevPlan.for_evolution(H, dt)
                Z = plan.apply(H, Z)
                terms = plan.n_terms
                terms_total += terms
            t_prev = t
            Y = (b1[:, None] * np.fft.ifft(c1[:, None] * np.fft.fft(Z, axis=0), axis=0))[S1, :]
            small = Y @ gram @ Y.conj().T
            val = float(np.sqrt(max(np.linalg.eigvalsh(small)[-1].real, 0.0)))
            sup = max(sup, val)
            rows.append({"t": float(t), "norm": val, "chebyshev_terms": terms,
                         "seconds": time.perf_counter() - t0})
        return sup, rows
    # generic fallback: one power iteration per grid time
    A1 = op_h(a1, h, box)
    A2 = op_h(a2, h, box)
    f_map = f_of_H_map(H, cutoff)
    sup = 0.0
    rows = []
    for t in t_grid:
        t0 = time.perf_counter()
        U = evolve_map(H, t)
        val, _ = operator_norm(compose_maps(A1, U, f_map, A2), tol=norm_tol,
                               return_info=True, seed=seed)
        sup = max(sup, val)
        rows.append({"t": float(t), "norm": val,
                     "chebyshev_terms": ChebyshevPlan.for_evolution(H, t).n_terms,
                     "seconds": time.perf_counter() - t0})
    return sup, rows


# ---------------------------------------------------------------------------
# splitting arithmetic


@dataclass
class SplittingReport:
    n_hat: float
    kappa_hat: float
    nu: float
    M: float
    T_exponent: float
    first_exponent: float
    tail_exponent: float
    implied_exponent: float
    optimal_T_exponent: Optional[float]
    optimal_exponent: Optional[float]
    inconclusive: bool
    nonpositive: bool
    target_met: bool


def t_splitting_bound(C_N_fit: DecayFit, nu_decay_fit, M: float, nu: float = 3.0) -> SplittingReport:
    """Arithmetic combination of the propagation fit and the local-decay fit.

    With T = h^(-(M+2nu)) the two pieces of the time integral carry
    exponents n_hat - (M+2nu) and -2nu + (M+2nu)(kappa-1); the optimal-T
    variant maximizes min of the two. kappa <= 1 makes the tail integral
    divergent (inconclusive flag).
    """
    if C_N_fit is None or getattr(C_N_fit, "degenerate", False):
        raise ValueError("missing or degenerate propagation fit")
    if nu_decay_fit is None:
        raise ValueError("missing local-decay fit")
    n_hat = float(C_N_fit.slope)
    if hasattr(nu_decay_fit, "kappa_hat"):
        kappa = float(nu_decay_fit.kappa_hat)
    elif hasattr(nu_decay_fit, "slope"):
        kappa = -float(nu_decay_fit.slope)
    else:
        kappa = float(nu_decay_fit)
    if not np.isfinite(n_hat) or not np.isfinite(kappa):
        raise ValueError("fits carry non-finite exponents")
    beta = M + 2.0 * nu
    first = n_hat - beta
    tail = -2.0 * nu + beta * (kappa - 1.0)
    inconclusive = kappa <= 1.0
    if inconclusive:
        implied = float("-inf")
        opt_beta = None
        opt = None
    else:
        implied = min(first, tail)
        opt_beta = (n_hat + 2.0 * nu) / kappa
        opt = n_hat - opt_beta
    nonpositive = (n_hat <= 0.0) or (not inconclusive and implied <= 0.0)
    return SplittingReport(n_hat=n_hat, kappa_hat=kappa, nu=nu, M=M,
                           T_exponent=beta, first_exponent=first, tail_exponent=tail,
                           implied_exponent=implied, optimal_T_exponent=opt_beta,
                           optimal_exponent=opt, inconclusive=inconclusive,
                           nonpositive=nonpositive,
                           target_met=(not inconclusive) and implied >= M)
