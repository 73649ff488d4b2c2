"""Escape-function ladder: the smooth cutoff Phi/Psi, the moving phase-space
bumps psi_j, pointwise transport inequalities, and dense spectral checks of
the operator energy inequality on small boxes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .model import Box, ModelConfig, Stencil, velocity, to_dense
from .quantize import fourier_multiplier
from .symbols import Symbol, SupportMeta, separable_symbol
from .util import angle_diff, lstsq_loglog, rng


class LadderInvariantError(ValueError):
    """An EscapeLadder invariant (separation, pinning, nesting) fails."""


class HermiticityDriftError(RuntimeError):
    """Assembled energy-inequality operator drifted from hermitian."""


def _bump_B(r, steepness):
    out = np.zeros_like(r, dtype=float)
    m = r > 0
    with np.errstate(over="ignore", under="ignore"):
        out[m] = np.exp(-steepness / r[m])
    return out


class CutoffPhi:
    """Smooth ramp with Phi(s)=1 for s<=1/2, Phi(s)=0 for s>=1, Phi(s)>0 for
    s<1 and Phi' <= 0. Psi = Phi^2.

    Built from the partition ramp g(r) = B(r)/(B(r)+B(1-r)), B(r)=e^(-k/r),
    via Phi(s) = g(2(1-s)). `steepness` is k.
    """

    def __init__(self, steepness: float = 1.0):
        if steepness <= 0:
            raise ValueError("steepness must be positive")
        self.steepness = float(steepness)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        r = 2.0 * (1.0 - s)
        B = _bump_B(r, self.steepness)
        Bc = _bump_B(1.0 - r, self.steepness)
        with np.errstate(invalid="ignore"):
            out = np.where(B + Bc > 0, B / np.where(B + Bc > 0, B + Bc, 1.0), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, s):
        """Analytic Phi'(s) (chain rule through the partition ramp)."""
        s = np.asarray(s, dtype=float)
        r = 2.0 * (1.0 - s)
        k = self.steepness
        B = _bump_B(r, k)
        Bc = _bump_B(1.0 - r, k)
        dB = np.zeros_like(r)
        dBc = np.zeros_like(r)
        m = r > 0
        with np.errstate(over="ignore", under="ignore"):
            dB[m] = B[m] * k / r[m] ** 2
        m2 = (1.0 - r) > 0
        with np.errstate(over="ignore", under="ignore"):
            dBc[m2] = Bc[m2] * k / (1.0 - r[m2]) ** 2
        denom = (B + Bc) ** 2
        gp = np.where(denom > 0, (dB * Bc + B * dBc) / np.where(denom > 0, denom, 1.0), 0.0)
        out = -2.0 * gp
        return out if out.ndim else float(out)

    def psi(self, s):
        return np.asarray(self(s)) ** 2

    def psi_derivative(self, s):
        return 2.0 * np.asarray(self(s)) * np.asarray(self.derivative(s))

    def validate(self, n_grid: int = 10_000):
        """Grid check of the contract; raises ValueError on violation."""
        s = np.linspace(0.0, 2.0, n_grid)
        v = np.asarray(self(s))
        if not np.allclose(v[s <= 0.5], 1.0, atol=1e-12):
            raise ValueError("Phi != 1 on s <= 1/2")
        if np.any(v[s >= 1.0] != 0.0):
            raise ValueError("Phi != 0 on s >= 1")
        # e^(-k/r) underflows within ~1e-3 of s = 1; positivity is checkable
        # only where the double range reaches
        if np.any(v[s < 1.0 - 1e-3] <= 0.0):
            raise ValueError("Phi not positive on s < 1")
        d = np.asarray(self.derivative(s))
        if np.any(d > 1e-12):
            raise ValueError("Phi' > 0 somewhere")
        # smoothness proxy: centered FD derivatives up to order 4 stay bounded
        h = 1e-3
        grid = np.linspace(0.05, 1.95, 2_000)
        vals = [np.asarray(self(grid + j * h)) for j in range(-2, 3)]
        d4 = (vals[0] - 4 * vals[1] + 6 * vals[2] - 4 * vals[3] + vals[4]) / h**4
        if not np.all(np.isfinite(d4)) or np.max(np.abs(d4)) > 1e8:
            raise ValueError("finite-difference 4th derivative unbounded")
        return True


DEFAULT_PHI = CutoffPhi()


def default_gammas(depth: int) -> tuple:
    """1 < gamma_1 < ... < gamma_m < 2 with gamma_j = 2 - 2^(-j)."""
    return tuple(2.0 - 2.0 ** (-j) for j in range(1, depth + 1))


@dataclass(frozen=True)
class EscapeLadder:
    """Geometry of the moving bumps around the orbit y(t) = x2/h + t v(xi2).

    Invariants (checked on t_grid unless validate=False):
      separation  |y(t)| >= 3 delta1 (1/h + t),
      pinning     |v(xi) - v(xi2)| < delta1/2 whenever dist(xi, xi2) <= 2 delta2,
      nesting     gamma_j strictly increasing in (1, 2).
    """

    stencil: Stencil
    x2: float
    xi2: float
    delta1: float
    delta2: float
    h: float
    depth: int = 0
    gammas: tuple = ()
    C_list: Optional[tuple] = None
    mu: float = 1.0
    phi: CutoffPhi = field(default_factory=CutoffPhi)
    t_grid: tuple = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    validate: bool = True

    def __post_init__(self):
        if not self.gammas and self.depth > 0:
            object.__setattr__(self, "gammas", default_gammas(self.depth))
        if self.stencil.dim != 1:
            raise NotImplementedError("escape ladder implemented for d=1")
        if not self.validate:
            return
        if not (0.0 < self.h <= 1.0):
            raise LadderInvariantError("h must lie in (0, 1]")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise LadderInvariantError("delta1, delta2 must be positive")
        gs = self.gammas
        if len(gs) != self.depth:
            raise LadderInvariantError("gamma list length != depth")
        if any(not (1.0 < g < 2.0) for g in gs) or any(b <= a for a, b in zip(gs, gs[1:])):
            raise LadderInvariantError("need 1 < gamma_1 < ... < gamma_m < 2")
        for t in self.t_grid:
            if abs(self.y(t)) < 3.0 * self.delta1 * (1.0 / self.h + t) - 1e-12:
                raise LadderInvariantError(
                    f"separation fails at t={t}: |y|={abs(self.y(t)):.3f} < "
                    f"{3.0 * self.delta1 * (1.0 / self.h + t):.3f}")
        xi = self.xi2 + np.linspace(-2.0 * self.delta2, 2.0 * self.delta2, 513)
        dv = np.abs(np.asarray(velocity(self.stencil, xi)) - self.v2)
        if np.max(dv) >= self.delta1 / 2.0:
            raise LadderInvariantError(
                f"velocity pinning fails: max|v-v2|={np.max(dv):.4f} >= delta1/2")

    @property
    def v2(self) -> float:
        return float(velocity(self.stencil, self.xi2))

    def y(self, t: float) -> float:
        return self.x2 / self.h + t * self.v2

    def ell(self, t: float, j: int = 0) -> float:
        """x support radius gamma_j delta1 (1/h + t); gamma_0 = 1."""
        g = 1.0 if j == 0 else self.gammas[j - 1]
        return g * self.delta1 * (1.0 / self.h + t)

    def xi_radius(self, j: int = 0) -> float:
        g = 1.0 if j == 0 else self.gammas[j - 1]
        return g * self.delta2

    def prefactor(self, j: int, t):
        """C_j h^((j-1)mu) (h^mu - (1/h + t)^(-mu)) for j >= 1."""
        C = 1.0 if self.C_list is None else self.C_list[j - 1]
        t = np.asarray(t, dtype=float)
        return C * self.h ** ((j - 1) * self.mu) * (
            self.h**self.mu - (1.0 / self.h + t) ** (-self.mu))

    def prefactor_rate(self, j: int, t):
        C = 1.0 if self.C_list is None else self.C_list[j - 1]
        t = np.asarray(t, dtype=float)
        return C * self.mu * self.h ** ((j - 1) * self.mu) * (
            (1.0 / self.h + t) ** (-1.0 - self.mu))


def build_phi0(ladder: EscapeLadder, t: float) -> Symbol:
    """phi0(t,.,.) = Phi(|x-y(t)|/ell(t)) Phi(dist(xi,xi2)/delta2)."""
    y, ell = ladder.y(t), ladder.ell(t)
    phi, d2, xi2 = ladder.phi, ladder.delta2, ladder.xi2

    def b(x):
        return np.asarray(phi(np.abs(np.asarray(x, dtype=float) - y) / ell))

    def c(xi):
        return np.asarray(phi(angle_diff(xi, xi2) / d2))

    meta = SupportMeta(np.atleast_1d(y), ell, np.atleast_1d(xi2), d2)
    return separable_symbol(1, b, c, class_tag="S_ht", order=0, support_meta=meta,
                            params={"h": ladder.h, "t": t})


def build_psi0(ladder: EscapeLadder, t: float) -> Symbol:
    """Principal symbol of |Op(phi0)|^2: Psi(|x-y(t)|/ell) Psi(dist(xi,xi2)/delta2)."""
    y, ell = ladder.y(t), ladder.ell(t)
    phi, d2, xi2 = ladder.phi, ladder.delta2, ladder.xi2

    def b(x):
        return np.asarray(phi.psi(np.abs(np.asarray(x, dtype=float) - y) / ell))

    def c(xi):
        return np.asarray(phi.psi(angle_diff(xi, xi2) / d2))

    meta = SupportMeta(np.atleast_1d(y), ell, np.atleast_1d(xi2), d2)
    return separable_symbol(1, b, c, class_tag="S_ht", order=0, support_meta=meta,
                            params={"h": ladder.h, "t": t})


def build_psi_j(ladder: EscapeLadder, j: int, t: float) -> Symbol:
    """Ladder rung psi_j = prefactor(t) Psi(|x-y|/ (gamma_j ell)) Psi(dxi/(gamma_j delta2)).

    Vanishes identically at t=0 through the prefactor.
    """
    if not 1 <= j <= ladder.depth:
        raise ValueError("j out of range")
    y = ladder.y(t)
    ellj = ladder.ell(t, j)
    rj = ladder.xi_radius(j)
    pref = float(ladder.prefactor(j, t))
    phi, xi2 = ladder.phi, ladder.xi2

    def b(x):
        return pref * np.asarray(phi.psi(np.abs(np.asarray(x, dtype=float) - y) / ellj))

    def c(xi):
        return np.asarray(phi.psi(angle_diff(xi, xi2) / rj))

    meta = SupportMeta(np.atleast_1d(y), ellj, np.atleast_1d(xi2), rj)
    return separable_symbol(1, b, c, class_tag="S_ht", order=0, support_meta=meta,
                            params={"h": ladder.h, "t": t, "j": j})


@dataclass(frozen=True)
class TransportGrid:
    """Sampling plan for the pointwise transport inequality."""

    t_values: tuple = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
    n_x: int = 401
    n_xi: int = 257
    pad: float = 1.3


def _transport_fields(ladder: EscapeLadder, j: int, t: float, x, xi):
    """Analytic (d_t + v d_x) psi_j and the j>=1 lower bound on arrays."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    y = ladder.y(t)
    ellj = ladder.ell(t, j)
    rj = ladder.xi_radius(j)
    phi = ladder.phi
    diff = x - y
    rho = np.abs(diff) / ellj
    sgn = np.sign(diff)
    v = np.asarray(velocity(ladder.stencil, xi), dtype=float)
    W = np.asarray(phi.psi(angle_diff(xi, ladder.xi2) / rj))
    dPsi = np.asarray(phi.psi_derivative(rho))
    # rho_dot along the transport field; Psi'(rho)=0 near rho=0 kills the kink
    rho_dot = sgn[:, None] * (v[None, :] - ladder.v2) / ellj - (
        rho[:, None] / (1.0 / ladder.h + t))
    core = dPsi[:, None] * rho_dot * W[None, :]
    if j == 0:
        return core, np.zeros_like(core)
    U = np.asarray(phi.psi(rho))
    pref = float(ladder.prefactor(j, t))
    rate = float(ladder.prefactor_rate(j, t))
    transport = rate * U[:, None] * W[None, :] + pref * core
    bound = rate * U[:, None] * W[None, :]
    return transport, bound


def _psi_value(ladder, j, t, x, xi):
    if j == 0:
        sym = build_psi0(ladder, t)
    else:
        sym = build_psi_j(ladder, j, t)
    return np.asarray(sym(x, xi))


def build_phi0_rate(ladder: EscapeLadder, t: float) -> Symbol:
    """Analytic d/dt of phi0(t,.,.), separable like phi0 itself."""
    y, ell = ladder.y(t), ladder.ell(t)
    phi, d2, xi2, v2 = ladder.phi, ladder.delta2, ladder.xi2, ladder.v2
    scale = 1.0 / ladder.h + t

    def b(x):
        x = np.asarray(x, dtype=float)
        diff = x - y
        rho = np.abs(diff) / ell
        rho_t = -np.sign(diff) * v2 / ell - rho / scale
        return np.asarray(phi.derivative(rho)) * rho_t

    def c(xi):
        return np.asarray(phi(angle_diff(xi, xi2) / d2))

    return separable_symbol(1, b, c, class_tag="S_ht", order=-1,
                            params={"h": ladder.h, "t": t})


def build_psi_j_rate(ladder: EscapeLadder, j: int, t: float) -> Symbol:
    """Analytic d/dt of psi_j (product rule through prefactor and bump)."""
    y = ladder.y(t)
    ellj = ladder.ell(t, j)
    rj = ladder.xi_radius(j)
    pref = float(ladder.prefactor(j, t))
    rate = float(ladder.prefactor_rate(j, t))
    phi, xi2, v2 = ladder.phi, ladder.xi2, ladder.v2
    scale = 1.0 / ladder.h + t

    def b(x):
        x = np.asarray(x, dtype=float)
        diff = x - y
        rho = np.abs(diff) / ellj
        rho_t = -np.sign(diff) * v2 / ellj - rho / scale
        return rate * np.asarray(phi.psi(rho)) + pref * np.asarray(phi.psi_derivative(rho)) * rho_t

    def c(xi):
        return np.asarray(phi.psi(angle_diff(xi, xi2) / rj))

    return separable_symbol(1, b, c, class_tag="S_ht", order=-1,
                            params={"h": ladder.h, "t": t, "j": j})


@dataclass
class TransportReport:
    min_value: float
    argmin: tuple
    fd_agreement: float
    passed: bool


def verify_transport(ladder: EscapeLadder, j: int, grid: TransportGrid = TransportGrid(),
                     tol: float = 1e-12, fd_checks: int = 100) -> TransportReport:
    """Min over the grid of (d_t psi_j + v d_x psi_j) minus (for j>=1) the
    stated lower bound. Passes iff the min is >= -tol.

    Derivatives are analytic; a centered finite-difference cross-check runs
    at `fd_checks` random points and must agree to 1e-6.
    """
    best = np.inf
    arg = None
    g = rng()
    fd_worst = 0.0
    for t in grid.t_values:
        ellj = ladder.ell(t, j)
        y = ladder.y(t)
        x = np.linspace(y - grid.pad * ellj, y + grid.pad * ellj, grid.n_x)
        xi = ladder.xi2 + np.linspace(-grid.pad * ladder.xi_radius(j),
                                      grid.pad * ladder.xi_radius(j), grid.n_xi)
        transport, bound = _transport_fields(ladder, j, t, x, xi)
        val = transport - bound
        i = np.unravel_index(np.argmin(val), val.shape)
        if val[i] < best:
            best = float(val[i])
            arg = (t, float(x[i[0]]), float(xi[i[1]]))
        if t <= 1e-5:
            continue  # centered t-difference needs t > 0; interior points suffice
        n_spot = max(1, fd_checks // max(len(grid.t_values) - 1, 1))
        xs = y + (g.random(n_spot) * 2 - 1) * grid.pad * ellj
        xis = ladder.xi2 + (g.random(n_spot) * 2 - 1) * grid.pad * ladder.xi_radius(j)
        tr, _ = _transport_fields(ladder, j, t, xs, xis)
        an = np.diag(tr)
        eps_t, eps_x = 1e-5, 1e-5
        vv = np.asarray(velocity(ladder.stencil, xis), dtype=float)

        def paired(tt, xv):
            return np.asarray(_psi_value(ladder, j, tt, xv, xis))

        fd = ((paired(t + eps_t, xs) - paired(t - eps_t, xs)) / (2 * eps_t)
              + vv * (paired(t, xs + eps_x) - paired(t, xs - eps_x)) / (2 * eps_x))
        fd_worst = max(fd_worst, float(np.max(np.abs(an - fd))))
    if fd_worst > 1e-6:
        raise RuntimeError(f"analytic/finite-difference transport mismatch {fd_worst:.2e}")
    return TransportReport(min_value=best, argmin=arg, fd_agreement=fd_worst,
                           passed=best >= -tol)


def choose_constants(ladder: EscapeLadder, remainder_estimates: Sequence[float],
                     safety_factor: float = 2.0, grid_n: int = 801):
    """Pick C_j = safety * sup|r_(j-1)| / (mu kappa_j) rung by rung.

    remainder_estimates[j-1] is the grid-measured sup of
    |r_(j-1)| / (h^((j-1)mu) (1/h+t)^(-1-mu)) over O_(j-1)(t).
    kappa_j is the measured min of Psi(.)Psi(.) of rung j over O_(j-1)(t).
    """
    if len(remainder_estimates) != ladder.depth:
        raise ValueError("need one remainder estimate per rung")
    C_out = []
    kappas = []
    phi = ladder.phi
    for j in range(1, ladder.depth + 1):
        kmin = np.inf
        for t in ladder.t_grid:
            # O_(j-1)(t) in the bump variables: rho_(j-1) <= 1, torus ball
            ell_prev = ladder.ell(t, j - 1)
            ellj = ladder.ell(t, j)
            x = np.linspace(ladder.y(t) - ell_prev, ladder.y(t) + ell_prev, grid_n)
            rho_j = np.abs(x - ladder.y(t)) / ellj
            xi = ladder.xi2 + np.linspace(-ladder.xi_radius(j - 1),
                                          ladder.xi_radius(j - 1), grid_n)
            w_j = angle_diff(xi, ladder.xi2) / ladder.xi_radius(j)
            val = np.min(phi.psi(rho_j)) * np.min(phi.psi(w_j))
            kmin = min(kmin, float(val))
        if kmin <= 0.0:
            raise LadderInvariantError(f"kappa_{j} <= 0: support nesting broken")
        kappas.append(kmin)
        C_out.append(safety_factor * remainder_estimates[j - 1] / (ladder.mu * kmin))
    return tuple(C_out), tuple(kappas)


# ---------------------------------------------------------------------------
# dense spectral checks


def periodic_dense_h(model_cfg: ModelConfig, box: Box) -> np.ndarray:
    """Dense periodic H = p0(D) + V on the box.

    The DFT quantization is periodic; pairing it with the Dirichlet-truncated
    H0 leaks an O(1) commutator artifact through the box seam, so the dense
    escape checks use the multiplier form of H0.
    """
    N = box.site_count
    if N > 4200:
        raise ValueError("box too large for the dense route")
    mult = fourier_multiplier(model_cfg.stencil.p0, box)
    H = to_dense(mult)
    H = (H + H.conj().T) / 2.0
    H[np.diag_indices(N)] += model_cfg.potential.values(box.sites())
    return H


def _dense_op(symbol: Symbol, box: Box) -> np.ndarray:
    """Dense left quantization of the grid-sampled symbol (d=1).

    M[i,j] = (1/N) sum_k a(n_i, xi_k) e^{i(n_i-n_j) xi_k}. Same convention as
    quantize.op_h but without the xi-tail guard: on the small escape boxes the
    Phi/Psi bumps' slow Gevrey tails trip it, and the object measured here is
    the operator of the sampled symbol itself.
    """
    if box.dim != 1:
        raise NotImplementedError("dense escape checks are d=1")
    n = box.sites()[:, 0].astype(float)
    xi = box.xi_axis()
    N = box.site_count
    vals = np.asarray(symbol(n[:, None], xi[None, :]), dtype=complex)
    C = vals * np.exp(1j * np.outer(n, xi)) * np.exp(1j * box.radius * xi)[None, :]
    return np.fft.fft(C, axis=1) / N


def _escape_F(ladder: EscapeLadder, t: float, box: Box) -> np.ndarray:
    """F(t) = |Op(phi0)|^2 + sum_j herm(Op(psi_j)). Exactly hermitian, and
    F(0) = |Op^h(a2)|^2 because every psi_j vanishes at t=0."""
    Q = _dense_op(build_phi0(ladder, t), box)
    F = Q.conj().T @ Q
    for j in range(1, ladder.depth + 1):
        M = _dense_op(build_psi_j(ladder, j, t), box)
        F += (M + M.conj().T) / 2.0
    return F


def _escape_F_rate(ladder: EscapeLadder, t: float, box: Box, dt: float = 3e-5):
    """dF/dt two ways: centered difference and the analytic product rule."""
    lo, hi = max(t - dt, 0.0), t + dt
    fd = (_escape_F(ladder, hi, box) - _escape_F(ladder, lo, box)) / (hi - lo)
    Q = _dense_op(build_phi0(ladder, t), box)
    Qd = _dense_op(build_phi0_rate(ladder, t), box)
    an = Qd.conj().T @ Q + Q.conj().T @ Qd
    for j in range(1, ladder.depth + 1):
        Md = _dense_op(build_psi_j_rate(ladder, j, t), box)
        an += (Md + Md.conj().T) / 2.0
    return fd, an


@dataclass
class EnergyReport:
    h_list: tuple
    t_samples: tuple
    lambda_min: dict          # (h, t) -> min eigenvalue
    defects: dict             # h -> max(0, -min_t lambda_min)
    exponent: float
    amplitude: float          # C with defect ~ C h^exponent
    threshold: float
    passed: bool

    def rows(self):
        for (h, t), lm in sorted(self.lambda_min.items()):
            yield {"h": h, "t": t, "lambda_min": lm,
                   "margin": lm + self.amplitude * h**self.exponent}


def energy_inequality_check(model_cfg: ModelConfig, ladder: EscapeLadder,
                            t_samples: Sequence[float], N_target: float,
                            h_list: Sequence[float] = (0.25, 0.125, 0.0625),
                            box_radius: int = 48) -> EnergyReport:
    """Spectral check of d_t F + i[H, F] >= -(defect) on a dense box.

    For each h the most negative eigenvalue over t_samples defines the
    defect D(h); the report fits D ~ C h^alpha and passes iff
    alpha >= 2 N_target mu - 0.5.
    """
    box = Box(1, box_radius)
    H = periodic_dense_h(model_cfg, box)
    lam_table = {}
    defects = {}
    for h in h_list:
        lad = replace(ladder, h=h)
        worst = 0.0
        for t in t_samples:
            dF_fd, dF_an = _escape_F_rate(lad, t, box)
            fd_tol = 1e-8 if t >= 3e-5 else 1e-4
            if np.linalg.norm(dF_fd - dF_an, 2) > fd_tol * max(1.0, np.linalg.norm(dF_fd, 2)):
                raise RuntimeError("dF/dt finite-difference vs analytic mismatch")
            F = _escape_F(lad, t, box)
            M = dF_fd + 1j * (H @ F - F @ H)
            drift = np.linalg.norm(M - M.conj().T, 2)
            if drift > 1e-10:
                raise HermiticityDriftError(
                    f"non-hermitian drift {drift:.2e} (symbol realness violated?)")
            lmin = float(np.linalg.eigvalsh((M + M.conj().T) / 2.0)[0])
            lam_table[(h, t)] = lmin
            worst = max(worst, max(0.0, -lmin))
        defects[h] = worst
    floor = 1e-15
    ds = np.array([max(defects[h], floor) for h in h_list])
    slope, intercept, _ = lstsq_loglog(np.asarray(h_list), ds)
    threshold = 2.0 * N_target * ladder.mu - 0.5
    return EnergyReport(h_list=tuple(h_list), t_samples=tuple(t_samples),
                        lambda_min=lam_table, defects=defects,
                        exponent=slope, amplitude=10.0**intercept,
                        threshold=threshold, passed=slope >= threshold)


@dataclass
class MonotonicityReport:
    t_list: tuple
    margins: dict             # t -> lambda_min(G(t) - F(0))
    bound: float              # -C h^alpha from the energy fit (0 if absent)
    ok: dict
    passed: bool


def monotonicity_check(model_cfg: ModelConfig, ladder: EscapeLadder,
                       t_list: Sequence[float],
                       energy_report: Optional[EnergyReport] = None,
                       box_radius: int = 64) -> MonotonicityReport:
    """Check e^{itH} F(t) e^{-itH} - F(0) >= -(fitted defect bound) densely."""
    box = Box(1, box_radius)
    H = periodic_dense_h(model_cfg, box)
    evals, Q = np.linalg.eigh(H)
    F0 = _escape_F(ladder, 0.0, box)
    bound = 0.0
    if energy_report is not None:
        bound = energy_report.amplitude * ladder.h**energy_report.exponent
    margins = {}
    ok = {}
    for t in t_list:
        U = Q @ (np.exp(-1j * t * evals)[:, None] * Q.conj().T)
        G = U.conj().T @ _escape_F(ladder, t, box) @ U
        lm = float(np.linalg.eigvalsh(G - F0)[0])
        margins[t] = lm
        ok[t] = lm >= -max(bound, 1e-12)
    return MonotonicityReport(t_list=tuple(t_list), margins=margins, bound=bound,
                              ok=ok, passed=all(ok.values()))
