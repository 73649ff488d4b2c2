"""Lattice model: finite-difference H0, long-range potentials, boxes, CAP,
and matrix-free assembly of the truncated Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .symbols import Symbol
from .util import rng


class EmptyShellError(ValueError):
    """The requested energy window meets no torus momenta."""


class CriticalValueError(ValueError):
    """The energy shell contains (numerically) critical points of p0."""


@dataclass(frozen=True)
class Stencil:
    """Finite hopping rule: (H0 u)(n) = sum_m coeffs[m] u(n - m).

    Offsets are integer vectors in Z^d. Symmetry (offset -m present with
    conjugate coefficient) is enforced at construction; it makes H0 symmetric
    and the torus symbol real.
    """

    dim: int
    offsets: tuple
    coeffs: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        offs = [tuple(int(c) for c in np.atleast_1d(o)) for o in self.offsets]
        if len(set(offs)) != len(offs):
            raise ValueError("duplicate offsets")
        if any(len(o) != self.dim for o in offs):
            raise ValueError("offset dimension mismatch")
        coeffs = tuple(complex(c) for c in self.coeffs)
        if len(coeffs) != len(offs):
            raise ValueError("offsets and coeffs length mismatch")
        table = dict(zip(offs, coeffs))
        for o, g in table.items():
            neg = tuple(-c for c in o)
            if neg not in table or abs(table[neg] - np.conj(g)) > 1e-14 * max(1.0, abs(g)):
                raise ValueError(f"symmetry violated at offset {o}")
        object.__setattr__(self, "offsets", tuple(offs))
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def bandwidth(self) -> int:
        return max(max(abs(c) for c in o) for o in self.offsets)

    def p0(self, xi):
        """Torus symbol p0(xi) = sum_m gamma_m e^{i xi.m}; real by symmetry."""
        xi = np.asarray(xi, dtype=float)
        if self.dim == 1:
            acc = np.zeros(np.shape(xi), dtype=complex)
            for o, g in zip(self.offsets, self.coeffs):
                acc = acc + g * np.exp(1j * xi * o[0])
        else:
            acc = np.zeros(np.shape(xi)[:-1], dtype=complex)
            for o, g in zip(self.offsets, self.coeffs):
                acc = acc + g * np.exp(1j * np.tensordot(xi, np.asarray(o, dtype=float), axes=([-1], [0])))
        return np.real_if_close(acc, tol=100)

    def gradient(self, xi):
        """v(xi) = dp0(xi), real by symmetry. Shape (..., d) (scalar ok, d=1)."""
        xi = np.asarray(xi, dtype=float)
        if self.dim == 1:
            acc = np.zeros(np.shape(xi), dtype=complex)
            for o, g in zip(self.offsets, self.coeffs):
                acc = acc + g * (1j * o[0]) * np.exp(1j * xi * o[0])
            return np.real_if_close(acc, tol=100)
        acc = np.zeros(np.shape(xi)[:-1] + (self.dim,), dtype=complex)
        for o, g in zip(self.offsets, self.coeffs):
            ov = np.asarray(o, dtype=float)
            phase = np.exp(1j * np.tensordot(xi, ov, axes=([-1], [0])))
            acc = acc + g * 1j * phase[..., None] * ov
        return np.real_if_close(acc, tol=100)

    def coeff_abs_sum(self) -> float:
        return float(sum(abs(g) for g in self.coeffs))


def laplacian_stencil(dim: int = 1) -> Stencil:
    """Nearest-neighbor stencil with p0(xi) = sum_a (1 - cos xi_a)."""
    offsets = [(0,) * dim]
    coeffs = [float(dim)]
    for a in range(dim):
        for s in (+1, -1):
            o = [0] * dim
            o[a] = s
            offsets.append(tuple(o))
            coeffs.append(-0.5)
    return Stencil(dim=dim, offsets=tuple(offsets), coeffs=tuple(coeffs))


def build_p0(stencil: Stencil) -> Symbol:
    """The symbol of H0 as a Symbol object (xi-only, class S^0)."""

    def c(xi):
        val = np.asarray(stencil.p0(xi))
        if np.iscomplexobj(val):
            raise ValueError("stencil symbol is not numerically real")
        return val

    def ones_x(x):
        shape = np.shape(np.asarray(x))
        if stencil.dim > 1:
            shape = shape[:-1]
        return np.ones(shape)

    def ev(x, xi):
        return ones_x(x) * c(xi)

    return Symbol(dim=stencil.dim, eval=ev, class_tag="S", order=0,
                  x_part=ones_x, xi_part=c)


def velocity(stencil: Stencil, xi):
    """Group velocity v(xi) = dp0(xi) as a real vector (scalar for d=1)."""
    v = stencil.gradient(xi)
    if np.iscomplexobj(v):
        raise ValueError("velocity is not numerically real; check stencil symmetry")
    return v


def check_energy_window(stencil: Stencil, window, grid_n: int = 256, floor: float = 1e-6):
    """Min of |v(xi)| over the sampled shell {p0(xi) in window}.

    Raises EmptyShellError when no sampled momentum lands in the window and
    CriticalValueError when the sampled minimum falls below `floor`
    (pass floor=None to skip the rejection).
    """
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64 per dimension")
    lo, hi = float(window[0]), float(window[1])
    if not lo <= hi:
        raise ValueError("empty interval")
    axes = [np.linspace(0.0, 2.0 * np.pi, grid_n, endpoint=False)] * stencil.dim
    if stencil.dim == 1:
        xi = axes[0]
        p = np.asarray(stencil.p0(xi), dtype=float)
        speeds = np.abs(np.asarray(stencil.gradient(xi), dtype=float))
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        xi = np.stack(mesh, axis=-1)
        p = np.asarray(stencil.p0(xi), dtype=float)
        speeds = np.linalg.norm(np.asarray(stencil.gradient(xi), dtype=float), axis=-1)
    mask = (p >= lo) & (p <= hi)
    if not np.any(mask):
        raise EmptyShellError(f"no momenta with p0 in [{lo}, {hi}]")
    vmin = float(np.min(speeds[mask]))
    if floor is not None and vmin < floor:
        raise CriticalValueError(
            f"window [{lo}, {hi}] reaches a critical region: min|v| = {vmin:.3e}")
    return vmin


@dataclass(frozen=True)
class Potential:
    """Real multiplication potential V(n) with decay exponent mu.

    form: "none", "power_law" (c (1+|n|^2)^(-mu/2)),
    "dipole" (c n_1 (1+|n|^2)^(-(mu+1)/2)), or "table" (values on a box).
    """

    mu: float = 0.5
    amplitude: float = 0.0
    form: str = "none"
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.form not in ("none", "power_law", "dipole", "table"):
            raise ValueError(f"unknown potential form {self.form!r}")
        if not (0.0 < self.mu <= 1.0) and self.form != "none":
            raise ValueError("mu must lie in (0, 1]")
        if self.form == "table":
            if self.table is None:
                raise ValueError("table form needs values")
            if np.iscomplexobj(self.table):
                raise ValueError("potential must be real-valued")

    def values(self, sites: np.ndarray) -> np.ndarray:
        """Evaluate on integer sites, shape (N,) from sites of shape (N, d)."""
        sites = np.atleast_2d(sites).astype(float)
        r2 = np.sum(sites**2, axis=1)
        if self.form == "none":
            return np.zeros(len(sites))
        if self.form == "power_law":
            return self.amplitude * (1.0 + r2) ** (-self.mu / 2.0)
        if self.form == "dipole":
            return self.amplitude * sites[:, 0] * (1.0 + r2) ** (-(self.mu + 1.0) / 2.0)
        vals = np.asarray(self.table, dtype=float).ravel()
        if len(vals) != len(sites):
            raise ValueError("table size does not match box")
        return vals

    def decay_constant(self, sites: np.ndarray) -> float:
        """Measured C with |V(n)| <= C (1+|n|)^(-mu) on the given sites."""
        v = np.abs(self.values(sites))
        r = np.linalg.norm(np.atleast_2d(sites).astype(float), axis=1)
        return float(np.max(v * (1.0 + r) ** self.mu)) if len(v) else 0.0


@dataclass(frozen=True)
class Box:
    """Cube {n in Z^d : |n|_inf <= radius}, sites enumerated row-major."""

    dim: int
    radius: int

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    @property
    def n_per_axis(self) -> int:
        return 2 * self.radius + 1

    @property
    def site_count(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n_per_axis,) * self.dim

    def sites(self) -> np.ndarray:
        """(site_count, dim) integer coordinates, row-major."""
        ax = np.arange(-self.radius, self.radius + 1)
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def index_of(self, site) -> int:
        site = np.atleast_1d(site)
        idx = 0
        for c in site:
            if abs(int(c)) > self.radius:
                raise ValueError("site outside box")
            idx = idx * self.n_per_axis + (int(c) + self.radius)
        return int(idx)

    def site_of(self, index: int) -> np.ndarray:
        out = np.zeros(self.dim, dtype=int)
        for a in range(self.dim - 1, -1, -1):
            out[a] = index % self.n_per_axis - self.radius
            index //= self.n_per_axis
        return out

    def xi_axis(self) -> np.ndarray:
        """Momentum grid per axis in FFT bin order, values in [-pi, pi)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_per_axis)

    def inf_norms(self) -> np.ndarray:
        return np.max(np.abs(self.sites()), axis=1)


@dataclass(frozen=True)
class CAPProfile:
    """Cubic-ramp complex absorbing potential W >= 0 in the outer layer."""

    width: int
    strength: float = 1.0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.strength <= 0:
            raise ValueError("strength must be > 0")

    def values(self, box: Box) -> np.ndarray:
        d = box.inf_norms().astype(float)
        inner = box.radius - self.width
        ramp = np.maximum(d - inner, 0.0) / self.width
        return self.strength * ramp**3


class LinearMap:
    """Matrix-free linear operator on complex vectors over a finite box."""

    def __init__(self, dim: int, apply: Callable, adjoint_apply: Callable,
                 hermitian: bool = False, bandwidth: Optional[int] = None, label: str = ""):
        self.dim = int(dim)
        self._apply = apply
        self._adjoint = adjoint_apply
        self.hermitian = bool(hermitian)
        self.bandwidth = bandwidth
        self.label = label

    def __call__(self, u):
        return self._apply(u)

    def apply(self, u):
        return self._apply(u)

    def adjoint_apply(self, u):
        return self._adjoint(u)


def identity_map(dim: int) -> LinearMap:
    return LinearMap(dim, lambda u: np.array(u, copy=True), lambda u: np.array(u, copy=True),
                     hermitian=True, bandwidth=0, label="I")


def scale_map(c: complex, A: LinearMap) -> LinearMap:
    c = complex(c)
    return LinearMap(A.dim, lambda u: c * A(u), lambda u: np.conj(c) * A.adjoint_apply(u),
                     hermitian=A.hermitian and c.imag == 0.0, label=f"{c}*{A.label}")


def compose_maps(*maps: LinearMap) -> LinearMap:
    """compose_maps(A, B, C) is the operator u -> A(B(C(u)))."""
    if not maps:
        raise ValueError("need at least one map")
    dim = maps[0].dim
    if any(m.dim != dim for m in maps):
        raise ValueError("dimension mismatch")

    def fwd(u):
        for m in reversed(maps):
            u = m(u)
        return u

    def adj(u):
        for m in maps:
            u = m.adjoint_apply(u)
        return u

    return LinearMap(dim, fwd, adj, label="∘".join(m.label for m in maps))


def adjoint_map(A: LinearMap) -> LinearMap:
    return LinearMap(A.dim, A.adjoint_apply, A.apply, hermitian=A.hermitian,
                     bandwidth=A.bandwidth, label=A.label + "*")


def to_dense(A: LinearMap, max_dim: int = 4200) -> np.ndarray:
    """Materialize a LinearMap column by column (oracle / small boxes only)."""
    if A.dim > max_dim:
        raise ValueError(f"refusing to densify dimension {A.dim} > {max_dim}")
    out = np.zeros((A.dim, A.dim), dtype=complex)
    for j in range(A.dim):
        e = np.zeros(A.dim, dtype=complex)
        e[j] = 1.0
        out[:, j] = A(e)
    return out


def verify_adjoint(A: LinearMap, n_checks: int = 20, seed=None) -> float:
    """Max relative defect of <Au, v> = <u, A* v> over random pairs."""
    g = rng(seed)
    worst = 0.0
    for _ in range(n_checks):
        u = g.standard_normal(A.dim) + 1j * g.standard_normal(A.dim)
        v = g.standard_normal(A.dim) + 1j * g.standard_normal(A.dim)
        lhs = np.vdot(v, A(u))
        rhs = np.vdot(A.adjoint_apply(v), u)
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return worst


class LatticeHamiltonian(LinearMap):
    """H = H0 + V (- iW with a CAP). Keeps assembly data for direct solvers."""

    def __init__(self, stencil: Stencil, potential: Potential, box: Box,
                 cap: Optional[CAPProfile] = None):
        if cap is not None and box.radius <= stencil.bandwidth + cap.width:
            raise ValueError("box radius must exceed stencil bandwidth + cap width")
        self.stencil = stencil
        self.potential = potential
        self.box = box
        self.cap = cap
        sites = box.sites()
        self.v_diag = potential.values(sites)
        self.decay_constant = potential.decay_constant(sites)
        self.cap_diag = cap.values(box) if cap is not None else np.zeros(box.site_count)
        self._shape = box.shape
        onsite = 0.0 + 0.0j
        hops = []
        for o, g in zip(stencil.offsets, stencil.coeffs):
            if all(c == 0 for c in o):
                onsite += g
            else:
                hops.append((o, g))
        if abs(onsite.imag) > 1e-14:
            raise ValueError("onsite coefficient must be real")
        self.onsite = onsite.real
        self.hops = hops
        diag = self.onsite + self.v_diag
        cap_d = self.cap_diag

        def fwd(u):
            return self._stencil_apply(u, diag - 1j * cap_d)

        def adj(u):
            # the hop part is self-adjoint by the stencil symmetry invariant;
            # only the (complex) diagonal flips
            return self._stencil_apply(u, diag + 1j * cap_d)

        super().__init__(box.site_count, fwd, adj, hermitian=cap is None,
                         bandwidth=stencil.bandwidth, label="H")

    def _stencil_apply(self, u, diag):
        """Apply to a vector (N,) or a block of columns (N, m)."""
        u = np.asarray(u)
        trail = u.shape[1:]
        grid = u.reshape(self._shape + trail)
        dshape = self._shape + (1,) * len(trail)
        out = (diag.reshape(dshape) * grid).astype(complex)
        n = self.box.n_per_axis
        tail_slices = (slice(None),) * len(trail)
        for o, g in self.hops:
            src = []
            dst = []
            ok = True
            for m in o:
                if abs(m) >= n:
                    ok = False
                    break
                dst.append(slice(max(0, m), n + min(0, m)))
                src.append(slice(max(0, -m), n + min(0, -m)))
            if not ok:
                continue
            out[tuple(dst) + tail_slices] += g * grid[tuple(src) + tail_slices]
        return out.reshape(u.shape)

    def hermitian_part_map(self) -> "LatticeHamiltonian":
        """The CAP-free operator H0 + V on the same box."""
        if self.cap is None:
            return self
        return LatticeHamiltonian(self.stencil, self.potential, self.box, cap=None)

    def inner_mask(self) -> np.ndarray:
        """Sites where the CAP vanishes."""
        return self.cap_diag == 0.0

    def banded(self, shift: complex = 0.0, branch_sign: int = +1, eps: float = 0.0):
        """(d=1) LAPACK band storage of H - shift -/+ i(eps + W) per branch.

        branch_sign=+1 gives H - shift - i(eps + W); -1 flips both CAP and
        eps to +i (incoming branch).
        """
        if self.box.dim != 1:
            raise ValueError("banded storage only for d=1")
        b = self.stencil.bandwidth
        N = self.box.site_count
        ab = np.zeros((2 * b + 1, N), dtype=complex)
        s = 1.0 if branch_sign >= 0 else -1.0
        diag = (self.onsite + self.v_diag - shift
                - 1j * s * (self.cap_diag + eps))
        ab[b, :] = diag
        for o, g in self.hops:
            m = o[0]
            # entry H[i, j] with j = i - m lives in ab[b + (i - j), j] = ab[b + m, j]
            row = b + m
            if m > 0:
                ab[row, : N - m] = g
            else:
                ab[row, -m:] = g
        return ab

    def dense(self, branch_sign: int = +1, eps: float = 0.0, shift: complex = 0.0):
        """Dense matrix of H_herm - shift -/+ i(eps + W) per branch (small boxes)."""
        n = self.box.site_count
        if n > 4200:
            raise ValueError("box too large to densify")
        herm = self.hermitian_part_map()
        out = np.empty((n, n), dtype=complex)
        e = np.zeros(n, dtype=complex)
        for j in range(n):
            e[:] = 0.0
            e[j] = 1.0
            out[:, j] = herm(e)
        s = 1.0 if branch_sign >= 0 else -1.0
        np.fill_diagonal(out, np.diag(out) - shift - 1j * s * (self.cap_diag + eps))
        return out

    def spectral_bound(self) -> float:
        """|H| <= sum|gamma_m| + max|V| + CAP strength (crude, safe)."""
        capmax = float(np.max(self.cap_diag)) if self.cap is not None else 0.0
        vmax = float(np.max(np.abs(self.v_diag))) if len(self.v_diag) else 0.0
        return self.stencil.coeff_abs_sum() + vmax + capmax


def assemble_hamiltonian(stencil: Stencil, potential: Potential, box: Box,
                         cap: Optional[CAPProfile] = None) -> LatticeHamiltonian:
    """Truncated Hamiltonian on the box; hermitian iff no CAP.

    Hopping terms that leave the box are dropped (Dirichlet truncation).
    """
    return LatticeHamiltonian(stencil, potential, box, cap)


@dataclass(frozen=True)
class ModelConfig:
    """Model block shared by the probes: stencil + potential + CAP rule."""

    stencil: Stencil = field(default_factory=laplacian_stencil)
    potential: Potential = field(default_factory=Potential)
    cap_width_frac: float = 0.125
    cap_strength: float = 1.0
    box_radius: Optional[int] = None

    def cap_for(self, box: Box) -> CAPProfile:
        w = max(int(round(self.cap_width_frac * box.radius)), 4)
        return CAPProfile(width=w, strength=self.cap_strength)

    def assemble(self, radius: int, with_cap: bool = True) -> LatticeHamiltonian:
        box = Box(self.stencil.dim, radius)
        cap = self.cap_for(box) if with_cap else None
        return assemble_hamiltonian(self.stencil, self.potential, box, cap)
