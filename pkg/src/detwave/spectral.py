"""
Pseudo-spectral incompressible Navier-Stokes solver on the periodic box [0, L]^3.

Fields are stored as Fourier-series coefficients in the real-FFT layout
``(3, N, N, N//2 + 1)``::

    u(x) = sum_k  u_hat(k) exp(i 2 pi k.x / L),      ||u||_2^2 = L^3 sum_k |u_hat(k)|^2

so ``u_hat = rfftn(u) / N^3``. The half-spectrum stores kz >= 0 only; the
missing half is implied by Hermitian symmetry. Parseval sums over the half
spectrum therefore weight the interior kz planes by 2.

Time integration is a fourth-order integrating-factor Runge-Kutta scheme:
the viscous decay exp(-nu |2 pi k / L|^2 dt) is applied exactly and the
Leray-projected, 2/3-dealiased advection plus forcing is treated explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from detwave.errors import CFLError

logger = logging.getLogger(__name__)

CFL_LIMIT = 0.5
_AXES = (-3, -2, -1)


@dataclass(frozen=True, eq=False)
class Grid:
    """Wavevector lattice and transforms for an N^3 periodic grid of side L."""

    N: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    def __eq__(self, other):
        return isinstance(other, Grid) and self.N == other.N and self.L == other.L

    def __hash__(self):
        return hash((self.N, self.L))

    @property
    def shape(self):
        """Half-spectrum coefficient shape."""
        return (self.N, self.N, self.N // 2 + 1)

    @property
    def phys_shape(self):
        return (self.N,) * 3

    @property
    def dx(self):
        return self.L / self.N

    @property
    def kmax_dealias(self):
        return self.N // 3

    @cached_property
    def k(self):
        """Integer wavevector components, broadcastable to ``shape``."""
        N = self.N
        kx = np.fft.fftfreq(N, 1.0 / N).astype(np.int64).reshape(N, 1, 1)
        ky = kx.reshape(1, N, 1)
        kz = np.arange(N // 2 + 1, dtype=np.int64).reshape(1, 1, N // 2 + 1)
        return kx, ky, kz

    @cached_property
    def k2(self):
        kx, ky, kz = self.k
        return (kx**2 + ky**2 + kz**2).astype(float)

    @cached_property
    def kabs(self):
        return np.sqrt(self.k2)

    @cached_property
    def kappa(self):
        """Physical wavevector 2 pi k / L as three broadcastable arrays."""
        c = 2 * math.pi / self.L
        return tuple(c * ki.astype(float) for ki in self.k)

    @cached_property
    def kappa2(self):
        return (2 * math.pi / self.L) ** 2 * self.k2

    @cached_property
    def dealias(self):
        kx, ky, kz = self.k
        m = self.kmax_dealias
        return (np.abs(kx) <= m) & (np.abs(ky) <= m) & (kz <= m)

    @cached_property
    def weights(self):
        """Half-spectrum multiplicity: 1 on the kz = 0 and Nyquist planes, else 2."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape(1, 1, -1)

    def zeros(self, ncomp=3):
        return np.zeros((ncomp,) + self.shape, dtype=complex)

    def to_physical(self, coeffs):
        """Inverse transform of coefficient arrays (leading axes are batched)."""
        n3 = self.N**3
        return sfft.irfftn(coeffs, s=(self.N,) * 3, axes=_AXES) * n3

    def to_spectral(self, values):
        return sfft.rfftn(values, axes=_AXES) / self.N**3

    def mesh(self):
        x = np.arange(self.N) * self.dx
        return np.meshgrid(x, x, x, indexing="ij")

    def parseval(self, a, b=None):
        """L^2 inner product (a, b) on the torus from half-spectrum coefficients."""
        if b is None:
            s = np.sum(self.weights * (a.real**2 + a.imag**2))
        else:
            s = np.sum(self.weights * (a * b.conj()).real)
        return self.L**3 * float(s)


@dataclass(eq=False)
class SpectralField:
    """Real three-component vector field held as half-spectrum coefficients."""

    grid: Grid
    coeffs: np.ndarray

    @classmethod
    def zeros(cls, grid):
        return cls(grid, grid.zeros())

    @classmethod
    def from_physical(cls, grid, values):
        return cls(grid, grid.to_spectral(np.asarray(values, dtype=float)))

    def physical(self):
        return self.grid.to_physical(self.coeffs)

    def copy(self):
        return SpectralField(self.grid, self.coeffs.copy())

    def with_coeffs(self, coeffs):
        return SpectralField(self.grid, coeffs)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def norm_sq(self):
        return self.grid.parseval(self.coeffs)

    def norm(self):
        return math.sqrt(self.norm_sq())

    def max_divergence(self):
        """max_k |k . u_hat(k)| relative to sqrt(sum |u_hat|^2)."""
        kx, ky, kz = self.grid.k
        c = self.coeffs
        div = np.abs(kx * c[0] + ky * c[1] + kz * c[2])
        scale = math.sqrt(np.sum(np.abs(c) ** 2))
        return float(div.max() / scale) if scale > 0 else 0.0

    def hermitian_defect(self):
        """Largest violation of u_hat(-k) = conj(u_hat(k)) on the self-conjugate planes."""
        c = self.coeffs
        worst = 0.0
        for iz in {0, self.grid.N // 2}:
            plane = c[:, :, :, iz]
            mirrored = np.roll(np.flip(plane, axis=(1, 2)), 1, axis=(1, 2))
            worst = max(worst, float(np.abs(plane - mirrored.conj()).max()))
        return worst


def leray_project(field):
    """Remove the longitudinal part k (k . u_hat) / |k|^2 and the mean."""
    grid = field.grid
    kx, ky, kz = grid.k
    c = field.coeffs
    k2 = grid.k2.copy()
    k2[0, 0, 0] = 1.0
    kdotu = (kx * c[0] + ky * c[1] + kz * c[2]) / k2
    out = np.empty_like(c)
    out[0] = c[0] - kx * kdotu
    out[1] = c[1] - ky * kdotu
    out[2] = c[2] - kz * kdotu
    out[:, 0, 0, 0] = 0.0
    return field.with_coeffs(out)


def dealias(field):
    return field.with_coeffs(field.coeffs * field.grid.dealias)


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _advection(grid, coeffs):
    """Projected -(u . grad) u and the physical velocity used to evaluate it.

    Evaluated as div(u (x) u): for a dealiased divergence-free field the
    product is alias-free on the retained modes, where the two forms agree.
    """
    c = coeffs * grid.dealias
    u = grid.to_physical(c)
    prod = np.stack([u[i] * u[j] for i, j in _PAIRS])
    ph = grid.to_spectral(prod)
    t = {}
    for n, (i, j) in enumerate(_PAIRS):
        t[i, j] = t[j, i] = ph[n]
    kap = grid.kappa
    rhs = np.stack([-1j * sum(kap[j] * t[i, j] for j in range(3)) for i in range(3)])
    rhs *= grid.dealias
    return leray_project(SpectralField(grid, rhs)).coeffs, u


def convective_term(u):
    """Reference evaluation of -(u . grad) u in convective form (9 gradient transforms)."""
    grid = u.grid
    c = u.coeffs * grid.dealias
    up = grid.to_physical(c)
    kap = grid.kappa
    grads = np.stack([1j * kap[j] * c for j in range(3)])
    du = grid.to_physical(grads)  # du[j, i] = d_j u_i
    conv = np.einsum("j...,ji...->i...", up, du)
    rhs = SpectralField(grid, -grid.to_spectral(conv) * grid.dealias)
    return leray_project(rhs)


def nonlinear_term(u):
    """Leray-projected, 2/3-dealiased pseudo-spectral evaluation of -(u . grad) u."""
    coeffs, _ = _advection(u.grid, u.coeffs)
    return u.with_coeffs(coeffs)


@dataclass(frozen=True)
class ForcingSpec:
    """Time-constant forcing on a few low modes.

    Each entry is ``(k, a)`` with an integer wavevector k and a complex
    3-vector a perpendicular to k; the physical force is Re(a exp(i 2 pi k.x / L))
    summed over entries.
    """

    modes: tuple = ()

    def __post_init__(self):
        for k, a in self.modes:
            k = np.asarray(k, dtype=float)
            a = np.asarray(a, dtype=complex)
            if k.shape != (3,) or a.shape != (3,):
                raise ValueError("forcing modes need a 3-vector k and a 3-vector amplitude")
            if not np.any(k):
                raise ValueError("forcing at k = 0 violates the zero-mean assumption")
            if abs(np.dot(k, a)) > 1e-12 * np.linalg.norm(k) * max(np.linalg.norm(a), 1.0):
                raise ValueError(f"forcing amplitude {a} is not perpendicular to k = {k}")

    def coefficients(self, grid):
        f = grid.zeros()
        N = grid.N
        for k, a in self.modes:
            k = tuple(int(v) for v in k)
            a = np.asarray(a, dtype=complex)
            if max(abs(v) for v in k) > grid.kmax_dealias:
                raise ValueError(f"forced mode {k} is removed by dealiasing at N={N}")
            if k[2] < 0 or (k[2] == 0 and (k[1] < 0 or (k[1] == 0 and k[0] < 0))):
                k, a = tuple(-v for v in k), a.conj()
            f[:, k[0] % N, k[1] % N, k[2]] += a / 2
            if k[2] == 0:
                f[:, -k[0] % N, -k[1] % N, 0] += a.conj() / 2
        return f

    def field(self, grid):
        return SpectralField(grid, self.coefficients(grid))


@dataclass
class SolverState:
    u: SpectralField
    nu: float
    dt: float
    t: float = 0.0
    forcing: ForcingSpec = field(default_factory=ForcingSpec)

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def grid(self):
        return self.u.grid

    @cached_property
    def _forcing_coeffs(self):
        return self.forcing.coefficients(self.grid)


def _max_speed(u_phys):
    return float(np.sqrt(np.sum(u_phys**2, axis=0)).max())


def step(state):
    """Advance by one IFRK4 step; raise CFLError if the step is inadmissible."""
    grid, nu, dt = state.grid, state.nu, state.dt
    f = state._forcing_coeffs
    eh = np.exp(-0.5 * nu * dt * grid.kappa2)
    e = eh * eh
    u0 = state.u.coeffs

    n1, u_phys = _advection(grid, u0)
    umax = _max_speed(u_phys)
    cfl = dt * umax / grid.dx
    if cfl > CFL_LIMIT:
        raise CFLError(cfl, CFL_LIMIT * grid.dx / umax)
    k1 = n1 + f
    k2 = _advection(grid, eh * (u0 + 0.5 * dt * k1))[0] + f
    k3 = _advection(grid, eh * u0 + 0.5 * dt * k2)[0] + f
    k4 = _advection(grid, e * u0 + dt * eh * k3)[0] + f
    u1 = e * u0 + (dt / 6.0) * (e * k1 + 2.0 * eh * (k2 + k3) + k4)
    u1 *= grid.dealias
    new = replace(state, u=SpectralField(grid, u1), t=state.t + dt)
    new.__dict__["_forcing_coeffs"] = f
    return new


def diagnostics(u):
    """Energy 1/2 ||u||_2^2 and enstrophy-like ||grad u||_2^2 by Parseval."""
    grid = u.grid
    e2 = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    energy = 0.5 * grid.L**3 * float(np.sum(grid.weights * e2))
    grad_sq = grid.L**3 * float(np.sum(grid.weights * grid.kappa2 * e2))
    return {"energy": energy, "grad_sq": grad_sq}


def forcing_work(state, u=None):
    """Power input (f, u)."""
    u = state.u if u is None else u
    return state.grid.parseval(u.coeffs, state._forcing_coeffs)


def energy_residual(state):
    """Energy-balance residual of one step, relative to 1/2 ||u(t)||^2.

    Evaluates Delta(1/2 ||u||^2) + nu int ||grad u||^2 - int (f, u) over
    [t, t + dt], with the integrals from Simpson's rule on the states at t,
    t + dt/2 (a separate half step) and t + dt.
    """
    mid = step(replace(state, dt=state.dt / 2))
    end = step(state)

    def rate(s):
        return state.nu * diagnostics(s.u)["grad_sq"] - forcing_work(state, s.u)

    integral = state.dt / 6.0 * (rate(state) + 4 * rate(mid) + rate(end))
    e0 = diagnostics(state.u)["energy"]
    e1 = diagnostics(end.u)["energy"]
    return (e1 - e0 + integral) / e0


def default_spectrum(k, k_peak=2.0):
    return k**4 * np.exp(-2.0 * (k / k_peak) ** 2)


def random_field(
    grid,
    seed,
    rms=1.0,
    q_range=(0, 3),
    spectrum: Callable = default_spectrum,
):
    """Random divergence-free field with a prescribed shell spectrum.

    Modes are restricted to Littlewood-Paley shells ``q_range`` (integer
    radius in (3/4 2^q_lo, 2^(q_hi+1))). Every integer shell round(|k|) is
    rescaled to the energy given by ``spectrum``, so fields from different
    seeds share the same shell spectrum exactly. ``rms`` fixes
    ||u||_2^2 / L^3.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3,) + (grid.N,) * 3)
    u = leray_project(SpectralField.from_physical(grid, noise))
    q_lo, q_hi = q_range
    kabs = grid.kabs
    support = (kabs > 0.75 * 2.0**q_lo) & (kabs < 2.0 ** (q_hi + 1)) & grid.dealias
    shell = np.rint(kabs).astype(int)
    c = u.coeffs * support
    e2 = np.sum(np.abs(c) ** 2, axis=0) * grid.weights
    shells = np.unique(shell[support])
    current = np.bincount(shell[support], weights=e2[support], minlength=shells.max() + 1)
    target = spectrum(shells.astype(float))
    if not np.any(target > 0):
        raise ValueError("spectrum vanishes on every shell in q_range")
    target = target / target.sum()
    scale = np.zeros(shells.max() + 1)
    ok = current[shells] > 0
    scale[shells[ok]] = np.sqrt(target[ok] / current[shells[ok]])
    c = c * np.where(support, scale[np.minimum(shell, shells.max())], 0.0)
    out = SpectralField(grid, c)
    return out * (rms * math.sqrt(grid.L**3) / out.norm())


def single_mode(grid, k, amplitude):
    """Field Re(a exp(i 2 pi k.x / L)) for integer k and a perpendicular to k."""
    return ForcingSpec(((tuple(k), tuple(amplitude)),)).field(grid)


def check_invariants(u, tol=1e-12):
    """Return a list of violated SpectralField invariants (empty if valid)."""
    problems = []
    scale = float(np.abs(u.coeffs).max()) or 1.0
    if np.abs(u.coeffs[:, 0, 0, 0]).max() > tol * scale:
        problems.append("nonzero mean")
    if u.max_divergence() > tol:
        problems.append("not divergence-free")
    if u.hermitian_defect() > tol * scale:
        problems.append("not Hermitian")
    return problems


def evolve(state, n_steps, callback=None):
    """Take ``n_steps`` steps, calling ``callback(state)`` after each."""
    for _ in range(n_steps):
        state = step(state)
        if callback is not None:
            callback(state)
    return state


__all__: Sequence[str] = [
    "Grid",
    "SpectralField",
    "ForcingSpec",
    "SolverState",
    "leray_project",
    "dealias",
    "nonlinear_term",
    "convective_term",
    "step",
    "diagnostics",
    "forcing_work",
    "energy_residual",
    "random_field",
    "single_mode",
    "check_invariants",
    "evolve",
]
