"""
Twin-solution synchronization: two solutions share their modes below the
determining wavenumber, and the difference w = u - v is tracked.

After every time step the uniform wavenumbers of u and v are recomputed,
Lambda = max(Lambda_u, Lambda_v) = lambda_Q, and v's coefficients on
|k| < 2^(Q+1) (the support of the lowpass multiplier chi(2^-(Q+1)|k|))
are overwritten with u's.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from detwave.errors import LambdaInfiniteError
from detwave.littlewood_paley import band_l2_sq, decompose, hs_from_bands, lowpass
from detwave.spectral import step
from detwave.wavenumber import uniform_lambda

logger = logging.getLogger(__name__)

H_MINUS_54 = -1.25
ZERO_REL = 1e-14


def enforce_sync(u, v, Q):
    """Copy u's coefficients onto v for every |k| < 2^(Q+1).

    Selection is mode by mode, so each output coefficient is an input
    coefficient and the divergence-free property carries over unchanged;
    re-projecting would only add roundoff.
    """
    low = u.grid.kabs < 2.0 ** (Q + 1)
    return v.with_coeffs(np.where(low, u.coeffs, v.coeffs))


@dataclass
class SyncRecord:
    t: float
    lam_u: float
    lam_v: float
    Q: int
    r: float
    delta: float
    s: float
    w_hm54: float
    w_hs: float
    w_l2: float
    w_h1: float
    u_l2: float
    w_band_sq: np.ndarray = field(repr=False)
    verified: bool = True

    def hs(self, s, L):
        return hs_from_bands(self.w_band_sq, s, L)


@dataclass
class TwinState:
    u: object  # SolverState
    v: object
    partition: object
    tuples: object
    enforce: bool = True
    cap_q: bool = False
    lam_u: float = math.nan
    lam_v: float = math.nan
    Q: int = 0
    records: list = field(default_factory=list)

    @property
    def grid(self):
        return self.u.grid

    @property
    def t(self):
        return self.u.t


def _measure(twin):
    nu = twin.u.nu
    ru = uniform_lambda(decompose(twin.u.u, twin.partition), twin.tuples, nu)
    rv = uniform_lambda(decompose(twin.v.u, twin.partition), twin.tuples, nu)
    verified = True
    if not (ru.finite and rv.finite):
        if not twin.cap_q:
            raise LambdaInfiniteError(twin.t, "u" if not ru.finite else "v")
        verified = False
        Q = twin.partition.q_max
        attaining = ru if not ru.finite else rv
    else:
        attaining = ru if ru.lam >= rv.lam else rv
        Q = attaining.Q
    return ru, rv, attaining, Q, verified


def _record(twin, ru, rv, attaining, Q, verified):
    L = twin.grid.L
    w = twin.u.u - twin.v.u
    bands = band_l2_sq(w, twin.partition)
    p = attaining.params
    return SyncRecord(
        t=twin.t,
        lam_u=ru.lam,
        lam_v=rv.lam,
        Q=Q,
        r=p.r,
        delta=p.delta,
        s=p.s,
        w_hm54=hs_from_bands(bands, H_MINUS_54, L),
        w_hs=hs_from_bands(bands, p.s, L),
        w_l2=w.norm(),
        w_h1=hs_from_bands(bands, 1.0, L),
        u_l2=twin.u.u.norm(),
        w_band_sq=bands,
        verified=verified,
    )


def _sync_and_record(twin):
    ru, rv, attaining, Q, verified = _measure(twin)
    twin.lam_u, twin.lam_v, twin.Q = ru.lam, rv.lam, Q
    if twin.enforce:
        twin.v.u = enforce_sync(twin.u.u, twin.v.u, Q)
    twin.records.append(_record(twin, ru, rv, attaining, Q, verified))
    return twin


def init_twin(u_state, v_state, partition, tuples, enforce=True, cap_q=False):
    """Pair two solver states and apply the first synchronization at t0."""
    if u_state.grid != v_state.grid or u_state.nu != v_state.nu or u_state.dt != v_state.dt:
        raise ValueError("twin states must share grid, viscosity and time step")
    twin = TwinState(u_state, v_state, partition, tuples, enforce=enforce, cap_q=cap_q)
    return _sync_and_record(twin)


def twin_step(twin):
    twin.u = step(twin.u)
    twin.v = step(twin.v)
    return _sync_and_record(twin)


def sync_residual(twin):
    """||(u - v)_{<=Q}||_2 / ||u||_2 right after enforcement."""
    w = lowpass(twin.u.u - twin.v.u, twin.Q, twin.partition)
    un = twin.u.u.norm()
    return w.norm() / un if un > 0 else w.norm()


def interpolation_check(w, s, partition):
    """||w||_{H^s}^2 / (||w||_{H^-5/4}^{2/p1} ||w||_{H^1}^{2/p2}), p1 = 9/(4-4s), p2 = 9/(5+4s)."""
    bands = band_l2_sq(w, partition)
    return interpolation_ratio(bands, s, w.grid.L)


def holder_exponents(s):
    return 9.0 / (4.0 - 4.0 * s), 9.0 / (5.0 + 4.0 * s)


def interpolation_ratio(bands, s, L):
    if not np.any(np.asarray(bands) > 0):
        raise ValueError("interpolation ratio undefined for w = 0")
    p1, p2 = holder_exponents(s)
    hs = hs_from_bands(bands, s, L)
    lo = hs_from_bands(bands, H_MINUS_54, L)
    hi = hs_from_bands(bands, 1.0, L)
    return hs**2 / (lo ** (2.0 / p1) * hi ** (2.0 / p2))


@dataclass
class DecayFit:
    rate: float
    floor: float
    residual: float
    n_points: int
    t_start: float
    t_end: float
    decay_complete: bool = False
    decaying: bool = True

    def to_dict(self):
        return dict(self.__dict__)


def _series(records, s, L):
    t = np.array([r.t for r in records])
    if s is None:
        y = np.array([r.w_hs for r in records])
    else:
        y = np.array([r.hs(s, L) for r in records])
    scale = np.array([r.u_l2 for r in records])
    return t, y, scale


def fit_decay(records, s, nu, L, skip=0.1, min_points=10):
    """Least-squares rate of ||w||_{H^s}^2 ~ exp(-rate t) after the transient.

    The first ``skip`` fraction of the time span is dropped; records where
    ||w||_{H^s} has fallen below 1e-14 ||u||_2 count as numerically zero and
    end the fitted range. ``s=None`` uses each record's own tuple index.
    """
    floor = nu * (2 * math.pi / L) ** 2
    t, y, scale = _series(records, s, L)
    t0 = t[0] + skip * (t[-1] - t[0])
    keep = t >= t0
    t, y, scale = t[keep], y[keep], scale[keep]
    if t.size < min_points:
        raise ValueError(f"need >= {min_points} records past the transient, have {t.size}")
    zero = y <= ZERO_REL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(zero):
        first = int(np.argmax(zero))
        if first < 2:
            return DecayFit(math.inf, floor, 0.0, first, float(t[0]), float(t[0]), decay_complete=True)
        t, y = t[:first], y[:first]
    logy = np.log(y**2)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - A @ coef
    rate = -float(coef[0])
    return DecayFit(
        rate=rate,
        floor=floor,
        residual=float(np.sqrt(np.mean(resid**2))),
        n_points=int(t.size),
        t_start=float(t[0]),
        t_end=float(t[-1]),
        decay_complete=bool(np.any(zero)),
        decaying=rate > 1e-12,
    )


def windowed_hs_average(records, t0, T, s, nu, L):
    """(2 nu / T) int_{t0}^{t0+T} ||w||_{H^s}^2 by the trapezoidal rule."""
    if s >= 1:
        raise ValueError(f"s must be < 1, got {s}")
    eps = 1e-9 * max(1.0, T)
    sel = [r for r in records if t0 - eps <= r.t <= t0 + T + eps]
    if len(sel) < 2:
        raise ValueError("window contains fewer than two records")
    t = np.array([r.t for r in sel])
    y = np.array([r.hs(s, L) ** 2 for r in sel])
    return 2.0 * nu / T * float(trapezoid(y, t))


def run_twin(twin, n_steps, callback=None):
    for _ in range(n_steps):
        twin = twin_step(twin)
        if callback is not None:
            callback(twin)
    return twin
