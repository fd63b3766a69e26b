"""
Determining wavenumber of a snapshot.

For a tuple (r, delta) with sigma = (delta - 1)/2 the wavenumber is the
smallest lambda_q = 2^q / L, q >= 0, at which both

    (1)  (2^{p-q})^{3/r + sigma} lambda_q^{-1 + 3/r} ||u_p||_r < c nu   for all p > q
    (2)  lambda_q^{-2} ||grad u_{<=q}||_inf < c nu

hold, with c = c_{r,delta} = 1/2 (1 - 2^{s - sigma - 3/r})^2 and
s = min(-1/2 + delta/4, 0). If no resolved q qualifies the result is the
infinite sentinel. The uniform wavenumber is the minimum over a tuple grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from detwave.errors import AdmissibilityError

INF = math.inf


def _inv(r):
    return 0.0 if math.isinf(r) else 1.0 / r


@dataclass(frozen=True)
class TupleParams:
    r: float
    delta: float
    sigma: float
    s: float
    c: float

    @property
    def key(self):
        return (self.r, self.delta)


def derive_params(r, delta):
    """Derived constants sigma, s and c_{r,delta} for an admissible tuple."""
    r = float(r)
    delta = float(delta)
    if math.isnan(r) or r < 2:
        raise AdmissibilityError(f"r must lie in [2, inf], got {r}")
    if not 0.0 <= delta <= 3.0:
        raise AdmissibilityError(f"delta must lie in [0, 3], got {delta}")
    if math.isinf(r) and delta == 0.0:
        raise AdmissibilityError("(r, delta) = (inf, 0) is excluded")
    sigma = 0.5 * (delta - 1.0)
    s = min(-0.5 + delta / 4.0, 0.0)
    # s - sigma in closed form and 1 - 2^x via expm1 keep c > 0 arbitrarily
    # close to (inf, 0), where s and sigma each round to -1/2
    s_minus_sigma = -delta / 4.0 if delta <= 2.0 else 0.5 * (1.0 - delta)
    c = 0.5 * math.expm1((s_minus_sigma - 3.0 * _inv(r)) * math.log(2.0)) ** 2
    if not (-0.5 <= sigma <= 1.0 and -1.0 - sigma <= s <= sigma):
        raise AdmissibilityError(f"inconsistent exponents for ({r}, {delta})")
    if not c > 0:
        raise AdmissibilityError(f"c_(r,delta) vanishes at ({r}, {delta})")
    return TupleParams(r, delta, sigma, s, c)


DEFAULT_DELTAS = tuple(0.25 * i for i in range(13))
DEFAULT_RS = (2.0, 4.0, 8.0, 16.0, INF)


@dataclass(frozen=True)
class TupleGrid:
    params: tuple

    def __post_init__(self):
        if not self.params:
            raise AdmissibilityError("tuple grid is empty")

    @classmethod
    def from_lists(cls, rs=DEFAULT_RS, deltas=DEFAULT_DELTAS):
        out = []
        for d in deltas:
            for r in rs:
                if math.isinf(r) and d == 0:
                    continue
                out.append(derive_params(r, d))
        return cls(tuple(out))

    @classmethod
    def default(cls):
        return cls.from_lists()

    @property
    def rs(self):
        return sorted({p.r for p in self.params})

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)


@dataclass
class WavenumberResult:
    lam: float
    Q: int | None
    params: TupleParams | None
    margins_one: list = field(default_factory=list)
    margins_two: list = field(default_factory=list)

    @property
    def finite(self):
        return not math.isinf(self.lam)

    @property
    def s(self):
        return None if self.params is None else self.params.s


def condition_one_lhs(decomp, q, params):
    """max over q < p <= q_top of (2^{p-q})^{3/r+sigma} lambda_q^{-1+3/r} ||u_p||_r."""
    inv = _inv(params.r)
    lq = decomp.lam(q)
    best = 0.0
    for p in range(q + 1, decomp.q_top + 1):
        term = 2.0 ** ((p - q) * (3 * inv + params.sigma)) * lq ** (-1 + 3 * inv)
        best = max(best, term * decomp.lr_norm(p, params.r))
    return best


def condition_one_margin(decomp, q, params, nu):
    """c nu minus the condition-one supremum; positive iff the condition holds."""
    return params.c * nu - condition_one_lhs(decomp, q, params)


def condition_two_margin(decomp, q, params, nu):
    return params.c * nu - decomp.grad_sup(q) / decomp.lam(q) ** 2


def lambda_for_tuple(decomp, params, nu, q_stop=None):
    """Scan q = 0 .. q_max and return the first q where both margins are positive.

    The scan stops at the first success, so the margin lists hold q = 0 .. Q
    (all resolved q when the result is infinite). ``q_stop`` truncates the
    scan early; a truncated scan without success returns the infinite sentinel.
    """
    last = decomp.q_max if q_stop is None else min(q_stop, decomp.q_max)
    m1, m2 = [], []
    for q in range(last + 1):
        m1.append(condition_one_margin(decomp, q, params, nu))
        m2.append(condition_two_margin(decomp, q, params, nu))
        if m1[q] > 0 and m2[q] > 0:
            return WavenumberResult(decomp.lam(q), q, params, m1, m2)
    return WavenumberResult(INF, None, params, m1, m2)


def _better(res, best):
    return (res.lam, res.params.delta, res.params.r) < (best.lam, best.params.delta, best.params.r)


def uniform_lambda(decomp, grid, nu):
    """Minimum over the tuple grid; ties go to smaller delta, then smaller r.

    Once some tuple attains Q, the remaining tuples are only scanned up to Q,
    since a larger index can no longer win.
    """
    best = None
    for params in grid:
        q_stop = None if best is None or not best.finite else best.Q
        res = lambda_for_tuple(decomp, params, nu, q_stop)
        if best is None or _better(res, best):
            best = res
    return best


def per_tuple(decomp, grid, nu):
    return [lambda_for_tuple(decomp, p, nu) for p in grid]


def certificate_holds(result):
    """Both margins >= 0 at Q and a failure at Q - 1 (when Q >= 1)."""
    if not result.finite:
        return all(min(a, b) <= 0 for a, b in zip(result.margins_one, result.margins_two))
    Q = result.Q
    ok = result.margins_one[Q] >= 0 and result.margins_two[Q] >= 0
    if Q >= 1:
        ok = ok and min(result.margins_one[Q - 1], result.margins_two[Q - 1]) <= 0
    return ok


def margin_table(result):
    return np.array([result.margins_one, result.margins_two])
