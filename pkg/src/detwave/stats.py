"""
Time-window statistics: intermittency dimension, dissipation wavenumber and
the bounds relating them to the average determining wavenumber.

Per sample the window keeps the band energies ||u_q||_2^2, the band norms
||u_q||_r^2 for each analysis exponent r, the uniform wavenumber and its
index Q, and ||grad u||_2^2. The intermittency sums

    A_r(s) = < sum_{q <= Q(t)} lambda_q^{-1 + 6/r + s(1 - 2/r)} ||u_q||_r^2 >
    B      = < sum_{q <= Q(t)} lambda_q^2 ||u_q||_2^2 >

are evaluated exactly for any s from these arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.integrate import trapezoid

from detwave.littlewood_paley import lam

ANALYSIS_RS = (4.0, 8.0, math.inf)
CONVENTIONS = ("definition", "equality")


def _inv(r):
    return 0.0 if math.isinf(r) else 1.0 / r


def time_average(t, values):
    """Trapezoidal (1/T) int_t^{t+T} g over the sampled window."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 2:
        raise ValueError("time average needs at least two samples")
    T = t[-1] - t[0]
    if not T > 0:
        raise ValueError("time window has zero length")
    return float(trapezoid(v, t) / T)


@dataclass
class WindowStats:
    """Accumulator of per-sample diagnostics over a time window."""

    L: float
    rs: tuple = ANALYSIS_RS
    t: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    band_l2: list = field(default_factory=list)
    band_lr: list = field(default_factory=list)
    lower_ratio: list = field(default_factory=list)

    def add_sample(self, t, decomp, result, grad_sq, lower_ratio=None):
        self.t.append(float(t))
        self.grad_sq.append(float(grad_sq))
        self.lam.append(float(result.lam))
        self.Q.append(result.Q if result.finite else -1)
        self.band_l2.append(np.asarray(decomp.l2_sq(), dtype=float))
        self.band_lr.append(decomp.lr_table(self.rs))
        self.lower_ratio.append(math.nan if lower_ratio is None else float(lower_ratio))

    def __len__(self):
        return len(self.t)

    @property
    def lam0(self):
        return 1.0 / self.L

    @property
    def T(self):
        return self.t[-1] - self.t[0]

    def arrays(self):
        return {
            "t": np.asarray(self.t, float),
            "grad_sq": np.asarray(self.grad_sq, float),
            "lam": np.asarray(self.lam, float),
            "Q": np.asarray(self.Q, int),
            "band_l2": np.asarray(self.band_l2, float),
            "band_lr": np.asarray(self.band_lr, float),
            "lower_ratio": np.asarray(self.lower_ratio, float),
        }

    @classmethod
    def from_arrays(cls, L, rs, t, grad_sq, lam, Q, band_l2, band_lr, lower_ratio=None):
        n = len(t)
        lower_ratio = np.full(n, math.nan) if lower_ratio is None else lower_ratio
        return cls(
            L=float(L),
            rs=tuple(float(r) for r in rs),
            t=[float(x) for x in t],
            grad_sq=[float(x) for x in grad_sq],
            lam=[float(x) for x in lam],
            Q=[int(x) for x in Q],
            band_l2=[np.asarray(x, float) for x in band_l2],
            band_lr=[np.asarray(x, float) for x in band_lr],
            lower_ratio=[float(x) for x in lower_ratio],
        )

    def window(self, t0, T):
        """Samples with t0 <= t <= t0 + T (inclusive, small float slack)."""
        eps = 1e-9 * max(1.0, abs(T))
        idx = [i for i, x in enumerate(self.t) if t0 - eps <= x <= t0 + T + eps]
        a = self.arrays()
        return WindowStats.from_arrays(
            self.L, self.rs, *(a[k][idx] for k in ("t", "grad_sq", "lam", "Q", "band_l2", "band_lr", "lower_ratio"))
        )

    def check_spacing(self):
        t = np.asarray(self.t)
        if t.size < 2 or not t[-1] > t[0]:
            raise ValueError("window needs at least two samples spanning T > 0")
        gap = float(np.max(np.diff(t)))
        if gap > (t[-1] - t[0]) / 20 * (1 + 1e-9):
            raise ValueError(f"sample spacing {gap:g} exceeds T/20 = {(t[-1] - t[0]) / 20:g}")

    def _band_mask(self):
        """Boolean [sample, band] mask of bands q <= Q(t) (all bands when Lambda is infinite)."""
        l2 = np.asarray(self.band_l2)
        nb = l2.shape[1]
        qs = np.arange(-1, nb - 1)
        Q = np.asarray(self.Q)
        Qeff = np.where(Q < 0, nb, Q)
        return qs[None, :] <= Qeff[:, None], qs

    def r_index(self, r):
        for i, x in enumerate(self.rs):
            if x == r or (math.isinf(x) and math.isinf(r)):
                return i
        raise ValueError(f"r={r} not tabulated in this window (have {self.rs})")

    def dyadic_sums(self, s, r):
        """Per-sample sum_{q<=Q} lambda_q^{-1+6/r+s(1-2/r)} ||u_q||_r^2 and sum lambda_q^2 ||u_q||_2^2."""
        mask, qs = self._band_mask()
        lq = lam(qs.astype(float), self.L)
        inv = _inv(r)
        lr = np.asarray(self.band_lr)[:, :, self.r_index(r)]
        a = np.sum(mask * lq ** (-1 + 6 * inv + s * (1 - 2 * inv)) * lr, axis=1)
        b = np.sum(mask * lq**2 * np.asarray(self.band_l2), axis=1)
        return a, b

    def intermittency_g(self, s, r, C_B, convention="definition"):
        """G(s) = ln A_r(s) - ln(C_B^{3-s} lambda_0^{e(s)} B)."""
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {convention!r}")
        a, b = self.dyadic_sums(s, r)
        A = time_average(self.t, a)
        B = time_average(self.t, b)
        scale = s * (1 - 2 * _inv(r)) if convention == "definition" else s
        return math.log(A) - ((3 - s) * math.log(C_B) + scale * math.log(self.lam0) + math.log(B))

    def measure_cb(self):
        """Largest Bernstein ratio over the sampled bands q in [0, Q(t)], r in {2} U rs."""
        mask, qs = self._band_mask()
        l2 = np.asarray(self.band_l2)
        lr = np.asarray(self.band_lr)
        lq = lam(qs.astype(float), self.L)
        best = 1.0
        valid = mask & (l2 > 0) & (qs[None, :] >= 0)
        for j, r in enumerate(self.rs):
            inv = _inv(r)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = lq ** (-1 + 6 * inv) * lr[:, :, j] / (lq**2 * l2)
            if np.any(valid):
                best = max(best, float(np.max(ratio[valid])))
        return best


def estimate_d(window, r, C_B, convention="definition", tol=1e-6):
    """Intermittency dimension: sup{s in [0,3] : G(s) <= 0} by bisection."""
    if r == 2:
        raise ValueError("r = 2 carries no intermittency information (1 - 2/r = 0)")
    a, b = window.dyadic_sums(0.0, r)
    if not np.any(b > 0) and not np.any(a > 0):
        return 3.0
    g = lambda s: window.intermittency_g(s, r, C_B, convention)  # noqa: E731
    if g(0.0) > 0:
        return 0.0
    if g(3.0) <= 0:
        return 3.0
    lo, hi = 0.0, 3.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dissipation_and_kappa(mean_grad_sq, nu, d, lam0):
    """epsilon = nu lambda_0^d <||grad u||^2>,  kappa_d = (epsilon / nu^3)^{1/(d+1)}."""
    if not 0.0 <= d <= 3.0:
        raise ValueError(f"d must lie in [0, 3], got {d}")
    eps = nu * lam0**d * mean_grad_sq
    return {"epsilon": eps, "kappa_d": (eps / nu**3) ** (1.0 / (d + 1.0))}


def wavenumber_lower_ratio(decomp, params, nu, result):
    """Ratio rho = (c nu)^2 Lambda^4 / (16 [RHS]); None when Q = 0 or Lambda is infinite.

    RHS = ||grad u_{<=Q-1}||_inf^2 + sup_{p >= Q} (2^{p-Q})^{2(sigma+3/r)} Lambda^{2(1+3/r)} ||u_p||_r^2.
    """
    if not result.finite or result.Q is None or result.Q < 1:
        return None
    Q, Lam = result.Q, result.lam
    inv = _inv(params.r)
    sup = 0.0
    for p in range(Q, decomp.q_top + 1):
        term = 2.0 ** (2 * (p - Q) * (params.sigma + 3 * inv)) * Lam ** (2 * (1 + 3 * inv))
        sup = max(sup, term * decomp.lr_norm(p, params.r) ** 2)
    rhs = decomp.grad_sup(Q - 1) ** 2 + sup
    lhs = (params.c * nu) ** 2 * Lam**4
    return math.inf if rhs == 0 else lhs / (16.0 * rhs)


def m_d(r, delta, d, kappa_d, lam0):
    """lambda_0 (1 - 2^{-delta/2 - 3/r})^{-4/e} (kappa_hat^{d+1})^{1/e}, e = 1 + d(1 - 2/r)."""
    inv = _inv(r)
    e = 1.0 + d * (1.0 - 2.0 * inv)
    base = 1.0 - 2.0 ** (-delta / 2.0 - 3.0 * inv)
    if base <= 0:
        return math.inf
    khat = kappa_d / lam0
    return lam0 * base ** (-4.0 / e) * khat ** ((d + 1.0) / e)


def optimal_tuple(d, khat):
    """(r_m, delta_m) = (2 khat^{d/3}, d (1 - khat^{-d/3})); None when khat <= 1."""
    if not khat > 1:
        return None
    if not 0.0 <= d <= 3.0:
        raise ValueError(f"d must lie in [0, 3], got {d}")
    x = d * math.log(khat) / 3.0
    r_m = 2.0 * math.exp(x)
    delta_m = -d * math.expm1(-x)
    return r_m, delta_m


def mean_lambda_bound(d, kappa_d, lam0):
    """Right-hand side B of the average wavenumber bound and the branch used."""
    khat = kappa_d / lam0
    if not khat > 1:
        return {"B": lam0, "branch": "trivial"}
    ln = math.log(khat)
    if d <= 1.0 / ln:
        return {"B": kappa_d, "branch": "ii"}
    return {"B": kappa_d * min(ln**2, 1.0 / d**2), "branch": "i"}


def y_function(d, khat):
    """Y = d khat^{-d/3} ln khat (bounded by 3/e)."""
    d = np.asarray(d, dtype=float)
    out = d * khat ** (-d / 3.0) * math.log(khat)
    return out if out.ndim else float(out)


@dataclass
class BoundReport:
    d_per_r: dict
    d: float
    C_B: float
    epsilon: float
    kappa_d: float
    kappa_hat: float
    lam0: float
    mean_lambda: float
    r_m: float | None
    delta_m: float | None
    M_d: float | None
    B: float
    branch: str
    ratio: float
    lower_ratio_worst: float | None
    convention: str

    def to_dict(self):
        return asdict(self)


def bound_report(window, nu, convention="definition", C_B=None):
    """Full chain: C_B -> d per r -> epsilon, kappa_d -> <Lambda> -> M_d, B, ratio."""
    window.check_spacing()
    cb = window.measure_cb() if C_B is None else C_B
    d_per_r = {}
    for r in window.rs:
        if r == 2:
            continue
        d_per_r["inf" if math.isinf(r) else f"{r:g}"] = estimate_d(window, r, cb, convention)
    d = float(np.median(list(d_per_r.values())))
    mean_grad = time_average(window.t, window.grad_sq)
    lam0 = window.lam0
    dk = dissipation_and_kappa(mean_grad, nu, d, lam0)
    kd = dk["kappa_d"]
    khat = kd / lam0
    lam_arr = np.asarray(window.lam)
    mean_lam = math.inf if np.any(np.isinf(lam_arr)) else time_average(window.t, lam_arr)
    opt = optimal_tuple(d, khat)
    if opt is not None:
        r_m, delta_m = opt
        M = m_d(r_m, delta_m, d, kd, lam0)
    else:
        r_m = delta_m = M = None
    bound = mean_lambda_bound(d, kd, lam0)
    ratio = (mean_lam - lam0) / bound["B"]
    lower = np.asarray(window.lower_ratio, float)
    lower = lower[np.isfinite(lower)]
    return BoundReport(
        d_per_r=d_per_r,
        d=d,
        C_B=cb,
        epsilon=dk["epsilon"],
        kappa_d=kd,
        kappa_hat=khat,
        lam0=lam0,
        mean_lambda=mean_lam,
        r_m=r_m,
        delta_m=delta_m,
        M_d=M,
        B=bound["B"],
        branch=bound["branch"],
        ratio=ratio,
        lower_ratio_worst=float(lower.max()) if lower.size else None,
        convention=convention,
    )

