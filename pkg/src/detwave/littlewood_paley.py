"""
Littlewood-Paley dyadic decomposition on the wavevector lattice.

The radial cutoff chi equals 1 on [0, 3/4], 0 on [1, inf) and is a smooth
C-infinity step in between. Band multipliers are

    phi_{-1}(k) = chi(|k|),    phi_q(k) = chi(2^-(q+1) |k|) - chi(2^-q |k|),  q >= 0,

so u_q = Delta_q u is supported on |k| in (3/4 2^q, 2^(q+1)) and
sum_{q <= Q} phi_q = chi(2^-(Q+1) |k|). Band labels are lambda_q = 2^q / L.

Two band ranges are kept apart:

* ``q_max`` - the largest q whose support ball |k| < 2^(q+1) fits inside the
  dealiased cube; wavenumber scans stop here.
* ``q_top`` - the last band that touches the dealiased lattice at all; bands
  in (q_max, q_top] are truncated by the cube but still carry energy and are
  kept so that the bands sum back to the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from detwave.errors import ResolutionError
from detwave.spectral import Grid


def _bump(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def chi(x):
    """Smooth radial cutoff: 1 for x <= 3/4, 0 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = _bump(4.0 * (1.0 - x))
    b = _bump(4.0 * (x - 0.75))
    with np.errstate(invalid="ignore", divide="ignore"):
        mid = a / (a + b)
    out = np.where(x <= 0.75, 1.0, np.where(x >= 1.0, 0.0, mid))
    return out if out.ndim else float(out)


def phi(x):
    """Dyadic annulus profile chi(x/2) - chi(x)."""
    return chi(np.asarray(x, dtype=float) / 2.0) - chi(x)


def lam(q, L):
    return 2.0**q / L


def max_admissible_q(N):
    """Largest q with 2^(q+1) <= N/3 (band ball inside the dealiased cube)."""
    return int(math.floor(math.log2(N / 3.0))) - 1


@dataclass(eq=False)
class DyadicPartition:
    grid: Grid
    q_max: int
    q_top: int
    tables: dict = field(repr=False)

    @property
    def L(self):
        return self.grid.L

    @property
    def bands(self):
        return range(-1, self.q_top + 1)

    def lam(self, q):
        return lam(q, self.grid.L)

    def multiplier(self, q):
        if not -1 <= q <= self.q_top:
            raise ResolutionError(f"band q={q} outside [-1, {self.q_top}]")
        return self.tables[q]

    def lowpass_multiplier(self, Q):
        if Q >= self.q_top:
            return np.ones(self.grid.shape)
        return chi(self.grid.kabs / 2.0 ** (Q + 1))


def build_partition(grid, q_max=None):
    """Tabulate phi_q on the half-spectrum lattice for q = -1 .. q_top."""
    admissible = max_admissible_q(grid.N)
    if q_max is None:
        q_max = admissible
    if q_max > admissible:
        raise ResolutionError(
            f"q_max={q_max} not resolved at N={grid.N}; max admissible q is {admissible}"
        )
    if q_max < 0:
        raise ResolutionError(f"q_max must be >= 0, got {q_max}")
    # smallest q whose lowpass chi(2^-(q+1)|k|) is 1 on the whole dealiased lattice
    kmax = grid.kmax_dealias * math.sqrt(3.0)
    q_top = max(q_max, int(math.ceil(math.log2(kmax / 0.75))) - 1)
    kabs = grid.kabs
    tables = {-1: chi(kabs)}
    for q in range(0, q_top + 1):
        tables[q] = chi(kabs / 2.0 ** (q + 1)) - chi(kabs / 2.0**q)
    return DyadicPartition(grid, q_max, q_top, tables)


def band_project(u, q, partition):
    """u_q = Delta_q u."""
    return u.with_coeffs(u.coeffs * partition.multiplier(q))


def lowpass(u, Q, partition):
    """u_{<=Q} via the telescoped multiplier chi(2^-(Q+1) |k|)."""
    if Q > partition.q_top:
        raise ResolutionError(f"Q={Q} beyond the last band {partition.q_top}")
    return u.with_coeffs(u.coeffs * partition.lowpass_multiplier(Q))


def lr_norm_physical(values, r, L):
    """L^r(T^3) norm of a sampled vector field by cell-volume quadrature."""
    if not (r >= 2):
        raise ValueError(f"r must be >= 2 or inf, got {r}")
    return lr_norm_from_mag2(np.sum(values**2, axis=0), r, L)


def lr_norm_from_mag2(mag2, r, L):
    """L^r norm from the sampled squared magnitude |u(x)|^2."""
    m2 = float(mag2.max())
    if math.isinf(r):
        return math.sqrt(m2)
    cell = (L / mag2.shape[0]) ** 3
    if r == 2:
        return math.sqrt(cell * float(np.sum(mag2)))
    if m2 == 0.0:
        return 0.0
    # scaled by the max to avoid overflow/underflow for large r
    x = mag2 / m2
    p = r / 2.0
    if p.is_integer() and p <= 16:
        y = x
        for _ in range(int(p) - 1):
            y = y * x
    else:
        y = x**p
    return math.sqrt(m2) * (cell * float(np.sum(y))) ** (1.0 / r)


def band_lr_norm(u_q, r):
    """||u_q||_r on the solver grid; r = inf gives the max of |u_q(x)|."""
    if not (r >= 2):
        raise ValueError(f"r must be >= 2 or inf, got {r}")
    return lr_norm_physical(u_q.physical(), r, u_q.grid.L)


def gradient_sup(u):
    """max_x of the Frobenius norm of grad u on the grid."""
    grid = u.grid
    kap = grid.kappa
    grads = np.stack([1j * kap[j] * u.coeffs for j in range(3)])
    du = grid.to_physical(grads)
    return float(np.sqrt(np.sum(du**2, axis=(0, 1))).max())


def grad_lowpass_sup(u, Q, partition):
    """||grad u_{<=Q}||_inf."""
    return gradient_sup(lowpass(u, Q, partition))


def band_l2_sq(u, partition):
    """Array of ||u_q||_2^2 (Parseval) for q = -1 .. q_top."""
    grid = u.grid
    e2 = np.sum(u.coeffs.real**2 + u.coeffs.imag**2, axis=0) * grid.weights
    return np.array(
        [grid.L**3 * float(np.sum(partition.multiplier(q) ** 2 * e2)) for q in partition.bands]
    )


def hs_from_bands(l2_sq, s, L):
    """(sum_q lambda_q^{2s} ||u_q||_2^2)^{1/2} from per-band energies indexed from q=-1."""
    qs = np.arange(-1, len(l2_sq) - 1)
    return math.sqrt(float(np.sum((2.0**qs / L) ** (2 * s) * np.asarray(l2_sq))))


def hs_norm(u, s, partition):
    """Dyadic H^s norm."""
    return hs_from_bands(band_l2_sq(u, partition), s, u.grid.L)


def bernstein_ratio(u_q, q, r, L=None):
    """lambda_q^{-1+6/r} ||u_q||_r^2 / (lambda_q^2 ||u_q||_2^2)."""
    L = u_q.grid.L if L is None else L
    l2 = u_q.norm_sq()
    if l2 == 0.0:
        raise ValueError(f"bernstein ratio undefined for a zero band (q={q})")
    return _bernstein_from_norms(band_lr_norm(u_q, r) ** 2, l2, q, r, L)


def _bernstein_from_norms(lr_sq, l2_sq, q, r, L):
    lq = lam(q, L)
    inv = 0.0 if math.isinf(r) else 1.0 / r
    return lq ** (-1 + 6 * inv) * lr_sq / (lq**2 * l2_sq)


class BandDecomposition:
    """Band fields of one snapshot with cached physical samples and norms.

    The squared pointwise magnitude of each band is computed once and shared
    by every L^r norm; gradient suprema of lowpass fields are cached per Q.
    """

    def __init__(self, u, partition):
        if u.grid != partition.grid:
            raise ValueError("field and partition live on different grids")
        self.u = u
        self.partition = partition
        self._phys = {}
        self._m2 = {}
        self._lr = {}
        self._grad = {}
        self._l2 = None

    @property
    def grid(self):
        return self.u.grid

    @property
    def L(self):
        return self.u.grid.L

    @property
    def q_max(self):
        return self.partition.q_max

    @property
    def q_top(self):
        return self.partition.q_top

    def lam(self, q):
        return lam(q, self.L)

    def band(self, q):
        return band_project(self.u, q, self.partition)

    def physical(self, q):
        if q not in self._phys:
            self._phys[q] = self.band(q).physical()
        return self._phys[q]

    def _mag2(self, q):
        if q not in self._m2:
            if self.l2_sq(q) > 0:
                vals = self._phys[q] if q in self._phys else self.band(q).physical()
                self._m2[q] = np.sum(vals**2, axis=0)
            else:
                self._m2[q] = None
        return self._m2[q]

    def lr_norm(self, q, r):
        key = (q, float(r))
        if key not in self._lr:
            if not (r >= 2):
                raise ValueError(f"r must be >= 2 or inf, got {r}")
            m2 = self._mag2(q)
            self._lr[key] = 0.0 if m2 is None else lr_norm_from_mag2(m2, r, self.L)
        return self._lr[key]

    def l2_sq(self, q=None):
        if self._l2 is None:
            self._l2 = band_l2_sq(self.u, self.partition)
        return self._l2 if q is None else float(self._l2[q + 1])

    def grad_sup(self, Q):
        if Q not in self._grad:
            self._grad[Q] = grad_lowpass_sup(self.u, Q, self.partition)
        return self._grad[Q]

    def hs_norm(self, s):
        return hs_from_bands(self.l2_sq(), s, self.L)

    def lr_table(self, rs):
        """Array [band, r] of ||u_q||_r^2 for q = -1 .. q_top."""
        return np.array([[self.lr_norm(q, r) ** 2 for r in rs] for q in self.partition.bands])


def decompose(u, partition):
    return BandDecomposition(u, partition)
