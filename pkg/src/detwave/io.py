"""
Persistence: DWNS binary snapshots, CSV time series, band sidecars, JSON reports.

Snapshot layout (little-endian)::

    magic  b"DWNS"   4 bytes
    version u32      (= 1)
    N       u32
    L       f64
    nu      f64
    t       f64
    layout  u8       (0 = physical-space samples)
    payload f64[3, N, N, N]  component-major, x slowest, z fastest
"""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from detwave.errors import SnapshotError
from detwave.spectral import Grid, SpectralField, dealias, leray_project
from detwave.stats import WindowStats

logger = logging.getLogger(__name__)

MAGIC = b"DWNS"
VERSION = 1
LAYOUT_PHYSICAL = 0
_HEADER = struct.Struct("<4sIIdddB")
HEADER_SIZE = _HEADER.size
DIV_TOL = 1e-6

SERIES_COLUMNS = (
    "t", "Lambda", "Q", "r_star", "delta_star", "s_star",
    "grad_sq", "w_Hm54", "w_Hs", "w_L2", "w_H1",
)
REPORT_SCHEMA = 1


@dataclass(frozen=True)
class SnapshotHeader:
    N: int
    L: float
    nu: float
    t: float
    version: int = VERSION
    layout: int = LAYOUT_PHYSICAL

    @property
    def payload_bytes(self):
        return 3 * self.N**3 * 8

    def pack(self):
        return _HEADER.pack(MAGIC, self.version, self.N, self.L, self.nu, self.t, self.layout)


def write_snapshot(field, path, nu, t=0.0):
    """Write the physical samples of ``field`` to ``path``."""
    header = SnapshotHeader(field.grid.N, float(field.grid.L), float(nu), float(t))
    data = np.ascontiguousarray(field.physical(), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.pack())
        fh.write(data.tobytes())
    return header


def read_header(raw):
    if len(raw) < HEADER_SIZE:
        raise SnapshotError(f"file too short for a header ({len(raw)} bytes)")
    magic, version, N, L, nu, t, layout = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if layout != LAYOUT_PHYSICAL:
        raise SnapshotError(f"unknown layout tag {layout}")
    return SnapshotHeader(N, L, nu, t, version, layout)


def read_snapshot(path):
    """Return ``(field, header)``.

    The field is rebuilt in spectral space, dealiased and Leray-projected; a
    divergence above 1e-6 (relative) is reported as a warning before projection.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise SnapshotError(f"cannot read {path}: {e}") from e
    header = read_header(raw)
    payload = raw[HEADER_SIZE:]
    if len(payload) != header.payload_bytes:
        raise SnapshotError(
            f"payload is {len(payload)} bytes, expected {header.payload_bytes} for N={header.N}"
        )
    try:
        grid = Grid(header.N, header.L)
    except ValueError as e:
        raise SnapshotError(str(e)) from e
    values = np.frombuffer(payload, dtype="<f8").reshape((3,) + grid.phys_shape).astype(float)
    raw_field = SpectralField.from_physical(grid, values)
    div = raw_field.max_divergence()
    if div > DIV_TOL:
        logger.warning("snapshot %s has relative divergence %.3g; projecting", path, div)
    return leray_project(dealias(raw_field)), header


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


class SeriesWriter:
    """Append-only CSV writer with the fixed 11-column header."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(SERIES_COLUMNS)

    def append(self, row: dict):
        unknown = set(row) - set(SERIES_COLUMNS)
        if unknown:
            raise KeyError(f"unknown series columns {sorted(unknown)}")
        self._w.writerow([_fmt(row.get(c)) for c in SERIES_COLUMNS])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def wavenumber_row(t, result, grad_sq, Q=None):
    """Series row for a single-run sample; w columns stay empty."""
    p = result.params
    finite = result.finite
    return {
        "t": t,
        "Lambda": result.lam,
        "Q": result.Q if Q is None else Q,
        "r_star": p.r if finite else None,
        "delta_star": p.delta if finite else None,
        "s_star": p.s if finite else None,
        "grad_sq": grad_sq,
    }


def sync_row(rec, grad_sq):
    return {
        "t": rec.t,
        "Lambda": max(rec.lam_u, rec.lam_v),
        "Q": rec.Q,
        "r_star": rec.r,
        "delta_star": rec.delta,
        "s_star": rec.s,
        "grad_sq": grad_sq,
        "w_Hm54": rec.w_hm54,
        "w_Hs": rec.w_hs,
        "w_L2": rec.w_l2,
        "w_H1": rec.w_h1,
    }


def _parse(col, text):
    if text == "":
        return None
    if col == "Q":
        return int(text)
    return float(text)


def read_series(path):
    """Parse a series CSV into a list of dicts (empty cells become None)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SERIES_COLUMNS:
            raise ValueError(f"unexpected series header {header}")
        return [{c: _parse(c, v) for c, v in zip(header, row)} for row in reader]


def sidecar_path(series_path):
    p = Path(series_path)
    return p.with_name(p.stem + ".bands.npz")


def write_bands(path, window: WindowStats, nu, N):
    a = window.arrays()
    np.savez(
        path,
        nu=float(nu),
        L=float(window.L),
        N=int(N),
        rs=np.asarray(window.rs, float),
        **a,
    )


def read_bands(path):
    """Return ``(window, meta)`` from a band sidecar."""
    try:
        z = np.load(path)
    except OSError as e:
        raise SnapshotError(f"cannot read band sidecar {path}: {e}") from e
    with z:
        window = WindowStats.from_arrays(
            float(z["L"]), tuple(z["rs"]), z["t"], z["grad_sq"], z["lam"], z["Q"],
            z["band_l2"], z["band_lr"], z["lower_ratio"],
        )
        meta = {"nu": float(z["nu"]), "L": float(z["L"]), "N": int(z["N"])}
    return window, meta


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    return x


def write_json(path, payload: dict):
    doc = {"schema": REPORT_SCHEMA, **_jsonable(payload)}
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")
    return doc
