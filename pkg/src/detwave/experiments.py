"""Orchestration behind the CLI subcommands."""

from __future__ import annotations

import logging
import math
import time
from functools import partial
from pathlib import Path

from detwave import io
from detwave.littlewood_paley import build_partition, decompose
from detwave.spectral import Grid, SolverState, default_spectrum, diagnostics, random_field, step
from detwave.stats import ANALYSIS_RS, WindowStats, bound_report, wavenumber_lower_ratio
from detwave.sync import fit_decay, init_twin, sync_residual, twin_step
from detwave.wavenumber import TupleGrid, certificate_holds, uniform_lambda

logger = logging.getLogger(__name__)


def initial_state(cfg, seed):
    grid = Grid(cfg.N, cfg.L)
    spectrum = partial(default_spectrum, k_peak=cfg.init.k_peak)
    u0 = random_field(grid, seed, rms=cfg.init.rms, q_range=cfg.init.q_range, spectrum=spectrum)
    return SolverState(u0, nu=cfg.nu, dt=cfg.dt, forcing=cfg.forcing_spec())


def _outdir(cfg):
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def analyze_field(u, nu, tuples=None, partition=None):
    """Uniform wavenumber, per-band norms and condition margins of one field."""
    tuples = TupleGrid.default() if tuples is None else tuples
    partition = build_partition(u.grid) if partition is None else partition
    decomp = decompose(u, partition)
    res = uniform_lambda(decomp, tuples, nu)
    p = res.params
    bands = list(partition.bands)
    lower_ratio = wavenumber_lower_ratio(decomp, p, nu, res) if res.finite else None
    return {
        "Lambda": res.lam,
        "Q": res.Q,
        "finite": res.finite,
        "attaining": {"r": p.r, "delta": p.delta, "sigma": p.sigma, "s": p.s, "c": p.c} if res.finite else None,
        "certificate": certificate_holds(res),
        "margins": {"condition_one": res.margins_one, "condition_two": res.margins_two},
        "bands": {
            "q": bands,
            "lambda_q": [partition.lam(q) for q in bands],
            "L2_sq": decomp.l2_sq().tolist(),
            "Lr": {("inf" if math.isinf(r) else f"{r:g}"): [decomp.lr_norm(q, r) for q in bands] for r in (2.0,) + ANALYSIS_RS},
        },
        "grad_sq": diagnostics(u)["grad_sq"],
        "lower_ratio": lower_ratio,
        "q_max": partition.q_max,
        "nu": nu,
        "L": u.grid.L,
        "N": u.grid.N,
    }


def run_simulation(cfg):
    """Single DNS with per-sample wavenumber diagnostics.

    Writes the series CSV, its band sidecar, optional snapshots and returns a
    summary dict.
    """
    out = _outdir(cfg)
    state = initial_state(cfg, cfg.seed)
    partition = build_partition(state.grid)
    tuples = cfg.tuple_grid()
    window = WindowStats(L=cfg.L)
    series_path = out / cfg.output.series
    n_inf = 0
    t0 = time.perf_counter()

    def sample(state, writer):
        nonlocal n_inf
        decomp = decompose(state.u, partition)
        res = uniform_lambda(decomp, tuples, cfg.nu)
        grad_sq = diagnostics(state.u)["grad_sq"]
        lower_ratio = wavenumber_lower_ratio(decomp, res.params, cfg.nu, res)
        if not res.finite:
            n_inf += 1
        window.add_sample(state.t, decomp, res, grad_sq, lower_ratio)
        writer.append(io.wavenumber_row(state.t, res, grad_sq))

    snaps = []

    def snapshot(state, i):
        every = cfg.output.snapshot_every
        if every and i % every == 0:
            path = out / f"{cfg.output.snapshot_prefix}_{i:06d}.dwns"
            io.write_snapshot(state.u, path, cfg.nu, state.t)
            snaps.append(str(path))

    with io.SeriesWriter(series_path) as writer:
        sample(state, writer)
        snapshot(state, 0)
        for i in range(1, cfg.n_steps + 1):
            state = step(state)
            if i % cfg.sample_stride == 0:
                sample(state, writer)
            snapshot(state, i)
    io.write_bands(io.sidecar_path(series_path), window, cfg.nu, cfg.N)
    return {
        "series": str(series_path),
        "bands": str(io.sidecar_path(series_path)),
        "snapshots": snaps,
        "samples": len(window),
        "infinite_samples": n_inf,
        "t_end": state.t,
        "runtime_s": time.perf_counter() - t0,
        "final_state": state,
        "window": window,
    }


def run_sync(cfg, records_callback=None):
    """Twin experiment: series with w-norms plus decay fits."""
    out = _outdir(cfg)
    u = initial_state(cfg, cfg.seed)
    v = initial_state(cfg, cfg.seed_v)
    partition = build_partition(u.grid)
    twin = init_twin(u, v, partition, cfg.tuple_grid(), enforce=cfg.enforce, cap_q=cfg.cap_q)
    series_path = out / cfg.output.series
    worst_residual = 0.0
    t0 = time.perf_counter()
    with io.SeriesWriter(series_path) as writer:
        writer.append(io.sync_row(twin.records[-1], diagnostics(twin.u.u)["grad_sq"]))
        for _ in range(cfg.n_steps):
            twin = twin_step(twin)
            if cfg.enforce:
                worst_residual = max(worst_residual, sync_residual(twin))
            writer.append(io.sync_row(twin.records[-1], diagnostics(twin.u.u)["grad_sq"]))
            if records_callback is not None:
                records_callback(twin)
    runtime = time.perf_counter() - t0
    recs = twin.records
    summary = sync_summary(recs, cfg.nu, cfg.L)
    summary.update(
        enforce=cfg.enforce,
        runtime_s=runtime,
        max_sync_residual=worst_residual if cfg.enforce else None,
        Q_history=[r.Q for r in recs],
        unverified_records=sum(not r.verified for r in recs),
        series=str(series_path),
    )
    return summary, twin


def sync_summary(records, nu, L):
    """Decay fits for the attaining-tuple index and the fixed H^{-5/4} index."""
    s_vals = sorted(r.s for r in records)
    s_med = s_vals[len(s_vals) // 2]
    fits = {}
    for name, s in (("attaining", None), ("median_s", s_med), ("Hm54", -1.25)):
        try:
            fits[name] = fit_decay(records, s, nu, L).to_dict()
        except ValueError as e:
            fits[name] = {"error": str(e)}
    first, last = records[0], records[-1]
    return {
        "nu": nu,
        "kappa0": 2 * math.pi / L,
        "floor": nu * (2 * math.pi / L) ** 2,
        "s_median": s_med,
        "fits": fits,
        "w_Hm54_initial": first.w_hm54,
        "w_Hm54_final": last.w_hm54,
        "w_Hm54_drop": last.w_hm54 / first.w_hm54 if first.w_hm54 > 0 else 0.0,
        "w_Hs_initial": first.w_hs,
        "w_Hs_final": last.w_hs,
        "t_end": last.t,
        "n_records": len(records),
    }


def analyze_snapshot(path, nu=None, tuples=None):
    u, header = io.read_snapshot(path)
    nu = header.nu if nu is None else nu
    doc = analyze_field(u, nu, tuples)
    doc["t"] = header.t
    doc["snapshot"] = str(path)
    return doc


def report_series(series_path, T=None, t0=None, convention="definition"):
    """Bound report over the window [t0, t0 + T] of a recorded series.

    Defaults: the window ends at the last sample and spans T (or the full run).
    """
    window, meta = io.read_bands(io.sidecar_path(series_path))
    if len(window) < 2:
        raise ValueError("series has fewer than two samples")
    if T is not None:
        start = window.t[-1] - T if t0 is None else t0
        window = window.window(start, T)
    rep = bound_report(window, meta["nu"], convention)
    doc = rep.to_dict()
    doc.update(window_start=window.t[0], window_T=window.T, n_samples=len(window), nu=meta["nu"], N=meta["N"])
    return doc
