"""Seeded Monte Carlo engine: risk tables, level histograms and rate fits.

Replicates are split into fixed chunks of ``CHUNK`` indices. Each chunk is
processed independently (its noise comes from per-replicate streams) and
the per-replicate losses are concatenated in chunk order before any
summation, so the output does not depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .comparators import grid_functional_weights, p2_select_batch, p3_threshold_batch, p4_grid
from .config import ExperimentConfig, functional_token
from .functionals import FunctionalKind, FunctionalSpec, build_functional_rep, estimator_weights
from .observation import (
    NoiseModel,
    simulate_regression_batch,
    simulate_white_noise_batch,
    simulate_white_noise_local_batch,
    truth_functional,
)
from .selector import (
    default_weights_corollary2,
    default_weights_corollary3,
    default_weights_sim41,
    select_batch,
)
from .signals import Signal, get_signal
from .wavelets import HAAR, BasisFamily, BasisKind, ModelChain

__all__ = [
    "CHUNK",
    "ReportRow",
    "worker_count",
    "run_benchmark",
    "write_report",
    "read_report",
    "emit_table",
    "level_histogram",
    "write_levels",
    "rate_curve",
    "rate_slope",
    "write_rates",
    "indicator_frequency",
]

CHUNK = 250
REPORT_COLUMNS = ("procedure", "signal", "functional", "basis", "point", "r_hat", "se", "N", "seed")


@dataclass(frozen=True)
class ReportRow:
    procedure: str
    signal: str
    functional: str
    basis: str
    point: str
    r_hat: float
    se: float
    N: int
    seed: int


def worker_count() -> int:
    cores = os.cpu_count() or 1
    env = os.environ.get("LIFSEL_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"LIFSEL_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ValueError("LIFSEL_THREADS must be at least 1")
        return cap
    return cores


def _chunks(N: int) -> list[range]:
    return [range(a, min(a + CHUNK, N)) for a in range(0, N, CHUNK)]


def _map_chunks(fn: Callable[[range], object], N: int, threads: Optional[int]) -> list:
    chunks = _chunks(N)
    threads = worker_count() if threads is None else threads
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _risk(errors: np.ndarray, p: float) -> tuple[float, float]:
    loss = np.abs(errors) ** p
    se = float(loss.std(ddof=1) / np.sqrt(loss.size)) if loss.size > 1 else 0.0
    return float(loss.mean()), se


# -- the per-basis plan -------------------------------------------------------

@dataclass
class _Plan:
    """Everything a chunk needs for one (signal, basis) pair."""

    signal: Signal
    basis: Optional[BasisFamily]
    functionals: tuple[FunctionalSpec, ...]
    truths: np.ndarray
    W: list            # per functional: (M, n) estimator weights, or None
    reps: list
    weights: list
    grid_w: list       # per functional: step-function weights for P3
    g_grids: list      # per functional: g(i/n) for P4
    chain: Optional[ModelChain]


def _make_plan(cfg: ExperimentConfig, signal: Signal, basis: Optional[BasisFamily]) -> _Plan:
    model = NoiseModel.regression(cfg.n, cfg.sigma)
    funcs = cfg.functionals_for(signal.name)
    procs = set(cfg.procedures)
    chain = ModelChain.dyadic(basis, cfg.top_level) if basis is not None else None
    W, reps, weights, grid_w, g_grids = [], [], [], [], []
    for spec in funcs:
        if chain is not None and procs & {"P1", "P2"}:
            rep = build_functional_rep(spec, chain, model, cfg.sigma_scale)
            reps.append(rep)
            W.append(estimator_weights(rep, chain, cfg.n))
            weights.append(default_weights_sim41(chain, cfg.p))
        else:
            reps.append(None)
            W.append(None)
            weights.append(None)
        grid_w.append(grid_functional_weights(spec, cfg.n) if "P3" in procs and chain is not None else None)
        g_grids.append(p4_grid(spec, cfg.n) if "P4" in procs and spec.kind is not FunctionalKind.POINT_EVAL
                       and basis is None else None)
    truths = np.array([truth_functional(signal, spec) for spec in funcs])
    return _Plan(signal, basis, funcs, truths, W, reps, weights, grid_w, g_grids, chain)


def _run_chunk(cfg: ExperimentConfig, plan: _Plan, idx: range) -> dict:
    model = NoiseModel.regression(cfg.n, cfg.sigma)
    Y = simulate_regression_batch(plan.signal, model, cfg.master_seed, idx)
    out: dict = {}
    procs = cfg.procedures
    if plan.basis is None:
        for f, g in enumerate(plan.g_grids):
            if g is not None:
                out[("P4", f)] = Y @ g / cfg.n - plan.truths[f]
        return out
    p2_pos = p2_select_batch(Y, plan.chain, cfg.sigma) if "P2" in procs else None
    recon = p3_threshold_batch(Y, plan.basis, cfg.sigma, cfg.keep_coarse_level) if "P3" in procs else None
    if p2_pos is not None:
        out[("P2", "levels")] = p2_pos
    rows = np.arange(Y.shape[0])
    for f in range(len(plan.functionals)):
        truth = plan.truths[f]
        if plan.W[f] is not None:
            E = Y @ plan.W[f].T
            if "P1" in procs:
                pos, est = select_batch(E, plan.reps[f], plan.weights[f], cfg.n)
                out[("P1", f)] = est - truth
                out[("P1", f, "levels")] = pos
            if p2_pos is not None:
                out[("P2", f)] = E[rows, p2_pos] - truth
        if recon is not None:
            out[("P3", f)] = recon @ plan.grid_w[f] - truth
    return out


def _collect(parts: list[dict]) -> dict:
    keys = parts[0].keys()
    return {k: np.concatenate([p[k] for p in parts]) for k in keys}


def _simulate(cfg: ExperimentConfig, signal: Signal, basis: Optional[BasisFamily], threads) -> tuple[_Plan, dict]:
    plan = _make_plan(cfg, signal, basis)
    parts = _map_chunks(lambda idx: _run_chunk(cfg, plan, idx), cfg.replicates, threads)
    return plan, _collect(parts)


def _bases_to_run(cfg: ExperimentConfig) -> list[Optional[BasisFamily]]:
    out: list[Optional[BasisFamily]] = []
    if set(cfg.procedures) & {"P1", "P2", "P3"}:
        out.extend(cfg.bases)
    if "P4" in cfg.procedures:
        out.append(None)
    return out


def run_benchmark(cfg: ExperimentConfig, threads: Optional[int] = None) -> list[ReportRow]:
    """Risk estimates for every enabled (procedure, signal, functional, basis)."""
    rows: list[ReportRow] = []
    for name in cfg.signals:
        signal = cfg.signal(name)
        for basis in _bases_to_run(cfg):
            plan, res = _simulate(cfg, signal, basis, threads)
            label = basis.label if basis is not None else "none"
            for f, spec in enumerate(plan.functionals):
                for proc in cfg.procedures:
                    if (proc, f) not in res:
                        continue
                    r_hat, se = _risk(res[(proc, f)], cfg.p)
                    rows.append(ReportRow(proc, name, functional_token(spec), label, spec.label,
                                          r_hat, se, cfg.replicates, cfg.master_seed))
    return rows


# -- report I/O ---------------------------------------------------------------

def write_report(rows: Iterable[ReportRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r.procedure, r.signal, r.functional, r.basis, r.point,
                        repr(r.r_hat), repr(r.se), r.N, r.seed])
    return path


def read_report(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(REPORT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"report is missing columns {sorted(missing)}")
        return [
            ReportRow(d["procedure"], d["signal"], d["functional"], d["basis"], d["point"],
                      float(d["r_hat"]), float(d["se"]), int(d["N"]), int(d["seed"]))
            for d in reader
        ]


def _cell(r_hat: float) -> str:
    v = 100.0 * r_hat
    if 0.0 < v < 0.05:
        return f"{v:.2e}"
    return f"{v:.1f}"


def emit_table(rows: Sequence[ReportRow], path=None) -> str:
    """Markdown tables of ``100 * r_hat``.

    Point functionals: one block per signal, one row per basis, a column per
    (point, procedure). Integral functionals: one block per functional, one
    row per signal, a column per procedure.
    """
    if not rows:
        raise ValueError("empty report")
    lines: list[str] = []
    uniq = lambda seq: list(dict.fromkeys(seq))  # noqa: E731
    procs = [p for p in ("P1", "P2", "P3", "P4") if any(r.procedure == p for r in rows)]
    value = {(r.procedure, r.signal, r.functional, r.basis, r.point): r.r_hat for r in rows}

    point_rows = [r for r in rows if r.functional == "point"]
    for sig in uniq(r.signal for r in point_rows):
        mine = [r for r in point_rows if r.signal == sig]
        pts = uniq(r.point for r in mine)
        pprocs = [p for p in procs if any(r.procedure == p for r in mine)]
        lines.append(f"### {sig}")
        lines.append("")
        lines.append("| basis | " + " | ".join(f"{p} @ {x}" for x in pts for p in pprocs) + " |")
        lines.append("|---" * (1 + len(pts) * len(pprocs)) + "|")
        for b in uniq(r.basis for r in mine):
            cells = [value.get((p, sig, "point", b, x)) for x in pts for p in pprocs]
            lines.append(f"| {b} | " + " | ".join("" if c is None else _cell(c) for c in cells) + " |")
        lines.append("")

    integ = [r for r in rows if r.functional != "point"]
    for fn, pt in uniq((r.functional, r.point) for r in integ):
        mine = [r for r in integ if r.functional == fn and r.point == pt]
        bases = [b for b in uniq(r.basis for r in mine) if b != "none"]
        pprocs = [p for p in procs if any(r.procedure == p for r in mine)]
        lines.append(f"### {fn} {pt}" + (f" ({', '.join(bases)})" if bases else ""))
        lines.append("")
        lines.append("| signal | " + " | ".join(pprocs) + " |")
        lines.append("|---" * (1 + len(pprocs)) + "|")
        for sig in uniq(r.signal for r in mine):
            cells = []
            for p in pprocs:
                hit = [r.r_hat for r in mine if r.signal == sig and r.procedure == p]
                cells.append(_cell(hit[0]) if hit else "")
            lines.append(f"| {sig} | " + " | ".join(cells) + " |")
        lines.append("")
    text = "\n".join(lines)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


# -- histograms ---------------------------------------------------------------

def level_histogram(cfg: ExperimentConfig, threads: Optional[int] = None) -> dict:
    """Counts of selected levels.

    Returns ``{(procedure, basis label, signal, point): {level: count}}``;
    P2 selects one level per replicate for the whole curve, so its point is
    ``"all"``.
    """
    procs = [p for p in cfg.procedures if p in ("P1", "P2")]
    if not procs:
        raise ValueError("level histograms need P1 or P2 among the procedures")
    sub = replace(cfg, procedures=tuple(procs))
    out: dict = {}
    for name in sub.signals:
        signal = sub.signal(name)
        for basis in sub.bases:
            plan, res = _simulate(sub, signal, basis, threads)
            levels = plan.chain.levels
            if "P1" in procs:
                for f, spec in enumerate(plan.functionals):
                    pos = res[("P1", f, "levels")]
                    out[("P1", basis.label, name, spec.label)] = _count(pos, levels)
            if "P2" in procs:
                out[("P2", basis.label, name, "all")] = _count(res[("P2", "levels")], levels)
    return out


def _count(pos: np.ndarray, levels: Sequence[int]) -> dict:
    counts = np.bincount(pos, minlength=len(levels))
    return {int(m): int(c) for m, c in zip(levels, counts)}


def write_levels(hist: dict, out_dir) -> list[Path]:
    """``levels.csv`` for P1 and ``levels_p2.csv`` for P2 (per-basis suffix
    when more than one basis is present)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bases = list(dict.fromkeys(k[1] for k in hist))
    written = []
    for proc, stem in (("P1", "levels"), ("P2", "levels_p2")):
        for b in bases:
            keys = [k for k in hist if k[0] == proc and k[1] == b]
            if not keys:
                continue
            name = f"{stem}.csv" if len(bases) == 1 else f"{stem}_{b}.csv"
            path = out_dir / name
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["signal", "point", "level", "count"])
                for k in keys:
                    for level, count in hist[k].items():
                        w.writerow([k[2], k[3], level, count])
            written.append(path)
    return written


# -- rates --------------------------------------------------------------------

def _rate_point_1d(signal: Signal, spec: FunctionalSpec, n: int, sigma: float,
                   N: int, seed: int, threads) -> tuple[float, float]:
    model = NoiseModel.regression(n, sigma)
    chain = ModelChain.dyadic(HAAR, n.bit_length() - 1)
    rep = build_functional_rep(spec, chain, model)
    W = estimator_weights(rep, chain, n)
    weights = default_weights_sim41(chain)
    truth = truth_functional(signal, spec)

    def run(idx):
        Y = simulate_regression_batch(signal, model, seed, idx)
        return select_batch(Y @ W.T, rep, weights, n)[1] - truth

    return _risk(np.concatenate(_map_chunks(run, N, threads)), 1.0)


def _rate_point_shells(signal: Signal, spec: FunctionalSpec, n: int, sigma: float,
                       N: int, seed: int, threads) -> tuple[float, float]:
    d = signal.dim
    top = max(1, int(np.floor(np.log2(n) / d)))
    model = NoiseModel.white_noise(n, sigma)
    chain = ModelChain.dyadic(BasisFamily(BasisKind.HAAR_MULTID, dimension=d), top)
    rep = build_functional_rep(spec, chain, model)
    weights = default_weights_corollary3(chain)
    truth = truth_functional(signal, spec)
    scale = np.array([2.0 ** (m * d) for m in chain.levels])

    def run(idx):
        data = simulate_white_noise_local_batch(signal, model, spec.x0, top, seed, idx)
        tail = np.cumsum(data[:, ::-1], axis=1)[:, ::-1]  # Y(1_{C_l}) for l = 0..top
        E = tail[:, list(chain.levels)] * scale[None, :]
        return select_batch(E, rep, weights, n)[1] - truth

    return _risk(np.concatenate(_map_chunks(run, N, threads)), 1.0)


def rate_curve(signal, spec: FunctionalSpec, n_list: Sequence[int], sigma: float = 0.2,
               replicates: int = 2000, seed: int = 0, threads: Optional[int] = None) -> list[tuple[int, float, float]]:
    """``(n, r_hat, se)`` for pointwise Haar selection at each sample size.

    One-dimensional signals use the regression model; higher dimensions use
    white noise observed on the nested cells around the point.
    """
    signal = get_signal(signal) if isinstance(signal, str) else signal
    fn = _rate_point_1d if signal.dim == 1 else _rate_point_shells
    return [(int(n), *fn(signal, spec, int(n), sigma, replicates, seed, threads)) for n in n_list]


def rate_slope(signal, spec: FunctionalSpec, n_list: Sequence[int], sigma: float = 0.2,
               replicates: int = 2000, seed: int = 0, threads: Optional[int] = None):
    """Fit ``ln r_hat = a + b ln(ln n / n)``; returns ``(b, se_b, curve)``."""
    if len(n_list) < 3:
        raise ValueError("a rate fit needs at least three sample sizes")
    curve = rate_curve(signal, spec, n_list, sigma, replicates, seed, threads)
    n = np.array([c[0] for c in curve], dtype=float)
    r = np.array([c[1] for c in curve])
    if np.any(r <= 0):
        raise ValueError("zero risk at some sample size; the log fit is undefined")
    x = np.log(np.log(n) / n)
    y = np.log(r)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - y.mean() - slope * xc
    se = float(np.sqrt(resid @ resid / (len(x) - 2) / (xc @ xc)))
    return slope, se, curve


def write_rates(curve, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "r_hat", "se"])
        for n, r, se in curve:
            w.writerow([n, repr(r), repr(se)])
    return path


# -- indicator regime -----------------------------------------------------------

def indicator_frequency(signal, H: float, n: int, sigma: float = 0.2, replicates: int = 2000,
                        seed: int = 0, p: float = 1.0, threads: Optional[int] = None) -> float:
    """Fraction of replicates in which the indicator model of ``[0, H]`` is
    selected for the mean of s over that interval (white-noise model)."""
    signal = get_signal(signal) if isinstance(signal, str) else signal
    chain = ModelChain.with_indicator((0.0, H))
    model = NoiseModel.white_noise(n, sigma)
    spec = FunctionalSpec.interval_mean(0.0, H)
    rep = build_functional_rep(spec, chain, model)
    weights = default_weights_corollary2(chain, p)
    top = max(chain.levels)
    cuts = np.union1d(np.arange(2**top + 1) / 2**top, [0.0, H])
    # weights turning atom observations into each model's estimate
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    A = np.zeros((len(chain.models), len(mids)))
    for pos, m in enumerate(chain.models):
        if chain.is_extra(m):
            A[pos] = (mids <= H) * rep.values[m][0] / np.sqrt(H)
        else:
            k = np.minimum((mids * 2**m).astype(int), 2**m - 1)
            A[pos] = rep.values[m][k] * 2 ** (m / 2)

    def run(idx):
        _, data = simulate_white_noise_batch(signal, model, cuts[1:-1], seed, idx)
        return select_batch(data @ A.T, rep, weights, n)[0]

    pos = np.concatenate(_map_chunks(run, replicates, threads))
    return float(np.mean(pos == len(chain.models) - 1))
