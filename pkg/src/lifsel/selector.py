"""Penalized pairwise-comparison selection of a projection level."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .functionals import FunctionalRep, estimate_T
from .observation import ObservationRecord
from .wavelets import ModelChain

__all__ = [
    "Provenance",
    "WeightSchedule",
    "SelectionResult",
    "penalty",
    "deviation_bound",
    "crit_hat",
    "select_m_hat",
    "default_weights_sim41",
    "default_weights_corollary1",
    "default_weights_corollary2",
    "default_weights_corollary3",
    "penalty_tables",
    "select",
    "select_from_estimates",
    "select_batch",
    "select_multibasis",
    "results_to_csv",
]

_LN2 = np.log(2.0)


class Provenance(str, enum.Enum):
    SIMULATION41 = "Simulation41"
    COROLLARY1 = "Corollary1"
    COROLLARY2 = "Corollary2"
    COROLLARY3 = "Corollary3"
    USER_SUPPLIED = "UserSupplied"


@dataclass(frozen=True)
class WeightSchedule:
    """Weights x_m (per model position) and x_{j,m} (``x_jm[a, b]`` for a >= b)."""

    x_m: np.ndarray
    x_jm: np.ndarray
    provenance: Provenance = Provenance.USER_SUPPLIED
    params: tuple = ()

    def __post_init__(self):
        x_m = np.array(self.x_m, dtype=float)
        x_jm = np.array(self.x_jm, dtype=float)
        M = x_m.size
        if x_m.ndim != 1 or x_jm.shape != (M, M):
            raise ValueError(f"x_jm must be {M}x{M} to match x_m")
        np.fill_diagonal(x_jm, 0.0)
        lower = np.tril(x_jm)
        if np.any(x_m < 0) or np.any(lower < 0) or not np.all(np.isfinite(lower)) or not np.all(np.isfinite(x_m)):
            raise ValueError("weights must be finite and nonnegative")
        # only j >= m is meaningful; mirror for convenience
        x_jm = lower + np.tril(lower, -1).T
        x_m.setflags(write=False)
        x_jm.setflags(write=False)
        object.__setattr__(self, "x_m", x_m)
        object.__setattr__(self, "x_jm", x_jm)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self) -> int:
        return self.x_m.size


def _check_nonneg(**kw) -> None:
    for name, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{name} must be nonnegative, got {v}")


def penalty(x_m: float, sigma_m: float) -> float:
    _check_nonneg(x_m=x_m, sigma_m=sigma_m)
    return float(np.sqrt(2.0 * x_m) * sigma_m)


def deviation_bound(x_jm: float, sigma_jm: float) -> float:
    _check_nonneg(x_jm=x_jm, sigma_jm=sigma_jm)
    return float(np.sqrt(2.0 * x_jm) * sigma_jm)


def _pair_table(models: Sequence[int], fn) -> np.ndarray:
    M = len(models)
    out = np.zeros((M, M))
    for a in range(M):
        for b in range(a):
            out[a, b] = out[b, a] = fn(models[a], models[b])
    return out


def default_weights_sim41(chain: ModelChain, p: float = 1.0) -> WeightSchedule:
    """x_m = (p/2) ln 2^m and x_{j,m} = (p/2) ln(2^j - 2^m)."""
    models = chain.models
    x_m = np.array([0.5 * p * m * _LN2 for m in models])
    x_jm = _pair_table(models, lambda j, m: 0.5 * p * np.log(2.0**j - 2.0**m))
    return WeightSchedule(x_m, x_jm, Provenance.SIMULATION41, (p,))


def default_weights_corollary1(chain: ModelChain, p: float, r: int = 0) -> WeightSchedule:
    e = 1 + 2 * r
    models = chain.models
    x_m = np.array([0.5 * p * m * e * _LN2 for m in models])
    # ln(2^{je} - 2^{me}) = je ln2 + ln(1 - 2^{(m-j)e}), stable for large exponents
    x_jm = _pair_table(models, lambda j, m: 0.5 * p * (j * e * _LN2 + np.log1p(-(2.0 ** ((m - j) * e)))))
    return WeightSchedule(x_m, x_jm, Provenance.COROLLARY1, (p, r))


def default_weights_corollary2(chain: ModelChain, p: float = 1.0) -> WeightSchedule:
    if chain.extra_model is None:
        raise ValueError("this schedule needs a chain ending with the indicator model")
    H = chain.extra_model.length
    if not 0.0 < H <= 1.0:
        raise ValueError(f"indicator length must lie in (0, 1], got {H}")
    models = chain.models
    x_m = np.array([0.5 * p * m for m in models[:-1]] + [0.5 * p * np.log(1.0 / H)])
    x_jm = _pair_table(models, lambda j, m: 0.5 * p * max(j, m))
    return WeightSchedule(x_m, x_jm, Provenance.COROLLARY2, (p,))


def default_weights_corollary3(chain: ModelChain, p: float = 1.0, d: Optional[int] = None) -> WeightSchedule:
    d = chain.dimension if d is None else d
    models = chain.models
    x_m = np.array([0.5 * p * d * m * _LN2 for m in models])
    x_jm = _pair_table(models, lambda j, m: 0.5 * p * d * max(j, m) * _LN2)
    return WeightSchedule(x_m, x_jm, Provenance.COROLLARY3, (p, d))


def penalty_tables(rep: FunctionalRep, weights: WeightSchedule) -> tuple[np.ndarray, np.ndarray]:
    """(pen, H) with ``H[a, b]`` the deviation bound for positions a >= b."""
    if len(weights) != len(rep.models):
        raise ValueError(f"{len(weights)} weights for {len(rep.models)} models")
    pen = np.sqrt(2.0 * weights.x_m) * np.sqrt(rep.sigma_sq)
    H = np.sqrt(2.0 * weights.x_jm) * np.sqrt(rep.sigma_diff_sq)
    return pen, H


def crit_hat(estimates, H, pen) -> np.ndarray:
    """``max_{j >= m} (|est_m - est_j| - H(j, m)) + pen(m)`` per position m."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    _, crit = kernels.crit_select(est, np.ascontiguousarray(H, dtype=float),
                                  np.ascontiguousarray(pen, dtype=float), 0.0)
    return crit[0]


def select_m_hat(crit, n: int) -> int:
    """Smallest position whose criterion is within 1/n of the minimum."""
    crit = np.asarray(crit, dtype=float)
    if crit.size == 0:
        raise ValueError("empty model list")
    if n < 1:
        raise ValueError("n must be positive")
    return int(np.argmax(crit <= crit.min() + 1.0 / n))


@dataclass(frozen=True)
class SelectionResult:
    m_hat: int
    position: int
    crit_hat: np.ndarray
    pen: np.ndarray
    sup_deviation: np.ndarray
    estimate: float
    estimates: np.ndarray
    models: tuple[int, ...]


def select_from_estimates(estimates, rep: FunctionalRep, weights: WeightSchedule, n: int) -> SelectionResult:
    est = np.asarray(estimates, dtype=float)
    pen, H = penalty_tables(rep, weights)
    crit = crit_hat(est, H, pen)
    pos = select_m_hat(crit, n)
    return SelectionResult(
        m_hat=rep.models[pos],
        position=pos,
        crit_hat=crit,
        pen=pen,
        sup_deviation=crit - pen,
        estimate=float(est[pos]),
        estimates=est,
        models=rep.models,
    )


def select(
    record: ObservationRecord,
    chain: ModelChain,
    rep: FunctionalRep,
    weights: WeightSchedule,
    n: Optional[int] = None,
) -> SelectionResult:
    n = record.model.n if n is None else n
    est = np.array([estimate_T(record, rep, chain, m) for m in rep.models])
    return select_from_estimates(est, rep, weights, n)


def select_batch(estimates, rep: FunctionalRep, weights: WeightSchedule, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Selected positions and estimates for an (R, M) table of T(s_hat_m)."""
    est = np.ascontiguousarray(estimates, dtype=float)
    pen, H = penalty_tables(rep, weights)
    m_hat, _ = kernels.crit_select(est, np.ascontiguousarray(H), np.ascontiguousarray(pen), 1.0 / n)
    m_hat = np.asarray(m_hat, dtype=np.intp)
    return m_hat, est[np.arange(est.shape[0]), m_hat]


def select_multibasis(records, chains, n: int):
    """Lexicographic selection over several chains.

    ``records`` is one record shared by all chains or a sequence aligned with
    ``chains``; each chain entry is ``(label, chain, rep, weights)``. Returns
    the label and the result of the smallest (l, m) within 1/n of the global
    minimum.
    """
    if not chains:
        raise ValueError("at least one chain is required")
    if isinstance(records, ObservationRecord):
        records = [records] * len(chains)
    results = [select(rec, ch, rep, w, n) for rec, (_, ch, rep, w) in zip(records, chains)]
    best = min(float(r.crit_hat.min()) for r in results)
    for (label, *_), res in zip(chains, results):
        hits = np.flatnonzero(res.crit_hat <= best + 1.0 / n)
        if hits.size:
            pos = int(hits[0])
            return label, SelectionResult(
                m_hat=res.models[pos],
                position=pos,
                crit_hat=res.crit_hat,
                pen=res.pen,
                sup_deviation=res.sup_deviation,
                estimate=float(res.estimates[pos]),
                estimates=res.estimates,
                models=res.models,
            )
    raise AssertionError("unreachable: the global minimum belongs to some chain")


def results_to_csv(results: Sequence[SelectionResult], replicates: Optional[Sequence[int]] = None) -> str:
    """Rows ``replicate, m_hat, estimate, crit_<m>...`` for histogram pipelines."""
    if not results:
        return ""
    replicates = range(len(results)) if replicates is None else replicates
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "m_hat", "estimate"] + [f"crit_{m}" for m in results[0].models])
    for rep_idx, res in zip(replicates, results):
        w.writerow([rep_idx, res.m_hat, repr(res.estimate)] + [repr(float(c)) for c in res.crit_hat])
    return buf.getvalue()
