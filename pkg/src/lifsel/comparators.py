"""Reference procedures: Mallows Cp level choice (P2), universal hard
thresholding (P3) and the empirical integral (P4)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .functionals import FunctionalKind, FunctionalSpec, FunctionalRep, estimator_weights
from .observation import ObservationRecord, is_dyadic, regression_grid
from .wavelets import HAAR, BasisFamily, ModelChain, dwt, idwt, regression_design

__all__ = [
    "ComparatorKind",
    "ComparatorSpec",
    "universal_threshold",
    "mallows_criterion",
    "p2_select_level",
    "p2_select_batch",
    "p2_estimate",
    "hard_threshold",
    "p3_threshold_estimate",
    "p3_threshold_batch",
    "grid_functional_weights",
    "p4_empirical",
    "p4_batch",
    "p4_grid",
]


class ComparatorKind(str, enum.Enum):
    P2_MALLOWS_CP = "P2_MallowsCp"
    P3_THRESHOLD = "P3_Threshold"
    P4_EMPIRICAL = "P4_Empirical"


@dataclass(frozen=True)
class ComparatorSpec:
    kind: ComparatorKind
    basis: Optional[BasisFamily] = None
    keep_coarse_level: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ComparatorKind(self.kind))
        if self.keep_coarse_level < 0:
            raise ValueError("keep_coarse_level must be nonnegative")
        if self.kind is not ComparatorKind.P4_EMPIRICAL and self.basis is None:
            raise ValueError(f"{self.kind.value} needs a basis")


def _grid_data(record: ObservationRecord) -> np.ndarray:
    if record.layout != "grid":
        raise ValueError("comparators work on regression-grid records")
    return np.asarray(record.data, dtype=float)


def universal_threshold(sigma: float, n: int) -> float:
    return float(sigma * np.sqrt(2.0 * np.log(n)))


# -- P2 -----------------------------------------------------------------------

def mallows_criterion(Y, chain: ModelChain, sigma: float) -> np.ndarray:
    """``gamma_n(s_hat_m) + 2 2^m sigma^2 / n`` for each level, shape (R, M)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    R, n = Y.shape
    if not is_dyadic(n) or n < 2 ** max(chain.levels):
        raise ValueError(f"n={n} must be dyadic and at least 2^{max(chain.levels)}")
    if chain.extra_model is not None or chain.dimension != 1:
        raise ValueError("Mallows Cp runs on a plain one-dimensional chain")
    out = np.empty((R, len(chain.levels)))
    for pos, m in enumerate(chain.levels):
        if chain.basis.is_haar:
            blocks = Y.reshape(R, 2**m, n // 2**m)
            resid = blocks - blocks.mean(axis=2, keepdims=True)
            gamma = (resid**2).reshape(R, n).mean(axis=1)
        else:
            Phi = regression_design(chain.basis, m, n)
            fit = (Y @ Phi.T / n) @ Phi
            gamma = ((Y - fit) ** 2).mean(axis=1)
        out[:, pos] = gamma + 2.0 * 2**m * sigma**2 / n
    return out


def p2_select_batch(Y, chain: ModelChain, sigma: float) -> np.ndarray:
    """Positions (into ``chain.levels``) of the Cp minimizer, ties to the smallest."""
    return np.argmin(mallows_criterion(Y, chain, sigma), axis=1)


def p2_select_level(record: ObservationRecord, chain: ModelChain) -> int:
    pos = p2_select_batch(_grid_data(record)[None, :], chain, record.model.sigma)[0]
    return chain.levels[int(pos)]


def p2_estimate(record: ObservationRecord, chain: ModelChain, rep: FunctionalRep) -> tuple[int, float]:
    """Selected level and the plug-in value T(s_hat_level)."""
    level = p2_select_level(record, chain)
    W = estimator_weights(rep, chain, record.model.n)
    return level, float(W[chain.position(level)] @ _grid_data(record))


# -- P3 -----------------------------------------------------------------------

def hard_threshold(coeffs, threshold: float, keep: int) -> np.ndarray:
    """Zero every detail entry with ``|c| < threshold``; the first ``keep``
    entries (scaling coefficients) are left alone."""
    c = np.array(coeffs, dtype=float, copy=True)
    detail = c[..., keep:]
    detail[np.abs(detail) < threshold] = 0.0
    return c


def p3_threshold_batch(
    Y,
    basis: BasisFamily,
    sigma: float,
    keep_coarse_level: int = 0,
    threshold: Optional[float] = None,
) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[1]
    if not is_dyadic(n):
        raise ValueError(f"thresholding needs dyadic n, got {n}")
    J = int(np.log2(n))
    if not 0 <= keep_coarse_level <= J:
        raise ValueError(f"keep_coarse_level must lie in [0, {J}]")
    thr = universal_threshold(sigma, n) if threshold is None else float(threshold)
    c = dwt(Y, basis, keep_coarse_level)
    c = hard_threshold(c, thr, 2**keep_coarse_level)
    return idwt(c, basis, keep_coarse_level)


def p3_threshold_estimate(
    record: ObservationRecord,
    basis: BasisFamily = HAAR,
    keep_coarse_level: int = 0,
    threshold: Optional[float] = None,
) -> np.ndarray:
    """Hard-thresholded reconstruction of ``s(i/n)``."""
    y = _grid_data(record)
    return p3_threshold_batch(y[None, :], basis, record.model.sigma, keep_coarse_level, threshold)[0]


def grid_functional_weights(spec: FunctionalSpec, n: int) -> np.ndarray:
    """Weights w with ``T(s_tilde) = w . v`` for the step function equal to
    ``v_i`` on ``((i-1)/n, i/n]``."""
    if spec.kind is FunctionalKind.POINT_EVAL:
        if spec.dimension != 1 or spec.r != 0:
            raise ValueError("grid evaluation covers one-dimensional point values only")
        w = np.zeros(n)
        w[max(int(np.ceil(spec.x0[0] * n - 1e-12)) - 1, 0)] = 1.0
        return w
    if spec.kind is FunctionalKind.CUSTOM:
        raise ValueError("custom functionals have no grid evaluation")
    g = spec.g_on_truth_grid()
    if g.size % n:
        raise ValueError(f"n={n} does not divide the quadrature grid")
    return g.reshape(n, -1).sum(axis=1) / g.size


# -- P4 -----------------------------------------------------------------------

def p4_empirical(record: ObservationRecord, g_grid) -> float:
    """``(1/n) sum_i y_i g(i/n)``."""
    y = _grid_data(record)
    g = np.asarray(g_grid, dtype=float)
    if g.shape != y.shape:
        raise ValueError(f"g has {g.size} values for {y.size} observations")
    return float(y @ g / y.size)


def p4_batch(Y, g_grid) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    g = np.asarray(g_grid, dtype=float)
    if g.shape != (Y.shape[1],):
        raise ValueError(f"g has {g.size} values for {Y.shape[1]} observations")
    return Y @ g / Y.shape[1]


def p4_grid(spec: FunctionalSpec, n: int) -> np.ndarray:
    """``g(i/n)`` for the functional's weight function."""
    return np.asarray(spec.g_callable()(regression_grid(n)), dtype=float)

