"""Linear functionals over a model chain.

A functional T enters the selector only through the numbers ``T(phi_lam)``
for every model of the chain. From them come the projection estimates
``T(s_hat_m) = sum_lam Y(phi_lam) T(phi_lam)``, their variances ``sigma_m^2``
and the variances ``sigma_{j,m}^2`` of pairwise differences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .observation import NoiseModel, ObservationRecord
from .signals import G_FUNCTIONS
from .wavelets import (
    BasisFamily,
    ModelChain,
    empirical_coefficients,
    grid_inner_products,
    haar_cell_index,
    multid_haar_cell,
    regression_design,
    scaling_eval,
    truth_grid,
)

__all__ = [
    "FunctionalKind",
    "FunctionalSpec",
    "FunctionalRep",
    "GramMode",
    "SIGMA_SCALES",
    "functional_values",
    "build_functional_rep",
    "union_gram",
    "sigma_diff_general",
    "integral_sigma_from_projections",
    "estimate_T",
    "estimator_weights",
]

SIGMA_SCALES = ("definition-1", "paper-4.2")
_GRAM_TOL = 1e-10


class FunctionalKind(str, enum.Enum):
    POINT_EVAL = "PointEval"
    INTERVAL_MEAN = "IntervalMean"
    INTEGRAL_AGAINST_G = "IntegralAgainstG"
    CUSTOM = "Custom"


class GramMode(str, enum.Enum):
    NESTED = "Nested"
    GENERAL = "GeneralGram"


@dataclass(frozen=True)
class FunctionalSpec:
    kind: FunctionalKind
    x0: Optional[tuple[float, ...]] = None
    r: int = 0
    interval: Optional[tuple[float, float]] = None
    g_name: Optional[str] = None
    g_grid: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    custom_values: Optional[Mapping[int, np.ndarray]] = field(default=None, compare=False, repr=False)
    dimension: int = 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", FunctionalKind(self.kind))
        kind = self.kind
        if kind is FunctionalKind.POINT_EVAL:
            x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
            if len(x0) != self.dimension or any(not 0.0 <= v <= 1.0 for v in x0):
                raise ValueError(f"x0 must lie in [0,1]^{self.dimension}, got {self.x0}")
            if self.r < 0:
                raise ValueError("derivative order must be nonnegative")
            object.__setattr__(self, "x0", x0)
        elif kind is FunctionalKind.INTERVAL_MEAN:
            a, b = (float(v) for v in self.interval)
            if not 0.0 <= a < b <= 1.0:
                raise ValueError(f"interval must satisfy 0 <= a < b <= 1, got {self.interval}")
            object.__setattr__(self, "interval", (a, b))
        elif kind is FunctionalKind.INTEGRAL_AGAINST_G:
            if (self.g_name is None) == (self.g_grid is None):
                raise ValueError("give exactly one of g_name or g_grid")
            if self.g_name is not None and self.g_name not in G_FUNCTIONS:
                raise ValueError(f"unknown g function {self.g_name!r}")
        elif kind is FunctionalKind.CUSTOM and not self.custom_values:
            raise ValueError("custom functionals need per-model T(phi) values")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind is FunctionalKind.POINT_EVAL:
            return "point"
        if self.kind is FunctionalKind.INTERVAL_MEAN:
            return "interval"
        if self.kind is FunctionalKind.INTEGRAL_AGAINST_G:
            return self.g_name or "g"
        return "custom"

    # constructors
    @classmethod
    def point(cls, x0, r: int = 0) -> "FunctionalSpec":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(FunctionalKind.POINT_EVAL, x0=tuple(x0), r=r, dimension=len(x0))

    @classmethod
    def interval_mean(cls, a: float, b: float) -> "FunctionalSpec":
        return cls(FunctionalKind.INTERVAL_MEAN, interval=(a, b))

    @classmethod
    def integral(cls, g) -> "FunctionalSpec":
        if isinstance(g, str):
            return cls(FunctionalKind.INTEGRAL_AGAINST_G, g_name=g)
        return cls(FunctionalKind.INTEGRAL_AGAINST_G, g_grid=np.asarray(g, dtype=float))

    @classmethod
    def custom(cls, values: Mapping[int, Sequence[float]], label: str = "custom") -> "FunctionalSpec":
        return cls(FunctionalKind.CUSTOM,
                   custom_values={int(m): np.asarray(v, dtype=float) for m, v in values.items()},
                   label=label)

    @property
    def is_integral_type(self) -> bool:
        return self.kind in (FunctionalKind.INTERVAL_MEAN, FunctionalKind.INTEGRAL_AGAINST_G)

    @property
    def g_breakpoints(self) -> tuple[float, ...]:
        return ()

    def g_callable(self) -> Callable[[np.ndarray], np.ndarray]:
        """The weight function g (IntervalMean: ``1_I / |I|``)."""
        if self.kind is FunctionalKind.INTERVAL_MEAN:
            a, b = self.interval
            return lambda x: ((x > a) & (x <= b)) / (b - a)
        if self.g_name is not None:
            return G_FUNCTIONS[self.g_name]
        grid = np.asarray(self.g_grid, dtype=float)
        size = grid.size
        return lambda x: grid[np.clip((np.asarray(x) * size).astype(np.int64), 0, size - 1)]

    def g_on_truth_grid(self, depth: int = 16) -> np.ndarray:
        if self.g_grid is not None:
            if self.g_grid.size != 2**depth:
                raise ValueError(f"g grid has {self.g_grid.size} values, expected {2**depth}")
            return np.asarray(self.g_grid, dtype=float)
        return np.asarray(self.g_callable()(truth_grid(depth)), dtype=float)


@dataclass(frozen=True)
class FunctionalRep:
    """Per-model ``T(phi_lam)`` vectors with their variance tables.

    ``sigma_diff_sq[a, b]`` is ``sigma_{j,m}^2`` for the models at positions a
    and b of ``models`` (symmetric, zero diagonal).
    """

    models: tuple[int, ...]
    values: Mapping[int, np.ndarray]
    sigma_sq: np.ndarray
    sigma_diff_sq: np.ndarray
    gram_mode: GramMode
    variance_scale: float

    def sigma(self, m: int) -> float:
        return float(np.sqrt(self.sigma_sq[self.models.index(m)]))

    def sigma_diff(self, j: int, m: int) -> float:
        return float(np.sqrt(self.sigma_diff_sq[self.models.index(j), self.models.index(m)]))


# -- T(phi_lam) ---------------------------------------------------------------

def _haar_pieces(chain: ModelChain, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coefficient, left, right) with phi = c * 1_(a,b] for each lam in Lambda_m."""
    if chain.is_extra(m):
        a, b = chain.extra_model.interval
        return np.array([1.0 / np.sqrt(b - a)]), np.array([a]), np.array([b])
    k = np.arange(2**m, dtype=float)
    return np.full(2**m, 2 ** (m / 2)), k / 2**m, (k + 1) / 2**m


def functional_values(spec: FunctionalSpec, chain: ModelChain, m: int) -> np.ndarray:
    """``T(phi_lam)`` for lam in Lambda_m."""
    basis = chain.basis
    kind = spec.kind
    if kind is FunctionalKind.CUSTOM:
        try:
            vals = np.asarray(spec.custom_values[m], dtype=float)
        except KeyError:
            raise ValueError(f"custom functional has no values for model {m}") from None
        if vals.shape != (chain.size(m),):
            raise ValueError(f"model {m} needs {chain.size(m)} values, got {vals.shape}")
        return vals
    if spec.dimension != chain.dimension:
        raise ValueError("functional and chain dimensions differ")
    if kind is FunctionalKind.POINT_EVAL:
        if spec.r != 0:
            raise ValueError(
                "derivative functionals (r >= 1) are not built in; supply T(phi) via FunctionalSpec.custom"
            )
        if chain.is_extra(m):
            a, b = chain.extra_model.interval
            x = spec.x0[0]
            inside = (a < x <= b) or (a == 0.0 and x == 0.0)
            return np.array([1.0 / np.sqrt(b - a) if inside else 0.0])
        if chain.dimension > 1:
            d = chain.dimension
            out = np.zeros(2 ** (m * d))
            cell = multid_haar_cell(spec.x0, m)
            out[np.ravel_multi_index(cell, (2**m,) * d)] = 2 ** (m * d / 2)
            return out
        return np.asarray(scaling_eval(basis, m, np.arange(2**m), spec.x0[0]), dtype=float)
    if chain.dimension != 1:
        raise ValueError(f"{kind.value} functionals are one-dimensional")
    if kind is FunctionalKind.INTERVAL_MEAN and basis.is_haar:
        a, b = spec.interval
        c, lo, hi = _haar_pieces(chain, m)
        overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
        return c * overlap / (b - a)
    g = spec.g_on_truth_grid()
    if chain.is_extra(m):
        a, b = chain.extra_model.interval
        t = truth_grid()
        return np.array([g[(t > a) & (t <= b)].sum() / g.size / np.sqrt(b - a)])
    return grid_inner_products(g, basis, m)


# -- variances ----------------------------------------------------------------

def _variance_scale(spec: FunctionalSpec, model: NoiseModel, sigma_scale: str) -> float:
    if sigma_scale not in SIGMA_SCALES:
        raise ValueError(f"sigma_scale must be one of {SIGMA_SCALES}, got {sigma_scale!r}")
    if sigma_scale == "paper-4.2" and spec.is_integral_type:
        return 1.0
    return model.sigma**2 / model.n


def union_gram(chain: ModelChain, j: int, m: int, depth: int = 14) -> np.ndarray:
    """Gram matrix of the concatenated bases ``[Lambda_m, Lambda_j]``.

    Haar pieces and indicators use exact overlap lengths; Daubechies-20 uses
    midpoint quadrature on a dyadic grid of the given depth.
    """
    if chain.basis.is_haar and chain.dimension == 1:
        pieces = [_haar_pieces(chain, q) for q in (m, j)]
        c = np.concatenate([p[0] for p in pieces])
        lo = np.concatenate([p[1] for p in pieces])
        hi = np.concatenate([p[2] for p in pieces])
        overlap = np.clip(np.minimum(hi[:, None], hi[None, :]) - np.maximum(lo[:, None], lo[None, :]), 0.0, None)
        return c[:, None] * c[None, :] * overlap
    if chain.dimension != 1:
        # nested Haar cells: <phi_a, phi_b> = c_a c_b |A cap B|
        d = chain.dimension
        boxes = []
        for q in (m, j):
            for _, cell in chain.index_set(q):
                k = np.asarray(cell, dtype=float)
                boxes.append((2 ** (q * d / 2), k / 2**q, (k + 1) / 2**q))
        c = np.array([b[0] for b in boxes])
        lo = np.array([b[1] for b in boxes])
        hi = np.array([b[2] for b in boxes])
        ov = np.prod(np.clip(np.minimum(hi[:, None], hi[None, :]) - np.maximum(lo[:, None], lo[None, :]), 0.0, None), axis=-1)
        return c[:, None] * c[None, :] * ov
    t = truth_grid(depth)
    samples = np.vstack([np.asarray(scaling_eval(chain.basis, q, np.arange(2**q)[:, None], t[None, :]))
                         for q in (m, j)])
    return samples @ samples.T / t.size


def sigma_diff_general(values_m, values_j, gram, sigma: float, n: int) -> float:
    """``(sigma^2/n) v' G v`` with ``v = [T(phi_lam), lam in Lambda_m ; -T(phi_lam), lam in Lambda_j]``."""
    v = np.concatenate([np.asarray(values_m, dtype=float), -np.asarray(values_j, dtype=float)])
    gram = np.asarray(gram, dtype=float)
    if gram.shape != (v.size, v.size):
        raise ValueError(f"gram must be {v.size}x{v.size}, got {gram.shape}")
    if not np.allclose(gram, gram.T, atol=1e-12):
        raise ValueError("gram matrix is not symmetric")
    quad = float(v @ gram @ v)
    if quad < -_GRAM_TOL * max(1.0, float(v @ v)):
        raise ValueError(f"gram matrix is not positive semidefinite (v'Gv = {quad:.3e})")
    return sigma**2 / n * max(quad, 0.0)


def build_functional_rep(
    spec: FunctionalSpec,
    chain: ModelChain,
    model: NoiseModel,
    sigma_scale: str = "definition-1",
) -> FunctionalRep:
    scale = _variance_scale(spec, model, sigma_scale)
    models = chain.models
    values = {m: functional_values(spec, chain, m) for m in models}
    for arr in values.values():
        arr.setflags(write=False)
    sigma_sq = np.array([scale * float(values[m] @ values[m]) for m in models])
    M = len(models)
    diff = np.zeros((M, M))
    nested = all(chain.is_nested(j, m) for j in models for m in models)
    for b in range(M):
        for a in range(b + 1, M):
            j, m = models[a], models[b]
            if chain.is_nested(j, m):
                val = max(sigma_sq[a] - sigma_sq[b], 0.0)
            else:
                gram = union_gram(chain, j, m)
                val = sigma_diff_general(values[m], values[j], gram, 1.0, 1) * scale
            diff[a, b] = diff[b, a] = val
    return FunctionalRep(
        models=models,
        values=values,
        sigma_sq=sigma_sq,
        sigma_diff_sq=diff,
        gram_mode=GramMode.NESTED if nested else GramMode.GENERAL,
        variance_scale=scale,
    )


def integral_sigma_from_projections(
    g_grid, chain: ModelChain, model: NoiseModel, sigma_scale: str = "definition-1"
) -> tuple[np.ndarray, np.ndarray]:
    """``sigma_m^2`` and ``sigma_{j,m}^2`` from projection norms of g (nested chains)."""
    from .wavelets import projection_norm_sq

    if sigma_scale not in SIGMA_SCALES:
        raise ValueError(f"sigma_scale must be one of {SIGMA_SCALES}, got {sigma_scale!r}")
    scale = 1.0 if sigma_scale == "paper-4.2" else model.sigma**2 / model.n
    norms = np.array([projection_norm_sq(g_grid, chain, m) for m in chain.models])
    sigma_sq = scale * norms
    diff = np.abs(sigma_sq[:, None] - sigma_sq[None, :])
    return sigma_sq, diff


# -- estimates ----------------------------------------------------------------

def estimate_T(record: ObservationRecord, rep: FunctionalRep, chain: ModelChain, m: int) -> float:
    """``T(s_hat_m) = sum_lam Y(phi_lam) T(phi_lam)``."""
    vals = rep.values[m]
    coeffs = empirical_coefficients(record, chain, m)
    nz = vals != 0.0
    return float(coeffs[nz] @ vals[nz])


def estimator_weights(rep: FunctionalRep, chain: ModelChain, n: int) -> np.ndarray:
    """Rows w_m with ``T(s_hat_m) = w_m . y`` on the regression grid, shape (M, n)."""
    W = np.empty((len(rep.models), n))
    for pos, m in enumerate(rep.models):
        if chain.is_extra(m):
            raise ValueError("indicator models are not defined on the regression grid")
        vals = rep.values[m]
        if chain.basis.is_haar:
            W[pos] = np.repeat(vals * 2 ** (m / 2), n // 2**m) / n
        else:
            W[pos] = vals @ regression_design(chain.basis, m, n) / n
    return W
