"""Gaussian observation models and the data-access surface ``Y(t)``.

Three instantiations of ``Y(t) = <s, t> + (sigma / sqrt(n)) L(t)`` are
simulated:

* finite regression, ``y_i = s(i/n) + sigma * eps_i`` with
  ``Y(t) = (1/n) sum_i t(i/n) y_i``;
* the Gaussian sequence model, ``Y_lam = beta_lam + (sigma/sqrt(n)) eps_lam``;
* the white noise model on [0,1]^d, simulated through exact finite-dimensional
  marginals: ``Y(1_A)`` for a partition of the domain into disjoint pieces
  ``A`` (1-D atoms, d-dimensional dyadic cells, or the nested shells around a
  point). Every Haar scaling function and every interval indicator whose
  endpoints are atom boundaries is a finite combination of these.

Random streams: replicate ``r`` of master seed ``seed`` draws from
``PCG64(SeedSequence(seed, spawn_key=(r,)))``. Records are therefore
reproducible one at a time and independent of how replicates are batched or
scheduled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .signals import Signal

__all__ = [
    "NoiseKind",
    "NoiseModel",
    "ObservationRecord",
    "replicate_rng",
    "simulate_regression",
    "simulate_regression_batch",
    "simulate_sequence",
    "simulate_white_noise",
    "simulate_white_noise_batch",
    "simulate_white_noise_cells",
    "simulate_white_noise_local",
    "simulate_white_noise_local_batch",
    "observe_coefficient",
    "regression_grid",
    "quadrature",
    "truth_functional",
    "is_dyadic",
]


class NoiseKind(str, enum.Enum):
    FINITE_REGRESSION = "FiniteRegression"
    GAUSSIAN_SEQUENCE = "GaussianSequence"
    WHITE_NOISE = "WhiteNoise"


def is_dyadic(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    n: int
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be a finite nonnegative number, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def noise_scale(self) -> float:
        """Standard deviation of ``Y(t)`` for a unit-norm ``t``."""
        return self.sigma / np.sqrt(self.n)

    @classmethod
    def regression(cls, n: int, sigma: float) -> "NoiseModel":
        return cls(NoiseKind.FINITE_REGRESSION, n, sigma)

    @classmethod
    def white_noise(cls, n: int, sigma: float) -> "NoiseModel":
        return cls(NoiseKind.WHITE_NOISE, n, sigma)

    @classmethod
    def sequence(cls, n: int, sigma: float = 1.0) -> "NoiseModel":
        return cls(NoiseKind.GAUSSIAN_SEQUENCE, n, sigma)


@dataclass(frozen=True)
class ObservationRecord:
    """One simulated data set.

    ``layout`` says how ``data`` is indexed:

    ``"grid"``      y_1..y_n of the finite regression model;
    ``"sequence"``  Y_lam for lam = 0, 1, ... (Gaussian sequence model);
    ``"atoms"``     Y(1_A) for the 1-D pieces between ``geometry`` breakpoints;
    ``"cells"``     Y(1_C) for all dyadic cells of level ``geometry["level"]``
                    in dimension ``geometry["dim"]`` (C-order flattening);
    ``"shells"``    Y(1_{C_l minus C_{l+1}}) for the nested cells C_l
                    containing ``geometry["x0"]``, l = 0..level, the last entry
                    being Y(1_{C_level}).
    """

    model: NoiseModel
    data: np.ndarray
    seed: int
    replicate_index: int
    layout: str = "grid"
    geometry: Any = field(default=None, compare=False)

    def __post_init__(self):
        if self.layout == "grid" and len(self.data) != self.model.n:
            raise ValueError(
                f"regression record must hold n={self.model.n} values, got {len(self.data)}"
            )


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate index must be nonnegative")
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(replicate),)))
    )


def _draw(seed: int, replicates: Iterable[int], size: int) -> np.ndarray:
    replicates = list(replicates)
    out = np.empty((len(replicates), size))
    for row, r in enumerate(replicates):
        out[row] = replicate_rng(seed, r).standard_normal(size)
    return out


# -- finite regression --------------------------------------------------------

def regression_grid(n: int) -> np.ndarray:
    """Design points i/n, i = 1..n."""
    return np.arange(1, n + 1, dtype=float) / n


def _check_regression(model: NoiseModel) -> None:
    if model.kind is not NoiseKind.FINITE_REGRESSION:
        raise ValueError(f"expected a FiniteRegression model, got {model.kind.value}")


def simulate_regression_batch(
    signal: Signal, model: NoiseModel, seed: int, replicates: Sequence[int]
) -> np.ndarray:
    """Rows are the data vectors of the given replicates, shape (R, n)."""
    _check_regression(model)
    mean = signal(regression_grid(model.n))
    noise = _draw(seed, replicates, model.n)
    return mean[None, :] + model.sigma * noise


def simulate_regression(
    signal: Signal, model: NoiseModel, seed: int, replicate: int
) -> ObservationRecord:
    data = simulate_regression_batch(signal, model, seed, [replicate])[0]
    return ObservationRecord(model, data, seed, replicate)


def observe_coefficient(record: ObservationRecord, basis_fn_grid) -> float:
    """``Y(t) = (1/n) sum_i t(i/n) y_i`` in the regression model.

    In the sequence model ``basis_fn_grid`` holds the coordinates of ``t`` and
    the plain dot product is returned.
    """
    t = np.asarray(basis_fn_grid, dtype=float)
    if t.shape != record.data.shape:
        raise ValueError(
            f"basis function has {t.shape[0] if t.ndim else 0} values, record has {len(record.data)}"
        )
    if record.layout == "grid":
        return float(t @ record.data) / record.model.n
    if record.layout in ("sequence", "atoms", "cells", "shells"):
        return float(t @ record.data)
    raise ValueError(f"unsupported layout {record.layout!r}")


# -- Gaussian sequence --------------------------------------------------------

def simulate_sequence(beta, model: NoiseModel, seed: int, replicate: int) -> ObservationRecord:
    """``Y_lam = beta_lam + (sigma/sqrt(n)) eps_lam`` for a finite beta vector."""
    if model.kind is not NoiseKind.GAUSSIAN_SEQUENCE:
        raise ValueError(f"expected a GaussianSequence model, got {model.kind.value}")
    beta = np.asarray(beta, dtype=float)
    noise = _draw(seed, [replicate], beta.size)[0]
    return ObservationRecord(
        model, beta + model.noise_scale * noise, seed, replicate, layout="sequence"
    )


# -- quadrature ---------------------------------------------------------------

def quadrature(f, a: float, b: float, depth: int = 16, breakpoints: Sequence[float] = ()) -> float:
    """Composite midpoint rule with 2**depth panels per smooth piece of [a, b]."""
    if b < a:
        raise ValueError("quadrature interval is reversed")
    if b == a:
        return 0.0
    cuts = [a, *sorted(c for c in breakpoints if a < c < b), b]
    panels = 2**depth
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        h = (hi - lo) / panels
        mid = lo + h * (np.arange(panels) + 0.5)
        total += h * float(np.sum(f(mid)))
    return total


def _piece_integrals(signal: Signal, edges: np.ndarray, panels: int = 1024) -> np.ndarray:
    """Integrals of a 1-D signal over consecutive [edges[i], edges[i+1]]."""
    inner = np.asarray(signal.breakpoints, dtype=float)
    out = np.empty(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        out[i] = quadrature(signal, lo, hi, depth=int(np.log2(panels)),
                            breakpoints=inner[(inner > lo) & (inner < hi)])
    return out


def _box_integral(signal: Signal, lo: np.ndarray, hi: np.ndarray, per_dim: int = 64) -> float:
    d = len(lo)
    axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(per_dim) + 0.5) / per_dim for i in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return float(np.mean(signal(mesh))) * float(np.prod(hi - lo))


# -- white noise --------------------------------------------------------------

def _check_white_noise(model: NoiseModel) -> None:
    if model.kind is not NoiseKind.WHITE_NOISE:
        raise ValueError(f"expected a WhiteNoise model, got {model.kind.value}")


def _atom_edges(breakpoints) -> np.ndarray:
    edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(breakpoints, dtype=float)]))
    if edges[0] < 0 or edges[-1] > 1:
        raise ValueError("white-noise breakpoints must lie in [0, 1]")
    return edges


def simulate_white_noise_batch(
    signal: Signal, model: NoiseModel, breakpoints, seed: int, replicates: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """``Y(1_A)`` for the atoms A between sorted breakpoints (0 and 1 added).

    Returns ``(edges, data)`` with ``data`` of shape (R, len(edges) - 1).
    """
    _check_white_noise(model)
    edges = _atom_edges(breakpoints)
    means = _piece_integrals(signal, edges)
    sd = model.noise_scale * np.sqrt(np.diff(edges))
    noise = _draw(seed, replicates, len(means))
    return edges, means[None, :] + sd[None, :] * noise


def simulate_white_noise(
    signal: Signal, model: NoiseModel, breakpoints, seed: int, replicate: int
) -> ObservationRecord:
    edges, data = simulate_white_noise_batch(signal, model, breakpoints, seed, [replicate])
    return ObservationRecord(model, data[0], seed, replicate, layout="atoms", geometry=edges)


def simulate_white_noise_cells(
    signal: Signal, model: NoiseModel, level: int, seed: int, replicate: int
) -> ObservationRecord:
    """``Y(1_C)`` for every dyadic cell of the given level in [0,1]^dim."""
    _check_white_noise(model)
    d = signal.dim
    side = 2**level
    h = 1.0 / side
    idx = np.stack(np.meshgrid(*[np.arange(side)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    means = np.array([_box_integral(signal, k * h, (k + 1) * h, per_dim=16) for k in idx])
    noise = _draw(seed, [replicate], len(means))[0]
    data = means + model.noise_scale * np.sqrt(h**d) * noise
    return ObservationRecord(
        model, data, seed, replicate, layout="cells", geometry={"level": level, "dim": d}
    )


def _nested_cells(x0: np.ndarray, level: int) -> list[tuple[np.ndarray, np.ndarray]]:
    from .wavelets import multid_haar_cell

    boxes = []
    for m in range(level + 1):
        k = np.asarray(multid_haar_cell(x0, m), dtype=float)
        boxes.append((k / 2**m, (k + 1) / 2**m))
    return boxes


def _shell_means(signal: Signal, x0: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
    boxes = _nested_cells(x0, level)
    d = len(x0)
    cell_int = np.array([_box_integral(signal, lo, hi, per_dim=256 if d <= 2 else 32)
                         for lo, hi in boxes])
    vol = np.array([float(np.prod(hi - lo)) for lo, hi in boxes])
    shell_int = np.append(cell_int[:-1] - cell_int[1:], cell_int[-1])
    shell_vol = np.append(vol[:-1] - vol[1:], vol[-1])
    return shell_int, shell_vol


def simulate_white_noise_local_batch(
    signal: Signal, model: NoiseModel, x0, level: int, seed: int, replicates: Sequence[int]
) -> np.ndarray:
    """Shell observations around ``x0`` for several replicates, shape (R, level+1).

    The shells ``C_l minus C_{l+1}`` and the innermost cell are disjoint, so
    their white-noise integrals are independent; ``Y(1_{C_l})`` is the sum of
    the entries from ``l`` onwards.
    """
    _check_white_noise(model)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    means, vol = _shell_means(signal, x0, level)
    noise = _draw(seed, replicates, level + 1)
    return means[None, :] + model.noise_scale * np.sqrt(vol)[None, :] * noise


def simulate_white_noise_local(
    signal: Signal, model: NoiseModel, x0, level: int, seed: int, replicate: int
) -> ObservationRecord:
    data = simulate_white_noise_local_batch(signal, model, x0, level, seed, [replicate])[0]
    x0 = tuple(np.atleast_1d(np.asarray(x0, dtype=float)))
    return ObservationRecord(
        model, data, seed, replicate, layout="shells",
        geometry={"x0": x0, "level": level, "dim": len(x0)},
    )


# -- reference values ---------------------------------------------------------

def truth_functional(signal: Signal, functional) -> float:
    """Reference value T(s) by dyadic midpoint quadrature (point kinds: direct)."""
    from .functionals import FunctionalKind

    depth = signal.truth_quadrature_depth
    kind = functional.kind
    if kind is FunctionalKind.POINT_EVAL:
        if functional.r != 0:
            raise ValueError("truth values for derivatives must be supplied by the caller")
        x0 = np.asarray(functional.x0, dtype=float)
        return float(signal(x0 if signal.dim > 1 else x0.reshape(())))
    if signal.dim != 1:
        raise ValueError(f"{kind.value} functionals are one-dimensional")
    if kind is FunctionalKind.INTERVAL_MEAN:
        a, b = functional.interval
        return quadrature(signal, a, b, depth, signal.breakpoints) / (b - a)
    if kind is FunctionalKind.INTEGRAL_AGAINST_G:
        g = functional.g_callable()
        cuts = tuple(signal.breakpoints) + tuple(functional.g_breakpoints)
        return quadrature(lambda x: signal(x) * g(x), 0.0, 1.0, depth, cuts)
    raise ValueError(f"no reference value for {kind.value} functionals")
