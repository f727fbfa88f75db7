"""Periodized Haar / Daubechies-20 multiresolution spaces on [0, 1] and
d-dimensional Haar cells.

Conventions
-----------
* ``phi_{m,k}(x) = 2^{m/2} phi(2^m x - k)``, periodized with period 1, for
  ``k = 0 .. 2^m - 1``.
* Haar cells are right-closed, ``(k/2^m, (k+1)/2^m]``, with ``x = 0``
  assigned to cell 0. On the regression grid ``x_i = i/n`` this makes the
  Haar coefficients exact block means of ``n / 2^m`` consecutive samples.
* Daubechies-20 is the extremal-phase filter with 20 taps (10 vanishing
  moments). ``phi`` is tabulated by the cascade algorithm on the dyadic nodes
  ``j / 2^depth`` of its support ``[0, 19]`` and linearly interpolated.
"""
from __future__ import annotations

import csv
import enum
import functools
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .observation import ObservationRecord

__all__ = [
    "BasisKind",
    "BasisFamily",
    "ModelChain",
    "IndicatorModel",
    "HAAR",
    "D20",
    "daubechies_filter",
    "cascade_table",
    "haar_cell_index",
    "multid_haar_cell",
    "scaling_eval",
    "scaling_matrix",
    "grid_inner_products",
    "empirical_coefficients",
    "projection_norm_sq",
    "truth_grid",
    "dwt",
    "idwt",
    "export_cascade_csv",
]


class BasisKind(str, enum.Enum):
    HAAR_1D = "Haar1D"
    DAUBECHIES20_1D = "Daubechies20_1D"
    HAAR_MULTID = "HaarMultiD"


@functools.lru_cache(maxsize=None)
def daubechies_filter(vanishing_moments: int) -> np.ndarray:
    """Extremal-phase Daubechies lowpass filter, normalized to sum sqrt(2).

    Built by spectral factorization of the Daubechies polynomial, keeping the
    roots inside the unit circle.
    """
    N = int(vanishing_moments)
    if N < 1:
        raise ValueError("need at least one vanishing moment")
    if N == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    coeffs = [comb(N - 1 + k, k) for k in range(N)]
    y_roots = np.roots(coeffs[::-1])
    poly = np.array([1.0 + 0j])
    for _ in range(N):
        poly = np.convolve(poly, [1.0, 1.0])
    for y in y_roots:
        # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
        z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        poly = np.convolve(poly, [1.0, -z[np.argmin(np.abs(z))]])
    h = np.real(poly)
    h *= np.sqrt(2.0) / h.sum()
    h.setflags(write=False)
    return h


@functools.lru_cache(maxsize=8)
def cascade_table(vanishing_moments: int, depth: int) -> np.ndarray:
    """Values of phi on the nodes ``j / 2**depth``, ``j = 0 .. (L-1) 2**depth``."""
    h = daubechies_filter(vanishing_moments)
    L = len(h)
    top = L - 1
    # phi at the integers: eigenvector of M[k, j] = sqrt(2) h[2k - j] for eigenvalue 1.
    M = np.zeros((top + 1, top + 1))
    for k in range(top + 1):
        for l in range(L):
            j = 2 * k - l
            if 0 <= j <= top:
                M[k, j] += np.sqrt(2.0) * h[l]
    w, v = np.linalg.eig(M)
    vals = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    vals = vals / vals.sum()
    for d in range(1, depth + 1):
        finer = np.zeros(top * 2**d + 1)
        finer[::2] = vals
        odd = np.arange(1, top * 2**d, 2)
        for l in range(L):
            # phi(x) = sqrt2 sum_l h_l phi(2x - l); 2x - l sits on the previous grid
            src = odd - l * 2 ** (d - 1)
            ok = (src >= 0) & (src <= top * 2 ** (d - 1))
            finer[odd[ok]] += np.sqrt(2.0) * h[l] * vals[src[ok]]
        vals = finer
    vals.setflags(write=False)
    return vals


@dataclass(frozen=True)
class BasisFamily:
    kind: BasisKind
    dimension: int = 1
    cascade_depth: int = 14

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if self.kind is not BasisKind.HAAR_MULTID and self.dimension != 1:
            raise ValueError(f"{self.kind.value} is one-dimensional")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.kind is BasisKind.DAUBECHIES20_1D and self.cascade_depth < 10:
            raise ValueError("Daubechies-20 needs cascade_depth >= 10")

    @property
    def is_haar(self) -> bool:
        return self.kind is not BasisKind.DAUBECHIES20_1D

    @property
    def filter(self) -> np.ndarray:
        return daubechies_filter(1 if self.is_haar else 10)

    @property
    def label(self) -> str:
        return {"Haar1D": "H", "Daubechies20_1D": "D20", "HaarMultiD": f"H{self.dimension}d"}[
            self.kind.value
        ]

    def phi(self, t) -> np.ndarray:
        """The (non-periodized) father wavelet."""
        t = np.asarray(t, dtype=float)
        if self.is_haar:
            return ((t > 0.0) & (t <= 1.0)).astype(float)
        table = cascade_table(10, self.cascade_depth)
        scale = 2**self.cascade_depth
        u = t * scale
        i = np.floor(u).astype(np.int64)
        frac = u - i
        out = np.zeros_like(t)
        ok = (i >= 0) & (i < len(table) - 1)
        out[ok] = table[i[ok]] * (1.0 - frac[ok]) + table[i[ok] + 1] * frac[ok]
        return out


HAAR = BasisFamily(BasisKind.HAAR_1D)
D20 = BasisFamily(BasisKind.DAUBECHIES20_1D)


def haar_cell_index(x, m: int) -> np.ndarray:
    """Index k of the cell (k/2^m, (k+1)/2^m] holding x; x = 0 goes to cell 0."""
    x = np.asarray(x, dtype=float)
    k = np.ceil(x * 2**m).astype(np.int64) - 1
    return np.clip(k, 0, 2**m - 1)


def multid_haar_cell(x0, m: int) -> tuple[int, ...]:
    if m < 0:
        raise ValueError("level must be nonnegative")
    return tuple(int(k) for k in haar_cell_index(np.atleast_1d(x0), m))


def _check_translate(m: int, k) -> None:
    k = np.asarray(k)
    if m < 0 or np.any(k < 0) or np.any(k >= 2**m):
        raise IndexError(f"translate out of range for level {m}: {k}")


def _periodized(basis: BasisFamily, m: int, t: np.ndarray) -> np.ndarray:
    """sum_j 2^{m/2} phi(t + j 2^m) for t already reduced to [0, 2^m)."""
    period = 2**m
    support = len(basis.filter) - 1
    out = np.zeros_like(t)
    for j in range(-(-support // period) + 1):
        out += basis.phi(t + j * period)
    return out * 2 ** (m / 2)


def scaling_eval(basis: BasisFamily, m: int, k, x):
    """Periodized ``phi_{m,k}(x)`` for x in [0, 1]; vectorized over k and x."""
    _check_translate(m, k)
    x = np.asarray(x, dtype=float)
    k = np.asarray(k)
    if basis.is_haar:
        return np.where(haar_cell_index(x, m) == k, 2 ** (m / 2), 0.0)
    t = np.mod(x * 2**m - k, 2**m)
    return _periodized(basis, m, t)


def scaling_matrix(basis: BasisFamily, m: int, x) -> np.ndarray:
    """``phi_{m,k}(x_i)`` as a (2^m, len(x)) array."""
    x = np.asarray(x, dtype=float)
    k = np.arange(2**m)[:, None]
    return np.asarray(scaling_eval(basis, m, k, x[None, :]), dtype=float)


@functools.lru_cache(maxsize=64)
def _regression_design(basis: BasisFamily, m: int, n: int) -> np.ndarray:
    if n < 2**m:
        raise ValueError(f"level {m} needs n >= {2**m}, got n={n}")
    x = np.arange(1, n + 1, dtype=float) / n
    mat = scaling_matrix(basis, m, x)
    mat.setflags(write=False)
    return mat


def regression_design(basis: BasisFamily, m: int, n: int) -> np.ndarray:
    """``phi_{m,k}(i/n)`` for the regression grid, shape (2^m, n); cached."""
    return _regression_design(basis, m, n)


# -- model chains -------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorModel:
    """The one-dimensional space spanned by ``1_I`` for ``I = (a, b]``."""

    interval: tuple[float, float]

    def __post_init__(self):
        a, b = self.interval
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"interval must satisfy 0 <= a < b <= 1, got {self.interval}")

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]


@dataclass(frozen=True)
class ModelChain:
    """Ordered model collection: multiresolution levels plus an optional
    terminal non-multiresolution model.

    Models are addressed by their integer index ``m``; the extra model, when
    present, gets index ``max(levels) + 1``.
    """

    basis: BasisFamily
    levels: tuple[int, ...]
    extra_model: Optional[IndicatorModel] = None

    def __post_init__(self):
        levels = tuple(int(m) for m in self.levels)
        if not levels:
            raise ValueError("a model chain needs at least one level")
        if any(b <= a for a, b in zip(levels[:-1], levels[1:])) or levels[0] < 0:
            raise ValueError(f"levels must be strictly increasing and nonnegative: {levels}")
        if self.extra_model is not None and not self.basis.is_haar:
            raise ValueError("indicator models are only combined with Haar chains")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def dyadic(cls, basis: BasisFamily, top: int, bottom: int = 1) -> "ModelChain":
        return cls(basis, tuple(range(bottom, top + 1)))

    @classmethod
    def with_indicator(cls, interval: tuple[float, float]) -> "ModelChain":
        """Haar levels 0..m_n plus span(1_I), m_n = sup{m : 2^m <= 1/|I|}."""
        extra = IndicatorModel(tuple(interval))
        m_n = int(np.floor(np.log2(1.0 / extra.length) + 1e-12))
        return cls(HAAR, tuple(range(0, m_n + 1)), extra)

    @property
    def models(self) -> tuple[int, ...]:
        if self.extra_model is None:
            return self.levels
        return self.levels + (self.levels[-1] + 1,)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def is_extra(self, m: int) -> bool:
        return self.extra_model is not None and m == self.models[-1]

    def position(self, m: int) -> int:
        try:
            return self.models.index(m)
        except ValueError:
            raise KeyError(f"model {m} not in chain {self.models}") from None

    def index_set(self, m: int) -> list[tuple]:
        """Lambda_m as (level, translate) pairs; ``("I", 0)`` for the indicator."""
        self.position(m)
        if self.is_extra(m):
            return [("I", 0)]
        d = self.dimension
        if d == 1:
            return [(m, k) for k in range(2**m)]
        grid = np.stack(np.meshgrid(*[np.arange(2**m)] * d, indexing="ij"), -1).reshape(-1, d)
        return [(m, tuple(int(v) for v in row)) for row in grid]

    def size(self, m: int) -> int:
        return 1 if self.is_extra(m) else 2 ** (m * self.dimension)

    def is_nested(self, j: int, m: int) -> bool:
        """Whether span(Lambda_min) is contained in span(Lambda_max)."""
        lo, hi = sorted((j, m))
        if self.is_extra(lo) or self.is_extra(hi):
            return lo == hi
        return True


# -- coefficient extraction ---------------------------------------------------

def grid_inner_products(values: np.ndarray, basis: BasisFamily, m: int) -> np.ndarray:
    """``<g, phi_{m,k}>`` from g sampled at the midpoints of a dyadic grid.

    For Haar this is exact for piecewise-constant g on the grid. For
    Daubechies-20 it is a circular cross-correlation, computed by FFT.
    """
    values = np.asarray(values, dtype=float)
    size = values.shape[-1]
    if not (size & (size - 1) == 0 and size >= 2**m):
        raise ValueError(f"grid of {size} points cannot resolve level {m}")
    if basis.is_haar:
        blocks = values.reshape(*values.shape[:-1], 2**m, size // 2**m)
        return blocks.sum(-1) * 2 ** (m / 2) / size
    t = (np.arange(size) + 0.5) / size
    p = scaling_eval(basis, m, 0, t)
    corr = np.fft.irfft(np.fft.rfft(values) * np.conj(np.fft.rfft(p)), n=size) / size
    return corr[..., :: size // 2**m]


def _regression_coefficients(data: np.ndarray, basis: BasisFamily, m: int) -> np.ndarray:
    n = data.shape[-1]
    if n < 2**m:
        raise ValueError(f"level {m} needs n >= {2**m}, got n={n}")
    if basis.is_haar:
        if n % 2**m:
            raise ValueError("Haar block means need 2^m to divide n")
        blocks = data.reshape(*data.shape[:-1], 2**m, n // 2**m)
        return blocks.sum(-1) * 2 ** (m / 2) / n
    return data @ regression_design(basis, m, n).T / n


def _atom_integral(edges: np.ndarray, data: np.ndarray, a: float, b: float) -> float:
    cum = np.concatenate([[0.0], np.cumsum(data)])
    ia, ib = np.searchsorted(edges, [a, b])
    if (ia >= len(edges) or ib >= len(edges)
            or not np.isclose(edges[ia], a, atol=1e-15) or not np.isclose(edges[ib], b, atol=1e-15)):
        raise ValueError(f"interval ({a}, {b}] is not resolved by the record's atoms")
    return float(cum[ib] - cum[ia])


def empirical_coefficients(record: ObservationRecord, chain: ModelChain, m: int) -> np.ndarray:
    """``Y(phi_lam)`` for lam in Lambda_m, in ``chain.index_set(m)`` order.

    For ``"shells"`` records only the cell containing the record's point is
    observed; the other entries are NaN.
    """
    basis = chain.basis
    layout = record.layout
    if chain.is_extra(m):
        if layout != "atoms":
            raise ValueError("indicator models need a white-noise atoms record")
        a, b = chain.extra_model.interval
        return np.array([_atom_integral(record.geometry, record.data, a, b) / np.sqrt(b - a)])
    if layout == "grid":
        if chain.dimension != 1:
            raise ValueError("regression records are one-dimensional")
        return _regression_coefficients(record.data, basis, m)
    if layout == "sequence":
        geo = record.geometry or {}
        top = geo.get("level")
        if top is None or top < m:
            raise ValueError("sequence record must carry scaling coefficients at a level >= m")
        coeffs = np.asarray(record.data, dtype=float)
        if top > m:
            coeffs = dwt(coeffs, basis, m)[: 2**m]
        return coeffs
    if not basis.is_haar:
        raise ValueError(f"{layout!r} records only carry Haar-type information")
    if layout == "atoms":
        edges = record.geometry
        return np.array([
            _atom_integral(edges, record.data, k / 2**m, (k + 1) / 2**m) * 2 ** (m / 2)
            for k in range(2**m)
        ])
    d = chain.dimension
    if layout == "cells":
        level, rd = record.geometry["level"], record.geometry["dim"]
        if rd != d or level < m:
            raise ValueError("cell record does not resolve this level")
        side, f = 2**level, 2 ** (level - m)
        arr = record.data.reshape((side,) * d)
        for axis in range(d):
            shape = arr.shape[:axis] + (2**m, f) + arr.shape[axis + 1:]
            arr = arr.reshape(shape).sum(axis + 1)
        return arr.reshape(-1) * 2 ** (m * d / 2)
    if layout == "shells":
        geo = record.geometry
        if geo["dim"] != d or geo["level"] < m:
            raise ValueError("shell record does not resolve this level")
        out = np.full(2 ** (m * d), np.nan)
        cell = multid_haar_cell(geo["x0"], m)
        flat = int(np.ravel_multi_index(cell, (2**m,) * d))
        out[flat] = record.data[m:].sum() * 2 ** (m * d / 2)
        return out
    raise ValueError(f"unsupported layout {layout!r}")


# -- projections --------------------------------------------------------------

def truth_grid(depth: int = 16) -> np.ndarray:
    """Midpoints of the 2**depth dyadic cells of [0, 1]."""
    return (np.arange(2**depth) + 0.5) / 2**depth


def projection_norm_sq(g_grid, chain: ModelChain, m: int) -> float:
    """``||pi_{S_m} g||^2`` with inner products by midpoint quadrature."""
    g_grid = np.asarray(g_grid, dtype=float)
    if chain.is_extra(m):
        a, b = chain.extra_model.interval
        t = truth_grid(int(np.log2(g_grid.size)))
        inside = (t > a) & (t <= b)
        return float((g_grid[inside].sum() / g_grid.size) ** 2 / (b - a))
    return float(np.sum(grid_inner_products(g_grid, chain.basis, m) ** 2))


# -- discrete transform -------------------------------------------------------

def dwt(y, basis: BasisFamily, coarse_level: int = 0) -> np.ndarray:
    """Orthonormal periodized DWT of a length-2^J vector (or rows of a matrix).

    Output layout: ``[a_c | d_c | d_{c+1} | ... | d_{J-1}]`` with ``a_c`` the
    2^c scaling coefficients of the coarse level c.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    out = kernels.dwt_periodized(np.ascontiguousarray(np.atleast_2d(y)), np.ascontiguousarray(basis.filter), coarse_level)
    return out[0] if single else out


def idwt(coeffs, basis: BasisFamily, coarse_level: int = 0) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    single = c.ndim == 1
    out = kernels.idwt_periodized(np.ascontiguousarray(np.atleast_2d(c)), np.ascontiguousarray(basis.filter), coarse_level)
    return out[0] if single else out


def export_cascade_csv(basis: BasisFamily, path) -> None:
    """Write the cascade table (columns ``node``, ``phi``) to a CSV file."""
    if basis.is_haar:
        nodes = np.array([0.0, 1.0])
        values = np.array([1.0, 1.0])
    else:
        values = cascade_table(10, basis.cascade_depth)
        nodes = np.arange(len(values)) / 2**basis.cascade_depth
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "phi"])
        for x, v in zip(nodes, values):
            writer.writerow([repr(float(x)), repr(float(v))])
