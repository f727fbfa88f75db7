import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lifsel.observation import NoiseModel, regression_grid, simulate_regression
from lifsel.signals import s1
from lifsel.wavelets import (
    D20,
    HAAR,
    BasisFamily,
    BasisKind,
    ModelChain,
    daubechies_filter,
    dwt,
    empirical_coefficients,
    export_cascade_csv,
    grid_inner_products,
    haar_cell_index,
    idwt,
    multid_haar_cell,
    projection_norm_sq,
    scaling_eval,
    truth_grid,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_d20_filter():
    h = daubechies_filter(10)
    assert h.size == 20
    assert h[0] == pytest.approx(0.026670057900555554, abs=1e-14)
    assert h.sum() == pytest.approx(np.sqrt(2), abs=1e-13)
    for shift in range(0, 20, 2):
        assert h[: 20 - shift] @ h[shift:] == pytest.approx(1.0 if shift == 0 else 0.0, abs=1e-12)
    g = h[::-1] * (-1.0) ** np.arange(20)
    k = np.arange(20.0)
    for p in range(10):
        assert abs(g @ k**p) < 1e-6 * 20**p


def test_basis_validation():
    with pytest.raises(ValueError):
        BasisFamily(BasisKind.HAAR_1D, dimension=2)
    with pytest.raises(ValueError):
        BasisFamily(BasisKind.DAUBECHIES20_1D, cascade_depth=8)
    assert HAAR.label == "H" and D20.label == "D20"


def test_haar_scaling_examples():
    for x in (0.0, 0.2, 0.5, 0.999):
        assert scaling_eval(HAAR, 0, 0, x) == 1.0
    assert scaling_eval(HAAR, 3, 2, 0.3) == pytest.approx(2**1.5)
    with pytest.raises(IndexError):
        scaling_eval(HAAR, 3, 8, 0.3)


def test_d20_cascade_self_consistency():
    a = scaling_eval(BasisFamily(BasisKind.DAUBECHIES20_1D, cascade_depth=12), 4, 5, 0.4)
    b = scaling_eval(BasisFamily(BasisKind.DAUBECHIES20_1D, cascade_depth=14), 4, 5, 0.4)
    assert abs(a - b) < 1e-4


def test_multid_cell_examples():
    assert multid_haar_cell((0.0, 0.0, 0.0), 4) == (0, 0, 0)
    assert multid_haar_cell((0.3, 0.7), 2) == (1, 2)
    assert multid_haar_cell((1.0,), 3) == (7,)
    assert int(haar_cell_index(1.0, 3)) == 7


@given(st.floats(0, 1), st.integers(0, 10))
def test_haar_cell_contains_point(x, m):
    k = int(haar_cell_index(x, m))
    assert 0 <= k < 2**m
    if x > 0:
        assert k / 2**m < x <= (k + 1) / 2**m + 1e-15


def test_chain_shapes():
    chain = ModelChain.dyadic(HAAR, 8)
    assert chain.models == tuple(range(1, 9))
    assert chain.size(5) == 32
    c2 = ModelChain.dyadic(BasisFamily(BasisKind.HAAR_MULTID, dimension=2), 3)
    assert c2.size(3) == 64 and len(c2.index_set(2)) == 16
    with pytest.raises(ValueError):
        ModelChain(HAAR, (2, 1))
    ind = ModelChain.with_indicator((0.0, 1 / 8))
    assert ind.levels == (0, 1, 2, 3) and ind.models[-1] == 4 and ind.is_extra(4)
    assert ind.is_nested(3, 1) and not ind.is_nested(4, 2)
    with pytest.raises(ValueError):
        ModelChain(D20, (1, 2), ind.extra_model)


def test_empirical_coefficients_haar_examples():
    n = 64
    rec = simulate_regression(s1, NoiseModel.regression(n, 0.0), 0, 0)
    rec_c = type(rec)(rec.model, np.full(n, 3.0), 0, 0)
    chain = ModelChain.dyadic(HAAR, 6)
    for m in (1, 3, 6):
        assert np.allclose(empirical_coefficients(rec_c, chain, m), 3.0 * 2 ** (-m / 2))
    c1 = empirical_coefficients(rec, chain, 1)
    assert c1[0] == pytest.approx(2**-0.5 * rec.data[: n // 2].mean())
    with pytest.raises(ValueError):
        empirical_coefficients(rec, ModelChain.dyadic(HAAR, 7), 7)


def test_d20_empirical_vs_quadrature():
    n = 256
    rec = simulate_regression(s1, NoiseModel.regression(n, 0.0), 0, 0)
    chain = ModelChain.dyadic(D20, 5)
    truth = grid_inner_products(s1(truth_grid(16)), D20, 5)
    for m in range(1, 6):
        emp = empirical_coefficients(rec, chain, m)
        ref = grid_inner_products(s1(truth_grid(16)), D20, m)
        assert np.max(np.abs(emp - ref)) < 1e-3
    assert truth.shape == (32,)


def test_projection_norm_examples():
    t = truth_grid(16)
    chain = ModelChain.dyadic(HAAR, 8)
    for m in (1, 4, 8):
        assert projection_norm_sq(np.ones_like(t), chain, m) == pytest.approx(1.0, abs=1e-12)
    g1 = np.cos(64 * np.pi * t)
    for m in range(1, 6):
        assert projection_norm_sq(g1, chain, m) < 1e-10
    g = 4.0 * (t <= 0.25)
    assert projection_norm_sq(g, chain, 2) == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("basis", [HAAR, D20])
def test_projection_norm_monotone_and_bounded(basis):
    t = truth_grid(14)
    g = np.exp(-5 * t) * np.sin(9 * t)
    chain = ModelChain.dyadic(basis, 8)
    norms = [projection_norm_sq(g, chain, m) for m in chain.levels]
    assert all(b >= a - 1e-10 for a, b in zip(norms, norms[1:]))
    assert norms[-1] <= np.mean(g**2) + 1e-10


@pytest.mark.parametrize("basis,tol", [(HAAR, 1e-12), (D20, 1e-6)])
def test_orthonormality(basis, tol):
    t = truth_grid(16)
    m = 4
    Phi = scaling_eval(basis, m, np.arange(2**m)[:, None], t[None, :])
    G = Phi @ Phi.T / t.size
    assert np.max(np.abs(G - np.eye(2**m))) < tol


def test_haar_nesting_idempotence():
    rng = np.random.default_rng(1)
    y = rng.normal(size=256)

    def proj(v, m):
        b = v.reshape(2**m, -1)
        return np.repeat(b.mean(1), b.shape[1])

    for m in range(1, 8):
        for j in range(m, 9):
            assert np.allclose(proj(proj(y, m), j), proj(y, m), atol=1e-8)


@given(arrays(float, 64, elements=finite), st.integers(0, 6))
def test_dwt_haar_parseval_and_inverse(y, coarse):
    c = dwt(y, HAAR, coarse)
    assert np.sum(c**2) == pytest.approx(np.sum(y**2), rel=1e-10, abs=1e-10)
    assert np.allclose(idwt(c, HAAR, coarse), y, atol=1e-10)


@given(arrays(float, 128, elements=finite), st.integers(0, 7))
def test_dwt_d20_orthonormal(y, coarse):
    c = dwt(y, D20, coarse)
    assert np.sum(c**2) == pytest.approx(np.sum(y**2), rel=1e-9, abs=1e-9)
    assert np.allclose(idwt(c, D20, coarse), y, atol=1e-9)


def test_dwt_scaling_coefficients_are_block_sums():
    y = np.arange(16.0)
    c = dwt(y, HAAR, 2)
    assert np.allclose(c[:4], y.reshape(4, 4).sum(1) / 2)


def test_export_cascade(tmp_path):
    path = tmp_path / "phi.csv"
    export_cascade_csv(BasisFamily(BasisKind.DAUBECHIES20_1D, cascade_depth=10), path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["node", "phi"]
    nodes = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([float(r[1]) for r in rows[1:]])
    assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(19.0)
    assert vals.sum() / 2**10 == pytest.approx(1.0, abs=1e-6)
    assert regression_grid(4)[-1] == 1.0
