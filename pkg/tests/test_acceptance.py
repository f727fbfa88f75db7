"""Acceptance suite: table reproduction, variance and concentration checks,
rate slopes, regime switch, degenerate cases and determinism.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per criterion
as it finishes; the same lines are repeated in the terminal summary.
"""
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lifsel import harness, kernels
from lifsel.cli import main
from lifsel.config import ExperimentConfig, load_config, parse_functional
from lifsel.functionals import FunctionalSpec, build_functional_rep
from lifsel.observation import NoiseModel, simulate_white_noise_batch
from lifsel.selector import crit_hat, default_weights_sim41, penalty_tables, select_m_hat
from lifsel.signals import Signal, get_signal, piecewise_signal
from lifsel.wavelets import D20, HAAR, ModelChain, haar_cell_index, scaling_matrix

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# reference values, 100 * r_hat: {(signal, point): {basis: (P1, P2, P3)}}
POINTWISE = {
    ("s1", "1/4"): {"H": (5.6, 3.2, 14.9), "D20": (5.4, 5.4, 5.8)},
    ("s1", "1/3"): {"H": (4.5, 4.0, 7.4), "D20": (2.6, 3.0, 3.0)},
    ("s1", "1/2"): {"H": (4.2, 6.9, 11.3), "D20": (6.5, 6.5, 2.0)},
    ("s1", "3/4"): {"H": (5.7, 8.0, 16.9), "D20": (6.6, 6.6, 7.5)},
    ("s2", "1/8"): {"H": (3.8, 6.3, 3.2), "D20": (6.8, 5.1, 5.6)},
    ("s2", "1/4"): {"H": (23.3, 27.8, 30.4), "D20": (20.8, 23.3, 35.8)},
    ("s2", "1/3"): {"H": (4.7, 6.3, 4.8), "D20": (6.1, 6.5, 9.7)},
    ("s2", "1/2"): {"H": (3.5, 6.1, 3.0), "D20": (6.8, 5.0, 6.7)},
    ("s3", "1/4"): {"H": (5.9, 7.9, 5.9), "D20": (3.4, 5.2, 4.9)},
    ("s3", "1/3"): {"H": (5.2, 8.0, 5.0), "D20": (4.9, 6.3, 6.1)},
    ("s3", "1/2"): {"H": (8.0, 7.9, 9.9), "D20": (3.6, 5.1, 6.3)},
    ("s3", "7/8"): {"H": (7.5, 8.2, 8.1), "D20": (5.2, 5.2, 7.1)},
}

# {(signal, label): (P1, P2, P3, P4)}
INTEGRALS = {
    ("s1", "[0,1/4]"): (2.1, 2.0, 3.5, 2.0),
    ("s2", "[0,1/4]"): (1.7, 2.1, 1.4, 2.1),
    ("s3", "[0,1/4]"): (2.9, 2.0, 2.0, 2.0),
    ("s1", "[0,1/32]"): (4.6, 4.2, 9.3, 5.7),
    ("s2", "[0,1/32]"): (3.3, 5.7, 2.6, 5.7),
    ("s3", "[0,1/32]"): (4.4, 5.7, 4.4, 5.7),
    ("s1", "[0,1/128]"): (4.7, 4.1, 9.4, 11.2),
    ("s2", "[0,1/128]"): (3.4, 6.2, 2.6, 11.3),
    ("s3", "[0,1/128]"): (5.3, 8.1, 5.4, 11.2),
}
G_TABLES = {
    ("s1", "g1"): (2.09e-3, 2.24e-3, 2.71e-2, 0.7),
    ("s2", "g1"): (0.29, 0.30, 0.28, 0.72),
    ("s3", "g1"): (0.36, 0.30, 0.31, 0.74),
    ("s1", "g2"): (2.86, 2.86, 2.86, 2.88),
    ("s2", "g2"): (0.77, 0.72, 1.00, 0.72),
    ("s3", "g2"): (0.71, 0.71, 0.56, 0.72),
}
PROCS = ("P1", "P2", "P3", "P4")


def _by_key(rows):
    return {(r.procedure, r.signal, r.basis, r.point): 100.0 * r.r_hat for r in rows}


@pytest.fixture(scope="module")
def pointwise():
    return _by_key(harness.run_benchmark(load_config(CONFIGS / "pointwise.ini")))


@pytest.fixture(scope="module")
def integrals():
    return _by_key(harness.run_benchmark(load_config(CONFIGS / "integrals.ini")))


def _summary(misses, total):
    head = f"{total - len(misses)}/{total} cells within tolerance"
    return head if not misses else head + "; off: " + ", ".join(misses)


def _absolute(got, ref, tol, tag, misses):
    if abs(got - ref) > tol:
        misses.append(f"{tag} {got:.2f} vs {ref}")


def _relative(got, ref, tol, tag, misses):
    if abs(got - ref) > tol * abs(ref):
        misses.append(f"{tag} {got:.3g} vs {ref} ({100 * (got / ref - 1):+.0f}%)")


# -- table reproduction -----------------------------------------------------------

def test_criterion_1_haar_p1_pointwise(pointwise, report_criterion):
    misses = []
    for (sig, pt), ref in POINTWISE.items():
        _absolute(pointwise[("P1", sig, "H", pt)], ref["H"][0], 1.5, f"{sig}@{pt}", misses)
    assert report_criterion(1, not misses, _summary(misses, len(POINTWISE)))


def test_criterion_2_haar_p2_p3_pointwise(pointwise, report_criterion):
    # the reproduction config uses keep_coarse_level = 1, so P3 gets the wider bound
    misses = []
    for (sig, pt), ref in POINTWISE.items():
        _absolute(pointwise[("P2", sig, "H", pt)], ref["H"][1], 1.5, f"P2 {sig}@{pt}", misses)
        _absolute(pointwise[("P3", sig, "H", pt)], ref["H"][2], 2.5, f"P3 {sig}@{pt}", misses)
    assert report_criterion(2, not misses, _summary(misses, 2 * len(POINTWISE)))


def test_criterion_3_d20_pointwise(pointwise, report_criterion):
    misses = []
    for (sig, pt), ref in POINTWISE.items():
        for i, proc in enumerate(PROCS[:3]):
            _relative(pointwise[(proc, sig, "D20", pt)], ref["D20"][i], 0.30, f"{proc} {sig}@{pt}", misses)
    assert report_criterion(3, not misses, _summary(misses, 3 * len(POINTWISE)))


def test_criterion_4_integral_tables(integrals, report_criterion):
    misses, total = [], 0
    for (sig, label), ref in INTEGRALS.items():
        for i, proc in enumerate(PROCS[:3]):
            _absolute(integrals[(proc, sig, "H", label)], ref[i], 1.5, f"{proc} {sig} {label}", misses)
            total += 1
    closed = 100 * 0.2 * np.sqrt(2 / (np.pi * 256 / 128))
    for sig in ("s1", "s2", "s3"):
        _absolute(integrals[("P4", sig, "none", "[0,1/128]")], closed, 0.5, f"P4 {sig} closed form", misses)
        total += 1
    for (sig, g), ref in G_TABLES.items():
        for i, proc in enumerate(PROCS):
            basis = "none" if proc == "P4" else "H"
            _relative(integrals[(proc, sig, basis, g)], ref[i], 0.30, f"{proc} {sig} {g}", misses)
            total += 1
    assert report_criterion(4, not misses, _summary(misses, total))


def test_criterion_5_modal_level_higher_at_peak(report_criterion):
    hist = harness.level_histogram(load_config(CONFIGS / "histogram.ini"))
    peak = hist[("P1", "H", "s2", "1/4")]
    flat = hist[("P1", "H", "s2", "1/2")]
    mode_peak = max(peak, key=peak.get)
    mode_flat = max(flat, key=flat.get)
    ok = mode_peak > mode_flat
    assert report_criterion(5, ok, f"modal level {mode_peak} at 1/4 vs {mode_flat} at 1/2")


# -- variance identities ----------------------------------------------------------

def _atom_operator(spec, chain, n_atoms):
    """Rows mapping white-noise atom observations to each model's estimate."""
    edges = np.arange(n_atoms + 1) / n_atoms
    if chain.extra_model is not None:
        edges = np.union1d(edges, chain.extra_model.interval)
    mids = 0.5 * (edges[:-1] + edges[1:])
    rep = build_functional_rep(spec, chain, NoiseModel.white_noise(256, 0.2))
    A = np.zeros((len(chain.models), mids.size))
    for pos, m in enumerate(chain.models):
        v = rep.values[m]
        if chain.is_extra(m):
            a, b = chain.extra_model.interval
            A[pos] = ((mids > a) & (mids <= b)) * v[0] / np.sqrt(b - a)
        elif chain.basis.is_haar:
            A[pos] = v[haar_cell_index(mids, m)] * 2 ** (m / 2)
        else:
            A[pos] = v @ scaling_matrix(chain.basis, m, mids)
    return rep, edges, A


def _mc_estimates(signal, A, edges, R, seed, sigma=0.2, n=256):
    model = NoiseModel.white_noise(n, sigma)
    out = []
    for start in range(0, R, 5000):
        _, data = simulate_white_noise_batch(signal, model, edges[1:-1], seed, range(start, min(R, start + 5000)))
        out.append(data @ A.T)
    return np.vstack(out)


def _var_and_se(x):
    c = x - x.mean()
    v = float(np.mean(c**2))
    return v, float(np.sqrt((np.mean(c**4) - v**2) / x.size))


VARIANCE_CASES = [
    ("point:1/4", HAAR, 256),
    ("point:1/3", HAAR, 256),
    ("interval:0:1/32", HAAR, 256),
    ("g:g1", HAAR, 256),
    ("g:g2", HAAR, 256),
    ("point:1/2", D20, 1024),
    ("g:g2", D20, 1024),
    ("interval:0:1/4", D20, 1024),
    ("indicator:0.3", None, 256),
    ("indicator:0.1", None, 256),
    ("indicator:0.05", None, 256),
]


def test_criterion_6_variance_identities(report_criterion):
    rng = np.random.default_rng(6)
    misses, checked = [], 0
    for case, (token, basis, atoms) in enumerate(VARIANCE_CASES):
        if basis is None:
            H = float(token.split(":")[1])
            chain = ModelChain.with_indicator((0.0, H))
            spec = FunctionalSpec.interval_mean(0.0, H)
        else:
            chain = ModelChain.dyadic(basis, 8 if basis.is_haar else 5)
            spec = parse_functional(token)
        rep, edges, A = _atom_operator(spec, chain, atoms)
        E = _mc_estimates(get_signal("s2"), A, edges, 100_000, seed=100 + case)
        M = len(chain.models)
        if basis is None:
            a, b = M - 1, int(rng.integers(0, M - 1))  # indicator against a Haar level
        else:
            a, b = sorted(rng.choice(M, 2, replace=False))[::-1]
        for label, series, target in [
            (f"sigma_m^2 m={chain.models[b]}", E[:, b], rep.sigma_sq[b]),
            (f"sigma_jm^2 ({chain.models[a]},{chain.models[b]})", E[:, a] - E[:, b], rep.sigma_diff_sq[a, b]),
        ]:
            v, se = _var_and_se(series)
            checked += 1
            if abs(v - target) > 4 * se:
                misses.append(f"{token}/{basis.label if basis else 'indicator'} {label}: "
                              f"{v:.4g} vs {target:.4g} ({abs(v - target) / se:.1f} SE)")
    ok = not misses and len(VARIANCE_CASES) >= 10
    assert report_criterion(6, ok, f"{checked - len(misses)}/{checked} variances within 4 SE"
                            + ("" if not misses else "; off: " + "; ".join(misses)))


# -- concentration --------------------------------------------------------------

CONCENTRATION_POINTS = {"s1": 1 / 2, "s2": 1 / 4, "s3": 1 / 3}
X_GRID = (1e-4, 1e-3, 3e-3, 1e-2, 3e-2)


def test_criterion_7_concentration(report_criterion):
    R = 10_000
    chain = ModelChain.dyadic(HAAR, 8)
    weights = default_weights_sim41(chain)
    misses, checked = [], 0
    for case, (name, x0) in enumerate(CONCENTRATION_POINTS.items()):
        spec = FunctionalSpec.point(x0)
        rep, edges, A = _atom_operator(spec, chain, 256)
        signal = get_signal(name)
        _, means = simulate_white_noise_batch(signal, NoiseModel.white_noise(256, 0.0), edges[1:-1], 0, [0])
        T_m = A @ means[0]
        pen, Hb = penalty_tables(rep, weights)
        E = _mc_estimates(signal, A, edges, R, seed=700 + case)
        _, crit = kernels.crit_select(E, np.ascontiguousarray(Hb), pen, 0.0)
        M = len(chain.models)
        for m in range(M):
            crit_true = np.max(np.abs(T_m[m:] - T_m[m])) + pen[m]
            sd2 = rep.sigma_diff_sq[m + 1:, m]
            for x in X_GRID:
                freq = float(np.mean(crit[:, m] > crit_true + np.sqrt(2 * x)))
                bound = float(np.sum(np.exp(-weights.x_jm[m + 1:, m]) * np.exp(-x / sd2)))
                se = np.sqrt(freq * (1 - freq) / R)
                checked += 1
                if freq > bound + 3 * se:
                    misses.append(f"{name} m={chain.models[m]} x={x}: {freq:.4f} > {bound:.4f}")
    assert report_criterion(7, not misses, f"{checked - len(misses)}/{checked} (signal, m, x) exceedances under the bound"
                            + ("" if not misses else "; off: " + "; ".join(misses[:6])))


# -- rates and regime switch ------------------------------------------------------

def test_criterion_8_rate_slopes(report_criterion):
    r1 = load_config(CONFIGS / "rates.ini").rates
    r2 = load_config(CONFIGS / "rates2d.ini").rates
    s1, se1, _ = harness.rate_slope(r1.signal, r1.functional, r1.n_list, replicates=r1.replicates, seed=2008)
    s2, se2, _ = harness.rate_slope(r2.signal, r2.functional, r2.n_list, replicates=r2.replicates, seed=2008)
    t1, t2 = 0.5 / 2, 0.5 / 3
    ok = abs(s1 - t1) <= 0.07 and abs(s2 - t2) <= 0.10
    assert report_criterion(8, ok, f"d=1 slope {s1:.3f} (target {t1:.3f} +-0.07), "
                                   f"d=2 slope {s2:.3f} (target {t2:.3f} +-0.10)")


def test_criterion_9_indicator_regime(report_criterion):
    n = 256
    lipschitz = Signal("lin2", lambda x: 2.0 * x)
    threshold = (0.2**2 * np.log(n) / (n * 2.0**2)) ** (1 / 3)
    assert 0.25 >= threshold
    wide = harness.indicator_frequency(lipschitz, 0.25, n, replicates=5000, seed=9)
    narrow = harness.indicator_frequency(lipschitz, n ** -0.9, n, replicates=5000, seed=9)
    ok = wide > 0.5 and narrow < 0.5
    assert report_criterion(9, ok, f"indicator chosen {wide:.3f} at H=1/4, {narrow:.3f} at H=n^-0.9")


# -- degenerate suite -------------------------------------------------------------

QUARTERS = piecewise_signal("quarters", ["[0, 1/4] : 1", "(1/4, 1/2] : 3", "(1/2, 3/4] : -1", "(3/4, 1] : 2"])
EIGHTHS = piecewise_signal("eighths", [f"({k}/8, {k + 1}/8] : {(-1) ** k * (k + 1) / 4}" if k else "[0, 1/8] : 0.25"
                                       for k in range(8)])


def _noiseless_errors():
    worst = 0.0
    for sig in (QUARTERS, EIGHTHS):
        funcs = tuple(parse_functional(t) for t in ("point:1/3", "point:5/8", "point:1", "interval:0:1/4",
                                                    "interval:1/8:3/4", "interval:0:1/128"))
        cfg = ExperimentConfig(signals=(sig.name,), functionals=funcs, bases=(HAAR,), procedures=PROCS,
                               n=256, sigma=0.0, replicates=3, custom_signals={sig.name: sig})
        for row in harness.run_benchmark(cfg):
            worst = max(worst, row.r_hat)
    return worst


@settings(max_examples=200)
@given(est=arrays(float, st.integers(1, 10), elements=st.floats(-1e3, 1e3)),
       data=st.data())
def _fuzz_crit(est, data):
    M = est.size
    H = data.draw(arrays(float, (M, M), elements=st.floats(0, 1e3)))
    np.fill_diagonal(H, 0.0)  # H(m, m) = sqrt(2 x_mm) sigma_mm = 0
    pen = data.draw(arrays(float, M, elements=st.floats(0, 1e3)))
    crit = crit_hat(est, H, pen)
    assert np.all(crit >= pen - 1e-9)
    n = data.draw(st.integers(1, 10**6))
    pos = select_m_hat(crit, n)
    within = np.flatnonzero(crit <= crit.min() + 1.0 / n)
    assert pos == within[0]


def test_criterion_10_degenerate_suite(report_criterion):
    worst = _noiseless_errors()
    fuzz_ok = True
    try:
        _fuzz_crit()
    except AssertionError:
        fuzz_ok = False
    ok = worst <= 1e-10 and fuzz_ok
    assert report_criterion(10, ok, f"max noiseless error {worst:.1e}; fuzzed crit/selection checks "
                                    f"{'held' if fuzz_ok else 'failed'}")


# -- determinism ------------------------------------------------------------------

def test_criterion_11_thread_count_determinism(tmp_path, report_criterion):
    cfg = CONFIGS / "pointwise.ini"
    assert main(["benchmark", str(cfg), "--threads", "1", "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["benchmark", str(cfg), "--threads", "3", "--output-dir", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.csv").read_bytes()
    b = (tmp_path / "b" / "report.csv").read_bytes()
    assert report_criterion(11, a == b, f"report.csv {'identical' if a == b else 'differs'} across 1 and 3 threads")
