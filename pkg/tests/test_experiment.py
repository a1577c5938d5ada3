import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logerfdeconv.experiment import (
    MapConfig,
    MapDivergenceError,
    cpm,
    distances,
    joint_equivalent,
    l2_norm_ratio,
    laplacian_band,
    make_phantom,
    map_criterion,
    map_estimate,
    soft_threshold,
    sweep,
    synthesize_data,
)
from logerfdeconv.gibbs import StoppingConfig
from logerfdeconv.lsinit import HyperParams
from logerfdeconv.potential import HuberEquiv, PotentialParams, huber_equiv, huber_potential
from logerfdeconv.rng import derive_rng
from logerfdeconv.spectral import circular_convolve, delta_kernel, gaussian_psf, laplacian_kernel


@pytest.fixture(scope="module")
def phantom():
    return make_phantom(128)


def test_phantom_row_crosses_two_objects(phantom):
    X = phantom.truth
    row = X[int(math.floor(0.78 * 128))]
    runs = np.diff(np.concatenate([[0], (row > 0).astype(int), [0]]))
    assert np.count_nonzero(runs == 1) >= 2
    assert X.min() == 0.0
    assert 0.7 <= X[X > 0].min() and X.max() <= 2.1


def test_phantom_laplacian_is_mostly_tiny(phantom):
    lo, hi, frac = laplacian_band(phantom.truth)
    assert frac >= 0.9
    assert lo < 1e-3 < hi


def test_phantom_scales_and_rejects_small():
    assert make_phantom(64).truth.shape == (64, 64)
    with pytest.raises(ValueError):
        make_phantom(32)


def test_synthesized_noise_variance(phantom):
    H = gaussian_psf(128, 6.0)
    Y = synthesize_data(phantom.truth, H, 4e-4, derive_rng(0, "noise"))
    resid = Y - circular_convolve(H, phantom.truth)
    assert resid.var() == pytest.approx(4e-4, rel=0.05)
    np.testing.assert_array_equal(synthesize_data(phantom.truth, H, 0.0, None), circular_convolve(H, phantom.truth))
    with pytest.raises(ValueError):
        synthesize_data(phantom.truth, H, -1.0, derive_rng(0, "noise"))


def test_distances_definition_and_shift_invariance():
    truth = np.array([[1.0, 2.0], [0.0, 3.0]])
    est = truth + np.array([[1.0, 0.0], [0.0, -1.0]])
    m = distances(est, truth)
    assert m.l2_percent == pytest.approx(100 * 2 / 14)
    assert m.l1_percent == pytest.approx(100 * 2 / 6)
    assert l2_norm_ratio(est, truth) == pytest.approx(100 * math.sqrt(2 / 14))
    assert distances(truth, truth).l2_percent == 0.0
    rng = np.random.default_rng(2)
    X = rng.normal(size=(8, 8))
    E = X + 0.1 * rng.normal(size=(8, 8))
    s = (3, -2)
    a, b = distances(E, X), distances(np.roll(E, s, (0, 1)), np.roll(X, s, (0, 1)))
    assert a.l2_percent == pytest.approx(b.l2_percent, rel=1e-14)
    assert a.l1_percent == pytest.approx(b.l1_percent, rel=1e-14)
    with pytest.raises(ValueError):
        distances(np.zeros((2, 2)), np.zeros((2, 2)))


def test_soft_threshold_against_grid_search():
    rng = np.random.default_rng(3)
    xs = rng.normal(scale=3, size=1000)
    taus = rng.uniform(0, 2, size=1000)
    grid = np.linspace(-15, 15, 300_001)
    for x, t in zip(xs[:200], taus[:200]):
        best = grid[np.argmin((x - grid) ** 2 + 2 * t * np.abs(grid))]
        assert soft_threshold(x, t) == pytest.approx(best, abs=2e-4)
    out = soft_threshold(xs, taus)
    assert np.all(np.abs(out) <= np.abs(xs))


@given(st.floats(-1e6, 1e6), st.floats(0, 1e3))
@settings(max_examples=200, deadline=None)
def test_soft_threshold_properties(x, t):
    b = float(soft_threshold(x, t))
    assert b == 0.0 or abs(x - b) == pytest.approx(t, rel=1e-9, abs=1e-9)
    assert float(soft_threshold(-x, t)) == -b


def test_joint_equivalent_is_min_over_b():
    p = PotentialParams(3.0, 2.0)
    h = joint_equivalent(p)
    assert h.lam == 3.0 and h.s == pytest.approx(p.rho)
    grid = np.linspace(-5, 5, 200_001)
    for x in (-2.0, 0.1, 0.8):
        direct = np.min(p.gamma_d * (x - grid) ** 2 + p.gamma_b * np.abs(grid))
        assert float(huber_potential(x, h)) == pytest.approx(direct, abs=1e-6)


def small_problem(P=32, noise=1e-3, seed=0):
    X = np.zeros((P, P))
    X[8:20, 6:18] = 1.0
    X[20:26, 20:28] = 1.5
    H = gaussian_psf(P, 3.0)
    Y = synthesize_data(X, H, noise, derive_rng(seed, "noise"))
    return X, Y, H


@pytest.mark.parametrize("pot", [PotentialParams(200.0, 20.0), HuberEquiv(50.0, 0.1)])
def test_map_lowers_criterion_and_agrees_with_lbfgs(pot):
    X, Y, H = small_problem()
    hq = map_estimate(Y, H, pot, 1000.0, MapConfig(rtol=1e-12))
    lb = map_estimate(Y, H, pot, 1000.0, method="lbfgs")
    j_hq, j_lb = map_criterion(hq, Y, H, pot, 1000.0), map_criterion(lb, Y, H, pot, 1000.0)
    assert j_hq < map_criterion(Y, Y, H, pot, 1000.0)
    assert abs(j_hq - j_lb) <= 1e-6 * j_hq
    assert distances(hq, X).l2_percent < distances(Y, X).l2_percent


def test_map_no_blur_weak_prior_returns_data():
    P = 16
    Y = np.random.default_rng(5).normal(size=(P, P))
    X = map_estimate(Y, delta_kernel(P), HuberEquiv(1e-9, 1.0), 1.0, MapConfig(rtol=1e-14))
    np.testing.assert_allclose(X, Y, atol=1e-7)


def test_map_rejects_unknown_method_and_singular_step():
    X, Y, H = small_problem(P=16)
    with pytest.raises(ValueError):
        map_estimate(Y, H, HuberEquiv(1.0, 1.0), 1.0, method="newton")
    with pytest.raises(ArithmeticError):
        map_estimate(Y, laplacian_kernel(16), HuberEquiv(1.0, 1.0), 1.0)


def test_map_divergence_error_is_arithmetic():
    assert issubclass(MapDivergenceError, ArithmeticError)


def test_cpm_and_sweep_share_stream():
    X, Y, H = small_problem()
    g = HyperParams(1000.0, 200.0, 20.0)
    stop = StoppingConfig(T=1e-4, log_every=0)
    a = cpm(Y, H, g, stop, derive_rng(9, "cpm"))
    rows = sweep(Y, H, X, g, "gb", (0.5, 1.0), stop, 9)
    assert rows[1][1:4] == g.as_tuple()
    assert rows[0][3] == 10.0
    m = distances(a, X)
    assert rows[1][4] == m.l2_percent and rows[1][5] == m.l1_percent


def test_huber_threshold_splits_band_for_reasonable_gamma(phantom):
    lo, hi, _ = laplacian_band(phantom.truth)
    s = huber_equiv(PotentialParams(1000.0, 20.0)).s
    assert lo < s < hi
