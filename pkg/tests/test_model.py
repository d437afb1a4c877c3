import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedrank.config import (
    FlatHighlighting,
    HeterogeneousBenchmark,
    NonFlatHighlighting,
    baseline_config,
)
from feedrank.model import (
    Agent,
    ItemSet,
    WorldResampleError,
    click_probabilities,
    highlight_probability,
    propensity_absent_ranking,
    sample_item_set,
    sample_world,
    wants_highlight,
)


def _items(n_plus, n_minus, rng=None):
    rng = rng or np.random.default_rng(0)
    y = np.concatenate([1.0 + rng.random(n_plus), -1.0 - rng.random(n_minus)])
    sign = np.where(y >= 0, 1, -1).astype(np.int8)
    return ItemSet(y=y, sign=sign, m_minus=n_minus, m_plus=n_plus)


def _agent(sign=1, click_type="C", active=True, x=None):
    x = x if x is not None else (1.2 if sign > 0 else -1.2)
    return Agent(x=x, sign=sign, click_type=click_type, active=active, theta_hat_n=0.0)


# ---------------------------------------------------------------------------
# ranking-free propensities
# ---------------------------------------------------------------------------

def test_propensity_confirmatory_match():
    cfg = baseline_config()  # gamma_C = 0.8
    phi = propensity_absent_ranking(_agent(sign=1, click_type="C"), _items(10, 10), cfg)
    assert phi[0] == pytest.approx(0.08)
    assert phi.sum() == pytest.approx(1.0, abs=1e-9)


def test_propensity_indifferent_uniform():
    cfg = baseline_config()
    phi = propensity_absent_ranking(_agent(click_type="I"), _items(10, 10), cfg)
    assert np.allclose(phi, 0.05)


def test_propensity_exploratory_mismatch():
    cfg = baseline_config()  # gamma_E = 0.4
    phi = propensity_absent_ranking(_agent(sign=1, click_type="E"), _items(10, 10), cfg)
    # mismatching (negative-sign) items carry (1 - 0.4) / 10
    assert phi[10] == pytest.approx(0.06)


@given(
    n_plus=st.integers(1, 12),
    n_minus=st.integers(1, 12),
    click_type=st.sampled_from(["C", "E", "I"]),
    sign=st.sampled_from([-1, 1]),
)
@settings(deadline=None, max_examples=60)
def test_propensity_sums_to_one(n_plus, n_minus, click_type, sign):
    cfg = baseline_config()
    phi = propensity_absent_ranking(
        _agent(sign=sign, click_type=click_type), _items(n_plus, n_minus), cfg
    )
    assert phi.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(phi >= 0)


# ---------------------------------------------------------------------------
# position-biased click probabilities
# ---------------------------------------------------------------------------

def test_click_probabilities_two_items():
    rho = click_probabilities(np.array([0.5, 0.5]), np.array([1, 2]), beta=1.25)
    assert rho == pytest.approx([0.5556, 0.4444], abs=1e-4)
    assert rho.sum() == pytest.approx(1.0, abs=1e-9)


def test_click_probabilities_beta_to_one():
    phi = np.array([0.1, 0.5, 0.4])
    rho = click_probabilities(phi, np.array([3, 1, 2]), beta=1.0 + 1e-12)
    assert rho == pytest.approx(phi / phi.sum(), abs=1e-9)


def test_click_probabilities_three_items():
    rho = click_probabilities(np.array([0.2, 0.3, 0.5]), np.array([3, 2, 1]), beta=2.0)
    assert rho == pytest.approx([0.2 / 2.8, 0.6 / 2.8, 2.0 / 2.8], abs=1e-9)
    assert rho == pytest.approx([0.0714, 0.2143, 0.7143], abs=1e-4)


def test_click_probabilities_scale_invariant(rng):
    phi = rng.random(8) + 0.01
    ranks = rng.permutation(8) + 1
    a = click_probabilities(phi, ranks, 1.3)
    b = click_probabilities(phi * 17.0, ranks, 1.3)
    assert a == pytest.approx(b, rel=1e-12)


def test_click_probabilities_symmetry_on_equal_phi():
    # swapping the ranks of two items with equal phi swaps their rho exactly
    phi = np.array([0.25, 0.25, 0.5])
    r1 = click_probabilities(phi, np.array([1, 2, 3]), 1.5)
    r2 = click_probabilities(phi, np.array([2, 1, 3]), 1.5)
    assert r1[0] == r2[1] and r1[1] == r2[0] and r1[2] == r2[2]


def test_click_probabilities_rejects_bad_ranks():
    with pytest.raises(ValueError):
        click_probabilities(np.array([0.5, 0.5]), np.array([1, 3]), 1.25)


# ---------------------------------------------------------------------------
# highlighting
# ---------------------------------------------------------------------------

def test_highlight_probability_flat_constant():
    flat = baseline_config(highlight_mode=FlatHighlighting(0.37))
    assert highlight_probability(0.0, flat) == 0.37
    assert highlight_probability(99.0, flat) == 0.37


def test_highlight_probability_at_center_is_zero():
    cfg = baseline_config()
    assert highlight_probability(cfg.theta_hat, cfg) == 0.0


def test_highlight_probability_alpha_one():
    cfg = baseline_config(highlight_mode=NonFlatHighlighting(alpha=1.0))
    # one sigma_x from the benchmark
    assert highlight_probability(cfg.sigma_x, cfg) == pytest.approx(1 - math.exp(-0.5))
    assert highlight_probability(cfg.sigma_x, cfg) == pytest.approx(0.39347, abs=1e-5)


def test_highlight_probability_alpha_four():
    cfg = baseline_config()  # alpha = 4
    assert highlight_probability(cfg.sigma_x, cfg) == pytest.approx(1 - math.exp(-0.125))
    assert highlight_probability(cfg.sigma_x, cfg) == pytest.approx(0.11750, abs=1e-5)


def test_highlight_probability_center_on_truth():
    cfg = baseline_config(theta=2.0, theta_hat=0.0,
                          highlight_mode=NonFlatHighlighting(alpha=4.0, center="Truth"))
    assert highlight_probability(2.0, cfg) == 0.0
    assert highlight_probability(0.0, cfg) > 0.0


@given(st.floats(-20, 20))
@settings(deadline=None, max_examples=80)
def test_highlight_probability_even_bounded(x):
    cfg = baseline_config()
    p = highlight_probability(x, cfg)
    # strictly below 1 mathematically; exp underflow rounds the far tail up
    assert 0.0 <= p <= 1.0
    if abs(x) <= 2.0 * cfg.sigma_x:
        assert p < 1.0
    assert p == pytest.approx(highlight_probability(-x, cfg), rel=1e-12, abs=1e-12)


def test_highlight_probability_monotone_in_distance():
    cfg = baseline_config()
    xs = np.linspace(0.0, 15.0, 200)
    ps = [highlight_probability(float(x), cfg) for x in xs]
    assert all(b >= a - 1e-15 for a, b in zip(ps, ps[1:]))


def test_wants_highlight_boundaries():
    cfg = baseline_config()
    active = _agent(active=True, x=1.0)
    assert wants_highlight(active, 1.0, cfg.sigma_x)  # zero distance
    assert wants_highlight(active, 1.0 + cfg.sigma_x / 2, cfg.sigma_x)  # closed boundary
    assert not wants_highlight(active, 1.0 + cfg.sigma_x / 2 + 1e-9, cfg.sigma_x)
    passive = _agent(active=False, x=1.0)
    assert not wants_highlight(passive, 1.0, cfg.sigma_x)


# ---------------------------------------------------------------------------
# world sampling
# ---------------------------------------------------------------------------

def test_item_moments_large_m(rng):
    cfg = baseline_config(M=100_000, N=1, T=1, window=1)
    items = sample_item_set(cfg, rng)
    m = cfg.M
    se_mean = cfg.sigma_y / math.sqrt(m)
    assert abs(items.y.mean() - cfg.theta) < 3 * se_mean
    se_var = cfg.sigma_y**2 * math.sqrt(2.0 / (m - 1))
    assert abs(items.y.var() - cfg.sigma_y**2) < 3 * se_var
    assert items.m_minus + items.m_plus == m
    assert np.array_equal(items.sign, np.where(items.y >= cfg.theta_hat, 1, -1))


def test_sample_world_deterministic():
    cfg = baseline_config(N=10, T=1, window=10)
    items1, agents1 = sample_world(cfg, np.random.default_rng(5))
    items2, agents2 = sample_world(cfg, np.random.default_rng(5))
    assert np.array_equal(items1.y, items2.y)
    a1 = list(itertools.islice(agents1, 5))
    a2 = list(itertools.islice(agents2, 5))
    assert a1 == a2


def test_heterogeneous_sigma_zero_matches_common():
    common = baseline_config(N=10, T=1, window=10)
    het = common.replace(benchmark_mode=HeterogeneousBenchmark(sigma_theta_hat=0.0))
    _, agents_c = sample_world(common, np.random.default_rng(7))
    _, agents_h = sample_world(het, np.random.default_rng(7))
    assert list(itertools.islice(agents_c, 8)) == list(itertools.islice(agents_h, 8))


def test_heterogeneous_agents_have_own_benchmarks():
    cfg = baseline_config(N=10, T=1, window=10,
                          benchmark_mode=HeterogeneousBenchmark(sigma_theta_hat=0.75))
    _, agents = sample_world(cfg, np.random.default_rng(7))
    sample = list(itertools.islice(agents, 20))
    benchmarks = {a.theta_hat_n for a in sample}
    assert len(benchmarks) == 20
    assert all(a.sign == (1 if a.x >= a.theta_hat_n else -1) for a in sample)


def test_resample_exhaustion_is_fatal(rng):
    cfg = baseline_config(theta_hat=1e6, M=5, N=1, T=1, window=1)
    with pytest.raises(WorldResampleError):
        sample_item_set(cfg, rng)


def test_degenerate_sets_resampled(rng):
    # theta_hat far enough that single draws are often one-sided, close
    # enough that resampling succeeds
    cfg = baseline_config(theta_hat=5.0, M=5, N=1, T=1, window=1)
    for _ in range(50):
        items = sample_item_set(cfg, rng)
        assert items.m_minus >= 1 and items.m_plus >= 1


def test_active_frequency_matches_quadrature(rng):
    # empirical highlight-type frequency over 1e6 agents vs the quadrature
    # of p_A(x) f(x); formulas tied to highlight_probability by spot checks
    from feedrank.analytic import AnalyticModel, _gl_rule, _norm_pdf

    cfg = baseline_config()
    model = AnalyticModel.from_config(cfg, zeta0=20.0, zeta1=100.0)
    for x in (-4.0, -1.0, 0.0, 2.5, 7.0):
        assert model.p_active(np.array([x]))[0] == pytest.approx(
            highlight_probability(x, cfg), rel=1e-12, abs=1e-12
        )

    nodes, weights = _gl_rule(801)
    half = 8.0 * cfg.sigma_x
    xs = cfg.theta + half * nodes
    expected = half * float(
        np.dot(weights, model.p_active(xs) * _norm_pdf(xs, cfg.theta, cfg.sigma_x))
    )

    n = 1_000_000
    draws = cfg.theta + cfg.sigma_x * rng.standard_normal(n)
    freq = float(np.mean(rng.random(n) < model.p_active(draws)))
    se = math.sqrt(expected * (1 - expected) / n)
    assert abs(freq - expected) < 3 * se
