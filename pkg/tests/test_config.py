import json

import pytest

from feedrank.config import (
    ConfigError,
    FlatHighlighting,
    HeterogeneousBenchmark,
    NonFlatHighlighting,
    baseline_config,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
)


def test_baseline_is_valid():
    cfg = baseline_config()
    assert cfg.p_C + cfg.p_E + cfg.p_I == pytest.approx(1.0, abs=1e-12)
    assert cfg.M == 20 and cfg.N == 100_000 and cfg.T == 200 and cfg.window == 2000
    assert cfg.gamma_bar == pytest.approx(0.695)


@pytest.mark.parametrize(
    "changes",
    [
        {"p_C": 0.7, "p_E": 0.2, "p_I": 0.2},  # probabilities not summing to 1
        {"p_C": -0.1, "p_E": 0.95, "p_I": 0.15},
        {"gamma_C": 0.5},
        {"gamma_C": 1.0},
        {"gamma_E": 0.5},
        {"gamma_I": 0.4},
        {"beta": 1.0},
        {"eta": -1.0},
        {"lam": 1.5},
        {"M": 1},
        {"N": 0},
        {"T": 0},
        {"sigma_x": 0.0},
        {"window": 0},
        {"window": 200_001},
        {"eng_normalization": "Mean"},
        {"master_seed": -1},
        {"highlight_mode": FlatHighlighting(p_A_const=1.0)},
        {"highlight_mode": NonFlatHighlighting(alpha=0.5)},
        {"highlight_mode": NonFlatHighlighting(center="Middle")},
        {"benchmark_mode": HeterogeneousBenchmark(sigma_theta_hat=-0.1)},
    ],
)
def test_invalid_values_rejected(changes):
    with pytest.raises(ConfigError):
        baseline_config(**changes)


def test_m_equal_2_allowed():
    cfg = baseline_config(M=2, N=1, T=1, window=1)
    assert cfg.M == 2


def test_wide_benchmark_dispersion_warns():
    with pytest.warns(UserWarning):
        baseline_config(benchmark_mode=HeterogeneousBenchmark(sigma_theta_hat=1.0))


def test_narrow_benchmark_dispersion_silent(recwarn):
    baseline_config(benchmark_mode=HeterogeneousBenchmark(sigma_theta_hat=0.75))
    assert not [w for w in recwarn if issubclass(w.category, UserWarning)]


def test_json_round_trip(tmp_path):
    cfg = baseline_config(eta=12.5, lam=0.25,
                          benchmark_mode=HeterogeneousBenchmark(sigma_theta_hat=0.5))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(path) == cfg


def test_lambda_key_spelling():
    doc = config_to_dict(baseline_config())
    assert "lambda" in doc and "lam" not in doc
    assert config_from_dict(doc).lam == doc["lambda"]


def test_unknown_top_level_key_rejected():
    doc = config_to_dict(baseline_config())
    doc["sigma_z"] = 1.0
    with pytest.raises(ConfigError, match="sigma_z"):
        config_from_dict(doc)


def test_unknown_nested_key_rejected():
    doc = config_to_dict(baseline_config())
    doc["highlight_mode"]["slope"] = 2.0
    with pytest.raises(ConfigError, match="slope"):
        config_from_dict(doc)


def test_missing_required_key_rejected():
    doc = config_to_dict(baseline_config())
    del doc["beta"]
    with pytest.raises(ConfigError, match="beta"):
        config_from_dict(doc)


def test_defaults_fill_optional_keys():
    doc = config_to_dict(baseline_config())
    for key in ("M", "N", "T", "window", "gamma_I", "benchmark_mode", "eng_normalization"):
        del doc[key]
    cfg = config_from_dict(doc)
    assert cfg == baseline_config()


def test_invalid_json_reported(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


def test_config_hash_stable_and_sensitive():
    a = config_hash(baseline_config())
    b = config_hash(baseline_config())
    c = config_hash(baseline_config(eta=1.0))
    assert a == b and a != c and len(a) == 12
