"""Validated model configuration and JSON loading.

A run is fully described by one :class:`ModelConfig` record: the information
structure (true state ``theta``, benchmark ``theta_hat``, signal scales),
the agent behavior mix (clicking types and their propensities, highlighting
mode), the ranking weights (attention bias ``beta``, highlight weight
``eta``, cross-group weight ``lambda``), and the ensemble protocol
(``M`` items, ``N`` agents, ``T`` runs, trailing ``window``,
``master_seed``).

Configs load from JSON documents whose keys are exactly the field names
below; unknown keys raise :class:`ConfigError` so that typos in sweep
scripts fail loudly instead of silently running the defaults.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

__all__ = [
    "ConfigError",
    "FlatHighlighting",
    "NonFlatHighlighting",
    "CommonBenchmark",
    "HeterogeneousBenchmark",
    "ModelConfig",
    "baseline_config",
    "load_config",
    "config_to_dict",
    "config_hash",
]

PROB_TOL = 1e-12


class ConfigError(ValueError):
    """Raised when a configuration value or document is invalid."""


# =============================================================================
# Mode variants
# =============================================================================

@dataclass(frozen=True)
class FlatHighlighting:
    """Active-type probability constant in the agent's signal.

    The constant is a free parameter of the flat regime; 0.5 is the midpoint
    of its admissible interval (0, 1).
    """

    p_A_const: float = 0.5

    kind = "Flat"


@dataclass(frozen=True)
class NonFlatHighlighting:
    """Active-type probability increasing in |signal - center|.

    p_A(x) = 1 - exp(-((x - c)^2 / sigma_x^2)^alpha / (2 alpha)) with the
    center c being the benchmark or the true state, per ``center``.
    """

    alpha: float = 4.0
    center: str = "Benchmark"  # or "Truth"

    kind = "NonFlat"


@dataclass(frozen=True)
class CommonBenchmark:
    """All agents share the benchmark ``theta_hat``."""

    kind = "Common"


@dataclass(frozen=True)
class HeterogeneousBenchmark:
    """Per-agent benchmarks theta_hat_n ~ N(theta, sigma_theta_hat^2)."""

    sigma_theta_hat: float = 0.0

    kind = "Heterogeneous"


HighlightMode = FlatHighlighting | NonFlatHighlighting
BenchmarkMode = CommonBenchmark | HeterogeneousBenchmark


# =============================================================================
# The config record
# =============================================================================

@dataclass(frozen=True)
class ModelConfig:
    """Every model and protocol parameter in one validated record."""

    theta: float
    theta_hat: float
    sigma_x: float
    sigma_y: float
    p_C: float
    p_E: float
    p_I: float
    gamma_C: float
    gamma_E: float
    beta: float
    eta: float
    lam: float  # JSON key: "lambda"
    highlight_mode: HighlightMode
    master_seed: int
    gamma_I: float = 0.5
    M: int = 20
    N: int = 100_000
    T: int = 200
    benchmark_mode: BenchmarkMode = field(default_factory=CommonBenchmark)
    window: int = 2000
    eng_normalization: str = "PerCapita"  # or "Raw"

    def __post_init__(self) -> None:
        _validate(self)

    # Convenience -------------------------------------------------------

    @property
    def is_flat(self) -> bool:
        return isinstance(self.highlight_mode, FlatHighlighting)

    @property
    def is_heterogeneous(self) -> bool:
        return isinstance(self.benchmark_mode, HeterogeneousBenchmark)

    @property
    def gamma_bar(self) -> float:
        """Mean sign-match click weight p_C*gamma_C + p_E*gamma_E + p_I*gamma_I."""
        return self.p_C * self.gamma_C + self.p_E * self.gamma_E + self.p_I * self.gamma_I

    def replace(self, **changes: Any) -> "ModelConfig":
        return replace(self, **changes)


def _validate(cfg: ModelConfig) -> None:
    def fail(msg: str) -> None:
        raise ConfigError(msg)

    probs = (cfg.p_C, cfg.p_E, cfg.p_I)
    if any(p < 0.0 or p > 1.0 for p in probs):
        fail(f"type probabilities must lie in [0, 1], got {probs}")
    if abs(sum(probs) - 1.0) > PROB_TOL:
        fail(f"p_C + p_E + p_I must equal 1 within {PROB_TOL}, got {sum(probs)!r}")
    if not 0.5 < cfg.gamma_C < 1.0:
        fail(f"gamma_C must lie in (1/2, 1), got {cfg.gamma_C}")
    if not 0.0 < cfg.gamma_E < 0.5:
        fail(f"gamma_E must lie in (0, 1/2), got {cfg.gamma_E}")
    if cfg.gamma_I != 0.5:
        fail(f"gamma_I is fixed at 1/2, got {cfg.gamma_I}")
    if cfg.sigma_x <= 0.0 or cfg.sigma_y <= 0.0:
        fail("sigma_x and sigma_y must be positive")
    # The base model assumes M > 2; M = 2 is admitted because it is the one
    # case where the click distribution can be enumerated exactly, which the
    # test oracles rely on.
    if cfg.M < 2:
        fail(f"M must be at least 2, got {cfg.M}")
    if cfg.N < 1:
        fail(f"N must be at least 1, got {cfg.N}")
    if cfg.T < 1:
        fail(f"T must be at least 1, got {cfg.T}")
    if cfg.beta <= 1.0:
        fail(f"beta must exceed 1, got {cfg.beta}")
    if cfg.eta < 0.0:
        fail(f"eta must be nonnegative, got {cfg.eta}")
    if not 0.0 <= cfg.lam <= 1.0:
        fail(f"lambda must lie in [0, 1], got {cfg.lam}")
    if not 1 <= cfg.window <= cfg.N:
        fail(f"window must lie in [1, N], got window={cfg.window}, N={cfg.N}")
    if cfg.eng_normalization not in ("Raw", "PerCapita"):
        fail(f"eng_normalization must be 'Raw' or 'PerCapita', got {cfg.eng_normalization!r}")
    if not isinstance(cfg.master_seed, int) or not 0 <= cfg.master_seed < 2**64:
        fail(f"master_seed must be a 64-bit unsigned integer, got {cfg.master_seed!r}")

    hm = cfg.highlight_mode
    if isinstance(hm, FlatHighlighting):
        if not 0.0 < hm.p_A_const < 1.0:
            fail(f"p_A_const must lie in (0, 1), got {hm.p_A_const}")
    elif isinstance(hm, NonFlatHighlighting):
        if hm.alpha < 1.0:
            fail(f"alpha must be at least 1, got {hm.alpha}")
        if hm.center not in ("Benchmark", "Truth"):
            fail(f"center must be 'Benchmark' or 'Truth', got {hm.center!r}")
    else:
        fail(f"unknown highlight mode {hm!r}")

    bm = cfg.benchmark_mode
    if isinstance(bm, HeterogeneousBenchmark):
        if bm.sigma_theta_hat < 0.0:
            fail(f"sigma_theta_hat must be nonnegative, got {bm.sigma_theta_hat}")
        limit = min(cfg.sigma_x, cfg.sigma_y) / 4.0
        if bm.sigma_theta_hat > limit:
            warnings.warn(
                f"sigma_theta_hat={bm.sigma_theta_hat} exceeds min(sigma_x, sigma_y)/4"
                f"={limit}; the model's benchmark-dispersion regime is narrower",
                stacklevel=3,
            )
    elif not isinstance(bm, CommonBenchmark):
        fail(f"unknown benchmark mode {bm!r}")


# =============================================================================
# Canonical baseline
# =============================================================================

def baseline_config(**overrides: Any) -> ModelConfig:
    """Desk-scale baseline: symmetric signals, confirmatory-heavy type mix.

    theta = theta_hat = 0, sigma_x = sigma_y = 3, M = 20 items, N = 1e5
    agents, T = 200 runs, (p_C, p_E, p_I) = (0.7, 0.15, 0.15),
    (gamma_C, gamma_E, gamma_I) = (0.8, 0.4, 0.5), beta = 1.25, non-flat
    highlighting with alpha = 4, trailing window of 2000 clicks.
    """
    cfg = ModelConfig(
        theta=0.0,
        theta_hat=0.0,
        sigma_x=3.0,
        sigma_y=3.0,
        p_C=0.7,
        p_E=0.15,
        p_I=0.15,
        gamma_C=0.8,
        gamma_E=0.4,
        beta=1.25,
        eta=0.0,
        lam=1.0,
        highlight_mode=NonFlatHighlighting(alpha=4.0, center="Benchmark"),
        master_seed=42,
    )
    return cfg.replace(**overrides) if overrides else cfg


# =============================================================================
# JSON document handling
# =============================================================================

_TOP_KEYS = {
    "theta", "theta_hat", "sigma_x", "sigma_y", "M", "N", "T",
    "p_C", "p_E", "p_I", "gamma_C", "gamma_E", "gamma_I",
    "beta", "eta", "lambda", "highlight_mode", "benchmark_mode",
    "window", "eng_normalization", "master_seed",
}
_REQUIRED_KEYS = {
    "theta", "theta_hat", "sigma_x", "sigma_y",
    "p_C", "p_E", "p_I", "gamma_C", "gamma_E",
    "beta", "eta", "lambda", "highlight_mode", "master_seed",
}


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _parse_highlight_mode(doc: Any) -> HighlightMode:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("highlight_mode must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind == "Flat":
        _reject_unknown(doc, {"kind", "p_A_const"}, "highlight_mode")
        return FlatHighlighting(p_A_const=float(doc.get("p_A_const", 0.5)))
    if kind == "NonFlat":
        _reject_unknown(doc, {"kind", "alpha", "center"}, "highlight_mode")
        return NonFlatHighlighting(
            alpha=float(doc.get("alpha", 4.0)),
            center=str(doc.get("center", "Benchmark")),
        )
    raise ConfigError(f"highlight_mode kind must be 'Flat' or 'NonFlat', got {kind!r}")


def _parse_benchmark_mode(doc: Any) -> BenchmarkMode:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("benchmark_mode must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind == "Common":
        _reject_unknown(doc, {"kind"}, "benchmark_mode")
        return CommonBenchmark()
    if kind == "Heterogeneous":
        _reject_unknown(doc, {"kind", "sigma_theta_hat"}, "benchmark_mode")
        return HeterogeneousBenchmark(sigma_theta_hat=float(doc.get("sigma_theta_hat", 0.0)))
    raise ConfigError(f"benchmark_mode kind must be 'Common' or 'Heterogeneous', got {kind!r}")


def config_from_dict(doc: dict) -> ModelConfig:
    """Build a config from a parsed JSON document, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise ConfigError(f"missing required config key(s): {sorted(missing)}")

    kwargs: dict[str, Any] = dict(
        theta=float(doc["theta"]),
        theta_hat=float(doc["theta_hat"]),
        sigma_x=float(doc["sigma_x"]),
        sigma_y=float(doc["sigma_y"]),
        p_C=float(doc["p_C"]),
        p_E=float(doc["p_E"]),
        p_I=float(doc["p_I"]),
        gamma_C=float(doc["gamma_C"]),
        gamma_E=float(doc["gamma_E"]),
        beta=float(doc["beta"]),
        eta=float(doc["eta"]),
        lam=float(doc["lambda"]),
        highlight_mode=_parse_highlight_mode(doc["highlight_mode"]),
        master_seed=int(doc["master_seed"]),
    )
    if "gamma_I" in doc:
        kwargs["gamma_I"] = float(doc["gamma_I"])
    for key in ("M", "N", "T", "window"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "benchmark_mode" in doc:
        kwargs["benchmark_mode"] = _parse_benchmark_mode(doc["benchmark_mode"])
    if "eng_normalization" in doc:
        kwargs["eng_normalization"] = str(doc["eng_normalization"])
    return ModelConfig(**kwargs)


def load_config(path: str | Path) -> ModelConfig:
    """Load a config from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: ModelConfig) -> dict:
    """Serialize a config to the JSON document schema (inverse of loading)."""
    hm = cfg.highlight_mode
    if isinstance(hm, FlatHighlighting):
        hm_doc: dict[str, Any] = {"kind": "Flat", "p_A_const": hm.p_A_const}
    else:
        hm_doc = {"kind": "NonFlat", "alpha": hm.alpha, "center": hm.center}
    bm = cfg.benchmark_mode
    if isinstance(bm, HeterogeneousBenchmark):
        bm_doc: dict[str, Any] = {"kind": "Heterogeneous", "sigma_theta_hat": bm.sigma_theta_hat}
    else:
        bm_doc = {"kind": "Common"}
    return {
        "theta": cfg.theta,
        "theta_hat": cfg.theta_hat,
        "sigma_x": cfg.sigma_x,
        "sigma_y": cfg.sigma_y,
        "M": cfg.M,
        "N": cfg.N,
        "T": cfg.T,
        "p_C": cfg.p_C,
        "p_E": cfg.p_E,
        "p_I": cfg.p_I,
        "gamma_C": cfg.gamma_C,
        "gamma_E": cfg.gamma_E,
        "gamma_I": cfg.gamma_I,
        "beta": cfg.beta,
        "eta": cfg.eta,
        "lambda": cfg.lam,
        "highlight_mode": hm_doc,
        "benchmark_mode": bm_doc,
        "window": cfg.window,
        "eng_normalization": cfg.eng_normalization,
        "master_seed": cfg.master_seed,
    }


def config_hash(cfg: ModelConfig) -> str:
    """Short stable hash of the resolved config, for self-describing outputs."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
