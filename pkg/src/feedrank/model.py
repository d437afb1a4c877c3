"""Information structure, agent types, and per-agent behavioral primitives.

An :class:`ItemSet` holds the M item signals of one run; agents arrive as a
lazy stream of :class:`Agent` records. The three primitives below map an
agent and an item set to click behavior:

* :func:`propensity_absent_ranking` - ranking-free click propensities from
  the agent's type and the sign agreement between her signal and each item.
* :func:`click_probabilities` - the same propensities tilted by the
  attention bias, one factor of beta per position.
* :func:`highlight_probability` / :func:`wants_highlight` - whether the
  agent is the highlighting kind and whether a clicked item is close enough
  to her own signal to be highlighted.

Everything here is a pure function of its inputs plus an explicit numpy
Generator, so the module is safe to use from any number of threads as long
as each caller owns its stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import (
    FlatHighlighting,
    HeterogeneousBenchmark,
    ModelConfig,
    NonFlatHighlighting,
)

__all__ = [
    "Agent",
    "ItemSet",
    "WorldResampleError",
    "MAX_ITEM_REDRAWS",
    "sample_world",
    "sample_item_set",
    "agent_stream",
    "propensity_absent_ranking",
    "click_probabilities",
    "highlight_probability",
    "wants_highlight",
]

# Degenerate item sets (all signals on one side of the benchmark) are
# redrawn wholesale; the propensity formula divides by per-sign counts and
# the limit approximations assume both signs are populated.
MAX_ITEM_REDRAWS = 100

CONFIRMATORY = "C"
EXPLORATORY = "E"
INDIFFERENT = "I"


class WorldResampleError(RuntimeError):
    """Item-set resampling exhausted: every redraw left one sign empty."""


@dataclass(frozen=True)
class Agent:
    """One arriving agent: signal, sign, clicking type, highlighting type."""

    x: float
    sign: int  # +1 iff x >= theta_hat_n
    click_type: str  # "C", "E", or "I"
    active: bool  # highlighting type
    theta_hat_n: float

    @property
    def group(self) -> str:
        return "R" if self.sign > 0 else "L"


@dataclass(frozen=True)
class ItemSet:
    """Item signals of one run with their benchmark signs and sign counts."""

    y: np.ndarray  # float64[M]
    sign: np.ndarray  # int8[M], +1 iff y >= theta_hat
    m_minus: int
    m_plus: int


def sample_item_set(cfg: ModelConfig, rng: np.random.Generator) -> ItemSet:
    """Draw M item signals ~ N(theta, sigma_y^2), redrawing degenerate sets."""
    for _ in range(MAX_ITEM_REDRAWS + 1):
        y = cfg.theta + cfg.sigma_y * rng.standard_normal(cfg.M)
        sign = np.where(y >= cfg.theta_hat, 1, -1).astype(np.int8)
        m_plus = int(np.count_nonzero(sign > 0))
        if 0 < m_plus < cfg.M:
            return ItemSet(y=y, sign=sign, m_minus=cfg.M - m_plus, m_plus=m_plus)
    raise WorldResampleError(
        f"no item set with both signs present after {MAX_ITEM_REDRAWS} redraws; "
        "check theta_hat against the item signal distribution"
    )


def _draw_click_type(u: float, cfg: ModelConfig) -> str:
    if u < cfg.p_C:
        return CONFIRMATORY
    if u < cfg.p_C + cfg.p_E:
        return EXPLORATORY
    return INDIFFERENT


def agent_stream(cfg: ModelConfig, rng: np.random.Generator) -> Iterator[Agent]:
    """Lazily yield agents; a run never materializes N Agent records.

    Per-agent benchmark draws come from a child stream derived once up
    front, so the main stream's consumption is identical in Common and
    Heterogeneous modes (sigma_theta_hat = 0 then reproduces Common mode
    bit for bit). Per-agent draw order on the main stream is fixed:
    signal, clicking type, highlighting type.
    """
    het = isinstance(cfg.benchmark_mode, HeterogeneousBenchmark)
    sigma_bench = cfg.benchmark_mode.sigma_theta_hat if het else 0.0
    bench_rng = np.random.default_rng(int(rng.integers(0, 2**63)))
    while True:
        x = cfg.theta + cfg.sigma_x * float(rng.standard_normal())
        if het:
            theta_hat_n = cfg.theta + sigma_bench * float(bench_rng.standard_normal())
        else:
            theta_hat_n = cfg.theta_hat
        click_type = _draw_click_type(float(rng.random()), cfg)
        p_a = highlight_probability(x, cfg, theta_hat_n=theta_hat_n)
        active = float(rng.random()) < p_a
        yield Agent(
            x=x,
            sign=1 if x >= theta_hat_n else -1,
            click_type=click_type,
            active=active,
            theta_hat_n=theta_hat_n,
        )


def sample_world(cfg: ModelConfig, rng: np.random.Generator) -> tuple[ItemSet, Iterator[Agent]]:
    """One run's world: an item set plus the lazy agent sequence.

    Raises WorldResampleError if no non-degenerate item set appears within
    the redraw budget.
    """
    items = sample_item_set(cfg, rng)
    return items, agent_stream(cfg, rng)


# =============================================================================
# Behavioral primitives
# =============================================================================

def propensity_absent_ranking(agent: Agent, items: ItemSet, cfg: ModelConfig) -> np.ndarray:
    """Click propensities with ranking effects switched off.

    An item whose sign matches the agent's gets weight gamma_k, a mismatch
    gets 1 - gamma_k, and each weight is split evenly over the items sharing
    that item's sign, so the entries sum to one.
    """
    if items.m_minus < 1 or items.m_plus < 1:
        raise ValueError("propensities need both item signs present")
    gamma = {CONFIRMATORY: cfg.gamma_C, EXPLORATORY: cfg.gamma_E, INDIFFERENT: cfg.gamma_I}[agent.click_type]
    match = items.sign == agent.sign
    class_size = np.where(items.sign > 0, items.m_plus, items.m_minus)
    return np.where(match, gamma, 1.0 - gamma) / class_size


def click_probabilities(phi: np.ndarray, ranks: np.ndarray, beta: float) -> np.ndarray:
    """Position-biased click probabilities.

    rho_m proportional to beta^(M - r_m) * phi_m; one rank higher multiplies
    the likelihood by beta, all else equal.
    """
    phi = np.asarray(phi, dtype=float)
    ranks = np.asarray(ranks)
    m = phi.size
    if sorted(ranks.tolist()) != list(range(1, m + 1)):
        raise ValueError("ranks must be a permutation of 1..M")
    if np.any(phi < 0.0) or phi.sum() <= 0.0:
        raise ValueError("propensities must be nonnegative with positive sum")
    w = np.power(beta, m - ranks) * phi
    return w / w.sum()


def highlight_probability(x: float, cfg: ModelConfig, theta_hat_n: float | None = None) -> float:
    """Probability that an agent with signal x is the highlighting kind.

    Flat mode returns the constant; non-flat mode grows with the normalized
    deviation of x from the center (the agent's benchmark, or the true state
    when the mode is centered on it).
    """
    hm = cfg.highlight_mode
    if isinstance(hm, FlatHighlighting):
        return hm.p_A_const
    assert isinstance(hm, NonFlatHighlighting)
    if hm.center == "Truth":
        center = cfg.theta
    else:
        center = cfg.theta_hat if theta_hat_n is None else theta_hat_n
    t = (x - center) / cfg.sigma_x
    return 1.0 - math.exp(-((t * t) ** hm.alpha) / (2.0 * hm.alpha))


def wants_highlight(agent: Agent, y_m: float, sigma_x: float) -> bool:
    """True iff the agent is active and y_m is within sigma_x/2 of her signal.

    The proximity interval is closed at both ends.
    """
    return agent.active and abs(y_m - agent.x) <= 0.5 * sigma_x
