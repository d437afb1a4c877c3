"""Popularity tallies and per-group rankings.

A :class:`RankingState` tracks, per group (0 = L, 1 = R), the weighted
popularity of each item, the raw click and highlight counters, and the
current rank order. A click adds 1 to the clicker's group popularity (1 +
eta when highlighted) and lambda times that to the other group's, so
lambda = 1 collapses to one shared ranking and lambda = 0 to two fully
separate ones.

Rank 1 is the most popular item. Ties are broken by a fresh uniform shuffle
among the tied set at every rerank; with zero initial popularity this also
makes the initial ranking a uniform random permutation (shared between
groups when lambda = 1).

A state is single-run, single-writer: one logical thread drives it through
the agent sequence. Distinct runs own distinct states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig

__all__ = ["RankingState", "init_state", "rank_items", "rerank", "record_outcome", "replay_popularity"]

GROUP_L = 0
GROUP_R = 1


@dataclass
class RankingState:
    """Per-group popularity, click, and highlight tallies plus rank orders."""

    kappa: np.ndarray  # float64[2, M]
    clicks: np.ndarray  # int64[2, M]
    highlights: np.ndarray  # int64[2, M]
    ranks: np.ndarray  # int64[2, M], each row a permutation of 1..M
    eta: float
    lam: float

    @property
    def n_items(self) -> int:
        return self.kappa.shape[1]


def rank_items(kappa_row: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Ranks (1 = most popular) for one popularity vector.

    Strictly more popular items always rank higher; tied items are ordered
    by fresh uniform keys, i.e. uniformly shuffled within each tied set.
    """
    keys = rng.random(kappa_row.size)
    order = np.lexsort((keys, -kappa_row))  # primary: popularity descending
    ranks = np.empty(kappa_row.size, dtype=np.int64)
    ranks[order] = np.arange(1, kappa_row.size + 1)
    return ranks


def init_state(cfg: ModelConfig, rng: np.random.Generator) -> RankingState:
    """Zero tallies with random initial permutations.

    lambda = 1 draws one shared permutation; otherwise each group gets an
    independent one (L first, then R).
    """
    shape = (2, cfg.M)
    state = RankingState(
        kappa=np.zeros(shape),
        clicks=np.zeros(shape, dtype=np.int64),
        highlights=np.zeros(shape, dtype=np.int64),
        ranks=np.empty(shape, dtype=np.int64),
        eta=cfg.eta,
        lam=cfg.lam,
    )
    state.ranks[GROUP_L] = rank_items(state.kappa[GROUP_L], rng)
    if cfg.lam == 1.0:
        state.ranks[GROUP_R] = state.ranks[GROUP_L]
    else:
        state.ranks[GROUP_R] = rank_items(state.kappa[GROUP_R], rng)
    return state


def rerank(state: RankingState, group: int, rng: np.random.Generator) -> np.ndarray:
    """Recompute and store one group's ranking; returns the new ranks row."""
    state.ranks[group] = rank_items(state.kappa[group], rng)
    return state.ranks[group]


def record_outcome(
    state: RankingState,
    group: int,
    item: int,
    highlighted: bool,
    rng: np.random.Generator,
) -> RankingState:
    """Apply one click (and possible highlight) and rerank both groups.

    The clicker's group popularity of ``item`` rises by 1 + eta*[highlighted],
    the other group's by lambda times that. With lambda = 1 one shared
    reranking (and one shared set of tie-break draws) serves both groups,
    so the single-ranking reduction is exact; otherwise L is reranked first,
    then R.
    """
    inc = 1.0 + state.eta if highlighted else 1.0
    other = 1 - group
    state.kappa[group, item] += inc
    state.kappa[other, item] += state.lam * inc
    state.clicks[group, item] += 1
    if highlighted:
        state.highlights[group, item] += 1
    if state.lam == 1.0:
        shared = rank_items(state.kappa[GROUP_L], rng)
        state.ranks[GROUP_L] = shared
        state.ranks[GROUP_R] = shared
    else:
        rerank(state, GROUP_L, rng)
        rerank(state, GROUP_R, rng)
    return state


def replay_popularity(
    groups: np.ndarray,
    items: np.ndarray,
    highlighted: np.ndarray,
    eta: float,
    lam: float,
    n_items: int,
) -> np.ndarray:
    """Reconstruct the popularity tallies from an event log.

    Replays the accumulation rule event by event in log order; used as a
    drift guard against the incremental updates.
    """
    kappa = np.zeros((2, n_items))
    for g, m, h in zip(groups, items, highlighted):
        inc = 1.0 + eta if h else 1.0
        kappa[g, m] += inc
        kappa[1 - g, m] += lam * inc
    return kappa
