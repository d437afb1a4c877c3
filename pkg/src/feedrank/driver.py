"""Single runs and ensembles of the sequential N-agent process.

One run: N agents sequentially access the platform; each samples her types,
sees her group's current ranking, clicks exactly one of the M items, maybe
highlights it, and the tallies and rankings update before the next agent.
Runs are fully deterministic given (config, run seed).

Ensembles execute T independent runs with per-run seeds derived as
SeedSequence((master_seed, run_index)); the derivation ignores everything
else in the config, so ensembles that share a master seed are pairwise
coupled run-by-run (common random numbers) across parameter cells, which
sharpens finite-difference comparisons. Evaluation indices are computed on
the trailing ``window`` events of each run and normalized by the window
size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import _kernel, metrics
from .config import (
    ConfigError,
    FlatHighlighting,
    HeterogeneousBenchmark,
    ModelConfig,
)
from .metrics import IndexReport
from .model import ItemSet, WorldResampleError
from .ranking import RankingState

__all__ = [
    "ClickEvent",
    "RunResult",
    "EnsembleResult",
    "HIST_EDGES",
    "run_seed_state",
    "run_once",
    "run_ensemble",
    "run_variant_heterogeneous",
    "run_variant_noncentered",
    "set_threads",
]

DEFAULT_PSI = (0.0, 0.5, 1.0)

# Histogram convention shared by all emitted click/highlight distributions:
# 81 bins of width 0.2 with centers spanning [-8, 8].
HIST_BIN_WIDTH = 0.2
HIST_EDGES = np.round(np.linspace(-8.1, 8.1, 82), 10)


def set_threads(threads: int | None) -> None:
    """Cap the worker pool used for ensemble runs (results are unaffected)."""
    if threads is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


# =============================================================================
# Seeds
# =============================================================================

def run_seed_state(master_seed: int, run_index: int) -> np.ndarray:
    """uint64[8] stream state for one run.

    The documented stable hash is numpy's SeedSequence applied to the
    entropy tuple (master_seed, run_index): independent streams, and any
    single run is reproducible in isolation.
    """
    words = np.random.SeedSequence((master_seed, run_index)).generate_state(8, np.uint64)
    # xoshiro must not start from an all-zero quadrant (probability ~2^-256)
    if not words[:4].any():
        words[0] = np.uint64(1)
    if not words[4:].any():
        words[4] = np.uint64(1)
    return words


def _mode_args(cfg: ModelConfig) -> tuple:
    """(flat, p_a_const, alpha, center_truth, het, sigma_bench) kernel flags."""
    hm = cfg.highlight_mode
    flat = isinstance(hm, FlatHighlighting)
    p_a_const = hm.p_A_const if flat else 0.0
    alpha = 1.0 if flat else hm.alpha
    center_truth = (not flat) and hm.center == "Truth"
    bm = cfg.benchmark_mode
    het = isinstance(bm, HeterogeneousBenchmark)
    sigma_bench = bm.sigma_theta_hat if het else 0.0
    return flat, p_a_const, alpha, center_truth, het, sigma_bench


def _kernel_args(cfg: ModelConfig) -> tuple:
    return (
        cfg.M, cfg.N, cfg.theta, cfg.theta_hat, cfg.sigma_x, cfg.sigma_y,
        cfg.p_C, cfg.p_C + cfg.p_E, cfg.gamma_C, cfg.gamma_E, cfg.gamma_I,
        cfg.beta, cfg.eta, cfg.lam, *_mode_args(cfg),
    )


# =============================================================================
# Single runs
# =============================================================================

@dataclass(frozen=True)
class ClickEvent:
    """One agent's outcome: clicked item, its signal, group, highlight flag."""

    n: int
    group: str  # "L" or "R"
    item: int
    y: float
    highlighted: bool
    rank_seen: int


class EventArray:
    """Lazily materialized view over a run's event trace."""

    def __init__(self, items, groups, highs, ranks, y_values):
        self._items = items
        self._groups = groups
        self._highs = highs
        self._ranks = ranks
        self._y = y_values

    def __len__(self) -> int:
        return self._items.size

    def __getitem__(self, n: int) -> ClickEvent:
        item = int(self._items[n])
        return ClickEvent(
            n=int(n),
            group="R" if self._groups[n] == 1 else "L",
            item=item,
            y=float(self._y[item]),
            highlighted=bool(self._highs[n]),
            rank_seen=int(self._ranks[n]),
        )

    def __iter__(self) -> Iterator[ClickEvent]:
        for n in range(len(self)):
            yield self[n]

    # raw columns, for vectorized consumers
    @property
    def item(self) -> np.ndarray:
        return self._items

    @property
    def group(self) -> np.ndarray:
        return self._groups

    @property
    def highlighted(self) -> np.ndarray:
        return self._highs

    @property
    def rank_seen(self) -> np.ndarray:
        return self._ranks

    @property
    def y(self) -> np.ndarray:
        return self._y[self._items]


@dataclass
class RunResult:
    """Events, final ranking state, and world summary of one run."""

    events: EventArray
    final_state: RankingState
    items: ItemSet
    run_seed_words: np.ndarray


def run_once(cfg: ModelConfig, run_index: int = 0, master_seed: int | None = None) -> RunResult:
    """Execute one full run of N sequential agents.

    The run seed derives from (master_seed or cfg.master_seed, run_index),
    so calling with the same arguments is bit-reproducible.
    """
    seed = cfg.master_seed if master_seed is None else master_seed
    state = run_seed_state(seed, run_index)
    err, y, ysign, ev_item, ev_group, ev_high, ev_rank, kappa, clicks, highs, ranks = (
        _kernel.run_trace(state.copy(), *_kernel_args(cfg))
    )
    if err == _kernel.ERR_RESAMPLE:
        raise WorldResampleError(
            f"run {run_index}: no item set with both signs present after "
            f"{_kernel.MAX_ITEM_REDRAWS} redraws"
        )
    m_plus = int(np.count_nonzero(ysign > 0))
    return RunResult(
        events=EventArray(ev_item, ev_group, ev_high, ev_rank, y),
        final_state=RankingState(
            kappa=kappa, clicks=clicks, highlights=highs, ranks=ranks,
            eta=cfg.eta, lam=cfg.lam,
        ),
        items=ItemSet(y=y, sign=ysign, m_minus=cfg.M - m_plus, m_plus=m_plus),
        run_seed_words=state,
    )


# =============================================================================
# Ensembles
# =============================================================================

@dataclass
class EnsembleResult:
    """Per-run index values, their summary report, and pooled histograms."""

    cfg: ModelConfig
    report: IndexReport
    per_run: dict[str, np.ndarray]
    hist_edges: np.ndarray
    hist_clicking: np.ndarray  # int64[81], pooled window clicks per signal bin
    hist_highlighting: np.ndarray  # int64[81], pooled window highlights per bin
    item_signals: np.ndarray  # float64[T, M]
    final_kappa: np.ndarray  # float64[T, 2, M]
    final_clicks: np.ndarray  # int64[T, 2, M]
    final_highlights: np.ndarray  # int64[T, 2, M]
    final_ranks: np.ndarray  # int64[T, 2, M]
    window_y: np.ndarray | None = field(repr=False, default=None)  # float64[T, W]
    window_group: np.ndarray | None = field(repr=False, default=None)
    window_high: np.ndarray | None = field(repr=False, default=None)
    window_item: np.ndarray | None = field(repr=False, default=None)
    window_rank: np.ndarray | None = field(repr=False, default=None)


def run_ensemble(
    cfg: ModelConfig,
    psi_list: Sequence[float] = DEFAULT_PSI,
    threads: int | None = None,
    keep_windows: bool = True,
) -> EnsembleResult:
    """T independent runs -> per-run indices and their ensemble report.

    Any failing run aborts the ensemble, naming the offending run index.
    The report is identical for any thread count.
    """
    set_threads(threads)
    t_runs, window, m_items = cfg.T, cfg.window, cfg.M

    states = np.empty((t_runs, 8), dtype=np.uint64)
    for t in range(t_runs):
        states[t] = run_seed_state(cfg.master_seed, t)

    win_item = np.empty((t_runs, window), dtype=np.int32)
    win_group = np.empty((t_runs, window), dtype=np.int8)
    win_high = np.empty((t_runs, window), dtype=np.uint8)
    win_rank = np.empty((t_runs, window), dtype=np.int32)
    ys = np.empty((t_runs, m_items))
    fin_kappa = np.empty((t_runs, 2, m_items))
    fin_clicks = np.empty((t_runs, 2, m_items), dtype=np.int64)
    fin_highs = np.empty((t_runs, 2, m_items), dtype=np.int64)
    fin_ranks = np.empty((t_runs, 2, m_items), dtype=np.int64)
    err = np.empty(t_runs, dtype=np.int64)

    _kernel.run_ensemble_kernel(
        states, m_items, cfg.N, window, cfg.theta, cfg.theta_hat,
        cfg.sigma_x, cfg.sigma_y, cfg.p_C, cfg.p_C + cfg.p_E,
        cfg.gamma_C, cfg.gamma_E, cfg.gamma_I, cfg.beta, cfg.eta, cfg.lam,
        *_mode_args(cfg),
        win_item, win_group, win_high, win_rank, ys,
        fin_kappa, fin_clicks, fin_highs, fin_ranks, err,
    )

    failed = np.nonzero(err != _kernel.ERR_OK)[0]
    if failed.size:
        raise WorldResampleError(
            f"run {int(failed[0])}: no item set with both signs present after "
            f"{_kernel.MAX_ITEM_REDRAWS} redraws"
        )

    win_y = np.take_along_axis(ys, win_item.astype(np.int64), axis=1)

    per_run = _per_run_indices(cfg, win_y, win_group, win_high, win_item)
    report = metrics.summarize_runs(per_run, psi_list, cfg.eng_normalization, window)

    hist_clicking = np.histogram(win_y, bins=HIST_EDGES)[0]
    hist_highlighting = np.histogram(win_y[win_high.astype(bool)], bins=HIST_EDGES)[0]

    return EnsembleResult(
        cfg=cfg,
        report=report,
        per_run=per_run,
        hist_edges=HIST_EDGES.copy(),
        hist_clicking=hist_clicking,
        hist_highlighting=hist_highlighting,
        item_signals=ys,
        final_kappa=fin_kappa,
        final_clicks=fin_clicks,
        final_highlights=fin_highs,
        final_ranks=fin_ranks,
        window_y=win_y if keep_windows else None,
        window_group=win_group if keep_windows else None,
        window_high=win_high if keep_windows else None,
        window_item=win_item if keep_windows else None,
        window_rank=win_rank if keep_windows else None,
    )


def _per_run_indices(cfg, win_y, win_group, win_high, win_item) -> dict[str, np.ndarray]:
    t_runs, window = win_y.shape
    out = {
        key: np.empty(t_runs)
        for key in ("eng", "eng_per_capita", "eng_L", "eng_R", "mis", "pol", "hhi", "highlights")
    }
    for t in range(t_runs):
        eng, eng_l, eng_r = metrics.compute_eng(win_group[t], win_high[t])
        out["eng"][t] = eng
        out["eng_per_capita"][t] = eng / window
        out["eng_L"][t] = eng_l
        out["eng_R"][t] = eng_r
        out["mis"][t] = metrics.compute_mis(win_y[t], cfg.theta)
        out["pol"][t] = metrics.compute_pol(win_y[t], win_group[t])
        counts = np.bincount(win_item[t], minlength=cfg.M)
        out["hhi"][t] = metrics.compute_hhi(counts)
        out["highlights"][t] = float(np.count_nonzero(win_high[t]))
    return out


# =============================================================================
# Variant entry points
# =============================================================================

def run_variant_heterogeneous(cfg: ModelConfig, **kwargs) -> EnsembleResult:
    """Ensemble with idiosyncratic per-agent benchmarks.

    Identical pipeline; each agent's own benchmark governs her sign, her
    view of item signs, and the non-flat highlighting center.
    """
    if not isinstance(cfg.benchmark_mode, HeterogeneousBenchmark):
        raise ConfigError("run_variant_heterogeneous needs benchmark_mode = Heterogeneous")
    return run_ensemble(cfg, **kwargs)


def run_variant_noncentered(cfg: ModelConfig, **kwargs) -> EnsembleResult:
    """Ensemble with the benchmark moved away from the true state.

    Signals still center on theta while sorting and (benchmark-centered)
    highlighting use theta_hat.
    """
    return run_ensemble(cfg, **kwargs)
