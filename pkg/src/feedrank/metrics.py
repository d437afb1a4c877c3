"""Evaluation indices computed from click-event windows.

All functions are pure and operate on plain numpy arrays describing the
trailing window of a run: per-event clicked-item signal ``y``, clicker group
(0 = L, 1 = R), and highlight flag. Group L holds agents whose signal falls
below their benchmark, group R the rest.

Index conventions:

* ENG counts one unit per click plus one per highlight, so a window of W
  events contributes at least W.
* MIS is the mean absolute distance between clicked signals and the true
  state.
* POL is the absolute distance between the two groups' average clicked
  signals (an empty group contributes 0).
* HHI is on the 0-10000 scale (percent shares squared and summed).
* Welfare mixes an engagement basis with MIS*POL through the weight psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Stat",
    "IndexReport",
    "compute_eng",
    "compute_mis",
    "compute_pol",
    "compute_hhi",
    "compute_welfare",
    "compute_wap",
    "summarize_runs",
]


class Stat(NamedTuple):
    """Ensemble mean and across-run standard deviation of one index."""

    mean: float
    sd: float

    @property
    def se3(self) -> float:
        """Three standard errors of the mean is attached to every report;
        runs count is carried by the enclosing IndexReport."""
        return 3.0 * self.sd  # divided by sqrt(runs) by IndexReport.band


def compute_eng(group: np.ndarray, highlighted: np.ndarray) -> tuple[float, float, float]:
    """Total, L-group, and R-group engagement of a window.

    Each event contributes one click unit plus one unit if highlighted.
    """
    group = np.asarray(group)
    highlighted = np.asarray(highlighted, dtype=bool)
    if group.size == 0:
        raise ValueError("engagement needs a nonempty window")
    is_r = group == 1
    eng_r = float(np.count_nonzero(is_r) + np.count_nonzero(highlighted & is_r))
    eng_l = float(np.count_nonzero(~is_r) + np.count_nonzero(highlighted & ~is_r))
    return eng_l + eng_r, eng_l, eng_r


def compute_mis(y: np.ndarray, theta: float) -> float:
    """Mean absolute distance between clicked signals and the true state."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("misinformation needs a nonempty window")
    return float(np.mean(np.abs(y - theta)))


def compute_pol(y: np.ndarray, group: np.ndarray) -> float:
    """Distance between the groups' average clicked signals.

    |mean of R-clicked signals - mean of L-clicked signals|, each mean over
    that group's window events; a group with no window events contributes 0.
    """
    y = np.asarray(y, dtype=float)
    group = np.asarray(group)
    if y.size == 0:
        raise ValueError("polarization needs a nonempty window")
    is_r = group == 1
    mean_r = float(y[is_r].mean()) if is_r.any() else 0.0
    mean_l = float(y[~is_r].mean()) if not is_r.all() else 0.0
    return abs(mean_r - mean_l)


def compute_hhi(clicks_per_item: np.ndarray) -> float:
    """Herfindahl concentration of window clicks across items (0-10000)."""
    c = np.asarray(clicks_per_item, dtype=float)
    total = c.sum()
    if total <= 0:
        raise ValueError("concentration needs at least one click")
    shares = 100.0 * c / total
    return float(np.sum(shares * shares))


def compute_welfare(eng_basis: float, mis: float, pol: float, psi: float) -> float:
    """psi * engagement basis - (1 - psi) * MIS * POL."""
    if not 0.0 <= psi <= 1.0:
        raise ValueError(f"psi must lie in [0, 1], got {psi}")
    return psi * eng_basis - (1.0 - psi) * mis * pol


def compute_wap(vote_shares: Sequence[float], sympathy: Sequence[float]) -> float:
    """Weighted affective polarization of one respondent.

    sqrt(sum_p v_p * |symp_p - mean|) with mean = sum_p v_p * symp_p, where
    v_p are party vote shares (proportions) and symp_p in [0, 10] is the
    sympathy score for party p.
    """
    v = np.asarray(vote_shares, dtype=float)
    s = np.asarray(sympathy, dtype=float)
    if v.shape != s.shape or v.ndim != 1:
        raise ValueError(f"vote_shares and sympathy must be equal-length 1-d arrays, got shapes {v.shape} and {s.shape}")
    if np.any(v < 0.0) or v.sum() > 1.0 + 1e-9:
        raise ValueError("vote shares must be nonnegative proportions summing to at most 1")
    mean = float(np.dot(v, s))
    return math.sqrt(float(np.dot(v, np.abs(s - mean))))


# =============================================================================
# Ensemble summaries
# =============================================================================

@dataclass(frozen=True)
class IndexReport:
    """Ensemble means and across-run standard deviations of every index."""

    eng: Stat
    eng_per_capita: Stat
    eng_l: Stat
    eng_r: Stat
    mis: Stat
    pol: Stat
    hhi: Stat
    welfare: dict[float, Stat]  # psi -> Stat
    runs: int
    window: int

    def band(self, stat: Stat) -> float:
        """Half-width of the +-3 standard-error band of the ensemble mean."""
        return stat.se3 / math.sqrt(self.runs)

    def rows(self) -> list[tuple[str, float, float]]:
        """(index_name, mean, sd) rows in the stable report order."""
        out = [
            ("eng", *self.eng),
            ("eng_per_capita", *self.eng_per_capita),
            ("eng_L", *self.eng_l),
            ("eng_R", *self.eng_r),
            ("mis", *self.mis),
            ("pol", *self.pol),
            ("hhi", *self.hhi),
        ]
        for psi in sorted(self.welfare):
            out.append((f"welfare@{psi:g}", *self.welfare[psi]))
        return out


def _stat(values: np.ndarray) -> Stat:
    values = np.asarray(values, dtype=float)
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return Stat(float(values.mean()), sd)


def summarize_runs(
    per_run: Mapping[str, np.ndarray],
    psi_list: Sequence[float],
    eng_normalization: str,
    window: int,
) -> IndexReport:
    """Aggregate per-run index values into an IndexReport.

    ``per_run`` must hold equal-length arrays for keys eng, eng_per_capita,
    eng_L, eng_R, mis, pol, hhi. Welfare is computed per run from the basis
    selected by ``eng_normalization`` and then summarized, so its sd reflects
    run-to-run dispersion of the welfare value itself.
    """
    runs = len(per_run["eng"])
    basis = per_run["eng"] if eng_normalization == "Raw" else per_run["eng_per_capita"]
    welfare = {}
    for psi in psi_list:
        w = psi * np.asarray(basis, dtype=float) - (1.0 - psi) * per_run["mis"] * per_run["pol"]
        welfare[float(psi)] = _stat(w)
    return IndexReport(
        eng=_stat(per_run["eng"]),
        eng_per_capita=_stat(per_run["eng_per_capita"]),
        eng_l=_stat(per_run["eng_L"]),
        eng_r=_stat(per_run["eng_R"]),
        mis=_stat(per_run["mis"]),
        pol=_stat(per_run["pol"]),
        hhi=_stat(per_run["hhi"]),
        welfare=welfare,
        runs=runs,
        window=window,
    )
