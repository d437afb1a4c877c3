"""Limit theory evaluated by numerical quadrature.

The long-run behavior of the ranking process is approximated through three
objects:

* ``mu_H(y)`` - the highlighting mass an item with signal y attracts:
  the integral of p_A(x) f(x) over the agents whose proximity interval
  covers y, i.e. x in [y - sigma_x/2, y + sigma_x/2].
* ``pi(y)`` - the expected popularity of such an item absent ranking,
  (1 + eta mu_H(y)) / (M (1 + eta mu_bar) + eta (mu_H(y) - mu_bar)).
* ``Lambda_beta(z)`` - the affine per-capita click rate of an item whose
  expected popularity is z, obtained by linearizing the position factor
  around the expected-rank approximation r(y) ~ zeta0 - zeta1 pi(y):
  (M + ln(beta) (M - zeta0 + zeta1 z)) / (M + ln(beta) M (M - 1) / 2).

From these, the limit clicking distribution is LCD(y) = Lambda(pi(y)) g(y)
and the limit highlighting distribution LHD(y) = mu_H(y) LCD(y); both are
per-capita rates, not normalized densities. Group-split versions scale
Lambda by 2*gamma_bar on sign match and 2*(1 - gamma_bar) on mismatch,
one consistent affine choice with the required slope ordering (gamma_bar
exceeds 1/2 whenever confirmatory types dominate).

All integrals use fixed-order Gauss-Legendre panels over [center - 6 sigma,
center + 6 sigma], split at the benchmark where integrands kink, with a
node-doubling check against the configured tolerance. The coefficients
(zeta0, zeta1) are fit outputs (see :func:`fit_linear_rank`) and vary with
(eta, mode); comparative-statics sweeps hold one pair fixed across the
grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Literal, Sequence

import numpy as np

from .config import FlatHighlighting, ModelConfig, NonFlatHighlighting
from .driver import run_ensemble

__all__ = [
    "AnalyticModel",
    "AnalyticIndices",
    "QuadratureError",
    "FitError",
    "RankFit",
    "SignTable",
    "mu_H",
    "mu_H_group",
    "pi",
    "lambda_beta",
    "lambda_beta_slope",
    "lcd",
    "lhd",
    "personalized_popularity",
    "expected_rank_personalized",
    "analytic_indices",
    "analytic_welfare",
    "fit_linear_rank",
    "fit_rank_ols",
    "comparative_statics_signs",
    "x_star",
    "FIT_BIN_EDGES",
]


class QuadratureError(RuntimeError):
    """Node-doubling disagreement above the configured tolerance."""


class FitError(RuntimeError):
    """Linear rank fit impossible (too few populated bins, or no variance)."""


@lru_cache(maxsize=32)
def _gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _norm_pdf(x: np.ndarray, mean: float, sigma: float) -> np.ndarray:
    z = (x - mean) / sigma
    return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class AnalyticModel:
    """Model slice needed by the limit theory, plus quadrature settings."""

    theta: float
    theta_hat: float
    sigma_x: float
    sigma_y: float
    M: int
    eta: float
    lam: float
    beta: float
    p_C: float
    p_E: float
    p_I: float
    gamma_C: float
    gamma_E: float
    gamma_I: float
    highlight_mode: FlatHighlighting | NonFlatHighlighting
    zeta0: float
    zeta1: float
    nodes: int = 401
    halfwidth: float = 6.0  # integration half-width, in units of sigma
    tol: float = 1e-8

    @classmethod
    def from_config(cls, cfg: ModelConfig, zeta0: float, zeta1: float, **kwargs) -> "AnalyticModel":
        return cls(
            theta=cfg.theta, theta_hat=cfg.theta_hat,
            sigma_x=cfg.sigma_x, sigma_y=cfg.sigma_y, M=cfg.M,
            eta=cfg.eta, lam=cfg.lam, beta=cfg.beta,
            p_C=cfg.p_C, p_E=cfg.p_E, p_I=cfg.p_I,
            gamma_C=cfg.gamma_C, gamma_E=cfg.gamma_E, gamma_I=cfg.gamma_I,
            highlight_mode=cfg.highlight_mode,
            zeta0=zeta0, zeta1=zeta1, **kwargs,
        )

    def with_(self, **changes) -> "AnalyticModel":
        return replace(self, **changes)

    @property
    def gamma_bar(self) -> float:
        return self.p_C * self.gamma_C + self.p_E * self.gamma_E + self.p_I * self.gamma_I

    # --- highlighting propensity -----------------------------------------

    def p_active(self, x: np.ndarray) -> np.ndarray:
        hm = self.highlight_mode
        x = np.asarray(x, dtype=float)
        if isinstance(hm, FlatHighlighting):
            return np.full_like(x, hm.p_A_const)
        center = self.theta if hm.center == "Truth" else self.theta_hat
        t2 = ((x - center) / self.sigma_x) ** 2
        return 1.0 - np.exp(-(t2 ** hm.alpha) / (2.0 * hm.alpha))

    # --- cached aggregates ------------------------------------------------

    @cached_property
    def mu_bar(self) -> float:
        """Item-average highlighting mass, with a node-doubling guard."""
        coarse = self._mu_bar_at(self.nodes)
        fine = self._mu_bar_at(2 * self.nodes + 1)
        if abs(fine - coarse) > self.tol:
            raise QuadratureError(
                f"mu_bar doubling check failed: |{fine} - {coarse}| > {self.tol}"
            )
        return fine

    def _mu_bar_at(self, n: int) -> float:
        ys, wts = self._y_rule(n)
        vals = _mu_h_values(ys, self, n)
        return float(np.dot(wts, vals * _norm_pdf(ys, self.theta, self.sigma_y)))

    @cached_property
    def mu_bar_groups(self) -> tuple[float, float]:
        """(mu_bar_L, mu_bar_R): group-restricted item-average masses."""
        n = self.nodes
        ys, wts = self._y_rule(n)
        g = _norm_pdf(ys, self.theta, self.sigma_y)
        mu_l = float(np.dot(wts, _mu_h_group_values(ys, 0, self, n) * g))
        mu_r = float(np.dot(wts, _mu_h_group_values(ys, 1, self, n) * g))
        return mu_l, mu_r

    def _y_rule(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t, w = _gl_rule(n)
        half = self.halfwidth * self.sigma_y
        return self.theta + half * t, half * w


# =============================================================================
# Highlighting mass and expected popularity
# =============================================================================

def _mu_h_values(y: np.ndarray, model: AnalyticModel, n: int) -> np.ndarray:
    """mu_H at each y: integral of p_A(x) f(x) over [y - sx/2, y + sx/2]."""
    t, w = _gl_rule(n)
    half = 0.5 * model.sigma_x
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = y[:, None] + half * t[None, :]
    integrand = model.p_active(x) * _norm_pdf(x, model.theta, model.sigma_x)
    return half * integrand @ w


def _mu_h_group_values(y: np.ndarray, group: int, model: AnalyticModel, n: int) -> np.ndarray:
    """mu_H restricted to group members (R: x >= theta_hat, L: x < theta_hat)."""
    t, w = _gl_rule(n)
    half = 0.5 * model.sigma_x
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = y - half
    hi = y + half
    if group == 1:
        lo = np.maximum(lo, model.theta_hat)
    else:
        hi = np.minimum(hi, model.theta_hat)
    width = np.maximum(hi - lo, 0.0)
    mid = 0.5 * (lo + hi)
    x = mid[:, None] + 0.5 * width[:, None] * t[None, :]
    integrand = model.p_active(x) * _norm_pdf(x, model.theta, model.sigma_x)
    return 0.5 * width * (integrand @ w)


def mu_H(y, model: AnalyticModel):
    """Highlighting mass attracted by an item with signal y."""
    vals = _mu_h_values(y, model, model.nodes)
    return float(vals[0]) if np.isscalar(y) else vals


def mu_H_group(y, group: int, model: AnalyticModel):
    """Group-restricted highlighting mass (0 = L, 1 = R); the two groups
    partition mu_H."""
    vals = _mu_h_group_values(y, group, model, model.nodes)
    return float(vals[0]) if np.isscalar(y) else vals


def pi(y, model: AnalyticModel):
    """Expected popularity of an item with signal y, absent ranking."""
    mu = _mu_h_values(y, model, model.nodes)
    mb = model.mu_bar
    out = (1.0 + model.eta * mu) / (
        model.M * (1.0 + model.eta * mb) + model.eta * (mu - mb)
    )
    return float(out[0]) if np.isscalar(y) else out


# =============================================================================
# Affine click rate and limit distributions
# =============================================================================

def lambda_beta(z, model: AnalyticModel):
    """Per-capita click rate of an item with expected popularity z (affine)."""
    z = np.asarray(z, dtype=float)
    lb = math.log(model.beta)
    m = model.M
    out = (m + lb * (m - model.zeta0 + model.zeta1 * z)) / (m + lb * m * (m - 1) / 2.0)
    return float(out) if out.ndim == 0 else out


def lambda_beta_slope(model: AnalyticModel) -> float:
    """d Lambda / dz, a positive constant for beta > 1 and zeta1 > 0."""
    lb = math.log(model.beta)
    m = model.M
    return model.zeta1 * lb / (m + lb * m * (m - 1) / 2.0)


def lcd(y, model: AnalyticModel):
    """Limit clicking distribution Lambda(pi(y)) g(y); a per-capita rate."""
    vals = lambda_beta(pi(np.atleast_1d(y), model), model) * _norm_pdf(
        np.atleast_1d(np.asarray(y, dtype=float)), model.theta, model.sigma_y
    )
    return float(vals[0]) if np.isscalar(y) else vals


def lhd(y, model: AnalyticModel):
    """Limit highlighting distribution mu_H(y) LCD(y)."""
    vals = _mu_h_values(y, model, model.nodes) * np.atleast_1d(lcd(y, model))
    return float(vals[0]) if np.isscalar(y) else vals


# =============================================================================
# Personalized popularity shares
# =============================================================================

def _personalized_parts(y, group: int, model: AnalyticModel):
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    n = model.nodes
    mu_own = _mu_h_group_values(y_arr, group, model, n)
    mu_oth = _mu_h_group_values(y_arr, 1 - group, model, n)
    mb_l, mb_r = model.mu_bar_groups
    mb_own = mb_r if group == 1 else mb_l
    mb_oth = mb_l if group == 1 else mb_r
    eta, lam, m = model.eta, model.lam, model.M
    denom = (
        m * (1.0 + eta * mb_own) + eta * (mu_own - mb_own)
        + lam * (m * (1.0 + eta * mb_oth) + eta * (mu_oth - mb_oth))
    )
    return (1.0 + eta * mu_own) / denom, lam * (1.0 + eta * mu_oth) / denom


def personalized_popularity(y, group: int, model: AnalyticModel):
    """(pi_own, pi_other): popularity shares of an item in group ``group``'s
    ranking contributed by that group and by the opposite one."""
    own, oth = _personalized_parts(y, group, model)
    if np.isscalar(y):
        return float(own[0]), float(oth[0])
    return own, oth


def expected_rank_personalized(y, group: int, model: AnalyticModel):
    """zeta0 - zeta1 * (pi_own + lam * pi_other) / (1 + lam)."""
    own, oth = _personalized_parts(y, group, model)
    z = (own + model.lam * oth) / (1.0 + model.lam)
    out = model.zeta0 - model.zeta1 * z
    return float(out[0]) if np.isscalar(y) else out


def _z_personalized(y_arr: np.ndarray, group: int, model: AnalyticModel) -> np.ndarray:
    own, oth = _personalized_parts(y_arr, group, model)
    return (own + model.lam * oth) / (1.0 + model.lam)


# =============================================================================
# Analytic indices
# =============================================================================

@dataclass(frozen=True)
class AnalyticIndices:
    eng: float
    mis: float
    pol: float


def _match_weight(y_arr: np.ndarray, group: int, model: AnalyticModel) -> np.ndarray:
    """2*gamma_bar on sign match, 2*(1 - gamma_bar) on mismatch."""
    gb = model.gamma_bar
    item_plus = y_arr >= model.theta_hat
    match = item_plus if group == 1 else ~item_plus
    return np.where(match, 2.0 * gb, 2.0 * (1.0 - gb))


def _y_panels(model: AnalyticModel) -> list[tuple[np.ndarray, np.ndarray]]:
    """GL panels over the y-domain, split at the benchmark kink."""
    lo = model.theta - model.halfwidth * model.sigma_y
    hi = model.theta + model.halfwidth * model.sigma_y
    cuts = [lo]
    for c in sorted({model.theta_hat, model.theta}):
        if lo < c < hi:
            cuts.append(c)
    cuts.append(hi)
    t, w = _gl_rule(model.nodes)
    panels = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        panels.append((mid + half * t, half * w))
    return panels


def analytic_indices(model: AnalyticModel, personalized: bool | None = None) -> AnalyticIndices:
    """Quadrature values of (ENG, MIS, POL) under the limit approximation.

    MIS and POL are the raw limit-distribution integrals. ENG is per
    capita: clicks always total one per agent, so the engagement level is
    1 plus the highlighting mass carried by the *normalized* click
    distribution (the unnormalized integral inherits a spurious eta drift
    from the popularity denominator).

    personalized=None takes the single-ranking route iff lam == 1. Sweeps
    along lambda should pass personalized=True for every cell (including
    lam = 1) so the whole path uses one formula family.
    """
    if personalized is None:
        personalized = model.lam < 1.0
    eng_num = eng_den = mis = pol = 0.0
    for ys, wts in _y_panels(model):
        g = _norm_pdf(ys, model.theta, model.sigma_y)
        mu = _mu_h_values(ys, model, model.nodes)
        if not personalized:
            lam_vals = lambda_beta(
                (1.0 + model.eta * mu)
                / (model.M * (1.0 + model.eta * model.mu_bar) + model.eta * (mu - model.mu_bar)),
                model,
            )
            w_r = _match_weight(ys, 1, model)
            w_l = _match_weight(ys, 0, model)
            eng_num += float(np.dot(wts, (1.0 + mu) * lam_vals * g))
            eng_den += float(np.dot(wts, lam_vals * g))
            mis += float(np.dot(wts, np.abs(ys - model.theta) * lam_vals * g))
            pol += float(np.dot(wts, np.abs(ys * (w_r - w_l) * lam_vals) * g))
        else:
            lam_r = lambda_beta(_z_personalized(ys, 1, model), model)
            lam_l = lambda_beta(_z_personalized(ys, 0, model), model)
            w_r = _match_weight(ys, 1, model)
            w_l = _match_weight(ys, 0, model)
            mu_r = _mu_h_group_values(ys, 1, model, model.nodes)
            mu_l = _mu_h_group_values(ys, 0, model, model.nodes)
            rate_r = w_r * lam_r
            rate_l = w_l * lam_l
            eng_num += 0.5 * float(
                np.dot(wts, ((1.0 + 2.0 * mu_r) * rate_r + (1.0 + 2.0 * mu_l) * rate_l) * g)
            )
            eng_den += 0.5 * float(np.dot(wts, (rate_r + rate_l) * g))
            mis += 0.5 * float(np.dot(wts, np.abs(ys - model.theta) * (rate_r + rate_l) * g))
            pol += float(np.dot(wts, np.abs(ys * (rate_r - rate_l)) * g))
    return AnalyticIndices(eng=eng_num / eng_den, mis=mis, pol=pol)


def analytic_welfare(model: AnalyticModel, psi: float, personalized: bool | None = None) -> float:
    """psi * ENG_a - (1 - psi) * MIS_a * POL_a."""
    idx = analytic_indices(model, personalized=personalized)
    return psi * idx.eng - (1.0 - psi) * idx.mis * idx.pol


# =============================================================================
# Comparative statics
# =============================================================================

_EXPECTED_SIGNS = {
    # (parameter, flat): {index: +1 expected increasing, -1 decreasing}
    ("eta", False): {"eng": 1, "mis": 1, "pol": 1},
    ("eta", True): {"eng": 1, "mis": -1, "pol": -1},
    ("lambda", False): {"eng": -1, "pol": -1},
    ("lambda", True): {"eng": -1, "pol": -1},
}


@dataclass(frozen=True)
class SignTable:
    parameter: str
    grid: np.ndarray
    values: dict[str, np.ndarray]  # index -> values along grid
    derivatives: dict[str, np.ndarray]  # finite-difference estimates per grid point
    signs: dict[str, np.ndarray]  # sign of the derivative per grid point
    expected: dict[str, int]
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _finite_differences(grid: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Central differences inside the grid, one-sided at the ends."""
    d = np.empty_like(vals)
    d[0] = (vals[1] - vals[0]) / (grid[1] - grid[0])
    d[-1] = (vals[-1] - vals[-2]) / (grid[-1] - grid[-2])
    if len(grid) > 2:
        d[1:-1] = (vals[2:] - vals[:-2]) / (grid[2:] - grid[:-2])
    return d


def signs_from_values(
    parameter: str,
    grid: Sequence[float],
    values: dict[str, np.ndarray],
    flat: bool,
) -> SignTable:
    """Sign table for precomputed index curves (analytic or simulated)."""
    grid = np.asarray(grid, dtype=float)
    expected = _EXPECTED_SIGNS[(parameter, flat)]
    derivatives = {k: _finite_differences(grid, np.asarray(v, dtype=float)) for k, v in values.items()}
    signs = {k: np.sign(d).astype(int) for k, d in derivatives.items()}
    violations = []
    for key, want in expected.items():
        got = signs.get(key)
        if got is None:
            continue
        bad = np.nonzero(got != want)[0]
        for i in bad:
            violations.append(
                f"{key}: expected sign {want:+d} at {parameter}={grid[i]:g}, got {got[i]:+d}"
            )
    return SignTable(
        parameter=parameter,
        grid=grid,
        values={k: np.asarray(v, dtype=float) for k, v in values.items()},
        derivatives=derivatives,
        signs=signs,
        expected=expected,
        violations=violations,
    )


def comparative_statics_signs(
    model: AnalyticModel,
    parameter: Literal["eta", "lambda"],
    grid: Sequence[float],
) -> SignTable:
    """Finite-difference sign pattern of the analytic indices along a grid.

    (zeta0, zeta1) stay fixed across the grid, matching the propositions'
    constant-coefficient assumption. Lambda sweeps use the personalized
    formula family at every cell; eta sweeps follow the model's own lam.
    Violations are reported in the table, never raised.
    """
    if len(grid) < 5:
        raise ValueError("comparative statics need a grid of at least 5 values")
    eng, mis, pol = [], [], []
    for v in grid:
        m = model.with_(eta=float(v)) if parameter == "eta" else model.with_(lam=float(v))
        idx = analytic_indices(m, personalized=True if parameter == "lambda" else None)
        eng.append(idx.eng)
        mis.append(idx.mis)
        pol.append(idx.pol)
    flat = isinstance(model.highlight_mode, FlatHighlighting)
    return signs_from_values(parameter, grid, {"eng": np.array(eng), "mis": np.array(mis), "pol": np.array(pol)}, flat)


# =============================================================================
# Highlighting-mass peak
# =============================================================================

def x_star(model: AnalyticModel) -> float:
    """Offset from the highlighting center to the local maximum of
    p_A(x) f(x) on the upper side; annotations draw center +- x_star.

    Located by a coarse grid then golden-section refinement.
    """
    hm = model.highlight_mode
    center = model.theta if isinstance(hm, NonFlatHighlighting) and hm.center == "Truth" else model.theta_hat

    def mass(x):
        return model.p_active(np.asarray(x, dtype=float)) * _norm_pdf(
            np.asarray(x, dtype=float), model.theta, model.sigma_x
        )

    lo, hi = center, center + model.halfwidth * model.sigma_x
    grid = np.linspace(lo, hi, 601)
    best = int(np.argmax(mass(grid)))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    for _ in range(80):
        if float(mass(c)) > float(mass(d)):
            b = d
        else:
            a = c
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
    return 0.5 * (a + b) - center


# =============================================================================
# Linear rank fit
# =============================================================================

# 81 bins of width 0.2 with centers spanning [-8, 8]
FIT_BIN_EDGES = np.round(np.linspace(-8.1, 8.1, 82), 10)
FIT_RUNS = 1000
FIT_AGENTS = 5000
MIN_POPULATED_BINS = 10


@dataclass(frozen=True)
class RankFit:
    """OLS of binned mean final rank on binned mean popularity share."""

    zeta0: float
    zeta1: float
    r_squared: float
    intercept: float
    slope: float
    bin_centers: np.ndarray
    bin_pop: np.ndarray
    bin_rank: np.ndarray
    bin_count: np.ndarray


def fit_rank_ols(pop: np.ndarray, rank: np.ndarray) -> tuple[float, float, float]:
    """(intercept, slope, r_squared) of rank regressed on popularity."""
    pop = np.asarray(pop, dtype=float)
    rank = np.asarray(rank, dtype=float)
    if pop.size < 2 or float(np.ptp(pop)) == 0.0:
        raise FitError("rank fit needs at least two distinct popularity values")
    slope, intercept = np.polyfit(pop, rank, 1)
    pred = intercept + slope * pop
    ss_res = float(np.sum((rank - pred) ** 2))
    ss_tot = float(np.sum((rank - rank.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(intercept), float(slope), r2


def fit_linear_rank(
    cfg: ModelConfig,
    runs: int = FIT_RUNS,
    agents: int = FIT_AGENTS,
    threads: int | None = None,
) -> RankFit:
    """Fit the expected-rank approximation from simulation.

    Runs an ensemble (default: 1000 runs of 5000 agents over 20 items),
    bins every item's signal into the 81-bin / 0.2-width grid, and
    regresses the per-bin mean final rank on the per-bin mean final
    popularity share kappa_m / sum(kappa) (the finite-ensemble estimator of
    the expected popularity). Items beyond the bin range and empty bins are
    skipped; fewer than 10 populated bins is an error. Returns zeta0 =
    intercept and zeta1 = -slope of the fitted line.
    """
    fit_cfg = cfg.replace(T=runs, N=agents, window=min(cfg.window, agents))
    res = run_ensemble(fit_cfg, threads=threads, keep_windows=False)
    y = res.item_signals.ravel()
    kappa = res.final_kappa[:, 0, :]
    total = kappa.sum(axis=1, keepdims=True)
    shares = (kappa / total).ravel()
    ranks = res.final_ranks[:, 0, :].ravel().astype(float)

    n_bins = FIT_BIN_EDGES.size - 1
    idx = np.digitize(y, FIT_BIN_EDGES) - 1
    ok = (idx >= 0) & (idx < n_bins)
    pop_sum = np.bincount(idx[ok], weights=shares[ok], minlength=n_bins)
    rank_sum = np.bincount(idx[ok], weights=ranks[ok], minlength=n_bins)
    count = np.bincount(idx[ok], minlength=n_bins)

    populated = count > 0
    if int(populated.sum()) < MIN_POPULATED_BINS:
        raise FitError(
            f"only {int(populated.sum())} populated bins; need {MIN_POPULATED_BINS}"
        )
    centers = 0.5 * (FIT_BIN_EDGES[:-1] + FIT_BIN_EDGES[1:])
    bin_pop = pop_sum[populated] / count[populated]
    bin_rank = rank_sum[populated] / count[populated]
    intercept, slope, r2 = fit_rank_ols(bin_pop, bin_rank)
    return RankFit(
        zeta0=intercept,
        zeta1=-slope,
        r_squared=r2,
        intercept=intercept,
        slope=slope,
        bin_centers=centers[populated],
        bin_pop=bin_pop,
        bin_rank=bin_rank,
        bin_count=count[populated],
    )
