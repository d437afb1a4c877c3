"""Figure builders.

Each builder reads the relevant CSVs from the input directory, renders one
or more PNGs beside them, and returns the written paths. Rendering is
read-only with respect to the inputs; every figure's footer carries the
master seed and config hash from the frozen config copy so images are
traceable to the run that produced them.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, find_hist_files, load_run_context, load_table, numeric

SWEEP_REQUIRED = ("eta", "lambda", "mode", "index_name", "mean", "sd", "runs", "window", "master_seed")
HIST_REQUIRED = ("bin_left", "count", "frequency")
FIT_REQUIRED = ("mode", "eta", "bin_center", "mean_pop", "mean_rank", "n_items")
COEFF_REQUIRED = ("mode", "eta", "zeta0", "zeta1", "r_squared")
VARIANTS_REQUIRED = ("variant",) + SWEEP_REQUIRED

SURFACE_INDEX = {
    "eng_surface": "eng_per_capita",
    "pol_surface": "pol",
    "mis_surface": "mis",
    "hhi_surface": "hhi",
}

BIN_WIDTH = 0.2


def _footer(fig, in_dir: Path) -> None:
    seed, digest = load_run_context(in_dir)
    fig.text(0.99, 0.01, f"seed {seed} | config {digest}",
             ha="right", va="bottom", fontsize=7, color="0.4")


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _fmt(value: float) -> str:
    return f"{value:g}"


# ---------------------------------------------------------------------------
# histograms (clicking / highlighting behavior by signal)
# ---------------------------------------------------------------------------

def render_hist(in_dir: Path, kind: str) -> list[Path]:
    """One PNG per (mode, lambda): panels across eta showing the pooled
    window distribution of clicked (or highlighted) item signals."""
    stem = "clicking" if kind == "clicking_hist" else "highlighting"
    files = find_hist_files(in_dir, stem)
    if not files:
        raise SchemaError(f"{in_dir}: no hist_{stem}_* files found")
    groups: dict[tuple[str, float], list[tuple[float, Path]]] = defaultdict(list)
    for mode, eta, lam, path in files:
        groups[(mode, lam)].append((eta, path))

    theta, theta_hat = _config_centers(in_dir)
    written = []
    for (mode, lam), members in sorted(groups.items()):
        members.sort()
        fig, axes = plt.subplots(
            1, len(members), figsize=(3.2 * len(members), 2.8),
            sharey=True, squeeze=False,
        )
        for ax, (eta, path) in zip(axes[0], members):
            rows = load_table(path, HIST_REQUIRED)
            left = np.array(numeric(rows, "bin_left", path))
            freq = np.array(numeric(rows, "frequency", path))
            ax.bar(left, freq, width=BIN_WIDTH, align="edge",
                   color="#c44e52" if stem == "highlighting" else "#4c72b0")
            for value, style in ((theta, "-"), (theta_hat, "--")):
                if value is not None:
                    ax.axvline(value, color="0.3", lw=0.8, ls=style)
            ax.set_title(f"$\\eta$={_fmt(eta)}", fontsize=9)
            ax.set_xlabel("item signal $y$")
        axes[0][0].set_ylabel(f"{stem} frequency")
        fig.suptitle(f"{stem} by signal - {mode}, $\\lambda$={_fmt(lam)}", fontsize=10)
        fig.tight_layout(rect=(0, 0.03, 1, 0.95))
        _footer(fig, in_dir)
        written.append(_save(fig, in_dir / f"{kind}_{mode}_lam{_fmt(lam)}.png"))
    return written


def _config_centers(in_dir: Path):
    import json

    path = in_dir / "config.json"
    if not path.exists():
        return None, None
    doc = json.loads(path.read_text())
    return doc.get("theta"), doc.get("theta_hat")


# ---------------------------------------------------------------------------
# (eta, lambda) surfaces
# ---------------------------------------------------------------------------

def _sweep_pivot(rows, index_name, path):
    cells = {}
    for r in rows:
        if r["index_name"] == index_name:
            cells[(float(r["eta"]), float(r["lambda"]), r["mode"])] = float(r["mean"])
    if not cells:
        raise SchemaError(f"{path}: no rows for index {index_name!r}")
    etas = sorted({k[0] for k in cells})
    lams = sorted({k[1] for k in cells})
    modes = sorted({k[2] for k in cells})
    grids = {}
    for mode in modes:
        grid = np.full((len(etas), len(lams)), np.nan)
        for (e, l, m), v in cells.items():
            if m == mode:
                grid[etas.index(e), lams.index(l)] = v
        grids[mode] = grid
    return etas, lams, grids


def render_surface(in_dir: Path, kind: str) -> list[Path]:
    """Heatmap of one index over the (eta, lambda) grid, one panel per mode
    with a color scale shared across modes."""
    path = in_dir / "sweep.csv"
    rows = load_table(path, SWEEP_REQUIRED)
    index_name = SURFACE_INDEX[kind]
    etas, lams, grids = _sweep_pivot(rows, index_name, path)
    vmin = min(np.nanmin(g) for g in grids.values())
    vmax = max(np.nanmax(g) for g in grids.values())
    fig, axes = plt.subplots(1, len(grids), figsize=(4.2 * len(grids), 3.4), squeeze=False)
    for ax, (mode, grid) in zip(axes[0], sorted(grids.items())):
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis",
                       vmin=vmin, vmax=vmax)
        ax.set_xticks(range(len(lams)), [_fmt(v) for v in lams])
        ax.set_yticks(range(len(etas)), [_fmt(v) for v in etas])
        ax.set_xlabel("$\\lambda$")
        ax.set_ylabel("$\\eta$")
        ax.set_title(mode, fontsize=10)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle(index_name, fontsize=11)
    fig.tight_layout(rect=(0, 0.03, 1, 0.94))
    _footer(fig, in_dir)
    return [_save(fig, in_dir / f"{kind}.png")]


def render_welfare_surface(in_dir: Path) -> list[Path]:
    """Welfare heatmaps: one row of panels per mode, one column per psi."""
    path = in_dir / "sweep.csv"
    rows = load_table(path, SWEEP_REQUIRED)
    names = sorted({r["index_name"] for r in rows if r["index_name"].startswith("welfare@")},
                   key=lambda s: float(s.split("@")[1]))
    if not names:
        raise SchemaError(f"{path}: no welfare@psi rows present")
    modes = sorted({r["mode"] for r in rows})
    fig, axes = plt.subplots(
        len(modes), len(names), figsize=(4.2 * len(names), 3.2 * len(modes)),
        squeeze=False,
    )
    for i, mode in enumerate(modes):
        for j, name in enumerate(names):
            etas, lams, grids = _sweep_pivot(rows, name, path)
            grid = grids[mode]
            ax = axes[i][j]
            im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
            ax.set_xticks(range(len(lams)), [_fmt(v) for v in lams])
            ax.set_yticks(range(len(etas)), [_fmt(v) for v in etas])
            ax.set_xlabel("$\\lambda$")
            ax.set_ylabel("$\\eta$")
            ax.set_title(f"{mode}, $\\psi$={name.split('@')[1]}", fontsize=10)
            fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle("welfare", fontsize=11)
    fig.tight_layout(rect=(0, 0.02, 1, 0.95))
    _footer(fig, in_dir)
    return [_save(fig, in_dir / "welfare_surface.png")]


# ---------------------------------------------------------------------------
# benchmark comparison curves
# ---------------------------------------------------------------------------

def render_benchmark_compare(in_dir: Path) -> list[Path]:
    """Common vs heterogeneous benchmark curves over eta with 95% bands."""
    path = in_dir / "variants.csv"
    rows = load_table(path, VARIANTS_REQUIRED)
    variants = sorted({r["variant"] for r in rows})
    indices = ("eng_per_capita", "pol", "mis")
    styles = {"common": ("-", "#4c72b0"), "heterogeneous": ("--", "#dd8452")}
    written = []
    for lam in sorted({float(r["lambda"]) for r in rows}):
        fig, axes = plt.subplots(1, len(indices), figsize=(3.6 * len(indices), 3.0))
        for ax, index_name in zip(np.atleast_1d(axes), indices):
            for variant in variants:
                sub = [r for r in rows
                       if r["variant"] == variant and r["index_name"] == index_name
                       and float(r["lambda"]) == lam]
                sub.sort(key=lambda r: float(r["eta"]))
                if not sub:
                    raise SchemaError(f"{path}: no rows for index {index_name!r}")
                etas = np.array([float(r["eta"]) for r in sub])
                means = np.array([float(r["mean"]) for r in sub])
                half = 1.96 * np.array([float(r["sd"]) / np.sqrt(float(r["runs"])) for r in sub])
                ls, color = styles.get(variant, ("-.", "0.4"))
                ax.plot(etas, means, ls, color=color, label=variant)
                ax.fill_between(etas, means - half, means + half, color=color, alpha=0.25)
            ax.set_xlabel("$\\eta$")
            ax.set_title(index_name, fontsize=10)
        np.atleast_1d(axes)[0].legend(fontsize=8)
        fig.suptitle(f"benchmark comparison, $\\lambda$={_fmt(lam)}", fontsize=10)
        fig.tight_layout(rect=(0, 0.03, 1, 0.93))
        _footer(fig, in_dir)
        written.append(_save(fig, in_dir / f"benchmark_compare_lam{_fmt(lam)}.png"))
    return written


# ---------------------------------------------------------------------------
# rank-vs-popularity fit
# ---------------------------------------------------------------------------

def render_rank_fit(in_dir: Path) -> list[Path]:
    """Binned mean rank vs mean popularity scatter with the fitted line."""
    scatter_path = in_dir / "rank_fit.csv"
    coeff_path = in_dir / "rank_fit_coeffs.csv"
    scatter = load_table(scatter_path, FIT_REQUIRED)
    coeffs = load_table(coeff_path, COEFF_REQUIRED)
    coeff_map = {(r["mode"], float(r["eta"])): r for r in coeffs}
    panels = sorted({(r["mode"], float(r["eta"])) for r in scatter})
    fig, axes = plt.subplots(1, len(panels), figsize=(3.4 * len(panels), 3.0), squeeze=False)
    for ax, (mode, eta) in zip(axes[0], panels):
        sub = [r for r in scatter if r["mode"] == mode and float(r["eta"]) == eta]
        pop = np.array([float(r["mean_pop"]) for r in sub])
        rank = np.array([float(r["mean_rank"]) for r in sub])
        ax.scatter(pop, rank, s=12, color="#4c72b0", alpha=0.8)
        coeff = coeff_map.get((mode, eta))
        if coeff is not None:
            xs = np.linspace(pop.min(), pop.max(), 50)
            zeta0, zeta1 = float(coeff["zeta0"]), float(coeff["zeta1"])
            ax.plot(xs, zeta0 - zeta1 * xs, color="#c44e52",
                    label=f"$R^2$={float(coeff['r_squared']):.3f}")
            ax.legend(fontsize=8)
        ax.set_xlabel("mean popularity share")
        ax.set_ylabel("mean final rank")
        ax.set_title(f"{mode}, $\\eta$={_fmt(eta)}", fontsize=10)
    fig.tight_layout(rect=(0, 0.03, 1, 0.97))
    _footer(fig, in_dir)
    return [_save(fig, in_dir / "rank_fit.png")]


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

BUILDERS = {
    "clicking_hist": lambda d: render_hist(d, "clicking_hist"),
    "highlighting_hist": lambda d: render_hist(d, "highlighting_hist"),
    "eng_surface": lambda d: render_surface(d, "eng_surface"),
    "pol_surface": lambda d: render_surface(d, "pol_surface"),
    "mis_surface": lambda d: render_surface(d, "mis_surface"),
    "hhi_surface": lambda d: render_surface(d, "hhi_surface"),
    "welfare_surface": render_welfare_surface,
    "benchmark_compare": render_benchmark_compare,
    "rank_fit": render_rank_fit,
}

INPUT_HINTS = {
    "clicking_hist": "hist_clicking_*.csv",
    "highlighting_hist": "hist_highlighting_*.csv",
    "eng_surface": "sweep.csv",
    "pol_surface": "sweep.csv",
    "mis_surface": "sweep.csv",
    "hhi_surface": "sweep.csv",
    "welfare_surface": "sweep.csv",
    "benchmark_compare": "variants.csv",
    "rank_fit": "rank_fit.csv",
}


def has_inputs(in_dir: Path, kind: str) -> bool:
    pattern = INPUT_HINTS[kind]
    return any(in_dir.glob(pattern))


def render(in_dir: Path, kind: str) -> list[Path]:
    """Render one figure kind; 'all' renders every kind whose inputs exist."""
    if kind == "all":
        kinds = [k for k in BUILDERS if has_inputs(in_dir, k)]
        if not kinds:
            raise SchemaError(f"{in_dir}: no renderable inputs found")
        written = []
        for k in kinds:
            written.extend(BUILDERS[k](in_dir))
        return written
    if kind not in BUILDERS:
        raise SchemaError(f"unknown figure kind {kind!r}; choose from {sorted(BUILDERS)} or 'all'")
    return BUILDERS[kind](in_dir)
