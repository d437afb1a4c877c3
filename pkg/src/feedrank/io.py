"""Sweep orchestration and all file emission.

Outputs are deterministic byte-for-byte given (spec, master_seed): floats
are formatted to 9 significant digits, column order is fixed, and every
row carries the master seed plus the cell coordinates needed to reproduce
it in isolation. Each output directory also receives a frozen copy of the
resolved base config (config.json), so downstream figures are
self-describing.

Histograms are emitted as data (bin_left, count, frequency), never as
images; the clicking frequency is per window click, the highlighting
frequency is highlights per window click, both pooled over the ensemble.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import (
    ConfigError,
    FlatHighlighting,
    ModelConfig,
    NonFlatHighlighting,
    config_from_dict,
    config_to_dict,
)
from .driver import EnsembleResult, RunResult, run_ensemble

__all__ = [
    "SweepSpec",
    "SweepOutcome",
    "FIGURE_KINDS",
    "SWEEP_COLUMNS",
    "load_sweep_spec",
    "with_mode_kind",
    "run_sweep",
    "emit_report",
    "write_config_echo",
    "write_event_log",
    "report_rows",
    "write_rows_csv",
    "write_rows_json",
    "read_rows_csv",
]

FIGURE_KINDS = (
    "clicking_hist",
    "highlighting_hist",
    "eng_surface",
    "pol_surface",
    "mis_surface",
    "hhi_surface",
    "welfare_surface",
    "benchmark_compare",
)

SWEEP_COLUMNS = (
    "eta", "lambda", "mode", "index_name", "mean", "sd", "runs", "window", "master_seed",
)
HIST_COLUMNS = ("bin_left", "count", "frequency")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _round9(value: float) -> float:
    return float(format(value, ".9g"))


# =============================================================================
# Sweep specification
# =============================================================================

@dataclass(frozen=True)
class SweepSpec:
    """An (eta, lambda) grid over one or both highlighting modes."""

    base: ModelConfig
    eta_grid: tuple[float, ...]
    lambda_grid: tuple[float, ...]
    modes: tuple[str, ...]
    psi_list: tuple[float, ...] = (0.0, 1.0)
    figures: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name, grid in (("eta_grid", self.eta_grid), ("lambda_grid", self.lambda_grid)):
            if not grid:
                raise ConfigError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"{name} must be strictly increasing, got {grid}")
        if not self.modes or any(m not in ("Flat", "NonFlat") for m in self.modes):
            raise ConfigError(f"modes must be a nonempty subset of Flat/NonFlat, got {self.modes}")
        if any(not 0.0 <= p <= 1.0 for p in self.psi_list):
            raise ConfigError(f"psi_list values must lie in [0, 1], got {self.psi_list}")
        unknown = set(self.figures) - set(FIGURE_KINDS)
        if unknown:
            raise ConfigError(f"unknown figure kind(s): {sorted(unknown)}")


_SWEEP_KEYS = {"base", "eta_grid", "lambda_grid", "modes", "psi_list", "figures"}


def load_sweep_spec(path: str | Path) -> SweepSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("sweep spec must be a JSON object")
    unknown = set(doc) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) in sweep spec: {sorted(unknown)}")
    if "base" not in doc or "eta_grid" not in doc or "lambda_grid" not in doc:
        raise ConfigError("sweep spec needs base, eta_grid, and lambda_grid")
    base = config_from_dict(doc["base"])
    default_mode = "Flat" if isinstance(base.highlight_mode, FlatHighlighting) else "NonFlat"
    return SweepSpec(
        base=base,
        eta_grid=tuple(float(v) for v in doc["eta_grid"]),
        lambda_grid=tuple(float(v) for v in doc["lambda_grid"]),
        modes=tuple(doc.get("modes", [default_mode])),
        psi_list=tuple(float(p) for p in doc.get("psi_list", [0.0, 1.0])),
        figures=tuple(doc.get("figures", [])),
    )


def with_mode_kind(cfg: ModelConfig, kind: str) -> ModelConfig:
    """Retag the highlighting mode, keeping the mode's own parameters when
    the config already uses that kind and defaults otherwise."""
    if kind == "Flat":
        mode = cfg.highlight_mode if isinstance(cfg.highlight_mode, FlatHighlighting) else FlatHighlighting()
    elif kind == "NonFlat":
        mode = cfg.highlight_mode if isinstance(cfg.highlight_mode, NonFlatHighlighting) else NonFlatHighlighting()
    else:
        raise ConfigError(f"unknown highlighting kind {kind!r}")
    return cfg.replace(highlight_mode=mode)


# =============================================================================
# Report rows
# =============================================================================

def report_rows(
    result: EnsembleResult,
    mode: str,
    extra: dict[str, Any] | None = None,
) -> list[dict[str, Any]]:
    """One row per index: eta, lambda, mode, index_name, mean, sd, runs,
    window, master_seed (plus any extra leading columns)."""
    cfg = result.cfg
    rows = []
    for name, mean, sd in result.report.rows():
        row = dict(extra or {})
        row.update(
            eta=cfg.eta,
            lam=cfg.lam,
            mode=mode,
            index_name=name,
            mean=mean,
            sd=sd,
            runs=result.report.runs,
            window=result.report.window,
            master_seed=cfg.master_seed,
        )
        rows.append(row)
    return rows


def _row_values(row: dict[str, Any], columns: Sequence[str]) -> list[Any]:
    out = []
    for col in columns:
        key = "lam" if col == "lambda" else col
        out.append(row[key])
    return out


def write_rows_csv(path: Path, rows: list[dict[str, Any]], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in _row_values(row, columns)])


def write_rows_json(path: Path, rows: list[dict[str, Any]], columns: Sequence[str]) -> None:
    """JSON mirror of the CSV schema with identical (9-digit) values."""
    payload = {
        "columns": list(columns),
        "rows": [
            [_round9(v) if isinstance(v, float) else v for v in _row_values(row, columns)]
            for row in rows
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_rows_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_config_echo(out_dir: Path, cfg: ModelConfig) -> Path:
    path = out_dir / "config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def write_event_log(path: Path, results: Sequence[tuple[int, RunResult]]) -> None:
    """One CSV row per outcome: run_id, n, group, item_index, y_m,
    highlighted, rank_seen. Enables offline replay of the tallies.

    Signals carry full float precision (17 significant digits) so indices
    recomputed from the log equal the in-memory values exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run_id", "n", "group", "item_index", "y_m", "highlighted", "rank_seen"])
        for run_id, result in results:
            for ev in result.events:
                writer.writerow(
                    [run_id, ev.n, ev.group, ev.item, format(ev.y, ".17g"),
                     int(ev.highlighted), ev.rank_seen]
                )


def _hist_rows(edges: np.ndarray, counts: np.ndarray, total_events: int) -> list[dict[str, Any]]:
    return [
        {"bin_left": float(edges[i]), "count": int(counts[i]), "frequency": counts[i] / total_events}
        for i in range(counts.size)
    ]


def _cell_tag(mode: str, eta: float, lam: float) -> str:
    return f"{mode}_eta{eta:g}_lam{lam:g}"


def write_cell_histograms(out_dir: Path, result: EnsembleResult, mode: str) -> list[Path]:
    cfg = result.cfg
    total = result.report.runs * result.report.window
    tag = _cell_tag(mode, cfg.eta, cfg.lam)
    paths = []
    for kind, counts in (
        ("clicking", result.hist_clicking),
        ("highlighting", result.hist_highlighting),
    ):
        path = out_dir / f"hist_{kind}_{tag}.csv"
        write_rows_csv(path, _hist_rows(result.hist_edges, counts, total), HIST_COLUMNS)
        paths.append(path)
    return paths


# =============================================================================
# Sweep driver
# =============================================================================

@dataclass
class SweepOutcome:
    rows: list[dict[str, Any]]
    failures: list[dict[str, Any]] = field(default_factory=list)
    csv_path: Path | None = None
    json_path: Path | None = None

    @property
    def ok(self) -> bool:
        return not self.failures


def run_sweep(spec: SweepSpec, out_dir: str | Path, threads: int | None = None) -> SweepOutcome:
    """One ensemble per (mode, eta, lambda) cell.

    All cells share the base master seed, so run streams are paired across
    cells. Per-cell failures are recorded with their coordinates and the
    sweep continues; results land in sweep.csv plus a JSON mirror, with
    optional per-cell histogram files for the histogram figure kinds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    want_hists = bool({"clicking_hist", "highlighting_hist"} & set(spec.figures))
    outcome = SweepOutcome(rows=[])
    for mode in spec.modes:
        mode_cfg = with_mode_kind(spec.base, mode)
        for eta in spec.eta_grid:
            for lam in spec.lambda_grid:
                cfg = mode_cfg.replace(eta=float(eta), lam=float(lam))
                try:
                    result = run_ensemble(cfg, psi_list=spec.psi_list, threads=threads,
                                          keep_windows=False)
                except Exception as exc:  # cell failure: record and continue
                    outcome.failures.append(
                        {"mode": mode, "eta": eta, "lam": lam, "error": f"{type(exc).__name__}: {exc}"}
                    )
                    continue
                outcome.rows.extend(report_rows(result, mode))
                if want_hists:
                    write_cell_histograms(out, result, mode)
    outcome.csv_path, outcome.json_path = emit_report(outcome.rows, out)
    write_config_echo(out, spec.base)
    if outcome.failures:
        write_rows_csv(out / "failures.csv", outcome.failures,
                       ("mode", "eta", "lambda", "error"))
    return outcome


def emit_report(rows: list[dict[str, Any]], out_dir: str | Path,
                stem: str = "sweep") -> tuple[Path, Path]:
    """Write the report rows as <stem>.csv and a JSON mirror."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    try:
        write_rows_csv(csv_path, rows, SWEEP_COLUMNS)
        write_rows_json(json_path, rows, SWEEP_COLUMNS)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return csv_path, json_path
