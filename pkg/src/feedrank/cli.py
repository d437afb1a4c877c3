"""Command-line entry points.

Subcommands: simulate (one ensemble), sweep (an (eta, lambda) grid),
analytic (tabulate the limit distributions), fit-rank (the expected-rank
fit), variants (heterogeneous-benchmark and non-centered entry points).

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analytic as an
from . import io as fio
from .config import (
    CommonBenchmark,
    ConfigError,
    HeterogeneousBenchmark,
    load_config,
)
from .driver import run_ensemble, run_once
from .model import WorldResampleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--threads", type=int, default=None, help="worker pool cap")
    p.add_argument("--out-dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedrank",
        description="Simulate and analyze popularity- and personalization-driven ranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one ensemble and emit its index report")
    _add_common(p)
    p.add_argument("--runs", type=int, default=None, help="override T")
    p.add_argument("--out", default=None, help="report CSV path (default <out-dir>/simulate.csv)")
    p.add_argument("--emit-events", default="off",
                   help="event-log CSV path, or 'off' (re-traces every run; keep T small)")
    p.add_argument("--psi", type=float, nargs="+", default=[0.0, 1.0],
                   help="welfare weights to report")

    p = sub.add_parser("sweep", help="run an (eta, lambda) grid from a sweep spec")
    p.add_argument("--spec", required=True, help="sweep spec JSON (base config + grids)")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default=".", help="output directory")

    p = sub.add_parser("analytic", help="tabulate mu_H, pi, LCD, LHD on a signal grid")
    _add_common(p)
    p.add_argument("--zeta0", type=float, default=None)
    p.add_argument("--zeta1", type=float, default=None)
    p.add_argument("--fit-runs", type=int, default=an.FIT_RUNS,
                   help="rank-fit runs when zeta0/zeta1 are not supplied")
    p.add_argument("--fit-agents", type=int, default=an.FIT_AGENTS)
    p.add_argument("--y-min", type=float, default=-8.0)
    p.add_argument("--y-max", type=float, default=8.0)
    p.add_argument("--points", type=int, default=161)

    p = sub.add_parser("fit-rank", help="fit the expected-rank approximation")
    _add_common(p)
    p.add_argument("--runs", type=int, default=an.FIT_RUNS)
    p.add_argument("--agents", type=int, default=an.FIT_AGENTS)
    p.add_argument("--eta", type=float, nargs="+", default=None,
                   help="eta values to fit (default: the config's)")
    p.add_argument("--modes", nargs="+", choices=["Flat", "NonFlat"], default=None,
                   help="highlighting modes to fit (default: the config's)")

    p = sub.add_parser("variants", help="heterogeneous-benchmark / non-centered ensembles")
    _add_common(p)
    p.add_argument("--kind", required=True, choices=["heterogeneous", "noncentered"])
    p.add_argument("--eta-grid", type=float, nargs="+", default=None,
                   help="eta values to run (default: the config's)")
    p.add_argument("--psi", type=float, nargs="+", default=[0.0, 1.0])

    return parser


def _load(args) -> "fio.ModelConfig":
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(master_seed=args.seed)
    return cfg


def _mode_name(cfg) -> str:
    return "Flat" if cfg.is_flat else "NonFlat"


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.runs is not None:
        cfg = cfg.replace(T=args.runs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_ensemble(cfg, psi_list=args.psi, threads=args.threads, keep_windows=False)
    rows = fio.report_rows(result, _mode_name(cfg))
    out = Path(args.out) if args.out else out_dir / "simulate.csv"
    fio.write_rows_csv(out, rows, fio.SWEEP_COLUMNS)
    fio.write_rows_json(out.with_suffix(".json"), rows, fio.SWEEP_COLUMNS)
    fio.write_config_echo(out_dir, cfg)
    if args.emit_events != "off":
        traces = [(t, run_once(cfg, run_index=t)) for t in range(cfg.T)]
        fio.write_event_log(Path(args.emit_events), traces)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = fio.load_sweep_spec(args.spec)
    if args.seed is not None:
        spec = fio.SweepSpec(
            base=spec.base.replace(master_seed=args.seed),
            eta_grid=spec.eta_grid, lambda_grid=spec.lambda_grid,
            modes=spec.modes, psi_list=spec.psi_list, figures=spec.figures,
        )
    outcome = fio.run_sweep(spec, args.out_dir, threads=args.threads)
    print(f"wrote {outcome.csv_path} ({len(outcome.rows)} rows)")
    if not outcome.ok:
        for failure in outcome.failures:
            print(f"cell failed: {failure}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_analytic(args) -> int:
    cfg = _load(args)
    if (args.zeta0 is None) != (args.zeta1 is None):
        raise ConfigError("supply both --zeta0 and --zeta1, or neither")
    if args.zeta0 is None:
        fit = an.fit_linear_rank(cfg, runs=args.fit_runs, agents=args.fit_agents,
                                 threads=args.threads)
        zeta0, zeta1 = fit.zeta0, fit.zeta1
    else:
        zeta0, zeta1 = args.zeta0, args.zeta1
    model = an.AnalyticModel.from_config(cfg, zeta0=zeta0, zeta1=zeta1)
    ys = np.linspace(args.y_min, args.y_max, args.points)
    mu = an.mu_H(ys, model)
    pis = an.pi(ys, model)
    lcds = an.lcd(ys, model)
    lhds = an.lhd(ys, model)
    rows = [
        {"y": float(ys[i]), "mu_H": float(mu[i]), "pi": float(pis[i]),
         "lcd": float(lcds[i]), "lhd": float(lhds[i]),
         "mode": _mode_name(cfg), "eta": cfg.eta, "lam": cfg.lam,
         "zeta0": zeta0, "zeta1": zeta1, "x_star": an.x_star(model)}
        for i in range(ys.size)
    ]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "analytic.csv"
    fio.write_rows_csv(path, rows, ("y", "mu_H", "pi", "lcd", "lhd", "mode",
                                    "eta", "lambda", "zeta0", "zeta1", "x_star"))
    fio.write_config_echo(out_dir, cfg)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_fit_rank(args) -> int:
    cfg = _load(args)
    etas = args.eta if args.eta is not None else [cfg.eta]
    modes = args.modes if args.modes is not None else [_mode_name(cfg)]
    scatter_rows, coeff_rows = [], []
    for mode in modes:
        for eta in etas:
            fit_cfg = fio.with_mode_kind(cfg, mode).replace(eta=float(eta))
            fit = an.fit_linear_rank(fit_cfg, runs=args.runs, agents=args.agents,
                                     threads=args.threads)
            for c, p, r, k in zip(fit.bin_centers, fit.bin_pop, fit.bin_rank, fit.bin_count):
                scatter_rows.append({"mode": mode, "eta": eta, "bin_center": float(c),
                                     "mean_pop": float(p), "mean_rank": float(r),
                                     "n_items": int(k)})
            coeff_rows.append({"mode": mode, "eta": eta, "zeta0": fit.zeta0,
                               "zeta1": fit.zeta1, "r_squared": fit.r_squared,
                               "runs": args.runs, "agents": args.agents})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fio.write_rows_csv(out_dir / "rank_fit.csv", scatter_rows,
                       ("mode", "eta", "bin_center", "mean_pop", "mean_rank", "n_items"))
    fio.write_rows_csv(out_dir / "rank_fit_coeffs.csv", coeff_rows,
                       ("mode", "eta", "zeta0", "zeta1", "r_squared", "runs", "agents"))
    fio.write_config_echo(out_dir, cfg)
    print(f"wrote {out_dir / 'rank_fit.csv'}")
    return EXIT_OK


def _cmd_variants(args) -> int:
    cfg = _load(args)
    etas = args.eta_grid if args.eta_grid is not None else [cfg.eta]
    rows = []
    if args.kind == "heterogeneous":
        if not isinstance(cfg.benchmark_mode, HeterogeneousBenchmark):
            raise ConfigError("variants --kind heterogeneous needs benchmark_mode Heterogeneous")
        pairs = [("common", cfg.replace(benchmark_mode=CommonBenchmark())),
                 ("heterogeneous", cfg)]
    else:
        pairs = [("noncentered", cfg)]
    for variant, vcfg in pairs:
        for eta in etas:
            result = run_ensemble(vcfg.replace(eta=float(eta)), psi_list=args.psi,
                                  threads=args.threads, keep_windows=False)
            rows.extend(fio.report_rows(result, _mode_name(vcfg), extra={"variant": variant}))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = ("variant",) + fio.SWEEP_COLUMNS
    fio.write_rows_csv(out_dir / "variants.csv", rows, columns)
    fio.write_rows_json(out_dir / "variants.json", rows, columns)
    fio.write_config_echo(out_dir, cfg)
    print(f"wrote {out_dir / 'variants.csv'}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "analytic": _cmd_analytic,
    "fit-rank": _cmd_fit_rank,
    "variants": _cmd_variants,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WorldResampleError, an.FitError, an.QuadratureError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
