import csv
import json

import numpy as np
import pytest

from feedrank import io as fio
from feedrank.cli import main
from feedrank.config import (
    ConfigError,
    baseline_config,
    config_from_dict,
    config_to_dict,
)
from feedrank.driver import run_ensemble, run_once
from feedrank.ranking import replay_popularity


def _cfg_file(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config_to_dict(cfg)))
    return path


def _spec_file(tmp_path, cfg, name="spec.json", **overrides):
    doc = {
        "base": config_to_dict(cfg),
        "eta_grid": [0.0, 10.0],
        "lambda_grid": [0.5, 1.0],
        "modes": ["Flat", "NonFlat"],
        "psi_list": [0.0, 1.0],
        "figures": [],
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def small_cfg():
    return baseline_config(N=3000, T=4, window=600, master_seed=55)


# ---------------------------------------------------------------------------
# sweep spec validation
# ---------------------------------------------------------------------------

def test_sweep_spec_rejects_unsorted_grid(small_cfg):
    with pytest.raises(ConfigError, match="strictly increasing"):
        fio.SweepSpec(base=small_cfg, eta_grid=(1.0, 0.0), lambda_grid=(1.0,),
                      modes=("Flat",))


def test_sweep_spec_rejects_unknown_figure(small_cfg):
    with pytest.raises(ConfigError, match="figure"):
        fio.SweepSpec(base=small_cfg, eta_grid=(0.0,), lambda_grid=(1.0,),
                      modes=("Flat",), figures=("pie_chart",))


def test_sweep_spec_unknown_key(tmp_path, small_cfg):
    path = _spec_file(tmp_path, small_cfg)
    doc = json.loads(path.read_text())
    doc["etas"] = [1]
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="etas"):
        fio.load_sweep_spec(path)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def test_sweep_row_count_and_schema(tmp_path, small_cfg):
    spec = fio.load_sweep_spec(_spec_file(tmp_path, small_cfg))
    outcome = fio.run_sweep(spec, tmp_path / "out")
    assert outcome.ok
    header, rows = fio.read_rows_csv(outcome.csv_path)
    assert header == list(fio.SWEEP_COLUMNS)
    # |modes| * |eta| * |lambda| * |index set| with 7 indices + 2 psi values
    assert len(rows) == 2 * 2 * 2 * 9
    assert (tmp_path / "out" / "config.json").exists()
    echoed = config_from_dict(json.loads((tmp_path / "out" / "config.json").read_text()))
    assert echoed == small_cfg


def test_sweep_byte_identical_reruns(tmp_path, small_cfg):
    spec = fio.load_sweep_spec(_spec_file(tmp_path, small_cfg))
    a = fio.run_sweep(spec, tmp_path / "a")
    b = fio.run_sweep(spec, tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    assert a.json_path.read_bytes() == b.json_path.read_bytes()


def test_csv_json_round_trip(tmp_path, small_cfg):
    result = run_ensemble(small_cfg, psi_list=(0.0, 1.0))
    rows = fio.report_rows(result, "NonFlat")
    fio.write_rows_csv(tmp_path / "r.csv", rows, fio.SWEEP_COLUMNS)
    fio.write_rows_json(tmp_path / "r.json", rows, fio.SWEEP_COLUMNS)
    header, csv_rows = fio.read_rows_csv(tmp_path / "r.csv")
    payload = json.loads((tmp_path / "r.json").read_text())
    assert payload["columns"] == header
    for crow, jrow in zip(csv_rows, payload["rows"]):
        for ctext, jval in zip(crow, jrow):
            if isinstance(jval, float):
                assert float(ctext) == jval
            else:
                assert ctext == str(jval)


def test_empty_results_header_only(tmp_path):
    csv_path, json_path = fio.emit_report([], tmp_path)
    header, rows = fio.read_rows_csv(csv_path)
    assert header == list(fio.SWEEP_COLUMNS)
    assert rows == []
    assert json.loads(json_path.read_text())["rows"] == []


def test_single_cell_sweep_matches_simulate(tmp_path, small_cfg):
    cfg = fio.with_mode_kind(small_cfg, "NonFlat").replace(eta=10.0, lam=0.5)
    spec = fio.SweepSpec(base=cfg, eta_grid=(10.0,), lambda_grid=(0.5,),
                         modes=("NonFlat",), psi_list=(0.0, 1.0))
    outcome = fio.run_sweep(spec, tmp_path / "cell")
    direct = fio.report_rows(run_ensemble(cfg, psi_list=(0.0, 1.0)), "NonFlat")
    fio.write_rows_csv(tmp_path / "direct.csv", direct, fio.SWEEP_COLUMNS)
    _, sweep_rows = fio.read_rows_csv(outcome.csv_path)
    _, direct_rows = fio.read_rows_csv(tmp_path / "direct.csv")
    assert sweep_rows == direct_rows


def test_cell_histogram_files(tmp_path, small_cfg):
    spec = fio.SweepSpec(base=small_cfg, eta_grid=(0.0,), lambda_grid=(1.0,),
                         modes=("NonFlat",), figures=("clicking_hist", "highlighting_hist"))
    fio.run_sweep(spec, tmp_path / "h")
    click_path = tmp_path / "h" / "hist_clicking_NonFlat_eta0_lam1.csv"
    high_path = tmp_path / "h" / "hist_highlighting_NonFlat_eta0_lam1.csv"
    assert click_path.exists() and high_path.exists()
    header, rows = fio.read_rows_csv(click_path)
    assert header == list(fio.HIST_COLUMNS)
    assert len(rows) == 81
    total = small_cfg.T * small_cfg.window
    counts = np.array([int(r[1]) for r in rows])
    freqs = np.array([float(r[2]) for r in rows])
    assert counts.sum() <= total
    assert np.allclose(freqs, counts / total)


def test_event_log_replay(tmp_path, small_cfg):
    cfg = small_cfg.replace(N=500, T=1, window=100, eta=4.0, lam=0.5)
    result = run_once(cfg, run_index=0)
    path = tmp_path / "events.csv"
    fio.write_event_log(path, [(0, result)])
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == cfg.N
    groups = np.array([1 if r["group"] == "R" else 0 for r in rows])
    items = np.array([int(r["item_index"]) for r in rows])
    highs = np.array([int(r["highlighted"]) for r in rows], dtype=bool)
    rebuilt = replay_popularity(groups, items, highs, cfg.eta, cfg.lam, cfg.M)
    assert np.allclose(rebuilt, result.final_state.kappa, atol=1e-9, rtol=0)
    ranks = [int(r["rank_seen"]) for r in rows]
    assert min(ranks) >= 1 and max(ranks) <= cfg.M


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_simulate_and_outputs(tmp_path, small_cfg, capsys):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    code = main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "sim"),
                 "--runs", "3"])
    assert code == 0
    header, rows = fio.read_rows_csv(tmp_path / "sim" / "simulate.csv")
    assert header == list(fio.SWEEP_COLUMNS)
    assert all(r[6] == "3" for r in rows)  # runs column reflects override


def test_cli_config_error_exit_code(tmp_path, small_cfg):
    doc = config_to_dict(small_cfg)
    doc["betta"] = 2.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["simulate", "--config", str(path)]) == 2


def test_cli_runtime_failure_exit_code(tmp_path, small_cfg):
    # impossible benchmark: every cell exhausts the item redraw budget
    broken = small_cfg.replace(theta_hat=1e6)
    spec_path = _spec_file(tmp_path, broken, eta_grid=[0.0], lambda_grid=[1.0],
                           modes=["NonFlat"])
    code = main(["sweep", "--spec", str(spec_path), "--out-dir", str(tmp_path / "fail")])
    assert code == 3
    # the sweep still emits its (empty) report and the failure record
    header, rows = fio.read_rows_csv(tmp_path / "fail" / "sweep.csv")
    assert rows == []
    _, failures = fio.read_rows_csv(tmp_path / "fail" / "failures.csv")
    assert len(failures) == 1


def test_cli_seed_override_changes_rows(tmp_path, small_cfg):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "s1")])
    main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "s2"),
          "--seed", "99"])
    _, r1 = fio.read_rows_csv(tmp_path / "s1" / "simulate.csv")
    _, r2 = fio.read_rows_csv(tmp_path / "s2" / "simulate.csv")
    assert r1 != r2
    assert all(row[8] == "99" for row in r2)  # master_seed column


def test_cli_emit_events(tmp_path, small_cfg):
    cfg = small_cfg.replace(N=200, T=2, window=50)
    cfg_path = _cfg_file(tmp_path, cfg)
    events_path = tmp_path / "events.csv"
    code = main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "ev"),
                 "--emit-events", str(events_path)])
    assert code == 0
    with open(events_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == cfg.N * cfg.T
    assert {r["run_id"] for r in rows} == {"0", "1"}


def test_cli_fit_rank_multi_panel(tmp_path, small_cfg):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    code = main(["fit-rank", "--config", str(cfg_path), "--out-dir", str(tmp_path / "fit"),
                 "--runs", "15", "--agents", "1500", "--eta", "0", "10",
                 "--modes", "Flat", "NonFlat"])
    assert code == 0
    _, coeffs = fio.read_rows_csv(tmp_path / "fit" / "rank_fit_coeffs.csv")
    assert len(coeffs) == 4
    _, scatter = fio.read_rows_csv(tmp_path / "fit" / "rank_fit.csv")
    assert {(r[0], r[1]) for r in scatter} == {("Flat", "0"), ("Flat", "10"),
                                               ("NonFlat", "0"), ("NonFlat", "10")}


def test_cli_variants_heterogeneous(tmp_path, small_cfg):
    doc = config_to_dict(small_cfg)
    doc["benchmark_mode"] = {"kind": "Heterogeneous", "sigma_theta_hat": 0.5}
    path = tmp_path / "het.json"
    path.write_text(json.dumps(doc))
    code = main(["variants", "--config", str(path), "--kind", "heterogeneous",
                 "--out-dir", str(tmp_path / "var"), "--eta-grid", "0", "5"])
    assert code == 0
    header, rows = fio.read_rows_csv(tmp_path / "var" / "variants.csv")
    assert header[0] == "variant"
    assert {r[0] for r in rows} == {"common", "heterogeneous"}
    assert len(rows) == 2 * 2 * 9


def test_cli_variants_noncentered_requires_nothing_special(tmp_path, small_cfg):
    cfg = small_cfg.replace(theta=6.0, theta_hat=0.0)
    cfg_path = _cfg_file(tmp_path, cfg)
    code = main(["variants", "--config", str(cfg_path), "--kind", "noncentered",
                 "--out-dir", str(tmp_path / "nc")])
    assert code == 0
    _, rows = fio.read_rows_csv(tmp_path / "nc" / "variants.csv")
    assert {r[0] for r in rows} == {"noncentered"}


def test_cli_variants_heterogeneous_needs_het_config(tmp_path, small_cfg):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    assert main(["variants", "--config", str(cfg_path), "--kind", "heterogeneous",
                 "--out-dir", str(tmp_path / "x")]) == 2


def test_cli_analytic_tabulates(tmp_path, small_cfg):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    code = main(["analytic", "--config", str(cfg_path), "--out-dir", str(tmp_path / "an"),
                 "--zeta0", "23", "--zeta1", "250", "--points", "41"])
    assert code == 0
    header, rows = fio.read_rows_csv(tmp_path / "an" / "analytic.csv")
    assert header[:5] == ["y", "mu_H", "pi", "lcd", "lhd"]
    assert len(rows) == 41


def test_threads_flag_does_not_change_bytes(tmp_path, small_cfg):
    cfg_path = _cfg_file(tmp_path, small_cfg)
    main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "t1"),
          "--threads", "1"])
    main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "t4"),
          "--threads", "4"])
    assert (tmp_path / "t1" / "simulate.csv").read_bytes() == \
        (tmp_path / "t4" / "simulate.csv").read_bytes()
