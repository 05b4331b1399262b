import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plm.harness.checks import CHECKS, CheckConfig, run_checks
from plm.harness.cli import main
from plm.harness.config import ConfigError, ExperimentConfig
from plm.harness.experiments import ode_rows, run_experiment, run_trials, trial_seed
from plm.harness.plot import SchemaError, emit_plot
from plm.harness.report import fmt, mean_ci, parse_csv, proportion_ci, to_csv, wilson

# --- config ------------------------------------------------------------------

names = st.sampled_from(["d", "n", "lam", "ell", "x"])


@settings(max_examples=60)
@given(st.dictionaries(names, st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=4),
                       min_size=1),
       st.integers(1, 1000), st.integers(0, 2**63 - 1), st.integers(1, 16))
def test_config_text_round_trip(grid, trials, seed, workers):
    cfg = ExperimentConfig("phase_diagram", "exponential", grid, trials, seed, workers, "out.csv")
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    assert list(back.grid) == list(cfg.grid)


@pytest.mark.parametrize("text", [
    "model=unweighted\ngrid.n=5\n",
    "kind=phase_diagram\n",
    "kind=phase_diagram\ngrid.n=abc\n",
    "kind=phase_diagram\ngrid.n=5\ntrials=0\n",
    "kind=bogus\ngrid.n=5\n",
    "kind=phase_diagram\ngrid.n=5\ncolour=red\n",
    "kind=phase_diagram\ngrid.n=5\nseed=1\nseed=2\n",
    "kind=phase_diagram\njunk line\n",
])
def test_bad_config_text(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_points_follow_axis_order():
    cfg = ExperimentConfig.from_text("kind=phase_diagram\ngrid.d=1\ngrid.n=10\ngrid.d=2\n# comment\n")
    assert cfg.points() == [(("d", 1.0), ("n", 10.0)), (("d", 2.0), ("n", 10.0))]


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv("PLM_WORKERS", "3")
    assert ExperimentConfig("phase_diagram", grid={"n": [5]}).workers == 3
    monkeypatch.setenv("PLM_WORKERS", "x")
    assert ExperimentConfig("phase_diagram", grid={"n": [5]}).workers == 1


# --- report ------------------------------------------------------------------

@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(fmt(x)) == x


def test_csv_layout():
    text = to_csv(["a", "b", "c"], [{"a": 1, "b": 0.1, "c": True}])
    assert text == "a,b,c\n1,0.10000000000000001,1\n"
    assert "\r" not in text
    header, rows = parse_csv(text)
    assert header == ["a", "b", "c"] and rows == [{"a": "1", "b": "0.10000000000000001", "c": "1"}]
    assert parse_csv("") == ([], [])


def test_wilson_and_proportion_intervals():
    lo, hi = wilson(0, 10)
    assert lo == 0.0 and 0.25 < hi < 0.32  # 3.84/13.84
    assert hi == pytest.approx(3.8414588206941254 / (10 + 3.8414588206941254))
    assert proportion_ci(10, 10) == wilson(10, 10)
    lo, hi = proportion_ci(50, 100)
    assert (lo + hi) / 2 == pytest.approx(0.5) and hi - lo == pytest.approx(2 * 1.959963984540054 * 0.05)
    assert proportion_ci(0, 0) == (0.0, 1.0)


def test_mean_ci():
    m, lo, hi = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and hi - m == pytest.approx(1.959963984540054 / math.sqrt(3))
    assert mean_ci([4.0]) == (4.0, 4.0, 4.0)
    assert all(math.isnan(v) for v in mean_ci([]))


# --- seeds and scheduling ----------------------------------------------------

def test_trial_seed_is_stable_and_position_free():
    a = trial_seed(7, (("n", 100.0), ("d", 2.0)), 3)
    assert a == trial_seed(7, (("n", 100.0), ("d", 2.0)), 3)
    assert a != trial_seed(7, (("n", 100.0), ("d", 2.0)), 4)
    assert a != trial_seed(8, (("n", 100.0), ("d", 2.0)), 3)
    # reshaping the grid does not move the seed of a point
    small = ExperimentConfig("phase_diagram", grid={"d": [1.0], "n": [50]}, trials=2, seed=1, workers=1)
    big = ExperimentConfig("phase_diagram", grid={"d": [1.0], "n": [20, 50]}, trials=2, seed=1, workers=1)
    s1 = [r.seed for r in run_trials(small)]
    s2 = [r.seed for r in run_trials(big) if r.point == (("d", 1.0), ("n", 50.0))]
    assert s1 == s2


@pytest.mark.parametrize("kind,model,grid", [
    ("phase_diagram", "unweighted", {"d": [0.5, 2.0], "n": [200]}),
    ("mle_vs_ode", "exponential", {"lam": [2.0], "n": [100, 200]}),
    ("cyclefind_demo", "unweighted", {"d": [4.0], "n": [3000]}),
])
def test_worker_count_does_not_change_csv(kind, model, grid):
    text = [run_experiment(ExperimentConfig(kind, model, grid, trials=4, seed=11, workers=w)) for w in (1, 8)]
    assert text[0] == text[1]


def test_single_trial_rerun_is_byte_identical():
    cfg = ExperimentConfig("phase_diagram", "exponential", {"lam": [3.0], "n": [300]}, trials=1, seed=5, workers=1)
    assert run_experiment(cfg) == run_experiment(cfg)


# --- sweeps ------------------------------------------------------------------

def _column(text, key):
    return [float(r[key]) for r in parse_csv(text)[1]]


def test_unweighted_error_grows_with_d():
    cfg = ExperimentConfig("phase_diagram", "unweighted", {"d": [0.6, 1.0, 1.5], "n": [2000]}, trials=10, seed=0,
                           workers=1)
    err = _column(run_experiment(cfg), "mean_error")
    assert err[0] < err[1] < err[2]


def test_exponential_error_drops_past_threshold():
    cfg = ExperimentConfig("phase_diagram", "exponential", {"lam": [2.0, 3.0, 3.9, 4.5], "n": [1000]}, trials=10,
                           seed=0, workers=1)
    err = _column(run_experiment(cfg), "mean_error")
    assert err[3] < err[0]


def test_near_threshold_errors_are_small():
    cfg = ExperimentConfig("mle_vs_ode", "exponential", {"lam": [3.9], "n": [1000]}, trials=10, seed=0, workers=1)
    header, rows = parse_csv(run_experiment(cfg))
    assert float(rows[0]["mean_error"]) < 0.05 and float(rows[0]["ode_error"]) < 0.05
    assert "rel_gap" in header


def test_ode_column_matches_ode_subcommand(tmp_path, capsys):
    cfg = ExperimentConfig("mle_vs_ode", "exponential", {"lam": [2.0], "n": [100]}, trials=2, seed=0, workers=1)
    ode_col = parse_csv(run_experiment(cfg))[1][0]["ode_error"]
    assert main(["ode", "--lambda", "2"]) == 0
    rows = parse_csv(capsys.readouterr().out)[1]
    assert rows[0]["error"] == ode_col
    assert parse_csv(ode_rows([2.0]))[1][0]["error"] == ode_col


def test_failures_are_recorded_and_flagged():
    # d = 0.05 leaves almost nothing but the planted edges; the matching is always feasible
    cfg = ExperimentConfig("phase_diagram", "unweighted", {"d": [0.05], "n": [50]}, trials=3, seed=0, workers=1)
    row = parse_csv(run_experiment(cfg))[1][0]
    assert row["failures"] == "0" and row["flagged"] == "0"


def test_check_kinds_emit_pass_columns():
    for kind, grid in [("ld_check", {"lam": [3.0], "ell": [20], "x": [0.0], "samples": [20000]}),
                       ("bridge_check", {"ell": [50], "A": [4.0], "samples": [2000]}),
                       ("posterior_oracle", {"n": [5], "d": [5.0]})]:
        model = "sparse(p=exp:2;q=exp:1)" if kind == "posterior_oracle" else "exponential"
        cfg = ExperimentConfig(kind, model, grid, trials=3, seed=2, workers=1)
        rows = parse_csv(run_experiment(cfg))[1]
        assert rows and all(r["pass"] == "1" for r in rows), (kind, rows)


# --- checks ------------------------------------------------------------------

def test_run_checks_all_pass():
    res = run_checks(CheckConfig(samples=50_000, instances=30))
    assert [r.name for r in res] == list(CHECKS)
    for r in res:
        assert r.passed and r.margin >= 0, r.line()
        assert r.line().startswith("PASS " + r.name)
    with pytest.raises(ValueError):
        run_checks(CheckConfig(names=("nope",)))


# --- plots -------------------------------------------------------------------

def test_empty_csv_gives_empty_axes():
    svg = emit_plot("", "phase_diagram")
    assert svg.startswith("<svg") and "<circle" not in svg


def test_schema_mismatch():
    with pytest.raises(SchemaError):
        emit_plot("a,b\n1,2\n", "phase_diagram")
    with pytest.raises(SchemaError):
        emit_plot("a,b\n1,2\n", "ld_check")


def test_phase_plot_has_one_curve_per_n():
    cfg = ExperimentConfig("phase_diagram", "unweighted", {"d": [0.5, 1.0, 2.0], "n": [50, 100]}, trials=2,
                           seed=0, workers=1)
    svg = emit_plot(run_experiment(cfg), "phase_diagram")
    assert svg.count('stroke="none"') == 2  # CI bands
    assert svg.count("<circle") == 6
    assert "n=50" in svg and "n=100" in svg


def test_mle_vs_ode_plot_has_reference_line():
    cfg = ExperimentConfig("mle_vs_ode", "exponential", {"lam": [2.0], "n": [50, 100]}, trials=2, seed=0, workers=1)
    svg = emit_plot(run_experiment(cfg), "mle_vs_ode")
    assert 'stroke-dasharray' in svg and svg.count("<circle") == 2


# --- CLI ---------------------------------------------------------------------

def test_cli_round_trip(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    assert main(["generate", "--model", "exponential", "--n", "30", "--lambda", "2", "--seed", "3",
                 "--out", str(inst)]) == 0
    assert main(["solve", str(inst)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 31 and out[-1].startswith("error=")
    assert main(["solve", str(inst), "--estimator", "minweight"]) == 0
    assert capsys.readouterr().out.splitlines()[:30] == out[:30]


def test_cli_threshold(capsys):
    assert main(["threshold", "--exp-n", "1e6"]) == 0
    lam = float(capsys.readouterr().out.split("=")[1])
    assert abs(lam - 4) < 1e-2
    assert main(["threshold", "--p", "exp:2", "--q", "exp:1", "--d", "4"]) == 0
    out = capsys.readouterr().out
    assert "regime=no-almost-perfect-recovery" in out
    assert main(["threshold", "--p", "exp:2"]) == 2


def test_cli_cyclefind(tmp_path, capsys):
    inst = tmp_path / "g.txt"
    assert main(["generate", "--model", "unweighted", "--n", "5000", "--d", "4", "--out", str(inst)]) == 0
    assert main(["cyclefind", str(inst)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1].startswith("K=") and "d_super=" in lines[-1]
    assert all(ln.startswith("len=") for ln in lines[:-1])


def test_cli_experiment_and_check(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kind=ld_check\nmodel=exponential\ntrials=2\ngrid.lam=3\ngrid.ell=5\ngrid.x=0\n"
                   "grid.samples=5000\n")
    csv = tmp_path / "o.csv"
    svg = tmp_path / "o.svg"
    assert main(["check", "--config", str(cfg), "--out", str(csv)]) == 0
    assert parse_csv(csv.read_text())[1][0]["pass"] == "1"
    pd = tmp_path / "p.cfg"
    pd.write_text("kind=phase_diagram\nmodel=unweighted\ngrid.d=1\ngrid.n=40\n")
    assert main(["experiment", "--config", str(pd), "--out", str(csv), "--plot", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")
    assert main(["check", "--config", str(pd)]) == 2  # no pass column
    assert main(["check", "--only", "turan_check", "--instances", "20"]) == 0
    assert capsys.readouterr().out.strip().endswith("graphs=20")


def test_cli_usage_errors(tmp_path):
    assert main(["solve", str(tmp_path / "missing.txt")]) == 2
    assert main(["experiment"]) == 2
    assert main(["ode"]) == 2
    assert main(["ode", "--grid", "1:0:1"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind=nothing\ngrid.n=1\n")
    assert main(["experiment", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2


def test_ode_grid_rows(capsys):
    assert main(["ode", "--grid", "1:2:0.5"]) == 0
    rows = parse_csv(capsys.readouterr().out)[1]
    assert [float(r["lambda"]) for r in rows] == [1.0, 1.5, 2.0]
    err = np.array([float(r["error"]) for r in rows])
    assert np.all(np.diff(err) < 0)
