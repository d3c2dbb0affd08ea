import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from fwtrajopt.cli import (
    CONVERGENCE_COLUMNS,
    EXIT_CONVERGED,
    EXIT_INPUT,
    EXIT_MAX_ITER,
    EXIT_NUMERICAL,
    METRIC_FIELDS,
    TRAJECTORY_COLUMNS,
    aggregate,
    main,
    run_batch,
    run_scenario,
)
from fwtrajopt.scenario import bundled_dir, load_scenario_file

OPEN_FIELD = bundled_dir() / "open_field.json"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _edit(src, dst, **changes):
    doc = json.loads(src.read_text())
    for key, value in changes.items():
        section, _, name = key.partition("__")
        if name:
            doc[section][name] = value
        else:
            doc[section] = value
    dst.write_text(json.dumps(doc))
    return dst


@pytest.fixture(scope="module")
def open_field_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", str(OPEN_FIELD), "--out", str(out), "-q"])
    return code, out


class TestSolveCommand:
    def test_outputs(self, open_field_run):
        code, out = open_field_run
        assert code == EXIT_CONVERGED
        traj = _rows(out / "trajectory.csv")
        assert tuple(traj[0]) == TRAJECTORY_COLUMNS
        assert len(traj) - 1 == 50
        values = np.array(traj[1:], dtype=float)
        assert np.isfinite(values).all()

    def test_last_convergence_row_within_tolerance(self, open_field_run):
        _, out = open_field_run
        conv = _rows(out / "convergence.csv")
        assert tuple(conv[0]) == CONVERGENCE_COLUMNS
        last = [float(v) for v in conv[-1][1:]]
        assert max(last) <= 1e-3
        assert [int(r[0]) for r in conv[1:]] == list(range(1, len(conv)))

    def test_summary(self, open_field_run):
        _, out = open_field_run
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "converged" and summary["n"] == 50
        assert set(summary["metrics"]) == set(METRIC_FIELDS)
        assert summary["worst_avoidance_lhs"] is None  # no obstacles

    def test_rerun_is_byte_identical(self, open_field_run, tmp_path):
        _, first = open_field_run
        assert main(["solve", str(OPEN_FIELD), "--out", str(tmp_path), "-q"]) == EXIT_CONVERGED
        for name in ("trajectory.csv", "convergence.csv"):
            assert (tmp_path / name).read_bytes() == (first / name).read_bytes()

    def test_flags_override_file(self, tmp_path):
        code = main(["solve", str(OPEN_FIELD), "--out", str(tmp_path), "--steps", "60",
                     "--max-iter", "3", "-q"])
        assert code == EXIT_MAX_ITER
        assert len(_rows(tmp_path / "trajectory.csv")) - 1 == 60
        assert len(_rows(tmp_path / "convergence.csv")) - 1 == 3

    def test_bad_json(self, tmp_path, caplog):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "schema_version": 1,\n  "goal": [1, 2,,]\n}')
        assert main(["solve", str(bad), "--out", str(tmp_path / "o"), "-q"]) == EXIT_INPUT
        assert "line 3" in caplog.text

    def test_invalid_limits(self, tmp_path, caplog):
        path = _edit(OPEN_FIELD, tmp_path / "s.json", limits__v_min=25.0)
        assert main(["solve", str(path), "--out", str(tmp_path / "o"), "-q"]) == EXIT_INPUT
        assert "limits.v_min" in caplog.text

    def test_numerical_failure(self, tmp_path):
        path = _edit(OPEN_FIELD, tmp_path / "s.json", horizon={"n": 10, "degree": 30, "total_time": "auto"})
        assert main(["solve", str(path), "--out", str(tmp_path / "o"), "-q"]) == EXIT_NUMERICAL

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["solve"])
        assert info.value.code == EXIT_INPUT
        with pytest.raises(SystemExit) as info:
            main(["solve", str(OPEN_FIELD), "--heading-variant", "sqp"])
        assert info.value.code == EXIT_INPUT

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "fwtrajopt", "solve", str(OPEN_FIELD),
                               "--out", str(tmp_path), "--max-iter", "2"],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_MAX_ITER
        assert "max-iter-reached" in proc.stderr


class TestRunScenario:
    def test_report(self, tmp_path):
        sc = load_scenario_file(bundled_dir() / "urban" / "urban_02.json")
        report = run_scenario(sc.spec, sc.config, tmp_path, "urban_02")
        assert report.trajectory.shape == (50, len(TRAJECTORY_COLUMNS))
        assert report.exit_code == EXIT_CONVERGED
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["passes_avoidance"] == (report.worst_avoidance <= 1e-2)
        npt.assert_array_equal(np.array(_rows(tmp_path / "trajectory.csv")[1:], dtype=float), report.trajectory)


@pytest.fixture(scope="module")
def batch(tmp_path_factory):
    src = tmp_path_factory.mktemp("scenarios")
    for name in ("urban_00", "urban_01"):
        shutil.copy(bundled_dir() / "urban" / f"{name}.json", src)
    (src / "broken.json").write_text("{")
    out = tmp_path_factory.mktemp("bench")
    code = main(["bench", str(src), "--steps", "50,100", "--out", str(out), "-q"])
    return code, out, json.loads((out / "summary.json").read_text())


class TestBench:
    def test_failure_recorded_and_batch_continues(self, batch):
        code, out, summary = batch
        assert code == EXIT_INPUT
        broken = [r for r in summary["runs"] if r["scenario"] == "broken"]
        assert len(broken) == 2 and all(r["status"] == "error" and r["exit_code"] == EXIT_INPUT for r in broken)
        good = [r for r in summary["runs"] if r["scenario"] != "broken"]
        assert len(good) == 4 and all(r["status"] == "converged" for r in good)

    def test_aggregate_matches_per_run_reports(self, batch):
        _, out, summary = batch
        for n in (50, 100):
            per_run = [json.loads((out / f"{name}_n{n}" / "summary.json").read_text())["metrics"]
                       for name in ("urban_00", "urban_01")]
            agg = summary["aggregate"][str(n)]
            assert agg["runs"] == 2
            for name in METRIC_FIELDS:
                values = [float(m[name]) for m in per_run]
                assert agg[name] == {"median": float(np.median(values)), "min": min(values), "max": max(values)}

    def test_per_run_outputs(self, batch):
        _, out, _ = batch
        for n in (50, 100):
            assert len(_rows(out / f"urban_00_n{n}" / "trajectory.csv")) - 1 == n

    def test_empty_directory(self, tmp_path, caplog):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["bench", str(empty), "--out", str(tmp_path / "o"), "-q"]) == EXIT_CONVERGED
        assert "no scenario files" in caplog.text
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["runs"] == []
        assert summary["aggregate"]["50"]["runs"] == 0

    def test_missing_directory(self, tmp_path):
        assert main(["bench", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o"), "-q"]) == EXIT_INPUT

    def test_overrides_apply_to_every_run(self, tmp_path):
        summary = run_batch(bundled_dir() / "tight_turn", tmp_path, steps=(50,), overrides={"max_iter": 4})
        assert all(r["metrics"]["iterations"] == 4 and r["exit_code"] == EXIT_MAX_ITER for r in summary["runs"])

    def test_aggregate_of_nothing(self):
        assert aggregate([])["wall_time"] == {"median": None, "min": None, "max": None}
