import csv
import io
import json

import pytest
from click.testing import CliRunner

from risinvest.cli import main


def _run(args, tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return CliRunner().invoke(main, args + ["--config", str(path)], catch_exceptions=False)


def _rows(output):
    return list(csv.DictReader(io.StringIO(output)))


FAST = "quadrature: {rel_tol: 1.0e-6, abs_tol: 1.0e-8}\n"


class TestCoverageCommand:
    def test_empty_grid(self, tmp_path):
        res = _run(["coverage"], tmp_path, FAST + "sweep: {thresholds: []}\n")
        assert res.exit_code == 0
        assert _rows(res.output) == []

    def test_monotone_column(self, tmp_path):
        res = _run(["coverage"], tmp_path, FAST + "sweep: {thresholds: [0.1, 0.5, 1, 2, 5, 10], distances: [100]}\n")
        assert res.exit_code == 0
        pc = [float(r["coverage"]) for r in _rows(res.output)]
        assert all(0 <= v <= 1 for v in pc)
        assert all(a >= b - 1e-7 for a, b in zip(pc, pc[1:]))

    def test_row_level_error(self, tmp_path):
        res = _run(["coverage"], tmp_path, FAST + "sweep: {thresholds: [1], distances: [0, 100]}\n")
        assert res.exit_code == 1
        rows = _rows(res.output)
        assert rows[0]["error"].startswith("ParameterError")
        assert rows[1]["error"] == ""
        assert 0.0 < float(rows[1]["coverage"]) < 1.0

    def test_config_error_exit(self, tmp_path):
        from risinvest.cli import run
        import sys

        path = tmp_path / "bad.yaml"
        path.write_text("system: {alpha: 1}\n")
        argv = sys.argv
        sys.argv = ["risinvest", "coverage", "--config", str(path)]
        try:
            with pytest.raises(SystemExit) as info:
                run()
        finally:
            sys.argv = argv
        assert info.value.code == 2


class TestPlanCommand:
    def test_zero_rounds(self, tmp_path):
        res = _run(["plan", "--rounds", "0"], tmp_path, FAST + "plan: {lambda_bs_per_km2: 10, ris_per_cluster: 2}\n")
        assert res.exit_code == 0
        rows = _rows(res.output)
        assert len(rows) == 1 and rows[0]["status"] == "final"

    def test_budget_column(self, tmp_path):
        res = _run(["plan", "--rounds", "1"], tmp_path, FAST + "plan: {lambda_bs_per_km2: 10, ris_per_cluster: 2}\n")
        assert res.exit_code == 0
        rows = _rows(res.output)
        assert float(rows[0]["budget_used"]) == pytest.approx(1.0, rel=1e-12)


class TestSimulateCommand:
    def test_single_sample_no_crash(self, tmp_path):
        res = _run(["simulate"], tmp_path, "montecarlo: {n_samples: 1}\nsweep: {lambda_bs_per_km2: [10]}\n")
        assert res.exit_code == 0
        rec = json.loads(res.output)["records"]
        assert rec[0]["stderr"] is None or rec[0]["stderr"] != rec[0]["stderr"] or rec[0]["stderr"] > 1e300

    def test_seed_determinism(self, tmp_path):
        text = "montecarlo: {n_samples: 2000}\nsweep: {lambda_bs_per_km2: [10]}\n"
        a = _run(["simulate", "--seed", "4"], tmp_path, text).output
        b = _run(["simulate", "--seed", "4"], tmp_path, text).output
        c = _run(["simulate", "--seed", "5"], tmp_path, text).output
        assert a == b != c
