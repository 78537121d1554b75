import json
import os
from pathlib import Path

import pytest

from symcost.cli import emit_plot_data, main, validate_config

REPO_CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path: Path, scenarios, master_seed=5) -> Path:
    cfg = {"schema": "symcost/1", "master_seed": master_seed, "scenarios": scenarios}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def swap_scenario(output="out/report.jsonl", **extra_params):
    params = {"preset": "swap_plus", "direct_budget": [6, 150]}
    params.update(extra_params)
    return {
        "kind": "tradeoff",
        "scenario_id": "swap",
        "parameters": params,
        "seeds": [1],
        "optimizer_budget": [4, 200],
        "delta_choice": "d1",
        "output": output,
    }


class TestValidate:
    def test_good_config(self, tmp_path, capsys):
        path = write_config(tmp_path, [swap_scenario()])
        assert main(["validate", str(path)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_bad_schema(self):
        errors = validate_config({"schema": "nope", "scenarios": [swap_scenario()]})
        assert any("schema" in e for e in errors)

    def test_no_scenarios(self, tmp_path, capsys):
        path = write_config(tmp_path, [])
        assert main(["validate", str(path)]) == 1
        assert "no scenarios" in capsys.readouterr().err

    def test_unknown_kind(self):
        bad = swap_scenario()
        bad["kind"] = "mystery"
        errors = validate_config({"schema": "symcost/1", "scenarios": [bad]})
        assert any("unknown kind" in e for e in errors)

    def test_budget_floor(self):
        bad = swap_scenario()
        bad["optimizer_budget"] = [1, 50]
        errors = validate_config({"schema": "symcost/1", "scenarios": [bad]})
        assert any("optimizer_budget" in e for e in errors)

    def test_unparseable_file(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        assert main(["validate", str(path)]) == 1


class TestRun:
    def test_bundled_swap_plus_passes(self, tmp_path):
        path = write_config(tmp_path, [swap_scenario()])
        assert main(["run", str(path), "--jobs", "1"]) == 0
        report = tmp_path / "out" / "report.jsonl"
        rows = [json.loads(line) for line in report.read_text().splitlines()]
        assert len(rows) == 1
        assert rows[0]["slack"] >= 0
        assert rows[0]["pass"] is True
        assert "wall_time_ms" not in rows[0]
        summary = report.with_name(report.name + ".summary.csv")
        assert summary.read_text().startswith("scenario_id,seed,lhs,rhs,slack,pass")
        meta = json.loads(report.with_name(report.name + ".meta.json").read_text())
        assert meta["rows"] == 1

    def test_empty_scenarios_exit_one(self, tmp_path):
        path = write_config(tmp_path, [])
        assert main(["run", str(path)]) == 1

    def test_corrupted_bound_exit_two(self, tmp_path):
        path = write_config(tmp_path, [swap_scenario(debug_lhs_bias=100.0)])
        assert main(["run", str(path), "--jobs", "1"]) == 2
        rows = [json.loads(line)
                for line in (tmp_path / "out" / "report.jsonl").read_text().splitlines()]
        assert rows[0]["pass"] is False and rows[0]["slack"] < -1e-7

    def test_determinism_byte_identical(self, tmp_path):
        path = write_config(tmp_path, [
            swap_scenario(),
            {
                "kind": "petz",
                "scenario_id": "petz",
                "parameters": {"d_in": 2, "kraus_rank": 2},
                "seeds": [4, 5],
                "optimizer_budget": [4, 200],
                "delta_choice": "d1",
                "output": "out/report.jsonl",
            },
        ])
        assert main(["run", str(path), "--jobs", "2"]) == 0
        first = (tmp_path / "out" / "report.jsonl").read_bytes()
        assert main(["run", str(path), "--jobs", "1"]) == 0
        assert (tmp_path / "out" / "report.jsonl").read_bytes() == first

    def test_master_seed_env_override(self, tmp_path):
        path = write_config(tmp_path, [{
            "kind": "kr",
            "scenario_id": "kr",
            "parameters": {"dim": 2, "n_triples": 5},
            "seeds": [1],
            "optimizer_budget": [4, 200],
            "delta_choice": "d1",
            "output": "out/report.jsonl",
        }])
        assert main(["run", str(path)]) == 0
        first = (tmp_path / "out" / "report.jsonl").read_bytes()
        os.environ["SYMCOST_SEED"] = "12345"
        try:
            assert main(["run", str(path)]) == 0
        finally:
            del os.environ["SYMCOST_SEED"]
        assert (tmp_path / "out" / "report.jsonl").read_bytes() != first

    def test_missing_config_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.json")]) == 1


class TestPlot:
    def make_report(self, tmp_path: Path, rows) -> Path:
        path = tmp_path / "report.jsonl"
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        return path

    def test_sorted_two_column_csv(self, tmp_path):
        report = self.make_report(tmp_path, [
            {"fisher_B": 3.0, "delta_irrev": 0.2},
            {"fisher_B": 1.0, "delta_irrev": 0.5},
            {"fisher_B": 2.0, "delta_irrev": 0.3},
        ])
        csv_text = emit_plot_data(report, "fisher_B", "delta_irrev")
        lines = csv_text.strip().splitlines()
        assert lines[0] == "fisher_B,delta_irrev"
        xs = [float(line.split(",")[0]) for line in lines[1:]]
        assert xs == sorted(xs)

    def test_duplicate_x_keeps_input_order(self, tmp_path):
        report = self.make_report(tmp_path, [
            {"x": 1.0, "y": 10.0},
            {"x": 1.0, "y": 20.0},
        ])
        lines = emit_plot_data(report, "x", "y").strip().splitlines()
        assert lines[1].endswith("10.0") and lines[2].endswith("20.0")

    def test_empty_report_header_only(self, tmp_path):
        report = self.make_report(tmp_path, [])
        assert emit_plot_data(report, "a", "b") == "a,b\n"

    def test_missing_field_fails(self, tmp_path):
        report = self.make_report(tmp_path, [{"x": 1.0}])
        assert main(["plot", str(report), "--x", "x", "--y", "nope"]) == 1

    def test_csv_written_to_file(self, tmp_path):
        report = self.make_report(tmp_path, [{"x": 1.0, "y": 2.0}])
        out = tmp_path / "plot.csv"
        assert main(["plot", str(report), "--x", "x", "--y", "y",
                     "--out", str(out)]) == 0
        assert out.read_text() == "x,y\n1.0,2.0\n"


class TestBundledConfigs:
    @pytest.mark.parametrize("name", ["swap_plus.json", "acceptance.json"])
    def test_bundled_configs_validate(self, name):
        assert main(["validate", str(REPO_CONFIGS / name)]) == 0
