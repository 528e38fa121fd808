import json

import pytest

from anomaly_search import harness
from anomaly_search.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from anomaly_search.harness import TrialOutcome, aggregate
from anomaly_search.reporting import read_csv


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({
        "name": "cli", "K": 3, "mu": 0.8, "lambda": 0.1,
        "policies": ["proposed", "round_robin"], "b_grid": [2.0, 3.0], "trials": 20, "seed": 1,
    }))
    return path


class TestSimulate:
    def test_writes_csv_and_plot(self, config_file, tmp_path):
        out, plot = tmp_path / "rows.csv", tmp_path / "rows.svg"
        code = main(["simulate", "--config", str(config_file), "--trials", "10", "--threads", "1",
                     "--out", str(out), "--plot", str(plot)])
        assert code == EXIT_OK
        rows = read_csv(out)
        assert len(rows) == 4
        assert all(r.trials == 10 for r in rows)
        assert plot.exists()

    @pytest.mark.parametrize("config_cap, expected", [(None, 5000), (700, 700)])
    def test_sample_cap_from_environment(self, monkeypatch, tmp_path, config_cap, expected):
        monkeypatch.setenv("ANOMALY_SEARCH_SAMPLE_CAP", "5000")
        seen = []

        def fake_run(spec, workers=None):
            seen.append(spec.sample_cap)
            return [aggregate("proposed", 2.0, [TrialOutcome(True, 3, 0, 3.0, False)])]

        monkeypatch.setattr(harness, "run_experiment", fake_run)
        data = {"name": "cap", "K": 3, "mu": 0.8, "policies": ["proposed"], "b_grid": [2.0], "trials": 1}
        if config_cap is not None:
            data["sample_cap"] = config_cap
        path = tmp_path / "cap.json"
        path.write_text(json.dumps(data))
        assert main(["simulate", "--config", str(path)]) == EXIT_OK
        assert seen == [expected]

    def test_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "bad", "K": 3, "mu": 0.8, "policies": [], "b_grid": [1.0]}))
        assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG

    def test_missing_config_is_io_error(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == EXIT_IO

    def test_unwritable_output(self, config_file, tmp_path):
        out = tmp_path / "no" / "such" / "dir.csv"
        assert main(["simulate", "--config", str(config_file), "--trials", "2", "--out", str(out)]) == EXIT_IO


class TestSweep:
    def test_custom_grid(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--preset", "easy", "--b-min", "2", "--b-max", "3", "--b-steps", "2",
                     "--trials", "5", "--threads", "1", "--out", str(out)])
        assert code == EXIT_OK
        assert sorted({r.b for r in read_csv(out)}) == [2.0, 3.0]

    def test_half_grid_is_config_error(self):
        assert main(["sweep", "--preset", "easy", "--b-min", "2", "--trials", "5"]) == EXIT_CONFIG


class TestBound:
    def test_given_rates(self):
        assert main(["bound", "--K", "8", "--lambda", "1", "--delta", "0.2", "--b", "5",
                     "--c-const", "1", "--alpha", "0.3", "--beta", "0.2"]) == EXIT_OK

    def test_monte_carlo_rates_with_gap_from_mu(self):
        assert main(["bound", "--K", "8", "--lambda", "0.025", "--mu", "0.4", "--b", "1",
                     "--mc-trials", "200"]) == EXIT_OK

    def test_needs_gap(self):
        assert main(["bound", "--K", "8", "--lambda", "1", "--b", "5", "--alpha", "0.3", "--beta", "0.2"]) == EXIT_CONFIG


class TestThresholds:
    def test_sweep_of_costs(self):
        assert main(["thresholds", "--pi", "0.1", "--eps", "0.01",
                     "--lambda-bar", "0", "--lambda-bar", "2"]) == EXIT_OK

    def test_explicit_divergences(self):
        assert main(["thresholds", "--pi", "0.1", "--eps", "0.01", "--lambda-bar", "1",
                     "--d01", "0.05", "--d10", "0.04"]) == EXIT_OK

    def test_invalid_tolerance(self):
        assert main(["thresholds", "--pi", "0.5", "--eps", "0.6"]) == EXIT_CONFIG


class TestPlot:
    def test_from_csv(self, config_file, tmp_path):
        csv_path, svg = tmp_path / "rows.csv", tmp_path / "plot.svg"
        main(["simulate", "--config", str(config_file), "--trials", "5", "--out", str(csv_path)])
        assert main(["plot", "--in", str(csv_path), "--out", str(svg)]) == EXIT_OK
        assert svg.read_text(encoding="utf-8").lstrip().startswith("<?xml")
