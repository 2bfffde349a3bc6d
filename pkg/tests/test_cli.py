import json

import numpy as np
import pytest

from tvland.cli import run


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


class TestSimulate:
    def test_csv_contract(self, tmp_path):
        out = tmp_path / "traj.csv"
        code = run(["simulate", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "-2", "--dt", "1e-2",
                    "--method", "backward-euler", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["t", "x0", "kkt_stationarity", "feasibility",
                          "sigma_min", "step_norm"]
        assert float(rows[0][0]) == 0.0
        assert float(rows[0][1]) == -2.0
        assert float(rows[-1][0]) == pytest.approx(2 * np.pi)

    def test_multidimensional_header(self, tmp_path):
        out = tmp_path / "traj.csv"
        x0 = ",".join(map(str, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        code = run(["simulate", "--scenario", "matrec", "--alpha", "0.5",
                    "--x0", x0, "--N", "10", "--method", "discrete",
                    "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header[:7] == ["t", "x0", "x1", "x2", "x3", "x4", "x5"]
        assert len(rows) == 11
        # feasibility enforced by the engine
        assert all(float(r[-3]) <= 1e-9 for r in rows)

    def test_floats_roundtrip(self, tmp_path):
        out = tmp_path / "traj.csv"
        run(["simulate", "--scenario", "example1", "--alpha", "0.4",
             "--beta", "10", "--x0", "-2", "--dt", "5e-2",
             "--method", "discrete", "--out", str(out)])
        _, rows = read_csv(out)
        # 17 significant digits reproduce the binary doubles exactly
        vals = [float(r[1]) for r in rows]
        out2 = tmp_path / "again.csv"
        run(["simulate", "--scenario", "example1", "--alpha", "0.4",
             "--beta", "10", "--x0", "-2", "--dt", "5e-2",
             "--method", "discrete", "--out", str(out2)])
        _, rows2 = read_csv(out2)
        assert [float(r[1]) for r in rows2] == vals

    def test_byte_identical_reruns(self, tmp_path):
        args = ["simulate", "--scenario", "example1", "--alpha", "0.4",
                "--beta", "10", "--x0", "-2", "--dt", "2e-2",
                "--method", "backward-euler"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(args + ["--out", str(a)])
        run(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_reference_method(self, tmp_path):
        out = tmp_path / "ref.csv"
        code = run(["simulate", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "-2", "--method", "reference",
                    "--N", "64", "--out", str(out)])
        assert code == 0
        _, rows = read_csv(out)
        assert len(rows) == 65

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # non-KKT start: InitializationError -> exit 2, JSON on stderr
        code = run(["simulate", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "0.5", "--dt", "1e-2",
                    "--method", "backward-euler", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        err = capsys.readouterr().err.strip()
        payload = json.loads(err)
        assert payload["error"] == "InitializationError"

    def test_usage_error_exit_code(self, capsys):
        code = run(["simulate", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--dt", "1e-2"])  # no x0
        assert code == 1
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"] == "usage"

    def test_library_validation_maps_to_usage(self, capsys):
        code = run(["classify", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "-2", "--tbar-frac", "1.5",
                    "--N", "50", "--checks", "2"])
        assert code == 1
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"] == "usage"


class TestReports:
    def test_prop1_json(self, capsys):
        code = run(["prop1", "--scenario", "example1", "--alpha", "0.2",
                    "--beta", "5", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["schema"] == 1
        assert payload["satisfied"] is False
        assert payload["cond1"] is False

    def test_prop1_satisfied_pair(self, capsys):
        run(["prop1", "--scenario", "example1", "--alpha", "0.4", "--beta", "10"])
        payload = json.loads(capsys.readouterr().out)
        assert payload["satisfied"] is True
        assert payload["C"] == pytest.approx(2.137, abs=1e-2)

    def test_thm3_json(self, capsys):
        code = run(["thm3", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--R", "0.5"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["C1"] == pytest.approx(4.78125, abs=1e-3)
        assert payload["C2"] == pytest.approx(-4.78125, abs=1e-3)
        assert payload["satisfied"] is False

    def test_flow_json(self, capsys):
        code = run(["flow", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "0", "--t", "0"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["converged"] is True
        assert payload["limit"][0] == pytest.approx(2.0, abs=1e-4)

    def test_validate_json(self, capsys):
        code = run(["validate", "--scenario", "matrec", "--samples", "10",
                    "--seed", "3"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"] is True

    def test_spectrum_csv(self, tmp_path):
        out = tmp_path / "spec.csv"
        x0 = ",".join(map(str, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        code = run(["spectrum", "--scenario", "matrec", "--alpha", "1.0",
                    "--x0", x0, "--N", "16", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["t", "max_re", "n_pos", "n_zero", "n_neg"]
        assert len(rows) == 17

    def test_damped_scenario_simulates(self, tmp_path):
        out = tmp_path / "damped.csv"
        code = run(["simulate", "--scenario", "damped", "--alpha", "0.4",
                    "--beta", "5", "--omega", "2", "--lambda", "0.3",
                    "--x0", "-2", "--dt", "1e-2", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header[0] == "t"
        assert len(rows) > 100


class TestClassifyCommand:
    def test_non_spurious_verdict(self, capsys):
        code = run(["classify", "--scenario", "example1", "--alpha", "0.4",
                    "--beta", "10", "--x0", "-2", "--tbar-frac", "0.75",
                    "--checks", "40", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["verdict"] == "non-spurious"
        assert all(c["is_global"] for c in payload["checks"])

    def test_spurious_verdict(self, capsys):
        code = run(["classify", "--scenario", "example1", "--alpha", "0.2",
                    "--beta", "5", "--x0", "-2", "--tbar-frac", "0.75",
                    "--checks", "40", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["verdict"] == "spurious"

    def test_strict_unresolved_exit3(self, capsys):
        # moving constrained data: frozen flows cannot settle, so membership
        # stays unresolved; --strict maps that to exit code 3
        x0 = ",".join(map(str, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        code = run(["classify", "--scenario", "matrec", "--alpha", "1.0",
                    "--x0", x0, "--N", "40", "--checks", "2", "--starts", "2",
                    "--strict"])
        assert code == 3
        payload = json.loads(capsys.readouterr().out)
        assert payload["verdict"] == "unresolved"


class TestConfigFile:
    def test_config_plus_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("scenario=example1\nalpha=0.2\nbeta=5\n")
        run(["prop1", "--config", str(cfg)])
        payload = json.loads(capsys.readouterr().out)
        assert payload["alpha"] == 0.2
        # flag overrides the file
        run(["prop1", "--config", str(cfg), "--alpha", "0.4", "--beta", "10"])
        payload = json.loads(capsys.readouterr().out)
        assert payload["alpha"] == 0.4
        assert payload["satisfied"] is True

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("scenarioo=example1\n")
        code = run(["prop1", "--config", str(cfg)])
        assert code == 1

    def test_comments_and_blanks(self, tmp_path, capsys):
        cfg = tmp_path / "ok.cfg"
        cfg.write_text("# comment\n\nscenario=example1\nalpha=0.4\nbeta=10\n")
        assert run(["prop1", "--config", str(cfg)]) == 0


class TestSweep:
    def test_prop1_only_grid(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run(["sweep", "--scenario", "example1",
                    "--alpha-grid", "0.2,0.4", "--beta-grid", "5,10",
                    "--mode", "prop1", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["alpha", "beta", "prop1_satisfied", "sim_verdict"]
        assert len(rows) == 4
        table = {(float(r[0]), float(r[1])): r[2] for r in rows}
        assert table[(0.4, 10.0)] == "true"
        assert table[(0.2, 5.0)] == "false"
        # deterministic ordering by (alpha, beta)
        keys = [(float(r[0]), float(r[1])) for r in rows]
        assert keys == sorted(keys)

    def test_full_cells(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TVL_THREADS", "2")
        out = tmp_path / "sweep.csv"
        code = run(["sweep", "--scenario", "example1",
                    "--alpha-grid", "0.2,0.4", "--beta-grid", "5,10",
                    "--mode", "both", "--dt", "4e-3", "--checks", "30",
                    "--out", str(out)])
        assert code == 0
        _, rows = read_csv(out)
        table = {(float(r[0]), float(r[1])): (r[2], r[3]) for r in rows}
        assert table[(0.4, 10.0)] == ("true", "non-spurious")
        assert table[(0.2, 5.0)] == ("false", "spurious")

    def test_empty_grid(self, tmp_path):
        out = tmp_path / "empty.csv"
        code = run(["sweep", "--scenario", "example1", "--alpha-grid", "",
                    "--beta-grid", "1,2", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["alpha", "beta", "prop1_satisfied", "sim_verdict"]
        assert rows == []

    def test_linspace_grid_syntax(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run(["sweep", "--scenario", "example1",
                    "--alpha-grid", "0.1:0.5:3", "--beta-grid", "10",
                    "--mode", "prop1", "--out", str(out)])
        assert code == 0
        _, rows = read_csv(out)
        assert [float(r[0]) for r in rows] == pytest.approx([0.1, 0.3, 0.5])

    def test_oversized_grid_rejected(self, capsys):
        code = run(["sweep", "--scenario", "example1",
                    "--alpha-grid", "0:1:101", "--beta-grid", "0:1:101",
                    "--mode", "prop1"])
        assert code == 1
