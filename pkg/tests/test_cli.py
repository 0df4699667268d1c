import json

import numpy as np
import pytest

from rmab_beamsched import cli
from rmab_beamsched.scenario import save_scenario
from conftest import make_scalar_target, make_scenario


@pytest.fixture
def scalar_scenario_file(tmp_path):
    spec = make_scenario(
        [make_scalar_target("reckless", q_ct=2.0 + n, P0_rule={"uniform_scalar": [0, 2]})
         for n in range(4)],
        K=1, horizon=20, tau=100, name="cli_test")
    path = tmp_path / "scenario.json"
    save_scenario(spec, path)
    return path


@pytest.fixture
def fixed_p0_file(tmp_path):
    spec = make_scenario(
        [make_scalar_target("reckless", q_ct=2.0 + n, P0=1.0) for n in range(3)],
        K=1, horizon=20, tau=100, name="cli_fixed")
    path = tmp_path / "fixed.json"
    save_scenario(spec, path)
    return path


class TestSimulate:
    def test_writes_results_and_manifest(self, scalar_scenario_file, tmp_path):
        out = tmp_path / "run" / "results.csv"
        code = cli.main(["simulate", str(scalar_scenario_file), "--nmc", "3",
                         "--seed", "5", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].split(",")[:6] == ["scenario_id", "policy", "K", "N", "N_mc",
                                           "mean_cost"]
        assert len(lines) == 4
        manifest = json.loads((out.parent / "manifest.json").read_text())
        assert manifest["master_seed"] == 5
        assert str(out) in manifest["artifacts"]

    def test_deterministic_reruns(self, scalar_scenario_file, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert cli.main(["simulate", str(scalar_scenario_file), "--nmc", "2",
                         "--seed", "9", "--out", str(out1)]) == 0
        assert cli.main(["simulate", str(scalar_scenario_file), "--nmc", "2",
                         "--seed", "9", "--out", str(out2)]) == 0
        strip = lambda p: [",".join(np.array(l.split(","))[[0, 1, 2, 3, 4, 5, 6]])
                           for l in p.read_text().splitlines()]
        assert strip(out1) == strip(out2)

    def test_missing_file_exit_2(self, tmp_path):
        assert cli.main(["simulate", str(tmp_path / "nope.json")]) == 2

    def test_invalid_scenario_exit_2(self, tmp_path, capsys):
        spec = make_scenario([make_scalar_target(P0=1.0), make_scalar_target(P0=1.0)], K=1)
        d = json.loads(json.dumps(
            __import__("rmab_beamsched.scenario", fromlist=["scenario_to_dict"])
            .scenario_to_dict(spec)))
        d["targets"][0]["U"]["u0"] = [0.5, 0.6]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(d))
        assert cli.main(["simulate", str(path)]) == 2
        assert "probability sum" in capsys.readouterr().err


class TestIndexDump:
    def test_monotone_mp_column(self, fixed_p0_file, tmp_path):
        out = tmp_path / "idx.csv"
        code = cli.main(["index-dump", str(fixed_p0_file), "--target", "0",
                         "--p-min", "0.01", "--p-max", "5", "--step", "0.05",
                         "--out", str(out)])
        assert code == 0
        rows = [l.split(",") for l in out.read_text().strip().splitlines()[1:]]
        mp = np.array([float(r[1]) for r in rows])
        assert np.all(np.diff(mp) >= -1e-9)

    def test_single_row_when_step_exceeds_range(self, fixed_p0_file, tmp_path):
        out = tmp_path / "one.csv"
        assert cli.main(["index-dump", str(fixed_p0_file), "--p-min", "1",
                         "--p-max", "2", "--step", "5", "--out", str(out)]) == 0
        assert len(out.read_text().strip().splitlines()) == 2

    def test_tau_one_gives_zero_column(self, fixed_p0_file, tmp_path):
        out = tmp_path / "z.csv"
        assert cli.main(["index-dump", str(fixed_p0_file), "--tau", "1",
                         "--p-max", "2", "--step", "0.5", "--out", str(out)]) == 0
        rows = [l.split(",") for l in out.read_text().strip().splitlines()[1:]]
        assert all(float(r[1]) == 0.0 for r in rows)

    def test_anomalous_grid_point_flag_and_exit_3(self, fixed_p0_file, tmp_path,
                                                  monkeypatch):
        # no scalar instance with nonpositive marginal work is known for the
        # bundled parameters, so inject one to pin the contract
        import rmab_beamsched.cli as cli_mod

        real = cli_mod.marginal_batch

        def doctored(batch, states, z, beta, tau):
            f, g = real(batch, states, z, beta, tau)
            g = np.array(g)
            g[0] = -0.25
            return f, g

        monkeypatch.setattr(cli_mod, "marginal_batch", doctored)
        out = tmp_path / "flagged.csv"
        code = cli.main(["index-dump", str(fixed_p0_file), "--p-max", "2",
                         "--step", "0.5", "--out", str(out)])
        assert code == 3
        lines = out.read_text().strip().splitlines()
        assert lines[0].endswith(",flag")
        first = lines[1].split(",")
        assert first[1] == "" and first[4] == "g<=0"


class TestLowerBound:
    def test_writes_summary_and_trace(self, fixed_p0_file, tmp_path):
        out = tmp_path / "lb.csv"
        code = cli.main(["lower-bound", str(fixed_p0_file), "--out", str(out)])
        assert code == 0
        summary = out.read_text().strip().splitlines()
        assert summary[0] == "lambda_star,V_D"
        lam, vd = (float(x) for x in summary[1].split(","))
        assert vd > 0 and lam > 0
        trace = (tmp_path / "lb_trace.csv").read_text().strip().splitlines()
        assert trace[0] == "lambda,L_value"
        assert len(trace) > 5

    def test_zero_cost_scenario_gives_zero_bound(self, tmp_path):
        spec = make_scenario([make_scalar_target(d=0.0, P0=1.0),
                              make_scalar_target(d=0.0, P0=1.0)], K=1, name="free")
        path = tmp_path / "free.json"
        save_scenario(spec, path)
        out = tmp_path / "lb.csv"
        assert cli.main(["lower-bound", str(path), "--out", str(out)]) == 0
        lam, vd = (float(x) for x in out.read_text().strip().splitlines()[1].split(","))
        assert lam == 0.0 and vd == 0.0

    def test_refinement_consistency(self, fixed_p0_file, tmp_path):
        out1, out2 = tmp_path / "c.csv", tmp_path / "f.csv"
        assert cli.main(["lower-bound", str(fixed_p0_file), "--out", str(out1)]) == 0
        assert cli.main(["lower-bound", str(fixed_p0_file), "--search-tol", "0.001",
                         "--out", str(out2)]) == 0
        v1 = float(out1.read_text().strip().splitlines()[1].split(",")[1])
        v2 = float(out2.read_text().strip().splitlines()[1].split(",")[1])
        assert abs(v1 - v2) < 1e-2

    def test_small_cap_exit_4(self, fixed_p0_file):
        assert cli.main(["lower-bound", str(fixed_p0_file),
                         "--lambda-max", "1e-9"]) == 4

    def test_no_convergence_exit_5(self, fixed_p0_file, tmp_path):
        code = cli.main(["lower-bound", str(fixed_p0_file), "--max-iter", "2",
                         "--out", str(tmp_path / "lb.csv")])
        assert code == 5


class TestPclCheck:
    def test_probe_pass_exit_0(self, fixed_p0_file, tmp_path):
        out_dir = tmp_path / "probes"
        code = cli.main(["pcl-check", str(fixed_p0_file), "--p-max", "5",
                         "--step", "0.1", "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "summary.txt").exists()
        assert (out_dir / "manifest.json").exists()
        assert any(p.name.endswith("_marginal_work.csv") for p in out_dir.iterdir())

    def test_inverted_probabilities_fail_exit_1(self, tmp_path):
        from rmab_beamsched.scenario import (ModeProbabilityMatrix, ScenarioSpec,
                                             TargetSpec, scenario_to_dict)
        base = make_scalar_target()
        inverted = TargetSpec(base.modes,
                              ModeProbabilityMatrix([0.05, 0.95], [0.99, 0.01]),
                              base.meas, P0=1.0)
        spec = ScenarioSpec([inverted, base], K=1, name="inv")
        path = tmp_path / "inv.json"
        path.write_text(json.dumps(scenario_to_dict(spec)))
        out_dir = tmp_path / "probes"
        code = cli.main(["pcl-check", str(path), "--p-max", "5", "--step", "0.05",
                         "--out-dir", str(out_dir)])
        assert code in (0, 1)
        summary = (out_dir / "summary.txt").read_text()
        assert "FAIL" in summary if code == 1 else "PASS" in summary


class TestReproduceSmoke:
    def test_table1_smoke(self, tmp_path):
        out_dir = tmp_path / "t1"
        code = cli.main(["reproduce", "table1", "--nmc", "2", "--seed", "3",
                         "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "table1_results.csv").exists()
        assert (out_dir / "manifest.json").exists()
        pngs = list(out_dir.glob("*.png"))
        assert pngs, "figures should be rendered alongside the CSVs"
        rows = (out_dir / "table1_results.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2 * 3 * 3

    def test_fig1_smoke(self, tmp_path, monkeypatch):
        import rmab_beamsched.reproduce as rep
        monkeypatch.setattr(rep, "PROBE_GRID", (0.01, 2.0, 0.05))
        out_dir = tmp_path / "f1"
        assert cli.main(["reproduce", "fig1", "--out-dir", str(out_dir)]) == 0
        assert (out_dir / "fig1_reckless.csv").exists()
        assert (out_dir / "fig1_cautious.png").exists()

    def test_unknown_preset_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["reproduce", "table9"])

    def test_env_var_thread_fallback(self, scalar_scenario_file, tmp_path, monkeypatch):
        monkeypatch.setenv("RMAB_BEAMSCHED_THREADS", "2")
        out = tmp_path / "r.csv"
        assert cli.main(["simulate", str(scalar_scenario_file), "--nmc", "2",
                         "--out", str(out)]) == 0
