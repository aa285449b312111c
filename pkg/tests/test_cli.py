import json

import pytest

from safe_el import cli, scenario as scn


def test_run_writes_outputs(tmp_path, capsys):
    code = cli.main(["run", "--scenario", "joint_sva", "--set", "sim.T=0.5", "--set", "blf.k1=0.5",
                     "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert min(summary["min_h"].values()) >= 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("t,q1,q2,w1,w2,w1_hat,w2_hat,mu1,mu2,eq_norm,theta1_hat,theta2_hat")
    assert "completed" in capsys.readouterr().out


def test_run_baseline_exit_1(tmp_path):
    code = cli.main(["run", "--scenario", "joint_sva", "--unfiltered-baseline", "--set", "sim.T=1.5",
                     "--out", str(tmp_path)])
    assert code == 1


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SAFE_EL_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "--scenario", "task_case3", "--set", "sim.T=0.05"]) == 0
    assert (tmp_path / "env" / "trajectory.csv").is_file()


def test_multiple_scenarios_parallel(tmp_path):
    code = cli.main(["run", "--scenario", "task_case1", "--scenario", "task_case2", "--set", "sim.T=0.05",
                     "--jobs", "2", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "00_task_case1" / "summary.json").is_file()
    assert (tmp_path / "01_task_case2" / "summary.json").is_file()


def test_scenario_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(scn.with_overrides(scn.preset("task_case1"), ["sim.T=0.05"]).to_json())
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 0


def test_validate_reports_gain_warning(capsys):
    assert cli.main(["validate", "--scenario", "task_case1"]) == 0
    out = capsys.readouterr().out
    assert "warning" in out and "Lambda/L^2 = 12" in out


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "nope"],
    ["run", "--scenario", "joint_sva", "--set", "blf.bogus=1"],
    ["validate", "--scenario", "joint_sva", "--set", "blf.replicate_paper=false"],
    ["validate", "--scenario", "joint_sva", "--set", "initial.q=[3.0, 0.0]"],
])
def test_configuration_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_infeasible_exit_3(tmp_path, monkeypatch):
    from safe_el import cbf_joint
    from safe_el.errors import SafetyFilterInfeasible

    def refuse(*args, **kwargs):
        raise SafetyFilterInfeasible("forced")

    monkeypatch.setattr(cbf_joint, "filter_joint", refuse)
    code = cli.main(["run", "--scenario", "joint_sva", "--set", "sim.T=0.05", "--out", str(tmp_path)])
    assert code == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "infeasible"
    assert summary["steps_logged"] == 0 and summary["max_e_norm"] is None
    assert summary["error"]["t"] == 0.0


def test_certify_plant(capsys):
    assert cli.main(["certify-plant", "--samples", "10000"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["lambda2_empirical"] <= 5.0


def test_certify_plant_violation_exit_1():
    assert cli.main(["certify-plant", "--lambda2", "1.0"]) == 1


def test_qp_fuzz(capsys):
    assert cli.main(["qp-fuzz", "--count", "200"]) == 0
    assert "200/200" in capsys.readouterr().out


def test_show_and_schema(capsys):
    assert cli.main(["show", "task_case3"]) == 0
    assert scn.from_json(capsys.readouterr().out) == scn.preset("task_case3")
    assert cli.main(["schema"]) == 0
    assert "properties" in json.loads(capsys.readouterr().out)
