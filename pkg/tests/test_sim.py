import json

import numpy as np
import pytest

from safe_el import scenario as scn, sim
from safe_el.errors import GainConditionViolated, InitialConditionFailed, SingularJacobian
from safe_el.plant import forward_kinematics, uncertainty_preset


def short(name, *overrides):
    return scn.with_overrides(scn.preset(name), list(overrides))


@pytest.fixture(scope="module")
def joint_short():
    sc = short("joint_sva", "blf.k1=0.5", "sim.T=1.5")
    return sc, *sim.run(sc)


@pytest.fixture(scope="module")
def task_short():
    sc = short("task_case2", "sim.T=1.0")
    return sc, *sim.run(sc)


def test_log_shape_and_columns(joint_short):
    sc, traj, summary = joint_short
    assert len(traj) == 1501
    assert traj.columns == sim.log_columns(sc)
    assert traj.columns[:9] == ["t", "q1", "q2", "w1", "w2", "w1_hat", "w2_hat", "mu1", "mu2"]
    assert np.allclose(np.diff(traj.column("t")), 1e-3)
    assert np.all(np.isfinite(traj.data))


def test_initial_row_contract(joint_short, task_short):
    for sc, traj, _ in (joint_short, task_short):
        assert traj.column("eq_norm")[0] == 0.0
        assert traj.column("t")[0] == 0.0


def test_bookkeeping_identities(joint_short, task_short):
    for sc, traj, _ in (joint_short, task_short):
        sig = uncertainty_preset(sc.uncertainty.tau_d, sc.uncertainty.xi, 0, 0, 0)
        v = "mu" if sc.mode == "joint" else "eta"
        for row in traj.data[::50]:
            r = dict(zip(traj.columns, row))
            xi = sig.xi(r["t"])
            assert abs(r["w1_hat"] + xi[0] - r["w1"]) <= 1e-12
            assert abs(r["w2_hat"] + xi[1] - r["w2"]) <= 1e-12
            e = np.array([r["w1_hat"] - r[f"{v}1"], r["w2_hat"] - r[f"{v}2"]])
            assert abs(np.linalg.norm(e) - r["eq_norm"]) <= 1e-12


def test_task_log_has_task_coordinates(task_short):
    sc, traj, _ = task_short
    assert "eta1" in traj.columns and "x" in traj.columns
    from safe_el.plant import ManipulatorModel

    m = ManipulatorModel()
    for row in traj.data[::100]:
        r = dict(zip(traj.columns, row))
        assert np.allclose(forward_kinematics(m, [r["q1"], r["q2"]]), [r["x"], r["y"]], atol=1e-14)
        assert r["h_parabola"] == pytest.approx(1 + r["x"] - r["y"] ** 2, abs=1e-14)


def test_summary_recomputable_from_csv(joint_short, tmp_path):
    sc, traj, summary = joint_short
    csv_path, json_path = sim.write_outputs(traj, summary, tmp_path)
    back = sim.TrajectoryLog.read_csv(csv_path)
    assert back.columns == traj.columns
    assert np.array_equal(back.data, traj.data)  # %.17g round-trips exactly
    stored = json.loads(json_path.read_text())
    t = back.column("t")
    late = t >= sc.sim.T / 2 - 1e-9
    assert abs(stored["rms_tracking"] - np.sqrt(np.mean(back.column("track_err")[late] ** 2))) <= 1e-12
    assert abs(stored["max_e_norm"] - back.column("eq_norm").max()) <= 1e-12
    for b in sc.barriers:
        assert abs(stored["min_h"][b.preset] - back.column(f"h_{b.preset}").min()) <= 1e-12
    assert stored["qp_activations"] == int(np.count_nonzero(back.column("qp_correction_norm") > 0))


def test_determinism(tmp_path):
    sc = short("joint_sva", "sim.T=0.3")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    sim.run(sc)[0].write_csv(a)
    sim.run(scn.from_json(sc.to_json()))[0].write_csv(b)
    assert a.read_bytes() == b.read_bytes()


def test_zero_horizon_two_rows():
    sc = short("joint_sva", "sim.T=0.001")
    traj, summary = sim.run(sc)
    assert len(traj) == 2
    assert summary.status == "completed"


def test_hold_reference_without_uncertainty_settles():
    # no gravity feedforward, so e settles where the robust torque balances g(q)
    sc = short("joint_sva", "blf.k1=0.5", "nominal.reference=\"hold\"", "uncertainty.tau_d=\"zero\"",
               "uncertainty.xi=\"zero\"", "sim.T=6")
    traj, summary = sim.run(sc)
    assert summary.status == "completed"
    t = traj.column("t")
    late = t > 3.0
    e = traj.column("eq_norm")[late]
    assert e.max() < sc.blf.L
    assert np.ptp(e) < 1e-3
    assert np.abs(traj.data[-1, [3, 4]]).max() < 1e-4  # joint velocities at rest
    assert np.count_nonzero(traj.column("qp_correction_norm")[late]) == 0


def test_baseline_records_violation_and_continues():
    sc = short("joint_sva", "sim.unfiltered_baseline=true", "sim.T=2")
    traj, summary = sim.run(sc)
    assert summary.status == sim.STATUS_SAFETY
    assert summary.exit_code == 1
    assert summary.first_violation is not None and summary.first_violation["h"] < 0
    assert summary.t_final == pytest.approx(2.0)  # the run goes on past the violation
    assert summary.qp_activations == 0


def test_small_lambda_fails_initial_hbar():
    # hbar(q0) turns negative once the lambda*h term no longer covers the margins
    sc = short("joint_sva", "blf.k1=0.5", "sim.T=3", *[f"barriers.{i}.gamma=0.01" for i in range(4)],
               *[f"barriers.{i}.lambda=0.01" for i in range(4)])
    with pytest.raises(InitialConditionFailed):
        sim.run(sc)


def test_gain_condition_enforced_without_override():
    sc = short("joint_sva", "blf.replicate_paper=false")
    with pytest.raises(GainConditionViolated):
        sim.assemble(sc)
    assert sim.assemble(short("joint_sva", "blf.replicate_paper=false", "blf.k1=0.5")).warnings == []


def test_initial_condition_checked_at_assembly():
    with pytest.raises(InitialConditionFailed):
        sim.assemble(short("joint_sva", "initial.q=[2.5, 1.0]"))


def test_task_singular_start_rejected():
    with pytest.raises(SingularJacobian):
        sim.assemble(short("task_case2", "initial.p=[2.0, 0.0]"))


def test_tracking_guard_terminates_run():
    # an unreachable guard fraction trips on the first transient
    sc = short("joint_sva", "blf.k1=0.5", "sim.e_guard=0.01", "sim.T=1")
    traj, summary = sim.run(sc)
    assert summary.status == sim.STATUS_TRACKING
    assert summary.exit_code == 1
    assert summary.t_final < 1.0


def test_rk4_option_runs_short_horizon():
    sc = short("joint_sva", "blf.k1=0.5", "sim.integrator=\"rk4\"", "sim.step=1e-5", "sim.T=0.01")
    traj, summary = sim.run(sc)
    assert summary.status == "completed"
    assert len(traj) == 1001
