"""Closed-loop assembly, integration, run-time checks and trajectory logs.

Flat state layout for both modes: ``[q1, q2, w1, w2, v1, v2, theta1_hat,
theta2_hat]`` where ``v`` is the proxy velocity (``mu`` in joint mode,
``eta`` in task mode).

The BLF loop is very stiff (its boundary-layer gain reaches ~1e8 1/s near
``e = 0``), so the default integrator is implicit Radau IIA with dense
output sampled on the fixed logging grid. The controller and the QP are
evaluated inside every right-hand-side call, i.e. the feedback is
continuous rather than sampled.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import blf, cbf_joint, cbf_task
from .errors import (
    ConfigurationError,
    Infeasible,
    NonFiniteDerivative,
    SafeControlError,
    SingularJacobian,
    TrackingErrorEscaped,
)
from .numerics import integrate_on_grid, time_grid
from .plant import (
    ManipulatorModel,
    UncertaintySignals,
    accel,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    uncertainty_preset,
)
from .references import reference_preset
from .scenario import Scenario

log = logging.getLogger(__name__)

STATUS_OK = "completed"
STATUS_SAFETY = "safety_violation"
STATUS_TRACKING = "tracking_error_escaped"
STATUS_INFEASIBLE = "infeasible"
STATUS_SINGULAR = "singular_jacobian"
STATUS_NONFINITE = "integration_failed"

# exit code per terminal status
STATUS_EXIT = {
    STATUS_OK: 0,
    STATUS_SAFETY: 1,
    STATUS_TRACKING: 1,
    STATUS_SINGULAR: 1,
    STATUS_NONFINITE: 1,
    STATUS_INFEASIBLE: 3,
}


def _status_of(exc: BaseException) -> str:
    if isinstance(exc, Infeasible):
        return STATUS_INFEASIBLE
    if isinstance(exc, TrackingErrorEscaped):
        return STATUS_TRACKING
    if isinstance(exc, SingularJacobian):
        return STATUS_SINGULAR
    return STATUS_NONFINITE


@dataclass
class ClosedLoop:
    """Everything needed to integrate and log one scenario."""

    scenario: Scenario
    model: ManipulatorModel
    signals: UncertaintySignals
    blf_params: blf.BlfParams
    barriers: tuple
    law: object  # NominalJointLaw or BackstepParams
    x0: np.ndarray
    filtered: bool = True
    warnings: list = field(default_factory=list)
    last_error: SafeControlError | None = None

    @property
    def mode(self) -> str:
        return self.scenario.mode

    def evaluate(self, t: float, x: np.ndarray) -> dict:
        """Controller signals at ``(t, x)``; raises on domain errors."""
        q, w, v = x[0:2], x[2:4], x[4:6]
        st = blf.BlfState(float(x[6]), float(x[7]))
        w_hat = w - self.signals.xi(t)
        e = w_hat - v
        if self.mode == "joint":
            nom = cbf_joint.nominal_nu(self.law, q, v, t)
            p = None
            if self.filtered:
                sol = cbf_joint.filter_joint(self.barriers, q, v, nom)
                u = sol.u_star
            else:
                u = nom
        else:
            J = jacobian(self.model, q)
            p = forward_kinematics(self.model, q)
            nom = cbf_task.upsilon_d_from_jacobian(self.law, J, p, v, t)
            if self.filtered:
                u = cbf_task.filter_task(self.barriers, self.model, p, q, v, w_hat, nom).u_star
            else:
                u = nom
        tau = blf.torque(self.blf_params, st, e, w_hat, u)
        rates = blf.adaptive_rates(self.blf_params, st, e, w_hat)
        return {"q": q, "w": w, "v": v, "w_hat": w_hat, "e": e, "p": p,
                "u_nom": nom, "u": u, "tau": tau, "theta_rates": rates}

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        xi = self.signals.xi(t)
        e_norm = math.hypot(x[2] - xi[0] - x[4], x[3] - xi[1] - x[5])
        if e_norm >= self.scenario.sim.e_guard * self.blf_params.L:
            self.last_error = TrackingErrorEscaped(
                f"||e|| = {e_norm:.6g} reached {self.scenario.sim.e_guard:g} L", t=t, e_norm=e_norm
            )
            return np.full(8, np.nan)
        try:
            s = self.evaluate(t, x)
        except (Infeasible, TrackingErrorEscaped, SingularJacobian) as exc:
            # non-finite derivative makes the adaptive solver reject the trial step
            exc.diagnostics.setdefault("t", t)
            self.last_error = exc
            return np.full(8, np.nan)
        w_dot = accel(self.model, s["q"], s["w"], s["tau"], self.signals.tau_d(t))
        return np.concatenate([s["w"], w_dot, s["u"], s["theta_rates"]])

    def hbars(self, x, t) -> tuple[list, list]:
        q, v = x[0:2], x[4:6]
        if self.mode == "joint":
            return ([b.h(q) for b in self.barriers], [cbf_joint.hbar(b, q, v) for b in self.barriers])
        p = forward_kinematics(self.model, q)
        return ([b.h(p) for b in self.barriers],
                [cbf_task.hbar_task(b, self.model, p, q, v) for b in self.barriers])


def _model(sc: Scenario) -> ManipulatorModel:
    return ManipulatorModel(sc.plant.m1, sc.plant.m2, sc.plant.l, sc.plant.g)


def _signals(sc: Scenario) -> UncertaintySignals:
    u = sc.uncertainty
    return uncertainty_preset(u.tau_d, u.xi, u.d0, u.d1, u.d2)


def _blf_params(sc: Scenario) -> tuple[blf.BlfParams, list]:
    b = sc.blf
    params = blf.BlfParams(
        lambda2=b.lambda2, D1=sc.uncertainty.d1, L=b.L, k1=b.k1, eps=b.eps, eps1=b.eps1,
        eps2=b.eps2, gamma_theta=b.gamma_theta, replicate_paper=b.replicate_paper,
    )
    return params, blf.validate_params(params)


def _x0(q0, w0, signals, theta_init) -> np.ndarray:
    w0 = np.asarray(w0, dtype=float)
    v0 = w0 - signals.xi(0.0)  # proxy starts at the measured velocity
    return np.concatenate([np.asarray(q0, dtype=float), w0, v0, np.asarray(theta_init, dtype=float)])


def assemble_joint(sc: Scenario) -> ClosedLoop:
    if sc.mode != "joint":
        raise ConfigurationError("assemble_joint needs a joint-mode scenario")
    model, signals = _model(sc), _signals(sc)
    params, warnings = _blf_params(sc)
    rho = sc.uncertainty.d1 + sc.blf.L
    barriers = tuple(
        cbf_joint.joint_barrier(b.preset, b.gamma, b.beta, b.lam, rho) for b in sc.barriers
    )
    for b in barriers:
        cbf_joint.check_derivatives(b)
    q0 = np.array(sc.initial.q)
    ref = reference_preset(sc.nominal.reference, hold_point=q0)
    law = cbf_joint.NominalJointLaw(sc.nominal.alpha1, sc.nominal.alpha2, ref)
    x0 = _x0(q0, sc.initial.w, signals, sc.blf.theta_init)
    for b in barriers:
        cbf_joint.check_initial_condition(b, x0[0:2], x0[4:6])
    return ClosedLoop(sc, model, signals, params, barriers, law, x0,
                      filtered=not sc.sim.unfiltered_baseline, warnings=warnings)


def assemble_task(sc: Scenario) -> ClosedLoop:
    if sc.mode != "task":
        raise ConfigurationError("assemble_task needs a task-mode scenario")
    model, signals = _model(sc), _signals(sc)
    params, warnings = _blf_params(sc)
    rho = sc.uncertainty.d1 + sc.blf.L
    barriers = tuple(
        cbf_task.task_barrier(b.preset, b.gamma, b.beta, b.lam, rho, sc.uncertainty.d1)
        for b in sc.barriers
    )
    for b in barriers:
        cbf_task.check_composite_gradient(b, model)
    if sc.initial.q is not None:
        q0 = np.array(sc.initial.q)
    else:
        q0 = inverse_kinematics(model, sc.initial.p, elbow=sc.initial.elbow)
        log.info("initial joint angles from inverse kinematics: q0 = %s", q0)
    p0 = forward_kinematics(model, q0)
    ref = reference_preset(sc.nominal.reference, hold_point=p0)
    law = cbf_task.BackstepParams(sc.nominal.l1, sc.nominal.l2, ref, sc.nominal.singularity_tol)
    cbf_task.delta(law, model, p0, q0, 0.0)  # raises SingularJacobian at a singular start
    x0 = _x0(q0, sc.initial.w, signals, sc.blf.theta_init)
    for b in barriers:
        cbf_task.check_initial_condition_task(b, model, p0, q0, x0[4:6])
    return ClosedLoop(sc, model, signals, params, barriers, law, x0,
                      filtered=not sc.sim.unfiltered_baseline, warnings=warnings)


def assemble(sc: Scenario) -> ClosedLoop:
    return assemble_joint(sc) if sc.mode == "joint" else assemble_task(sc)


# --- logging ------------------------------------------------------------------------


def log_columns(sc: Scenario) -> list[str]:
    v = "mu" if sc.mode == "joint" else "eta"
    cols = ["t", "q1", "q2", "w1", "w2", "w1_hat", "w2_hat", f"{v}1", f"{v}2", "eq_norm",
            "theta1_hat", "theta2_hat", "tau1", "tau2", "nu1", "nu2"]
    for b in sc.barriers:
        cols += [f"h_{b.preset}", f"hbar_{b.preset}"]
    if sc.mode == "task":
        cols += ["x", "y"]
    cols += ["qp_correction_norm", "track_err"]
    return cols


@dataclass
class TrajectoryLog:
    columns: list
    data: np.ndarray  # rows x columns

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]

    def write_csv(self, path) -> None:
        np.savetxt(path, self.data, fmt="%.17g", delimiter=",", header=",".join(self.columns), comments="")

    @classmethod
    def read_csv(cls, path) -> "TrajectoryLog":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(header, data)


@dataclass
class RunSummary:
    scenario: str
    mode: str
    filtered: bool
    status: str
    steps_logged: int
    t_final: float
    min_h: dict
    min_hbar: dict
    max_e_norm: float
    e_bound: float
    rms_tracking: float
    qp_activations: int
    min_theta_hat: float
    first_violation: dict | None = None
    error: dict | None = None
    warnings: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return STATUS_EXIT[self.status]

    def to_dict(self) -> dict:
        return _nan_to_none(asdict(self))

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable, allow_nan=False))


def _nan_to_none(o):
    # strict JSON has no NaN; statistics of an empty log become null
    if isinstance(o, float) and math.isnan(o):
        return None
    if isinstance(o, dict):
        return {k: _nan_to_none(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_nan_to_none(v) for v in o]
    return o


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


def _row(loop: ClosedLoop, t: float, x: np.ndarray) -> np.ndarray:
    s = loop.evaluate(t, x)
    hs, hbs = loop.hbars(x, t)
    if loop.mode == "joint":
        track = float(np.linalg.norm(s["q"] - loop.law.reference.pos(t)))
    else:
        track = float(np.linalg.norm(s["p"] - loop.law.reference.pos(t)))
    vals = [t, *s["q"], *s["w"], *s["w_hat"], *s["v"], float(np.linalg.norm(s["e"])),
            x[6], x[7], *s["tau"], *s["u"]]
    for h, hb in zip(hs, hbs):
        vals += [h, hb]
    if loop.mode == "task":
        vals += list(s["p"])
    vals += [float(np.linalg.norm(s["u"] - s["u_nom"])), track]
    return np.array(vals, dtype=float)


def summarize(loop: ClosedLoop, trajectory: TrajectoryLog, status: str,
              first_violation=None, error=None) -> RunSummary:
    """Summary statistics, computed from the log only."""
    sc = loop.scenario
    t = trajectory.column("t")
    names = [b.preset for b in sc.barriers]
    horizon = sc.sim.T
    late = t >= horizon / 2.0 - 1e-9
    track = trajectory.column("track_err")
    rms = float(np.sqrt(np.mean(track[late] ** 2))) if late.any() else float("nan")
    theta = trajectory.data[:, [trajectory.columns.index("theta1_hat"), trajectory.columns.index("theta2_hat")]]

    def lo(a):
        return float(a.min()) if a.size else float("nan")

    def hi(a):
        return float(a.max()) if a.size else float("nan")

    return RunSummary(
        scenario=sc.name,
        mode=sc.mode,
        filtered=loop.filtered,
        status=status,
        steps_logged=len(trajectory),
        t_final=float(t[-1]) if t.size else 0.0,
        min_h={n: lo(trajectory.column(f"h_{n}")) for n in names},
        min_hbar={n: lo(trajectory.column(f"hbar_{n}")) for n in names},
        max_e_norm=hi(trajectory.column("eq_norm")),
        e_bound=float(sc.blf.L),
        rms_tracking=rms,
        qp_activations=int(np.count_nonzero(trajectory.column("qp_correction_norm") > 0.0)),
        min_theta_hat=lo(theta),
        first_violation=first_violation,
        error=error,
        warnings=list(loop.warnings),
    )


def _error_info(exc: BaseException) -> dict:
    info = {"type": type(exc).__name__, "message": str(exc)}
    for k, v in getattr(exc, "diagnostics", {}).items():
        info[k] = _jsonable(v) if isinstance(v, (np.ndarray, np.generic)) else v
    return info


def run(scenario: Scenario, progress: Callable[[float], None] | None = None) -> tuple[TrajectoryLog, RunSummary]:
    """Integrate ``scenario`` and check every logged sample.

    Filtered runs stop at the first sample with some ``h_i < -h_tol`` or
    ``||e|| >= e_guard * L`` and return the partial log. Baseline runs
    (filter bypassed) only record the first safety violation and continue,
    since the violation is the expected outcome.
    """
    loop = assemble(scenario)
    sim = scenario.sim
    grid = time_grid(sim.T, sim.step)
    cols = log_columns(scenario)
    rows: list[np.ndarray] = []
    status, first_violation, error = STATUS_OK, None, None
    h_idx = [cols.index(f"h_{b.preset}") for b in scenario.barriers]
    e_idx = cols.index("eq_norm")
    e_limit = sim.e_guard * loop.blf_params.L
    started = time.perf_counter()

    states = integrate_on_grid(loop.rhs, loop.x0, grid, method=sim.integrator, rtol=sim.rtol, atol=sim.atol)
    k = 0
    try:
        for k, x in enumerate(states):
            t = float(grid[k])
            try:
                row = _row(loop, t, x)
            except (Infeasible, TrackingErrorEscaped, SingularJacobian) as exc:
                status, error = _status_of(exc), _error_info(exc)
                error.setdefault("t", t)
                break
            if not np.all(np.isfinite(row)):
                status = STATUS_NONFINITE
                error = {"type": "NonFinite", "message": "non-finite value in log row", "t": t}
                break
            rows.append(row)
            hv = row[h_idx]
            if first_violation is None and np.any(hv < -sim.h_tol):
                i = int(np.argmin(hv))
                first_violation = {"t": t, "barrier": scenario.barriers[i].preset, "index": i,
                                   "h": float(hv[i]), "q": x[0:2].tolist()}
                status = STATUS_SAFETY
                if loop.filtered:
                    break
            if row[e_idx] >= e_limit:
                status = STATUS_TRACKING
                error = {"type": "TrackingErrorEscaped", "t": t, "e_norm": float(row[e_idx]),
                         "message": f"||e|| = {row[e_idx]:.6g} reached {e_limit:g}"}
                break
            if progress is not None and k % 1000 == 0:
                progress(t)
    except NonFiniteDerivative as exc:
        cause = loop.last_error
        status = _status_of(cause) if cause is not None else STATUS_NONFINITE
        error = _error_info(exc)
        if cause is not None:
            error["cause"] = _error_info(cause)
    trajectory = TrajectoryLog(cols, np.array(rows).reshape(len(rows), len(cols)))
    summary = summarize(loop, trajectory, status, first_violation, error)
    log.info("%s: %s after %.2f s wall time", scenario.name, status, time.perf_counter() - started)
    return trajectory, summary


def write_outputs(trajectory: TrajectoryLog, summary: RunSummary, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "trajectory.csv", out / "summary.json"
    trajectory.write_csv(csv_path)
    summary.write_json(json_path)
    return csv_path, json_path
