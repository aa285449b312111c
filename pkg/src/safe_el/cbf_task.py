"""Task-space safety layer: backstepping nominal law and the task CBF-QP.

The proxy ``eta`` is a virtual joint velocity (``eta_dot = upsilon``) whose
end-effector image ``J(q) eta`` is steered along the reference. The barrier
lives on task coordinates ``p = f(q)``.

Two derivative conventions are used throughout:

* The backstepping partials of ``delta`` hold ``J`` fixed, so
  ``d delta/dp = -k J^-1`` and ``d delta/dt = J^-1 (k pd_dot + pd_ddot)``
  with ``k = l1 + ||J||^2 / 2``.
* The margin ``hbar(p, q, eta)`` depends on ``q`` both through ``p`` and
  through ``J(q)``. The filter treats the two parts separately: the ``p``
  part sees the proxy motion ``J eta`` with robustness radius ``rho``, the
  explicit ``q`` part sees the measured velocity ``w_hat`` with radius
  ``D1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    Infeasible,
    InitialConditionFailed,
    SafetyFilterInfeasible,
    UnknownPreset,
)
from .numerics import finite_diff_jacobian, pinv_or_inv, spectral_norm
from .plant import ManipulatorModel, forward_kinematics, jacobian, jacobian_partials
from .qp import QpProblem, QpSolution, solve_min_norm
from .references import Reference


@dataclass(frozen=True)
class TaskBarrier:
    name: str
    h: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    gamma: float
    beta: float
    lam: float
    rho: float
    D1: float

    def __post_init__(self):
        for k in ("gamma", "beta", "lam", "rho"):
            if not getattr(self, k) > 0:
                raise ConfigurationError(f"barrier {self.name!r}: {k} must be positive")
        if self.D1 < 0:
            raise ConfigurationError(f"barrier {self.name!r}: D1 must be nonnegative")


_TASK_PRESETS = {
    "disk_exclusion": (
        lambda p: float(p[0] ** 2 + p[1] ** 2 - 0.25),
        lambda p: np.array([2.0 * p[0], 2.0 * p[1]]),
        lambda p: 2.0 * np.eye(2),
    ),
    "parabola": (
        lambda p: float(1.0 + p[0] - p[1] ** 2),
        lambda p: np.array([1.0, -2.0 * p[1]]),
        lambda p: np.diag([0.0, -2.0]),
    ),
    "halfplane": (
        lambda p: float(1.0 + p[0] + p[1]),
        lambda p: np.array([1.0, 1.0]),
        lambda p: np.zeros((2, 2)),
    ),
}

TASK_PRESET_NAMES = tuple(_TASK_PRESETS)


def task_barrier(name: str, gamma: float, beta: float, lam: float, rho: float, D1: float) -> TaskBarrier:
    try:
        h, grad, hess = _TASK_PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown task barrier {name!r}; known: {list(_TASK_PRESETS)}") from None
    return TaskBarrier(name, h, grad, hess, gamma, beta, lam, rho, D1)


# --- backstepping nominal law -------------------------------------------------


@dataclass(frozen=True)
class BackstepParams:
    l1: float
    l2: float
    reference: Reference
    singularity_tol: float = 1e-6

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ConfigurationError("backstepping gains l1, l2 must be positive")
        if not self.singularity_tol > 0:
            raise ConfigurationError("singularity_tol must be positive")


def _backstep_terms(params: BackstepParams, J: np.ndarray, p, t: float):
    J_inv = pinv_or_inv(J, params.singularity_tol)
    ref = params.reference
    eps_d = np.asarray(p, dtype=float) - ref.pos(t)
    k = params.l1 + 0.5 * spectral_norm(J) ** 2
    pd_dot = ref.vel(t)
    delta = J_inv @ (pd_dot - k * eps_d)
    d_delta_dp = -k * J_inv
    d_delta_dt = J_inv @ (k * pd_dot + ref.acc(t))
    return eps_d, delta, d_delta_dp, d_delta_dt


def delta(params: BackstepParams, model: ManipulatorModel, p, q, t: float) -> np.ndarray:
    """Virtual control ``J^-1 (pd_dot - (l1 + ||J||^2/2) eps_d)``."""
    return _backstep_terms(params, jacobian(model, q), p, t)[1]


def upsilon_d_from_jacobian(params: BackstepParams, J: np.ndarray, p, eta, t: float) -> np.ndarray:
    eps_d, dlt, d_dp, d_dt = _backstep_terms(params, J, p, t)
    eta = np.asarray(eta, dtype=float)
    eps_eta = eta - dlt
    d_dp_J = d_dp @ J
    return (
        -params.l2 * eps_eta
        + d_dp_J @ eta
        + d_dt
        - 0.5 * spectral_norm(d_dp_J) ** 2 * eps_eta
        - J.T @ eps_d
    )


def upsilon_d(params: BackstepParams, model: ManipulatorModel, p, q, eta, t: float) -> np.ndarray:
    return upsilon_d_from_jacobian(params, jacobian(model, q), p, eta, t)


# --- barrier margin and filter terms -----------------------------------------------


def hbar_task(barrier: TaskBarrier, model: ManipulatorModel, p, q, eta) -> float:
    gJ = barrier.grad(p) @ jacobian(model, q)
    return (
        float(gJ @ eta)
        - float(gJ @ gJ) / (2.0 * barrier.beta)
        - 0.5 * barrier.beta * barrier.rho**2
        + barrier.lam * barrier.h(p)
    )


def hbar_partials(barrier: TaskBarrier, model: ManipulatorModel, p, q, eta):
    """``(d hbar/dp, d hbar/dq at fixed p, hbar)``."""
    eta = np.asarray(eta, dtype=float)
    J = jacobian(model, q)
    g = barrier.grad(p)
    H = barrier.hess(p)
    gJ = g @ J
    hb = float(gJ @ eta) - float(gJ @ gJ) / (2.0 * barrier.beta) - 0.5 * barrier.beta * barrier.rho**2 + barrier.lam * barrier.h(p)
    d_p = (J @ eta) @ H - (gJ @ J.T @ H) / barrier.beta + barrier.lam * g
    d_q = np.empty(J.shape[1])
    for j, dJ in enumerate(jacobian_partials(model, q)):
        g_dJ = g @ dJ
        d_q[j] = float(g_dJ @ eta) - float(gJ @ g_dJ) / barrier.beta
    return d_p, d_q, hb


def composite_gradient(barrier: TaskBarrier, model: ManipulatorModel, q, eta) -> np.ndarray:
    """Total derivative of ``q -> hbar(f(q), q, eta)``."""
    p = forward_kinematics(model, q)
    d_p, d_q, _ = hbar_partials(barrier, model, p, q, eta)
    return d_p @ jacobian(model, q) + d_q


def check_composite_gradient(
    barrier: TaskBarrier, model: ManipulatorModel, n_points: int = 100, seed: int = 0, rtol: float = 1e-4
) -> None:
    """Compare :func:`composite_gradient` with central differences in ``q``."""
    rng = np.random.default_rng(seed)
    for _ in range(n_points):
        q = rng.uniform(-np.pi, np.pi, 2)
        eta = rng.uniform(-2.0, 2.0, 2)
        fd = finite_diff_jacobian(
            lambda x: np.array([hbar_task(barrier, model, forward_kinematics(model, x), x, eta)]), q
        )[0]
        an = composite_gradient(barrier, model, q, eta)
        if np.abs(an - fd).max() > rtol * (1.0 + np.abs(an).max()):
            raise ConfigurationError(f"barrier {barrier.name!r}: composite gradient mismatch at q={q}")


def phi_terms(barrier: TaskBarrier, model: ManipulatorModel, p, q, eta, w_hat) -> tuple[float, np.ndarray]:
    """Constant term and input row of ``Phi0 + Phi1 upsilon >= 0``."""
    eta = np.asarray(eta, dtype=float)
    J = jacobian(model, q)
    d_p, d_q, hb = hbar_partials(barrier, model, p, q, eta)
    d_pJ = d_p @ J
    phi0 = (
        float(d_pJ @ eta)
        - float(np.linalg.norm(d_pJ)) * barrier.rho
        + float(d_q @ w_hat)
        - float(np.linalg.norm(d_q)) * barrier.D1
        + barrier.gamma * hb
    )
    return phi0, barrier.grad(p) @ J


def check_initial_condition_task(barrier: TaskBarrier, model: ManipulatorModel, p0, q0, eta0) -> float:
    """Return ``hbar`` at the initial state; raise if ``h(p0) < 0`` or ``hbar < 0``."""
    h0 = barrier.h(p0)
    hb = hbar_task(barrier, model, p0, q0, eta0)
    if not (h0 >= 0 and hb >= 0):
        raise InitialConditionFailed(
            f"barrier {barrier.name!r}: h(p0) = {h0:.6g}, hbar = {hb:.6g} (need both >= 0)",
            barrier=barrier.name, h=h0, hbar=hb,
        )
    return hb


def task_qp(barriers: Sequence[TaskBarrier], model, p, q, eta, w_hat, ups_d) -> QpProblem:
    rows, rhs = [], []
    for b in barriers:
        phi0, phi1 = phi_terms(b, model, p, q, eta, w_hat)
        rows.append(phi1)
        rhs.append(-phi0)
    return QpProblem(ups_d, np.array(rows).reshape(len(rows), len(ups_d)), np.array(rhs))


def filter_task(barriers: Sequence[TaskBarrier], model, p, q, eta, w_hat, ups_d) -> QpSolution:
    problem = task_qp(barriers, model, p, q, eta, w_hat, ups_d)
    try:
        return solve_min_norm(problem)
    except Infeasible as exc:
        raise SafetyFilterInfeasible(
            f"task safety filter infeasible: {exc}",
            p=np.array(p), q=np.array(q), eta=np.array(eta), upsilon_d=np.array(ups_d),
            barriers=[b.name for b in barriers], **exc.diagnostics,
        ) from exc


def safe_upsilon(barriers: Sequence[TaskBarrier], model, p, q, eta, w_hat, ups_d) -> np.ndarray:
    return filter_task(barriers, model, p, q, eta, w_hat, ups_d).u_star
