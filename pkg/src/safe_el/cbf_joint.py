"""Joint-space safety filter for the proxy (virtual velocity) subsystem.

The proxy state is ``(q, mu)`` with ``mu_dot = nu``; the plant velocity
differs from ``mu`` by the tracking error plus measurement noise, which is
bounded by ``rho = D1 + L``. Safety of ``h(q) >= 0`` is obtained by keeping
the robustified margin ``hbar(q, mu) >= 0`` forward invariant through the
QP constraint ``Psi0 + Psi1 nu >= 0``.
"""

from __future__ import annotations

import math
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
from .numerics import finite_diff_jacobian
from .qp import QpProblem, QpSolution, solve_min_norm
from .references import Reference


@dataclass(frozen=True)
class JointBarrier:
    name: str
    h: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray] | None  # None: affine barrier, zero Hessian
    gamma: float
    beta: float
    lam: float
    rho: float

    def __post_init__(self):
        for k in ("gamma", "beta", "lam", "rho"):
            if not getattr(self, k) > 0:
                raise ConfigurationError(f"barrier {self.name!r}: {k} must be positive")

    def hessian(self, q) -> np.ndarray:
        if self.hess is None:
            return np.zeros((len(q), len(q)))
        return self.hess(q)


def _box(index: int, sign: float, offset: float):
    """``h = offset + sign * q[index]``."""
    g = np.zeros(2)
    g[index] = sign
    return (lambda q: offset + sign * q[index]), (lambda q: g.copy())


# name -> (h, grad, hess)
_JOINT_PRESETS = {
    "box_q1_upper": (*_box(0, -1.0, 2.5), None),
    "box_q1_lower": (*_box(0, 1.0, 2.5), None),
    "box_q2_upper": (*_box(1, -1.0, 2.0), None),
    "box_q2_lower": (*_box(1, 1.0, 1.0), None),
    # quadratic example barrier, used in tests of the Hessian path
    "disk_q_radius2": (
        lambda q: 4.0 - float(q @ q),
        lambda q: -2.0 * np.asarray(q, dtype=float),
        lambda q: -2.0 * np.eye(2),
    ),
}

JOINT_PRESET_NAMES = tuple(_JOINT_PRESETS)


def joint_barrier(name: str, gamma: float, beta: float, lam: float, rho: float) -> JointBarrier:
    try:
        h, grad, hess = _JOINT_PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown joint barrier {name!r}; known: {list(_JOINT_PRESETS)}") from None
    return JointBarrier(name, h, grad, hess, gamma, beta, lam, rho)


def check_derivatives(barrier: JointBarrier, n_points: int = 100, seed: int = 0, rtol: float = 1e-5) -> None:
    """Compare the analytic gradient and Hessian with central differences."""
    rng = np.random.default_rng(seed)
    for q in rng.uniform(-3.0, 3.0, size=(n_points, 2)):
        g_fd = finite_diff_jacobian(lambda x: np.array([barrier.h(x)]), q)[0]
        H_fd = finite_diff_jacobian(barrier.grad, q)
        g, H = barrier.grad(q), barrier.hessian(q)
        if np.abs(g - g_fd).max() > rtol * (1.0 + np.abs(g).max()):
            raise ConfigurationError(f"barrier {barrier.name!r}: gradient mismatch at q={q}")
        if np.abs(H - H_fd).max() > rtol * (1.0 + np.abs(H).max()):
            raise ConfigurationError(f"barrier {barrier.name!r}: Hessian mismatch at q={q}")


def hbar(barrier: JointBarrier, q, mu) -> float:
    return _hbar(barrier, q, mu, barrier.grad(q))


def _hbar(barrier: JointBarrier, q, mu, g) -> float:
    return (
        float(g @ mu)
        - float(g @ g) / (2.0 * barrier.beta)
        - 0.5 * barrier.beta * barrier.rho**2
        + barrier.lam * barrier.h(q)
    )


def psi_terms(barrier: JointBarrier, q, mu) -> tuple[float, np.ndarray]:
    """Constant term and input row of the constraint ``Psi0 + Psi1 nu >= 0``."""
    mu = np.asarray(mu, dtype=float)
    g = barrier.grad(q)
    if barrier.hess is None:
        m_row = barrier.lam * g
    else:
        H = barrier.hess(q)
        m_row = mu @ H - (g @ H) / barrier.beta + barrier.lam * g
    psi0 = (
        float(m_row @ mu)
        - math.sqrt(float(m_row @ m_row)) * barrier.rho
        + barrier.gamma * _hbar(barrier, q, mu, g)
    )
    return psi0, g


def check_initial_condition(barrier: JointBarrier, q0, mu0) -> float:
    """Return ``hbar(q0, mu0)``; raise if ``h(q0) <= 0`` or ``hbar < 0``."""
    h0 = barrier.h(q0)
    hb = hbar(barrier, q0, mu0)
    if not (h0 > 0 and hb >= 0):
        raise InitialConditionFailed(
            f"barrier {barrier.name!r}: h(q0) = {h0:.6g}, hbar(q0, mu0) = {hb:.6g} "
            "(need h > 0 and hbar >= 0)",
            barrier=barrier.name, h=h0, hbar=hb,
        )
    return hb


@dataclass(frozen=True)
class NominalJointLaw:
    """PD-plus-feedforward law ``nu_d = -a1 (q - q_d) - a2 (mu - qd_dot) + qd_ddot``."""

    alpha1: float
    alpha2: float
    reference: Reference

    def __post_init__(self):
        rate = self.decay_rate
        if not rate > 0.5:
            raise ConfigurationError(
                f"nominal gains alpha1={self.alpha1}, alpha2={self.alpha2} give decay rate "
                f"{rate:.4g}; need > 0.5"
            )

    @property
    def decay_rate(self) -> float:
        """Minus the spectral abscissa of ``[[0, I], [-a1 I, -a2 I]]``."""
        companion = np.array([[0.0, 1.0], [-self.alpha1, -self.alpha2]])
        return -float(np.max(np.linalg.eigvals(companion).real))


def nominal_nu(law: NominalJointLaw, q, mu, t: float) -> np.ndarray:
    ref = law.reference
    return (
        -law.alpha1 * (np.asarray(q) - ref.pos(t))
        - law.alpha2 * (np.asarray(mu) - ref.vel(t))
        + ref.acc(t)
    )


def joint_qp(barriers: Sequence[JointBarrier], q, mu, nu_d) -> QpProblem:
    A = np.empty((len(barriers), len(nu_d)))
    b = np.empty(len(barriers))
    for i, barrier in enumerate(barriers):
        psi0, A[i] = psi_terms(barrier, q, mu)
        b[i] = -psi0
    return QpProblem(nu_d, A, b)


def filter_joint(barriers: Sequence[JointBarrier], q, mu, nu_d) -> QpSolution:
    """Stacked CBF-QP solution (all barriers in one QP)."""
    problem = joint_qp(barriers, q, mu, nu_d)
    try:
        return solve_min_norm(problem)
    except Infeasible as exc:
        raise SafetyFilterInfeasible(
            f"joint safety filter infeasible: {exc}",
            q=np.array(q), mu=np.array(mu), nu_d=np.array(nu_d),
            barriers=[b.name for b in barriers], **exc.diagnostics,
        ) from exc


def safe_nu(barriers: Sequence[JointBarrier], q, mu, nu_d) -> np.ndarray:
    return filter_joint(barriers, q, mu, nu_d).u_star
