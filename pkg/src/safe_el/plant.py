"""Two-link planar manipulator used as the ground-truth Euler-Lagrange plant.

Both links have length ``l`` and are modelled as uniform rods. The controller
never reads anything from here except through the simulated measurements;
the model and its certified bounds exist for the simulator and the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundViolated, ConfigurationError, UnknownPreset


@dataclass(frozen=True)
class ManipulatorModel:
    m1: float = 1.0
    m2: float = 1.0
    l: float = 1.0
    g: float = 9.81

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0 and self.l > 0):
            raise ConfigurationError("link masses and length must be positive")
        if self.g < 0:
            raise ConfigurationError("gravity must be nonnegative")


@dataclass
class PlantState:
    q: np.ndarray
    w: np.ndarray
    w_hat: np.ndarray


def mass_matrix(model: ManipulatorModel, q) -> np.ndarray:
    ml2 = model.m2 * model.l**2
    c2 = math.cos(q[1])
    m11 = model.m1 * model.l**2 / 3.0 + 4.0 * ml2 / 3.0 + ml2 * c2
    m12 = ml2 / 3.0 + 0.5 * ml2 * c2
    return np.array([[m11, m12], [m12, ml2 / 3.0]])


def coriolis_matrix(model: ManipulatorModel, q, w) -> np.ndarray:
    a = 0.5 * model.m2 * model.l**2 * math.sin(q[1])
    return np.array([[-a * w[1], -a * (w[0] + w[1])], [a * w[0], 0.0]])


def gravity_vector(model: ManipulatorModel, q) -> np.ndarray:
    gl = model.g * model.l
    c1 = math.cos(q[0])
    c12 = math.cos(q[0] + q[1])
    return np.array(
        [0.5 * model.m1 * gl * c1 + 0.5 * model.m2 * gl * c12 + model.m2 * gl * c1,
         0.5 * model.m2 * gl * c12]
    )


def accel(model: ManipulatorModel, q, w, tau, tau_d) -> np.ndarray:
    """Joint acceleration ``M^-1 (tau - C w - G + tau_d)``."""
    rhs = (
        np.asarray(tau, dtype=float)
        - coriolis_matrix(model, q, w) @ np.asarray(w, dtype=float)
        - gravity_vector(model, q)
        + np.asarray(tau_d, dtype=float)
    )
    return np.linalg.solve(mass_matrix(model, q), rhs)


def forward_kinematics(model: ManipulatorModel, q) -> np.ndarray:
    l = model.l
    return np.array(
        [l * math.cos(q[0]) + l * math.cos(q[0] + q[1]),
         l * math.sin(q[0]) + l * math.sin(q[0] + q[1])]
    )


def jacobian(model: ManipulatorModel, q) -> np.ndarray:
    l = model.l
    s1, c1 = math.sin(q[0]), math.cos(q[0])
    s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
    return np.array([[-l * s1 - l * s12, -l * s12], [l * c1 + l * c12, l * c12]])


def jacobian_partials(model: ManipulatorModel, q) -> tuple[np.ndarray, np.ndarray]:
    """``(dJ/dq1, dJ/dq2)``."""
    l = model.l
    s1, c1 = math.sin(q[0]), math.cos(q[0])
    s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
    d2 = np.array([[-l * c12, -l * c12], [-l * s12, -l * s12]])
    d1 = d2 + np.array([[-l * c1, 0.0], [-l * s1, 0.0]])
    return d1, d2


def inverse_kinematics(model: ManipulatorModel, p, elbow: str = "down") -> np.ndarray:
    """Joint angles reaching task point ``p``.

    ``elbow="down"`` picks ``q2 >= 0`` (elbow below the base-to-tip line for a
    counter-clockwise positive convention).
    """
    x, y = float(p[0]), float(p[1])
    l = model.l
    c2 = (x * x + y * y - 2.0 * l * l) / (2.0 * l * l)
    if not -1.0 <= c2 <= 1.0:
        raise ConfigurationError(f"point ({x}, {y}) is outside the reachable annulus")
    q2 = math.acos(c2)
    if elbow == "up":
        q2 = -q2
    elif elbow != "down":
        raise ConfigurationError(f"elbow must be 'up' or 'down', got {elbow!r}")
    q1 = math.atan2(y, x) - math.atan2(l * math.sin(q2), l + l * math.cos(q2))
    return np.array([q1, q2])


# --- uncertainty signals -------------------------------------------------

Signal = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class UncertaintySignals:
    """External torque disturbance and velocity measurement error.

    ``d0, d1, d2`` are the declared bounds on ``||tau_d||``, ``||xi||`` and
    ``||xi_dot||``. Only ``d1`` is used by the controllers.
    """

    tau_d: Signal
    xi: Signal
    xi_dot: Signal
    d0: float
    d1: float
    d2: float
    tau_d_id: str = "custom"
    xi_id: str = "custom"


def _zero(t: float) -> np.ndarray:
    return np.zeros(2)


TAU_D_PRESETS: dict[str, Signal] = {
    "10*sin(t)": lambda t: np.full(2, 10.0 * math.sin(t)),
    "zero": _zero,
}

XI_PRESETS: dict[str, tuple[Signal, Signal]] = {
    "0.2*sin(2t)": (
        lambda t: np.full(2, 0.2 * math.sin(2.0 * t)),
        lambda t: np.full(2, 0.4 * math.cos(2.0 * t)),
    ),
    "zero": (_zero, _zero),
}


def uncertainty_preset(tau_d: str, xi: str, d0: float, d1: float, d2: float) -> UncertaintySignals:
    try:
        tau_fn = TAU_D_PRESETS[tau_d]
    except KeyError:
        raise UnknownPreset(f"unknown tau_d preset {tau_d!r}; known: {sorted(TAU_D_PRESETS)}") from None
    try:
        xi_fn, xi_dot_fn = XI_PRESETS[xi]
    except KeyError:
        raise UnknownPreset(f"unknown xi preset {xi!r}; known: {sorted(XI_PRESETS)}") from None
    return UncertaintySignals(tau_fn, xi_fn, xi_dot_fn, d0, d1, d2, tau_d, xi)


def signal_extrema(signals: UncertaintySignals, horizon: float, n: int = 20001) -> dict:
    """Largest 2-norms and componentwise magnitudes over a dense time grid."""
    ts = np.linspace(0.0, horizon, n)
    tau = np.array([signals.tau_d(t) for t in ts])
    xi = np.array([signals.xi(t) for t in ts])
    xid = np.array([signals.xi_dot(t) for t in ts])
    return {
        "tau_d_norm": float(np.linalg.norm(tau, axis=1).max()),
        "xi_norm": float(np.linalg.norm(xi, axis=1).max()),
        "xi_abs": float(np.abs(xi).max()),
        "xi_dot_norm": float(np.linalg.norm(xid, axis=1).max()),
    }


# --- bound certification --------------------------------------------------


def certify_bounds(
    model: ManipulatorModel,
    n_samples: int = 10_000,
    lambda2: float = 5.0,
    seed: int = 0,
) -> dict:
    """Empirical inertia, Coriolis and gravity bounds over random samples.

    Samples ``q`` uniformly in ``[-pi, pi]^2`` and ``w`` in ``[-10, 10]^2``.
    Raises :class:`BoundViolated` if some ``M(q)`` is not symmetric positive
    definite or its largest eigenvalue exceeds ``lambda2``.
    """
    if n_samples < 10_000:
        raise ValueError("certify_bounds needs at least 1e4 samples")
    rng = np.random.default_rng(seed)
    qs = rng.uniform(-math.pi, math.pi, size=(n_samples, 2))
    ws = rng.uniform(-10.0, 10.0, size=(n_samples, 2))
    eig_min, eig_max, zeta_c, zeta_g = np.inf, 0.0, 0.0, 0.0
    for q, w in zip(qs, ws):
        m = mass_matrix(model, q)
        if not np.array_equal(m, m.T):
            raise BoundViolated("mass matrix not symmetric", q=q)
        lo, hi = np.linalg.eigvalsh(m)
        if lo <= 0.0:
            raise BoundViolated(f"mass matrix not positive definite (eig {lo:.3e})", q=q)
        if hi > lambda2:
            raise BoundViolated(f"sigma_max(M) = {hi:.6g} exceeds lambda2 = {lambda2}", q=q)
        eig_min = min(eig_min, lo)
        eig_max = max(eig_max, hi)
        wn = np.linalg.norm(w)
        if wn > 0:
            zeta_c = max(zeta_c, np.linalg.norm(coriolis_matrix(model, q, w), 2) / wn)
        zeta_g = max(zeta_g, np.linalg.norm(gravity_vector(model, q)))
    return {
        "n_samples": n_samples,
        "lambda1": float(eig_min),
        "lambda2_empirical": float(eig_max),
        "lambda2_declared": float(lambda2),
        "zeta_c": float(zeta_c),
        "zeta_g": float(zeta_g),
    }


def true_adaptive_targets(bounds: dict, d0: float, d2: float) -> tuple[float, float]:
    """Ideal adaptive parameters ``(zeta_c/lambda1, (zeta_g + D0)/lambda1 + D2)``."""
    lam1 = bounds["lambda1"]
    return bounds["zeta_c"] / lam1, (bounds["zeta_g"] + d0) / lam1 + d2
