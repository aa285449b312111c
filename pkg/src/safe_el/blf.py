"""Adaptive barrier-Lyapunov velocity-tracking controller.

The torque drives the virtual velocity tracking error ``e = w_hat - mu`` and
keeps ``||e|| < L`` using only the inertia upper bound ``lambda2`` and the
measurement-noise bound ``D1``. Two adaptive gains absorb the unknown
Coriolis, gravity and disturbance magnitudes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import GainConditionViolated, TrackingErrorEscaped

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlfParams:
    lambda2: float
    D1: float
    L: float
    k1: float
    eps: float
    eps1: float
    eps2: float
    gamma_theta: float
    replicate_paper: bool = False

    @property
    def Lambda(self) -> float:
        return self.eps + self.eps1 + self.eps2

    @property
    def k1_min(self) -> float:
        """Lower bound on ``k1`` (strict) that the stability argument needs."""
        return self.Lambda / self.L**2


@dataclass
class BlfState:
    theta1_hat: float = 0.1
    theta2_hat: float = 0.1


def regressor_phi(w_hat, D1: float) -> float:
    return (float(np.linalg.norm(w_hat)) + D1) ** 2


def _check_inside(params: BlfParams, e_norm: float) -> None:
    if not e_norm < params.L:
        raise TrackingErrorEscaped(
            f"||e|| = {e_norm:.6g} reached the barrier L = {params.L}", e_norm=e_norm, L=params.L
        )


def gain_N(params: BlfParams, state: BlfState, e_norm: float, phi: float, nu_norm: float) -> float:
    """Scalar gain multiplying ``-lambda2 * e`` in the torque law."""
    a = state.theta1_hat * phi
    b = state.theta2_hat
    return (
        params.k1
        + a * a / (a * e_norm + params.eps1)
        + b * b / (b * e_norm + params.eps2)
        + nu_norm * nu_norm / (e_norm * nu_norm + params.eps)
    )


def torque(params: BlfParams, state: BlfState, e_q, w_hat, nu) -> np.ndarray:
    e_q = np.asarray(e_q, dtype=float)
    e_norm = float(np.linalg.norm(e_q))
    _check_inside(params, e_norm)
    n = gain_N(params, state, e_norm, regressor_phi(w_hat, params.D1), float(np.linalg.norm(nu)))
    return -params.lambda2 * n * e_q


def adaptive_rates(params: BlfParams, state: BlfState, e_q, w_hat) -> tuple[float, float]:
    e_norm = float(np.linalg.norm(e_q))
    _check_inside(params, e_norm)
    drive = e_norm / (params.L**2 - e_norm**2)
    phi = regressor_phi(w_hat, params.D1)
    return (
        -params.gamma_theta * state.theta1_hat + drive * phi,
        -params.gamma_theta * state.theta2_hat + drive,
    )


def blf_value(params: BlfParams, state: BlfState, e_q, theta1_true: float, theta2_true: float) -> float:
    """Barrier-Lyapunov function value (diagnostic; needs the true parameters)."""
    e2 = float(np.dot(e_q, e_q))
    if not e2 < params.L**2:
        raise TrackingErrorEscaped("BLF undefined outside ||e|| < L", e_norm=math.sqrt(e2))
    t1 = theta1_true - state.theta1_hat
    t2 = theta2_true - state.theta2_hat
    return 0.5 * math.log(params.L**2 / (params.L**2 - e2)) + 0.5 * t1 * t1 + 0.5 * t2 * t2


def validate_params(params: BlfParams) -> list[str]:
    """Check positivity and ``k1 > Lambda / L^2``.

    Returns a list of warnings. With ``replicate_paper`` set, a violated gain
    condition becomes a warning instead of :class:`GainConditionViolated`;
    nonpositive constants are always an error.
    """
    named = {
        "lambda2": params.lambda2, "D1": params.D1, "L": params.L, "k1": params.k1,
        "eps": params.eps, "eps1": params.eps1, "eps2": params.eps2,
        "gamma_theta": params.gamma_theta,
    }
    bad = [k for k, v in named.items() if not v > 0]
    if bad:
        raise GainConditionViolated(f"BLF constants must be positive: {', '.join(bad)}", nonpositive=bad)
    warnings = []
    if not params.k1 > params.k1_min:
        msg = (
            f"k1 = {params.k1:g} does not exceed Lambda/L^2 = {params.k1_min:.6g}; "
            "boundedness of the tracking error is not guaranteed"
        )
        if not params.replicate_paper:
            raise GainConditionViolated(msg, k1=params.k1, k1_min=params.k1_min)
        log.warning("%s (accepted: replicate_paper override)", msg)
        warnings.append(msg)
    return warnings
