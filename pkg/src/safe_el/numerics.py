"""Small dense linear algebra helpers and ODE integrators.

Vectors and matrices are plain ``numpy`` float arrays; every problem in this
package is two-dimensional, so nothing here tries to be clever about size.

Two integrators are provided:

* :func:`rk4_step` -- classical fixed-step Runge-Kutta, for smooth non-stiff
  right-hand sides.
* :func:`integrate_on_grid` -- an L-stable implicit Radau IIA solver (scipy)
  whose dense output is sampled on a uniform grid. The closed loops in
  :mod:`safe_el.sim` need this: the smoothed robust terms of the adaptive
  torque law have boundary-layer gains around 1e8 1/s, far outside the
  stability region of any explicit method at millisecond steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import Radau

from .errors import NonFiniteDerivative, SingularJacobian

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OdeStepper:
    """Fixed step size paired with a derivative evaluator ``rhs(t, x)``."""

    step_size: float
    rhs: Rhs

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")


def _checked(k: np.ndarray, t: float, stage: int) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise NonFiniteDerivative(
            f"non-finite derivative at RK4 stage {stage} (t={t:.6g})", t=t, stage=stage
        )
    return k


def rk4_step(stepper: OdeStepper, t: float, x: np.ndarray) -> np.ndarray:
    """Advance ``x`` from ``t`` to ``t + stepper.step_size`` with classical RK4."""
    h = stepper.step_size
    f = stepper.rhs
    x = np.asarray(x, dtype=float)
    k1 = _checked(f(t, x), t, 1)
    k2 = _checked(f(t + 0.5 * h, x + 0.5 * h * k1), t + 0.5 * h, 2)
    k3 = _checked(f(t + 0.5 * h, x + 0.5 * h * k2), t + 0.5 * h, 3)
    k4 = _checked(f(t + h, x + h * k3), t + h, 4)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_grid(horizon: float, step: float) -> np.ndarray:
    """Uniform grid ``0, step, ..., floor(horizon/step)*step``."""
    n = int(math.floor(horizon / step + 1e-9))
    return step * np.arange(n + 1, dtype=float)


def integrate_on_grid(
    rhs: Rhs,
    x0: np.ndarray,
    grid: np.ndarray,
    method: str = "radau",
    rtol: float = 1e-7,
    atol: float = 1e-10,
) -> Iterator[np.ndarray]:
    """Yield the state at every point of ``grid`` (starting with ``x0``).

    ``method="rk4"`` takes one RK4 step per grid interval. ``method="radau"``
    runs an adaptive Radau IIA solver and interpolates its dense output onto
    the grid; the right-hand side may return non-finite values at trial
    points outside its domain, which makes the solver retry with a smaller
    step. A solver breakdown is raised as :class:`NonFiniteDerivative` with
    the last accepted time and state attached.

    This is a generator so the caller can stop integrating as soon as a
    logged sample violates a run-time check.
    """
    x0 = np.asarray(x0, dtype=float)
    yield x0.copy()
    if len(grid) < 2:
        return
    if method == "rk4":
        x = x0
        for t0, t1 in zip(grid[:-1], grid[1:]):
            x = rk4_step(OdeStepper(t1 - t0, rhs), t0, x)
            yield x
        return
    if method != "radau":
        raise ValueError(f"unknown integrator {method!r}")

    t_end = float(grid[-1])
    solver = Radau(rhs, float(grid[0]), x0, t_end, rtol=rtol, atol=atol)
    k = 1
    while k < len(grid):
        try:
            message = solver.step()
        except (ValueError, np.linalg.LinAlgError) as exc:
            message = str(exc)
        if solver.status == "failed" or (message is not None and solver.status != "finished"):
            raise NonFiniteDerivative(
                f"implicit integrator failed at t={solver.t:.6g}: {message}",
                t=float(solver.t),
                state=np.array(solver.y),
            )
        dense = solver.dense_output()
        while k < len(grid) and grid[k] <= solver.t + 1e-12:
            yield solver.y.copy() if abs(grid[k] - solver.t) < 1e-15 else dense(grid[k])
            k += 1
        if solver.status == "finished":
            # last grid point may sit a hair past t_end from round-off
            while k < len(grid):
                yield solver.y.copy()
                k += 1


def finite_diff_jacobian(
    f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        fp = np.atleast_1d(np.asarray(f(x + dx), dtype=float))
        fm = np.atleast_1d(np.asarray(f(x - dx), dtype=float))
        jac[:, j] = (fp - fm) / (2.0 * step)
    return jac


def spectral_norm(a: np.ndarray) -> float:
    """Induced 2-norm; closed form for 2x2 matrices."""
    a = np.asarray(a, dtype=float)
    if a.shape == (2, 2):
        fro2 = float(np.sum(a * a))
        det = float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
        disc = max(fro2 * fro2 - 4.0 * det * det, 0.0)
        return math.sqrt(0.5 * (fro2 + math.sqrt(disc)))
    return float(np.linalg.norm(a, 2))


def pinv_or_inv(jac: np.ndarray, singularity_tol: float = 1e-6) -> np.ndarray:
    """Right inverse ``J^+`` with ``J J^+ = I`` for a full-row-rank ``J``.

    Raises :class:`SingularJacobian` when the smallest singular value is
    below ``singularity_tol``.
    """
    jac = np.asarray(jac, dtype=float)
    rows, cols = jac.shape
    if rows > cols:
        raise SingularJacobian(f"{rows}x{cols} matrix cannot have full row rank")
    sv = np.linalg.svd(jac, compute_uv=False)
    sigma_min = float(sv[-1])
    if sigma_min < singularity_tol:
        raise SingularJacobian(
            f"smallest singular value {sigma_min:.3e} below tolerance {singularity_tol:.1e}",
            sigma_min=sigma_min,
            jacobian=jac,
        )
    if rows == cols:
        return np.linalg.inv(jac)
    return jac.T @ np.linalg.inv(jac @ jac.T)
