"""Minimum-norm safety filter QP.

Every filter in this package solves

    minimize ||u - u_d||^2   subject to   A u >= b,

the Euclidean projection of a nominal input onto a polyhedron. The solver is
a dual active-set method (Goldfarb-Idnani) specialised to an identity
Hessian: it starts from the unconstrained optimum ``u_d`` and adds violated
constraints one at a time, so infeasibility shows up as a violated
constraint that no step can repair.

:func:`kkt_oracle` is an independent brute-force check that enumerates all
active sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConstraint, Infeasible

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class QpProblem:
    u_d: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        u_d = np.asarray(self.u_d, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(-1, u_d.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(u_d)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("QP data must be finite")
        object.__setattr__(self, "u_d", u_d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class QpSolution:
    u_star: np.ndarray
    active_set: tuple[int, ...] = ()
    # multipliers of the ||u - u_d||^2 objective: 2 (u* - u_d) = A_act^T multipliers
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _screen_zero_rows(problem: QpProblem, tol: float) -> np.ndarray:
    """Indices of usable rows; zero rows are dropped or rejected."""
    norms = np.linalg.norm(problem.A, axis=1)
    keep = []
    for i, (nrm, bi) in enumerate(zip(norms, problem.b)):
        if nrm <= tol:
            if bi > tol:
                raise DegenerateConstraint(
                    f"constraint {i} has a zero row but requires 0 >= {bi:.6g}", index=i, b=bi
                )
            continue
        keep.append(i)
    return np.array(keep, dtype=int)


def _feas_tol(A, b, u, tol):
    """Per-row slack tolerance scaled by the magnitudes entering ``A u - b``."""
    return tol * (1.0 + np.abs(b) + np.abs(A) @ np.abs(u))


def _infeasible(problem: QpProblem, index: int, u: np.ndarray) -> Infeasible:
    return Infeasible(
        f"constraint set is empty (constraint {index} cannot be satisfied)",
        index=index,
        u=u.copy(),
        A=problem.A.copy(),
        b=problem.b.copy(),
    )


def solve_min_norm(problem: QpProblem, tol: float = DEFAULT_TOL) -> QpSolution:
    """Project ``problem.u_d`` onto ``{u : A u >= b}``.

    A nominal input that already satisfies every constraint is returned
    unchanged (same values, empty active set).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u_d = problem.u_d
    A, b = problem.A, problem.b
    if np.all(A @ u_d >= b):  # also covers zero rows, which then have b <= 0
        return QpSolution(u_d.copy(), (), np.zeros(0))
    rows = _screen_zero_rows(problem, tol)
    if rows.size == 0 or np.all(A[rows] @ u_d >= b[rows]):
        return QpSolution(u_d.copy(), (), np.zeros(0))

    n = u_d.size
    u = u_d.copy()
    active: list[int] = []
    lam = np.zeros(0)  # multipliers of the 1/2||u-u_d||^2 form
    for _ in range(50 * (rows.size + 1)):
        slack = A[rows] @ u - b[rows] + _feas_tol(A[rows], b[rows], u, tol)
        worst = int(np.argmin(slack))
        if slack[worst] >= 0.0:
            break
        p = int(rows[worst])
        a_p = A[p]
        lam_p = 0.0
        while True:
            if active:
                N = A[active].T  # n x |active|
                r = np.linalg.solve(N.T @ N, N.T @ a_p)
                z = a_p - N @ r
            else:
                r = np.zeros(0)
                z = a_p.copy()
            # partial step limited by a multiplier hitting zero
            t1, drop = np.inf, -1
            for j, rj in enumerate(r):
                if rj > tol:
                    ratio = lam[j] / rj
                    if ratio < t1:
                        t1, drop = ratio, j
            z_sq = float(z @ z)
            if z_sq > (tol * tol) * float(a_p @ a_p) * n:
                t2 = (b[p] - float(a_p @ u)) / float(z @ a_p)
            else:
                t2 = np.inf
            step = min(t1, t2)
            if not np.isfinite(step):
                raise _infeasible(problem, p, u)
            if np.isfinite(t2):
                u = u + step * z
            lam = lam - step * r
            lam_p += step
            if step == t2:
                active.append(p)
                lam = np.append(lam, lam_p)
                break
            del active[drop]
            lam = np.delete(lam, drop)
    else:  # pragma: no cover - cycling guard
        raise Infeasible("active-set iteration limit reached", u=u.copy())

    act = sorted(active)
    if act:
        # recompute from the final working set; removes drift of the incremental updates
        As = A[act]
        mu = np.linalg.solve(As @ As.T, b[act] - As @ u_d)
        u = u_d + As.T @ mu
        mult = 2.0 * mu
    else:
        mult = np.zeros(0)
    keep = mult > tol * (1.0 + float(np.max(np.abs(mult), initial=0.0)))
    return QpSolution(u, tuple(int(i) for i, k in zip(act, keep) if k), mult[keep])


def kkt_oracle(problem: QpProblem, tol: float = DEFAULT_TOL) -> QpSolution:
    """Brute-force projection by enumerating all ``2^m`` active sets.

    Each subset is solved as an equality-constrained projection in closed
    form; the answer is the feasible candidate with nonnegative multipliers
    and smallest objective, preferring fewer active constraints on ties.
    """
    m = problem.m
    if m > 12:
        raise ValueError("kkt_oracle enumerates 2^m subsets; m must be <= 12")
    u_d, A, b = problem.u_d, problem.A, problem.b
    for i in range(m):
        if np.linalg.norm(A[i]) <= tol and b[i] > tol:
            raise DegenerateConstraint(f"constraint {i} has a zero row", index=i)

    best = None
    best_obj = np.inf
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            idx = list(subset)
            if size:
                As = A[idx]
                gram = As @ As.T
                if np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.abs(gram).max())) < size:
                    continue
                mu = np.linalg.solve(gram, b[idx] - As @ u_d)
                if np.any(mu < -tol * (1.0 + np.abs(mu).max())):
                    continue
                u = u_d + As.T @ mu
            else:
                mu = np.zeros(0)
                u = u_d.copy()
            if np.any(A @ u < b - _feas_tol(A, b, u, tol)):
                continue
            obj = float((u - u_d) @ (u - u_d))
            if obj < best_obj - 1e-12 * (1.0 + obj):
                best, best_obj = QpSolution(u, tuple(subset), 2.0 * mu), obj
    if best is None:
        raise Infeasible("no KKT point exists; constraint set is empty")
    return best
