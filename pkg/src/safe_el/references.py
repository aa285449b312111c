"""Named reference trajectories (position, velocity, acceleration)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UnknownPreset


@dataclass(frozen=True)
class Reference:
    name: str
    pos: Callable[[float], np.ndarray]
    vel: Callable[[float], np.ndarray]
    acc: Callable[[float], np.ndarray]


def _sin3() -> Reference:
    return Reference(
        "3*sin(t)",
        lambda t: np.full(2, 3.0 * math.sin(t)),
        lambda t: np.full(2, 3.0 * math.cos(t)),
        lambda t: np.full(2, -3.0 * math.sin(t)),
    )


def _line() -> Reference:
    return Reference(
        "line(1.5-0.3t,0)",
        lambda t: np.array([1.5 - 0.3 * t, 0.0]),
        lambda t: np.array([-0.3, 0.0]),
        lambda t: np.zeros(2),
    )


def _circle() -> Reference:
    r = 1.5
    return Reference(
        "circle(1.5)",
        lambda t: np.array([r * math.cos(t), r * math.sin(t)]),
        lambda t: np.array([-r * math.sin(t), r * math.cos(t)]),
        lambda t: np.array([-r * math.cos(t), -r * math.sin(t)]),
    )


REFERENCES = {
    "3*sin(t)": _sin3,
    "line(1.5-0.3t,0)": _line,
    "circle(1.5)": _circle,
}


def hold(point) -> Reference:
    """Constant reference at ``point``."""
    p = np.array(point, dtype=float)
    return Reference("hold", lambda t: p.copy(), lambda t: np.zeros_like(p), lambda t: np.zeros_like(p))


def reference_preset(name: str, hold_point=None) -> Reference:
    if name == "hold":
        if hold_point is None:
            raise UnknownPreset("reference 'hold' needs a hold point")
        return hold(hold_point)
    try:
        return REFERENCES[name]()
    except KeyError:
        raise UnknownPreset(
            f"unknown reference {name!r}; known: {sorted(REFERENCES) + ['hold']}"
        ) from None
