"""Scenario files: JSON schema, dataclasses and the built-in presets.

A scenario fully determines a run. Vectors are stored as tuples so two
scenarios compare equal field by field after a JSON round trip.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import jsonschema

from .errors import ConfigurationError, UnknownPreset

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=None) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": False,
    }


SCENARIO_SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "mode": {"enum": ["joint", "task"]},
        "plant": _obj({"m1": _POS, "m2": _POS, "l": _POS, "g": {"type": "number", "minimum": 0}}),
        "uncertainty": _obj(
            {
                "d0": {"type": "number", "minimum": 0},
                "d1": {"type": "number", "minimum": 0},
                "d2": {"type": "number", "minimum": 0},
                "tau_d": {"type": "string"},
                "xi": {"type": "string"},
            }
        ),
        "blf": _obj(
            {
                "lambda2": _NUM, "k1": _NUM, "eps": _NUM, "eps1": _NUM, "eps2": _NUM,
                "gamma_theta": _NUM, "L": _NUM,
                "theta_init": {"type": "array", "items": {"type": "number", "minimum": 0},
                               "minItems": 2, "maxItems": 2},
                "replicate_paper": {"type": "boolean"},
            }
        ),
        "barriers": {
            "type": "array",
            "minItems": 1,
            "items": _obj({"preset": {"type": "string"}, "gamma": _POS, "beta": _POS, "lambda": _POS}),
        },
        "nominal": _obj(
            {
                "reference": {"type": "string"},
                "alpha1": _NUM, "alpha2": _NUM,
                "l1": _NUM, "l2": _NUM, "singularity_tol": _POS,
            },
            required=["reference"],
        ),
        "initial": _obj(
            {"q": _VEC2, "p": _VEC2, "w": _VEC2, "elbow": {"enum": ["up", "down"]}},
            required=["w"],
        ),
        "sim": _obj(
            {
                "T": _POS, "step": _POS,
                "unfiltered_baseline": {"type": "boolean"},
                "seed": {"type": "integer"},
                "integrator": {"enum": ["radau", "rk4"]},
                "rtol": _POS, "atol": _POS,
                "e_guard": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "h_tol": {"type": "number", "minimum": 0},
            },
            required=["T", "step"],
        ),
    },
    required=["mode", "plant", "uncertainty", "blf", "barriers", "nominal", "initial", "sim"],
)


def _tup(v):
    return None if v is None else tuple(float(x) for x in v)


@dataclass(frozen=True)
class PlantCfg:
    m1: float = 1.0
    m2: float = 1.0
    l: float = 1.0
    g: float = 9.81


@dataclass(frozen=True)
class UncertaintyCfg:
    d0: float
    d1: float
    d2: float
    tau_d: str = "10*sin(t)"
    xi: str = "0.2*sin(2t)"


@dataclass(frozen=True)
class BlfCfg:
    lambda2: float
    k1: float
    eps: float
    eps1: float
    eps2: float
    gamma_theta: float
    L: float
    theta_init: tuple = (0.1, 0.1)
    replicate_paper: bool = False


@dataclass(frozen=True)
class BarrierCfg:
    preset: str
    gamma: float
    beta: float
    lam: float


@dataclass(frozen=True)
class NominalCfg:
    reference: str
    alpha1: float | None = None
    alpha2: float | None = None
    l1: float | None = None
    l2: float | None = None
    singularity_tol: float = 1e-6


@dataclass(frozen=True)
class InitialCfg:
    w: tuple = (0.0, 0.0)
    q: tuple | None = None
    p: tuple | None = None
    elbow: str = "down"


@dataclass(frozen=True)
class SimCfg:
    T: float
    step: float = 1e-3
    unfiltered_baseline: bool = False
    seed: int = 0  # reserved; every built-in signal is deterministic
    integrator: str = "radau"
    rtol: float = 1e-7
    atol: float = 1e-10
    e_guard: float = 1.0  # abort when ||e|| >= e_guard * L
    h_tol: float = 1e-6


@dataclass(frozen=True)
class Scenario:
    mode: str
    plant: PlantCfg
    uncertainty: UncertaintyCfg
    blf: BlfCfg
    barriers: tuple
    nominal: NominalCfg
    initial: InitialCfg
    sim: SimCfg
    name: str = "custom"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["barriers"] = [
            {"preset": b.preset, "gamma": b.gamma, "beta": b.beta, "lambda": b.lam} for b in self.barriers
        ]
        d["blf"]["theta_init"] = list(self.blf.theta_init)
        ini = {"w": list(self.initial.w), "elbow": self.initial.elbow}
        if self.initial.q is not None:
            ini["q"] = list(self.initial.q)
        if self.initial.p is not None:
            ini["p"] = list(self.initial.p)
        d["initial"] = ini
        d["nominal"] = {k: v for k, v in d["nominal"].items() if v is not None}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def validate_document(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"scenario invalid at {where}: {exc.message}") from None


def _check_mode(sc: Scenario) -> None:
    from .cbf_joint import JOINT_PRESET_NAMES
    from .cbf_task import TASK_PRESET_NAMES

    known = JOINT_PRESET_NAMES if sc.mode == "joint" else TASK_PRESET_NAMES
    for b in sc.barriers:
        if b.preset not in known:
            raise ConfigurationError(f"barrier {b.preset!r} is not a {sc.mode}-space preset; known: {list(known)}")
    nom, ini = sc.nominal, sc.initial
    if sc.mode == "joint":
        if nom.alpha1 is None or nom.alpha2 is None or nom.l1 is not None or nom.l2 is not None:
            raise ConfigurationError("joint mode needs nominal.alpha1/alpha2 and no l1/l2")
        if ini.q is None or ini.p is not None:
            raise ConfigurationError("joint mode needs initial.q (and no initial.p)")
    else:
        if nom.l1 is None or nom.l2 is None or nom.alpha1 is not None or nom.alpha2 is not None:
            raise ConfigurationError("task mode needs nominal.l1/l2 and no alpha1/alpha2")
        if (ini.q is None) == (ini.p is None):
            raise ConfigurationError("task mode needs exactly one of initial.q or initial.p")
    if sc.sim.step > sc.sim.T:
        raise ConfigurationError("sim.step must not exceed sim.T")


def from_dict(doc: dict) -> Scenario:
    validate_document(doc)
    ini = doc["initial"]
    sc = Scenario(
        mode=doc["mode"],
        plant=PlantCfg(**doc["plant"]),
        uncertainty=UncertaintyCfg(**doc["uncertainty"]),
        blf=BlfCfg(**{**doc["blf"], "theta_init": _tup(doc["blf"].get("theta_init", (0.1, 0.1)))}),
        barriers=tuple(
            BarrierCfg(b["preset"], b["gamma"], b["beta"], b["lambda"]) for b in doc["barriers"]
        ),
        nominal=NominalCfg(**doc["nominal"]),
        initial=InitialCfg(w=_tup(ini["w"]), q=_tup(ini.get("q")), p=_tup(ini.get("p")),
                           elbow=ini.get("elbow", "down")),
        sim=SimCfg(**doc["sim"]),
        name=doc.get("name", "custom"),
    )
    _check_mode(sc)
    return sc


def from_json(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario is not valid JSON: {exc}") from None
    return from_dict(doc)


# --- presets ------------------------------------------------------------------

_SHARED_UNCERTAINTY = UncertaintyCfg(d0=10.0 * math.sqrt(2.0), d1=0.2, d2=0.4 * math.sqrt(2.0))


def _joint_sva() -> Scenario:
    return Scenario(
        name="joint_sva",
        mode="joint",
        plant=PlantCfg(),
        uncertainty=_SHARED_UNCERTAINTY,
        blf=BlfCfg(lambda2=5.0, k1=0.1, eps=0.01, eps1=0.01, eps2=0.01, gamma_theta=1.0, L=0.3,
                   replicate_paper=True),
        barriers=tuple(
            BarrierCfg(n, gamma=10.0, beta=2.0, lam=16.0)
            for n in ("box_q1_upper", "box_q1_lower", "box_q2_upper", "box_q2_lower")
        ),
        nominal=NominalCfg(reference="3*sin(t)", alpha1=4.0, alpha2=4.0),
        initial=InitialCfg(q=(1.0, 1.0), w=(0.0, 0.0)),
        sim=SimCfg(T=20.0),
    )


def _task(name, barrier, gamma, p0, reference, l12=20.0) -> Scenario:
    return Scenario(
        name=name,
        mode="task",
        plant=PlantCfg(),
        uncertainty=_SHARED_UNCERTAINTY,
        blf=BlfCfg(lambda2=5.0, k1=3.0, eps=0.01, eps1=0.01, eps2=0.01, gamma_theta=1.0, L=0.05,
                   replicate_paper=True),
        barriers=(BarrierCfg(barrier, gamma=gamma, beta=2.0, lam=100.0),),
        nominal=NominalCfg(reference=reference, l1=l12, l2=l12),
        initial=InitialCfg(p=p0, w=(0.0, 0.0), elbow="down"),
        sim=SimCfg(T=10.0),
    )


PRESETS = {
    "joint_sva": _joint_sva,
    "task_case1": lambda: _task("task_case1", "disk_exclusion", 1000.0, (1.59, 0.11), "line(1.5-0.3t,0)"),
    "task_case2": lambda: _task("task_case2", "parabola", 300.0, (1.8, 0.0), "circle(1.5)"),
    "task_case3": lambda: _task("task_case3", "halfplane", 500.0, (1.8, 0.0), "circle(1.5)", l12=40.0),
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise UnknownPreset(f"unknown scenario preset {name!r}; known: {sorted(PRESETS)}") from None


def load(source: str) -> Scenario:
    """Load a preset by name or a scenario JSON file by path."""
    if source in PRESETS:
        return preset(source)
    path = Path(source)
    if not path.is_file():
        raise UnknownPreset(f"{source!r} is neither a preset ({sorted(PRESETS)}) nor a readable file")
    return from_json(path.read_text())


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def with_overrides(sc: Scenario, assignments) -> Scenario:
    """Apply ``dotted.path=value`` overrides (values parsed as JSON when possible).

    List elements are addressed by index, e.g. ``barriers.0.gamma=20``.
    """
    doc = copy.deepcopy(sc.to_dict())
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        node = doc
        try:
            for part in parts[:-1]:
                node = node[int(part)] if isinstance(node, list) else node[part]
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = _parse_value(raw)
            else:
                node[last] = _parse_value(raw)
        except (KeyError, IndexError, ValueError, TypeError):
            raise ConfigurationError(f"override path {key!r} does not exist") from None
    return from_dict(doc)


def replace_field(sc: Scenario, section: str, **changes) -> Scenario:
    """Copy of ``sc`` with fields of one section replaced."""
    return replace(sc, **{section: replace(getattr(sc, section), **changes)})


__all__ = [
    "Scenario", "PlantCfg", "UncertaintyCfg", "BlfCfg", "BarrierCfg", "NominalCfg", "InitialCfg",
    "SimCfg", "SCENARIO_SCHEMA", "PRESETS", "preset", "load", "from_dict", "from_json",
    "with_overrides", "replace_field", "validate_document",
]
