import json
import math

import pytest

from safe_el import scenario as scn
from safe_el.errors import ConfigurationError, UnknownPreset


@pytest.mark.parametrize("name", sorted(scn.PRESETS))
def test_round_trip(name):
    sc = scn.preset(name)
    again = scn.from_json(sc.to_json())
    assert again == sc
    for f in ("mode", "plant", "uncertainty", "blf", "barriers", "nominal", "initial", "sim", "name"):
        assert getattr(again, f) == getattr(sc, f)


def test_joint_preset_values():
    sc = scn.preset("joint_sva")
    assert sc.blf.L == 0.3
    assert sc.blf.k1 == 0.1 and sc.blf.replicate_paper
    assert (sc.blf.eps, sc.blf.eps1, sc.blf.eps2, sc.blf.gamma_theta) == (0.01, 0.01, 0.01, 1.0)
    assert [b.preset for b in sc.barriers] == ["box_q1_upper", "box_q1_lower", "box_q2_upper", "box_q2_lower"]
    assert all((b.gamma, b.beta, b.lam) == (10.0, 2.0, 16.0) for b in sc.barriers)
    assert sc.initial.q == (1.0, 1.0) and sc.initial.w == (0.0, 0.0)
    assert sc.nominal.reference == "3*sin(t)"
    assert sc.uncertainty.d1 == 0.2
    assert sc.sim.T == 20.0 and sc.sim.step == 1e-3


def test_task_preset_values():
    c1, c2, c3 = (scn.preset(f"task_case{i}") for i in (1, 2, 3))
    assert c1.barriers[0].preset == "disk_exclusion"
    assert c2.barriers[0].preset == "parabola"
    assert c3.barriers[0].preset == "halfplane"
    assert [c.barriers[0].gamma for c in (c1, c2, c3)] == [1000.0, 300.0, 500.0]
    assert all(c.barriers[0].lam == 100.0 and c.barriers[0].beta == 2.0 for c in (c1, c2, c3))
    assert (c1.nominal.l1, c2.nominal.l1, c3.nominal.l1) == (20.0, 20.0, 40.0)
    assert c3.nominal.l2 == 40.0
    assert all(c.blf.L == 0.05 and c.blf.k1 == 3.0 for c in (c1, c2, c3))
    assert c1.initial.p == (1.59, 0.11)
    assert c2.initial.p == c3.initial.p == (1.8, 0.0)
    assert c1.nominal.reference == "line(1.5-0.3t,0)"
    assert c2.nominal.reference == c3.nominal.reference == "circle(1.5)"
    assert c1.uncertainty.d0 == pytest.approx(10 * math.sqrt(2))


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        scn.preset("joint_svb")
    with pytest.raises(UnknownPreset):
        scn.load("no/such/file.json")


def test_unknown_keys_rejected():
    doc = scn.preset("joint_sva").to_dict()
    doc["blf"]["k2"] = 1.0
    with pytest.raises(ConfigurationError, match="k2"):
        scn.from_dict(doc)
    doc = scn.preset("joint_sva").to_dict()
    doc["extra"] = 1
    with pytest.raises(ConfigurationError):
        scn.from_dict(doc)


def test_missing_and_wrong_types_rejected():
    doc = scn.preset("task_case1").to_dict()
    del doc["sim"]["T"]
    with pytest.raises(ConfigurationError):
        scn.from_dict(doc)
    doc = scn.preset("task_case1").to_dict()
    doc["sim"]["step"] = -1
    with pytest.raises(ConfigurationError):
        scn.from_dict(doc)


def test_mode_consistency():
    doc = scn.preset("joint_sva").to_dict()
    doc["barriers"][0]["preset"] = "halfplane"
    with pytest.raises(ConfigurationError, match="joint-space"):
        scn.from_dict(doc)
    doc = scn.preset("task_case1").to_dict()
    doc["nominal"]["alpha1"] = 4.0
    with pytest.raises(ConfigurationError):
        scn.from_dict(doc)


def test_overrides():
    sc = scn.with_overrides(scn.preset("joint_sva"), ["blf.k1=0.5", "barriers.2.gamma=20", "sim.unfiltered_baseline=true"])
    assert sc.blf.k1 == 0.5
    assert sc.barriers[2].gamma == 20.0
    assert sc.sim.unfiltered_baseline is True
    with pytest.raises(ConfigurationError):
        scn.with_overrides(sc, ["blf.k1"])
    with pytest.raises(ConfigurationError):
        scn.with_overrides(sc, ["barriers.9.gamma=1"])


def test_load_from_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(scn.preset("task_case2").to_json())
    assert scn.load(str(path)) == scn.preset("task_case2")
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        scn.load(str(path))


def test_schema_is_valid_json_schema():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(scn.SCENARIO_SCHEMA)
    json.dumps(scn.SCENARIO_SCHEMA)
