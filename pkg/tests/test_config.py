import json

import pytest

from wavesim.config import (
    DEFAULTS,
    ConfigError,
    apply_overrides,
    deep_merge,
    load_config,
    parse_override,
    schema,
    validate,
)


def test_defaults_validate():
    cfg = validate({})
    assert cfg.structure == "rod"
    assert cfg.element_kind == "bswi_rod"
    assert cfg.material.E == 200e9
    assert cfg.section.k == 1.2
    assert cfg.primary_component == "axial"


def test_schema_is_packaged():
    s = schema()
    assert s["type"] == "object"
    assert set(DEFAULTS) <= set(s["properties"])


def test_resolution_from_epw_and_spp():
    cfg = validate({"mesh": {"epw": 0.45}, "grid": {"spp": 2, "f_max": 150e3}})
    assert cfg.lambda_min == pytest.approx(0.033758, rel=1e-4)
    assert cfg.n_elements == 20
    assert cfg.dt == pytest.approx(1 / 300e3)
    fem = validate({"mesh": {"kind": "fem", "epw": 20}, "solver": "newmark"})
    assert fem.n_elements == 889
    assert fem.dt == pytest.approx(1 / 150e3 / 20)


@pytest.mark.parametrize(
    "doc,match",
    [
        ({"mesh": {"epw": 1, "n_elements": 4}}, "mutually exclusive"),
        ({"grid": {"spp": 2, "dt": 1e-6}}, "mutually exclusive"),
        ({"cracks": [{"position": 0.5, "depth_ratio": 0.2}]}, "only supported for beams"),
        ({"structure": "beam", "cracks": [{"position": 1.5, "depth_ratio": 0.2}]}, "strictly inside"),
        ({"structure": "beam", "cracks": [{"position": 0.5, "depth_ratio": 1.0}]}, "depth_ratio"),
        ({"mesh": {"epw": -1}}, "mesh.epw"),
        ({"material": "copper"}, "material"),
        ({"unknown": 1}, "Additional properties"),
        ({"excitation": {"component": "rotation"}}, "excitation.component"),
        ({"outputs": {"observe": [{"x": 2.0}]}}, "beyond the length"),
        ({"outputs": {"snapshot_times": [5e-3]}}, "exceed grid.duration"),
        ({"grid": {"duration": 1e-9}}, "shorter than one time step"),
    ],
)
def test_invalid_configs(doc, match):
    with pytest.raises(ConfigError, match=match):
        validate(doc)


def test_explicit_material():
    cfg = validate({"material": {"E": 70e9, "nu": 0.33, "rho": 2700}})
    assert cfg.material.rho == 2700


def test_parse_override_types():
    assert parse_override("grid.duration=2e-3") == (["grid", "duration"], 0.002)
    assert parse_override("solver=newmark") == (["solver"], "newmark")
    assert parse_override("mesh.epw=null") == (["mesh", "epw"], None)
    assert parse_override("cracks=[]") == (["cracks"], [])
    for bad in ("grid.duration", "=3"):
        with pytest.raises(ConfigError):
            parse_override(bad)


def test_apply_overrides_does_not_mutate():
    doc = {"grid": {"spp": 2}}
    out = apply_overrides(doc, ["grid.spp=4", "mesh.kind=fem"])
    assert doc == {"grid": {"spp": 2}}
    assert out == {"grid": {"spp": 4}, "mesh": {"kind": "fem"}}


def test_deep_merge():
    assert deep_merge({"a": {"b": 1, "c": 2}}, {"a": {"b": 3}}) == {"a": {"b": 3, "c": 2}}


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(arr)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"structure": "beam"}))
    cfg = load_config(good, ["grid.duration=5e-4"])
    assert cfg.duration == 5e-4 and cfg.structure == "beam"
    assert cfg.crack_list == []


def test_merged_and_overrides_revalidate():
    cfg = validate({"structure": "beam"})
    cr = cfg.merged({"cracks": [{"position": 0.75, "depth_ratio": 0.2}]})
    assert cr.crack_list == [(0.75, pytest.approx(0.004))]
    with pytest.raises(ConfigError):
        cfg.with_overrides(["mesh.epw=0"])
