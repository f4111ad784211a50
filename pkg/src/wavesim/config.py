"""JSON run configuration: defaults, overrides, validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .elements import MATERIALS, MaterialProps, SectionProps


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "structure": "rod",
    "geometry": {"length": 1.5, "b": 0.02, "h": 0.02},
    "material": "steel",
    "mesh": {"kind": "bswi", "n_elements": None, "epw": None, "shear_coefficient": 1.2},
    "grid": {
        "f_max": 150e3,
        "spp": None,
        "dt": None,
        "duration": 1.0e-3,
        "sigma": None,
        "window_factor": 2.0,
    },
    "excitation": {
        "type": "toneburst",
        "fc": 100e3,
        "fc2": 200e3,
        "cycles": 5,
        "window_frequency": 20e3,
        "amplitude": 1.0,
        "at": "left",
        "component": None,
    },
    "cracks": [],
    "bc": ["free", "free"],
    "solver": "lwfem",
    "newmark": {"beta": 0.25, "gamma": 0.5},
    "outputs": {"observe": None, "snapshot_times": [], "spectrum": False, "cwt_frequencies": None},
    "convergence": {"axis": "epw", "values": None, "observe_x": None, "duration": None},
    "crack_sweep": {
        "depths": None,
        "positions": None,
        "depth_ratio": 0.2,
        "position": None,
        "window": None,
        "gate": 0.15,
        "threshold": 0.05,
    },
    "dispersion": {"observe_x": None, "bandwidth": 20e3},
    "compare": {
        "lwfem": {"mesh": {"kind": "bswi", "epw": 0.45}, "grid": {"spp": 2}},
        "newmark": {"mesh": {"kind": "fem", "epw": 20}, "grid": {"spp": 20}},
        "observe_x": None,
    },
}

# resolution defaults when neither count nor EPW / neither SPP nor dt is given
DEFAULT_EPW = {"bswi": 0.45, "fem": 20.0}
DEFAULT_SPP = {"lwfem": 20, "newmark": 20}


def schema() -> dict:
    text = resources.files("wavesim").joinpath("schema/simconfig.schema.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value``; the value is parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key.path=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides:
        path, value = parse_override(item) if isinstance(item, str) else item
        node = doc
        for p in path[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[path[-1]] = value
    return doc


@dataclass(frozen=True)
class SimConfig:
    """Validated configuration document with resolved convenience accessors."""

    doc: dict

    def __getitem__(self, key):
        return self.doc[key]

    @property
    def structure(self) -> str:
        return self.doc["structure"]

    @property
    def length(self) -> float:
        return float(self.doc["geometry"]["length"])

    @property
    def material(self) -> MaterialProps:
        m = self.doc["material"]
        if isinstance(m, str):
            return MATERIALS[m]
        return MaterialProps(E=float(m["E"]), nu=float(m["nu"]), rho=float(m["rho"]))

    @property
    def section(self) -> SectionProps:
        g = self.doc["geometry"]
        return SectionProps(float(g["b"]), float(g["h"]), float(self.doc["mesh"]["shear_coefficient"]))

    @property
    def element_kind(self) -> str:
        return f"{self.doc['mesh']['kind']}_{self.structure}"

    @property
    def lambda_min(self) -> float:
        """Shortest wavelength ``c0 / f_max`` with the bar velocity ``c0``."""
        return self.material.bar_velocity / float(self.doc["grid"]["f_max"])

    @property
    def n_elements(self) -> int:
        m = self.doc["mesh"]
        if m["n_elements"] is not None:
            return int(m["n_elements"])
        epw = m["epw"] if m["epw"] is not None else DEFAULT_EPW[m["kind"]]
        return max(1, int(round(self.length * float(epw) / self.lambda_min)))

    @property
    def dt(self) -> float:
        g = self.doc["grid"]
        if g["dt"] is not None:
            return float(g["dt"])
        spp = g["spp"] if g["spp"] is not None else DEFAULT_SPP[self.doc["solver"]]
        return 1.0 / float(g["f_max"]) / float(spp)

    @property
    def duration(self) -> float:
        return float(self.doc["grid"]["duration"])

    @property
    def load_component(self) -> str:
        c = self.doc["excitation"]["component"]
        if c is None:
            return "axial" if self.structure == "rod" else "deflection"
        return c

    @property
    def primary_component(self) -> str:
        return "axial" if self.structure == "rod" else "deflection"

    @property
    def crack_list(self) -> list[tuple[float, float]]:
        h = float(self.doc["geometry"]["h"])
        return [(float(c["position"]), float(c["depth_ratio"]) * h) for c in self.doc["cracks"]]

    def with_overrides(self, overrides) -> SimConfig:
        return validate(apply_overrides(self.doc, overrides))

    def merged(self, update: dict) -> SimConfig:
        return validate(deep_merge(self.doc, update))


def validate(doc: dict) -> SimConfig:
    """Schema plus cross-field checks; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    full = deep_merge(DEFAULTS, doc)
    m, g = full["mesh"], full["grid"]
    if m["n_elements"] is not None and m["epw"] is not None:
        raise ConfigError("mesh.n_elements and mesh.epw are mutually exclusive")
    if g["spp"] is not None and g["dt"] is not None:
        raise ConfigError("grid.spp and grid.dt are mutually exclusive")
    L = float(full["geometry"]["length"])
    comps = ("axial",) if full["structure"] == "rod" else ("deflection", "rotation")
    if full["excitation"]["component"] not in (None, *comps):
        raise ConfigError(f"excitation.component must be one of {comps} for a {full['structure']}")
    if full["structure"] == "rod" and full["cracks"]:
        raise ConfigError("cracks are only supported for beams")
    for c in full["cracks"]:
        if not 0 < c["position"] < L:
            raise ConfigError(f"crack position {c['position']} must lie strictly inside (0, {L})")
    for o in full["outputs"]["observe"] or []:
        if o["x"] > L:
            raise ConfigError(f"observation point {o['x']} beyond the length {L}")
        if o.get("component", comps[0]) not in comps:
            raise ConfigError(f"observation component {o['component']!r} not in {comps}")
    if full["excitation"]["type"] == "dual" and full["excitation"]["fc2"] <= 0:
        raise ConfigError("dual excitation needs fc2 > 0")
    cfg = SimConfig(full)
    if cfg.duration < cfg.dt:
        raise ConfigError("grid.duration shorter than one time step")
    late = [t for t in full["outputs"]["snapshot_times"] if t > cfg.duration]
    if late:
        raise ConfigError(f"snapshot times {late} exceed grid.duration {cfg.duration}")
    return cfg


def load_config(path, overrides=()) -> SimConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate(apply_overrides(doc, overrides))
