"""Scenario runners shared by the command line and the tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .config import ConfigError, SimConfig, validate
from .excitation import SampledSignal, dual_toneburst, hanning_toneburst
from .laplace import LaplaceGrid, TimeSeriesField, run_lwfem
from .mesh import GlobalSystem, LoadSpec, assemble, build_load_vector, build_mesh
from .newmark import NewmarkParams, l2_deviation, measure_convergence, newmark_solve


@dataclass
class RunResult:
    config: SimConfig
    field: TimeSeriesField
    system: GlobalSystem
    signal: SampledSignal
    meta: dict = field(default_factory=dict)

    def channel(self, label: str) -> np.ndarray:
        return self.field.channel(label)


def build_system(cfg: SimConfig) -> GlobalSystem:
    mesh = build_mesh(
        cfg.length,
        cfg.n_elements,
        kind=cfg.element_kind,
        cracks=tuple(cfg.crack_list),
        bc=tuple(cfg["bc"]),
        material=cfg.material,
        section=cfg.section,
    )
    return assemble(mesh)


def excitation_signal(cfg: SimConfig, dt: float | None = None) -> SampledSignal:
    ex = cfg["excitation"]
    dt = cfg.dt if dt is None else dt
    if ex["type"] == "dual":
        return dual_toneburst(ex["fc"], ex["fc2"], dt, ex["window_frequency"])
    return hanning_toneburst(ex["fc"], int(ex["cycles"]), dt)


def channel_label(component: str, x: float) -> str:
    return f"{component}@{x:.6g}"


def observation_rows(cfg: SimConfig, system: GlobalSystem, extra=()) -> dict:
    """Configured observation points (default: both ends and the middle)."""
    obs = cfg["outputs"]["observe"]
    comp = cfg.primary_component
    if obs is None:
        obs = [{"x": x, "component": comp} for x in (0.0, 0.5 * cfg.length, cfg.length)]
    rows = {}
    for o in list(obs) + list(extra):
        c = o.get("component", comp)
        label = o.get("label") or channel_label(c, o["x"])
        rows[label] = system.observation_row(float(o["x"]), c)
    return rows


def simulate(cfg: SimConfig, threads: int = 1, extra_observe=(), all_nodes: bool = False) -> RunResult:
    """One run of the configured solver over ``grid.duration``."""
    system = build_system(cfg)
    dt = cfg.dt
    sig = excitation_signal(cfg, dt)
    ex = cfg["excitation"]
    load = LoadSpec(ex["at"], cfg.load_component, sig)
    vec = build_load_vector(system, load, ex["amplitude"])
    rows = observation_rows(cfg, system, extra_observe)
    if all_nodes:
        comp = cfg.primary_component
        for node, x in enumerate(system.node_x):
            row = np.zeros(system.n_dof)
            row[system.dof(node, comp)] = 1.0
            rows[f"node{node}"] = row
    duration = cfg.duration
    t0 = time.perf_counter()
    if cfg["solver"] == "lwfem":
        g = cfg["grid"]
        grid = LaplaceGrid.for_duration(dt, duration, g["sigma"], g["window_factor"])
        fld = run_lwfem(system, [(vec, sig.samples)], grid, rows, threads=threads).truncate(duration)
        solver_meta = {"N": grid.N, "sigma": grid.sigma, "window": grid.window}
    else:
        nm = cfg["newmark"]
        steps = int(math.floor(duration / dt + 1e-6)) + 1
        params = NewmarkParams(dt, steps, nm["beta"], nm["gamma"])
        fld = newmark_solve(system, [(vec, sig.samples)], params, rows)
        solver_meta = {"steps": steps, "beta": nm["beta"], "gamma": nm["gamma"], "mass": "consistent"}
    wall = time.perf_counter() - t0
    meta = {
        "solver": cfg["solver"],
        "element_kind": cfg.element_kind,
        "n_elements": cfg.n_elements,
        "n_dof": system.n_dof,
        "dt": dt,
        "duration": duration,
        "lambda_min": cfg.lambda_min,
        "threads": threads,
        "wall_time": wall,
        **solver_meta,
    }
    return RunResult(cfg, fld, system, sig, meta)


def receiver_label(cfg: SimConfig) -> str:
    return channel_label(cfg.primary_component, cfg.length)


def end_velocity(result: RunResult, threshold: float = analysis.DEFAULT_THRESHOLD) -> dict:
    """Packet speed from the first two arrivals at the far end (paths L and 3L)."""
    cfg = result.config
    label = receiver_label(cfg)
    if label not in result.field.labels:
        return {"group_velocity": None, "arrivals": []}
    x = result.channel(label)
    arr = analysis.pick_arrivals(
        analysis.envelope(x, result.field.dt), threshold, result.signal.duration
    )
    out = {"arrivals": arr.times.tolist(), "group_velocity": None}
    if len(arr) >= 2:
        two = analysis.ArrivalSet(arr.times[:2], arr.amplitudes[:2])
        out["group_velocity"] = analysis.group_velocity(two, [cfg.length, 3 * cfg.length])
    return out


def first_echo_time(cfg: SimConfig, x_obs: float) -> float:
    """Time at which the far-end reflection reaches ``x_obs`` at the bar velocity."""
    src, far = (0.0, cfg.length) if cfg["excitation"]["at"] == "left" else (cfg.length, 0.0)
    return (cfg.length + abs(far - x_obs)) / cfg.material.bar_velocity


def convergence(cfg: SimConfig, axis: str | None = None, values=None, threads: int = 1) -> dict:
    """Mid-point deviation of each resolution from the finest one.

    By default the comparison window ends when the first end reflection
    reaches the observation point, so only the incident packet is compared.
    """
    conv = cfg["convergence"]
    axis = axis or conv["axis"]
    values = list(values if values is not None else (conv["values"] or []))
    if len(values) < 2:
        raise ConfigError("convergence needs at least two values")
    x_obs = conv["observe_x"] if conv["observe_x"] is not None else 0.5 * cfg.length
    window = conv["duration"] if conv["duration"] is not None else first_echo_time(cfg, x_obs)
    label = channel_label(cfg.primary_component, x_obs)
    base = cfg.merged({"outputs": {"observe": [{"x": x_obs, "label": label}]}})
    series, rows, walls = {}, [], {}
    for v in values:
        if axis == "epw":
            run_cfg = base.merged({"mesh": {"epw": v, "n_elements": None}})
        else:
            run_cfg = base.merged({"grid": {"spp": v, "dt": None}})
        res = simulate(run_cfg, threads)
        series[v] = (res.field.dt, res.channel(label))
        rows.append({axis: v, "n_elements": run_cfg.n_elements, "dt": run_cfg.dt})
        walls[v] = res.meta["wall_time"]
    dev = measure_convergence(series, duration=window)
    for r in rows:
        r["deviation"] = dev[r[axis]]
    return {
        "axis": axis,
        "rows": rows,
        "window": window,
        "series": series,
        "label": label,
        "wall_time": walls,
    }


def _with_crack(cfg: SimConfig, position: float | None, depth_ratio: float) -> SimConfig:
    cracks = [] if position is None or depth_ratio <= 0 else [
        {"position": position, "depth_ratio": depth_ratio}
    ]
    doc = dict(cfg.doc)
    doc["cracks"] = cracks
    return validate(doc)


def crack_sweep(cfg: SimConfig, depths=None, positions=None, threads: int = 1) -> dict:
    """Right-end metrics per crack depth or position against an uncracked reference."""
    if cfg.structure != "beam":
        raise ConfigError("crack sweeps need structure = beam")
    cs = cfg["crack_sweep"]
    depths = depths if depths is not None else cs["depths"]
    positions = positions if positions is not None else cs["positions"]
    L = cfg.length
    if depths is None and positions is None:
        if not cfg["cracks"]:
            raise ConfigError("crack sweep needs depths, positions or a crack list")
        cases = [(c["position"], c["depth_ratio"]) for c in cfg["cracks"]]
    elif positions is None:
        pos = cs["position"] if cs["position"] is not None else 0.5 * L
        cases = [(pos, float(d)) for d in depths]
    else:
        cases = [(float(p), cs["depth_ratio"]) for p in positions]
    for p, _ in cases:
        if not 0 < p < L:
            raise ConfigError(f"crack position {p} outside (0, {L})")

    label = receiver_label(cfg)
    base = cfg.merged({"outputs": {"observe": [{"x": L, "label": label}]}})
    ref = simulate(_with_crack(base, None, 0.0), threads)
    dt = ref.field.dt
    burst = ref.signal.duration
    x_ref = ref.channel(label)
    m_ref = analysis.crack_metrics(x_ref, dt, length=L, crack_position=None, burst_duration=burst)
    gate = cs["gate"]
    if cs["window"] is not None:
        window = cs["window"]
    else:
        # stop before the intact beam's first end echo (path 3L) can enter a gate
        window = 0.5 * burst + 3.0 * L / m_ref.velocity * (1.0 - gate)
    rows, traces = [], {"intact": x_ref}
    for pos, ratio in cases:
        run_cfg = _with_crack(base, pos, ratio)
        res = simulate(run_cfg, threads)
        x = res.channel(label)
        cracked = bool(run_cfg["cracks"])
        m = analysis.crack_metrics(
            x, dt, length=L, crack_position=pos if cracked else None, burst_duration=burst,
            reference=x_ref, window=window, gate=gate, threshold=cs["threshold"],
        )
        rows.append({
            "depth_ratio": ratio,
            "position": pos,
            "direct_amplitude": m.direct_amplitude,
            "direct_change": m.direct_amplitude / m_ref.direct_amplitude - 1.0,
            "flaw_amplitude": m.flaw_amplitude,
            "flaw_time": m.flaw_time if m.flaw_time is not None else float("nan"),
            "flaw_count": m.flaw_count,
            "below_detection": m.below_detection,
            "flag": "ok" if cracked else "no crack",
        })
        traces[f"a/h={ratio:g} x={pos:g}"] = x
    return {
        "rows": rows,
        "reference": m_ref,
        "window": window,
        "dt": dt,
        "traces": traces,
        "label": label,
    }


DISPERSION_ELEMENTS = 36


def dispersion(cfg: SimConfig, threads: int = 1) -> dict:
    """Mid-point response to the two-frequency burst with its scalogram.

    Without an explicit element count or EPW the beam is split into
    ``DISPERSION_ELEMENTS`` elements.
    """
    ex = cfg["excitation"]
    if ex["type"] != "dual":
        raise ConfigError("the dispersion scenario needs excitation.type = 'dual'")
    if cfg["mesh"]["n_elements"] is None and cfg["mesh"]["epw"] is None:
        cfg = cfg.merged({"mesh": {"n_elements": DISPERSION_ELEMENTS}})
    d = cfg["dispersion"]
    x_obs = d["observe_x"] if d["observe_x"] is not None else 0.5 * cfg.length
    label = channel_label(cfg.primary_component, x_obs)
    run_cfg = cfg.merged({"outputs": {"observe": [{"x": x_obs, "label": label}]}})
    res = simulate(run_cfg, threads)
    dt = res.field.dt
    x = res.channel(label)
    freqs = cfg["outputs"]["cwt_frequencies"]
    if freqs is None:
        top = min(2.0 * max(ex["fc"], ex["fc2"]), 0.45 / dt)
        freqs = np.arange(10e3, top + 1.0, 10e3)
    freqs = np.asarray(freqs, dtype=float)
    cwt = analysis.cwt_spectrum(x, dt, freqs)
    ridges = analysis.ridge_frequencies(cwt)
    centres = [ex["fc"], ex["fc2"]] if ex["type"] == "dual" else [ex["fc"]]
    packets = []
    inp = res.signal.padded(x.size)
    for fc in centres:
        env = analysis.band_envelope(x, dt, fc, d["bandwidth"])
        env_in = analysis.band_envelope(inp, dt, fc, d["bandwidth"])
        packets.append({
            "frequency": fc,
            "peak_time": float(np.argmax(env.magnitude) * dt),
            "half_amplitude_duration": analysis.half_amplitude_duration(env),
            "input_half_amplitude_duration": analysis.half_amplitude_duration(env_in),
        })
    return {"result": res, "label": label, "cwt": cwt, "ridges": ridges, "packets": packets}


def compare(cfg: SimConfig, threads: int = 1) -> dict:
    """Laplace-domain solver against the Newmark baseline at one observation point."""
    cmp_ = cfg["compare"]
    x_obs = cmp_["observe_x"] if cmp_["observe_x"] is not None else 0.5 * cfg.length
    label = channel_label(cfg.primary_component, x_obs)
    runs = {}
    for name in ("lwfem", "newmark"):
        side = dict(cmp_[name])
        side.setdefault("solver", name)
        mesh = dict(side.get("mesh", {}))
        if "epw" in mesh:
            mesh.setdefault("n_elements", None)
        if "n_elements" in mesh:
            mesh.setdefault("epw", None)
        grid = dict(side.get("grid", {}))
        if "spp" in grid:
            grid.setdefault("dt", None)
        if "dt" in grid:
            grid.setdefault("spp", None)
        side.update({"mesh": mesh, "grid": grid})
        side_cfg = cfg.merged(side).merged({"outputs": {"observe": [{"x": x_obs, "label": label}]}})
        runs[name] = simulate(side_cfg, threads)
    series = {k: (r.field.dt, r.channel(label)) for k, r in runs.items()}
    dev = measure_convergence(series, reference="newmark", duration=cfg.duration)
    return {
        "runs": runs,
        "label": label,
        "deviation": dev["lwfem"],
        "wall_time": {k: r.meta["wall_time"] for k, r in runs.items()},
        "series": series,
    }


__all__ = [
    "RunResult",
    "build_system",
    "compare",
    "convergence",
    "crack_sweep",
    "dispersion",
    "end_velocity",
    "excitation_signal",
    "l2_deviation",
    "observation_rows",
    "simulate",
]
