"""Command line front end.

``wavesim simulate|convergence|crack-sweep|dispersion|compare --config FILE``.
Exit codes: 0 success, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, scenarios
from . import io as wio
from .config import ConfigError, load_config
from .kernels import KernelError
from .laplace import SolverError
from .mesh import LoadError, MeshError

log = logging.getLogger("wavesim")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
THREADS_ENV = "WAVESIM_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavesim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: out/<command>)")
    common.add_argument("--threads", type=int, help=f"frequency-loop threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. grid.duration=2e-3 (repeatable)")
    common.add_argument("--solver", choices=("lwfem", "newmark"))
    common.add_argument("--epw", type=float, help="elements per shortest wavelength")
    common.add_argument("--n-elements", type=int)
    common.add_argument("--spp", type=float, help="time steps per shortest period")
    common.add_argument("--dt", type=float)
    common.add_argument("--duration", type=float)
    common.add_argument("--material", choices=("steel", "aluminum"))
    common.add_argument("--element", choices=("bswi", "fem"), help="element family")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("simulate", parents=[common], help="single run")
    c = sub.add_parser("convergence", parents=[common], help="EPW or SPP sweep")
    c.add_argument("--axis", choices=("epw", "spp"))
    c.add_argument("--values", type=_floats)
    k = sub.add_parser("crack-sweep", parents=[common], help="crack depth or location sweep")
    grp = k.add_mutually_exclusive_group()
    grp.add_argument("--depths", type=_floats, help="depth ratios a/h")
    grp.add_argument("--positions", type=_floats, help="crack positions (m)")
    sub.add_parser("dispersion", parents=[common], help="two-frequency burst with scalogram")
    sub.add_parser("compare", parents=[common], help="Laplace solver against the Newmark baseline")
    return p


def _overrides(args) -> list:
    out = list(args.overrides)
    if args.solver:
        out.append(f"solver={args.solver}")
    if args.element:
        out.append(f"mesh.kind={args.element}")
    if args.epw is not None:
        out += [f"mesh.epw={args.epw}", "mesh.n_elements=null"]
    if args.n_elements is not None:
        out += [f"mesh.n_elements={args.n_elements}", "mesh.epw=null"]
    if args.spp is not None:
        out += [f"grid.spp={args.spp}", "grid.dt=null"]
    if args.dt is not None:
        out += [f"grid.dt={args.dt}", "grid.spp=null"]
    if args.duration is not None:
        out.append(f"grid.duration={args.duration}")
    if args.material:
        out.append(f'material="{args.material}"')
    return out


def _record(out: Path, command: str, args, cfg, extra: dict) -> None:
    wio.write_json(out / "run.json", {
        "command": command,
        "argv": sys.argv[1:],
        "config": cfg.doc,
        "resolved": {
            "n_elements": cfg.n_elements,
            "dt": cfg.dt,
            "lambda_min": cfg.lambda_min,
            "element_kind": cfg.element_kind,
            "section": {"b": cfg.section.b, "h": cfg.section.h, "k": cfg.section.k},
        },
        "versions": wio.versions(),
        **extra,
    })


def cmd_simulate(cfg, out: Path, threads: int, args) -> dict:
    snaps = cfg["outputs"]["snapshot_times"]
    res = scenarios.simulate(cfg, threads, all_nodes=bool(snaps))
    fld = res.field
    chans = [lb for lb in fld.labels if not lb.startswith("node")]
    t = fld.times
    wio.write_csv(out / "waveforms.csv", ["t"] + chans, [t] + [fld.channel(c) for c in chans])
    wio.line_plot(out / "waveforms.svg", t, {c: fld.channel(c) for c in chans}, "time (s)",
                  cfg.primary_component)
    summary = scenarios.end_velocity(res)
    if snaps:
        node_rows = [i for i, lb in enumerate(fld.labels) if lb.startswith("node")]
        cols, header = [], ["x"]
        xs = res.system.node_x
        for ts in snaps:
            x, v = analysis.snapshot(fld, xs, ts, rows=node_rows)
            if not cols:
                cols.append(x)
            cols.append(v)
            header.append(f"t={ts:.9g}")
        wio.write_csv(out / "snapshots.csv", header, cols)
    rec = scenarios.receiver_label(cfg)
    if cfg["outputs"]["spectrum"] and rec in fld.labels:
        freqs = cfg["outputs"]["cwt_frequencies"] or np.arange(10e3, min(2 * cfg["excitation"]["fc"], 0.45 / fld.dt) + 1, 10e3)
        cwt = analysis.cwt_spectrum(fld.channel(rec), fld.dt, freqs)
        _write_cwt(out / "spectrum.csv", cwt)
    if cfg.structure == "beam" and rec in fld.labels:
        if cfg["cracks"]:
            m = analysis.crack_metrics(
                fld.channel(rec), fld.dt, length=cfg.length,
                crack_position=cfg["cracks"][0]["position"], burst_duration=res.signal.duration,
            )
            summary["crack"] = m.as_row()
        else:
            summary["crack"] = {"flag": "no crack"}
    elif not cfg["cracks"]:
        summary["crack"] = {"flag": "no crack"}
    _record(out, "simulate", args, cfg, {"meta": res.meta, "summary": summary})
    return summary


def _write_cwt(path, cwt) -> None:
    T, F = np.meshgrid(cwt.times, cwt.frequencies)
    wio.write_csv(path, ["t", "f", "magnitude"], [T.ravel(), F.ravel(), cwt.magnitude.ravel()])


def cmd_convergence(cfg, out: Path, threads: int, args) -> dict:
    r = scenarios.convergence(cfg, args.axis, args.values, threads)
    axis = r["axis"]
    wio.write_rows(out / "convergence.csv", r["rows"])
    vals = [row[axis] for row in r["rows"]]
    wio.line_plot(out / "convergence.svg", vals, {"L2 deviation": [row["deviation"] for row in r["rows"]]},
                  axis.upper(), "deviation from finest run", logy=False)
    dt_c = max(dt for dt, _ in r["series"].values())
    t = np.arange(int(np.floor(r["window"] / dt_c + 1e-6)) + 1) * dt_c
    from .newmark import resample

    curves = {f"{axis}={k:g}": resample(v, dt, t) for k, (dt, v) in r["series"].items()}
    wio.line_plot(out / "responses.svg", t, curves, "time (s)", r["label"])
    summary = {"axis": axis, "window": r["window"], "rows": r["rows"],
               "wall_time": {f"{k:g}": v for k, v in r["wall_time"].items()}}
    _record(out, "convergence", args, cfg, {"summary": summary})
    return summary


def cmd_crack_sweep(cfg, out: Path, threads: int, args) -> dict:
    r = scenarios.crack_sweep(cfg, args.depths, args.positions, threads)
    wio.write_rows(out / "crack_metrics.csv", r["rows"])
    n = len(next(iter(r["traces"].values())))
    t = np.arange(n) * r["dt"]
    wio.write_csv(out / "crack_traces.csv", ["t"] + list(r["traces"]), [t] + list(r["traces"].values()))
    wio.stacked_plot(out / "crack_traces.svg", t, r["traces"], "time (s)", r["label"])
    summary = {"rows": r["rows"], "window": r["window"], "reference": r["reference"].as_row()}
    _record(out, "crack-sweep", args, cfg, {"summary": summary})
    return summary


def cmd_dispersion(cfg, out: Path, threads: int, args) -> dict:
    r = scenarios.dispersion(cfg, threads)
    res, cwt = r["result"], r["cwt"]
    t = res.field.times
    x = res.channel(r["label"])
    wio.write_csv(out / "midpoint.csv", ["t", r["label"]], [t, x])
    _write_cwt(out / "cwt.csv", cwt)
    step = max(1, len(t) // 400)
    wio.stacked_plot(out / "midpoint.svg", t, {r["label"]: x}, "time (s)")
    wio.map_plot(out / "cwt.svg", t[::step], cwt.frequencies, cwt.magnitude[:, ::step],
                 "Morlet scalogram at the observation point")
    summary = {"ridges": r["ridges"].tolist(), "packets": r["packets"]}
    _record(out, "dispersion", args, res.config, {"meta": res.meta, "summary": summary})
    return summary


def cmd_compare(cfg, out: Path, threads: int, args) -> dict:
    r = scenarios.compare(cfg, threads)
    dt_c = max(dt for dt, _ in r["series"].values())
    t = np.arange(int(np.floor(cfg.duration / dt_c + 1e-6)) + 1) * dt_c
    from .newmark import resample

    cols = {k: resample(v, dt, t) for k, (dt, v) in r["series"].items()}
    wio.write_csv(out / "compare.csv", ["t"] + list(cols), [t] + list(cols.values()))
    wio.line_plot(out / "compare.svg", t, cols, "time (s)", r["label"])
    summary = {"deviation": r["deviation"], "wall_time": r["wall_time"],
               "meta": {k: v.meta for k, v in r["runs"].items()}}
    log.info("wall time lwfem %.3f s, newmark %.3f s", r["wall_time"]["lwfem"], r["wall_time"]["newmark"])
    _record(out, "compare", args, cfg, {"summary": summary})
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "crack-sweep": cmd_crack_sweep,
    "dispersion": cmd_dispersion,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        threads = args.threads if args.threads is not None else _default_threads()
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, _overrides(args))
        out = Path(args.out or Path("out") / args.command)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, out, threads, args)
    except (ConfigError, MeshError, LoadError) as exc:
        print(f"wavesim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, analysis.AnalysisError, *KernelError) as exc:
        print(f"wavesim: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(_short(args.command, summary))
    return EXIT_OK


def _short(command: str, summary: dict) -> str:
    if command == "simulate":
        v = summary.get("group_velocity")
        return "group velocity: " + (f"{v:.1f} m/s" if v else "n/a")
    if command == "convergence":
        return "\n".join(f"{r[summary['axis']]:g}: {r['deviation']:.4g}" for r in summary["rows"])
    if command == "crack-sweep":
        return "\n".join(
            f"a/h={r['depth_ratio']:g} x={r['position']:g}: direct={r['direct_amplitude']:.4g} "
            f"flaw={r['flaw_amplitude']:.4g} count={r['flaw_count']}" for r in summary["rows"]
        )
    if command == "dispersion":
        return "ridges (Hz): " + ", ".join(f"{f:g}" for f in summary["ridges"])
    return f"L2 deviation: {summary['deviation']:.4g}"


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
