"""CSV, JSON and SVG writers with byte-stable output."""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np

FLOAT_FMT = "{:.9g}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def write_csv(path, header, columns) -> Path:
    """Write equal-length columns; floats with 9 significant digits."""
    path = Path(path)
    cols = [np.asarray(c) if not isinstance(c, list) else c for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    if len(header) != len(cols):
        raise ValueError("one header entry per column required")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_rows(path, rows: list[dict]) -> Path:
    if not rows:
        raise ValueError("no rows to write")
    header = list(rows[0])
    return write_csv(path, header, [[r[k] for r in rows] for k in header])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def versions() -> dict:
    import matplotlib
    import scipy

    from . import __version__, kernels

    return {
        "wavesim": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wavesim"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, title: str = "", logy=False) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, y in series.items():
        ax.plot(x, y, lw=0.9, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def stacked_plot(path, x, series: dict, xlabel: str, title: str = "") -> Path:
    plt = _pyplot()
    n = max(1, len(series))
    fig, axes = plt.subplots(n, 1, figsize=(8, 1.8 * n + 1), sharex=True, squeeze=False)
    for ax, (label, y) in zip(axes[:, 0], series.items()):
        ax.plot(x, y, lw=0.8)
        ax.set_ylabel(label, fontsize=8)
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel(xlabel)
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def map_plot(path, t, f, magnitude, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.pcolormesh(t, f, magnitude, shading="auto", rasterized=False)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
