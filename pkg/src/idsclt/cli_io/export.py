"""CSV/JSON export and self-contained SVG plots with byte-stable output."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

from ..errors import EmptyDataError  # noqa: E402
from ..experiments.ensemble import EnsembleResult  # noqa: E402
from .persist import dumps, write_atomic  # noqa: E402

CSV_COLUMNS = ("sample_index", "trace", "z_value", "seed")

plt.rcParams.update({"svg.hashsalt": "idsclt", "svg.fonttype": "none", "path.simplify": False})


def export_csv(result: EnsembleResult, path) -> Path:
    """One row per sample: index j, T_j, Z_j = (T_j - mean) / sqrt(volume), ensemble seed."""
    if result.n == 0:
        raise EmptyDataError("nothing to export")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for j, t, z in zip(result.indices, result.traces, result.z):
        w.writerow((int(j), repr(float(t)), repr(float(z)), result.seed))
    write_atomic(Path(path), buf.getvalue())
    return Path(path)


def export_json(record, path) -> Path:
    if record is None or (hasattr(record, "__len__") and len(record) == 0):
        raise EmptyDataError("nothing to export")
    write_atomic(Path(path), dumps(record))
    return Path(path)


def _save(fig, path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    write_atomic(Path(path), buf.getvalue())
    return Path(path)


def qq_plot(result: EnsembleResult, path) -> Path:
    """Ordered studentized Z against standard normal quantiles; flagged placeholder when degenerate."""
    if result.n == 0:
        raise EmptyDataError("nothing to plot")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    z = np.asarray(result.z)
    sd = z.std(ddof=1) if len(z) > 1 else 0.0
    if sd == 0:
        ax.text(0.5, 0.5, "degenerate ensemble: zero variance", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
    else:
        s = np.sort((z - z.mean()) / sd)
        theo = stats.norm.ppf((np.arange(1, len(s) + 1) - 0.5) / len(s))
        ax.plot(theo, s, ".", ms=2)
        lim = [theo[0], theo[-1]]
        ax.plot(lim, lim, "k-", lw=0.8)
        ax.set_xlabel("normal quantile")
        ax.set_ylabel("studentized Z")
        ax.set_title(f"L = {result.L}, {result.bc}, n = {result.n}")
    return _save(fig, path)


def scaling_plot(estimates, path) -> Path:
    """sigma^2(L) with 2-SE bars."""
    estimates = list(estimates)
    if not estimates:
        raise EmptyDataError("nothing to plot")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    L = [e.L for e in estimates]
    ax.errorbar(L, [e.value for e in estimates], yerr=[2 * e.se for e in estimates], fmt="o-", capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("L")
    ax.set_ylabel("Var(T) / |box|")
    return _save(fig, path)


def decay_plot(profiles, path) -> Path:
    """log gap against ell with the fitted line, one series per variant."""
    profiles = list(profiles)
    if not profiles:
        raise EmptyDataError("nothing to plot")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, fit in profiles:
        x = np.asarray(fit.x)
        ax.semilogy(x, fit.y, "o", label=name)
        ax.semilogy(x, np.exp(fit.intercept + fit.slope * x), "-", lw=0.8)
    ax.set_xlabel("distance")
    ax.set_ylabel("gap")
    ax.legend()
    return _save(fig, path)
