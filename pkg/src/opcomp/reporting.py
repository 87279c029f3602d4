"""Study outputs: delimited reports, JSON summaries, plot data, SVG figures.

Every run writes into <outdir>/<subcommand>/<config-hash>/ :
  report.csv     one row per study record, config hash on every row
  summary.json   slopes, seeds, checks, runtime, config echo
  *.dat          two-column plot data per curve
  *.svg          matplotlib renderings of the same curves
  resolved.cfg   the fully-resolved configuration the run used
"""

import csv
import hashlib
import json
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def config_hash(resolved):
    """Short stable hash of the resolved configuration (sans outdir/threads)."""
    skip = {"outdir", "threads", "config"}
    lines = ["%s=%s" % (k, resolved[k]) for k in sorted(resolved) if k not in skip]
    return hashlib.sha1("\n".join(lines).encode()).hexdigest()[:12]


def run_directory(outdir, subcommand, resolved):
    run_dir = Path(outdir) / subcommand / config_hash(resolved)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_resolved_config(run_dir, resolved, provenance=None):
    lines = ["[resolved]"]
    for k in sorted(resolved):
        lines.append("%s = %s" % (k, resolved[k]))
    if provenance:
        lines.append("")
        lines.append("# provenance (flag/file overrides)")
        for note in provenance:
            lines.append("# %s" % note)
    path = Path(run_dir) / "resolved.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path


def write_report_csv(run_dir, report, chash):
    path = Path(run_dir) / "report.csv"
    cols = list(report.columns) + ["config_hash"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in report.rows:
            out = {k: row.get(k, "") for k in report.columns}
            out["config_hash"] = chash
            writer.writerow(out)
    return path


def write_summary_json(run_dir, report, chash, resolved, extra=None):
    payload = {
        "kind": report.kind,
        "config_hash": chash,
        "slopes": report.slopes,
        "fit_r2": report.fits_r2,
        "seeds": report.seeds,
        "checks": report.checks,
        "all_passed": report.all_passed,
        "meta": report.meta,
        "runtime_s": report.runtime_s,
        "resolved_config": {k: str(v) for k, v in sorted(resolved.items())},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        payload.update(extra)
    path = Path(run_dir) / "summary.json"
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
    return path


def write_dat(run_dir, name, xs, ys):
    path = Path(run_dir) / ("%s.dat" % name)
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write("%.16e %.16e\n" % (x, y))
    return path


def write_grid_csv(run_dir, name, columns, arrays):
    """CSV with named columns from equal-length arrays (e.g. x[,y],value)."""
    path = Path(run_dir) / ("%s.csv" % name)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in zip(*arrays):
            writer.writerow(["%.16e" % v for v in row])
    return path


def save_figure(run_dir, name, fig):
    path = Path(run_dir) / ("%s.svg" % name)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def loglog_figure(curves, xlabel, ylabel, title):
    """curves: list of (label, xs, ys, style_kwargs)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, xs, ys, kwargs in curves:
        ax.loglog(xs, ys, marker="o", markersize=3.5, label=label, **kwargs)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    return fig


def semilogy_figure(curves, xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, xs, ys, kwargs in curves:
        ax.semilogy(xs, ys, marker="o", markersize=3.5, label=label, **kwargs)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    return fig


def line_figure(xs, ys, xlabel, ylabel, title, logy=False):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    if logy:
        ax.semilogy(xs, ys, lw=0.9)
    else:
        ax.plot(xs, ys, lw=0.9)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    return fig


def heatmap_figure(values, title, log10=False):
    import numpy as np

    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    data = np.log10(np.abs(values) + 1e-300) if log10 else values
    im = ax.imshow(data.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return fig
