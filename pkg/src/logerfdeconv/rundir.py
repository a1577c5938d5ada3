"""Run-directory layout: manifest, CSV tables and images.

A run directory is written by a single process. Numbers go out with 17
significant digits so that two runs with the same seed give identical files.
"""

import csv
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .imageio import write_image, write_pgm

__all__ = [
    "TRACE_HEADER",
    "PGM_RANGE",
    "prepare_run_dir",
    "write_manifest",
    "read_manifest",
    "write_trace",
    "write_table1",
    "write_sweep",
    "write_estimates",
    "write_report",
]

TRACE_HEADER = ("iter", "gamma_n", "gamma_d", "gamma_b", "delta_norm")
# common gray scale for every exported estimate
PGM_RANGE = (-0.5, 2.0)


def _num(v) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return format(v, ".17g")


def prepare_run_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(run_dir, command: str, config: dict, seed, extra=None) -> Path:
    doc = {
        "command": command,
        "seed": seed,
        "version": __version__,
        "config": config,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": sys.argv[1:],
    }
    if extra:
        doc.update(extra)
    out = Path(run_dir) / "manifest"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest").read_text())


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_HEADER)
        for row in np.asarray(trace):
            w.writerow([_num(v) for v in row])


def write_table1(path, table: dict) -> None:
    """One column per estimate, rows ``L2`` and ``L1`` (percent)."""
    names = list(table)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["distance"] + names)
        w.writerow(["L2"] + [_num(table[k].l2_percent) for k in names])
        w.writerow(["L1"] + [_num(table[k].l1_percent) for k in names])


def write_sweep(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["factor", "gamma_n", "gamma_d", "gamma_b", "l2_percent", "l1_percent"])
        for r in rows:
            w.writerow([_num(v) for v in r])


def write_estimates(run_dir, estimates: dict) -> None:
    for name, img in estimates.items():
        write_image(os.path.join(run_dir, f"{name}.img"), img)
        write_pgm(os.path.join(run_dir, f"{name}.pgm"), img, *PGM_RANGE)


def write_report(run_dir, report, config) -> None:
    """Every artifact of :func:`~logerfdeconv.experiment.run_paper_experiment`."""
    run_dir = prepare_run_dir(run_dir)
    g = report.gamma_hat
    write_manifest(
        run_dir, "experiment", config.to_dict(), report.seed,
        extra={
            "gamma_init": list(report.gamma_init.as_tuple()),
            "gamma_hat": list(g.as_tuple()),
            "huber_lambda": report.huber.lam,
            "huber_s": report.huber.s,
            "iterations": report.iterations,
            "converged": report.converged,
        },
    )
    write_trace(run_dir / "trace.csv", report.trace)
    write_table1(run_dir / "table1.csv", report.table)
    for comp, rows in report.sweeps.items():
        write_sweep(run_dir / f"sweep_{comp}.csv", rows)
    write_estimates(run_dir, report.estimates)
    lo, hi, frac = report.band
    f2, f1 = report.improvement()
    lines = [
        f"seed {report.seed}",
        f"iterations {report.iterations} (converged: {report.converged}, burn-in {report.burn_in})",
        "gamma_init " + " ".join(_num(v) for v in report.gamma_init.as_tuple()),
        "gamma_hat (n, d, b) " + " ".join(_num(v) for v in g.as_tuple()),
        "post-burn-in relative std " + " ".join(f"{v:.4f}" for v in report.rel_std),
        f"equivalent huber lambda {_num(report.huber.lam)} s {_num(report.huber.s)}",
        f"laplacian band ({lo:.3g}, {hi:.3g}), {100 * frac:.2f}% of pixels below; "
        f"threshold splits: {report.threshold_splits}",
        f"improvement over data: L2 x{f2:.3f}, L1 x{f1:.3f}",
    ]
    lines += [f"{k}: L2 {m.l2_percent:.3f}% L1 {m.l1_percent:.3f}%" for k, m in report.table.items()]
    (run_dir / "report.txt").write_text("\n".join(lines) + "\n")
