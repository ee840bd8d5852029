"""Result serialization: JSON mode reports, CSV field grids and convergence tables.

Every file carries a schema string so readers can reject formats they do
not understand.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..fields import COMPONENTS, FieldGrid

__all__ = [
    "REPORT_SCHEMA",
    "FIELD_SCHEMA",
    "CONVERGENCE_SCHEMA",
    "report_to_dict",
    "write_report",
    "write_field_grid",
    "read_field_grid",
    "write_convergence",
]

REPORT_SCHEMA = "skiemodes.modes/1"
FIELD_SCHEMA = "skiemodes.fieldgrid/1"
CONVERGENCE_SCHEMA = "skiemodes.convergence/1"


def _mode_record(m) -> dict:
    return {
        "ne_real": float(np.real(m.ne)),
        "ne_imag": float(np.imag(m.ne)),
        "multiplicity": int(m.multiplicity),
        "sigma_min_ratio": float(m.sigma_ratio),
        "smallest_singular_values": [float(v) for v in m.singular_values],
        "iterations": int(m.iterations),
        "converged": bool(m.converged),
        "normalization": "null vectors have unit 2-norm; field maps scaled to max |E| = 1",
    }


def report_to_dict(report, include_timings: bool = True) -> dict:
    out = {
        "schema": REPORT_SCHEMA,
        "seed": report.seed,
        "settings": report.settings,
        "modes": [_mode_record(m) for m in report.modes],
        "diagnostics": report.diagnostics,
    }
    if report.scan is not None:
        out["scan"] = report.scan
    if include_timings:
        out["timings"] = report.timings
    return out


def write_report(report, path, include_timings: bool = True):
    text = json.dumps(report_to_dict(report, include_timings), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
    return text


def write_field_grid(grid: FieldGrid, path, meta: dict | None = None):
    """CSV with columns ``x, y, region`` and real/imag parts of the six components."""
    ny, nx = grid.region.shape
    X, Y = np.meshgrid(grid.x, grid.y)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {FIELD_SCHEMA}\n")
        fh.write(f"# normalization: max|E| = 1 (factor {grid.normalization:.17g})\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y", "region"] + [f"{c}_{p}" for c in COMPONENTS for p in ("re", "im")])
        F = grid.fields.reshape(6, -1)
        reg = grid.region.ravel()
        for j, (x, y) in enumerate(zip(X.ravel(), Y.ravel())):
            vals = []
            for c in range(6):
                vals += [repr(float(F[c, j].real)), repr(float(F[c, j].imag))]
            w.writerow([repr(float(x)), repr(float(y)), int(reg[j])] + vals)


def read_field_grid(path):
    """Inverse of :func:`write_field_grid`: returns ``(x, y, region, fields)`` flat arrays."""
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# schema: {FIELD_SCHEMA}":
            raise ValueError(f"not a field grid file: {first!r}")
        rows = [ln for ln in fh if not ln.startswith("#")]
    data = list(csv.reader(rows))[1:]
    a = np.array([[float(v) for v in r] for r in data])
    F = a[:, 3::2] + 1j * a[:, 4::2]
    return a[:, 0], a[:, 1], a[:, 2].astype(int), F.T


def write_convergence(result, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {CONVERGENCE_SCHEMA}\n")
        fh.write(f"# fitted order: {result.slope:.6g}\n")
        w = csv.writer(fh)
        w.writerow(["N", "value_real", "value_imag", "rel_error"])
        for N, v, e in zip(result.resolutions, result.values, result.errors):
            w.writerow([N, repr(float(np.real(v))), repr(float(np.imag(v))), repr(float(e))])
