"""JSON and CSV serialisation of branches, cascades, trajectories and orbits.

JSON documents carry a ``schema_version`` and are built with a fixed key
order, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from l96bif.continuation import BifurcationPoint, Branch, CascadeReport
from l96bif.flow import PeriodicOrbit, ScanRow, Trajectory

__all__ = [
    "SCHEMA_VERSION",
    "branch_to_csv",
    "branch_to_dict",
    "cascade_to_csv",
    "cascade_to_dict",
    "dump_json",
    "orbit_to_dict",
    "scan_to_csv",
    "to_csv",
    "trajectory_to_csv",
    "trajectory_to_dict",
    "write_text",
]

SCHEMA_VERSION = 1


def _floats(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def _label(label):
    return None if label is None else [int(v) for v in label]


def _bifurcation_to_dict(bp: BifurcationPoint) -> dict:
    return {
        "kind": bp.kind,
        "F_star": float(bp.F_star),
        "m": int(bp.m),
        "block_index": int(bp.block_index),
        "eigenvalue": [float(complex(bp.eigenvalue).real), float(complex(bp.eigenvalue).imag)],
        "parity": bp.parity,
        "branch_label": _label(bp.branch_label),
        "block": _floats(bp.coords[: bp.m]),
    }


def branch_to_dict(branch: Branch, samples: bool = True) -> dict:
    """Branch as a dict; ``samples`` rows are ``[F, x_0, .., x_{n-1}]``."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "type": "branch",
        "n": int(branch.n),
        "m": int(branch.m),
        "label": _label(branch.label),
        "F_start": float(branch.points[0].F),
        "F_end": float(branch.points[-1].F),
        "n_points": len(branch.points),
        "bifurcations": [_bifurcation_to_dict(b) for b in branch.bifurcations],
    }
    if samples:
        doc["samples"] = [[float(p.F)] + _floats(p.coords) for p in branch.points]
        doc["stable"] = [bool(p.stable) for p in branch.points]
    return doc


def cascade_to_dict(report: CascadeReport) -> dict:
    """Cascade summary; floor equilibria are stored by their repeating block."""
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "cascade",
        "n": int(report.n),
        "F_floor": float(report.F_floor),
        "n_pitchforks": report.n_pitchforks,
        "counts": int(report.counts),
        "summary": report.summary(),
        "pf_values": [float(v) for v in report.pf_values],
        "ratios": [float(v) for v in report.ratios],
        "failures": list(report.failures),
        "equilibria": [
            {
                "label": _label(e.label),
                "m": int(e.signature.m),
                "stable": bool(e.stable),
                "block": _floats(e.signature.block),
            }
            for e in report.equilibria
        ],
        "branches": [branch_to_dict(b, samples=False) for b in report.branches],
    }


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "trajectory",
        "n": traj.params.n,
        "F": traj.params.F,
        "samples": [[float(t)] + _floats(x) for t, x in zip(traj.times, traj.states)],
    }


def orbit_to_dict(orbit: PeriodicOrbit) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "periodic_orbit",
        "n": orbit.n,
        "F": orbit.params.F,
        "period": float(orbit.period),
        "closure": float(orbit.closure),
        "wave_number": int(orbit.wave_number),
        "signature_m": int(orbit.signature.m),
        "samples": [[float(t)] + _floats(x) for t, x in zip(orbit.times, orbit.samples)],
    }


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _state_header(n: int) -> list[str]:
    return [f"x_{j}" for j in range(n)]


def branch_to_csv(branch: Branch) -> str:
    rows = ([p.F, int(p.stable), *_floats(p.coords)] for p in branch.points)
    return to_csv(["F", "stable", *_state_header(branch.n)], rows)


def cascade_to_csv(report: CascadeReport) -> str:
    ratios = [""] * 2 + list(report.ratios)
    rows = ([level, F, ratios[level - 1]] for level, F in enumerate(report.pf_values, start=1))
    return to_csv(["level", "F_PF", "ratio"], rows)


def trajectory_to_csv(traj: Trajectory) -> str:
    rows = ([t, *_floats(x)] for t, x in zip(traj.times, traj.states))
    return to_csv(["t", *_state_header(traj.params.n)], rows)


def scan_to_csv(rows: list[ScanRow]) -> str:
    return to_csv(["F", "m"], ([r.F, r.m] for r in rows))


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_text(text: str, path: str | Path | None) -> None:
    """Write to ``path`` (UTF-8), or to stdout when ``path`` is None or ``-``."""
    if path is None or str(path) == "-":
        print(text, end="")
        return
    Path(path).write_text(text, encoding="utf-8")
