"""Measure files: CSV ``point,weight`` plus a JSON sidecar.

The sidecar ``<stem>.json`` holds ``mass`` and ``domain`` (``"R+"``, ``"R-"``
or ``"sphere"``) and, so that files round-trip exactly, ``kind`` and the grid
``edges``. Floats are written with ``repr`` and therefore parse back to the
same doubles. Sphere measures store the circle angle as ``point``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import DomainError
from .measures import EmpiricalMeasure, GridMeasure, SphereMeasure, stereo_map, stereo_push


def sidecar_path(path):
    path = Path(path)
    return path.with_suffix(".json") if path.suffix == ".csv" else path.with_name(path.name + ".json")


def _domain_of(m):
    if isinstance(m, SphereMeasure):
        return "sphere"
    pts = m.points
    if np.all(pts >= 0):
        return "R+"
    if np.all(pts <= 0):
        return "R-"
    raise DomainError("measure straddles 0; only half-line or sphere measures have a file domain")


def write_measure(path, m, domain=None, extra=None):
    """Write ``m`` and its sidecar; returns the sidecar path."""
    path = Path(path)
    meta = {"mass": float(m.mass), "domain": domain or _domain_of(m)}
    if isinstance(m, SphereMeasure):
        points, weights = m.angles, m.weights
        meta.update(kind="sphere", mass_at_infinity=m.mass_at_infinity)
        if m.cell_edges is not None:
            meta["edges"] = [float(e) for e in m.cell_edges]
    elif isinstance(m, GridMeasure):
        points, weights = m.points, m.weights
        meta.update(kind="grid", edges=[float(e) for e in m.edges])
    elif isinstance(m, EmpiricalMeasure):
        points, weights = m.atoms, m.weights
        meta.update(kind="empirical", atom_mass=m.atom_mass)
    else:
        raise DomainError(f"cannot write {type(m).__name__}")
    if extra:
        meta.update(extra)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["point", "weight"])
        for p, w in zip(points, weights):
            out.writerow([repr(float(p)), repr(float(w))])
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def _read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty file")
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(rows[0]))


def read_measure(path):
    """Read a measure file.

    Besides the ``point,weight`` format, ``sample_index,eigenvalue`` tables
    (output of the ``wishart`` command) are read as the pooled empirical
    measure of all eigenvalues.
    """
    path = Path(path)
    header, data = _read_table(path)
    if header == ["sample_index", "eigenvalue"]:
        return EmpiricalMeasure(data[:, 1], 1.0 / data.shape[0])
    if header != ["point", "weight"]:
        raise DomainError(f"{path}: unknown header {header}")
    points, weights = data[:, 0], data[:, 1]
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    kind = meta.get("kind")
    if kind == "grid":
        return GridMeasure(np.array(meta["edges"]), weights, meta.get("mass"))
    if kind == "sphere":
        z = np.stack([0.5 * np.sin(points), 0.5 * (1.0 - np.cos(points))], axis=-1)
        edges = meta.get("edges")
        if edges is not None:
            # cells came from a line measure; recover the circle points exactly
            e = np.array(edges)
            z = stereo_map(0.5 * (e[:-1] + e[1:]))
        return SphereMeasure(z, weights, meta.get("mass_at_infinity", 0.0), edges)
    if kind == "empirical" or (kind is None and np.allclose(weights, weights[0], rtol=1e-12, atol=0)):
        atom_mass = meta.get("atom_mass", float(weights[0]))
        return EmpiricalMeasure(points, atom_mass)
    raise DomainError(f"{path}: unequal weights need a grid sidecar with edges")


def to_sphere(m):
    """Push line measures to the circle; sphere measures pass through."""
    return m if isinstance(m, SphereMeasure) else stereo_push(m)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)
