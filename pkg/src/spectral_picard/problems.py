"""Problem documents: JSON description of a periodic flow problem.

Layout::

    {
      "schema": "torus-problem/1",
      "kind": "ns" | "boussinesq",
      "periods": [l_1, ..., l_n],
      "nu": 1.0, "kappa": 1.0, "A": [[...]] | null,
      "time_grid": {"t_max": 1.0, "intervals": 200},
      "mode_box": 2,
      "phi": [[term, ...], ...],          # one list per component
      "f": [[term, ...], ...] | null,      # time-dependent terms
      "eta": ..., "g": ...,
      "anchor": {"x0": [...], "p0": 0.0},
      "forcing_class": {"family": "K", "b": ..., "r": ..., "d": ...} | null
    }

A term is ``{"mode": [...], "value": [re, im]}``; time-dependent terms may
add ``"decay": b`` for the trajectory ``value * exp(-b t)``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .class_algebra import params_from_dict
from .picard_engine import NS, TorusProblem
from .propagators import PhysicsParams
from .spectral_core import FourierField, TimeGrid, TorusGeometry, VectorField

PROBLEM_SCHEMA = "torus-problem/1"
_KEYS = {"schema", "kind", "periods", "nu", "kappa", "A", "time_grid", "mode_box", "phi", "f", "eta", "g",
         "anchor", "forcing_class", "name", "max_truncation_loss"}
_TERM_KEYS = {"mode", "value", "decay"}


def _field(terms, geometry, grid, box, time_dependent: bool) -> FourierField:
    modes, vals = [], []
    t = None if grid is None else grid.samples
    for term in terms:
        extra = set(term) - _TERM_KEYS
        if extra:
            raise ValueError(f"unknown term keys {sorted(extra)}")
        re, im = term["value"]
        z = complex(re, im)
        modes.append(term["mode"])
        if time_dependent:
            vals.append(z * np.exp(-float(term.get("decay", 0.0)) * t))
        else:
            if "decay" in term:
                raise ValueError("spatial data terms take no decay rate")
            vals.append(z)
    n = geometry.n
    if time_dependent:
        coeffs = np.array(vals, complex).reshape(len(vals), len(grid))
    else:
        coeffs = np.array(vals, complex).reshape(len(vals))
    return FourierField(geometry, np.array(modes, np.int64).reshape(-1, n), coeffs,
                        grid if time_dependent else None, mode_box=box, real=True)


def _vector(doc, geometry, grid, box, time_dependent):
    if doc is None:
        return None
    return VectorField([_field(c, geometry, grid, box, time_dependent) for c in doc])


def problem_from_dict(doc: Mapping, mode_box=None, time_grid: tuple[float, int] | None = None) -> TorusProblem:
    """Build a :class:`TorusProblem`; ``mode_box``/``time_grid`` override the document."""
    extra = set(doc) - _KEYS
    if extra:
        raise ValueError(f"unknown problem keys {sorted(extra)}")
    if doc.get("schema") != PROBLEM_SCHEMA:
        raise ValueError(f"unsupported problem schema {doc.get('schema')!r}")
    geometry = TorusGeometry(tuple(doc["periods"]))
    n = geometry.n
    tg = doc["time_grid"]
    t_max, intervals = time_grid if time_grid is not None else (tg["t_max"], tg["intervals"])
    grid = TimeGrid.uniform(float(t_max), int(intervals))
    box = mode_box if mode_box is not None else doc["mode_box"]
    box = tuple([int(box)] * n) if np.isscalar(box) else tuple(int(b) for b in box)
    physics = PhysicsParams(nu=float(doc["nu"]), kappa=float(doc.get("kappa", 1.0)), A=doc.get("A"))
    anchor = doc.get("anchor") or {}
    fc = doc.get("forcing_class")
    return TorusProblem(
        geometry=geometry, physics=physics, time_grid=grid, mode_box=box,
        phi=_vector(doc["phi"], geometry, grid, box, False),
        f=_vector(doc.get("f"), geometry, grid, box, True),
        eta=_vector(doc.get("eta"), geometry, grid, box, False),
        g=_vector(doc.get("g"), geometry, grid, box, True),
        x0=anchor.get("x0"), p0=float(anchor.get("p0", 0.0)),
        kind=doc.get("kind", NS),
        forcing_class=None if fc is None else params_from_dict(fc),
        max_truncation_loss=float(doc.get("max_truncation_loss", float("inf"))),
        name=doc.get("name", ""),
    )


def fixture_names() -> list[str]:
    root = resources.files("spectral_picard") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_problem_document(ref: str) -> dict:
    """Load a problem document from a path or a shipped fixture name."""
    path = Path(ref)
    if path.suffix == ".json" and path.exists():
        return json.loads(path.read_text())
    if ref in fixture_names():
        return json.loads((resources.files("spectral_picard") / "fixtures" / f"{ref}.json").read_text())
    raise FileNotFoundError(f"no problem document or fixture named {ref!r}")


def load_problem(ref: str, **overrides) -> TorusProblem:
    return problem_from_dict(read_problem_document(ref), **overrides)
