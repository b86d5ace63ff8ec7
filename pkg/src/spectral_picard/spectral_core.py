"""Truncated multi-dimensional Fourier series on a periodic box.

A field is stored sparsely: an integer mode array of shape ``(K, n)`` kept in
lexicographic order, and a coefficient array of shape ``(K,)`` for spatial
fields or ``(K, T)`` for fields sampled on a :class:`TimeGrid`.  The basis
function attached to mode ``theta`` is ``exp(2*pi*i * sum_j theta_j x_j / l_j)``.

All fields are immutable; every operation returns a new field.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

Mode = tuple[int, ...]

#: Per-axis clip applied to default convolution output boxes.
DEFAULT_BOX_LIMIT = 64

FIELD_SCHEMA = "fourier-field/1"


class GeometryMismatch(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TorusGeometry:
    """Periodic box ``prod_j [0, l_j]``."""

    periods: tuple[float, ...]

    def __post_init__(self):
        periods = tuple(float(p) for p in self.periods)
        if len(periods) < 1:
            raise ValueError("geometry needs at least one axis")
        if not all(np.isfinite(p) and p > 0 for p in periods):
            raise ValueError(f"periods must be positive and finite, got {periods}")
        object.__setattr__(self, "periods", periods)

    @classmethod
    def cube(cls, n: int, length: float = 1.0) -> "TorusGeometry":
        return cls((length,) * n)

    @property
    def n(self) -> int:
        return len(self.periods)

    def wavevectors(self, modes: np.ndarray) -> np.ndarray:
        """Rows ``2*pi*theta_j / l_j``."""
        return 2.0 * np.pi * np.asarray(modes, dtype=float) / np.asarray(self.periods)

    def laplacian_symbol(self, modes: np.ndarray) -> np.ndarray:
        """``-4 pi^2 sum_j theta_j^2 / l_j^2`` for each mode row."""
        k = self.wavevectors(modes)
        return -np.sum(k * k, axis=-1)


class TimeGrid:
    """Strictly increasing samples starting exactly at zero."""

    __slots__ = ("_t",)

    def __init__(self, samples: Iterable[float]):
        t = np.array(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("time grid must be a non-empty 1-d sequence")
        if t[0] != 0.0:
            raise ValueError("first time sample must be exactly 0")
        if np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("time samples must be finite and strictly increasing")
        t.setflags(write=False)
        self._t = t

    @classmethod
    def uniform(cls, t_max: float, intervals: int) -> "TimeGrid":
        if intervals < 1 or not t_max > 0:
            raise ValueError("uniform grid needs t_max > 0 and at least one interval")
        return cls(np.linspace(0.0, float(t_max), int(intervals) + 1))

    @property
    def samples(self) -> np.ndarray:
        return self._t

    @property
    def t_max(self) -> float:
        return float(self._t[-1])

    def __len__(self) -> int:
        return self._t.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self._t.shape == other._t.shape and bool(np.all(self._t == other._t))

    def __hash__(self):
        return hash(self._t.tobytes())

    def __repr__(self):
        return f"TimeGrid(len={len(self)}, t_max={self.t_max:g})"


def _as_box(box, n: int) -> tuple[int, ...]:
    if np.isscalar(box):
        box = (int(box),) * n
    box = tuple(int(b) for b in box)
    if len(box) != n or any(b < 0 for b in box):
        raise ValueError(f"mode box must be {n} nonnegative integers, got {box}")
    return box


class FourierField:
    """Sparse Fourier series, optionally sampled in time.

    Parameters
    ----------
    geometry : TorusGeometry
    modes : array_like, shape (K, n)
        Integer multi-indices; duplicates are rejected.
    coeffs : array_like, shape (K,) or (K, T)
    time_grid : TimeGrid or None
        ``None`` marks a spatial-only field.
    mode_box : int or sequence of int, optional
        Per-axis truncation radius.  Defaults to the tightest box holding the modes.
    real : bool
        Declares Hermitian symmetry of the coefficients.  Not enforced here,
        see :meth:`is_hermitian`.
    truncation_loss : float
        Bound on the l1 mass dropped by the operation that produced the field.
    """

    __slots__ = ("geometry", "time_grid", "modes", "coeffs", "mode_box", "real", "truncation_loss", "_index")

    def __init__(self, geometry: TorusGeometry, modes, coeffs, time_grid: TimeGrid | None = None,
                 mode_box=None, real: bool = False, truncation_loss: float = 0.0):
        n = geometry.n
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, n)
        coeffs = np.asarray(coeffs, dtype=complex)
        expected = (modes.shape[0],) if time_grid is None else (modes.shape[0], len(time_grid))
        if coeffs.shape != expected:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match {expected}")

        if modes.shape[0]:
            # drop exact zeros, then sort rows lexicographically
            nz = coeffs != 0 if coeffs.ndim == 1 else np.any(coeffs != 0, axis=1)
            modes, coeffs = modes[nz], coeffs[nz]
            order = np.lexsort(modes.T[::-1])
            modes, coeffs = modes[order], coeffs[order]
            if modes.shape[0] > 1 and np.any(np.all(modes[1:] == modes[:-1], axis=1)):
                raise ValueError("duplicate modes")

        if mode_box is None:
            mode_box = tuple(np.abs(modes).max(axis=0).tolist()) if modes.shape[0] else (0,) * n
        mode_box = _as_box(mode_box, n)
        if modes.shape[0] and np.any(np.abs(modes) > np.asarray(mode_box)):
            raise ValueError(f"stored modes exceed mode box {mode_box}")

        modes = np.ascontiguousarray(modes)
        coeffs = np.ascontiguousarray(coeffs)
        modes.setflags(write=False)
        coeffs.setflags(write=False)
        self.geometry = geometry
        self.time_grid = time_grid
        self.modes = modes
        self.coeffs = coeffs
        self.mode_box = mode_box
        self.real = bool(real)
        self.truncation_loss = float(truncation_loss)
        self._index = None

    # construction helpers
    @classmethod
    def from_mapping(cls, geometry: TorusGeometry, values: Mapping[Sequence[int], object],
                     time_grid: TimeGrid | None = None, **kw) -> "FourierField":
        n = geometry.n
        keys = [tuple(int(v) for v in k) for k in values]
        if any(len(k) != n for k in keys):
            raise ValueError(f"every mode must have {n} entries")
        vals = [np.broadcast_to(np.asarray(v, dtype=complex),
                                () if time_grid is None else (len(time_grid),)) for v in values.values()]
        shape = (0,) if time_grid is None else (0, len(time_grid))
        coeffs = np.array(vals, dtype=complex) if vals else np.zeros(shape, dtype=complex)
        return cls(geometry, np.array(keys, dtype=np.int64).reshape(-1, n), coeffs, time_grid, **kw)

    @classmethod
    def zeros(cls, geometry: TorusGeometry, time_grid: TimeGrid | None = None, mode_box=None) -> "FourierField":
        shape = (0,) if time_grid is None else (0, len(time_grid))
        return cls(geometry, np.zeros((0, geometry.n), dtype=np.int64), np.zeros(shape, complex),
                   time_grid, mode_box=mode_box, real=True)

    # structure
    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def is_spatial(self) -> bool:
        return self.time_grid is None

    def __len__(self) -> int:
        return self.modes.shape[0]

    @property
    def support(self) -> list[Mode]:
        return [tuple(m) for m in self.modes.tolist()]

    def _lookup(self) -> dict[Mode, int]:
        if self._index is None:
            self._index = {m: i for i, m in enumerate(self.support)}
        return self._index

    def coefficient(self, mode: Sequence[int]):
        """Coefficient (or trajectory) at ``mode``; zero when not stored."""
        i = self._lookup().get(tuple(int(v) for v in mode))
        if i is None:
            return 0j if self.is_spatial else np.zeros(len(self.time_grid), complex)
        return self.coeffs[i]

    def __repr__(self):
        kind = "spatial" if self.is_spatial else f"{len(self.time_grid)} samples"
        return f"FourierField(n={self.n}, modes={len(self)}, {kind}, box={self.mode_box})"

    def replace(self, modes=None, coeffs=None, **kw) -> "FourierField":
        args = dict(time_grid=self.time_grid, mode_box=self.mode_box, real=self.real)
        args.update(kw)
        return FourierField(self.geometry, self.modes if modes is None else modes,
                            self.coeffs if coeffs is None else coeffs, **args)

    def promote(self, time_grid: TimeGrid) -> "FourierField":
        """Spatial field as a constant-in-time trajectory."""
        if not self.is_spatial:
            if self.time_grid != time_grid:
                raise GridMismatch("field already sampled on a different grid")
            return self
        coeffs = np.repeat(self.coeffs[:, None], len(time_grid), axis=1)
        return self.replace(coeffs=coeffs, time_grid=time_grid)

    def sample(self, index: int) -> "FourierField":
        """Spatial snapshot at one time index."""
        if self.is_spatial:
            return self
        _check_index(index, len(self.time_grid))
        return self.replace(coeffs=self.coeffs[:, index], time_grid=None)

    def with_box(self, mode_box) -> "FourierField":
        """Same coefficients, truncated to ``mode_box`` (dropped mass recorded)."""
        box = np.asarray(_as_box(mode_box, self.n))
        keep = np.all(np.abs(self.modes) <= box, axis=1) if len(self) else np.zeros(0, bool)
        loss = float(_peak(self.coeffs[~keep]).sum()) if len(self) else 0.0
        return self.replace(modes=self.modes[keep], coeffs=self.coeffs[keep], mode_box=tuple(box.tolist()),
                            truncation_loss=loss)

    # linear arithmetic
    def _combine(self, other: "FourierField", sign: float) -> "FourierField":
        a, b = _align(self, other)
        modes = np.concatenate([a.modes, b.modes])
        coeffs = np.concatenate([a.coeffs, sign * b.coeffs])
        box = tuple(max(x, y) for x, y in zip(a.mode_box, b.mode_box))
        if modes.shape[0] == 0:
            return FourierField.zeros(a.geometry, a.time_grid, box)
        uniq, inv = np.unique(modes, axis=0, return_inverse=True)
        out = np.zeros((uniq.shape[0],) + coeffs.shape[1:], complex)
        np.add.at(out, inv.reshape(-1), coeffs)
        return FourierField(a.geometry, uniq, out, a.time_grid, mode_box=box, real=a.real and b.real)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self.replace(coeffs=-self.coeffs)

    def scale(self, c) -> "FourierField":
        real = self.real and np.isreal(c)
        return self.replace(coeffs=complex(c) * self.coeffs, real=real)

    def __mul__(self, c):
        if isinstance(c, FourierField):
            return NotImplemented
        return self.scale(c)

    __rmul__ = __mul__

    # diagnostics
    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if len(self) else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """``a(-theta) == conj(a(theta))`` for every stored mode, within ``tol``."""
        idx = self._lookup()
        scale = max(1.0, self.max_abs())
        for m, i in idx.items():
            j = idx.get(tuple(-v for v in m))
            mirror = np.zeros_like(self.coeffs[i]) if j is None else self.coeffs[j]
            if np.any(np.abs(mirror - np.conj(self.coeffs[i])) > tol * scale):
                return False
        return True

    def allclose(self, other: "FourierField", rtol: float = 1e-9, atol: float = 1e-12) -> bool:
        diff = self - other
        scale = max(self.max_abs(), other.max_abs())
        return diff.max_abs() <= atol + rtol * scale


def _check_index(index: int, size: int) -> None:
    if not -size <= index < size:
        raise IndexError(f"time index {index} out of range for {size} samples")


def _peak(coeffs: np.ndarray) -> np.ndarray:
    """Per-mode maximum magnitude over time."""
    mag = np.abs(coeffs)
    return mag if mag.ndim == 1 else (mag.max(axis=1) if mag.shape[1] else np.zeros(mag.shape[0]))


def _align(a: FourierField, b: FourierField) -> tuple[FourierField, FourierField]:
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"{a.geometry} vs {b.geometry}")
    if a.is_spatial and not b.is_spatial:
        a = a.promote(b.time_grid)
    elif b.is_spatial and not a.is_spatial:
        b = b.promote(a.time_grid)
    elif not a.is_spatial and a.time_grid != b.time_grid:
        raise GridMismatch("fields sampled on different time grids")
    return a, b


class VectorField:
    """``n`` scalar fields sharing geometry, time grid and mode box."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[FourierField]):
        comps = tuple(components)
        if not comps:
            raise ValueError("vector field needs at least one component")
        g, t, box = comps[0].geometry, comps[0].time_grid, comps[0].mode_box
        for c in comps[1:]:
            if c.geometry != g:
                raise GeometryMismatch("components on different geometries")
            if (c.time_grid is None) != (t is None) or (t is not None and c.time_grid != t):
                raise GridMismatch("components on different time grids")
            if c.mode_box != box:
                raise ValueError("components with different mode boxes")
        self.components = comps

    @classmethod
    def zeros(cls, geometry: TorusGeometry, time_grid: TimeGrid | None = None, mode_box=None, count=None):
        box = _as_box(0 if mode_box is None else mode_box, geometry.n)
        return cls([FourierField.zeros(geometry, time_grid, box) for _ in range(count or geometry.n)])

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, k) -> FourierField:
        return self.components[k]

    @property
    def geometry(self) -> TorusGeometry:
        return self.components[0].geometry

    @property
    def time_grid(self) -> TimeGrid | None:
        return self.components[0].time_grid

    @property
    def mode_box(self) -> tuple[int, ...]:
        return self.components[0].mode_box

    def map(self, fn) -> "VectorField":
        return VectorField([fn(c) for c in self.components])

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField([a + b for a, b in zip(self.components, other.components, strict=True)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField([a - b for a, b in zip(self.components, other.components, strict=True)])

    def __neg__(self) -> "VectorField":
        return self.map(lambda f: -f)

    def scale(self, c) -> "VectorField":
        return self.map(lambda f: f.scale(c))

    def with_box(self, mode_box) -> "VectorField":
        return self.map(lambda f: f.with_box(mode_box))


# algebra

def convolve(a: FourierField, b: FourierField, out_box=None, box_limit: int = DEFAULT_BOX_LIMIT) -> FourierField:
    """Truncated Cauchy product of two Fourier series.

    The coefficient at ``m`` is the sum over stored ``p + q = m`` of
    ``a(p) * b(q)``, accumulated in lexicographic order of ``p``.  Sums that
    fall outside ``out_box`` are dropped and their magnitude bound is kept in
    ``truncation_loss``.
    """
    a, b = _align(a, b)
    n = a.n
    if out_box is None:
        out_box = tuple(min(x + y, box_limit) for x, y in zip(a.mode_box, b.mode_box))
    out_box = _as_box(out_box, n)
    real = a.real and b.real
    if len(a) == 0 or len(b) == 0:
        return FourierField.zeros(a.geometry, a.time_grid, out_box)

    sums = a.modes[:, None, :] + b.modes[None, :, :]
    inside = np.all(np.abs(sums) <= np.asarray(out_box), axis=2)
    loss = 0.0
    if not inside.all():
        loss = float(np.sum(np.outer(_peak(a.coeffs), _peak(b.coeffs))[~inside]))
        log.debug("convolution dropped modes outside %s, loss bound %.3e", out_box, loss)
    if not inside.any():
        return FourierField.zeros(a.geometry, a.time_grid, out_box).replace(truncation_loss=loss)

    out_modes, inv = np.unique(sums[inside], axis=0, return_inverse=True)
    slot = np.full(inside.shape, -1, dtype=np.int64)
    slot[inside] = inv.reshape(-1)
    acc = np.zeros((out_modes.shape[0],) + a.coeffs.shape[1:], complex)
    for i in range(len(a)):
        row = inside[i]
        if row.any():
            # slots within one row are distinct, so fancy-index accumulation is exact
            acc[slot[i, row]] += a.coeffs[i] * b.coeffs[row]
    return FourierField(a.geometry, out_modes, acc, a.time_grid, mode_box=out_box, real=real,
                        truncation_loss=loss)


def partial_derivative(a: FourierField, axis: int) -> FourierField:
    """Multiply the coefficient at ``theta`` by ``2*pi*i*theta_axis / l_axis`` (axis is 0-based)."""
    if not 0 <= axis < a.n:
        raise IndexError(f"axis {axis} out of range for n={a.n}")
    factor = 2j * np.pi * a.modes[:, axis] / a.geometry.periods[axis]
    if not a.is_spatial:
        factor = factor[:, None]
    return a.replace(coeffs=factor * a.coeffs)


def gradient(s: FourierField) -> VectorField:
    return VectorField([partial_derivative(s, k) for k in range(s.n)])


def divergence(v: VectorField) -> FourierField:
    if len(v) != v.geometry.n:
        raise ValueError("divergence needs one component per axis")
    total = partial_derivative(v[0], 0)
    for k in range(1, len(v)):
        total = total + partial_derivative(v[k], k)
    return total


def laplacian(s: FourierField) -> FourierField:
    sym = s.geometry.laplacian_symbol(s.modes)
    if not s.is_spatial:
        sym = sym[:, None]
    return s.replace(coeffs=sym * s.coeffs)


# norms and evaluation

def norm_Ibar(a: FourierField) -> float:
    """Sum of coefficient magnitudes of a spatial field."""
    if not a.is_spatial:
        raise ValueError("norm_Ibar takes a spatial field; use norm_I for trajectories")
    return float(np.abs(a.coeffs).sum())


def envelope_tail(params, t_max: float, n: int) -> float:
    """Integral over ``t > t_max`` of the decay-class envelope summed over all modes."""
    return float(params.d / params.b * np.exp(-params.b * t_max) * (2.0 * np.exp(params.r) - 1.0) ** n)


def norm_I(a: FourierField, tail=None) -> float:
    """Time-integrated l1 norm: trapezoid rule per mode, plus an optional class envelope tail.

    ``tail`` is any object with ``b``, ``r`` and ``d`` attributes (a K-class
    parameter record); the envelope is summable in closed form.
    """
    if a.is_spatial:
        raise ValueError("norm_I takes a time-sampled field")
    t = a.time_grid.samples
    body = float(np.trapezoid(np.abs(a.coeffs), t, axis=1).sum()) if len(a) and t.size > 1 else 0.0
    if tail is not None:
        body += envelope_tail(tail, a.time_grid.t_max, a.n)
    return body


def evaluate(a: FourierField, x: Sequence[float], t_index: int | None = None) -> complex:
    """Point value of the series at ``x`` (and time index for sampled fields)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n,):
        raise ValueError(f"point must have {a.n} coordinates")
    if a.is_spatial:
        c = a.coeffs
    else:
        if t_index is None:
            raise IndexError("time index required for a sampled field")
        _check_index(t_index, len(a.time_grid))
        c = a.coeffs[:, t_index]
    if not len(a):
        return 0j
    phase = a.geometry.wavevectors(a.modes) @ x
    return complex(np.sum(c * np.exp(1j * phase)))


# serialization

def field_to_dict(a: FourierField) -> dict:
    def pack(z):
        return [float(z.real), float(z.imag)]

    records = []
    for m, c in zip(a.support, a.coeffs):
        samples = [pack(c)] if a.is_spatial else [pack(z) for z in c]
        records.append({"mode": list(m), "samples": samples})
    return {
        "schema": FIELD_SCHEMA,
        "periods": list(a.geometry.periods),
        "time_grid": None if a.is_spatial else a.time_grid.samples.tolist(),
        "mode_box": list(a.mode_box),
        "real": a.real,
        "truncation_loss": a.truncation_loss,
        "records": records,
    }


def field_from_dict(doc: Mapping) -> FourierField:
    if doc.get("schema") != FIELD_SCHEMA:
        raise ValueError(f"unsupported field schema {doc.get('schema')!r}")
    geometry = TorusGeometry(tuple(doc["periods"]))
    grid = None if doc["time_grid"] is None else TimeGrid(doc["time_grid"])
    n = geometry.n
    modes = np.array([r["mode"] for r in doc["records"]], dtype=np.int64).reshape(-1, n)
    vals = [[complex(re, im) for re, im in r["samples"]] for r in doc["records"]]
    if grid is None:
        coeffs = np.array([v[0] for v in vals], complex) if vals else np.zeros(0, complex)
        if any(len(v) != 1 for v in vals):
            raise ValueError("spatial records carry exactly one sample")
    else:
        coeffs = np.array(vals, complex).reshape(len(vals), len(grid))
    return FourierField(geometry, modes, coeffs, grid, mode_box=doc["mode_box"], real=doc["real"],
                        truncation_loss=doc.get("truncation_loss", 0.0))


def dumps_field(a: FourierField) -> str:
    return json.dumps(field_to_dict(a))


def loads_field(text: str) -> FourierField:
    return field_from_dict(json.loads(text))
