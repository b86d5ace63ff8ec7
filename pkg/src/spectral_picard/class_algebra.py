"""Decay classes of Fourier coefficient envelopes and their closure rules.

Torus classes (mode ``theta``, factorial weight ``prod_k |theta_k|!``):

* ``J(r, d)``:    ``|a(theta)| <= d r^|theta| / prod |theta_k|!``
* ``K(b, r, d)``: ``|a(t, theta)| <= d r^|theta| exp(-b t) / prod |theta_k|!``

Whole-space classes (Gaussian envelope ``exp(-b|w|^2) w^beta``, weight ``(2 beta)!``):

* ``G(b, r, d)``:    ``|a(w, beta)| <= d r^|beta| / (2 beta)!``
* ``H(b, r, c, d)``: ``|a(w, t, beta)| <= d r^|beta| / ((2 beta)! (1 + t)^c)``

Membership checks certify only the stored (truncated) support on the stored
time samples.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .spectral_core import FourierField, TorusGeometry

#: Relative slack granted to saturated bounds in membership verdicts.
MEMBERSHIP_RTOL = 1e-9


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class JParams:
    r: float
    d: float
    family = "J"

    def __post_init__(self):
        _require(self.r >= 0 and self.d > 0, f"J class needs r >= 0, d > 0, got {self}")

    def to_dict(self):
        return {"family": self.family, **asdict(self)}


@dataclass(frozen=True)
class KParams:
    b: float
    r: float
    d: float
    family = "K"

    def __post_init__(self):
        _require(self.b > 0 and self.r >= 0 and self.d > 0, f"K class needs b > 0, r >= 0, d > 0, got {self}")

    def to_dict(self):
        return {"family": self.family, **asdict(self)}


@dataclass(frozen=True)
class GParams:
    b: float
    r: float
    d: float
    family = "G"

    def __post_init__(self):
        _require(self.b > 0 and self.r > 0 and self.d > 0, f"G class needs positive b, r, d, got {self}")

    def to_dict(self):
        return {"family": self.family, **asdict(self)}


@dataclass(frozen=True)
class HParams:
    b: float
    r: float
    c: float
    d: float
    family = "H"

    def __post_init__(self):
        _require(self.b > 0 and self.r > 0 and self.d > 0, f"H class needs positive b, r, d, got {self}")
        _require(self.c > 1, f"H class needs c > 1, got c={self.c}")

    def check_dimension(self, n: int) -> None:
        _require(self.c <= n / 2, f"H class needs c <= n/2 = {n / 2}, got c={self.c}")

    def to_dict(self):
        return {"family": self.family, **asdict(self)}


def params_from_dict(doc: dict):
    doc = dict(doc)
    family = doc.pop("family")
    cls = {"J": JParams, "K": KParams, "G": GParams, "H": HParams}.get(family)
    if cls is None:
        raise ValueError(f"unknown class family {family!r}")
    return cls(**{k: float(v) for k, v in doc.items()})


@dataclass(frozen=True)
class Membership:
    holds: bool
    margin: float


def _log_envelope(modes: np.ndarray, r: float, d: float) -> np.ndarray:
    """``log(d r^|theta| / prod |theta_k|!)`` per mode, ``-inf`` where ``r = 0`` and ``theta != 0``."""
    absm = np.abs(modes)
    order = absm.sum(axis=1)
    log_fact = gammaln(absm + 1.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        log_r = np.where(order > 0, order * np.log(r) if r > 0 else -np.inf, 0.0)
    return math.log(d) + log_r - log_fact


def _margin(log_mag: np.ndarray, log_env: np.ndarray) -> float:
    if log_mag.size == 0:
        return 0.0
    with np.errstate(invalid="ignore"):
        ratio = log_mag - log_env
    # zero coefficient under a zero envelope counts as satisfied
    ratio = np.where(np.isneginf(log_mag), -np.inf, ratio)
    return float(np.exp(np.max(ratio)))


def check_membership_J(field: FourierField, params: JParams) -> Membership:
    """Worst ratio ``|a(theta)| prod|theta_k|! / (d r^|theta|)`` over stored modes."""
    if not field.is_spatial:
        raise ValueError("J membership takes a spatial field")
    with np.errstate(divide="ignore"):
        log_mag = np.log(np.abs(field.coeffs))
    margin = _margin(log_mag, _log_envelope(field.modes, params.r, params.d))
    return Membership(margin <= 1.0 + MEMBERSHIP_RTOL, margin)


def check_membership_K(field: FourierField, params: KParams, sample_indices: Sequence[int] | None = None) -> Membership:
    """Worst ratio ``|a(t, theta)| prod|theta_k|! / (d r^|theta| exp(-b t))`` over stored modes and samples."""
    if field.is_spatial:
        raise ValueError("K membership takes a time-sampled field")
    idx = np.arange(len(field.time_grid)) if sample_indices is None else np.asarray(sample_indices, int)
    t = field.time_grid.samples[idx]
    with np.errstate(divide="ignore"):
        log_mag = np.log(np.abs(field.coeffs[:, idx]))
    log_env = _log_envelope(field.modes, params.r, params.d)[:, None] - params.b * t[None, :]
    margin = _margin(log_mag, log_env)
    return Membership(margin <= 1.0 + MEMBERSHIP_RTOL, margin)


def derivative_class(params, axis: int, geometry: TorusGeometry | None = None):
    """Class of ``d/dx_axis`` applied to a member of ``params`` (axis is 0-based).

    J(r, d) -> J(2r, pi d / l_k);  K(b, r, d) -> K(b, 2r, pi d / l_k);
    G(b, r, d) -> G(b, 2r, d / r^2);  H(b, r, c, d) -> H(b, 2r, c, d / r^2).
    """
    if isinstance(params, (JParams, KParams)):
        if geometry is None:
            raise ValueError("torus classes need the geometry for the period l_k")
        if not 0 <= axis < geometry.n:
            raise IndexError(f"axis {axis} out of range")
        lk = geometry.periods[axis]
        if isinstance(params, JParams):
            return JParams(2 * params.r, math.pi * params.d / lk)
        return KParams(params.b, 2 * params.r, math.pi * params.d / lk)
    if isinstance(params, GParams):
        return GParams(params.b, 2 * params.r, params.d / params.r ** 2)
    if isinstance(params, HParams):
        return HParams(params.b, 2 * params.r, params.c, params.d / params.r ** 2)
    raise TypeError(f"unknown class parameters {params!r}")


TORUS_CASES = ("p_dp", "p_dq", "q_dp", "q_dq")


def product_class_torus(case: str, params1, params2, axis: int, geometry: TorusGeometry,
                        kappa2: float | None = None, nu2: float | None = None) -> KParams:
    """K class of ``p1 * d(p2)/dx_axis`` on the torus.

    ``p`` factors are heat flows seeded by J data (``params`` is ``JParams``,
    rate ``kappa``); ``q`` factors are Duhamel integrals of K forcing
    (``params`` is ``KParams``, rate ``nu``).  ``kappa2``/``nu2`` belong to the
    differentiated factor.
    """
    if case not in TORUS_CASES:
        raise ValueError(f"unknown torus product case {case!r}; expected one of {TORUS_CASES}")
    first, second = case[0], case[-1]
    want = {"p": JParams, "q": KParams}
    if not isinstance(params1, want[first]) or not isinstance(params2, want[second]):
        raise TypeError(f"case {case} needs ({want[first].__name__}, {want[second].__name__})")
    if not 0 <= axis < geometry.n:
        raise IndexError(f"axis {axis} out of range")
    n = geometry.n
    lk = geometry.periods[axis]
    r_out = 2 * (params1.r + params2.r)
    amp = math.pi * (1 + math.exp(2 * params1.r + 2 * params2.r)) ** n * params1.d * params2.d / lk

    if second == "p":
        if kappa2 is None or not kappa2 > 0:
            raise ValueError(f"case {case} needs a positive kappa2")
        b_out = 4 * math.pi ** 2 * kappa2 / lk ** 2
    else:
        if nu2 is None or not nu2 > 0:
            raise ValueError(f"case {case} needs a positive nu2")
        b_out = min(params2.b / 2, 2 * math.pi ** 2 * nu2 / lk ** 2)
        amp /= math.e * b_out
    if first == "q":
        amp /= params1.b
    return KParams(b_out, r_out, amp)


# whole-space products: (gate, needs) per case; the amplitude formulas live in _RN_AMPLITUDE
RN_CASES = {
    "f_df": 3, "f_dg": 3, "g_df": 3, "g_dg": 3,
    "f_dh": 5, "h_df": 5,
    "g_dh": 7, "h_dg": 7,
    "h_dh": 9,
}


@dataclass(frozen=True)
class Rates:
    """Diffusion constants of the two factors: ``kappa`` for heat flows of
    spatial data, ``nu`` and ``sigma`` for the first and second Duhamel layers."""

    kappa1: float | None = None
    kappa2: float | None = None
    nu1: float | None = None
    nu2: float | None = None
    sigma1: float | None = None
    sigma2: float | None = None

    def get(self, name: str) -> float:
        v = getattr(self, name)
        if v is None or not v > 0:
            raise ValueError(f"rate {name} must be supplied and positive")
        return float(v)


def _rn_amplitude(case: str, n: int, c: float, b1: float, b2: float, rates: Rates) -> float:
    """Denominator that divides the common factor, per case."""
    s = b1 + b2
    h = n / 2
    g = rates.get
    if case == "f_df":
        return min(s, g("kappa1") + g("kappa2")) ** c
    if case == "f_dg":
        return (c - 1) * min(s, g("kappa1")) ** h
    if case == "g_df":
        return (c - 1) * min(s, g("kappa2")) ** h
    if case == "g_dg":
        return (c - 1) * min(s, g("nu1"), g("nu2")) ** h / 2 ** (2 * c + 2)
    if case == "f_dh":
        return g("nu2") * g("sigma2") * (h - 1) * (h - 2) * s ** (h - 2)
    if case == "h_df":
        return g("nu1") * g("sigma1") * (h - 1) * (h - 2) * s ** (h - 2)
    if case == "g_dh":
        return g("nu1") * g("nu2") * g("sigma2") * (h - 1) * (h - 2) * (h - 3) * s ** (h - 3)
    if case == "h_dg":
        return g("sigma1") * g("nu1") * g("nu2") * (h - 1) * (h - 2) * (h - 3) * s ** (h - 3)
    if case == "h_dh":
        return (g("nu1") * g("nu2") * g("sigma1") * g("sigma2")
                * (h - 1) * (h - 2) * (h - 3) * (h - 4) * s ** (h - 4))
    raise ValueError(f"unknown whole-space product case {case!r}")


def product_class_rn(case: str, params1, params2, n: int, rates: Rates, c: float | None = None) -> HParams:
    """H class of a whole-space product ``x1 * d(x2)/dx_k``.

    ``f`` factors are heat flows of G data, ``g`` single and ``h`` double
    Duhamel layers of H data.  The output exponent ``c`` is inherited from the
    H inputs; pass it explicitly for ``f_df``.
    """
    gate = RN_CASES.get(case)
    if gate is None:
        raise ValueError(f"unknown whole-space product case {case!r}; expected one of {tuple(RN_CASES)}")
    if n < gate:
        raise ValueError(f"case {case} requires n >= {gate}, got n={n}")
    for label, p in zip(case.split("_d"), (params1, params2)):
        want = GParams if label == "f" else HParams
        if not isinstance(p, want):
            raise TypeError(f"factor {label} of case {case} needs {want.__name__}")
    if c is None:
        cs = [p.c for p in (params1, params2) if isinstance(p, HParams)]
        if not cs:
            raise ValueError(f"case {case} needs the decay exponent c")
        c = cs[0]
    out_c = float(c)
    b1, b2, r1, r2 = params1.b, params2.b, params1.r, params2.r
    s = b1 + b2
    q = r1 ** 2 + r2 ** 2
    common = ((1 + q / math.sqrt(2 * s)) ** n * math.exp(n * q ** 2 / (4 * s))
              * params1.d * params2.d / ((2 * math.pi) ** (n / 2) * r2 ** 2))
    d_out = common / _rn_amplitude(case, n, out_c, b1, b2, rates)
    if not d_out > 0:
        raise ValueError(f"case {case} gives a nonpositive amplitude at n={n}")
    return HParams(b1 * b2 / s, 2 * max(r1, r2), out_c, d_out)
