"""Activation functions with exact first derivatives.

Every function here is a closed-form scalar map applied elementwise to
numpy arrays.  The Zorro family fuses a sigmoid-weighted tail for x < 0,
the identity on [0, 1], and a point-reflected tail for x > 1; the tail
scale k = 1 + e^(a*b) makes the derivative equal 1 at both knots.

Activation choices are carried around as immutable :class:`ActivationSpec`
values, constructed with :func:`make_spec` or parsed from the canonical
text form ``family(name=value,...)`` with :func:`parse_spec`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "SpecError",
    "ZorroParams",
    "AsymParams",
    "SlopedParams",
    "ActivationSpec",
    "FAMILY_NAMES",
    "make_spec",
    "parse_spec",
    "evaluate",
    "derivative",
    "knots",
    "sigmoid",
    "softplus",
    "gsigmoid",
    "zorro_sym",
    "zorro_asym",
    "zorro_sigmoid",
    "zorro_tanh",
    "zorro_sloped",
]


class DomainError(ValueError):
    """Raised when an evaluation input is outside the function's domain."""


class SpecError(ValueError):
    """Raised for invalid activation families, parameters, or spec text."""


# ---------------------------------------------------------------------------
# numerically stable scalar kernels (array-native)
# ---------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic sigmoid, stable for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x) without overflow."""
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


_erf_ufunc = np.frompyfunc(math.erf, 1, 1)


def _erf(x: np.ndarray) -> np.ndarray:
    return np.asarray(_erf_ufunc(x), dtype=float)


def _kgs(x, a, b):
    """k * GS(x, a, b) with k = 1 + e^(a*b), fused in log space.

    The exponent softplus(a*b) - softplus(-a*(x-b)) is <= 0 whenever
    x <= b, so the product never overflows even for a*b around 50; far
    tails underflow to exactly 0 instead of producing NaN.
    """
    with np.errstate(over="ignore"):
        return np.exp(softplus(a * b) - softplus(-a * (x - b)))


def _tail_value(x, a, b):
    # lower-tail branch k * x * GS(x, a, b); x is expected <= 0
    return x * _kgs(x, a, b)


def _tail_deriv(x, a, b):
    # d/dx of the lower tail: k*GS(x,a,b) * (1 + a*x*(1 - GS(x,a,b)))
    kgs = _kgs(x, a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        gs = sigmoid(a * (x - b))
        factor = 1.0 + a * x * (1.0 - gs)
        out = kgs * factor
    # kgs underflows to 0 long before the factor can overflow
    return np.where(kgs == 0.0, 0.0, out)


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZorroParams:
    """Shape coefficient a >= 0 and hump shift b >= 0 for symmetric Zorro."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise SpecError("zorro parameters must be finite")
        if self.a < 0 or self.b < 0:
            raise SpecError("zorro parameters require a >= 0 and b >= 0")

    @property
    def k(self) -> float:
        return 1.0 + math.exp(self.a * self.b)


@dataclass(frozen=True)
class AsymParams:
    """Independent tail coefficients: a_i below 0, a_s above 1, shared b."""

    a_i: float
    a_s: float
    b: float

    def __post_init__(self):
        vals = (self.a_i, self.a_s, self.b)
        if not all(math.isfinite(v) for v in vals):
            raise SpecError("zorro parameters must be finite")
        if any(v < 0 for v in vals):
            raise SpecError("zorro parameters require a_i, a_s, b >= 0")

    @property
    def k_i(self) -> float:
        return 1.0 + math.exp(self.a_i * self.b)

    @property
    def k_s(self) -> float:
        return 1.0 + math.exp(self.a_s * self.b)


@dataclass(frozen=True)
class SlopedParams:
    """Input scale m > 0 applied before an asymmetric Zorro."""

    m: float
    inner: AsymParams

    def __post_init__(self):
        if not math.isfinite(self.m) or self.m <= 0:
            raise SpecError("sloped zorro requires m > 0")


# ---------------------------------------------------------------------------
# zorro family
# ---------------------------------------------------------------------------


def zorro_sym(x, p: ZorroParams):
    """Symmetric Zorro: sigmoid tail, identity on [0,1], reflected tail."""
    x = _check_input(x)
    lower = _tail_value(x, p.a, p.b)
    upper = 1.0 - _tail_value(1.0 - x, p.a, p.b)
    return _unwrap(np.where(x < 0, lower, np.where(x > 1, upper, x)))


def zorro_sym_deriv(x, p: ZorroParams):
    x = _check_input(x)
    lower = _tail_deriv(x, p.a, p.b)
    upper = _tail_deriv(1.0 - x, p.a, p.b)
    return _unwrap(np.where(x < 0, lower, np.where(x > 1, upper, 1.0)))


def zorro_asym(x, p: AsymParams):
    """Asymmetric Zorro: independent hump shapes below 0 and above 1."""
    x = _check_input(x)
    lower = _tail_value(x, p.a_i, p.b)
    upper = 1.0 - _tail_value(1.0 - x, p.a_s, p.b)
    return _unwrap(np.where(x < 0, lower, np.where(x > 1, upper, x)))


def zorro_asym_deriv(x, p: AsymParams):
    x = _check_input(x)
    lower = _tail_deriv(x, p.a_i, p.b)
    upper = _tail_deriv(1.0 - x, p.a_s, p.b)
    return _unwrap(np.where(x < 0, lower, np.where(x > 1, upper, 1.0)))


def zorro_sigmoid(x, p: ZorroParams):
    """Sigmoid-like Zorro: zorro_sym((x+2)/4), value 0.5 at x=0."""
    x = _check_input(x)
    return zorro_sym((x + 2.0) / 4.0, p)


def zorro_tanh(x, p: ZorroParams):
    """Tanh-like Zorro: 2*zorro_sigmoid(x) - 1, odd on the linear region."""
    x = _check_input(x)
    return 2.0 * zorro_sym((x + 2.0) / 4.0, p) - 1.0


def zorro_sloped(x, p: SlopedParams):
    """Sloped Zorro: zorro_asym(m*x), linear slope m on [0, 1/m]."""
    x = _check_input(x)
    return zorro_asym(p.m * x, p.inner)


# ---------------------------------------------------------------------------
# classic families
# ---------------------------------------------------------------------------


def gsigmoid(x, a, b):
    """Generalized sigmoid GS(x, a, b) = sigmoid(a*(x-b))."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("gsigmoid parameters must be finite")
    x = _check_input(x)
    return _unwrap(sigmoid(a * (x - b)))


def _swish(x, beta):
    return x * sigmoid(beta * x)


def _swish_deriv(x, beta):
    s = sigmoid(beta * x)
    return s * (1.0 + beta * x * (1.0 - s))


def _dswish(x, beta):
    # first derivative of Swish, used as an activation in its own right
    return _swish_deriv(x, beta)


def _dswish_deriv(x, beta):
    # second derivative of Swish: beta*s*(1-s) * (2 + beta*x*(1-2s))
    s = sigmoid(beta * x)
    return beta * s * (1.0 - s) * (2.0 + beta * x * (1.0 - 2.0 * s))


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
_GELU_BETA = 1.702


def _gelu_exact(x):
    return 0.5 * x * (1.0 + _erf(x * _INV_SQRT2))


def _gelu_exact_deriv(x):
    return 0.5 * (1.0 + _erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT2PI


# ---------------------------------------------------------------------------
# family registry and ActivationSpec
# ---------------------------------------------------------------------------


def _positive(name):
    def check(params):
        if params[name] <= 0 or not math.isfinite(params[name]):
            raise SpecError(f"parameter {name} must be finite and > 0")

    return check


def _finite(*names):
    def check(params):
        for name in names:
            if not math.isfinite(params[name]):
                raise SpecError(f"parameter {name} must be finite")

    return check


def _leaky_alpha(params):
    if not (0.0 < params["alpha"] < 1.0):
        raise SpecError("leaky_relu requires alpha in (0, 1)")


def _nonneg(*names):
    def check(params):
        for name in names:
            v = params[name]
            if v < 0 or not math.isfinite(v):
                raise SpecError(f"parameter {name} must be finite and >= 0")

    return check


def _sloped_check(params):
    _nonneg("a_i", "a_s", "b")(params)
    _positive("m")(params)


class _Family:
    def __init__(self, names=(), defaults=None, check=None,
                 value=None, deriv=None, knots=None):
        self.param_names = tuple(names)
        self.defaults = defaults or {}
        self.check = check
        self.value = value
        self.deriv = deriv
        self.knot_fn = knots


def _zp(p):
    return ZorroParams(p["a"], p["b"])


def _ap(p):
    return AsymParams(p["a_i"], p["a_s"], p["b"])


def _sp(p):
    return SlopedParams(p["m"], AsymParams(p["a_i"], p["a_s"], p["b"]))


_FAMILIES = {
    "sigmoid": _Family(
        value=lambda p, x: sigmoid(x),
        deriv=lambda p, x: sigmoid(x) * (1.0 - sigmoid(x)),
    ),
    "gsigmoid": _Family(
        names=("a", "b"), defaults={"a": 1.0, "b": 0.0}, check=_finite("a", "b"),
        value=lambda p, x: sigmoid(p["a"] * (x - p["b"])),
        deriv=lambda p, x: p["a"] * sigmoid(p["a"] * (x - p["b"]))
        * (1.0 - sigmoid(p["a"] * (x - p["b"]))),
    ),
    "tanh": _Family(
        value=lambda p, x: np.tanh(x),
        deriv=lambda p, x: 1.0 - np.tanh(x) ** 2,
    ),
    "relu": _Family(
        value=lambda p, x: np.maximum(0.0, x),
        # right derivative at the kink by convention
        deriv=lambda p, x: (x >= 0).astype(float),
        knots=lambda p: (0.0,),
    ),
    "leaky_relu": _Family(
        names=("alpha",), defaults={"alpha": 0.01}, check=_leaky_alpha,
        value=lambda p, x: np.where(x >= 0, x, p["alpha"] * x),
        deriv=lambda p, x: np.where(x >= 0, 1.0, p["alpha"]),
        knots=lambda p: (0.0,),
    ),
    "elu": _Family(
        names=("alpha",), defaults={"alpha": 1.0}, check=_positive("alpha"),
        value=lambda p, x: np.where(x > 0, x, p["alpha"] * np.expm1(np.minimum(x, 0.0))),
        deriv=lambda p, x: np.where(x > 0, 1.0, p["alpha"] * np.exp(np.minimum(x, 0.0))),
        knots=lambda p: (0.0,),
    ),
    "swish": _Family(
        names=("beta",), defaults={"beta": 1.0}, check=_positive("beta"),
        value=lambda p, x: _swish(x, p["beta"]),
        deriv=lambda p, x: _swish_deriv(x, p["beta"]),
    ),
    "silu": _Family(
        value=lambda p, x: _swish(x, 1.0),
        deriv=lambda p, x: _swish_deriv(x, 1.0),
    ),
    "gelu_exact": _Family(
        value=lambda p, x: _gelu_exact(x),
        deriv=lambda p, x: _gelu_exact_deriv(x),
    ),
    "gelu_swish": _Family(
        value=lambda p, x: _swish(x, _GELU_BETA),
        deriv=lambda p, x: _swish_deriv(x, _GELU_BETA),
    ),
    "dswish": _Family(
        names=("beta",), defaults={"beta": 1.0}, check=_positive("beta"),
        value=lambda p, x: _dswish(x, p["beta"]),
        deriv=lambda p, x: _dswish_deriv(x, p["beta"]),
    ),
    "dsilu": _Family(
        value=lambda p, x: _dswish(x, 1.0),
        deriv=lambda p, x: _dswish_deriv(x, 1.0),
    ),
    "dgelu": _Family(
        value=lambda p, x: _dswish(x, _GELU_BETA),
        deriv=lambda p, x: _dswish_deriv(x, _GELU_BETA),
    ),
    "zorro_sym": _Family(
        names=("a", "b"), defaults={"a": 2.0, "b": 0.5}, check=_nonneg("a", "b"),
        value=lambda p, x: zorro_sym(x, _zp(p)),
        deriv=lambda p, x: zorro_sym_deriv(x, _zp(p)),
        knots=lambda p: (0.0, 1.0),
    ),
    "zorro_asym": _Family(
        names=("a_i", "a_s", "b"), defaults={"a_i": 6.0, "a_s": 0.8, "b": 0.4},
        check=_nonneg("a_i", "a_s", "b"),
        value=lambda p, x: zorro_asym(x, _ap(p)),
        deriv=lambda p, x: zorro_asym_deriv(x, _ap(p)),
        knots=lambda p: (0.0, 1.0),
    ),
    "zorro_sigmoid": _Family(
        names=("a", "b"), defaults={"a": 2.0, "b": 0.5}, check=_nonneg("a", "b"),
        value=lambda p, x: zorro_sym((x + 2.0) / 4.0, _zp(p)),
        deriv=lambda p, x: 0.25 * zorro_sym_deriv((x + 2.0) / 4.0, _zp(p)),
        knots=lambda p: (-2.0, 2.0),
    ),
    "zorro_tanh": _Family(
        names=("a", "b"), defaults={"a": 3.5, "b": 1.0}, check=_nonneg("a", "b"),
        value=lambda p, x: 2.0 * zorro_sym((x + 2.0) / 4.0, _zp(p)) - 1.0,
        deriv=lambda p, x: 0.5 * zorro_sym_deriv((x + 2.0) / 4.0, _zp(p)),
        knots=lambda p: (-2.0, 2.0),
    ),
    "zorro_sloped": _Family(
        names=("m", "a_i", "a_s", "b"),
        defaults={"m": 1.3, "a_i": 2.0, "a_s": 2.0, "b": 0.3},
        check=_sloped_check,
        value=lambda p, x: zorro_asym(p["m"] * x, _ap(p)),
        deriv=lambda p, x: p["m"] * zorro_asym_deriv(p["m"] * x, _ap(p)),
        knots=lambda p: (0.0, 1.0 / p["m"]),
    ),
}

FAMILY_NAMES = tuple(_FAMILIES)


@dataclass(frozen=True)
class ActivationSpec:
    """Immutable family tag plus parameter values, validated on construction."""

    family: str
    params: tuple = field(default=())

    def __post_init__(self):
        fam = _FAMILIES.get(self.family)
        if fam is None:
            raise SpecError(f"unknown activation family: {self.family!r}")
        given = dict(self.params)
        if set(given) - set(fam.param_names):
            unknown = sorted(set(given) - set(fam.param_names))
            raise SpecError(f"{self.family} does not take parameters {unknown}")
        full = []
        for name in fam.param_names:
            if name in given:
                full.append((name, float(given[name])))
            elif name in fam.defaults:
                full.append((name, float(fam.defaults[name])))
            else:
                raise SpecError(f"{self.family} is missing parameter {name!r}")
        object.__setattr__(self, "params", tuple(full))
        if fam.check is not None:
            fam.check(dict(self.params))

    def param_dict(self) -> dict:
        return dict(self.params)

    def __str__(self) -> str:
        if not self.params:
            return self.family
        args = ",".join(f"{k}={_fmt_num(v)}" for k, v in self.params)
        return f"{self.family}({args})"


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def make_spec(family: str, **params) -> ActivationSpec:
    """Build a validated spec, e.g. ``make_spec("zorro_sym", a=2, b=0.5)``.

    ``zorro_asym`` and ``zorro_sloped`` also accept a single ``a`` as
    shorthand for equal tail coefficients ``a_i = a_s = a``.
    """
    if family in ("zorro_asym", "zorro_sloped") and "a" in params:
        if "a_i" in params or "a_s" in params:
            raise SpecError(f"{family}: give either a or a_i/a_s, not both")
        a = params.pop("a")
        params["a_i"] = a
        params["a_s"] = a
    return ActivationSpec(family, tuple(params.items()))


_SPEC_RE = re.compile(r"^\s*([a-z][a-z0-9_]*)\s*(?:\(\s*(.*?)\s*\))?\s*$")


def parse_spec(text: str) -> ActivationSpec:
    """Parse the canonical text form ``family(name=value,...)``."""
    m = _SPEC_RE.match(text)
    if m is None:
        raise SpecError(f"malformed activation spec: {text!r}")
    family, argtext = m.group(1), m.group(2)
    params = {}
    if argtext:
        for piece in argtext.split(","):
            if "=" not in piece:
                raise SpecError(f"expected name=value in spec, got {piece!r}")
            name, _, valtext = piece.partition("=")
            name = name.strip()
            if name in params:
                raise SpecError(f"duplicate parameter {name!r} in {text!r}")
            try:
                params[name] = float(valtext)
            except ValueError:
                raise SpecError(f"bad numeric value for {name!r}: {valtext.strip()!r}")
    return make_spec(family, **params)


def evaluate(spec: ActivationSpec, x):
    """Evaluate the spec's activation at x (scalar or array)."""
    fam = _FAMILIES[spec.family]
    xa = _check_input(x)
    return _unwrap(fam.value(spec.param_dict(), xa))


def derivative(spec: ActivationSpec, x):
    """Analytic d/dx of the spec's activation at x (scalar or array)."""
    fam = _FAMILIES[spec.family]
    xa = _check_input(x)
    return _unwrap(fam.deriv(spec.param_dict(), xa))


def knots(spec: ActivationSpec) -> tuple:
    """Points where the second (or first) derivative jumps; () if smooth."""
    fam = _FAMILIES[spec.family]
    if fam.knot_fn is None:
        return ()
    return fam.knot_fn(spec.param_dict())


def _check_input(x) -> np.ndarray:
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise DomainError("activation input must be finite")
    return xa


def _unwrap(out):
    out = np.asarray(out)
    if out.ndim == 0:
        return float(out)
    return out
