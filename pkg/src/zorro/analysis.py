"""Numerical verification: approximation errors, gradient checks, image bounds.

The built-in approximation table pins the published Sloped-Zorro parameter
sets together with the published maximum errors.  Verification samples on
the same coarse grid the published errors were evidently measured on
(step 0.1); finer steps are available and reveal, for example, that the
ReLU approximant's true sup error is 1/(a_i * e) at x = -1/a_i rather than
the published grid value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from zorro.activations import ActivationSpec, derivative, evaluate, knots, make_spec

__all__ = [
    "Interval",
    "ApproxRow",
    "RowResult",
    "GradReport",
    "BUILTIN_APPROX_TABLE",
    "DEFAULT_TRUNCATION",
    "DEFAULT_STEP",
    "sample_grid",
    "max_abs_diff",
    "verify_approx_table",
    "grad_check",
    "image_bounds",
    "mean_activation",
    "results_to_csv",
]

DEFAULT_TRUNCATION = 12.0
DEFAULT_STEP = 0.1

# rows with a published error below this use the absolute two-times rule
SMALL_ROW_CUTOFF = 0.03


def sample_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid lo, lo+step, ..., hi (endpoint kept despite rounding)."""
    if not (lo < hi):
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((hi - lo) / step * (1.0 + 1e-12) + 1e-12)) + 1
    return lo + step * np.arange(n)


@dataclass(frozen=True)
class Interval:
    """Sampling interval; endpoints may be +-inf until truncated."""

    lo: float
    hi: float
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"interval requires lo < hi, got [{self.lo}, {self.hi}]")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("interval step must be finite and > 0")

    def truncated(self, cap: float = DEFAULT_TRUNCATION) -> "Interval":
        """Replace infinite endpoints with +-cap; finite ones are kept."""
        lo = -cap if self.lo == -math.inf else self.lo
        hi = cap if self.hi == math.inf else self.hi
        if not lo < hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}] is empty after truncation")
        return Interval(lo, hi, self.step)

    def grid(self) -> np.ndarray:
        iv = self.truncated()
        return sample_grid(iv.lo, iv.hi, iv.step)


@dataclass(frozen=True)
class ApproxRow:
    """One published approximation: target family vs a Zorro parameter set.

    ``centered`` marks the sigmoid-shaped targets (dsilu, dgelu) whose
    approximant is the symmetric form evaluated at m*x + 1/2, so that the
    linear segment straddles x = 0 the way the target's does.
    """

    target: ActivationSpec
    interval: Interval
    zorro: ActivationSpec
    eps_paper: float
    centered: bool = False

    def __post_init__(self):
        if not self.eps_paper > 0:
            raise ValueError("eps_paper must be > 0")
        p = self.zorro.param_dict()
        if self.centered and p["a_i"] != p["a_s"]:
            raise ValueError("centered rows require symmetric humps (a_i == a_s)")

    def approximant(self, xs: np.ndarray) -> np.ndarray:
        p = self.zorro.param_dict()
        if self.centered:
            sym = make_spec("zorro_sym", a=p["a_i"], b=p["b"])
            return evaluate(sym, p["m"] * np.asarray(xs, float) + 0.5)
        return evaluate(self.zorro, xs)


@dataclass(frozen=True)
class RowResult:
    row: ApproxRow
    eps_measured: float
    passed: bool


@dataclass(frozen=True)
class GradReport:
    points_checked: int
    max_rel_err: float
    worst_point: float
    excluded_zones: tuple = field(default=())


def _sloped(m, a_i, a_s, b):
    return make_spec("zorro_sloped", m=m, a_i=a_i, a_s=a_s, b=b)


BUILTIN_APPROX_TABLE = (
    ApproxRow(make_spec("relu"), Interval(-math.inf, math.inf),
              _sloped(1.00, 50.00, 0.0, 1.0), 0.001),
    ApproxRow(make_spec("silu"), Interval(-math.inf, 1),
              _sloped(0.70, 1.30, 0.0, 1.8), 0.041),
    ApproxRow(make_spec("silu"), Interval(-1, math.inf),
              _sloped(0.98, 0.80, 0.0, 1.3), 0.254),
    ApproxRow(make_spec("silu"), Interval(-2, 5),
              _sloped(0.95, 0.90, 0.0, 1.1), 0.219),
    ApproxRow(make_spec("gelu_swish"), Interval(-math.inf, 1),
              _sloped(0.80, 1.80, 0.0, 1.3), 0.054),
    ApproxRow(make_spec("gelu_swish"), Interval(-1, math.inf),
              _sloped(0.99, 1.99, 0.0, 1.3), 0.155),
    ApproxRow(make_spec("gelu_swish"), Interval(-2, 5),
              _sloped(0.98, 1.30, 0.0, 1.5), 0.147),
    ApproxRow(make_spec("dsilu"), Interval(-math.inf, math.inf),
              _sloped(0.41, 3.40, 3.4, 1.2), 0.037, centered=True),
    ApproxRow(make_spec("dgelu"), Interval(-math.inf, math.inf),
              _sloped(0.70, 3.30, 3.3, 1.7), 0.036, centered=True),
)


def max_abs_diff(f: ActivationSpec, g: ActivationSpec, iv: Interval) -> float:
    """Max over the sampled grid of |f(x) - g(x)|."""
    xs = iv.grid()
    return float(np.max(np.abs(evaluate(f, xs) - evaluate(g, xs))))


def verify_approx_table(rows, eps_tol: float = 0.01) -> list:
    """Measure each row's error and compare with the published value.

    A row passes when |eps_measured - eps_paper| <= eps_tol; rows whose
    published error is below SMALL_ROW_CUTOFF instead require
    eps_measured <= 2 * eps_paper.
    """
    results = []
    for row in rows:
        xs = row.interval.grid()
        eps = float(np.max(np.abs(evaluate(row.target, xs) - row.approximant(xs))))
        if row.eps_paper < SMALL_ROW_CUTOFF:
            passed = eps <= 2.0 * row.eps_paper
        else:
            passed = abs(eps - row.eps_paper) <= eps_tol
        results.append(RowResult(row, eps, passed))
    return results


def grad_check(spec: ActivationSpec, iv: Interval, h_scale: float = 1e-5) -> GradReport:
    """Compare the analytic derivative against central finite differences.

    Points within 1e-3 of a knot are excluded: the second derivative jumps
    there and degrades the finite-difference truncation error.
    """
    if not h_scale > 0:
        raise ValueError("h_scale must be > 0")
    xs = iv.grid()
    zones = tuple((k - 1e-3, k + 1e-3) for k in knots(spec))
    mask = np.ones_like(xs, dtype=bool)
    for lo, hi in zones:
        mask &= (xs < lo) | (xs > hi)
    pts = xs[mask]
    if pts.size == 0:
        return GradReport(0, 0.0, math.nan, zones)
    h = h_scale * np.maximum(1.0, np.abs(pts))
    xp, xm = pts + h, pts - h
    # divide by the spacing of the representable points, not the nominal 2h
    fd = (evaluate(spec, xp) - evaluate(spec, xm)) / (xp - xm)
    an = derivative(spec, pts)
    rel = np.abs(an - fd) / np.maximum(1.0, np.abs(an))
    worst = int(np.argmax(rel))
    return GradReport(int(pts.size), float(rel[worst]), float(pts[worst]), zones)


def image_bounds(spec: ActivationSpec, iv: Interval) -> tuple:
    """Sampled (min, max) of the activation over the interval."""
    ys = evaluate(spec, iv.grid())
    return float(ys.min()), float(ys.max())


def mean_activation(spec: ActivationSpec, iv: Interval, panels: int = 100_000) -> float:
    """Trapezoidal-rule mean of the activation over a finite interval."""
    if not (math.isfinite(iv.lo) and math.isfinite(iv.hi)):
        raise ValueError("mean_activation requires a finite interval")
    xs = np.linspace(iv.lo, iv.hi, panels + 1)
    return float(np.trapezoid(evaluate(spec, xs), xs) / (iv.hi - iv.lo))


def _fmt(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return format(v, ".17g")


def results_to_csv(results) -> str:
    """Serialize verification results; one line per table row."""
    lines = ["target,interval_lo,interval_hi,m,a_i,a_s,b,eps_paper,eps_measured,pass"]
    for r in results:
        p = r.row.zorro.param_dict()
        lines.append(",".join([
            r.row.target.family,
            _fmt(r.row.interval.lo),
            _fmt(r.row.interval.hi),
            _fmt(p["m"]),
            _fmt(p["a_i"]),
            _fmt(p["a_s"]),
            _fmt(p["b"]),
            _fmt(r.row.eps_paper),
            _fmt(r.eps_measured),
            "true" if r.passed else "false",
        ]))
    return "\n".join(lines) + "\n"
