"""Depth/parameter sweep protocol and the statistics used to compare runs.

A sweep trains one fresh network per (depth, parameter set, run) cell and
records the best validation accuracy seen across epochs.  Cells that abort
with a non-finite loss record accuracy 0; failures are data, not errors.
The stable layer is the deepest depth where at least 40% of parameter sets
reach 90% validation accuracy on average; the maximal layer is the deepest
depth where a small fraction still passes in every run.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import Decimal

import numpy as np

from zorro.activations import make_spec
from zorro.data import Dataset
from zorro.nn import TrainConfig, TrainingDiverged, init_net, train

__all__ = [
    "GridSpec",
    "SweepResult",
    "TTestResult",
    "BUILTIN_GRIDS",
    "expand_grid",
    "cell_seed",
    "run_sweep",
    "stable_layer",
    "maximal_layer",
    "sweep_summary",
    "sweep_to_csv",
    "welch_ttest",
    "STABLE_FRACTION",
    "MAXIMAL_FRACTION",
    "ACCURACY_THRESHOLD",
]

STABLE_FRACTION = 0.40
MAXIMAL_FRACTION = 0.05
ACCURACY_THRESHOLD = 0.90


@dataclass(frozen=True)
class GridSpec:
    """Per-parameter inclusive ranges; axes is ((name, lo, hi, step), ...).

    The ``n`` axis appears in the published Sloped-Zorro grid but maps to
    nothing in the function; it is expanded for bookkeeping and produces
    duplicate specs that are dropped unless duplicates are requested.
    """

    variant: str
    axes: tuple

    def __post_init__(self):
        for name, lo, hi, step in self.axes:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad interval for {name}: [{lo}, {hi}]")
            if not step > 0:
                raise ValueError(f"step for {name} must be > 0")

    def axis_points(self, name):
        for axis_name, lo, hi, step in self.axes:
            if axis_name == name:
                return _points(lo, hi, step)
        raise KeyError(name)

    def cardinality(self) -> int:
        total = 1
        for name, lo, hi, step in self.axes:
            total *= len(_points(lo, hi, step))
        return total


def _points(lo, hi, step):
    decimals = max(0, -Decimal(str(step)).as_tuple().exponent)
    n = int(round((hi - lo) / step)) + 1
    return [round(lo + i * step, decimals) for i in range(n)]


def _grid_axes(table):
    return tuple((name, lo, hi, step) for name, (lo, hi, step) in table)


BUILTIN_GRIDS = {
    "zorro_sym": GridSpec("zorro_sym", _grid_axes([
        ("a", (0.0, 6.0, 1.0)), ("b", (0.0, 0.5, 0.1))])),
    "zorro_asym": GridSpec("zorro_asym", _grid_axes([
        ("a_i", (3.0, 6.0, 1.0)), ("a_s", (0.4, 1.2, 0.2)), ("b", (0.0, 0.4, 0.2))])),
    "zorro_sigmoid": GridSpec("zorro_sigmoid", _grid_axes([
        ("a", (0.0, 5.5, 0.5)), ("b", (0.0, 2.0, 0.5))])),
    "zorro_tanh": GridSpec("zorro_tanh", _grid_axes([
        ("a", (1.0, 6.0, 0.5)), ("b", (0.0, 1.5, 0.5))])),
    "zorro_sloped": GridSpec("zorro_sloped", _grid_axes([
        ("a", (0.0, 6.0, 1.0)), ("b", (0.0, 6.0, 0.1)),
        ("m", (1.0, 2.0, 0.1)), ("n", (0.0, 0.5, 0.1))])),
}

_INERT_AXES = ("n",)


def _spec_from_point(variant, point):
    params = {k: v for k, v in point.items() if k not in _INERT_AXES}
    return make_spec(variant, **params)


def expand_grid(gs: GridSpec, dedupe: bool = True):
    """All Cartesian combinations as specs, endpoints inclusive.

    Inert axes are walked but do not parameterize the spec, so with
    ``dedupe=True`` (the default) the duplicates they create collapse;
    ``dedupe=False`` preserves the full product for count bookkeeping.
    """
    points = [[]]
    for name, lo, hi, step in gs.axes:
        points = [prev + [(name, v)] for prev in points for v in _points(lo, hi, step)]
    specs = [_spec_from_point(gs.variant, dict(combo)) for combo in points]
    if dedupe:
        specs = list(dict.fromkeys(specs))
    return specs


def cell_seed(base_seed: int, depth: int, spec_index: int, run: int) -> int:
    """Stable 64-bit seed for one sweep cell, independent across cells."""
    key = f"{base_seed}:{depth}:{spec_index}:{run}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


@dataclass(frozen=True)
class SweepResult:
    depths: tuple
    param_sets: tuple
    accuracies: np.ndarray  # (depth, param_set, run)
    runs_per_cell: int

    def __post_init__(self):
        want = (len(self.depths), len(self.param_sets), self.runs_per_cell)
        if self.accuracies.shape != want:
            raise ValueError(f"accuracy table must have shape {want}")


_worker_state = {}


def _init_worker(train_set, val_set, config, hidden_units):
    _worker_state["args"] = (train_set, val_set, config, hidden_units)


def _train_cell(task):
    depth, spec, seed = task
    train_set, val_set, config, hidden_units = _worker_state["args"]
    dims = [train_set.features.shape[1]] + [hidden_units] * depth + [train_set.class_count]
    net = init_net(dims, spec, seed=seed)
    cfg = replace(config, seed=seed)
    try:
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            _, history = train(net, train_set, val_set, cfg)
    except TrainingDiverged:
        return 0.0
    return max(history.val_acc) if history.val_acc else 0.0


def run_sweep(param_sets, depths, train_set: Dataset, val_set: Dataset,
              config: TrainConfig, runs: int = 4, hidden_units: int = 128,
              jobs: int = 1, progress=None) -> SweepResult:
    """Train every (depth, spec, run) cell and collect best validation accuracy.

    Each cell derives its own seed from (config.seed, depth, spec index,
    run), used for both initialization and batch shuffling, so results are
    reproducible cell by cell and independent of execution order.
    """
    depths = [int(d) for d in depths]
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError("depths must be strictly increasing")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    param_sets = list(param_sets)
    acc = np.zeros((len(depths), len(param_sets), runs))
    tasks = []
    for di, depth in enumerate(depths):
        for si, spec in enumerate(param_sets):
            for run in range(runs):
                tasks.append((di, si, run,
                              (depth, spec, cell_seed(config.seed, depth, si, run))))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(train_set, val_set, config, hidden_units)) as pool:
            results = pool.map(_train_cell, [t[3] for t in tasks], chunksize=1)
            for (di, si, run, _), value in zip(tasks, results):
                acc[di, si, run] = value
                if progress:
                    progress(di, si, run, value)
    else:
        _init_worker(train_set, val_set, config, hidden_units)
        for di, si, run, task in tasks:
            acc[di, si, run] = _train_cell(task)
            if progress:
                progress(di, si, run, acc[di, si, run])
    return SweepResult(tuple(depths), tuple(param_sets), acc, runs)


def stable_layer(sr: SweepResult, fraction_threshold: float = STABLE_FRACTION,
                 acc_threshold: float = ACCURACY_THRESHOLD):
    """Deepest depth where >= fraction_threshold of sets pass on average."""
    _check_thresholds(fraction_threshold, acc_threshold)
    mean_acc = sr.accuracies.mean(axis=2)
    frac = (mean_acc >= acc_threshold).mean(axis=1)
    best = None
    for depth, f in zip(sr.depths, frac):
        if f >= fraction_threshold:
            best = depth
    return best


def maximal_layer(sr: SweepResult, min_fraction: float = MAXIMAL_FRACTION,
                  acc_threshold: float = ACCURACY_THRESHOLD):
    """Deepest depth where >= min_fraction of sets pass in every run."""
    _check_thresholds(min_fraction, acc_threshold)
    all_pass = (sr.accuracies >= acc_threshold).all(axis=2)
    frac = all_pass.mean(axis=1)
    count = all_pass.sum(axis=1)
    best = None
    for depth, f, c in zip(sr.depths, frac, count):
        if f >= min_fraction and c >= 1:
            best = depth
    return best


def _check_thresholds(fraction, acc):
    if not (0.0 < fraction <= 1.0 and 0.0 < acc <= 1.0):
        raise ValueError("thresholds must lie in (0, 1]")


def sweep_summary(sr: SweepResult, acc_threshold: float = ACCURACY_THRESHOLD) -> dict:
    """Stable/maximal layers plus per-depth pass fractions (mean and per-run)."""
    mean_pass = (sr.accuracies.mean(axis=2) >= acc_threshold).mean(axis=1)
    all_pass = (sr.accuracies >= acc_threshold).all(axis=2).mean(axis=1)
    run_pass = (sr.accuracies >= acc_threshold).mean(axis=(1, 2))
    return {
        "acc_threshold": acc_threshold,
        "runs_per_cell": sr.runs_per_cell,
        "param_set_count": len(sr.param_sets),
        "stable_layer": stable_layer(sr, acc_threshold=acc_threshold),
        "maximal_layer": maximal_layer(sr, acc_threshold=acc_threshold),
        "per_depth": [
            {
                "depth": depth,
                "mean_pass_fraction": float(mean_pass[i]),
                "all_runs_pass_fraction": float(all_pass[i]),
                "run_pass_fraction": float(run_pass[i]),
                "best_accuracy": float(sr.accuracies[i].max()),
            }
            for i, depth in enumerate(sr.depths)
        ],
    }


def sweep_to_csv(sr: SweepResult) -> str:
    """Rows sorted by (depth, spec index, run); spec text is CSV-quoted."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["depth", "spec", "run", "val_accuracy"])
    for di, depth in enumerate(sr.depths):
        for si, spec in enumerate(sr.param_sets):
            for run in range(sr.runs_per_cell):
                writer.writerow([depth, str(spec), run,
                                 format(sr.accuracies[di, si, run], ".17g")])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Welch's t-test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float


def welch_ttest(a, b) -> TTestResult:
    """Two-sided Welch's t-test (unequal variances, Welch-Satterthwaite df).

    Degenerate zero-variance inputs give p=1 when the means agree and p=0
    when they differ; df is reported as 0 in those cases.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 values")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if diff == 0.0:
            return TTestResult(0.0, 0.0, 1.0)
        return TTestResult(math.copysign(math.inf, diff), 0.0, 0.0)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = _reg_inc_beta(0.5 * df, 0.5, df / (df + t * t))
    return TTestResult(float(t), float(df), float(p))


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) by continued fraction."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float) -> float:
    # modified Lentz iteration for the incomplete beta continued fraction
    max_iter, eps, tiny = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")
