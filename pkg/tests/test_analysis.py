"""Tests for the verification engine and the built-in approximation table."""

import math

import numpy as np
import pytest

from zorro.activations import make_spec, parse_spec
from zorro.analysis import (
    BUILTIN_APPROX_TABLE,
    ApproxRow,
    GradReport,
    Interval,
    grad_check,
    image_bounds,
    max_abs_diff,
    mean_activation,
    results_to_csv,
    sample_grid,
    verify_approx_table,
)


class TestSampleGrid:
    def test_inclusive_endpoint(self):
        xs = sample_grid(-5.0, 5.0, 0.01)
        assert xs.size == 1001
        assert xs[0] == -5.0
        assert xs[-1] == pytest.approx(5.0, abs=1e-12)

    def test_single_point_when_step_exceeds_span(self):
        assert sample_grid(0.0, 1.0, 5.0).tolist() == [0.0]

    def test_rejects_bad_intervals(self):
        with pytest.raises(ValueError):
            sample_grid(1.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            sample_grid(0.0, 1.0, 0.0)


class TestInterval:
    def test_truncation_caps_infinite_ends(self):
        iv = Interval(-math.inf, math.inf, 0.5).truncated(12.0)
        assert (iv.lo, iv.hi) == (-12.0, 12.0)

    def test_truncation_keeps_finite_ends(self):
        iv = Interval(-2.0, 5.0, 0.1).truncated()
        assert (iv.lo, iv.hi) == (-2.0, 5.0)

    def test_empty_after_truncation(self):
        with pytest.raises(ValueError):
            Interval(20.0, math.inf, 0.1).truncated(12.0)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            Interval(0.0, 1.0, -0.1)


class TestMaxAbsDiff:
    def test_identical_specs_give_zero(self):
        iv = Interval(-5, 5, 0.01)
        assert max_abs_diff(make_spec("silu"), make_spec("silu"), iv) == 0.0

    def test_symmetry(self):
        iv = Interval(-5, 5, 0.01)
        f, g = make_spec("relu"), make_spec("silu")
        assert max_abs_diff(f, g, iv) == max_abs_diff(g, f, iv)

    def test_relu_row_fine_grid_reveals_true_sup(self):
        # At step 1e-3 the grid resolves the tail hump at x = -1/a_i whose
        # height is 1/(a_i * e); the published 0.001 is a coarse-grid value.
        f = parse_spec("zorro_sloped(m=1,a_i=50,a_s=0,b=1)")
        eps = max_abs_diff(f, make_spec("relu"), Interval(-10, 10, 1e-3))
        assert eps == pytest.approx(1.0 / (50.0 * math.e), rel=1e-6)

    def test_relu_row_coarse_grid_matches_published(self):
        f = parse_spec("zorro_sloped(m=1,a_i=50,a_s=0,b=1)")
        eps = max_abs_diff(f, make_spec("relu"), Interval(-10, 10, 0.1))
        assert eps <= 0.002

    def test_dsilu_row_centered(self):
        # the dsilu published row, symmetric humps recentered at 1/2
        row = BUILTIN_APPROX_TABLE[7]
        assert row.target.family == "dsilu"
        xs = Interval(-10, 10, 1e-3).grid()
        eps = float(np.max(np.abs(row.approximant(xs) - _eval(row.target, xs))))
        assert eps == pytest.approx(0.037, abs=0.01)

    def test_refinement_lipschitz_slack(self):
        # halving the step can only raise the sampled max, and by at most
        # 0.5 * L * step where L bounds the difference's slope
        f = parse_spec("zorro_sloped(m=0.95,a_i=0.9,a_s=0,b=1.1)")
        g = make_spec("silu")
        step = 0.1
        coarse = max_abs_diff(f, g, Interval(-2, 5, step))
        fine = max_abs_diff(f, g, Interval(-2, 5, step / 2))
        from zorro.activations import derivative, evaluate
        xs = Interval(-2, 5, step / 2).grid()
        lip = float(np.max(np.abs(derivative(f, xs)) + np.abs(derivative(g, xs))))
        assert fine >= coarse
        assert fine - coarse <= 0.5 * lip * step


def _eval(spec, xs):
    from zorro.activations import evaluate
    return evaluate(spec, xs)


class TestVerifyApproxTable:
    def test_builtin_table_all_pass(self):
        results = verify_approx_table(BUILTIN_APPROX_TABLE)
        assert len(results) == 9
        for r in results:
            assert r.passed, f"{r.row.target.family}: {r.eps_measured} vs {r.row.eps_paper}"

    def test_builtin_measured_values(self):
        # frozen from the independent oracle (step 0.1, truncation 12)
        expected = [0.000674, 0.040666, 0.253661, 0.219778,
                    0.054499, 0.156209, 0.149088, 0.037213, 0.038675]
        results = verify_approx_table(BUILTIN_APPROX_TABLE)
        for r, want in zip(results, expected):
            assert r.eps_measured == pytest.approx(want, abs=2e-3)

    def test_empty_list(self):
        assert verify_approx_table([]) == []

    def test_self_row_measures_zero(self):
        spec = parse_spec("zorro_sloped(m=1,a_i=2,a_s=2,b=0.3)")
        row = ApproxRow(spec, Interval(-5, 5, 0.01), spec, eps_paper=0.001)
        (res,) = verify_approx_table([row])
        assert res.eps_measured == 0.0
        assert res.passed  # 0 <= 2 * eps_paper

    def test_tight_tolerance_fails_some_row(self):
        results = verify_approx_table(BUILTIN_APPROX_TABLE, eps_tol=0.0)
        assert any(not r.passed for r in results)

    def test_centered_requires_symmetric_humps(self):
        with pytest.raises(ValueError):
            ApproxRow(make_spec("dsilu"), Interval(-5, 5),
                      parse_spec("zorro_sloped(m=0.4,a_i=3,a_s=2,b=1)"),
                      eps_paper=0.04, centered=True)

    def test_csv_serialization(self):
        results = verify_approx_table(BUILTIN_APPROX_TABLE[:2])
        csv = results_to_csv(results)
        lines = csv.strip().split("\n")
        assert lines[0] == "target,interval_lo,interval_hi,m,a_i,a_s,b,eps_paper,eps_measured,pass"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "relu"
        assert first[1] == "-inf" and first[2] == "inf"
        assert first[-1] in ("true", "false")


class TestGradCheck:
    def test_zorro_sym_passes_tightly(self):
        rep = grad_check(make_spec("zorro_sym", a=2, b=0.5), Interval(-10, 10, 5e-3))
        assert rep.max_rel_err <= 1e-6
        assert rep.points_checked > 3000
        assert rep.excluded_zones == ((-1e-3, 1e-3), (1.0 - 1e-3, 1.0 + 1e-3))

    def test_relu_away_from_kink_is_exact(self):
        rep = grad_check(make_spec("relu"), Interval(1, 10, 0.01))
        assert rep.max_rel_err == 0.0

    def test_dgelu_second_derivative(self):
        rep = grad_check(make_spec("dgelu"), Interval(-10, 10, 5e-3))
        assert rep.max_rel_err <= 1e-6

    def test_rejects_nonpositive_h(self):
        with pytest.raises(ValueError):
            grad_check(make_spec("relu"), Interval(-1, 1, 0.1), h_scale=0.0)

    def test_report_is_a_plain_record(self):
        rep = grad_check(make_spec("tanh"), Interval(-2, 2, 0.01))
        assert isinstance(rep, GradReport)
        assert rep.excluded_zones == ()


class TestImageBounds:
    def test_relu(self):
        assert image_bounds(make_spec("relu"), Interval(-5, 5, 0.001)) == (0.0, 5.0)

    def test_sigmoid_asymptotes(self):
        lo, hi = image_bounds(make_spec("sigmoid"), Interval(-50, 50, 0.01))
        assert lo == pytest.approx(0.0, abs=1e-9)
        assert hi == pytest.approx(1.0, abs=1e-9)

    def test_zorro_sym_within_published_bound(self):
        a, b = 2.0, 0.5
        k = 1.0 + math.exp(a * b)
        lo, hi = image_bounds(make_spec("zorro_sym", a=a, b=b), Interval(-100, 101, 0.01))
        assert lo >= -k / a - 1e-9
        assert hi <= 1.0 + k / a + 1e-9


class TestMeanActivation:
    def test_tanh_variant_is_odd_on_linear_region(self):
        m = mean_activation(make_spec("zorro_tanh", a=3.5, b=1), Interval(-2, 2, 0.1))
        assert m == pytest.approx(0.0, abs=1e-9)

    def test_sigmoid_point_symmetry(self):
        m = mean_activation(make_spec("sigmoid"), Interval(-8, 8, 0.1))
        assert m == pytest.approx(0.5, abs=1e-6)

    def test_asymmetric_humps_shift_the_mean(self):
        # frozen oracle values on [-4, 4]: the big-hump side dominates,
        # so swapping a_i and a_s moves the mean to either side of the
        # symmetric function's 0.4369
        iv = Interval(-4, 4, 0.1)
        m_sym = mean_activation(make_spec("zorro_sym", a=2, b=0.5), iv)
        m_hi = mean_activation(make_spec("zorro_asym", a_i=6, a_s=0.8, b=0.4), iv)
        m_lo = mean_activation(make_spec("zorro_asym", a_i=0.8, a_s=6, b=0.4), iv)
        assert m_sym == pytest.approx(0.436888, abs=1e-4)
        assert m_hi == pytest.approx(0.622743, abs=1e-4)
        assert m_lo == pytest.approx(0.208055, abs=1e-4)
        assert m_lo < m_sym < m_hi

    def test_requires_finite_interval(self):
        with pytest.raises(ValueError):
            mean_activation(make_spec("sigmoid"), Interval(-math.inf, 0, 0.1))
