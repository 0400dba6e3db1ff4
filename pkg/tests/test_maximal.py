import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadica.dyadic import build_adjacent_systems, build_system
from dyadica.errors import (
    BadExponents,
    BadParams,
    NotAbsolutelyContinuous,
)
from dyadica.maximal import (
    MaximalParams,
    apply_M,
    apply_M_dyadic,
    check_maximal_equivalence,
    dual_weight,
    maximal_params,
    measure_doubling_constant,
    verdict_theorem_a,
)
from dyadica.maximal import testing_constant_maximal as maximal_testing
from dyadica.norms import indicator, lp_norm, standard_cubes
from dyadica.space import PointMeasure, build_space, generate_space

from conftest import random_masses


def counting(n):
    return PointMeasure(np.ones(n))


class TestDoublingConstant:
    def test_segment_counting_is_three(self, segment4):
        space, mu = segment4
        assert measure_doubling_constant(space, mu) == 3.0

    def test_segment16_counting(self, segment16):
        space, mu = segment16
        assert measure_doubling_constant(space, mu) == 3.0

    def test_zero_measure_vacuous(self, segment4):
        space, _ = segment4
        assert measure_doubling_constant(space, PointMeasure(np.zeros(4))) == 1.0

    def test_point_mass_not_doubling(self, segment4):
        space, _ = segment4
        mu = PointMeasure(np.array([1.0, 0.0, 0.0, 0.0]))
        assert measure_doubling_constant(space, mu) == math.inf

    def test_one_point(self):
        space, mu = generate_space("integer_segment_counting", n=1)
        assert measure_doubling_constant(space, mu) == 1.0

    def test_builder_records_it(self, segment4):
        space, mu = segment4
        params = maximal_params(space, mu, 0.25)
        assert params.doubling_constant == 3.0

    def test_at_least_one(self, tree27):
        space, mu = tree27
        assert measure_doubling_constant(space, mu) >= 1.0


class TestMaximalParams:
    def test_rejects_gamma(self, segment4):
        space, mu = segment4
        for g in (-0.1, 1.0, 1.5):
            with pytest.raises(BadParams):
                MaximalParams(space=space, mu=mu, gamma=g)

    def test_rejects_size_mismatch(self, segment4):
        space, _ = segment4
        with pytest.raises(BadParams):
            MaximalParams(space=space, mu=counting(5), gamma=0.0)

    def test_rejects_small_doubling(self, segment4):
        space, mu = segment4
        with pytest.raises(BadParams):
            MaximalParams(space=space, mu=mu, gamma=0.0, doubling_constant=0.5)


class TestApplyM:
    def test_two_point_counting(self, two_point):
        space, mu = two_point
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        out = apply_M(params, np.array([1.0, 0.0]))
        assert np.array_equal(out, np.array([1.0, 0.5]))

    def test_constant(self, segment16):
        space, mu = segment16
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        out = apply_M(params, np.full(16, 7.0))
        assert np.allclose(out, 7.0, rtol=1e-12)

    def test_zero(self, segment16):
        space, mu = segment16
        params = MaximalParams(space=space, mu=mu, gamma=0.5)
        assert np.array_equal(apply_M(params, np.zeros(16)), np.zeros(16))

    def test_doubling_exact(self, segment16):
        space, _ = segment16
        rng = np.random.default_rng(3)
        mu = PointMeasure(random_masses(rng, 16, zero_fraction=0.2))
        params = MaximalParams(space=space, mu=mu, gamma=0.25)
        f = rng.random(16)
        assert np.array_equal(apply_M(params, 2.0 * f), 2.0 * apply_M(params, f))

    def test_homogeneity(self, segment4):
        space, mu = segment4
        params = MaximalParams(space=space, mu=mu, gamma=0.5)
        f = np.array([0.3, 2.0, 0.0, 1.1])
        assert np.allclose(apply_M(params, 3.0 * f), 3.0 * apply_M(params, f),
                           rtol=1e-12)

    def test_monotone(self, segment16):
        space, mu = segment16
        params = MaximalParams(space=space, mu=mu, gamma=0.25)
        rng = np.random.default_rng(5)
        g = rng.random(16) + 0.2
        f = g * rng.random(16)
        assert np.all(apply_M(params, f) <= apply_M(params, g) * (1 + 1e-12))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.0, 50.0), min_size=4, max_size=4),
           st.lists(st.floats(0.0, 50.0), min_size=4, max_size=4))
    def test_subadditive(self, fl, gl):
        space, mu = generate_space("integer_segment_counting", n=4)
        params = MaximalParams(space=space, mu=mu, gamma=0.25)
        f, g = np.array(fl), np.array(gl)
        lhs = apply_M(params, f + g)
        rhs = apply_M(params, f) + apply_M(params, g)
        assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)

    def test_null_point_is_fine(self, segment4):
        space, _ = segment4
        mu = PointMeasure(np.array([1.0, 0.0, 1.0, 1.0]))
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        out = apply_M(params, np.ones(4))
        assert np.all(np.isfinite(out)) and np.all(out > 0)

    def test_inside_measure_matches_scaled_argument(self, segment16):
        space, _ = segment16
        rng = np.random.default_rng(11)
        sigma = PointMeasure(random_masses(rng, 16))
        mu = PointMeasure(random_masses(rng, 16, zero_fraction=0.3))
        dw = dual_weight(mu, sigma, 2.5)
        params = MaximalParams(space=space, mu=mu, gamma=0.25)
        fam = build_adjacent_systems(space)
        for cube in standard_cubes(fam)[::5]:
            chi = indicator(16, cube.members)
            via_arg = apply_M(params, chi * dw.v)
            via_inside = apply_M(params, chi, inside=dw.v_measure)
            assert np.array_equal(via_arg, via_inside)

    def test_rejects_size(self, segment4):
        space, mu = segment4
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        with pytest.raises(BadParams):
            apply_M(params, np.ones(5))


class TestApplyMDyadic:
    def test_point_mass_hits_leaf(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        f = np.zeros(16)
        f[6] = 1.0
        out = apply_M_dyadic(sys, params, f)
        assert out[6] == 1.0
        assert np.all(out <= 1.0)

    def test_constant(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        params = MaximalParams(space=space, mu=mu, gamma=0.0)
        out = apply_M_dyadic(sys, params, np.full(16, 3.0))
        assert np.allclose(out, 3.0, rtol=1e-12)

    def test_null_cubes_skipped(self, segment4):
        space, _ = segment4
        sys = build_system(space)
        mu = PointMeasure(np.array([1.0, 0.0, 0.0, 0.0]))
        params = MaximalParams(space=space, mu=mu, gamma=0.5)
        out = apply_M_dyadic(sys, params, np.ones(4))
        assert np.all(np.isfinite(out))

    def test_doubling_exact(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        rng = np.random.default_rng(7)
        mu = PointMeasure(random_masses(rng, 16))
        params = MaximalParams(space=space, mu=mu, gamma=0.75)
        f = rng.random(16)
        assert np.array_equal(apply_M_dyadic(sys, params, 2.0 * f),
                              2.0 * apply_M_dyadic(sys, params, f))

    def test_below_ball_form(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        params = MaximalParams(space=space, mu=mu, gamma=0.25)
        rng = np.random.default_rng(9)
        for _ in range(5):
            f = rng.random(16)
            md = apply_M_dyadic(sys, params, f)
            mb = apply_M(params, f)
            assert np.all(md <= mb * 50.0)


class TestEquivalence:
    def test_segment_family(self, segment16):
        space, mu = segment16
        fam = build_adjacent_systems(space)
        params = maximal_params(space, mu, 0.25)
        rep = check_maximal_equivalence(fam, params, trials=20)
        assert rep.violations == 0
        assert rep.dyadic_over_ball <= rep.ratio_bound * (1 + 1e-12)
        assert 0.0 < rep.ball_over_sum < math.inf
        assert rep.systems == len(fam.systems)

    def test_one_point(self):
        space, mu = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        params = maximal_params(space, mu, 0.0)
        rep = check_maximal_equivalence(fam, params, trials=5)
        assert rep.violations == 0
        assert rep.dyadic_over_ball == 1.0
        assert rep.ball_over_sum <= 1.0

    def test_tree(self, tree27):
        space, mu = tree27
        fam = build_adjacent_systems(space)
        params = maximal_params(space, mu, 0.5)
        rep = check_maximal_equivalence(fam, params, trials=10)
        assert rep.violations == 0

    def test_needs_doubling(self, segment4):
        space, _ = segment4
        mu = PointMeasure(np.array([1.0, 0.0, 0.0, 0.0]))
        fam = build_adjacent_systems(space)
        params = maximal_params(space, mu, 0.0)
        with pytest.raises(BadParams):
            check_maximal_equivalence(fam, params, trials=3)


class TestDualWeight:
    def test_identity_weight(self, segment4):
        _, mu = segment4
        dw = dual_weight(mu, mu, 2.0)
        assert np.array_equal(dw.u, np.ones(4))
        assert np.array_equal(dw.v, np.ones(4))
        assert np.array_equal(dw.v_measure.masses, mu.masses)

    def test_double_sigma(self, segment4):
        _, mu = segment4
        sigma = PointMeasure(2.0 * mu.masses)
        dw = dual_weight(mu, sigma, 3.0)
        assert np.array_equal(dw.u, np.full(4, 0.5))
        assert abs(dw.v[0] - math.sqrt(0.5)) <= 1e-15

    def test_not_absolutely_continuous(self, segment4):
        _, mu = segment4
        sigma = PointMeasure(np.array([1.0, 0.0, 1.0, 1.0]))
        with pytest.raises(NotAbsolutelyContinuous):
            dual_weight(mu, sigma, 2.0)

    def test_joint_null_point(self, two_point):
        _, _ = two_point
        mu = PointMeasure(np.array([1.0, 0.0]))
        sigma = PointMeasure(np.array([1.0, 0.0]))
        dw = dual_weight(mu, sigma, 2.0)
        assert np.array_equal(dw.u, np.array([1.0, 0.0]))
        assert np.array_equal(dw.v, np.array([1.0, 0.0]))

    def test_bad_exponent(self, segment4):
        _, mu = segment4
        for p in (1.0, math.inf):
            with pytest.raises(BadExponents):
                dual_weight(mu, mu, p)


class TestTestingConstant:
    def test_one_point_closed_form(self):
        space, mu = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        t = maximal_testing(fam, mu, mu, mu, 0.0, 2.0, 2.0)
        assert t.value == 1.0
        assert t.argmax is not None

    def test_zero_mu(self, segment4):
        space, _ = segment4
        fam = build_adjacent_systems(space)
        mu = PointMeasure(np.zeros(4))
        t = maximal_testing(fam, mu, counting(4), counting(4),
                                     0.25, 2.0, 2.0)
        assert t.value == 0.0
        assert t.convention_hits == len(standard_cubes(fam))

    def test_segment_finite_with_argmax(self, segment16):
        space, mu = segment16
        fam = build_adjacent_systems(space)
        rng = np.random.default_rng(13)
        sigma = PointMeasure(random_masses(rng, 16))
        omega = PointMeasure(random_masses(rng, 16))
        t = maximal_testing(fam, mu, sigma, omega, 0.25, 2.0, 3.0)
        assert 0.0 < t.value < math.inf
        assert t.argmax is not None

    def test_scaling_law_one_point(self):
        # value(s*mu, s*sigma) = s^(gamma - 1/p) * value(mu, sigma); the
        # ratio is scale free only at gamma = 1/p.
        space, _ = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        omega = counting(1)
        for gamma, p in ((0.0, 2.0), (0.5, 2.0), (0.25, 4.0)):
            base = maximal_testing(
                fam, counting(1), counting(1), omega, gamma, p, p).value
            for s in (2.0, 4.0):
                mu = PointMeasure(np.array([s]))
                sigma = PointMeasure(np.array([s]))
                scaled = maximal_testing(
                    fam, mu, sigma, omega, gamma, p, p).value
                expected = s ** (gamma - 1.0 / p) * base
                assert abs(scaled - expected) <= 1e-12 * max(1.0, expected)
        inv = maximal_testing(
            fam, PointMeasure(np.array([8.0])), PointMeasure(np.array([8.0])),
            omega, 0.5, 2.0, 2.0).value
        assert abs(inv - 1.0) <= 1e-12

    def test_dyadic_form_one_point(self):
        space, mu = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        t = maximal_testing(fam, mu, mu, mu, 0.0, 2.0, 2.0, dyadic=True)
        assert t.value == 1.0
        assert len(t.per_system) == len(fam.systems)

    def test_dyadic_form_skips_absolute_continuity(self, segment4):
        space, _ = segment4
        fam = build_adjacent_systems(space)
        mu = counting(4)
        sigma = PointMeasure(np.array([1.0, 0.0, 0.0, 0.0]))
        with pytest.raises(NotAbsolutelyContinuous):
            maximal_testing(fam, mu, sigma, counting(4), 0.0, 2.0, 2.0)
        t = maximal_testing(fam, mu, sigma, counting(4), 0.0, 2.0, 2.0,
                            dyadic=True)
        assert np.isfinite(t.value)


class TestVerdict:
    def test_one_point_closed_form(self):
        space, mu = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        v = verdict_theorem_a(space, fam, mu, mu, mu, 0.0, 2.0, 2.0, budget=2)
        assert v.branch == "testing"
        assert v.testing.value == 1.0
        assert abs(v.norm.lower - 1.0) <= 1e-12
        assert abs(v.ratio - 1.0) <= 1e-12
        assert v.dyadic_testing.value == 1.0

    def test_necessity_branch(self, segment16):
        space, mu = segment16
        fam = build_adjacent_systems(space)
        sigma_masses = np.ones(16)
        sigma_masses[5] = 0.0
        v = verdict_theorem_a(space, fam, mu, PointMeasure(sigma_masses),
                              counting(16), 0.25, 2.0, 2.0)
        assert v.branch == "necessity"
        assert v.violating_set == (5,)
        assert v.lhs > 0.0
        assert v.rhs == 0.0
        assert v.confirmed

    def test_segment_pipeline(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        rng = np.random.default_rng(21)
        mu = PointMeasure(random_masses(rng, 16, zero_fraction=0.2))
        sigma = PointMeasure(random_masses(rng, 16))
        omega = PointMeasure(random_masses(rng, 16, zero_fraction=0.2))
        v = verdict_theorem_a(space, fam, mu, sigma, omega, 0.25, 2.0, 3.0,
                              budget=4)
        assert v.branch == "testing"
        assert v.testing.value <= v.norm.lower + 1e-9
        assert 1.0 - 1e-9 <= v.ratio < math.inf
        assert len(v.dyadic_testing.per_system) == len(fam.systems)
        assert v.doubling >= 1.0

    def test_infinite_q(self, segment4):
        space, mu = segment4
        fam = build_adjacent_systems(space)
        v = verdict_theorem_a(space, fam, mu, mu, mu, 0.5, 2.0, math.inf,
                              budget=2)
        assert v.branch == "testing"
        assert v.testing.value <= v.norm.lower + 1e-9
        assert np.isfinite(v.ratio)

    def test_deterministic(self, segment4):
        space, mu = segment4
        fam = build_adjacent_systems(space)
        rng = np.random.default_rng(30)
        omega = PointMeasure(random_masses(rng, 4))
        a = verdict_theorem_a(space, fam, mu, mu, omega, 0.25, 1.5, 2.0,
                              budget=3, seed=7)
        b = verdict_theorem_a(space, fam, mu, mu, omega, 0.25, 1.5, 2.0,
                              budget=3, seed=7)
        assert a.norm.lower == b.norm.lower
        assert a.ratio == b.ratio
