import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadica.dyadic import (
    PROPERTY_NAMES,
    band_index,
    build_adjacent_systems,
    build_system,
    check_ball_coverage,
    check_system,
    cover_ball,
    coverage_bound,
    dyadic_parameters,
    expanding_cube_chain,
    find_cube_with_positive_masses,
    generalize,
    maximal_cubes,
    replay_coverage,
)
from dyadica.errors import (
    BadParams,
    MixedSystems,
    NonPositiveRadius,
    OutOfRange,
    SamePoint,
    Unsatisfiable,
)
from dyadica.space import PointMeasure, generate_space


class TestParameters:
    def test_metric_constants(self):
        delta, c1, C1, strict = dyadic_parameters(1.0)
        assert delta == 1.0 / 96.0
        assert c1 == 1.0 / 12.0
        assert C1 == 4.0
        assert strict

    def test_snowflake_constants(self):
        delta, c1, C1, strict = dyadic_parameters(2.0)
        assert delta == 1.0 / (96.0 * 64.0)
        assert c1 == 1.0 / 192.0
        assert C1 == 16.0
        assert strict

    def test_relaxed_delta_flagged(self):
        _, _, _, strict = dyadic_parameters(1.0, delta=0.25)
        assert not strict

    def test_delta_domain(self):
        with pytest.raises(BadParams):
            dyadic_parameters(1.0, delta=1.0)
        with pytest.raises(BadParams):
            dyadic_parameters(1.0, delta=0.0)


class TestWindow:
    def test_segment16_window(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        assert (sys.k_min, sys.k_max) == (-2, 1)
        # coarse generations collapse to the whole space, fine ones split fully
        assert len(sys.generations[-2]) == 1
        assert len(sys.generations[-1]) == 1
        assert sys.top.members == tuple(range(16))
        assert all(c.size == 1 for c in sys.generations[0])
        assert all(c.size == 1 for c in sys.generations[1])

    def test_snowflake_window(self, snowflake8):
        space, _ = snowflake8
        sys = build_system(space)
        assert (sys.k_min, sys.k_max) == (-2, 1)

    def test_tree_window_and_levels(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        assert (sys.k_min, sys.k_max) == (-1, 3)
        counts = [len(sys.generations[k]) for k in sys.generation_range()]
        assert counts == [1, 3, 9, 27, 27]

    def test_tree_branch_cubes(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        branches = sorted(c.members for c in sys.generations[0])
        assert branches == [tuple(range(0, 9)), tuple(range(9, 18)),
                            tuple(range(18, 27))]
        subtrees = sorted(c.members for c in sys.generations[1])
        assert subtrees == [tuple(range(3 * i, 3 * i + 3)) for i in range(9)]

    def test_single_point_space(self):
        space, _ = generate_space("integer_segment_counting", n=1)
        sys = build_system(space)
        assert sys.k_min == sys.k_max
        assert sys.top.members == (0,)


class TestProperties:
    @pytest.mark.parametrize("fixture", ["segment16", "snowflake8", "tree27"])
    def test_all_properties_strict(self, fixture, request):
        space, _ = request.getfixturevalue(fixture)
        sys = build_system(space)
        reports = check_system(sys, strict=True)
        assert [r.name for r in reports] == list(PROPERTY_NAMES)
        assert all(r.status == "pass" for r in reports)
        assert all(r.strict_mode for r in reports)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_properties_on_random_spaces(self, seed):
        space, _ = generate_space("euclidean_random_points", seed=seed, n=18, dim=2)
        sys = build_system(space, seed=seed)
        assert all(r.ok for r in check_system(sys, strict=False))

    def test_relaxed_delta_reports_non_strict(self, segment16):
        space, _ = segment16
        # delta=1/8 still small enough for the line to build cleanly
        sys = build_system(space, delta=1.0 / 8.0)
        assert not sys.strict_delta
        reports = check_system(sys, strict=False)
        assert all(not r.strict_mode for r in reports)


class TestNavigation:
    def test_chain_is_nested(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        for x in (0, 13, 26):
            chain = sys.cube_chain(x)
            assert [c.k for c in chain] == list(sys.generation_range())
            for coarse, fine in zip(chain, chain[1:]):
                assert set(fine.members) <= set(coarse.members)
                assert x in fine

    def test_parent_children_inverse(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        for cube in sys.all_cubes():
            for child in sys.children(cube):
                assert sys.parent(child) == cube
            if cube.k < sys.k_max:
                got = sorted(m for ch in sys.children(cube) for m in ch.members)
                assert got == list(cube.members)

    def test_parent_of_top(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        with pytest.raises(OutOfRange):
            sys.parent(sys.top)

    def test_containing_cube_out_of_window(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        with pytest.raises(OutOfRange):
            sys.containing_cube(sys.k_max + 1, 0)

    def test_smallest_common_cube_line(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        # generations -2 and -1 are both the whole space; the finest shared
        # cube for distant points is the generation -1 copy
        q = sys.smallest_common_cube(0, 15)
        assert q.k == -1
        assert q.members == tuple(range(16))

    def test_smallest_common_cube_tree(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        assert sys.smallest_common_cube(0, 1).k == 1
        assert sys.smallest_common_cube(0, 4).k == 0
        assert sys.smallest_common_cube(0, 10).k == -1

    def test_same_point_rejected(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        with pytest.raises(SamePoint):
            sys.smallest_common_cube(3, 3)

    def test_leaves_are_singletons(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        for x in space.points():
            assert sys.leaf(x).members == (x,)


class TestDeterminism:
    def test_same_seed_same_cubes(self):
        space, _ = generate_space("euclidean_random_points", seed=5, n=20, dim=2)
        s1 = build_system(space, seed=11)
        s2 = build_system(space, seed=11)
        assert s1.nets == s2.nets
        assert np.array_equal(s1.ancestor, s2.ancestor)

    def test_different_seed_varies(self):
        space, _ = generate_space("euclidean_random_points", seed=5, n=20, dim=2)
        s1 = build_system(space, seed=11)
        s2 = build_system(space, seed=12)
        assert s1.nets != s2.nets or not np.array_equal(s1.ancestor, s2.ancestor)


class TestBands:
    def test_band_index_values(self):
        delta = 1.0 / 96.0
        assert band_index(delta, 1.0) == -1
        assert band_index(delta, 1.0 / 96.0) == 0
        assert band_index(delta, 0.5) == -1
        assert band_index(delta, 96.0) == -2

    def test_band_edges(self):
        delta = 1.0 / 96.0
        for k in (-2, 0, 3):
            r = delta ** (k + 1)
            assert band_index(delta, r) == k
            assert band_index(delta, r * 1.0000001) == k - 1

    def test_band_rejects_nonpositive(self):
        with pytest.raises(BadParams):
            band_index(1.0 / 96.0, 0.0)


class TestCoverage:
    def test_segment_single_system(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space, num_systems=1)
        cert = fam.certificate
        assert cert.num_systems == 1
        assert cert.observed_C <= cert.C_bound
        assert cert.r_large_ok and cert.r_small_ok
        assert replay_coverage(fam.systems, cert)

    def test_tree_coverage(self, tree27):
        space, _ = tree27
        fam = build_adjacent_systems(space)
        assert fam.certificate.observed_C <= fam.certificate.C_bound
        assert replay_coverage(fam.systems, fam.certificate)

    def test_euclidean_adaptive(self):
        space, _ = generate_space("euclidean_random_points", seed=3, n=24, dim=2)
        fam = build_adjacent_systems(space, max_systems=12)
        assert 1 <= len(fam) <= 12
        assert fam.certificate.observed_C <= fam.certificate.C_bound
        assert replay_coverage(fam.systems, fam.certificate)

    def test_bound_formula(self):
        assert coverage_bound(1.0, 1.0 / 96.0) == 8.0 * 96.0**2

    def test_tampered_certificate_fails(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space, num_systems=1)
        cert = fam.certificate
        e = cert.entries[0]
        bad_entry = type(e)(x=e.x, band_k=e.band_k, lo=e.lo, hi=e.hi, t=e.t,
                            cube_k=cert.entries[-1].cube_k,
                            cube_center=cert.entries[-1].cube_center,
                            diameter=e.diameter)
        # swap in a fine singleton cube for a whole-space regime: must fail
        if bad_entry.cube_k != e.cube_k:
            bad = type(cert)(C_bound=cert.C_bound, observed_C=cert.observed_C,
                             num_systems=cert.num_systems,
                             entries=(bad_entry,) + cert.entries[1:],
                             r_large_ok=True, r_small_ok=True)
            assert not replay_coverage(fam.systems, bad)

    def test_mismatched_windows_rejected(self, segment16, tree27):
        s1 = build_system(segment16[0])
        s2 = build_system(tree27[0])
        with pytest.raises(BadParams):
            check_ball_coverage([s1, s2], strict=False)


class TestPinnedPoint:
    @pytest.mark.parametrize("x0", [0, 7, 15])
    def test_pinned_point_centers_every_generation(self, segment16, x0):
        space, _ = segment16
        sys = build_system(space, x0=x0)
        assert sys.x0 == x0
        d = space.dist
        for k in sys.generation_range():
            cube = sys.containing_cube(k, x0)
            assert cube.center == x0
            inner = set(np.flatnonzero(d[x0] < sys.c1 * sys.delta**k))
            outer = set(np.flatnonzero(d[x0] < sys.C1 * sys.delta**k))
            assert inner <= set(cube.members) <= outer

    def test_pinned_point_on_random_space(self):
        space, _ = generate_space("euclidean_random_points", seed=42, n=14, dim=2)
        sys = build_system(space, x0=9)
        for k in sys.generation_range():
            assert sys.containing_cube(k, 9).center == 9

    def test_pin_out_of_range(self, segment16):
        space, _ = segment16
        with pytest.raises(OutOfRange):
            build_system(space, x0=16)

    def test_pin_is_deterministic(self, segment16):
        space, _ = segment16
        a = build_system(space, x0=7)
        b = build_system(space, x0=7)
        assert np.array_equal(a.ancestor, b.ancestor)


class TestSeparationClause:
    @pytest.mark.parametrize("fixture", ["segment16", "tree27"])
    def test_far_points_split_next_generation(self, fixture, request):
        # points at distance >= delta^k never share a generation-(k+1) cube
        space, _ = request.getfixturevalue(fixture)
        sys = build_system(space)
        d = space.dist
        for k in range(sys.k_min, sys.k_max):
            gi = k + 1 - sys.k_min
            sep = sys.delta**k
            for x in range(space.n):
                for y in range(x + 1, space.n):
                    if d[x, y] >= sep:
                        assert sys.ancestor[gi, x] != sys.ancestor[gi, y]


class TestTruncatedWindow:
    def test_truncation_keeps_properties(self, tree27):
        space, _ = tree27
        sys = build_system(space, k_max=1)
        assert sys.k_max == 1
        assert all(r.ok for r in check_system(sys, strict=False))
        for x in range(space.n):
            leaf = sys.leaf(x)
            assert leaf.k == 1
            assert leaf.size == 3
            assert x in leaf

    def test_truncation_clamps(self, tree27):
        space, _ = tree27
        auto = build_system(space)
        assert build_system(space, k_max=99).k_max == auto.k_max
        shallow = build_system(space, k_max=-99)
        assert shallow.k_max == shallow.k_min
        assert shallow.leaf(0).size == space.n

    def test_full_window_unchanged(self, segment16):
        space, _ = segment16
        a = build_system(space)
        b = build_system(space, k_max=a.k_max)
        assert np.array_equal(a.ancestor, b.ancestor)


class TestGeneralize:
    def test_counting_has_no_point_cubes(self, segment16):
        space, mu = segment16
        gen = generalize(build_system(space), mu, mu)
        assert gen.point_cubes == ()
        assert gen.joint_atoms == tuple(range(16))
        assert all(gen.is_joint_atom(x) for x in range(16))

    def test_joint_atoms_intersect_supports(self, segment16):
        space, _ = segment16
        sigma = PointMeasure(np.where(np.arange(16) < 8, 1.0, 0.0))
        omega = PointMeasure(np.where(np.arange(16) % 2 == 0, 3.0, 0.0))
        gen = generalize(build_system(space), sigma, omega)
        assert gen.joint_atoms == (0, 2, 4, 6)
        assert not gen.is_joint_atom(1)
        assert not gen.is_joint_atom(8)

    def test_truncated_window_gains_point_cubes(self, tree27):
        space, mu = tree27
        sys = build_system(space, k_max=1)
        gen = generalize(sys, mu, mu)
        assert len(gen.point_cubes) == space.n
        for pc in gen.point_cubes:
            assert pc.k == sys.k_max + 1
            assert pc.members == (pc.center,)
            assert pc.diameter == 0.0
            assert pc.system_id == sys.system_id

    def test_point_cubes_only_at_joint_atoms(self, tree27):
        space, mu = tree27
        sys = build_system(space, k_max=1)
        omega = PointMeasure(np.where(np.arange(27) == 5, 1.0, 0.0))
        gen = generalize(sys, mu, omega)
        assert gen.joint_atoms == (5,)
        assert len(gen.point_cubes) == 1
        assert gen.point_cubes[0].members == (5,)

    def test_measure_size_mismatch(self, segment16):
        space, _ = segment16
        with pytest.raises(BadParams):
            generalize(build_system(space), PointMeasure(np.ones(4)),
                       PointMeasure(np.ones(16)))


def brute_maximal(cubes):
    best = {}
    for c in cubes:
        if c.members not in best or c.k < best[c.members].k:
            best[c.members] = c
    cands = list(best.values())
    out = [c for c in cands
           if not any(set(c.members) < set(o.members) for o in cands)]
    return sorted(out, key=lambda c: (-c.size, c.k, c.center))


class TestMaximalCubes:
    def test_empty(self):
        assert maximal_cubes([]) == ()

    def test_duplicate_sets_keep_coarsest(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        fine = sys.containing_cube(sys.k_max, 4)
        coarse = sys.containing_cube(sys.k_max - 1, 4)
        assert fine.members == coarse.members  # both singleton generations
        got = maximal_cubes([fine, coarse])
        assert got == (coarse,)

    def test_matches_brute_force(self, tree27):
        space, mu = tree27
        sys = build_system(space)
        pool = list(sys.all_cubes()) + list(generalize(
            build_system(space, k_max=1), mu, mu).point_cubes)
        rng = np.random.default_rng(17)
        for _ in range(25):
            take = rng.integers(0, len(pool), size=rng.integers(1, 18))
            coll = [pool[i] for i in take]
            got = maximal_cubes(coll)
            want = brute_maximal(coll)
            assert [(c.k, c.center, c.members) for c in got] == \
                   [(c.k, c.center, c.members) for c in want]

    def test_outputs_disjoint_and_cover_inputs(self, tree27):
        space, _ = tree27
        sys = build_system(space)
        coll = [c for c in sys.all_cubes() if c.k >= sys.k_min + 1]
        got = maximal_cubes(coll)
        seen = [set(c.members) for c in got]
        for i in range(len(seen)):
            for j in range(i + 1, len(seen)):
                assert not (seen[i] & seen[j])
        for c in coll:
            owners = [o for o in seen if set(c.members) <= o]
            assert len(owners) == 1

    def test_mixed_systems_rejected(self, segment16):
        space, _ = segment16
        s0 = build_system(space, system_id=0)
        s1 = build_system(space, system_id=1)
        with pytest.raises(MixedSystems):
            maximal_cubes([s0.top, s1.top])


class TestFindCube:
    def test_deepest_common_support(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        sigma = PointMeasure(np.where(np.arange(16) == 3, 2.0, 0.0))
        omega = PointMeasure(np.where(np.arange(16) == 12, 5.0, 0.0))
        got = find_cube_with_positive_masses(sys, sigma, omega, [12])
        want = sys.smallest_common_cube(3, 12)
        assert (got.k, got.center) == (want.k, want.center)

    def test_leaf_when_both_charge_a_point(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        got = find_cube_with_positive_masses(sys, mu, mu, [5])
        assert got.members == (5,)

    def test_unsatisfiable(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        zero = PointMeasure(np.zeros(16))
        with pytest.raises(Unsatisfiable):
            find_cube_with_positive_masses(sys, zero, mu, [5])
        with pytest.raises(Unsatisfiable):
            find_cube_with_positive_masses(sys, mu, zero, [5])
        with pytest.raises(Unsatisfiable):
            find_cube_with_positive_masses(sys, mu, mu, [])

    def test_point_out_of_range(self, segment16):
        space, mu = segment16
        sys = build_system(space)
        with pytest.raises(OutOfRange):
            find_cube_with_positive_masses(sys, mu, mu, [16])


class TestCoverBall:
    def test_tiny_radius_hits_leaf(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        t, cube = cover_ball(fam, 5, 1e-9)
        assert cube.members == (5,)

    def test_huge_radius_hits_top(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        t, cube = cover_ball(fam, 0, space.diameter + 1.0)
        assert cube.size == space.n

    def test_mid_radius_containment_and_cap(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        t, cube = cover_ball(fam, 8, 1.5)
        members = set(np.flatnonzero(space.dist[8] < 1.5))
        assert members == {7, 8, 9}
        assert members <= set(cube.members)
        C = coverage_bound(space.a0, fam[0].delta)
        assert cube.diameter <= C * 1.5

    def test_closed_ball_cover(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        t, cube = cover_ball(fam, 8, 1.0, closed=True)
        assert {7, 8, 9} <= set(cube.members)
        t, cube = cover_ball(fam, 8, 0.0, closed=True)
        assert cube.members == (8,)

    def test_bare_system_accepted(self, segment16):
        space, _ = segment16
        sys = build_system(space)
        t, cube = cover_ball(sys, 3, 0.5)
        assert t == 0 and cube.members == (3,)

    def test_bad_radius(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        with pytest.raises(NonPositiveRadius):
            cover_ball(fam, 0, 0.0)
        with pytest.raises(NonPositiveRadius):
            cover_ball(fam, 0, -1.0, closed=True)
        with pytest.raises(OutOfRange):
            cover_ball(fam, 99, 1.0)


class TestExpandingChain:
    def test_chain_properties(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        x, r = 8, 1.5
        chain = expanding_cube_chain(fam, x, r)
        assert len(chain) >= 1
        d = space.dist
        ball = set(np.flatnonzero(d[x] < r))
        assert ball <= set(chain[0][1].members)
        c0 = coverage_bound(space.a0, fam[0].delta)
        target = c0 * r
        prev_target = None
        for j, (t, cube) in enumerate(chain):
            mem = set(cube.members)
            assert float(np.max(d[x, list(mem)])) <= target
            if j > 0:
                assert set(chain[j - 1][1].members) <= mem
                assert set(np.flatnonzero(d[x] < prev_target)) <= mem
            prev_target, target = target, c0 * target
        assert chain[-1][1].size == space.n

    def test_huge_ball_single_link(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        chain = expanding_cube_chain(fam, 0, space.diameter + 1.0)
        assert len(chain) == 1
        assert chain[0][1].size == space.n

    def test_single_point_space(self):
        space, _ = generate_space("integer_segment_counting", n=1)
        fam = build_adjacent_systems(space)
        chain = expanding_cube_chain(fam, 0, 1.0)
        assert len(chain) == 1

    def test_bad_radius(self, segment16):
        space, _ = segment16
        fam = build_adjacent_systems(space)
        with pytest.raises(NonPositiveRadius):
            expanding_cube_chain(fam, 0, 0.0)
