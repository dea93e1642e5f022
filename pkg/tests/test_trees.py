import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from perturbscan.lattice import fit_tail
from perturbscan.trees import (
    BAry,
    Cut,
    ExplicitEdges,
    FlowTree,
    RandomTree,
    RayPrefix,
    RegularTreeWalker,
    SphericallySymmetric,
    TreeError,
    attach_flow,
    branching_number,
    build_tree,
    first_crossing_antichain,
    local_dimension_estimate,
    min_cut_sum,
    sample_ray,
    sample_tree_walk,
    split_rays_by_dimension,
    tree_walk_intersection,
    _log_min_cut_symmetric,
)


def enumerate_cut_sums(tree, beta):
    """Oracle: sums over every separating antichain, by recursive expansion."""
    def options(v):
        lvl = int(tree.depths[v])
        own = beta ** (-lvl)
        if lvl == tree.depth:
            return [own]
        out = [own]
        child_lists = [options(int(c)) for c in tree.children(v)]
        for combo in itertools.product(*child_lists):
            out.append(sum(combo))
        return out

    child_lists = [options(int(c)) for c in tree.children(0)]
    return [sum(c) for c in itertools.product(*child_lists)]


def small_random_tree(seed, max_nodes=20):
    for s in itertools.count(seed * 1000):
        tree = build_tree(RandomTree((0.2, 0.4, 0.3, 0.1), depth=3, seed=s))
        if tree.n_nodes <= max_nodes:
            return tree


class TestBuildTree:
    def test_bary_2_3_counts(self):
        tree = build_tree(BAry(2, 3))
        assert tree.n_nodes == 15
        assert tree.n_stubs == 8

    def test_unary_path(self):
        tree = build_tree(BAry(1, 7))
        assert tree.n_nodes == 8
        assert tree.n_stubs == 1

    def test_alternating_symmetric_level_sizes(self):
        tree = build_tree(SphericallySymmetric((1, 2), 4))
        sizes = np.diff(tree.level_offsets)
        np.testing.assert_array_equal(sizes, [1, 1, 2, 2, 4])

    def test_explicit_edges(self):
        tree = build_tree(ExplicitEdges(((0, 1), (0, 2), (1, 3), (2, 4))))
        assert tree.depth == 2
        assert tree.n_stubs == 2

    def test_explicit_childless_internal_rejected(self):
        # node 2 is internal-depth but childless
        with pytest.raises(TreeError):
            build_tree(ExplicitEdges(((0, 1), (0, 2), (1, 3))))

    def test_random_tree_reaches_depth_and_is_leafless(self):
        tree = build_tree(RandomTree((0.3, 0.4, 0.3), depth=4, seed=7))
        assert tree.depth == 4
        assert np.all(tree.child_count[: tree.level_offsets[4]] >= 1)

    def test_random_tree_deterministic(self):
        a = build_tree(RandomTree((0.3, 0.4, 0.3), depth=3, seed=11))
        b = build_tree(RandomTree((0.3, 0.4, 0.3), depth=3, seed=11))
        np.testing.assert_array_equal(a.parent, b.parent)


class TestFlows:
    def test_uniform_split_on_bary(self):
        tree = build_tree(BAry(2, 5))
        expected = 2.0 ** (-tree.depths.astype(float))
        np.testing.assert_allclose(tree.flow, expected)

    def test_max_flow_at_beta_b_is_uniform(self):
        tree = build_tree(BAry(3, 4))
        flowed = attach_flow(tree, "max-flow", beta=3.0)
        np.testing.assert_allclose(flowed.flow, 3.0 ** (-tree.depths.astype(float)))
        sup = np.max(3.0 ** tree.depths.astype(float) * flowed.flow)
        assert sup == pytest.approx(1.0)

    def test_point_flow_on_unary_path(self):
        tree = build_tree(BAry(1, 6))
        flowed = attach_flow(tree, np.ones(7))
        np.testing.assert_array_equal(flowed.flow, 1.0)

    def test_explicit_flow_violating_conservation(self):
        tree = build_tree(BAry(2, 2))
        bad = np.array([1.0, 0.5, 0.5, 0.3, 0.3, 0.25, 0.25])
        with pytest.raises(TreeError):
            attach_flow(tree, bad)

    def test_conservation_after_attach(self):
        rng = np.random.default_rng(3)
        for seed in range(10):
            tree = small_random_tree(seed)
            masses = rng.random(tree.n_stubs) + 0.01
            masses /= masses.sum()
            flow = np.zeros(tree.n_nodes)
            flow[tree.stubs] = masses
            for lvl in range(tree.depth - 1, -1, -1):
                for v in tree.level(lvl):
                    flow[v] = flow[tree.children(v)].sum()
            flowed = attach_flow(tree, flow)
            for lvl in range(tree.depth):
                for v in flowed.level(lvl):
                    kids = flowed.flow[flowed.children(v)].sum()
                    assert kids == pytest.approx(float(flowed.flow[v]), abs=1e-12)


class TestMinCutSum:
    def test_unary_path_deep_cut_wins(self):
        tree = build_tree(BAry(1, 10))
        assert min_cut_sum(tree, 2.0) == pytest.approx(2.0 ** -10)

    def test_bary2_beta1_is_two(self):
        tree = build_tree(BAry(2, 6))
        assert min_cut_sum(tree, 1.0) == pytest.approx(2.0)

    def test_bary2_beta4_level_cut(self):
        for depth in (3, 5, 7):
            tree = build_tree(BAry(2, depth))
            assert min_cut_sum(tree, 4.0) == pytest.approx(0.5 ** depth)

    def test_dp_equals_exhaustive_enumeration_exactly(self):
        for seed in range(20):
            tree = small_random_tree(seed)
            for beta in (Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(3)):
                dp = min_cut_sum(tree, beta)
                oracle = min(enumerate_cut_sums(tree, beta))
                assert dp == oracle

    def test_nonincreasing_in_beta(self):
        for seed in range(5):
            tree = small_random_tree(seed)
            vals = [min_cut_sum(tree, b) for b in (0.5, 1.0, 1.5, 2.0, 3.0, 5.0)]
            assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_beta_positive_required(self):
        tree = build_tree(BAry(2, 2))
        with pytest.raises(TreeError):
            min_cut_sum(tree, 0.0)


class TestBranchingNumber:
    @pytest.mark.parametrize("b", [2, 3, 4])
    def test_bary_recovery(self, b):
        est = branching_number(BAry(b, 25), tol=0.01)
        assert est.conclusive
        assert abs(est.estimate - b) <= 0.01

    def test_unary_path(self):
        est = branching_number(BAry(1, 25), tol=0.01)
        assert abs(est.estimate - 1.0) <= 0.01

    def test_alternating_sqrt2(self):
        est = branching_number(SphericallySymmetric((1, 2), 25), tol=0.02)
        assert abs(est.estimate - math.sqrt(2)) <= 0.02

    def test_symmetric_formula_matches_materialized_dp(self):
        for gen, depth in ((BAry(2, 6), 6), (SphericallySymmetric((1, 2), 6), 6)):
            tree = build_tree(gen)
            for beta in (1.3, 2.0, 2.7):
                lhs = math.exp(_log_min_cut_symmetric(
                    gen.level_child_counts(depth), beta))
                assert lhs == pytest.approx(min_cut_sum(tree, beta), rel=1e-10)

    def test_non_deepening_generator_rejected(self):
        with pytest.raises(TreeError):
            branching_number(ExplicitEdges(((0, 1),)), tol=0.01)


class TestCut:
    def test_level_cut_is_separating_antichain(self):
        tree = build_tree(BAry(2, 4))
        cut = Cut.level(tree, 2)
        assert len(cut) == 4
        assert cut.separating

    def test_ancestor_pair_rejected(self):
        tree = build_tree(BAry(2, 4))
        with pytest.raises(TreeError):
            Cut.validated(tree, [1, 3], require_separating=False)

    def test_incomplete_antichain_not_separating(self):
        tree = build_tree(BAry(2, 4))
        with pytest.raises(TreeError):
            Cut.validated(tree, [1])  # leaves the other half uncovered

    def test_mixed_depth_separating_cut(self):
        tree = build_tree(BAry(2, 3))
        verts = [1] + list(tree.children(2))
        cut = Cut.validated(tree, verts)
        assert cut.separating

    def test_root_excluded(self):
        tree = build_tree(BAry(2, 3))
        with pytest.raises(TreeError):
            Cut.validated(tree, [0], require_separating=False)


class TestLocalDimension:
    def test_uniform_bary_ray(self):
        for b in (2, 3):
            tree = build_tree(BAry(b, 12))
            ray = sample_ray(tree, np.random.default_rng(1))
            assert local_dimension_estimate(tree, ray) == pytest.approx(
                math.log(b), abs=1e-9)

    def test_point_flow_unary_path(self):
        tree = attach_flow(build_tree(BAry(1, 12)), np.ones(13))
        ray = sample_ray(tree, np.random.default_rng(2))
        assert local_dimension_estimate(tree, ray) == 0.0

    def test_gaussian_decay_flow_closed_form(self):
        depth = 12
        tree = build_tree(BAry(2, depth))
        flow = np.zeros(tree.n_nodes)
        flow[0] = 1.0
        spine = [0]
        for n in range(depth):
            v = spine[-1]
            left, right = tree.children(v)
            spine_mass = math.exp(-((n + 1) ** 2) / depth)
            flow[left] = spine_mass
            flow[right] = flow[v] - spine_mass
            spine.append(int(left))
        for lvl in range(depth):
            for v in tree.level(lvl):
                if v in spine[:-1]:
                    continue
                kids = tree.children(v)
                flow[kids] = flow[v] / len(kids)
        flowed = attach_flow(tree, flow)
        est = local_dimension_estimate(flowed, RayPrefix(tuple(spine), tree=flowed))
        # -log Psi(v_n)/n = n/depth is minimized at the half-depth start
        assert est == pytest.approx(math.ceil(depth / 2) / depth, abs=1e-12)

    def test_requires_depth_ten(self):
        tree = build_tree(BAry(2, 4))
        ray = sample_ray(tree, np.random.default_rng(3))
        with pytest.raises(TreeError):
            local_dimension_estimate(tree, ray)

    def test_zero_flow_gives_infinity(self):
        # all mass on one ray; follow a ray that leaves it at the last level
        t2 = build_tree(BAry(2, 12))
        f2 = np.zeros(t2.n_nodes)
        f2[0] = 1.0
        node = 0
        for lvl in range(12):
            left, right = t2.children(node)
            f2[left] = f2[node]
            f2[right] = 0.0
            sub = [int(right)]
            while sub:
                v = sub.pop()
                for c in t2.children(v):
                    f2[c] = 0.0
                    sub.append(int(c))
            node = int(left)
        flowed2 = attach_flow(t2, f2)
        dead = [0]
        v = 0
        for lvl in range(12):
            left, right = flowed2.children(v)
            nxt = int(right) if lvl == 11 else int(left)
            dead.append(nxt)
            v = nxt
        est = local_dimension_estimate(flowed2, RayPrefix(tuple(dead), tree=flowed2))
        assert est == math.inf


class TestSplitRays:
    def test_all_plus_when_h_below_band(self):
        tree = build_tree(BAry(2, 12))
        rep = split_rays_by_dimension(tree, entropy=math.log(2) - 0.2, gamma=0.05,
                                      n_rays=50, rng=np.random.default_rng(4))
        assert rep.fraction_plus == 1.0

    def test_all_minus_when_h_above_band(self):
        tree = build_tree(BAry(2, 12))
        rep = split_rays_by_dimension(tree, entropy=math.log(2) + 0.2, gamma=0.05,
                                      n_rays=50, rng=np.random.default_rng(5))
        assert rep.fraction_minus == 1.0

    def test_all_undecided_inside_band(self):
        tree = build_tree(BAry(2, 12))
        rep = split_rays_by_dimension(tree, entropy=math.log(2) + 0.01, gamma=0.05,
                                      n_rays=50, rng=np.random.default_rng(6))
        assert rep.fraction_undecided == 1.0

    def test_gamma_required_positive(self):
        tree = build_tree(BAry(2, 12))
        with pytest.raises(TreeError):
            split_rays_by_dimension(tree, 0.5, gamma=0.0, n_rays=10,
                                    rng=np.random.default_rng(7))


class TestFirstCrossing:
    def test_crossing_at_depth_one_when_band_above_logb(self):
        tree = build_tree(BAry(2, 6))
        res = first_crossing_antichain(tree, entropy=math.log(2) + 0.3, gamma=0.1, k=1)
        assert set(res.cut.vertices) == set(tree.level(1).tolist())
        assert res.dropped_stubs == 0

    def test_no_crossings_everything_dropped(self):
        tree = build_tree(BAry(2, 6))
        res = first_crossing_antichain(tree, entropy=0.1, gamma=0.05, k=1)
        assert len(res.cut) == 0
        assert res.dropped_stubs == tree.n_stubs
        assert res.dropped_mass == pytest.approx(1.0)

    def test_v1_v2_disjoint_and_deeper(self):
        tree = build_tree(BAry(2, 6))
        r1 = first_crossing_antichain(tree, math.log(2) + 0.3, 0.1, k=1)
        r2 = first_crossing_antichain(tree, math.log(2) + 0.3, 0.1, k=2)
        assert not set(r1.cut.vertices) & set(r2.cut.vertices)
        assert min(tree.depths[list(r2.cut.vertices)]) > \
            max(tree.depths[list(r1.cut.vertices)]) - 1
        assert set(r2.cut.vertices) == set(tree.level(2).tolist())


class TestSampleRay:
    def test_unary_path_unique_ray(self):
        tree = build_tree(BAry(1, 5))
        ray = sample_ray(tree, np.random.default_rng(8))
        assert ray.nodes == tuple(range(6))

    def test_marginals_match_flow(self):
        tree = build_tree(BAry(3, 3))
        n = 10**5
        rng = np.random.default_rng(9)
        counts = np.zeros(tree.n_nodes)
        for _ in range(n):
            for v in sample_ray(tree, rng).nodes[1:]:
                counts[v] += 1
        for lvl in (1, 2, 3):
            for v in tree.level(lvl):
                p = tree.flow[v]
                se = math.sqrt(p * (1 - p) / n)
                assert abs(counts[v] / n - p) < 3 * se + 1e-9

    def test_zero_flow_subtree_never_visited(self):
        tree = build_tree(BAry(2, 2))
        flow = np.array([1.0, 1.0, 0.0, 0.5, 0.5, 0.0, 0.0])
        flowed = attach_flow(tree, flow)
        rng = np.random.default_rng(10)
        for _ in range(500):
            assert 2 not in sample_ray(flowed, rng).nodes


class TestTreeWalk:
    def test_walk_with_itself(self):
        walker = RegularTreeWalker(2)
        w = walker.walk(100, np.random.default_rng(11))
        assert tree_walk_intersection(w, w) == len(w.visited)

    def test_horizon_zero_shares_root(self):
        walker = RegularTreeWalker(2)
        w1 = walker.walk(0, np.random.default_rng(12))
        w2 = walker.walk(0, np.random.default_rng(13))
        assert tree_walk_intersection(w1, w2) == 1

    def test_nonamenable_intersection_tail_decays(self):
        # b=2: two independent length-1000 walks per pair, 10^4 pairs
        walker = RegularTreeWalker(2)
        rng = np.random.default_rng(14)
        pairs = 10**4
        counts = np.empty(pairs, dtype=np.int64)
        for i in range(pairs):
            w1 = walker.walk(1000, rng)
            w2 = walker.walk(1000, rng)
            counts[i] = tree_walk_intersection(w1, w2)
        nmax = counts.max()
        tail = np.array([(counts > n).mean() for n in range(nmax + 1)])
        fit = fit_tail(tail, pairs)
        assert fit.available
        assert fit.c_hat > 0
        assert fit.r_squared > 0.9
