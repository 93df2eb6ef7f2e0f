"""Reverse-reachable estimation against trivial cases and the exact oracle."""

import numpy as np
import pytest

from neighborseed.estimator import (
    RRIndex,
    build_rr_index,
    default_theta,
    estimate_alloc_influence,
    estimate_influence,
    filter_for_residual,
    pair_coefficients,
    rebuild_for_residual,
)
from neighborseed.graph import Graph, preferential_attachment
from neighborseed.oracle import ExactInstance
from neighborseed.rng import spawn
from neighborseed.seeding import DiscountAllocation, LINEAR, QUADRATIC_FAST


def linear_profiles(n):
    return {u: LINEAR for u in range(n)}


class TestBuildIndex:
    def test_isolated_nodes_singletons(self):
        g = Graph(2, [], [], [])
        idx = build_rr_index(g, 1000, spawn(0, "rr"))
        assert idx.theta == 1000
        assert all(idx.offsets[h + 1] - idx.offsets[h] == 1 for h in range(1000))

    def test_sure_edge_sets(self):
        g = Graph(2, [0], [1], [1.0])
        idx = build_rr_index(g, 1000, spawn(1, "rr"))
        for h in range(idx.theta):
            members = set(int(v) for v in idx.set_members(h))
            root = int(idx.roots[h])
            assert members == ({0, 1} if root == 1 else {0})

    def test_deterministic_rebuild(self):
        g = preferential_attachment(100, 2, spawn(2, "g"))
        a = build_rr_index(g, 500, spawn(3, "rr"))
        b = build_rr_index(g, 500, spawn(3, "rr"))
        np.testing.assert_array_equal(a.members, b.members)
        np.testing.assert_array_equal(a.offsets, b.offsets)

    def test_theta_validated(self):
        with pytest.raises(ValueError):
            build_rr_index(Graph(1, [], [], []), 0, spawn(0, "x"))

    def test_default_theta_floor(self):
        assert default_theta(5) == 10_000
        assert default_theta(10_000) == int(20 * 10_000 * np.log(10_000))


class TestEstimateInfluence:
    def test_empty_and_full(self):
        g = preferential_attachment(50, 2, spawn(4, "g"))
        idx = build_rr_index(g, 2000, spawn(5, "rr"))
        assert estimate_influence(idx, set()) == 0.0
        assert estimate_influence(idx, range(50)) == 50.0

    def test_sure_edge_value(self):
        g = Graph(2, [0], [1], [1.0])
        idx = build_rr_index(g, 10_000, spawn(6, "rr"))
        assert abs(estimate_influence(idx, {0}) - 2.0) < 0.05

    def test_monotone_submodular_coverage(self):
        g = preferential_attachment(60, 2, spawn(7, "g"))
        idx = build_rr_index(g, 3000, spawn(8, "rr"))
        rng = spawn(9, "sets")
        for _ in range(30):
            a = {int(u) for u in rng.choice(60, size=3, replace=False)}
            b = a | {int(u) for u in rng.choice(60, size=3, replace=False)}
            x = int(rng.integers(60))
            fa, fb = estimate_influence(idx, a), estimate_influence(idx, b)
            fax = estimate_influence(idx, a | {x})
            fbx = estimate_influence(idx, b | {x})
            assert fa <= fb + 1e-12
            assert fax - fa >= fbx - fb - 1e-12


class TestEstimateAllocInfluence:
    def test_isolated_closed_form(self):
        g = Graph(2, [], [], [])
        idx = build_rr_index(g, 5000, spawn(10, "rr"))
        profiles = linear_profiles(2)
        for c in (0.0, 0.3, 0.8, 1.0):
            alloc = DiscountAllocation({0: c, 1: c}, 2.0)
            assert abs(estimate_alloc_influence(idx, alloc, profiles) - 2 * c) < 1e-12

    def test_all_ones_equals_seed_estimate(self):
        g = preferential_attachment(40, 2, spawn(11, "g"))
        idx = build_rr_index(g, 3000, spawn(12, "rr"))
        users = [0, 5, 9]
        alloc = DiscountAllocation({u: 1.0 for u in users}, 3.0)
        a = estimate_alloc_influence(idx, alloc, linear_profiles(40))
        b = estimate_influence(idx, users)
        assert abs(a - b) < 1e-9

    def test_coordinatewise_monotone(self):
        g = preferential_attachment(40, 2, spawn(13, "g"))
        idx = build_rr_index(g, 2000, spawn(14, "rr"))
        profiles = {u: QUADRATIC_FAST for u in range(40)}
        rng = spawn(15, "alloc")
        for _ in range(25):
            users = sorted(int(u) for u in rng.choice(40, size=5, replace=False))
            cs = {u: float(rng.random() * 0.8) for u in users}
            alloc = DiscountAllocation(cs, 5.0)
            u = users[int(rng.integers(5))]
            raised = dict(cs)
            raised[u] = min(1.0, cs[u] + float(rng.random() * 0.2))
            alloc2 = DiscountAllocation(raised, 5.0)
            assert estimate_alloc_influence(idx, alloc2, profiles) >= \
                estimate_alloc_influence(idx, alloc, profiles) - 1e-12

    def test_close_to_exact_on_small_graphs(self):
        rng = spawn(16, "exact")
        g = Graph(5, [0, 0, 1, 3], [1, 2, 4, 4], [0.5, 0.3, 1.0, 0.5])
        inst = ExactInstance(g, linear_profiles(5))
        idx = build_rr_index(g, 50_000, spawn(17, "rr"))
        for _ in range(5):
            users = sorted(int(u) for u in rng.choice(5, size=3, replace=False))
            alloc = DiscountAllocation({u: float(rng.random()) for u in users}, 3.0)
            est = estimate_alloc_influence(idx, alloc, inst.profiles)
            exact = inst.exact_q(alloc)
            assert abs(est - exact) / max(1.0, exact) < 0.05


class TestPairCoefficients:
    def test_absent_users_zero_terms(self):
        g = Graph(4, [0], [1], [1.0])
        idx = build_rr_index(g, 2000, spawn(18, "rr"))
        alloc = DiscountAllocation({2: 0.4, 3: 0.2}, 1.0)
        # nodes 2, 3 are isolated: they appear only in their own root sets
        # pick users that never co-occur: still fine; but test the u,v absent case
        g2 = Graph(4, [0], [1], [1.0])
        idx2 = RRIndex(idx.offsets, idx.members, idx.roots, idx.n, idx.id_space)
        pc = pair_coefficients(idx2, alloc, linear_profiles(4), 2, 3)
        # isolated users cover exactly their own singleton sets
        assert pc.auv == 0.0

    def test_identical_users_rejected(self):
        g = Graph(2, [], [], [])
        idx = build_rr_index(g, 100, spawn(19, "rr"))
        with pytest.raises(ValueError):
            pair_coefficients(idx, DiscountAllocation({}, 0.0), {}, 1, 1)

    def test_reconstruction_identity_randomized(self):
        rng = spawn(20, "recon")
        g = preferential_attachment(30, 2, rng)
        idx = build_rr_index(g, 5000, spawn(21, "rr"))
        profiles = {u: QUADRATIC_FAST for u in range(30)}
        for _ in range(20):
            users = sorted(int(u) for u in rng.choice(30, size=6, replace=False))
            cs = {u: float(rng.random()) for u in users}
            alloc = DiscountAllocation(cs, 6.0)
            u, v = users[0], users[1]
            pc = pair_coefficients(idx, alloc, profiles, u, v)
            got = pc.value(profiles[u](cs[u]), profiles[v](cs[v]))
            want = estimate_alloc_influence(idx, alloc, profiles)
            assert abs(got - want) < 1e-9
            # and at a different pair of discounts
            c2u, c2v = float(rng.random()), float(rng.random())
            trial = dict(cs)
            trial[u], trial[v] = c2u, c2v
            got2 = pc.value(profiles[u](c2u), profiles[v](c2v))
            want2 = estimate_alloc_influence(idx, DiscountAllocation(trial, 6.0), profiles)
            assert abs(got2 - want2) < 1e-9


class TestResidualIndex:
    def test_empty_influenced_same_distribution(self):
        g = preferential_attachment(50, 2, spawn(22, "g"))
        a = rebuild_for_residual(g, set(), 2000, spawn(23, "rr"))
        b = build_rr_index(g, 2000, spawn(23, "rr"))
        np.testing.assert_array_equal(a.members, b.members)

    def test_all_influenced_zero(self):
        g = preferential_attachment(20, 2, spawn(24, "g"))
        idx = rebuild_for_residual(g, set(range(20)), 500, spawn(25, "rr"))
        assert idx.n == 0
        assert estimate_influence(idx, {0}) == 0.0

    def test_path_residual_isolates(self):
        g = Graph(3, [0, 1], [1, 2], [1.0, 1.0])
        idx = rebuild_for_residual(g, {1}, 4000, spawn(26, "rr"))
        # residual nodes {0, 2} are isolated; sets rooted at 0 are binomial
        sigma = 2 * np.sqrt(0.25 / 4000)
        assert abs(estimate_influence(idx, {0}) - 1.0) < 3 * sigma
        assert idx.n == 2

    def test_parent_ids_preserved(self):
        g = Graph(4, [0, 1, 2], [1, 2, 3], [1.0, 1.0, 1.0])
        idx = rebuild_for_residual(g, {0}, 2000, spawn(27, "rr"))
        assert set(np.unique(idx.members)) <= {1, 2, 3}

    def test_filter_mode_drops_influenced_roots(self):
        g = preferential_attachment(30, 2, spawn(28, "g"))
        idx = build_rr_index(g, 1000, spawn(29, "rr"))
        infl = {0, 1, 2}
        filt = filter_for_residual(idx, infl)
        assert all(int(r) not in infl for r in filt.roots)
        assert filt.n == idx.n - 3


class TestBinaryCache:
    def test_round_trip(self, tmp_path):
        g = preferential_attachment(40, 2, spawn(30, "g"))
        idx = build_rr_index(g, 300, spawn(31, "rr"))
        path = tmp_path / "cache.rr"
        idx.save(path)
        again = RRIndex.load(path)
        np.testing.assert_array_equal(idx.offsets, again.offsets)
        np.testing.assert_array_equal(idx.members, again.members)
        np.testing.assert_array_equal(idx.roots, again.roots)
        assert (idx.n, idx.theta, idx.id_space, idx.seed_info) == \
            (again.n, again.theta, again.id_space, again.seed_info)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.rr"
        path.write_bytes(b"NOPE" + b"\0" * 60)
        with pytest.raises(ValueError, match="magic"):
            RRIndex.load(path)
