"""Tests for discrete p-energies, restricted energies, and level scans."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vicsek.energy as E
import vicsek.functions as F
import vicsek.geometry as G


class TestDiscreteEnergy:
    @pytest.mark.parametrize("p", [1, 2, 3])
    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_cross_energy_is_four(self, p, m):
        c = F.cross_function()
        assert E.discrete_energy(c, p, m, exact=True) == 4
        assert E.discrete_energy(c, p, m) == pytest.approx(4.0, rel=1e-13)

    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_cross_sup_energy_is_one(self, m):
        c = F.cross_function()
        assert E.discrete_energy(c, math.inf, m, exact=True) == 1
        assert E.discrete_energy(c, math.inf, m) == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [1, 2, 3.5])
    def test_distance_energy_grows_like_five_thirds(self, p):
        for m in range(4):
            d = F.distance_function(m)
            assert E.discrete_energy(d, p, m) == pytest.approx(4 * (5 / 3) ** m)

    def test_level_stability_for_pa_functions(self):
        f = F.random_pa(1, seed=3)
        base = E.discrete_energy(f, 2, 1, exact=True)
        for m in (2, 3, 4):
            assert E.discrete_energy(f, 2, m, exact=True) == base

    def test_level_below_function_rejected(self):
        f = F.random_pa(2, seed=1)
        with pytest.raises(ValueError):
            E.discrete_energy(f, 2, 1)

    def test_exact_needs_integer_power(self):
        with pytest.raises(ValueError):
            E.discrete_energy(F.cross_function(), 2.5, exact=True)

    def test_power_below_one_rejected(self):
        with pytest.raises(ValueError):
            E.discrete_energy(F.cross_function(), 0.5)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_gradient_route_matches_cell_route(self, seed):
        f = F.random_pa(1, seed=seed)
        g = F.weak_gradient(f)
        for p in (1, 2, 3.5):
            assert E.gradient_norm(g, p) == pytest.approx(
                E.discrete_energy(f, p), rel=1e-12
            )


class TestCellEnergies:
    def test_cross_level_one_split(self):
        ce = np.sort(E.cell_energies(F.cross_function(), 2, 1))
        assert np.allclose(ce, [2 / 3] * 4 + [4 / 3])

    def test_cells_sum_to_total(self):
        f = F.random_pa(1, seed=7)
        ce = E.cell_energies(f, 3, 2)
        assert ce.sum() == pytest.approx(E.discrete_energy(f, 3, 2), rel=1e-12)

    def test_sup_energy_has_no_cell_split(self):
        with pytest.raises(ValueError):
            E.cell_energies(F.cross_function(), math.inf, 1)


class TestRegions:
    def test_ball_mask_matches_exact_distances(self):
        g = G.build_graph(2)
        region = E.Region.ball(G.CENTER, Fraction(1, 3))
        mask = region.vertex_mask(g)
        for i in range(g.n_vertices):
            want = G.distance(g.point(i), G.CENTER) <= Fraction(1, 3)
            assert bool(mask[i]) == want

    def test_cell_mask_counts(self):
        g = G.build_graph(2)
        mask = E.Region.cell((5,)).vertex_mask(g)
        # Five subcells of five key points each, the four arm subcells each
        # sharing one corner with the central one: 25 - 4.
        assert int(mask.sum()) == 21

    def test_whole_region(self):
        g = G.build_graph(1)
        assert E.Region.whole().vertex_mask(g).all()
        assert np.all(E.Region.whole().edge_overlap_units(g) == 1.0)

    def test_ball_overlap_is_partial(self):
        g = G.build_graph(1)
        region = E.Region.ball(G.CENTER, Fraction(1, 2))
        w = region.edge_overlap_units(g)
        units = G.bfs_distance_units(g, g.index_of(G.CENTER))
        near = np.minimum(units[g.edges_lo], units[g.edges_hi])
        assert np.allclose(w[near == 0], 1.0)
        assert np.allclose(w[near == 1], 0.5)
        assert np.allclose(w[near >= 2], 0.0)

    def test_center_must_be_a_vertex(self):
        g = G.build_graph(1)
        off_fractal = G.LatticePoint.make(1, 0, 0)  # midpoint of the bottom side
        region = E.Region.ball(off_fractal, Fraction(1, 3))
        with pytest.raises(ValueError, match="vertex"):
            region.vertex_mask(g)

    def test_under_resolved_region_rejected(self):
        g = G.build_graph(1)
        with pytest.raises(ValueError, match="resolve"):
            E.Region.cell((2, 1)).vertex_mask(g)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            E.Region.ball(G.CENTER, -1)

    def test_describe(self):
        assert E.Region.whole().describe() == "whole"
        assert E.Region.cell((2, 1)).describe() == "cell(21)"
        assert "r=0.5" in E.Region.ball(G.CENTER, Fraction(1, 2)).describe()

    def test_resolution(self):
        assert E.Region.whole().resolution == 0
        assert E.Region.cell((1, 2, 3)).resolution == 3
        deep_center = G.cell_map((2, 2)).key_points()[4]
        assert E.Region.ball(deep_center, 1).resolution == 2


class TestRestrictedEnergy:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_cross_on_central_cell(self, m):
        c = F.cross_function()
        region = E.Region.cell((5,))
        assert E.discrete_energy_restricted(c, 2, m, region) == pytest.approx(4 / 3)

    def test_cross_on_central_ball(self):
        c = F.cross_function()
        region = E.Region.ball(G.CENTER, Fraction(1, 3))
        assert E.discrete_energy_restricted(c, 2, 0, region) == 0.0
        for m in (1, 2, 3):
            got = E.discrete_energy_restricted(c, 2, m, region)
            assert got == pytest.approx(4 / 3, rel=1e-13)

    def test_whole_region_matches_unrestricted(self):
        f = F.random_pa(1, seed=5)
        assert E.discrete_energy_restricted(f, 2, 3) == pytest.approx(
            E.discrete_energy(f, 2, 3), rel=1e-13
        )

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 3))
    def test_ball_restriction_nondecreasing_in_level(self, seed, num, k):
        f = F.random_pa(1, seed=seed)
        region = E.Region.ball(G.CENTER, Fraction(num, 3**k))
        vals = [E.discrete_energy_restricted(f, 2, m, region) for m in (1, 2, 3)]
        assert vals[0] <= vals[1] + 1e-12
        assert vals[1] <= vals[2] + 1e-12

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 4))
    def test_corner_ball_restriction_nondecreasing(self, seed, num):
        f = F.random_pa(1, seed=seed)
        region = E.Region.ball(G.LatticePoint.key_point(2), Fraction(num, 3))
        vals = [E.discrete_energy_restricted(f, 2, m, region) for m in (1, 2, 3)]
        assert vals[0] <= vals[1] + 1e-12
        assert vals[1] <= vals[2] + 1e-12

    def test_under_resolving_level_rejected(self):
        c = F.cross_function()
        with pytest.raises(ValueError):
            E.discrete_energy_restricted(c, 2, 1, E.Region.cell((2, 1)))


class TestEnergyInfty:
    def test_whole_space(self):
        assert E.energy_infty(F.cross_function(), 2) == pytest.approx(1.0)

    def test_constant_on_hanging_subtree(self):
        region = E.Region.cell((2, 1))
        assert E.energy_infty(F.cross_function(), 2, region) == 0.0
        assert E.energy_infty(F.cross_function(), 4, region) == 0.0

    def test_on_central_ball(self):
        region = E.Region.ball(G.CENTER, Fraction(1, 3))
        assert E.energy_infty(F.cross_function(), 2, region) == pytest.approx(1.0)


class TestEnergyLimit:
    def test_whole_space_cross(self):
        assert E.energy_limit(F.cross_function(), 2) == pytest.approx(4.0)
        assert E.energy_limit(F.cross_function(), math.inf) == pytest.approx(1.0)

    def test_central_cell_cross(self):
        got = E.energy_limit(F.cross_function(), 2, E.Region.cell((5,)))
        assert got == pytest.approx(4 / 3, rel=1e-13)

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 5])
    def test_central_ball_gradient_integral(self, n):
        # The restricted-gradient integral over B(center, 3^-n) is 4 * 3^-n.
        region = E.Region.ball(G.CENTER, Fraction(1, 3**n))
        got = E.energy_limit(F.cross_function(), 2, region)
        assert got == pytest.approx(4 * 3.0 ** (-n), rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_ball_limit_is_level_independent(self, n):
        region = E.Region.ball(G.CENTER, Fraction(1, 3**n))
        c = F.cross_function()
        vals = [
            E.gradient_norm(F.weak_gradient(c.refine(m)), 2, region)
            for m in (n, n + 1, n + 2)
        ]
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)
        assert vals[1] == pytest.approx(vals[2], rel=1e-12)

    @pytest.mark.parametrize("p", [1, 1.5, 2, 3, 7])
    def test_limit_matches_gradient_norm(self, p):
        f = F.random_pa(1, seed=23)
        got = E.energy_limit(f, p)
        want = E.gradient_norm(F.weak_gradient(f), p)
        assert got == pytest.approx(want, rel=1e-12)

    def test_restriction_halves_at_half_radius(self):
        # For the cross both radii stay inside the unit-slope arms, so the
        # gradient integral scales linearly in r.
        c = F.cross_function()
        a = E.energy_limit(c, 2, E.Region.ball(G.CENTER, Fraction(1, 2)))
        b = E.energy_limit(c, 2, E.Region.ball(G.CENTER, Fraction(1, 4)))
        assert a == pytest.approx(2.0, rel=1e-12)
        assert b == pytest.approx(1.0, rel=1e-12)


class TestSelfSimilarity:
    def test_cross_exact(self):
        lhs, rhs, gap = E.self_similarity_check(F.cross_function(), 2, exact=True)
        assert lhs == rhs == 4
        assert gap == 0.0

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_random_exact(self, p):
        f = F.random_pa(1, seed=31)
        lhs, rhs, gap = E.self_similarity_check(f, p, exact=True)
        assert lhs == rhs
        assert gap == 0.0

    def test_non_integer_power(self):
        f = F.random_pa(0, seed=37)
        lhs, rhs, gap = E.self_similarity_check(f, 2.7)
        assert gap <= 1e-12

    def test_sup_power_rejected(self):
        with pytest.raises(ValueError):
            E.self_similarity_check(F.cross_function(), math.inf)


class TestEnergyScans:
    def test_cantor_square_energy_diverges(self):
        fam = F.CantorEdgeFunction().as_pa
        scan = E.energy_sup_scan(fam, p=2, levels=range(7))
        assert scan.divergent
        assert scan.growth == pytest.approx(1.5, abs=1e-9)
        for m, v in zip(scan.levels, scan.values):
            assert v == pytest.approx(1.5**m, rel=1e-12)

    def test_cantor_linear_energy_is_constant(self):
        fam = F.CantorEdgeFunction().as_pa
        scan = E.energy_sup_scan(fam, p=1, levels=range(7))
        assert not scan.divergent
        assert scan.growth == 1.0
        assert scan.ratio == pytest.approx(1.0)
        assert all(v == pytest.approx(1.0) for v in scan.values)

    def test_distance_family_diverges(self):
        scan = E.energy_sup_scan(F.distance_function, p=2, levels=range(6))
        assert scan.divergent
        assert scan.growth == pytest.approx(5 / 3, abs=1e-9)

    def test_pa_function_scan_is_constant(self):
        scan = E.energy_sup_scan(F.cross_function(), p=2)
        assert not scan.divergent
        assert all(v == pytest.approx(4.0) for v in scan.values)

    def test_divergence_ratio_knob(self):
        scan = E.energy_sup_scan(
            F.distance_function, p=2, levels=range(6), divergence_ratio=1e6
        )
        assert not scan.divergent
        assert scan.growth == 1.0

    def test_empty_levels_rejected(self):
        with pytest.raises(ValueError):
            E.energy_sup_scan(F.cross_function(), levels=())

    def test_levels_below_function_rejected(self):
        f = F.random_pa(2, seed=2)
        with pytest.raises(ValueError):
            E.energy_sup_scan(f, levels=range(0, 3))


class TestStreamEnergy:
    @pytest.mark.parametrize("p", [1, 2, math.inf])
    def test_matches_direct(self, p):
        f = F.random_pa(1, seed=41)
        for m in (3, 4, 5):
            assert E.stream_energy(f, p, m) == pytest.approx(
                E.discrete_energy(f, p, m), rel=1e-12
            )

    def test_worker_counts_agree_exactly(self):
        f = F.random_pa(1, seed=43)
        solo = E.stream_energy(f, 2, 5, workers=1)
        duo = E.stream_energy(f, 2, 5, workers=2)
        assert solo == duo

    def test_block_level_choice_is_rounding_only(self):
        f = F.random_pa(0, seed=47)
        a = E.stream_energy(f, 2, 6, block_level=2)
        b = E.stream_energy(f, 2, 6, block_level=4)
        assert a == pytest.approx(b, rel=1e-12)

    def test_cross_deep_level(self):
        assert E.stream_energy(F.cross_function(), 2, 8) == pytest.approx(
            4.0, rel=1e-10
        )

    def test_level_below_function_rejected(self):
        f = F.random_pa(3, seed=53)
        with pytest.raises(ValueError):
            E.stream_energy(f, 2, 2)
