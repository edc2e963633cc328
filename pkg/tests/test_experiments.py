"""Tests for the inequality-verification experiments."""

import math
from fractions import Fraction

import numpy as np
import pytest

import vicsek.experiments as exps
from vicsek.energy import Region, energy_limit
from vicsek.experiments import (
    FitResult,
    fit_loglog,
    gradient_scaling_fit,
    hajlasz_divergence,
    interpolant_sup_errors,
    k_functional_scan,
    maximal_function,
    morrey_check,
    phi_n,
    poincare_check,
    run_all,
    sharpness_fit,
)
from vicsek.functions import (
    CellFunction,
    PAFunction,
    anchor_cell_function,
    cross_function,
    distance_function,
    mu_integral,
    random_pa,
    weak_gradient,
)
from vicsek.geometry import (
    CENTER,
    DIM_H,
    alpha_p,
    bfs_distance_units,
    build_graph,
    cell_map,
)

CROSS = cross_function()
CONST = PAFunction.from_key_values([3, 3, 3, 3], 3)


# ---------------------------------------------------------------------------
# Power-law fits
# ---------------------------------------------------------------------------


class TestFitLoglog:
    def test_recovers_exact_power_law(self):
        pts = [(3.0**-n, 7.5 * 3.0 ** (-2.25 * n)) for n in range(1, 6)]
        fit = fit_loglog(pts)
        assert fit.exponent == pytest.approx(2.25, abs=1e-12)
        assert fit.constant == pytest.approx(7.5, rel=1e-12)
        assert fit.residual < 1e-12

    def test_residual_is_max_log_deviation(self):
        pts = [(1.0, 1.0), (0.5, 0.5), (0.25, 0.25), (0.125, 0.25)]
        fit = fit_loglog(pts)
        resid = max(
            abs(math.log(v) - (fit.exponent * math.log(s) + math.log(fit.constant)))
            for s, v in pts
        )
        assert fit.residual == pytest.approx(resid, rel=1e-12)

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_loglog([(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)])
        with pytest.raises(ValueError):
            FitResult(1.0, 1.0, 0.0, ((1, 1), (2, 2), (3, 3)))

    def test_rejects_nonpositive_samples(self):
        with pytest.raises(ValueError):
            fit_loglog([(1.0, 1.0), (0.5, 0.0), (0.25, 0.25), (0.125, 0.1)])
        with pytest.raises(ValueError):
            fit_loglog([(-1.0, 1.0), (0.5, 0.5), (0.25, 0.25), (0.125, 0.1)])


# ---------------------------------------------------------------------------
# Morrey estimate
# ---------------------------------------------------------------------------


class TestMorrey:
    def test_cross_corner_pair_is_half(self):
        q = cell_map(()).key_points()
        rep = morrey_check(CROSS, p=2, pairs=[(q[0], q[1])])
        assert rep.max_ratio == pytest.approx(0.5, abs=1e-12)
        assert rep.energy == pytest.approx(4.0, abs=1e-12)

    def test_coincident_pair_contributes_zero(self):
        q = cell_map(()).key_points()
        rep = morrey_check(CROSS, p=2, pairs=[(q[0], q[0])])
        assert rep.max_ratio == 0.0

    def test_constant_function_gives_zero(self):
        rep = morrey_check(CONST, p=2, n_pairs=50, seed=1)
        assert rep.max_ratio == 0.0

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    def test_random_functions_respect_the_bound(self, p):
        for s in range(5):
            f = random_pa(1 + s % 3, seed=40 + s)
            rep = morrey_check(f, p=p, n_pairs=300, seed=s)
            assert rep.max_ratio <= 1.0 + 1e-12

    def test_ball_region_restricts_pairs_and_energy(self):
        region = Region.ball(CENTER, Fraction(1, 3))
        rep = morrey_check(CROSS, region=region, p=2, n_pairs=200, seed=3)
        assert rep.energy == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert rep.max_ratio <= 1.0 + 1e-12
        assert rep.n_pairs == 200

    def test_report_float_conversion(self):
        rep = morrey_check(CROSS, p=2, n_pairs=10, seed=0)
        assert float(rep) == rep.max_ratio


# ---------------------------------------------------------------------------
# Poincare inequality
# ---------------------------------------------------------------------------


class TestPoincare:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_central_ball_scaled_ratio(self, n):
        rep = poincare_check(CROSS, Region.ball(CENTER, Fraction(1, 3**n)), p=2)
        assert rep.scaled_ratio == pytest.approx(2.0 / 21.0, abs=1e-12)
        assert rep.ok

    def test_central_ball_matches_cell_region(self):
        ball = poincare_check(CROSS, Region.ball(CENTER, Fraction(1, 9)), p=2)
        cell = poincare_check(CROSS, Region.cell((5, 5)), p=2)
        assert ball.lhs == pytest.approx(cell.lhs, rel=1e-12)
        assert ball.energy == pytest.approx(cell.energy, rel=1e-12)

    def test_whole_space_inequality(self):
        rep = poincare_check(CROSS, Region.whole(), p=2)
        est = mu_integral(CROSS, 2)
        assert rep.lhs == pytest.approx(est.value, abs=1e-12)  # mean is zero
        assert rep.ratio <= 1.0
        assert rep.ok

    def test_constant_function(self):
        rep = poincare_check(CONST, Region.cell((1,)), p=2)
        assert rep.lhs == pytest.approx(0.0, abs=1e-15)
        assert rep.ratio == 0.0
        assert rep.ok

    @pytest.mark.parametrize("n", [1, 2])
    def test_quadrature_path_brackets_exact_value(self, monkeypatch, n):
        # defeat the central-cell shortcut so the same ball goes through the
        # general certified quadrature; the bracket must cover the exact value
        monkeypatch.setattr(exps, "_central_word", lambda region: None)
        rep = poincare_check(CROSS, Region.ball(CENTER, Fraction(1, 3**n)), p=2)
        target = 3.0 ** (-2 * n) * (8.0 / 21.0)  # ball average of |f - 0|^2
        assert abs(rep.lhs - target) <= rep.lhs_error + 1e-15
        assert rep.ok

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_quadrature_path_other_powers(self, monkeypatch, p):
        monkeypatch.setattr(exps, "_central_word", lambda region: None)
        region = Region.ball(CENTER, Fraction(1, 3))
        rep = poincare_check(CROSS, region, p=p)
        pb = CROSS.pullback((5,))
        exact = mu_integral(pb - pb.mean_exact(), p).value
        assert abs(rep.lhs - exact) <= rep.lhs_error + 1e-12
        assert rep.ok

    def test_random_vertex_balls_satisfy_inequality(self):
        g = build_graph(2)
        rng = np.random.default_rng(7)
        for s in range(8):
            f = random_pa(1 + s % 2, seed=70 + s)
            center = g.point(int(rng.integers(0, g.n_vertices)))
            k = int(rng.integers(1, 3))
            rep = poincare_check(f, Region.ball(center, Fraction(1, 3**k)), p=2)
            assert rep.ok

    def test_rejects_non_triadic_radius(self):
        with pytest.raises(ValueError):
            poincare_check(CROSS, Region.ball(CENTER, Fraction(1, 7)), p=2)


# ---------------------------------------------------------------------------
# Sharpness fit
# ---------------------------------------------------------------------------


class TestSharpness:
    def test_exponent_p2(self):
        fit = sharpness_fit(p=2)
        assert fit.exponent == pytest.approx(2 + DIM_H, abs=1e-9)
        assert fit.residual <= 1e-9
        assert fit.constant == pytest.approx(8.0 / 21.0, rel=1e-9)

    def test_exponent_p1(self):
        fit = sharpness_fit(p=1)
        assert fit.exponent == pytest.approx(1 + DIM_H, abs=1e-9)
        assert fit.constant == pytest.approx(4.0 / 7.0, rel=1e-9)

    def test_numeric_targets(self):
        assert sharpness_fit(p=2).exponent == pytest.approx(3.4650, abs=1e-4)
        assert sharpness_fit(p=1).exponent == pytest.approx(2.4650, abs=1e-4)


# ---------------------------------------------------------------------------
# Maximal function
# ---------------------------------------------------------------------------


class TestMaximalFunction:
    def test_constant_gives_zeros(self):
        rep = maximal_function(CONST, p=2, m=3)
        assert np.all(rep.g_values == 0.0)
        assert rep.strong_norm == 0.0
        assert rep.weak_norm == 0.0

    def test_matches_direct_ball_energies(self):
        # brute force: for each anchor, scan balls via BFS distances
        m = 3
        rep = maximal_function(CROSS, p=2, m=m, lusin_pairs=0)
        g = build_graph(m)
        dens = np.abs(weak_gradient(CROSS.refine(m)).values) ** 2 * 3.0**-m
        from vicsek.geometry import anchor_vertex_ids, ball_volume

        ids = anchor_vertex_ids(g)
        for idx in [0, 17, 62, 100, 124]:
            units = bfs_distance_units(g, int(ids[idx]))
            nearest = np.minimum(units[g.edges_lo], units[g.edges_hi])
            best = 0.0
            x = g.point(int(ids[idx]))
            for j in range(m):
                r = Fraction(1, 3**j)
                u = int(r * 3**m)
                mass = float(dens[nearest <= u - 1].sum())
                vol = float(ball_volume(x, r))
                best = max(best, mass / vol)
            assert rep.g_values[idx] == pytest.approx(math.sqrt(best), rel=1e-9)

    def test_chebyshev_weak_below_strong(self):
        for f in (CROSS, random_pa(2, seed=5), distance_function(1)):
            rep = maximal_function(f, p=2, m=4, lusin_pairs=0)
            assert rep.weak_norm <= rep.strong_norm + 1e-12

    def test_explicit_anchor_matches_full_scan(self):
        m = 3
        full = maximal_function(CROSS, p=2, m=m, lusin_pairs=0)
        g = build_graph(m)
        from vicsek.geometry import anchor_vertex_ids

        ids = anchor_vertex_ids(g)
        pts = [g.point(int(ids[i])) for i in (3, 44, 120)]
        part = maximal_function(CROSS, anchors=pts, p=2, m=m, lusin_pairs=0)
        assert part.g_values == pytest.approx(full.g_values[[3, 44, 120]], rel=1e-12)
        assert part.anchor_points == tuple(pts)

    def test_lusin_holder_constant_reported(self):
        rep = maximal_function(CROSS, p=2, m=4, lusin_pairs=256, seed=2)
        assert rep.lusin_constant is not None
        assert 0 < rep.lusin_constant < 10

    def test_rejects_coarse_resolution(self):
        with pytest.raises(ValueError):
            maximal_function(random_pa(2, seed=0), p=2, m=1)

    def test_rejects_non_triadic_radius(self):
        with pytest.raises(ValueError):
            maximal_function(CROSS, p=2, m=3, r_grid=[Fraction(1, 7)])

    def test_rejects_cell_function(self):
        cf = anchor_cell_function(CROSS, 2)
        with pytest.raises(TypeError):
            maximal_function(cf, p=2, m=3)


class TestGradientScaling:
    def test_branch_decay_exponent(self):
        fit = gradient_scaling_fit(p=2, k_range=range(2, 6))
        target = (1 - DIM_H) / 2
        assert abs(fit.exponent - target) <= 0.15

    def test_asymptotic_ratio(self):
        fit = gradient_scaling_fit(p=2, k_range=range(3, 7))
        vals = [v for _, v in fit.points]
        for a, b in zip(vals[:-1], vals[1:]):
            assert b / a == pytest.approx(math.sqrt(5.0 / 3.0), rel=0.02)


class TestHajlasz:
    def test_cross_strong_norm_diverges(self):
        rep = hajlasz_divergence(CROSS, p=2, m_range=range(3, 7))
        inc = rep.increments
        assert all(v > 0 for v in inc)
        assert all(b >= 0.4 * a for a, b in zip(inc[:-1], inc[1:]))
        assert rep.weak_band <= 4.0

    def test_constant_gives_zeros(self):
        rep = hajlasz_divergence(CONST, p=2, m_range=range(3, 5))
        assert rep.strong == (0.0, 0.0)
        assert rep.weak == (0.0, 0.0)

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError):
            hajlasz_divergence(CROSS, p=2, m_range=())


# ---------------------------------------------------------------------------
# Averaging interpolants
# ---------------------------------------------------------------------------


class TestInterpolant:
    def test_partition_of_unity_is_exact(self):
        one = PAFunction.from_key_values([1, 1, 1, 1], 1)
        part = phi_n(one, 2)
        assert part.is_exact()
        g = build_graph(4)
        rng = np.random.default_rng(11)
        for i in rng.integers(0, g.n_vertices, size=200):
            assert part.evaluate_exact(g.point(int(i))) == 1

    def test_constant_float_path(self):
        const = PAFunction.from_vertex_values(0, [2.5] * 5)
        out = phi_n(const, 1)
        assert out.values == pytest.approx(np.full(out.values.shape, 2.5), abs=1e-14)

    def test_cross_level2_sup_bound(self):
        p2 = phi_n(CROSS, 2)
        sup = float(np.abs((CROSS - p2).cell_values(2)).max())
        assert sup <= 2 * 3.0**-2 + 1e-12

    def test_exact_and_float_paths_agree(self):
        f = distance_function(1)
        a = phi_n(f, 1, exact=True)
        b = phi_n(f, 1, exact=False)
        assert a.values == pytest.approx(b.values, abs=1e-13)

    def test_cell_function_input(self):
        cf = anchor_cell_function(CROSS, 4)
        out = phi_n(cf, 1)
        ref = phi_n(CROSS, 1)
        # anchor sampling induces a small perturbation, not a blow-up
        assert out.values == pytest.approx(ref.values, abs=0.2)

    def test_cell_function_needs_two_extra_levels(self):
        cf = anchor_cell_function(CROSS, 2)
        with pytest.raises(ValueError):
            phi_n(cf, 1)
        phi_n(cf, 0)  # level 2 resolves n = 0

    def test_outer_corner_value_is_single_cell_mean(self):
        f = distance_function(0)
        out = phi_n(f, 0)
        corner = cell_map(()).key_points()[0]
        cell_mean = mu_integral(f.pullback((1,)), 1, absolute=False).value
        assert out.evaluate(corner) == pytest.approx(cell_mean, abs=1e-12)

    def test_lipschitz_sup_errors_halve(self):
        errs = interpolant_sup_errors(distance_function(0), range(0, 4))
        for a, b in zip(errs[:-1], errs[1:]):
            assert b <= a / 2 + 1e-15

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            phi_n(CROSS, -1)


# ---------------------------------------------------------------------------
# K-functional scan
# ---------------------------------------------------------------------------


class TestKFunctional:
    def test_cross_bound_at_radius_two(self):
        rep = k_functional_scan(CROSS, p=2)
        assert rep.r_grid[0] == 2.0
        assert rep.k_values[0] <= math.sqrt(8.0 / 21.0) + 1e-9

    def test_ratios_form_bounded_band(self):
        for f in (CROSS, random_pa(2, seed=11)):
            rep = k_functional_scan(f, p=2)
            assert all(math.isfinite(v) and v > 0 for v in rep.ratios)
            assert rep.band <= 400.0

    def test_theta_defaults_to_one(self):
        rep = k_functional_scan(CROSS, p=2, r_grid=[Fraction(2), Fraction(2, 3),
                                                   Fraction(2, 9), Fraction(2, 27)])
        assert rep.theta == pytest.approx(1.0, abs=1e-15)
        custom = k_functional_scan(CROSS, p=2, alpha=0.5 * alpha_p(2),
                                   r_grid=[Fraction(2), Fraction(2, 3)])
        assert custom.theta == pytest.approx(0.5, abs=1e-15)

    def test_constant_function_collapses(self):
        rep = k_functional_scan(CONST, p=2, r_grid=[Fraction(2), Fraction(2, 3)])
        assert rep.k_values == (0.0, 0.0)
        assert math.isnan(rep.band)

    def test_decompositions_recorded(self):
        rep = k_functional_scan(CROSS, p=2)
        for d in rep.decompositions:
            assert d["kind"] in ("mean", "interpolant")
            assert d["g_norm"] >= 0

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            k_functional_scan(CROSS, p=2, r_grid=[Fraction(3)])
        with pytest.raises(TypeError):
            k_functional_scan(anchor_cell_function(CROSS, 3), p=2)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


class TestRunner:
    def test_selected_experiments_run_sorted(self):
        results = run_all(["sharpness", "morrey"], quick=True)
        assert [r.name for r in results] == ["morrey", "sharpness"]
        assert all(r.passed for r in results)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            run_all(["nope"])

    def test_result_serializes(self):
        (res,) = run_all(["sharpness"], quick=True)
        d = res.to_dict()
        assert d["name"] == "sharpness"
        assert isinstance(d["values"], dict)
        assert d["passed"] is True

    def test_parallel_matches_serial(self):
        serial = run_all(["sharpness", "interpolant"], quick=True, workers=1)
        parallel = run_all(["sharpness", "interpolant"], quick=True, workers=2)
        assert [r.name for r in serial] == [r.name for r in parallel]
        for a, b in zip(serial, parallel):
            assert a.values == b.values
