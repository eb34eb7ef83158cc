"""Dyadic partition, Besov/time-frequency norms, smallness, composition."""

import math

import numpy as np
import pytest

from thermoch.besov import (
    BesovReport,
    besov_norm,
    build_partition,
    check_smallness,
    chemin_lerner_norm,
    chi_bump,
    composition_registry,
    project_block,
    verify_composition_bound,
)
from thermoch.grid import Field, GridSpec, fftn, grad_arrays, ifftn_real, l2_norm
from thermoch.thermo import ModelParams


GRID = GridSpec(dim=2, n=64, box_len=2.0 * np.pi)
PART = build_partition(GRID)


def random_field(grid, rng, amp=1.0):
    return Field(grid, amp * rng.standard_normal(grid.shape))


def band_limited(grid, rng, kmax_int, amp=1.0):
    c = fftn(grid, rng.standard_normal(grid.shape))
    keep = np.ones(grid.shape, dtype=bool)
    cut = 2.0 * np.pi * kmax_int / grid.box_len
    for ki in grid.k_axes:
        keep &= np.abs(ki) <= cut + 1e-12
    v = ifftn_real(grid, c * keep)
    return Field(grid, amp * v / max(np.max(np.abs(v)), 1e-30))


class TestPartition:
    def test_bump_plateaus_exact(self):
        r = np.array([0.0, 0.5, 0.75, 1.3334, 2.0, 10.0])
        chi = chi_bump(r)
        assert chi[0] == 1.0 and chi[1] == 1.0 and chi[2] == 1.0
        assert chi[3] == 0.0 and chi[4] == 0.0 and chi[5] == 0.0
        mid = chi_bump(np.array([1.0]))[0]
        assert 0.0 < mid < 1.0

    def test_partition_of_unity_on_lattice(self):
        for grid in (GRID, GridSpec(dim=1, n=128, box_len=3.0), GridSpec(dim=3, n=16, box_len=1.0)):
            part = build_partition(grid)
            total = np.zeros(grid.shape)
            for sym in part.symbols:
                total += sym
            assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_ring_supports(self):
        part = PART
        r = GRID.k_abs
        for i, q in enumerate(part.qs):
            if q == -1:
                continue
            sym = part.symbols[i]
            outside = (r <= 0.75 * 2.0**q) | (r >= (8.0 / 3.0) * 2.0**q)
            assert np.max(np.abs(sym[outside])) == 0.0

    def test_exact_dyadic_frequency_splits_between_two_rings(self):
        # |xi| = 2^q: phi_{q-1} + phi_q = 1 and every other symbol vanishes
        for q in (1, 2, 3):
            r = np.array([2.0**q])
            low = chi_bump(r)[0]
            assert (low == 0.0) if q >= 2 else True
            ring_prev = chi_bump(r / 2.0**q)[0] - chi_bump(r / 2.0 ** (q - 1))[0]
            ring_here = chi_bump(r / 2.0 ** (q + 1))[0] - chi_bump(r / 2.0**q)[0]
            assert ring_prev + ring_here + low == pytest.approx(1.0, abs=1e-14)

    def test_single_mode_hits_two_blocks(self):
        q0 = 3  # mode with |k| = 8 on the 2pi box
        x = GRID.axes[0]
        f = Field(GRID, np.sin(2.0**q0 * x) * np.ones(GRID.shape))
        rep = besov_norm(f, 0.0, PART)
        active = [q for q, v in rep.per_block if v > 1e-12]
        assert active == [q0 - 1, q0]

    def test_project_block_range_check(self):
        f = Field(GRID, np.zeros(GRID.shape))
        with pytest.raises(ValueError):
            project_block(f, PART.q_max + 1, PART)


class TestBesovNorm:
    def test_single_mode_against_direct_sum_oracle(self):
        # f = a sin(kx): coefficients live at +-k only, so each block norm is
        # phi_q(|k|) * a * sqrt(L^d / 2); evaluated with scalar chi calls
        a, m = 0.37, 5
        s = 1.0
        x = GRID.axes[0]
        f = Field(GRID, a * np.sin(m * x) * np.ones(GRID.shape))
        rep = besov_norm(f, s, PART)
        spatial = a * math.sqrt(GRID.box_len**2 / 2.0)
        oracle = 0.0
        for q in PART.qs:
            if q == -1:
                w = chi_bump(np.array([float(m)]))[0]
            else:
                w = (
                    chi_bump(np.array([m / 2.0 ** (q + 1)]))[0]
                    - chi_bump(np.array([m / 2.0**q]))[0]
                )
            oracle += 2.0 ** (q * s) * w * spatial
        assert rep.total == pytest.approx(oracle, abs=1e-10)

    def test_zero_field(self):
        rep = besov_norm(Field(GRID, np.zeros(GRID.shape)), 1.0, PART)
        assert rep.total == 0.0
        assert all(v == 0.0 for _, v in rep.per_block)

    def test_s0_dominates_l2(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            f = random_field(GRID, rng)
            rep = besov_norm(f, 0.0, PART)
            assert rep.total >= l2_norm(f) - 1e-12

    def test_subadditive(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            f = random_field(GRID, rng)
            g = random_field(GRID, rng)
            fg = Field(GRID, f.values + g.values)
            assert (
                besov_norm(fg, 1.0, PART).total
                <= besov_norm(f, 1.0, PART).total + besov_norm(g, 1.0, PART).total + 1e-12
            )

    def test_homogeneous(self):
        rng = np.random.default_rng(19)
        f = random_field(GRID, rng)
        n1 = besov_norm(f, 1.5, PART).total
        n3 = besov_norm(Field(GRID, 3.0 * f.values), 1.5, PART).total
        assert n3 == pytest.approx(3.0 * n1, rel=1e-12)

    def test_report_total_is_block_sum(self):
        rng = np.random.default_rng(20)
        rep = besov_norm(random_field(GRID, rng), 0.5, PART)
        assert rep.total == pytest.approx(sum(v for _, v in rep.per_block), rel=1e-14)
        assert all(v >= 0.0 for _, v in rep.per_block)


class TestBernstein:
    def _ratios(self, f):
        out = []
        for q in range(0, PART.q_max + 1):
            blk = project_block(f, q, PART)
            nb = l2_norm(blk)
            if nb < 1e-13:
                continue
            grads = grad_arrays(GRID, blk.values)
            ng = math.sqrt(sum(l2_norm(Field(GRID, g)) ** 2 for g in grads))
            out.append((q, ng / nb))
        return out

    def test_ratio_bounds_and_calibration(self):
        rng = np.random.default_rng(23)
        cal, held = [], []
        for i in range(200):
            ratios = self._ratios(random_field(GRID, rng))
            bucket = cal if i < 100 else held
            for q, r in ratios:
                bucket.append(r / 2.0**q)        # forward constant
                bucket.append(2.0**q / r)        # inverse constant
        c_cal = 1.1 * max(cal)
        assert c_cal <= 4.0                      # ring support gives 8/3 and 4/3
        assert max(held) <= c_cal

    def test_support_implies_hard_bounds(self):
        rng = np.random.default_rng(24)
        for q, r in self._ratios(random_field(GRID, rng)):
            assert 0.75 * 2.0**q <= r <= (8.0 / 3.0) * 2.0**q + 1e-9


class TestCheminLerner:
    def test_constant_series_rho_inf_equals_besov(self):
        rng = np.random.default_rng(29)
        f = random_field(GRID, rng)
        times = np.linspace(0.0, 1.0, 11)
        series = [f] * 11
        cl = chemin_lerner_norm(series, times, 1.0, np.inf, PART)
        assert cl == pytest.approx(besov_norm(f, 1.0, PART).total, rel=1e-12)

    def test_constant_series_rho1_is_t_times_besov(self):
        rng = np.random.default_rng(30)
        f = random_field(GRID, rng)
        T = 0.8
        times = np.linspace(0.0, T, 17)
        cl = chemin_lerner_norm([f] * 17, times, 0.5, 1, PART)
        assert cl == pytest.approx(T * besov_norm(f, 0.5, PART).total, rel=1e-12)

    def test_rho1_equals_integrated_besov(self):
        # the q-sum and the time-sum commute exactly
        rng = np.random.default_rng(31)
        times = np.linspace(0.0, 0.2, 6)
        series = [random_field(GRID, rng) for _ in times]
        cl = chemin_lerner_norm(series, times, 1.0, 1, PART)
        quad = (times[1] - times[0]) * sum(
            besov_norm(f, 1.0, PART).total for f in series[:-1]
        )
        assert cl == pytest.approx(quad, rel=1e-12)

    def test_decaying_mode_against_integral(self):
        lam = 3.0
        T = 1.0
        dt = 1e-3
        times = np.arange(0.0, T + dt / 2, dt)
        x = GRID.axes[0]
        base = np.sin(4.0 * x) * np.ones(GRID.shape)
        series = [Field(GRID, math.exp(-lam * t) * base) for t in times]
        cl = chemin_lerner_norm(series, times, 1.0, 1, PART)
        expect = (1.0 - math.exp(-lam * T)) / lam * besov_norm(Field(GRID, base), 1.0, PART).total
        assert cl == pytest.approx(expect, rel=1e-2)

    def test_vector_variant_reduces_to_scalar(self):
        from thermoch.besov import chemin_lerner_norm_vector

        rng = np.random.default_rng(33)
        times = np.linspace(0.0, 0.5, 6)
        series = [random_field(GRID, rng) for _ in times]
        zero = Field(GRID, np.zeros(GRID.shape))
        vec = [(f, zero) for f in series]
        a = chemin_lerner_norm_vector(vec, times, 1.0, 2, PART)
        b = chemin_lerner_norm(series, times, 1.0, 2, PART)
        assert a == pytest.approx(b, rel=1e-12)

    def test_nonuniform_times_rejected(self):
        f = Field(GRID, np.zeros(GRID.shape))
        with pytest.raises(ValueError, match="uniform"):
            chemin_lerner_norm([f, f, f], [0.0, 0.1, 0.3], 1.0, 1, PART)

    def test_bad_rho_rejected(self):
        f = Field(GRID, np.zeros(GRID.shape))
        with pytest.raises(ValueError, match="rho"):
            chemin_lerner_norm([f, f], [0.0, 0.1], 1.0, 3, PART)


class TestSmallness:
    def test_boundary_equality_not_satisfied(self):
        # phi0 == 0, eps = 1, theta_bar = 100, alpha = kappa = k_b = 1,
        # eps0 = 0.01: lhs1 = (1/100)(1+0)^4 = 0.01 = rhs1 -> strict fails
        p = ModelParams(eps=1.0, theta_bar=100.0, alpha=1.0, kappa=1.0, k_b=1.0)
        phi0 = Field(GRID, np.zeros(GRID.shape))
        theta0 = Field(GRID, np.full(GRID.shape, 100.0))
        rep = check_smallness(phi0, theta0, p, 0.01, PART)
        assert rep.lhs1 == pytest.approx(0.01, abs=1e-15)
        assert rep.rhs1 == pytest.approx(0.01, abs=1e-15)
        assert rep.satisfied[0] is False
        assert rep.satisfied[1] is True  # lhs2 = 0 < rhs2
        assert rep.eps_theta_bar == pytest.approx(100.0)

    def test_admissible_data(self):
        p = ModelParams(eps=1.0, theta_bar=100.0, alpha=1.0, kappa=1.0, k_b=1.0)
        x = GRID.axes[0]
        phi0 = Field(GRID, 1e-4 * np.sin(x) * np.ones(GRID.shape))
        theta0 = Field(GRID, 100.0 + 1e-9 * np.sin(x) * np.ones(GRID.shape))
        rep = check_smallness(phi0, theta0, p, 0.5, PART)
        assert rep.satisfied == (True, True)
        lo, hi = rep.chi_range
        assert 0.0 < lo < hi
        m1, m2 = rep.margins
        assert m1 > 1.0 and m2 > 1.0

    def test_eps0_domain(self):
        p = ModelParams(eps=1.0, theta_bar=1.0, alpha=1.0, kappa=1.0, k_b=1.0)
        z = Field(GRID, np.zeros(GRID.shape))
        one = Field(GRID, np.ones(GRID.shape))
        with pytest.raises(ValueError):
            check_smallness(z, one, p, 1.5, PART)

    def test_text_and_csv_render(self):
        p = ModelParams(eps=1.0, theta_bar=10.0, alpha=1.0, kappa=1.0, k_b=1.0)
        z = Field(GRID, np.zeros(GRID.shape))
        t0 = Field(GRID, np.full(GRID.shape, 10.0))
        rep = check_smallness(z, t0, p, 0.5, PART)
        assert "margin" in rep.to_text()
        assert rep.to_csv().startswith("quantity,value")


class TestComposition:
    def test_identity_is_exact(self):
        rng = np.random.default_rng(41)
        u = band_limited(GRID, rng, kmax_int=6, amp=0.5)
        rep = verify_composition_bound(u, "identity", 1.0, PART)
        assert rep.ratio == pytest.approx(1.0, rel=1e-12)

    def test_zero_field(self):
        u = Field(GRID, np.zeros(GRID.shape))
        rep = verify_composition_bound(u, "sin", 1.0, PART)
        assert rep.lhs == 0.0 and rep.ratio == 0.0

    def test_pole_guard(self):
        u = Field(GRID, np.full(GRID.shape, 2.0))
        with pytest.raises(ValueError, match="theta_bar"):
            verify_composition_bound(u, "shift_ratio", 1.0, PART, theta_bar=1.5)

    def test_unknown_name(self):
        u = Field(GRID, np.zeros(GRID.shape))
        with pytest.raises(KeyError):
            verify_composition_bound(u, "nope", 1.0, PART)

    def test_calibrate_then_hold_out(self):
        # empirical-constant protocol: C_s = 1.1 * max calibration ratio must
        # cover a disjoint held-out sample for every registry function
        rng = np.random.default_rng(42)
        names = ["shift_ratio", "shift_ratio_sq", "sin"]
        tb = 2.0

        def sample():
            u = band_limited(GRID, rng, kmax_int=8, amp=float(rng.uniform(0.05, 0.9)))
            return u

        for name in names:
            cal = [
                verify_composition_bound(sample(), name, 1.0, PART, theta_bar=tb).ratio
                for _ in range(40)
            ]
            c_s = 1.1 * max(cal)
            held = [
                verify_composition_bound(sample(), name, 1.0, PART, theta_bar=tb).ratio
                for _ in range(40)
            ]
            assert max(held) <= c_s

    def test_registry_derivative_suprema_match_fd(self):
        # spot-check the closed-form derivative bounds at the sup location
        tb = 1.7
        reg = composition_registry(tb)
        h, sup = reg["shift_ratio"]
        M = 0.6
        x = -M
        eps = 1e-5
        d1 = (h(x + eps) - h(x - eps)) / (2 * eps)
        assert abs(d1) <= sup(1, M) + 1e-6
        assert sup(1, M) == pytest.approx(tb / (tb - M) ** 2, rel=1e-12)


class TestProductContinuity:
    def test_algebra_property_with_calibrated_constant(self):
        rng = np.random.default_rng(43)
        s = GRID.dim / 2.0

        def pair():
            return (
                band_limited(GRID, rng, kmax_int=10, amp=float(rng.uniform(0.2, 2.0))),
                band_limited(GRID, rng, kmax_int=10, amp=float(rng.uniform(0.2, 2.0))),
            )

        def ratio(f, g):
            prod = Field(GRID, f.values * g.values)
            denom = besov_norm(f, s, PART).total * besov_norm(g, s, PART).total
            return besov_norm(prod, s, PART).total / denom

        cal = [ratio(*pair()) for _ in range(40)]
        c = 1.1 * max(cal)
        held = [ratio(*pair()) for _ in range(40)]
        assert max(held) <= c
