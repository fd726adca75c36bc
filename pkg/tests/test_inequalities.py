import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyflow import shapes
from polyflow.geometry import ClosedCurve, derive_geometry
from polyflow.inequalities import (
    deviation_sobolev_norm,
    iterated_interp_check,
    p_term_norm,
    random_trig_polynomial,
    sup_bound_check,
    wirtinger_check,
)

N = 256
U = np.arange(N) / N
PERIODS = (1.0, 2 * np.pi, 17.3)


class TestWirtinger:
    @pytest.mark.parametrize("period", PERIODS)
    def test_first_harmonic_is_equality_case(self, period):
        res = wirtinger_check(np.cos(2 * np.pi * U), period)
        assert res.holds and res.equality_case
        assert res.ratio == pytest.approx(period**2 / (4 * np.pi**2), abs=1e-12 * period**2)

    def test_second_harmonic_ratio(self):
        period = 2 * np.pi
        res = wirtinger_check(np.cos(4 * np.pi * U), period)
        assert res.ratio == pytest.approx(period**2 / (16 * np.pi**2), rel=1e-12)
        assert res.holds and not res.equality_case

    def test_constant_input_degenerate(self):
        res = wirtinger_check(np.full(N, 2.0), 1.0)
        assert res.degenerate and res.holds

    def test_uncentered_input_flagged(self):
        res = wirtinger_check(np.cos(2 * np.pi * U) + 0.5, 1.0)
        assert res.centered
        assert res.holds and res.equality_case

    @pytest.mark.parametrize("period", PERIODS)
    def test_thousand_random_polynomials(self, period):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            f = random_trig_polynomial(rng, n_modes=int(rng.integers(1, 21)))
            res = wirtinger_check(f, period)
            assert res.holds
            # equality flagged only for pure first harmonics
            if res.equality_case:
                coef = np.fft.fft(f) / N
                higher = np.sum(np.abs(coef[2 : N - 1]) ** 2)
                assert higher < 1e-18 * np.sum(np.abs(coef) ** 2)

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        n_modes=st.integers(1, 20),
        period=st.sampled_from(PERIODS),
    )
    def test_holds_property(self, seed, n_modes, period):
        f = random_trig_polynomial(np.random.default_rng(seed), n_modes)
        assert wirtinger_check(f, period).holds


class TestSupBound:
    def test_sine_on_two_pi(self):
        res = sup_bound_check(np.sin(U * 2 * np.pi), 2 * np.pi)
        assert res.sup_sq == pytest.approx(1.0, rel=1e-6)
        assert res.bound == pytest.approx(np.pi, rel=1e-10)
        assert res.holds

    def test_zero_function(self):
        res = sup_bound_check(np.zeros(N), 1.0)
        assert res.holds and res.sup_sq == 0.0

    @pytest.mark.parametrize("period", PERIODS)
    def test_thousand_random_polynomials(self, period):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            f = random_trig_polynomial(rng, n_modes=int(rng.integers(1, 21)))
            assert sup_bound_check(f, period).holds


class TestInterpolationInequality:
    def test_circle_trivial(self):
        g = derive_geometry(shapes.Circle(1.0).sample(N), m_max=3)
        for v in iterated_interp_check(g, 1, (0.01, 0.1, 1.0)):
            assert v.holds

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_perturbed_circle(self, m):
        g = derive_geometry(shapes.perturbed_circle(1.0, 0.08, 3).sample(N), m_max=m + 1)
        for v in iterated_interp_check(g, m, (0.01, 0.1, 1.0)):
            assert v.holds, f"m={m} eps={v.eps}: {v.lhs} > {v.rhs}"

    def test_dilation_invariant_verdicts(self):
        base = shapes.perturbed_circle(1.0, 0.08, 3).sample(N)
        g1 = derive_geometry(base, m_max=3)
        g2 = derive_geometry(ClosedCurve(3.0 * base.points), m_max=3)
        for eps in (0.01, 0.1, 1.0):
            v1 = iterated_interp_check(g1, 2, (eps,))[0]
            v2 = iterated_interp_check(g2, 2, (eps,))[0]
            assert v1.holds == v2.holds
            # every term carries the same dilation weight
            scale = 3.0 ** -(2 * 2 + 1)
            assert v2.lhs == pytest.approx(v1.lhs * scale, rel=1e-8)
            assert v2.rhs == pytest.approx(v1.rhs * scale, rel=1e-8)

    def test_insufficient_derivatives(self):
        g = derive_geometry(shapes.Circle(1.0).sample(N), m_max=2)
        with pytest.raises(ValueError):
            iterated_interp_check(g, 2, (0.1,))


class TestProductNorm:
    def test_circle_vanishes(self):
        g = derive_geometry(shapes.Circle(1.0).sample(N), m_max=4)
        assert p_term_norm(g, (2, 1, 1, 0)) < 1e-40

    def test_dilation_exponent(self):
        # value scales as lambda^(1 - mu - nu)
        partition = (2, 1, 1, 0)
        mu, nu = sum(partition), len(partition)
        base = shapes.perturbed_circle(1.0, 0.08, 3).sample(N)
        v1 = p_term_norm(derive_geometry(base, m_max=3), partition)
        lam = 1.7
        v2 = p_term_norm(
            derive_geometry(ClosedCurve(lam * base.points), m_max=3), partition
        )
        measured = np.log(v2 / v1) / np.log(lam)
        assert measured == pytest.approx(1 - mu - nu, abs=1e-8)

    def test_two_scale_regression_exponent(self):
        partition = (1, 1)
        mu, nu = 2, 2
        base = shapes.perturbed_circle(1.0, 0.05, 2).sample(N)
        scales = (1.0, 2.0, 4.0)
        vals = [
            p_term_norm(derive_geometry(ClosedCurve(s * base.points), m_max=2), partition)
            for s in scales
        ]
        slope = np.polyfit(np.log(scales), np.log(vals), 1)[0]
        assert slope == pytest.approx(1 - mu - nu, abs=1e-8)

    def test_finite_on_perturbed_circle(self):
        g = derive_geometry(shapes.perturbed_circle(1.0, 0.08, 3).sample(N), m_max=3)
        val = p_term_norm(g, (2, 1, 1, 0))
        assert np.isfinite(val) and val > 0

    def test_sobolev_norm_scale_invariant(self):
        base = shapes.perturbed_circle(1.0, 0.08, 3).sample(N)
        n1 = deviation_sobolev_norm(derive_geometry(base, m_max=3), 3)
        n2 = deviation_sobolev_norm(
            derive_geometry(ClosedCurve(2.2 * base.points), m_max=3), 3
        )
        assert n2 == pytest.approx(n1, rel=1e-8)
