import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cos_field, random_complex_field, random_poly
from torus_integrals.cascade import build_liouville
from torus_integrals.flow_sim import SystemSpec, poly_observable, time_derivative
from torus_integrals.fourier_field import (
    DEFAULT_LATTICE,
    constant,
    d_zbar,
    inv_d_zbar,
    make_field,
    random_metric,
    random_real_field,
    zeros,
)
from torus_integrals.magnetic import dgrw_trig, level_initial_states
from torus_integrals.momentum_poly import (
    HomogeneousPolynomial,
    MetricError,
    MomentumPolynomial,
    RealityError,
    bracket_restricted,
    bracket_restricted_magnetic,
    evaluate_bracket,
    evaluate_homogeneous,
    evaluate_poly,
    homogenize,
    is_zero,
    poly_from_json,
    poly_to_json,
    split_parity,
    substitute_energy,
)

LAT = DEFAULT_LATTICE
ONE = constant(1.0)
seeds = st.integers(0, 2**32 - 1)


def px_poly():
    return MomentumPolynomial.from_fields([0.0, 1.0])


def coeff_gap(F, G):
    k = max(F.degree, G.degree)
    a = F.at_energy(1.0) + [zeros()] * (k - F.degree)
    b = G.at_energy(1.0) + [zeros()] * (k - G.degree)
    return max((x - y).max_coeff() for x, y in zip(a, b))


class TestConstruction:
    def test_a0_reality_enforced(self):
        with pytest.raises(RealityError):
            MomentumPolynomial.from_fields([make_field(LAT, [(1, 0, 1.0)]), 1.0])

    def test_non_strict_allows_complex_a0(self):
        F = MomentumPolynomial.from_fields([1j, 1.0], strict=False)
        assert F.degree == 1

    def test_json_roundtrip(self, rng):
        F = random_poly(rng, 3)
        back = poly_from_json(poly_to_json(F))
        assert coeff_gap(F, back) == 0

    def test_json_e_tracked(self):
        L = build_liouville(cos_field(1, k=1, base=1.5), cos_field(1, l=1, base=1.5))
        d = poly_to_json(L.F2)
        assert d["E_degree"] == 1 and d["k"] == 2
        assert poly_from_json(d).E_degree == 1


class TestEvaluate:
    def test_px(self):
        assert evaluate_poly(px_poly(), 0.1, 0.2, 3.0, 4.0) == pytest.approx(3.0)

    def test_a0_cos(self):
        F = MomentumPolynomial.from_fields([cos_field(1, k=1)])
        assert evaluate_poly(F, np.pi, 0.4, 1.0, 2.0) == pytest.approx(-1.0)

    def test_liouville_closed_form(self, rng):
        v, w = cos_field(1, k=1, base=1.5), cos_field(0.7, l=1, base=1.2)
        L = build_liouville(v, w)
        spec = SystemSpec(L.g)
        for s in level_initial_states(spec, 1.3, 5, seed=2):
            val = evaluate_poly(L.F2, s.x, s.y, s.px, s.py, E=1.3)
            assert val == pytest.approx(L.closed_form(s.x, s.y, s.px, s.py), abs=1e-12)

    def test_imaginary_residue_raises(self):
        F = MomentumPolynomial.from_fields([1j, 1.0], strict=False)
        with pytest.raises(RealityError):
            evaluate_poly(F, 0.0, 0.0, 1.0, 0.0)

    def test_requires_energy_for_tracked(self):
        L = build_liouville(cos_field(1, k=1, base=1.5), cos_field(1, l=1, base=1.5))
        with pytest.raises(ValueError):
            evaluate_poly(L.F2, 0.0, 0.0, 1.0, 0.0)


class TestSubstituteEnergy:
    def test_cubic_term(self):
        f = HomogeneousPolynomial(3, {(2, 1): (ONE,)})
        F = substitute_energy(f, ONE, E=2.0)
        assert F.degree == 1
        assert F.at_energy(2.0)[1].modes() == {(0, 0): 1.0}
        assert F.at_energy(2.0)[0].max_coeff() == 0

    def test_constant_unchanged(self):
        F = substitute_energy(HomogeneousPolynomial(0, {(0, 0): (constant(3.0),)}), ONE, E=1.0)
        assert F.degree == 0 and F.at_energy(1.0)[0].mean == 3

    def test_kinetic(self):
        # p_x^2 + p_y^2 = 4 p_z p_zbar
        F = substitute_energy(HomogeneousPolynomial(2, {(1, 1): (constant(4.0),)}), ONE, E=1.0)
        assert F.at_energy(1.0)[0].mean == pytest.approx(2.0)

    def test_nonpositive_metric(self):
        with pytest.raises(MetricError):
            substitute_energy(HomogeneousPolynomial(0, {(0, 0): (ONE,)}), cos_field(1, k=1), E=1.0)

    def test_round_trip(self, rng):
        g = random_metric(rng, LAT, 2)
        f = HomogeneousPolynomial(3, {(3, 0): (random_complex_field(rng),), (2, 1): (random_complex_field(rng),)})
        back = homogenize(substitute_energy(f, g), g)
        x, y = rng.uniform(0, 6, (2, 10))
        px, py = rng.standard_normal((2, 10))
        np.testing.assert_allclose(evaluate_homogeneous(back, x, y, px, py),
                                   evaluate_homogeneous(f, x, y, px, py), atol=1e-12)


class TestHomogenize:
    def test_liouville(self, rng):
        L = build_liouville(cos_field(1, k=1, base=1.5), cos_field(1, l=1, base=1.5))
        f = homogenize(L.F2, L.g)
        x, y = rng.uniform(0, 6, (2, 20))
        px, py = rng.standard_normal((2, 20)) * 3
        np.testing.assert_allclose(evaluate_homogeneous(f, x, y, px, py), L.closed_form(x, y, px, py),
                                   atol=1e-12)

    def test_E_independent_unchanged(self, rng):
        F = MomentumPolynomial.from_fields([0.0, 0.0, random_complex_field(rng)])
        f = homogenize(F, ONE)
        assert f.degree == 2 and set(f.terms) == {(2, 0)}

    def test_inhomogeneous_rejected(self):
        with pytest.raises(ValueError):
            homogenize(MomentumPolynomial.from_fields([1.0, 1.0]), ONE)


class TestParity:
    def test_split(self):
        F = MomentumPolynomial.from_fields([0.0, 1.0, 1.0])
        even, odd = split_parity(F)
        assert [a.mean for a in even.at_energy(1)] == [0, 0, 1]
        assert [a.mean for a in odd.at_energy(1)] == [0, 1, 0]

    def test_even_input(self, rng):
        F = MomentumPolynomial.from_fields([random_real_field(rng, LAT, 2), 0.0, random_complex_field(rng)])
        even, odd = split_parity(F)
        assert coeff_gap(even, F) == 0 and is_zero(odd, 0)

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_bracket_linearity(self, s):
        rng = np.random.default_rng(s)
        F, g = random_poly(rng, 4), random_metric(rng, LAT, 2)
        even, odd = split_parity(F)
        total = bracket_restricted(even, g, 1.3) + bracket_restricted(odd, g, 1.3)
        assert coeff_gap(total, bracket_restricted(F, g, 1.3)) <= 1e-12

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_parity_preservation(self, s):
        rng = np.random.default_rng(s)
        _, odd = split_parity(random_poly(rng, 3))
        br = bracket_restricted(odd, random_metric(rng, LAT, 2), 0.7)
        assert all(a.max_coeff() == 0 for m, a in enumerate(br.at_energy(0.7)) if m % 2 == 1)


class TestBracket:
    def test_px_on_y_metric(self):
        g = cos_field(0.5, l=1, base=1.0)
        assert is_zero(bracket_restricted(px_poly(), g, 1.7), 1e-15)

    def test_energy_itself(self, generic_metric):
        E = 1.4
        H = MomentumPolynomial.from_fields([E])
        assert is_zero(bracket_restricted(H, generic_metric, E), 0)

    def test_degree_and_shape(self, rng, generic_metric):
        br = bracket_restricted(random_poly(rng, 3), generic_metric, 1.0)
        assert br.degree == 4

    def test_constant_a0_only(self, rng, generic_metric):
        a0 = random_real_field(rng, LAT, 2)
        br = bracket_restricted(MomentumPolynomial.from_fields([a0]), generic_metric, 1.0).at_energy(1.0)
        assert br[0].max_coeff() == 0
        assert (br[1] - d_zbar(a0) * 2).max_coeff() == 0

    def test_px_on_nonflat_matches_flow(self):
        g = cos_field(1, k=1, base=2.0)
        E = 1.0
        br = bracket_restricted(px_poly(), g, E)
        assert not is_zero(br, 1e-3)
        spec = SystemSpec(g)
        F = poly_observable(px_poly())
        for s in level_initial_states(spec, E, 20, seed=4):
            want = time_derivative(spec, s, F)
            got = evaluate_bracket(br, g, s.x, s.y, s.px, s.py)
            assert abs(got - want) <= 1e-6

    @given(seeds)
    @settings(max_examples=5, deadline=None)
    def test_flow_oracle_random(self, s):
        rng = np.random.default_rng(s)
        k = int(rng.integers(1, 5))
        F, g, E = random_poly(rng, k), random_metric(rng, LAT, 2), float(rng.uniform(0.5, 2))
        br = bracket_restricted(F, g, E)
        spec = SystemSpec(g)
        for st_ in level_initial_states(spec, E, 3, seed=s % 1000):
            want = time_derivative(spec, st_, poly_observable(F))
            assert abs(evaluate_bracket(br, g, st_.x, st_.y, st_.px, st_.py) - want) <= 1e-6


class TestMagneticBracket:
    def test_zero_field_identical(self, rng, generic_metric):
        F = random_poly(rng, 3)
        a = bracket_restricted(F, generic_metric, 1.1)
        b = bracket_restricted_magnetic(F, generic_metric, zeros(), 1.1)
        assert coeff_gap(a, b) == 0

    def test_top_coefficient_cancels(self, rng, generic_metric):
        k = 3
        B = random_real_field(rng, LAT, 2)
        a_km1 = inv_d_zbar(B * (-1j * k))
        F = MomentumPolynomial.from_fields([0.0, 0.0, a_km1, 1.0])
        top = bracket_restricted_magnetic(F, generic_metric, B, 1.0).at_energy(1.0)[k]
        assert top.max_coeff() <= 1e-14

    def test_dgrw_quadratic_vanishes(self):
        s = dgrw_trig()
        br = bracket_restricted_magnetic(s.F2, s.g, s.b, s.E)
        assert is_zero(br, 1e-9)
        other = bracket_restricted_magnetic(s.F2, s.g, s.b, 2 * s.E)
        assert not is_zero(other, 1e-3)

    def test_complex_field_rejected(self, generic_metric):
        with pytest.raises(ValueError):
            bracket_restricted_magnetic(px_poly(), generic_metric, make_field(LAT, [(1, 0, 1.0)]), 1.0)

    def test_flow_oracle(self, rng):
        g = random_metric(rng, LAT, 2)
        b = random_real_field(rng, LAT, 2, scale=0.5)
        F, E = random_poly(rng, 2), 0.8
        br = bracket_restricted_magnetic(F, g, b, E)
        spec = SystemSpec.from_complex_field(g, b)
        for s in level_initial_states(spec, E, 5, seed=9):
            want = time_derivative(spec, s, poly_observable(F))
            assert abs(evaluate_bracket(br, g, s.x, s.y, s.px, s.py) - want) <= 1e-6
