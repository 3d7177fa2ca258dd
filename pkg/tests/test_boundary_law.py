import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from zipper import boundary_law as bl
from zipper import tree
from zipper.model import ModelParams


def poly_positive_roots(k, theta, eta):
    """Positive real roots of (theta z + eta)**k - z from the polynomial coefficients."""
    coeffs = [math.comb(k, j) * theta**j * eta ** (k - j) for j in range(k, -1, -1)]
    coeffs[-2] -= 1.0
    r = np.roots(coeffs)
    return sorted(float(x.real) for x in r if abs(x.imag) < 1e-7 * max(1, abs(x)) and x.real > 0)


@pytest.mark.parametrize("k,theta,eta", [(2, 0.5, 0.3), (3, 0.7, 0.1), (4, 2.0, 0.2), (2, 3.0, 0.05), (3, 0.2, 1.0)])
def test_roots_match_polynomial_roots(k, theta, eta):
    sols = bl.solve_constant_theta_eta(k, theta, eta)
    want = poly_positive_roots(k, theta, eta)
    assert sols.count == len(want)
    for z, w in zip(sols.roots, want):
        assert z == pytest.approx(w, rel=1e-8)
    assert all(r <= 1e-12 * max(1, z) for r, z in zip(sols.residuals(), sols.roots))


@given(st.integers(2, 5), st.floats(0.05, 5.0), st.floats(0.0, 0.99))
@settings(max_examples=150)
def test_roots_below_threshold_are_two_and_ordered(k, theta, frac):
    eta_c = bl.eta_critical(k, theta)
    eta = frac * eta_c
    # below ~1e-300 the small root is not representable
    assume(eta**k > 1e-290 and abs(eta - eta_c) > 1e-6 * eta_c)
    sols = bl.solve_constant_theta_eta(k, theta, eta)
    assert sols.count == 2
    lo, hi = sols.roots
    assert 0 < lo < bl.minimizer(k, theta, eta) < hi
    for z in sols.roots:
        assert abs(bl.constant_equation(z, k, theta, eta)) <= 1e-12 * max(1.0, z)


@given(st.integers(2, 5), st.floats(0.05, 5.0), st.floats(1.001, 50.0))
def test_no_roots_above_threshold(k, theta, factor):
    assert bl.count_solutions(k, theta, factor * bl.eta_critical(k, theta)) == 0


def test_threshold_examples():
    assert bl.eta_critical(2, 2.0) == pytest.approx(0.125)
    assert bl.eta_critical(4, 2.0) == pytest.approx(0.375)
    assert bl.eta_critical(2, 0.25) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bl.eta_critical(1, 0.5)


def test_numeric_threshold_matches_closed_form():
    for k in (2, 3, 4, 6):
        for theta in (0.1, 0.5, 2.0, 7.0):
            assert bl.eta_critical_numeric(k, theta) == pytest.approx(bl.eta_critical(k, theta), rel=1e-9)


def test_critical_point_returns_double_root():
    sols = bl.solve_constant_theta_eta(2, 0.5, 0.5)
    assert sols.regime == "critical" and sols.count == 1
    assert sols.roots[0] == pytest.approx(1.0)


def test_hard_constraint_single_root():
    sols = bl.solve_constant_theta_eta(3, 2.0, 0.0)
    assert sols.roots == pytest.approx((2.0**-1.5,))


def test_k1_linear_root():
    sols = bl.solve_constant_theta_eta(1, 0.5, 0.5)
    assert sols.roots == (1.0,) and sols.regime == "not_applicable"
    assert bl.count_solutions(1, 2.0, 0.5) == 0


def test_alpha_recursion_exact():
    for k in (2, 3):
        a = bl.alpha_sequence(Fraction(5), k, 15)
        assert all(a[i + 1] == a[i] / k - 1 for i in range(len(a) - 1))
        assert a[0] == Fraction(5, k) - 1


@pytest.mark.parametrize("k,theta,alpha_1", [(2, 0.5, -5), (3, 2.0, 0), (2, 2.0, 5)])
def test_level_family_solves_equation(k, theta, alpha_1):
    p = ModelParams.from_theta_eta(k, 1, theta, 0.0)
    law = bl.j_infinite_level_family(p, alpha_1, 13)
    assert bl.max_residual(law, p, 12) <= 1e-12
    assert law.level_value(100) == bl.j_infinite_fixed_point(k, theta)


def test_fixed_point_member_is_constant():
    k, theta = 3, 0.5
    p = ModelParams.from_theta_eta(k, 1, theta, 0.0)
    law = bl.j_infinite_level_family(p, -k / (k - 1), 6)
    assert all(law.level_value(d) == pytest.approx(bl.j_infinite_fixed_point(k, theta)) for d in range(1, 7))


def test_one_dimensional_family_is_geometric():
    p = ModelParams.from_theta_eta(1, 1, 2.0, 0.0)
    law = bl.j_infinite_1d_family(2.0, 3.0, 6)
    assert bl.max_residual(law, p, 5) <= 1e-15
    assert law.level_value(4) == pytest.approx(3.0 / 8)


def test_residual_needs_next_level():
    law = bl.LevelLaw((1.0, 2.0))
    p = ModelParams.from_theta_eta(2, 1, 0.5, 0.5)
    with pytest.raises(bl.HorizonExceeded):
        bl.residual(law, tree.VertexId((0, 0)), p)
    with pytest.raises(ValueError):
        bl.residual(law, tree.ROOT, p)


@given(st.lists(st.floats(0.01, 10.0), min_size=4, max_size=4))
def test_law_from_leaves_is_compatible(leaves):
    p = ModelParams.from_theta_eta(2, 2, 0.7, 0.3)
    law = bl.law_from_leaves(p, 2, leaves)
    assert bl.max_residual(law, p, 1) <= 1e-12 * max(1.0, max(law.values.values()))


@pytest.mark.parametrize(
    "law",
    [bl.ConstantLaw(0.3), bl.LevelLaw((1.0, 0.5), tail=0.25), bl.LevelLaw((1.0, 0.5))],
)
def test_law_dict_roundtrip(law):
    back = bl.law_from_dict(law.to_dict())
    for d in range(1, 4):
        try:
            want = law.level_value(d)
        except bl.HorizonExceeded:
            continue
        assert back.level_value(d) == want


def test_perturbed_law_shifts_every_value():
    law = bl.LevelLaw((1.0, 0.5), tail=0.25).perturbed(1e-3)
    assert law.level_value(1) == 1.001 and law.level_value(9) == 0.251
