import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from zipper import boundary_law as bl
from zipper import gibbs, thermo
from zipper.model import ModelParams


@pytest.mark.parametrize("k,q,theta,eta", [(2, 2, 0.5, 0.2), (3, 1, 0.4, 0.1), (2, 8, 2.0, 0.05)])
def test_product_form_of_partition_function_for_roots(k, q, theta, eta):
    p = ModelParams.from_theta_eta(k, q, theta, eta)
    for z in bl.solve_constant(p).roots:
        law = bl.ConstantLaw(z)
        for n in (1, 2, 3, 4):
            dp = gibbs.log_partition_function(p, gibbs.fields_from_law(law, k, n))
            assert thermo.log_z_from_b(p, law, n) == pytest.approx(dp, rel=1e-12)


def test_product_form_for_nonuniform_and_level_laws():
    p = ModelParams.from_theta_eta(2, 2, 0.6, 0.3)
    law = bl.law_from_leaves(p, 3, [0.1, 2.0, 0.7, 5.0, 0.3, 0.3, 1.0, 0.05])
    dp = gibbs.log_partition_function(p, gibbs.fields_from_law(law, 2, 3))
    assert thermo.log_z_from_b(p, law, 3) == pytest.approx(dp, rel=1e-12)

    p = ModelParams.from_theta_eta(3, 2, 2.0, 0.0)
    law = bl.j_infinite_level_family(p, 4.0, 5)
    dp = gibbs.log_partition_function(p, gibbs.fields_from_law(law, 3, 4))
    assert thermo.log_z_from_b(p, law, 4) == pytest.approx(dp, rel=1e-12)


def test_finite_volume_free_energy_converges_to_b():
    p = ModelParams.from_theta_eta(2, 2, 0.5, 0.3)
    z = bl.solve_constant(p).roots[0]
    b = thermo.b_of(z, p.theta, p.eta)
    gaps = [abs(thermo.finite_volume_free_energy(p, bl.ConstantLaw(z), n) - b) for n in (4, 8, 12)]
    assert gaps[0] > gaps[1] > gaps[2]


@given(st.floats(0.05, 5), st.floats(0.01, 0.99))
def test_k2_free_energy_closed_form(theta, frac):
    eta = frac * bl.eta_critical(2, theta)
    for z in bl.solve_constant_theta_eta(2, theta, eta).roots:
        assert thermo.free_energy_k2(theta, z) == pytest.approx(thermo.b_of(z, theta, eta), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("q,beta_eps", [(1, 0.5), (2, 0.1), (8, 3.0), (3, math.log(3))])
def test_kittel_partition_is_geometric_sum(q, beta_eps):
    a = q * math.exp(-beta_eps)
    for N in range(1, 15):
        want = sum(a**j for j in range(N))
        assert thermo.kittel_1d_partition(q, beta_eps, 1.0, N) == pytest.approx(want, rel=1e-12)


def test_kittel_limit():
    assert thermo.kittel_1d_limit(2, 1.0, 0.1) == pytest.approx(math.log(2) - 0.1)
    assert thermo.kittel_1d_limit(2, 1.0, 5.0) == 0.0


def test_critical_temperature_examples():
    tc = thermo.critical_temperature(2, 8, 2 * math.log(2), math.log(2))
    assert tc.in_A and tc.value == pytest.approx(1.0, abs=1e-12)
    assert thermo.critical_temperature(2, 4, 1.0, 0.5).reason == "zero_denominator"
    assert thermo.critical_temperature(2, 8, 0.5, 1.0).reason == "non_positive"
    assert thermo.critical_temperature(3, 8, 1.0, math.inf).reason == "infinite_coupling"
    assert thermo.critical_temperature(1, 2, 1.0, math.inf).value == pytest.approx(1 / math.log(2))


@given(st.integers(2, 4), st.integers(1, 12), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=80, deadline=None)
def test_closed_form_critical_temperature_matches_numeric(k, q, eps, J):
    tc = thermo.critical_temperature(k, q, eps, J)
    assume(tc.value is not None and 0.05 < tc.value < 50)
    t_num = thermo.critical_temperature_numeric(k, q, eps, J, tc.value / 2, tc.value * 2)
    assert t_num == pytest.approx(tc.value, rel=1e-8)


@given(st.integers(2, 4), st.integers(1, 12), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=80, deadline=None)
def test_two_roots_on_predicted_side(k, q, eps, J):
    tc = thermo.critical_temperature(k, q, eps, J)
    assume(tc.value is not None and 0.05 < tc.value < 50)
    side = thermo.nonuniqueness_side(k, q, eps, J)
    below, above = thermo.phase_scan(k, q, eps, J, [0.8 * tc.value, 1.25 * tc.value], workers=1)
    assert (above.n_tigm, below.n_tigm) == ((2, 0) if side == "above" else (0, 2))


def test_q8_scan_flips_at_critical_temperature():
    pts = thermo.phase_scan(2, 8, 2 * math.log(2), math.log(2), thermo.temperature_grid(0.5, 3, 26))
    for pt in pts:
        T = pt.params.temperature
        if abs(T - 1) < 1e-9:
            assert pt.regime == "critical"
        else:
            assert pt.n_tigm == (2 if T > 1 else 0)


def test_parallel_scan_keeps_order(monkeypatch):
    temps = thermo.temperature_grid(1, 3, 30)
    serial = thermo.phase_scan(2, 8, 1.0, 0.3, temps, workers=1)
    monkeypatch.setenv("ZIPPER_THREADS", "4")
    assert thermo.worker_count() == 4
    parallel = thermo.phase_scan(2, 8, 1.0, 0.3, temps)
    assert [p.row() for p in serial] == [p.row() for p in parallel]


def test_row_layout():
    pt = thermo.phase_point(ModelParams.from_temperature(2, 8, 2 * math.log(2), math.log(2), 2.0))
    row = pt.row()
    assert tuple(row) == thermo.CSV_COLUMNS
    assert row["n_tigm"] == 2 and row["z_minus"] < row["z_plus"]
    assert row["f_minus"] > row["f_plus"]


def test_free_energy_curve_order():
    pts = thermo.phase_scan(2, 8, 2 * math.log(2), math.log(2), thermo.temperature_grid(1, 3, 11))
    assert thermo.FreeEnergyCurve.from_scan(pts).branch_order() == "minus_above"


def test_level_family_free_energy():
    p = ModelParams.from_theta_eta(2, 1, 2.0, 0.0)
    for alpha_1 in (-5.0, 0.0, 5.0):
        fe = thermo.free_energy_level(p, bl.j_infinite_level_family(p, alpha_1, 10), 9)
        assert fe.partial == pytest.approx(-0.5 * math.log(2.0), rel=1e-12)


def test_hard_constraint_direct_and_boundary_law_free_energies():
    rows = thermo.hard_constraint_free_energies(2, 1.0, 2, [0.5, 2.0], 10)
    for r in rows:
        assert r["f_boundary_law"] == pytest.approx(-0.5 * math.log(r["theta"]))
        assert abs(r["f_direct"] - r["f_direct_limit"]) < 0.05
