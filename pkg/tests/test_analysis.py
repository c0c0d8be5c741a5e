import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebrake.analysis import (
    A0Side,
    EquilibriumKind,
    RegimeReport,
    Stability,
    alpha_double_root,
    bistable_integral,
    boundary_equilibria,
    c_brake_into_drive,
    c_drive_upper,
    classify_stability,
    cooperative_boundary,
    dv_f01_closed_form,
    equilibria,
    estimate_b_bar1,
    evasion_threshold,
    find_a0,
    interior_equilibria,
    jacobian,
    kpp_speed,
    pp_bound_constant,
    predator_prey_margin,
    regime_report,
    speed_report,
    theta_growth_rates,
    theta_transverse_rate,
    w_critical_point,
)
from drivebrake.model import gametes, growth, make_params, mean_fitness, reaction

# frozen after the first grid bisection (60 x 60 lattice, tol 1e-4)
B_BAR1_055_05 = 0.6666259758958739


# -- bistable integral ---------------------------------------------------------


def test_bistable_integral_signs_and_limits():
    assert bistable_integral(0.5 + 1e-9) > 0
    assert bistable_integral(1.0) == -0.5
    assert bistable_integral(1.0, method="quad") == pytest.approx(-0.5, abs=1e-12)
    assert abs(bistable_integral(0.6965)) < 1e-3
    with pytest.raises(ValueError):
        bistable_integral(0.5)
    with pytest.raises(ValueError):
        bistable_integral(0.7, method="simpson")


def test_closed_form_matches_quadrature():
    rng = np.random.default_rng(11)
    for a in rng.uniform(0.5 + 1e-3, 1.0, 20):
        assert bistable_integral(a) == pytest.approx(bistable_integral(a, "quad"), abs=1e-8)


def test_find_a0():
    a0 = find_a0()
    assert 0.6955 < a0 < 0.6975
    assert abs(bistable_integral(a0)) < 1e-9
    assert bistable_integral(a0 - 0.01) > 0 > bistable_integral(a0 + 0.01)


# -- equilibria ----------------------------------------------------------------


def test_origin_stability_switches_at_one_half():
    eq = {e.kind: e for e in boundary_equilibria(make_params(0.6, 0.1))}
    assert eq[EquilibriumKind.CORNER00].stability is Stability.STABLE_NODE
    assert eq[EquilibriumKind.CORNER10].stability is Stability.SADDLE
    assert eq[EquilibriumKind.CORNER01].stability is Stability.SADDLE
    eq = {e.kind: e for e in boundary_equilibria(make_params(0.4, 0.1))}
    assert eq[EquilibriumKind.CORNER00].stability is Stability.SADDLE
    assert EquilibriumKind.THETA not in eq


def test_corner_jacobians_confirm_rules():
    for a in (0.3, 0.7):
        p = make_params(a, 0.2, 0.5)
        for e in boundary_equilibria(p)[:3]:
            assert classify_stability(jacobian(p, e.location)) is e.stability


def test_theta_node_unstable_for_small_brake_cost():
    a, b, h = 0.6, 0.1, 0.5
    p = make_params(a, b, h)
    (theta,) = [e for e in boundary_equilibria(p) if e.kind is EquilibriumKind.THETA]
    assert theta.location.u == pytest.approx(1 / 3)
    assert theta.stability is Stability.UNSTABLE_NODE
    d1, f2 = theta_growth_rates(p)
    assert d1 > 0 and f2 > 0
    th = (2 * a - 1) / a
    displayed = ((1 - b + a - b) * (2 * a - 1) + (1 - h * b) * (1 - a)) / (a * (1 - a - a * (1 - th) ** 2))
    assert displayed > 0
    assert f2 == pytest.approx(0.85, abs=1e-12)


@given(st.floats(0.51, 0.99), st.floats(0.0, 0.99), st.floats(0.0, 1.0))
def test_theta_transverse_rate_closed_form(a, b, h):
    p = make_params(a, b, h)
    direct = growth(p, (2 * a - 1) / a, 0.0)[1]
    assert theta_transverse_rate(a, b, h) == pytest.approx(direct, abs=1e-10)


def test_theta_node_turns_saddle_for_costly_brake():
    p = make_params(0.55, 0.5, 1.0)
    (theta,) = [e for e in boundary_equilibria(p) if e.kind is EquilibriumKind.THETA]
    assert theta_transverse_rate(0.55, 0.5, 1.0) < 0
    assert theta.stability is Stability.SADDLE


def test_equal_costs_full_dominance_interior_state():
    eqs = interior_equilibria(make_params(0.6, 0.6, 1.0))
    assert len(eqs) == 1
    e = eqs[0]
    a = 0.6
    assert abs(e.location.u - a / (4 * (1 - a))) < 1e-10
    assert abs(e.location.v - (2 - 3 * a) / (4 * (1 - a))) < 1e-10
    assert e.stability is Stability.UNSTABLE_SPIRAL


def test_unique_spiral_for_monostable_drive():
    eqs = interior_equilibria(make_params(0.4, 0.1, 0.2))
    assert len(eqs) == 1
    assert eqs[0].stability in (Stability.STABLE_SPIRAL, Stability.UNSTABLE_SPIRAL)


def test_no_coexistence_for_cheap_brake_and_bistable_drive():
    assert interior_equilibria(make_params(0.55, 0.05, 0.5)) == []


@given(st.floats(0.02, 0.98), st.floats(0.01, 0.98), st.floats(0.0, 1.0))
def test_interior_states_solve_defining_equations(a, b, h):
    p = make_params(a, b, h)
    for e in interior_equilibria(p):
        u, v = e.location
        g1, g2 = gametes(p, u, v)
        assert abs(g1 - g2) < 1e-10 and abs(g1 - mean_fitness(p, u, v)) < 1e-10
        assert u > 0 and v > 0 and u + v < 1
        r = reaction(p, u, v)
        assert abs(r.du) < 1e-9 and abs(r.dv) < 1e-9


def test_jacobian_against_directional_derivatives():
    p = make_params(0.45, 0.3, 0.7)
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = np.array([0.3, 0.2]) + 0.1 * rng.random(2)
        d = rng.normal(size=2)
        e = 1e-6
        rp = reaction(p, *(s + e * d))
        rm = reaction(p, *(s - e * d))
        fd = (np.array([rp.du, rp.dv]) - np.array([rm.du, rm.dv])) / (2 * e)
        np.testing.assert_allclose(jacobian(p, s) @ d, fd, atol=1e-7)


def test_classify_stability_matrices():
    assert classify_stability(np.diag([-1.0, -2.0])) is Stability.STABLE_NODE
    assert classify_stability(np.diag([1.0, 2.0])) is Stability.UNSTABLE_NODE
    assert classify_stability(np.diag([-1.0, 2.0])) is Stability.SADDLE
    assert classify_stability(np.array([[0.1, 1.0], [-1.0, 0.1]])) is Stability.UNSTABLE_SPIRAL
    assert classify_stability(np.array([[-0.1, 1.0], [-1.0, -0.1]])) is Stability.STABLE_SPIRAL
    assert classify_stability(np.array([[0.0, 1.0], [-1.0, 0.0]])) is Stability.UNDETERMINED


def test_equilibria_combines_both_lists():
    p = make_params(0.6, 0.6, 1.0)
    kinds = [e.kind for e in equilibria(p)]
    assert kinds.count(EquilibriumKind.INTERIOR) == 1 and EquilibriumKind.THETA in kinds


# -- critical point of the mean fitness -------------------------------------------


def test_w_critical_point_degenerate():
    assert w_critical_point(make_params(0.6, 0.6, 1.0)) is None


def test_w_critical_point_example():
    a, b, h = 0.6, 0.2, 0.5
    p = make_params(a, b, h)
    pt = w_critical_point(p)
    det = a * (a - b) + (1 - h) ** 2 * b**2
    assert pt.v == pytest.approx(a * (a - b) / det, abs=1e-15) and pt.v > 0
    assert not (pt.u > 0 and pt.v > 0 and pt.u + pt.v < 1)
    e = 1e-6
    gu = (mean_fitness(p, pt.u + e, pt.v) - mean_fitness(p, pt.u - e, pt.v)) / (2 * e)
    gv = (mean_fitness(p, pt.u, pt.v + e) - mean_fitness(p, pt.u, pt.v - e)) / (2 * e)
    assert abs(gu) < 1e-8 and abs(gv) < 1e-8


@given(st.floats(0.01, 0.99), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_w_critical_point_never_interior_when_a_ge_b(a, frac, h):
    w_critical_point(make_params(a, a * frac, h))  # raises if interior


# -- predator-prey structure --------------------------------------------------------


def test_dv_f1_at_origin_for_free_brake():
    p = make_params(0.6, 0.0, 0.5)
    assert dv_f01_closed_form(0.6, 0.0, 0.0) == pytest.approx(-0.8, abs=1e-15)
    e = 1e-6
    fd = (growth(p, 0.0, e)[0] - growth(p, 0.0, -e)[0]) / (2 * e)
    assert fd == pytest.approx(-0.8, abs=1e-8)


def test_bound_constant():
    assert pp_bound_constant(0.3) == pytest.approx(0.46, abs=1e-15)
    assert pp_bound_constant(0.8) == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("a", [0.2, 0.3, 0.45, 0.6, 0.8, 0.95])
def test_free_brake_bounds(a):
    m = predator_prey_margin(make_params(a, 0.0, 0.5), grid_n=60)
    assert m.holds and m.b0_bounds_hold
    assert m.min_du_f2 >= 1 - a - 1e-6
    assert m.max_dv_f1 <= -2 * pp_bound_constant(a) + 1e-6


def test_margin_argument_checks():
    with pytest.raises(ValueError):
        predator_prey_margin(make_params(0.5, 0.1), grid_n=1)
    assert predator_prey_margin(make_params(0.5, 0.1)).b0_bounds_hold is None


def test_b_bar1_regression_and_bracket():
    assert estimate_b_bar1(0.55, 0.5) == pytest.approx(B_BAR1_055_05, abs=1e-4)
    for a, h in [(0.3, 0.5), (0.7, 0.2), (0.9, 1.0)]:
        bb = estimate_b_bar1(a, h)
        assert 0 < bb <= 1
        assert predator_prey_margin(make_params(a, bb, h)).holds
        if 1.05 * bb <= a:
            assert not predator_prey_margin(make_params(a, 1.05 * bb, h)).holds


# -- speeds -----------------------------------------------------------------------


def test_kpp_boundary_speeds_coincide():
    assert abs(kpp_speed(0.25) - math.sqrt(2)) < 1e-12
    assert abs(c_drive_upper(0.25) - math.sqrt(2)) < 1e-12
    assert math.isnan(kpp_speed(0.3)) and math.isnan(c_drive_upper(0.6))


def test_alpha_bound_relation():
    for a in (0.3, 0.4, 0.49):
        assert c_drive_upper(a) == pytest.approx(2 * math.sqrt(alpha_double_root(a)), abs=1e-14)


def test_brake_into_drive_speed():
    assert c_brake_into_drive(0.55, 0.45) == pytest.approx(2 * math.sqrt(0.65 / 0.45), abs=1e-15)
    assert c_brake_into_drive(0.55, 0.45) == pytest.approx(2.4037, abs=1e-4)
    assert math.isnan(c_brake_into_drive(0.2, 0.7))


def test_equal_cost_evasion_threshold():
    a1 = evasion_threshold(0.0, equal_cost=True)
    assert abs(a1 - 1 / 9) < 1e-6
    assert abs(c_brake_into_drive(1 / 9, 1 / 9) - 2) < 1e-12
    assert abs(c_drive_upper(1 / 9) - 2) < 1e-12


def test_brake_outruns_kpp_drive():
    for a in np.linspace(0.01, 0.25, 25):
        for b in np.linspace(0.0, a, 10):
            assert c_brake_into_drive(a, b) > kpp_speed(a)


def test_evasion_threshold_increases_with_b():
    vals = [evasion_threshold(b) for b in np.linspace(0.0, 0.3, 13)]
    assert all(np.isfinite(vals))
    assert np.all(np.diff(vals) > 0)


def test_speed_report_fields():
    r = speed_report(make_params(0.2, 0.1))
    assert r["kpp_flag"] and r["c_drive_kpp"] == pytest.approx(2 * math.sqrt(0.6))
    assert r["alpha"] is None
    r = speed_report(make_params(0.4, 0.1))
    assert not r["kpp_flag"] and r["c_drive_kpp"] is None
    assert r["alpha"] == pytest.approx(alpha_double_root(0.4))


# -- cooperative region (a = b, h = 1) --------------------------------------------


def test_cooperative_boundary_values():
    th = 1 / 3
    assert cooperative_boundary(0.6, th) == pytest.approx(0.0, abs=1e-15)
    assert cooperative_boundary(0.6, 0.0) == pytest.approx(0.5 * (2 - math.sqrt(4 - 4 * th)), abs=1e-15)
    np.testing.assert_allclose(cooperative_boundary(0.6, np.array([0.0, th])), [1 - math.sqrt(2 / 3), 0], atol=1e-15)
    with pytest.raises(ValueError):
        cooperative_boundary(0.4, 0.1)


def test_cross_partial_flips_across_curve():
    p = make_params(0.6, 0.6, 1.0)
    c = cooperative_boundary(0.6, 0.1)
    below, above = jacobian(p, (0.1, 0.5 * c)), jacobian(p, (0.1, 1.5 * c))
    assert below[0, 1] > 0 and below[1, 0] > 0
    assert above[0, 1] < 0 and above[1, 0] > 0


# -- report ------------------------------------------------------------------------


def test_regime_report_example():
    rep = regime_report(make_params(0.55, 0.05, 0.5))
    text = rep.to_text()
    kv = dict(line.split("=", 1) for line in text.strip().splitlines())
    assert float(kv["theta"]) == pytest.approx(0.1818, abs=1e-4)
    assert float(kv["c_brake_into_drive"]) == pytest.approx(2 * math.sqrt(1.45 / 0.45))
    assert kv["c_drive_kpp"] == "undefined" and kv["a0_side"] == "Below"
    for k in ("predator_prey_b_bar1", "lemma_b_bar2", "lemma_b_bar3"):
        assert 0 < float(kv[k]) <= 1
    assert 0 < float(kv["eta_bar"]) < (1 - rep.theta) / 4
    assert RegimeReport.csv_header().split(",") == list(kv)
    assert rep.to_csv_row().split(",") == list(kv.values())


def test_regime_report_monostable_without_certification():
    rep = regime_report(make_params(0.3, 0.1), certify=False)
    assert rep.theta is None and rep.bistable_integral is None
    assert rep.lemma_b_bar2 is None and rep.predator_prey_b_bar1 is None
    assert rep.a0_side is A0Side.BELOW
    assert "theta=undefined" in rep.to_text()
    assert regime_report(make_params(0.8, 0.1), certify=False).a0_side is A0Side.ABOVE
