import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnshare.access import access_plan
from crnshare.frame_solver import (
    DualVars,
    SolverOptions,
    dual_value,
    f_aux,
    inner_solution,
    kkt_residual,
    power_ratios,
    ratio_phase1,
    ratios_phase2,
    solve_frame,
    solve_inner,
    solve_relay_free,
    solve_sensing_free,
    subgradient,
    theta_phase1,
    theta_phase2_frame,
)
from crnshare.harness import presets
from crnshare.netmodel import Nsi, SystemConfig, rate_r1, rate_r2
from crnshare.oracles import bisect_root, solve_reformulation
from crnshare.traffic import TrafficParams, transition_prob

LN2 = math.log(2.0)
gain = st.floats(0.01, 20.0)
mult = st.floats(0.0, 5.0)
pos_mult = st.floats(0.05, 5.0)


@pytest.fixture(scope="module")
def fig4_solution():
    return solve_frame(presets.fig4_nsi(), presets.fig4_config(0.3))


# ---------------------------------------------------------------------------
# closed-form pieces


def test_f_aux_examples():
    assert f_aux(0.0) == 0.0
    assert f_aux(1.0) == pytest.approx(1 - 1 / (2 * LN2), abs=1e-15)
    assert f_aux(1.0) == pytest.approx(0.27865, abs=5e-6)
    v = f_aux(np.linspace(0, 50, 200))
    assert np.all(np.diff(v) > 0)
    with pytest.raises(ValueError):
        f_aux(-0.5)


def test_ratio_phase1_examples():
    assert ratio_phase1(DualVars(0, 0, 1, 1), 1.0, 1.0) == 0.0
    ref = bisect_root(lambda x: 2 / (1 + 2 * x) - LN2, 0.0, 10.0)
    assert ratio_phase1(DualVars(1, 0, 1, 1), 2.0, 1.0) == pytest.approx(ref, abs=1e-10)
    assert ratio_phase1(DualVars(1, 0, 1, 1), 2.0, 1.0) == pytest.approx(0.94270, abs=5e-6)
    ref = bisect_root(lambda x: 2 / (1 + x) - LN2, 0.0, 10.0)
    assert ratio_phase1(DualVars(1, 1, 1, 1), 1.0, 1.0) == pytest.approx(ref, abs=1e-10)
    assert ratio_phase1(DualVars(1, 1, 1, 1), 1.0, 1.0) == pytest.approx(1.88539, abs=5e-6)


def test_ratio_phase1_needs_power_price():
    with pytest.raises(ValueError):
        ratio_phase1(DualVars(1, 1, 0, 1), 1.0, 1.0)


@given(mult, mult, pos_mult, gain, gain)
def test_ratio_phase1_matches_bisection(z, s, e, g_sr, g_sd):
    nu = DualVars(z, s, e, 1.0)
    a = max(g_sr, g_sd)

    def lhs(x):
        return z * a / (1 + a * x) + s * g_sd / (1 + g_sd * x) - e * LN2

    x = ratio_phase1(nu, g_sr, g_sd)
    if lhs(0.0) <= 0:
        assert x == 0.0
    else:
        ref = bisect_root(lhs, 0.0, (z + s) / (e * LN2) + 1.0)
        assert x == pytest.approx(ref, abs=1e-10 * max(1.0, ref))


def test_ratios_phase2_examples():
    assert ratios_phase2(DualVars(0, 0, 1, 1), 1.0, 1.0) == (0.0, 0.0)
    # without the destination cut the relay earns nothing: direct water level
    p2, q = ratios_phase2(DualVars(1, 0, 1, 1), 0.5, 3.0)
    assert q == 0.0
    assert p2 == 0.0  # water level 1/ln2 sits below 1/g_sd = 2
    p2, q = ratios_phase2(DualVars(2, 0, 1, 1), 0.5, 3.0)
    assert p2 == pytest.approx(2 / LN2 - 2.0, abs=1e-12)


def _phase2_kkt(nu, sd, rd, p2, q):
    z, s, e, h = nu.zeta, nu.sigma, nu.epsilon, nu.eta
    dp = z * sd / ((1 + sd * p2) * LN2) + s * sd / ((1 + sd * p2 + rd * q) * LN2) - e
    dq = s * rd / ((1 + sd * p2 + rd * q) * LN2) - h
    res = [abs(dp) if p2 > 0 else max(dp, 0.0), abs(dq) if q > 0 else max(dq, 0.0)]
    return max(res) / (1.0 + e + h)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), pos_mult, pos_mult, gain, gain)
def test_ratios_phase2_kkt(z, s, e, h, sd, rd):
    nu = DualVars(z, s, e, h)
    p2, q = ratios_phase2(nu, sd, rd)
    assert p2 >= 0 and q >= 0
    assert _phase2_kkt(nu, sd, rd, p2, q) <= 1e-9


@given(st.floats(0.1, 5.0), pos_mult, gain)
def test_ratios_phase2_without_direct_link(s, h, rd):
    nu = DualVars(0.5, s, 1.0, h)
    p2, q = ratios_phase2(nu, 0.0, rd)
    assert p2 == 0.0
    assert q == pytest.approx(max(s / (h * LN2) - 1 / rd, 0.0), abs=1e-12)


def test_theta_phase1_zero_multipliers(small_nsi, small_cfg):
    nu = DualVars(0, 0, 1, 1)
    r = power_ratios(nu, small_nsi, small_cfg)
    assert theta_phase1(nu, r, 0, 0, small_cfg) == 0.0
    assert theta_phase2_frame(nu, r, 1, 1, small_cfg) == 0.0


@given(st.floats(0.01, 1.5), st.floats(0.01, 1.5), st.floats(0.05, 1.5), st.floats(0.05, 1.5))
def test_theta_stationarity(z, s, e, h):
    cfg, nsi = presets.fig4_config(), presets.fig4_nsi()
    nu = DualVars(z, s, e, h)
    r = power_ratios(nu, nsi, cfg)
    tp = cfg.traffic[0]
    plan = access_plan(cfg)
    for m in range(2):
        x = int(nsi.x[m])
        for win, th, v in (
            (plan.phase1, theta_phase1(nu, r, x, m, cfg), r.v1[m]),
            (plan.phase2, theta_phase2_frame(nu, r, x, m, cfg), r.v2[m]),
        ):
            # conditional ACTIVE probability at the growing edge of the interval
            t_edge = win.lead + th if x == 0 else win.end - th
            marg = transition_prob(tp, t_edge, x, 1)
            if 0 < th < win.bound:
                assert abs(marg - v) <= 1e-9
            elif th == 0:
                assert marg >= v - 1e-12
            else:
                assert marg <= v + 1e-12


def test_inner_zero_multipliers(small_nsi, small_cfg):
    al = inner_solution(DualVars(0, 0, 1, 1), small_nsi, small_cfg)
    assert np.all(al.theta1 == 0) and np.all(al.theta2 == 0)
    assert np.all(al.p_s1 == 0) and np.all(al.p_r == 0)


def test_sensed_active_band_gets_less_time():
    cfg = presets.fig4_config()
    same = Nsi([1.3, 1.3], [0.5, 0.5], [1.3, 1.3], [0, 1])
    al = inner_solution(DualVars(0.3, 0.3, 0.3, 0.3), same, cfg)
    assert al.theta1[1] <= al.theta1[0]
    assert al.theta2[1] <= al.theta2[0]


# ---------------------------------------------------------------------------
# dual function


def test_subgradient_at_zero_allocation(small_nsi, small_cfg):
    al = inner_solution(DualVars(0, 0, 1, 1), small_nsi, small_cfg)
    h = subgradient(DualVars(0, 0, 1, 1), al, small_nsi, small_cfg)
    np.testing.assert_allclose(h, [0.6, 0.6, -1.0, -1.0])


@pytest.mark.parametrize("nu", [(0.2, 0.3, 0.25, 0.1), (0.5, 0.1, 0.4, 0.3), (0.05, 0.4, 0.2, 0.05)])
def test_subgradient_matches_finite_differences(nu, small_nsi, small_cfg):
    nu = np.array(nu)
    al = inner_solution(nu, small_nsi, small_cfg)
    h = subgradient(nu, al, small_nsi, small_cfg)

    def d(v):
        return dual_value(v, solve_inner(v, small_nsi, small_cfg), small_cfg)

    step = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        fd = (d(nu + e) - d(nu - e)) / (2 * step)
        assert fd == pytest.approx(h[i], abs=1e-3 * max(1.0, abs(h[i])))


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_weak_duality(z, s, e, h):
    nsi, cfg = presets.fig4_nsi(), presets.fig4_config(0.3)
    ref = _fig4_optimum()
    nu = np.array([z, s, e, h])
    assert dual_value(nu, solve_inner(nu, nsi, cfg), cfg) <= ref + 1e-9


_CACHE = {}


def _fig4_optimum():
    if "fig4" not in _CACHE:
        _CACHE["fig4"] = solve_frame(presets.fig4_nsi(), presets.fig4_config(0.3)).objective
    return _CACHE["fig4"]


# ---------------------------------------------------------------------------
# solver


def test_fig4_solution_shape(fig4_solution):
    rep = fig4_solution
    assert rep.status == "Optimal"
    al = rep.allocation
    # the band sensed ACTIVE stays silent at this target
    assert al.theta1[1] == 0.0 and al.theta2[1] == 0.0
    assert rep.kkt_residual <= 1e-6
    assert rep.dual_value <= rep.objective + 1e-12
    assert rep.objective - rep.dual_value <= 1e-6


def test_fig4_feasible_and_matches_generic_solver(fig4_solution):
    cfg, nsi = presets.fig4_config(0.3), presets.fig4_nsi()
    al = fig4_solution.allocation
    rmin = cfg.r_min
    assert rate_r1(al, nsi, cfg) >= rmin * (1 - 1e-6)
    assert rate_r2(al, nsi, cfg) >= rmin * (1 - 1e-6)
    assert al.source_power <= cfg.p_s_max * (1 + 1e-6)
    assert al.relay_power <= cfg.p_r_max * (1 + 1e-6)
    ref = solve_reformulation(nsi, cfg)
    assert ref.success
    assert fig4_solution.objective == pytest.approx(ref.objective, rel=1e-4)


def test_phase1_saturates_at_high_target():
    rep = solve_frame(presets.fig4_nsi(), presets.fig4_config(0.42))
    assert rep.status == "Optimal"
    assert rep.allocation.theta1[0] == 0.4
    assert rep.allocation.theta2[0] < 0.5


def test_far_too_high_target_is_infeasible():
    rep = solve_frame(presets.fig4_nsi(), presets.fig4_config(5.0))
    assert rep.status == "Infeasible"
    assert not rep.feasible


def test_random_instances_match_generic_solver():
    rng = np.random.default_rng(2024)
    for _ in range(3):
        g = rng.uniform(0.2, 2.0, size=(3, 2))
        nsi = Nsi(g[0], g[1], g[2], rng.integers(0, 2, size=2))
        cfg = presets.fig4_config(float(rng.uniform(0.05, 0.25)))
        rep = solve_frame(nsi, cfg)
        ref = solve_reformulation(nsi, cfg)
        assert rep.status == "Optimal"
        assert rep.objective == pytest.approx(ref.objective, rel=1e-4)
        assert rep.kkt_residual <= 1e-6


def test_time_scaling_invariance():
    cfg, nsi = presets.fig4_config(0.2), presets.fig4_nsi()
    c = 3.0
    scaled = cfg.replace(frame_duration=c, traffic=TrafficParams(1.0 / c, 1.0 / c))
    a = solve_frame(nsi, cfg)
    b = solve_frame(nsi, scaled)
    np.testing.assert_allclose(b.allocation.theta1, a.allocation.theta1, atol=1e-6)
    np.testing.assert_allclose(b.allocation.theta2, a.allocation.theta2, atol=1e-6)
    np.testing.assert_allclose(b.allocation.p_s1, a.allocation.p_s1, atol=1e-6)
    np.testing.assert_allclose(b.allocation.span1, c * a.allocation.span1, atol=1e-5)


def test_relay_free_never_better(fig4_solution):
    cfg, nsi = presets.fig4_config(0.1), presets.fig4_nsi()
    prop = solve_frame(nsi, cfg)
    rf = solve_relay_free(nsi, cfg)
    assert rf.status == "Optimal"
    assert np.all(rf.allocation.p_r == 0)
    assert prop.objective <= rf.objective + 1e-8
    # at the higher target only the relay makes the frame feasible
    assert solve_relay_free(nsi, presets.fig4_config(0.3)).status == "Infeasible"


def test_relay_free_equals_proposed_without_relay_links():
    cfg = presets.fig4_config(0.1)
    nsi = presets.fig4_nsi().without_relay()
    a, b = solve_frame(nsi, cfg), solve_relay_free(nsi, cfg)
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_sensing_free_cost_and_ordering(fig4_solution):
    cfg, nsi = presets.fig4_config(0.3), presets.fig4_nsi()
    rep = solve_sensing_free(nsi, cfg)
    assert rep.status == "Optimal"
    al = rep.allocation
    pi = cfg.active_prob
    assert rep.objective == pytest.approx(float(np.sum(pi * (al.theta1 + al.theta2))), abs=1e-12)
    assert fig4_solution.objective <= rep.objective + 1e-8
    flipped = solve_sensing_free(nsi.with_sensing(x=1 - nsi.x), cfg)
    assert flipped.objective == pytest.approx(rep.objective, rel=1e-9)


def test_alignment_beats_unaligned_schedules():
    # one band of two sub-channels: compare with a grid of schedules giving
    # the two sub-channels different times, nested or back to back
    cfg = SystemConfig(2, 1, ((0, 1),), 0.5, 0.1, 1.0, 1.0, 0.3)
    nsi = Nsi([1.3, 1.4], [0.4, 0.5], [1.3, 1.4], [0])
    opt = solve_frame(nsi, cfg)
    assert opt.status == "Optimal"
    plan = access_plan(cfg)
    r, pi = cfg.rate_sum[0], cfg.active_prob[0]

    def cost(win, length):
        if length > win.bound + 1e-12:
            return math.inf
        return float(win.cost(length, 0, r, pi))

    g_a = np.maximum(nsi.g_sr, nsi.g_sd)
    t1_grid, t2_grid, p_grid = (0.1, 0.2, 0.3, 0.4), (0.1, 0.2, 0.3, 0.4, 0.5), (0.1, 0.25, 0.4)
    best = math.inf
    for t1 in itertools.product(t1_grid, repeat=2):
        for t2 in itertools.product(t2_grid, repeat=2):
            if t1[0] == t1[1] and t2[0] == t2[1]:
                continue
            c = min(cost(plan.phase1, max(t1)), cost(plan.phase1, sum(t1))) + min(
                cost(plan.phase2, max(t2)), cost(plan.phase2, sum(t2))
            )
            if c >= best:
                continue
            for ps1, ps2, pr in itertools.product(itertools.product(p_grid, repeat=2), repeat=3):
                if sum(ps1) + sum(ps2) > cfg.p_s_max or sum(pr) > cfg.p_r_max:
                    continue
                r1 = sum(t1[k] * math.log2(1 + ps1[k] * g_a[k] / t1[k])
                         + t2[k] * math.log2(1 + ps2[k] * nsi.g_sd[k] / t2[k]) for k in range(2))
                r2 = sum(t1[k] * math.log2(1 + ps1[k] * nsi.g_sd[k] / t1[k])
                         + t2[k] * math.log2(1 + (ps2[k] * nsi.g_sd[k] + pr[k] * nsi.g_rd[k]) / t2[k])
                         for k in range(2))
                if min(r1, r2) >= cfg.r_min:
                    best = c
                    break
    assert math.isfinite(best)
    assert opt.objective <= best + 1e-9


def test_kkt_residual_detects_perturbation(fig4_solution):
    cfg, nsi = presets.fig4_config(0.3), presets.fig4_nsi()
    nu = fig4_solution.duals.as_array()
    inner = solve_inner(nu, nsi, cfg)
    assert kkt_residual(nu, inner, nsi, cfg) <= 1e-6
    off = solve_inner(nu * 1.2, nsi, cfg)
    assert kkt_residual(nu, off, nsi, cfg) > 1e-6


def test_other_step_rules_are_consistent(fig4_solution):
    cfg, nsi = presets.fig4_config(0.3), presets.fig4_nsi()
    for rule in ("spg", "diminishing", "polyak"):
        rep = solve_frame(nsi, cfg, SolverOptions(step_rule=rule, max_iter=800, s0=0.1))
        assert rep.status in ("Optimal", "MaxIterations")
        if rate_r1(rep.allocation, nsi, cfg) >= cfg.r_min * (1 - 1e-6) and rep.status == "Optimal":
            assert rep.objective >= fig4_solution.objective - 1e-6
    with pytest.raises(ValueError):
        solve_frame(nsi, cfg, SolverOptions(step_rule="newton"))


def test_report_serialises(fig4_solution):
    doc = json.loads(fig4_solution.to_json())
    assert doc["status"] == "Optimal"
    assert set(doc["duals"]) == {"zeta", "sigma", "epsilon", "eta"}
    assert len(doc["allocation"]["theta1"]) == 2


def test_solver_options_from_dict():
    opts = SolverOptions.from_dict({"step_rule": "spg", "nu0": [1, 2, 3, 4]})
    assert opts.step_rule == "spg" and opts.nu0 == (1, 2, 3, 4)


def test_dual_vars_validation():
    with pytest.raises(ValueError):
        DualVars(-1.0, 0, 0, 0)
    with pytest.raises(ValueError):
        DualVars(float("nan"), 0, 0, 0)
