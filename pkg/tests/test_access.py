import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnshare.access import (
    access_plan,
    align_band,
    frame_interference,
    place_phase1,
    place_phase2_ergodic,
    place_phase2_frame,
)
from crnshare.harness import presets
from crnshare.netmodel import SystemConfig
from crnshare.oracles import best_discrete_placement, conditional_active_integral
from crnshare.traffic import TrafficParams

TP = TrafficParams(1.0, 1.0)


def single_band(alpha=0.5, delta=0.1, t_f=1.0, tp=TP):
    return SystemConfig(1, 1, ((0,),), alpha, delta, 1.0, 1.0, 0.1, traffic=tp, frame_duration=t_f)


def test_phase1_placement_examples():
    cfg = single_band()
    assert place_phase1(0.2, 0, cfg).pieces[0] == pytest.approx((0.1, 0.3))
    assert place_phase1(0.2, 1, cfg).pieces[0] == pytest.approx((0.3, 0.5))
    assert place_phase1(0.0, 1, cfg).is_empty()


def test_phase2_placement_examples():
    cfg = single_band()
    assert place_phase2_frame(0.3, 0, cfg).pieces[0] == pytest.approx((0.5, 0.8))
    assert place_phase2_frame(0.3, 1, cfg).pieces[0] == pytest.approx((0.7, 1.0))
    cfg = single_band(delta=0.05)
    assert place_phase2_ergodic(0.3, 0, cfg).pieces[0] == pytest.approx((0.55, 0.85))
    assert place_phase2_ergodic(0.3, 1, cfg).pieces[0] == pytest.approx((0.7, 1.0))


def test_placement_in_time_units():
    cfg = single_band(t_f=2.0)
    assert place_phase1(0.2, 0, cfg).pieces[0] == pytest.approx((0.2, 0.6))


def test_placement_errors():
    cfg = single_band()
    with pytest.raises(ValueError):
        place_phase1(0.45, 0, cfg)
    with pytest.raises(ValueError):
        place_phase2_frame(-0.1, 0, cfg)
    with pytest.raises(ValueError):
        place_phase1(0.1, 2, cfg)


def test_unknown_mode():
    with pytest.raises(ValueError):
        access_plan(single_band(), "triple-sensing")


def test_frame_interference_examples():
    cfg = single_band()
    assert frame_interference([0.0], [0.0], [1], cfg) == 0.0
    val = frame_interference([0.4], [0.0], [0], cfg)
    assert val == pytest.approx(conditional_active_integral(TP, 0, 0.1, 0.5, tol=1e-12), abs=1e-12)
    assert val == pytest.approx(0.08729, abs=5e-6)


def test_frame_interference_bounds_and_y():
    cfg = single_band()
    with pytest.raises(ValueError):
        frame_interference([0.5], [0.0], [0], cfg)
    with pytest.raises(ValueError):
        frame_interference([0.1], [0.1], [0], cfg, mode="ergodic")


def _quadrature_interference(theta1, theta2, x, y, cfg, mode):
    plan = access_plan(cfg, mode)
    total = 0.0
    for m, tp in enumerate(cfg.traffic):
        for win, th, s in ((plan.phase1, theta1[m], x[m]), (plan.phase2, theta2[m], y[m] if mode == "ergodic" else x[m])):
            a, b = win.span(th, s)
            # conditioned on the state at the window origin
            total += conditional_active_integral(tp, s, float(a) - win.origin, float(b) - win.origin, tol=1e-12)
    return total


@given(
    st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
    st.lists(st.integers(0, 1), min_size=4, max_size=4),
    st.sampled_from(["frame", "ergodic"]),
)
def test_frame_interference_matches_quadrature(u, s, mode):
    cfg = presets.fig4_config().replace(traffic=(TrafficParams(0.5, 2.0), TrafficParams(3.0, 1.0)))
    plan = access_plan(cfg, mode)
    th1 = np.array(u[:2]) * plan.phase1.bound
    th2 = np.array(u[2:]) * plan.phase2.bound
    x, y = np.array(s[:2]), np.array(s[2:])
    val = frame_interference(th1, th2, x, cfg, y if mode == "ergodic" else None, mode=mode)
    assert val == pytest.approx(_quadrature_interference(th1, th2, x, y, cfg, mode), abs=1e-9)


@pytest.mark.parametrize("mode", ["frame", "ergodic"])
@given(st.floats(0.0, 1.0), st.integers(0, 1))
def test_best_theta_minimises_lagrangian(mode, value, state):
    cfg = single_band()
    r, pi = cfg.rate_sum[0], cfg.active_prob[0]
    for win in (access_plan(cfg, mode).phase1, access_plan(cfg, mode).phase2):
        best = float(win.best_theta(value, state, r, pi))
        grid = np.linspace(0.0, win.bound, 2001)
        obj = win.cost(grid, state, r, pi) - value * grid
        mine = float(win.cost(best, state, r, pi)) - value * best
        assert mine <= obj.min() + 1e-12


def test_lemma_placement_beats_grid_schedules():
    cfg = single_band()
    r, pi = cfg.rate_sum[0], cfg.active_prob[0]
    for win in (access_plan(cfg).phase1, access_plan(cfg).phase2, access_plan(cfg, "ergodic").phase2):
        for theta in (0.1, 0.3):
            for s in (0, 1):
                lemma = float(win.cost(theta, s, r, pi))
                search = best_discrete_placement(TP, s, theta, win.lead, win.end, n_grid=60)
                assert lemma <= search.best_value + 1e-9
                assert search.n_candidates > 60


def test_sensing_free_cost_is_linear():
    cfg = single_band()
    win = access_plan(cfg, "sensing-free").phase1
    assert float(win.cost(0.3, 1, cfg.rate_sum[0], cfg.active_prob[0])) == pytest.approx(0.15)
    assert float(win.best_theta(0.5, 0, cfg.rate_sum[0], 0.5)) == 0.0
    assert float(win.best_theta(0.51, 0, cfg.rate_sum[0], 0.5)) == pytest.approx(win.bound)


def test_align_band_example():
    out = align_band(np.array([0.1, 0.3, 0.2, 0.0]), ((0, 1), (2, 3)))
    np.testing.assert_array_equal(out, [0.3, 0.2])
    batch = align_band(np.array([[0.1, 0.3], [0.4, 0.2]]), ((0, 1),))
    np.testing.assert_array_equal(batch, [[0.3], [0.4]])
