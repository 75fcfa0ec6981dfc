import inspect
import json

import numpy as np
import pytest

from crnshare.access import access_plan, frame_interference
from crnshare.ergodic import (
    ParameterPacket,
    TrainedPolicy,
    build_packet,
    inner_solution_ergodic,
    online_update,
    theta_phase2_ergodic,
    train_offline,
    training_sample,
)
from crnshare.frame_solver import DualVars, power_ratios, solve_frame, solve_inner, theta_phase1
from crnshare.harness import presets
from crnshare.harness.evaluation import eval_frames, evaluate_policy
from crnshare.netmodel import FadingParams, Nsi, sample_nsi

NU = DualVars(0.01, 0.006, 0.006, 0.001)
FIELDS = ("p_s1", "p_s2", "p_r", "theta1", "theta2", "span1", "span2")


@pytest.fixture(scope="module")
def cfg6():
    return presets.fig6_config(1.7)


@pytest.fixture(scope="module")
def omega(cfg6):
    return sample_nsi(cfg6, FadingParams(), 99, 1000)


@pytest.fixture(scope="module")
def trained(cfg6):
    return train_offline(cfg6, seed=3, n_samples=2000)


# ---------------------------------------------------------------------------
# inner solution


def test_zero_multipliers_give_silence(cfg6, omega):
    al = inner_solution_ergodic(DualVars(0, 0, 1, 1), omega, cfg6)
    assert np.all(al.theta1 == 0) and np.all(al.theta2 == 0)


def test_second_sensing_active_gets_less_time(cfg6):
    nsi = Nsi(np.ones(16) * 20, np.ones(16) * 3, np.ones(16) * 20, np.zeros(4, int), np.array([0, 1, 0, 1]))
    r = power_ratios(NU, nsi, cfg6)
    for m in range(4):
        assert theta_phase2_ergodic(NU, r, 1, m, cfg6) <= theta_phase2_ergodic(NU, r, 0, m, cfg6)


def test_second_phase_window_is_first_phase_window_shifted(cfg6):
    # with no sensing delay the Phase-2 rule after a second sensing is the
    # Phase-1 rule of a frame whose first phase lasts 1 - alpha
    shifted = cfg6.replace(alpha=1.0 - cfg6.alpha, delta=0.0)
    erg = access_plan(cfg6, "ergodic").phase2
    ph1 = access_plan(shifted).phase1
    r, pi = cfg6.rate_sum[0], cfg6.active_prob[0]
    for v in np.linspace(0.0, 1.0, 21):
        for s in (0, 1):
            assert erg.best_theta(v, s, r, pi) == ph1.best_theta(v, s, r, pi)
            assert erg.cost(0.3, s, r, pi) == ph1.cost(0.3, s, r, pi)


def test_phase1_only_matches_frame_rule(cfg6, omega):
    a = inner_solution_ergodic(NU, omega, cfg6, "phase1-only")
    b = solve_inner(NU, omega, cfg6, "frame").allocation
    for k in FIELDS:
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_variants_share_phase1(cfg6, omega):
    a = inner_solution_ergodic(NU, omega, cfg6, "two-sensing")
    b = inner_solution_ergodic(NU, omega, cfg6, "phase1-only")
    np.testing.assert_array_equal(a.theta1, b.theta1)
    np.testing.assert_array_equal(a.p_s1, b.p_s1)


def test_relay_free_variant_uses_no_relay(cfg6, omega):
    al = inner_solution_ergodic(NU, omega, cfg6, "relay-free")
    assert np.all(al.p_r == 0)


def test_sensing_free_ignores_outcomes(cfg6, omega):
    a = inner_solution_ergodic(NU, omega, cfg6, "sensing-free")
    b = inner_solution_ergodic(NU, omega.with_sensing(x=1 - omega.x, y=1 - omega.y), cfg6, "sensing-free")
    np.testing.assert_array_equal(a.theta1, b.theta1)
    np.testing.assert_array_equal(a.theta2, b.theta2)


def test_objective_is_mean_of_frame_costs(cfg6, omega):
    inner = solve_inner(NU, omega, cfg6, "ergodic")
    al = inner.allocation
    per_frame = frame_interference(al.theta1, al.theta2, omega.x, cfg6, omega.y) / cfg6.frame_duration
    assert np.mean(per_frame) == pytest.approx(np.mean(inner.objective), rel=1e-13)


def test_unknown_variant(cfg6, omega):
    with pytest.raises(ValueError):
        inner_solution_ergodic(NU, omega, cfg6, "three-sensing")


# ---------------------------------------------------------------------------
# training


def test_single_sample_training_equals_frame_solver():
    cfg, nsi = presets.fig4_config(0.2), presets.fig4_nsi()
    batch = Nsi(nsi.g_sr[None], nsi.g_sd[None], nsi.g_rd[None], nsi.x[None])
    pol = train_offline(cfg, samples=batch, variant="phase1-only")
    rep = solve_frame(nsi, cfg)
    assert pol.status == rep.status == "Optimal"
    assert pol.objective == pytest.approx(rep.objective, rel=1e-9)
    np.testing.assert_allclose(pol.duals.as_array(), rep.duals.as_array(), rtol=1e-9)


def test_training_sample_is_fixed(cfg6):
    a = training_sample(cfg6, 5, 100)
    b = training_sample(cfg6, 5, 100)
    np.testing.assert_array_equal(a.g_sd, b.g_sd)
    np.testing.assert_array_equal(a.y, b.y)


def test_training_rejects_single_frame():
    cfg, nsi = presets.fig4_config(0.2), presets.fig4_nsi()
    with pytest.raises(ValueError):
        train_offline(cfg, samples=nsi)


def test_trained_policy_optimal(trained):
    assert trained.status == "Optimal"
    assert trained.n_samples == 2000
    # the primal is feasible to within 1e-6, so weak duality holds to that order
    assert trained.dual_value <= trained.objective + 1e-6 * (1 + trained.objective)
    assert trained.objective - trained.dual_value <= 1e-6 * (1 + trained.objective)
    assert trained.kkt_residual <= 1e-6


def test_held_out_constraints_within_three_sigma(trained, cfg6):
    frames = eval_frames(cfg6, FadingParams(), 21, 2000)
    met = evaluate_policy(trained, frames)
    n = len(frames)
    rmin = cfg6.r_min
    for r in (met.r1, met.r2):
        assert np.mean(r) >= rmin - 3 * np.std(r, ddof=1) / np.sqrt(n)
    assert np.mean(met.ps) <= cfg6.p_s_max + 3 * np.std(met.ps, ddof=1) / np.sqrt(n)
    assert np.mean(met.pr) <= cfg6.p_r_max + 3 * np.std(met.pr, ddof=1) / np.sqrt(n)


def test_larger_sample_reduces_multiplier_spread():
    cfg = presets.fig6_config(0.6)
    spread = {}
    for k in (50, 400):
        duals = np.array([train_offline(cfg, seed=s, n_samples=k).duals.as_array() for s in range(6)])
        spread[k] = np.var(duals[:, :2], axis=0, ddof=1).sum()
    assert spread[400] < spread[50]


def test_policy_json_roundtrip(trained):
    back = TrainedPolicy.from_json(trained.to_json())
    assert back.duals == trained.duals
    assert back.config == trained.config
    doc = json.loads(trained.to_json())
    doc["config"]["alpha"] = 0.4
    with pytest.raises(ValueError):
        TrainedPolicy.from_dict(doc)


# ---------------------------------------------------------------------------
# packet and on-line update


def test_packet_size(cfg6, omega):
    pol = TrainedPolicy(NU, cfg6)
    pk = build_packet(pol, omega.frame(0))
    assert pk.parameter_count == 3 * 16 + 2 * 4 == 56
    assert pk.payload_size == 3 * 16 + 4 * 4
    assert len(pk.to_bytes()) == 16 + 8 * pk.payload_size


def test_packet_bytes_roundtrip(cfg6, omega):
    pk = build_packet(TrainedPolicy(NU, cfg6), omega.frame(3))
    back = ParameterPacket.from_bytes(pk.to_bytes(), cfg6)
    np.testing.assert_array_equal(back.to_array(), pk.to_array())
    x, y = omega.x[3], omega.y[3]
    a, b = online_update(pk, x, y), online_update(back, x, y)
    for k in FIELDS:
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_packet_bytes_errors(cfg6, omega):
    data = build_packet(TrainedPolicy(NU, cfg6), omega.frame(0)).to_bytes()
    with pytest.raises(ValueError):
        ParameterPacket.from_bytes(b"XXXX" + data[4:], cfg6)
    with pytest.raises(ValueError):
        ParameterPacket.from_bytes(data[:-8], cfg6)
    with pytest.raises(ValueError):
        ParameterPacket.from_bytes(data, presets.fig4_config())
    with pytest.raises(ValueError):
        build_packet(TrainedPolicy(NU, cfg6), omega).to_array()


def test_packet_candidates_match_direct_rule(cfg6, omega):
    nsi = omega.frame(7)
    pk = build_packet(TrainedPolicy(NU, cfg6), nsi)
    r = power_ratios(NU, nsi, cfg6)
    for m in range(4):
        for s in (0, 1):
            assert pk.theta1[m, s] == theta_phase1(NU, r, s, m, cfg6, "ergodic")
            assert pk.theta2[m, s] == theta_phase2_ergodic(NU, r, s, m, cfg6)


def test_dead_subchannels_get_no_power(cfg6):
    g = np.ones(16)
    g[:3] = 0.0
    pk = build_packet(TrainedPolicy(NU, cfg6), (g, g, g))
    assert np.all(pk.p1[:3] == 0) and np.all(pk.p2[:3] == 0) and np.all(pk.q[:3] == 0)


@pytest.mark.parametrize("variant", ["two-sensing", "phase1-only", "sensing-free", "relay-free"])
def test_online_update_bit_identical(cfg6, omega, variant):
    pol = TrainedPolicy(NU, cfg6, variant=variant)
    a = inner_solution_ergodic(NU, omega, cfg6, variant)
    b = online_update(build_packet(pol, omega), omega.x, omega.y)
    for k in FIELDS:
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_online_update_single_frame_matches_batch(cfg6, omega):
    pol = TrainedPolicy(NU, cfg6)
    batch = online_update(build_packet(pol, omega), omega.x, omega.y)
    for i in (0, 17, 999):
        one = online_update(build_packet(pol, omega.frame(i)), omega.x[i], omega.y[i])
        for k in FIELDS:
            np.testing.assert_array_equal(getattr(one, k), getattr(batch, k)[i])


def test_all_idle_selects_idle_candidates(cfg6, omega):
    pk = build_packet(TrainedPolicy(NU, cfg6), omega.frame(0))
    al = online_update(pk, np.zeros(4, int), np.zeros(4, int))
    np.testing.assert_array_equal(al.theta1, pk.theta1[:, 0])
    np.testing.assert_array_equal(al.theta2, pk.theta2[:, 0])


def test_online_update_is_causal(cfg6, omega):
    # the packet depends on gains only; the update sees only the packet and outcomes
    assert list(inspect.signature(online_update).parameters) == ["packet", "x", "y"]
    pol = TrainedPolicy(NU, cfg6)
    a = build_packet(pol, omega.frame(2))
    b = build_packet(pol, omega.frame(2).with_sensing(x=np.ones(4, int), y=np.ones(4, int)))
    np.testing.assert_array_equal(a.to_array(), b.to_array())


def test_two_sensing_needs_y(cfg6, omega):
    pk = build_packet(TrainedPolicy(NU, cfg6), omega.frame(0))
    with pytest.raises(ValueError):
        online_update(pk, omega.x[0])
