"""Transmission-interval placement and the per-frame interference objective.

Each phase offers a window in which a band may transmit. Given the sensing
outcome at the start of the window's reference instant, the placement that
minimises expected collision is a single interval pushed to the window start
when the band was sensed IDLE and to the window end when it was sensed
ACTIVE. All offsets below are fractions of the frame duration.
"""

from dataclasses import dataclass

import numpy as np

from .intervals import IntervalSet
from .traffic import expected_active_time, marginal_inverse

__all__ = [
    "IntervalSet",
    "PhaseWindow",
    "AccessPlan",
    "access_plan",
    "place_phase1",
    "place_phase2_frame",
    "place_phase2_ergodic",
    "frame_interference",
    "align_band",
]

_BOUND_TOL = 1e-12


@dataclass(frozen=True)
class PhaseWindow:
    """Transmission window of one phase.

    ``origin`` is the time of the sensing that conditions this phase;
    ``lead`` and ``end`` are measured from ``origin``. An IDLE band starts
    at ``origin + lead``; an ACTIVE band stops at ``origin + end``.
    ``sensing`` names the outcome the placement is conditioned on (``"x"``
    or ``"y"``), or ``None`` for the sensing-free rule.
    """

    origin: float
    lead: float
    end: float
    sensing: str = "x"

    @property
    def bound(self):
        return self.end - self.lead

    def span(self, theta, state):
        """Absolute ``(start, stop)`` of the placement, in frame fractions."""
        theta = np.asarray(theta, dtype=float)
        state = np.asarray(state)
        start = np.where(state == 0, self.origin + self.lead, self.origin + self.end - theta)
        return start, start + theta

    def cost(self, theta, state, rate_sum, active_prob):
        """Expected collision (frame fractions); linear when sensing-free."""
        if self.sensing is None:
            return np.asarray(active_prob) * np.asarray(theta, dtype=float)
        return expected_active_time(theta, state, self.lead, self.end, rate_sum, active_prob)

    def best_theta(self, value, state, rate_sum, active_prob):
        """Placement length minimising ``cost(theta) - value * theta`` on ``[0, bound]``.

        With a linear cost the minimiser is bang-bang and ties go to 0.
        """
        value = np.asarray(value, dtype=float)
        if self.sensing is None:
            return np.where(value > np.asarray(active_prob), self.bound, 0.0)
        raw = marginal_inverse(value, state, self.lead, self.end, rate_sum, active_prob)
        return np.clip(raw, 0.0, self.bound)


@dataclass(frozen=True)
class AccessPlan:
    """The two phase windows used by one strategy."""

    phase1: PhaseWindow
    phase2: PhaseWindow
    name: str = ""


def access_plan(cfg, mode="frame"):
    """Windows for ``mode`` in {"frame", "ergodic", "phase1-only", "sensing-free"}.

    ``"ergodic"`` re-senses at ``alpha`` and conditions Phase 2 on that
    outcome; ``"phase1-only"`` is the frame-level rule used in an ergodic
    setting.
    """
    a, d = cfg.alpha, cfg.delta
    p1 = PhaseWindow(0.0, d, a, "x")
    if mode in ("frame", "phase1-only"):
        p2 = PhaseWindow(0.0, a, 1.0, "x")
    elif mode == "ergodic":
        p2 = PhaseWindow(a, d, 1.0 - a, "y")
    elif mode == "sensing-free":
        p1 = PhaseWindow(0.0, d, a, None)
        p2 = PhaseWindow(0.0, a, 1.0, None)
    else:
        raise ValueError(f"unknown access mode {mode!r}")
    return AccessPlan(p1, p2, mode)


def _check(theta, bound):
    if not (-_BOUND_TOL <= theta <= bound + _BOUND_TOL):
        raise ValueError(f"theta_hat={theta!r} outside [0, {bound:.6g}]")
    return min(max(float(theta), 0.0), bound)


def _place(window, theta, state, t_f):
    if state not in (0, 1):
        raise ValueError("sensing outcome must be 0 or 1")
    theta = _check(theta, window.bound)
    if theta == 0.0:
        return IntervalSet()
    a, b = window.span(theta, state)
    return IntervalSet.single(float(a) * t_f, float(b) * t_f)


def place_phase1(theta_hat, x, cfg):
    return _place(access_plan(cfg).phase1, theta_hat, x, cfg.frame_duration)


def place_phase2_frame(theta_hat, x, cfg):
    return _place(access_plan(cfg).phase2, theta_hat, x, cfg.frame_duration)


def place_phase2_ergodic(theta_hat, y, cfg):
    return _place(access_plan(cfg, "ergodic").phase2, theta_hat, y, cfg.frame_duration)


def frame_interference(theta1, theta2, x, cfg, y=None, mode=None):
    """Expected collision time (time units) summed over bands.

    Phase 2 is conditioned on ``y`` when given (ergodic placement) and on
    ``x`` otherwise; ``mode`` overrides that choice. Leading dimensions of
    the inputs index frames.
    """
    if mode is None:
        mode = "frame" if y is None else "ergodic"
    plan = access_plan(cfg, mode)
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    for theta, win in ((theta1, plan.phase1), (theta2, plan.phase2)):
        if np.any(theta < -_BOUND_TOL) or np.any(theta > win.bound + _BOUND_TOL):
            raise ValueError("theta_hat outside its phase bounds")
    x = np.asarray(x)
    s2 = y if plan.phase2.sensing == "y" else x
    if s2 is None:
        raise ValueError(f"mode {mode!r} needs the Phase-2 outcome y")
    r, pi = cfg.rate_sum, cfg.active_prob
    c1 = plan.phase1.cost(theta1, x, r, pi)
    c2 = plan.phase2.cost(theta2, np.asarray(s2), r, pi)
    return cfg.frame_duration * np.sum(c1 + c2, axis=-1)


def align_band(theta_sub, band_map):
    """Per-band share: the largest time fraction over the band's sub-channels."""
    theta_sub = np.asarray(theta_sub, dtype=float)
    return np.stack([theta_sub[..., list(members)].max(axis=-1) for members in band_map], axis=-1)
