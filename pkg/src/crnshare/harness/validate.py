"""Self-check: closed forms, placements and solvers against independent oracles."""

from dataclasses import dataclass, field

import numpy as np

from .. import traffic
from .._rng import seed_sequence
from ..access import access_plan
from ..ergodic import TrainedPolicy, build_packet, inner_solution_ergodic, online_update
from ..frame_solver import DualVars, solve_frame
from ..netmodel import FadingParams, Nsi, sample_nsi
from ..oracles import best_discrete_placement, conditional_active_integral, solve_reformulation
from . import presets

__all__ = ["Check", "ValidationReport", "validate"]


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    @property
    def margin(self):
        return self.limit - self.value


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, limit, detail=""):
        self.checks.append(Check(name, bool(value <= limit), float(value), float(limit), detail))

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "value": c.value, "limit": c.limit,
                 "margin": c.margin, "detail": c.detail}
                for c in self.checks
            ],
        }

    def lines(self):
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (limit {c.limit:.1e}) {c.detail}".rstrip()
            for c in self.checks
        ]


def _phi_windows(alpha=0.5, delta=0.1):
    """(name, function, bound, lead, end) for the three collision functions."""
    return (
        ("phi1", lambda th, s, tp: traffic.phi1(th, s, tp, 1.0, alpha, delta), alpha - delta, delta, alpha),
        ("phi2_frame", lambda th, s, tp: traffic.phi2_frame(th, s, tp, 1.0, alpha), 1.0 - alpha, alpha, 1.0),
        ("phi2_ergodic", lambda th, s, tp: traffic.phi2_ergodic(th, s, tp, 1.0, alpha, delta),
         1.0 - alpha - delta, delta, 1.0 - alpha),
    )


def check_phi_quadrature(report, n_theta=10):
    tp = traffic.TrafficParams(1.0, 1.0)
    worst = 0.0
    for name, fn, bound, lead, end in _phi_windows():
        for theta in np.linspace(bound / n_theta, bound, n_theta):
            for s in (0, 1):
                a, b = (lead, lead + theta) if s == 0 else (end - theta, end)
                ref = conditional_active_integral(tp, s, a, b, tol=1e-12)
                worst = max(worst, abs(fn(theta, s, tp) - ref))
    report.add("phi vs quadrature", worst, 1e-9, "max abs error, T_f = 1")


def check_phi_monte_carlo(report, seed, n_paths=200_000, n_theta=10):
    tp = traffic.TrafficParams(1.0, 1.0)
    worst = 0.0
    for k, (name, fn, bound, lead, end) in enumerate(_phi_windows()):
        thetas = np.linspace(bound / n_theta, bound, n_theta)
        for s in (0, 1):
            wins = [(lead, lead + t) if s == 0 else (end - t, end) for t in thetas]
            mean, se = traffic.monte_carlo_active_time(
                tp, s, 1.0, wins, n_paths, seed_sequence(seed, "validate", name, s)
            )
            exact = np.array([fn(t, s, tp) for t in thetas])
            worst = max(worst, float(np.max(np.abs(mean - exact) / se)))
    report.add("phi vs Monte Carlo", worst, 3.0, f"max |z| over {n_paths} paths")


def check_placement(report, n_grid=200):
    tp = traffic.TrafficParams(1.0, 1.0)
    cfg = presets.fig4_config()
    worst = -np.inf
    windows = (access_plan(cfg).phase1, access_plan(cfg).phase2, access_plan(cfg, "ergodic").phase2)
    for win in windows:
        for theta in (0.1, 0.2, 0.3):
            for s in (0, 1):
                lemma = float(win.cost(theta, s, cfg.rate_sum[0], cfg.active_prob[0]))
                best = best_discrete_placement(tp, s, theta, win.lead, win.end, n_grid).best_value
                worst = max(worst, lemma - best)
    report.add("placement grid search", worst, 1e-6, "lemma minus best grid schedule")


def check_solver(report, seed, n_random=3):
    cfg = presets.fig4_config(0.3)
    cases = [(presets.fig4_nsi(), cfg)]
    rng = np.random.default_rng(seed_sequence(seed, "validate", "instances"))
    for _ in range(n_random):
        g = rng.uniform(0.2, 2.0, size=(3, 2))
        nsi = Nsi(g[0], g[1], g[2], rng.integers(0, 2, size=2))
        cases.append((nsi, presets.fig4_config(float(rng.uniform(0.05, 0.3)))))
    rel, kkt = 0.0, 0.0
    for nsi, c in cases:
        rep = solve_frame(nsi, c)
        ref = solve_reformulation(nsi, c)
        rel = max(rel, abs(rep.objective - ref.objective) / max(abs(ref.objective), 1e-12))
        kkt = max(kkt, rep.kkt_residual)
    report.add("frame solver vs generic solver", rel, 1e-4, "relative objective gap")
    report.add("frame solver KKT residual", kkt, 1e-6)


def check_online(report, seed, n_frames=1000):
    cfg = presets.fig6_config(1.7)
    policy = TrainedPolicy(DualVars(0.01, 0.006, 0.006, 0.001), cfg)
    omega = sample_nsi(cfg, FadingParams(), seed_sequence(seed, "validate", "online"), n_frames)
    a = inner_solution_ergodic(policy.duals, omega, cfg)
    b = online_update(build_packet(policy, omega), omega.x, omega.y)
    mismatch = sum(
        int(np.count_nonzero(getattr(a, k) != getattr(b, k)))
        for k in ("p_s1", "p_s2", "p_r", "theta1", "theta2", "span1", "span2")
    )
    report.add("on-line update matches inner solution", mismatch, 0, "differing entries")


def validate(seed=0, quick=False):
    """Run every oracle check; ``quick`` trims the Monte Carlo sizes."""
    report = ValidationReport()
    check_phi_quadrature(report)
    check_phi_monte_carlo(report, seed, n_paths=50_000 if quick else 200_000)
    check_placement(report, n_grid=100 if quick else 200)
    check_solver(report, seed, n_random=1 if quick else 3)
    check_online(report, seed, n_frames=200 if quick else 1000)
    return report
