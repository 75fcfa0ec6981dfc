"""Frame-level spectrum sharing: closed-form inner solutions and dual ascent.

The problem solved per frame is

    minimise    sum_m  c1_m(theta1_m) + c2_m(theta2_m)        (collision / T_f)
    subject to  R1 / W >= R_min / W,  R2 / W >= R_min / W,
                sum P_s <= P_s_max,   sum P_r <= P_r_max,

over per-band time fractions and per-sub-channel powers, where
``c`` are the expected-collision kernels of the chosen access plan. With
powers written as ``P = ratio * theta`` the Lagrangian separates: the
ratios maximise a concave per-sub-channel rate reward independent of
``theta``, and each band's ``theta`` then balances its marginal collision
against the band's total reward ``V``.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from ._dual import ascend
from .access import access_plan
from .netmodel import Allocation

__all__ = [
    "DualVars",
    "PowerRatios",
    "SolverOptions",
    "SolverReport",
    "InnerSolution",
    "f_aux",
    "ratio_phase1",
    "ratios_phase2",
    "power_ratios",
    "theta_phase1",
    "theta_phase2_frame",
    "solve_inner",
    "inner_solution",
    "subgradient",
    "dual_value",
    "kkt_residual",
    "solve_frame",
    "solve_relay_free",
    "solve_sensing_free",
]

LN2 = math.log(2.0)
# multipliers on the power budgets are kept at least this large
DUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class DualVars:
    """Multipliers of the two rate cuts and the source / relay power budgets."""

    zeta: float = 0.0
    sigma: float = 0.0
    epsilon: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for k in ("zeta", "sigma", "epsilon", "eta"):
            v = getattr(self, k)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"dual variable {k} must be finite and non-negative, got {v!r}")

    def as_array(self):
        return np.array([self.zeta, self.sigma, self.epsilon, self.eta])

    @classmethod
    def from_array(cls, arr):
        z, s, e, h = (float(v) for v in arr)
        return cls(z, s, e, h)


def _nu(nu):
    return nu if isinstance(nu, DualVars) else DualVars.from_array(nu)


@dataclass(frozen=True, eq=False)
class PowerRatios:
    """Power-to-time ratios per sub-channel and the per-band rate rewards.

    ``v1``/``v2`` hold each band's reward per unit time in Phase 1 / 2 at
    these ratios; ``theta_*`` trade them against marginal collision.
    """

    p1: np.ndarray
    p2: np.ndarray
    q: np.ndarray
    v1: np.ndarray = None
    v2: np.ndarray = None


@dataclass
class SolverOptions:
    """Dual ascent settings.

    ``step_rule`` is ``"ellipsoid"`` (central-cut ellipsoid method driven by
    the same subgradients), ``"spg"`` (projected ascent with
    Barzilai-Borwein steps and a non-monotone Armijo search),
    ``"diminishing"`` (``s0 / sqrt(k)``) or ``"polyak"``. The step rules act
    on multipliers scaled by their constraint's size, so the tolerances are
    relative. ``gap_tol`` is the relative duality gap that certifies a
    recovered primal point as optimal.
    """

    step_rule: str = "ellipsoid"
    max_iter: int = 5000
    tol: float = 1e-10
    gtol: float = 1e-10
    s0: float = 1.0
    nu0: tuple = (1.0, 1.0, 1.0, 1.0)
    feas_tol: float = 1e-6
    nu_max: float = 1e6
    stall_limit: int = 10_000
    gap_tol: float = 1e-6

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "nu0" in d:
            d["nu0"] = tuple(d["nu0"])
        return cls(**d)


@dataclass
class SolverReport:
    allocation: Allocation
    duals: DualVars
    iterations: int
    kkt_residual: float
    status: str
    objective: float = np.nan
    dual_value: float = np.nan
    rates: tuple = (np.nan, np.nan)
    power: tuple = (np.nan, np.nan)
    mode: str = "frame"
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == "Optimal"

    def to_dict(self):
        return {
            "status": self.status,
            "mode": self.mode,
            "objective": self.objective,
            "dual_value": self.dual_value,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "duals": asdict(self.duals),
            "rates": list(self.rates),
            "power": list(self.power),
            "allocation": self.allocation.to_dict(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


# ---------------------------------------------------------------------------
# closed-form pieces


def f_aux(x):
    """``log2(1 + x) - x / ((1 + x) ln 2)``: rate minus its linearisation."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("f_aux is defined for x >= 0")
    out = np.log1p(x) / LN2 - x / ((1.0 + x) * LN2)
    return float(out) if out.ndim == 0 else out


def ratio_phase1(nu, g_sr, g_sd):
    """Phase-1 source ratio: positive root of
    ``zeta a / (1 + a x) + sigma g / (1 + g x) = epsilon ln 2`` with
    ``a = max(g_sr, g_sd)``, ``g = g_sd``; 0 when there is no positive root.
    """
    nu = _nu(nu)
    z, s = nu.zeta, nu.sigma
    c = nu.epsilon * LN2
    g = np.asarray(g_sd, dtype=float)
    a = np.maximum(np.asarray(g_sr, dtype=float), g)
    qa = c * a * g
    qb = c * (a + g) - a * g * (z + s)
    qc = c - z * a - s * g
    if c == 0.0 and np.any(qc < 0):
        raise ValueError("epsilon = 0 under rate pressure: Phase-1 power is unbounded")
    root_disc = np.sqrt(np.maximum(qb * qb - 4.0 * qa * qc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # cancellation-free form of the positive root
        x = np.where(qb > 0, -2.0 * qc / (qb + root_disc), (-qb + root_disc) / (2.0 * qa))
    out = np.where(qc < 0, x, 0.0)
    return float(out) if out.ndim == 0 else out


def _phase2_reward(z, s, e, h, g_sd, g_rd, p2, q):
    snr = g_sd * p2
    return z * np.log2(1.0 + snr) + s * np.log2(1.0 + snr + g_rd * q) - e * p2 - h * q


def _phase2_bisect(z, s, e, h, sd, rd, iters=200):
    """Maximise the Phase-2 reward by bisection on q with an inner bisection on p2."""

    def best_p2(q):
        if sd == 0.0:
            return 0.0

        def slope(p):
            return z * sd / ((1 + sd * p) * LN2) + s * sd / ((1 + sd * p + rd * q) * LN2) - e

        if slope(0.0) <= 0:
            return 0.0
        lo, hi = 0.0, (z + s) / (e * LN2)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if slope(mid) > 0 else (lo, mid)
        return 0.5 * (lo + hi)

    def q_slope(q):
        p = best_p2(q)
        return s * rd / ((1 + sd * p + rd * q) * LN2) - h

    if rd == 0.0 or q_slope(0.0) <= 0:
        return best_p2(0.0), 0.0
    lo, hi = 0.0, s / (h * LN2)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if q_slope(mid) > 0 else (lo, mid)
    q = 0.5 * (lo + hi)
    return best_p2(q), q


def ratios_phase2(nu, g_sd, g_rd):
    """Phase-2 source and relay ratios ``(p2, q)``.

    Tries the relay-on water level first, then the relay-off one, and
    falls back to nested bisection only in the degenerate ties where
    neither closed form is self-consistent.
    """
    nu = _nu(nu)
    z, s, e, h = nu.zeta, nu.sigma, nu.epsilon, nu.eta
    sd = np.asarray(g_sd, dtype=float)
    rd = np.asarray(g_rd, dtype=float)
    sd, rd = np.broadcast_arrays(sd, rd)
    if z + s == 0.0:
        zero = np.zeros(sd.shape)
        return (zero, zero.copy()) if zero.ndim else (0.0, 0.0)
    if (e == 0.0 and np.any(sd > 0)) or (h == 0.0 and s > 0 and np.any(rd > 0)):
        raise ValueError("zero power multiplier under rate pressure: Phase-2 power is unbounded")
    has_sd = sd > 0
    has_rd = rd > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_sd = np.where(has_sd, 1.0 / np.where(has_sd, sd, 1.0), np.inf)
        inv_rd = np.where(has_rd, 1.0 / np.where(has_rd, rd, 1.0), np.inf)
        # relay on
        den = e - h * sd * inv_rd
        p_a = np.maximum(z / (den * LN2) - inv_sd, 0.0)
        q_a = s / (h * LN2) - inv_rd - sd * inv_rd * p_a
        ok_a = has_sd & has_rd & (den > 0) & (q_a > 0)
        # relay off
        p_b = np.where(has_sd, np.maximum((z + s) / (e * LN2) - inv_sd, 0.0), 0.0)
        ok_b = s * rd / ((1.0 + sd * p_b) * LN2) <= h
        # no direct link: only the relay can help
        q_c = np.where(has_rd, np.maximum(s / (h * LN2) - inv_rd, 0.0), 0.0) if h > 0 else np.zeros(sd.shape)
    p2 = np.where(ok_a, p_a, np.where(ok_b, p_b, 0.0))
    q = np.where(ok_a, q_a, 0.0)
    p2 = np.where(has_sd, p2, 0.0)
    q = np.where(has_sd, q, q_c)
    bad = has_sd & ~ok_a & ~ok_b
    if np.any(bad):
        p2 = np.array(p2, dtype=float)
        q = np.array(q, dtype=float)
        for idx in zip(*np.nonzero(bad)):
            p2[idx], q[idx] = _phase2_bisect(z, s, e, h, float(sd[idx]), float(rd[idx]))
    if p2.ndim == 0:
        return float(p2), float(q)
    return p2, q


def power_ratios(nu, nsi, cfg):
    """All ratios for one frame (or batch) plus the per-band rewards."""
    nu = _nu(nu)
    z, s, e, h = nu.zeta, nu.sigma, nu.epsilon, nu.eta
    p1 = np.asarray(ratio_phase1(nu, nsi.g_sr, nsi.g_sd), dtype=float)
    p2, q = ratios_phase2(nu, nsi.g_sd, nsi.g_rd)
    p2 = np.asarray(p2, dtype=float)
    q = np.asarray(q, dtype=float)
    a = np.maximum(nsi.g_sr, nsi.g_sd)
    w1 = z * np.log2(1.0 + a * p1) + s * np.log2(1.0 + nsi.g_sd * p1) - e * p1
    w2 = _phase2_reward(z, s, e, h, nsi.g_sd, nsi.g_rd, p2, q)
    return PowerRatios(p1, p2, q, cfg.band_sum(w1), cfg.band_sum(w2))


def _band_theta(window, value, state, cfg, m=None):
    r, pi = cfg.rate_sum, cfg.active_prob
    if m is not None:
        r, pi = r[m], pi[m]
    return window.best_theta(value, state, r, pi)


def theta_phase1(nu, ratios, x, m, cfg, mode="frame"):
    """Phase-1 time fraction of band ``m`` given its sensing outcome ``x``."""
    v = np.asarray(ratios.v1)[..., m]
    return float(_band_theta(access_plan(cfg, mode).phase1, v, x, cfg, m))


def theta_phase2_frame(nu, ratios, x, m, cfg):
    """Phase-2 time fraction of band ``m`` conditioned on the Phase-1 outcome."""
    v = np.asarray(ratios.v2)[..., m]
    return float(_band_theta(access_plan(cfg, "frame").phase2, v, x, cfg, m))


# ---------------------------------------------------------------------------
# inner minimisation


@dataclass(eq=False)
class InnerSolution:
    """Everything the dual loop needs from one inner minimisation."""

    allocation: Allocation
    ratios: PowerRatios
    cost1: np.ndarray
    cost2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    ps: np.ndarray
    pr: np.ndarray

    @property
    def objective(self):
        """Expected collision / T_f per frame."""
        return np.sum(self.cost1 + self.cost2, axis=-1)


def _phase2_state(plan, nsi):
    if plan.phase2.sensing == "y":
        if nsi.y is None:
            raise ValueError("this access plan needs the Phase-2 sensing outcome y")
        return nsi.y
    if plan.phase2.sensing is None:
        return np.zeros_like(nsi.x)
    return nsi.x


def _assemble(ratios, theta1, theta2, nsi, cfg, plan, state1=None, state2=None):
    if state1 is None:
        state1 = nsi.x if plan.phase1.sensing else np.zeros_like(nsi.x)
    if state2 is None:
        state2 = _phase2_state(plan, nsi)
    t_f = cfg.frame_duration
    band = cfg.band_of
    t1s, t2s = theta1[..., band], theta2[..., band]
    p_s1 = ratios.p1 * t1s
    p_s2 = ratios.p2 * t2s
    p_r = ratios.q * t2s
    a1, b1 = plan.phase1.span(theta1, state1)
    a2, b2 = plan.phase2.span(theta2, state2)
    alloc = Allocation(
        p_s1, p_s2, p_r, theta1, theta2,
        np.stack([a1, b1], axis=-1) * t_f,
        np.stack([a2, b2], axis=-1) * t_f,
    )
    r, pi = cfg.rate_sum, cfg.active_prob
    cost1 = plan.phase1.cost(theta1, state1, r, pi)
    cost2 = plan.phase2.cost(theta2, state2, r, pi)
    g_a = np.maximum(nsi.g_sr, nsi.g_sd)
    snr2 = nsi.g_sd * ratios.p2
    r1 = cfg.band_sum(t1s * np.log2(1.0 + g_a * ratios.p1) + t2s * np.log2(1.0 + snr2)).sum(axis=-1)
    r2 = cfg.band_sum(
        t1s * np.log2(1.0 + nsi.g_sd * ratios.p1) + t2s * np.log2(1.0 + snr2 + nsi.g_rd * ratios.q)
    ).sum(axis=-1)
    ps = cfg.band_sum(p_s1 + p_s2).sum(axis=-1)
    pr = cfg.band_sum(p_r).sum(axis=-1)
    return InnerSolution(alloc, ratios, cost1, cost2, r1, r2, ps, pr)


def solve_inner(nu, nsi, cfg, mode="frame"):
    """Inner Lagrangian minimiser for access plan ``mode``; batches allowed."""
    nsi.check(cfg)
    plan = access_plan(cfg, mode)
    ratios = power_ratios(nu, nsi, cfg)
    state1 = nsi.x if plan.phase1.sensing else np.zeros_like(nsi.x)
    state2 = _phase2_state(plan, nsi)
    theta1 = _band_theta(plan.phase1, ratios.v1, state1, cfg)
    theta2 = _band_theta(plan.phase2, ratios.v2, state2, cfg)
    return _assemble(ratios, theta1, theta2, nsi, cfg, plan, state1, state2)


def inner_solution(nu, nsi, cfg):
    """Frame-level allocation minimising the Lagrangian at multipliers ``nu``."""
    return solve_inner(nu, nsi, cfg, "frame").allocation


def _lagrangian_terms(nu, inner):
    """Per-frame sum over bands of ``cost - theta * V``."""
    th1, th2 = inner.allocation.theta1, inner.allocation.theta2
    return np.sum(inner.cost1 - th1 * inner.ratios.v1 + inner.cost2 - th2 * inner.ratios.v2, axis=-1)


def _slacks(inner, cfg):
    rmin = cfg.r_min_normalized
    return np.stack(
        [rmin - inner.r1, rmin - inner.r2, inner.ps - cfg.p_s_max, inner.pr - cfg.p_r_max], axis=-1
    )


def dual_value(nu, inner, cfg):
    """Dual function at ``nu``; ``inner`` must be the inner minimiser at ``nu``.

    A batch of frames is averaged, which gives the sample-average dual.
    """
    nu = _nu(nu)
    terms = np.mean(_lagrangian_terms(nu, inner))
    rmin = cfg.r_min_normalized
    return float(terms + (nu.zeta + nu.sigma) * rmin - nu.epsilon * cfg.p_s_max - nu.eta * cfg.p_r_max)


def subgradient(nu, alloc, nsi, cfg):
    """Constraint slacks ``(Rmin - R1, Rmin - R2) / W`` and power excesses.

    ``alloc`` is normally ``inner_solution(nu, nsi, cfg)``; batches are
    averaged over the leading axis.
    """
    from .netmodel import rate_r1, rate_r2

    w = cfg.bandwidth
    h = np.stack(
        [
            cfg.r_min_normalized - rate_r1(alloc, nsi, cfg) / w,
            cfg.r_min_normalized - rate_r2(alloc, nsi, cfg) / w,
            alloc.source_power - cfg.p_s_max,
            alloc.relay_power - cfg.p_r_max,
        ],
        axis=-1,
    )
    return h.reshape(-1, 4).mean(axis=0)


def _feasible(r1, r2, ps, pr, cfg, tol):
    rmin = cfg.r_min_normalized
    return bool(
        r1 >= rmin * (1 - tol) and r2 >= rmin * (1 - tol)
        and ps <= cfg.p_s_max * (1 + tol) and pr <= cfg.p_r_max * (1 + tol)
    )


def _marginal(window, theta, state, cfg):
    r, pi = cfg.rate_sum, cfg.active_prob
    if window.sensing is None:
        return np.broadcast_to(pi, np.shape(theta)).astype(float)
    idle = pi * (1.0 - np.exp(-r * (window.lead + theta)))
    active = pi + (1.0 - pi) * np.exp(-r * (window.end - theta))
    return np.where(np.asarray(state) == 0, idle, active)


def kkt_residual(nu, inner, nsi, cfg, mode="frame"):
    """Largest violation among the optimality conditions at ``(nu, inner)``.

    Covers primal feasibility and complementary slackness (both relative to
    the constraint sizes), stationarity in each ``theta`` including the sign
    conditions at the clamps, and stationarity of the Phase-1 ratios.
    Averages over a leading batch axis, as in the sample-average problem.
    """
    nu = _nu(nu)
    plan = access_plan(cfg, mode)
    scale = np.array([cfg.r_min_normalized, cfg.r_min_normalized, cfg.p_s_max, cfg.p_r_max])
    h = _slacks(inner, cfg).reshape(-1, 4).mean(axis=0) / scale
    feas = np.max(np.maximum(h, 0.0))
    comp = np.max(np.abs(nu.as_array() * scale * h))
    out = [feas, comp]
    if plan.phase1.sensing is not None:
        al = inner.allocation
        state1 = nsi.x
        state2 = _phase2_state(plan, nsi)
        for win, th, st, v in (
            (plan.phase1, al.theta1, state1, inner.ratios.v1),
            (plan.phase2, al.theta2, state2, inner.ratios.v2),
        ):
            grad = _marginal(win, th, st, cfg) - v
            at_lo = th <= 0.0
            at_hi = th >= win.bound
            viol = np.where(at_lo, np.maximum(-grad, 0.0), np.where(at_hi, np.maximum(grad, 0.0), np.abs(grad)))
            out.append(float(np.max(viol)))
    p1 = inner.ratios.p1
    g = nsi.g_sd
    a = np.maximum(nsi.g_sr, g)
    slope = nu.zeta * a / ((1 + a * p1) * LN2) + nu.sigma * g / ((1 + g * p1) * LN2) - nu.epsilon
    viol = np.where(p1 > 0, np.abs(slope), np.maximum(slope, 0.0)) / (1.0 + nu.epsilon)
    out.append(float(np.max(viol)))
    return float(max(out))


# ---------------------------------------------------------------------------
# dual ascent


def _scale(cfg):
    rmin = cfg.r_min_normalized
    return np.array([rmin, rmin, cfg.p_s_max, cfg.p_r_max])


def _run_dual(nsi, cfg, opts, mode, recover=None):
    opts = opts or SolverOptions()
    nsi.check(cfg)

    def evaluate(nu_arr):
        from ._dual import DualPoint

        raw = solve_inner(nu_arr, nsi, cfg, mode)
        h = _slacks(raw, cfg).reshape(-1, 4).mean(axis=0)
        value = dual_value(nu_arr, raw, cfg)
        inner = raw if recover is None else recover(nu_arr, raw)
        feasible = _feasible(
            float(np.mean(inner.r1)), float(np.mean(inner.r2)),
            float(np.mean(inner.ps)), float(np.mean(inner.pr)), cfg, opts.feas_tol,
        )
        return DualPoint(value, h, (nu_arr.copy(), inner), float(np.mean(inner.objective)), feasible)

    res = ascend(
        evaluate, np.asarray(opts.nu0, dtype=float), _scale(cfg),
        lower=np.array([0.0, 0.0, DUAL_FLOOR, DUAL_FLOOR]),
        rule=opts.step_rule, max_iter=opts.max_iter, tol=opts.tol, gtol=opts.gtol,
        s0=opts.s0, nu_max=opts.nu_max, stall_limit=opts.stall_limit, feas_tol=opts.feas_tol,
    )
    return res


def _pick(res, gap_tol):
    """Primal point to report and the resulting status.

    The converged iterate is preferred when feasible since it is the most
    accurate; otherwise the cheapest feasible iterate. ``"Optimal"`` needs
    either a converged ascent or a duality gap within ``gap_tol``.
    """
    if res.status == "Infeasible":
        return res.point, "Infeasible"
    chosen = res.point if res.point.feasible else res.best
    if chosen is None:
        return res.point, "MaxIterations"
    gap = chosen.objective - res.best_dual
    certified = gap <= gap_tol * (1.0 + abs(chosen.objective))
    return chosen, "Optimal" if res.status == "Converged" or certified else "MaxIterations"


def _report(res, nsi, cfg, mode, opts, kkt_mode=None):
    chosen, status = _pick(res, opts.gap_tol)
    nu_arr, inner = chosen.primal
    kkt = kkt_residual(nu_arr, inner, nsi, cfg, kkt_mode or mode)
    return SolverReport(
        allocation=inner.allocation,
        duals=DualVars.from_array(nu_arr),
        iterations=res.iterations,
        kkt_residual=kkt,
        status=status,
        objective=float(np.mean(inner.objective)),
        dual_value=float(res.best_dual),
        rates=(float(np.mean(inner.r1)) * cfg.bandwidth, float(np.mean(inner.r2)) * cfg.bandwidth),
        power=(float(np.mean(inner.ps)), float(np.mean(inner.pr))),
        mode=mode,
        diagnostics={
            "ascent_status": res.status,
            "final_grad": res.point.grad.tolist(),
            "duality_gap": float(np.mean(inner.objective)) - float(res.best_dual),
        },
    )


def solve_frame(nsi, cfg, opts=None):
    """Minimise expected collision for one frame by dual ascent.

    Returns the best feasible primal point met along the way. Status is
    ``"Optimal"`` when the ascent converged with a feasible point,
    ``"Infeasible"`` when the multipliers diverge, else ``"MaxIterations"``.
    """
    opts = opts or SolverOptions()
    res = _run_dual(nsi, cfg, opts, "frame")
    return _report(res, nsi, cfg, "frame", opts)


def solve_relay_free(nsi, cfg, opts=None):
    """Direct transmission only: the same solver with both relay links removed."""
    rep = solve_frame(nsi.without_relay(), cfg, opts)
    rep.mode = "relay-free"
    return rep


# ---------------------------------------------------------------------------
# sensing-free baseline


def _theta_lp(inner, nsi, cfg, plan):
    """Cheapest per-band time fractions at the given ratios (a small LP).

    Returns ``(theta1, theta2)`` or ``None`` if the LP is infeasible.
    """
    ratios = inner.ratios
    m = cfg.n_bands
    g_a = np.maximum(nsi.g_sr, nsi.g_sd)
    snr2 = nsi.g_sd * ratios.p2
    c11 = cfg.band_sum(np.log2(1.0 + g_a * ratios.p1))
    c12 = cfg.band_sum(np.log2(1.0 + snr2))
    c21 = cfg.band_sum(np.log2(1.0 + nsi.g_sd * ratios.p1))
    c22 = cfg.band_sum(np.log2(1.0 + snr2 + nsi.g_rd * ratios.q))
    ps1 = cfg.band_sum(ratios.p1)
    ps2 = cfg.band_sum(ratios.p2)
    prq = cfg.band_sum(ratios.q)
    cost = np.concatenate([cfg.active_prob, cfg.active_prob])
    a_ub = np.array([
        -np.concatenate([c11, c12]),
        -np.concatenate([c21, c22]),
        np.concatenate([ps1, ps2]),
        np.concatenate([np.zeros(m), prq]),
    ])
    rmin = cfg.r_min_normalized
    b_ub = np.array([-rmin, -rmin, cfg.p_s_max, cfg.p_r_max])
    bounds = [(0.0, plan.phase1.bound)] * m + [(0.0, plan.phase2.bound)] * m
    sol = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if sol.status != 0:
        return None
    th = np.clip(sol.x, 0.0, None)
    return np.minimum(th[:m], plan.phase1.bound), np.minimum(th[m:], plan.phase2.bound)


def _scaled_down(inner, cfg):
    """Shrink every time fraction by one factor until the tighter cut meets R_min."""
    low = min(float(inner.r1), float(inner.r2))
    if low <= 0:
        return None
    t = cfg.r_min_normalized / low
    if t > 1.0:
        return None
    al = inner.allocation
    return al.theta1 * t, al.theta2 * t


def solve_sensing_free(nsi, cfg, opts=None):
    """Baseline that ignores sensing: collision is ``pi * (theta1 + theta2)`` per band.

    The inner minimiser is bang-bang in ``theta``, so the dual iterates do
    not yield a feasible primal by themselves. Each candidate multiplier is
    turned into a primal point two ways, keeping the cheaper: scaling the
    bang-bang fractions down until the binding rate cut is tight, and the
    exact LP over ``theta`` at that multiplier's power ratios. Gains are
    still required (``nsi``); its sensing outcomes are ignored.
    """
    plan = access_plan(cfg, "sensing-free")
    zero = np.zeros_like(nsi.x)
    nsi = nsi.with_sensing(x=zero, y=None if nsi.y is None else zero)

    calls = [0]

    def recover(nu_arr, inner, use_lp=None):
        if use_lp is None:
            calls[0] += 1
            use_lp = calls[0] % 8 == 0
        best = None
        cands = [_scaled_down(inner, cfg)]
        if use_lp:
            cands.append(_theta_lp(inner, nsi, cfg, plan))
        for cand in cands:
            if cand is None:
                continue
            sol = _assemble(inner.ratios, cand[0], cand[1], nsi, cfg, plan)
            if _feasible(sol.r1, sol.r2, sol.ps, sol.pr, cfg, 1e-9) and (
                best is None or sol.objective < best.objective
            ):
                best = sol
        return inner if best is None else best

    opts = opts or SolverOptions()
    res = _run_dual(nsi, cfg, opts, "sensing-free", recover)
    # exact LP recovery at the final multipliers
    nu_arr = res.point.primal[0]
    inner = recover(nu_arr, solve_inner(nu_arr, nsi, cfg, "sensing-free"), use_lp=True)
    feasible = _feasible(float(inner.r1), float(inner.r2), float(inner.ps), float(inner.pr), cfg, opts.feas_tol)
    if feasible and (res.best is None or inner.objective < res.best.objective):
        res.best = replace(res.point, primal=(nu_arr, inner), objective=float(inner.objective), feasible=True)
        res.point = res.best
    return _report(res, nsi, cfg, "sensing-free", opts)
