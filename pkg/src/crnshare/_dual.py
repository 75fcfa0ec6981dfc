"""Projected ascent on a concave dual function over a box ``nu >= lower``.

The engine is problem-agnostic. The caller supplies ``evaluate(nu)`` which
returns a :class:`DualPoint`: the dual value, a (sub)gradient, and the
primal point recovered from the inner minimisation together with its
objective and a feasibility flag. Iterates are kept in scaled coordinates
``u = nu * scale`` so that each gradient component is a relative slack.
"""

from dataclasses import dataclass, field

import numpy as np

STEP_RULES = ("ellipsoid", "spg", "diminishing", "polyak")


@dataclass
class DualPoint:
    value: float
    grad: np.ndarray
    primal: object
    objective: float
    feasible: bool


@dataclass
class AscentResult:
    nu: np.ndarray
    point: DualPoint
    best: DualPoint
    iterations: int
    status: str
    best_dual: float
    history: list = field(default_factory=list)

    @property
    def duality_gap(self):
        if self.best is None:
            return np.inf
        return self.best.objective - self.best_dual


def ascend(
    evaluate,
    nu0,
    scale,
    lower,
    rule="ellipsoid",
    max_iter=5000,
    tol=1e-10,
    gtol=1e-10,
    s0=1.0,
    nu_max=1e6,
    stall_limit=10_000,
    rate_slots=(0, 1),
    feas_tol=1e-6,
    record=False,
):
    """Maximise the dual; see module docstring for the ``evaluate`` contract.

    Stops when the scaled projected gradient or the scaled iterate change
    drops below tolerance. Infeasibility of the primal is declared when the
    multipliers blow past ``nu_max`` or the rate slacks stay violated for
    ``stall_limit`` consecutive iterations.
    """
    if rule not in STEP_RULES:
        raise ValueError(f"step rule must be one of {STEP_RULES}")
    if rule == "ellipsoid":
        return _ellipsoid(evaluate, nu0, lower, max_iter, tol, nu_max, rate_slots, feas_tol, record)
    scale = np.asarray(scale, dtype=float)
    lb = np.asarray(lower, dtype=float) * scale
    rate_slots = list(rate_slots)

    def proj(u):
        return np.maximum(u, lb)

    def run(u):
        pt = evaluate(u / scale)
        return pt, pt.grad / scale

    u = proj(np.asarray(nu0, dtype=float) * scale)
    pt, g = run(u)
    best = pt if pt.feasible else None
    best_dual = pt.value
    history = [pt.value] if record else []
    recent = [pt.value]
    pg = proj(u + g) - u
    alpha = 1.0 / max(float(np.max(np.abs(pg))), 1e-12)
    violated = 0
    status = "MaxIterations"
    k = 0

    for k in range(1, max_iter + 1):
        pg = proj(u + g) - u
        if np.max(np.abs(pg)) <= gtol:
            status = "Converged"
            break

        accepted = True
        if rule == "spg":
            d = proj(u + alpha * g) - u
            slope = float(g @ d)
            ref = max(recent)
            t = 1.0
            accepted = False
            for _ in range(50):
                trial = proj(u + t * d)
                new_pt, new_g = run(trial)
                if new_pt.value >= ref + 1e-4 * t * slope:
                    accepted = True
                    break
                # safeguarded quadratic interpolation of the step length
                drop = pt.value + t * slope - new_pt.value
                t_q = 0.5 * slope * t * t / drop if drop > 0 and np.isfinite(drop) else 0.5 * t
                t = min(max(t_q, 0.1 * t), 0.5 * t)
            if not accepted:
                if alpha <= 1e-12:
                    status = "Stalled"
                    break
                alpha = max(alpha * 1e-3, 1e-12)
                continue
            s = trial - u
            y = new_g - g
            sy = -float(s @ y)
            alpha = float(s @ s) / sy if sy > 0 else alpha * 10.0
            alpha = min(max(alpha, 1e-12), 1e12)
        else:
            if rule == "polyak" and best is not None and best.objective > pt.value:
                step = (best.objective - pt.value) / max(float(g @ g), 1e-300)
            else:
                # normalised step: the raw subgradient can be huge near the eta floor
                step = s0 / (np.sqrt(k) * max(float(np.linalg.norm(g)), 1e-12))
            trial = proj(u + step * g)
            new_pt, new_g = run(trial)
            s = trial - u

        u, pt, g = trial, new_pt, new_g
        best_dual = max(best_dual, pt.value)
        if pt.feasible and (best is None or pt.objective < best.objective):
            best = pt
        recent.append(pt.value)
        if len(recent) > 10:
            recent.pop(0)
        if record:
            history.append(pt.value)

        nu = u / scale
        if not np.all(np.isfinite(nu)) or np.linalg.norm(nu) > nu_max:
            status = "Infeasible"
            break
        violated = violated + 1 if np.max(g[rate_slots]) > feas_tol else 0
        if violated >= stall_limit:
            status = "Infeasible"
            break
        if np.max(np.abs(s)) <= tol * max(1.0, np.max(np.abs(u))):
            status = "Converged"
            break

    return AscentResult(u / scale, pt, best, k, status, best_dual, history)


def _ellipsoid(evaluate, nu0, lower, max_iter, tol, nu_max, rate_slots, feas_tol, record):
    """Central-cut ellipsoid method on the dual.

    Starts from the ball of radius ``nu_max`` around ``nu0``. Every
    gradient at the centre cuts away the half-space where the concave dual
    cannot exceed its current value; centres outside the box are cut back
    with the violated bound. The ellipsoid ``{c + B z : |z| <= 1}`` is kept
    in factored form so it stays non-degenerate along flat directions of
    the dual. Stops once the ellipsoid is smaller than ``tol`` (relative)
    in every direction, or once the certified bound on the remaining dual
    improvement falls below ``tol**2``. A centre pinned against the initial
    ball with violated rate constraints means the dual is unbounded, i.e.
    the primal problem is infeasible.
    """
    lower = np.asarray(lower, dtype=float)
    rate_slots = list(rate_slots)
    n = lower.size
    c = np.maximum(np.asarray(nu0, dtype=float), lower)
    basis = np.eye(n) * float(nu_max)
    f1 = 1.0 / (n + 1)
    f2 = n / np.sqrt(n * n - 1.0)
    f3 = 1.0 - np.sqrt((n - 1.0) / (n + 1.0))
    pt = best = None
    best_dual = -np.inf
    upper = np.inf
    history = []
    status = "MaxIterations"
    k = 0
    for k in range(1, max_iter + 1):
        if np.any(c < lower):
            a = np.zeros(n)
            a[int(np.argmax(lower - c))] = 1.0
            evaluated = False
        else:
            pt = evaluate(c)
            evaluated = True
            best_dual = max(best_dual, pt.value)
            if pt.feasible and (best is None or pt.objective < best.objective):
                best = pt
            if record:
                history.append(pt.value)
            a = np.asarray(pt.grad, dtype=float)
        z = basis.T @ a
        width = float(np.linalg.norm(z))
        if evaluated:
            upper = min(upper, pt.value + width)
            if width == 0.0 or upper - best_dual <= tol * tol * max(1.0, abs(best_dual)):
                status = "Converged"
                break
        if not (width > 0 and np.isfinite(width)):
            status = "Stalled"
            break
        z /= width
        c = c + f1 * (basis @ z)
        basis = f2 * (basis - f3 * np.outer(basis @ z, z))
        if np.sqrt(np.sum(basis * basis)) <= tol * max(1.0, float(np.max(np.abs(c)))):
            status = "Converged"
            break
    c_eval = np.maximum(c, lower)
    if pt is None or status != "Converged" or not evaluated:
        pt = evaluate(c_eval)
        best_dual = max(best_dual, pt.value)
        if pt.feasible and (best is None or pt.objective < best.objective):
            best = pt
    else:
        c_eval = c_eval if evaluated and np.array_equal(c_eval, c) else c_eval
    g = np.asarray(pt.grad, dtype=float)
    if np.linalg.norm(c_eval) >= 0.5 * nu_max and np.max(g[rate_slots]) > feas_tol:
        status = "Infeasible"
    return AscentResult(c_eval, pt, best, k, status, best_dual, history)
