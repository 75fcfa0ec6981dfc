"""Independent reference computations used by the tests and ``validate``.

Nothing here is on the production path. Each routine recomputes a quantity
the library derives in closed form, by a different route:

* :func:`adaptive_simpson` integrates conditional ACTIVE probabilities;
* :func:`best_discrete_placement` searches one- and two-piece schedules
  on a grid;
* :func:`bisect_root` solves scalar monotone equations;
* :func:`solve_reformulation` minimises collision directly over
  ``(theta, average power)`` with an augmented Lagrangian whose
  bound-constrained subproblems go to L-BFGS-B.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .access import access_plan

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=60):
    """Integral of scalar ``f`` over ``[a, b]`` to absolute tolerance ``tol``."""
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) * (fa + 4.0 * fm + fb) / 6.0

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = simpson(fa, fm, fb, a, b)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fmid, lo, mid)
        right = simpson(fmid, frm, fhi, mid, hi)
        diff = left + right - est
        if depth >= max_depth or abs(diff) <= 15.0 * eps:
            total += left + right + diff / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return sign * total


def conditional_active_integral(tp, state, a, b, tol=1e-10):
    """``int_a^b Pr{X(t) = 1 | X(0) = state} dt`` by adaptive Simpson.

    The integrand is the matching entry of the CTMC transition matrix.
    """
    lam, mu = tp.lam, tp.mu
    r = lam + mu
    if state == 0:
        def f(t):
            return lam * (1.0 - math.exp(-r * t)) / r
    else:
        def f(t):
            return (lam + mu * math.exp(-r * t)) / r
    return adaptive_simpson(f, a, b, tol)


# ---------------------------------------------------------------------------
# root finding


def bisect_root(fn, lo, hi, tol=1e-14, max_iter=400):
    """Root of a continuous ``fn`` with a sign change on ``[lo, hi]``."""
    flo = fn(lo)
    if flo == 0:
        return lo
    if np.sign(fn(hi)) == np.sign(flo):
        raise ValueError("no sign change on the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0 or hi - lo <= tol * max(1.0, abs(mid)):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# placement search


@dataclass
class PlacementSearch:
    best_value: float
    best_pieces: tuple
    n_candidates: int


def best_discrete_placement(tp, state, theta, lo, hi, n_grid=200, tol=1e-10):
    """Lowest expected ACTIVE time over grid schedules of total length ``theta``.

    Times are measured from the sensing instant (state ``state`` at 0) and
    schedules must lie in ``[lo, hi]``. Candidates are single intervals
    starting on an ``n_grid``-step grid, and unions of two disjoint
    intervals whose starts and first-piece lengths are grid multiples.
    Every endpoint is then a grid point or a grid point shifted by
    ``theta``, so the antiderivative is only integrated at those.
    """
    step = (hi - lo) / n_grid
    grid = lo + step * np.arange(n_grid + 1)
    slack = 1e-12

    def antider(t):
        return conditional_active_integral(tp, state, 0.0, t, tol / 10)

    f_grid = np.array([antider(t) for t in grid])
    # F(g_i + theta); the second piece of a split at k ends at g_{i-k} + theta
    f_shift = np.array([antider(t + theta) if t + theta <= hi + slack else np.nan for t in grid])
    fits = np.isfinite(f_shift)

    single = np.where(fits, f_shift - f_grid, np.inf)
    i = int(np.argmin(single))
    best = float(single[i])
    best_pieces = ((float(grid[i]), float(grid[i] + theta)),)
    count = int(fits.sum())

    n_split = int(math.floor(theta / step + 1e-9))
    for k in range(1, n_split + 1):
        rest = theta - k * step
        if rest <= slack:
            break
        # first piece [g_i, g_{i+k}]
        first = np.full(n_grid + 1, np.inf)
        first[: n_grid + 1 - k] = f_grid[k:] - f_grid[: n_grid + 1 - k]
        # second piece [g_j, g_j + rest] with g_j + rest = g_{j-k} + theta
        second = np.full(n_grid + 1, np.inf)
        j = np.arange(k, n_grid + 1)
        ends_ok = fits[j - k]
        second[j[ends_ok]] = f_shift[j[ends_ok] - k] - f_grid[j[ends_ok]]
        # cheapest second piece starting at index >= j
        suffix = np.append(np.minimum.accumulate(second[::-1])[::-1], np.inf)
        start = np.minimum(np.arange(n_grid + 1) + k + 1, n_grid + 1)
        cand = first + suffix[start]
        count += int(np.isfinite(cand).sum())
        i = int(np.argmin(cand))
        if cand[i] < best:
            best = float(cand[i])
            jj = i + k + 1 + int(np.argmin(second[i + k + 1:]))
            best_pieces = ((float(grid[i]), float(grid[i + k])), (float(grid[jj]), float(grid[jj] + rest)))
    return PlacementSearch(best, best_pieces, count)


# ---------------------------------------------------------------------------
# generic convex solver of the frame problem


@dataclass
class ReformulationResult:
    objective: float
    theta1: np.ndarray
    theta2: np.ndarray
    p_s1: np.ndarray
    p_s2: np.ndarray
    p_r: np.ndarray
    r1: float
    r2: float
    max_violation: float
    multipliers: np.ndarray
    success: bool


def _persp(theta, snr_power):
    """``theta log2(1 + x / theta)`` and its partials in ``theta`` and ``x``."""
    x = snr_power / theta
    val = theta * np.log1p(x) / LN2
    d_theta = np.log1p(x) / LN2 - x / ((1.0 + x) * LN2)
    d_x = 1.0 / ((1.0 + x) * LN2)
    return val, d_theta, d_x


def solve_reformulation(nsi, cfg, mode="frame", theta_floor=1e-10, max_outer=60, tol=1e-9):
    """Minimise the convex ``(theta, P)`` reformulation directly.

    Variables are per-band fractions ``theta1``, ``theta2`` and per-sub-channel
    average powers ``P_s1``, ``P_s2``, ``P_r`` with ``P = ratio * theta``.
    Constraints are handled by an augmented Lagrangian (multipliers on the
    two rate cuts and two budgets); every subproblem is a smooth box-bounded
    minimisation solved by L-BFGS-B, a projected quasi-Newton method.
    """
    plan = access_plan(cfg, mode)
    n, m = cfg.n_subchannels, cfg.n_bands
    band = cfg.band_of
    state1 = np.asarray(nsi.x) if plan.phase1.sensing else np.zeros(m, dtype=int)
    if plan.phase2.sensing == "y":
        state2 = np.asarray(nsi.y)
    elif plan.phase2.sensing is None:
        state2 = np.zeros(m, dtype=int)
    else:
        state2 = np.asarray(nsi.x)
    r, pi = cfg.rate_sum, cfg.active_prob
    g_a = np.maximum(nsi.g_sr, nsi.g_sd)
    g_d, g_r = nsi.g_sd, nsi.g_rd
    rmin = cfg.r_min_normalized
    scale = np.array([rmin, rmin, cfg.p_s_max, cfg.p_r_max])
    b1, b2 = plan.phase1.bound, plan.phase2.bound

    def unpack(z):
        return z[:m], z[m:2 * m], z[2 * m:2 * m + n], z[2 * m + n:2 * m + 2 * n], z[2 * m + 2 * n:]

    def marginal(win, th, st):
        if win.sensing is None:
            return pi.copy()
        idle = pi * (1.0 - np.exp(-r * (win.lead + th)))
        active = pi + (1.0 - pi) * np.exp(-r * (win.end - th))
        return np.where(st == 0, idle, active)

    def parts(z):
        t1, t2, p1, p2, pr = unpack(z)
        t1s, t2s = t1[band], t2[band]
        f = float(np.sum(plan.phase1.cost(t1, state1, r, pi) + plan.phase2.cost(t2, state2, r, pi)))
        df_t1 = marginal(plan.phase1, t1, state1)
        df_t2 = marginal(plan.phase2, t2, state2)
        # cut 1
        v11, dt11, dx11 = _persp(t1s, g_a * p1)
        v12, dt12, dx12 = _persp(t2s, g_d * p2)
        # cut 2
        v21, dt21, dx21 = _persp(t1s, g_d * p1)
        v22, dt22, dx22 = _persp(t2s, g_d * p2 + g_r * pr)
        R1 = float(np.sum(v11 + v12))
        R2 = float(np.sum(v21 + v22))
        cons = np.array([rmin - R1, rmin - R2, p1.sum() + p2.sum() - cfg.p_s_max, pr.sum() - cfg.p_r_max]) / scale
        zero_n, zero_m = np.zeros(n), np.zeros(m)

        def band_acc(v):
            out = np.zeros(m)
            np.add.at(out, band, v)
            return out

        jac = np.array([
            -np.concatenate([band_acc(dt11), band_acc(dt12), dx11 * g_a, dx12 * g_d, zero_n]),
            -np.concatenate([band_acc(dt21), band_acc(dt22), dx21 * g_d, dx22 * g_d, dx22 * g_r]),
            np.concatenate([zero_m, zero_m, np.ones(n), np.ones(n), zero_n]),
            np.concatenate([zero_m, zero_m, zero_n, zero_n, np.ones(n)]),
        ]) / scale[:, None]
        grad_f = np.concatenate([df_t1, df_t2, zero_n, zero_n, zero_n])
        return f, grad_f, cons, jac, R1, R2

    bounds = (
        [(theta_floor, b1)] * m + [(theta_floor, b2)] * m
        + [(0.0, cfg.p_s_max)] * (2 * n) + [(0.0, cfg.p_r_max)] * n
    )
    z = np.concatenate([
        np.full(m, 0.5 * b1), np.full(m, 0.5 * b2),
        np.full(2 * n, cfg.p_s_max / (4 * n)), np.full(n, cfg.p_r_max / (2 * n)),
    ])
    lam = np.zeros(4)
    rho = 10.0
    prev_viol = np.inf
    for _ in range(max_outer):
        def aug(zz, lam=lam, rho=rho):
            f, gf, c, jc, _, _ = parts(zz)
            shifted = np.maximum(0.0, lam + rho * c)
            val = f + (np.sum(shifted**2) - np.sum(lam**2)) / (2.0 * rho)
            return val, gf + jc.T @ shifted

        sol = minimize(aug, z, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-13, "maxcor": 30})
        z = sol.x
        _, _, c, _, _, _ = parts(z)
        lam = np.maximum(0.0, lam + rho * c)
        viol = float(np.max(np.maximum(c, 0.0)))
        comp = float(np.max(np.abs(np.minimum(-c, lam))))
        if viol <= tol and comp <= tol:
            break
        if viol > 0.25 * prev_viol:
            rho = min(rho * 10.0, 1e10)
        prev_viol = viol
    f, _, c, _, R1, R2 = parts(z)
    t1, t2, p1, p2, pr = unpack(z)
    viol = float(np.max(np.maximum(c, 0.0)))
    return ReformulationResult(f, t1.copy(), t2.copy(), p1.copy(), p2.copy(), pr.copy(), R1, R2,
                               viol, lam / scale, viol <= 1e-6)
