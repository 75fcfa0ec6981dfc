"""Binary CTMC model of ad-hoc traffic on one band.

State 0 is IDLE and state 1 is ACTIVE. ``lam`` is the IDLE->ACTIVE rate and
``mu`` the ACTIVE->IDLE rate, so IDLE periods last Exp(lam) and ACTIVE
periods Exp(mu), and the stationary ACTIVE probability is lam / (lam + mu).

Collision-time kernels are evaluated on a frame normalised to unit length:
callers pass ``rate_sum = (lam + mu) * T_f`` and offsets as fractions of
``T_f``. The public ``phi*`` wrappers take physical units and rescale.
"""

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng, seed_sequence
from .intervals import IntervalSet

__all__ = [
    "TrafficParams",
    "SamplePath",
    "PathBatch",
    "transition_prob",
    "transition_matrix",
    "stationary_active_prob",
    "expected_active_time",
    "marginal_inverse",
    "phi1",
    "phi2_frame",
    "phi2_ergodic",
    "sample_path",
    "sample_paths",
    "collision_time",
    "monte_carlo_active_time",
]

# slack when checking theta against its upper bound
_BOUND_TOL = 1e-12


@dataclass(frozen=True)
class TrafficParams:
    """Transition rates (1/time) of one band's CTMC."""

    lam: float
    mu: float

    def __post_init__(self):
        for name in ("lam", "mu"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")

    @property
    def rate_sum(self):
        return self.lam + self.mu

    @property
    def active_prob(self):
        return self.lam / (self.lam + self.mu)

    def scaled(self, t_f):
        """Rates expressed per frame, i.e. (lam*T_f, mu*T_f)."""
        return TrafficParams(self.lam * t_f, self.mu * t_f)


def stationary_active_prob(tp):
    return tp.lam / (tp.lam + tp.mu)


def transition_prob(tp, t, from_state, to_state):
    """Pr{X(s+t) = to_state | X(s) = from_state}; ``t`` may be an array."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("transition time must be non-negative")
    if from_state not in (0, 1) or to_state not in (0, 1):
        raise ValueError("states are 0 (IDLE) or 1 (ACTIVE)")
    pi = tp.active_prob
    decay = np.exp(-tp.rate_sum * t)
    # P_{x1}(t) = pi + (x - pi) e^{-(lam+mu) t}
    p_active = pi + (from_state - pi) * decay
    out = p_active if to_state == 1 else 1.0 - p_active
    return float(out) if out.ndim == 0 else out


def transition_matrix(tp, t):
    if t < 0:
        raise ValueError("transition time must be non-negative")
    r = tp.rate_sum
    e = np.exp(-r * t)
    lam, mu = tp.lam, tp.mu
    return np.array([[mu + lam * e, lam - lam * e], [mu - mu * e, lam + mu * e]]) / r


# ---------------------------------------------------------------------------
# normalised collision kernels


def expected_active_time(theta, state, lead, end, rate_sum, active_prob):
    """Expected ACTIVE time inside the optimal placement of length ``theta``.

    Times are fractions of the frame and measured from the sensing instant.
    With ``state == 0`` the placement is ``[lead, lead + theta]`` (transmit as
    early as allowed); with ``state == 1`` it is ``[end - theta, end]``
    (transmit as late as allowed). All arguments broadcast.
    """
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(rate_sum, dtype=float)
    pi = np.asarray(active_prob, dtype=float)
    state = np.asarray(state)
    idle = pi * (theta + np.exp(-r * lead) * np.expm1(-r * theta) / r)
    active = pi * theta + (1.0 - pi) * np.exp(-r * end) * np.expm1(r * theta) / r
    return np.where(state == 0, idle, active)


def marginal_inverse(value, state, lead, end, rate_sum, active_prob):
    """Unclamped placement length at which the marginal collision equals ``value``.

    The derivative of :func:`expected_active_time` in ``theta`` is the
    conditional ACTIVE probability at the growing edge of the placement.
    Where no finite solution exists the result is ``+inf`` (marginal never
    reaches ``value``) or ``-inf`` (marginal always exceeds it), which the
    caller's clamp maps to the appropriate bound.
    """
    value = np.asarray(value, dtype=float)
    r = np.asarray(rate_sum, dtype=float)
    pi = np.asarray(active_prob, dtype=float)
    state = np.asarray(state)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg0 = 1.0 - value / pi
        idle = np.where(arg0 > 0, -np.log(np.where(arg0 > 0, arg0, 1.0)) / r - lead, np.inf)
        arg1 = (value - pi) / (1.0 - pi)
        active = np.where(arg1 > 0, end + np.log(np.where(arg1 > 0, arg1, 1.0)) / r, -np.inf)
    return np.where(state == 0, idle, active)


def _check_theta(theta, upper, name):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > upper + _BOUND_TOL):
        raise ValueError(f"{name} must lie in [0, {upper:.6g}], got {theta}")
    return theta


def _check_state(x):
    x = np.asarray(x)
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("sensing outcome must be 0 or 1")
    return x


def _phi(theta, state, tp, t_f, lead, end):
    out = t_f * expected_active_time(theta, state, lead, end, tp.rate_sum * t_f, tp.active_prob)
    return float(out) if out.ndim == 0 else out


def phi1(theta, x, tp, t_f, alpha, delta):
    """Expected Phase-1 collision time (time units) given X(0) = x."""
    theta = _check_theta(theta, alpha - delta, "theta")
    return _phi(theta, _check_state(x), tp, t_f, delta, alpha)


def phi2_frame(theta, x, tp, t_f, alpha):
    """Expected Phase-2 collision time given the Phase-1 outcome X(0) = x."""
    theta = _check_theta(theta, 1.0 - alpha, "theta")
    return _phi(theta, _check_state(x), tp, t_f, alpha, 1.0)


def phi2_ergodic(theta, y, tp, t_f, alpha, delta):
    """Expected Phase-2 collision time given a second sensing X(alpha T_f) = y."""
    theta = _check_theta(theta, 1.0 - alpha - delta, "theta")
    return _phi(theta, _check_state(y), tp, t_f, delta, 1.0 - alpha)


# ---------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class SamplePath:
    """One realised trajectory on ``[0, t_f]``."""

    initial_state: int
    transitions: tuple
    t_f: float

    def __post_init__(self):
        if self.initial_state not in (0, 1):
            raise ValueError("initial_state must be 0 or 1")
        prev = 0.0
        for t in self.transitions:
            if not (prev < t <= self.t_f):
                raise ValueError("transition times must be strictly increasing within (0, t_f]")
            prev = t

    def state_at(self, t):
        return self.initial_state ^ (bisect_left(self.transitions, t) & 1)

    def active_set(self):
        edges = (0.0,) + tuple(self.transitions) + (self.t_f,)
        state = self.initial_state
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            if state == 1:
                pieces.append((a, b))
            state ^= 1
        return IntervalSet(pieces)


def _initial_states(rng, x0, n, pi):
    if isinstance(x0, str):
        if x0 != "stationary":
            raise ValueError("x0 must be 0, 1, an array of states or 'stationary'")
        return (rng.random(n) < pi).astype(np.int8)
    states = np.broadcast_to(np.asarray(x0, dtype=np.int8), (n,)).copy()
    _check_state(states)
    return states


def sample_path(tp, x0, t_f, seed):
    """Draw one path; ``x0`` is 0, 1 or ``"stationary"``."""
    rng = make_rng(seed)
    state = int(_initial_states(rng, x0, 1, tp.active_prob)[0])
    initial = state
    t = 0.0
    times = []
    while True:
        rate = tp.mu if state == 1 else tp.lam
        t += rng.exponential(1.0 / rate)
        if t > t_f:
            break
        times.append(t)
        state ^= 1
    return SamplePath(initial, tuple(times), float(t_f))


class PathBatch:
    """``n`` independent paths stored as a padded boundary matrix.

    ``edges[i, k]`` is the start of the k-th holding period of path ``i``
    clipped to ``t_f``; the period's state is ``initial[i] ^ (k & 1)``.
    """

    def __init__(self, initial, edges, t_f):
        self.initial = initial
        self.edges = edges
        self.t_f = float(t_f)

    def __len__(self):
        return self.initial.shape[0]

    def _segment_states(self):
        k = np.arange(self.edges.shape[1] - 1)
        return self.initial[:, None] ^ (k[None, :] & 1)

    def active_time(self, a, b):
        """ACTIVE measure of each path inside ``[a_i, b_i]`` (a, b broadcast)."""
        a = np.broadcast_to(np.asarray(a, dtype=float), self.initial.shape)[:, None]
        b = np.broadcast_to(np.asarray(b, dtype=float), self.initial.shape)[:, None]
        lo = np.maximum(self.edges[:, :-1], a)
        hi = np.minimum(self.edges[:, 1:], b)
        return np.sum(np.where(self._segment_states() == 1, np.maximum(hi - lo, 0.0), 0.0), axis=1)

    def state_at(self, t):
        t = np.broadcast_to(np.asarray(t, dtype=float), self.initial.shape)
        inner = self.edges[:, 1:-1]
        # padding edges sit exactly at t_f and are not transitions
        flips = np.sum((inner < t[:, None]) & (inner < self.t_f), axis=1)
        return (self.initial ^ (flips & 1)).astype(np.int8)

    def path(self, i):
        inner = self.edges[i, 1:-1]
        return SamplePath(int(self.initial[i]), tuple(float(v) for v in inner[inner < self.t_f]), self.t_f)


def sample_paths(tp, x0, t_f, n, seed, block=8):
    """Draw ``n`` paths at once. Deterministic for a given seed and ``n``."""
    rng = make_rng(seed)
    initial = _initial_states(rng, x0, n, tp.active_prob)
    cols = [np.zeros((n, 1))]
    last = np.zeros(n)
    k0 = 0
    while np.any(last < t_f):
        k = np.arange(k0, k0 + block)
        rates = np.where((initial[:, None] ^ (k[None, :] & 1)) == 1, tp.mu, tp.lam)
        hold = rng.standard_exponential((n, block)) / rates
        cum = last[:, None] + np.cumsum(hold, axis=1)
        cols.append(cum)
        last = cum[:, -1]
        k0 += block
    edges = np.minimum(np.concatenate(cols, axis=1), t_f)
    edges = np.concatenate([edges, np.full((n, 1), float(t_f))], axis=1)
    return PathBatch(initial, edges, t_f)


def collision_time(path, intervals):
    """Realised collision: measure of ``intervals`` during which ``path`` is ACTIVE."""
    if not isinstance(intervals, IntervalSet):
        intervals = IntervalSet(intervals)
    if not intervals.within(0.0, path.t_f):
        raise ValueError("intervals must lie inside [0, t_f]")
    return path.active_set().overlap(intervals)


def monte_carlo_active_time(tp, x0, t_f, windows, n_paths, seed, chunk=1 << 17):
    """Mean and standard error of ACTIVE time over each ``(a, b)`` window.

    Paths are drawn in chunks, each from its own substream of ``seed`` so
    the estimate does not depend on how the work is split.
    """
    windows = np.asarray(windows, dtype=float).reshape(-1, 2)
    total = np.zeros(len(windows))
    total_sq = np.zeros(len(windows))
    done = 0
    idx = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        batch = sample_paths(tp, x0, t_f, m, seed_sequence(seed, "mc-chunk", idx))
        for w, (a, b) in enumerate(windows):
            vals = batch.active_time(a, b)
            total[w] += vals.sum()
            total_sq[w] += np.dot(vals, vals)
        done += m
        idx += 1
    mean = total / n_paths
    var = np.maximum(total_sq / n_paths - mean**2, 0.0) * n_paths / max(n_paths - 1, 1)
    return mean, np.sqrt(var / n_paths)
