"""Static configuration, per-frame network state and achievable rates."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np

from ._rng import make_rng
from .intervals import IntervalSet
from .traffic import TrafficParams, transition_prob

__all__ = [
    "SystemConfig",
    "FadingParams",
    "Nsi",
    "Allocation",
    "rate_r1",
    "rate_r2",
    "rate_crn",
    "rates_from_ratios",
    "sample_channel",
    "sample_sensing",
    "sample_nsi",
    "perspective_log2",
]

BUDGET_MODES = ("frame", "average")


def _as_band_map(band_map, n, m):
    bands = tuple(tuple(int(i) for i in members) for members in band_map)
    if len(bands) != m:
        raise ValueError(f"band_map has {len(bands)} bands, expected {m}")
    flat = sorted(i for members in bands for i in members)
    if flat != list(range(n)):
        raise ValueError("band_map must partition sub-channels 0..N-1 into disjoint, non-empty bands")
    if any(len(members) == 0 for members in bands):
        raise ValueError("every band must own at least one sub-channel")
    return bands


@dataclass(frozen=True)
class SystemConfig:
    """Network parameters shared by every frame.

    ``band_map[m]`` lists the (0-based) sub-channels overlapping ad-hoc band
    ``m``. ``traffic`` holds one :class:`TrafficParams` per band; a single
    instance is broadcast to all bands. With ``budget_mode="average"`` the
    power budgets and ``r_min`` are long-term averages over frames.
    """

    n_subchannels: int
    n_bands: int
    band_map: tuple
    alpha: float
    delta: float
    p_s_max: float
    p_r_max: float
    r_min: float
    traffic: tuple = field(default=(TrafficParams(1.0, 1.0),))
    bandwidth: float = 1.0
    frame_duration: float = 1.0
    budget_mode: str = "frame"

    def __post_init__(self):
        n, m = int(self.n_subchannels), int(self.n_bands)
        if n < 1 or m < 1:
            raise ValueError("need at least one sub-channel and one band")
        object.__setattr__(self, "n_subchannels", n)
        object.__setattr__(self, "n_bands", m)
        object.__setattr__(self, "band_map", _as_band_map(self.band_map, n, m))
        traffic = self.traffic
        if isinstance(traffic, TrafficParams):
            traffic = (traffic,)
        traffic = tuple(t if isinstance(t, TrafficParams) else TrafficParams(*t) for t in traffic)
        if len(traffic) == 1:
            traffic = traffic * m
        if len(traffic) != m:
            raise ValueError(f"traffic must give one (lam, mu) pair or {m} of them")
        object.__setattr__(self, "traffic", traffic)
        if not (0.0 <= self.delta < self.alpha < 1.0):
            raise ValueError(f"need 0 <= delta < alpha < 1, got delta={self.delta}, alpha={self.alpha}")
        for name in ("p_s_max", "p_r_max", "r_min", "bandwidth", "frame_duration"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if self.budget_mode not in BUDGET_MODES:
            raise ValueError(f"budget_mode must be one of {BUDGET_MODES}")

    # derived arrays -------------------------------------------------------

    @cached_property
    def band_of(self):
        out = np.empty(self.n_subchannels, dtype=np.intp)
        for m, members in enumerate(self.band_map):
            out[list(members)] = m
        out.flags.writeable = False
        return out

    @cached_property
    def band_index(self):
        return tuple(np.asarray(members, dtype=np.intp) for members in self.band_map)

    @cached_property
    def rate_sum(self):
        """(lam + mu) * T_f per band."""
        return np.array([t.rate_sum * self.frame_duration for t in self.traffic])

    @cached_property
    def active_prob(self):
        return np.array([t.active_prob for t in self.traffic])

    @property
    def r_min_normalized(self):
        """R_min / W, the rate target in bits/s/Hz summed over sub-channels."""
        return self.r_min / self.bandwidth

    def band_sum(self, values):
        """Sum per-sub-channel values (last axis) into per-band totals."""
        values = np.asarray(values)
        return np.stack([values[..., idx].sum(axis=-1) for idx in self.band_index], axis=-1)

    def replace(self, **changes):
        return replace(self, **changes)

    # serialisation --------------------------------------------------------

    def to_dict(self):
        d = asdict(self)
        d["band_map"] = [list(b) for b in self.band_map]
        d["traffic"] = [{"lambda": t.lam, "mu": t.mu} for t in self.traffic]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        traffic = d.pop("traffic", None)
        if traffic is not None:
            if isinstance(traffic, dict):
                traffic = [traffic]
            d["traffic"] = tuple(TrafficParams(float(t["lambda"]), float(t["mu"])) for t in traffic)
        if "band_map" not in d:
            n, m = int(d["n_subchannels"]), int(d["n_bands"])
            if n % m:
                raise ValueError("band_map omitted but N is not a multiple of M")
            k = n // m
            d["band_map"] = [list(range(i * k, (i + 1) * k)) for i in range(m)]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def config_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class FadingParams:
    """Mean per-sub-channel SINRs (dB) at uniform full power.

    The relay-link SINR covers both source-relay and relay-destination links.
    """

    snr_sd_db: float = 5.0
    snr_relay_db: float = 17.0

    def mean_gains(self, cfg):
        n = cfg.n_subchannels
        sd = 10 ** (self.snr_sd_db / 10) * n / cfg.p_s_max
        sr = 10 ** (self.snr_relay_db / 10) * n / cfg.p_s_max
        rd = 10 ** (self.snr_relay_db / 10) * n / cfg.p_r_max
        return sr, sd, rd


# ---------------------------------------------------------------------------
# network state


def _check_states(arr, m, name):
    arr = np.asarray(arr)
    if arr.shape[-1:] != (m,):
        raise ValueError(f"{name} must have trailing dimension {m}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} entries must be 0 or 1")
    return arr.astype(np.int8)


@dataclass(frozen=True, eq=False)
class Nsi:
    """Channel gains and sensing outcomes of one frame, or a batch of frames.

    Gains have trailing dimension N and sensing outcomes trailing dimension
    M; any leading dimensions index frames. ``y`` (the Phase-2 outcome) is
    only needed by the two-sensing ergodic pipeline.
    """

    g_sr: np.ndarray
    g_sd: np.ndarray
    g_rd: np.ndarray
    x: np.ndarray
    y: np.ndarray = None

    def __post_init__(self):
        gains = [np.asarray(getattr(self, k), dtype=float) for k in ("g_sr", "g_sd", "g_rd")]
        shape = gains[0].shape
        if any(g.shape != shape for g in gains) or len(shape) == 0:
            raise ValueError("g_sr, g_sd, g_rd must share one shape (..., N)")
        if any(np.any(~np.isfinite(g)) or np.any(g < 0) for g in gains):
            raise ValueError("channel gains must be finite and non-negative")
        for k, g in zip(("g_sr", "g_sd", "g_rd"), gains):
            object.__setattr__(self, k, g)
        x = np.asarray(self.x)
        m = x.shape[-1] if x.ndim else 0
        object.__setattr__(self, "x", _check_states(x, m, "x"))
        if self.y is not None:
            object.__setattr__(self, "y", _check_states(self.y, m, "y"))
            if self.y.shape != self.x.shape:
                raise ValueError("x and y must share a shape")
        if self.x.shape[:-1] != shape[:-1]:
            raise ValueError("sensing outcomes and gains disagree on the frame dimensions")

    @property
    def n_subchannels(self):
        return self.g_sd.shape[-1]

    @property
    def n_bands(self):
        return self.x.shape[-1]

    @property
    def batch_shape(self):
        return self.g_sd.shape[:-1]

    def __len__(self):
        if not self.batch_shape:
            raise TypeError("single-frame Nsi has no length")
        return self.batch_shape[0]

    def frame(self, i):
        return Nsi(self.g_sr[i], self.g_sd[i], self.g_rd[i], self.x[i], None if self.y is None else self.y[i])

    def with_sensing(self, x=None, y=None):
        return Nsi(self.g_sr, self.g_sd, self.g_rd, self.x if x is None else x, self.y if y is None else y)

    def without_relay(self):
        """Same state with the relay links removed (relay-free baseline)."""
        zero = np.zeros_like(self.g_sd)
        return Nsi(zero, self.g_sd, zero.copy(), self.x, self.y)

    def check(self, cfg):
        if self.n_subchannels != cfg.n_subchannels or self.n_bands != cfg.n_bands:
            raise ValueError(
                f"NSI has N={self.n_subchannels}, M={self.n_bands}; config expects "
                f"N={cfg.n_subchannels}, M={cfg.n_bands}"
            )
        return self

    def to_dict(self):
        d = {k: np.asarray(getattr(self, k)).tolist() for k in ("g_sr", "g_sd", "g_rd", "x")}
        if self.y is not None:
            d["y"] = self.y.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["g_sr"], d["g_sd"], d["g_rd"], d["x"], d.get("y"))


# ---------------------------------------------------------------------------
# allocation


def _placement_sets(spans, t_f):
    return tuple(IntervalSet.single(a, b) if b > a else IntervalSet() for a, b in np.asarray(spans))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Powers, per-band time fractions and placed transmission intervals.

    ``span1[..., m]`` and ``span2[..., m]`` are the ``(start, end)`` of band
    ``m``'s transmission interval in each phase, in time units; a zero-length
    span means the band is silent in that phase.
    """

    p_s1: np.ndarray
    p_s2: np.ndarray
    p_r: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    span1: np.ndarray
    span2: np.ndarray

    @property
    def intervals1(self):
        return _placement_sets(self.span1, None)

    @property
    def intervals2(self):
        return _placement_sets(self.span2, None)

    @property
    def source_power(self):
        return np.sum(self.p_s1, axis=-1) + np.sum(self.p_s2, axis=-1)

    @property
    def relay_power(self):
        return np.sum(self.p_r, axis=-1)

    def to_dict(self):
        return {k: np.asarray(getattr(self, k)).tolist() for k in self.__dataclass_fields__}

    def to_array(self):
        """Row layout ``[p_s1 | p_s2 | p_r | theta1 | theta2]``."""
        return np.concatenate([self.p_s1, self.p_s2, self.p_r, self.theta1, self.theta2], axis=-1)


def perspective_log2(theta, snr):
    """``theta * log2(1 + snr / theta)`` with the value 0 at ``theta == 0``."""
    theta = np.asarray(theta, dtype=float)
    snr = np.asarray(snr, dtype=float)
    pos = theta > 0
    safe = np.where(pos, theta, 1.0)
    return np.where(pos, theta * np.log2(1.0 + snr / safe), 0.0)


def _sub_theta(theta, cfg):
    return np.asarray(theta)[..., cfg.band_of]


def rate_r1(alloc, nsi, cfg):
    """Rate of the first decode-and-forward cut (source broadcast), bits/s."""
    t1, t2 = _sub_theta(alloc.theta1, cfg), _sub_theta(alloc.theta2, cfg)
    a = np.maximum(nsi.g_sr, nsi.g_sd)
    total = perspective_log2(t1, alloc.p_s1 * a) + perspective_log2(t2, alloc.p_s2 * nsi.g_sd)
    return cfg.bandwidth * np.sum(total, axis=-1)


def rate_r2(alloc, nsi, cfg):
    """Rate of the second cut (destination side), bits/s."""
    t1, t2 = _sub_theta(alloc.theta1, cfg), _sub_theta(alloc.theta2, cfg)
    total = perspective_log2(t1, alloc.p_s1 * nsi.g_sd) + perspective_log2(
        t2, alloc.p_s2 * nsi.g_sd + alloc.p_r * nsi.g_rd
    )
    return cfg.bandwidth * np.sum(total, axis=-1)


def rate_crn(alloc, nsi, cfg):
    return np.minimum(rate_r1(alloc, nsi, cfg), rate_r2(alloc, nsi, cfg))


def rates_from_ratios(p1, p2, q, theta1_sub, theta2_sub, nsi):
    """(R1/W, R2/W) from power-to-time ratios; avoids the 0/0 at theta = 0."""
    a = np.maximum(nsi.g_sr, nsi.g_sd)
    s = nsi.g_sd * p2
    r1 = theta1_sub * np.log2(1.0 + a * p1) + theta2_sub * np.log2(1.0 + s)
    r2 = theta1_sub * np.log2(1.0 + nsi.g_sd * p1) + theta2_sub * np.log2(1.0 + s + nsi.g_rd * q)
    return np.sum(r1, axis=-1), np.sum(r2, axis=-1)


# ---------------------------------------------------------------------------
# random state


def sample_channel(fading, cfg, seed, size=None):
    """Rayleigh block-fading gains ``(g_sr, g_sd, g_rd)`` with the given mean SINRs.

    Each gain is the configured mean times |h|^2 for unit-variance complex
    Gaussian h, i.e. a unit-mean exponential draw.
    """
    rng = make_rng(seed)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (3, cfg.n_subchannels)
    draws = rng.standard_exponential(shape)
    sr, sd, rd = fading.mean_gains(cfg)
    return sr * draws[..., 0, :], sd * draws[..., 1, :], rd * draws[..., 2, :]


def sample_sensing(cfg, seed, size=None):
    """Stationary Phase-1 outcome x and Phase-2 outcome y given x.

    x ~ Bernoulli(lam / (lam + mu)); y is the state after ``alpha * T_f``
    drawn from the CTMC transition probabilities.
    """
    rng = make_rng(seed)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (2, cfg.n_bands)
    u = rng.random(shape)
    pi = cfg.active_prob
    x = (u[..., 0, :] < pi).astype(np.int8)
    elapsed = cfg.alpha * cfg.frame_duration
    p_from_idle = np.array([transition_prob(t, elapsed, 0, 1) for t in cfg.traffic])
    p_from_active = np.array([transition_prob(t, elapsed, 1, 1) for t in cfg.traffic])
    y = (u[..., 1, :] < np.where(x == 1, p_from_active, p_from_idle)).astype(np.int8)
    return x, y


def sample_nsi(cfg, fading, seed, size=None):
    """Independent gains and sensing, drawn from separate substreams of ``seed``."""
    g_sr, g_sd, g_rd = sample_channel(fading, cfg, make_rng(seed, "gains"), size)
    x, y = sample_sensing(cfg, make_rng(seed, "sensing"), size)
    return Nsi(g_sr, g_sd, g_rd, x, y)
