"""Long-term (ergodic) spectrum sharing: off-line dual training, on-line primal.

Budgets and the rate target are averages over frames. The multipliers are
trained once on a fixed sample of network states (sample-average
approximation); afterwards each frame's allocation is a closed-form
function of the trained multipliers, that frame's gains and its sensing
outcomes. The destination can precompute everything that does not depend
on sensing into a :class:`ParameterPacket`, leaving the transmitters a
table lookup.
"""

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import seed_sequence
from .access import access_plan
from .frame_solver import (
    DualVars,
    SolverOptions,
    _pick,
    _run_dual,
    kkt_residual,
    power_ratios,
    solve_inner,
)
from .netmodel import Allocation, FadingParams, Nsi, SystemConfig, sample_nsi

__all__ = [
    "VARIANTS",
    "ErgodicVariant",
    "TrainedPolicy",
    "ParameterPacket",
    "phase1_only_variant",
    "theta_phase2_ergodic",
    "inner_solution_ergodic",
    "train_offline",
    "build_packet",
    "online_update",
]

PACKET_MAGIC = b"CRNP"
PACKET_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class ErgodicVariant:
    """How a strategy senses and places its transmissions.

    ``access`` names the access plan; ``relay`` is False for the direct-only
    baseline.
    """

    name: str
    access: str
    relay: bool = True

    @property
    def uses_y(self):
        return self.access == "ergodic"


VARIANTS = {
    "two-sensing": ErgodicVariant("two-sensing", "ergodic"),
    "phase1-only": ErgodicVariant("phase1-only", "phase1-only"),
    "sensing-free": ErgodicVariant("sensing-free", "sensing-free"),
    "relay-free": ErgodicVariant("relay-free", "ergodic", relay=False),
}


def _variant(v):
    if isinstance(v, ErgodicVariant):
        return v
    try:
        return VARIANTS[v]
    except KeyError:
        raise ValueError(f"unknown variant {v!r}; choose from {sorted(VARIANTS)}") from None


def phase1_only_variant(cfg=None):
    """Ergodic pipeline that senses once: Phase 2 is conditioned on ``x``
    and placed inside ``[alpha, 1]`` as in the frame-level rule."""
    return VARIANTS["phase1-only"]


def theta_phase2_ergodic(nu, ratios, y, m, cfg):
    """Phase-2 time fraction of band ``m`` given the second sensing outcome ``y``."""
    win = access_plan(cfg, "ergodic").phase2
    v = np.asarray(ratios.v2)[..., m]
    return float(win.best_theta(v, y, cfg.rate_sum[m], cfg.active_prob[m]))


def _prepare(omega, variant):
    if not variant.relay:
        omega = omega.without_relay()
    if variant.access == "sensing-free":
        zero = np.zeros_like(omega.x)
        omega = omega.with_sensing(x=zero, y=zero)
    return omega


def inner_solution_ergodic(nu, omega, cfg, variant="two-sensing"):
    """Allocation for one frame (or a batch) at multipliers ``nu``."""
    variant = _variant(variant)
    return solve_inner(nu, _prepare(omega, variant), cfg, variant.access).allocation


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainedPolicy:
    """Trained multipliers plus what is needed to reproduce them."""

    duals: DualVars
    config: SystemConfig
    variant: str = "two-sensing"
    seed: int = 0
    n_samples: int = 0
    iterations: int = 0
    status: str = "Optimal"
    final_subgradient: tuple = ()
    dual_value: float = float("nan")
    objective: float = float("nan")
    kkt_residual: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == "Optimal"

    def to_dict(self):
        return {
            "duals": asdict(self.duals),
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "variant": self.variant,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "iterations": self.iterations,
            "status": self.status,
            "final_subgradient": list(self.final_subgradient),
            "dual_value": self.dual_value,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d):
        cfg = SystemConfig.from_dict(d["config"])
        if "config_hash" in d and d["config_hash"] != cfg.config_hash():
            raise ValueError("config hash mismatch: policy file was edited or is corrupt")
        return cls(
            duals=DualVars(**d["duals"]),
            config=cfg,
            variant=d.get("variant", "two-sensing"),
            seed=int(d.get("seed", 0)),
            n_samples=int(d.get("n_samples", 0)),
            iterations=int(d.get("iterations", 0)),
            status=d.get("status", "Optimal"),
            final_subgradient=tuple(d.get("final_subgradient", ())),
            dual_value=float(d.get("dual_value", float("nan"))),
            objective=float(d.get("objective", float("nan"))),
            kkt_residual=float(d.get("kkt_residual", float("nan"))),
            diagnostics=dict(d.get("diagnostics", {})),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def training_sample(cfg, seed, n_samples, fading=None):
    """The fixed NSI sample used by :func:`train_offline` for ``seed``."""
    fading = fading or FadingParams()
    return sample_nsi(cfg, fading, seed_sequence(seed, "train"), n_samples)


def train_offline(cfg, seed=0, n_samples=2000, opts=None, variant="two-sensing", fading=None, samples=None):
    """Learn the multipliers of the long-term problem by sample-average dual ascent.

    The same ``n_samples`` network states (drawn from ``seed``, or given as
    ``samples``) are reused at every iteration, so the dual function being
    maximised is deterministic. Its gradient is the sample mean of the
    per-state constraint slacks.
    """
    variant = _variant(variant)
    opts = opts or SolverOptions()
    if samples is None:
        samples = training_sample(cfg, seed, n_samples, fading)
    if samples.g_sd.ndim != 2:
        raise ValueError("training samples must be a batch of frames")
    omega = _prepare(samples, variant)
    res = _run_dual(omega, cfg, opts, variant.access)
    chosen, status = _pick(res, opts.gap_tol)
    nu_arr, inner = chosen.primal
    return TrainedPolicy(
        duals=DualVars.from_array(nu_arr),
        config=cfg,
        variant=variant.name,
        seed=int(seed),
        n_samples=int(len(samples)),
        iterations=res.iterations,
        status=status,
        final_subgradient=tuple(float(v) for v in chosen.grad),
        dual_value=float(res.best_dual),
        objective=float(np.mean(inner.objective)),
        kkt_residual=kkt_residual(nu_arr, inner, omega, cfg, variant.access),
        diagnostics={"ascent_status": res.status},
    )


# ---------------------------------------------------------------------------
# packet and on-line update


@dataclass(eq=False)
class ParameterPacket:
    """Everything the transmitters need for one frame except the sensing outcomes.

    ``theta1[..., m, s]`` is band ``m``'s Phase-1 fraction when it is sensed
    in state ``s``; ``theta2`` likewise for Phase 2 (keyed by ``y`` for the
    two-sensing variant, by ``x`` otherwise). Leading dimensions index
    frames. ``parameter_count`` counts the per-sub-channel ratios and one
    candidate pair per band and phase.
    """

    p1: np.ndarray
    p2: np.ndarray
    q: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    config: SystemConfig
    access: str = "ergodic"

    @property
    def n_subchannels(self):
        return self.p1.shape[-1]

    @property
    def plan(self):
        try:
            return self._plan
        except AttributeError:
            self._plan = access_plan(self.config, self.access)
            return self._plan

    @property
    def payload_size(self):
        """Number of float64 values in the binary record."""
        return 3 * self.n_subchannels + 4 * self.n_bands

    @property
    def n_bands(self):
        return self.theta1.shape[-2]

    @property
    def parameter_count(self):
        return 3 * self.n_subchannels + 2 * self.n_bands

    def to_array(self):
        """Flat payload: ``p1 | p2 | q | theta1(x=0,1 per band) | theta2(...)``."""
        if self.p1.ndim != 1:
            raise ValueError("serialise one frame at a time")
        return np.concatenate([self.p1, self.p2, self.q, self.theta1.ravel(), self.theta2.ravel()])

    def to_bytes(self):
        """16-byte header (magic, version, N, M) then little-endian float64 payload."""
        head = _HEADER.pack(PACKET_MAGIC, PACKET_VERSION, self.n_subchannels, self.n_bands)
        return head + self.to_array().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data, config, access="ergodic"):
        magic, version, n, m = _HEADER.unpack_from(data)
        if magic != PACKET_MAGIC or version != PACKET_VERSION:
            raise ValueError("not a parameter packet (bad magic or version)")
        if (n, m) != (config.n_subchannels, config.n_bands):
            raise ValueError("packet dimensions do not match the config")
        body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if body.size != 3 * n + 4 * m:
            raise ValueError(f"packet payload has {body.size} values, expected {3 * n + 4 * m}")
        body = body.astype(float)
        return cls(
            body[:n], body[n:2 * n], body[2 * n:3 * n],
            body[3 * n:3 * n + 2 * m].reshape(m, 2), body[3 * n + 2 * m:].reshape(m, 2),
            config, access,
        )


def build_packet(policy, gains):
    """Precompute ratios and both candidate fractions per band and phase.

    ``gains`` is an :class:`Nsi` (its sensing fields are ignored) or a tuple
    ``(g_sr, g_sd, g_rd)``; batches give a batched packet.
    """
    cfg = policy.config
    variant = _variant(policy.variant)
    if isinstance(gains, Nsi):
        g_sr, g_sd, g_rd = gains.g_sr, gains.g_sd, gains.g_rd
    else:
        g_sr, g_sd, g_rd = (np.asarray(g, dtype=float) for g in gains)
    lead = g_sd.shape[:-1]
    zero = np.zeros(lead + (cfg.n_bands,), dtype=np.int8)
    omega = _prepare(Nsi(g_sr, g_sd, g_rd, zero, zero), variant)
    ratios = power_ratios(policy.duals, omega, cfg)
    plan = access_plan(cfg, variant.access)
    r, pi = cfg.rate_sum, cfg.active_prob
    one = np.ones_like(zero)
    t1 = np.stack([plan.phase1.best_theta(ratios.v1, s, r, pi) for s in (zero, one)], axis=-1)
    t2 = np.stack([plan.phase2.best_theta(ratios.v2, s, r, pi) for s in (zero, one)], axis=-1)
    return ParameterPacket(ratios.p1, ratios.p2, ratios.q, t1, t2, cfg, variant.access)


def _select(table, state):
    if table.ndim == 2:
        return table[_ROWS[: table.shape[0]], state]
    return np.take_along_axis(table, state[..., None].astype(np.intp), axis=-1)[..., 0]


_ROWS = np.arange(4096)


def online_update(packet, x, y=None):
    """Allocation from a packet and this frame's sensing outcomes.

    Pure lookup, multiply and placement; no iteration.
    """
    cfg = packet.config
    plan = packet.plan
    x = np.asarray(x, dtype=np.int8)
    if plan.phase1.sensing is None:
        x = np.zeros_like(x)
    if plan.phase2.sensing == "y":
        if y is None:
            raise ValueError("the two-sensing variant needs y")
        s2 = np.asarray(y, dtype=np.int8)
    else:
        s2 = x
    theta1 = _select(packet.theta1, x)
    theta2 = _select(packet.theta2, s2)
    band = cfg.band_of
    a1, b1 = plan.phase1.span(theta1, x)
    a2, b2 = plan.phase2.span(theta2, s2)
    t_f = cfg.frame_duration
    return Allocation(
        packet.p1 * theta1[..., band], packet.p2 * theta2[..., band], packet.q * theta2[..., band],
        theta1, theta2,
        np.stack([a1, b1], axis=-1) * t_f,
        np.stack([a2, b2], axis=-1) * t_f,
    )
