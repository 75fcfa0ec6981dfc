"""Held-out evaluation of trained policies on simulated frames.

Each evaluation frame carries fresh fading gains and one CTMC sample path
per band. The sensing outcomes are read off the paths (``x`` at the frame
start, ``y`` at ``alpha * T_f``), so realised collision can be measured on
the very traffic the policy sensed.
"""

from dataclasses import dataclass

import numpy as np

from .._rng import seed_sequence
from ..access import frame_interference
from ..ergodic import VARIANTS, _prepare, build_packet, online_update
from ..netmodel import Nsi, rate_r1, rate_r2, sample_channel
from ..traffic import sample_paths

__all__ = ["EvalFrames", "FrameMetrics", "eval_frames", "evaluate_policy", "realized_collision"]


@dataclass(eq=False)
class EvalFrames:
    nsi: Nsi
    paths: tuple

    def __len__(self):
        return len(self.nsi)


def eval_frames(cfg, fading, seed, n_frames):
    """``n_frames`` evaluation frames from the ``"eval"`` substream of ``seed``.

    Training draws from the ``"train"`` substream, so the two never share
    NSI realisations.
    """
    g_sr, g_sd, g_rd = sample_channel(fading, cfg, seed_sequence(seed, "eval", "gains"), n_frames)
    t_f = cfg.frame_duration
    paths = tuple(
        sample_paths(tp, "stationary", t_f, n_frames, seed_sequence(seed, "eval", "paths", m))
        for m, tp in enumerate(cfg.traffic)
    )
    x = np.stack([p.state_at(0.0) for p in paths], axis=-1)
    y = np.stack([p.state_at(cfg.alpha * t_f) for p in paths], axis=-1)
    return EvalFrames(Nsi(g_sr, g_sd, g_rd, x, y), paths)


def _active(batch, a, b):
    return batch.active_time(a, np.maximum(a, b))


def realized_collision(paths, span1, span2_src, span2_rel, t_f):
    """Realised collision per frame, in units of ``T_f``.

    In Phase 2 the union of the source's and the relay's intervals counts;
    they coincide unless the two nodes sensed different outcomes.
    """
    total = 0.0
    for m, batch in enumerate(paths):
        c1 = _active(batch, span1[:, m, 0], span1[:, m, 1])
        a_s, b_s = span2_src[:, m, 0], span2_src[:, m, 1]
        a_r, b_r = span2_rel[:, m, 0], span2_rel[:, m, 1]
        lo, hi = np.maximum(a_s, a_r), np.minimum(b_s, b_r)
        both = np.where(hi > lo, _active(batch, lo, hi), 0.0)
        c2 = _active(batch, a_s, b_s) + _active(batch, a_r, b_r) - both
        total = total + c1 + c2
    return total / t_f


@dataclass(eq=False)
class FrameMetrics:
    """Per-frame results of one policy on an evaluation set."""

    analytic: np.ndarray
    realized: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    ps: np.ndarray
    pr: np.ndarray


def _silence(span, on):
    """Collapse the spans of bands in which the node sends no power."""
    return np.where(on[..., None], span, span[..., :1])


def _flip(states, flips):
    return np.where(flips, 1 - states, states).astype(np.int8)


def evaluate_policy(policy, frames, flips=None):
    """Run the on-line update on every frame and measure the outcome.

    ``flips`` optionally holds boolean sensing-error masks
    ``(x_source, x_relay, y_source, y_relay)``, each shaped like ``x``. The
    source then acts on its own (possibly wrong) outcomes for Phase 1 and
    its Phase-2 power; the relay acts on its own for its Phase-2 power and
    placement. A node that puts no power on a band in Phase 2 adds no
    interval there. Analytic collision and rates are only defined without
    errors and are NaN otherwise.
    """
    cfg = policy.config
    variant = VARIANTS[policy.variant]
    nsi = frames.nsi
    packet = build_packet(policy, nsi)
    t_f = cfg.frame_duration
    if flips is None:
        alloc = online_update(packet, nsi.x, nsi.y)
        realized = realized_collision(frames.paths, alloc.span1, alloc.span2, alloc.span2, t_f)
        analytic = frame_interference(
            alloc.theta1, alloc.theta2, nsi.x, cfg, nsi.y, mode=variant.access
        ) / t_f
        view = _prepare(nsi, variant)
        r1, r2 = rate_r1(alloc, view, cfg), rate_r2(alloc, view, cfg)
        return FrameMetrics(analytic, realized, r1, r2, alloc.source_power, alloc.relay_power)
    xs, xr, ys, yr = (_flip(s, f) for s, f in zip((nsi.x, nsi.x, nsi.y, nsi.y), flips))
    src = online_update(packet, xs, ys)
    rel = online_update(packet, xr, yr)
    span2_src = _silence(src.span2, cfg.band_sum(src.p_s2) > 0)
    span2_rel = _silence(rel.span2, cfg.band_sum(rel.p_r) > 0)
    realized = realized_collision(frames.paths, src.span1, span2_src, span2_rel, t_f)
    nan = np.full(len(frames), np.nan)
    return FrameMetrics(nan, realized, nan, nan, src.source_power, rel.relay_power)
