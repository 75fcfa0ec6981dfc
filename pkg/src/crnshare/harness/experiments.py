"""Sweep experiments and their tabular output.

Every experiment returns an :class:`ExperimentResult`: summary rows (one
per sweep value and strategy) plus the per-frame series behind them, so
that paired comparisons between strategies can use common random numbers.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .._rng import seed_sequence
from ..ergodic import train_offline
from ..frame_solver import SolverOptions, solve_frame, solve_relay_free, solve_sensing_free
from ..netmodel import FadingParams, SystemConfig
from ..traffic import TrafficParams
from . import presets
from .evaluation import eval_frames, evaluate_policy

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "ResultRow",
    "ExperimentResult",
    "paired_difference",
    "run_frame_sweep",
    "run_ergodic_sweep",
    "run_varsigma_sweep",
    "run_sensing_error_sweep",
    "run_experiment",
    "format_csv",
]

KINDS = ("frame", "ergodic", "varsigma", "sensing-error")
ERGODIC_STRATEGIES = ("two-sensing", "phase1-only", "sensing-free", "relay-free")
FRAME_STRATEGIES = ("proposed", "relay-free", "sensing-free")


@dataclass
class ExperimentSpec:
    """One experiment: what to sweep, over which values, on how many frames.

    ``grid`` holds the swept values (rate target, varsigma or error
    probability). ``levels`` are the rate targets ``R_min/(NW)`` held fixed
    by the varsigma and sensing-error sweeps. ``config`` overrides the
    built-in base configuration.
    """

    kind: str
    grid: tuple = ()
    levels: tuple = ()
    frames: int = 500
    seed: int = 0
    n_train: int = 2000
    strategies: tuple = ()
    config: SystemConfig = None
    fading: FadingParams = field(default_factory=FadingParams)
    options: SolverOptions = field(default_factory=SolverOptions)
    out: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"experiment kind must be one of {KINDS}")
        defaults = {
            "frame": (presets.FRAME_GRID, (), FRAME_STRATEGIES),
            "ergodic": (presets.ERGODIC_GRID, (), ERGODIC_STRATEGIES),
            "varsigma": (presets.VARSIGMA_GRID, (0.6,), ERGODIC_STRATEGIES),
            "sensing-error": (presets.ERROR_GRID, (0.6, 1.7), ("two-sensing", "phase1-only")),
        }[self.kind]
        self.grid = tuple(float(v) for v in (self.grid or defaults[0]))
        self.levels = tuple(float(v) for v in (self.levels or defaults[1]))
        self.strategies = tuple(self.strategies or defaults[2])
        if not self.grid:
            raise ValueError("sweep grid must not be empty")
        if self.kind in ("varsigma", "sensing-error") and not self.levels:
            raise ValueError("this sweep needs at least one rate level")
        if int(self.frames) < 1:
            raise ValueError("frames must be at least 1")
        self.frames = int(self.frames)
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        allowed = FRAME_STRATEGIES if self.kind == "frame" else ERGODIC_STRATEGIES
        bad = set(self.strategies) - set(allowed)
        if bad:
            raise ValueError(f"unknown strategies {sorted(bad)} for a {self.kind} sweep")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "config" in d and d["config"] is not None and not isinstance(d["config"], SystemConfig):
            d["config"] = SystemConfig.from_dict(d["config"])
        if isinstance(d.get("fading"), dict):
            d["fading"] = FadingParams(**d["fading"])
        if isinstance(d.get("options"), dict):
            d["options"] = SolverOptions.from_dict(d["options"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ResultRow:
    """One sweep point of one strategy.

    ``collision`` is the analytic normalised collision ``I/T_f`` (mean over
    frames for the ergodic sweeps); ``realized`` is the same quantity
    measured on simulated traffic. ``rate`` is ``min(R1, R2)/(N W)``
    (expected rates for the ergodic sweeps). Infeasible points carry NaN
    metrics and ``feasible=False``.
    """

    experiment: str
    sweep_value: float
    level: float
    strategy: str
    collision: float
    stderr: float
    realized: float
    realized_stderr: float
    rate: float
    feasible: bool
    status: str
    frames: int
    theta1: str = ""
    theta2: str = ""


def _series_key(value, level, name):
    # nan never compares equal, so sweeps without a level are keyed by None
    return (value, None if math.isnan(level) else level, name)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    series: dict = field(default_factory=dict)

    def row(self, sweep_value, strategy, level=None):
        for r in self.rows:
            if r.strategy == strategy and math.isclose(r.sweep_value, sweep_value, abs_tol=1e-12) and (
                level is None or math.isclose(r.level, level, abs_tol=1e-12)
            ):
                return r
        raise KeyError((sweep_value, strategy, level))

    def series_of(self, sweep_value, strategy, level=None):
        """Stored per-point objects (reports, policies, per-frame arrays)."""
        r = self.row(sweep_value, strategy, level)
        return self.series[_series_key(r.sweep_value, r.level, r.strategy)]

    def frames_of(self, sweep_value, strategy, level=None, kind="analytic"):
        return self.series_of(sweep_value, strategy, level)[kind]

    def to_csv(self):
        return format_csv(self.rows)

    def to_json(self):
        return json.dumps([_row_dict(r) for r in self.rows], indent=1)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def _row_dict(r):
    d = asdict(r)
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def format_csv(rows):
    """Header plus one line per row; floats with 9 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(ResultRow)])
    for r in rows:
        writer.writerow([_fmt(getattr(r, f.name)) for f in fields(ResultRow)])
    return buf.getvalue()


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        return float("nan"), float("nan")
    se = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(np.mean(values)), se


def paired_difference(a, b):
    """Mean and standard error of ``a - b`` over matched frames."""
    return _mean_se(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def _join(values):
    return ";".join(f"{float(v):.9g}" for v in np.ravel(values))


# ---------------------------------------------------------------------------
# frame level


def run_frame_sweep(spec):
    """Single-frame problem over a grid of ``R_min/(N W)`` on one fixed NSI.

    Uses the built-in two-sub-channel instance unless ``spec.config`` is
    given (then its ``r_min`` is overridden per grid point and the built-in
    gains must fit its dimensions).
    """
    base = spec.config or presets.fig4_config()
    nsi = presets.fig4_nsi()
    solvers = {"proposed": solve_frame, "relay-free": solve_relay_free, "sensing-free": solve_sensing_free}
    rows, series = [], {}
    n = base.n_subchannels
    for value in spec.grid:
        cfg = base.replace(r_min=value * n * base.bandwidth)
        for name in spec.strategies:
            rep = solvers[name](nsi, cfg, spec.options)
            ok = rep.status == "Optimal"
            al = rep.allocation
            rate = min(rep.rates) / (n * cfg.bandwidth)
            rows.append(ResultRow(
                "frame", value, float("nan"), name,
                rep.objective if ok else float("nan"), 0.0 if ok else float("nan"),
                float("nan"), float("nan"),
                rate if ok else float("nan"), ok, rep.status, 1,
                _join(al.theta1) if ok else "", _join(al.theta2) if ok else "",
            ))
            series[_series_key(value, float("nan"), name)] = {"report": rep}
    return ExperimentResult(spec, rows, series)


# ---------------------------------------------------------------------------
# ergodic


def _ergodic_rows(kind, value, level, policies, frames, flips=None):
    rows, series = [], {}
    for name, policy in policies.items():
        key = (value, level, name)
        if not policy.feasible:
            rows.append(ResultRow(
                kind, value, level, name, float("nan"), float("nan"), float("nan"), float("nan"),
                float("nan"), False, policy.status, len(frames),
            ))
            series[key] = {"policy": policy}
            continue
        met = evaluate_policy(policy, frames, flips)
        cfg = policy.config
        nw = cfg.n_subchannels * cfg.bandwidth
        rate = min(float(np.mean(met.r1)), float(np.mean(met.r2))) / nw
        analytic, se = _mean_se(met.analytic)
        realized, rse = _mean_se(met.realized)
        if flips is not None:
            analytic, se = realized, rse
        rows.append(ResultRow(
            kind, value, level, name, analytic, se, realized, rse, rate, True, policy.status, len(frames),
        ))
        series[key] = {"analytic": met.analytic, "realized": met.realized, "metrics": met, "policy": policy}
    return rows, series


def _train_all(cfg, spec, names):
    return {
        name: train_offline(cfg, spec.seed, spec.n_train, spec.options, variant=name, fading=spec.fading)
        for name in names
    }


def _ergodic_base(spec):
    return spec.config or presets.fig6_config()


def _with_rate(cfg, level):
    return cfg.replace(r_min=level * cfg.n_subchannels * cfg.bandwidth)


def run_ergodic_sweep(spec):
    """Long-term average collision versus the average rate target.

    Every strategy is trained on the same NSI sample and evaluated on the
    same held-out frames and traffic paths.
    """
    base = _ergodic_base(spec)
    frames = eval_frames(base, spec.fading, spec.seed, spec.frames)
    rows, series = [], {}
    for value in spec.grid:
        cfg = _with_rate(base, value)
        r, s = _ergodic_rows("ergodic", value, value, _train_all(cfg, spec, spec.strategies), frames)
        rows += r
        series.update(s)
    return ExperimentResult(spec, rows, series)


def run_varsigma_sweep(spec):
    """Collision versus varsigma = T_f / (1/lambda + 1/mu) with lambda = mu = 2 varsigma / T_f."""
    base = _ergodic_base(spec)
    rows, series = [], {}
    for level in spec.levels:
        for value in spec.grid:
            rate = 2.0 * value / base.frame_duration
            cfg = _with_rate(base, level).replace(traffic=TrafficParams(rate, rate))
            frames = eval_frames(cfg, spec.fading, spec.seed, spec.frames)
            r, s = _ergodic_rows("varsigma", value, level, _train_all(cfg, spec, spec.strategies), frames)
            rows += r
            series.update(s)
    return ExperimentResult(spec, rows, series)


def error_masks(seed, n_frames, n_bands):
    """Uniforms behind the four sensing-error masks; shared by every error level."""
    rng = np.random.default_rng(seed_sequence(seed, "eval", "sensing-errors"))
    return rng.random((4, n_frames, n_bands))


def run_sensing_error_sweep(spec):
    """Realised collision when each node's sensing outcome flips with probability p.

    Source and relay err independently. The same uniforms decide the flips
    at every p, so the sweep is monotone in the error set and ``p = 0``
    reproduces the error-free evaluation.
    """
    base = _ergodic_base(spec)
    frames = eval_frames(base, spec.fading, spec.seed, spec.frames)
    u = error_masks(spec.seed, spec.frames, base.n_bands)
    rows, series = [], {}
    for level in spec.levels:
        policies = _train_all(_with_rate(base, level), spec, spec.strategies)
        for value in spec.grid:
            flips = tuple(u[k] < value for k in range(4))
            r, s = _ergodic_rows("sensing-error", value, level, policies, frames, flips)
            rows += r
            series.update(s)
    return ExperimentResult(spec, rows, series)


RUNNERS = {
    "frame": run_frame_sweep,
    "ergodic": run_ergodic_sweep,
    "varsigma": run_varsigma_sweep,
    "sensing-error": run_sensing_error_sweep,
}


def run_experiment(spec):
    return RUNNERS[spec.kind](spec)
