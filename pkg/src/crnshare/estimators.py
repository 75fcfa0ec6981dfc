"""scikit-learn style wrappers around the frame and ergodic solvers.

Inputs are :class:`~crnshare.netmodel.Nsi` objects rather than feature
matrices, so these estimators plug into ``get_params``/``set_params`` and
``clone`` but not into generic pipelines.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .access import frame_interference
from .ergodic import VARIANTS, build_packet, online_update, train_offline
from .frame_solver import SolverOptions, solve_frame, solve_relay_free, solve_sensing_free
from .netmodel import FadingParams

__all__ = ["FrameSharingSolver", "ErgodicSharingPolicy"]

_FRAME = {"proposed": solve_frame, "relay-free": solve_relay_free, "sensing-free": solve_sensing_free}


def _options(est):
    return SolverOptions(step_rule=est.step_rule, max_iter=est.max_iter, tol=est.tol)


class FrameSharingSolver(BaseEstimator):
    """Per-frame solver. ``fit(nsi)`` solves the frame and stores the report.

    Parameters
    ----------
    config : SystemConfig
    strategy : {"proposed", "relay-free", "sensing-free"}
    step_rule, max_iter, tol
        Dual ascent settings, see :class:`SolverOptions`.
    """

    def __init__(self, config=None, strategy="proposed", step_rule="ellipsoid", max_iter=5000, tol=1e-10):
        self.config = config
        self.strategy = strategy
        self.step_rule = step_rule
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        if self.config is None:
            raise ValueError("config is required")
        if self.strategy not in _FRAME:
            raise ValueError(f"strategy must be one of {sorted(_FRAME)}")
        self.report_ = _FRAME[self.strategy](X, self.config, _options(self))
        self.allocation_ = self.report_.allocation
        self.duals_ = self.report_.duals
        self.status_ = self.report_.status
        self.n_iter_ = self.report_.iterations
        return self

    def predict(self, X):
        """Solve ``X`` and return its allocation."""
        return self.fit(X).allocation_

    def score(self, X, y=None):
        """Negative expected collision / T_f (higher is better)."""
        return -self.fit(X).report_.objective


class ErgodicSharingPolicy(BaseEstimator):
    """Long-term policy. ``fit`` trains the multipliers; ``predict`` runs the on-line update.

    Parameters
    ----------
    config : SystemConfig
        Long-term configuration (``budget_mode="average"``).
    variant : {"two-sensing", "phase1-only", "sensing-free", "relay-free"}
    n_samples : int
        Training sample size when ``fit`` is called without data.
    seed : int
    fading : FadingParams or None
    step_rule, max_iter, tol
        Dual ascent settings.
    """

    def __init__(self, config=None, variant="two-sensing", n_samples=2000, seed=0, fading=None,
                 step_rule="ellipsoid", max_iter=5000, tol=1e-10):
        self.config = config
        self.variant = variant
        self.n_samples = n_samples
        self.seed = seed
        self.fading = fading
        self.step_rule = step_rule
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X=None, y=None):
        """Train on the batch ``X`` of network states, or on a fresh sample."""
        if self.config is None:
            raise ValueError("config is required")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
        self.policy_ = train_offline(
            self.config, self.seed, self.n_samples, _options(self), variant=self.variant,
            fading=self.fading or FadingParams(), samples=X,
        )
        self.duals_ = self.policy_.duals
        self.status_ = self.policy_.status
        self.n_iter_ = self.policy_.iterations
        return self

    def packet(self, X):
        check_is_fitted(self, "policy_")
        return build_packet(self.policy_, X)

    def predict(self, X):
        """Allocation for each frame of ``X`` from its gains and sensing outcomes."""
        return online_update(self.packet(X), X.x, X.y)

    def transform(self, X):
        """Allocations as rows ``[p_s1 | p_s2 | p_r | theta1 | theta2]``."""
        return self.predict(X).to_array()

    def score(self, X, y=None):
        """Negative mean expected collision / T_f over the frames of ``X``."""
        alloc = self.predict(X)
        mode = VARIANTS[self.variant].access
        cfg = self.config
        y2 = X.y if mode == "ergodic" else None
        cost = frame_interference(alloc.theta1, alloc.theta2, X.x, cfg, y2, mode=mode)
        return -float(np.mean(cost)) / cfg.frame_duration
