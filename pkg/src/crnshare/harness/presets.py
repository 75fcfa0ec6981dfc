"""Built-in configurations of the reference experiments."""

import numpy as np

from ..netmodel import FadingParams, Nsi, SystemConfig
from ..traffic import TrafficParams

__all__ = [
    "fig4_config",
    "fig4_nsi",
    "fig6_config",
    "FRAME_GRID",
    "ERGODIC_GRID",
    "VARSIGMA_GRID",
    "ERROR_GRID",
]

# R_min / (N W) for the frame-level sweep, step 0.01
FRAME_GRID = tuple(round(0.01 * k, 2) for k in range(1, 81))
ERGODIC_GRID = (0.6, 1.7, 2.8)
VARSIGMA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
ERROR_GRID = (0.0, 0.01, 0.02, 0.05, 0.1)


def fig4_config(r_min_per_nw=0.3):
    """Two sub-channels, each in its own band, per-frame budgets of 1."""
    n = 2
    return SystemConfig(
        n_subchannels=n, n_bands=2, band_map=((0,), (1,)),
        alpha=0.5, delta=0.1, p_s_max=1.0, p_r_max=1.0,
        r_min=r_min_per_nw * n, traffic=TrafficParams(1.0, 1.0),
    )


def fig4_nsi():
    return Nsi(
        g_sr=np.array([1.3, 1.4]), g_sd=np.array([0.4, 0.5]), g_rd=np.array([1.3, 1.4]),
        x=np.array([0, 1]),
    )


def fig6_config(r_min_per_nw=0.6, lam=1.0, mu=1.0, delta=0.0):
    """Sixteen sub-channels in four bands of four, long-term budgets.

    Budgets equal ``N`` so that the mean per-sub-channel SINRs of
    :class:`FadingParams` hold at uniform full power.
    """
    n, m = 16, 4
    return SystemConfig(
        n_subchannels=n, n_bands=m, band_map=tuple(tuple(range(4 * b, 4 * b + 4)) for b in range(m)),
        alpha=0.5, delta=delta, p_s_max=float(n), p_r_max=float(n),
        r_min=r_min_per_nw * n, traffic=TrafficParams(lam, mu), budget_mode="average",
    )


DEFAULT_FADING = FadingParams(snr_sd_db=5.0, snr_relay_db=17.0)
