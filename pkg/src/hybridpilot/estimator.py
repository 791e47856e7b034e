"""Least-squares channel estimation and its normalized MSE.

Estimates are returned for the target-cell users only. When the true
channel is supplied (genie mode) the residual ``h - h_hat`` is kept so that
the error decomposition can be checked term by term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pilots import FrameDesign
from .scenario import NetworkScenario
from .simulation import iter_trials

__all__ = [
    "ChannelEstimate",
    "MseEstimate",
    "ls_estimate",
    "contaminated_ls_estimate",
    "mse_theoretical",
    "mse_empirical",
]


@dataclass(frozen=True)
class ChannelEstimate:
    """``h_hat`` is ``(M, n)``, one column per estimated user.

    ``delta_h`` is ``h - h_hat`` and is only set in genie mode.
    """

    h_hat: np.ndarray
    delta_h: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.h_hat.shape[1]


def _as_rows(pilot_rows) -> tuple[np.ndarray, bool]:
    P = np.asarray(pilot_rows)
    single = P.ndim == 1
    return np.atleast_2d(P), single


def ls_estimate(Y_overhead: np.ndarray, pilot_rows, h_true: np.ndarray | None = None) -> ChannelEstimate:
    """``h_hat = Y p^H / ||p||^2`` for each pilot row.

    Parameters
    ----------
    Y_overhead : (M, tau) complex
        The training part of the received matrix.
    pilot_rows : (tau,) or (n, tau) complex
        Pilots of the users to estimate.
    h_true : (M,) or (M, n), optional
        True channels; enables the genie residual.
    """
    P, single = _as_rows(pilot_rows)
    Y_overhead = np.asarray(Y_overhead)
    if Y_overhead.shape[-1] != P.shape[1]:
        raise ValueError(f"overhead has {Y_overhead.shape[-1]} columns, pilots have {P.shape[1]}")
    energy = np.sum(np.abs(P) ** 2, axis=1)
    if np.any(energy <= 0):
        raise ValueError("zero pilot energy")
    h_hat = (Y_overhead @ P.conj().T) / energy
    delta = None
    if h_true is not None:
        h_true = np.asarray(h_true)
        delta = (h_true[:, None] if h_true.ndim == 1 else h_true) - h_hat
    if single:
        h_hat = h_hat[:, 0]
        delta = None if delta is None else delta[:, 0]
    return ChannelEstimate(h_hat, delta)


def contaminated_ls_estimate(Y_overhead: np.ndarray, reused_pilot_rows, K: int | None = None,
                             h_true: np.ndarray | None = None) -> ChannelEstimate:
    """LS estimate when the same ``K`` pilots are reused in every cell.

    Same arithmetic as :func:`ls_estimate`; the difference lies in the frame
    that produced ``Y_overhead``. ``K`` (defaults to the number of rows) is
    checked against the training length.
    """
    P, _ = _as_rows(reused_pilot_rows)
    K = P.shape[0] if K is None else K
    if P.shape[1] < K:
        raise ValueError(f"training length tau={P.shape[1]} shorter than K={K}")
    return ls_estimate(Y_overhead, reused_pilot_rows, h_true)


def mse_theoretical(design: FrameDesign, scenario: NetworkScenario, k: int) -> float:
    """Closed-form normalized MSE of user ``k`` of the target cell.

    ``(1/tau) * [alpha (1-lam)/lam * sum(beta)/beta_k + sigma^2/(lam beta_k)]``
    with the continuous ``alpha`` of ``design``.
    """
    lam = design.lam
    if lam <= 0:
        raise ValueError("pilot power ratio must be positive")
    bk = scenario.beta[0, k]
    data = design.alpha * (1.0 - lam) / lam * scenario.beta.sum() / bk
    noise = scenario.sigma_n2 / (lam * bk)
    return (data + noise) / design.tau


@dataclass(frozen=True)
class MseEstimate:
    """Ratio-of-expectations MSE per user, pooled value and standard errors."""

    per_user: np.ndarray
    per_user_se: np.ndarray
    pooled: float
    pooled_se: float
    trials: int


def _ratio_se(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``mean(num)/mean(den)`` along axis 0 with delta-method standard error."""
    n = num.shape[0]
    mn, md = num.mean(axis=0), den.mean(axis=0)
    r = mn / md
    if n < 2:
        return r, np.full_like(r, np.nan)
    vn = num.var(axis=0, ddof=1)
    vd = den.var(axis=0, ddof=1)
    cov = ((num - mn) * (den - md)).sum(axis=0) / (n - 1)
    var = (vn - 2 * r * cov + r * r * vd) / (n * md * md)
    return r, np.sqrt(np.maximum(var, 0.0))


def mse_empirical(scenario: NetworkScenario, design: FrameDesign, trials: int, seed: int = 0,
                  pilot_mode: str = "orthogonal") -> MseEstimate:
    """Monte Carlo ``E||h - h_hat||^2 / E||h||^2`` for every target-cell user."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    err = np.empty((trials, scenario.K))
    ref = np.empty((trials, scenario.K))
    for i, tr in enumerate(iter_trials(scenario, design, trials, seed, pilot_mode)):
        est = ls_estimate(tr.Y[:, : design.tau], tr.target_pilots, tr.h_target)
        err[i] = np.sum(np.abs(est.delta_h) ** 2, axis=0)
        ref[i] = np.sum(np.abs(tr.h_target) ** 2, axis=0)
    per, per_se = _ratio_se(err, ref)
    pooled, pooled_se = _ratio_se(err.sum(axis=1, keepdims=True), ref.sum(axis=1, keepdims=True))
    return MseEstimate(per, per_se, float(pooled[0]), float(pooled_se[0]), trials)
