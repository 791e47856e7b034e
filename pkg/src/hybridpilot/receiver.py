"""Matched-filter detection, genie SINR ledger, hard decisions, data-aided
re-estimation and the signal/self-interference correlation diagnostic.

Phase I is the TS segment of the overhead (data under the pilot), phase II
is the data-only remainder of the frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import ChannelEstimate, ls_estimate
from .pilots import FrameDesign, PilotBook
from .scenario import NetworkScenario
from .simulation import Trial, iter_trials

__all__ = [
    "Ledger",
    "DetectionOutput",
    "HardDecision",
    "SinrEstimate",
    "RefineResult",
    "ZetaEstimate",
    "phase_slice",
    "mf_detect",
    "hard_decide",
    "trial_inverse_sinr",
    "empirical_sinr",
    "data_aided_iterate",
    "refine_estimates",
    "correlation_zeta",
]

log = logging.getLogger(__name__)

PHASES = ("I", "II")


def phase_slice(design: FrameDesign, phase: str) -> slice:
    if phase == "I":
        return slice(design.n_tm, design.tau)
    if phase == "II":
        return slice(design.tau, design.T)
    raise ValueError(f"phase must be 'I' or 'II', got {phase!r}")


def phase_power(design: FrameDesign, phase: str) -> float:
    """Per-symbol power of the desired data symbol in ``phase``."""
    return 1.0 - design.lam if phase == "I" else design.p_data


@dataclass(frozen=True)
class Ledger:
    """Per-symbol decomposition of the MF output, arrays of shape ``(K, n)``.

    ``cross_power[k, u]`` is the within-phase power contributed by user
    column ``u`` to target user ``k`` (zero for ``u == k``).
    """

    S: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    N: np.ndarray
    cross_power: np.ndarray
    K: int

    def total(self) -> np.ndarray:
        return self.S + self.I1 + self.I2 + self.I3 + self.N

    def powers(self) -> dict[str, np.ndarray]:
        """Symbol-averaged term powers per target user.

        Cross-interference powers are sums of the individual interferer
        powers, i.e. the quantities that enter the SINR denominator.
        """
        return {
            "S": np.mean(np.abs(self.S) ** 2, axis=1),
            "I1": np.mean(np.abs(self.I1) ** 2, axis=1),
            "I2": self.cross_power[:, : self.K].sum(axis=1),
            "I3": self.cross_power[:, self.K:].sum(axis=1),
            "N": np.mean(np.abs(self.N) ** 2, axis=1),
        }


@dataclass(frozen=True)
class HardDecision:
    symbols: np.ndarray
    errors: np.ndarray | None
    p_e: float | None


@dataclass(frozen=True)
class DetectionOutput:
    """MF soft outputs ``h_hat^H y / ||h_hat||^2`` for one phase.

    ``ledger`` and the error fields are populated in genie mode only.
    """

    phase: str
    soft: np.ndarray
    power: float
    decisions: HardDecision
    ledger: Ledger | None = None

    @property
    def symbol_errors(self) -> int | None:
        e = self.decisions.errors
        return None if e is None else int(e.sum())


def hard_decide(soft: np.ndarray, power: float, truth: np.ndarray | None = None) -> HardDecision:
    """Nearest QPSK point at per-symbol ``power``; error mask against ``truth``."""
    a = math.sqrt(power / 2.0)
    soft = np.asarray(soft)
    dec = a * (np.where(soft.real >= 0, 1.0, -1.0) + 1j * np.where(soft.imag >= 0, 1.0, -1.0))
    if truth is None:
        return HardDecision(dec, None, None)
    err = np.abs(dec - truth) > 1e-9 * max(a, 1e-300)
    return HardDecision(dec, err, float(err.mean()) if err.size else 0.0)


def mf_detect(Y: np.ndarray, estimates: ChannelEstimate, pilot_book: PilotBook, design: FrameDesign,
              phase: str, genie: Trial | None = None) -> DetectionOutput:
    """Matched-filter detection of the target-cell users in one phase.

    In phase I the own pilot is removed first, ``y - h_hat p(t)``. With a
    ``genie`` trial the output is split into desired signal ``S``,
    self-interference ``I1``, own-cell ``I2`` and other-cell ``I3``
    interference and noise ``N``.
    """
    Hh = np.asarray(estimates.h_hat)
    Hh = Hh[:, None] if Hh.ndim == 1 else Hh
    K = Hh.shape[1]
    nh = np.sum(np.abs(Hh) ** 2, axis=0)
    if np.any(nh <= 0):
        raise ValueError("zero channel estimate")
    sl = phase_slice(design, phase)
    z = Hh.conj().T @ Y[:, sl]
    if phase == "I":
        z = z - nh[:, None] * pilot_book.P[:K, sl]
    soft = z / nh[:, None]
    power = phase_power(design, phase)
    if genie is None:
        return DetectionOutput(phase, soft, power, hard_decide(soft, power))

    truth = genie.S[:K, sl]
    G = Hh.conj().T @ genie.H
    Xs = genie.X[:, sl]
    own = np.arange(K)
    self_c = G[own, own] - nh
    desired = Xs[:K] if phase == "I" else truth
    Gx = G.copy()
    Gx[own, own] = 0.0
    n_own = genie.K
    ledger = Ledger(
        S=nh[:, None] * truth,
        I1=self_c[:, None] * desired,
        I2=Gx[:, :n_own] @ Xs[:n_own],
        I3=Gx[:, n_own:] @ Xs[n_own:],
        N=Hh.conj().T @ genie.N[:, sl],
        cross_power=np.abs(Gx) ** 2 * np.mean(np.abs(Xs) ** 2, axis=1)[None, :],
        K=n_own,
    )
    return DetectionOutput(phase, soft, power, hard_decide(soft, power, truth), ledger)


def trial_inverse_sinr(ledger: Ledger) -> np.ndarray:
    """``1/gamma`` per target user from one trial's ledger."""
    p = ledger.powers()
    return (p["I1"] + p["I2"] + p["I3"] + p["N"]) / p["S"]


@dataclass(frozen=True)
class SinrEstimate:
    """Monte Carlo ``E[1/gamma]`` per target user and phase.

    Entries are NaN for a phase that has no symbols under the design.
    ``cov_I_II`` is the covariance of the two trial means (for rate CIs).
    """

    inv_gamma_I_mean: np.ndarray
    inv_gamma_II_mean: np.ndarray
    inv_gamma_I_se: np.ndarray
    inv_gamma_II_se: np.ndarray
    cov_I_II: np.ndarray
    trials: int
    p_e_I: np.ndarray
    p_e_II: np.ndarray
    powers_I: dict = field(default_factory=dict)
    powers_II: dict = field(default_factory=dict)

    @property
    def gamma_I(self) -> np.ndarray:
        return 1.0 / self.inv_gamma_I_mean

    @property
    def gamma_II(self) -> np.ndarray:
        return 1.0 / self.inv_gamma_II_mean


def _mean_se(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    se = a.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(a.shape[1:], np.nan)
    return a.mean(axis=0), se


def empirical_sinr(scenario: NetworkScenario, design: FrameDesign, trials: int, seed: int = 0,
                   pilot_mode: str = "orthogonal", refine_iterations: int = 0) -> SinrEstimate:
    """Per-trial genie SINR in both phases, averaged as ``E[1/gamma]``.

    ``refine_iterations > 0`` runs data-aided re-estimation before detection.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    K = scenario.K
    active = {ph: (phase_slice(design, ph).stop - phase_slice(design, ph).start) > 0 for ph in PHASES}
    inv = {ph: np.full((trials, K), np.nan) for ph in PHASES}
    errs = {ph: np.zeros(K) for ph in PHASES}
    pw = {ph: {} for ph in PHASES}
    for i, tr in enumerate(iter_trials(scenario, design, trials, seed, pilot_mode)):
        est = ls_estimate(tr.Y[:, : design.tau], tr.target_pilots, tr.h_target)
        if refine_iterations:
            est = refine_estimates(tr, est, max_iter=refine_iterations).estimate
        for ph in PHASES:
            if not active[ph]:
                continue
            out = mf_detect(tr.Y, est, tr.book, design, ph, genie=tr)
            inv[ph][i] = trial_inverse_sinr(out.ledger)
            errs[ph] += out.decisions.errors.mean(axis=1)
            for name, val in out.ledger.powers().items():
                pw[ph][name] = pw[ph].get(name, 0.0) + val / trials
    mI, sI = _mean_se(inv["I"])
    mII, sII = _mean_se(inv["II"])
    if active["I"] and active["II"] and trials > 1:
        cI = inv["I"] - mI
        cII = inv["II"] - mII
        cov = (cI * cII).sum(axis=0) / (trials - 1) / trials
    else:
        cov = np.zeros(K)
    pe = {ph: errs[ph] / trials if active[ph] else np.full(K, np.nan) for ph in PHASES}
    return SinrEstimate(mI, mII, sI, sII, cov, trials, pe["I"], pe["II"], pw["I"], pw["II"])


def data_aided_iterate(Y: np.ndarray, prior: ChannelEstimate, detected_data: np.ndarray,
                       pilot_book: PilotBook, design: FrameDesign,
                       h_true: np.ndarray | None = None) -> ChannelEstimate:
    """Re-estimate after cancelling detected own-cell data on the TS segment.

    ``detected_data`` is ``(K, n_ts)`` at the TS data power; row ``k`` pairs
    with column ``k`` of ``prior.h_hat``.
    """
    Hh = np.asarray(prior.h_hat)
    Hh = Hh[:, None] if Hh.ndim == 1 else Hh
    K = Hh.shape[1]
    D = np.atleast_2d(detected_data)
    if D.shape != (K, design.n_ts):
        raise ValueError(f"detected data must be ({K}, {design.n_ts}), got {D.shape}")
    Yc = np.array(Y[:, : design.tau], dtype=complex)
    Yc[:, design.n_tm: design.tau] -= Hh @ D
    return ls_estimate(Yc, pilot_book.P[:K], h_true)


@dataclass(frozen=True)
class RefineResult:
    estimate: ChannelEstimate
    iterations: int
    history: list
    p_e: list


def refine_estimates(trial: Trial, initial: ChannelEstimate, max_iter: int = 5,
                     rtol: float = 1e-3) -> RefineResult:
    """Detect, cancel and re-estimate until the estimate settles.

    Stops when ``||h_new - h_old||^2 / ||h_old||^2 < rtol`` or after
    ``max_iter`` rounds. The true error is not observable at the receiver,
    so the relative change of the estimate stands in for it.
    """
    design = trial.design
    est = initial
    history, pes = [initial], []
    if design.n_ts == 0:
        return RefineResult(est, 0, history, pes)
    it = 0
    for it in range(1, max_iter + 1):
        out = mf_detect(trial.Y, est, trial.book, design, "I", genie=None)
        truth = trial.S[: trial.K, phase_slice(design, "I")]
        pes.append(float(np.mean(np.abs(out.decisions.symbols - truth) > 1e-9)))
        new = data_aided_iterate(trial.Y, est, out.decisions.symbols, trial.book, design, trial.h_target)
        change = np.sum(np.abs(new.h_hat - est.h_hat) ** 2) / np.sum(np.abs(est.h_hat) ** 2)
        est = new
        history.append(new)
        if change < rtol:
            break
    return RefineResult(est, it, history, pes)


@dataclass(frozen=True)
class ZetaEstimate:
    """Normalized signal/self-interference correlation per target user.

    ``flag`` is set when the self-interference vanishes (pure TM or perfect
    CSI) and the ratio is undefined.
    """

    zeta: np.ndarray
    trials: int
    flag: str | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.zeta))


def correlation_zeta(scenario: NetworkScenario, design: FrameDesign, trials: int, seed: int = 0,
                     perfect_csi: bool = False) -> ZetaEstimate:
    """``|E[S* I1]|^2 / (E|S|^2 E|I1|^2)`` over phase I symbols and trials."""
    K = scenario.K
    if design.n_ts == 0:
        log.warning("no TS segment: self-interference is noise-only, zeta undefined")
        return ZetaEstimate(np.full(K, np.nan), 0, "no TS segment")
    if perfect_csi:
        return ZetaEstimate(np.full(K, np.nan), 0, "perfect CSI: self-interference is zero")
    cross = np.zeros(K, dtype=complex)
    ps = np.zeros(K)
    pi = np.zeros(K)
    for tr in iter_trials(scenario, design, trials, seed):
        est = ls_estimate(tr.Y[:, : design.tau], tr.target_pilots, tr.h_target)
        led = mf_detect(tr.Y, est, tr.book, design, "I", genie=tr).ledger
        cross += np.mean(np.conj(led.S) * led.I1, axis=1)
        ps += np.mean(np.abs(led.S) ** 2, axis=1)
        pi += np.mean(np.abs(led.I1) ** 2, axis=1)
    zeta = np.abs(cross / trials) ** 2 / ((ps / trials) * (pi / trials))
    return ZetaEstimate(zeta, trials)
