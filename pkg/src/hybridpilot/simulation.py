"""One Monte Carlo trial of the uplink frame, with ground truth kept."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pilots import FrameDesign, PilotBook, assemble_frames, build_pilot_book, qpsk, reuse_pilot_book
from .scenario import NetworkScenario, sample_channel, trial_rng

__all__ = ["Trial", "pilot_book_for", "draw_trial", "iter_trials"]


@dataclass(frozen=True)
class Trial:
    """Everything the genie knows about one frame.

    ``H`` is ``(M, KL)``; ``X``, ``S`` are ``(KL, T)``; ``N``, ``Y`` are
    ``(M, T)``. Target-cell users are columns/rows ``0..K-1``.
    """

    H: np.ndarray
    X: np.ndarray
    S: np.ndarray
    N: np.ndarray
    Y: np.ndarray
    book: PilotBook
    design: FrameDesign
    K: int
    L: int

    @property
    def target_pilots(self) -> np.ndarray:
        return self.book.P[: self.K]

    @property
    def h_target(self) -> np.ndarray:
        return self.H[:, : self.K]


def pilot_book_for(scenario: NetworkScenario, design: FrameDesign, pilot_mode: str = "orthogonal") -> PilotBook:
    """Orthogonal book over all ``KL`` users, or ``K`` pilots reused per cell."""
    if pilot_mode == "orthogonal":
        design.check_orthogonal(scenario.KL)
        return build_pilot_book(scenario.KL, design.tau, design.lam)
    if pilot_mode == "reuse":
        return reuse_pilot_book(build_pilot_book(scenario.K, design.tau, design.lam), scenario.L)
    raise ValueError(f"unknown pilot mode {pilot_mode!r}")


def draw_trial(scenario: NetworkScenario, design: FrameDesign, book: PilotBook,
               rng: np.random.Generator) -> Trial:
    """Channel, then data, then noise, all from ``rng`` in that order."""
    H = sample_channel(scenario, rng).H
    data = qpsk(rng, (scenario.KL, design.T))
    X, S = assemble_frames(book, data, design)
    shape = (scenario.M, design.T)
    N = np.sqrt(scenario.sigma_n2 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    Y = H @ X + N
    return Trial(H=H, X=X, S=S, N=N, Y=Y, book=book, design=design, K=scenario.K, L=scenario.L)


def iter_trials(scenario: NetworkScenario, design: FrameDesign, trials: int, seed: int = 0,
                pilot_mode: str = "orthogonal", stream: int = 0):
    """Yield ``trials`` independent trials from substreams ``(seed, stream, i)``."""
    book = pilot_book_for(scenario, design, pilot_mode)
    for i in range(trials):
        yield draw_trial(scenario, design, book, trial_rng(seed, stream, i))
