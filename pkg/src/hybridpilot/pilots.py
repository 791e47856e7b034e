"""Hybrid pilot book, per-user transmit frames and the received signal.

A frame of length ``T`` starts with a training overhead of ``tau`` symbols:
``n_tm`` pilot-only (TM) symbols followed by ``n_ts`` symbols where the pilot
is superimposed on data (TS). The remaining ``T - tau`` symbols carry data
only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ChannelRealization

__all__ = [
    "FrameDesign",
    "PilotBook",
    "TransmitFrame",
    "qpsk",
    "build_pilot_book",
    "reuse_pilot_book",
    "assemble_frame",
    "assemble_frames",
    "received_matrix",
]


@dataclass(frozen=True)
class FrameDesign:
    """Design triple plus frame length.

    ``alpha`` is the TS share of the overhead, ``lam`` the pilot power
    fraction, ``tau`` the overhead length and ``T`` the frame length.
    ``data_phase_power`` is the per-symbol data power after the overhead;
    ``None`` means ``1 - lam``.
    """

    alpha: float
    lam: float
    tau: int
    T: int
    data_phase_power: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        if self.tau > self.T:
            raise ValueError(f"tau={self.tau} exceeds frame length T={self.T}")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "T", int(self.T))

    @property
    def n_tm(self) -> int:
        # round half up; Python's round() is banker's rounding
        return int(math.floor((1.0 - self.alpha) * self.tau + 0.5))

    @property
    def n_ts(self) -> int:
        return self.tau - self.n_tm

    @property
    def alpha_eff(self) -> float:
        """TS share actually realised after integer rounding."""
        return self.n_ts / self.tau

    @property
    def p_data(self) -> float:
        return 1.0 - self.lam if self.data_phase_power is None else float(self.data_phase_power)

    def check_orthogonal(self, KL: int) -> None:
        if self.tau < KL:
            raise ValueError("insufficient training length for orthogonality "
                             f"(tau={self.tau} < KL={KL})")

    def symbol_power(self) -> np.ndarray:
        """Expected ``|x(t)|^2`` over the frame."""
        pw = np.full(self.T, self.p_data)
        pw[: self.n_tm] = self.lam
        pw[self.n_tm: self.tau] = 1.0
        return pw


@dataclass(frozen=True)
class PilotBook:
    """Pilot rows ``P`` (users x tau), each of per-symbol power ``lam``."""

    P: np.ndarray
    lam: float

    @property
    def tau(self) -> int:
        return self.P.shape[1]

    def row(self, j: int, k: int, K: int) -> np.ndarray:
        return self.P[j * K + k]

    def gram(self) -> np.ndarray:
        return self.P @ self.P.conj().T


@dataclass(frozen=True)
class TransmitFrame:
    """One user's length-``T`` frame: ``x = s + p``."""

    x: np.ndarray
    s: np.ndarray
    p: np.ndarray


def qpsk(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    """Gray-free QPSK symbols ``sqrt(power/2) * (+-1 +- 1j)``."""
    bits = rng.integers(0, 2, size=(2,) + tuple(np.atleast_1d(shape)))
    return math.sqrt(power / 2.0) * ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1))


def build_pilot_book(KL: int, tau: int, lam: float) -> PilotBook:
    """First ``KL`` rows of the ``tau``-point DFT basis, scaled by ``sqrt(lam)``.

    Every symbol has modulus ``sqrt(lam)`` and ``P P^H = tau * lam * I``.
    """
    if tau < KL:
        raise ValueError("insufficient training length for orthogonality "
                         f"(tau={tau} < KL={KL})")
    if not lam > 0:
        raise ValueError("pilot power must be positive")
    n = np.arange(KL)[:, None]
    t = np.arange(tau)[None, :]
    # exact integer phase index keeps orthogonality at machine precision
    P = math.sqrt(lam) * np.exp(-2j * np.pi * ((n * t) % tau) / tau)
    P.setflags(write=False)
    return PilotBook(P, float(lam))


def reuse_pilot_book(book: PilotBook, L: int) -> PilotBook:
    """Tile a ``K``-row book over ``L`` cells (pilot reuse, contaminated)."""
    P = np.tile(book.P, (L, 1))
    P.setflags(write=False)
    return PilotBook(P, book.lam)


def _segment_gain(design: FrameDesign) -> np.ndarray:
    amp = np.zeros(design.T)
    amp[design.n_tm: design.tau] = math.sqrt(1.0 - design.lam)
    amp[design.tau:] = math.sqrt(design.p_data)
    return amp


def assemble_frame(pilot_row: np.ndarray, data_symbols: np.ndarray | None,
                   design: FrameDesign, rng: np.random.Generator | None = None) -> TransmitFrame:
    """Build one user's frame from unit-power data symbols.

    ``data_symbols`` has length ``T`` (unit power); it is zeroed on the TM
    segment and scaled to the segment power elsewhere. If ``None``, fresh
    QPSK symbols are drawn from ``rng``.
    """
    pilot_row = np.asarray(pilot_row)
    if pilot_row.shape != (design.tau,):
        raise ValueError(f"pilot row must have length tau={design.tau}")
    if data_symbols is None:
        if rng is None:
            raise ValueError("need data_symbols or rng")
        data_symbols = qpsk(rng, design.T)
    data_symbols = np.asarray(data_symbols)
    if data_symbols.shape != (design.T,):
        raise ValueError(f"data must have length T={design.T}")
    s = data_symbols * _segment_gain(design)
    p = np.zeros(design.T, dtype=complex)
    p[: design.tau] = pilot_row
    return TransmitFrame(x=s + p, s=s, p=p)


def assemble_frames(book: PilotBook, data: np.ndarray, design: FrameDesign) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`assemble_frame` over all users (optionally batched).

    ``data`` has shape ``(..., users, T)`` of unit-power symbols. Returns
    ``(X, S)`` of the same shape.
    """
    S = data * _segment_gain(design)
    X = S.copy()
    X[..., : design.tau] += book.P
    return X, S


def received_matrix(channel: ChannelRealization | np.ndarray, frames, sigma_n2: float,
                    rng: np.random.Generator | None = None, noise: np.ndarray | None = None) -> np.ndarray:
    """``Y = H X + N`` with ``N`` i.i.d. ``CN(0, sigma_n2)``.

    ``frames`` is either a list of :class:`TransmitFrame` (one per column of
    ``H``) or the stacked ``X`` matrix. Pass ``noise`` to reuse a draw.
    """
    H = channel.H if isinstance(channel, ChannelRealization) else np.asarray(channel)
    if isinstance(frames, (list, tuple)):
        X = np.vstack([f.x for f in frames])
    else:
        X = np.asarray(frames)
    if X.shape[-2] != H.shape[-1]:
        raise ValueError(f"{X.shape[-2]} frames for {H.shape[-1]} channel columns")
    if noise is None:
        if rng is None:
            raise ValueError("need rng or an explicit noise matrix")
        shape = H.shape[:-1] + X.shape[-1:]
        noise = math.sqrt(sigma_n2 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return H @ X + noise
