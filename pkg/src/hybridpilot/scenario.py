"""Network geometry, large-scale fading and small-scale channel draws.

Cell 0 is the target cell throughout (index 1 in the usual notation). All
large-scale coefficients are gains *toward the target base station*:
``beta[j, k]`` is the power gain from user ``k`` of cell ``j`` to BS 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "R_MIN",
    "NetworkScenario",
    "ChannelRealization",
    "hex_centers",
    "in_hexagon",
    "place_users",
    "large_scale_fading",
    "sample_channel",
    "make_scenario",
    "load_config",
    "dump_config",
    "trial_rng",
    "snr_to_noise",
]

R_MIN = 0.1
"""Exclusion radius around every BS, in units of the cell radius."""

_SQRT3 = math.sqrt(3.0)


def snr_to_noise(snr_db: float) -> float:
    """Noise variance for unit transmit power and unit in-cell gain."""
    return 10.0 ** (-snr_db / 10.0)


def trial_rng(seed: int, *indices: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *indices)``.

    Philox keyed through a SeedSequence with ``spawn_key=indices``; any
    trial can be regenerated independently of execution order.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def hex_centers(L: int) -> np.ndarray:
    """BS positions of the supported ``L``-cell clusters (flat-top hexagons).

    Adjacent centers are ``sqrt(3)`` apart for a center-to-vertex radius 1.
    """
    if L not in (1, 3, 7):
        raise ValueError(f"unsupported cell count L={L}; choose 1, 3 or 7")
    angles = np.deg2rad(30.0 + 60.0 * np.arange(6))
    ring = _SQRT3 * np.column_stack([np.cos(angles), np.sin(angles)])
    centers = np.vstack([np.zeros((1, 2)), ring])
    # L=3: target plus two mutually adjacent neighbours
    return centers[:L].copy()


def in_hexagon(points: np.ndarray, center: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Boolean mask: which ``points`` lie inside the flat-top hexagon."""
    d = np.abs(np.asarray(points, dtype=float) - np.asarray(center, dtype=float))
    x, y = d[..., 0], d[..., 1]
    tol = 1e-12
    return (y <= _SQRT3 / 2 * radius + tol) & (_SQRT3 * x + y <= _SQRT3 * radius + tol)


def place_users(L: int, K: int, rng: np.random.Generator, r_min: float = R_MIN) -> np.ndarray:
    """Drop ``K`` users uniformly in each of ``L`` unit hexagons.

    Returns an ``(L, K, 2)`` array of planar positions. Rejection sampling
    from the bounding box; points closer than ``r_min`` to their own BS are
    rejected as well.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    centers = hex_centers(L)
    out = np.empty((L, K, 2))
    for j, c in enumerate(centers):
        got = 0
        while got < K:
            n = 2 * (K - got) + 8
            cand = rng.uniform([-1.0, -_SQRT3 / 2], [1.0, _SQRT3 / 2], size=(n, 2))
            ok = in_hexagon(cand, (0.0, 0.0)) & (np.hypot(cand[:, 0], cand[:, 1]) >= r_min)
            cand = cand[ok][: K - got]
            out[j, got:got + len(cand)] = cand + c
            got += len(cand)
    return out


def large_scale_fading(positions: np.ndarray, gamma: float, beta_ref: float = 1.0) -> np.ndarray:
    """Distance-ratio path loss toward the target BS.

    ``beta[j, k] = beta_ref * (d_own / d_target) ** gamma`` where ``d_own`` is
    the distance of user (j, k) to its serving BS and ``d_target`` its
    distance to BS 0. In-cell users get ``beta_ref`` exactly.
    """
    positions = np.asarray(positions, dtype=float)
    L = positions.shape[0]
    centers = hex_centers(L)
    d_own = np.linalg.norm(positions - centers[:, None, :], axis=-1)
    d_tgt = np.linalg.norm(positions - centers[0], axis=-1)
    if np.any(d_own <= 0) or np.any(d_tgt <= 0):
        raise ValueError("user located at a base station")
    beta = beta_ref * (d_own / d_tgt) ** gamma
    beta[0, :] = beta_ref
    return beta


# ---------------------------------------------------------------------------
# scenario / channel containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkScenario:
    """Static description of the multi-cell uplink seen by BS 0."""

    L: int
    K: int
    M: int
    T: int
    gamma: float
    sigma_n2: float
    beta: np.ndarray = field(repr=False)
    seed: int = 0
    layout: str = "hex"

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.shape != (self.L, self.K):
            raise ValueError(f"beta must have shape ({self.L}, {self.K}), got {beta.shape}")
        if min(self.L, self.K, self.M) < 1:
            raise ValueError("L, K and M must all be >= 1")
        if self.T < self.K * self.L:
            raise ValueError("frame length T must be at least K*L")
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")
        if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
            raise ValueError("large-scale coefficients must be positive and finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def KL(self) -> int:
        return self.K * self.L

    @property
    def snr_db(self) -> float:
        return -10.0 * math.log10(self.sigma_n2)

    def with_(self, **changes) -> "NetworkScenario":
        """Copy with some fields replaced (e.g. ``M`` or ``T``)."""
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrix ``H`` of shape ``(M, L*K)``; column ``j*K + k`` is user (j, k)."""

    H: np.ndarray

    def column(self, j: int, k: int, K: int) -> np.ndarray:
        return self.H[:, j * K + k]


def sample_channel(scenario: NetworkScenario, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``h_{j,k} = sqrt(beta_{j,k}) g_{j,k}`` with ``g ~ CN(0, I_M)``."""
    shape = (scenario.M, scenario.KL)
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    H = g * np.sqrt(scenario.beta.reshape(-1))[None, :]
    H.setflags(write=False)
    return ChannelRealization(H)


def make_scenario(
    L: int = 7,
    K: int = 10,
    M: int = 256,
    T: int | None = None,
    gamma: float = 3.8,
    snr_db: float = 20.0,
    seed: int = 0,
    layout: str = "hex",
    beta_ref: float = 1.0,
) -> NetworkScenario:
    """Build a scenario; ``layout='hex'`` drops users with ``seed``.

    ``layout='unit'`` sets every coefficient to ``beta_ref`` (co-located
    worst case, handy for closed-form checks).
    """
    if T is None:
        T = 5 * K * L
    if layout == "hex":
        pos = place_users(L, K, trial_rng(seed, 0xD20F))
        beta = large_scale_fading(pos, gamma, beta_ref)
    elif layout == "unit":
        beta = np.full((L, K), float(beta_ref))
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return NetworkScenario(L=L, K=K, M=M, T=T, gamma=gamma, sigma_n2=snr_to_noise(snr_db),
                           beta=beta, seed=seed, layout=layout)


# ---------------------------------------------------------------------------
# plain-text key = value config
# ---------------------------------------------------------------------------

_INT_KEYS = {"L", "K", "M", "T", "seed"}
_FLOAT_KEYS = {"gamma", "snr_db", "beta_ref"}
_STR_KEYS = {"layout"}


def _parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def load_config(source: str | Path) -> tuple[NetworkScenario, dict]:
    """Read a key-value config; returns the scenario and any extra keys.

    ``source`` may be a path or the config text itself.
    """
    p = Path(source) if not isinstance(source, Path) and "\n" not in str(source) else source
    if isinstance(p, Path) and p.exists():
        text = p.read_text(encoding="utf-8")
    else:
        text = str(source)
    kv = _parse_kv(text)
    kwargs, extra = {}, {}
    for key, value in kv.items():
        if key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _STR_KEYS:
            kwargs[key] = value
        else:
            extra[key] = value
    return make_scenario(**kwargs), extra


def dump_config(scenario: NetworkScenario) -> str:
    """Serialize the fields that regenerate ``scenario``."""
    lines = [
        f"L = {scenario.L}",
        f"K = {scenario.K}",
        f"M = {scenario.M}",
        f"T = {scenario.T}",
        f"gamma = {scenario.gamma!r}",
        f"snr_db = {scenario.snr_db!r}",
        f"seed = {scenario.seed}",
        f"layout = {scenario.layout}",
        # in-cell gains equal beta_ref in both layouts
        f"beta_ref = {float(scenario.beta[0, 0])!r}",
    ]
    return "\n".join(lines) + "\n"
