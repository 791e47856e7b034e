"""Closed-form SINR and rate approximations and the Jensen-bound rate
assembled from Monte Carlo SINR.

For user ``k`` of the target cell the approximate rate is

    R = (alpha tau / T) log2(1 + X / A) + (1 - tau / T) log2(1 + X / B)

with ``X = (1 - lam) beta_k^2`` and

    A = (1 - lam) alpha c1 / (lam tau) + (c2 + beta_k sigma^2) / M
    B = (1 - lam)^2 alpha c1 / (lam tau) + ((1 - lam) c2 + beta_k sigma^2) / M.

``(c1, c2)`` are the plain-MF constants ``(b1, b2)`` unless per-user
symbol-error probabilities are supplied, in which case the data-aided
constants are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .estimator import mse_theoretical
from .pilots import FrameDesign
from .scenario import NetworkScenario

__all__ = [
    "RateInputs",
    "UserRate",
    "RateReport",
    "EmpiricalRate",
    "mf_constants",
    "data_aided_constants",
    "sinr_approx",
    "rate_approx",
    "asymptotic_rate",
    "empirical_rate",
    "min_rate",
]

LN2 = math.log(2.0)


def mf_constants(beta: np.ndarray, k: int) -> tuple[float, float]:
    """``(b1, b2)`` for user ``k``: total squared gain and cross products."""
    beta = np.asarray(beta, dtype=float)
    bk = beta[0, k]
    b1 = float(np.sum(beta ** 2))
    b2 = float(bk * beta[1:].sum() + bk * (beta[0].sum() - bk))
    return b1, b2


def data_aided_constants(beta: np.ndarray, k: int, p_e) -> tuple[float, float]:
    """``(c1, c2)`` for user ``k`` after data-aided refinement.

    Own-cell terms are weighted by ``4 p_e`` of the interfering user;
    ``p_e`` is a scalar or a length-``K`` vector.
    """
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[1]
    pe = np.broadcast_to(np.asarray(p_e, dtype=float), (K,))
    bk = beta[0, k]
    c1 = float(np.sum(4 * pe * beta[0] ** 2) + np.sum(beta[1:] ** 2))
    others = np.arange(K) != k
    c2 = float(bk * beta[1:].sum() + np.sum(4 * pe[others] * bk * beta[0, others]))
    return c1, c2


@dataclass(frozen=True)
class UserRate:
    """Closed-form rate of one user as a smooth function of ``(alpha, lam, tau)``.

    All methods accept scalars or broadcastable arrays. Derivatives are the
    exact analytic ones of the rate expression above.
    """

    c1: float
    c2: float
    beta_k: float
    sigma_n2: float
    M: float
    T: float

    # -- building blocks ------------------------------------------------
    def _parts(self, alpha, lam, tau):
        u = alpha / tau
        X = (1.0 - lam) * self.beta_k ** 2
        a1 = (1.0 - lam) * self.c1 / lam
        b1 = (1.0 - lam) ** 2 * self.c1 / lam
        a0 = (self.c2 + self.beta_k * self.sigma_n2) / self.M
        b0 = ((1.0 - lam) * self.c2 + self.beta_k * self.sigma_n2) / self.M
        return u, X, a1, a0, b1, b0

    @staticmethod
    def _F(X, D):
        return np.log1p(X / D) / LN2

    @staticmethod
    def _F1(X, D):
        # dF/dD
        return -X / (D * (D + X) * LN2)

    @staticmethod
    def _F2(X, D):
        return X * (2 * D + X) / (D ** 2 * (D + X) ** 2 * LN2)

    # -- values ---------------------------------------------------------
    def sinr(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        return X / (a1 * u + a0), X / (b1 * u + b0)

    def value(self, alpha, lam, tau):
        gI, gII = self.sinr(alpha, lam, tau)
        return alpha * tau / self.T * np.log1p(gI) / LN2 + (1 - tau / self.T) * np.log1p(gII) / LN2

    __call__ = value

    # -- first derivatives -----------------------------------------------
    def d_alpha(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        T = self.T
        return (tau / T * self._F(X, A) + alpha / T * a1 * self._F1(X, A)
                + (1 - tau / T) / tau * b1 * self._F1(X, B))

    def d_tau(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        T = self.T
        return (alpha / T * self._F(X, A) - alpha ** 2 * a1 / (T * tau) * self._F1(X, A)
                - self._F(X, B) / T - (1 - tau / T) * alpha * b1 / tau ** 2 * self._F1(X, B))

    def d_lam(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        dX = -self.beta_k ** 2
        dA = -self.c1 * u / lam ** 2
        dB = -self.c1 * (1 - lam ** 2) * u / lam ** 2 - self.c2 / self.M

        def dF(D, dD):
            return (dX * D - X * dD) / (D * (D + X) * LN2)

        return alpha * tau / self.T * dF(A, dA) + (1 - tau / self.T) * dF(B, dB)

    # -- second derivatives ----------------------------------------------
    def d2_alpha(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        T = self.T
        return (2 * a1 / T * self._F1(X, A) + alpha * a1 ** 2 / (T * tau) * self._F2(X, A)
                + (1 - tau / T) / tau ** 2 * b1 ** 2 * self._F2(X, B))

    def d2_tau(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        T = self.T
        return (alpha ** 3 * a1 ** 2 / (T * tau ** 3) * self._F2(X, A)
                + 2 * alpha * b1 / tau ** 3 * self._F1(X, B)
                + alpha ** 2 * b1 ** 2 * (1 - tau / T) / tau ** 4 * self._F2(X, B))

    def d2_alpha_tau(self, alpha, lam, tau):
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A, B = a1 * u + a0, b1 * u + b0
        T = self.T
        return (self._F(X, A) / T - alpha * a1 / (T * tau) * self._F1(X, A)
                - alpha ** 2 * a1 ** 2 / (T * tau ** 2) * self._F2(X, A)
                - b1 / tau ** 2 * self._F1(X, B)
                - alpha * b1 ** 2 * (1 / tau - 1 / T) / tau ** 2 * self._F2(X, B))

    # -- printed high-SINR forms (kept for comparison) --------------------
    def g(self, lam, tau):
        return lam * tau * (self.c2 + self.beta_k * self.sigma_n2) / (self.M * (1 - lam) * self.c1)

    def f(self):
        return (self.c2 + self.beta_k * self.sigma_n2) / (self.M * self.c1)

    def h(self, alpha, lam):
        return lam * self.f() / ((1 - lam) * alpha)

    def d_alpha_printed(self, alpha, lam, tau):
        """Simplified alpha-derivative that treats both phases' SINR as large."""
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        T = self.T
        return (-(1 - tau / T + alpha * tau / T) / (LN2 * (alpha + self.g(lam, tau)))
                + tau / T * self._F(X, a1 * u + a0))

    def d2_alpha_printed(self, alpha, lam, tau):
        g = self.g(lam, tau)
        T = self.T
        return (1 / (LN2 * (alpha + g))) * (-2 * tau / T + (1 - tau / T + alpha * tau / T) / (alpha + g))

    def d_tau_printed(self, alpha, lam, tau):
        """Simplified tau-derivative in its printed high-SINR form."""
        u, X, a1, a0, b1, b0 = self._parts(alpha, lam, tau)
        A = a1 * u + a0
        T = self.T
        return (alpha / T * self._F(X, A) - self._F(self.beta_k ** 2, A) / T
                + (1 / tau - (1 - alpha) / T) / LN2 * (a1 * u) / A)


@dataclass(frozen=True)
class RateInputs:
    """Everything the closed-form rate needs.

    ``tau`` may be fractional here (continuous relaxation); ``p_e`` is
    ``None`` for the plain MF constants or a scalar / per-user vector for
    the data-aided constants.
    """

    alpha: float
    lam: float
    tau: float
    T: float
    M: float
    beta: np.ndarray
    sigma_n2: float
    p_e: object = None

    @classmethod
    def from_design(cls, design: FrameDesign, scenario: NetworkScenario, p_e=None, M=None) -> "RateInputs":
        return cls(design.alpha, design.lam, design.tau, design.T,
                   scenario.M if M is None else M, scenario.beta, scenario.sigma_n2, p_e)

    @classmethod
    def from_scenario(cls, scenario: NetworkScenario, alpha: float, lam: float, tau: float,
                      T: float | None = None, p_e=None) -> "RateInputs":
        return cls(alpha, lam, tau, scenario.T if T is None else T, scenario.M, scenario.beta,
                   scenario.sigma_n2, p_e)

    def with_(self, **changes) -> "RateInputs":
        return replace(self, **changes)

    @property
    def K(self) -> int:
        return np.asarray(self.beta).shape[1]

    def b_constants(self, k: int) -> tuple[float, float]:
        return mf_constants(self.beta, k)

    def c_constants(self, k: int) -> tuple[float, float]:
        if self.p_e is None:
            raise ValueError("data-aided constants need p_e")
        return data_aided_constants(self.beta, k, self.p_e)

    def constants(self, k: int) -> tuple[float, float]:
        return self.b_constants(k) if self.p_e is None else self.c_constants(k)

    def objective(self, k: int) -> UserRate:
        c1, c2 = self.constants(k)
        return UserRate(c1, c2, float(np.asarray(self.beta)[0, k]), self.sigma_n2, self.M, self.T)


def _check_lam(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise ValueError(f"power ratio must lie strictly inside (0, 1), got {lam}")


def sinr_approx(inputs: RateInputs, k: int) -> tuple[float, float]:
    """Approximate SINR in the TS segment and in the data phase."""
    _check_lam(inputs.lam)
    if inputs.tau <= 0:
        raise ValueError("training length must be positive")
    gI, gII = inputs.objective(k).sinr(inputs.alpha, inputs.lam, inputs.tau)
    return float(gI), float(gII)


def rate_approx(inputs: RateInputs, k: int) -> float:
    """Closed-form rate of user ``k`` in bit/s/Hz."""
    _check_lam(inputs.lam)
    return float(inputs.objective(k).value(inputs.alpha, inputs.lam, inputs.tau))


def min_rate(inputs: RateInputs) -> float:
    """Worst-user closed-form rate."""
    return min(rate_approx(inputs, k) for k in range(inputs.K))


def asymptotic_rate(inputs: RateInputs, k: int) -> float:
    """Limit of the closed-form rate as ``M`` grows (noise and /M terms vanish).

    Returns ``inf`` for ``alpha = 0``: without TS data there is no
    self-interference floor and the rate grows without bound in ``M``.
    """
    _check_lam(inputs.lam)
    a, lam, tau, T = inputs.alpha, inputs.lam, inputs.tau, inputs.T
    if a == 0:
        return math.inf
    c1, _ = inputs.constants(k)
    bk = float(np.asarray(inputs.beta)[0, k])
    gI = bk ** 2 * lam * tau / (a * c1)
    gII = bk ** 2 * lam * tau / (a * (1 - lam) * c1)
    return a * tau / T * math.log2(1 + gI) + (1 - tau / T) * math.log2(1 + gII)


@dataclass(frozen=True)
class EmpiricalRate:
    """Jensen-bound rate with a normal-approximation confidence interval."""

    rate: np.ndarray
    se: np.ndarray
    z: float = 1.96

    @property
    def lower(self) -> np.ndarray:
        return self.rate - self.z * self.se

    @property
    def upper(self) -> np.ndarray:
        return self.rate + self.z * self.se


def empirical_rate(sinr_estimate, design: FrameDesign, z: float = 1.96) -> EmpiricalRate:
    """``(alpha tau/T) log2(1 + 1/E[1/g_I]) + (1 - tau/T) log2(1 + 1/E[1/g_II])``.

    Uses the realised TS share ``n_ts / tau``. The standard error follows
    from the delta method on both phase means and their covariance.
    """
    wI = design.n_ts / design.T
    wII = 1.0 - design.tau / design.T
    xI = np.asarray(sinr_estimate.inv_gamma_I_mean, dtype=float)
    xII = np.asarray(sinr_estimate.inv_gamma_II_mean, dtype=float)
    K = max(xI.size, xII.size)
    rate = np.zeros(K)
    var = np.zeros(K)
    dI = dII = 0.0
    if wI > 0:
        rate += wI * np.log2(1 + 1 / xI)
        # d/dx log2(1 + 1/x) = -1 / (x (1 + x) ln2)
        dI = -wI / (xI * (1 + xI) * LN2)
        var += dI ** 2 * np.asarray(sinr_estimate.inv_gamma_I_se) ** 2
    if wII > 0:
        rate += wII * np.log2(1 + 1 / xII)
        dII = -wII / (xII * (1 + xII) * LN2)
        var += dII ** 2 * np.asarray(sinr_estimate.inv_gamma_II_se) ** 2
    if wI > 0 and wII > 0:
        var += 2 * dI * dII * np.asarray(sinr_estimate.cov_I_II)
    return EmpiricalRate(rate, np.sqrt(np.maximum(var, 0.0)), z)


@dataclass(frozen=True)
class RateReport:
    """Per-user closed-form and empirical figures from one evaluation."""

    design: FrameDesign
    gamma_I_app: np.ndarray
    gamma_II_app: np.ndarray
    rate_closed: np.ndarray
    rate_asymptotic: np.ndarray
    mse_closed: np.ndarray
    rate_empirical: EmpiricalRate | None = None
    mse_empirical: np.ndarray | None = None
    p_e: np.ndarray | None = None
    zeta: np.ndarray | None = None

    @property
    def min_rate_closed(self) -> float:
        return float(np.min(self.rate_closed))

    @property
    def min_rate_empirical(self) -> float | None:
        return None if self.rate_empirical is None else float(np.min(self.rate_empirical.rate))

    @classmethod
    def closed_form(cls, design: FrameDesign, scenario: NetworkScenario, p_e=None) -> "RateReport":
        inp = RateInputs.from_design(design, scenario, p_e)
        K = scenario.K
        g = np.array([sinr_approx(inp, k) for k in range(K)])
        return cls(
            design=design,
            gamma_I_app=g[:, 0],
            gamma_II_app=g[:, 1],
            rate_closed=np.array([rate_approx(inp, k) for k in range(K)]),
            rate_asymptotic=np.array([asymptotic_rate(inp, k) for k in range(K)]),
            mse_closed=np.array([mse_theoretical(design, scenario, k) for k in range(K)]),
            p_e=None if p_e is None else np.broadcast_to(np.asarray(p_e, float), (K,)).copy(),
        )
