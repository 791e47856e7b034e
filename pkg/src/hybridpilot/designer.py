"""Choice of the design triple (alpha, lam, tau).

Per-user tools work on a :class:`~hybridpilot.rates.UserRate`: convexity
classification and derivative bisection in ``alpha``, the closed-form
power ratio, the threshold rule and derivative bisection in ``tau``. The
max-min problem over all target-cell users is handled by
:func:`solve_p1`, a multi-start coordinate ascent that only accepts
non-decreasing steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .rates import LN2, RateInputs, UserRate
from .scenario import NetworkScenario

__all__ = [
    "LAM_BOUNDS",
    "DesignConstants",
    "OptimizerResult",
    "AlphaCase",
    "LambdaResult",
    "TauCase",
    "P1Result",
    "classify_alpha",
    "optimize_alpha",
    "lambda_opt",
    "lambda_polynomial",
    "tau_thresholds",
    "classify_tau",
    "tau_threshold_root",
    "optimize_tau",
    "WorstUser",
    "solve_p1",
    "tm_only_design",
    "ts_only_design",
]

log = logging.getLogger(__name__)

LAM_BOUNDS = (0.01, 0.99)
"""Search interval for the power ratio; the rate degenerates at 0 and 1."""


@dataclass(frozen=True)
class DesignConstants:
    """Per-user shape constants ``g`` (alpha), ``f`` (lam) and ``h`` (tau)."""

    g: float
    f: float
    h: float

    @classmethod
    def of(cls, obj: UserRate, alpha: float, lam: float, tau: float) -> "DesignConstants":
        h = obj.h(alpha, lam) if alpha > 0 else math.inf
        return cls(float(obj.g(lam, tau)), float(obj.f()), float(h))


@dataclass(frozen=True)
class OptimizerResult:
    """Maximiser of a one-dimensional rate profile.

    ``residual`` is the derivative at ``x`` (0 when the optimum is an
    endpoint reached by comparison); ``endpoint`` marks boundary optima.
    """

    x: float
    value: float
    case: str
    iterations: int
    residual: float
    endpoint: bool = False
    info: dict = field(default_factory=dict)


def _bisect_decreasing(fun, a: float, b: float, eps: float, max_iter: int) -> tuple[float, int, float]:
    """Root of a decreasing function with ``fun(a) >= 0 >= fun(b)``."""
    for it in range(1, max_iter + 1):
        m = 0.5 * (a + b)
        d = fun(m)
        if abs(d) < eps:
            return m, it, d
        if d > 0:
            a = m
        else:
            b = m
    m = 0.5 * (a + b)
    d = fun(m)
    if abs(d) >= eps and b - a > 1e-12 * max(1.0, abs(m)):
        raise RuntimeError("bisection did not converge")
    return m, max_iter, d


# ---------------------------------------------------------------------------
# alpha
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaCase:
    """``case`` 1 (convex), 2 (concave) or 3 (convex then concave)."""

    case: int
    inflection: float | None = None

    @property
    def label(self) -> str:
        return {1: "convex", 2: "concave", 3: "mixed"}[self.case]


def classify_alpha(tau: float, T: float, g: float) -> AlphaCase:
    """Curvature class of the rate in ``alpha`` from ``tau/T`` and ``g``."""
    r = tau / T
    if r < 1.0 / (2.0 + 2.0 * g):
        return AlphaCase(1)
    if r > 1.0 / (1.0 + 2.0 * g):
        return AlphaCase(2)
    return AlphaCase(3, T / tau - 1.0 - 2.0 * g)


def optimize_alpha(obj: UserRate, lam: float, tau: float, eps: float = 1e-6,
                   max_iter: int = 100) -> OptimizerResult:
    """Maximise the rate over ``alpha`` in [0, 1] by derivative bisection.

    The case label comes from :func:`classify_alpha`, whose thresholds assume
    high SINR in both phases. The search itself follows the exact curvature
    at the two ends: convex profiles take the better endpoint, concave ones
    are bisected on [0, 1], and mixed profiles are bisected on their concave
    side of the exact inflection. The result is always compared with both
    endpoints (ties go to the smaller ``alpha``).
    """
    T = obj.T
    cls = classify_alpha(tau, T, float(obj.g(lam, tau)))
    label = f"alpha-{cls.case}"
    info = {"class": cls.label, "inflection_estimate": cls.inflection, "inflection": None}

    def d1(a):
        return float(obj.d_alpha(a, lam, tau))

    def d2(a):
        return float(obj.d2_alpha(a, lam, tau))

    c0, c1 = d2(0.0), d2(1.0)
    x, it, res, endpoint = 0.0, 0, 0.0, True
    if c0 > 0 and c1 > 0:
        info["shape"] = "convex"
    else:
        if c0 <= 0 and c1 <= 0:
            info["shape"] = "concave"
            a, b = 0.0, 1.0
        else:
            infl = brentq(d2, 0.0, 1.0, xtol=1e-12)
            info["inflection"] = infl
            if c0 > 0:
                info["shape"] = "convex-concave"
                a, b = infl, 1.0
            else:
                info["shape"] = "concave-convex"
                a, b = 0.0, infl
        if d1(a) < 0:
            x = a
        elif d1(b) > 0:
            x = b
        else:
            x, it, res = _bisect_decreasing(d1, a, b, eps, max_iter)
            endpoint = False
    v = float(obj(x, lam, tau))
    for e in (0.0, 1.0):
        r = float(obj(e, lam, tau))
        if r > v or (r == v and e < x):
            x, v, res, endpoint = e, r, 0.0, True
    return OptimizerResult(x, v, label, it, res, endpoint, info)


# ---------------------------------------------------------------------------
# lambda
# ---------------------------------------------------------------------------

def lambda_polynomial(lam: float, alpha: float, tau: float, T: float, f: float) -> float:
    """Stationarity quadratic of the power ratio evaluated at ``lam``."""
    return ((alpha * tau - tau ** 2 * f) * lam ** 2 - (T - tau + 2 * alpha * tau) * lam
            + (T - tau + alpha * tau))


@dataclass(frozen=True)
class LambdaResult:
    lam: float
    raw: float
    residual: float
    degenerate: bool = False
    clamped: bool = False


def lambda_opt(alpha: float, tau: float, T: float, f: float,
               bounds: tuple[float, float] = (0.0, 1.0)) -> LambdaResult:
    """Closed-form large-``M`` optimal power ratio.

    Returns the root of the stationarity quadratic in (0, 1), written as
    ``2c / (b + sqrt(b^2 - 4ac))`` which is the usual minus-branch root but
    stays finite when the leading coefficient vanishes (then the equation is
    linear and the result is flagged ``degenerate``).
    """
    qa = alpha * tau - tau ** 2 * f
    qb = T - tau + 2 * alpha * tau
    qc = T - tau + alpha * tau
    if qc <= 0:
        raise ValueError("frame carries no data symbols (alpha = 0 and tau = T)")
    disc = (T - tau) ** 2 + 4 * tau ** 2 * f * ((T - tau) + alpha * tau)
    degenerate = abs(qa) <= 1e-14 * max(abs(alpha * tau), abs(tau ** 2 * f), 1e-300)
    denom = qb + math.sqrt(disc)
    raw = 2 * qc / denom if denom > 0 else math.nan
    residual = lambda_polynomial(raw, alpha, tau, T, f)
    lo, hi = bounds
    lam = min(max(raw, lo), hi) if math.isfinite(raw) else hi
    clamped = lam != raw
    if lo == 0.0 and hi == 1.0:
        lam = min(max(lam, math.ulp(1.0)), 1.0 - math.ulp(1.0))
    return LambdaResult(lam, raw, residual, degenerate, clamped)


# ---------------------------------------------------------------------------
# tau
# ---------------------------------------------------------------------------

def tau_thresholds(lam: float, f: float, KL: int, T: float) -> tuple[float, float]:
    """Power-ratio thresholds of the training-length rule.

    ``h`` is evaluated at ``alpha = 1`` where the tau-derivative is largest.
    The first threshold uses ``KL h``, the second ``T h``.
    """
    h = lam * f / (1.0 - lam)
    thr1 = 1.0 - 2.0 ** (-T / ((1.0 + KL * h) * KL * LN2))
    thr2 = 1.0 - 2.0 ** (-T / ((1.0 + T * h) * KL * LN2))
    return thr1, thr2


@dataclass(frozen=True)
class TauCase:
    """``case`` 1 (tau* = KL), 2 (tau* in (KL, T]) or 0 (between thresholds)."""

    case: int
    thresholds: tuple[float, float]
    tau_at_T: bool = False


def classify_tau(alpha: float, lam: float, f: float, KL: int, T: float) -> TauCase:
    thr = tau_thresholds(lam, f, KL, T)
    if lam > thr[0]:
        return TauCase(1, thr)
    if lam < thr[1]:
        return TauCase(2, thr, tau_at_T=alpha == 1)
    log.info("lam=%.6g lies between the tau thresholds %.6g and %.6g", lam, thr[1], thr[0])
    return TauCase(0, thr)


def tau_threshold_root(h: float, KL: int, T: float) -> float:
    """Power ratio where the end-point sign test flips, for a fixed ``h``.

    Root of ``log2(1 - lam)/T + 1/((1 + KL h) KL ln2)`` in ``lam``.
    """
    def fun(lam):
        return math.log2(1 - lam) / T + 1.0 / ((1.0 + KL * h) * KL * LN2)

    return brentq(fun, 1e-15, 1 - 1e-15, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def optimize_tau(obj: UserRate, alpha: float, lam: float, KL: int, eps: float = 1e-6,
                 max_iter: int = 100, integer: bool = True) -> OptimizerResult:
    """Maximise the rate over ``tau`` in [KL, T] by derivative bisection.

    The continuous optimum is rounded to the better of its two integer
    neighbours (ties to the shorter overhead) when ``integer`` is set.
    """
    T = obj.T

    def d1(t):
        return float(obj.d_tau(alpha, lam, t))

    if d1(KL) < 0:
        x, it, res, case, endpoint = float(KL), 0, 0.0, "tau-KL", True
    elif d1(T) > 0:
        x, it, res, case, endpoint = float(T), 0, 0.0, "tau-T", True
    else:
        x, it, res = _bisect_decreasing(d1, float(KL), float(T), eps, max_iter)
        case, endpoint = "tau-interior", False
    cont = x
    if integer:
        lo = max(KL, math.floor(x))
        hi = min(int(T), math.ceil(x))
        x = float(lo) if obj(alpha, lam, lo) >= obj(alpha, lam, hi) else float(hi)
    return OptimizerResult(x, float(obj(alpha, lam, x)), case, it, res, endpoint, {"continuous": cont})


# ---------------------------------------------------------------------------
# max-min over users
# ---------------------------------------------------------------------------

class WorstUser:
    """Min over target-cell users of the closed-form rate."""

    def __init__(self, inputs: RateInputs):
        self.inputs = inputs
        self.users = [inputs.objective(k) for k in range(inputs.K)]
        self.T = inputs.T

    def rates(self, alpha, lam, tau) -> np.ndarray:
        return np.array([u(alpha, lam, tau) for u in self.users])

    def __call__(self, alpha, lam, tau):
        return np.min(self.rates(alpha, lam, tau), axis=0)

    def worst(self, alpha, lam, tau) -> int:
        return int(np.argmin(self.rates(alpha, lam, tau)))


def _line_search(fun, lo: float, hi: float, n: int = 201) -> tuple[float, float]:
    """Grid plus bounded refinement of a 1-D maximisation."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([fun(x) for x in xs])
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    best_x, best_v = float(xs[i]), float(vals[i])
    if b > a:
        r = minimize_scalar(lambda x: -fun(x), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-10 * max(1.0, abs(hi))})
        if -r.fun > best_v:
            best_x, best_v = float(r.x), float(-r.fun)
    return best_x, best_v


@dataclass(frozen=True)
class P1Result:
    alpha: float
    lam: float
    tau: int
    min_rate: float
    rounds: int
    cases: dict
    history: list
    start: str


def _round_tau(W: WorstUser, a: float, l: float, t: float, KL: int, T: int) -> tuple[int, float]:
    lo, hi = max(KL, math.floor(t)), min(T, math.ceil(t))
    vlo, vhi = float(W(a, l, lo)), float(W(a, l, hi))
    return (lo, vlo) if vlo >= vhi else (hi, vhi)


def _ascend(W: WorstUser, start: tuple[float, float, float], KL: int, T: int, fixed: dict,
            tol: float, max_rounds: int, eps: float) -> tuple[tuple, float, int, dict, list]:
    a, l, t = start
    best = float(W(a, l, t))
    history = [(a, l, t, best)]
    cases: dict = {}
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        before = best
        if "alpha" not in fixed:
            k = W.worst(a, l, t)
            res = optimize_alpha(W.users[k], l, t, eps)
            cases["alpha"] = res.case
            cands = [res.x, _line_search(lambda x: W(x, l, t), 0.0, 1.0)[0]]
            for x in cands:
                v = float(W(x, l, t))
                if v > best:
                    a, best = x, v
        if "lam" not in fixed:
            k = W.worst(a, l, t)
            cands = [_line_search(lambda x: W(a, x, t), *LAM_BOUNDS)[0]]
            if a > 0 or t < T:
                lr = lambda_opt(a, t, T, float(W.users[k].f()), LAM_BOUNDS)
                cases["lam"] = "lam-degenerate" if lr.degenerate else "lam-closed"
                cands.insert(0, lr.lam)
            else:
                cases["lam"] = "lam-no-data"
            for x in cands:
                v = float(W(a, x, t))
                if v > best:
                    l, best = x, v
        if "tau" not in fixed:
            k = W.worst(a, l, t)
            tc = classify_tau(a, l, float(W.users[k].f()), KL, T)
            res = optimize_tau(W.users[k], a, l, KL, eps, integer=False)
            cases["tau"] = res.case
            cases["tau_rule"] = tc.case
            cands = [res.x, _line_search(lambda x: W(a, l, x), float(KL), float(T))[0]]
            for x in cands:
                v = float(W(a, l, x))
                if v > best:
                    t, best = x, v
        history.append((a, l, t, best))
        if best - before < tol:
            break
    return (a, l, t), best, rounds, cases, history


def solve_p1(scenario: NetworkScenario, init: tuple | None = None, eps: float = 1e-6,
             tol: float = 1e-9, max_rounds: int = 20, p_e=None, fixed: dict | None = None,
             T: int | None = None, M: float | None = None) -> P1Result:
    """Max-min design by multi-start cyclic coordinate ascent.

    Each coordinate step takes the better of the per-user closed-form step
    on the current worst user and a bounded line search on the worst-user
    rate, and is accepted only if the worst-user rate does not drop.
    ``fixed`` pins any of ``alpha``, ``lam``, ``tau``. Starts: ``init`` (if
    given), the TM-only and TS-only optima and ``(0.5, 0.5, KL)``. The
    final ``tau`` is rounded to the better integer neighbour.
    """
    T = scenario.T if T is None else int(T)
    KL = scenario.KL
    if T < KL:
        raise ValueError("frame shorter than K*L")
    fixed = dict(fixed or {})
    inp = RateInputs(0.5, 0.5, KL, T, scenario.M if M is None else M, scenario.beta, scenario.sigma_n2, p_e)
    W = WorstUser(inp)

    starts = []
    if init is not None:
        starts.append(("init", tuple(float(v) for v in init)))
    if not {"alpha", "tau"} & fixed.keys() or fixed.get("alpha") == 0:
        tm = tm_only_design(scenario, T=T, M=M, p_e=p_e)
        starts.append(("tm_only", (0.0, tm.lam, float(tm.tau))))
    if not {"alpha", "tau"} & fixed.keys():
        ts = ts_only_design(scenario, T=T, M=M, p_e=p_e)
        starts.append(("ts_only", (1.0, ts.lam, float(T))))
    starts.append(("mid", (0.5, 0.5, float(KL))))

    best = None
    for name, (a, l, t) in starts:
        a = fixed.get("alpha", a)
        l = fixed.get("lam", l)
        t = fixed.get("tau", t)
        (a, l, t), _, rounds, cases, hist = _ascend(W, (a, l, t), KL, T, fixed, tol, max_rounds, eps)
        if "tau" in fixed:
            ti, v = int(round(t)), float(W(a, l, t))
        else:
            ti, v = _round_tau(W, a, l, t, KL, T)
        res = P1Result(a, l, ti, v, rounds, cases, hist, name)
        if best is None or v > best.min_rate + 1e-12:
            best = res
    return best


@dataclass(frozen=True)
class BaselineDesign:
    alpha: float
    lam: float
    tau: int
    min_rate: float


def tm_only_design(scenario: NetworkScenario, T: int | None = None, M: float | None = None,
                   p_e=None) -> BaselineDesign:
    """Pure TM training (alpha = 0) with the worst-user-best lam and tau."""
    T = scenario.T if T is None else int(T)
    KL = scenario.KL
    W = WorstUser(RateInputs(0.0, 0.5, KL, T, scenario.M if M is None else M, scenario.beta,
                             scenario.sigma_n2, p_e))
    k = W.worst(0.0, 0.5, KL)
    # without TS data the rate is linear in tau with negative slope
    tau = int(optimize_tau(W.users[k], 0.0, 0.5, KL).x)
    lam, v = _line_search(lambda x: W(0.0, x, tau), *LAM_BOUNDS)
    return BaselineDesign(0.0, lam, tau, v)


def ts_only_design(scenario: NetworkScenario, T: int | None = None, M: float | None = None,
                   p_e=None) -> BaselineDesign:
    """Pure TS training over the whole frame (alpha = 1, tau = T), best lam."""
    T = scenario.T if T is None else int(T)
    W = WorstUser(RateInputs(1.0, 0.5, T, T, scenario.M if M is None else M, scenario.beta,
                             scenario.sigma_n2, p_e))
    k = W.worst(1.0, 0.5, T)
    lr = lambda_opt(1.0, T, T, float(W.users[k].f()), LAM_BOUNDS)
    lam, v = _line_search(lambda x: W(1.0, x, T), *LAM_BOUNDS)
    if float(W(1.0, lr.lam, T)) >= v:
        lam, v = lr.lam, float(W(1.0, lr.lam, T))
    return BaselineDesign(1.0, lam, T, v)
