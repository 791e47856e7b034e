"""Experiment runner: sweeps, design optimisation, validation suites and
baseline comparisons, with deterministic CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .designer import lambda_opt, lambda_polynomial, solve_p1, tm_only_design, ts_only_design
from .estimator import mse_empirical, mse_theoretical
from .pilots import FrameDesign, PilotBook, build_pilot_book
from .rates import RateInputs, RateReport, asymptotic_rate, empirical_rate, rate_approx
from .receiver import empirical_sinr
from .scenario import NetworkScenario, dump_config, load_config, make_scenario

__all__ = [
    "BASELINES",
    "MODES",
    "SWEEP_AXES",
    "ExperimentSpec",
    "ValidationCheck",
    "load_scenario",
    "run_sweep",
    "run_optimize",
    "run_validate",
    "run_compare",
    "format_csv",
    "write_outputs",
]

BASELINES = ("hybrid", "tm_only", "ts_only", "contaminated_reuse")
MODES = ("closed_form", "monte_carlo", "both")
SWEEP_AXES = ("alpha", "lam", "tau", "T", "M", "snr_db")
DESIGN_KEYS = ("alpha", "lam", "tau")

COLUMNS = [
    "axis", "value", "baseline", "status", "alpha", "lam", "tau", "T", "M",
    "rate_closed", "rate_asymptotic", "rate_empirical", "rate_ci_low", "rate_ci_high",
    "mse_closed", "mse_empirical", "pe_I", "pe_II",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: scenario, sweep, evaluation mode and baselines.

    ``design`` maps ``alpha``/``lam``/``tau`` to a number or ``"opt"``
    (optimised for the worst user). ``values`` is empty for a single point.
    """

    config: str | None = None
    axis: str | None = None
    values: tuple = ()
    mode: str = "closed_form"
    trials: int = 200
    seed: int = 0
    baselines: tuple = ("hybrid",)
    out: str | None = None
    design: dict = field(default_factory=lambda: {k: "opt" for k in DESIGN_KEYS})
    overrides: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.baselines) - set(BASELINES)
        if bad:
            raise ValueError(f"unknown baselines {sorted(bad)}")
        if self.axis is not None and self.axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        for k, v in self.design.items():
            if k not in DESIGN_KEYS:
                raise ValueError(f"unknown design key {k!r}")
            if v != "opt":
                v = float(v)
                if k == "alpha" and not 0 <= v <= 1:
                    raise ValueError("alpha must lie in [0, 1]")
                if k == "lam" and not 0 < v < 1:
                    raise ValueError("lam must lie in (0, 1)")


def load_scenario(spec: ExperimentSpec) -> NetworkScenario:
    """Scenario from the config file (or defaults) with overrides applied."""
    if spec.config is None:
        base = make_scenario()
    else:
        base, _ = load_config(spec.config)
    if not spec.overrides:
        return base
    text = dump_config(base)
    kv = dict(line.split(" = ", 1) for line in text.strip().splitlines())
    kv.update({k: str(v) for k, v in spec.overrides.items()})
    if ("K" in spec.overrides or "L" in spec.overrides) and "T" not in spec.overrides:
        # let T follow the new user count
        kv.pop("T", None)
    scen, _ = load_config("\n".join(f"{k} = {v}" for k, v in kv.items()) + "\n")
    return scen


# ---------------------------------------------------------------------------
# evaluation of one sweep point
# ---------------------------------------------------------------------------

def _fmt_reason(msg: str) -> str:
    return "skipped: " + msg


def _point_setup(scenario: NetworkScenario, design: dict, axis: str | None, value):
    design = dict(design)
    if axis in DESIGN_KEYS:
        design[axis] = float(value)
    elif axis == "T":
        scenario = scenario.with_(T=int(value))
    elif axis == "M":
        scenario = scenario.with_(M=int(value))
    elif axis == "snr_db":
        scenario = scenario.with_(sigma_n2=10.0 ** (-float(value) / 10.0))
    return scenario, design


def _feasibility(scenario: NetworkScenario, design: dict) -> str | None:
    a, l, t = (design.get(k, "opt") for k in DESIGN_KEYS)
    if a != "opt" and not 0 <= a <= 1:
        return "alpha outside [0, 1]"
    if l != "opt" and not 0 < l < 1:
        return "lam outside (0, 1)"
    if t != "opt" and not scenario.KL <= t <= scenario.T:
        return "tau outside [KL, T]"
    return None


def _baseline_design(scenario: NetworkScenario, design: dict, baseline: str):
    """Resolve ``(alpha, lam, tau, pilot_mode)`` or a skip reason."""
    fixed = {k: float(v) for k, v in design.items() if v != "opt"}
    if baseline == "hybrid":
        if len(fixed) == 3:
            return (fixed["alpha"], fixed["lam"], int(round(fixed["tau"])), "orthogonal"), None
        if "tau" in fixed:
            fixed["tau"] = float(int(round(fixed["tau"])))
        r = solve_p1(scenario, fixed=fixed)
        return (r.alpha, r.lam, r.tau, "orthogonal"), None
    if baseline in ("tm_only", "contaminated_reuse"):
        if fixed.get("alpha", 0.0) != 0.0:
            return None, "baseline fixes alpha = 0"
        tm = tm_only_design(scenario)
        lam = fixed.get("lam", tm.lam)
        if baseline == "tm_only":
            tau = int(round(fixed.get("tau", tm.tau)))
            return (0.0, lam, tau, "orthogonal"), None
        tau = int(round(fixed.get("tau", scenario.K)))
        if tau < scenario.K or tau > scenario.T:
            return None, "tau outside [K, T]"
        return (0.0, lam, tau, "reuse"), None
    if baseline == "ts_only":
        if fixed.get("alpha", 1.0) != 1.0:
            return None, "baseline fixes alpha = 1"
        if fixed.get("tau", scenario.T) != scenario.T:
            return None, "baseline fixes tau = T"
        ts = ts_only_design(scenario)
        return (1.0, fixed.get("lam", ts.lam), scenario.T, "orthogonal"), None
    raise ValueError(baseline)


def _nan_row() -> dict:
    return {c: math.nan for c in COLUMNS}


def _evaluate(task) -> dict:
    base, design, axis, value, baseline, mode, trials, seed = task
    row = _nan_row()
    row.update(axis=axis or "", value=value if value is not None else "", baseline=baseline,
               T=base.T, M=base.M)
    try:
        scenario, design = _point_setup(base, design, axis, value)
    except ValueError as exc:
        row["status"] = _fmt_reason(str(exc))
        return row
    row.update(T=scenario.T, M=scenario.M)
    reason = _feasibility(scenario, design)
    if reason is None:
        resolved, reason = _baseline_design(scenario, design, baseline)
    if reason is not None:
        row["status"] = _fmt_reason(reason)
        return row
    alpha, lam, tau, pilot_mode = resolved
    fd = FrameDesign(alpha, lam, tau, scenario.T)
    row.update(status="ok", alpha=alpha, lam=lam, tau=tau)
    if pilot_mode == "orthogonal":
        rep = RateReport.closed_form(fd, scenario)
        row["rate_closed"] = rep.min_rate_closed
        row["rate_asymptotic"] = float(np.min(rep.rate_asymptotic))
        row["mse_closed"] = float(np.mean(rep.mse_closed))
    if mode in ("monte_carlo", "both"):
        est = empirical_sinr(scenario, fd, trials, seed, pilot_mode)
        er = empirical_rate(est, fd)
        w = int(np.argmin(er.rate))
        row.update(rate_empirical=float(er.rate[w]), rate_ci_low=float(er.lower[w]),
                   rate_ci_high=float(er.upper[w]),
                   pe_I=float(np.nanmean(est.p_e_I)) if np.any(np.isfinite(est.p_e_I)) else math.nan,
                   pe_II=float(np.nanmean(est.p_e_II)) if np.any(np.isfinite(est.p_e_II)) else math.nan)
        row["mse_empirical"] = mse_empirical(scenario, fd, trials, seed, pilot_mode).pooled
    return row


def _tasks(spec: ExperimentSpec, scenario: NetworkScenario):
    points = [(None, None)] if spec.axis is None else [(spec.axis, v) for v in spec.values]
    return [(scenario, dict(spec.design), axis, value, b, spec.mode, spec.trials, spec.seed)
            for axis, value in points for b in spec.baselines]


def run_sweep(spec: ExperimentSpec) -> list[dict]:
    """One row per sweep point and baseline, in sweep order.

    An axis with an empty value list yields no rows.
    """
    scenario = load_scenario(spec)
    if spec.axis is not None and len(spec.values) == 0:
        return []
    tasks = _tasks(spec, scenario)
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            # map preserves input order whatever the completion order
            return list(pool.map(_evaluate, tasks))
    return [_evaluate(t) for t in tasks]


# ---------------------------------------------------------------------------
# CSV / metadata
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.9g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def format_csv(rows: list[dict], columns: list[str] = COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_outputs(rows: list[dict], spec: ExperimentSpec, command: str,
                  columns: list[str] = COLUMNS, extra: dict | None = None) -> str:
    """Write ``spec.out`` (CSV) and its ``.json`` metadata; returns the CSV text."""
    text = format_csv(rows, columns)
    if spec.out:
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        meta = {
            "command": command,
            "spec": _jsonable(asdict(spec)),
            "scenario": dump_config(load_scenario(spec)),
            "beta": load_scenario(spec).beta.tolist(),
        }
        if extra:
            meta.update(_jsonable(extra))
        out.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# optimise / compare
# ---------------------------------------------------------------------------

OPT_COLUMNS = ["design", "alpha", "lam", "tau", "T", "M", "min_rate", "alpha_case", "lam_case",
               "tau_case", "tau_rule", "start", "rounds"]


def run_optimize(spec: ExperimentSpec) -> list[dict]:
    """Max-min design and the two pure baselines for the configured scenario."""
    sc = load_scenario(spec)
    fixed = {k: float(v) for k, v in spec.design.items() if v != "opt"}
    r = solve_p1(sc, fixed=fixed)
    rows = [{
        "design": "hybrid", "alpha": r.alpha, "lam": r.lam, "tau": r.tau, "T": sc.T, "M": sc.M,
        "min_rate": r.min_rate, "alpha_case": r.cases.get("alpha", ""), "lam_case": r.cases.get("lam", ""),
        "tau_case": r.cases.get("tau", ""), "tau_rule": r.cases.get("tau_rule", ""), "start": r.start,
        "rounds": r.rounds,
    }]
    tm, ts = tm_only_design(sc), ts_only_design(sc)
    for name, d in (("tm_only", tm), ("ts_only", ts)):
        rows.append({"design": name, "alpha": d.alpha, "lam": d.lam, "tau": d.tau, "T": sc.T, "M": sc.M,
                     "min_rate": d.min_rate, "alpha_case": "", "lam_case": "", "tau_case": "",
                     "tau_rule": "", "start": "", "rounds": ""})
    return rows


def run_compare(spec: ExperimentSpec) -> list[dict]:
    """Baseline comparison over frame lengths (default 2, 4, 6, 10, 20 x KL)."""
    sc = load_scenario(spec)
    values = spec.values or tuple(m * sc.KL for m in (2, 4, 6, 10, 20))
    baselines = spec.baselines if spec.baselines != ("hybrid",) else ("hybrid", "tm_only", "ts_only")
    sub = ExperimentSpec(config=spec.config, axis="T", values=tuple(values), mode=spec.mode, trials=spec.trials,
                         seed=spec.seed, baselines=baselines, out=spec.out, design=spec.design,
                         overrides=spec.overrides, workers=spec.workers)
    return run_sweep(sub)


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


def _check_pilots(book: PilotBook) -> ValidationCheck:
    G = book.gram()
    target = book.tau * book.lam * np.eye(G.shape[0])
    err = float(np.max(np.abs(G - target)) / (book.tau * book.lam))
    return ValidationCheck("pilot_orthogonality", err < 1e-10, f"max relative Gram error {err:.3e}")


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_validate(spec: ExperimentSpec, corrupt_pilots: bool = False) -> list[ValidationCheck]:
    """Pilot, power-order, MSE, closed-form and derivative checks.

    ``corrupt_pilots`` perturbs the pilot book so that the orthogonality
    check fails (negative control).
    """
    sc = load_scenario(spec)
    KL = sc.KL
    tau = KL
    checks = []

    book = build_pilot_book(KL, tau, 0.81)
    if corrupt_pilots:
        P = np.array(book.P)
        P[1] = P[0]
        book = PilotBook(P, book.lam)
    checks.append(_check_pilots(book))

    # power orders of the detector terms; the orders are large-tau statements
    tau = max(KL, 64)
    design = FrameDesign(1.0, 0.5, tau, 2 * tau)
    Ms = (64, 128, 256)
    trials = max(20, min(spec.trials, 400))
    S, N, r1 = [], [], []
    for M in Ms:
        est = empirical_sinr(sc.with_(M=M, T=2 * tau), design, trials, spec.seed)
        S.append(np.mean(est.powers_I["S"]))
        N.append(np.mean(est.powers_I["N"]))
        r1.append(np.mean(est.powers_II["I1"] / est.powers_I["I1"]))
    s_slope, n_slope = _slope(Ms, S), _slope(Ms, N)
    checks.append(ValidationCheck("signal_power_order", 1.9 <= s_slope <= 2.1, f"slope {s_slope:.4f}"))
    checks.append(ValidationCheck("noise_power_order", 0.9 <= n_slope <= 1.1, f"slope {n_slope:.4f}"))
    rel = abs(np.mean(r1) / (1 - design.lam) - 1)
    checks.append(ValidationCheck("self_interference_ratio", rel < 0.1, f"relative error {rel:.4f}"))

    # estimation MSE
    small = make_scenario(L=3, K=2, M=64, T=40, snr_db=sc.snr_db, seed=sc.seed)
    d = FrameDesign(0.5, 0.7, 20, 40)
    m = mse_empirical(small, d, max(200, min(spec.trials * 10, 4000)), spec.seed)
    th = np.array([mse_theoretical(d, small, k) for k in range(small.K)])
    rel = float(np.max(np.abs(m.per_user / th - 1)))
    checks.append(ValidationCheck("mse_closed_form", rel < 0.1, f"max relative error {rel:.4f}"))

    # closed-form algebra
    rng = np.random.default_rng(spec.seed)
    worst = 0.0
    for _ in range(100):
        T = float(rng.uniform(KL, 20 * KL))
        t = float(rng.uniform(KL, T))
        a = float(rng.uniform(0.0, 1.0))
        f = float(10 ** rng.uniform(-5, -1))
        lr = lambda_opt(a, t, T, f)
        worst = max(worst, abs(lambda_polynomial(lr.raw, a, t, T, f)))
    checks.append(ValidationCheck("lambda_polynomial_residual", worst < 1e-9, f"max residual {worst:.3e}"))

    inp = RateInputs.from_scenario(sc, 0.5, 0.8, KL, T=4 * KL)
    worst_d = 0.0
    for _ in range(100):
        a, l = float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.2, 0.95))
        t = float(rng.uniform(KL + 1, 4 * KL - 1))
        u = inp.objective(int(rng.integers(sc.K)))
        h = 1e-5
        fa = (u(a + h, l, t) - u(a - h, l, t)) / (2 * h)
        ft = (u(a, l, t + h * t) - u(a, l, t - h * t)) / (2 * h * t)
        worst_d = max(worst_d, abs(fa / u.d_alpha(a, l, t) - 1), abs(ft / u.d_tau(a, l, t) - 1))
    checks.append(ValidationCheck("rate_derivatives", worst_d < 1e-4, f"max relative error {worst_d:.3e}"))

    lim = asymptotic_rate(RateInputs.from_scenario(sc, 1.0, 0.5, KL, T=2 * KL), 0)
    big = RateInputs.from_scenario(sc, 1.0, 0.5, KL, T=2 * KL).with_(M=1e6)
    rel = abs(rate_approx(big, 0) / lim - 1)
    checks.append(ValidationCheck("large_array_limit", rel < 0.01, f"relative gap {rel:.3e}"))
    return checks
