"""Reference solutions, log-linear rate fits and theorem-level verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemInstance, compute_c, compute_c1, make_rng
from .discrete import IterateHistory, run_scheme
from .dynamics import (DEFAULT_DT, DEFAULT_HORIZON, DynParams, Trajectory,
                       integrate_third_order, residual, stable_step)
from .errors import DegenerateData, NoConvergence
from .params import (check_thm32, check_thm42, continuous_pack, discrete_pack)

DEFAULT_WINDOW = 0.25
CONTINUOUS_MARGIN = 0.25
REFERENCE_MAX_ITER = 10_000_000
COLLAPSED = 1e-14


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (time or index, log distance)."""

    slope: float
    intercept: float
    r_squared: float
    window: tuple
    max_tail_ratio: float | None = None

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r_squared,
                "window": list(self.window), "max_tail_ratio": self.max_tail_ratio}


def reference_solution(inst: ProblemInstance, tol: float = 1e-12, *, seed: int = 0, start=None,
                       max_iter: int = REFERENCE_MAX_ITER, validate: bool = True) -> np.ndarray:
    """Damped residual iteration w <- w - c1 Psi(w) until ||Psi(w)|| <= tol.

    The step c1 makes the map a contraction whenever c > 0. The result is
    checked against the variational inequality at 100 sampled feasible points.
    """
    c1 = compute_c1(inst)
    if start is None:
        w = make_rng(seed).standard_normal(inst.dim)
    else:
        w = np.array(start, dtype=float)
    for _ in range(max_iter):
        r = residual(inst, w)
        if np.linalg.norm(r) <= tol:
            break
        w = w - c1 * r
    else:
        raise NoConvergence(f"residual iteration did not reach {tol:g} in {max_iter} steps")
    if validate:
        slack = solution_slack(inst, w, 100, seed)
        if slack < -10 * tol:
            raise NoConvergence(f"variational inequality violated by {-slack:.3g} at the fixed point")
    return w


def solution_slack(inst: ProblemInstance, w, samples: int, seed: int) -> float:
    """Worst scaled value of <g(w), v - F(w)> + h(v) - h(F(w)) over sampled v in Omega.

    Each value is divided by 1 + ||g(w)|| + ||v - F(w)||/gamma, the size of the
    terms the residual error enters through.
    """
    rng = make_rng(seed + 1)
    Fw, gw = inst.F(w), inst.g(w)
    V = inst.omega.sample(rng, samples, inst.dim)
    if inst.omega.variant == "whole-space":
        V = V + Fw
    worst = math.inf
    for v in V:
        val = gw @ (v - Fw) + inst.h(v) - inst.h(Fw)
        scale = 1 + np.linalg.norm(gw) + np.linalg.norm(v - Fw) / inst.gamma
        worst = min(worst, float(val / scale))
    return worst


def _fit(x: np.ndarray, dist: np.ndarray, window_fraction: float, floor: float) -> RateFit:
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if dist.size and np.all(dist < COLLAPSED):
        raise DegenerateData("all distances are below 1e-14; the run has already converged")
    idx = np.flatnonzero((dist > max(floor, 0.0)) & np.isfinite(dist))
    if idx.size < 10:
        raise DegenerateData(f"need at least 10 samples with positive distance, got {idx.size}")
    k = max(2, int(math.ceil(window_fraction * idx.size)))
    sel = idx[-k:]
    xs, ys = x[sel], np.log(dist[sel])
    A = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = A @ np.array([slope, intercept])
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1 - ss_res / ss_tot))
    d = dist[sel]
    ratio = float(np.max(d[1:] / d[:-1])) if d.size > 1 else None
    return RateFit(float(slope), float(intercept), r2, (int(sel[0]), int(sel[-1])), ratio)


def fit_exponential_rate(traj: Trajectory, window_fraction: float = DEFAULT_WINDOW,
                         floor: float = 0.0) -> RateFit:
    """Slope of log ||w(t) - w*|| over the trailing window; estimates -theta.

    Samples at or below ``floor`` are ignored (numerical noise of w*).
    """
    if traj.distance_sq is None:
        raise ValueError("trajectory carries no distance to w*")
    return _fit(traj.times, traj.distance, window_fraction, floor)


def fit_linear_rate(hist: IterateHistory, window_fraction: float = DEFAULT_WINDOW,
                    floor: float = 0.0) -> RateFit:
    """Slope of log ||w(k) - w*|| against k; estimates log q.

    ``max_tail_ratio`` is the largest ||w(k+1) - w*|| / ||w(k) - w*|| in the window.
    """
    if hist.distance_sq is None:
        raise ValueError("history carries no distance to w*")
    return _fit(np.arange(len(hist.distance_sq)), hist.distance, window_fraction, floor)


# --- verdicts ---------------------------------------------------------------

@dataclass(frozen=True)
class TheoremMode:
    name: str
    value: float

    @classmethod
    def thm32(cls, eps: float) -> "TheoremMode":
        return cls("thm32", float(eps))

    @classmethod
    def thm42(cls, xi: float) -> "TheoremMode":
        return cls("thm42", float(xi))


def pass_threshold(eps: float, margin: float = CONTINUOUS_MARGIN) -> float:
    """Continuous PASS needs a fitted slope at or below this value."""
    return -(eps - margin)


@dataclass
class RunRecord:
    seed: int
    slope: float
    r2: float
    max_tail_ratio: float | None
    monotone: bool
    passed: bool

    def to_dict(self) -> dict:
        return {"seed": self.seed, "slope": self.slope, "r2": self.r2,
                "max_tail_ratio": self.max_tail_ratio, "monotone": self.monotone, "pass": self.passed}


@dataclass
class Verdict:
    mode: str
    params: DynParams
    eps_or_xi: float
    runs: list = field(default_factory=list)
    verdict: str = "NotApplicable"
    threshold: float | None = None
    dt: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "params": self.params.to_dict(), "eps_or_xi": self.eps_or_xi,
                "threshold": self.threshold, "dt": self.dt,
                "runs": [r.to_dict() for r in self.runs], "verdict": self.verdict}


def _monotone_tail(d: np.ndarray, window: tuple) -> bool:
    seg = d[window[0]:window[1] + 1]
    return bool(np.all(seg[1:] <= seg[:-1]))


def noise_floor(inst: ProblemInstance, ref_tol: float, d0: float) -> float:
    """Distance below which w* error dominates: 100 tol / c, or 1e-10 of the start."""
    return max(100 * ref_tol / compute_c(inst), 1e-10 * d0)


def verify_theorem(inst: ProblemInstance, mode: TheoremMode, params: DynParams,
                   horizon: float | None = None, *, seeds=range(10), dt: float | None = None,
                   w_star=None, ref_tol: float = 1e-12, window_fraction: float = DEFAULT_WINDOW,
                   spread: float = 1.0) -> Verdict:
    """Run the dynamics from seeded starting points and judge the convergence claim.

    Continuous: every fitted slope must be negative and at most -(eps - 0.25),
    with a monotone tail. Discrete: fitted q = exp(slope) < 1, every tail ratio
    < 1 and a monotone tail. The step is capped at the RK4 stability estimate.
    Parameters failing their checker yield ``NotApplicable`` without running.
    """
    c, c1 = compute_c(inst), compute_c1(inst)
    a0, a1, a2 = params.a0, params.a1, params.a2
    if mode.name == "thm32":
        rep = check_thm32(continuous_pack(c1, a0, a1, a2), c, c1, a0, a1, a2, mode.value)
    elif mode.name == "thm42":
        rep = check_thm42(discrete_pack(c1, a0, a1, a2), c, c1, a0, a1, a2, mode.value)
    else:
        raise ValueError(f"unknown theorem mode {mode.name!r}")
    out = Verdict(mode.name, params, mode.value)
    if not rep.verdict:
        return out
    if w_star is None:
        w_star = reference_solution(inst, ref_tol)
    w_star = np.asarray(w_star, dtype=float)
    all_ok = True
    if mode.name == "thm32":
        T = DEFAULT_HORIZON if horizon is None else horizon
        step = min(dt or DEFAULT_DT, stable_step(inst, params))
        out.dt = step
        out.threshold = pass_threshold(mode.value)
    else:
        max_iter = int(horizon) if horizon is not None else 20_000
        out.threshold = 0.0
    for seed in seeds:
        w0 = w_star + spread * make_rng(seed).standard_normal(inst.dim)
        d0 = float(np.linalg.norm(w0 - w_star))
        floor = noise_floor(inst, ref_tol, d0)
        if mode.name == "thm32":
            traj = integrate_third_order(inst, params, (w0, np.zeros_like(w0), np.zeros_like(w0)),
                                         0.0, T, step, w_star=w_star, stop_below=floor)
            dist = traj.distance
            fit = _safe_fit(fit_exponential_rate, traj, window_fraction, floor)
        else:
            hist = run_scheme(inst, params, w0=w0, max_iter=max_iter,
                              tol=floor * c, w_star=w_star)
            dist = hist.distance
            fit = _safe_fit(fit_linear_rate, hist, window_fraction, floor)
        if fit is None:
            rec = RunRecord(int(seed), -math.inf, 1.0, 0.0, True, True)
        else:
            mono = _monotone_tail(dist, fit.window)
            if mode.name == "thm32":
                ok = fit.slope < 0 and fit.slope <= out.threshold and mono
            else:
                ok = math.exp(fit.slope) < 1 and fit.max_tail_ratio < 1 and mono
            rec = RunRecord(int(seed), fit.slope, fit.r_squared, fit.max_tail_ratio, mono, ok)
        all_ok &= rec.passed
        out.runs.append(rec)
    out.verdict = "PASS" if all_ok else "FAIL"
    return out


def _safe_fit(fn, data, window_fraction, floor):
    try:
        return fn(data, window_fraction, floor)
    except DegenerateData:
        return None
