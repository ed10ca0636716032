"""Residual map, third-order system and the first/second-order baselines.

All systems are integrated with fixed-step classical RK4.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ProblemInstance, TripleVec, residual_lipschitz
from .errors import StepDiverged
from .prox import prox

DIVERGENCE_LIMIT = 1e12
INITIAL_CAPACITY = 1 << 16
DEFAULT_DT = 0.01
DEFAULT_HORIZON = 40.0


@dataclass(frozen=True)
class DynParams:
    a0: float
    a1: float
    a2: float

    def __post_init__(self):
        for name in ("a0", "a1", "a2"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
            object.__setattr__(self, name, v)

    def to_dict(self) -> dict:
        return {"a0": self.a0, "a1": self.a1, "a2": self.a2}


def residual(inst: ProblemInstance, w) -> np.ndarray:
    """Psi(w) = F(w) - P(F(w) - gamma g(w)); zero exactly at solutions."""
    w = np.asarray(w, dtype=float)
    Fw = inst.F(w)
    return Fw - prox(inst.omega, inst.h, inst.gamma, Fw - inst.gamma * inst.g(w))


def _phi(inst, params, y):
    out = np.empty_like(y)
    out[0] = y[1]
    out[1] = y[2]
    out[2] = -params.a1 * y[1] - params.a2 * y[2] - params.a0 * residual(inst, y[0])
    return out


def phi_map(inst: ProblemInstance, params: DynParams, v: TripleVec) -> TripleVec:
    """First-order reformulation (v1, v2, v3) -> (v2, v3, -a1 v2 - a2 v3 - a0 Psi(v1))."""
    return TripleVec.from_array(_phi(inst, params, v.as_array()))


def phi_lipschitz_bound(inst: ProblemInstance, params: DynParams) -> float:
    L = residual_lipschitz(inst)
    return math.sqrt(1 + (params.a1**2 + params.a2**2 + 2 * params.a0**2) * (1 + L))


def stable_step(inst: ProblemInstance, params: DynParams) -> float:
    """Largest step keeping RK4 inside its stability region, heuristically.

    Bounds the spectral radius of the linearized companion matrix (with a0
    scaled by the residual's Lipschitz modulus) via Fujiwara's root bound.
    """
    L = residual_lipschitz(inst)
    radius = 2 * max(params.a2, math.sqrt(params.a1), (params.a0 * L / 2) ** (1 / 3))
    return 1.0 / radius


@dataclass
class Trajectory:
    """Samples of a continuous run.

    ``states`` has shape (N, order, n): w and its first order-1 derivatives.
    ``derivative_norms`` holds ||w'||^2 and ||w''||^2; for lower-order systems
    the missing derivative comes from the vector field, or NaN if unavailable.
    """

    times: np.ndarray
    states: np.ndarray
    residual_norms: np.ndarray
    derivative_norms: np.ndarray
    distance_sq: np.ndarray | None = None
    dt: float = DEFAULT_DT

    def __len__(self):
        return len(self.times)

    @property
    def w(self) -> np.ndarray:
        return self.states[:, 0, :]

    def state(self, i: int) -> TripleVec:
        s = self.states[i]
        z = np.zeros_like(s[0])
        parts = list(s) + [z] * (3 - len(s))
        return TripleVec(*parts)

    @property
    def distance(self) -> np.ndarray | None:
        return None if self.distance_sq is None else np.sqrt(self.distance_sq)

    def to_csv(self, path) -> None:
        n = self.states.shape[2]
        dist = self.distance_sq if self.distance_sq is not None else np.full(len(self), np.nan)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t"] + [f"w[{i}]" for i in range(n)] + ["psi_norm", "phi", "phi1", "phi2"])
            for i in range(len(self)):
                row = [self.times[i], *self.w[i], self.residual_norms[i], dist[i],
                       *self.derivative_norms[i]]
                wr.writerow([repr(float(x)) for x in row])


def _integrate(field: Callable, y0: np.ndarray, t0: float, T: float, dt: float,
               diagnostics: Callable, w_star, stop_below: float | None) -> Trajectory:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T > t0:
        raise ValueError("T must exceed t0")
    steps = int(round((T - t0) / dt))
    y = np.array(y0, dtype=float)
    # buffers grow by doubling so an early stop never pays for the full horizon
    cap = min(steps + 1, INITIAL_CAPACITY)
    times = np.empty(cap)
    states = np.empty((cap,) + y.shape)
    res = np.empty(cap)
    dnorm = np.empty((cap, 2))
    dist = None if w_star is None else np.empty(cap)
    w_star = None if w_star is None else np.asarray(w_star, dtype=float)
    last = steps
    for i in range(steps + 1):
        if i == cap:
            cap = min(steps + 1, 2 * cap)
            times, states, res, dnorm = (np.resize(a, (cap,) + a.shape[1:]) for a in (times, states, res, dnorm))
            if dist is not None:
                dist = np.resize(dist, cap)
        times[i] = t0 + i * dt
        states[i] = y
        res[i], dnorm[i] = diagnostics(y)
        if dist is not None:
            e = y[0] - w_star
            dist[i] = float(e @ e)
            if stop_below is not None and dist[i] <= stop_below * stop_below:
                last = i
                break
        if i == steps:
            break
        k1 = field(y)
        k2 = field(y + 0.5 * dt * k1)
        k3 = field(y + 0.5 * dt * k2)
        k4 = field(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        nrm = np.linalg.norm(y)
        if not (nrm <= DIVERGENCE_LIMIT):
            raise StepDiverged(f"state norm {nrm:.3g} exceeded {DIVERGENCE_LIMIT:g} at t={times[i] + dt:.6g}",
                               times[i] + dt)
    sl = slice(0, last + 1)
    return Trajectory(times[sl], states[sl], res[sl], dnorm[sl],
                      None if dist is None else dist[sl], dt)


def _as_triple(init) -> np.ndarray:
    if isinstance(init, TripleVec):
        return init.as_array()
    return np.array([np.asarray(v, dtype=float).reshape(-1) for v in init])


def integrate_third_order(inst: ProblemInstance, params: DynParams, init, t0: float = 0.0,
                          T: float = DEFAULT_HORIZON, dt: float = DEFAULT_DT, *,
                          w_star=None, stop_below: float | None = None) -> Trajectory:
    """w''' + a2 w'' + a1 w' + a0 Psi(w) = 0 from (w, w', w'')(t0) = init.

    With ``w_star`` given, distance_sq is recorded; ``stop_below`` then ends
    the run once ||w - w*|| drops to that level.
    """
    y0 = _as_triple(init)

    def field(y):
        return _phi(inst, params, y)

    def diag(y):
        return np.linalg.norm(residual(inst, y[0])), (y[1] @ y[1], y[2] @ y[2])

    return _integrate(field, y0, t0, T, dt, diag, w_star, stop_below)


def integrate_first_order_baseline(inst: ProblemInstance, rho: float, init, t0: float = 0.0,
                                   T: float = DEFAULT_HORIZON, dt: float = DEFAULT_DT, *,
                                   w_star=None, stop_below: float | None = None) -> Trajectory:
    """w' = rho [P(F(w) - gamma g(w)) - F(w)] = -rho Psi(w)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    y0 = np.asarray(init, dtype=float).reshape(1, -1)

    def field(y):
        return -rho * residual(inst, y[0])[None, :]

    def diag(y):
        r = residual(inst, y[0])
        v = rho * r
        return np.linalg.norm(r), (v @ v, math.nan)

    return _integrate(field, y0, t0, T, dt, diag, w_star, stop_below)


def integrate_second_order_baseline(inst: ProblemInstance, kappa: float, rho: float, init,
                                    t0: float = 0.0, T: float = DEFAULT_HORIZON, dt: float = DEFAULT_DT,
                                    *, w_star=None, stop_below: float | None = None) -> Trajectory:
    """w'' + kappa w' + rho Psi(w) = 0 with constant kappa and rho."""
    if not (kappa > 0 and rho > 0):
        raise ValueError("kappa and rho must be positive")
    y0 = np.array([np.asarray(v, dtype=float).reshape(-1) for v in init])

    def field(y):
        out = np.empty_like(y)
        out[0] = y[1]
        out[1] = -kappa * y[1] - rho * residual(inst, y[0])
        return out

    def diag(y):
        r = residual(inst, y[0])
        acc = -kappa * y[1] - rho * r
        return np.linalg.norm(r), (y[1] @ y[1], acc @ acc)

    return _integrate(field, y0, t0, T, dt, diag, w_star, stop_below)


def lemma_audit(inst: ProblemInstance, w_star, trials: int, seed: int, radius: float = 1.0,
                tol: float = 1e-9):
    """Sample the residual estimates around w*.

    Slacks: <w - w*, Psi(w)> - c1 ||Psi(w)||^2 and ||Psi(w)|| - c ||w - w*||.
    The inequality <Psi(w), w - w*> >= c ||w - w*||^2 is only logged, under
    ``log_only``.
    """
    from .core import AuditReport, compute_c, compute_c1, make_rng

    c, c1 = compute_c(inst), compute_c1(inst)
    rng = make_rng(seed)
    w_star = np.asarray(w_star, dtype=float)
    co, norm_bound, third = [], [], []
    for _ in range(trials):
        d = rng.standard_normal(inst.dim)
        d *= radius * rng.uniform() ** (1.0 / inst.dim) / np.linalg.norm(d)
        w = w_star + d
        r = residual(inst, w)
        co.append(float(d @ r - c1 * (r @ r)))
        norm_bound.append(float(np.linalg.norm(r) - c * np.linalg.norm(d)))
        third.append(float(d @ r - c * (d @ d)))
    return AuditReport("residual_estimates", {"cocoercive": min(co), "norm_lower_bound": min(norm_bound)},
                       tol, trials, log_only={"strong_inner": min(third)})


def residual_lipschitz_audit(inst: ProblemInstance, trials: int, seed: int, tol: float = 1e-9):
    """Slack (2 eta + gamma beta)||x - y|| - ||Psi(x) - Psi(y)|| over sampled pairs."""
    from .core import AuditReport, make_rng

    rng = make_rng(seed)
    L = residual_lipschitz(inst)
    worst = math.inf
    for _ in range(trials):
        x = 2 * rng.standard_normal(inst.dim)
        y = x + rng.standard_normal(inst.dim) * rng.choice([1e-3, 1e-1, 1.0, 3.0])
        s = L * np.linalg.norm(x - y) - np.linalg.norm(residual(inst, x) - residual(inst, y))
        worst = min(worst, float(s))
    return AuditReport("residual_lipschitz", {"lipschitz": worst}, tol, trials)
