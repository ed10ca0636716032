"""Generalized h-projection ``P_Omega^{gamma h}`` on R^n.

Closed forms are used for the certified (Omega, h) families; every other
combination goes through a projected-gradient inner solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InnerSolveFailed

INNER_TOL = 1e-12
INNER_MAX_ITER = 100_000


def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=float, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set: whole space, a box or a Euclidean ball."""

    variant: str = "whole-space"
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.variant == "whole-space":
            return
        if self.variant == "box":
            lo, hi = _frozen(self.lo), _frozen(self.hi)
            if lo.shape != hi.shape or lo.size == 0:
                raise ValueError("box bounds must share one nonzero dimension")
            if np.any(lo > hi):
                raise ValueError("box requires lo <= hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.variant == "ball":
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball radius must be positive")
            object.__setattr__(self, "center", _frozen(self.center))
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ValueError(f"unknown feasible set variant {self.variant!r}")

    @classmethod
    def whole_space(cls) -> "FeasibleSet":
        return cls("whole-space")

    @classmethod
    def box(cls, lo, hi) -> "FeasibleSet":
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        return cls("ball", center=center, radius=radius)

    @property
    def dim(self) -> int | None:
        if self.variant == "box":
            return self.lo.size
        if self.variant == "ball":
            return self.center.size
        return None

    def project(self, w: np.ndarray) -> np.ndarray:
        if self.variant == "box":
            return np.clip(w, self.lo, self.hi)
        if self.variant == "ball":
            d = w - self.center
            r = np.linalg.norm(d)
            if r <= self.radius:
                return np.array(w, dtype=float)
            return self.center + (self.radius / r) * d
        return np.array(w, dtype=float)

    def contains(self, w: np.ndarray, tol: float = 0.0) -> bool:
        if self.variant == "box":
            return bool(np.all(w >= self.lo - tol) and np.all(w <= self.hi + tol))
        if self.variant == "ball":
            return bool(np.linalg.norm(w - self.center) <= self.radius + tol)
        return True

    def sample(self, rng: np.random.Generator, count: int, dim: int, scale: float = 1.0) -> np.ndarray:
        """Draw ``count`` points of the set (Gaussian for the whole space)."""
        if self.variant == "box":
            return rng.uniform(self.lo, self.hi, size=(count, self.lo.size))
        if self.variant == "ball":
            n = self.center.size
            d = rng.standard_normal((count, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r = self.radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
            return self.center + r * d
        return scale * rng.standard_normal((count, dim))

    def to_dict(self) -> dict:
        if self.variant == "box":
            return {"variant": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        if self.variant == "ball":
            return {"variant": "ball", "center": self.center.tolist(), "radius": self.radius}
        return {"variant": "whole-space"}

    @classmethod
    def from_dict(cls, d: dict) -> "FeasibleSet":
        v = d["variant"]
        if v == "box":
            return cls.box(d["lo"], d["hi"])
        if v == "ball":
            return cls.ball(d["center"], d["radius"])
        return cls(v)


@dataclass(frozen=True)
class HSpec:
    """Proper convex lsc function h.

    ``custom`` carries ``value``/``grad`` callbacks; ``grad_lipschitz`` bounds
    the gradient's Lipschitz constant and sets the inner solver step.
    """

    variant: str = "zero"
    s: np.ndarray | None = None
    q: np.ndarray | None = None
    value: Callable[[np.ndarray], float] | None = field(default=None, compare=False)
    grad: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    grad_lipschitz: float = 1.0

    def __post_init__(self):
        if self.variant == "linear":
            object.__setattr__(self, "s", _frozen(self.s))
        elif self.variant == "separable-quadratic":
            q = _frozen(self.q)
            if np.any(q < 0):
                raise ValueError("separable-quadratic h needs q >= 0")
            object.__setattr__(self, "q", q)
        elif self.variant == "custom":
            if self.value is None or self.grad is None:
                raise ValueError("custom h needs value and grad callbacks")
        elif self.variant != "zero":
            raise ValueError(f"unknown h variant {self.variant!r}")

    @classmethod
    def zero(cls) -> "HSpec":
        return cls("zero")

    @classmethod
    def linear(cls, s) -> "HSpec":
        return cls("linear", s=s)

    @classmethod
    def quadratic(cls, q) -> "HSpec":
        return cls("separable-quadratic", q=q)

    @classmethod
    def custom(cls, value, grad, grad_lipschitz: float = 1.0) -> "HSpec":
        return cls("custom", value=value, grad=grad, grad_lipschitz=grad_lipschitz)

    def __call__(self, v: np.ndarray) -> float:
        if self.variant == "zero":
            return 0.0
        if self.variant == "linear":
            return float(self.s @ v)
        if self.variant == "separable-quadratic":
            return 0.5 * float(self.q @ (v * v))
        return float(self.value(v))

    def gradient(self, v: np.ndarray) -> np.ndarray:
        if self.variant == "zero":
            return np.zeros_like(v, dtype=float)
        if self.variant == "linear":
            return np.broadcast_to(self.s, np.shape(v)).astype(float)
        if self.variant == "separable-quadratic":
            return self.q * v
        return np.asarray(self.grad(v), dtype=float)

    @property
    def smoothness(self) -> float:
        if self.variant in ("zero", "linear"):
            return 0.0
        if self.variant == "separable-quadratic":
            return float(self.q.max()) if self.q.size else 0.0
        return float(self.grad_lipschitz)

    def to_dict(self) -> dict:
        if self.variant == "linear":
            return {"variant": "linear", "s": self.s.tolist()}
        if self.variant == "separable-quadratic":
            return {"variant": "separable-quadratic", "q": self.q.tolist()}
        if self.variant == "custom":
            raise ValueError("custom h callbacks cannot be serialized")
        return {"variant": "zero"}

    @classmethod
    def from_dict(cls, d: dict) -> "HSpec":
        v = d["variant"]
        if v == "linear":
            return cls.linear(d["s"])
        if v == "separable-quadratic":
            return cls.quadratic(d["q"])
        if v == "zero":
            return cls.zero()
        raise ValueError(f"cannot deserialize h variant {v!r}")


def prox(omega: FeasibleSet, h: HSpec, gamma: float, w) -> np.ndarray:
    """argmin over v in omega of ``gamma*h(v) + 0.5*||w - v||^2``."""
    w = np.asarray(w, dtype=float)
    if h.variant == "zero":
        return omega.project(w)
    if h.variant == "linear":
        # the linear term only shifts the anchor point, for any convex omega
        return omega.project(w - gamma * h.s)
    if h.variant == "separable-quadratic" and omega.variant != "ball":
        return omega.project(w / (1.0 + gamma * h.q))
    return prox_inner(omega, h, gamma, w)


def prox_inner(omega: FeasibleSet, h: HSpec, gamma: float, w, tol: float = INNER_TOL,
               max_iter: int = INNER_MAX_ITER) -> np.ndarray:
    """Projected-gradient solve of the prox subproblem.

    The objective is 1-strongly convex with (1 + gamma*L_h)-Lipschitz gradient,
    so the fixed step 1/(1 + gamma*L_h) contracts.
    """
    w = np.asarray(w, dtype=float)
    step = 1.0 / (1.0 + gamma * h.smoothness)
    v = omega.project(w)
    for _ in range(max_iter):
        g = gamma * h.gradient(v) + (v - w)
        v_new = omega.project(v - step * g)
        if np.linalg.norm(v_new - v) <= tol * step * (1.0 + np.linalg.norm(v_new)):
            return v_new
        v = v_new
    raise InnerSolveFailed(f"prox inner solve hit the {max_iter} iteration cap")


def check_prox_inequalities(omega: FeasibleSet, h: HSpec, gamma: float, trials: int, seed: int,
                            dim: int | None = None, tol: float = 1e-9):
    """Sample the three projection inequalities and report the worst slack.

    (i) the obtuse-angle property is only meaningful for ``h = zero``; it is
    reported as ``None`` otherwise.
    """
    from .core import AuditReport, make_rng

    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = dim or omega.dim
    if n is None:
        raise ValueError("dimension required for whole-space audits")
    rng = make_rng(seed)
    spread = 2.0 * (1.0 + _extent(omega))
    anchor = _anchor(omega, n)
    W = anchor + spread * rng.standard_normal((trials, n))
    V = anchor + spread * rng.standard_normal((trials, n))
    U = omega.sample(rng, trials, n, scale=spread)
    obtuse = [] if h.variant == "zero" else None
    nonexp, charac = [], []
    for w, v, u in zip(W, V, U):
        pw, pv = prox(omega, h, gamma, w), prox(omega, h, gamma, v)
        if obtuse is not None:
            obtuse.append(float((w - pw) @ (pw - u)))
        nonexp.append(float(np.linalg.norm(w - v) - np.linalg.norm(pw - pv)))
        charac.append(float((pw - w) @ (u - pw) + gamma * h(u) - gamma * h(pw)))
    worst = {
        "obtuse_angle": None if obtuse is None else min(obtuse),
        "nonexpansive": min(nonexp),
        "characterization": min(charac),
    }
    return AuditReport("prox", worst, tol, trials)


def _extent(omega: FeasibleSet) -> float:
    if omega.variant == "box":
        return float(np.max(np.abs(np.concatenate([omega.lo, omega.hi]))))
    if omega.variant == "ball":
        return float(np.max(np.abs(omega.center)) + omega.radius)
    return 1.0


def _anchor(omega: FeasibleSet, n: int) -> np.ndarray:
    if omega.variant == "box":
        return 0.5 * (omega.lo + omega.hi)
    if omega.variant == "ball":
        return np.array(omega.center)
    return np.zeros(n)
