"""Problem instances of the generalized inverse mixed variational inequality.

Find w* with F(w*) in Omega and
    <g(w*), v - F(w*)> + h(v) - h(F(w*)) >= 0   for all v in Omega,
with F, g affine on R^n. Constants are computed exactly from spectra.

Randomness uses numpy's PCG64 bit generator seeded with the caller's integer,
so a (recipe, dim, seed) triple always yields the same instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import NegativeDiscriminant, NonPositiveC, RecipeInfeasible
from .prox import FeasibleSet, HSpec

CONSTANT_SLACK = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class TripleVec:
    """State (w, w', w'') of the third-order system."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray

    def __post_init__(self):
        parts = [np.array(v, dtype=float).reshape(-1) for v in (self.v1, self.v2, self.v3)]
        if len({p.size for p in parts}) != 1:
            raise ValueError("TripleVec components must share one dimension")
        for name, p in zip(("v1", "v2", "v3"), parts):
            p.setflags(write=False)
            object.__setattr__(self, name, p)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "TripleVec":
        return cls(a[0], a[1], a[2])

    @classmethod
    def at_rest(cls, w) -> "TripleVec":
        w = np.asarray(w, dtype=float)
        return cls(w, np.zeros_like(w), np.zeros_like(w))

    def as_array(self) -> np.ndarray:
        return np.stack([self.v1, self.v2, self.v3])

    def norm(self) -> float:
        return float(np.sqrt(self.v1 @ self.v1 + self.v2 @ self.v2 + self.v3 @ self.v3))


@dataclass(frozen=True)
class AffineOp:
    """w -> M w + b."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float, ndmin=2)
        b = np.array(self.offset, dtype=float).reshape(-1)
        if M.shape != (b.size, b.size):
            raise ValueError(f"matrix shape {M.shape} does not match offset of size {b.size}")
        M.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", b)

    def __call__(self, w):
        return self.matrix @ w + self.offset

    @property
    def dim(self) -> int:
        return self.offset.size


@dataclass(frozen=True)
class InstanceConstants:
    eta: float
    beta: float
    lam: float
    zeta: float

    def to_dict(self) -> dict:
        return {"eta": self.eta, "beta": self.beta, "lambda": self.lam, "zeta": self.zeta}

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceConstants":
        return cls(float(d["eta"]), float(d["beta"]), float(d["lambda"]), float(d["zeta"]))


@dataclass(frozen=True)
class ProblemInstance:
    """GIMVI data plus its certified constants.

    ``certified`` is False when F or g are arbitrary callables; their
    constants are then trusted as supplied.
    """

    F: AffineOp | Callable
    g: AffineOp | Callable
    omega: FeasibleSet
    h: HSpec
    gamma: float
    constants: InstanceConstants
    dim: int
    certified: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.omega.dim not in (None, self.dim):
            raise ValueError("omega dimension does not match the instance")

    def with_constants(self, **changes) -> "ProblemInstance":
        from dataclasses import replace

        return replace(self, constants=replace(self.constants, **changes))

    def with_gamma(self, gamma: float) -> "ProblemInstance":
        from dataclasses import replace

        return replace(self, gamma=float(gamma))

    def to_dict(self) -> dict:
        if not (isinstance(self.F, AffineOp) and isinstance(self.g, AffineOp)):
            raise ValueError("only affine instances serialize")
        return {
            "dim": self.dim,
            "M": self.F.matrix.tolist(),
            "b": self.F.offset.tolist(),
            "G": self.g.matrix.tolist(),
            "d": self.g.offset.tolist(),
            "omega": self.omega.to_dict(),
            "h": self.h.to_dict(),
            "gamma": self.gamma,
            "constants": self.constants.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        F = AffineOp(d["M"], d["b"])
        g = AffineOp(d["G"], d["d"])
        if "constants" in d and d["constants"] is not None:
            consts = InstanceConstants.from_dict(d["constants"])
        else:
            consts = spectral_constants(F.matrix, g.matrix)
        return cls(F, g, FeasibleSet.from_dict(d["omega"]), HSpec.from_dict(d["h"]),
                   float(d["gamma"]), consts, int(d["dim"]))


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1))


def load_instance(path) -> ProblemInstance:
    return ProblemInstance.from_dict(json.loads(Path(path).read_text()))


def spectral_constants(M: np.ndarray, G: np.ndarray) -> InstanceConstants:
    """Exact constants of F = M w + b, g = G w + d.

    zeta is the smallest eigenvalue of sym(M^T G); it may come out <= 0, in
    which case the pair is not coupled-monotone.
    """
    sym = lambda A: 0.5 * (A + A.T)
    eta = float(np.linalg.norm(M, 2))
    beta = float(np.linalg.norm(G, 2))
    lam = float(np.linalg.eigvalsh(sym(M))[0])
    zeta = float(np.linalg.eigvalsh(sym(M.T @ G))[0])
    return InstanceConstants(eta, beta, lam, zeta)


# --- scalar calculus -------------------------------------------------------

def c_value(lam: float, zeta: float, eta: float, beta: float, gamma: float) -> float:
    return lam + gamma * zeta - eta**2 / 2 - gamma**2 * beta / 2 - 0.5


def compute_c(inst: ProblemInstance) -> float:
    k = inst.constants
    return c_value(k.lam, k.zeta, k.eta, k.beta, inst.gamma)


def residual_lipschitz(inst: ProblemInstance) -> float:
    k = inst.constants
    return 2 * k.eta + inst.gamma * k.beta


def compute_c1(inst: ProblemInstance) -> float:
    c = compute_c(inst)
    if c <= 0:
        raise NonPositiveC(f"c = {c} is not positive")
    return c / residual_lipschitz(inst) ** 2


class GammaBar(NamedTuple):
    stated_formula: float
    quadratic_root: float


def gamma_bar(inst: ProblemInstance) -> GammaBar:
    """Upper bound on the stepsize gamma.

    ``stated_formula`` evaluates (c + sqrt(c^2 + beta(2 lam - eta^2 - 1)))/beta
    with c taken at the instance's gamma; NaN when the root is imaginary.
    ``quadratic_root`` is the larger root of c(gamma) = 0, the operational bound.
    """
    k = inst.constants
    if k.beta <= 0:
        raise ValueError("gamma_bar needs beta > 0")
    tail = k.beta * (2 * k.lam - k.eta**2 - 1)
    c = compute_c(inst)
    disc_stated = c * c + tail
    stated = (c + math.sqrt(disc_stated)) / k.beta if disc_stated >= 0 else math.nan
    # c(gamma) = -beta/2 gamma^2 + zeta gamma + (lam - eta^2/2 - 1/2)
    disc = k.zeta**2 + tail
    if disc < 0:
        raise NegativeDiscriminant("c(gamma) is negative for every gamma")
    return GammaBar(stated, (k.zeta + math.sqrt(disc)) / k.beta)


# --- validation -------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "value": self.value, "reason": self.reason}


def instance_checks(inst: ProblemInstance) -> list[Check]:
    """Invariant checks; every one must pass for a certified instance."""
    k = inst.constants
    c = compute_c(inst)
    checks = [
        Check("zeta_positive", k.zeta > 0, k.zeta, "" if k.zeta > 0 else "zeta nonpositive"),
        Check("lambda_positive", k.lam > 0, k.lam, "" if k.lam > 0 else "lambda nonpositive"),
        Check("zeta_le_eta_beta", k.zeta <= k.eta * k.beta + CONSTANT_SLACK, k.eta * k.beta - k.zeta,
              "" if k.zeta <= k.eta * k.beta + CONSTANT_SLACK else "zeta exceeds eta*beta"),
        Check("lambda_le_eta", k.lam <= k.eta + CONSTANT_SLACK, k.eta - k.lam,
              "" if k.lam <= k.eta + CONSTANT_SLACK else "lambda exceeds eta"),
        Check("c_positive", c > 0, c, "" if c > 0 else "c ≤ 0"),
    ]
    if inst.certified and isinstance(inst.F, AffineOp) and isinstance(inst.g, AffineOp):
        exact = spectral_constants(inst.F.matrix, inst.g.matrix)
        tol = 1e-9 * (1 + exact.eta + exact.beta)
        sound = (k.eta >= exact.eta - tol and k.beta >= exact.beta - tol
                 and k.lam <= exact.lam + tol and k.zeta <= exact.zeta + tol)
        checks.append(Check("constants_match_spectra", sound, None,
                            "" if sound else "stored constants are not valid bounds"))
    return checks


# --- instance construction --------------------------------------------------

@dataclass(frozen=True)
class InstanceRecipe:
    """Named instance family.

    ``scaled-identity``: F = f_scale*I, g = g_scale*I.
    ``spd-affine``: F = M w + b with M = I + small symmetric + skew parts;
    g = G w + d with G a perturbed multiple of M rescaled to ||G|| = beta_target.
    beta_target <= 1 keeps c a valid lower bound in the
    residual estimates (it is derived with beta in place of beta^2).
    """

    family: str = "spd-affine"
    omega: FeasibleSet | None = None
    h: HSpec = field(default_factory=HSpec.zero)
    gamma: float | None = None
    gamma_grid: tuple = tuple(np.round(np.linspace(0.05, 2.0, 40), 12))
    f_scale: float = 1.0
    g_scale: float = 1.0
    sym_spread: float = 0.05
    skew: float = 0.3
    coupling_noise: float = 0.05
    beta_target: float = 0.9
    offset_scale: float = 1.0


def canonical_recipe() -> InstanceRecipe:
    return InstanceRecipe("scaled-identity", gamma=1.0)


def _unit_spectral(A: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(A, 2)
    return A / nrm if nrm > 0 else A


def build_instance(dim: int, seed: int, recipe: InstanceRecipe) -> ProblemInstance:
    """Build without certifying; see :func:`make_affine_instance`."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = make_rng(seed)
    n = dim
    if recipe.family == "scaled-identity":
        M = recipe.f_scale * np.eye(n)
        G = recipe.g_scale * np.eye(n)
        b = np.zeros(n)
        d = np.zeros(n)
    elif recipe.family == "spd-affine":
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        S = _unit_spectral(0.5 * (A + A.T))
        K = _unit_spectral(0.5 * (B - B.T))
        M = np.eye(n) + recipe.sym_spread * S + recipe.skew * K
        P = rng.standard_normal((n, n)) / math.sqrt(n)
        G = M + recipe.coupling_noise * P
        G = recipe.beta_target * G / np.linalg.norm(G, 2)
        b = recipe.offset_scale * rng.standard_normal(n)
        d = recipe.offset_scale * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown recipe family {recipe.family!r}")
    omega = recipe.omega or FeasibleSet.box(-np.ones(n), np.ones(n))
    consts = spectral_constants(M, G)
    if recipe.gamma is not None:
        gamma = float(recipe.gamma)
    else:
        cs = [c_value(consts.lam, consts.zeta, consts.eta, consts.beta, g) for g in recipe.gamma_grid]
        gamma = float(recipe.gamma_grid[int(np.argmax(cs))])
    return ProblemInstance(AffineOp(M, b), AffineOp(G, d), omega, recipe.h, gamma, consts, n)


def make_affine_instance(dim: int, seed: int, recipe: InstanceRecipe | None = None) -> ProblemInstance:
    recipe = recipe or InstanceRecipe()
    inst = build_instance(dim, seed, recipe)
    failed = [ch for ch in instance_checks(inst) if not ch.passed]
    if failed:
        raise RecipeInfeasible("; ".join(ch.reason for ch in failed))
    return inst


def canonical_instance() -> ProblemInstance:
    """F = g = id on R, Omega = [-1, 1], h = 0, gamma = 1 (c = 0.5)."""
    return make_affine_instance(1, 0, canonical_recipe())


def estimate_constants(inst: ProblemInstance, samples: int, seed: int) -> InstanceConstants:
    """Empirical constants from random pairs.

    Ratios are sampled, so Lipschitz estimates never exceed the true moduli
    and monotonicity estimates never fall below them.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    rng = make_rng(seed)
    n = inst.dim
    X = rng.standard_normal((samples, n))
    Y = X + rng.standard_normal((samples, n))
    eta = beta = 0.0
    lam = zeta = math.inf
    for x, y in zip(X, Y):
        u = x - y
        uu = float(u @ u)
        if uu == 0.0:
            continue
        dF = inst.F(x) - inst.F(y)
        dg = inst.g(x) - inst.g(y)
        eta = max(eta, math.sqrt(float(dF @ dF) / uu))
        beta = max(beta, math.sqrt(float(dg @ dg) / uu))
        lam = min(lam, float(dF @ u) / uu)
        zeta = min(zeta, float(dF @ dg) / uu)
    return InstanceConstants(eta, beta, lam, zeta)


@dataclass
class AuditReport:
    """Worst slack per sampled inequality; a slack below ``-tol`` is a violation.

    ``None`` marks an inequality that does not apply to the inputs.
    """

    name: str
    worst: dict
    tol: float
    trials: int
    log_only: dict = field(default_factory=dict)

    @property
    def violations(self) -> dict:
        return {k: v for k, v in self.worst.items() if v is not None and v < -self.tol}

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"name": self.name, "worst_slack": self.worst, "tol": self.tol,
                "trials": self.trials, "ok": self.ok, "log_only": self.log_only}


def constants_audit(inst: ProblemInstance, samples: int, seed: int, tol: float = 1e-9) -> AuditReport:
    """Sampled moduli against the stored constants.

    Slacks are eta - eta_hat, beta - beta_hat, lam_hat - lam and zeta_hat - zeta,
    so understated Lipschitz moduli or overstated monotonicity moduli go negative.
    """
    est = estimate_constants(inst, samples, seed)
    k = inst.constants
    worst = {"lipschitz_F": k.eta - est.eta, "lipschitz_g": k.beta - est.beta,
             "strong_monotone_F": est.lam - k.lam, "coupled_monotone": est.zeta - k.zeta}
    return AuditReport("constants", worst, tol, samples)
