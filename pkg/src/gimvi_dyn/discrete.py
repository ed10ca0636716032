"""Explicit discretization: the three-term recursion with double momentum.

    w(k+3) = (3 - a2) w(k+2) + (2 a2 - a1 - 3) w(k+1) + (a1 + 1 - a2) w(k) - a0 Psi(w(k))
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import AuditReport, ProblemInstance, make_rng
from .dynamics import DIVERGENCE_LIMIT, DynParams, residual
from .errors import Diverged, LengthTooShort

DEFAULT_TOL = 1e-10


def forward_difference(z, p: int = 1) -> np.ndarray:
    """p-fold forward difference along the first axis."""
    z = np.asarray(z, dtype=float)
    if p < 1:
        raise ValueError("order must be >= 1")
    if len(z) <= p:
        raise LengthTooShort(f"need more than {p} terms, got {len(z)}")
    return np.diff(z, n=p, axis=0)


def step_scheme(inst: ProblemInstance, params: DynParams, w_k, w_k1, w_k2) -> np.ndarray:
    a0, a1, a2 = params.a0, params.a1, params.a2
    return ((3 - a2) * w_k2 + (2 * a2 - a1 - 3) * w_k1 + (a1 + 1 - a2) * w_k
            - a0 * residual(inst, w_k))


def step_double_momentum(inst: ProblemInstance, params: DynParams, w_k, w_k1, w_k2) -> np.ndarray:
    """Same update written as a forward-backward step with two momentum terms."""
    a0, a1, a2 = params.a0, params.a1, params.a2
    return (w_k2 + (2 - a2) * (w_k2 - w_k1) + (a2 - a1 - 1) * (w_k1 - w_k)
            - a0 * residual(inst, w_k))


@dataclass
class IterateHistory:
    """Iterates w(0..K) with x(k) = ||w(k) - w*||^2 and y_p(k) = ||Delta^p w(k)||^2.

    ``consistency[k]`` is the norm of the difference-equation residual at k.
    """

    iterates: np.ndarray
    residual_norms: np.ndarray
    distance_sq: np.ndarray | None
    difference_norms: dict
    consistency: np.ndarray

    def __len__(self):
        return len(self.iterates)

    @property
    def last_index(self) -> int:
        return len(self.iterates) - 1

    @property
    def distance(self) -> np.ndarray | None:
        return None if self.distance_sq is None else np.sqrt(self.distance_sq)

    def to_csv(self, path) -> None:
        K, n = self.iterates.shape
        x = self.distance_sq if self.distance_sq is not None else np.full(K, np.nan)
        ys = []
        for p in (1, 2, 3):
            y = np.full(K, np.nan)
            y[:len(self.difference_norms[p])] = self.difference_norms[p]
            ys.append(y)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k"] + [f"w[{i}]" for i in range(n)] + ["psi_norm", "x", "y1", "y2", "y3"])
            for k in range(K):
                row = [*self.iterates[k], self.residual_norms[k], x[k], ys[0][k], ys[1][k], ys[2][k]]
                wr.writerow([str(k)] + [repr(float(v)) for v in row])


def _difference_norms(W: np.ndarray) -> dict:
    out = {}
    for p in (1, 2, 3):
        if len(W) > p:
            D = forward_difference(W, p)
            out[p] = np.einsum("ij,ij->i", D, D)
        else:
            out[p] = np.empty(0)
    return out


def run_scheme(inst: ProblemInstance, params: DynParams, init=None, max_iter: int = 10_000,
               tol: float = DEFAULT_TOL, *, w0=None, w_star=None) -> IterateHistory:
    """Iterate until ||Psi(w(k))|| <= tol at the newest iterate or k reaches max_iter.

    ``init`` is (w(0), w(1), w(2)); passing ``w0`` alone gives the cold start
    w(0) = w(1) = w(2).
    """
    if max_iter < 3:
        raise ValueError("max_iter must be >= 3")
    if init is None:
        if w0 is None:
            raise ValueError("need init or w0")
        w0 = np.asarray(w0, dtype=float)
        init = (w0, w0, w0)
    W = [np.asarray(v, dtype=float).reshape(-1) for v in init]
    psi = [residual(inst, v) for v in W]
    k = 0
    while True:
        w_new = step_scheme(inst, params, W[k], W[k + 1], W[k + 2])
        nrm = np.linalg.norm(w_new)
        if not nrm <= DIVERGENCE_LIMIT:
            raise Diverged(f"iterate norm {nrm:.3g} exceeded {DIVERGENCE_LIMIT:g} at k={k + 3}", k + 3)
        W.append(w_new)
        psi.append(residual(inst, w_new))
        k += 1
        if np.linalg.norm(psi[-1]) <= tol or k + 2 >= max_iter:
            break
    W = np.array(W)
    P = np.array(psi)
    d1, d2, d3 = (forward_difference(W, p) for p in (1, 2, 3))
    m = len(d3)
    cons = d3 + params.a2 * d2[:m] + params.a1 * d1[:m] + params.a0 * P[:m]
    dist = None
    if w_star is not None:
        e = W - np.asarray(w_star, dtype=float)
        dist = np.einsum("ij,ij->i", e, e)
    return IterateHistory(W, np.linalg.norm(P, axis=1), dist, _difference_norms(W),
                          np.linalg.norm(cons, axis=1))


def check_difference_identities(seed: int, trials: int, length: int = 12, dim: int = 4,
                                theta: float = 0.5, tol: float = 1e-10) -> AuditReport:
    """Product rule, geometric weighting and squared-norm identities on random sequences.

    Slack is minus the relative violation, so nonnegative means exact.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng(seed)
    worst = {"product_rule": 0.0, "geometric_weight": 0.0, "squared_norm": 0.0}

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))

    for _ in range(trials):
        x, y, z = (rng.standard_normal((length, dim)) for _ in range(3))
        for name, v in difference_identity_gaps(x, y, z, theta).items():
            worst[name] = min(worst[name], -rel(*v))
    return AuditReport("difference_identities", worst, tol, trials)


def difference_identity_gaps(x, y, z, theta) -> dict:
    """(lhs, rhs) arrays for each identity, over the admissible k."""
    dy, dz, dx = (forward_difference(s) for s in (y, z, x))
    m = len(dy)
    inner = np.einsum("ij,ij->i", y, z)
    lhs1 = forward_difference(inner)
    rhs1 = (np.einsum("ij,ij->i", dy, dz) + np.einsum("ij,ij->i", dy, z[:m])
            + np.einsum("ij,ij->i", y[:m], dz))
    k = np.arange(len(z))[:, None]
    weighted = theta**k * z
    lhs2 = theta ** (k[:m] + 1) * dz
    rhs2 = forward_difference(weighted) + (1 - theta) * theta ** k[:m] * z[:m]
    sq = np.einsum("ij,ij->i", x, x)
    lhs3 = forward_difference(sq)
    rhs3 = np.einsum("ij,ij->i", dx, dx) + 2 * np.einsum("ij,ij->i", dx, x[:m])
    return {"product_rule": (lhs1, rhs1), "geometric_weight": (lhs2, rhs2), "squared_norm": (lhs3, rhs3)}
