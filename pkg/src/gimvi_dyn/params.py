"""Derived constant packs, theorem feasibility checkers and parameter synthesizers.

Continuous-time conditions are polynomial inequalities in the rate parameter
eps; discrete-time ones in xi, cross-checked in the variable l = 1/(1 - xi).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import make_rng
from .dynamics import DynParams
from .errors import EmptyRegion, InvalidXi

MARGIN = 0.05
SCAN_POINTS = 10_000
BISECTION_STEPS = 60
SCAN_FLOOR = 1e-12
ROUNDING = 1e-12


@dataclass(frozen=True)
class ContinuousPack:
    C2: float
    C1: float
    C0: float
    A1: float
    A0: float


@dataclass(frozen=True)
class DiscretePack:
    B2: float
    B1: float
    B0: float
    D1: float
    D0: float
    E0: float


def continuous_pack(c1: float, a0: float, a1: float, a2: float) -> ContinuousPack:
    r = c1 / a0
    return ContinuousPack(C2=r * a1, C1=r * a2 * a1 - 3, C0=r * a1**2 - 2 * a2,
                          A1=r * a2, A0=r * (a2**2 - 2 * a1))


def discrete_pack(c1: float, a0: float, a1: float, a2: float) -> DiscretePack:
    r = c1 / a0
    return DiscretePack(B2=r * a1 - 3, B1=r * a2 * a1 - 2 * a2 - 3, B0=r * a1**2 - 2 * a2 - a1,
                        D1=r * (a2 - 2 * a1) + 3, D0=r * (a2**2 - 2 * a1 - a2 * a1) + a2 + 3,
                        E0=r * (1 - a2 + a1) - 1)


def compute_delta(c: float, c1: float) -> float:
    return 1.0 / (c1**2 * c**2)


@dataclass
class Condition:
    name: str
    lhs: float
    slack: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        return self.slack > 0 if self.strict else self.slack >= 0

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "slack": self.slack, "pass": self.passed}


@dataclass
class FeasibilityReport:
    theorem: str
    value: float
    conditions: list
    alternate: list = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def disagreements(self) -> list:
        """Names whose pass flag differs between the two equivalent forms.

        A slack within rounding of zero (relative to the largest slack of its
        form) is on the boundary in both forms and is not counted.
        """
        def noise(conds):
            return ROUNDING * max(1.0, max(abs(c.slack) for c in conds))

        na, nb = noise(self.conditions), noise(self.alternate)
        return [a.name for a, b in zip(self.conditions, self.alternate)
                if a.passed != b.passed and abs(a.slack) > na and abs(b.slack) > nb]

    def to_dict(self) -> dict:
        d = {"theorem": self.theorem, "value": self.value,
             "conditions": [c.to_dict() for c in self.conditions], "verdict": self.verdict}
        if self.alternate:
            d["transformed"] = [c.to_dict() for c in self.alternate]
            d["disagreements"] = self.disagreements
        return d


THM32_NAMES = ("cubic_in_rate", "quadratic_C_pack", "cubic_derivative", "C_pack_slope",
               "A_pack_linear", "rate_below_half_a2")
THM42_NAMES = ("cubic_in_xi", "quadratic_B_pack", "cubic_derivative", "B_pack_slope",
               "D_pack_linear", "xi_below_third_a2")
THM42_L_NAMES = tuple("l_" + n for n in THM42_NAMES)


def thm32_slacks(pack: ContinuousPack, c, c1, a0, a1, a2, eps) -> np.ndarray:
    """Slacks of the six continuous conditions; broadcasts over ``eps``.

    The last row is strict (> 0), the others are >= 0.
    """
    e = np.asarray(eps, dtype=float)
    p = pack
    return np.array([
        -e**3 + a2 * e**2 - a1 * e + c1 * c**2 * a0,
        p.C2 * e**2 - p.C1 * e + p.C0,
        3 * e**2 - 2 * a2 * e + a1,
        -2 * p.C2 * e + p.C1,
        -p.A1 * e + p.A0,
        a2 - 2 * e,
    ])


def thm42_slacks(pack: DiscretePack, c, c1, a0, a1, a2, xi) -> np.ndarray:
    x = np.asarray(xi, dtype=float)
    p = pack
    return np.array([
        -x**3 + a2 * x**2 - a1 * x + c1 * c**2 * a0,
        p.B2 * x**2 - p.B1 * x + p.B0,
        3 * x**2 - 2 * a2 * x + a1,
        -2 * p.B2 * x + p.B1,
        -p.D1 * x + p.D0,
        a2 - 3 * x,
    ])


def thm42_l_slacks(pack: DiscretePack, c, c1, a0, a1, a2, xi) -> np.ndarray:
    """The same conditions rewritten in l = 1/(1 - xi); l^3 multiplies c1 c^2 a0."""
    l = 1.0 / (1.0 - np.asarray(xi, dtype=float))
    m = 1 - l
    p = pack
    K = c1 * c**2 * a0
    return np.array([
        K * l**3 + a1 * l**2 * m + (a2 * l + m) * m**2,
        p.B0 * l**2 + p.B1 * m * l + p.B2 * m**2,
        a1 * l**2 + 2 * a2 * l * m + 3 * m**2,
        p.B1 * l + 2 * p.B2 * m,
        p.D0 * l + p.D1 * m,
        l * a2 + 3 * m,
    ])


def _all_pass(slacks: np.ndarray) -> np.ndarray:
    return np.all(slacks[:-1] >= 0, axis=0) & (slacks[-1] > 0)


def _conditions(names, slacks, lhs_last) -> list:
    conds = [Condition(n, float(v), float(v)) for n, v in zip(names[:-1], slacks[:-1])]
    conds.append(Condition(names[-1], lhs_last, float(slacks[-1]), strict=True))
    return conds


def check_thm32(pack: ContinuousPack, c: float, c1: float, a0: float, a1: float, a2: float,
                eps: float) -> FeasibilityReport:
    if not eps > 0:
        raise ValueError("eps must be positive")
    s = thm32_slacks(pack, c, c1, a0, a1, a2, eps)
    return FeasibilityReport("thm32", eps, _conditions(THM32_NAMES, s, a2))


def check_thm42(pack: DiscretePack, c: float, c1: float, a0: float, a1: float, a2: float,
                xi: float) -> FeasibilityReport:
    """Conditions in xi plus the equivalent set in l = 1/(1 - xi)."""
    if not (0 < xi < 1):
        raise InvalidXi(f"xi must lie in (0, 1), got {xi}")
    s = thm42_slacks(pack, c, c1, a0, a1, a2, xi)
    t = thm42_l_slacks(pack, c, c1, a0, a1, a2, xi)
    l = 1.0 / (1.0 - xi)
    return FeasibilityReport("thm42", xi, _conditions(THM42_NAMES, s, a2),
                             _conditions(THM42_L_NAMES, t, l * a2))


def assumption41(c1: float, a0: float, a1: float, a2: float) -> dict:
    r = c1 / a0
    return {"E0_positive": r * (1 - a2 + a1) > 1, "D1_positive": r * (2 * a1 - a2) < 3,
            "B2_positive": r * a1 > 3}


# --- scans -------------------------------------------------------------------

def _scan_sup(mask_fn, point_fn, upper: float) -> float:
    """Supremum of the feasible part of (0, upper): grid scan, then bisection.

    The grid mixes log spacing (down to ``SCAN_FLOOR * upper``) with linear
    spacing, since feasibility often only holds very close to 0. Returns 0 if
    no grid point is feasible.
    """
    grid = upper * np.logspace(math.log10(SCAN_FLOOR), 0, SCAN_POINTS, endpoint=False)
    grid = np.union1d(grid, upper * np.linspace(0, 1, SCAN_POINTS, endpoint=False)[1:])
    ok = np.flatnonzero(mask_fn(grid))
    if ok.size == 0:
        return 0.0
    i = ok[-1]
    lo = grid[i]
    hi = grid[i + 1] if i + 1 < len(grid) else upper
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if point_fn(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def max_feasible_eps(pack: ContinuousPack, c: float, c1: float, params: DynParams) -> float:
    a0, a1, a2 = params.a0, params.a1, params.a2
    f = lambda e: _all_pass(thm32_slacks(pack, c, c1, a0, a1, a2, e))
    return _scan_sup(f, lambda e: bool(f(e)), a2 / 2)


def max_feasible_xi(pack: DiscretePack, c: float, c1: float, params: DynParams) -> float:
    a0, a1, a2 = params.a0, params.a1, params.a2
    f = lambda x: _all_pass(thm42_slacks(pack, c, c1, a0, a1, a2, x))
    return _scan_sup(f, lambda x: bool(f(x)), 1.0)


# --- synthesizers ----------------------------------------------------------

def _inside(rng, lo: float, hi: float) -> float:
    """Uniform draw from [lo, hi] shrunk by the safety margin on both sides."""
    if not lo < hi:
        raise EmptyRegion(f"empty interval ({lo}, {hi})")
    w = hi - lo
    return float(rng.uniform(lo + MARGIN * w, hi - MARGIN * w))


def _below(rng, hi: float) -> float:
    if not hi > 0:
        raise EmptyRegion(f"upper bound {hi} is not positive")
    return float(rng.uniform(0.5, 1 - MARGIN) * hi)


def _above(rng, lo: float) -> float:
    return float(rng.uniform(1 + MARGIN, 2.0) * lo)


def synth_cor35(c1: float, seed: int, *, c: float | None = None) -> DynParams:
    """a1 < a2^2/2 and a0 < c1 min{a1 a2/3, a1^2/(2 a2)}.

    When ``c`` is given the draw is also confirmed against the continuous
    checker for some eps in (0, a2/2).
    """
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    rng = make_rng(seed)
    a2 = float(rng.uniform(1.0, 2.0))
    a1 = _below(rng, a2**2 / 2)
    a0 = _below(rng, c1 * min(a1 * a2 / 3, a1**2 / (2 * a2)))
    params = DynParams(a0, a1, a2)
    if c is not None and max_feasible_eps(continuous_pack(c1, a0, a1, a2), c, c1, params) <= 0:
        raise EmptyRegion("no eps satisfies the continuous conditions")
    return params


@dataclass(frozen=True)
class RegionDraw:
    """Synthesized tuple plus the interval endpoints it was drawn from."""

    params: DynParams
    eps: float
    a1_interval: tuple
    a0_interval: tuple

    def __iter__(self):
        return iter((self.params, self.eps))

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "eps": self.eps,
                "a1_interval": list(self.a1_interval), "a0_interval": list(self.a0_interval)}


def synth_thm36(c: float, c1: float, seed: int) -> RegionDraw:
    """Draw from the eps = 1 region; unpacks as (params, 1.0)."""
    if not (c > 0 and c1 > 0):
        raise ValueError("c and c1 must be positive")
    rng = make_rng(seed)
    delta = compute_delta(c, c1)
    K = c1 * c**2
    a2 = _above(rng, max(3.0, 3 * delta + 2, 4 * delta))
    b_lo, b_hi = max(2 * a2 - 3, delta * (2 * a2 - 3)), 0.5 * a2 * (a2 - 1)
    a1 = _inside(rng, b_lo, b_hi)
    q_lo = (a1 - a2 + 1) / K
    p_hi = c1 * min(a1 * (a2 - 2) / 3, a1 * (a1 - a2 + 1) / (2 * a2 - 3))
    a0 = _inside(rng, q_lo, p_hi)
    return RegionDraw(DynParams(a0, a1, a2), 1.0, (b_lo, b_hi), (q_lo, p_hi))


def synth_eps2(c: float, c1: float, seed: int) -> RegionDraw:
    """Draw from the eps = 2 region; unpacks as (params, 2.0)."""
    if not (c > 0 and c1 > 0):
        raise ValueError("c and c1 must be positive")
    rng = make_rng(seed)
    delta = compute_delta(c, c1)
    K = c1 * c**2
    a2 = _above(rng, max(8 * delta, 6.0, 6 * delta + 4))
    b_lo, b_hi = max(4 * (a2 - 3), 4 * delta * (a2 - 3)), 0.5 * a2 * (a2 - 2)
    a1 = _inside(rng, b_lo, b_hi)
    q_lo = (2 / K) * (a1 - 2 * a2 + 4)
    p_hi = c1 * a1 * min((a1 - 2 * a2 + 4) / (2 * (a2 - 3)), (a2 - 4) / 3)
    a0 = _inside(rng, q_lo, p_hi)
    return RegionDraw(DynParams(a0, a1, a2), 2.0, (b_lo, b_hi), (q_lo, p_hi))


def synth_cor43(c1: float, seed: int, *, c: float | None = None) -> DynParams:
    """a2 < 2, max{0, a2 - 1} < a1 < a2^2/(a2 + 2), a0 < c1 min{a1^2/(a1 + 2 a2), 1 - a2 + a1}."""
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    rng = make_rng(seed)
    a2 = float(rng.uniform(0.5, 2.0 * (1 - MARGIN)))
    a1 = _inside(rng, max(0.0, a2 - 1), a2**2 / (a2 + 2))
    a0 = _below(rng, c1 * min(a1**2 / (a1 + 2 * a2), 1 - a2 + a1))
    if not all(assumption41(c1, a0, a1, a2).values()):
        raise EmptyRegion("draw violates the discrete-time coefficient assumption")
    params = DynParams(a0, a1, a2)
    if c is not None and max_feasible_xi(discrete_pack(c1, a0, a1, a2), c, c1, params) <= 0:
        raise EmptyRegion("no xi satisfies the discrete conditions")
    return params


def synth_common(c1: float, seed: int) -> DynParams:
    """a2 < 1, a1 < a2^2/(a2 + 2), a0 < c1 min{a1 a2/3, a1^2/(a1 + 2 a2)}: valid in both settings."""
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    rng = make_rng(seed)
    a2 = float(rng.uniform(0.5, 1 - MARGIN))
    a1 = _inside(rng, 0.0, a2**2 / (a2 + 2))
    a0 = _below(rng, c1 * min(a1 * a2 / 3, a1**2 / (a1 + 2 * a2)))
    return DynParams(a0, a1, a2)


def in_cor35_region(c1: float, p: DynParams) -> bool:
    return p.a1 < p.a2**2 / 2 and p.a0 < c1 * min(p.a1 * p.a2 / 3, p.a1**2 / (2 * p.a2))


def in_cor43_region(c1: float, p: DynParams) -> bool:
    return (p.a2 < 2 and max(0.0, p.a2 - 1) < p.a1 < p.a2**2 / (p.a2 + 2)
            and p.a0 < c1 * min(p.a1**2 / (p.a1 + 2 * p.a2), 1 - p.a2 + p.a1))


def in_common_region(c1: float, p: DynParams) -> bool:
    return (p.a2 < 1 and p.a1 < p.a2**2 / (p.a2 + 2)
            and p.a0 < c1 * min(p.a1 * p.a2 / 3, p.a1**2 / (p.a1 + 2 * p.a2)))


def pack_dict(pack) -> dict:
    return asdict(pack)
