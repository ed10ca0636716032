"""gimvi-dyn {validate|solve|compare|tune|audit} --config <path> [--seed N] [--dt X] [--horizon T] [--out DIR]

Exit codes: 0 success, 1 bad config, 2 invalid instance, 3 divergence,
4 empty guaranteed region, 5 audit violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .analysis import (TheoremMode, Verdict, fit_exponential_rate, fit_linear_rate, noise_floor,
                       reference_solution, verify_theorem)
from .core import (InstanceRecipe, ProblemInstance, build_instance, canonical_recipe, compute_c,
                   compute_c1, constants_audit, gamma_bar, instance_checks, load_instance, make_rng)
from .discrete import check_difference_identities, run_scheme
from .dynamics import (DEFAULT_DT, DEFAULT_HORIZON, DynParams, integrate_first_order_baseline,
                       integrate_second_order_baseline, integrate_third_order, lemma_audit,
                       residual_lipschitz_audit, stable_step)
from .errors import (DegenerateData, Diverged, EmptyRegion, GimviError, NegativeDiscriminant,
                     StepDiverged)
from .params import (check_thm32, check_thm42, compute_delta, continuous_pack, discrete_pack,
                     max_feasible_eps, max_feasible_xi, synth_common, synth_cor35, synth_cor43,
                     synth_eps2, synth_thm36)
from .prox import FeasibleSet, HSpec, check_prox_inequalities

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_DIVERGED, EXIT_EMPTY, EXIT_AUDIT = 0, 1, 2, 3, 4, 5

MODES = ("continuous-3rd", "continuous-2nd", "continuous-1st", "discrete")
SOURCES = ("explicit", "cor35", "thm36", "eps2", "cor43")
CONTINUOUS_SOURCES = ("explicit", "cor35", "thm36", "eps2")
DISCRETE_SOURCES = ("explicit", "cor43")
DEFAULT_SYSTEMS = (
    {"order": 1, "rho": 1.0},
    {"order": 2, "kappa": 2.0, "rho": 1.0},
    {"order": 3, "a2": 6.0, "a1": 12.0, "a0": 8.0},
)
RECIPE_KEYS = {f.name for f in fields(InstanceRecipe)} - {"omega", "h", "gamma_grid"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    instance: object = "canonical"
    mode: str = "continuous-3rd"
    params: dict = field(default_factory=lambda: {"source": "cor35"})
    eps: float | None = None
    xi: float | None = None
    horizon: float | None = None
    dt: float | None = None
    max_iter: int = 20_000
    tol: float = 1e-10
    ref_tol: float = 1e-12
    seed: int = 0
    trials: int = 1000
    out: str = "gimvi-out"
    init: list | None = None
    systems: list | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        src = self.source
        if src not in SOURCES:
            raise ConfigError(f"params source must be one of {SOURCES}, got {src!r}")
        coeffs = {"a0", "a1", "a2"} & set(self.params)
        if src != "explicit" and coeffs:
            raise ConfigError("give either a params source or explicit coefficients, not both")
        if self.mode == "discrete" and src not in DISCRETE_SOURCES:
            raise ConfigError(f"source {src!r} is not a discrete-time source")
        if self.mode.startswith("continuous") and src not in CONTINUOUS_SOURCES:
            raise ConfigError(f"source {src!r} is not a continuous-time source")
        if self.mode in ("continuous-1st", "continuous-2nd") and src != "explicit":
            raise ConfigError("baseline modes take explicit rho/kappa")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.xi is not None and not 0 < self.xi < 1:
            raise ConfigError("xi must lie in (0, 1)")

    @property
    def source(self) -> str:
        return self.params.get("source", "explicit")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d, base_dir=base_dir or Path.cwd())


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a table/object")
    return RunConfig.from_dict(data, path.parent)


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {k: getattr(args, k) for k in ("seed", "dt", "horizon", "out")
               if getattr(args, k) is not None}
    return replace(cfg, **changes)


# --- instance plumbing --------------------------------------------------------

def resolve_instance(cfg: RunConfig) -> ProblemInstance:
    spec = cfg.instance
    if spec == "canonical":
        return build_instance(1, 0, canonical_recipe())
    if isinstance(spec, str):
        spec = {"path": spec}
    if not isinstance(spec, dict):
        raise ConfigError("instance must be 'canonical', a path, or a table")
    if "path" in spec:
        p = Path(spec["path"])
        return load_instance(p if p.is_absolute() else cfg.base_dir / p)
    if "recipe" in spec:
        r = dict(spec["recipe"])
        dim = int(r.pop("dim", 1 if r.get("family") == "scaled-identity" else 10))
        seed = int(r.pop("seed", cfg.seed))
        omega = r.pop("omega", None)
        h = r.pop("h", None)
        bad = set(r) - RECIPE_KEYS
        if bad:
            raise ConfigError(f"unknown recipe keys: {sorted(bad)}")
        recipe = InstanceRecipe(**r, omega=FeasibleSet.from_dict(omega) if omega else None,
                                h=HSpec.from_dict(h) if h else HSpec.zero())
        return build_instance(dim, seed, recipe)
    raise ConfigError("instance table needs 'path' or 'recipe'")


def _certified(inst: ProblemInstance) -> tuple[bool, list]:
    checks = instance_checks(inst)
    return all(ch.passed for ch in checks), checks


def _initial_point(inst: ProblemInstance, cfg: RunConfig, w_star) -> np.ndarray:
    if cfg.init is not None:
        w0 = np.asarray(cfg.init, dtype=float).reshape(-1)
        if w0.shape != (inst.dim,):
            raise ConfigError(f"init must have {inst.dim} entries")
        return w0
    return w_star + make_rng(cfg.seed).standard_normal(inst.dim)


def _dump(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        path.write_text(text + "\n")
    return text


def _float(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


# --- commands -----------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    inst = resolve_instance(cfg)
    ok, checks = _certified(inst)
    c = compute_c(inst)
    report = {"certified": ok, "c": c, "checks": [ch.to_dict() for ch in checks],
              "constants": inst.constants.to_dict(), "gamma": inst.gamma}
    if c > 0:
        c1 = compute_c1(inst)
        report.update(c1=c1, delta=compute_delta(c, c1))
    else:
        report.update(c1=None, delta=None)
    try:
        gb = gamma_bar(inst)
        report["gamma_bar"] = {"stated_formula": _float(gb.stated_formula), "quadratic_root": gb.quadratic_root}
    except (ValueError, NegativeDiscriminant) as exc:
        report["gamma_bar"] = {"stated_formula": None, "quadratic_root": None, "reason": str(exc)}
    print(_dump(report))
    return EXIT_OK if ok else EXIT_INVALID


def _synthesize(cfg: RunConfig, c: float, c1: float) -> DynParams:
    src = cfg.source
    if src == "explicit":
        try:
            return DynParams(cfg.params["a0"], cfg.params["a1"], cfg.params["a2"])
        except KeyError as exc:
            raise ConfigError(f"explicit params need {exc.args[0]}") from None
    if src == "cor35":
        return synth_cor35(c1, cfg.seed, c=c)
    if src == "thm36":
        return synth_thm36(c, c1, cfg.seed).params
    if src == "eps2":
        return synth_eps2(c, c1, cfg.seed).params
    return synth_cor43(c1, cfg.seed, c=c)


def _theorem_mode(cfg: RunConfig, c, c1, p: DynParams) -> TheoremMode | None:
    if cfg.mode == "discrete":
        xi = cfg.xi if cfg.xi is not None else max_feasible_xi(
            discrete_pack(c1, p.a0, p.a1, p.a2), c, c1, p)
        return TheoremMode.thm42(xi) if xi > 0 else None
    eps = {"thm36": 1.0, "eps2": 2.0}.get(cfg.source, cfg.eps)
    if cfg.eps is not None:
        eps = cfg.eps
    if eps is None:
        eps = max_feasible_eps(continuous_pack(c1, p.a0, p.a1, p.a2), c, c1, p)
    return TheoremMode.thm32(eps) if eps > 0 else None


def _fit_record(fit_fn, data, floor) -> dict:
    try:
        return fit_fn(data, floor=floor).to_dict()
    except DegenerateData as exc:
        return {"slope": -math.inf, "intercept": None, "r2": None, "window": None,
                "max_tail_ratio": None, "note": str(exc)}


def cmd_solve(cfg: RunConfig) -> int:
    inst = resolve_instance(cfg)
    ok, checks = _certified(inst)
    if not ok:
        print(_dump({"certified": False, "checks": [ch.to_dict() for ch in checks]}))
        return EXIT_INVALID
    c, c1 = compute_c(inst), compute_c1(inst)
    w_star = reference_solution(inst, cfg.ref_tol, seed=cfg.seed)
    w0 = _initial_point(inst, cfg, w_star)
    floor = noise_floor(inst, cfg.ref_tol, float(np.linalg.norm(w0 - w_star)))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    horizon = DEFAULT_HORIZON if cfg.horizon is None else cfg.horizon
    summary = {"mode": cfg.mode, "w_star": w_star.tolist()}
    verdict = None
    if cfg.mode == "continuous-1st":
        rho = float(cfg.params.get("rho", 1.0))
        dt = cfg.dt or DEFAULT_DT
        traj = integrate_first_order_baseline(inst, rho, w0, 0.0, horizon, dt, w_star=w_star)
        summary.update(params={"rho": rho}, dt=dt, fit=_fit_record(fit_exponential_rate, traj, floor))
        traj.to_csv(out / "trajectory.csv")
    elif cfg.mode == "continuous-2nd":
        kappa, rho = float(cfg.params.get("kappa", 2.0)), float(cfg.params.get("rho", 1.0))
        dt = cfg.dt or DEFAULT_DT
        traj = integrate_second_order_baseline(inst, kappa, rho, (w0, np.zeros_like(w0)), 0.0,
                                               horizon, dt, w_star=w_star)
        summary.update(params={"kappa": kappa, "rho": rho}, dt=dt,
                       fit=_fit_record(fit_exponential_rate, traj, floor))
        traj.to_csv(out / "trajectory.csv")
    elif cfg.mode == "continuous-3rd":
        p = _synthesize(cfg, c, c1)
        # an unset step is capped for stiff synthesized tuples; an explicit one is honoured
        dt = cfg.dt if cfg.dt is not None else min(DEFAULT_DT, stable_step(inst, p))
        traj = integrate_third_order(inst, p, (w0, np.zeros_like(w0), np.zeros_like(w0)), 0.0,
                                     horizon, dt, w_star=w_star, stop_below=floor)
        summary.update(params=p.to_dict(), dt=dt, fit=_fit_record(fit_exponential_rate, traj, floor))
        traj.to_csv(out / "trajectory.csv")
        mode = _theorem_mode(cfg, c, c1, p)
        verdict = (verify_theorem(inst, mode, p, horizon, dt=cfg.dt, w_star=w_star, ref_tol=cfg.ref_tol)
                   if mode else Verdict("thm32", p, 0.0))
    else:
        p = _synthesize(cfg, c, c1)
        hist = run_scheme(inst, p, w0=w0, max_iter=cfg.max_iter, tol=cfg.tol, w_star=w_star)
        summary.update(params=p.to_dict(), max_iter=cfg.max_iter,
                       fit=_fit_record(fit_linear_rate, hist, floor))
        hist.to_csv(out / "history.csv")
        mode = _theorem_mode(cfg, c, c1, p)
        verdict = (verify_theorem(inst, mode, p, cfg.max_iter, w_star=w_star, ref_tol=cfg.ref_tol)
                   if mode else Verdict("thm42", p, 0.0))
    _dump(summary, out / "fit.json")
    if verdict is not None:
        summary["verdict"] = verdict.verdict
        _dump(verdict.to_dict(), out / "verdict.json")
    print(_dump(summary))
    return EXIT_OK


def _system_name(spec: dict) -> str:
    return {1: "first_order", 2: "second_order", 3: "third_order"}[int(spec["order"])]


def cmd_compare(cfg: RunConfig) -> int:
    inst = resolve_instance(cfg)
    ok, checks = _certified(inst)
    if not ok:
        print(_dump({"certified": False, "checks": [ch.to_dict() for ch in checks]}))
        return EXIT_INVALID
    w_star = reference_solution(inst, cfg.ref_tol, seed=cfg.seed)
    w0 = _initial_point(inst, cfg, w_star)
    floor = noise_floor(inst, cfg.ref_tol, float(np.linalg.norm(w0 - w_star)))
    dt = cfg.dt or DEFAULT_DT
    horizon = DEFAULT_HORIZON if cfg.horizon is None else cfg.horizon
    zero = np.zeros_like(w0)
    names, columns, results = [], [], []
    for spec in cfg.systems or DEFAULT_SYSTEMS:
        order = int(spec.get("order", 0))
        if order == 1:
            traj = integrate_first_order_baseline(inst, spec["rho"], w0, 0.0, horizon, dt, w_star=w_star)
        elif order == 2:
            traj = integrate_second_order_baseline(inst, spec["kappa"], spec["rho"], (w0, zero), 0.0,
                                                   horizon, dt, w_star=w_star)
        elif order == 3:
            traj = integrate_third_order(inst, DynParams(spec["a0"], spec["a1"], spec["a2"]),
                                         (w0, zero, zero), 0.0, horizon, dt, w_star=w_star)
        else:
            raise ConfigError(f"system order must be 1, 2 or 3, got {spec.get('order')!r}")
        name = _system_name(spec)
        if name in names:
            name = f"{name}_{len(names)}"
        names.append(name)
        columns.append(traj.residual_norms)
        fit = _fit_record(fit_exponential_rate, traj, floor)
        results.append({"name": name, "params": {k: v for k, v in spec.items() if k != "order"},
                        "order": order, "slope": fit["slope"], "r2": fit["r2"]})
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"psi_norm_{n}" for n in names]) + "\n")
        for i, t in enumerate(traj.times):
            fh.write(",".join(repr(float(v)) for v in [t] + [col[i] for col in columns]) + "\n")
    summary = {"dt": dt, "horizon": horizon, "systems": results}
    _dump(summary, out / "compare.json")
    print(_dump(summary))
    return EXIT_OK


def _region_entry(name, params, report, scan_key, scan_value, extra=None) -> dict:
    entry = {"region": name, "params": params.to_dict(), "checker": report.to_dict(),
             scan_key: scan_value}
    if extra:
        entry.update(extra)
    return entry


def cmd_tune(cfg: RunConfig) -> int:
    inst = resolve_instance(cfg)
    ok, checks = _certified(inst)
    if not ok:
        print(_dump({"certified": False, "checks": [ch.to_dict() for ch in checks]}))
        return EXIT_INVALID
    c, c1 = compute_c(inst), compute_c1(inst)
    seed = cfg.seed
    entries, empty = [], []

    def cont(name, p, eps, extra=None):
        pack = continuous_pack(c1, p.a0, p.a1, p.a2)
        top = max_feasible_eps(pack, c, c1, p)
        e = eps if eps is not None else top
        if not e > 0:
            empty.append(name)
            return
        rep = check_thm32(pack, c, c1, p.a0, p.a1, p.a2, e)
        if not rep.verdict:
            empty.append(name)
        entries.append(_region_entry(name, p, rep, "max_feasible_eps", top, extra))

    def disc(name, p):
        pack = discrete_pack(c1, p.a0, p.a1, p.a2)
        top = max_feasible_xi(pack, c, c1, p)
        if not top > 0:
            empty.append(name)
            return
        rep = check_thm42(pack, c, c1, p.a0, p.a1, p.a2, top)
        if not rep.verdict:
            empty.append(name)
        entries.append(_region_entry(name, p, rep, "max_feasible_xi", top))

    draws = [
        ("cor35", lambda: cont("cor35", synth_cor35(c1, seed), None)),
        ("thm36", lambda: _drawn(cont, "thm36", synth_thm36(c, c1, seed))),
        ("eps2", lambda: _drawn(cont, "eps2", synth_eps2(c, c1, seed))),
        ("cor43", lambda: disc("cor43", synth_cor43(c1, seed))),
        ("common", lambda: _common(cont, disc, synth_common(c1, seed))),
    ]
    for name, draw in draws:
        try:
            draw()
        except EmptyRegion as exc:
            empty.append(name)
            entries.append({"region": name, "error": str(exc)})
    summary = {"c": c, "c1": c1, "delta": compute_delta(c, c1), "regions": entries, "empty": empty}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(summary, out / "tune.json")
    print(_dump(summary))
    return EXIT_EMPTY if empty else EXIT_OK


def _drawn(cont, name, draw):
    cont(name, draw.params, draw.eps, {"a1_interval": list(draw.a1_interval),
                                      "a0_interval": list(draw.a0_interval)})


def _common(cont, disc, p):
    cont("common-continuous", p, None)
    disc("common-discrete", p)


def cmd_audit(cfg: RunConfig) -> int:
    inst = resolve_instance(cfg)
    if not compute_c(inst) > 0:
        print(_dump({"error": "c ≤ 0; the residual estimates do not apply"}))
        return EXIT_INVALID
    n, seed = cfg.trials, cfg.seed
    w_star = reference_solution(inst, cfg.ref_tol, seed=seed)
    reports = [
        check_prox_inequalities(inst.omega, inst.h, inst.gamma, n, seed, dim=inst.dim),
        constants_audit(inst, n, seed),
        residual_lipschitz_audit(inst, n, seed),
        lemma_audit(inst, w_star, n, seed),
        check_difference_identities(seed, n),
    ]
    ok = all(r.ok for r in reports)
    summary = {"ok": ok, "audits": [r.to_dict() for r in reports]}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(summary, out / "audit.json")
    print(_dump(summary))
    return EXIT_OK if ok else EXIT_AUDIT


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "compare": cmd_compare,
            "tune": cmd_tune, "audit": cmd_audit}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gimvi-dyn", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON or TOML run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--horizon", type=float)
    ap.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, OSError, ValueError, TypeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepDiverged, Diverged) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except EmptyRegion as exc:
        print(f"empty region: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except GimviError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
