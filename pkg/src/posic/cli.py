"""Command-line scenario runner.

    posic <check|bounds|simulate|locus|sweep> --scenario FILE [--out DIR] [--preset NAME]

A scenario is one JSON document. A preset supplies a complete scenario; a
scenario file given alongside a preset overrides it key by key.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, sim
from .builtins import BUILTINS, build
from .controllers import (
    AUTO,
    Antithetic,
    ClosedLoop,
    Disturbance,
    Exponential,
    Logistic,
    RegularizedTable,
    StandardIntegral,
)
from .errors import (
    AssumptionViolated,
    EquilibriumOutOfRange,
    InadmissibleDisturbance,
    NonMonotone,
    OutOfImage,
    PosicError,
    ScenarioError,
)
from .sysmodel import (
    LtiSystem,
    check_assumption1,
    is_metzler,
    positivity_violations,
    steady_state_map,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ASSUMPTION, EXIT_NUMERICAL, EXIT_SCENARIO = 0, 2, 3, 4
_ASSUMPTION_ERRORS = (AssumptionViolated, NonMonotone, InadmissibleDisturbance, EquilibriumOutOfRange, OutOfImage)

log = logging.getLogger("posic")

_LOG_ETA = {"logspace": [-2, 3, 41]}

_GENEXP = {"builtin": "gene_expression", "params": {"gamma1": 1.0, "gamma2": 1.0, "k2": 1.0}}


def _preset(system, controller, simulation, analysis_block):
    return {
        "schema_version": SCHEMA_VERSION,
        "system": system,
        "controller": controller,
        "simulation": simulation,
        "analysis": analysis_block,
    }


PRESETS = {
    "fig_genexp": _preset(
        _GENEXP,
        {"type": "antithetic", "k": 1 / 3, "k_eta": 10.0, "mu": 1.0},
        {"t_end": 50.0},
        {"mu_bar": 1.0, "beta": 1.0, "locus": {"k": 1 / 3, "eta_grid": _LOG_ETA},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
    "fig_stdint": _preset(
        _GENEXP,
        {"type": "antithetic", "k": 1 / 3, "k_eta": 1000.0, "mu": 1.0},
        {"t_end": 50.0, "compare_standard": True},
        {"mu_bar": 1.0, "beta": 1.0, "locus": {"k": 1 / 3, "eta_grid": _LOG_ETA},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
    "fig_bif": _preset(
        _GENEXP,
        {"type": "antithetic", "k": 1.0, "eta": 1.0, "mu": 1.0},
        {"t_end": 50.0},
        {"mu_bar": 1.0, "beta": 1.0, "k_grid": {"linspace": [0.05, 4.0, 80]},
         "eta_grid": {"logspace": [-2, 3, 60]}, "locus": {"k": 1.0, "eta_grid": _LOG_ETA}},
    ),
    "fig_rl1": _preset(
        _GENEXP,
        {"type": "antithetic", "k": 1.0, "eta": 1.0, "mu": 1.0},
        {"t_end": 50.0},
        {"mu_bar": 1.0, "beta": 1.0, "locus": {"k": 1.0, "eta_grid": {"logspace": [-2, 6, 161]}},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
    "fig_rl2": _preset(
        _GENEXP,
        {"type": "antithetic", "k": 2.5, "eta": 1.0, "mu": 1.0},
        {"t_end": 50.0},
        {"mu_bar": 1.0, "beta": 1.0, "locus": {"k": 2.5, "eta_grid": {"logspace": [-2, 6, 161]}},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
    "fig_sis": _preset(
        {"builtin": "sis", "params": {"beta": 1.0, "N": 100.0}},
        {"type": "antithetic", "k": 2.0, "k_eta": 13.0, "mu": 99.0},
        {"t_end": 50.0, "initial_state": [90.0, 0.0, 0.0]},
        {"mu_bar": 99.0, "beta": 1.0, "locus": {"k": 2.0, "eta_grid": _LOG_ETA},
         "k_grid": {"linspace": [0.1, 10.0, 20]}, "eta_grid": {"logspace": [-2, 2, 20]}},
    ),
    "fig_exp": _preset(
        _GENEXP,
        {"type": "exponential", "k": 1.0, "alpha": 1.0, "mu": 1.0},
        {"t_end": 100.0},
        {"mu_bar": 1.0, "beta": 1.0, "locus": {"k": 1.0, "eta_grid": _LOG_ETA},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
    "fig_logistic": _preset(
        _GENEXP,
        {"type": "logistic", "k": 1.0, "alpha": 1.0, "beta": 2.0, "mu": 1.0},
        {"t_end": 100.0},
        {"mu_bar": 1.0, "beta": 2.0, "locus": {"k": 1.0, "eta_grid": _LOG_ETA},
         "k_grid": {"linspace": [0.05, 4.0, 40]}, "eta_grid": _LOG_ETA},
    ),
}


# -- scenario parsing ------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_scenario(path=None, preset=None) -> dict:
    if path is None and preset is None:
        raise ScenarioError("either --scenario or --preset is required")
    scenario: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ScenarioError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
        scenario = copy.deepcopy(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        scenario = _merge(scenario, doc)
    return scenario


def build_system(spec: dict):
    if not isinstance(spec, dict):
        raise ScenarioError("'system' block is missing or not an object")
    inline = "A" in spec
    if inline == ("builtin" in spec):
        raise ScenarioError("system needs exactly one source: inline matrices or a builtin id")
    try:
        if inline:
            return LtiSystem(
                A=spec["A"], B=spec["B"], C=spec["C"], E=spec.get("E"), name=spec.get("name", "inline")
            )
        if spec["builtin"] not in BUILTINS:
            raise ScenarioError(f"unknown builtin {spec['builtin']!r}; known: {sorted(BUILTINS)}")
        return build(spec["builtin"], **spec.get("params", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad system block: {exc}") from None


def build_controller(spec: dict, mu_default: float = 1.0):
    if not isinstance(spec, dict):
        raise ScenarioError("'controller' block is missing or not an object")
    kind = spec.get("type", "antithetic")
    mu = float(spec.get("mu", mu_default))
    sign = spec.get("actuation_sign", AUTO)
    k = float(spec.get("k", 1.0))
    try:
        if kind == "antithetic":
            if "k_eta" in spec:
                return Antithetic.from_annihilation_rate(k, float(spec["k_eta"]), mu, actuation_sign=sign)
            return Antithetic(mu=mu, k=k, eta=float(spec.get("eta", 1.0)), actuation_sign=sign)
        if kind == "exponential":
            return Exponential(mu=mu, k=k, alpha=float(spec.get("alpha", 1.0)), actuation_sign=sign)
        if kind == "logistic":
            return Logistic(
                mu=mu, k=k, alpha=float(spec.get("alpha", 1.0)), beta=float(spec.get("beta", 1.0)),
                actuation_sign=sign,
            )
        if kind == "standard":
            return StandardIntegral(mu=mu, k=k, actuation_sign=sign)
        if kind == "regularized":
            return RegularizedTable(
                mu=mu, k=k, kind=spec.get("kind", "exponential"), params=dict(spec.get("params", {})),
                actuation_sign=sign,
            )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad controller block: {exc}") from None
    raise ScenarioError(f"unknown controller type {kind!r}")


def build_disturbance(spec) -> Disturbance:
    if not spec:
        return Disturbance()
    try:
        return Disturbance(d=float(spec.get("d", 0.0)), E=spec.get("E"), channel=spec.get("channel", "plant"))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad disturbance block: {exc}") from None


def parse_grid(spec) -> np.ndarray:
    """A grid is a list of numbers, ``{"linspace": [a, b, n]}`` or ``{"logspace": [e0, e1, n]}``."""
    if spec is None:
        raise ScenarioError("grid missing")
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, args), = spec.items()
        if kind in ("linspace", "logspace") and isinstance(args, list) and len(args) == 3:
            fn = np.linspace if kind == "linspace" else np.logspace
            return fn(float(args[0]), float(args[1]), int(args[2]))
    raise ScenarioError(f"cannot parse grid {spec!r}")


def build_sim_config(spec: dict) -> sim.SimConfig:
    spec = dict(spec or {})
    spec.pop("compare_standard", None)
    for key in ("disturbance_schedule", "reference_schedule"):
        if key in spec:
            spec[key] = tuple((float(t), float(v)) for t, v in spec[key])
    if "initial_state" in spec and spec["initial_state"] is not None:
        spec["initial_state"] = tuple(float(v) for v in spec["initial_state"])
    try:
        return sim.SimConfig(**spec)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad simulation block: {exc}") from None


# -- output helpers --------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return None
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])


# -- commands --------------------------------------------------------------------------


def _mu(scn: dict) -> float:
    ctrl = scn.get("controller") or {}
    return float(scn.get("analysis", {}).get("mu", ctrl.get("mu", 1.0)))


def cmd_check(scn: dict, out: Path) -> int:
    system = build_system(scn.get("system"))
    violations = []
    report = {"command": "check", "system": system.name, "notes": list(getattr(system, "notes", ()))}
    if isinstance(system, LtiSystem):
        metzler = is_metzler(system.A)
        nonneg = {m: bool(np.all(getattr(system, m) >= 0)) for m in ("B", "C", "E")}
        a1 = check_assumption1(system)
        report.update(
            linear=True,
            metzler=metzler,
            nonnegative_B=nonneg["B"],
            nonnegative_C=nonneg["C"],
            nonnegative_E=nonneg["E"],
            internally_positive=metzler and all(nonneg.values()),
            hurwitz=a1.hurwitz,
            dc_gain=a1.dc_gain,
            assumption1=a1.holds,
        )
        if not metzler:
            violations.append("A is not Metzler")
        for m, ok in nonneg.items():
            if not ok:
                violations.append(f"{m} has negative entries")
        if not a1.hurwitz:
            violations.append("A is not Hurwitz")
        if a1.dc_gain == 0:
            violations.append("zero DC gain")
    else:
        bad = positivity_violations(system)
        report.update(linear=False, declared_positive=system.positive, sampled_positivity_violations=len(bad))
        if bad:
            violations.append("sampled positivity violations")
        try:
            ssm = steady_state_map(system)
            report["steady_state_direction"] = ssm.direction
        except NonMonotone as exc:
            violations.append(f"steady-state map not monotone: {exc}")
    report["violations"] = violations
    report["passed"] = not violations
    write_json(out / "check.json", report)
    for v in violations:
        print(f"violation: {v}", file=sys.stderr)
    for n in report["notes"]:
        print(f"notice: {n}", file=sys.stderr)
    return EXIT_OK if not violations else EXIT_ASSUMPTION


def _analysis_plant(system, mu: float):
    """(LTI system with positive gain, sign label) used by the linear analyses."""
    if isinstance(system, LtiSystem):
        return system, "positive"
    return analysis.signed_linearization(system, mu)


def cmd_bounds(scn: dict, out: Path) -> int:
    system = build_system(scn.get("system"))
    block = scn.get("analysis", {})
    mu = _mu(scn)
    mu_bar = float(block.get("mu_bar", mu))
    beta = block.get("beta")
    lin, sign = _analysis_plant(system, mu)
    b = analysis.compute_bounds(lin, mu, mu_bar, None if beta is None else float(beta))
    kr = analysis.k_bar_inf(lin)
    ar = analysis.alpha_bar_inf(lin, mu)
    report = {
        "command": "bounds",
        "system": system.name,
        "sign": sign,
        "mu": mu,
        "mu_bar": mu_bar,
        "beta": beta,
        "k_bar_inf": b.k_bar_inf,
        "eta_bar_inf": b.eta_bar_inf,
        "alpha_bar_inf": b.alpha_bar_inf,
        "xi_bar_inf": b.xi_bar_inf,
        "crossing_frequencies": list(b.crossing_frequencies),
        "alpha_crossing_frequencies": list(b.alpha_crossing_frequencies),
        "spr": b.spr,
        "validated": {"k_bar_inf": kr.validated, "alpha_bar_inf": ar.validated},
        "notes": list(b.notes),
    }
    dist = scn.get("disturbance")
    if dist and isinstance(system, LtiSystem) and dist.get("channel", "plant") == "plant":
        d = float(dist.get("d", 0.0))
        E = dist.get("E")
        report["disturbance_admissible"] = analysis.disturbance_admissible(system, d, mu, E)
        if report["disturbance_admissible"]:
            report["alpha_bar_disturbed"] = analysis.alpha_bar_disturbed(system, mu, d, E)
    write_json(out / "bounds.json", report)
    return EXIT_OK


def cmd_simulate(scn: dict, out: Path) -> int:
    system = build_system(scn.get("system"))
    ctrl = build_controller(scn.get("controller"))
    cl = ClosedLoop(system, ctrl, build_disturbance(scn.get("disturbance")))
    sim_block = scn.get("simulation", {}) or {}
    cfg = build_sim_config(sim_block)
    compare = (
        sim_block.get("compare_standard")
        and isinstance(system, LtiSystem)
        and isinstance(cl.controller, Antithetic)
        and cl.controller.actuation_sign == "positive_gain"
        and cl.disturbance.d == 0
        and not cfg.disturbance_schedule
        and not cfg.reference_schedule
    )
    cmp = sim.compare_to_standard_integral(system, ctrl.k, ctrl.k_eta, ctrl.mu, cfg) if compare else None
    traj = cmp.antithetic if compare else sim.integrate(cl, cfg)
    sim.write_trajectory_csv(traj, out / "trajectory.csv")
    mu_final = cfg.reference_schedule[-1][1] if cfg.reference_schedule else ctrl.mu
    metrics = {"command": "simulate", "system": system.name, **sim.tracking_metrics(traj, mu_final)}
    metrics["final_output"] = float(traj.outputs[-1])
    metrics["n_samples"] = len(traj)
    metrics["negativity_events"] = len(traj.negativity_events())
    if compare:
        sim.write_trajectory_csv(cmp.standard, out / "trajectory_standard.csv")
        metrics["max_output_gap"] = cmp.max_output_gap
    write_json(out / "metrics.json", metrics)
    return EXIT_OK


def cmd_locus(scn: dict, out: Path) -> int:
    system = build_system(scn.get("system"))
    mu = _mu(scn)
    spec = scn.get("analysis", {}).get("locus", {})
    lin, _ = _analysis_plant(system, mu)
    if spec.get("mode", "eta") == "k":
        data = analysis.root_locus_gain(lin, float(spec.get("eta", 1.0)), parse_grid(spec.get("k_grid")), mu)
    else:
        data = analysis.root_locus(lin, float(spec.get("k", 1.0)), parse_grid(spec.get("eta_grid")), mu)
    rows = []
    for p, roots in zip(data.parameter_grid, data.branches):
        for b, r in enumerate(roots):
            rows.append((float(p), b, float(r.real), float(r.imag)))
    _write_csv(out / "locus.csv", ["param", "branch", "re", "im"], rows)
    write_json(
        out / "locus.json",
        {"command": "locus", "mode": data.mode, "asymptote_centroid": data.asymptote_centroid},
    )
    return EXIT_OK


def cmd_sweep(scn: dict, out: Path) -> int:
    system = build_system(scn.get("system"))
    block = scn.get("analysis", {})
    mu = _mu(scn)
    kg, eg = parse_grid(block.get("k_grid")), parse_grid(block.get("eta_grid"))
    res = analysis.bifurcation_sweep(system, kg, eg, mu, workers=block.get("workers"))
    rows = []
    for i, k in enumerate(res.k_grid):
        for j, eta in enumerate(res.eta_grid):
            v = res.verdicts[i][j]
            rows.append((float(k), float(eta), v.max_real_part, v.classification))
    _write_csv(out / "sweep.csv", ["k", "eta", "max_real_part", "classification"], rows)
    _write_csv(out / "sweep_boundary.csv", ["eta", "k"], [(float(e), float(k)) for e, k in res.boundary])
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "locus": cmd_locus,
    "sweep": cmd_sweep,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posic", description="Positive integral control scenario runner")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--out", help="output directory (default: scenario 'output_dir' or ./posic_out)")
    p.add_argument("--preset", help=f"built-in scenario: {', '.join(sorted(PRESETS))}")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        scn = load_scenario(args.scenario, args.preset)
        out = Path(args.out or scn.get("output_dir") or "posic_out")
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](scn, out)
    except ScenarioError as exc:
        print(f"error: bad scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except _ASSUMPTION_ERRORS as exc:
        print(f"error: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except PosicError as exc:
        print(f"error: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
