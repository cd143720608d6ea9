"""Command-line front end.

Subcommands: birkhoff, rotation, fish, jsr, morse, adapt, homoclinic,
props.  Each run writes a JSON document (to --out or stdout) with floats
printed at 17 significant digits, plus optional CSV tables and SVG plots;
identical configuration and seed give byte-identical outputs.  Exit codes:
0 success, 1 input/budget error, 2 a mathematical certificate failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, jsonio, props as props_mod
from .adapt import (
    ConditioningError,
    adapted_metric,
    default_domination_depths,
    one_step_domination_check,
    spectrum_for_inclusion,
    verify_inclusion,
    verify_oba,
)
from .birkhoff import (
    Observable,
    SubactionDivergenceError,
    beta_bracket,
    fit_subaction,
    maximizing_set,
)
from .budget import BudgetError
from .cocycle import (
    CertificateError,
    OneStepCocycle,
    domination_report,
    jsr_bracket,
    subradius_bracket,
)
from .rotation import (
    ConvexApprox,
    VectorObservable,
    fish_approx,
    homoclinic_sum,
    rotation_inner,
    rotation_outer,
    write_support_csv,
    write_vertices_csv,
)
from .svg import hull_cycle_order, project_trace_zero, render_svg
from .symdyn import SymbolicSystem, random_admissible_words

THETA_HULL_METHOD = "weyl-orbit-hull"  # sampled support of co(W_Theta . C)


class InputError(ValueError):
    """Bad configuration, missing file, or malformed document."""


@dataclass
class ExperimentConfig:
    """One CLI invocation, fully determined (with the seed) by its fields."""

    command: str
    system: str | None = None
    cocycle: str | None = None
    observable: str | None = None
    max_period: int = 8
    depth: int = 12
    k: int = 3
    directions: int = 64
    theta: str = "auto"
    seed: int = 0
    out: str | None = None
    svg: str | None = None
    csv: str | None = None
    window: int | None = None
    epsilon: float | None = None
    samples: int = 200
    tol: float = 1e-9
    deterministic: bool = False
    workers: int = 0  # 0: use all cores where a command parallelizes

    def effective_workers(self) -> int:
        if self.deterministic:
            return 1
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


# -- input loading ---------------------------------------------------------------


def _load_json_file(path: str) -> dict:
    if not os.path.exists(path):
        raise InputError(f"file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}")


def load_system(config: ExperimentConfig) -> SymbolicSystem | None:
    if config.system is None:
        return None
    try:
        return SymbolicSystem.from_json(_load_json_file(config.system))
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad system document: {exc}")


def load_cocycle(config: ExperimentConfig) -> OneStepCocycle:
    if config.cocycle is None:
        raise InputError("this command needs --cocycle FILE")
    try:
        return OneStepCocycle.from_json(_load_json_file(config.cocycle))
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad cocycle document: {exc}")


def load_observable(config: ExperimentConfig):
    """Scalar or vector observable from --observable NAME|FILE.

    Accepts a builtin name, a comma-separated list of builtin names (vector
    observable), or a JSON file holding either a window table
    {"word": value, ...} or {"components": [name-or-table, ...]}.
    """
    spec = config.observable
    if spec is None:
        raise InputError("this command needs --observable NAME|FILE")
    system = load_system(config)
    try:
        if os.path.exists(spec):
            doc = _load_json_file(spec)
            if "components" in doc:
                comps = tuple(
                    Observable.builtin(c, system) if isinstance(c, str)
                    else Observable.from_table(c, system)
                    for c in doc["components"])
                return VectorObservable(comps)
            return Observable.from_table(doc, system)
        if "," in spec:
            return VectorObservable(tuple(Observable.builtin(name.strip(), system)
                                          for name in spec.split(",")))
        return Observable.builtin(spec, system)
    except ValueError as exc:
        raise InputError(f"bad observable {spec!r}: {exc}")


# -- serialization helpers ---------------------------------------------------------


def _vec(v) -> list:
    return [float(x) for x in np.asarray(v).ravel()]


def _support_doc(support: dict) -> dict:
    return {"directions": [list(c) for c in support],
            "bounds": [float(b) for b in support.values()]}


def _approx_doc(approx: ConvexApprox) -> dict:
    vertices = []
    for i, (v, w) in enumerate(approx.inner_vertices):
        entry = {"point": _vec(v), "period": w.period, "word": str(w)}
        if approx.sturmian is not None:
            entry["sturmian"] = bool(approx.sturmian[i])
        vertices.append(entry)
    return {
        "inner_vertices": vertices,
        "outer": _support_doc(approx.outer_support),
        "depth": approx.depth,
        "hausdorff_gap": approx.hausdorff_gap,
    }


def _emit(config: ExperimentConfig, doc: dict) -> None:
    text = jsonio.dumps(doc)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _approx_svg(config: ExperimentConfig, approx: ConvexApprox, title: str) -> None:
    if not config.svg:
        return
    pts = np.array([v for v, _ in approx.inner_vertices])
    order = hull_cycle_order(pts)
    render_svg(pts, pts[order], config.svg, title=title)


# -- commands ----------------------------------------------------------------------


def _cmd_birkhoff(config: ExperimentConfig) -> tuple[dict, int]:
    f = load_observable(config)
    if isinstance(f, VectorObservable):
        raise InputError("birkhoff needs a scalar observable")
    bracket = beta_bracket(f, config.max_period, config.depth)
    alpha = beta_bracket(-f, config.max_period, config.depth)
    doc = {
        "command": "birkhoff",
        "observable": config.observable,
        "max_period": config.max_period,
        "depth": config.depth,
        "beta": {
            "lower": bracket.lower,
            "lower_witness": str(bracket.lower_witness),
            "upper": bracket.upper,
            "upper_depth": bracket.upper_depth,
            "width": bracket.width,
        },
        "alpha": {
            "lower": -alpha.upper,
            "upper": -alpha.lower,
            "upper_witness": str(alpha.lower_witness),
        },
    }
    status = 0
    if f.kind == "symbolic":
        window = config.window or f.window + 1
        try:
            table = fit_subaction(f, window, max_period=config.max_period,
                                  depth=config.depth)
            windows = sorted(maximizing_set(f, table, config.tol))
            doc["subaction"] = {
                "window": table.window,
                "beta_est": table.beta_est,
                "defect": table.defect,
                "certified_upper": table.certificate_upper_bound(),
                "maximizing_windows": ["".join(str(s) for s in w) for w in windows],
            }
        except SubactionDivergenceError as exc:
            doc["subaction"] = {"error": str(exc)}
            status = 2
    else:
        doc["subaction"] = None
    return doc, status


def _cmd_rotation(config: ExperimentConfig) -> tuple[dict, int]:
    f = load_observable(config)
    if isinstance(f, Observable):
        f = VectorObservable((f,))
    inner = rotation_inner(f, config.max_period)
    outer = rotation_outer(f, config.depth, config.directions)
    approx = ConvexApprox.build(inner, outer, config.depth)
    doc = {"command": "rotation", "observable": config.observable,
           "max_period": config.max_period, "directions": config.directions}
    doc.update(_approx_doc(approx))
    if config.csv:
        write_vertices_csv(approx, config.csv + ".vertices.csv")
        write_support_csv(approx, config.csv + ".directions.csv")
    if f.dimension == 2:
        _approx_svg(config, approx, "rotation set")
    return doc, 0


def _cmd_fish(config: ExperimentConfig) -> tuple[dict, int]:
    approx = fish_approx(config.max_period, config.depth, config.directions)
    doc = {"command": "fish", "max_period": config.max_period,
           "directions": config.directions}
    doc.update(_approx_doc(approx))
    doc["all_sturmian"] = bool(all(approx.sturmian))
    if config.csv:
        write_vertices_csv(approx, config.csv + ".vertices.csv")
        write_support_csv(approx, config.csv + ".directions.csv")
    _approx_svg(config, approx, "rotation set of the doubling map")
    return doc, 0


def _cmd_jsr(config: ExperimentConfig) -> tuple[dict, int]:
    F = load_cocycle(config)
    bracket = jsr_bracket(F, config.depth)
    sub = subradius_bracket(F, config.depth)
    doc = {
        "command": "jsr",
        "cocycle": config.cocycle,
        "depth": config.depth,
        "lower": bracket.lower,
        "upper": bracket.upper,
        "witness": str(bracket.witness),
        "width": bracket.upper - bracket.lower,
        "subradius": {
            "lower": sub.lower,
            "upper": sub.upper,
            "witness": str(sub.witness),
            "one_sided_reliable": sub.one_sided_reliable,
            "note": "the minimal growth rate need not be attained; "
                    "the upper side may not converge",
        },
    }
    return doc, 0


def _parse_theta(config: ExperimentConfig, dim: int, report):
    if config.theta == "auto":
        return report.theta, True
    text = config.theta.strip()
    indices = [int(t) for t in text.split(",") if t.strip()] if text else []
    from .matgeo import ThetaSet

    return ThetaSet.of(indices, dim), False


def _cmd_morse(config: ExperimentConfig) -> tuple[dict, int]:
    F = load_cocycle(config)
    depths = default_domination_depths(F.base)
    report = domination_report(F, depths)
    theta, auto = _parse_theta(config, F.dim, report)
    downgraded = False
    if auto:
        spectrum, downgraded = spectrum_for_inclusion(
            F, config.max_period, config.depth, theta, config.directions)
    else:
        from .cocycle import spectrum_approx

        spectrum = spectrum_approx(F, config.max_period, config.depth, theta,
                                   config.directions)
    doc = {
        "command": "morse",
        "cocycle": config.cocycle,
        "depth": config.depth,
        "max_period": config.max_period,
        "lplus": [{"vector": _vec(v.values), "period": w.period, "word": str(w)}
                  for v, w in spectrum.lplus_samples],
        "theta": spectrum.theta.sorted_indices(),
        "inner": _support_doc(spectrum.inner_support),
        "outer": _support_doc(spectrum.outer_support),
        "iplus": _support_doc(spectrum.iplus_support),
        "osym": _support_doc(spectrum.osym_support),
        "gap": spectrum.gap,
        "domination": {
            "depths": list(report.depths),
            "kappa": report.kappa,
            "rates": [[float(x) for x in row] for row in report.rates],
            "verdicts": list(report.verdicts),
        },
        "theta_downgraded": downgraded,
        "hull_method": THETA_HULL_METHOD,
    }
    if config.svg:
        pts = np.array([v.values for v, _ in spectrum.lplus_samples])
        if F.dim == 2:
            render_svg(pts, [], config.svg, title="periodic Lyapunov vectors")
        elif F.dim == 3:
            render_svg(project_trace_zero(pts), [], config.svg,
                       title="periodic Lyapunov vectors (trace-zero plane)")
    return doc, 0


def _cmd_adapt(config: ExperimentConfig) -> tuple[dict, int]:
    F = load_cocycle(config)
    rng = np.random.default_rng(config.seed)
    result = adapted_metric(F, config.k)
    run = result.cocycle
    need = result.N + run.window - 1 + 4
    sample = random_admissible_words(F.base, need, config.samples, rng)
    sampled_slack = verify_oba(run, result, sample)
    spectrum, downgraded = spectrum_for_inclusion(
        run, config.max_period, result.N, result.domination.theta,
        config.directions)
    probe = verify_inclusion(result, spectrum, 0.0)
    epsilon = config.epsilon if config.epsilon is not None \
        else max(probe.achieved_epsilon, 0.0)
    inclusion = verify_inclusion(result, spectrum, epsilon)
    gaps = {}
    for index in range(1, F.dim):
        if result.domination.verdict(index) == "dominated":
            gap, positive = one_step_domination_check(result, index)
            gaps[str(index)] = {"min_gap": gap, "positive": positive}
    sigma = result.sigma1_G
    doc = {
        "command": "adapt",
        "cocycle": config.cocycle,
        "k": result.k,
        "N": result.N,
        "window": result.G.window,
        "notes": list(result.notes),
        "oba_worst_slack": result.oba_slack,
        "oba_sampled_slack": sampled_slack,
        "inclusion": {
            "epsilon": inclusion.epsilon,
            "achieved_epsilon": inclusion.achieved_epsilon,
            "pass": inclusion.passed,
            "theta": spectrum.theta.sorted_indices(),
            "theta_downgraded": downgraded,
        },
        "one_step_gaps": gaps,
        "domination_verdicts": list(result.domination.verdicts),
        "hull_method": THETA_HULL_METHOD,
    }
    if sigma.shape[0] <= 4096:
        doc["sigma1_G"] = [[float(x) for x in row] for row in sigma]
    else:
        doc["sigma1_G"] = {
            "count": int(sigma.shape[0]),
            "truncated": True,
            "coordinate_min": _vec(sigma.min(axis=0)),
            "coordinate_max": _vec(sigma.max(axis=0)),
        }
    status = 0 if inclusion.passed else 2
    return doc, status


def _cmd_homoclinic(config: ExperimentConfig) -> tuple[dict, int]:
    result = homoclinic_sum(config.depth)
    doc = {
        "command": "homoclinic",
        "n_max": result.n_max,
        "partial_sum": {"re": result.partial_sum.real,
                        "im": result.partial_sum.imag},
        "tail_bound": result.tail_bound,
        "nonzero_certified": result.nonzero,
    }
    return doc, 0 if result.nonzero else 2


def _suite_job(args):
    name, fn_index, seed = args
    fn = props_mod.SUITES[fn_index][1]
    results = fn(seed)
    return {"name": name, "seed": seed,
            "passed": all(r.passed for r in results),
            "properties": [r.as_dict() for r in results]}


def _cmd_props(config: ExperimentConfig) -> tuple[dict, int]:
    workers = config.effective_workers()
    children = np.random.SeedSequence(config.seed).spawn(len(props_mod.SUITES))
    jobs = [(name, i, int(child.generate_state(1)[0]))
            for i, ((name, _), child) in enumerate(zip(props_mod.SUITES, children))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            suites = list(pool.map(_suite_job, jobs))
    else:
        suites = [_suite_job(job) for job in jobs]
    doc = {"command": "props", "seed": config.seed,
           "all_passed": all(s["passed"] for s in suites), "suites": suites}
    return doc, 0 if doc["all_passed"] else 2


COMMANDS = {
    "birkhoff": _cmd_birkhoff,
    "rotation": _cmd_rotation,
    "fish": _cmd_fish,
    "jsr": _cmd_jsr,
    "morse": _cmd_morse,
    "adapt": _cmd_adapt,
    "homoclinic": _cmd_homoclinic,
    "props": _cmd_props,
}


def run(config: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit status."""
    if config.command not in COMMANDS:
        raise InputError(f"unknown command {config.command!r}")
    try:
        doc, status = COMMANDS[config.command](config)
    except (InputError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CertificateError, ConditioningError, SubactionDivergenceError) as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 2
    doc["seed"] = config.seed
    _emit(config, doc)
    if status == 2:
        print("certificate failure (see JSON report)", file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergopt",
        description="Ergodic optimization toolkit: Birkhoff averages, rotation "
                    "sets, spectral radius brackets, Lyapunov/Morse spectra and "
                    "adapted metrics over shift spaces.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **defaults):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--system", help="JSON subshift {alphabet, forbidden}")
        p.add_argument("--cocycle", help="JSON cocycle {dim, matrices, forbidden}")
        p.add_argument("--observable",
                       help="builtin name(s) or JSON table/components file")
        p.add_argument("--max-period", dest="max_period", type=int,
                       default=defaults.get("max_period", 8),
                       help="periodic-orbit search depth")
        p.add_argument("--depth", type=int, default=defaults.get("depth", 12),
                       help="envelope/product depth (homoclinic: partial-sum length)")
        p.add_argument("--k", type=int, default=3,
                       help="dyadic rounds of the adapted-metric recursion")
        p.add_argument("--directions", type=int, default=64,
                       help="support-function direction samples")
        p.add_argument("--theta", default="auto",
                       help="comma-separated gap indices, empty for none, or auto")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the JSON report here (default stdout)")
        p.add_argument("--svg", help="write an SVG plot here")
        p.add_argument("--csv", help="prefix for CSV tables")
        p.add_argument("--window", type=int, help="subaction window length")
        p.add_argument("--epsilon", type=float,
                       help="inclusion inflation (default: achieved value)")
        p.add_argument("--samples", type=int, default=200,
                       help="sampled words for certificate spot checks")
        p.add_argument("--tol", type=float, default=1e-9,
                       help="tolerance for maximizing-set membership")
        p.add_argument("--deterministic", action="store_true",
                       help="force sequential reduction order")
        p.add_argument("--workers", type=int, default=0,
                       help="worker processes for property suites "
                            "(other commands are vectorized); 0 = all cores")
        return p

    add("birkhoff", "bracket the maximal ergodic average of an observable")
    add("rotation", "inner/outer approximation of a rotation set")
    add("fish", "the rotation set of the circle inclusion under doubling")
    add("jsr", "joint spectral radius and subradius brackets")
    add("morse", "domination report and Lyapunov/Morse spectrum supports")
    add("adapt", "adapted metric: conjugate one-step data into a spectrum "
                 "neighborhood")
    add("homoclinic", "homoclinic partial sum certificate", depth=30)
    add("props", "run every seeded property suite")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        command=args.command,
        system=args.system,
        cocycle=args.cocycle,
        observable=args.observable,
        max_period=args.max_period,
        depth=args.depth,
        k=args.k,
        directions=args.directions,
        theta=args.theta,
        seed=args.seed,
        out=args.out,
        svg=args.svg,
        csv=args.csv,
        window=args.window,
        epsilon=args.epsilon,
        samples=args.samples,
        tol=args.tol,
        deterministic=args.deterministic,
        workers=args.workers,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
