"""Command-line driver: certify, sweep, simulate, check, validate.

Every command that writes artifacts drops them into the directory named by
--output (current directory by default) together with a run manifest, so a
result can always be traced back to the exact inputs, seed, and tool version
that produced it.

Exit codes: 0 success, 1 input error, 2 infeasible problem or failed bracket,
3 certificate verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .certify import (
    CertificationRequest,
    ZenoCertificate,
    certify,
    check_certificate,
    load_certificate,
    save_certificate,
    sweep_degrees,
)
from .hybrid import check_zeno_equilibrium, cycle_order
from .hybrid import validate as validate_system
from .sdp import SolverConfig
from .simulate import ExecutionConfig, classify, simulate, write_csv, \
    write_phase_portrait
from .sysio import (
    RunManifest,
    SystemFormatError,
    fingerprint_system,
    system_from_dict,
    write_manifest,
)

log = logging.getLogger("zenocert.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY = 3

_BUNDLED_DIR = Path(__file__).parent / "systems"


def _load_json(spec: str) -> tuple[dict, Path]:
    path = Path(spec)
    if not path.exists() and not spec.endswith(".json"):
        cand = _BUNDLED_DIR / f"{spec}.json"
        if cand.exists():
            path = cand
    if not path.exists():
        raise SystemFormatError(f"system file {spec!r} not found")
    try:
        return json.loads(path.read_text()), path
    except json.JSONDecodeError as exc:
        raise SystemFormatError(
            f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}"
        ) from exc


def _floats(text: str) -> tuple[float, ...]:
    if not text:
        return ()
    return tuple(float(v) for v in text.replace(",", " ").split())


def _solver_profile(name: str) -> SolverConfig:
    if name == "strict":
        return SolverConfig(feas_tol=1e-9, gap_tol=1e-9, max_iter=300)
    return SolverConfig()


def _check_budget(name: str) -> int:
    return 2000 if name == "strict" else 500


def _sim_tolerances(name: str) -> tuple[float, float]:
    if name == "strict":
        return 1e-11, 1e-14
    return 1e-9, 1e-12


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, command: str, input_hash: str, started: float) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    man = RunManifest.create(command, config, input_hash, args.seed, started)
    write_manifest(_outdir(args), man)


def _warn_jobs(args) -> None:
    if args.jobs != 1:
        log.warning("--jobs %d requested; this build runs batch work "
                    "sequentially", args.jobs)


# --------------------------------------------------------------------------
# commands


def cmd_certify(args) -> int:
    started = time.time()
    data, path = _load_json(args.system)
    system = system_from_dict(data, param_bound=args.param_bound,
                              default_name=path.stem)
    _warn_jobs(args)
    r_grid = _floats(args.r) if args.r else ()
    request = CertificationRequest(
        system, degree=args.degree, mode=args.certification_mode,
        rate_profile=args.rate_profile, r_grid=r_grid,
        param_dependent_v=args.param_dependent_v, seed=args.seed)
    result = certify(request, solver_config=_solver_profile(
        args.tolerance_profile), check_budget=_check_budget(
        args.tolerance_profile), check_seed=args.seed)
    outdir = _outdir(args)

    if isinstance(result, ZenoCertificate):
        dest = save_certificate(
            result, outdir / f"{system.name}-d{args.degree}.cert.json")
        print(f"VALID certificate for {system.name} at degree {args.degree}")
        print(f"  alpha = {result.alpha:.6g}, gamma = {result.gamma:.6g}, "
              f"rate = {result.rate_profile}")
        rtext = ", ".join(f"{q}: {v:.4g}" for q, v in sorted(result.r.items()))
        print(f"  contraction r = {{{rtext}}}")
        print(f"  wrote {dest}")
        _manifest(args, "certify", fingerprint_system(system), started)
        return EXIT_OK

    dest = outdir / f"{system.name}-d{args.degree}-failure.json"
    dest.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True)
                    + "\n")
    print(f"no certificate for {system.name} at degree {args.degree}: "
          f"{result.message}")
    for probe in result.probes:
        rtext = ", ".join(f"{q}: {v:.4g}"
                          for q, v in sorted(probe.r.items()))
        print(f"  r = {{{rtext}}}: {probe.status}"
              + (f" ({probe.message})" if probe.message else ""))
    print(f"  wrote {dest}")
    _manifest(args, "certify", fingerprint_system(system), started)
    return EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    started = time.time()
    data, path = _load_json(args.system)
    scalar = args.scalar or data.get("param_bound_constant", "C")
    if scalar not in data.get("constants", {}):
        print(f"error: swept constant {scalar!r} is not declared by "
              f"{path.name}", file=sys.stderr)
        return EXIT_INPUT
    degrees = [int(d) for d in args.degrees.replace(",", " ").split()]
    name = data.get("name", path.stem)
    _warn_jobs(args)

    def make_request(degree: int, value: float) -> CertificationRequest:
        system = system_from_dict(data, param_bound=value,
                                  default_name=path.stem)
        return CertificationRequest(
            system, degree=degree, mode=args.certification_mode,
            rate_profile=args.rate_profile, seed=args.seed)

    try:
        results = sweep_degrees(
            make_request, degrees, tuple(args.bracket), args.tolerance,
            scalar_name=scalar,
            solver_config=_solver_profile(args.tolerance_profile),
            check_budget=_check_budget(args.tolerance_profile))
    except ValueError as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    outdir = _outdir(args)
    csv_path = outdir / f"{name}-sweep.csv"
    with csv_path.open("w") as fh:
        fh.write("degree,bound,probes,certified,message\n")
        for res in results:
            bound = "" if res.bound is None else f"{res.bound:.6g}"
            msg = res.message.replace('"', "'")
            fh.write(f"{res.degree},{bound},{len(res.probes)},"
                     f"{str(res.ok).lower()},\"{msg}\"\n")
    json_path = outdir / f"{name}-sweep.json"
    json_path.write_text(json.dumps([r.to_dict() for r in results],
                                    indent=2, sort_keys=True) + "\n")

    print(f"{'degree':>7}  {'bound':>10}  {'probes':>6}  status")
    for res in results:
        bound = "-" if res.bound is None else f"{res.bound:.4f}"
        status = "certified" if res.ok else f"failed: {res.message}"
        print(f"{res.degree:>7}  {bound:>10}  {len(res.probes):>6}  {status}")
    print(f"wrote {csv_path} and {json_path}")
    _manifest(args, "sweep", fingerprint_system(
        system_from_dict(data, default_name=path.stem)), started)
    return EXIT_OK if all(r.ok for r in results) else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    started = time.time()
    data, path = _load_json(args.system)
    system = system_from_dict(data, default_name=path.stem)
    _warn_jobs(args)
    mode0 = args.mode if args.mode is not None else cycle_order(system)[0]
    rtol, atol = _sim_tolerances(args.tolerance_profile)
    config = ExecutionConfig(
        mode0=mode0, x0=_floats(args.x0), params=_floats(args.params),
        max_transitions=args.max_transitions, horizon=args.horizon,
        rtol=rtol, atol=atol)
    execution = simulate(system, config)
    diagnostics = classify(execution)

    outdir = _outdir(args)
    csv_path = write_csv(execution, outdir / f"{system.name}-trajectory.csv")
    wrote = [str(csv_path)]
    if system.registry.n_state == 2:
        svg_path = write_phase_portrait(
            execution, system, outdir / f"{system.name}-portrait.svg",
            title=system.name)
        wrote.append(str(svg_path))
    else:
        log.info("phase portrait skipped: state is not two-dimensional")
    summary = {
        "system": system.name,
        "config": {
            "mode0": mode0, "x0": list(config.x0),
            "params": list(config.params), "horizon": config.horizon,
            "max_transitions": config.max_transitions,
            "rtol": rtol, "atol": atol,
        },
        "termination": execution.termination,
        "transitions": execution.transitions,
        "total_time": execution.total_time,
        "max_reset_mismatch": execution.max_reset_mismatch,
        "diagnostics": diagnostics.to_dict(),
    }
    json_path = outdir / f"{system.name}-classification.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    wrote.append(str(json_path))

    print(f"{system.name}: mode {mode0}, x0 = {config.x0}, "
          f"params = {config.params}")
    print(f"  termination: {execution.termination} after "
          f"{execution.transitions} transition(s), t = "
          f"{execution.total_time:.6g}")
    line = f"  classification: {diagnostics.classification}"
    if diagnostics.notes:
        line += f" ({diagnostics.notes})"
    print(line)
    if diagnostics.zeno_time is not None:
        print(f"  accumulation time {diagnostics.zeno_time:.6g} "
              f"+/- {diagnostics.zeno_time_error:.2g}")
    print("  wrote " + ", ".join(wrote))
    _manifest(args, "simulate", fingerprint_system(system), started)
    return EXIT_OK


def cmd_check(args) -> int:
    started = time.time()
    certificate = load_certificate(args.certificate)
    data, path = _load_json(args.system)
    system = system_from_dict(data, default_name=path.stem)
    if fingerprint_system(system) != certificate.system_fingerprint:
        print(f"certificate was issued for {certificate.system_name} "
              f"(fingerprint {certificate.system_fingerprint[:12]}...), "
              f"not for this system", file=sys.stderr)
        return EXIT_INPUT

    report = check_certificate(
        system, certificate,
        sample_budget=2 * _check_budget(args.tolerance_profile),
        seed=args.seed)
    status = "PASSED" if report.valid else "FAILED"
    print(f"verification {status} for {system.name} "
          f"(degree {certificate.degree}, {certificate.rate_profile} rate)")
    for s in report.sampling:
        print(f"  {s['condition']} in {s['where']}: worst margin "
              f"{s['worst_margin']:.3e} over {s['points']} points")
    for problem in report.problems:
        print(f"  problem: {problem}")
    outdir = _outdir(args)
    dest = outdir / f"{system.name}-verification.json"
    dest.write_text(json.dumps(report.to_dict(), indent=2,
                               sort_keys=True) + "\n")
    print(f"  wrote {dest}")
    _manifest(args, "check", fingerprint_system(system), started)
    return EXIT_OK if report.valid else EXIT_VERIFY


def cmd_validate(args) -> int:
    data, path = _load_json(args.system)
    try:
        system = system_from_dict(data, default_name=path.stem)
    except SystemFormatError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = validate_system(system)
    if not report.ok:
        print(str(report), file=sys.stderr)
        return EXIT_INPUT
    order = cycle_order(system)
    anchors = {m.id: m.anchor for m in system.modes}
    eq = check_zeno_equilibrium(system, anchors)
    print(f"{system.name}: valid")
    print(f"  {len(system.modes)} mode(s), cycle order "
          + " -> ".join(str(q) for q in order))
    print(f"  state variables: {', '.join(system.registry.state_names)}")
    if system.registry.param_names:
        box = ", ".join(f"{n} in [{a:.4g}, {b:.4g}]" for n, (a, b) in
                        zip(system.registry.param_names,
                            system.parameter_set.box))
        print(f"  parameters: {box}")
    verdict = "consistent" if eq.is_zeno_equilibrium else "inconsistent"
    print(f"  anchor set is {verdict} with guards and resets")
    for q, ok in sorted(eq.field_nonzero.items()):
        if not ok:
            print(f"  note: the field of mode {q} vanishes at its anchor")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument wiring


def _add_global(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for sampling verification and batches")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker fan-out for batch operations")
    parser.add_argument("--tolerance-profile", choices=("strict", "default"),
                        default="default",
                        help="solver and integrator tolerance preset")
    parser.add_argument("--output", default=".",
                        help="directory for output artifacts")
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenocert",
        description="Certify and cross-validate Zeno stability of cyclic "
                    "polynomial hybrid systems.")
    parser.add_argument("--version", action="version",
                        version=f"zenocert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify",
                       help="search for a Lyapunov certificate")
    p.add_argument("system", help="system file or bundled name")
    p.add_argument("--degree", type=int, default=8,
                   help="polynomial degree of the per-mode functions")
    p.add_argument("--certification-mode", choices=("standard", "extended"),
                   default="standard", dest="certification_mode",
                   help="feasibility conditions to use")
    p.add_argument("--rate-profile",
                   choices=("quadratic", "quartic", "constant"),
                   default="quadratic", help="decrease-rate lower bound shape")
    p.add_argument("--r", default="",
                   help="comma-separated contraction values to probe")
    p.add_argument("--param-bound", type=float, default=None,
                   help="override the declared parameter bound constant")
    p.add_argument("--param-dependent-v", action="store_true",
                   help="let certificate coefficients depend on parameters")
    _add_global(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep",
                       help="bisect for the smallest certified parameter "
                            "bound, per degree")
    p.add_argument("system", help="system file or bundled name")
    p.add_argument("--degrees", default="8",
                   help="comma-separated degrees to sweep")
    p.add_argument("--bracket", type=float, nargs=2, required=True,
                   metavar=("LO", "HI"),
                   help="initial bracket on the swept constant")
    p.add_argument("--tolerance", type=float, default=0.05,
                   help="bracket width at which bisection stops")
    p.add_argument("--scalar", default=None,
                   help="name of the swept constant (default: the system's "
                        "declared bound constant)")
    p.add_argument("--certification-mode", choices=("standard", "extended"),
                   default="standard", dest="certification_mode")
    p.add_argument("--rate-profile",
                   choices=("quadratic", "quartic", "constant"),
                   default="quadratic")
    _add_global(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate",
                       help="integrate one execution and classify it")
    p.add_argument("system", help="system file or bundled name")
    p.add_argument("--x0", required=True,
                   help="comma-separated initial state")
    p.add_argument("--mode", type=int, default=None,
                   help="initial mode (default: first mode of the cycle)")
    p.add_argument("--params", default="",
                   help="comma-separated parameter values")
    p.add_argument("--horizon", type=float, default=120.0,
                   help="time horizon")
    p.add_argument("--max-transitions", type=int, default=200,
                   help="transition budget")
    _add_global(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check",
                       help="re-verify a certificate against a system")
    p.add_argument("certificate", help="certificate JSON file")
    p.add_argument("system", help="system file or bundled name")
    _add_global(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate",
                       help="parse and validate a system description")
    p.add_argument("system", help="system file or bundled name")
    _add_global(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False)
        else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SystemFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
