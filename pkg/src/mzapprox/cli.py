"""Command-line interface.

Exit codes: 0 success, 1 a checked invariant or assertion failed, 2 bad input.
"""
import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from .approx import SolverOptions, least_lp_fit
from .coeffs import CoeffFunction, coeff_to_json, save_coeffs
from .errors import ConstructionError, ConvergenceError, DomainError, LayerError, ResourceError
from .experiments import ExperimentConfig, run_rates
from .manifold import ManifoldSpec, build_basis, sphere_degree, torus_degree, uniform_points
from .mz import (
    equispaced_torus_layer,
    frame_bounds,
    layer_to_json,
    load_layer,
    regularity_constant,
    separated_layer,
)
from .quadrature import ls_quadrature, rule_to_json
from .selftest import check_layer_file, selftest
from .spaces import random_smooth_function

EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT = 0, 1, 2


def _p_arg(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _degree(args, spec):
    given = [x is not None for x in (args.degree, args.ell, args.freq)]
    if sum(given) != 1:
        raise DomainError("give exactly one of --degree, --ell, --freq")
    if args.degree is not None:
        return float(args.degree)
    if args.ell is not None:
        if spec.kind != "sphere":
            raise DomainError("--ell applies to sphere2 only")
        return sphere_degree(args.ell)
    if spec.kind != "torus":
        raise DomainError("--freq applies to the torus only")
    return torus_degree(args.freq)


def _seed(args, default=0):
    return default if getattr(args, "seed", None) is None else int(args.seed)


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc})") from exc


def _load_layer(path):
    try:
        return load_layer(path)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc})") from exc
    except (KeyError, TypeError) as exc:
        raise DomainError(f"{path}: not a point-set file ({exc})") from exc


def cmd_basis(args):
    spec = ManifoldSpec.parse(args.manifold)
    n = _degree(args, spec)
    basis = build_basis(spec, n)
    rows = ["index,lambda,label"]
    for j in range(len(basis)):
        rows.append(f"{j},{float(basis.lambdas[j])!r},{basis.label(j)}")
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_mz_build(args):
    spec = ManifoldSpec.parse(args.manifold)
    n = _degree(args, spec)
    if args.family == "equispaced":
        if spec.kind != "torus":
            raise DomainError("equispaced layers exist on the torus only")
        layer = equispaced_torus_layer(spec.dim, n, args.oversampling)
    else:
        layer = separated_layer(spec, n, args.delta, seed=_seed(args))
    if args.certify:
        layer = layer.certified(frame_bounds(layer))
    _emit(json.dumps(layer_to_json(layer)) + "\n", args.out)
    print(f"layer: {len(layer)} points at degree n = {n!r}", file=sys.stderr)
    return EXIT_OK


def cmd_mz_verify(args):
    checks = check_layer_file(args.file)
    if not checks[0].passed:
        raise DomainError(checks[0].message)
    for c in checks:
        print(c.line())
    if not all(c.passed for c in checks):
        return EXIT_FAIL
    layer = _load_layer(args.file)
    p = args.p
    method = args.method or ("exact2" if p == 2.0 else "randomized")
    try:
        cert = frame_bounds(layer, p=p, method=method, trials=args.trials, seed=_seed(args))
    except LayerError as exc:
        print(f"FAIL frame bounds: {exc}")
        return EXIT_FAIL
    probes = uniform_points(layer.spec, args.probes, np.random.default_rng(_seed(args)))
    reg = regularity_constant(layer, probes)
    result = {"p": "inf" if math.isinf(p) else p, "A": cert.A, "B": cert.B, "kappa": cert.kappa,
              "method": cert.method, "regularity": reg, "points": len(layer), "n": layer.degree}
    print(f"A = {cert.A!r}\nB = {cert.B!r}\nkappa = {cert.kappa!r}\nregularity = {reg!r}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh, indent=1)
    return EXIT_OK


def _samples(path, count):
    obj = _read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("values", obj.get("samples"))
    vals = np.asarray(obj, dtype=np.float64).reshape(-1) if obj is not None else None
    if vals is None or vals.shape[0] != count:
        raise DomainError(f"{path}: expected a list of {count} sample values")
    return vals


def cmd_fit(args):
    layer = _load_layer(args.layer)
    vals = _samples(args.samples, len(layer))
    trace = [] if args.trace else None
    fit = least_lp_fit(layer, vals, args.p, SolverOptions(max_iterations=args.max_iterations), trace=trace)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "epsilon"])
            w.writerows(trace)
    if args.out:
        save_coeffs(fit, args.out)
    else:
        print(json.dumps(coeff_to_json(fit)))
    print(f"objective = {fit.objective!r} (p = {args.p}, {fit.iterations} iterations)", file=sys.stderr)
    return EXIT_OK


def cmd_quad(args):
    layer = _load_layer(args.layer)
    n = layer.degree
    basis_n = build_basis(layer.spec, n)
    rule = ls_quadrature(layer, basis_n)
    rng = np.random.default_rng(_seed(args))
    Q = CoeffFunction(basis_n, n, rng.standard_normal(basis_n.dim(n)))
    smooth = random_smooth_function(layer.spec, layer.spec.dim, 2.0, 4.0 * n, seed=_seed(args))
    tests = [
        ("constant", 1.0, rule.integrate(np.ones(len(layer)))),
        ("random P_n", Q.fourier(0), rule.integrate(Q(layer.points))),
        ("smooth (cutoff 4n)", smooth.fourier(0), rule.integrate(smooth(layer.points))),
    ]
    for name, exact, approx in tests:
        print(f"{name}: exact = {exact!r}, rule = {approx!r}, error = {abs(exact - approx):.3e}")
    print(f"negative weights: {rule.negative_fraction:.4f}; route gap {rule.meta['route_gap']:.3e}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rule_to_json(rule), fh)
    exact_ok = all(abs(e - a) <= 1e-10 * max(1.0, abs(e)) for _, e, a in tests[:2])
    return EXIT_OK if exact_ok else EXIT_FAIL


def cmd_rates(args):
    obj = _read_json(args.config)
    if not isinstance(obj, dict):
        raise DomainError("rates config must be a JSON object")
    if args.seed is not None:
        obj["seed"] = int(args.seed)
    if args.out:
        obj.setdefault("csv_path", args.out + ".csv")
        obj.setdefault("json_path", args.out + ".json")
    cfg = ExperimentConfig.from_json(obj)
    report = run_rates(cfg, threads=args.threads)
    sys.stdout.write(report.to_csv())
    print(
        f"approximation slope {report.approx_fit.slope:.4f} (predicted {report.predicted:.4f}, "
        f"R^2 {report.approx_fit.r_squared:.4f}); quadrature slope {report.quad_fit.slope:.4f} "
        f"(predicted {report.predicted_quad:.4f})",
        file=sys.stderr,
    )
    if args.check is not None:
        bad = abs(report.approx_fit.slope - report.predicted) > args.check
        bad |= abs(report.quad_fit.slope - report.predicted_quad) > args.check
        if bad:
            print(f"slope outside predicted +- {args.check}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def cmd_selftest(args):
    report = selftest(seed=_seed(args), threads=args.threads, layer_files=args.layer or (), only=args.only,
                      log=print)
    status = "PASSED" if report.passed else f"FAILED ({len(report.failures)} checks)"
    print(f"selftest {status}: {len(report.results)} checks in {report.elapsed:.1f} s", file=sys.stderr)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_json(), fh, indent=1, sort_keys=True)
    return EXIT_OK if report.passed else EXIT_FAIL


def _globals(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="random seed (default 0)")
    parser.add_argument("--out", default=d, help="output path")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads (default 1)")


def _degree_args(p):
    p.add_argument("manifold", nargs="?", default="torus1", help="torus1, torus2, torus3 or sphere2")
    p.add_argument("--degree", type=float, help="eigenvalue cutoff n")
    p.add_argument("--ell", type=int, help="sphere: maximal spherical-harmonic degree")
    p.add_argument("--freq", type=int, help="torus: maximal frequency m (n = 2 pi m)")


def build_parser():
    parser = argparse.ArgumentParser(prog="mzapprox", description=__doc__.splitlines()[0])
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, into=sub):
        p = into.add_parser(name, help=helptext)
        _globals(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("basis", cmd_basis, "eigenvalue table of P_n")
    _degree_args(p)

    mz = sub.add_parser("mz", help="build or verify MZ layers")
    mzsub = mz.add_subparsers(dest="mz_command", required=True)
    p = add("build", cmd_mz_build, "emit a point-set JSON file", mzsub)
    _degree_args(p)
    p.add_argument("--family", choices=("equispaced", "separated"), default="separated")
    p.add_argument("--delta", type=float, help="separation scale, eps = delta / n")
    p.add_argument("--oversampling", type=float, default=1.0)
    p.add_argument("--certify", action="store_true", help="attach the exact p = 2 certificate")
    p = add("verify", cmd_mz_verify, "certify a point-set file", mzsub)
    p.add_argument("file")
    p.add_argument("--p", type=_p_arg, default=2.0)
    p.add_argument("--method", choices=("exact2", "randomized"))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--probes", type=int, default=2000, help="probe centres for the regularity constant")

    p = add("fit", cmd_fit, "least l_p fit of sampled values on a layer")
    p.add_argument("layer")
    p.add_argument("samples", help="JSON list (or {'values': [...]}) aligned with the layer points")
    p.add_argument("--p", type=_p_arg, default=2.0)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--trace", help="write the solver trace as CSV")

    p = add("quad", cmd_quad, "least-squares quadrature rule of a layer")
    p.add_argument("layer")

    p = add("rates", cmd_rates, "run a rate experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--check", type=float, help="exit 1 if a slope misses its prediction by more than this")

    p = add("selftest", cmd_selftest, "run the invariant suite")
    p.add_argument("--layer", action="append", help="also check this point-set file (repeatable)")
    p.add_argument("--only", help="run checks whose module/name contains this text")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_BAD_INPUT
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        return args.func(args)
    except (LayerError, ConvergenceError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (DomainError, ResourceError, ConstructionError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
