"""Command-line entry point exposing every operation with JSON-friendly I/O.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 domain error.
The default working precision comes from BMVTRACE_PRECISION (bits) when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import mpmath as mp

from . import exactnum
from .errors import DomainError, NumericalError
from .exactnum import Log2Multiple, as_fraction, format_rational
from .divdiff import (
    Exp,
    divided_difference,
    divdiff_exp_opitz,
    divdiff_hermite_quadrature,
    parse_function_spec,
)
from .formulations import (
    MPositiveProbe,
    m_positive_check,
    poly_coefficients,
    poly_coefficients_oracle,
    positive_type_check,
)
from .linalg import HermitianMatrix, to_eigenframe
from .loops import (
    GOLDEN_MODIFIED_VALUE,
    GOLDEN_NEGATIVE_VALUE,
    IntegrandPoint,
    VectorFamily,
    canonical_loop_value,
    fan_family,
    loop_bound,
    loop_min_search,
    reference_example_value,
    triple_integrand,
)
from .search import SearchConfig, resume, run_search
from .traceder import complete_monotonicity_report, shift_frame, trace_derivative


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_precision():
    env = os.environ.get("BMVTRACE_PRECISION")
    return int(env) if env else exactnum.DEFAULT_PRECISION


def _load_matrix(path, precision):
    with open(path) as fh:
        return HermitianMatrix.from_json(json.load(fh), precision)


def _parse_list(text):
    return [as_fraction(tok) for tok in text.split(",") if tok.strip()]


def _emit(args, payload, human_lines):
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True))
    elif not args.quiet:
        for line in human_lines:
            print(line)
    else:
        print(human_lines[-1])


def _value_str(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    return mp.nstr(v, 30)


def build_parser():
    top = _Parser(prog="bmvtrace", description=__doc__)
    top.add_argument("--precision", type=int, default=None, help="working precision in bits")
    top.add_argument("--format", choices=["human", "json"], default="human")
    top.add_argument("--quiet", action="store_true")
    sub = top.add_subparsers(dest="command")

    p = sub.add_parser("divdiff", help="divided difference of a function over nodes")
    p.add_argument("--func", required=True, help="exp | exp:S | resolvent:C | monotone:B;C,W;...")
    p.add_argument("--nodes", required=True, help='comma-separated rationals, e.g. "1,2,3"')
    p.add_argument("--method", choices=["recursion", "opitz", "hermite"], default="recursion")
    p.add_argument("--points", type=int, default=64, help="quadrature points (hermite)")

    p = sub.add_parser("trace-deriv", help="p-th derivative of tr f(A+tB)")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--func", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--t0", default="0")

    p = sub.add_parser("cm-check", help="complete-monotonicity sign report")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--func", required=True)
    p.add_argument("--max-order", type=int, required=True)
    p.add_argument("--grid", default="0")

    p = sub.add_parser("poly-coeff", help="coefficients of tr(A+tB)^p")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--oracle", action="store_true", help="use word enumeration")

    p = sub.add_parser("positive-type", help="kernel positivity of tr exp(A+itB)")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--samples", required=True, help='e.g. "0,1,2"')

    p = sub.add_parser("m-positive", help="entrywise positivity probes of tr exp(A+tB)")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--alpha", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("loop-bound", help="-cos^p(pi/p)")
    p.add_argument("--p", type=int, required=True)

    p = sub.add_parser("loop-search", help="minimize the canonical loop")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("integrand", help="third-derivative integrand at a point")
    p.add_argument("--family", required=True, help="JSON file with a vector family")
    p.add_argument("--lambda", dest="lam", required=True, help='ln2 multiples, e.g. "69,33,0"')
    p.add_argument("--point", required=True, help='"t1,t2,t3" with 0<=t3<=t2<=t1<=1')

    p = sub.add_parser("bmv-example", help="the built-in exact integer example")
    p.add_argument("--variant", choices=["original", "modified"], default="original")

    p = sub.add_parser("search", help="seeded counterexample search")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", dest="resume_path", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--limit", type=int, default=None)

    p = sub.add_parser("selftest", help="golden-value self checks")
    p.add_argument("--json", action="store_true", dest="as_json")

    return top


def _cmd_divdiff(args, prec):
    f = parse_function_spec(args.func)
    nodes = _parse_list(args.nodes)
    if args.method == "recursion":
        val = divided_difference(f, nodes, prec)
    elif args.method == "opitz":
        sigma = f.as_exp()
        if sigma is None:
            raise DomainError("the opitz method applies to exponential functions")
        val = divdiff_exp_opitz(nodes, sigma, prec)
    else:
        val = divdiff_hermite_quadrature(f, nodes, args.points, prec)
    payload = {
        "value": _value_str(val),
        "mode": "exact" if isinstance(val, Fraction) else "float",
        "method": args.method,
    }
    return payload, [f"divided difference = {payload['value']} ({payload['mode']})"]


def _cmd_trace_deriv(args, prec):
    A = _load_matrix(args.A, prec)
    B = _load_matrix(args.B, prec)
    f = parse_function_spec(args.func)
    t0 = as_fraction(args.t0)
    frame = to_eigenframe(A, B, prec)
    frame = shift_frame(frame, t0, prec)
    val = trace_derivative(frame, f, args.order, prec)
    exact = isinstance(val, Fraction)
    payload = {
        "value": _value_str(val),
        "order": args.order,
        "t0": format_rational(t0),
        "mode": "exact" if exact else "float",
        "certified": exact,
    }
    return payload, [f"d^{args.order}/dt^{args.order} tr f(A+tB) at t0={payload['t0']}: {payload['value']} ({payload['mode']})"]


def _cmd_cm_check(args, prec):
    A = _load_matrix(args.A, prec)
    B = _load_matrix(args.B, prec)
    f = parse_function_spec(args.func)
    grid = _parse_list(args.grid)
    report = complete_monotonicity_report(A, B, f, args.max_order, grid, prec)
    payload = report.to_json()
    lines = [
        f"t0={e['t0']} p={e['p']} sign={e['sign']} certified={e['certified']} value={e['value']}"
        for e in payload["entries"]
    ]
    lines.append(f"alternation holds: {payload['alternation_holds']}")
    return payload, lines


def _cmd_poly_coeff(args, prec):
    A = _load_matrix(args.A, prec)
    B = _load_matrix(args.B, prec)
    fn = poly_coefficients_oracle if args.oracle else poly_coefficients
    out = fn(A, B, args.p)
    payload = out.to_json()
    return payload, ["coefficients: " + ", ".join(payload["coeffs"])]


def _cmd_positive_type(args, prec):
    A = _load_matrix(args.A, prec)
    B = _load_matrix(args.B, prec)
    report = positive_type_check(A, B, _parse_list(args.samples), prec)
    payload = report.to_json()
    return payload, [
        f"min kernel eigenvalue {payload['min_eigenvalue']} (pass={payload['passed']})"
    ]


def _cmd_m_positive(args, prec):
    A = _load_matrix(args.A, prec)
    B = _load_matrix(args.B, prec)
    probe = MPositiveProbe(
        k=args.k,
        sample_count=args.count,
        seed=args.seed,
        alpha=as_fraction(args.alpha) if args.alpha else None,
    )
    report = m_positive_check(A, B, probe, prec)
    payload = report.to_json()
    return payload, [
        f"min entry {payload['min_entry']} over {args.count} probes (pass={payload['passed']})"
    ]


def _cmd_loop_bound(args, prec):
    val = loop_bound(args.p, prec)
    payload = {"p": args.p, "bound": mp.nstr(val, 30)}
    return payload, [f"loop bound for p={args.p}: {payload['bound']}"]


def _cmd_loop_search(args, prec):
    fam, val = loop_min_search(args.p, args.dim, args.restarts, args.seed, prec)
    bound = loop_bound(args.p, prec)
    payload = {
        "p": args.p,
        "dim": args.dim,
        "restarts": args.restarts,
        "seed": args.seed,
        "value": mp.nstr(val, 30),
        "bound": mp.nstr(bound, 30),
        "gap_to_bound": mp.nstr(val - bound, 10),
        "family": fam.to_json(),
    }
    return payload, [
        f"best loop value {payload['value']} (bound {payload['bound']}, gap {payload['gap_to_bound']})"
    ]


def _cmd_integrand(args, prec):
    with open(args.family) as fh:
        family = VectorFamily.from_json(json.load(fh))
    lam = [Log2Multiple(q) for q in _parse_list(args.lam)]
    t1, t2, t3 = _parse_list(args.point)
    point = IntegrandPoint(t1, t2, t3)
    out = triple_integrand(family, lam, point, prec)
    payload = {
        "value": _value_str(out.value),
        "mode": "exact" if out.exact else "float",
        "point": point.to_json(),
    }
    return payload, [f"integrand = {payload['value']} ({payload['mode']})"]


def _cmd_bmv_example(args, prec):
    value = reference_example_value(args.variant)
    payload = {"variant": args.variant, "value": str(value)}
    return payload, [str(value)]


def _cmd_search(args, prec):
    if args.resume_path:
        summary = resume(args.resume_path, workers=args.workers, limit=args.limit)
    else:
        with open(args.config) as fh:
            config = SearchConfig.from_json(json.load(fh))
        summary = run_search(config, workers=args.workers, limit=args.limit)
    minv = summary["min_value"]
    payload = {
        "evaluations": summary["evaluations"],
        "negatives_found": summary["negatives_found"],
        "min_value": None if minv is None else _value_str(minv) if isinstance(minv, Fraction) else repr(minv),
        "argmin": summary["argmin"],
    }
    return payload, [
        f"evaluations={payload['evaluations']} negatives={payload['negatives_found']} min={payload['min_value']}"
    ]


def _selftest_cases(prec):
    yield (
        "integer example (original)",
        lambda: reference_example_value("original"),
        GOLDEN_NEGATIVE_VALUE,
    )
    yield (
        "integer example (modified)",
        lambda: reference_example_value("modified"),
        GOLDEN_MODIFIED_VALUE,
    )

    def coeffs():
        A = HermitianMatrix.diagonal([1, 2])
        B = HermitianMatrix.exact([[1, 1], [1, 1]])
        return tuple(poly_coefficients(A, B, 2).coeffs)

    yield ("trace polynomial (5,6,4)", coeffs, (Fraction(5), Fraction(6), Fraction(4)))

    def fan3():
        val = canonical_loop_value(fan_family(3, prec)).real
        return format_rational(Fraction(round(val * 8), 8)) if abs(val * 8 - round(val * 8)) < 1e-20 else mp.nstr(val, 20)

    yield ("planar fan loop p=3", fan3, "-1/8")

    def alternation():
        A = HermitianMatrix.diagonal([1, 2, 3])
        B = HermitianMatrix.exact([[2, 1, 0], [1, 2, 1], [0, 1, 2]])
        frame = to_eigenframe(A, B, prec)
        from .divdiff import Resolvent

        signs = []
        for p in range(1, 5):
            v = trace_derivative(frame, Resolvent(1), p, prec)
            signs.append("+" if (-1) ** p * v > 0 else "-")
        return "".join(signs)

    yield ("resolvent alternation signs p=1..4", alternation, "++++")


def _cmd_selftest(args, prec):
    results = []
    ok = True
    for name, fn, expected in _selftest_cases(prec):
        try:
            got = fn()
            passed = got == expected
        except Exception as exc:  # report, do not crash the suite
            got = f"error: {exc}"
            passed = False
        ok = ok and passed
        results.append({"name": name, "passed": passed, "expected": str(expected), "got": str(got)})
    payload = {"passed": ok, "cases": results}
    lines = [
        f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}"
        + ("" if c["passed"] else f" (expected {c['expected']}, got {c['got']})")
        for c in results
    ]
    lines.append("selftest: " + ("all passed" if ok else "FAILURES"))
    if args.as_json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)
    return 0 if ok else 2


_HANDLERS = {
    "divdiff": _cmd_divdiff,
    "trace-deriv": _cmd_trace_deriv,
    "cm-check": _cmd_cm_check,
    "poly-coeff": _cmd_poly_coeff,
    "positive-type": _cmd_positive_type,
    "m-positive": _cmd_m_positive,
    "loop-bound": _cmd_loop_bound,
    "loop-search": _cmd_loop_search,
    "integrand": _cmd_integrand,
    "bmv-example": _cmd_bmv_example,
    "search": _cmd_search,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        prec = args.precision if args.precision else _default_precision()
        if args.command == "selftest":
            return _cmd_selftest(args, prec)
        payload, lines = _HANDLERS[args.command](args, prec)
        _emit(args, payload, lines)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
