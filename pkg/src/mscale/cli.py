"""Command-line interface: ``mscale <command> ...``.

Exit codes: 0 success, 1 usage or input error, 2 iteration limit reached,
3 infeasible restrictions, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import bands as bd
from .coverage import simulate_coverage
from .detect import (
    QUANTILE_CONST,
    PeakQuery,
    Span,
    default_peak_query,
    inflection_condition,
    min_n_for_peak,
    peak_trace,
)
from .errors import (
    InfeasibleError,
    InsufficientDataError,
    IterationLimitError,
    NumericalError,
    ParameterError,
)
from .grid import TestFunction, design_points, estimate_sigma, format_float, generate_data, read_csv, write_csv
from .multires import RegionSpec, calibrate_tau, parse_family
from .regularize import minimize_supnorm, minimize_tv, tv
from .shape import ShapeSpec
from .tautstring import count_local_extremes, taut_string_multires

EXIT_OK, EXIT_USAGE, EXIT_ITER, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3, 4

log = logging.getLogger("mscale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# argument types -------------------------------------------------------

def _positive(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg(text):
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _count(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _theta(text):
    v = float(text)
    if not v > 1:
        raise argparse.ArgumentTypeError("theta must exceed 1")
    return v


def _sigma(text):
    if text == "auto":
        return "auto"
    return _nonneg(text)


def _function(text):
    try:
        return TestFunction.parse(text)
    except (ParameterError, ValueError, FileNotFoundError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _span(text):
    try:
        return Span.parse(text)
    except (ParameterError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# shared options -------------------------------------------------------

def _add_region(p, sigma_default="auto"):
    p.add_argument("--sigma", type=_sigma, default=sigma_default,
                   help="noise scale, or 'auto' for the difference-based estimate "
                        f"(default: {sigma_default})")
    p.add_argument("--tau", type=_positive, default=3.0, help="threshold constant (default: 3)")
    p.add_argument("--family", default="dyadic:2",
                   help="interval family: 'dyadic[:lambda]' or 'all' (default: dyadic:2)")


def _load(args):
    s, t = read_csv(args.input)
    if t is None:
        t = design_points(s.n)
    if args.sigma == "auto":
        sigma = estimate_sigma(s)
        mode = "auto"
    else:
        sigma = float(args.sigma)
        mode = "fixed"
    spec = RegionSpec(sigma, parse_family(args.family, s.n), args.tau)
    meta = {"sigma": format_float(sigma), "sigma_mode": mode, "tau": format_float(args.tau),
            "family": args.family}
    return s, t, spec, meta


def _echo(args):
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    text = " ".join(f"{k}={v}" for k, v in items.items())
    print(f"# config: {text}", file=sys.stderr)


# commands -------------------------------------------------------------

def cmd_gen_data(args):
    s = generate_data(args.f, args.n, args.sigma, args.seed)
    write_csv(args.output, {"t": s.t, "y": s.y},
              {"f": str(args.f), "sigma": format_float(args.sigma), "seed": args.seed})
    return EXIT_OK


def cmd_tautstring(args):
    s, t, spec, meta = _load(args)
    if spec.sigma == 0:
        values = s.y.copy()
        iters = 0
    else:
        try:
            fit = taut_string_multires(s, spec.sigma, spec.tau, spec.family, args.max_iter)
        except IterationLimitError as exc:
            if exc.fit is not None:
                meta.update(iterations=args.max_iter, converged="false")
                write_csv(args.output, {"t": t, "fit": exc.fit.values}, meta)
            raise
        values, iters = fit.values, fit.iterations
    meta.update(iterations=iters, local_extremes=count_local_extremes(values))
    write_csv(args.output, {"t": t, "fit": values}, meta)
    return EXIT_OK


def _shape(args):
    return ShapeSpec.load(args.shape) if args.shape else None


def cmd_minimize(args):
    s, t, spec, meta = _load(args)
    shape = _shape(args)
    if args.objective == "tv":
        g = minimize_tv(s, spec, args.order, shape)
        meta.update(objective="tv", order=args.order, value=format_float(tv(g, args.order)))
    else:
        g, B = minimize_supnorm(s, spec, args.order, shape)
        meta.update(objective="sup", order=args.order, value=format_float(B))
    meta["local_extremes"] = count_local_extremes(g)
    write_csv(args.output, {"t": t, "fit": g}, meta)
    print(meta["value"])
    return EXIT_OK


def cmd_bands(args):
    s, t, spec, meta = _load(args)
    if args.method == "min-k":
        K = bd.min_consistent_k(s, spec, args.theta or bd.SMOOTH_THETA)
        print(format_float(K))
        if args.output:
            band = bd.smoothness_band_fast(s, spec, bd.SmoothnessClass(K),
                                           args.theta or bd.SMOOTH_THETA)
            meta["K"] = format_float(K)
            write_csv(args.output, {"t": t, "lb": band.lb, "ub": band.ub}, meta)
        return EXIT_OK
    if args.output is None:
        raise UsageError("--output is required")
    band = bd.band_by_name(args.method, s, spec, args.theta, args.K, _shape(args), args.mode)
    meta.update(method=args.method, feasible=str(band.feasible).lower())
    for k, v in band.params.items():
        if k != "shape" and v is not None:
            meta[k] = v
    write_csv(args.output, {"t": t, "lb": band.lb, "ub": band.ub}, meta)
    if not band.feasible:
        raise InfeasibleError(f"{args.method}: {band.reason}")
    return EXIT_OK


def cmd_calibrate_tau(args):
    fam = parse_family(args.family, args.n)
    tau = calibrate_tau(args.n, fam, args.alpha, args.nsim, args.seed)
    print(f"tau={format_float(tau)} quantile={format_float(math.sqrt(tau * math.log(args.n)))}")
    return EXIT_OK


def cmd_detect(args):
    if args.kind == "peak":
        if args.left or args.center or args.right:
            d = default_peak_query(args.f, args.sigma)
            q = PeakQuery(args.f, args.sigma, args.left or d.left, args.center or d.center,
                          args.right or d.right, args.tau, args.cq)
        else:
            q = default_peak_query(args.f, args.sigma, tau=args.tau, c_q=args.cq)
        print(f"# intervals: left={q.left} center={q.center} right={q.right}")
        n = min_n_for_peak(q, args.nmax)
        if n is None:
            print(f"no n <= {args.nmax} satisfies the peak condition")
            print("min_n=none")
            return EXIT_OK
        for m in (n - 1, n):
            if m >= 2 and all(sp.count(m) for sp in (q.left, q.center, q.right)):
                tr = peak_trace(q, m)
                print(f"n={m} counts={tr.counts} center_lower={format_float(tr.center_lower)} "
                      f"side_upper={format_float(tr.side_upper)} holds={tr.holds}")
        print(f"min_n={n}")
        return EXIT_OK
    tl, tc, tr_ = args.centers
    if args.n is None or args.k is None:
        raise UsageError("inflection needs --n and --k")
    ok = inflection_condition(args.f, args.sigma, tl, tc, tr_, args.k, args.n, args.tau,
                              args.cq, args.derivative)
    print(f"n={args.n} k={args.k} holds={ok}")
    return EXIT_OK


def cmd_simulate(args):
    opts = {}
    if args.method != "region":
        opts = {"theta": args.theta, "K": args.K}
    res = simulate_coverage(args.f, args.n, args.sigma, args.tau, args.family, args.method,
                            args.reps, args.seed, args.sigma_mode, args.workers, **opts)
    print(f"coverage={format_float(res.proportion)} se={format_float(res.se)} "
          f"hits={res.hits} reps={res.reps}")
    return EXIT_OK


# parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mscale", description="Multiscale confidence regions, taut-string fits, "
                "regularized fits and confidence bands for equispaced regression data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="simulate y = f(i/n) + sigma * noise")
    g.add_argument("--f", type=_function, required=True,
                   help="box:c:h[:height] | sine:omega | exp:rate | const:c | doppler | table:path")
    g.add_argument("--n", type=_count, required=True)
    g.add_argument("--sigma", type=_nonneg, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("tautstring", help="multiresolution taut-string fit")
    t.add_argument("--input", required=True)
    t.add_argument("--output", required=True)
    _add_region(t)
    t.add_argument("--max-iter", type=_count, default=100)
    t.set_defaults(func=cmd_tautstring)

    m = sub.add_parser("minimize", help="minimize TV or sup norm of a derivative over the region")
    m.add_argument("--objective", choices=("tv", "sup"), default="tv")
    m.add_argument("--order", type=int, default=0, help="derivative order k (default: 0)")
    m.add_argument("--input", required=True)
    m.add_argument("--output", required=True)
    m.add_argument("--shape", help="JSON shape description")
    _add_region(m)
    m.set_defaults(func=cmd_minimize)

    b = sub.add_parser("bands", help="confidence bands at the design points")
    b.add_argument("--method", required=True, choices=bd.BAND_METHODS + ("min-k",))
    b.add_argument("--theta", type=_theta, default=None,
                   help="window grid ratio (default: 2 monotone, 1.5 otherwise)")
    b.add_argument("--K", type=_nonneg, default=None, help="second-derivative bound")
    b.add_argument("--shape", help="JSON shape description (piecewise)")
    b.add_argument("--mode", choices=("fixed", "union"), default="fixed")
    b.add_argument("--input", required=True)
    b.add_argument("--output")
    _add_region(b)
    b.set_defaults(func=cmd_bands)

    c = sub.add_parser("calibrate-tau", help="simulate the threshold constant for level alpha")
    c.add_argument("--n", type=_count, required=True)
    c.add_argument("--family", default="dyadic:2")
    c.add_argument("--alpha", type=_positive, default=0.95)
    c.add_argument("--sims", "--nsim", dest="nsim", type=_count, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_calibrate_tau)

    d = sub.add_parser("detect", help="minimal n for guaranteed peak / derivative-peak detection")
    d.add_argument("kind", choices=("peak", "inflection"))
    d.add_argument("--f", type=_function, default=TestFunction.box())
    d.add_argument("--sigma", type=_nonneg, default=1.0)
    d.add_argument("--tau", type=_positive, default=3.0)
    d.add_argument("--cq", type=_nonneg, default=QUANTILE_CONST)
    d.add_argument("--nmax", type=_count, default=10**7)
    d.add_argument("--left", type=_span, help="e.g. '[0.48,0.49)'")
    d.add_argument("--center", type=_span)
    d.add_argument("--right", type=_span)
    d.add_argument("--centers", type=lambda x: tuple(float(v) for v in x.split(",")),
                   default=(0.25, 0.5, 0.75), help="inflection: t_left,t_center,t_right")
    d.add_argument("--k", type=_count)
    d.add_argument("--n", type=_count)
    d.add_argument("--derivative", choices=("auto", "analytic", "numeric"), default="auto")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate-coverage", help="Monte Carlo coverage of region or band")
    s.add_argument("--f", type=_function, required=True)
    s.add_argument("--n", type=_count, required=True)
    s.add_argument("--sigma", type=_nonneg, required=True)
    s.add_argument("--tau", type=_positive, default=3.0)
    s.add_argument("--family", default="dyadic:2")
    s.add_argument("--method", default="region", choices=("region",) + bd.BAND_METHODS)
    s.add_argument("--reps", type=_count, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma-mode", choices=("known", "estimated"), default="known")
    s.add_argument("--workers", type=_count, default=1, help="capped by MSCALE_THREADS")
    s.add_argument("--theta", type=_theta, default=None)
    s.add_argument("--K", type=_nonneg, default=None)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mscale: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _echo(args)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mscale: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, InsufficientDataError, FileNotFoundError, ValueError) as exc:
        print(f"mscale: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IterationLimitError as exc:
        print(f"mscale: {exc}", file=sys.stderr)
        return EXIT_ITER
    except InfeasibleError as exc:
        print(f"mscale: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"mscale: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
