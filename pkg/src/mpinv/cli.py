"""Command-line interface: ``mpinv <command> ...``.

Exit codes: 0 success, 2 input error, 3 numerical error, 4 inadmissible
curve, 5 fixed-point non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import contours, domain, estimators, inference, mp_forward, simgen
from .errors import ConfigurationError, EstimationError, IterationError, SingularityError
from .fixed_point import FixedPointConfig
from .measures import NEG_CLAMP, DiscreteMeasure, read_eigenvalue_file, stieltjes
from .mp_inverse import DEFAULT_CFG, SampleSpectrum, estimate_stieltjes

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INADMISSIBLE, EXIT_NOCONV = 0, 2, 3, 4, 5


class CliFailure(Exception):
    def __init__(self, code, message, payload=None):
        super().__init__(message)
        self.code = code
        self.payload = payload


# -- output ------------------------------------------------------------------

def write_atomic(path, text: str):
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".mpinv-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return f"{float(x):.17g}"


def _table(d: dict) -> str:
    width = max(len(k) for k in d)
    lines = []
    for k, v in d.items():
        if isinstance(v, float):
            v = f"{v:.10g}"
        elif isinstance(v, (dict, list)):
            v = json.dumps(v)
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def _emit(args, obj: dict):
    text = json.dumps(obj, indent=2) + "\n" if getattr(args, "json", False) else _table(obj)
    write_atomic(args.output, text)


# -- argument helpers --------------------------------------------------------

def _spectrum(args) -> SampleSpectrum:
    evals = read_eigenvalue_file(args.eigs)
    if (args.c is None) == (args.n is None):
        raise ValueError("give exactly one of --c or --n")
    if args.c is not None and not args.c > 0:
        raise ValueError("--c must be positive")
    if args.n is not None and not args.n > 0:
        raise ValueError("--n must be positive")
    return SampleSpectrum.from_eigenvalues(evals, n=args.n, c=args.c)


def _parse_support(items):
    out = []
    for it in items or ():
        lo, _, hi = it.partition(":")
        out.append((float(lo), float(hi)))
    return tuple(out) or None


def _domain_cfg(args) -> domain.DomainConfig:
    mode = getattr(args, "mode", "ReplacementSafe")
    return domain.DomainConfig(args.tau, args.kappa, args.sigma2, domain.Mode(mode),
                               _parse_support(getattr(args, "support", None)))


def _fp(args) -> FixedPointConfig:
    return FixedPointConfig(tol=args.tol, max_iter=args.max_iter)


def _curve(args, prefix="curve"):
    rect = getattr(args, prefix.replace("-", "_"))
    path = getattr(args, prefix.replace("-", "_") + "_file")
    if (rect is None) == (path is None):
        raise ValueError(f"give exactly one of --{prefix} or --{prefix}-file")
    if rect is not None:
        return contours.rectangle_curve(*rect)
    return contours.load_curve(path)


def _require_admissible(curve, spec, cfg, rule, fp):
    rep = contours.validate_admissible(curve, spec, cfg, rule, fp)
    if not rep.admissible:
        raise CliFailure(EXIT_INADMISSIBLE, "curve is not admissible", rep.to_json())
    return rep


def _add_common(p, curve=True, json_flag=True):
    p.add_argument("eigs", help="eigenvalue file, one value per line")
    p.add_argument("--c", type=float, help="aspect ratio d/n")
    p.add_argument("--n", type=float, help="sample size (alternative to --c)")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--sigma2", type=float, default=None, help="operator norm bound; default is a heuristic")
    p.add_argument("--mode", choices=["ReplacementSafe", "SupportSupplied"], default="ReplacementSafe")
    p.add_argument("--support", action="append", metavar="LO:HI",
                   help="support interval of the deterministic equivalent (SupportSupplied mode; repeatable)")
    p.add_argument("--tol", type=float, default=DEFAULT_CFG.tol)
    p.add_argument("--max-iter", type=int, default=DEFAULT_CFG.max_iter)
    if curve:
        p.add_argument("--curve", type=float, nargs=3, metavar=("A", "B", "H"), help="rectangle curve")
        p.add_argument("--curve-file", help="curve JSON file")
        p.add_argument("--nodes", type=int, default=contours.DEFAULT_NODES, help="Gauss nodes per segment")
    if json_flag:
        p.add_argument("--json", action="store_true", help="JSON instead of a table")
    p.add_argument("-o", "--output", help="output path (default stdout)")


# -- commands ----------------------------------------------------------------

def cmd_eigs(args):
    Y = simgen.read_matrix_csv(args.matrix)
    try:
        evals = np.linalg.eigvalsh(simgen.sample_covariance(Y))
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    evals = np.sort(np.where((evals < 0) & (evals >= NEG_CLAMP), 0.0, evals))
    write_atomic(args.output, "".join(_fmt(x) + "\n" for x in evals))
    if args.c_out:
        d, n = Y.shape
        sys.stderr.write(f"d={d} n={n} c={d / n!r}\n")


def _parse_complex(s):
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ValueError(f"cannot parse {s!r} as a complex number") from None


def cmd_stieltjes(args):
    spec = _spectrum(args)
    z = np.array([_parse_complex(s) for s in args.z])
    if np.any(z.imag <= 0):
        raise ValueError("--z values need a positive imaginary part")
    res = estimate_stieltjes(spec, z, _fp(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "s_re", "s_im", "phi_re", "phi_im", "iterations", "exists", "failure"])
    for k in range(z.size):
        r = res[k]
        w.writerow([_fmt(z[k].real), _fmt(z[k].imag), _fmt(r.s_hat.real), _fmt(r.s_hat.imag),
                    _fmt(r.phi_hat.real), _fmt(r.phi_hat.imag), r.iterations, int(r.exists),
                    "" if r.failure_reason is None else r.failure_reason.value])
    write_atomic(args.output, buf.getvalue())


def cmd_domain_map(args):
    spec = _spectrum(args)
    cfg = _domain_cfg(args)
    re_min, re_max, im_min, im_max = args.bbox
    if not (im_min > 0 and re_min < re_max and im_min < im_max):
        raise ValueError("--bbox needs re_min < re_max and 0 < im_min < im_max")
    raster = domain.rasterize(spec, cfg, args.bbox, args.res, _fp(args))
    buf = io.StringIO()
    raster.write_csv(buf)
    write_atomic(args.output, buf.getvalue())


def cmd_plss(args):
    spec = _spectrum(args)
    cfg = _domain_cfg(args)
    fp = _fp(args)
    g = estimators.function_from_name(args.g)
    curve = _curve(args)
    estimators.check_function_on_curve(g, curve)
    rule = contours.quadrature(curve, args.nodes)
    rep = _require_admissible(curve, spec, cfg, rule, fp)
    est = estimators.plss_estimate(spec, g, curve, rule, fp)
    _emit(args, {"estimate": est.value, "curve": curve.to_json(), "admissible": True, "nodes": est.nodes,
                 "imag_residue": est.imag_residue, "sigma2_heuristic": rep.sigma2_heuristic})


def cmd_glss(args):
    spec = _spectrum(args)
    cfg = _domain_cfg(args)
    fp = _fp(args)
    f = estimators.function_from_name(args.f)
    g = estimators.function_from_name(args.g)
    curve_g = _curve(args, "curve-g")
    curve_f = _curve(args, "curve-f")
    if args.snap:
        curve_g = contours.PolylineCurve(
            (complex(contours.snap_to_grid(curve_g.b, spec.n, args.K)),) + curve_g.vertices[1:-1]
            + (complex(contours.snap_to_grid(curve_g.a, spec.n, args.K)),),
            contours.snap_to_grid(curve_g.a, spec.n, args.K), contours.snap_to_grid(curve_g.b, spec.n, args.K))
    rules = (contours.quadrature(curve_f, contours.GLSS_NODES_F), contours.quadrature(curve_g, contours.GLSS_NODES_G))
    rep = contours.validate_pair(curve_g, curve_f, spec, cfg, args.K, fp, rule_g=rules[1], rule_f=rules[0])
    if not rep.admissible:
        raise CliFailure(EXIT_INADMISSIBLE, "curve pair is not admissible", rep.to_json())
    val = estimators.glss_estimate(spec, f, g, curve_f, curve_g, rules, fp)
    _emit(args, {"estimate": val, "curve_f": curve_f.to_json(), "curve_g": curve_g.to_json(), "admissible": True})


def cmd_ci(args):
    spec = _spectrum(args)
    cfg = _domain_cfg(args)
    fp = _fp(args)
    g = estimators.function_from_name(args.g)
    curve = _curve(args)
    estimators.check_function_on_curve(g, curve)
    rule = contours.quadrature(curve, args.nodes)
    _require_admissible(curve, spec, cfg, rule, fp)
    clt = inference.CltConfig(args.beta, args.alpha)
    lo, hi, m = inference.confidence_interval(spec, g, curve, None, clt, fp)
    report = inference.ci_report(lo, hi, m, clt)
    if m.clamped:
        report["sigma2_clamped"] = True
    _emit(args, report)


def _simulate_task(args):
    g = estimators.function_from_name(args.g)
    curve = contours.rectangle_curve(*args.curve)
    rule = contours.quadrature(curve, args.nodes)
    clt = inference.CltConfig(1, args.alpha)
    z0 = _parse_complex(args.z)

    def task(Y, H, sig, spec_):
        spec = simgen.sample_spectrum(Y)
        if args.task == "stieltjes":
            res = estimate_stieltjes(spec, z0)
            if not res.exists:
                raise EstimationError(f"estimator does not exist at {z0}")
            s_true = stieltjes(H, z0)
            return res.s_hat.real, s_true.real, {"est_im": res.s_hat.imag, "truth_im": s_true.imag,
                                                  "abs_complex_error": abs(res.s_hat - s_true)}
        truth = estimators.plss_truth(H, g, curve.a, curve.b)
        if args.task == "plss":
            return estimators.plss_estimate(spec, g, curve, rule).value, truth
        lo, hi, m = inference.confidence_interval(spec, g, curve, None, clt)
        return m.mu_n, truth, {"lo": lo, "hi": hi, "covered": float(lo <= truth <= hi)}

    extra = {"plss": (), "ci-coverage": ("lo", "hi", "covered"),
             "stieltjes": ("est_im", "truth_im", "abs_complex_error")}[args.task]
    return task, extra


def cmd_simulate(args):
    kind = {"ex1": "Ex1", "ex2": "Ex2"}[args.example]
    dims = [int(x) for x in args.dims.split(",") if x.strip()]
    if not dims or any(d < 1 for d in dims):
        raise ValueError("--dims needs positive integers")
    task, extra = _simulate_task(args)
    table = simgen.monte_carlo([simgen.ModelSpec(kind, d) for d in dims], task, args.reps, args.seed)
    buf = io.StringIO()
    table.write_csv(buf, extra, runtime=args.timing)
    write_atomic(args.output, buf.getvalue())
    for d, s in table.summary().items():
        line = f"d={d} reps={s['reps']} failed={s['failed']} mean_abs_error={s['mean_abs_error']:.6g}"
        if args.task == "ci-coverage":
            cov = [r.extra["covered"] for r in table.for_dim(d) if not r.failed]
            line += f" coverage={np.mean(cov) if cov else math.nan:.4f}"
        sys.stderr.write(line + "\n")
    if all(r.failed for r in table.rows):
        raise CliFailure(EXIT_NUMERIC, "every replication failed: " + table.rows[0].extra.get("error", ""))


def _parse_H(text) -> DiscreteMeasure:
    atoms, weights = [], []
    for part in text.split(","):
        a, sep, w = part.partition(":")
        if not sep:
            raise ValueError(f"--H entries must be atom:weight, got {part!r}")
        atoms.append(float(a))
        weights.append(float(w))
    return DiscreteMeasure(atoms, weights)


def cmd_forward(args):
    H = _parse_H(args.H)
    model = mp_forward.ForwardModel(H, args.c)
    lo, hi, m = args.grid
    m = int(m)
    if m < 1 or not lo <= hi:
        raise ValueError("--grid needs LO <= HI and M >= 1")
    xs = np.linspace(lo, hi, m)
    dens, s = mp_forward.density_grid(model, xs, args.eta, return_s=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "density", "re_s", "im_s"])
    for x, dd, sv in zip(xs, dens, s):
        w.writerow([_fmt(x), _fmt(dd), _fmt(sv.real), _fmt(sv.imag)])
    write_atomic(args.output, buf.getvalue())


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpinv", description="Population spectral statistics by Marchenko-Pastur inversion.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigs", help="eigenvalues of Y Y^T / n from a CSV matrix")
    p.add_argument("matrix")
    p.add_argument("-o", "--output")
    p.add_argument("--c-out", action="store_true", help="report d, n and c on stderr")
    p.set_defaults(func=cmd_eigs)

    p = sub.add_parser("stieltjes", help="population Stieltjes transform estimates at given points")
    _add_common(p, curve=False, json_flag=False)
    p.add_argument("--z", action="append", required=True, help="complex point, e.g. --z=-1+0.1j (use = for a leading minus; repeatable)")
    p.set_defaults(func=cmd_stieltjes)

    p = sub.add_parser("domain-map", help="raster of the empirical spectral domain")
    _add_common(p, curve=False, json_flag=False)
    p.add_argument("--bbox", type=float, nargs=4, required=True, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--res", type=int, nargs=2, default=(50, 50), metavar=("NX", "NY"))
    p.set_defaults(func=cmd_domain_map)

    p = sub.add_parser("plss", help="population linear spectral statistic")
    _add_common(p)
    p.add_argument("--g", default="identity")
    p.set_defaults(func=cmd_plss)

    p = sub.add_parser("glss", help="generalized linear spectral statistic")
    _add_common(p, curve=False)
    p.add_argument("--f", default="identity")
    p.add_argument("--g", default="identity")
    for side in ("g", "f"):
        p.add_argument(f"--curve-{side}", type=float, nargs=3, metavar=("A", "B", "H"))
        p.add_argument(f"--curve-{side}-file")
    p.add_argument("--K", type=int, default=2, help="endpoint grid exponent")
    p.add_argument("--snap", action="store_true", help="snap the g-curve endpoints to the grid")
    p.set_defaults(func=cmd_glss)

    p = sub.add_parser("ci", help="confidence interval for a population linear spectral statistic")
    _add_common(p)
    p.add_argument("--g", default="identity")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=int, default=1, choices=[1, 2])
    p.set_defaults(func=cmd_ci, json=True)

    p = sub.add_parser("simulate", help="Monte Carlo experiment on the synthetic examples")
    p.add_argument("--example", choices=["ex1", "ex2"], default="ex1")
    p.add_argument("--dims", default="50")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--task", choices=["plss", "ci-coverage", "stieltjes"], default="plss")
    p.add_argument("--g", default="cube")
    p.add_argument("--curve", type=float, nargs=3, default=(-0.2, 1.6, 0.5), metavar=("A", "B", "H"))
    p.add_argument("--nodes", type=int, default=contours.DEFAULT_NODES)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--z", default="-1+0.1j", help="evaluation point for task=stieltjes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timing", action="store_true", help="record wall-clock runtimes (breaks byte reproducibility)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forward", help="density and Stieltjes transform of the deterministic equivalent")
    p.add_argument("--H", required=True, help="atoms and weights, e.g. 0.5:0.5,1:0.5")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--grid", type=float, nargs=3, required=True, metavar=("LO", "HI", "M"))
    p.add_argument("--eta", type=float, default=1e-3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_forward)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        args.func(args)
        return EXIT_OK
    except CliFailure as exc:
        sys.stderr.write(f"mpinv: {exc}\n")
        if exc.payload is not None:
            sys.stderr.write(json.dumps(exc.payload) + "\n")
        return exc.code
    except IterationError as exc:
        sys.stderr.write(f"mpinv: no convergence: {exc}\n")
        return EXIT_NOCONV
    except EstimationError as exc:
        sys.stderr.write(f"mpinv: {exc}\n")
        return EXIT_INADMISSIBLE
    except (ConfigurationError, ValueError, OSError) as exc:
        sys.stderr.write(f"mpinv: input error: {exc}\n")
        return EXIT_INPUT
    except (ArithmeticError, SingularityError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"mpinv: numerical error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
