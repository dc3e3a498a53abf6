"""nepkit command line: solve, oracle, perturb, bifurcate, refine, gallery.

Every command writes CSV tables (17 significant digits) and a
``manifest.json`` into ``--out``. Exit codes: 0 success, 1 usage or input
error (diagnostic on stderr), 2 numerical non-convergence or a broken
continuation path (partial output is still written).
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, gallery
from .bifurcation import ParametricNep, bifurcation_sensitivity, detect_bifurcation
from .contour import CircularContour
from .errors import (
    ContourOnSpectrum,
    DegenerateDenominator,
    DerivativeSingular,
    FdDetectionFailed,
    FlatCurvature,
    NepError,
    NotConverged,
    PathBroken,
    SingularIterate,
    TrialDiverged,
)
from .linalg import spectral_norm, svd_extremes
from .operator import NepOperator
from .oracle import oracle_eigenvalues, require_oracle
from .perturbation import PerturbationSpec, parse_structure, perturb_experiment
from .problem import dump_problem, parse_problem
from .refine import METHODS, RefineConfig
from .solver import SolverConfig, solve

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
AUDIT_TOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return "{:.16e}".format(float(x))


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Output:
    """Collects the files of one run and writes the manifest last."""

    def __init__(self, out_dir, command, config, seed, digest):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command, self.config, self.seed, self.digest = command, config, seed, digest
        self.files = []

    def table(self, name, header, rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        _atomic_write(self.dir / name, buf.getvalue())
        self.files.append(name)

    def manifest(self):
        data = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": __version__,
            "input_sha256": self.digest,
            "files": sorted(self.files),
        }
        _atomic_write(self.dir / "manifest.json", json.dumps(data, indent=2, sort_keys=True) + "\n")


def parse_complex(text):
    """'RE,IM' or 'RE' -> complex."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE,IM, got {text!r}")


def parse_grid(text):
    """'A:B:STEPS' -> (A, B, STEPS)."""
    parts = text.split(":")
    try:
        if len(parts) == 3 and int(parts[2]) >= 2:
            return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected A:B:STEPS with STEPS >= 2, got {text!r}")


def _default_seed():
    raw = os.environ.get("NEPKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NEPKIT_SEED must be an integer, got {raw!r}") from None


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config(args):
    skip = {"func", "out", "command"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, complex):
            v = [v.real, v.imag]
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _load_operator(path):
    problem = parse_problem(path)
    if isinstance(problem, ParametricNep):
        raise UsageError(f"{path}: parametric problem; use the bifurcate command")
    return problem


def _output(args, digest):
    return Output(args.out, args.command, _config(args), args.seed, digest)


def _warn(message):
    print(f"nepkit: {message}", file=sys.stderr)


def cmd_solve(args):
    op = _load_operator(args.problem)
    contour = CircularContour(args.center, args.radius)
    cfg = SolverConfig(
        n_initial=args.n_initial, tol=args.tol, seed=args.seed, refine=not args.no_refine
    )
    out = _output(args, _digest(args.problem))
    try:
        report = solve(op, contour, cfg)
    except ContourOnSpectrum as exc:
        _warn(str(exc))
        out.manifest()
        return EXIT_NUMERIC
    rows = [
        (lam.real, lam.imag, res, cid)
        for lam, res, cid in zip(report.eigenvalues, report.residuals, report.cluster_ids)
    ]
    out.table("eigenvalues.csv", ["re", "im", "residual", "cluster_id"], rows)
    out.table(
        "contours.csv",
        ["index", "center_re", "center_im", "radius"],
        [(i, c.center.real, c.center.imag, c.radius) for i, c in enumerate(report.contour_history)],
    )
    status = EXIT_OK if report.converged else EXIT_NUMERIC
    if not report.converged:
        _warn(f"not converged after {report.outer_iterations} outer iterations")
    if report.winding_note:
        _warn(f"winding count unavailable ({report.winding_note})")
    if args.residual_audit:
        audit = []
        for lam in report.eigenvalues:
            T = op.evaluate(lam)
            smin = svd_extremes(T)[1]
            tnorm = spectral_norm(T)
            audit.append((lam.real, lam.imag, smin, tnorm, smin <= AUDIT_TOL * tnorm))
        out.table("audit.csv", ["re", "im", "sigma_min", "t_norm", "passed"], audit)
        count_ok = report.winding_count is None or report.winding_count == len(report.eigenvalues)
        passed = all(a[-1] for a in audit) and count_ok
        print(
            f"audit: {sum(a[-1] for a in audit)}/{len(audit)} eigenpairs pass, "
            f"winding={report.winding_count} returned={len(report.eigenvalues)}"
        )
        if not passed:
            status = EXIT_NUMERIC
    out.manifest()
    return status


def cmd_oracle(args):
    op = _load_operator(args.problem)
    require_oracle(op)
    values = oracle_eigenvalues(op)
    out = _output(args, _digest(args.problem))
    out.table("oracle_eigenvalues.csv", ["re", "im"], [(z.real, z.imag) for z in values])
    out.manifest()
    return EXIT_OK


def cmd_perturb(args):
    op = _load_operator(args.problem)
    spec = PerturbationSpec(args.epsilon, args.seed, args.trials, parse_structure(args.structure))
    try:
        report = perturb_experiment(op, args.lambda0, spec, RefineConfig())
    except (TrialDiverged, DerivativeSingular) as exc:
        raise UsageError(f"lambda0 = {args.lambda0} is not a usable simple eigenvalue: {exc}")
    rows = {s.trial: (s.trial, s.delta_norm, s.bound, s.actual_shift, s.satisfied) for s in report.samples}
    for f in report.failures:
        rows[f.trial] = (f.trial, math.nan, math.nan, math.nan, False)
    out = _output(args, _digest(args.problem))
    out.table(
        "bound_vs_actual.csv",
        ["trial", "delta_norm", "bound", "actual", "satisfied"],
        [rows[k] for k in sorted(rows)],
    )
    out.manifest()
    print(
        f"satisfaction_rate={report.satisfaction_rate:.6f} "
        f"sigma_min={report.sigma_min_deriv:.6e} kappa={report.kappa:.6e} "
        f"trials={report.trials} diverged={len(report.failures)}"
    )
    return EXIT_OK


def _path_rows(points):
    return [(p.mu, p.lam.real, p.lam.imag, abs(p.det_deriv), p.residual) for p in points]


PATH_HEADER = ["mu", "lambda_re", "lambda_im", "det_deriv_abs", "residual"]


def cmd_bifurcate(args):
    pnep = parse_problem(args.problem)
    if not isinstance(pnep, ParametricNep):
        raise UsageError(f"{args.problem}: no parameter block; bifurcate needs a parametric problem")
    grid = args.grid or pnep.builder.block.grid
    if grid is None:
        raise UsageError("no grid: pass --grid A:B:STEPS or add one to the parameter block")
    mu_grid = np.linspace(*grid)
    delta = None
    if args.delta:
        overlay = parse_problem(args.delta)
        if isinstance(overlay, NepOperator):
            overlay = gallery.constant_family(overlay)
        if overlay.dim != pnep.dim:
            raise UsageError("overlay dimension differs from the problem")
        delta = overlay
    out = _output(args, _digest(args.problem))
    cfg = RefineConfig()
    try:
        report = detect_bifurcation(pnep, mu_grid, args.lambda0, cfg)
    except PathBroken as exc:
        out.table("path.csv", PATH_HEADER, _path_rows(exc.points or []))
        out.manifest()
        _warn(f"continuation broke at grid index {exc.index}")
        return EXIT_NUMERIC
    out.table("path.csv", PATH_HEADER, _path_rows(report.path))
    if report.detected:
        closed = fd = math.nan
        if delta is not None:
            try:
                closed, fd = bifurcation_sensitivity(
                    pnep, delta, report.critical_mu, report.critical_lambda,
                    mu_grid, args.lambda0, cfg, report.path,
                )
            except (DegenerateDenominator, FdDetectionFailed) as exc:
                _warn(f"sensitivity unavailable: {exc}")
        lam = report.critical_lambda
        out.table(
            "bifurcation.csv",
            ["critical_mu", "critical_lambda_re", "critical_lambda_im",
             "delta_alpha_closed", "delta_alpha_fd"],
            [(report.critical_mu, lam.real, lam.imag, closed, fd)],
        )
        print(f"critical_mu={report.critical_mu:.16e} closed={closed:.6e} fd={fd:.6e}")
    else:
        print("no critical point detected")
    out.manifest()
    return EXIT_OK


def cmd_refine(args):
    op = _load_operator(args.problem)
    op.check_domain(args.lambda0)
    cfg = RefineConfig(tol=args.tol, max_iter=args.max_iter)
    status = EXIT_OK
    try:
        result = METHODS[args.method](op, args.lambda0, cfg)
    except NotConverged as exc:
        _warn(str(exc))
        result, status = exc.result, EXIT_NUMERIC
    except (SingularIterate, FlatCurvature) as exc:
        _warn(str(exc))
        result, status = None, EXIT_NUMERIC
    out = _output(args, _digest(args.problem))
    rows = []
    if result is not None:
        for k, ((lam, step), res) in enumerate(zip(result.history, result.residuals)):
            rows.append((k, lam.real, lam.imag, step, res))
    out.table("convergence.csv", ["iteration", "lambda_re", "lambda_im", "error_proxy", "residual"], rows)
    out.manifest()
    if result is not None and status == EXIT_OK:
        print(f"lambda={result.lam.real:.16e}{result.lam.imag:+.16e}j iterations={result.iterations}")
    return status


def cmd_gallery(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (factory, _) in sorted(gallery.PROBLEMS.items()):
        _atomic_write(out / f"{name}.json", dump_problem(factory()))
        print(out / f"{name}.json")
    return EXIT_OK


def build_parser():
    seed = _default_seed()
    parser = _Parser(prog="nepkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nepkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, problem=True):
        if problem:
            p.add_argument("--problem", required=True, help="problem file (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=seed, help="RNG seed (default $NEPKIT_SEED or 0)")

    p = sub.add_parser("solve", help="eigenvalues inside a circle")
    common(p)
    p.add_argument("--center", type=parse_complex, default=0j, help="RE,IM")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--n-initial", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--no-refine", action="store_true", help="disable cluster refinement")
    p.add_argument("--residual-audit", action="store_true",
                   help="check sigma_min(T) <= 1e-8 ||T|| per eigenpair and the winding count")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="companion-pencil eigenvalues (polynomial/rational)")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("perturb", help="perturbation bound vs actual shift")
    common(p)
    p.add_argument("--lambda0", type=parse_complex, required=True, help="RE,IM")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--structure", default="all", help="all | base | term:i")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("bifurcate", help="eigenvalue path and critical parameter")
    common(p)
    p.add_argument("--grid", type=parse_grid, default=None, help="A:B:STEPS")
    p.add_argument("--lambda0", type=parse_complex, required=True, help="path seed RE,IM")
    p.add_argument("--delta", default=None, help="perturbation overlay problem file")
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("refine", help="Newton or variational polishing from lambda0")
    common(p)
    p.add_argument("--lambda0", type=parse_complex, required=True, help="RE,IM")
    p.add_argument("--method", choices=sorted(METHODS), default="newton")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=50)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("gallery", help="write the built-in problem files")
    common(p, problem=False)
    p.set_defaults(func=cmd_gallery)
    return parser


# flags whose values may legitimately start with '-'
VALUE_FLAGS = ("--lambda0", "--center", "--grid")


def _join_negative_values(argv):
    """'--lambda0 -1,2' -> '--lambda0=-1,2' so argparse does not read it as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1][:1] == "-":
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        return args.func(args)
    except UsageError as exc:
        print(f"nepkit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        # ParseError, SchemaError, InvalidContour, DomainError, UnsupportedFunction
        print(f"nepkit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NepError as exc:
        print(f"nepkit: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
