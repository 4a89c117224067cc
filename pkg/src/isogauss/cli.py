"""Command-line front end: forward, check, reconstruct, roundtrip.

Exit codes are a stable contract: 0 admissible, 1 rejected, 2 usage or
format error, 3 inapplicable.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import datafiles, surfaces
from .admissibility import PipelineOptions, run_pipeline
from .codim import run_codim_pipeline
from .curvature import metric_field
from .errors import DatasetFormatError, DomainError, IsoGaussError
from .gaussmap import build_gauss_field
from .grid import build_chart
from .reconstruct import compare_up_to_translation, integrate, verify_immersion

EXIT_ADMISSIBLE = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2
EXIT_INAPPLICABLE = 3

_VERDICT_EXIT = {"admissible": EXIT_ADMISSIBLE, "rejected": EXIT_REJECTED,
                 "inapplicable": EXIT_INAPPLICABLE}


class CliError(Exception):
    pass


def _parse_grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.lower().split("x"))
    except ValueError as exc:
        raise CliError(f"bad --grid value {text!r}: {exc}") from exc


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise CliError(f"bad numeric list {text!r}: {exc}") from exc


def _make_surface(args) -> surfaces.Surface:
    name = args.surface
    if name not in surfaces.CATALOG:
        raise CliError(f"unknown surface {name!r}; known: "
                       + ", ".join(sorted(surfaces.CATALOG)))
    kwargs = {}
    if name in ("round-sphere", "cylinder", "hypersphere-m3") and args.radius:
        kwargs["radius"] = float(args.radius)
    if name in ("ellipsoid", "ellipsoid-m3") and args.axes:
        kwargs["axes"] = _parse_floats(args.axes)
    if name in ("graph", "graph-r4") and args.coeffs:
        kwargs["coeffs"] = _parse_floats(args.coeffs)
    if name in ("catenoid", "helicoid", "associated-family") and args.scale:
        kwargs["scale"] = float(args.scale)
    if name == "associated-family" and args.theta is not None:
        kwargs["theta"] = float(args.theta)
    if name == "clifford-torus":
        if args.r1:
            kwargs["r1"] = float(args.r1)
        if args.r2:
            kwargs["r2"] = float(args.r2)
    try:
        return surfaces.CATALOG[name](**kwargs)
    except TypeError as exc:
        raise CliError(f"bad parameters for {name}: {exc}") from exc


def _make_chart(surface: surfaces.Surface, args):
    shape = _parse_grid(args.grid) if args.grid else (17 if surface.m == 3 else 33,)
    if len(shape) == 1:
        shape = shape * surface.m
    if len(shape) != surface.m:
        raise CliError(f"--grid has {len(shape)} axes, surface needs {surface.m}")
    if args.spacing or args.origin:
        if not (args.spacing and args.origin):
            raise CliError("--spacing and --origin must be given together")
        return build_chart(surface.m, shape, _parse_floats(args.spacing),
                           _parse_floats(args.origin))
    return surface.default_chart(shape)


def _options(args) -> PipelineOptions:
    return PipelineOptions(tol_scale=args.tol_scale, gap_tol=args.gap_tol,
                           method=args.method, sign_branch=args.sign_branch)


def _load_problem(path):
    ds = datafiles.read_dataset(path)
    if ds.kind != "metric+gauss":
        raise DatasetFormatError(f"expected a metric+gauss dataset, got '{ds.kind}'")
    g = datafiles.dataset_metric(ds)
    normals = datafiles.dataset_normals(ds)
    metric = metric_field(ds.chart, g)
    return ds, metric, normals


def _run_check(metric, normals, options):
    if normals.shape[-1] == 1:
        G = build_gauss_field(metric.chart, normals[..., 0])
        return run_pipeline(metric, G, options)
    return run_codim_pipeline(metric, normals, options)


# ---------------------------------------------------------------------------
# subcommands


def cmd_forward(args) -> int:
    surface = _make_surface(args)
    chart = _make_chart(surface, args)
    data = surfaces.generate(surface, chart)
    frame = data.frame
    if args.perturb_nu:
        if data.d != 1:
            raise CliError("--perturb-nu applies to hypersurface data only")
        nu = surfaces.smooth_rotation_of_gauss_map(
            data.frame[..., 0], chart, float(args.perturb_nu), seed=args.seed)
        frame = nu[..., None]
    out = args.out or f"{surface.name}_{'x'.join(str(s) for s in chart.shape)}"
    ds = datafiles.gauss_dataset(chart, data.n, data.g, frame=frame)
    datafiles.write_dataset(out + ".dataset.txt", ds)
    oracle = datafiles.oracle_dataset(chart, data.n, data.u, data.h_alpha,
                                      data.k, data.H_alpha)
    datafiles.write_dataset(out + ".oracle.txt", oracle)
    print(f"wrote {out}.dataset.txt and {out}.oracle.txt")
    return EXIT_ADMISSIBLE


def cmd_check(args) -> int:
    ds, metric, normals = _load_problem(args.dataset)
    report = _run_check(metric, normals, _options(args))
    text = datafiles.format_report(report)
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    print(text, end="")
    return _VERDICT_EXIT[report.verdict]


def cmd_reconstruct(args) -> int:
    ds, metric, normals = _load_problem(args.dataset)
    options = _options(args)
    report = _run_check(metric, normals, options)
    if args.report:
        datafiles.write_report(args.report, report)
    if not report.admissible:
        print(f"verdict = {report.verdict}: no reconstruction written")
        return _VERDICT_EXIT[report.verdict]
    chart = metric.chart
    curl_tol = options.fd_tol(chart)
    minimal = report.method == "minimal_m2"
    if minimal:
        print("note: minimal-surface data determines a one-parameter family; "
              "writing the PSD-root representative (need not integrate cleanly)")
    imm = integrate(report.candidate.U, chart, curl_tol=curl_tol,
                    on_curl="warn" if minimal else "raise")
    out = args.out or "reconstruction"
    datafiles.write_dataset(out + ".immersion.txt",
                            datafiles.immersion_dataset(chart, imm.u))
    _write_plot_data(out + ".xyz.txt", chart, imm.u)
    if normals.shape[-1] == 1:
        G = build_gauss_field(chart, normals[..., 0])
        res_g, res_n = verify_immersion(imm, metric, G)
        print(f"verification: metric residual {res_g:.3e}, "
              f"tangency residual {res_n:.3e}, curl residual {imm.curl_residual:.3e}")
    print(f"wrote {out}.immersion.txt and {out}.xyz.txt")
    return EXIT_ADMISSIBLE


def _write_plot_data(path, chart, u) -> None:
    coords = chart.mesh().reshape(chart.num_points, chart.m)
    pts = u.reshape(chart.num_points, -1)
    header = " ".join([f"x{i+1}" for i in range(chart.m)]
                      + [f"u{i+1}" for i in range(pts.shape[1])])
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + header + "\n")
        for c, p in zip(coords, pts):
            fh.write(" ".join(f"{v:.17g}" for v in np.concatenate([c, p])) + "\n")


def cmd_roundtrip(args) -> int:
    surface = _make_surface(args)
    chart = _make_chart(surface, args)
    options = _options(args)
    levels = max(0, args.refine)
    rows = []
    errors = []
    last_exit = EXIT_USAGE
    for level in range(levels + 1):
        data = surfaces.generate(surface, chart)
        metric = metric_field(chart, data.g)
        normals = data.frame
        if args.perturb_nu:
            nu = surfaces.smooth_rotation_of_gauss_map(
                normals[..., 0], chart, float(args.perturb_nu), seed=args.seed)
            normals = nu[..., None]
        report = _run_check(metric, normals, options)
        max_res = max((v for v in report.residuals.values()
                       if not math.isnan(v)), default=math.nan)
        rec_err = math.nan
        if report.admissible:
            imm = integrate(report.candidate.U, chart,
                            curl_tol=options.fd_tol(chart),
                            on_curl="warn" if report.method == "minimal_m2" else "raise")
            # node margin scales with refinement so the measurement region
            # stays a fixed coordinate box across levels
            region = chart.interior_slices(4 * 2 ** level)
            rec_err = compare_up_to_translation(imm.u[region], data.u[region])
            errors.append(rec_err)
        gap = report.residuals.get("nullspace_gap", math.nan)
        rows.append((f"{'x'.join(str(s) for s in chart.shape)}",
                     report.verdict, report.method, max_res, rec_err, gap))
        last_exit = _VERDICT_EXIT[report.verdict]
        chart = chart.refine()
    print(f"surface: {surface.name}")
    print(f"{'grid':>12} {'verdict':>13} {'method':>11} {'max_resid':>11} "
          f"{'rec_error':>11} {'null_gap':>11} {'order':>7}")
    for i, row in enumerate(rows):
        order = ""
        if i > 0 and errors[i - 1:i + 1] and len(errors) > i and errors[i] > 0:
            order = f"{math.log2(errors[i - 1] / errors[i]):7.2f}"
        print(f"{row[0]:>12} {row[1]:>13} {row[2]:>11} {row[3]:11.3e} "
              f"{row[4]:11.3e} {row[5]:11.3e} {order:>7}")
    return last_exit


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isogauss",
        description="Decide whether sampled (metric, Gauss map) data admits "
                    "an isometric immersion, and reconstruct it.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_surface_args(p):
        p.add_argument("--surface", required=True)
        p.add_argument("--grid", help="points per axis, e.g. 64x64")
        p.add_argument("--spacing", help="comma-separated spacings")
        p.add_argument("--origin", help="comma-separated origin")
        p.add_argument("--radius")
        p.add_argument("--axes")
        p.add_argument("--coeffs")
        p.add_argument("--scale")
        p.add_argument("--theta", type=float)
        p.add_argument("--r1")
        p.add_argument("--r2")
        p.add_argument("--perturb-nu", dest="perturb_nu",
                       help="fabricate inadmissible data: smooth rotation of "
                            "nu by this magnitude")
        p.add_argument("--seed", type=int, default=0)

    def add_tol_args(p):
        p.add_argument("--tol-scale", dest="tol_scale", type=float, default=50.0,
                       help="C in the C*dx^2 residual thresholds")
        p.add_argument("--gap-tol", dest="gap_tol", type=float, default=1e-6)
        p.add_argument("--method", choices=("auto", "theorem2", "theorem3", "sqrt"),
                       default="auto")
        p.add_argument("--sign-branch", dest="sign_branch", type=int,
                       choices=(1, -1), default=1)

    p = sub.add_parser("forward", help="sample a catalog surface to dataset files")
    add_surface_args(p)
    p.add_argument("--out", help="output prefix")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("check", help="run the admissibility pipeline on a dataset")
    p.add_argument("dataset")
    p.add_argument("--out", help="report file")
    add_tol_args(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reconstruct", help="check and integrate the immersion")
    p.add_argument("dataset")
    p.add_argument("--out", help="output prefix")
    p.add_argument("--report", help="report file")
    add_tol_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("roundtrip",
                       help="forward -> check -> reconstruct -> compare")
    add_surface_args(p)
    add_tol_args(p)
    p.add_argument("--refine", type=int, default=0,
                   help="extra halved-spacing levels for convergence orders")
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (CliError, DatasetFormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IsoGaussError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
