"""Batch front end.

Subcommands: surface (build + cache), check (identity sweeps), solve
(solution construction + residuals), kp (KP1 field + constant), scan
(theta-divisor smoothness scan).  Exit codes: 0 all residuals within
tolerance, 2 tolerance violation (report still written), 1 usage or
build error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .fay import (FayError, degenerate_identity_residual, fay_scalars,
                  new_identity_residual, q2_integral_oracle,
                  trisecant_residual)
from .kp import KpError, kp_residual, kp_solution, second_kind_constant_oracle
from .reports import (cache_surface, sample_arguments, surface_payload,
                      write_field_csv, write_report)
from .surfaces import SurfaceError, build_surface
from .theta import RiemannMatrixError, ThetaArgumentError
from .wave import (DSParams, WaveError, ds1_real_solution, ds2_real_solution,
                   ds_complex_solution, ds_system_residual, flow_grid,
                   nls_residual, nls_solution, nnls_complex_solution,
                   nnls_system_residual, smoothness_scan)

_ERRORS = (SurfaceError, FayError, WaveError, KpError, RiemannMatrixError,
           ThetaArgumentError, ValueError, OSError)


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the report contract
    # reserves 2 for tolerance violations, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(1)


def _load_json_arg(value):
    """Inline JSON or a path to a JSON file."""
    text = value.strip()
    if text.startswith("{") or text.startswith("["):
        return json.loads(text)
    with open(value) as fh:
        return json.load(fh)


def _get_surface(cfg):
    surface_cfg = cfg.get("surface")
    if surface_cfg is None:
        raise SurfaceError("a surface config is required (--surface)")
    if isinstance(surface_cfg, str):
        surface_cfg = _load_json_arg(surface_cfg)
    cache_dir = os.environ.get("THETAFAY_CACHE_DIR")
    if cache_dir:
        surface, path, status = cache_surface(surface_cfg, cache_dir)
        return surface, {"cachePath": path, "cacheStatus": status}
    return build_surface(surface_cfg), {"cachePath": None,
                                        "cacheStatus": "uncached"}


def _marked_points(surface, cfg, count, real=False):
    """count distinct marked points: from config if given, else a
    provider-appropriate deterministic default (real coordinates when
    the construction needs tau-fixed points)."""
    specs = cfg.get("points")
    if specs:
        if len(specs) < count:
            raise SurfaceError("need %d points, config has %d"
                               % (count, len(specs)))
        pts = []
        for s in specs[:count]:
            coord = s["coordinate"]
            if isinstance(coord, (list, tuple)):
                coord = complex(coord[0], coord[1])
            pts.append(surface.point(complex(coord),
                                     sheet=int(s.get("sheet", 0)),
                                     kind=s.get("kind", "affine")))
        return pts
    provider = surface.config.get("provider")
    if provider == "directFile":
        return [surface.point(i) for i in range(count)]
    if provider == "genus1Analytic":
        B = surface.B.entries
        fractions = ((0.13, 0.29), (0.41, 0.17), (0.63, 0.53), (0.83, 0.71))
        return [surface.point(complex(2j * np.pi * u + B[0, 0] * v))
                for u, v in fractions[:count]]
    branch = [complex(b) if not isinstance(b, (list, tuple))
              else complex(b[0], b[1])
              for b in surface.config["parameters"].get("branchPoints", [])]
    radius = max((abs(b) for b in branch), default=1.0) + 1.0
    offsets = (1.0, 1.75, 2.5, 3.25) if real \
        else (1.0 + 0.4j, 1.6 - 0.3j, 2.1 + 0.9j, 2.7 - 0.8j)
    return [surface.point(radius + off) for off in offsets[:count]]


def _report_base(command, surface, cfg, extra_surface):
    return {
        "tool": "thetafay",
        "version": __version__,
        "command": command,
        "surfaceHash": surface.metadata["content_hash"],
        "seed": cfg.get("seed"),
        "tolerances": {"main": cfg["tol"]} if "tol" in cfg else {},
        **extra_surface,
    }


def _emit(cfg, report):
    out = cfg.get("out")
    if out:
        write_report(out, report)
    else:
        from .reports import dumps
        print(dumps(report))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_surface(cfg):
    surface, extra = _get_surface(cfg)
    report = _report_base("surface", surface, cfg, extra)
    report["surface"] = surface_payload(surface)
    _emit(cfg, report)
    return 0


def _cmd_check(cfg):
    surface, extra = _get_surface(cfg)
    identity = cfg.get("identity", "new")
    tol = float(cfg.get("tol", 1e-7))
    cfg["tol"] = tol
    seed = int(cfg.get("seed", 0))
    cfg["seed"] = seed
    samples = int(cfg.get("samples", 50))
    report = _report_base("check", surface, cfg, extra)
    report["identity"] = identity
    if identity == "q2-oracle":
        a, b = _marked_points(surface, cfg, 2)
        scal = fay_scalars(surface, a, b)
        oracle = q2_integral_oracle(surface, a, b,
                                    int(cfg.get("shrinkSteps", 6)))
        rel = abs(scal.q2 - oracle) / max(abs(scal.q2), abs(oracle))
        report["q2"] = scal.q2
        report["q2Oracle"] = oracle
        report["maxResidual"] = rel
        residuals = [rel]
    else:
        zs = sample_arguments(surface.B.entries, samples, seed)
        if identity == "new":
            a, b = _marked_points(surface, cfg, 2)
            scal = fay_scalars(surface, a, b)
            residuals = [new_identity_residual(surface, a, b, z, scal)
                         for z in zs]
        elif identity == "degenerate":
            a, b = _marked_points(surface, cfg, 2)
            scal = fay_scalars(surface, a, b)
            residuals = [degenerate_identity_residual(surface, a, b, z, scal)
                         for z in zs]
        elif identity == "fay":
            a, b, c, e = _marked_points(surface, cfg, 4)
            residuals = [trisecant_residual(surface, a, b, c, e, z)
                         for z in zs]
        else:
            raise FayError("unknown identity %r" % identity)
        report["zSamples"] = len(residuals)
        report["maxResidual"] = max(residuals)
        report["meanResidual"] = sum(residuals) / len(residuals)
    _emit(cfg, report)
    return 0 if max(residuals) <= tol else 2


def _field_rows(bundle, grid):
    labels = [c.label for c in bundle.components]
    rows = []
    for vals in _grid_iter(grid, bundle.coords):
        row = list(vals)
        if bundle.on_divisor(vals):
            continue
        for lab in labels:
            f = bundle.field(lab, *vals)
            row.extend((f.real, f.imag))
        rows.append(row)
    header = list(bundle.coords)
    for lab in labels:
        header.extend(("%s_re" % lab, "%s_im" % lab))
    return header, rows


def _grid_iter(grid, coords):
    axes = [np.asarray(grid[c]) for c in coords]
    mesh = np.meshgrid(*axes, indexing="ij")
    return zip(*(m.ravel() for m in mesh))


def _default_ds2_pair(surface, cfg):
    """A tau-swapped pair: b over the conjugate coordinate with
    conjugate y."""
    pts = cfg.get("points")
    if pts:
        return _marked_points(surface, cfg, 2)
    lam = complex(cfg.get("coordinate", 0.5 + 0.2j))
    a = surface.point(lam, sheet=0)
    roots = surface.provider.roots_at(np.conj(lam))
    sheet = int(np.argmin(np.abs(roots - np.conj(a.y))))
    return a, surface.point(complex(np.conj(lam)), sheet=sheet)


def _cmd_solve(cfg):
    surface, extra = _get_surface(cfg)
    kind = cfg.get("solution", "nls")
    tol = float(cfg.get("tol", 1e-8))
    cfg["tol"] = tol
    report = _report_base("solve", surface, cfg, extra)
    report["solution"] = kind
    g = surface.genus
    code = 0
    requested_rho = cfg.get("rho")
    if kind == "nls":
        (a,) = _marked_points(surface, cfg, 1, real=True)
        bundle, rho = nls_solution(surface, a,
                                   d_R=np.asarray(cfg.get("dR",
                                                          [0.2] * g),
                                                  dtype=float),
                                   T=np.asarray(cfg.get("T", [0] * g),
                                                dtype=int),
                                   h=float(cfg.get("h", 0.0)))
        res = nls_residual(bundle, rho)
        report["computedRho"] = rho
        if requested_rho is not None and int(requested_rho) != rho:
            code = 2
    elif kind == "ds":
        a, b = _marked_points(surface, cfg, 2)
        params = DSParams(complex(cfg.get("kappa1", 1.0)),
                          complex(cfg.get("kappa2", 1.0)),
                          complex(cfg.get("A", 1.0)),
                          float(cfg.get("h", 0.0)),
                          np.asarray(cfg.get("d", [0.2 + 0.1j] * g),
                                     dtype=complex))
        bundle = ds_complex_solution(surface, a, b, params)
        res = ds_system_residual(bundle)
    elif kind == "ds1":
        a, b = _marked_points(surface, cfg, 2, real=True)
        rho = int(requested_rho if requested_rho is not None else 1)
        d_R = np.asarray(cfg.get("dR", [0.2] * g), dtype=float)
        T = np.asarray(cfg.get("T", [0] * g), dtype=int)
        try:
            bundle = ds1_real_solution(surface, a, b, d_R, T, rho=rho,
                                       h=float(cfg.get("h", 0.0)))
            report["computedRho"] = rho
        except WaveError as exc:
            # incompatible sign: report the feasible one and exit 2
            bundle = ds1_real_solution(surface, a, b, d_R, T, rho=-rho,
                                       h=float(cfg.get("h", 0.0)))
            report["computedRho"] = -rho
            report["requestedRho"] = rho
            report["signError"] = str(exc)
            code = 2
        res = ds_system_residual(bundle)
        report["realityDeviation"] = bundle.reality["deviation"]
    elif kind == "ds2":
        a, b = _default_ds2_pair(surface, cfg)
        H = surface.real_structure.H if surface.real_structure is not None \
            else None
        if H is None:
            raise WaveError("DS2 construction needs a real structure")
        diag = np.diag(np.asarray(H))
        L = np.asarray(cfg.get("L", diag % 2), dtype=int)
        default_T = (diag - np.asarray(H) @ L)
        if np.any(default_T % 2):
            raise WaveError("no integer T for the default L; pass L and T")
        T = np.asarray(cfg.get("T", default_T // 2), dtype=int)
        d_I = np.asarray(cfg.get("dI", [0.2] * g), dtype=float)
        bundle, rho = ds2_real_solution(surface, a, b, L, T, d_I,
                                        h=float(cfg.get("h", 0.0)))
        res = ds_system_residual(bundle)
        report["computedRho"] = rho
        if requested_rho is not None and int(requested_rho) != rho:
            code = 2
    elif kind == "nnls":
        z_a = complex(cfg.get("zA", 0.0))
        fiber = surface.fiber_over(z_a)
        n = len(fiber) - 1
        amps = [complex(x) if not isinstance(x, (list, tuple))
                else complex(x[0], x[1])
                for x in cfg.get("amplitudes", [1.0] * n)]
        d = np.asarray(cfg.get("d", [0.2 + 0.1j] * g), dtype=complex)
        bundle = nnls_complex_solution(surface, z_a, amps, d)
        res = nnls_system_residual(bundle)
    else:
        raise WaveError("unknown solution kind %r" % kind)
    report["residual"] = res.to_dict()
    if res.rel_to_field_scale > tol:
        code = 2
    field_csv = cfg.get("fieldCsv")
    if field_csv:
        header, rows = _field_rows(bundle, flow_grid(
            bundle, (int(cfg.get("gridSteps", 5)),) * len(bundle.coords)))
        write_field_csv(field_csv, header, rows)
        report["fieldCsv"] = field_csv
    _emit(cfg, report)
    return code


def _cmd_kp(cfg):
    surface, extra = _get_surface(cfg)
    tol = float(cfg.get("tol", 1e-7))
    cfg["tol"] = tol
    report = _report_base("kp", surface, cfg, extra)
    (a,) = _marked_points(surface, cfg, 1)
    g = surface.genus
    d = np.asarray(cfg.get("d", [0.2 + 0.1j] * g), dtype=complex)
    data = kp_solution(surface, a, d,
                       c=cfg.get("c"))
    res = kp_residual(data)
    report["c"] = data.c
    report["residual"] = res.to_dict()
    code = 0 if res.rel_to_field_scale <= tol else 2
    if surface.config.get("provider") == "hyperelliptic":
        oracle = second_kind_constant_oracle(surface, a)
        diff = abs(oracle - data.c) / max(1.0, abs(data.c))
        report["cOracle"] = oracle
        report["cOracleRelDiff"] = diff
        if diff > 1e-6:
            code = 2
    _emit(cfg, report)
    return code


def _cmd_scan(cfg):
    surface, extra = _get_surface(cfg)
    report = _report_base("scan", surface, cfg, extra)
    kind = cfg.get("solution", "nls")
    g = surface.genus
    if kind == "nls":
        (a,) = _marked_points(surface, cfg, 1, real=True)
        bundle, rho = nls_solution(
            surface, a,
            d_R=np.asarray(cfg.get("dR", [0.2] * g), dtype=float),
            T=np.asarray(cfg.get("T", [0] * g), dtype=int))
        report["computedRho"] = rho
    elif kind == "ds":
        a, b = _marked_points(surface, cfg, 2)
        params = DSParams(1.0, 1.0, 1.0, 0.0,
                          np.asarray(cfg.get("d", [0.2 + 0.1j] * g),
                                     dtype=complex))
        bundle = ds_complex_solution(surface, a, b, params)
    else:
        raise WaveError("scan supports solution kinds nls and ds")
    steps = int(cfg.get("gridSteps", 7))
    scan = smoothness_scan(bundle, flow_grid(bundle,
                                             (steps,) * len(bundle.coords)))
    report["scan"] = scan
    _emit(cfg, report)
    max_hits = int(cfg.get("maxHits", 0))
    return 0 if scan["divisorHits"] <= max_hits else 2


# ---------------------------------------------------------------------------
# argument plumbing


def _build_parser():
    parser = _Parser(prog="thetafay",
                     description="theta-functional identity and solution "
                                 "checks")
    parser.add_argument("--version", action="version",
                        version="thetafay %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON RunConfig file; flags "
                                        "override its fields")
        p.add_argument("--surface", help="surface config: JSON file path "
                                         "or inline JSON")
        p.add_argument("--out", help="report output path (default stdout)")
        p.add_argument("--seed", type=int, help="RNG seed for z sampling")
        p.add_argument("--tol", type=float, help="pass/fail tolerance")
        p.add_argument("--points",
                       help="JSON list of marked points "
                            '[{"coordinate": [re, im], "sheet": 0}, ...]')

    p = sub.add_parser("surface", help="build and cache a surface")
    common(p)

    p = sub.add_parser("check", help="identity sweep")
    common(p)
    p.add_argument("--identity",
                   choices=("new", "fay", "degenerate", "q2-oracle"))
    p.add_argument("--samples", type=int, help="number of z samples")

    p = sub.add_parser("solve", help="build a solution and verify it")
    common(p)
    p.add_argument("solution", nargs="?",
                   choices=("nls", "ds", "ds1", "ds2", "nnls"))
    p.add_argument("--rho", type=int, choices=(-1, 1),
                   help="requested reality sign (nls/ds1/ds2)")
    p.add_argument("--z-a", dest="zA", help="fiber coordinate (nnls)")
    p.add_argument("--field-csv", dest="fieldCsv",
                   help="write sampled fields to this CSV path")
    p.add_argument("--grid-steps", dest="gridSteps", type=int)

    p = sub.add_parser("kp", help="KP1 field, constant c and residual")
    common(p)
    p.add_argument("--c", type=float, help="override the solved constant")

    p = sub.add_parser("scan", help="theta-divisor smoothness scan")
    common(p)
    p.add_argument("--solution", choices=("nls", "ds"))
    p.add_argument("--max-hits", dest="maxHits", type=int)
    p.add_argument("--grid-steps", dest="gridSteps", type=int)
    return parser


def _merge_config(args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key, value in vars(args).items():
        if key == "config" or value is None:
            continue
        cfg[key] = value
    if isinstance(cfg.get("points"), str):
        cfg["points"] = _load_json_arg(cfg["points"])
    if isinstance(cfg.get("zA"), str):
        cfg["zA"] = complex(cfg["zA"])
    return cfg


_COMMANDS = {
    "surface": _cmd_surface,
    "check": _cmd_check,
    "solve": _cmd_solve,
    "kp": _cmd_kp,
    "scan": _cmd_scan,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _merge_config(args)
    try:
        return _COMMANDS[args.command](cfg)
    except _ERRORS as exc:
        print("thetafay: error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
