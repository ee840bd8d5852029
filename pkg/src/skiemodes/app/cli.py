"""Command-line interface: ``skiemodes <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from ..fields import field_grid
from .config import ConfigError, builtin_configs, load_config, parse_complex
from .io import report_to_dict, write_convergence, write_field_grid, write_report
from .oracles import fiber_dispersion_oracle, run_sommerfeld_check
from .runs import build_assembler, run_convergence_study, run_modes, run_point_source_verification

__all__ = ["main", "build_parser"]


def _add_overrides(p):
    p.add_argument("--panels", type=int, help="panels per curve (overrides the config)")
    p.add_argument("--nodes-per-side", type=int, help="nodes per side for square/polygon inclusions")
    p.add_argument("--guess", action="append", help="initial guess for ne (repeatable; complex allowed)")
    p.add_argument("--seed", type=int, help="probe-vector seed")


def _config(args):
    cfg = load_config(args.config)
    guesses = [parse_complex(g) for g in args.guess] if getattr(args, "guess", None) else None
    return cfg.with_overrides(panels=args.panels, nodes_per_side=args.nodes_per_side,
                              guesses=guesses, seed=args.seed)


def build_parser():
    ap = argparse.ArgumentParser(prog="skiemodes", description="Boundary-integral waveguide mode solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("modes", help="find modes for a config")
    p.add_argument("config", help=f"config path or bundled name ({', '.join(builtin_configs())})")
    p.add_argument("-o", "--out", help="write the JSON report here")
    _add_overrides(p)

    p = sub.add_parser("verify", help="point-source accuracy study")
    p.add_argument("config")
    p.add_argument("--probe", default="1.451", help="probe ne away from any mode")
    p.add_argument("--ladder", type=int, nargs="+", help="nodes per side (or per curve) to run")
    p.add_argument("--max-iterations", type=int, default=40)
    p.add_argument("--max-error", type=float, default=1e-6)
    _add_overrides(p)

    p = sub.add_parser("converge", help="mode index versus resolution")
    p.add_argument("config")
    p.add_argument("--ladder", type=int, nargs="+", required=True)
    p.add_argument("-o", "--out", help="CSV output")
    _add_overrides(p)

    p = sub.add_parser("sommerfeld", help="check the axial reduction of the 3D Green's function")
    p.add_argument("--k", default="2", help="wavenumber (complex allowed)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sep", type=float, nargs="+", default=[0.1, 0.7, 3.0, 10.0])
    p.add_argument("--threshold", type=float, default=1e-9)

    p = sub.add_parser("oracle", help="step-index fiber modes")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--n-core", type=float, required=True)
    p.add_argument("--n-clad", type=float, required=True)
    p.add_argument("--wavelength", type=float, required=True, help="same unit as the radius")

    p = sub.add_parser("field-map", help="fields of a mode on a grid (CSV)")
    p.add_argument("config")
    p.add_argument("--bbox", type=float, nargs=4, required=True, metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                   help="in the config's length unit")
    p.add_argument("--res", type=int, nargs="+", default=[101], help="nx [ny]")
    p.add_argument("--mode", type=int, default=0, help="index into the sorted mode list")
    p.add_argument("-o", "--out", required=True)
    _add_overrides(p)
    return ap


def _cmd_modes(args):
    rep = run_modes(_config(args))
    text = write_report(rep, args.out) if args.out else json.dumps(report_to_dict(rep), indent=2,
                                                                   sort_keys=True)
    if not args.out:
        print(text)
    else:
        for m in rep.modes:
            print(f"{m.ne.real:.15f} {m.ne.imag:+.10e}i  multiplicity {m.multiplicity}")
    return 0 if rep.modes else 1


def _cmd_verify(args):
    cfg = _config(args)
    ladder = args.ladder or [None]
    ok = True
    for N in ladder:
        c = cfg
        if N is not None:
            from .runs import _at_resolution
            c = _at_resolution(cfg, N)
        r = run_point_source_verification(c, parse_complex(args.probe))
        good = r.converged and r.iterations <= args.max_iterations and r.max_rel_error <= args.max_error
        ok &= good
        print(f"N={N} unknowns={r.n_unknowns} gmres_iterations={r.iterations} residual={r.residual:.2e} "
              f"field_error={r.max_rel_error:.3e} {'PASS' if good else 'FAIL'}")
    return 0 if ok else 1


def _cmd_converge(args):
    res = run_convergence_study(_config(args), args.ladder)
    for N, v, e in zip(res.resolutions, res.values, res.errors):
        print(f"{N:6d} {v.real:.15f} {v.imag:+.10e}i  {e:.3e}")
    print(f"fitted order {res.slope:.3g}")
    if args.out:
        write_convergence(res, args.out)
    return 0


def _cmd_sommerfeld(args):
    r = run_sommerfeld_check(parse_complex(args.k), args.beta, args.sep)
    ok = r <= args.threshold
    print(f"max residual {r:.3e} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_oracle(args):
    modes = fiber_dispersion_oracle(args.radius, args.n_clad, args.n_core, args.wavelength)
    for m in modes:
        print(f"{m.ne:.15f}  m={m.m}")
    return 0 if modes else 1


def _cmd_field_map(args):
    cfg = _config(args)
    rep = run_modes(cfg)
    if args.mode >= len(rep.modes):
        print(f"only {len(rep.modes)} modes found", file=sys.stderr)
        return 1
    mode = rep.modes[args.mode]
    asm = build_assembler(cfg)
    s = cfg.physics.length_scale
    res = args.res if len(args.res) == 2 else [args.res[0], args.res[0]]
    grid = field_grid(np.asarray(args.bbox) * s, res, mode.basis[:, 0], asm.disc, asm.wavenumbers(mode.ne))
    grid.x /= s
    grid.y /= s
    write_field_grid(grid, args.out, {"ne": f"{mode.ne.real!r} {mode.ne.imag!r}", "config": cfg.name,
                                      "length_unit": cfg.physics.length_unit})
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cmds = {"modes": _cmd_modes, "verify": _cmd_verify, "converge": _cmd_converge,
            "sommerfeld": _cmd_sommerfeld, "oracle": _cmd_oracle, "field-map": _cmd_field_map}
    try:
        return cmds[args.cmd](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
