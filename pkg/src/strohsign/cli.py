"""Command-line interface: ``strohsign {rayleigh,impedance,periodic-sweep,verify}``.

Exit codes: 0 on success, 2 when no subsonic surface wave exists (a physical
outcome), 1 on any error including bad arguments.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_hash, load_material
from .errors import NoSurfaceWaveError, NotSubsonicError, SingularMatrixError, StrohSignError
from .periodic import DEFAULT_NH, LaminateSpec, dispersion_sweep
from .stroh import Geometry, limiting_speed
from .surface import barnett_lothe, dispersion_functions, impedance, solve_surface_speed
from .table import fmt
from .verify import CHECKS, SUBSETS, run_checks

EXIT_OK, EXIT_ERROR, EXIT_NO_ROOT = 0, 1, 2

FIG1_PAIRS = (("copper", "steel"), ("copper", "aluminum"), ("steel", "aluminum"))
FIG1_PSI = tuple(range(0, 91, 15))
FIG1_K = "pi/12:pi:12"
_SHORT = {"copper": "Cu", "aluminum": "Al", "steel": "St"}

_NUM = re.compile(r"^\s*(?:(?P<coef>[-+]?[\d.]+(?:e[-+]?\d+)?)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>[\d.]+(?:e[-+]?\d+)?))?\s*$", re.I)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must not collide with the no-root code
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def parse_number(text: str) -> float:
    """Float, or a multiple of ``pi`` such as ``pi``, ``2pi``, ``pi/12``, ``0.5*pi``."""
    m = _NUM.match(text)
    if m:
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        den = float(m.group("den")) if m.group("den") else 1.0
        return coef * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_grid(text: str) -> np.ndarray:
    """``START:STOP:N`` inclusive linear grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be START:STOP:N, got {text!r}")
    start, stop = parse_number(parts[0]), parse_number(parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid size must be an integer, got {parts[2]!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"grid {text!r} is empty")
    return np.linspace(start, stop, n)


def parse_list(text: str) -> list[float]:
    vals = [parse_number(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _positive(text: str) -> float:
    x = parse_number(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return x


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _geometry(psi_deg: float) -> Geometry:
    g = Geometry(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    return g.in_plane(math.radians(psi_deg)) if psi_deg else g


def cmd_rayleigh(args) -> int:
    mat = load_material(args.material)
    g = _geometry(args.psi_deg[0] if args.psi_deg else 0.0)
    kw = {"method": args.method} if args.method else {}
    try:
        sol = solve_surface_speed(mat, g, tol=args.tol or 1e-10, **kw)
    except NoSurfaceWaveError as exc:
        _emit(json.dumps({"material": mat.name, "status": "no_root", "message": str(exc)}, indent=2) + "\n", args.out)
        return EXIT_NO_ROOT
    rec = {"material": mat.name, "status": "ok", "m": g.m.tolist(), "n": g.n.tolist(), **sol.to_record()}
    _emit(json.dumps(rec, indent=2) + "\n", args.out)
    return EXIT_OK


IMPEDANCE_COLUMNS = ("v", "status", "eig_Z_1", "eig_Z_2", "eig_Z_3", "det_Z", "trS2_plus2", "det_B")


def impedance_rows(mat, g: Geometry, v_grid, method: str = "newton") -> list[dict]:
    """Per-speed impedance eigenvalues and dispersion functions; non-subsonic points flagged."""
    rows = []
    for v in v_grid:
        row = {"v": float(v), "status": "ok"}
        try:
            blocks = barnett_lothe(mat, g, float(v), method)
            Z = impedance(blocks)
        except NotSubsonicError:
            row["status"] = "not_subsonic"
        except SingularMatrixError:
            row["status"] = "singular_Q"
        else:
            ev = Z.eigenvalues
            row.update({f"eig_Z_{i + 1}": float(ev[i]) for i in range(3)})
            d = dispersion_functions(blocks, Z)
            row.update({"det_Z": d["det_Z"], "trS2_plus2": d["trS2_plus2"], "det_B": d["det_B"]})
        rows.append(row)
    return rows


def cmd_impedance(args) -> int:
    mat = load_material(args.material)
    g = _geometry(args.psi_deg[0] if args.psi_deg else 0.0)
    if args.v_grid is None:
        v_hat = limiting_speed(mat, g).v_hat
        v_grid = np.linspace(0.0, v_hat, 50, endpoint=False)
    else:
        v_grid = args.v_grid
    rows = impedance_rows(mat, g, v_grid, args.method or "newton")
    if args.format == "json":
        _emit(json.dumps({"material": mat.name, "rows": rows}, indent=2) + "\n", args.out)
    else:
        lines = [",".join(IMPEDANCE_COLUMNS)]
        for r in rows:
            lines.append(",".join(r["status"] if c == "status" else fmt(r.get(c)) for c in IMPEDANCE_COLUMNS))
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _sweep_table(mat1, mat2, args, k_grid, psi):
    spec = LaminateSpec(mat1, mat2, args.fraction, args.period)
    table = dispersion_sweep(spec, k_grid, psi, nh=args.nh, tol=args.tol or 1e-8, method=args.method or "newton", workers=args.workers)
    table.metadata.update(
        {
            "version": __version__,
            "config_hash": config_hash(mat1.name, mat2.name, repr(mat1.c.tolist()), repr(mat2.c.tolist()), mat1.density, mat2.density,
                                       args.fraction, args.period, args.nh, args.tol, args.method, list(k_grid), list(psi)),
            "k_grid": [float(k) for k in k_grid],
            "psi_deg": [float(p) for p in psi],
        }
    )
    return table


def _render(table, fmt_name: str) -> str:
    return table.to_json() if fmt_name == "json" else table.to_csv()


def cmd_periodic_sweep(args) -> int:
    k_grid = args.k_grid if args.k_grid is not None else parse_grid(FIG1_K) / args.period
    psi = args.psi_deg if args.psi_deg else list(FIG1_PSI)
    if args.preset == "fig1":
        outdir = Path(args.out or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        ext = "json" if args.format == "json" else "csv"
        for a, b in FIG1_PAIRS:
            table = _sweep_table(load_material(a), load_material(b), args, k_grid, psi)
            path = outdir / f"fig1_{_SHORT[a]}-{_SHORT[b]}.{ext}"
            path.write_text(_render(table, args.format), encoding="utf-8", newline="\n")
            print(path)
        return EXIT_OK
    if args.material is None or args.material2 is None:
        raise StrohSignError("periodic-sweep needs --material and --material2 (or --preset fig1)")
    table = _sweep_table(load_material(args.material), load_material(args.material2), args, k_grid, psi)
    _emit(_render(table, args.format), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.subset, inject=args.inject)
    ok = all(r.passed for r in results)
    if args.format == "json":
        text = json.dumps({"passed": ok, "checks": [r.to_record() for r in results]}, indent=2) + "\n"
    else:
        lines = [f"{'PASS' if r.passed else 'FAIL'} {r.family:11s} {r.name:26s} residual={r.residual:.3e} tol={r.tol:.0e} ({r.seconds:.2f}s)" for r in results]
        lines.append(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="strohsign", description="Surface-wave speeds of homogeneous and laminated half-spaces via the matrix sign function.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, methods=("newton", "scaled_newton", "integral", "spectral", "disk")):
        sp.add_argument("--method", choices=methods, default=None, help="sign-function method")
        sp.add_argument("--tol", type=_positive, default=None, help="relative root tolerance")
        sp.add_argument("--out", default=None, help="output path (default stdout)")

    r = sub.add_parser("rayleigh", help="surface-wave speed of a homogeneous half-space")
    r.add_argument("--material", required=True, help="material JSON file or bundled name")
    r.add_argument("--psi-deg", type=parse_list, default=None, help="in-plane rotation of the propagation direction")
    common(r)
    r.set_defaults(func=cmd_rayleigh, format="json")

    i = sub.add_parser("impedance", help="impedance eigenvalues and dispersion functions over a speed grid")
    i.add_argument("--material", required=True)
    i.add_argument("--psi-deg", type=parse_list, default=None)
    i.add_argument("--v-grid", type=parse_grid, default=None, help="START:STOP:N in m/s (default 50 points in [0, v_hat))")
    i.add_argument("--format", choices=("csv", "json"), default="csv")
    common(i)
    i.set_defaults(func=cmd_impedance)

    s = sub.add_parser("periodic-sweep", help="dispersion of a laminated half-space")
    s.add_argument("--material")
    s.add_argument("--material2")
    s.add_argument("--preset", choices=("fig1",), default=None, help="three equal-fraction bimaterials; --out is a directory")
    s.add_argument("--fraction", type=_positive, default=0.5, help="volume fraction of --material")
    s.add_argument("--period", type=_positive, default=1.0, help="cell length d in m")
    s.add_argument("--psi-deg", type=parse_list, default=None, help="comma list (default 0,15,...,90)")
    s.add_argument("--k-grid", type=parse_grid, default=None, help="START:STOP:N in 1/m (default pi/12d:pi/d:12)")
    s.add_argument("--nh", type=int, default=DEFAULT_NH, help="harmonics along the layering axis")
    s.add_argument("--workers", type=int, default=None, help="process count (capped by STROH_SIGN_THREADS)")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    common(s, methods=("newton", "scaled_newton", "integral", "spectral"))
    s.set_defaults(func=cmd_periodic_sweep)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--subset", choices=sorted(SUBSETS), default="all")
    v.add_argument("--inject", choices=sorted(CHECKS), default=None, help="perturb one check (negative control)")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoSurfaceWaveError as exc:
        print(f"no surface wave: {exc}", file=sys.stderr)
        return EXIT_NO_ROOT
    except (StrohSignError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
