"""Command-line entry point: kleinz {verify,charpoly,z,f0,fsc,ising,ratio,sweep}."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .asympt import (AspectWarning, asymptotic_report, bulk_free_energy, critical_ising_fsc,
                     fsc_ising, ising_critical_beta, ratio_limit, square_lattice_fsc)
from .exact import (MAX_DIMER_VERTICES, calibrate_branch, finite_ratio, polys_for,
                    resolve_orientation, z_bruteforce, z_cover, z_cover_log, z_pfaffian, zmn)
from .graph import BUNDLED, GraphError, build_cover, fisher_graph, lattice, load_graph, validate
from .orient import OrientationError
from .poly import extract_Q, extract_S, poly_identity_suite
from .spectra import ConjectureViolation

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONJECTURE = 0, 1, 2, 3
FIGURES = {
    "2": ("log(Mx/(2Ny))", ("even-odd", "odd-even", "even-even")),
    "4": ("log|tau|", ("critical",)),
}


class UsageError(Exception):
    pass


def threads():
    """Worker cap from KLEINZ_THREADS (default: CPU count)."""
    raw = os.environ.get("KLEINZ_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"KLEINZ_THREADS must be a positive integer, got {raw!r}")
    if k < 1:
        raise UsageError("KLEINZ_THREADS must be a positive integer")
    return k


def parse_weights(text):
    """'x=1.3,y=0.7' -> label dict; '1,2,3' -> per-edge list."""
    if not text:
        return None
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if all("=" in p for p in parts):
            return {k.strip(): float(v) for k, v in (p.split("=", 1) for p in parts)}
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"cannot parse weights {text!r}")


def load(ref, weights=None):
    """A bundled lattice name or a path to a graph JSON file."""
    if ref in BUNDLED:
        g = lattice(ref)
    else:
        path = Path(ref)
        if not path.exists():
            raise UsageError(f"no bundled lattice or file named {ref!r}")
        try:
            g = load_graph(path)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot parse {ref}: {exc}")
    if weights is not None:
        g = g.with_weights(weights)
    return g


def emit(obj):
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if hasattr(x, "value"):
        return x.value
    return str(x)


def require_odd(n):
    if n % 2 == 0:
        raise UsageError("n must be odd on the Klein bottle; use torus tooling for even n")


# ----------------------------------------------------------------------------
# commands

def cmd_verify(args):
    g = load(args.graph, parse_weights(args.weights))
    tol = args.tol or 1e-9
    failures = []
    rep = validate(g, require_even=not args.ising)
    failures += [f"validate: {v}" for v in rep.violations]
    if failures:
        return _verdict(failures, {})
    target = fisher_graph(g, beta=args.beta) if args.ising else g
    checks = {}
    try:
        K = resolve_orientation(target)
        checks["orientation"] = True
        suite = poly_identity_suite(target, K, tol=tol)
        for name, (ok, err) in suite.items():
            checks[name] = err
            if not ok:
                failures.append(f"identity {name}: relative error {err:.3g}")
        branch = calibrate_branch(target, K)
        checks["branch"] = branch.value
        data = polys_for(target, K)
        for m, n in _small_covers(target):
            gc = build_cover(target, m, n)
            exact = z_bruteforce(gc)
            product = zmn(data.R1, data.Rm1, data.P, m, n, data.branch)
            checks[f"Z_{m}{n}"] = exact
            if abs(product - exact) > tol * max(abs(exact), 1.0):
                failures.append(f"oracle Z_{m}{n}: product {product!r} vs enumeration {exact!r}")
        if target.vertex_count <= MAX_DIMER_VERTICES:
            pf, bf = z_pfaffian(target, K), z_bruteforce(target)
            if abs(pf - bf) > tol * max(bf, 1.0):
                failures.append(f"oracle Z: Pfaffian {pf!r} vs enumeration {bf!r}")
    except (OrientationError, GraphError, ValueError) as exc:
        failures.append(f"{type(exc).__name__}: {exc}")
    return _verdict(failures, checks)


def _small_covers(g):
    V = g.vertex_count
    return [(m, n) for n in (1, 3) for m in (1, 2, 3, 4) if m * n * V <= 16 and (m, n) != (1, 1)]


def _verdict(failures, checks):
    emit({"ok": not failures, "failures": failures, "checks": checks})
    return EXIT_FAIL if failures else EXIT_OK


def cmd_charpoly(args):
    g = load(args.graph, parse_weights(args.weights))
    data = polys_for(g)
    out = {"R(z,1)": _laurent(data.R1), "R(z,-1)": _laurent(data.Rm1),
           "P": data.P.to_dict(), "branch": data.branch.value}
    if g.colors is not None:
        S1, Sm1 = extract_S(g, data.K)
        out.update({"S(z,1)": _laurent(S1), "S(z,-1)": _laurent(Sm1), "Q": extract_Q(g, data.K).to_dict()})
    emit(out)
    return EXIT_OK


def _laurent(p):
    return {"terms": [{"k": k, "re": c.real, "im": c.imag} for k, c in sorted(p.coeffs.items())]}


def cmd_z(args):
    require_odd(args.n)
    g = load(args.graph, parse_weights(args.weights))
    if args.method == "product":
        logz = z_cover_log(g, args.m, args.n)
        z = math.exp(logz) if logz < 700 else math.inf
    else:
        z = z_cover(g, args.m, args.n, method=args.method)
        logz = math.log(z) if z > 0 else -math.inf
    emit({"graph": g.name, "m": args.m, "n": args.n, "method": args.method, "Z": z, "log_Z": logz})
    return EXIT_OK


def cmd_f0(args):
    g = load(args.graph, parse_weights(args.weights))
    data = polys_for(g)
    f0 = bulk_free_energy(data.P, args.grid, tol=args.tol or 1e-9, richardson=not args.no_richardson)
    emit({"graph": g.name, "f0": f0, "grid": args.grid, "richardson": not args.no_richardson})
    return EXIT_OK


def cmd_fsc(args):
    g = load(args.graph, parse_weights(args.weights))
    m, n = _shape(args)
    rep = asymptotic_report(g, m, n, grid=args.grid)
    emit(rep.to_dict())
    return EXIT_OK


def _shape(args):
    if args.aspect is not None:
        if args.aspect <= 0:
            raise UsageError("--aspect must be positive")
        return args.m, args.m / args.aspect
    require_odd(args.n)
    return args.m, args.n


def cmd_ising(args):
    require_odd(args.n)
    g = load(args.graph)
    J = parse_weights(args.couplings)
    if isinstance(J, dict):
        raise UsageError("couplings must be a per-edge list")
    beta_c = ising_critical_beta(g, J, tol=args.tol or 1e-12)
    beta = beta_c if args.critical else args.beta
    if beta is None:
        raise UsageError("give --beta or --critical")
    rep = fsc_ising(g, J, beta, args.m, args.n, beta_c=beta_c, grid=args.grid)
    emit({**rep.to_dict(), "beta": beta, "beta_c": beta_c})
    return EXIT_OK


def cmd_ratio(args):
    if args.case:
        emit({"case": args.case, "tau_im": args.tau, "nu": args.nu,
              "limit": ratio_limit(args.case, 1j * args.tau, args.nu)})
        return EXIT_OK
    if not args.graph:
        raise UsageError("give a graph or --case")
    require_odd(args.n)
    g = load(args.graph, parse_weights(args.weights))
    emit({"graph": g.name, "m": args.m, "n": args.n,
          "ratio": finite_ratio(g, args.m, args.n, method=args.method)})
    return EXIT_OK


# ----------------------------------------------------------------------------
# sweeps

def sweep_points(lo, hi, steps):
    if steps < 2:
        raise UsageError("a sweep needs at least 2 steps")
    if not lo < hi:
        raise UsageError(f"sweep range must satisfy lo < hi, got [{lo}, {hi}]")
    return list(np.linspace(lo, hi, steps))


def figure_rows(fig, lo, hi, steps):
    """Rows (param, value, case, tau_im, fsc) for a preset curve set."""
    if fig not in FIGURES:
        raise UsageError(f"unknown figure {fig!r}; choose from {sorted(FIGURES)}")
    label, cases = FIGURES[fig]
    rows = []
    for case in cases:
        for s in sweep_points(lo, hi, steps):
            tau = 1j * math.exp(s)
            fsc = critical_ising_fsc(tau) if case == "critical" else square_lattice_fsc(case, tau)
            rows.append({"param": label, "value": s, "case": case, "tau_im": tau.imag, "fsc": fsc})
    return rows


def _point(g, args, value, outputs):
    row = {"param": args.param, "value": value, "case": "", "tau_im": ""}
    m, n = args.m, args.n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AspectWarning)
        if args.param == "beta":
            J = parse_weights(args.couplings)
            beta_c = ising_critical_beta(g, J)
            rep = fsc_ising(g, J, value, m, n, beta_c=beta_c, grid=args.grid)
            row.update(case=rep.regime, tau_im=rep.taus[0].imag if rep.taus else "")
            extra = {"f0": rep.f0, "fsc": rep.fsc, "beta_c": beta_c}
            if "Z" in outputs:
                from .exact import ising_partition
                extra["Z"] = ising_partition(g, J, value, m, n, log=True)
            return {**row, **{k: extra.get(k, "") for k in outputs}}
        if args.param == "log-aspect":
            gg, n = g, m / math.exp(value)
        else:
            label = args.param.split(":", 1)[1]
            gg = g.with_weights({label: value})
        rep = asymptotic_report(gg, m, n, grid=args.grid)
    row.update(case=rep.case, tau_im=rep.taus[0].imag if rep.taus else "")
    extra = {"f0": rep.f0, "fsc": rep.fsc}
    if "Z" in outputs:
        extra["Z"] = z_cover_log(gg, m, int(n)) if args.param != "log-aspect" else ""
    if "ratio" in outputs and args.param != "log-aspect":
        extra["ratio"] = finite_ratio(gg, m, n)
    return {**row, **{k: extra.get(k, "") for k in outputs}}


def cmd_sweep(args):
    if args.figure:
        rows = figure_rows(args.figure, args.lo, args.hi, args.steps)
        outputs = ["fsc"]
        header = [f"figure {args.figure}", f"range [{args.lo}, {args.hi}] steps {args.steps}"]
    else:
        if not args.graph or not args.param:
            raise UsageError("a sweep needs --figure or a graph with --param")
        if not (args.param in ("beta", "log-aspect") or args.param.startswith("weight:")):
            raise UsageError("--param must be beta, log-aspect or weight:<label>")
        if args.param != "log-aspect":
            require_odd(args.n)
        outputs = args.outputs.split(",")
        unknown = set(outputs) - {"Z", "f0", "fsc", "ratio", "beta_c"}
        if unknown:
            raise UsageError(f"unknown outputs {sorted(unknown)}")
        g = load(args.graph, parse_weights(args.weights))
        values = sweep_points(args.lo, args.hi, args.steps)
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            rows = list(pool.map(lambda v: _point(g, args, float(v), outputs), values))
        header = [f"graph {g.name}", f"weights {g.weights()}", f"param {args.param}",
                  f"range [{args.lo}, {args.hi}] steps {args.steps}", f"m {args.m} n {args.n}",
                  f"grid {args.grid}"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write(f"# kleinz {__version__}\n")
        for line in header:
            out.write(f"# {line}\n")
        writer = csv.DictWriter(out, ["param", "value", "case", "tau_im"] + outputs, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser

def build_parser():
    p = argparse.ArgumentParser(prog="kleinz", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--tol", type=float, default=None, help="override the tolerance of the command")
    sub = p.add_subparsers(dest="command", required=True)

    def graph_cmd(name, fn, help_, optional_graph=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("graph", nargs="?" if optional_graph else None,
                        help=f"bundled lattice ({', '.join(BUNDLED)}) or graph JSON path")
        sp.add_argument("--weights", help="'label=value,...' or a comma list of edge weights")
        sp.add_argument("--tol", type=float, default=argparse.SUPPRESS)
        sp.set_defaults(fn=fn)
        return sp

    sp = graph_cmd("verify", cmd_verify, "run the consistency and oracle checks")
    sp.add_argument("--ising", action="store_true", help="treat the input as an Ising base graph")
    sp.add_argument("--beta", type=float, default=0.7)

    graph_cmd("charpoly", cmd_charpoly, "print R, P (and S, Q) as JSON")

    sp = graph_cmd("z", cmd_z, "dimer partition function of the m x n cover")
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--method", choices=("product", "pfaffian", "brute"), default="product")

    sp = graph_cmd("f0", cmd_f0, "bulk free energy")
    sp.add_argument("--grid", type=int, default=1024)
    sp.add_argument("--no-richardson", action="store_true")

    sp = graph_cmd("fsc", cmd_fsc, "finite-size correction report")
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--aspect", type=float, help="m/n as a real number instead of --n")
    sp.add_argument("--grid", type=int, default=1024)

    sp = graph_cmd("ising", cmd_ising, "Ising report through the Fisher graph")
    sp.add_argument("--couplings", help="comma list of per-edge couplings (default 1)")
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--beta", type=float)
    grp.add_argument("--critical", action="store_true")
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--grid", type=int, default=1024)

    sp = graph_cmd("ratio", cmd_ratio, "Z(cover)^2 / Z(torus cover), finite or limiting", True)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--method", choices=("auto", "pfaffian", "product"), default="auto")
    sp.add_argument("--case", help="limit class instead of a finite ratio")
    sp.add_argument("--tau", type=float, default=1.0, help="Im tau for --case")
    sp.add_argument("--nu", type=float, default=0.0)

    sp = graph_cmd("sweep", cmd_sweep, "CSV sweep over a parameter or a figure", True)
    sp.add_argument("--figure", choices=sorted(FIGURES))
    sp.add_argument("--param", help="beta, log-aspect or weight:<label>")
    sp.add_argument("--lo", type=float, default=-3.0)
    sp.add_argument("--hi", type=float, default=3.0)
    sp.add_argument("--steps", type=int, default=121)
    sp.add_argument("--outputs", default="fsc")
    sp.add_argument("--couplings")
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--grid", type=int, default=256)
    sp.add_argument("--out", help="CSV path (default stdout)")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "tol"):
        args.tol = None
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"kleinz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConjectureViolation as exc:
        print(f"kleinz: conjecture violation: {exc}", file=sys.stderr)
        return EXIT_CONJECTURE
    except (GraphError, OrientationError) as exc:
        print(f"kleinz: invalid graph: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError, KeyError) as exc:
        print(f"kleinz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
