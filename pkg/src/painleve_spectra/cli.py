"""painleve-spectra command line.

    painleve-spectra spectrum   --alpha 5 --beta -8 --epsilon 1
    painleve-spectra eigensolve --case A -k 4 --with-y
    painleve-spectra zero-modes --case 4.2 --samples modes.csv
    painleve-spectra potential  --case C --L 4 --n 81
    painleve-spectra verify     --suite all

Exit codes: 0 success, 1 a verify check failed, 2 invalid flags,
3 a computation failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import __version__
from .cubic_algebra import derive_spectra, roots
from .eigensolver import configure_threads, refine
from .errors import ConfigError, DomainError, PainleveSpectraError
from .potentials import ModelParams, PotentialSpec, case_params, g1, g2, resolve_case
from .special_functions import P4Params, p4_integrate
from .susy import (calibration_offset, physical_energy, superpotentials, variant_for,
                   zero_modes)
from . import verify as _verify

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _number(text: str) -> float:
    """Float or exact fraction such as -2/9."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from None


def fmt(v) -> str:
    """17 significant digits for floats; everything else via str."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _json_value(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in v):
            return "[" + ", ".join(_json_value(x, indent, level + 1) for x in v) + "]"
        items = [pad + _json_value(x, indent, level + 1) for x in v]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "null"
    return json.dumps(str(v))


def dump_json(obj, indent=2) -> str:
    """JSON with every float written to 17 significant digits."""
    return _json_value(obj, indent, 0) + "\n"


def write_csv(out, header: List[str], rows, meta: dict):
    for k, v in meta.items():
        out.write(f"# {k}: {fmt(v)}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _add_model_flags(p, need_solution):
    g = p.add_argument_group("model")
    g.add_argument("--case", help="catalogue case A, A2, B, C, D, E (or 4.1-4.6)")
    g.add_argument("--alpha", type=_number)
    g.add_argument("--beta", type=_number, help="accepts fractions, e.g. -2/9")
    g.add_argument("--epsilon", type=int, choices=(1, -1))
    g.add_argument("--hbar", type=_number, default=1.0)
    g.add_argument("--omega", type=_number, default=1.0)
    if need_solution:
        g.add_argument("--t", type=_number, default=0.0, help="erfc family parameter (D, E)")
        g.add_argument("--z0", type=_number, help="seed point for an integrated P4 solution")
        g.add_argument("--f0", type=_number)
        g.add_argument("--fp0", type=_number)


def _add_output_flags(p, default_format="csv"):
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("-o", "--output", help="output file (default stdout)")


def _add_grid_flags(p, n_default=2000):
    p.add_argument("--L", type=_number, default=12.0, help="grid half-width in units of sqrt(hbar/omega)")
    p.add_argument("--n", type=int, default=n_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="painleve-spectra",
                                     description="Spectra of P4-built superintegrable potentials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="energy series allowed by the cubic algebra")
    _add_model_flags(p, need_solution=False)
    p.add_argument("--p-max", type=int, default=8)
    p.add_argument("--include-unphysical", action="store_true",
                   help="keep series whose y oscillator energy is negative")
    _add_output_flags(p)

    p = sub.add_parser("eigensolve", help="finite-difference levels of the x part")
    _add_model_flags(p, need_solution=True)
    _add_grid_flags(p)
    p.add_argument("-k", "--levels", type=int, default=8)
    p.add_argument("--tol", type=_number, default=1e-6)
    p.add_argument("--with-y", action="store_true", help="add 2D levels (x levels + y oscillator)")
    _add_output_flags(p)

    p = sub.add_parser("zero-modes", help="zero modes of the ladder operators")
    _add_model_flags(p, need_solution=True)
    _add_grid_flags(p, n_default=2001)
    p.add_argument("--samples", help="write (x, psi) samples of normalizable modes to this CSV")
    p.add_argument("--stride", type=int, default=10, help="keep every stride-th grid point in samples")
    _add_output_flags(p)

    p = sub.add_parser("potential", help="table of (x, V)")
    _add_model_flags(p, need_solution=True)
    _add_grid_flags(p, n_default=401)
    p.add_argument("--y", type=_number, default=0.0, help="y at which V(x, y) is tabulated")
    p.add_argument("--closed", action="store_true", help="use the catalogue closed form")
    _add_output_flags(p)

    p = sub.add_parser("verify", help="run self-check suites")
    p.add_argument("--suite", choices=_verify.SUITES + ("all",), default="all")
    _add_output_flags(p, default_format="json")
    return parser


def _params(args) -> ModelParams:
    if args.case is not None:
        if any(getattr(args, k) is not None for k in ("alpha", "beta", "epsilon")):
            raise UsageError("give either --case or --alpha/--beta/--epsilon, not both")
        return case_params(args.case, args.hbar, args.omega)
    missing = [k for k in ("alpha", "beta", "epsilon") if getattr(args, k) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + k for k in missing) + " (or use --case)")
    return ModelParams(args.alpha, args.beta, args.epsilon, args.hbar, args.omega)


def _validate(args):
    if getattr(args, "hbar", 1.0) <= 0 or getattr(args, "omega", 1.0) <= 0:
        raise UsageError("--hbar and --omega must be positive")
    if hasattr(args, "L") and not args.L > 0:
        raise UsageError("--L must be positive")
    if hasattr(args, "n"):
        least = 2 if args.command == "potential" else 64
        if args.n < least:
            raise UsageError(f"--n must be at least {least}")
    if hasattr(args, "levels") and args.levels < 1:
        raise UsageError("--levels must be at least 1")
    if hasattr(args, "tol") and not args.tol >= 1e-10:
        raise UsageError("--tol must be at least 1e-10")
    if hasattr(args, "p_max") and args.p_max < 0:
        raise UsageError("--p-max must be non-negative")
    if hasattr(args, "stride") and args.stride < 1:
        raise UsageError("--stride must be at least 1")
    seed = [getattr(args, k, None) for k in ("z0", "f0", "fp0")]
    if any(v is not None for v in seed) and not all(v is not None for v in seed):
        raise UsageError("--z0, --f0 and --fp0 go together")
    if hasattr(args, "z0") and args.case is None and seed[0] is None:
        raise UsageError("give --case or a P4 seed (--z0 --f0 --fp0 with --alpha --beta --epsilon)")
    if hasattr(args, "z0") and args.case is not None and seed[0] is not None:
        raise UsageError("a P4 seed cannot be combined with --case")


def _spec(args, params: ModelParams, closed=False) -> PotentialSpec:
    if args.case is not None:
        return PotentialSpec.from_case(args.case, args.hbar, args.omega, t=args.t, closed=closed)
    if closed:
        raise UsageError("--closed needs --case")
    zmax = math.sqrt(params.lam) * args.L
    targets = np.linspace(-zmax, zmax, 801)
    sol = p4_integrate(P4Params(params.alpha, params.beta), args.z0, args.f0, args.fp0, targets,
                       tol=1e-13)
    return PotentialSpec("p4", params, solution=sol)


def _meta(args, params: Optional[ModelParams] = None):
    meta = {"program": f"painleve-spectra {__version__}", "command": args.command}
    if params is not None:
        meta.update(alpha=params.alpha, beta=params.beta, epsilon=params.epsilon,
                    hbar=params.hbar, omega=params.omega)
    for k in ("case", "t", "z0", "f0", "fp0", "L", "n", "levels", "tol", "p_max", "y", "suite"):
        v = getattr(args, k, None)
        if v is not None:
            meta[k] = resolve_case(v).case_id if k == "case" else v
    return meta


def _emit(args, text: str):
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(args, meta, header, rows, json_body):
    if args.format == "json":
        return dump_json({"schema_version": SCHEMA_VERSION, "metadata": meta, **json_body})
    buf = io.StringIO()
    write_csv(buf, header, rows, meta)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _complex(z: complex):
    z = complex(z)
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return float(z.real)
    return f"{format(z.real, '.17g')}{format(z.imag, '+.17g')}j"


def cmd_spectrum(args) -> int:
    params = _params(args)
    series = derive_spectra(params, p_max=args.p_max, include_unphysical=args.include_unphysical)
    hw = params.hbar * params.omega
    records = []
    for s in series:
        phi = s.structure_function(0)
        zeros = [_complex(r - phi.u) for r in phi.roots]
        records.append({
            "series": s.case_id, "base": s.intercept, "slope": s.slope,
            "valid_p": list(s.valid_p), "infinite": s.infinite, "x_ladder": s.x_ladder,
            "physical": s.physical, "coincident": list(s.coincident),
            "x_base": s.intercept - hw / 2, "phi_roots": zeros,
        })
    header = ["series", "base", "slope", "valid_p", "infinite", "x_ladder", "physical",
              "coincident", "x_base", "phi_roots"]
    rows = [[r["series"], r["base"], r["slope"], ";".join(map(str, r["valid_p"])), r["infinite"],
             r["x_ladder"], r["physical"], ";".join(r["coincident"]), r["x_base"],
             ";".join(fmt(z) for z in r["phi_roots"])] for r in records]
    meta = _meta(args, params)
    meta["root_names"] = ";".join(roots(params))
    _emit(args, _render(args, meta, header, rows, {"series": records}))
    return EXIT_OK


def minkowski_levels(x_levels, hw, count):
    """Lowest ``count`` sums E_x + hw (m + 1/2), with their (x index, m)."""
    sums = [(ex + hw * (m + 0.5), i, m) for i, ex in enumerate(x_levels) for m in range(count)]
    return sorted(sums)[:count]


def cmd_eigensolve(args) -> int:
    params = _params(args)
    spec = _spec(args, params)
    L = args.L * math.sqrt(params.hbar / params.omega)
    configure_threads()
    res = refine(lambda x: g1(spec, x), args.levels, L=L, tol=args.tol, hbar=params.hbar, n0=args.n)
    levels = [(i, lv.energy, lv.error_estimate) for i, lv in enumerate(res.levels)]
    meta = _meta(args, params)
    meta["final_n"] = res.n
    body = {"x_levels": [{"level": i, "energy": e, "error_estimate": d} for i, e, d in levels]}
    header = ["level", "energy", "error_estimate"]
    rows = [list(r) for r in levels]
    if args.with_y:
        hw = params.hbar * params.omega
        two = minkowski_levels([e for _, e, _ in levels], hw, args.levels)
        body["xy_levels"] = [{"level": j, "energy": e, "x_level": i, "y_quanta": m,
                              "error_estimate": levels[i][2]} for j, (e, i, m) in enumerate(two)]
        header = ["part"] + header
        rows = [["x"] + r for r in rows] + [["xy", j, e, levels[i][2]]
                                             for j, (e, i, m) in enumerate(two)]
    _emit(args, _render(args, meta, header, rows, body))
    return EXIT_OK


def cmd_zero_modes(args) -> int:
    params = _params(args)
    spec = _spec(args, params)
    W = superpotentials(params, spec.solution)
    variant = variant_for(params)
    L = args.L * math.sqrt(params.hbar / params.omega)
    probe = np.linspace(-3, 3, 61) / math.sqrt(W.sp.lam) + 0.0123
    offset = calibration_offset(params, W, variant, probe)
    records, samples = [], {}
    for op in ("annihilation", "creation"):
        for m in zero_modes(W.sp, W, variant, op, L, args.n).modes:
            records.append({
                "operator": op, "label": m.label, "susy_energy": m.energy,
                "physical_energy": float(physical_energy(params, m.energy, offset)),
                "normalizable": m.normalizable, "reason": m.reason,
            })
            if m.normalizable:
                samples[f"{m.label}_{op[:3]}"] = m.wavefunction.values[::args.stride]
    x = np.linspace(-L, L, args.n)[::args.stride]
    meta = _meta(args, params)
    meta["variant"] = variant
    header = ["operator", "label", "susy_energy", "physical_energy", "normalizable", "reason"]
    rows = [[r[k] for k in header] for r in records]
    body = {"variant": variant, "offset": offset, "modes": records}
    if args.format == "json":
        body["samples"] = {"x": list(x), **{k: list(v) for k, v in samples.items()}}
    _emit(args, _render(args, meta, header, rows, body))
    if args.samples:
        buf = io.StringIO()
        write_csv(buf, ["x"] + list(samples), zip(x, *samples.values()), meta)
        with open(args.samples, "w", newline="\n") as fh:
            fh.write(buf.getvalue())
    return EXIT_OK


def cmd_potential(args) -> int:
    params = _params(args)
    spec = _spec(args, params, closed=args.closed)
    L = args.L * math.sqrt(params.hbar / params.omega)
    x = np.linspace(-L, L, args.n)
    V = g1(spec, x) + g2(params, args.y)
    meta = _meta(args, params)
    body = {"x": list(x), "V": list(V)}
    _emit(args, _render(args, meta, ["x", "V"], zip(x, V), body))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = _verify.run(args.suite)
    ok = _verify.all_passed(results)
    meta = _meta(args)
    body = {"passed": ok,
            "suites": {name: {"passed": all(c.passed for c in checks),
                              "checks": [c.to_dict() for c in checks]}
                       for name, checks in results.items()}}
    header = ["suite", "name", "passed", "measured", "tolerance", "detail"]
    rows = [[name, c.name, c.passed, c.measured, c.tolerance, c.detail]
            for name, checks in results.items() for c in checks]
    _emit(args, _render(args, meta, header, rows, body))
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "spectrum": cmd_spectrum,
    "eigensolve": cmd_eigensolve,
    "zero-modes": cmd_zero_modes,
    "potential": cmd_potential,
    "verify": cmd_verify,
}


_VALUE_FLAGS = {"--alpha", "--beta", "--hbar", "--omega", "--t", "--z0", "--f0", "--fp0",
                "--L", "--tol", "--y"}


def _join_negative_values(argv):
    """argparse takes '-2/9' for a flag; glue such values to their flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and not nxt.startswith("--"):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))      # exits with 2 on bad flags
    try:
        _validate(args)
        configure_threads()
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"painleve-spectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PainleveSpectraError, DomainError) as exc:
        print(f"painleve-spectra: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
