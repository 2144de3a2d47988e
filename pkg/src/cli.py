"""
Polyharmonic Field Toolkit - Command Line Interface

Entry point ``phg`` with one subcommand per experiment. Results go to the
paths given with --out, or to the output directories from config.

Exit codes: 0 ok, 1 failed check, 2 usage or input error, 3 memory budget.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from src.config import KERNEL_CONFIG, ResourceBudgetError, get_file_path
from src.fields import (
    expected_sobolev_gap,
    extend_field,
    get_sampler,
    normalize_kind,
    pairing_error_variance,
    sample_field_white_noise,
)
from src.gmc import GmcSpec, gamma_thresholds, get_measure, hierarchical_convergence, mass_moment_report
from src.grid_io import table_records, write_grid, write_pgm, write_report, write_table
from src.kernels import KernelKind, KernelTag, kernel_profile, log_divergence_estimate, ui_bound_table
from src.torus import TorusSpec
from src.transform import SpectralFunction
from src.verify import SUITES, report_payload, run_suite

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class CheckFailed(Exception):
    """A command ran to completion but one of its checks failed."""


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got {text!r}") from None


def parse_test_function(text: str, n: int) -> SpectralFunction:
    """``phi:z1,...,zn`` for a single eigenmode, ``file:path`` for a JSON SpectralFunction."""
    prefix, _, body = text.partition(":")
    if prefix == "phi":
        z = tuple(parse_int_list(body))
        if len(z) != n:
            raise ValueError(f"Mode {z} does not have dimension n={n}")
        return SpectralFunction.mode(z)
    if prefix == "file":
        f = SpectralFunction.load(body)
        if f.n != n:
            raise ValueError(f"{body} holds a function in dimension {f.n}, expected {n}")
        return f
    raise ValueError(f"Test function must look like phi:1,0 or file:path, got {text!r}")


def _out(args, directory: str, default: str) -> Path:
    return Path(args.out) if args.out else get_file_path(directory, default)


def _write_table_and_json(path: Path, table, extra: Optional[dict] = None) -> None:
    write_table(path, table)
    payload = {"attrs": dict(table.attrs), "rows": table_records(table)}
    payload.update(extra or {})
    write_report(path.with_suffix(".json"), payload)


# --- commands ----------------------------------------------------------------------

def cmd_sample(args) -> int:
    spec = TorusSpec(args.n, args.L)
    if args.route == "white-noise":
        sample = sample_field_white_noise(spec, args.seed)
    else:
        sample = get_sampler(spec, args.kind, workers=args.workers).sample(args.seed)
    grid = sample.grid if args.M is None else extend_field(sample, args.extend, args.M)
    out = _out(args, "grids", f"field_n{spec.n}_L{spec.L}_seed{args.seed}.grid")
    meta = {"route": args.route, "extension": None if args.M is None else args.extend}
    write_grid(out, grid, sample.kind, L=spec.L, seed=args.seed, meta=meta)
    if args.pgm:
        write_pgm(args.pgm, grid)
    print(f"seed={args.seed} lattice_mean_residual={abs(sample.grid.mean()):.3e} out={out}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    kind = KernelKind.parse(args.kind, K=args.K, s=args.s)
    L = args.L if args.L is not None else (args.K if kind.tag is KernelTag.CONT_TRUNC else None)
    if L is None:
        raise ValueError(f"--L is required for kind {args.kind}")
    spec = TorusSpec(args.n, L)
    profile = kernel_profile(kind, spec, args.M)
    out = _out(args, "grids", f"kernel_{kind.tag.value}_n{spec.n}_L{spec.L}_M{profile.M}.grid")
    meta = {"K": kind.K, "s": kind.s, "diag": profile.diag}
    write_grid(out, profile.profile, kind.tag.value, L=spec.L, meta=meta)
    sidecar = {
        "kind": kind.tag.value,
        "n": spec.n,
        "L": spec.L,
        "M": profile.M,
        "K": kind.K,
        "s": kind.s,
        "diag": profile.diag,
        "coefficient_law": kind.describe(),
    }
    write_report(Path(str(out) + ".json"), sidecar)
    if args.pgm:
        write_pgm(args.pgm, profile.profile)
    print(f"kind={kind.tag.value} M={profile.M} diag={profile.diag:.6f} out={out}")
    return EXIT_OK


def cmd_gmc(args) -> int:
    spec = TorusSpec(args.n, args.L)
    g = GmcSpec(args.gamma, args.kind, args.M, args.K)
    measure = get_measure(spec, g, workers=args.workers)
    sample = measure.sampler.sample(args.seed)
    weights = measure.weights(sample)
    out = _out(args, "grids", f"gmc_{g.kind}_n{spec.n}_L{spec.L}_seed{args.seed}.grid")
    meta = {"gamma": g.gamma, "diag": weights.diag_used, **gamma_thresholds(spec.n)}
    write_grid(out, weights.atoms, g.kind, L=spec.L, seed=args.seed, meta=meta)
    if args.pgm:
        write_pgm(args.pgm, weights.atoms)
    print(f"seed={args.seed} total_mass={weights.total_mass:.12f} out={out}")

    if args.moments:
        report = mass_moment_report(spec, g, args.moments, args.seed0, workers=args.workers)
        path = Path(args.report) if args.report else get_file_path("reports", f"moments_{g.kind}_n{spec.n}_L{spec.L}.csv")
        _write_table_and_json(path, report)
        print(report.to_string(index=False))
        if not report["passed"].all():
            raise CheckFailed("Total-mass moments fall outside the sigma band")
    return EXIT_OK


def cmd_converge_field(args) -> int:
    f = parse_test_function(args.f, args.n)
    kind = normalize_kind(args.kind)
    K = args.K
    if args.sobolev is not None and K is None:
        K = KERNEL_CONFIG["sobolev_cutoff_factor"] * max(args.Ls)
    rows = []
    for L in args.Ls:
        spec = TorusSpec(args.n, L)
        result = pairing_error_variance(f, spec, args.K_tail, kind, args.route)
        row = {"L": L, "total": result.total, "inband": result.inband, "alias": result.alias, "tail": result.tail}
        if args.sobolev is not None:
            row["sobolev_fourier"] = expected_sobolev_gap(spec, kind, args.sobolev, K, "fourier")
            row["sobolev_pwc"] = expected_sobolev_gap(spec, kind, args.sobolev, K, "pwc")
        rows.append(row)
    table = pd.DataFrame(rows)
    table.attrs.update({"n": args.n, "f": args.f, "kind": args.kind, "route": args.route})
    if args.sobolev is not None:
        table.attrs.update({"sobolev_s": args.sobolev, "sobolev_K": K})
    out = _out(args, "reports", f"converge_field_n{args.n}.csv")
    _write_table_and_json(out, table)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_converge_measure(args) -> int:
    f = parse_test_function(args.f, args.n)
    g = GmcSpec(args.gamma, args.kind, args.M, args.K)
    table = hierarchical_convergence(
        args.n, args.a, args.l_max, g, f, K_ref=args.K_ref, num_seeds=args.seeds, seed0=args.seed0, workers=args.workers
    )
    out = _out(args, "reports", f"converge_measure_n{args.n}_{g.kind}.csv")
    _write_table_and_json(out, table)
    print(table.to_string(index=False))
    print(f"decreasing={table.attrs['decreasing']}")
    return EXIT_OK


def cmd_bound(args) -> int:
    kinds = [KernelKind.parse(name) for name in args.kinds.split(",")]
    table = ui_bound_table(args.n, args.gamma, kinds, args.Ls)
    out = _out(args, "reports", f"bound_n{args.n}.csv")
    _write_table_and_json(out, table)
    print(table.to_string(index=False))
    print(f"gamma_*={table.attrs['gamma_lower']:.6f} gamma^*={table.attrs['gamma_upper']:.6f}")
    return EXIT_OK


def cmd_log_div(args) -> int:
    sup, table = log_divergence_estimate(args.n, args.K, args.M, args.r_min)
    table.attrs.update({"n": args.n, "K": args.K, "M": args.M, "r_min": args.r_min, "C_estimate": sup})
    out = _out(args, "reports", f"log_div_n{args.n}_K{args.K}.csv")
    _write_table_and_json(out, table)
    print(f"C_estimate={sup:.6f} out={out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    table = run_suite(args.suite)
    payload = report_payload(args.suite, table)
    out = _out(args, "reports", f"verify_{args.suite}.json")
    write_report(out, payload)
    print(table.to_string(index=False))
    if not payload["passed"]:
        raise CheckFailed(f"{int((~table['passed']).sum())} checks failed, see {out}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phg", description="Polyharmonic Gaussian fields and chaos measures on tori")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help: str):
        p.add_argument("--out", default=None, help=out_help)
        p.add_argument("--workers", type=int, default=None, help="Threads for seed chunks (results do not depend on it)")

    p = sub.add_parser("sample", help="Sample one field and write its grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", default="standard", choices=["standard", "reduced", "spectrally-reduced"])
    p.add_argument("--route", default="spectral", choices=["spectral", "white-noise"])
    p.add_argument("--M", type=int, default=None, help="Write the extension on the M-grid instead of the lattice")
    p.add_argument("--extend", default="fourier", choices=["fourier", "pwc"])
    p.add_argument("--pgm", default=None, help="Also write a PGM heatmap (n=2)")
    common(p, "Grid file path")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("kernel", help="Write a kernel profile k(0, u)")
    p.add_argument("--kind", required=True, help=", ".join(t.value for t in KernelTag))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--pgm", default=None, help="Also write a PGM heatmap (n=2)")
    common(p, "Grid file path (a .json sidecar is written next to it)")
    p.set_defaults(handler=cmd_kernel)

    p = sub.add_parser("gmc", help="Chaos measure of one field, optional moment report")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kind", default="discrete")
    p.add_argument("--K", type=int, default=None, help="Continuum cutoff of flat measures")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--moments", type=int, default=0, help="Seeds for the total-mass moment report")
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--report", default=None, help="CSV path of the moment report")
    p.add_argument("--pgm", default=None)
    common(p, "Grid file path of the atoms")
    p.set_defaults(handler=cmd_gmc)

    p = sub.add_parser("converge-field", help="Exact pairing error variance over lattice sizes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--f", required=True, help="phi:z1,...,zn or file:path")
    p.add_argument("--Ls", type=parse_int_list, required=True)
    p.add_argument("--kind", default="standard", choices=["standard", "reduced", "spectrally-reduced"])
    p.add_argument("--route", default="lattice", choices=["lattice", "fourier", "pwc"])
    p.add_argument("--K-tail", dest="K_tail", type=int, default=None)
    p.add_argument("--sobolev", type=float, default=None, help="Also report E||ext(h_L) - h||^2 in H^{-s} for this s")
    p.add_argument("--K", type=int, default=None, help="Truncation of the H^{-s} norm (default 3 * max L)")
    common(p, "CSV path")
    p.set_defaults(handler=cmd_converge_field)

    p = sub.add_parser("converge-measure", help="Common-noise convergence of chaos measures")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, default=3)
    p.add_argument("--l-max", dest="l_max", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kind", default="discrete")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--f", required=True)
    p.add_argument("--K-ref", dest="K_ref", type=int, default=None)
    p.add_argument("--K", type=int, default=None, help="Continuum cutoff of flat measures (default K_ref)")
    p.add_argument("--seeds", type=int, default=256)
    p.add_argument("--seed0", type=int, default=0)
    common(p, "CSV path")
    p.set_defaults(handler=cmd_converge_measure)

    p = sub.add_parser("bound", help="Uniform integrability table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--Ls", type=parse_int_list, required=True)
    p.add_argument("--kinds", default="semidisc,flat,enhanced")
    common(p, "CSV path")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("log-div", help="Logarithmic divergence constant of the truncated kernel")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--r-min", dest="r_min", type=float, default=0.05)
    common(p, "CSV path")
    p.set_defaults(handler=cmd_log_div)

    p = sub.add_parser("verify", help="Run the invariant suites")
    p.add_argument("--suite", default="identities", choices=list(SUITES))
    common(p, "JSON report path")
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CheckFailed as e:
        logging.error(str(e))
        return EXIT_CHECK_FAILED
    except ResourceBudgetError as e:
        logging.error(str(e))
        return EXIT_BUDGET
    except (ValueError, OSError) as e:
        logging.error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
