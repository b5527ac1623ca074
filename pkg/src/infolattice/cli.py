"""Command-line front end.

Subcommands:

* ``lattice``: information lattice of a state file (dense or MPS).
* ``kitaev``: one disordered-chain realization end to end (state, lattice,
  length summary).
* ``ensemble``: disorder sweep from a JSON config to JSON-lines records
  plus an aggregate CSV.
* ``plotdata``: tidy CSV exports (per-scale profile, lattice heatmap,
  critical-amplitude fit) for external plotting.

Exit codes: 0 success, 1 bad input, 2 numerical failure, 3 partial
ensemble. Every output carries a provenance header (version, config hash,
seed) as '#' comments in CSV files or a ``_provenance`` object in JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dense import (
    InvalidDensityMatrixError,
    dense_entropy_provider,
    read_state_binary,
    read_state_json,
    write_state_binary,
)
from .ensemble import (
    SweepConfig,
    aggregate,
    read_records_jsonl,
    run_sweep,
    write_aggregate_csv,
)
from .gaussian import (
    PROFILE_NOISE_PER_WINDOW,
    InvalidCovarianceError,
    coupling_from_hoppings,
    gaussian_entropy_provider,
    ground_covariance,
)
from .kitaev import (
    global_ground_state,
    sample_realization,
    sector_eigenpair_direct,
    write_realization_json,
)
from .lattice import (
    SUM_RULE_TOL,
    SSAViolationError,
    info_per_scale,
    local_information,
    read_lattice_csv,
    read_profile_json,
    write_lattice_csv,
)
from .mps import mps_entropy_provider, read_mps
from .scales import critical_alpha_fit, summarize, triangle_window, write_summary_json

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3

_NUMERICAL_ERRORS = (
    SSAViolationError,
    InvalidDensityMatrixError,
    InvalidCovarianceError,
    np.linalg.LinAlgError,
)


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with the documented code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_BAD_INPUT)


def _config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(params: dict, seed: int | None = None) -> dict:
    doc = {"version": __version__, "config_hash": _config_hash(params)}
    if seed is not None:
        doc["seed"] = seed
    return doc


def _comments(prov: dict) -> list[str]:
    lines = [f"# infolattice {prov['version']}", f"# config {prov['config_hash']}"]
    if "seed" in prov:
        lines.append(f"# seed {prov['seed']}")
    return lines


def _load_state(path: str, fmt: str):
    if fmt == "dense":
        if path.endswith(".json"):
            with open(path) as fh:
                return read_state_json(fh)[0]
        return read_state_binary(path)
    if fmt == "mps":
        with open(path, "rb") as fh:
            return read_mps(fh)[0]
    raise ValueError(f"unknown input format {fmt!r}")


def cmd_lattice(args) -> int:
    state = _load_state(args.input, args.input_format)
    provider = (
        dense_entropy_provider(state)
        if args.input_format == "dense"
        else mps_entropy_provider(state)
    )
    lat = local_information(provider)
    params = {"cmd": "lattice", "input_format": args.input_format}
    prov = _provenance(params)
    if args.check_sum_rule:
        residual = lat.sum_rule_residual()
        print(f"sum-rule residual: {residual:.3e} (tolerance {SUM_RULE_TOL * lat.L:.3e})")
        if residual > SUM_RULE_TOL * lat.L:
            print("sum rule violated", file=sys.stderr)
            return EXIT_NUMERICAL
    with open(args.out, "w") as fh:
        write_lattice_csv(lat, fh, comments=_comments(prov))
    return EXIT_OK


def cmd_kitaev(args) -> int:
    backend = args.backend
    if backend == "auto":
        backend = "gaussian" if args.g == 0.0 and args.which == "ground" else "dense"
    if backend == "gaussian" and args.g != 0.0:
        print("gaussian backend requires g = 0", file=sys.stderr)
        return EXIT_BAD_INPUT
    if backend == "gaussian" and args.which == "midspectrum":
        print("midspectrum selection requires the dense backend", file=sys.stderr)
        return EXIT_BAD_INPUT
    if backend == "dense" and args.L > 14:
        print("dense backend limited to L <= 14", file=sys.stderr)
        return EXIT_BAD_INPUT

    params = {
        "cmd": "kitaev",
        "which": args.which,
        "L": args.L,
        "delta": args.delta,
        "g": args.g,
        "backend": backend,
    }
    prov = _provenance(params, seed=args.seed)
    realization = sample_realization(args.L, args.g, args.delta, args.seed)
    flags = []
    noise = 0.0
    if backend == "gaussian":
        cov = ground_covariance(coupling_from_hoppings(realization.t))
        if cov.near_zero_modes:
            flags.append("near-zero-mode")
        provider = gaussian_entropy_provider(cov)
        noise = PROFILE_NOISE_PER_WINDOW
    else:
        if args.which == "ground":
            pair = global_ground_state(realization)
        else:
            pair = sector_eigenpair_direct(realization, "even", "closest-to-zero")
        if pair.tie_break:
            flags.append("tie-break")
        if args.out_state:
            write_state_binary(pair.state, args.out_state)
        provider = dense_entropy_provider(pair.state)
    lat = local_information(provider)
    profile = info_per_scale(lat)
    summary = summarize(profile, noise_per_window=noise)
    if flags:
        print(f"flags: {','.join(flags)}", file=sys.stderr)
    if args.out_realization:
        with open(args.out_realization, "w") as fh:
            write_realization_json(realization, fh, provenance=prov)
    if args.out_lattice:
        with open(args.out_lattice, "w") as fh:
            write_lattice_csv(lat, fh, comments=_comments(prov))
    if args.out_summary:
        with open(args.out_summary, "w") as fh:
            write_summary_json(summary, fh, provenance=prov)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    with open(args.config) as fh:
        config = SweepConfig.from_dict(json.load(fh))
    params = {"cmd": "ensemble", "config": config.to_dict()}
    prov = _provenance(params, seed=config.base_seed)

    skip = set()
    mode = "w"
    if args.resume and Path(args.out).exists():
        with open(args.out) as fh:
            skip = {rec.key() for rec in read_records_jsonl(fh)}
        mode = "a"
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("INFOLATTICE_JOBS", config.workers))

    with open(args.out, mode) as fh:
        if mode == "w":
            fh.write(f"# infolattice {prov['version']} config {prov['config_hash']}\n")
        for record in run_sweep(config, jobs=jobs, skip_keys=skip):
            fh.write(record.to_json_line() + "\n")
            fh.flush()

    with open(args.out) as fh:
        records = read_records_jsonl(fh)
    agg_path = args.agg_out or (args.out + ".agg.csv")
    with open(agg_path, "w") as fh:
        write_aggregate_csv(aggregate(records), fh, comments=_comments(prov))
    n_failed = sum(r.failed for r in records)
    if n_failed:
        print(f"{n_failed} realization(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_plotdata(args) -> int:
    if args.kind not in ("per-scale", "lattice-heatmap", "alpha-fit"):
        print(f"unknown plot kind {args.kind!r}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if bool(args.lattice) == bool(args.profiles):
        print("exactly one of --lattice / --profiles is required", file=sys.stderr)
        return EXIT_BAD_INPUT
    params = {"cmd": "plotdata", "kind": args.kind}
    header = _comments(_provenance(params))

    rows: list[str] = []
    if args.profiles:
        if args.kind != "per-scale":
            print("--profiles supports only the per-scale kind", file=sys.stderr)
            return EXIT_BAD_INPUT
        rows.append("source,ell,I_ell")
        for path in args.profiles:
            with open(path) as fh:
                profile, _ = read_profile_json(fh)
            name = Path(path).name
            for ell, v in enumerate(profile.totals):
                rows.append(f"{name},{ell},{v:.12g}")
    else:
        with open(args.lattice) as fh:
            lat, _ = read_lattice_csv(fh)
        if args.kind == "per-scale":
            profile = info_per_scale(lat)
            rows.append("ell,I_ell")
            for ell, v in enumerate(profile.totals):
                rows.append(f"{ell},{v:.12g}")
        elif args.kind == "lattice-heatmap":
            rows.append("ell,two_n,i")
            for sid in lat.ids():
                rows.append(f"{sid.ell},{sid.two_n},{lat.values[sid]:.12g}")
        else:
            ell_min = args.ell_min if args.ell_min is not None else 2
            width = triangle_window(lat.L)[1]
            ell_max = args.ell_max if args.ell_max is not None else width - 1
            fit = critical_alpha_fit(lat, ell_min, ell_max)
            rows.append("ell,i_avg,alpha_times_invsq")
            from .scales import triangle_scale_average

            for ell in range(ell_min, ell_max + 1):
                avg = triangle_scale_average(lat, ell)
                rows.append(f"{ell},{avg:.12g},{fit.alpha / ell**2:.12g}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(header + rows) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="infolattice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="information lattice of a state file")
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=("dense", "mps"), default="dense")
    p.add_argument("--out", required=True)
    p.add_argument("--check-sum-rule", action="store_true")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("kitaev", help="one disordered-chain realization")
    p.add_argument("which", choices=("ground", "midspectrum"))
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--backend", choices=("auto", "dense", "gaussian"), default="auto")
    p.add_argument("--out-state")
    p.add_argument("--out-lattice")
    p.add_argument("--out-summary")
    p.add_argument("--out-realization")
    p.set_defaults(func=cmd_kitaev)

    p = sub.add_parser("ensemble", help="disorder sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--agg-out")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("plotdata", help="tidy CSV exports for plotting")
    p.add_argument("--lattice")
    p.add_argument("--profiles", nargs="*")
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ell-min", type=int, default=None)
    p.add_argument("--ell-max", type=int, default=None)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
