"""Command-line front end: ``tdsic-lab {run,static,check,oracle}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import RunConfig, dump_config, load_config
from .dynamics import run_dynamics
from .errors import ConfigError, DivergenceError, NonConvergenceError, StabilityError, StallError, TdsicError
from .hamiltonians import densities
from .model import System1D
from .observables import dipole_spectrum, write_spectrum, write_trajectory
from .oracles import ORACLES, format_rows, run_oracle
from .static import StaticResult, solve_static

log = logging.getLogger("tdsiclab")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def output_prefix(cfg: RunConfig) -> Path:
    prefix = Path(cfg.prefix)
    override = os.environ.get("TDSIC_OUT")
    if override:
        prefix = Path(override) / prefix.name
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _artifact(prefix: Path, scheme, multi, suffix):
    tag = f"_{scheme.value}" if multi else ""
    return prefix.with_name(f"{prefix.name}{tag}_{suffix}")


def format_static(cfg: RunConfig, results: dict, failures: dict) -> str:
    g = cfg.grid
    p = cfg.model
    out = [
        "# static ground states",
        f"# model: a={p.a} b={p.b} R={p.R} z={p.z} N={p.n_electrons} gamma={p.gamma}",
        f"# grid: n={g.n_points} dx={g.spacing}",
        "",
        f"{'scheme':<6} {'orbital':>7} {'eps (Ha)':>20}",
    ]
    for scheme, res in results.items():
        for i, e in enumerate(res.energies):
            out.append(f"{scheme.value:<6} {i:>7d} {e:>20.12f}")
    out += ["", f"{'scheme':<6} {'E_total (Ha)':>20} {'IP (Ha)':>14} {'orb. resid':>11} {'sym resid':>11} {'iter':>6}"]
    for scheme, res in results.items():
        out.append(
            f"{scheme.value:<6} {res.total_energy:>20.12f} {res.ionization_potential:>14.8f} "
            f"{res.orbital_residual:>11.2e} {res.sym_residual:>11.2e} {res.iterations:>6d}"
        )
    for scheme, err in failures.items():
        out.append(f"{scheme.value:<6} FAILED: {err}")
    if results:
        out += ["", "# per-orbital densities: localizing set (loc) and diagonalizing set (diag)"]
        cols = ["x"]
        data = [g.x]
        for scheme, res in results.items():
            for tag, s in (("loc", res.localizing_set), ("diag", res.diagonalizing_set)):
                for i, row in enumerate(densities(s)):
                    cols.append(f"{scheme.value}_{tag}_{i}")
                    data.append(row)
        out.append(" ".join(f"{c:>16}" for c in cols))
        for k in range(g.n_points):
            out.append(" ".join(f"{col[k]:>16.9e}" for col in data))
    return "\n".join(out) + "\n"


def run_static(cfg: RunConfig, prefix: Path):
    system = System1D(cfg.grid, cfg.model)
    results: dict = {}
    failures: dict = {}
    for scheme in cfg.schemes:
        log.info("static %s", scheme.value)
        try:
            results[scheme] = solve_static(scheme, system, cfg.static)
        except (NonConvergenceError, StallError, DivergenceError) as exc:
            failures[scheme] = exc
    path = prefix.with_name(prefix.name + "_static.txt")
    path.write_text(format_static(cfg, results, failures), encoding="utf-8")
    print(f"wrote {path}")
    return system, results, failures


def run_all(cfg: RunConfig, prefix: Path) -> int:
    system, results, failures = run_static(cfg, prefix)
    status = EXIT_SOLVER if failures else EXIT_OK
    for scheme, exc in failures.items():
        print(f"error: {scheme.value} static solve failed: {exc}", file=sys.stderr)
    if cfg.dynamics.t_final <= 0:
        return status
    multi = len(cfg.schemes) > 1
    for scheme, res in results.items():
        log.info("dynamics %s", scheme.value)
        records = []
        try:
            for rec in run_dynamics(scheme, system, res, cfg.dynamics):
                records.append(rec)
        except (StallError, StabilityError, DivergenceError) as exc:
            print(f"error: {scheme.value} propagation halted: {exc}", file=sys.stderr)
            status = EXIT_SOLVER
        path = _artifact(prefix, scheme, multi, "traj.csv")
        write_trajectory(path, records)
        print(f"wrote {path}")
        if cfg.spectrum and len(records) >= 16:
            omega, strength = dipole_spectrum([r.time for r in records], [r.dipole for r in records])
            spath = _artifact(prefix, scheme, multi, "spectrum.csv")
            write_spectrum(spath, omega, strength)
            print(f"wrote {spath}")
    return status


def _summary(results: dict[object, StaticResult]):
    for scheme, res in results.items():
        eps = " ".join(f"{e:.6f}" for e in res.energies)
        print(f"{scheme.value:<4} eps = [{eps}]  E = {res.total_energy:.8f}  IP = {res.ionization_potential:.6f}")


def build_parser():
    ap = argparse.ArgumentParser(prog="tdsic-lab", description="1D LDA / SIC / HF ground states and real-time dynamics.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "static solve, then dynamics when dynamics.t_final > 0"),
        ("static", "static solve only"),
        ("check", "validate a configuration file and print the resolved values"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to a section.key = value file")
    p = sub.add_parser("oracle", help="run reference computations and print a provenance table")
    p.add_argument("name", choices=sorted(ORACLES) + ["all"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "oracle":
        rows = run_oracle(args.name)
        print(format_rows(rows))
        return EXIT_OK if all(r.passed for r in rows) else EXIT_SOLVER
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "check":
        print(dump_config(cfg), end="")
        return EXIT_OK
    prefix = output_prefix(cfg)
    try:
        if args.command == "static":
            _, results, failures = run_static(cfg, prefix)
            _summary(results)
            for scheme, exc in failures.items():
                print(f"error: {scheme.value} static solve failed: {exc}", file=sys.stderr)
            return EXIT_SOLVER if failures else EXIT_OK
        return run_all(cfg, prefix)
    except TdsicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
