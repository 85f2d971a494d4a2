"""Command-line interface for the quench-dynamics harness.

Exit codes: 0 success, 2 configuration error, 3 sweep completed with
partial failures (see the manifest).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, ed, observables
from .harness import (ConfigError, ExperimentConfig, emit_reports,
                      resume_sweep, run_sweep)
from .initial import InitialStateSpec, build_initial_state, verify_initial_state
from .model import DisorderRealization, sample_couplings
from .mps import MatrixProductState
from .tebd import EvolutionSchedule, evolve, imaginary_time_ground_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=Path,
                        help="JSON config file with the experiment keys")
    for dotted in ExperimentConfig.KEYMAP:
        parser.add_argument(f"--{dotted}", dest=f"opt:{dotted}",
                            metavar="VALUE", help=argparse.SUPPRESS)


def _build_config(args) -> ExperimentConfig:
    config = (ExperimentConfig.from_file(args.config) if args.config
              else ExperimentConfig())
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith("opt:") and value is not None:
            overrides[key[4:]] = _parse_value(value)
    if overrides:
        config = config.with_overrides(overrides)
    return config


def cmd_sample_disorder(args) -> int:
    r = sample_couplings(args.alpha, args.length, args.seed)
    text = r.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        reread = DisorderRealization.from_json(Path(args.out).read_text())
        assert np.array_equal(reread.couplings, r.couplings)
    else:
        print(text)
    return EXIT_OK


def cmd_init_state(args) -> int:
    state = build_initial_state(args.n, args.length)
    spec = InitialStateSpec(args.n, args.length)
    if args.out:
        state.save(args.out, metadata={"construction": spec.tag,
                                       "n": args.n, "L": args.length})
        print(f"wrote {args.out}")
    if args.verify or not args.out:
        report = verify_initial_state(state, spec)
        print(report.summary())
        return EXIT_OK if report.passed else 1
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _build_config(args)
    config = config.with_overrides({"disorder.realizations": 1,
                                    "disorder.base_seed":
                                        config.disorder_base_seed + args.index})
    run_dir = run_sweep(config)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    status = manifest["realizations"][0]["status"]
    print(f"realization {args.index}: {status} -> {run_dir}")
    return EXIT_OK if status == "ok" else EXIT_PARTIAL


def cmd_sweep(args) -> int:
    config = _build_config(args)
    if args.resume:
        run_dir = resume_sweep(config.resolved_output_dir(), config)
    else:
        run_dir = run_sweep(config)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    statuses = [e["status"] for e in manifest["realizations"]]
    counts = {s: statuses.count(s) for s in sorted(set(statuses))}
    print(f"sweep {run_dir}: {counts}")
    return EXIT_OK if all(s == "ok" for s in statuses) else EXIT_PARTIAL


def cmd_report(args) -> int:
    report_dir = emit_reports(args.dir)
    print(f"reports -> {report_dir}")
    return EXIT_OK


def cmd_gs(args) -> int:
    r = sample_couplings(args.alpha, args.length, args.seed)
    _, e_gs = imaginary_time_ground_state(r, args.n, chi_max=args.chi_max,
                                          tol=args.tol)
    _, e_neg = imaginary_time_ground_state(r, args.n, chi_max=args.chi_max,
                                           tol=args.tol, negate_couplings=True)
    e_highest = -e_neg
    print(f"E_GS      = {e_gs:.10f}")
    print(f"E_highest = {e_highest:.10f}   (via E_highest(J) = -E_GS(-J))")
    if args.ed_check:
        ref_gs, ref_hi = ed.exact_extremal_energies(r, args.n)
        print(f"ED: E_GS = {ref_gs:.10f} (dev {abs(e_gs - ref_gs):.2e}), "
              f"E_highest = {ref_hi:.10f} (dev {abs(e_highest - ref_hi):.2e})")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    """TEBD vs exact evolution on a small chain; nonzero exit above 1e-4."""
    r = sample_couplings(args.alpha, args.length, args.seed)
    if args.n == 2 and args.length % 4 == 0:
        state = build_initial_state(2, args.length)
    else:
        state = MatrixProductState.random_product_state(args.n, args.length,
                                                        args.seed)
    schedule = EvolutionSchedule.regular(args.dt, args.t, args.t,
                                         chi_max=None, eps_max=0.0)
    final, stats, _ = evolve(state, r, schedule)

    ham = ed.dense_hamiltonian(r, args.n,
                               as_sparse=args.n**args.length > 4096)
    vec = ed.exact_evolve(ed.mps_to_dense(state), ham, args.t)
    corr_dev = float(np.max(np.abs(
        observables.nn_correlators(final) - ed.dense_nn_correlators(vec, args.n))))
    ent_dev = 0.0
    for size in (1, 2, 3):
        starts = list(range(args.length - size + 1))
        entropies = final.block_entropy_sweep({size: starts})
        for start in starts:
            s_ed = ed.dense_block_entropy(vec, args.n, start, size)
            ent_dev = max(ent_dev, abs(entropies[(start, size)] - s_ed))
    print(f"max |corr_TEBD - corr_ED|    = {corr_dev:.3e}")
    print(f"max |S_TEBD - S_ED| (l<=3)   = {ent_dev:.3e}")
    print(f"max chi = {stats.max_bond_dim}, cumulative eps = {stats.cum_max_eps:.3e}")
    ok = corr_dev < 1e-4 and ent_dev < 1e-4
    print("oracle check:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sunquench",
        description="Quench dynamics of disordered SU(N) Heisenberg chains")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-disorder", help="sample one coupling realization")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sample_disorder)

    p = sub.add_parser("init-state", help="build and verify an initial state")
    p.add_argument("--n", type=int, required=True, choices=(2, 3))
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_init_state)

    p = sub.add_parser("evolve", help="evolve a single realization")
    _add_config_arguments(p)
    p.add_argument("--index", type=int, default=0)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="run a disorder sweep")
    _add_config_arguments(p)
    p.add_argument("--resume", action="store_true",
                   help="finish an interrupted sweep from checkpoints")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="emit aggregate tables")
    p.add_argument("--dir", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gs", help="imaginary-time ground/extremal energies")
    p.add_argument("--n", type=int, default=2, choices=(2, 3))
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--chi-max", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--ed-check", action="store_true")
    p.set_defaults(func=cmd_gs)

    p = sub.add_parser("oracle-check", help="TEBD vs exact-diagonalization suite")
    p.add_argument("--n", type=int, default=2, choices=(2, 3))
    p.add_argument("--length", type=int, default=12)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--t", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
