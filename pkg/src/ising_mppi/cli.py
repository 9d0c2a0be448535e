"""Command-line entry point.

Subcommands map one-to-one onto harness operations:

  gen-trajectories   write a scenario corpus as CSV files
  run-table          controller comparison over a corpus (aggregate.csv)
  run-sweep          sample-budget sweep on one pinned scenario (sweep.csv)
  run-trial          one verbose trial, optionally dumped as JSON
  dump-qubo          the binary-quadratic instance of a scenario's first step

Every flag can also be supplied from a flat `key = value` config file via
--config; explicit flags win over the file, the file wins over defaults.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, scenarios
from .controllers import IsingMppiConfig


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _parse_float_pair(text: str) -> tuple[float, float]:
    toks = text.split(",")
    if len(toks) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated floats, got {text!r}")
    return float(toks[0]), float(toks[1])


def load_config_file(path: Path) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment; keys match flag names."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# Flags a config file may supply, with the parser used to coerce its string value.
_FILE_COERCERS = {
    "controller": str,
    "n_traj": int,
    "n_seeds": int,
    "seed0": int,
    "ds": float,
    "jobs": int,
    "sweeps": _parse_int_list,
    "iters": _parse_int_list,
    "lam": float,
    "horizon": int,
    "dt": float,
    "bits": int,
    "k_speed": float,
    "k_steer": float,
    "sigma": _parse_float_pair,
    "out": str,
    "traj_seed": int,
    "sample_seed": int,
}


def _apply_config_file(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    for key, text in load_config_file(Path(args.config)).items():
        if key not in _FILE_COERCERS:
            raise ValueError(f"unknown config key {key!r}")
        if not hasattr(args, key):
            continue   # key belongs to a different subcommand; harmless in a shared file
        if getattr(args, key) is None:
            setattr(args, key, _FILE_COERCERS[key](text))


def _fill(args: argparse.Namespace, **defaults) -> None:
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--seed0", type=int, default=None, help="first trajectory seed (default 0)")
    p.add_argument("--ds", type=float, default=None,
                   help=f"reference spacing in distance units (default {scenarios.DEFAULT_DS})")


def _add_controller_knobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sweeps", type=_parse_int_list, default=None,
                   help="sample budget(s): Gibbs sweeps (ising) or rollouts (linear/reference)")
    p.add_argument("--iters", type=_parse_int_list, default=None, help="outer iteration count(s)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="sampling temperature")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--bits", type=int, default=None, help="bits per input (ising)")
    p.add_argument("--k-speed", type=float, default=None, help="acceleration bit magnitude (ising)")
    p.add_argument("--k-steer", type=float, default=None, help="steer-rate bit magnitude (ising)")
    p.add_argument("--sigma", type=_parse_float_pair, default=None,
                   help="Gaussian noise std per input, e.g. 1.5,0.3 (linear/reference)")


def _overrides_from(args: argparse.Namespace) -> dict:
    over: dict = {}
    if args.lam is not None:
        over["lam"] = args.lam
    if args.horizon is not None:
        over["horizon"] = args.horizon
    if args.dt is not None:
        over["dt"] = args.dt
    if args.bits is not None:
        over["bits"] = args.bits
    if args.k_speed is not None or args.k_steer is not None:
        ks = args.k_speed if args.k_speed is not None else 15.0
        kw = args.k_steer if args.k_steer is not None else 2.2
        over["magnitudes"] = (ks, kw)
    if args.sigma is not None:
        over["noise_sigma"] = args.sigma
    return over


def _single(values: tuple[int, ...] | None, flag: str) -> int | None:
    if values is None:
        return None
    if len(values) != 1:
        raise ValueError(f"{flag} takes a single value here, got {values}")
    return values[0]


def _controllers(text: str | None, default: tuple[str, ...]) -> tuple[str, ...]:
    if text is None or text == "all":
        return default
    return tuple(tok for tok in text.split(",") if tok)


def _cmd_gen_trajectories(args) -> int:
    _apply_config_file(args)
    _fill(args, n_traj=50, seed0=0, ds=scenarios.DEFAULT_DS)
    if args.out is None:
        raise ValueError("--out directory is required")
    paths = harness.gen_trajectories(args.n_traj, args.seed0, Path(args.out), args.ds)
    print(f"wrote {len(paths)} trajectories to {args.out}")
    return 0


def _cmd_run_table(args) -> int:
    _apply_config_file(args)
    _fill(args, n_traj=50, n_seeds=10, seed0=0, ds=scenarios.DEFAULT_DS, jobs=1)
    if args.out is None:
        raise ValueError("--out directory is required")
    over = _overrides_from(args)
    m = _single(args.iters, "--iters")
    if m is not None:
        over["iterations"] = m
    s = _single(args.sweeps, "--sweeps")
    if s is not None:
        over["sweeps"] = s
        over["samples"] = s
    cfg = harness.ExperimentConfig(
        controllers=_controllers(args.controller, ("ising", "linear", "reference")),
        n_trajectories=args.n_traj, n_seeds=args.n_seeds, seed0=args.seed0,
        ds=args.ds, overrides=over, output_dir=Path(args.out), jobs=args.jobs)
    rows = harness.run_table(cfg)
    for r in rows:
        print(f"{r.controller:10s} M={r.M} S={r.S} mean_mse={r.mean_mse:.6g} "
              f"std={r.std_mse:.6g} ok={r.n_ok} diverged={r.n_diverged}")
    return 0


def _cmd_run_sweep(args) -> int:
    _apply_config_file(args)
    _fill(args, n_seeds=5, seed0=0, ds=scenarios.DEFAULT_DS, jobs=1)
    if args.out is None:
        raise ValueError("--out directory is required")
    cfg = harness.ExperimentConfig(
        controllers=_controllers(args.controller, ("ising", "linear")),
        n_trajectories=1, n_seeds=args.n_seeds, seed0=args.seed0, ds=args.ds,
        sweep_grid=args.sweeps or (10, 100, 1000), m_grid=args.iters or (1, 4),
        overrides=_overrides_from(args), output_dir=Path(args.out), jobs=args.jobs)
    rows = harness.run_sweep(cfg)
    for r in rows:
        print(f"{r.controller:10s} M={r.M} S={r.S} mean_mse={r.mean_mse:.6g} std={r.std_mse:.6g}")
    return 0


def _cmd_run_trial(args) -> int:
    _apply_config_file(args)
    _fill(args, traj_seed=0, sample_seed=0, ds=scenarios.DEFAULT_DS)
    if args.controller is None:
        raise ValueError("--controller is required")
    spec, result, cfg = harness.run_single(
        args.controller, args.traj_seed, args.sample_seed, args.ds,
        iterations=_single(args.iters, "--iters"), budget=_single(args.sweeps, "--sweeps"),
        overrides=_overrides_from(args))
    wall = sum(s.wall_time for s in result.per_step)
    print(f"trial {spec.controller} traj={spec.traj_seed} sample={spec.sample_seed} "
          f"seed={harness.trial_seed(spec)}")
    print(f"steps={len(result.per_step)} diverged={result.diverged} "
          f"mse={result.mse:.6g} wall={wall:.2f}s")
    if result.per_step:
        first = result.per_step[0].per_iteration_energy
        print("step-0 per-iteration energy: " + ", ".join(f"{e:.4g}" for e in first))
    if args.out:
        Path(args.out).write_text(harness.trial_json(spec, result, cfg, args.ds))
        print(f"wrote {args.out}")
    return 0


def _cmd_dump_qubo(args) -> int:
    _apply_config_file(args)
    _fill(args, traj_seed=0, ds=scenarios.DEFAULT_DS)
    over = _overrides_from(args)
    over.pop("noise_sigma", None)
    cfg = IsingMppiConfig(**over)
    if args.out:
        with open(args.out, "w") as fh:
            harness.dump_qubo(cfg, args.traj_seed, args.ds, fh)
        print(f"wrote {args.out}")
    else:
        harness.dump_qubo(cfg, args.traj_seed, args.ds, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ising-mppi",
        description="Sampling-based MPC on binary quadratic energies, with Gaussian baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trajectories", help="write a scenario corpus as CSVs")
    _add_common(p)
    p.add_argument("--n-traj", type=int, default=None, help="number of scenarios (default 50)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_gen_trajectories)

    p = sub.add_parser("run-table", help="controller comparison over a corpus")
    _add_common(p)
    _add_controller_knobs(p)
    p.add_argument("--controller", default=None,
                   help="comma list from {ising,linear,reference} or 'all' (default all)")
    p.add_argument("--n-traj", type=int, default=None, help="corpus size (default 50)")
    p.add_argument("--n-seeds", type=int, default=None, help="sampling seeds per scenario (default 10)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default 1)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_run_table)

    p = sub.add_parser("run-sweep", help="sample-budget sweep on one pinned scenario")
    _add_common(p)
    _add_controller_knobs(p)
    p.add_argument("--controller", default=None,
                   help="comma list from {ising,linear} (default both)")
    p.add_argument("--n-seeds", type=int, default=None, help="repeats per grid cell (default 5)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default 1)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_run_sweep)

    p = sub.add_parser("run-trial", help="run one trial with verbose diagnostics")
    _add_common(p)
    _add_controller_knobs(p)
    p.add_argument("--controller", default=None, help="one of {ising,linear,reference}")
    p.add_argument("--traj-seed", type=int, default=None, help="scenario seed (default 0)")
    p.add_argument("--sample-seed", type=int, default=None, help="sampling seed (default 0)")
    p.add_argument("--out", default=None, help="write the trial JSON here")
    p.set_defaults(func=_cmd_run_trial)

    p = sub.add_parser("dump-qubo", help="emit the instance file for a scenario's first step")
    _add_common(p)
    _add_controller_knobs(p)
    p.add_argument("--traj-seed", type=int, default=None, help="scenario seed (default 0)")
    p.add_argument("--out", default=None, help="instance file path (stdout if omitted)")
    p.set_defaults(func=_cmd_dump_qubo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
