"""Experiment orchestration: corpora, trial batteries, sweeps, and their artifacts.

Every experiment decomposes into independent trials keyed by
(controller, trajectory seed, sampling seed); the trial seed is a SplitMix64
hash of those three, so adding controllers or re-slicing a battery never
perturbs existing trials.  Deterministic outputs (per-trial JSON, aggregate
CSV) contain no wall-clock data and are byte-identical across reruns; wall
times go to a separate timings.csv that is documented as non-reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import scenarios
from .controllers import (
    IsingMppiConfig,
    LinearMppiConfig,
    ReferenceMppiConfig,
    TrialResult,
    ising_mppi_step,
    non_ising_linear_mppi_step,
    reference_mppi_step,
    run_closed_loop,
)
from .qubo import assemble_qubo, build_expansion, build_horizon, symmetrize, write_instance
from .dynamics import ModelParams, linearize_along
from .rng import mix64
from .scenarios import ReferenceTrajectory

CONTROLLER_TAGS = {"ising": 1, "linear": 2, "reference": 3}

_STEP_FNS = {
    "ising": ising_mppi_step,
    "linear": non_ising_linear_mppi_step,
    "reference": reference_mppi_step,
}

_CONFIG_CLASSES = {
    "ising": IsingMppiConfig,
    "linear": LinearMppiConfig,
    "reference": ReferenceMppiConfig,
}

# Per-controller default sample budgets for the headline comparison.
_DEFAULT_BUDGET = {"ising": 200, "linear": 1000, "reference": 1000}


@dataclass(frozen=True)
class ExperimentConfig:
    controllers: tuple[str, ...] = ("ising", "linear", "reference")
    n_trajectories: int = 50
    n_seeds: int = 10
    seed0: int = 0
    ds: float = scenarios.DEFAULT_DS
    sweep_grid: tuple[int, ...] = (10, 100, 1000)
    m_grid: tuple[int, ...] = (1, 4)
    overrides: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    jobs: int = 1

    def __post_init__(self):
        for c in self.controllers:
            if c not in CONTROLLER_TAGS:
                raise ValueError(f"unknown controller {c!r}; choose from {sorted(CONTROLLER_TAGS)}")
        if min(self.n_trajectories, self.n_seeds, self.jobs) < 1:
            raise ValueError("n_trajectories, n_seeds and jobs must all be >= 1")
        if not self.sweep_grid or not self.m_grid:
            raise ValueError("sweep_grid and m_grid must be nonempty")


@dataclass(frozen=True)
class AggregateRow:
    controller: str
    M: int
    S: int
    mean_mse: float
    std_mse: float
    n_ok: int
    n_diverged: int
    mean_wall_time: float


class TrialSpec(NamedTuple):
    controller: str
    traj_seed: int
    sample_seed: int
    M: int
    S: int


def trial_seed(spec: TrialSpec) -> int:
    """The documented per-trial seed: mix of (traj seed, sample seed, controller tag)."""
    return mix64(spec.traj_seed, spec.sample_seed, CONTROLLER_TAGS[spec.controller])


_ALL_CONFIG_FIELDS = {
    f.name for cls in _CONFIG_CLASSES.values() for f in dataclasses.fields(cls)
}


def make_controller_config(controller: str, iterations: int | None = None,
                           budget: int | None = None, overrides: dict | None = None):
    """Build a controller config from defaults, a sample budget, and field overrides.

    `budget` is the per-iteration sampling effort: Gibbs sweeps for the ising
    controller, Gaussian rollouts for the other two.  `overrides` patches any
    remaining dataclass field by name; keys that only exist on the other
    controllers (e.g. noise_sigma for ising) are ignored so one override set
    can serve a mixed battery, but keys unknown to every controller raise.
    """
    if controller not in _CONFIG_CLASSES:
        raise ValueError(f"unknown controller {controller!r}; choose from {sorted(_CONFIG_CLASSES)}")
    cls = _CONFIG_CLASSES[controller]
    own_fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in (overrides or {}).items():
        if key in own_fields:
            kwargs[key] = value
        elif key not in _ALL_CONFIG_FIELDS:
            raise ValueError(f"unknown controller-config override {key!r}")
    if iterations is not None:
        kwargs["iterations"] = iterations
    if budget is None and "sweeps" not in kwargs and "samples" not in kwargs:
        budget = _DEFAULT_BUDGET[controller]
    if budget is not None:
        kwargs["sweeps" if controller == "ising" else "samples"] = budget
    return cls(**kwargs)


def config_dict(cfg) -> dict:
    """Flatten a controller config into JSON-safe scalars and lists."""
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "weights":
            out["q_diag"] = [float(x) for x in np.diag(v.Q)]
            out["r_diag"] = [float(x) for x in np.diag(v.R)]
        elif isinstance(v, tuple):
            out[f.name] = [float(x) for x in v]
        else:
            out[f.name] = v
    return out


def run_trial(spec: TrialSpec, scenario: ReferenceTrajectory, overrides: dict | None = None) -> TrialResult:
    cfg = make_controller_config(spec.controller, iterations=spec.M, budget=spec.S, overrides=overrides)
    return run_closed_loop(scenario, _STEP_FNS[spec.controller], cfg, trial_seed(spec))


def trial_json(spec: TrialSpec, result: TrialResult, cfg, ds: float) -> str:
    """Deterministic per-trial record: config echo, seeds, controls, positions, mse.

    Wall-clock timings are deliberately absent; they live in timings.csv.
    The mse metric is squared planar position error only (heading excluded).
    """
    doc = {
        "controller": spec.controller,
        "traj_seed": spec.traj_seed,
        "sample_seed": spec.sample_seed,
        "trial_seed": trial_seed(spec),
        "ds": ds,
        "config": config_dict(cfg),
        "mse": result.mse if np.isfinite(result.mse) else "inf",
        "mse_metric": "mean squared planar position error vs matched reference index",
        "diverged": result.diverged,
        "u0": [[s.u0.accel, s.u0.steer_rate] for s in result.per_step],
        "realized_xy": [[float(r[0]), float(r[1])] for r in result.realized],
        "reference_xy": [[float(r[0]), float(r[1])] for r in result.reference],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _trial_wall_time(result: TrialResult) -> float:
    return sum(s.wall_time for s in result.per_step)


def _run_spec(args) -> tuple[int, TrialResult]:
    idx, spec, scenario, overrides = args
    return idx, run_trial(spec, scenario, overrides)


def _execute(specs: Sequence[TrialSpec], scen_map: dict[int, ReferenceTrajectory],
             overrides: dict, jobs: int) -> list[TrialResult]:
    """Run trials, possibly across processes; results come back in spec order."""
    work = [(i, spec, scen_map[spec.traj_seed], overrides) for i, spec in enumerate(specs)]
    results: list[TrialResult | None] = [None] * len(specs)
    if jobs <= 1:
        for item in work:
            idx, res = _run_spec(item)
            results[idx] = res
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, res in pool.map(_run_spec, work):
                results[idx] = res
    return results  # type: ignore[return-value]


def aggregate(controller: str, M: int, S: int, results: Sequence[TrialResult]) -> AggregateRow:
    """Mean/std of mse over non-diverged trials (population std, 0 for one trial)."""
    ok = [r.mse for r in results if not r.diverged]
    n_div = len(results) - len(ok)
    if ok:
        mean = float(np.mean(ok))
        std = float(np.std(ok))
    else:
        mean = float("inf")
        std = float("inf")
    wall = float(np.mean([_trial_wall_time(r) for r in results])) if results else 0.0
    return AggregateRow(controller=controller, M=M, S=S, mean_mse=mean, std_mse=std,
                        n_ok=len(ok), n_diverged=n_div, mean_wall_time=wall)


def _trial_filename(spec: TrialSpec, with_grid: bool) -> str:
    if with_grid:
        return f"{spec.controller}_M{spec.M}_S{spec.S}_t{spec.traj_seed}_s{spec.sample_seed}.json"
    return f"{spec.controller}_t{spec.traj_seed}_s{spec.sample_seed}.json"


def _write_outputs(out_dir: Path, specs: Sequence[TrialSpec], results: Sequence[TrialResult],
                   overrides: dict, ds: float, with_grid: bool) -> None:
    trials_dir = out_dir / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)
    timing_rows = []
    for spec, res in zip(specs, results):
        cfg = make_controller_config(spec.controller, iterations=spec.M, budget=spec.S,
                                     overrides=overrides)
        (trials_dir / _trial_filename(spec, with_grid)).write_text(trial_json(spec, res, cfg, ds))
        timing_rows.append((spec, _trial_wall_time(res)))
    with open(out_dir / "timings.csv", "w") as fh:
        fh.write("# wall-clock seconds; NOT covered by the determinism contract\n")
        fh.write("controller,M,S,traj_seed,sample_seed,wall_time\n")
        for spec, wall in timing_rows:
            fh.write(f"{spec.controller},{spec.M},{spec.S},{spec.traj_seed},{spec.sample_seed},{float(wall)!r}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def run_table(cfg: ExperimentConfig) -> list[AggregateRow]:
    """The headline battery: every configured controller over the scenario corpus.

    Scenario seeds are seed0 .. seed0 + n_trajectories - 1, each run with
    sampling seeds 0 .. n_seeds - 1.  Controller defaults are M=4 with the
    per-controller sample budgets (ising 200, linear 1000, reference 1000).
    Writes trials/*.json, aggregate.csv and timings.csv under output_dir.
    """
    scen_map = {ts: scenarios.generate_reference(ts, cfg.ds)
                for ts in range(cfg.seed0, cfg.seed0 + cfg.n_trajectories)}
    rows = []
    all_specs: list[TrialSpec] = []
    all_results: list[TrialResult] = []
    for controller in cfg.controllers:
        M = cfg.overrides.get("iterations", 4)
        S = cfg.overrides.get("sweeps" if controller == "ising" else "samples",
                              _DEFAULT_BUDGET[controller])
        over = {k: v for k, v in cfg.overrides.items()
                if k not in ("iterations", "sweeps", "samples")}
        specs = [TrialSpec(controller, ts, ss, M, S)
                 for ts in sorted(scen_map) for ss in range(cfg.n_seeds)]
        results = _execute(specs, scen_map, over, cfg.jobs)
        rows.append(aggregate(controller, M, S, results))
        all_specs.extend(specs)
        all_results.extend(results)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    over = {k: v for k, v in cfg.overrides.items() if k not in ("iterations", "sweeps", "samples")}
    _write_outputs(out, all_specs, all_results, over, cfg.ds, with_grid=False)
    with open(out / "aggregate.csv", "w") as fh:
        fh.write("controller,M,S,mean_mse,std_mse,n_ok,n_diverged\n")
        for r in rows:
            fh.write(f"{r.controller},{r.M},{r.S},{_fmt(r.mean_mse)},{_fmt(r.std_mse)},"
                     f"{r.n_ok},{r.n_diverged}\n")
    return rows


def run_sweep(cfg: ExperimentConfig) -> list[AggregateRow]:
    """Sample-budget sweep on one pinned scenario (trajectory seed = seed0).

    Evaluates every (controller, M, S) cell of m_grid x sweep_grid with
    n_seeds repeats and writes sweep.csv (`controller,M,S,mean_mse,std_mse`)
    for log-log plotting, plus per-trial JSON and timings.
    """
    for c in cfg.controllers:
        if c == "reference":
            raise ValueError("the sweep compares the ising and linear controllers only")
    scen_map = {cfg.seed0: scenarios.generate_reference(cfg.seed0, cfg.ds)}
    rows = []
    all_specs: list[TrialSpec] = []
    all_results: list[TrialResult] = []
    for controller in cfg.controllers:
        for M in cfg.m_grid:
            for S in cfg.sweep_grid:
                specs = [TrialSpec(controller, cfg.seed0, ss, M, S) for ss in range(cfg.n_seeds)]
                results = _execute(specs, scen_map, cfg.overrides, cfg.jobs)
                rows.append(aggregate(controller, M, S, results))
                all_specs.extend(specs)
                all_results.extend(results)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_outputs(out, all_specs, all_results, cfg.overrides, cfg.ds, with_grid=True)
    with open(out / "sweep.csv", "w") as fh:
        fh.write("controller,M,S,mean_mse,std_mse\n")
        for r in rows:
            fh.write(f"{r.controller},{r.M},{r.S},{_fmt(r.mean_mse)},{_fmt(r.std_mse)}\n")
    return rows


def gen_trajectories(n: int, seed0: int, out_dir: Path, ds: float = scenarios.DEFAULT_DS) -> list[Path]:
    """Write n scenario CSVs (seeds seed0..seed0+n-1) under out_dir."""
    if n < 1:
        raise ValueError("need n >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in range(seed0, seed0 + n):
        traj = scenarios.generate_reference(seed, ds)
        path = out_dir / f"traj_{seed:04d}.csv"
        with open(path, "w") as fh:
            scenarios.write_trajectory_csv(traj, fh)
        paths.append(path)
    return paths


def dump_qubo(controller_cfg: IsingMppiConfig, traj_seed: int, ds: float, fh) -> None:
    """Emit the instance file for the first control step of a scenario.

    Uses the zero nominal sequence at the scenario's initial state — the
    problem the first Gibbs call of a cold-started trial would sample.
    """
    scenario = scenarios.generate_reference(traj_seed, ds)
    if scenario.n < controller_cfg.horizon + 1:
        raise ValueError("scenario shorter than one horizon")
    window = scenario.states[1:1 + controller_cfg.horizon]
    x0 = scenario.initial_state
    ubar = np.zeros((controller_cfg.horizon, 2))
    steps = linearize_along(x0, ubar, controller_cfg.dt, ModelParams(controller_cfg.wheelbase))
    hm = build_horizon(steps, controller_cfg.dt)
    ex = build_expansion(controller_cfg.bits, controller_cfg.magnitudes, controller_cfg.horizon)
    problem = symmetrize(assemble_qubo(hm, ex, controller_cfg.weights, x0.as_array(),
                                       ubar.ravel(), window.ravel(),
                                       lambda_hint=controller_cfg.lam))
    write_instance(problem, fh, horizon=controller_cfg.horizon,
                   bits=controller_cfg.bits, inputs=2)


def run_single(controller: str, traj_seed: int, sample_seed: int, ds: float,
               iterations: int | None = None, budget: int | None = None,
               overrides: dict | None = None) -> tuple[TrialSpec, TrialResult, object]:
    """One verbose trial for the CLI: returns (spec, result, config used)."""
    scenario = scenarios.generate_reference(traj_seed, ds)
    cfg = make_controller_config(controller, iterations=iterations, budget=budget,
                                 overrides=overrides)
    spec = TrialSpec(controller, traj_seed, sample_seed, cfg.iterations,
                     cfg.sweeps if controller == "ising" else cfg.samples)
    result = run_closed_loop(scenario, _STEP_FNS[controller], cfg, trial_seed(spec))
    return spec, result, cfg
