"""
OU Schrödinger Bridge command-line runner.

Every subcommand validates its configuration first, writes its artifacts
atomically into the output directory and finishes with ``manifest.json``.

Usage:
    python services/cli.py gsb-solve --problem data/problem_gaussian.json --out runs/gsb
    python services/cli.py train --config data/run_ou.json --data cells.csv --out runs/train
    python services/cli.py benchmark --experiment gaussian --d 2 --seed 0 --out runs/bench
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

# Add project root to path for imports
project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from app.bridge import BridgePin, batch_sample, bridge_sample, bridge_terms
from app.config import get_default_threads, get_log_level
from app.console import log_banner, print_status, print_table, setup_logging
from app.core.kernels import KernelCache
from app.core.process import Gaussian, OUProcess
from app.eot import mvou_cost, sinkhorn
from app.errors import ConfigError, ConvergenceError, DataError, OUBridgeError
from app.experiments import push_forward, run_experiment
from app.fields import get_field
from app.fm.trainer import train
from app.gsb import GSBProblem, GSBSolution, eot_gaussian_value
from app.metrics import bw2, emd, energy_distance, fit_gaussian
from app.processors import JSONDocumentProcessor, read_snapshot_files
from app.refit import iterated_refit, leave_one_out
from app.run_config import RunConfig, load_run_config
from app.sim.generators import (
    RepressilatorParams,
    Snapshot,
    planted_ou_snapshots,
    repressilator_drift,
    repressilator_snapshots,
    scale_drift,
)
from app.sim.integrators import euler_maruyama, rk4
from app.writers import ArtifactWriter, RunManifest

logger = logging.getLogger("ousb")


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


class BridgeService:
    """
    Runs one subcommand against a validated configuration.

    Args:
        command: Subcommand name
        args: Parsed command-line arguments
        config: Run configuration after flag overrides
    """

    def __init__(self, command: str, args: argparse.Namespace, config: RunConfig):
        self.command = command
        self.args = args
        self.config = config
        self.threads = args.threads
        out_dir = args.out or config.output_dir
        if out_dir is None:
            raise ConfigError("no output directory: pass --out or set output_dir in the config")
        self.writer = ArtifactWriter(out_dir, RunManifest(command, config.config_hash(), config.seed))
        self.show_progress = not args.quiet

    def run(self) -> Dict[str, Any]:
        log_banner(self.command)
        handler: Callable[[], Dict[str, Any]] = getattr(self, "_" + self.command.replace("-", "_"))
        summary = handler()
        manifest = self.writer.finish()
        summary["manifest"] = str(manifest)
        print_status("Status Report", summary, ok=True)
        return summary

    # ------------------------------------------------------------------
    # helpers

    def _cache(self, process: OUProcess, horizon: float) -> KernelCache:
        return KernelCache(process, horizon, nodes=self.config.cache_nodes)

    def _snapshots(self, paths: Sequence[str], minimum: int) -> List[Snapshot]:
        snaps = read_snapshot_files(paths)
        if len(snaps) < minimum:
            raise DataError(f"need at least {minimum} snapshot times, found {len(snaps)}")
        return snaps

    def _problem(self):
        process, rho0, rhoT, horizon, grid = JSONDocumentProcessor(self.args.problem).read_problem()
        jitter = getattr(self.args, "jitter", None)
        if jitter:
            rho0, rhoT = rho0.with_jitter(jitter), rhoT.with_jitter(jitter)
        problem = GSBProblem(process, self._cache(process, horizon), rho0, rhoT)
        return GSBSolution(problem), grid

    # ------------------------------------------------------------------
    # subcommands

    def _gsb_solve(self) -> Dict[str, Any]:
        solution, grid = self._problem()
        T = solution.horizon
        times = np.linspace(0.0, T, grid)
        marginals = [solution.marginal(t) for t in times]
        self.writer.marginals("marginals.csv", times, [g.mean for g in marginals], [g.cov for g in marginals])
        if self.args.drift_matrices:
            rows = [solution.drift_matrix(t) for t in times]
            self.writer.drift_matrices("drift_matrices.csv", times, [r[0] for r in rows], [r[2] for r in rows])
        rho0, rhoT = solution.problem.rho0, solution.problem.rhoT
        self.writer.json("gsb.json", {
            "horizon": T,
            "transformed": {"a": solution.a_bar, "A": solution.A_bar, "b": solution.b_bar, "B": solution.B_bar},
            "cross_cov": solution.C_bar,
            "eot_transformed_value": eot_gaussian_value(Gaussian(solution.a_bar, solution.A_bar),
                                                        Gaussian(solution.b_bar, solution.B_bar), 1.0),
            "endpoint_bw2": [bw2(marginals[0], rho0), bw2(marginals[-1], rhoT)],
        })
        return {"grid points": grid, "horizon": T}

    def _bridge_sample(self) -> Dict[str, Any]:
        args = self.args
        rng = np.random.default_rng(self.config.seed)
        if args.problem:
            solution, _ = self._problem()
            cache = solution.cache
            X0, XT = solution.sample_plan(args.n, rng)
        else:
            if args.x0 is None or args.xT is None:
                raise ConfigError("bridge-sample needs --x0 and --xT, or --problem")
            process = self.config.require_process()
            cache = self._cache(process, self.config.horizon)
            pin = BridgePin(np.array(args.x0), np.array(args.xT), cache.horizon)
        times = args.times or list(np.linspace(0.0, cache.horizon, 11))
        snaps = []
        for t in times:
            t_checked = cache.clamp(cache.check_times(t))
            if args.problem:
                terms = bridge_terms(cache, np.full(args.n, t_checked[0]), X0, XT)
                samples = batch_sample(terms, rng)
            else:
                samples = bridge_sample(cache, pin, float(t_checked[0]), rng, size=args.n)
            snaps.append(Snapshot(float(t), samples))
        self.writer.snapshots("bridge_samples.csv", snaps)
        return {"times": len(snaps), "samples per time": args.n}

    def _eot(self) -> Dict[str, Any]:
        process = self.config.require_process()
        source = self._snapshots([self.args.source], 1)
        target = self._snapshots([self.args.target], 1)
        if len(source) != 1 or len(target) != 1:
            raise DataError("eot expects one snapshot time per input file")
        horizon = target[0].time - source[0].time
        if horizon <= 0:
            raise DataError("target snapshot must come after the source snapshot")
        cache = self._cache(process, horizon)
        cost = mvou_cost(cache, source[0].samples, target[0].samples, threads=self.threads)
        sk = self.config.sinkhorn
        coupling = sinkhorn(cost, epsilon=sk.epsilon, max_iters=sk.max_iters, tol=sk.tol)
        self.writer.plan("plan.csv", coupling.plan)
        self.writer.json("eot_report.json", {
            "iterations": coupling.iterations,
            "marginal_error": coupling.marginal_error,
            "converged": coupling.converged,
            "epsilon": coupling.epsilon,
            "horizon": horizon,
        })
        if not coupling.converged:
            self.writer.finish()
            raise ConvergenceError(f"Sinkhorn did not converge in {coupling.iterations} iterations "
                                   f"(marginal error {coupling.marginal_error:.3e})")
        return {"iterations": coupling.iterations, "marginal error": f"{coupling.marginal_error:.3e}"}

    def _train(self) -> Dict[str, Any]:
        process = self.config.require_process()
        snaps = self._snapshots(self.args.data, 2)
        checkpoint = train(snaps, process, self.config.train, threads=self.threads, show_progress=self.show_progress)
        self.writer.json("checkpoint.json", checkpoint.to_dict())
        history = checkpoint.meta["loss_history"]
        return {"snapshots": len(snaps), "iterations": len(history), "final loss": f"{history[-1]:.4g}"}

    def _sample(self) -> Dict[str, Any]:
        checkpoint = JSONDocumentProcessor(self.args.checkpoint).read_checkpoint()
        mode = self.args.mode or self.config.sim.mode
        start = self._snapshots(self.args.data, 1)[0]
        times = [t for t in checkpoint.meta["snapshot_times"] if t > start.time]
        if not times:
            raise DataError("initial snapshot is at or after the checkpoint's last time")
        pushed = push_forward(checkpoint, start.samples, start.time, times, self.config.sim.steps, mode,
                              seed=self.config.seed)
        self.writer.snapshots("samples.csv", [start] + pushed)
        grid = np.linspace(start.time, times[-1], self.config.sim.steps + 1)
        x0 = start.samples[: self.config.sim.n_paths]
        if mode == "sde":
            traj = euler_maruyama(get_field("learned-drift", checkpoint), checkpoint.process.diffusion, x0, grid,
                                  seed=[self.config.seed, 1])
        else:
            traj = rk4(get_field("learned-flow", checkpoint), x0, grid)
        self.writer.trajectories("trajectories.csv", traj.times, traj.states)
        return {"mode": mode, "paths": x0.shape[0], "output times": len(times)}

    def _simulate(self) -> Dict[str, Any]:
        sim = self.config.sim
        rng_seed = self.config.seed
        if self.args.system == "repressilator":
            params = RepressilatorParams()
            snaps = repressilator_snapshots(params, sim.n_per_snapshot, sim.snapshot_times,
                                            seed=rng_seed, dt=sim.dt, threads=self.threads)
            drift = lambda t, X: repressilator_drift(params, X)
            sigma = params.sigma * np.eye(3)
            rng = np.random.default_rng([rng_seed, len(snaps)])
            x0 = np.asarray(params.initial_mean) + np.sqrt(params.initial_var) * rng.standard_normal((sim.n_paths, 3))
        else:
            process = scale_drift(self.config.require_process(), sim.gamma)
            rho0 = Gaussian(np.zeros(process.dim), 0.25 * np.eye(process.dim))
            times = sim.snapshot_times or tuple(np.linspace(0.0, self.config.horizon, 5))
            snaps = planted_ou_snapshots(process, rho0, times, sim.n_per_snapshot, seed=rng_seed)
            drift = get_field("reference", process)
            sigma = process.diffusion
            x0 = rho0.sample(sim.n_paths, np.random.default_rng([rng_seed, len(snaps)]))
        t_end = snaps[-1].time
        steps = max(int(round((t_end - snaps[0].time) / sim.dt)), 1)
        grid = np.linspace(snaps[0].time, t_end, steps + 1)
        stride = max(steps // sim.steps, 1)
        save = grid[::stride]
        traj = euler_maruyama(drift, sigma, x0, grid, seed=[rng_seed, len(snaps) + 1], save_times=save)
        self.writer.snapshots("snapshots.csv", snaps)
        self.writer.trajectories("trajectories.csv", traj.times, traj.states)
        return {"system": self.args.system, "snapshots": len(snaps), "paths": sim.n_paths}

    def _refit(self) -> Dict[str, Any]:
        process = self.config.require_process()
        snaps = self._snapshots(self.args.data, 3)
        refit = self.config.refit
        state = iterated_refit(snaps, process, refit.outer_iters, self.config.train, refit,
                               threads=self.threads, show_progress=self.show_progress)
        report: Dict[str, Any] = {"iterations": state.summary()}
        held = refit.held_out
        if held is None and self.args.leave_one_out:
            held = tuple(range(1, len(snaps) - 1))
        if held:
            report["leave_one_out"] = [
                leave_one_out(snaps, i, process, self.config.train, refit, self.threads).to_dict() for i in held
            ]
        # artifacts only once every stage has succeeded
        for it in state.iterations:
            self.writer.json(f"iter_{it.index}/process.json", it.fit.as_process(it.process.diffusion).to_dict())
            self.writer.json(f"iter_{it.index}/checkpoint.json", it.checkpoint.to_dict())
        self.writer.json("metrics.json", report)
        print_table(
            "Refit Summary",
            ["Iteration", "alpha", "rel. change A", "cond(A)"],
            [(it.index, f"{it.fit.alpha:.1e}", f"{it.relative_change:.3g}", f"{it.fit.condition:.3g}")
             for it in state.iterations],
        )
        return {"outer iterations": len(state.iterations), "held out": len(held or ())}

    def _metrics(self) -> Dict[str, Any]:
        args = self.args
        if args.checkpoint_a or args.checkpoint_b:
            if not (args.checkpoint_a and args.checkpoint_b and args.data):
                raise ConfigError("checkpoint comparison needs --checkpoint-a, --checkpoint-b and --data")
            start = self._snapshots(args.data, 1)[0]
            pairs = []
            for k, path in enumerate((args.checkpoint_a, args.checkpoint_b)):
                ckpt = JSONDocumentProcessor(path).read_checkpoint()
                times = [t for t in ckpt.meta["snapshot_times"] if t > start.time]
                pairs.append(push_forward(ckpt, start.samples, start.time, times, self.config.sim.steps,
                                          self.config.sim.mode, seed=[self.config.seed, k]))
            left, right = pairs
        else:
            if not (args.a and args.b):
                raise ConfigError("metrics needs --a and --b snapshot files")
            left, right = self._snapshots([args.a], 1), self._snapshots([args.b], 1)
        right_by_time = {s.time: s for s in right}
        rows = []
        for s in left:
            other = right_by_time.get(s.time)
            if other is None:
                continue
            rows.append({
                "t": s.time,
                "emd": emd(s.samples, other.samples, self.config.metrics.emd_metric).to_dict(),
                "energy": energy_distance(s.samples, other.samples),
                "bw2": bw2(fit_gaussian(s.samples), fit_gaussian(other.samples)),
            })
        if not rows:
            raise DataError("the two inputs share no snapshot times")
        self.writer.json("metrics.json", {"per_time": rows})
        print_table("Metrics", ["t", "EMD", "energy", "BW²"],
                    [(f"{r['t']:.4g}", f"{r['emd']['value']:.4g}", f"{r['energy']:.4g}", f"{r['bw2']:.4g}")
                     for r in rows])
        return {"compared times": len(rows)}

    def _benchmark(self) -> Dict[str, Any]:
        result = run_experiment(self.args.experiment, self.config, d=self.args.d, threads=self.threads)
        self.writer.json(f"{result.name}.json", result.report)
        for label, snaps in result.snapshots.items():
            self.writer.snapshots(f"{result.name}_{label}.csv", snaps)
        return {"experiment": result.name, "seed": self.config.seed}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration JSON")
    common.add_argument("--seed", type=int, help="Override the config seed")
    common.add_argument("--threads", type=int, help="Worker threads (default from OUSB_THREADS)")
    common.add_argument("--out", help="Output directory (overrides output_dir)")
    common.add_argument("--log-level", help="Logging level (default from OUSB_LOG_LEVEL)")
    common.add_argument("--quiet", action="store_true", help="Disable progress bars")

    parser = argparse.ArgumentParser(prog="ousb", description="OU Schrödinger bridge toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gsb-solve", parents=[common], help="Closed-form Gaussian bridge")
    p.add_argument("--problem", required=True, help="Problem JSON {process, rho0, rhoT, T, grid}")
    p.add_argument("--jitter", type=float, help="Add jitter·I to both marginal covariances")
    p.add_argument("--drift-matrices", action="store_true", help="Also write drift_matrices.csv")

    p = sub.add_parser("bridge-sample", parents=[common], help="Sample a pinned OU bridge")
    p.add_argument("--x0", type=_floats, help="Start point, comma separated")
    p.add_argument("--xT", type=_floats, help="End point, comma separated")
    p.add_argument("--times", type=_floats, help="Sampling times (default 11 points on [0, T])")
    p.add_argument("--n", type=int, default=1000, help="Draws per time")
    p.add_argument("--problem", help="Draw endpoints from this Gaussian problem's static plan instead")

    p = sub.add_parser("eot", parents=[common], help="Entropic coupling of two snapshots")
    p.add_argument("--source", required=True, help="Source snapshot CSV")
    p.add_argument("--target", required=True, help="Target snapshot CSV")

    p = sub.add_parser("train", parents=[common], help="Train flow and score networks")
    p.add_argument("--data", nargs="+", required=True, help="Snapshot CSV file(s)")

    p = sub.add_parser("sample", parents=[common], help="Sample trajectories from a checkpoint")
    p.add_argument("--checkpoint", required=True, help="Checkpoint JSON")
    p.add_argument("--data", nargs="+", required=True, help="Snapshot CSV; the earliest time gives initial states")
    p.add_argument("--mode", choices=["sde", "ode"], help="SDE or probability-flow ODE (default from config)")

    p = sub.add_parser("simulate", parents=[common], help="Simulate snapshot data")
    p.add_argument("--system", choices=["ou", "repressilator"], default="ou", help="System to simulate")

    p = sub.add_parser("refit", parents=[common], help="Iterated reference refitting")
    p.add_argument("--data", nargs="+", required=True, help="Snapshot CSV file(s)")
    p.add_argument("--leave-one-out", action="store_true", help="Evaluate every interior snapshot held out")

    p = sub.add_parser("metrics", parents=[common], help="Compare snapshot sets")
    p.add_argument("--a", help="First snapshot CSV")
    p.add_argument("--b", help="Second snapshot CSV")
    p.add_argument("--checkpoint-a", help="First checkpoint")
    p.add_argument("--checkpoint-b", help="Second checkpoint")
    p.add_argument("--data", nargs="+", help="Initial snapshot for checkpoint comparison")

    p = sub.add_parser("benchmark", parents=[common], help="Run a benchmark experiment")
    p.add_argument("--experiment", choices=["gaussian", "mixture", "repressilator", "planted"], required=True)
    p.add_argument("--d", type=int, default=2, help="Dimension (gaussian, mixture)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Returns:
        Exit code: 0 success, 2 usage/config, 3 data, 4 numerical, 5 internal
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        setup_logging(args.log_level.upper() if args.log_level else get_log_level())
        if args.threads is None:
            args.threads = get_default_threads()
        elif args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        config = load_run_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            config = config.with_seed(args.seed)
        service = BridgeService(args.command, args, config)
        service.run()
        return 0
    except OUBridgeError as exc:
        logger.error("[error]%s[/error]: %s", type(exc).__name__, exc)
        return exc.exit_code
    except ValueError as exc:
        logger.error("[error]invalid argument[/error]: %s", exc)
        return 2
    except Exception:
        logger.exception("internal error")
        return 5


if __name__ == "__main__":
    sys.exit(main())
