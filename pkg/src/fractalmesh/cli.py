"""Command-line front end: ``fractalmesh <command> --config run.json``.

Commands: train, mesh, analyze, dim, rollout, pca, sweep, trend. Every
output lands in the run directory next to a PNG figure (unless
``--no-figures``). A failing command writes ``error.json`` naming the stage
and exits nonzero.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import (ConvergenceError, DomainError, FractalMeshError, InputError, MeshValidationError,
                     PartialMeshError, RecurrentClassError)
from .fracdim import box_counts, box_dimension
from .io import read_json, write_csv, write_json
from .markov import (build_transition_matrix, lambda2, mfpt_eigen, mfpt_exact, sparsity_pattern,
                     transition_mass_cdf)
from .mesh import STD_FLOOR, Mesh, NormalizationStats
from .pca import pca_project
from .pointsets import fractal_pointset
from .policy import LinearPolicy
from .reachability import create_mesh, seed_states
from .rollout import mc_mfpt
from .slip import SlipHopper, period_one_policy
from .training import TrainingLog, ars_train

log = logging.getLogger("fractalmesh")

COMMANDS = ("train", "mesh", "analyze", "dim", "rollout", "pca", "sweep", "trend")


class Run:
    """One command invocation: resolved config, output directory and flags."""

    def __init__(self, cfg: RunConfig, out: Path, force: bool, threads: int, figures: bool):
        self.cfg = cfg
        self.out = out
        self.force = force
        self.threads = threads
        self.figures = figures
        self.stage = "setup"

    def claim(self, *names: str) -> list[Path]:
        """Reserve output paths, refusing to clobber existing files without --force."""
        self.stage = "output"
        self.out.mkdir(parents=True, exist_ok=True)
        paths = [self.out / n for n in names]
        taken = [p.name for p in paths if p.exists()]
        if taken and not self.force:
            raise InputError(f"outputs already exist in {self.out}: {taken}; pass --force to overwrite")
        return paths

    def figure(self, name: str, fn, *args):
        if not self.figures:
            return None
        from . import plotting

        self.stage = "figures"
        path = self.out / name
        if path.exists() and not self.force:
            raise InputError(f"{path} already exists; pass --force to overwrite")
        return getattr(plotting, fn)(*args, path)

    def mesh_path(self) -> Path:
        return Path(self.cfg.mesh.path) if self.cfg.mesh.path else self.out / "mesh.json"


# -- shared pipeline pieces ----------------------------------------------------


def fixture_policy(env, block: dict):
    if isinstance(env, SlipHopper):
        return period_one_policy(env, **block)
    if env.name == "quadratic":
        return LinearPolicy([[env.target_gain]], NormalizationStats.identity(1), meta={"source": "fixture"})
    return None


def resolve_policy(run: Run, env, seed: int) -> tuple[LinearPolicy | None, TrainingLog | None]:
    cfg = run.cfg
    source = cfg.policy_source
    block = cfg.policy[source]
    run.stage = "policy"
    if source == "checkpoint":
        return LinearPolicy.load(block), None
    if source == "fixture":
        return fixture_policy(env, dict(block or {})), None
    if source == "zero":
        return LinearPolicy.zeros(env.action_dim, env.state_dim), None
    run.stage = "train"
    ars, objective, init = cfg.ars_config(seed)
    init_policy = LinearPolicy.load(init) if init else None
    return ars_train(env, ars, objective, init_policy)


def seed_stats(points) -> NormalizationStats:
    """Fallback whitening from seed states; flat coordinates get unit scale."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    std = pts.std(axis=0)
    return NormalizationStats(pts.mean(axis=0), np.where(std > STD_FLOOR, std, 1.0))


def mesh_stats(mode: str, policy, seeds, env, source: str) -> tuple[NormalizationStats, str]:
    """Whitening for meshing: the policy's training stats, else the seed fallback."""
    if mode == "auto":
        mode = "policy" if isinstance(policy, LinearPolicy) and source != "zero" else "seeds"
    if mode == "policy":
        if not isinstance(policy, LinearPolicy):
            raise InputError("mesh.stats = 'policy' needs a linear policy")
        return policy.obs_stats, "policy"
    if mode == "seeds":
        return seed_stats(seeds), "seeds"
    if mode == "identity":
        return NormalizationStats.identity(env.state_dim), "identity"
    raise InputError(f"mesh.stats must be auto, policy, seeds or identity, got {mode!r}")


def build_mesh(run: Run, env, policy, seed: int, box_size: float):
    m = run.cfg.mesh
    run.stage = "seed"
    seeds = seed_states(env, policy, m.n_init, m.settle_steps, np.random.default_rng(seed), m.init_noise)
    stats, provenance = mesh_stats(m.stats, policy, seeds, env, run.cfg.policy_source)
    run.stage = "mesh"
    report = create_mesh(env, policy, seeds, run.cfg.grid(), box_size, stats, m.max_states, run.threads)
    return report, provenance


# -- commands ----------------------------------------------------------------


def cmd_train(run: Run) -> dict:
    if run.cfg.policy_source != "train":
        raise InputError("train needs a policy.train block")
    policy_path, log_path = run.claim("policy.json", "training_log.csv")
    env = run.cfg.build_environment()
    policy, history = resolve_policy(run, env, run.cfg.seed)
    run.stage = "write"
    policy.save(policy_path)
    write_csv(log_path, TrainingLog.columns, history.rows)
    if history.rows:
        run.figure("training.png", "training_figure", history.rows)
    return {"policy": str(policy_path), "epochs": len(history.rows)}


def cmd_mesh(run: Run) -> dict:
    mesh_path, report_path = run.claim("mesh.json", "build_report.json")
    env = run.cfg.build_environment()
    policy, _ = resolve_policy(run, env, run.cfg.seed)
    meta = {"box_size": run.cfg.mesh.box_size, "disturbances": len(run.cfg.grid()),
            "policy_source": run.cfg.policy_source, "environment": env.name, "seed": run.cfg.seed}
    try:
        report, provenance = build_mesh(run, env, policy, run.cfg.seed, run.cfg.mesh.box_size)
    except PartialMeshError as exc:
        write_json(report_path, {**exc.report.to_dict(), **meta})
        raise
    run.stage = "write"
    report.mesh.save(mesh_path)
    write_json(report_path, {**report.to_dict(), **meta, "stats_source": provenance})
    return {"mesh": str(mesh_path), "states": len(report.mesh)}


def _start(run: Run, mesh_path: Path):
    start = run.cfg.analysis.start
    if start == "uniform":
        return None, "uniform"
    if start == "seeds":
        report = mesh_path.with_name("build_report.json")
        ids = read_json(report)["seed_ids"] if report.exists() else [0]
        return [int(i) for i in ids], "seeds"
    if isinstance(start, list):
        return [int(i) for i in start], "ids"
    raise InputError(f"analysis.start must be 'uniform', 'seeds' or a list of IDs, got {start!r}")


def cmd_analyze(run: Run) -> dict:
    mesh_path = run.mesh_path()
    names = ("summary.json", "transition_matrix.txt", "sparsity.csv", "mass_cdf.csv")
    summary_path, matrix_path, sparsity_path, cdf_path = run.claim(*names)
    run.stage = "load"
    mesh = Mesh.load(mesh_path)
    run.stage = "analyze"
    T = build_transition_matrix(mesh)
    a = run.cfg.analysis
    summary = {"states": len(mesh), "nnz": T.nnz, "box_size": mesh.box_size, "notes": []}
    try:
        spec = lambda2(T, a.lambda_tol, a.max_iters)
        summary.update(lambda2=spec.lambda2, lambda2_iterations=spec.iterations,
                       lambda2_residual=spec.residual)
        summary["mfpt_eigen"] = mfpt_eigen(spec.lambda2)
    except (ConvergenceError, DomainError) as exc:
        summary.setdefault("lambda2", None)
        summary["mfpt_eigen"] = None
        summary["notes"].append(f"{type(exc).__name__}: {exc}")
    start, start_kind = _start(run, mesh_path)
    summary["start"] = start_kind if start is None or start_kind != "ids" else start
    try:
        summary["mfpt_exact"] = mfpt_exact(T, start)
    except RecurrentClassError as exc:
        summary["mfpt_exact"] = None
        summary["notes"].append(f"RecurrentClassError: {exc}")
    failures = sum(e.transitions.count(-1) for e in mesh)
    summary["failure_transition_fraction"] = failures / (len(mesh) * len(mesh.entry(0).transitions))
    pattern = sparsity_pattern(T)
    cdf = transition_mass_cdf(T)
    run.stage = "write"
    write_json(summary_path, summary)
    T.save(matrix_path)
    write_csv(sparsity_path, ("row", "col"), [{"row": r, "col": c} for r, c in pattern])
    write_csv(cdf_path, ("state_fraction", "mass_fraction"),
              [{"state_fraction": f, "mass_fraction": m} for f, m in cdf])
    run.figure("sparsity.png", "sparsity_figure", pattern, T.size)
    run.figure("mass_cdf.png", "mass_cdf_figure", cdf)
    return summary


def cmd_dim(run: Run) -> dict:
    counts_path, fit_path = run.claim("box_counts.csv", "dimension.json")
    a = run.cfg.analysis
    run.stage = "load"
    if a.pointset:
        points = fractal_pointset(a.pointset["kind"], int(a.pointset["level"]))
        stats = NormalizationStats.from_points(points)
        source = {"pointset": a.pointset}
    else:
        mesh = Mesh.load(run.mesh_path())
        points, stats = mesh.representatives(), mesh.stats
        source = {"mesh": str(run.mesh_path())}
    run.stage = "dim"
    ladder = a.box_ladder()
    counts = box_counts(points, ladder, stats)
    fit = box_dimension(counts)
    run.stage = "write"
    write_csv(counts_path, ("box_size", "count"), [{"box_size": d, "count": n} for d, n in counts])
    doc = {**fit.to_dict(), "intercept": fit.intercept, "points": int(len(points)),
           "ladder": {"d0": ladder.d0, "factor": ladder.factor, "levels": ladder.levels}, **source}
    write_json(fit_path, doc)
    run.figure("box_counts.png", "box_count_figure", counts, fit)
    return doc


def cmd_rollout(run: Run) -> dict:
    stats_path, steps_path = run.claim("rollout.json", "rollout_steps.csv")
    env = run.cfg.build_environment()
    policy, _ = resolve_policy(run, env, run.cfg.seed)
    m, a = run.cfg.mesh, run.cfg.analysis
    run.stage = "seed"
    starts = seed_states(env, policy, m.n_init, m.settle_steps, np.random.default_rng(run.cfg.seed),
                         m.init_noise)
    run.stage = "rollout"
    res = mc_mfpt(env, policy, run.cfg.sampler(), starts, a.mc_trials, a.max_steps, run.cfg.seed)
    run.stage = "write"
    doc = {**res.to_dict(), "standard_error": res.standard_error, "max_steps": a.max_steps,
           "seed": run.cfg.seed}
    write_json(stats_path, doc)
    write_csv(steps_path, ("trial", "steps", "censored"),
              [{"trial": i, "steps": s, "censored": c}
               for i, (s, c) in enumerate(zip(res.steps, res.censored_flags))])
    return doc


def cmd_pca(run: Run) -> dict:
    csv_path, meta_path = run.claim("pca.csv", "pca.json")
    run.stage = "load"
    mesh = Mesh.load(run.mesh_path())
    run.stage = "pca"
    proj = pca_project(mesh, run.cfg.analysis.pca_k)
    cols = ["id"] + [f"pc{i + 1}" for i in range(proj.k)] + ["failure"]
    rows = []
    for i in range(len(mesh)):
        row = {"id": i, "failure": bool(proj.failure_flag[i])}
        row.update({f"pc{j + 1}": float(proj.projected[i, j]) for j in range(proj.k)})
        rows.append(row)
    run.stage = "write"
    write_csv(csv_path, cols, rows)
    doc = {"explained_variance": proj.explained_variance.tolist(), "components": proj.components.tolist(),
           "mean": proj.mean.tolist(), "failure_states": int(proj.failure_flag.sum()),
           "failure_marker": "transition list contains the failure state"}
    write_json(meta_path, doc)
    run.figure("pca.png", "pca_figure", proj)
    return doc


def cmd_sweep(run: Run) -> dict:
    (csv_path,) = run.claim("sweep.csv")
    env = run.cfg.build_environment()
    seeds = run.cfg.mesh.seeds or [run.cfg.seed]
    rows = []
    for seed in seeds:
        policy, _ = resolve_policy(run, env, seed)
        for box in run.cfg.mesh.box_sizes:
            try:
                report, _ = build_mesh(run, env, policy, seed, box)
                size, failures, capped = len(report.mesh), report.failures_recorded, False
            except PartialMeshError as exc:
                size, failures, capped = exc.report.states_explored, exc.report.failures_recorded, True
            log.info("sweep seed %d box %g: %d states%s", seed, box, size, " (capped)" if capped else "")
            rows.append({"seed": seed, "box_size": float(box), "mesh_size": size,
                         "failures_recorded": failures, "capped": capped})
    run.stage = "write"
    write_csv(csv_path, ("seed", "box_size", "mesh_size", "failures_recorded", "capped"), rows)
    run.figure("sweep.png", "sweep_figure", rows)
    return {"rows": len(rows)}


def cmd_trend(run: Run) -> dict:
    from .experiments import TrendStudyConfig, fractal_trend_study
    from .training import ArsConfig

    csv_path, json_path = run.claim("trend.csv", "trend.json")
    block = dict(run.cfg.trend)
    base = TrendStudyConfig()
    kw = {}
    for name in ("standard", "fractal"):
        if name in block:
            kw[name] = replace(getattr(base, name), **block.pop(name))
    for f in fields(TrendStudyConfig):
        if f.name in block:
            v = block.pop(f.name)
            kw[f.name] = tuple(v) if isinstance(v, list) else v
    if block:
        raise InputError(f"unknown keys in trend: {sorted(block)}")
    study_cfg = replace(base, **kw)
    env = run.cfg.build_environment()
    if not isinstance(env, SlipHopper):
        raise InputError("trend runs on the slip environment")
    run.stage = "trend"
    result = fractal_trend_study(study_cfg, env)
    run.stage = "write"
    cols = ("seed", "group", "mesh_size", "capped", "final_return")
    write_csv(csv_path, cols, [{c: a[c] for c in cols} for a in result.table()])
    doc = {"median_standard": result.median("standard"), "median_fractal": result.median("fractal"),
           "fractal_smaller": result.fractal_smaller,
           "sizes": {g: result.sizes(g) for g in ("standard", "fractal")},
           "timing": [{"seed": a["seed"], "group": a["group"], "train_time": a["train_time"],
                       "mesh_time": a["mesh_time"]} for a in result.table()]}
    write_json(json_path, doc)
    run.figure("trend.png", "trend_figure", doc["sizes"])
    return doc


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractalmesh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="run config JSON (defaults apply when omitted)")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--threads", type=int, default=1, help="worker threads for meshing")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out or Path("out")
    run = None
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out or Path(cfg.out)
        if args.threads < 1:
            raise InputError(f"--threads must be >= 1, got {args.threads}")
        run = Run(cfg, out, args.force, args.threads, not args.no_figures)
        result = HANDLERS[args.command](run)
    except Exception as exc:  # reported as error.json, never swallowed silently
        stage = run.stage if run else "config"
        if getattr(exc, "stage", "unknown") != "unknown":
            stage = exc.stage
        doc = {"command": args.command, "stage": stage, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, MeshValidationError) and exc.entry_id is not None:
            doc["entry_id"] = exc.entry_id
        if not isinstance(exc, FractalMeshError):
            doc["traceback"] = traceback.format_exc()
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", doc)
        except OSError:
            pass
        print(f"fractalmesh {args.command}: {stage} failed: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, InputError) else 1
    log.info("%s done: %s", args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
