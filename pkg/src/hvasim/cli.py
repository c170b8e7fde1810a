"""Command-line runner: ``hvasim <command> --config <file> [--seed] [--output] [--threads]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Sequence

from .config import COMMANDS, ConfigError, RunConfig, load_config
from .experiments import (
    barren_plateau_scan,
    random_start_optima,
    refine,
    resolve_threads,
    smoothness_score,
    transferability,
    variance_vs_depth,
)
from .interp import evaluate, run_interp
from .io import ArtifactError, Table, format_vector, read_manifest, write_manifest
from .models import Schedule
from .spectra import SpectralCache

log = logging.getLogger("hvasim")

MANIFEST = "manifest.json"
CACHE_FILE = "spectral_cache.json"
FIGURE_DIR = "figures"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _schedule_table(schedule: Schedule) -> Table:
    table = Table(("m", "beta", "alpha"))
    for m, (b, a) in enumerate(zip(schedule.betas, schedule.alphas), start=1):
        table.append(m=m, beta=b, alpha=a)
    return table


def _infidelity(fid: float | None) -> float | None:
    return None if fid is None else 1.0 - fid


def _smooth_schedule(cfg: RunConfig, depth: int, cache: SpectralCache) -> Schedule:
    run = run_interp(cfg.model, 1, depth, None, cfg.optimizer, cache=cache, with_reports=False)
    return run.optimal(depth)


# -- commands -------------------------------------------------------------------


def _run_interp(cfg: RunConfig, cache: SpectralCache, threads: int) -> dict[str, Table]:
    exp = cfg.experiment
    if exp["p_min"] > 1 and exp["init"] is None:
        raise ConfigError("experiment.init: required when p_min > 1")
    run = run_interp(cfg.model, exp["p_min"], exp["p_max"], exp["init"], cfg.optimizer, cache=cache)
    summary = Table((
        "P", "start_energy", "optimal_energy", "start_residual_energy", "residual_energy",
        "fidelity", "infidelity", "translational_fidelity", "n_iterations", "stop_reason", "betas", "alphas",
    ))
    schedules = Table(("P", "m", "beta", "alpha"))
    for entry in run.per_depth:
        rep = entry.report
        summary.append(
            P=entry.depth,
            start_energy=entry.start_report.energy,
            optimal_energy=rep.energy,
            start_residual_energy=entry.start_report.residual_energy,
            residual_energy=rep.residual_energy,
            fidelity=rep.fidelity,
            infidelity=rep.infidelity,
            translational_fidelity=rep.translational_fidelity,
            n_iterations=entry.trace.n_iterations,
            stop_reason=entry.trace.stop_reason.value,
            betas=format_vector(entry.optimal.betas),
            alphas=format_vector(entry.optimal.alphas),
        )
        for m, (b, a) in enumerate(zip(entry.optimal.betas, entry.optimal.alphas), start=1):
            schedules.append(P=entry.depth, m=m, beta=b, alpha=a)
    return {"interp.csv": summary, "schedules.csv": schedules}


def _run_transfer(cfg: RunConfig, cache: SpectralCache, threads: int) -> dict[str, Table]:
    exp = cfg.experiment
    result = transferability(
        cfg.model, exp["depth"], exp["target_sizes"], exp["n_random"], cfg.seed, cfg.optimizer,
        cache=cache, threads=threads,
    )
    rows = Table(("N", "kind", "residual_energy", "fidelity", "rescaled_energy", "P", "N_G"))
    for r in result.rows:
        rows.append(N=r.n_sites, kind=r.kind, residual_energy=r.residual_energy, fidelity=r.fidelity,
                    rescaled_energy=r.rescaled_energy, P=r.depth, N_G=r.n_guess)
    optima = Table(("index", "cost", "smoothness", "betas", "alphas"))
    for r in result.random_optima:
        optima.append(index=r.index, cost=r.cost,
                      smoothness=smoothness_score(r.schedule) if r.schedule.depth >= 3 else None,
                      betas=format_vector(r.schedule.betas), alphas=format_vector(r.schedule.alphas))
    return {"transfer.csv": rows, "smooth_schedule.csv": _schedule_table(result.smooth), "random_optima.csv": optima}


def _run_barren(cfg: RunConfig, cache: SpectralCache, threads: int) -> dict[str, Table]:
    exp = cfg.experiment
    smooth = _smooth_schedule(cfg, exp["depth"], cache) if exp["smooth"] else None
    rows = barren_plateau_scan(
        cfg.model, exp["sizes"], exp["depth"], smooth,
        epsilon=exp["epsilon"], n_samples=exp["n_samples"], n_random_centers=exp["n_random_centers"],
        seed=cfg.seed, component=exp["component"], threads=threads,
    )
    table = Table(("N", "region", "variance", "spread", "P", "n_samples", "seed"))
    for r in rows:
        table.append(N=r.n_sites, region=r.region, variance=r.variance, spread=r.spread, P=r.depth,
                     n_samples=r.n_samples, seed=r.seed)
    out = {"variance.csv": table}
    if smooth is not None:
        out["smooth_schedule.csv"] = _schedule_table(smooth)
    if exp["depths"]:
        by_depth = Table(("N", "P", "variance", "n_samples", "seed"))
        for r in variance_vs_depth(cfg.model, exp["depths"], n_samples=exp["n_samples"], seed=cfg.seed, threads=threads):
            by_depth.append(N=r.n_sites, P=r.depth, variance=r.variance, n_samples=r.n_samples, seed=r.seed)
        out["variance_depth.csv"] = by_depth
    return out


def _run_refine(cfg: RunConfig, cache: SpectralCache, threads: int) -> dict[str, Table]:
    exp = cfg.experiment
    depth = exp["depth"]
    start = exp["start"] if exp["start"] is not None else _smooth_schedule(cfg, depth, cache)
    if start.depth != depth:
        raise ConfigError(f"experiment.start: has depth {start.depth}, expected {depth}")
    target = cfg.model.with_size(exp["target_n"])
    result = refine(target, start, cfg.optimizer, cache)
    trace = Table(("iteration", "cost", "gradient_norm"))
    for i, it in enumerate(result.trace.iterates):
        trace.append(iteration=i, cost=it.cost, gradient_norm=it.gradient_norm)
    summary = Table(("stage", "energy", "residual_energy", "fidelity", "infidelity", "max_deviation", "stop_reason"))
    before = result.start_report
    summary.append(stage="start", energy=before.energy, residual_energy=before.residual_energy,
                   fidelity=before.fidelity, infidelity=before.infidelity, max_deviation=0.0, stop_reason=None)
    summary.append(stage="refined", energy=result.report.energy, residual_energy=result.report.residual_energy,
                   fidelity=result.report.fidelity, infidelity=result.report.infidelity,
                   max_deviation=result.max_deviation(start), stop_reason=result.trace.stop_reason.value)
    schedules = Table(("m", "beta_start", "alpha_start", "beta", "alpha"))
    for m in range(depth):
        schedules.append(m=m + 1, beta_start=start.betas[m], alpha_start=start.alphas[m],
                         beta=result.schedule.betas[m], alpha=result.schedule.alphas[m])
    return {"refine_trace.csv": trace, "refine.csv": summary, "refined_schedule.csv": schedules}


def _run_random_baseline(cfg: RunConfig, cache: SpectralCache, threads: int) -> dict[str, Table]:
    exp = cfg.experiment
    optima = random_start_optima(cfg.model, exp["depth"], exp["n_restarts"], cfg.seed, cfg.optimizer, threads=threads)
    table = Table(("rank", "index", "energy", "rescaled_energy", "residual_energy", "fidelity", "smoothness",
                   "betas", "alphas"))
    for rank, r in enumerate(optima, start=1):
        rep = evaluate(cfg.model, r.schedule, cache)
        table.append(rank=rank, index=r.index, energy=rep.energy, rescaled_energy=rep.rescaled_energy,
                     residual_energy=rep.residual_energy, fidelity=rep.fidelity,
                     smoothness=smoothness_score(r.schedule) if r.schedule.depth >= 3 else None,
                     betas=format_vector(r.schedule.betas), alphas=format_vector(r.schedule.alphas))
    return {"random_baseline.csv": table}


RUNNERS: dict[str, Callable[[RunConfig, SpectralCache, int], dict[str, Table]]] = {
    "interp": _run_interp,
    "transfer": _run_transfer,
    "ff-tfim": _run_transfer,
    "barren": _run_barren,
    "refine": _run_refine,
    "random-baseline": _run_random_baseline,
}


def run(cfg: RunConfig, output_dir: Path, threads: int | None = None) -> list[Path]:
    """Execute one configured experiment and write its tables, manifest and figure data."""
    n_threads = resolve_threads(threads if threads is not None else cfg.threads)
    output_dir.mkdir(parents=True, exist_ok=True)
    cache = SpectralCache(output_dir / CACHE_FILE)
    t0 = time.perf_counter()
    tables = RUNNERS[cfg.command](cfg, cache, n_threads)
    paths = [table.write(output_dir / name) for name, table in tables.items()]
    write_manifest(
        output_dir / MANIFEST,
        command=cfg.command,
        config=cfg.echo(),
        seed=cfg.seed,
        wall_time=time.perf_counter() - t0,
        outputs=sorted(tables),
        threads=n_threads,
    )
    return paths + emit_figure_data(output_dir)


# -- figure tables ---------------------------------------------------------------


def _params(model: dict) -> str:
    return ";".join(f"{k}={v!r}" for k, v in sorted(model.items()) if k not in ("family", "n_sites"))


def emit_figure_data(run_dir: str | Path) -> list[Path]:
    """Write plot-ready tables under ``<run_dir>/figures`` from a completed run."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir / MANIFEST)
    command = manifest["command"]
    model = manifest["config"]["model"]
    family, n_guess = model["family"], model["n_sites"]
    out_dir = run_dir / FIGURE_DIR
    written = []

    if command == "interp":
        schedules = Table.read(run_dir / "schedules.csv")
        fig1 = Table(("rescaled_index", "beta", "alpha", "P", "N", "family"))
        for rec in schedules.records():
            p, m = rec["P"], rec["m"]
            fig1.append(rescaled_index=(m - 1) / (p - 1) if p > 1 else 0.0, beta=rec["beta"], alpha=rec["alpha"],
                        P=p, N=n_guess, family=family)
        written.append(fig1.write(out_dir / "fig1_schedules.csv"))
        summary = Table.read(run_dir / "interp.csv")
        figc3 = Table(("P", "infidelity", "translational_infidelity", "residual_energy", "N", "family"))
        for rec in summary.records():
            tf = rec["translational_fidelity"]
            figc3.append(P=rec["P"], infidelity=rec["infidelity"],
                         translational_infidelity=None if tf is None else 1.0 - tf,
                         residual_energy=rec["residual_energy"], N=n_guess, family=family)
        written.append(figc3.write(out_dir / "figC3_infidelity_vs_P.csv"))
    elif command in ("transfer", "ff-tfim"):
        rows = Table.read(run_dir / "transfer.csv")
        fig2 = Table(("N", "residual_energy", "family", "params", "P", "N_G", "kind"))
        for rec in rows.records():
            fig2.append(N=rec["N"], residual_energy=rec["residual_energy"], family=family, params=_params(model),
                        P=rec["P"], N_G=rec["N_G"], kind=rec["kind"])
        name = "figD1_residual_vs_N.csv" if command == "ff-tfim" else "fig2_residual_vs_N.csv"
        written.append(fig2.write(out_dir / name))
    elif command == "barren":
        rows = Table.read(run_dir / "variance.csv")
        fig4 = Table(("N", "region", "variance", "P", "n_samples", "seed"))
        for rec in rows.records():
            fig4.append(N=rec["N"], region=rec["region"], variance=rec["variance"], P=rec["P"],
                        n_samples=rec["n_samples"], seed=rec["seed"])
        written.append(fig4.write(out_dir / "fig4_variance_vs_N.csv"))
        if (run_dir / "variance_depth.csv").exists():
            rows = Table.read(run_dir / "variance_depth.csv")
            fig3 = Table(("P", "variance", "N", "n_samples", "seed"))
            for rec in rows.records():
                fig3.append(P=rec["P"], variance=rec["variance"], N=rec["N"], n_samples=rec["n_samples"],
                            seed=rec["seed"])
            written.append(fig3.write(out_dir / "fig3_variance_vs_P.csv"))
    elif command == "refine":
        trace = Table.read(run_dir / "refine_trace.csv")
        exp = manifest["config"]["experiment"]
        figc5 = Table(("iteration", "cost", "N", "P", "family"))
        for rec in trace.records():
            figc5.append(iteration=rec["iteration"], cost=rec["cost"], N=exp["target_n"], P=exp["depth"], family=family)
        written.append(figc5.write(out_dir / "figC5_refine_trace.csv"))
    elif command == "random-baseline":
        rows = Table.read(run_dir / "random_baseline.csv")
        exp = manifest["config"]["experiment"]
        figc6 = Table(("rank", "residual_energy", "infidelity", "smoothness", "N", "P", "family"))
        for rec in rows.records():
            figc6.append(rank=rec["rank"], residual_energy=rec["residual_energy"],
                         infidelity=_infidelity(rec["fidelity"]), smoothness=rec["smoothness"],
                         N=n_guess, P=exp["depth"], family=family)
        written.append(figc6.write(out_dir / "figC6_random_optima.csv"))
    else:
        raise ArtifactError(f"manifest names unknown command {command!r}")
    return written


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvasim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--output", type=Path, help="output directory (default: config output_dir or runs/<command>)")
        p.add_argument("--threads", type=int, help="worker threads for sample/restart batches")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("figures", help="regenerate figure tables of a finished run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "figures":
            for path in emit_figure_data(args.run_dir):
                print(path)
            return EXIT_OK
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(f"--seed: must fit in 64 bits, got {args.seed}")
            cfg = RunConfig(cfg.command, cfg.model, cfg.optimizer, cfg.experiment, args.seed,
                            cfg.output_dir, cfg.threads, cfg.raw)
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
        output = args.output or cfg.output_dir or Path("runs") / cfg.command
        for path in run(cfg, output, args.threads):
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"hvasim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"hvasim: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - top-level boundary reports and exits nonzero
        print(f"hvasim: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
