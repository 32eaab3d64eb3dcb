"""Train / sample / evaluate pipelines shared by the CLI and the acceptance suite."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bridgematch import io
from bridgematch.bridge import BridgeSpec
from bridgematch.config import ExperimentConfig, build_dataset
from bridgematch.core import root_stream, split_stream
from bridgematch.couplings import CouplingSampler, PairedBatch
from bridgematch.gaussian import GaussianCouplingSpec, alpha_star, f_alpha
from bridgematch.metrics import CouplingReport, coupling_report, nearest_center
from bridgematch.nets import Checkpoint, save_checkpoint
from bridgematch.plot import GREY, Figure, component_colors
from bridgematch.sampling import SamplerConfig, sample_endpoints, sample_trajectories
from bridgematch.training import init_model, train

log = logging.getLogger(__name__)

# stream labels under the root seed
TRAIN, X0_DRAW, PATH_NOISE, TARGET_DRAW = 1, 2, 3, 4


def train_checkpoint(cfg: ExperimentConfig, seed: int, loss_log: list | None = None) -> Checkpoint:
    dataset = build_dataset(cfg.dataset)
    stream = split_stream(root_stream(seed), TRAIN)
    model = init_model(dataset.dim, cfg.train, cfg.model, split_stream(stream, 0))
    model = train(dataset, cfg.train, stream, model=model, loss_log=loss_log)
    return Checkpoint(model, cfg.train.sigma, seed, {"dataset": cfg.dataset, "experiment": cfg.name})


def draw_starts(dataset: CouplingSampler, n: int, seed: int) -> PairedBatch:
    """Fresh pairs from the training coupling; ``x0s`` seed the sampler."""
    return dataset.sample(n, split_stream(root_stream(seed), X0_DRAW))


def evaluate(ckpt: Checkpoint, dataset: CouplingSampler, sampler: SamplerConfig, n: int,
             seed: int) -> tuple[PairedBatch, CouplingReport]:
    starts = draw_starts(dataset, n, seed)
    spec = BridgeSpec(ckpt.sigma, ckpt.model.dim)
    generated = sample_endpoints(ckpt.model, spec, sampler, starts.x0s,
                                 split_stream(root_stream(seed), PATH_NOISE))
    return generated, report_for(generated, dataset, seed)


def report_for(generated: PairedBatch, dataset: CouplingSampler, seed: int,
               reference_x1s=None) -> CouplingReport:
    target = dataset.target_marginal(len(generated), split_stream(root_stream(seed), TARGET_DRAW))
    return coupling_report(generated, target, dataset.source_centers, dataset.target_centers,
                           dataset.pairing, reference_x1s)


def gaussian_curve(sigma: float, alphas) -> tuple[list[float], float]:
    values = [f_alpha(GaussianCouplingSpec(float(a), sigma)) for a in alphas]
    return values, alpha_star(sigma)


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` inclusive of ``stop`` (up to rounding)."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise ValueError(f"bad grid {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def target_labels(points: np.ndarray, dataset: CouplingSampler | None):
    if dataset is None or dataset.target_centers is None or points.shape[1] != dataset.target_centers.shape[1]:
        return None
    return nearest_center(points, dataset.target_centers)


def render_coupling(generated: PairedBatch, trajectories=None, dataset=None, title="") -> str:
    """Start points in grey, endpoints and paths coloured by the endpoint's component."""
    fig = Figure(title=title)
    d = generated.dim if len(generated) else (trajectories[1].shape[-1] if trajectories else 2)
    if d == 1:
        fig.xlabel, fig.ylabel = "x0", "x1"
        fig.scatter(generated.x0s[:, 0], generated.x1s[:, 0], [PALETTE_DEFAULT] * len(generated))
        return fig.to_svg()
    if trajectories is not None:
        _, states, _ = trajectories
        labels = target_labels(states[:, -1], dataset)
        for k in range(states.shape[0]):
            color = PALETTE_DEFAULT if labels is None else component_colors([labels[k]])[0]
            fig.line(states[k, :, 0], states[k, :, 1], color, width=0.6, opacity=0.5)
    if len(generated):
        fig.scatter(generated.x0s[:, 0], generated.x0s[:, 1], [GREY] * len(generated))
        labels = target_labels(generated.x1s, dataset)
        colors = [PALETTE_DEFAULT] * len(generated) if labels is None else component_colors(labels)
        fig.scatter(generated.x1s[:, 0], generated.x1s[:, 1], colors)
    return fig.to_svg()


PALETTE_DEFAULT = "#1f77b4"


@dataclass
class RunResult:
    label: str
    seed: int
    report: CouplingReport
    checkpoint: Path


def run_experiment(cfg: ExperimentConfig, out_dir: Path, seeds=None) -> dict:
    """Full pipeline for every variant and seed; returns (and writes) a summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    if cfg.gaussian is not None:
        return run_gaussian(cfg, out_dir)
    seeds = seeds if seeds is not None else (cfg.seeds or [cfg.seed])
    summary: dict = {"name": cfg.name, "variants": {}}
    for label, vcfg in cfg.resolved_variants():
        dataset = build_dataset(vcfg.dataset)
        runs = []
        for seed in seeds:
            run_dir = out_dir / label / f"seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            loss_log: list = []
            ckpt = train_checkpoint(vcfg, seed, loss_log)
            save_checkpoint(run_dir / "checkpoint.json", ckpt)
            io.write_loss_log(run_dir / "loss.csv", loss_log)
            generated, report = evaluate(ckpt, dataset, vcfg.sampler, vcfg.eval.n_paths, seed)
            io.write_endpoints(run_dir / "endpoints.csv", generated)
            n_traj = min(vcfg.eval.n_trajectories, len(generated))
            traj = sample_trajectories(ckpt.model, BridgeSpec(ckpt.sigma, ckpt.model.dim), vcfg.sampler,
                                       generated.x0s[:n_traj], split_stream(root_stream(seed), PATH_NOISE))
            io.write_trajectories(run_dir / "trajectories.csv", *traj)
            (run_dir / "report.txt").write_text(report.as_text())
            (run_dir / "plot.svg").write_text(
                render_coupling(generated, traj, dataset, f"{cfg.name} {label} seed {seed}"))
            log.info("%s/%s seed %d: %s", cfg.name, label, seed, report.as_dict())
            runs.append(report.as_dict())
        medians = {}
        for key in runs[0]:
            vals = [r[key] for r in runs if r[key] is not None]
            if vals:
                medians[key] = float(np.median(vals))
        summary["variants"][label] = {"runs": runs, "median": medians}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def run_gaussian(cfg: ExperimentConfig, out_dir: Path) -> dict:
    spec = cfg.gaussian
    grid = parse_grid(spec.get("alpha_grid", "0.05:0.95:0.05"))
    summary: dict = {"name": cfg.name, "curves": {}}
    fig = Figure(title=cfg.name, xlabel="alpha", ylabel="f(alpha)")
    fig.line(grid, grid, GREY, opacity=0.6)
    for i, sigma in enumerate(spec.get("sigmas", [1.0])):
        values, a_star = gaussian_curve(float(sigma), grid)
        io.write_gaussian_curve(out_dir / f"gaussian_sigma{sigma:g}.csv", grid, values, a_star)
        fig.line(grid, values, component_colors([i])[0])
        summary["curves"][f"{sigma:g}"] = {"alpha_star": a_star, "f_alpha": values}
    (out_dir / "plot.svg").write_text(fig.to_svg())
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
