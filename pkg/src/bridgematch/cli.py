"""``bm`` command line: train, sample, eval, gaussian, plot and run.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from bridgematch import io
from bridgematch.bridge import BridgeSpec
from bridgematch.config import ConfigError, build_dataset, load_config, parse_dataset, preset_path
from bridgematch.core import root_stream, split_stream
from bridgematch.couplings import PairedBatch, SinkhornError
from bridgematch.experiments import (
    PATH_NOISE, X0_DRAW, gaussian_curve, parse_grid, render_coupling, report_for, run_experiment,
    train_checkpoint,
)
from bridgematch.gaussian import QuadratureError
from bridgematch.nets import load_checkpoint, save_checkpoint
from bridgematch.plot import GREY, Figure, component_colors
from bridgematch.sampling import SamplerConfig, SamplingAborted, sample_trajectories
from bridgematch.training import TrainingAborted

log = logging.getLogger("bridgematch")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else args.seed


def _out_dir(args, default: str = ".") -> Path:
    return Path(args.out_dir if args.out_dir is not None else default)


def _resolve_config(path: str):
    p = Path(path)
    if not p.exists() and preset_path(path).exists():
        p = preset_path(path)
    return load_config(p)


def cmd_train(args) -> int:
    cfg = _resolve_config(args.config)
    seed = _seed(args, cfg.seed)
    out = _out_dir(args, cfg.out_dir or f"runs/{cfg.name}")
    variants = cfg.resolved_variants()
    if args.variant is not None:
        variants = [(label, v) for label, v in variants if label == args.variant]
        if not variants:
            raise ConfigError("variant", f"no variant labelled {args.variant!r}")
    for label, vcfg in variants:
        loss_log: list = []
        ckpt = train_checkpoint(vcfg, seed, loss_log)
        target = out / label / "checkpoint.json" if len(cfg.variants) else out / "checkpoint.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(target, ckpt)
        print(f"wrote {target}")
        if args.loss_log:
            path = Path(args.loss_log)
            if len(variants) > 1:
                path = path.with_name(f"{path.stem}_{label}{path.suffix}")
            io.write_loss_log(path, loss_log)
    return EXIT_OK


def cmd_sample(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    dataset_spec = args.dataset or ckpt.extra.get("dataset")
    if dataset_spec is None:
        raise UsageError("no --dataset given and the checkpoint does not record one")
    dataset = build_dataset(dataset_spec)
    if dataset.dim != ckpt.model.dim:
        raise UsageError(f"dataset dim {dataset.dim} does not match checkpoint dim {ckpt.model.dim}")
    sampler = SamplerConfig(args.num_steps, args.integrator, args.t_clamp)
    seed = _seed(args)
    out = _out_dir(args)
    x0s = dataset.sample(args.n, split_stream(root_stream(seed), X0_DRAW)).x0s
    times, states, preds = sample_trajectories(
        ckpt.model, BridgeSpec(ckpt.sigma, ckpt.model.dim), sampler, x0s,
        split_stream(root_stream(seed), PATH_NOISE))
    io.write_endpoints(out / "endpoints.csv", PairedBatch(x0s, states[:, -1]))
    n_traj = min(args.traj_paths, args.n)
    io.write_trajectories(out / "trajectories.csv", times, states[:n_traj], preds[:n_traj])
    for t in args.snapshots or []:
        if not 0.0 <= t <= 1.0:
            raise UsageError(f"snapshot time {t} outside [0, 1]")
        i = int(round(t * sampler.num_steps))
        io.write_snapshot(out / f"snapshot_t{t:g}.csv", times[i], x0s, preds[:, i])
    print(f"wrote {out / 'endpoints.csv'} and {out / 'trajectories.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    generated = io.read_endpoints(args.endpoints)
    if len(generated) < 2:
        raise UsageError("need at least two endpoint rows to evaluate")
    dataset = build_dataset(args.dataset)
    if dataset.dim != generated.dim:
        raise UsageError(f"dataset dim {dataset.dim} does not match file dim {generated.dim}")
    reference = None
    if args.reference:
        reference = io.read_endpoints(args.reference).x1s
    report = report_for(generated, dataset, _seed(args), reference)
    sys.stdout.write(report.as_text())
    if args.csv:
        d = report.as_dict()
        Path(args.csv).write_text(",".join(d) + "\n" + ",".join("" if v is None else repr(v) for v in d.values()) + "\n")
    return EXIT_OK


def cmd_gaussian(args) -> int:
    grid = parse_grid(args.alpha_grid)
    if grid[0] <= 0 or grid[-1] >= 1:
        raise UsageError("alpha grid must lie strictly inside (0, 1)")
    values, a_star = gaussian_curve(args.sigma, grid)
    io.write_gaussian_curve(args.out, grid, values, a_star)
    print(f"wrote {args.out} ({len(grid)} rows, alpha*={a_star:.10f})")
    return EXIT_OK


def cmd_plot(args) -> int:
    dataset = build_dataset(args.dataset) if args.dataset else None
    generated, traj, curves = None, None, []
    for path in args.inputs:
        header, _ = io.read_table(path)
        kind = io.csv_kind(header)
        if kind == "endpoints":
            generated = io.read_endpoints(path)
        elif kind == "trajectory":
            traj = io.read_trajectories(path)
        elif kind == "gaussian":
            curves.append(io.read_table(path)[1])
        else:
            raise UsageError(f"{path}: unrecognised CSV header {header}")
    if curves:
        fig = Figure(title=args.title, xlabel="alpha", ylabel="f(alpha)")
        for i, arr in enumerate(curves):
            if len(arr):
                fig.line(arr[:, 0], arr[:, 0], GREY, opacity=0.6)
                fig.line(arr[:, 0], arr[:, 1], component_colors([i])[0])
        svg = fig.to_svg()
    else:
        if traj:
            states = np.stack([v[1] for v in traj.values()]) if len({len(v[0]) for v in traj.values()}) == 1 else None
            traj_tuple = None if states is None else (None, states, None)
        else:
            traj_tuple = None
        if generated is None:
            d = traj_tuple[1].shape[-1] if traj_tuple else 2
            generated = PairedBatch.empty(d)
        svg = render_coupling(generated, traj_tuple, dataset, args.title)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _resolve_config(args.config)
    seeds = [args.seed] if args.seed is not None else None
    out = _out_dir(args, cfg.out_dir or f"runs/{cfg.name}")
    summary = run_experiment(cfg, out, seeds)
    print(json.dumps(summary.get("variants", summary.get("curves")), indent=1)[:4000])
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (u64, default 0)")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="bm", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train from a JSON config")
    p.add_argument("config", help="config file or preset name (fig1, fig5, ...)")
    p.add_argument("--variant", default=None)
    p.add_argument("--loss-log", default=None, help="write step,loss CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", parents=[common], help="integrate paths from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--dataset", default=None, help="preset for the initial points, e.g. cross_mixture")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--num-steps", type=int, default=200)
    p.add_argument("--integrator", choices=["bridge_posterior", "euler_maruyama"], default="bridge_posterior")
    p.add_argument("--t-clamp", type=float, default=None)
    p.add_argument("--traj-paths", type=int, default=64, help="paths written to trajectories.csv")
    p.add_argument("--snapshots", type=_floats, default=None, help="times t1,t2,... for prediction CSVs")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common], help="coupling report for an endpoint CSV")
    p.add_argument("endpoints")
    p.add_argument("--dataset", required=True)
    p.add_argument("--reference", default=None, help="endpoint CSV holding ground-truth partners")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gaussian", parents=[common], help="f(alpha) curve for the Gaussian coupling")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--alpha-grid", default="0.05:0.95:0.05")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("plot", parents=[common], help="render CSV outputs to SVG")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default=None, help="colour points by this dataset's target components")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("run", parents=[common], help="train, sample, evaluate and plot a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, io.CsvFormatError) as exc:
        print(f"bm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingAborted, SamplingAborted, QuadratureError, SinkhornError) as exc:
        print(f"bm {args.command}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"bm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
