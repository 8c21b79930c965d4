"""Command-line experiment runner."""
import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from iscat import VERSION
from iscat.classic.bim import bim_reconstruct
from iscat.classic.bp import back_projection
from iscat.common.errors import ConfigError, Error, NumericError, StoreError
from iscat.common.grid import make_grid
from iscat.config import load_config, scene_from_config, to_json
from iscat.data.checkpoint import read_checkpoint, restore
from iscat.data.data_modules import ScatteringDataset
from iscat.data.data_pipeline import generate_dataset
from iscat.forward.greens import build_greens, incident_field
from iscat.forward.scene import make_scene
from iscat.metrics import MetricReport
from iscat.model.nn.unet import NetConfig, net_init
from iscat.model.train import TrainConfig, train, write_log_csv
from iscat.report import (
    SUMMARY_FIELDS,
    evaluate,
    ista_config,
    run_report,
    summary_row,
    write_csv,
    write_eval,
)
from iscat.selfcheck import mie_errors, run_checks
from iscat.utils.threads import THREADS_ENV, init_threads
from iscat.utils.timing import timing

COMMANDS = ("gen", "bp", "bim", "train", "eval", "report", "mie-check", "selfcheck")


def _setup(args):
    c = load_config(args.config)
    if args.seed is not None:
        c.dataset.seed = args.seed
    threads = args.threads
    if threads is None and THREADS_ENV not in os.environ:
        threads = c.runtime.threads
    c.runtime.threads = init_threads(threads, deterministic=c.runtime.deterministic)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "resolved_config.json"), "w") as fp:
        fp.write(to_json(c))
    return c


def _operators(c):
    scene = scene_from_config(c.scene)
    ops = build_greens(scene, dense=c.scene.solver == "dense")
    return scene, ops, incident_field(scene)


def _data_dir(args, split: str) -> str:
    if args.data is None:
        raise ConfigError("--data is required for this command")
    return os.path.join(args.data, split)


def cmd_gen(args, c):
    scene = scene_from_config(c.scene)
    with timing("dataset generation"):
        manifests = generate_dataset(c, scene, args.out, threads=c.runtime.threads)
    for split, m in manifests.items():
        logging.info("%s: %d samples", split, m.n_samples)


def cmd_bp(args, c):
    scene, ops, einc = _operators(c)
    snr = args.snr if args.snr is not None else c.eval.snr_test[0]
    ds = ScatteringDataset(_data_dir(args, "test"), scene, "contrast-noisy", snr, split="test")
    report = MetricReport()
    for i in range(len(ds)):
        chi_bp = back_projection(ds.measurements(i), ops, einc)
        report.add(ds.manifest.files[i]["name"], chi_bp, ds[i].chi_true)
    write_csv(os.path.join(args.out, "bp_metrics.csv"), report.rows(), ["sample", "mse", "ssim"])
    write_csv(
        os.path.join(args.out, "bp_summary.csv"),
        [summary_row(report, method="bp", test_snr=snr)],
        ["method", "test_snr", *SUMMARY_FIELDS],
    )


def cmd_bim(args, c):
    scene, ops, einc = _operators(c)
    snr = args.snr if args.snr is not None else c.eval.snr_test[0]
    ds = ScatteringDataset(_data_dir(args, "test"), scene, "contrast-noisy", snr, split="test")
    n = min(len(ds), c.eval.n_bim if args.count is None else args.count)
    report = MetricReport()
    history = []
    for i in range(n):
        name = ds.manifest.files[i]["name"]
        chi, states = bim_reconstruct(
            ds.measurements(i),
            ops,
            einc,
            ista_config(c.classic),
            outer_max=c.classic.outer_max,
            init=c.classic.init,
            backend=c.scene.solver,
        )
        report.add(name, chi, ds[i].chi_true)
        history.extend({"sample": name, "p": s.p, "data_residual": s.data_residual} for s in states)
    write_csv(os.path.join(args.out, "bim_metrics.csv"), report.rows(), ["sample", "mse", "ssim"])
    write_csv(os.path.join(args.out, "bim_history.csv"), history, ["sample", "p", "data_residual"])
    write_csv(
        os.path.join(args.out, "bim_summary.csv"),
        [summary_row(report, method="bim", test_snr=snr)],
        ["method", "test_snr", *SUMMARY_FIELDS],
    )


def cmd_train(args, c):
    scene, ops, _ = _operators(c)
    train_cfg = TrainConfig.from_config(c.train)
    ds = ScatteringDataset(_data_dir(args, "train"), scene, train_cfg.loss_kind, train_cfg.snr_train)
    val = None
    if os.path.isdir(_data_dir(args, "val")):
        val = ScatteringDataset(_data_dir(args, "val"), scene, train_cfg.loss_kind, train_cfg.snr_train)

    resume = read_checkpoint(args.resume) if args.resume else None
    with timing(f"training ({train_cfg.loss_kind})"):
        _, log = train(
            ds,
            NetConfig.from_config(c.net),
            train_cfg,
            ops=ops,
            val_dataset=val,
            checkpoint_path=os.path.join(args.out, "checkpoint.pt"),
            resume=resume,
            configs={"experiment": c.to_dict()},
            progress=args.verbose,
        )
    write_log_csv(os.path.join(args.out, "train_log.csv"), log)


def cmd_eval(args, c):
    scene, ops, einc = _operators(c)
    if args.checkpoint is None:
        raise ConfigError("eval needs --checkpoint")
    state = read_checkpoint(args.checkpoint)
    net_cfg = NetConfig(**state["configs"]["net"])
    net = net_init(net_cfg, scene.grid.shape)
    restore(state, net)

    for snr in c.eval.snr_test if args.snr is None else [args.snr]:
        out = os.path.join(args.out, f"snr_{snr:g}dB")
        os.makedirs(out, exist_ok=True)
        ds = ScatteringDataset(_data_dir(args, "test"), scene, "contrast-noisy", snr, split="test")
        result = evaluate(
            net, ds, ops, einc, c, panel_dir=os.path.join(out, "panels"), n_bim=min(c.eval.n_bim, len(ds))
        )
        write_eval(result, out, test_snr=snr)


def cmd_report(args, c):
    scene, ops, einc = _operators(c)
    data_dir = args.data
    if data_dir is None:
        data_dir = os.path.join(args.out, "data")
        with timing("dataset generation"):
            generate_dataset(c, scene, data_dir, threads=c.runtime.threads)
    studies = args.studies.split(",") if args.studies else ("table", "mismatch", "austria")
    with timing("report"):
        run_report(c, data_dir, args.out, scene, ops, einc, studies=studies)


def cmd_mie_check(args, c):
    lambda0 = c.scene.lambda0
    side = args.side * lambda0
    grid = make_grid(args.cells, args.cells, side, side, lambda0)
    scene = make_scene(grid, c.scene.n_tx, c.scene.n_rx, c.scene.radius_lambda * lambda0)
    errors = mie_errors(args.eps, args.radius * lambda0, scene, backend=c.scene.solver)
    write_csv(
        os.path.join(args.out, "mie_check.csv"),
        [{"tx": v, "relative_error": float(e)} for v, e in enumerate(errors)],
    )
    worst = float(np.max(errors))
    logging.info("Worst transmitter relative error %.4e", worst)
    if worst > args.tolerance:
        raise NumericError(f"MoM deviates from the series by {worst:.3e} > {args.tolerance}")


def cmd_selfcheck(args, c):
    results = run_checks()
    write_csv(os.path.join(args.out, "selfcheck.csv"), [r.to_dict() for r in results])
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericError(f"self-check failed: {', '.join(failed)}")


HANDLERS = {
    "gen": cmd_gen,
    "bp": cmd_bp,
    "bim": cmd_bim,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "mie-check": cmd_mie_check,
    "selfcheck": cmd_selfcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iscat", description=__doc__)
    parser.add_argument("--version", action="version", version=f"iscat {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON experiment description")
    common.add_argument("--out", type=str, default=os.getcwd(), help="output directory")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--threads", type=int, default=None, help="worker threads (or ISCAT_THREADS)")
    common.add_argument("--verbose", action="store_true", default=False)

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("bp", "bim", "train", "eval", "report"):
            p.add_argument("--data", type=str, default=None, help="dataset directory written by gen")
        if name in ("bp", "bim", "eval"):
            p.add_argument("--snr", type=float, default=None, help="test SNR in dB")
        if name == "bim":
            p.add_argument("--count", type=int, default=None, help="number of test samples")
        if name == "train":
            p.add_argument("--resume", type=str, default=None, help="checkpoint to continue from")
        if name == "eval":
            p.add_argument("--checkpoint", type=str, default=None)
        if name == "report":
            p.add_argument("--studies", type=str, default=None, help="comma list of table,mismatch,austria")
        if name == "mie-check":
            p.add_argument("--eps", type=float, default=2.0)
            p.add_argument("--radius", type=float, default=0.5, help="cylinder radius in wavelengths")
            p.add_argument("--side", type=float, default=1.2, help="DOI side in wavelengths")
            p.add_argument("--cells", type=int, default=40)
            p.add_argument("--tolerance", type=float, default=0.03)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        c = _setup(args)
        HANDLERS[args.command](args, c)
    except Error as e:
        logging.error("%s: %s", type(e).__name__, e)
        return e.code
    except OSError as e:
        logging.error("I/O error: %s", e)
        return StoreError.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
