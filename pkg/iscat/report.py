"""Evaluation tables, image panels and the comparison studies."""
import csv
import dataclasses
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import ml_collections as mlc
import numpy as np

from iscat.classic.bim import bim_reconstruct
from iscat.classic.ista import IstaConfig
from iscat.classic.bp import back_projection
from iscat.common.phantoms import austria_phantom, austria_scale
from iscat.data.data_modules import ScatteringDataset, make_loader
from iscat.data.data_pipeline import generalization_dir, generate_generalization_split
from iscat.data.images import export_panel
from iscat.forward.greens import GreensOperators
from iscat.forward.noise import add_awgn
from iscat.forward.scene import FieldSet, ScatteringScene
from iscat.forward.solver import simulate
from iscat.metrics import MetricReport, mse, ssim
from iscat.model.loss import far_field_residual
from iscat.model.nn.unet import NetConfig, UNet
from iscat.model.train import TrainConfig, predict, train, write_log_csv
from iscat.utils.tensor_utils import complex_to_channels, to_tensor

# Austria sweep sets: which of (left disk, right disk, ring) take the swept value
AUSTRIA_SETS = {
    "a": (True, True, True),
    "b": (False, False, True),
    "c": (True, False, False),
}
AUSTRIA_FIXED_EPS = 2.0
# Separates Austria noise draws from dataset seeds
AUSTRIA_STREAM = 7

SUMMARY_FIELDS = ("mse_mean", "mse_median", "mse_std", "ssim_mean", "ssim_median", "ssim_std")


def write_csv(path: str, rows: Sequence[Dict[str, Any]], fields: Optional[Sequence[str]] = None):
    if fields is None:
        fields = []
        for row in rows:
            fields.extend(k for k in row if k not in fields)
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logging.info("Wrote %d rows to %s", len(rows), path)


def summary_row(report: MetricReport, **labels) -> Dict[str, Any]:
    agg = report.aggregate()
    row = dict(labels)
    for metric, s in agg.items():
        for k, v in s.to_dict().items():
            row[f"{metric}_{k}"] = v
    return row


def ista_config(k: mlc.ConfigDict) -> IstaConfig:
    return IstaConfig(
        beta_rel=k.beta_rel,
        max_inner=k.max_inner,
        tol=k.tol,
        lipschitz_safety=k.lipschitz_safety,
    )


def predict_map(net: UNet, chi_bp: np.ndarray) -> np.ndarray:
    x = complex_to_channels(to_tensor(np.asarray(chi_bp)[None]))
    return predict(net, x)[0]


@dataclasses.dataclass
class EvalResult:
    reports: Dict[str, MetricReport]
    rows: List[Dict[str, Any]]
    bim_history: List[Dict[str, Any]] = dataclasses.field(default_factory=list)


def evaluate(
    net: Optional[UNet],
    dataset: ScatteringDataset,
    ops: GreensOperators,
    einc: Optional[FieldSet],
    c: mlc.ConfigDict,
    panel_dir: Optional[str] = None,
    n_bim: int = 0,
    batch_size: int = 8,
) -> EvalResult:
    """Scores predictions, the BP inputs and optionally BIM on a test split.

    A missing ``net`` passes the BP input through unchanged.
    """
    reports = {"net": MetricReport(), "bp": MetricReport()}
    if n_bim:
        reports["bim"] = MetricReport()
    rows, history = [], []
    if panel_dir is not None:
        os.makedirs(panel_dir, exist_ok=True)
    image_range = tuple(c.eval.image_range)

    i = 0
    for inputs, samples in make_loader(dataset, batch_size, shuffle=False):
        preds = predict(net, inputs) if net is not None else np.stack([s.chi_bp.chi for s in samples])
        for chi_hat, s in zip(preds, samples):
            name = dataset.manifest.files[i]["name"]
            truth = s.chi_true.chi
            reports["net"].add(name, chi_hat, truth)
            reports["bp"].add(name, s.chi_bp.chi, truth)
            row = {
                "sample": name,
                "mse": reports["net"].mse[-1],
                "ssim": reports["net"].ssim[-1],
                "bp_mse": reports["bp"].mse[-1],
                "bp_ssim": reports["bp"].ssim[-1],
                "far_field_residual": far_field_residual(
                    chi_hat, dataset.measurements(i), s.etot_true, ops
                ),
            }

            panel = [truth, s.chi_bp.chi]
            if i < n_bim:
                chi_bim, states = bim_reconstruct(
                    dataset.measurements(i),
                    ops,
                    einc,
                    ista_config(c.classic),
                    outer_max=c.classic.outer_max,
                    init=c.classic.init,
                    backend=c.scene.solver,
                )
                reports["bim"].add(name, chi_bim, truth)
                row["bim_mse"] = reports["bim"].mse[-1]
                row["bim_ssim"] = reports["bim"].ssim[-1]
                history.extend({"sample": name, "p": st.p, "data_residual": st.data_residual} for st in states)
                panel.append(chi_bim.chi)
            panel.append(chi_hat)

            if panel_dir is not None and i < c.eval.n_panels:
                export_panel(panel, os.path.join(panel_dir, os.path.splitext(name)[0] + ".pgm"), image_range)
            rows.append(row)
            i += 1

    return EvalResult(reports, rows, history)


def write_eval(result: EvalResult, out_dir: str, **labels):
    fields = ["sample", "mse", "ssim", "bp_mse", "bp_ssim"]
    if "bim" in result.reports:
        fields += ["bim_mse", "bim_ssim"]
    fields.append("far_field_residual")
    write_csv(os.path.join(out_dir, "metrics.csv"), result.rows, fields)

    summary = [summary_row(r, method=m, **labels) for m, r in result.reports.items()]
    write_csv(os.path.join(out_dir, "summary.csv"), summary, list(labels) + ["method", *SUMMARY_FIELDS])
    if result.bim_history:
        write_csv(os.path.join(out_dir, "bim_history.csv"), result.bim_history)


class ModelCache:
    """Trains each (loss kind, training SNR) variant once per report run.

    Variants whose training never touches noisy data share one model across
    training SNRs.
    """

    def __init__(
        self,
        c: mlc.ConfigDict,
        data_dir: str,
        scene: ScatteringScene,
        ops: GreensOperators,
        out_dir: str,
        epochs: Optional[int] = None,
    ):
        self.c = c
        self.data_dir = data_dir
        self.scene = scene
        self.ops = ops
        self.out_dir = out_dir
        self.epochs = c.report.epochs if epochs is None else epochs
        self._nets: Dict[Tuple[str, float], UNet] = {}

    @staticmethod
    def key(kind: str, snr_train: float) -> Tuple[str, float]:
        if kind in ("contrast-noisy", "field"):
            return kind, float(snr_train)
        return kind, math.inf

    def get(self, kind: str, snr_train: float) -> UNet:
        key = self.key(kind, snr_train)
        if key in self._nets:
            return self._nets[key]

        train_ds = ScatteringDataset(
            os.path.join(self.data_dir, "train"), self.scene, kind, snr_train, split="train"
        )
        val_dir = os.path.join(self.data_dir, "val")
        val_ds = None
        if os.path.isdir(val_dir):
            val_ds = ScatteringDataset(val_dir, self.scene, kind, snr_train, split="train")

        train_cfg = dataclasses.replace(
            TrainConfig.from_config(self.c.train),
            loss_kind=kind,
            snr_train=float(snr_train),
            epochs=self.epochs,
        )
        tag = f"{kind}_{'clean' if math.isinf(key[1]) else f'{key[1]:g}dB'}"
        os.makedirs(self.out_dir, exist_ok=True)
        net, log = train(
            train_ds,
            NetConfig.from_config(self.c.net),
            train_cfg,
            ops=self.ops,
            val_dataset=val_ds,
            checkpoint_path=os.path.join(self.out_dir, f"{tag}.pt"),
            configs={"experiment": self.c.to_dict()},
        )
        write_log_csv(os.path.join(self.out_dir, f"{tag}_log.csv"), log)
        self._nets[key] = net
        return net


def evaluation_sets(data_dir: str, c: mlc.ConfigDict) -> List[Tuple[str, str]]:
    """(phantom kind, directory) of every test set the table is evaluated on."""
    sets = [(c.dataset.kind, os.path.join(data_dir, "test"))]
    kind = c.report.generalization_kind
    if kind and kind != c.dataset.kind:
        sets.append((kind, generalization_dir(data_dir, kind)))
    return sets


def table_study(
    cache: ModelCache, sets: Sequence[Tuple[str, str]], c: mlc.ConfigDict
) -> List[Dict[str, Any]]:
    """Statistics per loss variant at every test SNR; noisy variants train at the test SNR.

    Models always train on the configured dataset; each test set adds its own rows.
    """
    rows = []
    for dataset, test_dir in sets:
        for snr in c.eval.snr_test:
            bp_done = False
            for kind in c.report.loss_kinds:
                net = cache.get(kind, snr)
                ds = ScatteringDataset(test_dir, cache.scene, kind, snr, split="test")
                result = evaluate(net, ds, cache.ops, None, c)
                if not bp_done:
                    rows.append(
                        summary_row(result.reports["bp"], dataset=dataset, loss="bp", train_snr="", test_snr=snr)
                    )
                    bp_done = True
                train_snr = cache.key(kind, snr)[1]
                rows.append(
                    summary_row(
                        result.reports["net"],
                        dataset=dataset,
                        loss=kind,
                        train_snr="clean" if math.isinf(train_snr) else train_snr,
                        test_snr=snr,
                    )
                )
    return rows


def trend_checks(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Flags whether the physics-guided losses beat the clean contrast loss."""
    means = {(r["loss"], float(r["test_snr"])): r["mse_mean"] for r in rows}
    checks = []
    for lhs, rhs, snr in (("current", "contrast-clean", 20.0), ("field", "contrast-clean", 5.0)):
        if (lhs, snr) not in means or (rhs, snr) not in means:
            logging.warning("Cannot compare %s with %s at %g dB: not in the table", lhs, rhs, snr)
            continue
        a, b = means[(lhs, snr)], means[(rhs, snr)]
        holds = bool(a <= b)
        if not holds:
            logging.warning("Trend not reproduced: %s (%.4e) > %s (%.4e) at %g dB", lhs, a, rhs, b, snr)
        checks.append(
            {"test_snr": snr, "lhs": lhs, "rhs": rhs, "lhs_mse": a, "rhs_mse": b, "holds": holds}
        )
    return checks


def mismatch_study(cache: ModelCache, test_dir: str, c: mlc.ConfigDict) -> List[Dict[str, Any]]:
    """{train SNR} x {test SNR} grid per loss kind."""
    rows = []
    snrs = list(c.dataset.snr_list)
    for kind in c.report.mismatch_kinds:
        for snr_train in snrs:
            net = cache.get(kind, snr_train)
            for snr_test in snrs:
                ds = ScatteringDataset(test_dir, cache.scene, kind, snr_test, split="test")
                result = evaluate(net, ds, cache.ops, None, c)
                rows.append(
                    summary_row(result.reports["net"], loss=kind, train_snr=snr_train, test_snr=snr_test)
                )
    return rows


def austria_cases(eps: float, which: Tuple[bool, bool, bool]) -> Tuple[float, float, float]:
    return tuple(eps if w else AUSTRIA_FIXED_EPS for w in which)


def austria_study(cache: ModelCache, einc: FieldSet, c: mlc.ConfigDict) -> List[Dict[str, Any]]:
    """Permittivity sweep on the Austria profile with models trained on the dataset."""
    grid = cache.scene.grid
    snr = float(c.report.austria_snr)
    scale = austria_scale(grid)
    seed = c.dataset.seed
    rows = []
    for s, (set_name, which) in enumerate(AUSTRIA_SETS.items()):
        for j, eps in enumerate(c.report.austria_eps):
            eps3 = austria_cases(float(eps), which)
            chi = austria_phantom(*eps3, grid, scale=scale)
            sim = simulate(
                cache.ops, chi, einc, backend=c.scene.solver,
                tol=c.scene.solver_tol, max_iter=c.scene.max_iter,
            )
            noise_seed = np.random.SeedSequence([seed, AUSTRIA_STREAM, s, j])
            mea = add_awgn(sim.esca_mea, snr, noise_seed)
            chi_bp = back_projection(mea, cache.ops, einc).chi
            for kind in c.report.austria_kinds:
                chi_hat = predict_map(cache.get(kind, snr), chi_bp)
                rows.append(
                    {
                        "set": set_name,
                        "loss": kind,
                        "eps": float(eps),
                        "eps_left": eps3[0],
                        "eps_right": eps3[1],
                        "eps_ring": eps3[2],
                        "mse": mse(chi_hat, chi.chi),
                        "ssim": ssim(chi_hat, chi.chi),
                        "bp_mse": mse(chi_bp, chi.chi),
                        "bp_ssim": ssim(chi_bp, chi.chi),
                    }
                )
    return rows


def run_report(
    c: mlc.ConfigDict,
    data_dir: str,
    out_dir: str,
    scene: ScatteringScene,
    ops: GreensOperators,
    einc: FieldSet,
    studies: Sequence[str] = ("table", "mismatch", "austria"),
) -> Dict[str, str]:
    """Runs the requested studies and writes one CSV per study."""
    os.makedirs(out_dir, exist_ok=True)
    cache = ModelCache(c, data_dir, scene, ops, os.path.join(out_dir, "models"))
    test_dir = os.path.join(data_dir, "test")
    written = {}

    if "table" in studies:
        sets = evaluation_sets(data_dir, c)
        for kind, directory in sets[1:]:
            if not os.path.isdir(directory):
                logging.info("Generating the %s test set in %s", kind, directory)
                generate_generalization_split(c, scene, data_dir, c.runtime.threads, ops=ops)
        rows = table_study(cache, sets, c)
        written["table"] = os.path.join(out_dir, "table.csv")
        write_csv(written["table"], rows, ["dataset", "loss", "train_snr", "test_snr", *SUMMARY_FIELDS])
        own = [r for r in rows if r["dataset"] == c.dataset.kind]
        written["trend"] = os.path.join(out_dir, "trend.csv")
        write_csv(written["trend"], trend_checks(own), ["test_snr", "lhs", "rhs", "lhs_mse", "rhs_mse", "holds"])
    if "mismatch" in studies:
        written["mismatch"] = os.path.join(out_dir, "snr_mismatch.csv")
        write_csv(
            written["mismatch"],
            mismatch_study(cache, test_dir, c),
            ["loss", "train_snr", "test_snr", *SUMMARY_FIELDS],
        )
    if "austria" in studies:
        written["austria"] = os.path.join(out_dir, "austria.csv")
        write_csv(written["austria"], austria_study(cache, einc, c))

    return written
