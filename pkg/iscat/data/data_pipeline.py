"""Dataset generation: phantoms, forward simulation, noise and BP inputs."""
import logging
import math
import os
from typing import Dict, List, Optional, Sequence

import ml_collections as mlc
import numpy as np
from tqdm import tqdm

from iscat import VERSION
from iscat.classic.bp import back_projection
from iscat.common.errors import InvalidArgumentError
from iscat.common.glyphs import read_idx_images
from iscat.common.phantoms import PhantomRecipe, austria_scale, make_phantom
from iscat.data.manifest import DatasetManifest, write_manifest
from iscat.data.records import SampleRecord, write_sample
from iscat.forward.greens import GreensOperators, build_greens, incident_field
from iscat.forward.noise import add_awgn
from iscat.forward.scene import ScatteringScene
from iscat.forward.solver import simulate
from iscat.utils.threads import ordered_map

SPLITS = ("train", "val", "test")
# Seed stream of the test set drawn from a second phantom kind
GENERALIZATION_SPLIT_ID = len(SPLITS)
SAMPLE_SUFFIX = ".isct"


def sample_name(index: int) -> str:
    return f"sample_{index:05d}{SAMPLE_SUFFIX}"


def generalization_dir(data_dir: str, kind: str) -> str:
    return os.path.join(data_dir, f"test_{kind}")


class DataPipeline:
    """Builds the SampleRecord of one phantom.

    Every random draw of sample ``index`` in split ``split_id`` comes from
    ``SeedSequence([master_seed, split_id, index])``, so samples can be
    generated in any order and on any number of threads.
    """

    def __init__(
        self,
        scene: ScatteringScene,
        kind: str,
        eps_range: Sequence[float],
        snr_list: Sequence[float],
        master_seed: int,
        ops: Optional[GreensOperators] = None,
        backend: str = "dense",
        solver_kwargs: Optional[Dict] = None,
        glyphs: Optional[np.ndarray] = None,
        glyph_size: int = 28,
    ):
        self.scene = scene
        self.kind = kind
        self.eps_range = (float(eps_range[0]), float(eps_range[1]))
        self.snr_list = [float(s) for s in snr_list]
        self.master_seed = int(master_seed)
        self.ops = build_greens(scene, dense=backend == "dense") if ops is None else ops
        self.einc = incident_field(scene)
        self.backend = backend
        self.solver_kwargs = dict(solver_kwargs or {})
        self.glyphs = glyphs
        self.glyph_size = glyph_size

    def _seeds(self, split_id: int, index: int) -> List[np.random.SeedSequence]:
        ss = np.random.SeedSequence([self.master_seed, split_id, index])
        return ss.spawn(1 + 2 * len(self.snr_list))

    def recipe(self, seed: np.random.SeedSequence) -> PhantomRecipe:
        rng_seed = int(seed.generate_state(1)[0])
        params = {}
        if self.kind == "digit":
            params["glyph_size"] = self.glyph_size
        elif self.kind == "austria":
            rng = np.random.default_rng(rng_seed)
            params["eps"] = tuple(float(e) for e in rng.uniform(*self.eps_range, size=3))
            params["scale"] = austria_scale(self.scene.grid)
        return PhantomRecipe(self.kind, self.eps_range, rng_seed, params)

    def process_sample(self, split_id: int, index: int) -> SampleRecord:
        seeds = self._seeds(split_id, index)
        chi = make_phantom(self.recipe(seeds[0]), self.scene.grid, glyphs=self.glyphs)

        sim = simulate(self.ops, chi, self.einc, backend=self.backend, threads=1, **self.solver_kwargs)
        record = SampleRecord()
        record.put("chi_true", chi.chi)
        record.put("j_true", sim.j.values)
        record.put("etot_true", sim.etot.values)
        record.put("esca_doi", sim.esca_doi.values)
        record.put("esca_mea", sim.esca_mea.values)
        record.put("chi_bp", back_projection(sim.esca_mea, self.ops, self.einc).chi)

        for i, snr in enumerate(self.snr_list):
            mea = add_awgn(sim.esca_mea, snr, seeds[1 + 2 * i])
            doi = add_awgn(sim.esca_doi, snr, seeds[2 + 2 * i])
            record.put("esca_mea", mea.values, snr)
            record.put("esca_doi", doi.values, snr)
            record.put("chi_bp", back_projection(mea, self.ops, self.einc).chi, snr)

        return record

    def summary(self) -> Dict:
        return {"kind": self.kind, "eps_range": list(self.eps_range), "glyph_size": self.glyph_size}


def generate_split(
    directory: str,
    pipeline: DataPipeline,
    split: str,
    n_samples: int,
    threads: Optional[int] = None,
    split_id: Optional[int] = None,
) -> DatasetManifest:
    """Writes ``n_samples`` records plus a manifest into ``directory``.

    ``split_id`` overrides the seed stream implied by ``split``.
    """
    if split not in SPLITS:
        raise InvalidArgumentError(f"unknown split {split!r}")
    if split_id is None:
        split_id = SPLITS.index(split)
    os.makedirs(directory, exist_ok=True)

    bar = tqdm(total=n_samples, desc=f"gen {split}", disable=n_samples < 2)

    def one(index):
        name = sample_name(index)
        write_sample(os.path.join(directory, name), pipeline.process_sample(split_id, index))
        bar.update(1)
        return name

    names = ordered_map(one, range(n_samples), threads=threads)
    bar.close()

    manifest = DatasetManifest(
        scene=pipeline.scene.to_dict(),
        recipe=pipeline.summary(),
        snr_list=list(pipeline.snr_list),
        master_seed=pipeline.master_seed,
        files=[{"name": name} for name in names],
        metadata={
            "split": split,
            "scene_fingerprint": pipeline.scene.fingerprint(),
            "solver": pipeline.backend,
            "generator": f"iscat {VERSION}",
        },
    )
    write_manifest(directory, manifest)
    return manifest


def pipeline_from_config(
    c: mlc.ConfigDict,
    scene: ScatteringScene,
    ops: Optional[GreensOperators] = None,
    kind: Optional[str] = None,
) -> DataPipeline:
    glyphs = None
    if c.dataset.idx_path:
        glyphs = read_idx_images(c.dataset.idx_path)
        logging.info("Loaded %d glyphs from %s", len(glyphs), c.dataset.idx_path)
    return DataPipeline(
        scene,
        kind=kind or c.dataset.kind,
        eps_range=c.dataset.eps_range,
        snr_list=c.dataset.snr_list,
        master_seed=c.dataset.seed,
        ops=ops,
        backend=c.scene.solver,
        solver_kwargs={"tol": c.scene.solver_tol, "max_iter": c.scene.max_iter},
        glyphs=glyphs,
        glyph_size=c.dataset.glyph_size,
    )


def generate_dataset(
    c: mlc.ConfigDict,
    scene: ScatteringScene,
    out_dir: str,
    threads: Optional[int] = None,
) -> Dict[str, DatasetManifest]:
    """Generates the train, val and test splits under ``out_dir``.

    A configured ``report.generalization_kind`` adds a test set of that
    phantom kind under ``test_<kind>``.
    """
    pipeline = pipeline_from_config(c, scene)
    counts = {"train": c.dataset.n_train, "val": c.dataset.n_val, "test": c.dataset.n_test}
    manifests = {}
    for split in SPLITS:
        if counts[split] == 0:
            continue
        manifests[split] = generate_split(
            os.path.join(out_dir, split), pipeline, split, counts[split], threads
        )
    kind = c.report.generalization_kind
    if kind and kind != c.dataset.kind:
        manifests[f"test_{kind}"] = generate_generalization_split(c, scene, out_dir, threads, ops=pipeline.ops)
    return manifests


def generate_generalization_split(
    c: mlc.ConfigDict,
    scene: ScatteringScene,
    out_dir: str,
    threads: Optional[int] = None,
    ops: Optional[GreensOperators] = None,
) -> DatasetManifest:
    """Test samples of ``report.generalization_kind`` on their own seed stream."""
    kind = c.report.generalization_kind
    pipeline = pipeline_from_config(c, scene, ops=ops, kind=kind)
    return generate_split(
        generalization_dir(out_dir, kind), pipeline, "test", c.dataset.n_test, threads,
        split_id=GENERALIZATION_SPLIT_ID,
    )


def input_snr(kind: str, snr_db: float, split: str = "train") -> float:
    """SNR of the BP input a loss variant trains on.

    Test inputs are always the noisy BP at the test SNR.
    """
    if split == "test" or kind in ("contrast-noisy", "field"):
        return float(snr_db)
    return math.inf
