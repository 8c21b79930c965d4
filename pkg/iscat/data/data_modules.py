import collections
import logging
import math
import os
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch

from iscat.common.errors import ShapeMismatchError, StoreError
from iscat.common.grid import ContrastMap
from iscat.data.data_pipeline import input_snr
from iscat.data.manifest import DatasetManifest, read_manifest
from iscat.data.records import SampleRecord, read_sample
from iscat.forward.scene import FieldSet, ScatteringScene
from iscat.model.loss import LOSS_KINDS, TrainingSample
from iscat.utils.tensor_utils import complex_to_channels, to_tensor

# Decoded records kept per dataset; least recently used ones are dropped
RECORD_CACHE_SIZE = 256


class ScatteringDataset(torch.utils.data.Dataset):
    def __init__(
        self,
        data_dir: str,
        scene: Optional[ScatteringScene] = None,
        loss_kind: str = "contrast-clean",
        snr_db: float = 20.0,
        split: str = "train",
        verify: bool = True,
        cache_size: int = RECORD_CACHE_SIZE,
    ):
        """
            Args:
                data_dir:
                    A directory written by the dataset generator (records
                    plus manifest.json)
                scene:
                    Scene the caller's Green's operators were built for;
                    when given, it must match the manifest
                loss_kind:
                    Training variant; selects the clean or the noisy BP input
                snr_db:
                    SNR of the noisy arrays served (input and E_sca_DOI target)
                split:
                    "test" always serves the noisy BP input
                cache_size:
                    Number of decoded records held in memory
        """
        super(ScatteringDataset, self).__init__()
        if loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {loss_kind!r}")
        self.data_dir = data_dir
        self.manifest: DatasetManifest = read_manifest(data_dir, verify=verify)
        self.scene = ScatteringScene.from_dict(self.manifest.scene)
        if scene is not None and scene.fingerprint() != self.scene.fingerprint():
            raise ShapeMismatchError(f"{data_dir} was generated for a different scene")

        self.loss_kind = loss_kind
        self.snr_db = float(snr_db)
        if not math.isinf(self.snr_db) and self.snr_db not in self.manifest.snr_list:
            raise StoreError(
                f"{data_dir} holds SNRs {self.manifest.snr_list}, not {self.snr_db}"
            )
        self.input_snr = input_snr(loss_kind, self.snr_db, split)
        self.split = split

        self.cache_size = max(0, int(cache_size))
        self._records: "collections.OrderedDict[int, SampleRecord]" = collections.OrderedDict()
        logging.debug(
            "%s: %d samples, %s input at SNR %s",
            data_dir, len(self), loss_kind, self.input_snr,
        )

    def __len__(self) -> int:
        return self.manifest.n_samples

    def record(self, idx: int) -> SampleRecord:
        if idx in self._records:
            self._records.move_to_end(idx)
            return self._records[idx]
        name = self.manifest.files[idx]["name"]
        r = read_sample(os.path.join(self.data_dir, name))
        if self.cache_size:
            self._records[idx] = r
            if len(self._records) > self.cache_size:
                self._records.popitem(last=False)
        return r

    def measurements(self, idx: int) -> FieldSet:
        """Noisy receiver data at the dataset SNR."""
        return FieldSet(role="E_sca_mea", values=self.record(idx).get("esca_mea", self.snr_db))

    def __getitem__(self, idx: int) -> TrainingSample:
        r = self.record(idx)
        grid = self.scene.grid
        return TrainingSample(
            chi_true=ContrastMap(grid=grid, chi=r.get("chi_true")),
            chi_bp=ContrastMap(grid=grid, chi=r.get("chi_bp", self.input_snr)),
            j_true=FieldSet(role="J", values=r.get("j_true")),
            etot_true=FieldSet(role="E_tot_DOI", values=r.get("etot_true")),
            esca_doi_noisy=FieldSet(role="E_sca_DOI", values=r.get("esca_doi", self.snr_db)),
            scene_ref=self.manifest.metadata.get("scene_fingerprint", ""),
        )


def collate_samples(batch: Sequence[TrainingSample]) -> Tuple[torch.Tensor, List[TrainingSample]]:
    """Stacks BP inputs as a [B, 2, H, W] double tensor; samples ride along."""
    chi = np.stack([s.chi_bp.chi for s in batch])
    return complex_to_channels(to_tensor(chi)), list(batch)


class EpochBatchSampler(torch.utils.data.Sampler):
    """Seeded shuffle of one epoch, split into consecutive batches.

    The permutation depends only on (seed, epoch), so a resumed run sees the
    same batches as an uninterrupted one.
    """

    def __init__(self, n: int, batch_size: int, seed: int, epoch: int = 0, shuffle: bool = True):
        self.n = n
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = epoch
        self.shuffle = shuffle

    def set_epoch(self, epoch: int):
        self.epoch = epoch

    def __iter__(self) -> Iterator[List[int]]:
        if self.shuffle:
            order = np.random.default_rng([self.seed, self.epoch]).permutation(self.n)
        else:
            order = np.arange(self.n)
        for start in range(0, self.n, self.batch_size):
            yield [int(i) for i in order[start:start + self.batch_size]]

    def __len__(self) -> int:
        return -(-self.n // self.batch_size)


def make_loader(
    dataset: ScatteringDataset,
    batch_size: int,
    seed: int = 0,
    shuffle: bool = True,
) -> torch.utils.data.DataLoader:
    sampler = EpochBatchSampler(len(dataset), batch_size, seed, shuffle=shuffle)
    return torch.utils.data.DataLoader(
        dataset, batch_sampler=sampler, collate_fn=collate_samples, num_workers=0
    )
