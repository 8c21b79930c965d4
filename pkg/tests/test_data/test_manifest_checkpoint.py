import datetime
import json
import os

import pytest
import torch

from iscat.common.errors import ChecksumError, StoreError, VersionMismatchError
from iscat.data.checkpoint import read_checkpoint, restore, write_checkpoint
from iscat.data.manifest import MANIFEST_NAME, DatasetManifest, read_manifest, write_manifest
from iscat.model.nn.unet import NetConfig, net_init
from iscat.model.optim import MomentumSGD


@pytest.fixture
def dataset_dir(tmp_path):
    for i in range(3):
        (tmp_path / f"s{i}.isct").write_bytes(bytes([i]) * 10)
    manifest = DatasetManifest(
        scene={"grid": {"nx": 8}},
        recipe={"kind": "disk"},
        snr_list=[20.0, 5.0],
        master_seed=7,
        files=[{"name": f"s{i}.isct"} for i in range(3)],
        metadata={"split": "train"},
    )
    write_manifest(str(tmp_path), manifest)
    return tmp_path


def test_manifest_round_trip(dataset_dir):
    m = read_manifest(str(dataset_dir))
    assert m.n_samples == 3
    assert m.snr_list == [20.0, 5.0]
    assert all(len(f["sha256"]) == 64 for f in m.files)

    before = (dataset_dir / MANIFEST_NAME).read_bytes()
    write_manifest(str(dataset_dir), m)
    assert (dataset_dir / MANIFEST_NAME).read_bytes() == before


def test_manifest_detects_corruption(dataset_dir):
    (dataset_dir / "s1.isct").write_bytes(b"tampered")
    with pytest.raises(ChecksumError):
        read_manifest(str(dataset_dir))
    read_manifest(str(dataset_dir), verify=False)
    read_manifest(str(dataset_dir), names=["s0.isct"])

    os.remove(dataset_dir / "s2.isct")
    with pytest.raises(StoreError):
        read_manifest(str(dataset_dir), names=["s2.isct"])


def test_manifest_version_and_missing(dataset_dir, tmp_path_factory):
    path = dataset_dir / MANIFEST_NAME
    d = json.loads(path.read_text())
    d["format_version"] = 99
    path.write_text(json.dumps(d))
    with pytest.raises(VersionMismatchError):
        read_manifest(str(dataset_dir))

    with pytest.raises(StoreError):
        read_manifest(str(tmp_path_factory.mktemp("empty")))


def test_checkpoint_round_trip(tmp_path):
    cfg = NetConfig(depth=1, base_channels=4, rng_seed=1)
    net = net_init(cfg)
    opt = MomentumSGD(net.parameters(), lr=0.1, momentum=0.5)
    for p in net.parameters():
        p.grad = torch.ones_like(p)
    opt.step()

    path = str(tmp_path / "checkpoint.pt")
    write_checkpoint(path, net, opt, epoch=3, configs={"net": {"depth": 1}}, log=[{"epoch": 3}])
    state = read_checkpoint(path)
    assert state["epoch"] == 3
    assert state["configs"] == {"net": {"depth": 1}}
    assert state["log"] == [{"epoch": 3}]

    other = net_init(NetConfig(depth=1, base_channels=4, rng_seed=2))
    other_opt = MomentumSGD(other.parameters(), lr=0.1, momentum=0.5)
    restore(state, other, other_opt)
    for (k, v), w in zip(net.state_dict().items(), other.state_dict().values()):
        assert torch.equal(v, w), f"{k} was not restored bit for bit"
    assert other_opt.velocity_norm() == opt.velocity_norm()


def test_checkpoint_rejects_bad_files(tmp_path):
    garbage = tmp_path / "garbage.pt"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(StoreError):
        read_checkpoint(str(garbage))

    foreign = str(tmp_path / "foreign.pt")
    torch.save({"weights": 1}, foreign)
    with pytest.raises(StoreError):
        read_checkpoint(foreign)

    old = str(tmp_path / "old.pt")
    torch.save({"format_version": 0}, old)
    with pytest.raises(VersionMismatchError):
        read_checkpoint(old)


def test_checkpoint_refuses_arbitrary_objects(tmp_path):
    path = str(tmp_path / "objects.pt")
    torch.save({"format_version": 1, "epoch": datetime.date(2020, 1, 1)}, path)
    with pytest.raises(StoreError):
        read_checkpoint(path)
