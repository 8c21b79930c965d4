"""JSON manifest listing the sample files of a dataset directory."""
import dataclasses
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional

from iscat.common.errors import ChecksumError, StoreError, VersionMismatchError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclasses.dataclass
class DatasetManifest:
    scene: Dict[str, Any]
    recipe: Dict[str, Any]
    snr_list: List[float]
    master_seed: int
    files: List[Dict[str, str]] = dataclasses.field(default_factory=list)
    metadata: Dict[str, Any] = dataclasses.field(default_factory=dict)
    format_version: int = MANIFEST_VERSION

    @property
    def n_samples(self) -> int:
        return len(self.files)

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["n_samples"] = self.n_samples
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DatasetManifest":
        fields = {f.name for f in dataclasses.fields(cls)}
        m = cls(**{k: v for k, v in d.items() if k in fields})
        if d.get("n_samples", m.n_samples) != m.n_samples:
            raise StoreError(
                f"manifest claims {d['n_samples']} samples but lists {m.n_samples} files"
            )
        return m


def write_manifest(directory: str, manifest: DatasetManifest):
    """Records checksums of the listed files and writes ``manifest.json``.

    The output has sorted keys and no timestamps, so regenerating a dataset
    reproduces the manifest byte for byte.
    """
    for entry in manifest.files:
        entry["sha256"] = sha256_file(os.path.join(directory, entry["name"]))

    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "w") as fp:
        json.dump(manifest.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")
    logging.info("Wrote manifest for %d samples to %s", manifest.n_samples, path)


def read_manifest(directory: str, verify: bool = True, names: Optional[List[str]] = None) -> DatasetManifest:
    """Loads a manifest, optionally checking every listed file's checksum."""
    path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(path) as fp:
            d = json.load(fp)
    except FileNotFoundError:
        raise StoreError(f"no {MANIFEST_NAME} in {directory}") from None
    except json.JSONDecodeError as e:
        raise StoreError(f"{path} is not valid JSON: {e}") from None

    if d.get("format_version") != MANIFEST_VERSION:
        raise VersionMismatchError(
            f"{path} has format version {d.get('format_version')}, expected {MANIFEST_VERSION}"
        )
    manifest = DatasetManifest.from_dict(d)

    if verify:
        for entry in manifest.files:
            if names is not None and entry["name"] not in names:
                continue
            file_path = os.path.join(directory, entry["name"])
            if not os.path.exists(file_path):
                raise StoreError(f"{file_path} is listed in the manifest but missing")
            if sha256_file(file_path) != entry.get("sha256"):
                raise ChecksumError(f"{file_path} does not match its manifest checksum")

    return manifest
