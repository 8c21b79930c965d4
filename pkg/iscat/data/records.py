"""Binary per-sample records.

Layout (all little-endian):

  b"ISCT"  u32 version  u32 n_arrays
  per array: u32 role  i32 snr_tag  u32 ndim  u32 dims[ndim]
  payload:   arrays in header order, row-major complex128 (re, im) pairs

``snr_tag`` is the SNR in hundredths of a dB for noisy variants and
``CLEAN_TAG`` for noise-free arrays.
"""
import dataclasses
import math
import os
import struct
from typing import Dict, List, Tuple

import numpy as np

from iscat.common.errors import (
    BadMagicError,
    InvalidArgumentError,
    StoreError,
    TruncationError,
    VersionMismatchError,
)

MAGIC = b"ISCT"
FORMAT_VERSION = 1
CLEAN_TAG = -(2 ** 31)

ROLES = (
    "chi_true",
    "chi_bp",
    "j_true",
    "etot_true",
    "esca_doi",
    "esca_mea",
)
_ROLE_IDS = {r: i for i, r in enumerate(ROLES)}

_PAYLOAD_DTYPE = np.dtype("<c16")

ArrayKey = Tuple[str, float]


def snr_tag(snr_db: float) -> int:
    if math.isinf(snr_db) and snr_db > 0:
        return CLEAN_TAG
    tag = int(round(snr_db * 100))
    if tag == CLEAN_TAG or abs(tag) >= 2 ** 31:
        raise InvalidArgumentError(f"SNR {snr_db} dB cannot be tagged")
    return tag


def tag_snr(tag: int) -> float:
    return math.inf if tag == CLEAN_TAG else tag / 100.0


@dataclasses.dataclass
class SampleRecord:
    """Arrays of one sample keyed by (role, snr_db); snr_db is inf when clean.

    Noisy variants of chi_bp, esca_doi and esca_mea are stored once per SNR.
    """

    arrays: Dict[ArrayKey, np.ndarray] = dataclasses.field(default_factory=dict)

    def put(self, role: str, array: np.ndarray, snr_db: float = math.inf):
        if role not in _ROLE_IDS:
            raise InvalidArgumentError(f"unknown record role {role!r}")
        snr_tag(snr_db)
        self.arrays[(role, snr_db)] = np.asarray(array, dtype=np.complex128)

    def get(self, role: str, snr_db: float = math.inf) -> np.ndarray:
        try:
            return self.arrays[(role, snr_db)]
        except KeyError:
            raise KeyError(f"record has no {role} array at SNR {snr_db}") from None

    def snrs(self, role: str = "chi_bp") -> List[float]:
        return sorted(s for r, s in self.arrays if r == role and not math.isinf(s))

    def __eq__(self, other):
        if not isinstance(other, SampleRecord) or self.arrays.keys() != other.arrays.keys():
            return False
        return all(
            self.arrays[k].shape == other.arrays[k].shape
            and self.arrays[k].tobytes() == other.arrays[k].tobytes()
            for k in self.arrays
        )


def encode_sample(record: SampleRecord) -> bytes:
    keys = list(record.arrays)
    header = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(keys))]
    payload = []
    for role, snr in keys:
        a = record.arrays[(role, snr)]
        header.append(struct.pack("<IiI", _ROLE_IDS[role], snr_tag(snr), a.ndim))
        header.append(struct.pack(f"<{a.ndim}I", *a.shape))
        payload.append(np.ascontiguousarray(a, dtype=_PAYLOAD_DTYPE).tobytes())
    return b"".join(header + payload)


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.name = name
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncationError(
                f"{self.name}: record ends after {len(self.data)} bytes, header needs more",
                expected=self.pos + n,
                actual=len(self.data),
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_sample(data: bytes, name: str = "<bytes>") -> SampleRecord:
    reader = _Reader(data, name)
    magic = reader.take(4)
    if magic != MAGIC:
        raise BadMagicError(f"{name}: expected magic {MAGIC!r}, got {magic!r}")
    version, n_arrays = reader.unpack("<II")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{name}: record version {version}, this build reads {FORMAT_VERSION}"
        )

    entries = []
    for _ in range(n_arrays):
        role_id, tag, ndim = reader.unpack("<IiI")
        if role_id >= len(ROLES):
            raise BadMagicError(f"{name}: unknown role id {role_id}")
        dims = reader.unpack(f"<{ndim}I")
        entries.append((ROLES[role_id], tag_snr(tag), dims))

    expected = reader.pos + sum(
        int(np.prod(dims)) * _PAYLOAD_DTYPE.itemsize for _, _, dims in entries
    )
    if len(data) < expected:
        raise TruncationError(
            f"{name}: payload is {len(data)} bytes, header implies {expected}",
            expected=expected,
            actual=len(data),
        )
    if len(data) > expected:
        raise StoreError(f"{name}: {len(data) - expected} trailing bytes after the payload")

    record = SampleRecord()
    for role, snr, dims in entries:
        count = int(np.prod(dims))
        a = np.frombuffer(data, dtype=_PAYLOAD_DTYPE, count=count, offset=reader.pos)
        reader.pos += count * _PAYLOAD_DTYPE.itemsize
        record.arrays[(role, snr)] = a.astype(np.complex128).reshape(dims)
    return record


def write_sample(path: str, record: SampleRecord):
    """Writes atomically through a temporary file in the same directory."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fp:
        fp.write(encode_sample(record))
    os.replace(tmp, path)


def read_sample(path: str) -> SampleRecord:
    with open(path, "rb") as fp:
        data = fp.read()
    return decode_sample(data, name=os.path.basename(path))
