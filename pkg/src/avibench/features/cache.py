"""Binary feature cache (layout documented in docs/formats.md).

    offset  size  field
    0       4     magic b"AVFC"
    4       2     version, uint16 LE (=1)
    6       1     kind code, uint8
    7       1     reserved (0)
    8       4     n_items, uint32 LE
    12      4     n_rows, uint32 LE
    16      4     dim, uint32 LE
    20      16    feature-config hash (first 16 bytes of SHA-256)
    36      ...   item index: n_items x {uint16 id_len, id utf-8, uint32 row_start, uint32 row_count}
    ...     ...   payload: n_rows x dim float32 LE, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import KINDS, FeatureError

MAGIC = b"AVFC"
VERSION = 1
SUMMARY = "summary"
KIND_CODES = {k: i for i, k in enumerate(KINDS + (SUMMARY,))}
_HEADER = struct.Struct("<4sHBBIII16s")


@dataclass(eq=False)
class FeatureCache:
    kind: str
    config_hash: bytes  # 16 bytes
    ids: list[str]
    blocks: list[np.ndarray]  # per item [rows, dim]

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise FeatureError(f"unknown cache kind {self.kind!r}")
        if len(self.config_hash) != 16:
            raise FeatureError("config hash must be 16 bytes")
        if len(self.ids) != len(self.blocks):
            raise FeatureError("ids and blocks differ in length")

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[1] if self.blocks else 0

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(zip(self.ids, self.blocks))


def to_bytes(cache: FeatureCache) -> bytes:
    dim = cache.dim
    n_rows = 0
    index = bytearray()
    for item_id, block in zip(cache.ids, cache.blocks):
        if block.ndim != 2 or (block.shape[1] != dim and block.shape[0]):
            raise FeatureError(f"{item_id}: block shape {block.shape} inconsistent with dim {dim}")
        raw = item_id.encode("utf-8")
        index += struct.pack("<H", len(raw)) + raw + struct.pack("<II", n_rows, block.shape[0])
        n_rows += block.shape[0]
    header = _HEADER.pack(MAGIC, VERSION, KIND_CODES[cache.kind], 0,
                          len(cache.ids), n_rows, dim, cache.config_hash)
    payload = (np.concatenate([b.reshape(-1, dim) for b in cache.blocks]) if cache.blocks
               else np.zeros((0, 0))).astype("<f4")
    return header + bytes(index) + payload.tobytes()


def from_bytes(data: bytes) -> FeatureCache:
    if len(data) < _HEADER.size:
        raise FeatureError("feature cache truncated")
    magic, version, code, _, n_items, n_rows, dim, chash = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FeatureError("not a feature cache (bad magic)")
    if version != VERSION:
        raise FeatureError(f"unsupported feature cache version {version}")
    kinds = {v: k for k, v in KIND_CODES.items()}
    pos = _HEADER.size
    spans = []
    for _ in range(n_items):
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        item_id = data[pos:pos + n].decode("utf-8")
        pos += n
        start, count = struct.unpack_from("<II", data, pos)
        pos += 8
        spans.append((item_id, start, count))
    payload = np.frombuffer(data, dtype="<f4", count=n_rows * dim, offset=pos).reshape(n_rows, dim)
    payload = payload.astype(np.float64)
    return FeatureCache(kinds[code], chash, [s[0] for s in spans],
                        [payload[s:s + c] for _, s, c in spans])


def save_cache(cache: FeatureCache, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(cache))
    return path


def load_cache(path) -> FeatureCache:
    return from_bytes(Path(path).read_bytes())
