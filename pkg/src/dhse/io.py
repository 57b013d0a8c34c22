"""Binary feature matrices, model checkpoints and plain-text label/split files.

FeatureMatrix layout (little-endian)::

    b"DHSE" | u32 version=1 | u64 rows | u64 cols
    u32 block count, then per block: u32 name length | utf-8 name | u64 start | u64 end
    rows * cols f32, row-major

Checkpoint layout (little-endian)::

    b"DHSM" | u32 version=1 | u64 config length | utf-8 JSON config
    u32 tensor count, then per tensor:
        u32 name length | utf-8 name | u32 rank | u64 dims[rank] | f64 data
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"DHSE"
CHECKPOINT_MAGIC = b"DHSM"
VERSION = 1


class FormatError(ValueError):
    pass


@dataclass
class FeatureMatrix:
    data: np.ndarray
    blocks: list[tuple[str, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise FormatError("feature matrix must be 2-D")
        if not self.blocks:
            self.blocks = [("features", 0, self.cols)]
        pos = 0
        for name, start, end in self.blocks:
            if start != pos or end < start:
                raise FormatError(f"block {name!r} [{start}, {end}) breaks the column partition")
            pos = end
        if pos != self.cols:
            raise FormatError(f"blocks cover {pos} columns, matrix has {self.cols}")
        if not np.all(np.isfinite(self.data)):
            raise FormatError("feature matrix contains non-finite entries")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def block(self, name: str) -> np.ndarray:
        for b, start, end in self.blocks:
            if b == name:
                return self.data[:, start:end]
        raise KeyError(name)


def write_features(path, fm: FeatureMatrix) -> None:
    parts = [FEATURE_MAGIC, struct.pack("<IQQ", VERSION, fm.rows, fm.cols), struct.pack("<I", len(fm.blocks))]
    for name, start, end in fm.blocks:
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<QQ", start, end))
    parts.append(fm.data.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise FormatError(f"{self.path}: truncated file")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def raw(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise FormatError(f"{self.path}: truncated file")
        out = self.buf[self.pos:self.pos + size]
        self.pos += size
        return out

    def string(self) -> str:
        (n,) = self.take("<I")
        return self.raw(n).decode()

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(f"{self.path}: {len(self.buf) - self.pos} trailing bytes")


def read_features(path) -> FeatureMatrix:
    r = _Reader(Path(path).read_bytes(), path)
    if r.raw(4) != FEATURE_MAGIC:
        raise FormatError(f"{path}: not a feature matrix (bad magic)")
    version, rows, cols = r.take("<IQQ")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (count,) = r.take("<I")
    blocks = []
    for _ in range(count):
        name = r.string()
        start, end = r.take("<QQ")
        blocks.append((name, int(start), int(end)))
    payload = r.raw(rows * cols * 4)
    r.finish()
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)
    return FeatureMatrix(data, blocks)


def write_checkpoint(path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    cfg = json.dumps(config, sort_keys=True).encode()
    parts = [CHECKPOINT_MAGIC, struct.pack("<IQ", VERSION, len(cfg)), cfg, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.raw(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a model checkpoint (bad magic)")
    version, cfg_len = r.take("<IQ")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    config = json.loads(r.raw(cfg_len).decode())
    (count,) = r.take("<I")
    tensors = {}
    for _ in range(count):
        name = r.string()
        (rank,) = r.take("<I")
        dims = r.take(f"<{rank}Q") if rank else ()
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(r.raw(8 * size), dtype="<f8").reshape(dims).astype(np.float64)
    r.finish()
    return config, tensors


def read_ints(path) -> np.ndarray:
    """One integer per line; blank and ``#`` lines skipped."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected an integer, got {line!r}") from None
    return np.asarray(out, dtype=np.int64)


def write_ints(path, values) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in np.asarray(values).ravel()))
