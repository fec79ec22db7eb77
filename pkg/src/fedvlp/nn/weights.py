"""Flat, ordered model parameter container and its binary checkpoint format.

The flat layout is the unit of federated exchange: aggregation and SGD act on
the raw vector, while layers see named views. Checkpoints are versioned:

    magic (8 bytes) | version u32 | record count u32
    per record: name length u16 | name utf-8 | rank u8 | dims u32 * rank
    payload: contiguous little-endian float64 in layout order
    checksum u64 (blake2b-8 of the payload)
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FVLPWT01"
VERSION = 1


def _payload_checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass
class ModelWeights:
    """All trainable parameters as one float64 vector plus a named layout."""

    values: np.ndarray
    layout: tuple  # ((name, shape), ...)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.layout = tuple((str(name), tuple(int(d) for d in shape))
                            for name, shape in self.layout)
        expected = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in self.layout)
        if expected != self.values.size:
            raise ValueError(
                f"layout expects {expected} values, got {self.values.size}")

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.values.copy(), self.layout)

    def views(self) -> dict:
        """Name -> reshaped view into the flat vector (no copies)."""
        out = {}
        offset = 0
        for name, shape in self.layout:
            size = int(np.prod(shape, dtype=np.int64))
            out[name] = self.values[offset:offset + size].reshape(shape)
            offset += size
        return out

    @property
    def checksum(self) -> int:
        return _payload_checksum(self.values.tobytes())

    def same_layout(self, other: "ModelWeights") -> bool:
        return self.layout == other.layout


def zeros_like_layout(layout) -> ModelWeights:
    size = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in layout)
    return ModelWeights(np.zeros(size), tuple(layout))


def sgd_step(weights: ModelWeights, gradient: np.ndarray,
             learning_rate: float) -> ModelWeights:
    """Plain gradient descent: w <- w - lr * g, elementwise."""
    gradient = np.asarray(gradient, dtype=np.float64).reshape(-1)
    if gradient.size != weights.values.size:
        raise ValueError(
            f"gradient size {gradient.size} does not match weights "
            f"{weights.values.size}")
    return ModelWeights(weights.values - learning_rate * gradient, weights.layout)


def weights_to_bytes(weights: ModelWeights) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(weights.layout))]
    for name, shape in weights.layout:
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", len(shape)))
        chunks.append(struct.pack(f"<{len(shape)}I", *shape) if shape else b"")
    payload = np.ascontiguousarray(weights.values, dtype="<f8").tobytes()
    chunks.append(payload)
    chunks.append(struct.pack("<Q", _payload_checksum(payload)))
    return b"".join(chunks)


def weights_from_bytes(data: bytes) -> ModelWeights:
    if data[:8] != MAGIC:
        raise ValueError("not a model weights file (bad magic)")
    version, count = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"unsupported weights format version {version}")
    offset = 16
    layout = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{rank}I", data, offset) if rank else ()
        offset += 4 * rank
        layout.append((name, tuple(shape)))
    size = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in layout)
    payload = data[offset:offset + 8 * size]
    if len(payload) != 8 * size:
        raise ValueError("truncated weights payload")
    offset += 8 * size
    (stored,) = struct.unpack_from("<Q", data, offset)
    if stored != _payload_checksum(payload):
        raise ValueError("weights payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ModelWeights(values, tuple(layout))


def save_weights(weights: ModelWeights, path) -> None:
    Path(path).write_bytes(weights_to_bytes(weights))


def load_weights(path) -> ModelWeights:
    return weights_from_bytes(Path(path).read_bytes())
