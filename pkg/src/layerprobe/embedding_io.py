"""Binary frame-embedding files and the on-disk embedding store.

File layout (all integers little-endian):

    magic   4 bytes   b"LPRB"
    version u16       currently 1
    layer   u16       encoder layer index
    dim     u32       embedding dimensionality
    frames  u32       number of frames
    rate    f32       frames per second
    id_len  u16       byte length of the UTF-8 recording id
    id      id_len bytes
    payload frames * dim float32 values, row-major

One file per (recording, layer), named ``<recording_id>.layer<NN>.lpb``.
The payload is stored and returned as float32 so a write/read round trip
is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"LPRB"
FORMAT_VERSION = 1

_HEAD = struct.Struct("<4sHHIIfH")  # magic, version, layer, dim, frames, rate, id_len


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file violates the binary format."""


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-layer frame embeddings of one recording at a fixed frame rate.

    ``data`` is an (n_frames, dim) float32 matrix; it is copied, coerced and
    marked read-only at construction so sequences can be shared freely
    between threads.
    """

    recording_id: str
    layer_index: int
    frame_hz: float
    data: np.ndarray

    def __post_init__(self) -> None:
        if not self.recording_id:
            raise ValueError("recording_id must be non-empty")
        if any(sep in self.recording_id for sep in ("/", "\\")):
            raise ValueError(f"recording_id {self.recording_id!r} contains a path separator")
        if len(self.recording_id.encode("utf-8")) > 0xFFFF:
            raise ValueError("recording_id longer than 65535 UTF-8 bytes")
        if int(self.layer_index) < 0:
            raise ValueError(f"layer_index must be >= 0, got {self.layer_index}")
        if not (float(self.frame_hz) > 0 and np.isfinite(self.frame_hz)):
            raise ValueError(f"frame_hz must be positive and finite, got {self.frame_hz}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"data must be a non-empty 2-D matrix, got shape {np.shape(self.data)}")
        if not np.all(np.isfinite(data)):
            raise ValueError(f"embedding data for {self.recording_id!r} contains non-finite entries")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "layer_index", int(self.layer_index))
        # frame_hz is serialized as float32; quantize now so a round trip is exact
        object.__setattr__(self, "frame_hz", float(np.float32(self.frame_hz)))

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.frame_hz


@dataclass(frozen=True)
class EmbeddingHeader:
    """Parsed header of an embedding file (no payload)."""

    recording_id: str
    layer_index: int
    dim: int
    n_frames: int
    frame_hz: float
    payload_offset: int

    @property
    def payload_bytes(self) -> int:
        return 4 * self.n_frames * self.dim

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.frame_hz


def embedding_file_name(recording_id: str, layer_index: int) -> str:
    return f"{recording_id}.layer{int(layer_index):02d}.lpb"


def write_embedding_file(seq: EmbeddingSequence, path: str | Path) -> None:
    """Serialize ``seq`` to ``path``; the write is atomic (temp + rename)."""
    path = Path(path)
    id_bytes = seq.recording_id.encode("utf-8")
    head = _HEAD.pack(
        MAGIC,
        FORMAT_VERSION,
        seq.layer_index,
        seq.dim,
        seq.n_frames,
        seq.frame_hz,
        len(id_bytes),
    )
    payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(id_bytes)
        fh.write(payload)
    tmp.replace(path)


def _parse_header(raw: bytes, path: Path) -> EmbeddingHeader:
    if len(raw) < _HEAD.size:
        raise EmbeddingFormatError(f"{path}: file too short for header ({len(raw)} bytes)")
    magic, version, layer, dim, n_frames, frame_hz, id_len = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}, expected {FORMAT_VERSION}")
    if dim < 1 or n_frames < 1:
        raise EmbeddingFormatError(f"{path}: invalid dimensions dim={dim}, n_frames={n_frames}")
    if not (frame_hz > 0 and np.isfinite(frame_hz)):
        raise EmbeddingFormatError(f"{path}: invalid frame_hz {frame_hz}")
    offset = _HEAD.size + id_len
    if len(raw) < offset:
        raise EmbeddingFormatError(f"{path}: truncated recording id")
    try:
        recording_id = raw[_HEAD.size:offset].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EmbeddingFormatError(f"{path}: recording id is not valid UTF-8") from exc
    return EmbeddingHeader(
        recording_id=recording_id,
        layer_index=layer,
        dim=dim,
        n_frames=n_frames,
        frame_hz=float(frame_hz),
        payload_offset=offset,
    )


def read_embedding_header(path: str | Path) -> EmbeddingHeader:
    """Parse and sanity-check a file's header without loading the payload."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEAD.size + 0xFFFF)
        header = _parse_header(raw, path)
        fh.seek(0, 2)
        actual = fh.tell() - header.payload_offset
    if actual != header.payload_bytes:
        raise EmbeddingFormatError(
            f"{path}: truncated payload: expected {header.payload_bytes} payload bytes, found {actual}"
        )
    return header


def read_embedding_file(path: str | Path) -> EmbeddingSequence:
    """Read an embedding file, re-checking format and sequence invariants."""
    path = Path(path)
    raw = path.read_bytes()
    header = _parse_header(raw, path)
    expected = header.payload_bytes
    actual = len(raw) - header.payload_offset
    if actual != expected:
        raise EmbeddingFormatError(
            f"{path}: truncated payload: expected {expected} payload bytes, found {actual}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=header.n_frames * header.dim, offset=header.payload_offset)
    data = data.reshape(header.n_frames, header.dim)
    try:
        return EmbeddingSequence(
            recording_id=header.recording_id,
            layer_index=header.layer_index,
            frame_hz=header.frame_hz,
            data=data,
        )
    except ValueError as exc:
        raise EmbeddingFormatError(f"{path}: {exc}") from exc


class EmbeddingStore:
    """Flat directory of embedding files, one per (recording, layer).

    The store is read-only during experiments; concurrent readers are safe.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, recording_id: str, layer_index: int) -> Path:
        return self.root / embedding_file_name(recording_id, layer_index)

    def exists(self, recording_id: str, layer_index: int) -> bool:
        return self.path_for(recording_id, layer_index).is_file()

    def load(self, recording_id: str, layer_index: int) -> EmbeddingSequence:
        seq = read_embedding_file(self.path_for(recording_id, layer_index))
        if seq.recording_id != recording_id:
            raise EmbeddingFormatError(
                f"{self.path_for(recording_id, layer_index)}: header names recording "
                f"{seq.recording_id!r}, file name implies {recording_id!r}"
            )
        return seq

    def header(self, recording_id: str, layer_index: int) -> EmbeddingHeader:
        return read_embedding_header(self.path_for(recording_id, layer_index))

    def layers_for(self, recording_id: str) -> list[int]:
        """Layer indices present for one recording, sorted."""
        layers = []
        for p in self.root.glob(f"{recording_id}.layer*.lpb"):
            suffix = p.name[len(recording_id) + 1:]
            try:
                layers.append(int(suffix[len("layer"):-len(".lpb")]))
            except ValueError:
                continue
        return sorted(layers)

    def discover_layers(self) -> list[int]:
        """Union of layer indices present in the store, sorted."""
        layers: set[int] = set()
        for p in self.root.glob("*.layer*.lpb"):
            stem = p.name[:-len(".lpb")]
            _, _, tail = stem.rpartition(".layer")
            try:
                layers.add(int(tail))
            except ValueError:
                continue
        return sorted(layers)
