"""Binary and text serialisation of embedding tables.

Binary layout (little-endian)::

    b"HGMD" | u32 version | u32 V | u32 p | u32 k | u32 h-kind | u32 h-power
    f64[V*p*k] target | f64[V*p*k] context | f64[V] bias_target | f64[V] bias_context
    optional word trailer: b"HGVW" | u32 n | n x (u32 byte length | utf-8 bytes)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ModelMismatchError
from .hfunc import HFunction
from .trainer import EmbeddingTable

MODEL_MAGIC = b"HGMD"
MODEL_VERSION = 1
WORDS_MAGIC = b"HGVW"
_HEADER = struct.Struct("<4sIIIIII")
TEXT_TAG = "poincare-glove"


def save_model(table: EmbeddingTable, path) -> None:
    V, p, k = table.shape
    h = table.h or HFunction("square")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, V, p, k, h.code, h.power))
        for arr in (table.target, table.context, table.bias_target, table.bias_context):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if table.words is not None:
            fh.write(WORDS_MAGIC + struct.pack("<I", len(table.words)))
            for word in table.words:
                raw = word.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)) + raw)


def load_model(path, expect_h: HFunction | None = None, expect_p=None, expect_k=None) -> EmbeddingTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at offset 0")
    magic, version, V, p, k, h_code, h_pow = _HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != MODEL_VERSION:
        raise ModelMismatchError(f"{path}: model version {version}, expected {MODEL_VERSION}")
    h = HFunction.from_code(h_code, h_pow)
    if expect_h is not None and expect_h != h:
        raise ModelMismatchError(f"{path}: model was trained with h={h.name}, not h={expect_h.name}")
    if expect_p is not None and expect_p != p:
        raise ModelMismatchError(f"{path}: model has p={p} factors, expected {expect_p}")
    if expect_k is not None and expect_k != k:
        raise ModelMismatchError(f"{path}: model has factor dimension k={k}, expected {expect_k}")
    offset = _HEADER.size
    sizes = (V * p * k, V * p * k, V, V)
    need = offset + 8 * sum(sizes)
    if len(data) < need:
        raise FormatError(f"{path}: truncated array data at offset {len(data)} (need {need} bytes)")
    arrays = []
    for n in sizes:
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(np.float64))
        offset += 8 * n
    words = None
    if offset < len(data):
        words, offset = _read_words(data, offset, V, path)
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes at offset {offset}")
    return EmbeddingTable(
        arrays[0].reshape(V, p, k), arrays[1].reshape(V, p, k), arrays[2], arrays[3], words, h
    )


def _read_words(data, offset, V, path):
    if data[offset:offset + 4] != WORDS_MAGIC:
        raise FormatError(f"{path}: unexpected data at offset {offset}")
    (n,) = struct.unpack_from("<I", data, offset + 4)
    if n != V:
        raise FormatError(f"{path}: word trailer lists {n} words for V={V} at offset {offset + 4}")
    offset += 8
    words = []
    for _ in range(n):
        if offset + 4 > len(data):
            raise FormatError(f"{path}: truncated word entry at offset {offset}")
        (size,) = struct.unpack_from("<I", data, offset)
        raw = data[offset + 4:offset + 4 + size]
        if len(raw) != size:
            raise FormatError(f"{path}: truncated word entry at offset {offset}")
        words.append(raw.decode("utf-8"))
        offset += 4 + size
    return tuple(words), offset


def context_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".context")


def export_text(table: EmbeddingTable, path) -> tuple[Path, Path]:
    """Write target vectors to ``path`` and context vectors to ``path.context``."""
    V, p, k = table.shape
    h = table.h or HFunction("square")
    words = table.words or tuple(f"w{i}" for i in range(V))
    header = f"{TEXT_TAG} p={p} k={k} h={h.name}\n"
    out = (Path(path), context_path(path))
    for dest, points, bias in ((out[0], table.target, table.bias_target), (out[1], table.context, table.bias_context)):
        flat = points.reshape(V, p * k)
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header)
            for w, row, b in zip(words, flat, bias):
                fh.write(w + " " + " ".join(format(v, ".17g") for v in row) + " " + format(b, ".17g") + "\n")
    return out


def _parse_header(line, path):
    parts = line.split()
    if not parts or parts[0] != TEXT_TAG:
        raise FormatError(f"{path}:1: missing '{TEXT_TAG}' header")
    try:
        fields = dict(item.split("=", 1) for item in parts[1:])
        return int(fields["p"]), int(fields["k"]), HFunction.parse(fields["h"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}:1: malformed header {line.strip()!r}") from exc


def _read_text_side(path):
    with open(path, encoding="utf-8") as fh:
        p, k, h = _parse_header(fh.readline(), path)
        words, rows, biases = [], [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != p * k + 2:
                raise FormatError(f"{path}:{lineno}: expected {p * k + 2} fields, got {len(parts)}")
            words.append(parts[0])
            vals = [float(v) for v in parts[1:]]
            rows.append(vals[:-1])
            biases.append(vals[-1])
    points = np.array(rows, dtype=np.float64).reshape(len(words), p, k)
    return (p, k, h), tuple(words), points, np.array(biases, dtype=np.float64)


def import_text(path) -> EmbeddingTable:
    meta, words, target, bias_t = _read_text_side(path)
    meta_c, words_c, context, bias_c = _read_text_side(context_path(path))
    if meta != meta_c or words != words_c:
        raise FormatError(f"{path}: target and context files disagree")
    return EmbeddingTable(target, context, bias_t, bias_c, words, meta[2])


def is_text_model(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(TEXT_TAG)) == TEXT_TAG.encode()


@dataclass
class WordVectors:
    """Plain Euclidean vectors (e.g. a vanilla GloVe baseline) keyed by word."""

    words: tuple[str, ...]
    vectors: np.ndarray

    def word_index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.words)}


def load_word_vectors(path) -> WordVectors:
    """Read ``word v1 ... vn`` lines; a leading ``count dim`` line is skipped."""
    words, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or (lineno == 1 and len(parts) == 2 and parts[0].isdigit()):
                continue
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric vector entry") from exc
            words.append(parts[0])
    if len({len(r) for r in rows}) > 1:
        raise FormatError(f"{path}: vectors of unequal length")
    return WordVectors(tuple(words), np.array(rows, dtype=np.float64))


def load_any(path):
    """Binary model, text model, or plain Euclidean vectors, by content."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MODEL_MAGIC:
        return load_model(path)
    if is_text_model(path):
        return import_text(path)
    return load_word_vectors(path)
