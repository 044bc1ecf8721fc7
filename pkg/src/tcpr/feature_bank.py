"""Feature banks: the immutable n x d store of embeddings plus class labels.

Two on-disk formats are supported.

Binary (little-endian)::

    b"TCPRFB01" | u32 version=1 | u32 n | u32 d | u32 num_classes
    | n*d f32 features, row-major | n u32 labels

CSV: a header line ``label,f0,...,f{d-1}`` followed by one row per sample.
``num_classes`` is ``max(label) + 1`` unless a ``# num_classes=<int>``
comment line precedes the header.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._io import atomic_write
from .errors import (
    BadMagic,
    BankFormatError,
    ClassOutOfRange,
    DimMismatch,
    IoFailure,
    LabelOutOfRange,
    NonFiniteValue,
)

MAGIC = b"TCPRFB01"
VERSION = 1
_HEADER = struct.Struct("<8sIIII")


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """Raw (unnormalized) features with integer class labels.

    Arrays are copied and flagged read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float32, order="C", copy=True)
        if feats.ndim != 2:
            raise DimMismatch(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n < 1 or d < 1:
            raise DimMismatch(f"bank needs n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(feats).all():
            raise NonFiniteValue("features contain NaN or Inf")

        labels = np.asarray(self.labels)
        if labels.shape != (n,):
            raise DimMismatch(f"expected {n} labels, got shape {labels.shape}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.floor(labels)):
                raise LabelOutOfRange("labels must be integers")
        labels = labels.astype(np.int64)
        num_classes = int(self.num_classes)
        if num_classes < 1:
            raise LabelOutOfRange(f"num_classes must be positive, got {num_classes}")
        if labels.min() < 0 or labels.max() >= num_classes:
            raise LabelOutOfRange(
                f"labels must lie in [0, {num_classes}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )

        feats.flags.writeable = False
        labels.flags.writeable = False
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(num_classes + 1))
        index = {
            c: tuple(int(i) for i in order[bounds[c]:bounds[c + 1]])
            for c in range(num_classes)
        }

        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", num_classes)
        object.__setattr__(self, "class_index", index)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def row_norms(self) -> np.ndarray:
        """Euclidean norm of every row, accumulated in float64."""
        norms = np.empty(self.n)
        for start in range(0, self.n, 8192):
            block = self.features[start:start + 8192].astype(np.float64)
            norms[start:start + 8192] = np.sqrt(np.einsum("ij,ij->i", block, block))
        norms.flags.writeable = False
        return norms

    @cached_property
    def mean(self) -> np.ndarray:
        m = self.features.mean(axis=0, dtype=np.float64)
        m.flags.writeable = False
        return m

    def __eq__(self, other):
        if not isinstance(other, FeatureBank):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    def __repr__(self):
        return f"FeatureBank(n={self.n}, dim={self.dim}, num_classes={self.num_classes})"


def class_rows(bank: FeatureBank, c: int) -> list[int]:
    """Sorted row indices of class ``c``."""
    if not 0 <= c < bank.num_classes:
        raise ClassOutOfRange(f"class {c} not in [0, {bank.num_classes})")
    return list(bank.class_index[c])


# -- serialization ---------------------------------------------------------

def _is_csv(path) -> bool:
    return str(path).lower().endswith(".csv")


def encode_binary(bank: FeatureBank) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, bank.n, bank.dim, bank.num_classes)
    feats = bank.features.astype("<f4", copy=False).tobytes()
    labels = bank.labels.astype("<u4").tobytes()
    return header + feats + labels


def decode_binary(data: bytes) -> FeatureBank:
    if data[:8] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {bytes(data[:8])!r}")
    if len(data) < _HEADER.size:
        raise DimMismatch("truncated header")
    _, version, n, d, num_classes = _HEADER.unpack_from(data)
    if version != VERSION:
        raise BankFormatError(f"unsupported bank version {version}")
    expected = _HEADER.size + 4 * n * d + 4 * n
    if len(data) != expected:
        raise DimMismatch(
            f"payload is {len(data) - _HEADER.size} bytes, header implies "
            f"{expected - _HEADER.size} for n={n}, d={d}"
        )
    feats = np.frombuffer(data, dtype="<f4", count=n * d, offset=_HEADER.size)
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=_HEADER.size + 4 * n * d)
    return FeatureBank(feats.reshape(n, d), labels, num_classes)


def encode_csv(bank: FeatureBank) -> bytes:
    buf = io.StringIO()
    buf.write(f"# num_classes={bank.num_classes}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label"] + [f"f{j}" for j in range(bank.dim)])
    for label, row in zip(bank.labels, bank.features):
        # 9 significant digits round-trip any float32 exactly.
        writer.writerow([int(label)] + [f"{float(v):.9g}" for v in row])
    return buf.getvalue().encode("ascii")


def decode_csv(text: str) -> FeatureBank:
    num_classes = None
    lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, value = stripped.lstrip("#").partition("=")
            if key.strip() == "num_classes":
                num_classes = int(value)
            continue
        lines.append(stripped)
    if not lines:
        raise BadMagic("CSV bank has no header line")
    header = next(csv.reader([lines[0]]))
    if not header or header[0] != "label" or header[1:] != [f"f{j}" for j in range(len(header) - 1)]:
        raise BadMagic(f"CSV header must be label,f0,...; got {lines[0][:60]!r}")
    d = len(header) - 1
    if d < 1 or len(lines) < 2:
        raise DimMismatch("CSV bank needs at least one feature column and one row")
    labels = []
    rows = []
    for lineno, rec in enumerate(csv.reader(lines[1:]), start=2):
        if len(rec) != d + 1:
            raise DimMismatch(f"row {lineno} has {len(rec) - 1} features, expected {d}")
        try:
            label = int(rec[0])
            values = [float(v) for v in rec[1:]]
        except ValueError as exc:
            raise BankFormatError(f"row {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteValue(f"row {lineno} has a non-finite value")
        if label < 0:
            raise LabelOutOfRange(f"row {lineno}: negative label {label}")
        labels.append(label)
        rows.append(values)
    if num_classes is None:
        num_classes = max(labels) + 1
    feats = np.asarray(rows, dtype=np.float64)
    with np.errstate(over="ignore"):
        feats32 = feats.astype(np.float32)
    if not np.isfinite(feats32).all():
        raise NonFiniteValue("value overflows float32")
    return FeatureBank(feats32, np.asarray(labels), num_classes)


def save_bank(bank: FeatureBank, path) -> None:
    """Write ``bank`` to ``path``; ``.csv`` selects the CSV format."""
    data = encode_csv(bank) if _is_csv(path) else encode_binary(bank)
    atomic_write(path, data)


def load_bank(path) -> FeatureBank:
    try:
        if _is_csv(path):
            with open(path, encoding="ascii") as fh:
                return decode_csv(fh.read())
        with open(path, "rb") as fh:
            return decode_binary(fh.read())
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# -- synthetic banks -------------------------------------------------------

@dataclass(frozen=True)
class SyntheticBankSpec:
    """Gaussian classes whose means sit on a circle in the first two axes.

    ``shared_offset`` is added to every sample and models a skew of the whole
    bank toward one direction.
    """

    num_classes: int
    per_class: int
    dim: int
    class_mean_scale: float
    noise_std: float
    seed: int = 0
    shared_offset: tuple | None = None

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be > 0")
        if self.shared_offset is not None:
            offset = tuple(float(v) for v in self.shared_offset)
            if len(offset) != self.dim:
                raise ValueError(f"shared_offset has length {len(offset)}, expected {self.dim}")
            object.__setattr__(self, "shared_offset", offset)


def class_means(spec: SyntheticBankSpec) -> np.ndarray:
    """Class means placed at angle pi + 2*pi*c/N on axes (0, 1).

    For two classes this gives [-a, 0] and [a, 0].
    """
    angles = np.pi + 2.0 * np.pi * np.arange(spec.num_classes) / spec.num_classes
    means = np.zeros((spec.num_classes, spec.dim))
    means[:, 0] = spec.class_mean_scale * np.cos(angles)
    means[:, 1] = spec.class_mean_scale * np.sin(angles)
    # cos(pi/2)-style residue would otherwise leak ~1e-16 into exact zeros
    means[np.abs(means) < 1e-12 * max(abs(spec.class_mean_scale), 1.0)] = 0.0
    return means


def generate_synthetic_bank(spec: SyntheticBankSpec) -> FeatureBank:
    rng = np.random.default_rng(spec.seed)
    centers = class_means(spec)
    if spec.shared_offset is not None:
        centers = centers + np.asarray(spec.shared_offset)
    labels = np.repeat(np.arange(spec.num_classes), spec.per_class)
    noise = rng.standard_normal((labels.size, spec.dim))
    feats = centers[labels] + spec.noise_std * noise
    return FeatureBank(feats.astype(np.float32), labels, spec.num_classes)


def skewed_bank_pair(dim: int = 64, base_classes: int = 50, base_per_class: int = 100,
                     novel_classes: int = 10, novel_per_class: int = 50,
                     spread: float = 1.0, offset_ratio: float = 3.0,
                     noise_std: float = 0.3, seed: int = 0) -> tuple[FeatureBank, FeatureBank]:
    """Base and novel banks sharing a skew of ``offset_ratio * spread``.

    The skew lies along axis 2, orthogonal to the plane holding the class
    means, so it carries no class information.
    """
    offset = np.zeros(dim)
    offset[2] = offset_ratio * spread
    base_seed, novel_seed = np.random.SeedSequence(seed).generate_state(2)
    base = generate_synthetic_bank(SyntheticBankSpec(
        base_classes, base_per_class, dim, spread, noise_std, int(base_seed), tuple(offset)))
    novel = generate_synthetic_bank(SyntheticBankSpec(
        novel_classes, novel_per_class, dim, spread, noise_std, int(novel_seed), tuple(offset)))
    return base, novel
