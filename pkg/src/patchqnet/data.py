"""Fashion-MNIST ingestion: IDX parsing, class filtering, padding, batching.

Files are the four standard IDX containers (optionally gzipped) under a
data directory; nothing is downloaded.  Preparation scales pixels to
[0, 1], zero-pads 28x28 to 32x32 (2 px on every side), and one-hot
encodes a chosen class pair with index 0 = first requested class.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataFormatError, DatasetError

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class RawDataset:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8
    split: str

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataFormatError(
                f"{self.split}: {len(self.images)} images vs {len(self.labels)} labels"
            )


@dataclass
class PreparedSample:
    image: np.ndarray  # (32, 32) float64 in [0, 1]
    label_onehot: np.ndarray  # (2,) float64


@dataclass
class PreparedDataset:
    """Class-filtered, scaled, padded samples as contiguous arrays."""

    images: np.ndarray  # (n, 32, 32) float64
    onehot: np.ndarray  # (n, 2) float64
    labels: np.ndarray  # (n,) original class ids
    classes: tuple

    def __len__(self):
        return len(self.images)

    def __getitem__(self, i):
        return PreparedSample(self.images[i], self.onehot[i])


def parse_idx(data):
    """Decode one IDX container (path, or raw/gzipped bytes) to an array."""
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise DataFormatError(f"corrupt gzip stream: {exc}") from exc
    if len(data) < 4:
        raise DataFormatError("truncated IDX header")
    magic = struct.unpack(">i", data[:4])[0]
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise DataFormatError(f"bad IDX magic {magic} (want {IMAGE_MAGIC} or {LABEL_MAGIC})")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise DataFormatError("truncated IDX dimension header")
    dims = struct.unpack(f">{ndim}i", data[4:header])
    if any(d <= 0 for d in dims):
        raise DataFormatError(f"non-positive IDX dimension {dims}")
    count = int(np.prod(dims))
    if len(data) != header + count:
        raise DataFormatError(
            f"IDX payload length {len(data) - header} != {count} from dims {dims}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)


def load_split(data_dir, split):
    """Read one split's image+label files (plain or .gz) from data_dir."""
    if split not in SPLIT_FILES:
        raise ConfigurationError(f"unknown split {split!r}")
    data_dir = Path(data_dir)
    arrays = []
    for stem in SPLIT_FILES[split]:
        path = data_dir / f"{stem}.gz"
        if not path.exists():
            path = data_dir / stem
        if not path.exists():
            raise DatasetError(f"missing dataset file {stem}[.gz] under {data_dir}")
        arrays.append(parse_idx(path))
    images, labels = arrays
    if images.ndim != 3 or images.shape[1:] != (28, 28):
        raise DataFormatError(f"expected (n, 28, 28) images, got {images.shape}")
    return RawDataset(images, labels, split)


def prepare(raw, classes):
    """Filter to a class pair, scale to [0,1], pad to 32x32, one-hot."""
    a, b = classes
    if a == b or not (0 <= a <= 9 and 0 <= b <= 9):
        raise ConfigurationError(f"invalid class pair {classes}")
    mask = (raw.labels == a) | (raw.labels == b)
    if not mask.any():
        raise DatasetError(f"no samples of classes {classes} in the {raw.split} split")
    labels = raw.labels[mask]
    scaled = raw.images[mask].astype(np.float64) / 255.0
    images = np.pad(scaled, ((0, 0), (2, 2), (2, 2)))
    onehot = np.zeros((len(labels), 2))
    onehot[labels == a, 0] = 1.0
    onehot[labels == b, 1] = 1.0
    return PreparedDataset(images, onehot, labels.copy(), (int(a), int(b)))


def subset_per_class(ds, per_class):
    """First `per_class` samples of each class, in file order."""
    keep = []
    for c in ds.classes:
        idx = np.flatnonzero(ds.labels == c)
        if len(idx) < per_class:
            raise DatasetError(f"class {c}: only {len(idx)} samples, need {per_class}")
        keep.append(idx[:per_class])
    order = np.sort(np.concatenate(keep))
    return PreparedDataset(ds.images[order], ds.onehot[order], ds.labels[order], ds.classes)


def batch_indices(n, batch_size, rng):
    """One epoch of shuffled index batches (final one may be short)."""
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    if batch_size > n:
        raise ConfigurationError(f"batch_size {batch_size} exceeds dataset size {n}")
    perm = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield perm[i:i + batch_size]


def batch_iterator(samples, batch_size, seed, epochs=1):
    """Seeded without-replacement batch stream, reshuffling each epoch."""
    n = len(samples)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for idx in batch_indices(n, batch_size, rng):
            yield [samples[int(i)] for i in idx]
