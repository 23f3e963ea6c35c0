"""Dataset ingestion: CIFAR-10 binary and MNIST IDX readers, patch extraction,
and seeded synthetic image generators for hermetic runs.

Real dataset files are user-supplied by path; nothing here downloads. The
fetch helper prints the official URLs and verifies checksums of files the
user already fetched.
"""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .density import RngSeed, make_rng, subseed
from .likelihood import QuantizedImageSet

__all__ = [
    "PatchSpec",
    "read_cifar10",
    "read_mnist_idx",
    "extract_patches",
    "to_grayscale",
    "synthetic_clustered_images",
    "synthetic_textured_images",
    "DATASET_SOURCES",
    "verify_dataset_files",
]

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 x 32 x 32 pixel bytes
MNIST_IMAGE_MAGIC = 2051


@dataclass(frozen=True)
class PatchSpec:
    """How to cut patches: size, channel handling, how many, and the seed."""

    patch_size: int = 6
    channel_mode: str = "grayscale"
    count: int = 10000
    seed: RngSeed = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.channel_mode not in ("grayscale", "color"):
            raise ValueError(f"channel_mode must be grayscale or color, got {self.channel_mode!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def _read_cifar_file(path: Path) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % CIFAR_RECORD_BYTES != 0:
        offset = (raw.size // CIFAR_RECORD_BYTES) * CIFAR_RECORD_BYTES
        raise ValueError(
            f"{path}: truncated record at byte offset {offset} "
            f"(file size {raw.size} is not a multiple of {CIFAR_RECORD_BYTES})"
        )
    records = raw.reshape(-1, CIFAR_RECORD_BYTES)
    # Pixel payload is 3 channel planes of 32 x 32; flatten to row-major
    # (row, col, channel) interleaved order.
    planes = records[:, 1:].reshape(-1, 3, 32, 32)
    return planes.transpose(0, 2, 3, 1).reshape(-1, 3072)


def read_cifar10(path) -> QuantizedImageSet:
    """Read CIFAR-10 binary batches (records of 1 label byte + 3072 pixel bytes).

    ``path`` may be a single ``.bin`` file or a directory containing the
    standard ``data_batch_*.bin`` training files (read in sorted order).
    Labels are discarded.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("data_batch_*.bin"))
        if not files:
            raise FileNotFoundError(f"{path}: no data_batch_*.bin files found")
    else:
        if not path.exists():
            raise FileNotFoundError(str(path))
        files = [path]
    data = np.concatenate([_read_cifar_file(f) for f in files], axis=0)
    if data.shape[0] == 0:
        raise ValueError(f"{path}: empty dataset")
    return QuantizedImageSet(data, (32, 32, 3))


def read_mnist_idx(path) -> QuantizedImageSet:
    """Read an MNIST IDX image file (optionally gzip-compressed).

    Layout: big-endian uint32 magic 2051, count, rows, cols, then one
    unsigned byte per pixel.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        header = f.read(16)
        if len(header) < 16:
            raise ValueError(f"{path}: file too short for an IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != MNIST_IMAGE_MAGIC:
            raise ValueError(
                f"{path}: bad magic {magic}, expected {MNIST_IMAGE_MAGIC} (IDX image file)"
            )
        if count == 0:
            raise ValueError(f"{path}: empty dataset")
        payload = f.read()
    expected = count * rows * cols
    if len(payload) != expected:
        raise ValueError(
            f"{path}: declared {count} images of {rows}x{cols} "
            f"({expected} bytes) but found {len(payload)} payload bytes"
        )
    data = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)
    return QuantizedImageSet(data, (rows, cols, 1))


def to_grayscale(images: QuantizedImageSet) -> QuantizedImageSet:
    """Average the channels (round to nearest, ties to even)."""
    h, w, c = images.geometry
    if c == 1:
        return images
    stacked = images.data.reshape(-1, h, w, c)
    gray = np.rint(stacked.mean(axis=3)).astype(np.int64)
    return QuantizedImageSet(gray.reshape(-1, h * w), (h, w, 1))


def extract_patches(images: QuantizedImageSet, spec: PatchSpec) -> QuantizedImageSet:
    """Cut patches at uniformly random positions from random images (seeded)."""
    if spec.channel_mode == "grayscale":
        images = to_grayscale(images)
    h, w, c = images.geometry
    p = spec.patch_size
    if p > h or p > w:
        raise ValueError(f"patch_size {p} exceeds image size {h}x{w}")
    rng = make_rng(spec.seed)
    img_idx = rng.integers(0, images.n, size=spec.count)
    top = rng.integers(0, h - p + 1, size=spec.count)
    left = rng.integers(0, w - p + 1, size=spec.count)
    stacked = images.data.reshape(-1, h, w, c)
    out = np.empty((spec.count, p * p * c), dtype=np.int64)
    for i in range(spec.count):
        patch = stacked[img_idx[i], top[i] : top[i] + p, left[i] : left[i] + p, :]
        out[i] = patch.reshape(-1)
    return QuantizedImageSet(out, (p, p, c))


def _normalize_to_byte_range(block: np.ndarray, high: float) -> np.ndarray:
    lo = block.min(axis=(1, 2), keepdims=True)
    hi = block.max(axis=(1, 2), keepdims=True)
    return (block - lo) / np.maximum(hi - lo, 1e-12) * high


def synthetic_clustered_images(
    n: int,
    seed: RngSeed,
    *,
    height: int = 28,
    width: int = 28,
    n_prototypes: int = 40,
    prototype_smoothness: float = 3.0,
    deform_amplitude: float = 20.0,
    deform_smoothness: float = 2.0,
    pixel_noise: float = 8.0,
) -> QuantizedImageSet:
    """Cluster-structured grayscale images: smooth prototypes plus smooth
    per-image deformation and pixel noise.

    A deterministic stand-in for digit-like data when the real files are
    not on disk: the prototypes give the distribution well-separated modes,
    the noise gives each mode genuine spread.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    proto_rng = make_rng(subseed(seed, "prototypes"))
    protos = gaussian_filter(
        proto_rng.random((n_prototypes, height, width)),
        sigma=(0, prototype_smoothness, prototype_smoothness),
    )
    protos = _normalize_to_byte_range(protos, 210.0)

    rng = make_rng(subseed(seed, "samples"))
    idx = rng.integers(0, n_prototypes, size=n)
    gains = rng.uniform(0.85, 1.15, size=(n, 1, 1))
    deform = gaussian_filter(
        rng.standard_normal((n, height, width)),
        sigma=(0, deform_smoothness, deform_smoothness),
    )
    deform *= deform_amplitude / max(float(deform.std()), 1e-12)
    noise = rng.standard_normal((n, height, width)) * pixel_noise
    img = protos[idx] * gains + deform + noise
    data = np.clip(np.rint(img), 0, 255).astype(np.int64)
    return QuantizedImageSet(data.reshape(n, height * width), (height, width, 1))


def synthetic_textured_images(
    n: int,
    seed: RngSeed,
    *,
    height: int = 32,
    width: int = 32,
    channels: int = 3,
    smoothness: float = 2.5,
) -> QuantizedImageSet:
    """Spatially correlated color noise images, photograph-like in their
    autocorrelation: useful for exercising the shifted-window test."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = make_rng(subseed(seed, "texture"))
    luma = gaussian_filter(
        rng.random((n, height, width, 1)), sigma=(0, smoothness, smoothness, 0)
    )
    tint = gaussian_filter(
        rng.random((n, height, width, channels)), sigma=(0, smoothness, smoothness, 0)
    )
    mix = 0.7 * luma + 0.3 * tint
    lo = mix.min(axis=(1, 2, 3), keepdims=True)
    hi = mix.max(axis=(1, 2, 3), keepdims=True)
    img = (mix - lo) / np.maximum(hi - lo, 1e-12) * 255.0
    data = np.rint(img).astype(np.int64).reshape(n, height * width * channels)
    return QuantizedImageSet(data, (height, width, channels))


# Official sources. Digests are transcribed from the dataset mirrors'
# published checksum lists; the verifier prints computed values so any
# drift is visible rather than silent.
DATASET_SOURCES = {
    "mnist": [
        (
            "https://yann.lecun.com/exdb/mnist/train-images-idx3-ubyte.gz",
            "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609",
        ),
        (
            "https://yann.lecun.com/exdb/mnist/t10k-images-idx3-ubyte.gz",
            "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6",
        ),
    ],
    "cifar10": [
        (
            "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
            "c4a38c50a1bc5f3a1c5537f2155ab9d68f9f25eb1ed8d9ddda3db29a59bca1dd",
        ),
    ],
}


def sha256_of_file(path, chunk_bytes: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            chunk = f.read(chunk_bytes)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def verify_dataset_files(name: str, directory) -> list[tuple[str, str, str]]:
    """Check files in ``directory`` against the published checksums.

    Returns (filename, status, computed_sha256) per source file, where status
    is one of ``ok``, ``mismatch``, ``missing``.
    """
    if name not in DATASET_SOURCES:
        raise ValueError(f"unknown dataset {name!r}; known: {sorted(DATASET_SOURCES)}")
    results = []
    for url, expected in DATASET_SOURCES[name]:
        filename = url.rsplit("/", 1)[-1]
        path = Path(directory) / filename
        if not path.exists():
            results.append((filename, "missing", ""))
            continue
        digest = sha256_of_file(path)
        results.append((filename, "ok" if digest == expected else "mismatch", digest))
    return results
