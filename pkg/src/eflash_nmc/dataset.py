"""Dataset ingestion: MNIST IDX files and the synthetic anomaly set."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SimError
from .nmcu import INT8_MAX, INT8_MIN, round_half_away

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    samples: np.ndarray  # (n, dim) int8, pre-quantized
    labels: np.ndarray  # (n,) class ids or anomaly flags
    kind: str  # classify | anomaly

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] != self.labels.shape[0]:
            raise SimError("samples and labels must agree on sample count")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]


def quantize_real(values, scale, zero_point):
    """Real values -> int8 with the artifact's half-away-from-zero rounding."""
    q = zero_point + round_half_away(np.asarray(values, dtype=np.float64) / scale)
    return np.clip(q, INT8_MIN, INT8_MAX).astype(np.int8)


def _read_idx(path, expect_magic, expect_dims):
    data = Path(path).read_bytes()
    if len(data) < 4 * (1 + expect_dims):
        raise SimError(f"{path}: truncated IDX header")
    magic = struct.unpack(">i", data[:4])[0]
    if magic != expect_magic:
        raise SimError(f"{path}: bad IDX magic 0x{magic:08x}")
    dims = struct.unpack(f">{expect_dims}i", data[4 : 4 * (1 + expect_dims)])
    payload = np.frombuffer(data, dtype=np.uint8, offset=4 * (1 + expect_dims))
    if payload.size != int(np.prod(dims)):
        raise SimError(f"{path}: payload size does not match header dimensions")
    return payload.reshape(dims)


def load_mnist_idx(images_path, labels_path, limit=None, input_scale=1 / 255.0, input_zp=-128):
    """Big-endian IDX image/label pair -> int8 dataset.

    Pixels are normalized to [0, 1] then quantized with the model's declared
    input scale and zero point.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise SimError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}"
        )
    n = images.shape[0] if limit is None else min(limit, images.shape[0])
    dim = int(np.prod(images.shape[1:]))
    flat = images[:n].reshape(n, dim).astype(np.float64) / 255.0
    samples = quantize_real(flat, input_scale, input_zp).reshape(n, dim)
    return Dataset(samples, labels[:n].astype(np.int64), "classify")


def make_synthetic_anomaly(
    n_normal=400,
    n_anomaly=100,
    dim=64,
    shift=2.0,
    input_scale=0.05,
    input_zp=0,
    seed=0,
):
    """Seeded Gaussian normals vs mean-shifted anomalies, pre-quantized.

    Desk-scale stand-in for an acoustic anomaly set: normal samples are
    standard Gaussian, anomalies are shifted on half the dimensions.
    """
    rng = np.random.default_rng(seed)
    normal = rng.normal(0.0, 1.0, (n_normal, dim))
    anomaly = rng.normal(0.0, 1.0, (n_anomaly, dim))
    anomaly[:, : dim // 2] += shift
    real = np.concatenate([normal, anomaly])
    labels = np.concatenate(
        [np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    )
    order = rng.permutation(real.shape[0])
    samples = quantize_real(real[order], input_scale, input_zp)
    return Dataset(samples, labels[order], "anomaly")
