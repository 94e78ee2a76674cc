"""Labelled datasets: synthetic generators and bit-exact file readers."""

from __future__ import annotations

import gzip
import hashlib
import io
import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import FiniteClosure, Interval, IntervalClosure, SunsetClosure

log = logging.getLogger(__name__)

IDX_UBYTE_3D = 0x00000803
IDX_UBYTE_1D = 0x00000801
CIFAR_RECORD = 3073

SUNSET_A = 0
SUNSET_B = 1


class DatasetError(ValueError):
    """Base class for malformed dataset files."""


class UnsupportedIDXType(DatasetError):
    pass


class TruncatedPayload(DatasetError):
    pass


class CountMismatch(DatasetError):
    pass


class BadRecordLength(DatasetError):
    pass


class BadLabel(DatasetError):
    pass


@dataclass
class LabeledDataset:
    """Points with exclusive integer class labels.

    ``region`` optionally carries an analytic closure (the 1-D toy and the
    sunset set); ``points`` is then a finite discretisation of it.  For
    image data ``raw`` keeps the original bytes and ``raw_divisor`` the
    scale that maps them onto ``points``.
    """

    points: np.ndarray
    labels: np.ndarray
    region: IntervalClosure | SunsetClosure | None = None
    priors: dict[int, float] | None = None
    raw: np.ndarray | None = None
    raw_divisor: float | None = None
    name: str = "dataset"
    classes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.points.shape[0] != self.labels.shape[0]:
            raise ValueError("points and labels differ in length")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("all coordinates must be finite")
        self.classes = np.unique(self.labels)
        self._closure = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.classes.size)

    def label_index(self) -> np.ndarray:
        """Labels remapped to ``0 .. num_classes - 1`` (sorted class order)."""
        return np.searchsorted(self.classes, self.labels)

    @property
    def closure(self):
        if self.region is not None:
            return self.region
        if self._closure is None:
            self._closure = FiniteClosure(self.points)
        return self._closure

    def closure_contains(self, x) -> bool:
        if isinstance(self.region, IntervalClosure):
            return self.region.contains(float(np.asarray(x).reshape(-1)[0]))
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return bool(np.any(np.all(self.points == x, axis=1)))

    def class_at(self, x):
        """Class of a clean input ``x``; ``None`` when ``x`` is not in the set."""
        if isinstance(self.region, IntervalClosure):
            return self.region.class_at(float(np.asarray(x).reshape(-1)[0]))
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        hits = np.flatnonzero(np.all(self.points == x, axis=1))
        return int(self.labels[hits[0]]) if hits.size else None

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices)
        return LabeledDataset(
            self.points[indices], self.labels[indices], priors=self.priors,
            raw=None if self.raw is None else self.raw[indices],
            raw_divisor=self.raw_divisor, name=f"{self.name}[subset]")

    def integer_points(self) -> np.ndarray | None:
        """Raw integer pixel values as float64 (exact), when available."""
        if self.raw is None:
            return None
        return self.raw.reshape(len(self), -1).astype(np.float64)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Conflicts:
    count: int
    pairs: tuple[tuple[int, int], ...]


def find_conflicts(ds: LabeledDataset, max_pairs: int = 10) -> Conflicts:
    """Identical points carrying different labels."""
    if len(ds) == 0:
        return Conflicts(0, ())
    _, inverse = np.unique(ds.points, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    groups = np.split(order, np.flatnonzero(np.diff(inverse[order])) + 1)
    count = 0
    pairs = []
    for g in groups:
        if g.size < 2:
            continue
        labs = ds.labels[g]
        if np.unique(labs).size < 2:
            continue
        for i in range(g.size):
            for j in range(i + 1, g.size):
                if labs[i] != labs[j]:
                    count += 1
                    if len(pairs) < max_pairs:
                        pairs.append((int(g[i]), int(g[j])))
    return Conflicts(count, tuple(pairs))


def _report_conflicts(ds: LabeledDataset) -> LabeledDataset:
    c = find_conflicts(ds)
    if c.count:
        log.warning("%s: %d identical point pairs with different labels (first: %s)",
                    ds.name, c.count, list(c.pairs[:3]))
    return ds


# --------------------------------------------------------------------------
# synthetic sets


def make_toy_1d(samples_per_interval: int = 100) -> LabeledDataset:
    """Class -1 on [-2, -1), class 1 on [1, 2), equal priors."""
    region = IntervalClosure([Interval(-2.0, -1.0, -1), Interval(1.0, 2.0, 1)])
    k = np.arange(samples_per_interval)
    offsets = (k + 0.5) / samples_per_interval
    pts = np.concatenate([-2.0 + offsets, 1.0 + offsets])
    labels = np.repeat([-1, 1], samples_per_interval)
    return LabeledDataset(pts, labels, region=region, priors={-1: 0.5, 1: 0.5}, name="toy-1d")


def make_sunset(n_per_class: int, seed: int = 0, line_extent: float = 3.0,
                evenly_spaced: bool = True) -> LabeledDataset:
    """Circle class A (label 0) over the tangent line class B (label 1)."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if evenly_spaced:
        theta = 2.0 * np.pi * np.arange(n_per_class) / n_per_class
        x1 = np.linspace(-line_extent, line_extent, n_per_class)
    else:
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 2.0 * np.pi, n_per_class)
        x1 = rng.uniform(-line_extent, line_extent, n_per_class)
    circle = np.column_stack([np.cos(theta), 1.0 + np.sin(theta)])
    # exact zeros at the quarter turns
    circle[np.abs(circle) < 1e-12] = 0.0
    line = np.column_stack([x1, np.zeros(n_per_class)])
    pts = np.vstack([circle, line])
    labels = np.repeat([SUNSET_A, SUNSET_B], n_per_class)
    return LabeledDataset(pts, labels, region=SunsetClosure(line_extent), name="sunset")


NOISE_EXAMPLE_A = [(1, 1), (2, -1), (2, -2), (-1, -1), (-2, 1)]
NOISE_EXAMPLE_B = [(2, 1), (1, -1), (0, 0)]


def make_noise_example() -> LabeledDataset:
    """Eight-point 2-D set used for the noisy-ensemble contour grids."""
    pts = np.array(NOISE_EXAMPLE_A + NOISE_EXAMPLE_B, dtype=np.float64)
    labels = np.array([0] * len(NOISE_EXAMPLE_A) + [1] * len(NOISE_EXAMPLE_B))
    return LabeledDataset(pts, labels, name="noise-example")


# --------------------------------------------------------------------------
# IDX (MNIST)


def _read_bytes(path) -> bytes:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def parse_idx(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise TruncatedPayload("IDX header truncated")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_UBYTE_3D:
        ndim = 3
    elif magic == IDX_UBYTE_1D:
        ndim = 1
    else:
        raise UnsupportedIDXType(f"unsupported IDX type 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise TruncatedPayload("IDX dimension header truncated")
    dims = struct.unpack(">" + "I" * ndim, data[4:head])
    expected = int(np.prod(dims))
    payload = len(data) - head
    if payload < expected:
        raise TruncatedPayload(f"IDX payload has {payload} bytes, header declares {expected}")
    if payload > expected:
        raise CountMismatch(f"IDX payload has {payload} bytes, header declares {expected}")
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=head).reshape(dims)


def load_idx(images_path, labels_path, scale_to_unit: bool = True) -> LabeledDataset:
    """Read an IDX image/label file pair (optionally gzipped)."""
    images = parse_idx(_read_bytes(images_path))
    labels = parse_idx(_read_bytes(labels_path))
    if images.ndim != 3:
        raise UnsupportedIDXType("image file must hold a 3-D ubyte tensor")
    if labels.ndim != 1:
        raise UnsupportedIDXType("label file must hold a 1-D ubyte vector")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    raw = images.reshape(images.shape[0], -1)
    divisor = 255.0 if scale_to_unit else 1.0
    pts = raw.astype(np.float64) / divisor
    if scale_to_unit and pts.size and pts.max() > 1.0:
        raise DatasetError("scaled pixel exceeds 1")
    ds = LabeledDataset(pts, labels.astype(np.int64), raw=raw, raw_divisor=divisor,
                        name=Path(images_path).name)
    return _report_conflicts(ds)


def write_idx(path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = {3: IDX_UBYTE_3D, 1: IDX_UBYTE_1D}.get(array.ndim)
    if magic is None:
        raise ValueError("only 1-D and 3-D ubyte arrays are supported")
    header = struct.pack(">I", magic) + struct.pack(">" + "I" * array.ndim, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


# --------------------------------------------------------------------------
# CIFAR-10 binary batches


def load_cifar10(bin_paths: Iterable, scale_to_unit: bool = True) -> LabeledDataset:
    """Concatenate CIFAR-10 binary batches (1 label byte + 3072 pixel bytes per record)."""
    raws, labs = [], []
    names = []
    for path in bin_paths:
        data = _read_bytes(path)
        names.append(Path(path).name)
        if len(data) == 0:
            warnings.warn(f"{path}: empty CIFAR-10 batch", stacklevel=2)
            continue
        if len(data) % CIFAR_RECORD:
            raise BadRecordLength(f"{path}: length {len(data)} is not a multiple of {CIFAR_RECORD}")
        rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        if rec[:, 0].max() > 9:
            raise BadLabel(f"{path}: label byte {int(rec[:, 0].max())} > 9")
        labs.append(rec[:, 0].astype(np.int64))
        raws.append(rec[:, 1:])
    raw = np.concatenate(raws) if raws else np.zeros((0, CIFAR_RECORD - 1), dtype=np.uint8)
    labels = np.concatenate(labs) if labs else np.zeros(0, dtype=np.int64)
    divisor = 255.0 if scale_to_unit else 1.0
    ds = LabeledDataset(raw.astype(np.float64) / divisor, labels, raw=raw,
                        raw_divisor=divisor, name="+".join(names) or "cifar10")
    return _report_conflicts(ds)


def find_mnist_files(directory) -> tuple[Path, Path]:
    d = Path(directory)
    for stem in ("train-images-idx3-ubyte", "train-images.idx3-ubyte"):
        for suffix in ("", ".gz"):
            img = d / (stem + suffix)
            if img.exists():
                lab_stem = stem.replace("images", "labels").replace("idx3", "idx1")
                for lsuffix in ("", ".gz"):
                    lab = d / (lab_stem + lsuffix)
                    if lab.exists():
                        return img, lab
    raise FileNotFoundError(f"no MNIST training files in {d}")


def find_cifar10_files(directory) -> list[Path]:
    d = Path(directory)
    if not (d / "data_batch_1.bin").exists() and (d / "cifar-10-batches-bin").is_dir():
        d = d / "cifar-10-batches-bin"
    files = [d / f"data_batch_{k}.bin" for k in range(1, 6)]
    missing = [f for f in files if not f.exists()]
    if missing:
        raise FileNotFoundError(f"missing CIFAR-10 batches: {[m.name for m in missing]}")
    return files


# --------------------------------------------------------------------------
# CSV


def write_csv(ds: LabeledDataset, path_or_buf) -> None:
    """Header ``x0,...,x{d-1},label``; floats with 17 significant digits."""
    lines = [",".join([f"x{k}" for k in range(ds.dim)] + ["label"])]
    for row, lab in zip(ds.points, ds.labels):
        lines.append(",".join([format(float(v), ".17g") for v in row] + [str(int(lab))]))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, io.TextIOBase):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text)


def read_csv(path_or_buf, name: str | None = None) -> LabeledDataset:
    if isinstance(path_or_buf, io.TextIOBase):
        text = path_or_buf.read()
        name = name or "csv"
    else:
        text = Path(path_or_buf).read_text()
        name = name or Path(path_or_buf).name
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetError("empty CSV")
    header = lines[0].split(",")
    if header[-1] != "label" or any(h != f"x{k}" for k, h in enumerate(header[:-1])):
        raise DatasetError("CSV header must be x0,...,x{d-1},label")
    d = len(header) - 1
    pts = np.empty((len(lines) - 1, d))
    labels = np.empty(len(lines) - 1, dtype=np.int64)
    for r, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != d + 1:
            raise DatasetError(f"CSV row {r + 1} has {len(cells)} fields, expected {d + 1}")
        pts[r] = [float(c) for c in cells[:-1]]
        labels[r] = int(cells[-1])
    return _report_conflicts(LabeledDataset(pts, labels, name=name))


def random_finite(n: int, d: int, n_classes: int, rng: np.random.Generator,
                  low: float = -1.0, high: float = 1.0, min_gap: float = 1e-3) -> LabeledDataset:
    """Random distinct points with random labels (every class present when n allows)."""
    for _ in range(100):
        pts = rng.uniform(low, high, size=(n, d))
        if n < 2:
            break
        diff = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
        np.fill_diagonal(diff, np.inf)
        if diff.min() > min_gap:
            break
    labels = rng.integers(0, n_classes, size=n)
    labels[: min(n, n_classes)] = np.arange(min(n, n_classes))
    return LabeledDataset(pts, labels, name=f"random-{n}x{d}")


def sunset_oracle(P) -> tuple[np.ndarray, np.ndarray]:
    """Optimal labels for the sunset set and each point's distance to the boundary.

    Under L2 the boundary between the circle class and the line class is
    the parabola ``x2 = x1**2 / 4``; points above it belong to the circle.
    The distance to the parabola solves ``t**3 + (8 - 4 x2) t - 8 x1 = 0``
    for the foot point ``(t, t**2 / 4)``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    labels = np.where(P[:, 1] - P[:, 0] ** 2 / 4.0 > 0, SUNSET_A, SUNSET_B)
    dist = np.empty(P.shape[0])
    for k, (a, b) in enumerate(P):
        roots = np.roots([1.0, 0.0, 8.0 - 4.0 * b, -8.0 * a])
        t = roots.real[np.abs(roots.imag) < 1e-9]
        dist[k] = np.sqrt((t - a) ** 2 + (t * t / 4.0 - b) ** 2).min()
    return labels, dist


def make_blobs(n: int, d: int, n_classes: int, seed: int = 0, spread: float = 1.0) -> LabeledDataset:
    """Isotropic Gaussian blobs with centres drawn in a box of side ``4 * spread``."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-2.0 * spread, 2.0 * spread, size=(n_classes, d))
    labels = rng.integers(0, n_classes, size=n)
    pts = centres[labels] + rng.normal(0.0, spread, size=(n, d))
    return LabeledDataset(pts, labels, name=f"blobs-{n}x{d}")


def make_synthetic_images(n: int, d: int = 784, n_classes: int = 10, seed: int = 0) -> LabeledDataset:
    """Byte-valued class prototypes plus sparse noise, stored like image data.

    Stands in for MNIST/CIFAR-10 where those files are unavailable: the
    points are ``raw / 255`` and ``raw`` keeps the bytes, so exact
    integer-pixel distance paths are exercised.
    """
    rng = np.random.default_rng(seed)
    protos = rng.integers(0, 256, size=(n_classes, d))
    labels = rng.integers(0, n_classes, size=n)
    noise = rng.integers(-60, 61, size=(n, d)) * (rng.random((n, d)) < 0.3)
    raw = np.clip(protos[labels] + noise, 0, 255).astype(np.uint8)
    return LabeledDataset(raw / 255.0, labels, raw=raw, raw_divisor=255.0,
                          name=f"synthetic-images-{n}x{d}")
