"""Datasets: loaders, synthetic generators, standardization and partitioning.

Dense format: one example per line, fields separated by comma, tab or
whitespace; an optional header row is detected by a non-numeric first field
set.  Sparse format: ``label idx:val idx:val ...`` with 1-based, strictly
increasing indices.  Labels may be {0, 1} or {-1, +1}.
"""
from dataclasses import dataclass, field, replace
import re

import numpy as np

from .errors import LabelDomainError, ParseError, PartitionError
from .rng import _as_stream


@dataclass
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, features):
        X = np.array(features, dtype=np.float64, copy=True)
        X[:, 1:] = (X[:, 1:] - self.mean) / self.std
        return X

    def invert(self, covariates):
        """Map standardized covariates (no bias column) back to original units."""
        return np.asarray(covariates) * self.std + self.mean

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["std"], dtype=np.float64),
            np.asarray(d["constant"], dtype=bool),
        )


@dataclass
class Dataset:
    """Labelled examples; ``features`` column 0 is the constant bias."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list = None
    standardization: Standardization = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (N, D) with one label per row")
        if self.features.shape[1] < 1 or not np.all(self.features[:, 0] == 1.0):
            raise ValueError("column 0 must be the constant bias")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or infinite entries")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise LabelDomainError("labels must be 0 or 1")

    @classmethod
    def from_covariates(cls, X, y, feature_names=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        bias = np.ones((X.shape[0], 1))
        return cls(np.hstack([bias, X]), y, feature_names)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        """D, including the bias column."""
        return self.features.shape[1]

    @property
    def covariates(self):
        return self.features[:, 1:]

    def subset(self, rows):
        return replace(self, features=self.features[rows], labels=self.labels[rows])

    def flipped(self):
        return replace(self, labels=1 - self.labels)


def _map_labels(raw, where):
    values = set(np.unique(raw).tolist())
    if values <= {0.0, 1.0}:
        return raw.astype(np.int64)
    if values <= {-1.0, 1.0}:
        return (raw > 0).astype(np.int64)
    raise LabelDomainError(f"{where}: labels must be in {{0,1}} or {{-1,+1}}, got {sorted(values)}")


def _split(line, delimiter):
    if delimiter is None:
        return re.split(r"[,\t ]+", line.strip())
    return [f.strip() for f in line.strip().split(delimiter)]


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_dense(path, label_column=0, delimiter=None):
    """Load a delimited table; the label column is removed and a bias column prepended."""
    rows = []
    names = None
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _split(line, delimiter)
            if not rows and names is None and not all(_is_number(f) for f in fields):
                names = fields
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise ParseError(f"expected {width} fields, found {len(fields)}", line=lineno)
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    labels = _map_labels(table[:, label_column], str(path))
    X = np.delete(table, label_column, axis=1)
    feature_names = None
    if names is not None:
        feature_names = [n for j, n in enumerate(names) if j != label_column % len(names)]
    return Dataset.from_covariates(X, labels, feature_names)


def load_sparse(path, dim_hint=None):
    """Load ``label idx:val ...`` lines (1-based indices) into a dense Dataset."""
    labels = []
    entries = []
    max_index = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", line=lineno) from None
            row = []
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected idx:val, got {tok!r}", line=lineno)
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ParseError(f"bad entry {tok!r}", line=lineno) from None
                if idx < 1:
                    raise ParseError(f"index {idx} is not 1-based", line=lineno)
                if idx <= prev:
                    raise ParseError("indices must be strictly increasing", line=lineno)
                if dim_hint is not None and idx > dim_hint:
                    raise ParseError(f"index {idx} exceeds dimension {dim_hint}", line=lineno)
                prev = idx
                row.append((idx, val))
            max_index = max(max_index, prev)
            entries.append(row)
    if not labels:
        raise ParseError(f"{path}: no data rows")
    V = dim_hint if dim_hint is not None else max_index
    X = np.zeros((len(labels), V))
    for i, row in enumerate(entries):
        for idx, val in row:
            X[i, idx - 1] = val
    return Dataset.from_covariates(X, _map_labels(np.asarray(labels), str(path)))


def save_dense(data, path, delimiter=","):
    """Write label followed by covariates; floats use shortest round-trip repr."""
    names = data.feature_names or [f"x{j}" for j in range(1, data.dim)]
    with open(path, "w") as fh:
        fh.write(delimiter.join(["label", *names]) + "\n")
        for yi, xi in zip(data.labels, data.covariates):
            fh.write(delimiter.join([str(int(yi)), *(repr(float(v)) for v in xi)]) + "\n")


def save_sparse(data, path):
    with open(path, "w") as fh:
        for yi, xi in zip(data.labels, data.covariates):
            items = [f"{j + 1}:{float(v)!r}" for j, v in enumerate(xi) if v != 0.0]
            fh.write(" ".join(["+1" if yi == 1 else "-1", *items]) + "\n")


def spiral_arms(n_per_class, turns=1.5, rng=None):
    """Noise-free spiral arms at evenly drawn angles; class 1 is the point reflection."""
    gen = _as_stream(rng if rng is not None else 0)
    t = np.sort(gen.uniform(np.pi / 2, np.pi / 2 + 2 * np.pi * turns, size=n_per_class))
    radius = t / (np.pi / 2 + 2 * np.pi * turns)
    arm = np.column_stack([radius * np.cos(t), radius * np.sin(t)])
    return arm, -arm


def make_two_spirals(n_per_class=200, noise_sd=0.02, turns=1.5, rng=None):
    """Two interleaved spirals rescaled to unit maximum radius, with isotropic noise."""
    if n_per_class < 1 or noise_sd < 0 or not turns > 0:
        raise ValueError("need n_per_class >= 1, noise_sd >= 0, turns > 0")
    gen = _as_stream(rng if rng is not None else 0)
    arm0, arm1 = spiral_arms(n_per_class, turns, gen)
    X = np.vstack([arm0, arm1])
    if noise_sd > 0:
        X = X + noise_sd * gen.standard_normal(X.shape)
    y = np.repeat([0, 1], n_per_class)
    return Dataset.from_covariates(X, y, ["x1", "x2"])


def make_gaussians(n_per_class=100, separation=4.0, sd=1.0, dim=2, rng=None):
    """Two isotropic Gaussian clouds whose means differ by ``separation`` along x1."""
    gen = _as_stream(rng if rng is not None else 0)
    shift = np.zeros(dim)
    shift[0] = separation / 2.0
    X0 = gen.standard_normal((n_per_class, dim)) * sd - shift
    X1 = gen.standard_normal((n_per_class, dim)) * sd + shift
    y = np.repeat([0, 1], n_per_class)
    return Dataset.from_covariates(np.vstack([X0, X1]), y, [f"x{j}" for j in range(1, dim + 1)])


def standardize(data, params=None):
    """Scale non-bias columns to zero mean and unit standard deviation.

    Constant columns are left unchanged and flagged.  Passing stored
    ``params`` applies an earlier fit, e.g. to a test set.
    """
    if params is None:
        if data.n < 2:
            raise ValueError("standardize needs at least two rows")
        Z = data.covariates
        mean = Z.mean(axis=0)
        std = Z.std(axis=0)
        constant = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
        mean = np.where(constant, 0.0, mean)
        std = np.where(constant, 1.0, std)
        params = Standardization(mean, std, constant)
    return replace(data, features=params.apply(data.features), standardization=params)


def partition(data, fold_index, stride):
    """Rows fold_index-1, fold_index-1+stride, ... train; the rest test (1-based fold_index)."""
    if not 1 <= fold_index <= stride <= data.n:
        raise PartitionError("need 1 <= fold_index <= stride <= N")
    mask = np.zeros(data.n, dtype=bool)
    mask[fold_index - 1 :: stride] = True
    if mask.all() or not mask.any():
        raise PartitionError("partition leaves an empty train or test set")
    return data.subset(mask), data.subset(~mask)


def train_test_split(data, test_fraction, rng):
    gen = _as_stream(rng)
    perm = gen.permutation(data.n)
    n_test = int(round(test_fraction * data.n))
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))
