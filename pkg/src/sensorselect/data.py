"""Inputs for the solvers: random candidates, snapshot ingestion, POD
reduction, cross-validation splits, and reconstruction scoring.

Random matrices come from the Philox counter-based generator keyed as
(seed << 64) | trial, so every trial is an independent, platform-portable
substream and reruns with the same seed reproduce bitwise.

Snapshot files are either CSV (rows = locations, columns = snapshots, one
optional header line) or a flat binary: 8-byte magic ``SNAPMAT1``, two
little-endian uint64 (n, m), then n*m column-major float64 values.
"""

import os
import warnings
from dataclasses import dataclass

import numpy as np

from .core import estimate_latent, select_rows
from .errors import IngestionError, InvalidParameterError

BINARY_MAGIC = b"SNAPMAT1"


@dataclass(frozen=True)
class RandomProblemSpec:
    n: int
    r: int
    seed: int
    trials: int = 1

    def __post_init__(self):
        if self.n < 1 or self.r < 1 or self.trials < 1:
            raise InvalidParameterError("n, r, trials must be positive")


def trial_rng(seed, trial):
    """Philox stream for one trial; distinct per (seed, trial)."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(trial)))


def random_candidates(spec):
    """`trials` independent n x r standard-normal candidate matrices."""
    return [
        trial_rng(spec.seed, t).standard_normal((spec.n, spec.r))
        for t in range(spec.trials)
    ]


@dataclass
class SnapshotDataset:
    """n x m data matrix (columns are snapshots) with surviving-row mapping."""

    data: np.ndarray
    location_map: np.ndarray = None  # original row index per kept row

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise IngestionError("snapshot data must be a 2-D matrix")
        if not np.all(np.isfinite(self.data)):
            raise IngestionError("snapshot data contains non-finite entries")
        if self.location_map is None:
            self.location_map = np.arange(self.data.shape[0])
        else:
            self.location_map = np.asarray(self.location_map, dtype=int)
            if self.location_map.shape[0] != self.data.shape[0]:
                raise IngestionError("location map length must equal row count")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]


def _drop_invalid_rows(raw):
    finite = np.all(np.isfinite(raw), axis=1)
    if not finite.any():
        raise IngestionError("every row contains non-finite entries")
    return SnapshotDataset(data=raw[finite], location_map=np.flatnonzero(finite))


def load_snapshots(path, fmt=None):
    """Read a snapshot matrix, dropping rows with any non-finite entry.

    fmt is "csv" or "binary"; inferred from the extension when omitted
    (.csv -> csv, anything else -> binary).
    """
    if not os.path.exists(path):
        raise IngestionError("no such snapshot file: %s" % path)
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "binary"
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "binary":
        return _load_binary(path)
    raise InvalidParameterError("unknown snapshot format %r" % (fmt,))


def _load_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        fh.seek(0)
        skip = 0
        try:
            [float(tok) for tok in first.strip().split(",") if tok.strip()]
        except ValueError:
            skip = 1  # non-numeric first line: treat as header
        try:
            raw = np.genfromtxt(fh, delimiter=",", skip_header=skip)
        except Exception as exc:
            raise IngestionError("malformed CSV %s: %s" % (path, exc)) from exc
    if raw.ndim == 1:
        raw = raw[None, :]
    if raw.size == 0:
        raise IngestionError("empty snapshot file: %s" % path)
    return _drop_invalid_rows(np.atleast_2d(raw))


def _load_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BINARY_MAGIC:
            raise IngestionError("bad magic in %s" % path)
        header = np.fromfile(fh, dtype="<u8", count=2)
        if header.size != 2:
            raise IngestionError("truncated header in %s" % path)
        n, m = (int(v) for v in header)
        flat = np.fromfile(fh, dtype="<f8", count=n * m)
        if flat.size != n * m:
            raise IngestionError(
                "expected %d values in %s, found %d" % (n * m, path, flat.size)
            )
    raw = flat.reshape((n, m), order="F")
    return _drop_invalid_rows(raw)


def save_snapshots(path, data, fmt=None):
    """Write a snapshot matrix in the CSV or flat-binary on-disk format."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise InvalidParameterError("snapshot data must be 2-D")
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "binary"
    if fmt == "csv":
        np.savetxt(path, data, delimiter=",", fmt="%.17g")
    elif fmt == "binary":
        n, m = data.shape
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            np.array([n, m], dtype="<u8").tofile(fh)
            data.astype("<f8").ravel(order="F").tofile(fh)
    else:
        raise InvalidParameterError("unknown snapshot format %r" % (fmt,))


@dataclass
class PodBasis:
    """Rank-r truncated SVD of the snapshot matrix."""

    modes: np.ndarray            # n x r, orthonormal columns
    singular_values: np.ndarray  # length r, non-increasing
    amplitudes: np.ndarray       # r x m, S_{1:r} V_{1:r}^T


def pod_reduce(dataset, r, center=False):
    """Best rank-r approximation of the snapshot matrix by truncated SVD.

    center subtracts the row-wise temporal mean first (off by default: the
    reduction is applied to the bare data matrix).
    """
    X = dataset.data if isinstance(dataset, SnapshotDataset) else np.asarray(dataset, float)
    n, m = X.shape
    if r < 1 or r > min(n, m):
        raise InvalidParameterError("rank %d outside [1, %d]" % (r, min(n, m)))
    if center:
        X = X - X.mean(axis=1, keepdims=True)
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    return PodBasis(
        modes=u[:, :r],
        singular_values=s[:r].copy(),
        amplitudes=s[:r, None] * vt[:r],
    )


@dataclass(frozen=True)
class CvSplit:
    fold_count: int
    fold_assignments: np.ndarray  # snapshot index -> fold id, contiguous blocks

    def test_indices(self, fold):
        return np.flatnonzero(self.fold_assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.fold_assignments != fold)


def make_cv_splits(m, fold_count=5):
    """Contiguous time-segment folds; remainder spread over the first folds."""
    if fold_count < 1 or fold_count > m:
        raise InvalidParameterError("fold count %d outside [1, %d]" % (fold_count, m))
    base, extra = divmod(m, fold_count)
    sizes = [base + (1 if i < extra else 0) for i in range(fold_count)]
    assignments = np.repeat(np.arange(fold_count), sizes)
    return CvSplit(fold_count=fold_count, fold_assignments=assignments)


def reconstruction_error(basis, selection, test, return_excluded=False):
    """Mean relative L2 error of sensor-based reconstruction on test data.

    Each test snapshot is reduced to its selected entries, the latent
    amplitudes are estimated by least squares on the selected mode rows, and
    the snapshot is rebuilt through the full mode basis.  Zero-norm snapshots
    are excluded from the average; the exclusion count is reported.
    """
    X = test.data if isinstance(test, SnapshotDataset) else np.asarray(test, float)
    C = select_rows(basis.modes, selection)
    idx = np.array(selection.indices)
    norms = np.linalg.norm(X, axis=0)
    keep = norms > 0
    excluded = int(np.count_nonzero(~keep))
    if excluded:
        warnings.warn("%d zero-norm snapshots excluded from scoring" % excluded)
    Y = X[idx][:, keep]
    # Shared least-squares factorization across snapshots.
    Z = np.column_stack([estimate_latent(C, Y[:, j]) for j in range(Y.shape[1])]) \
        if Y.shape[1] else np.zeros((basis.modes.shape[1], 0))
    Xhat = basis.modes @ Z
    rel = np.linalg.norm(Xhat - X[:, keep], axis=0) / norms[keep]
    err = float(rel.mean()) if rel.size else 0.0
    if return_excluded:
        return err, excluded
    return err
