"""Measurement model, least-squares estimation, and the A-optimality criterion.

The candidate matrix U is an n x r array whose rows are potential sensor
locations expressed in the latent (modal) basis.  A selection of p rows gives
the measurement matrix C = H U, and the quality of the selection is scored by
tr((C^T C)^{-1}), the average variance of the least-squares latent estimate
under unit i.i.d. Gaussian noise.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSelectionError, SingularSystemError

# Condition numbers of C^T C above this are treated as numerically singular.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SensorSelection:
    """Ordered set of distinct candidate-row indices."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) == 0:
            raise InvalidSelectionError("selection must contain at least one index")
        if len(set(idx)) != len(idx):
            raise InvalidSelectionError("selection indices must be distinct")
        if any(i < 0 for i in idx):
            raise InvalidSelectionError("selection indices must be nonnegative")

    @property
    def p(self):
        return len(self.indices)

    def validate_for(self, n):
        if any(i >= n for i in self.indices):
            raise InvalidSelectionError(
                "selection index out of range for %d candidates" % n
            )


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. Gaussian sensor-noise level; a reporting-only scale factor."""

    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def select_rows(U, selection):
    """Measurement matrix C: the rows of U picked out by the selection."""
    U = np.asarray(U, dtype=float)
    selection.validate_for(U.shape[0])
    return U[np.array(selection.indices), :]


def estimate_latent(C, y):
    """Least-squares latent estimate (C^T C)^{-1} C^T y for a p >= r system.

    Raises SingularSystemError (carrying the condition estimate of C^T C)
    when the system is rank deficient or conditioned worse than COND_LIMIT.
    """
    C = np.asarray(C, dtype=float)
    y = np.asarray(y, dtype=float)
    p, r = C.shape
    if p < r:
        raise SingularSystemError(
            "underdetermined system: p=%d < r=%d" % (p, r), condition=np.inf
        )
    # SVD route: orthogonal, and gives the condition estimate for free.
    u, s, vt = np.linalg.svd(C, full_matrices=False)
    if s[-1] == 0.0:
        raise SingularSystemError("C^T C is singular", condition=np.inf)
    cond = (s[0] / s[-1]) ** 2
    if cond > COND_LIMIT:
        raise SingularSystemError(
            "C^T C condition %.3e exceeds limit %.1e" % (cond, COND_LIMIT),
            condition=cond,
        )
    return vt.T @ ((u.T @ y) / s)


def a_optimality(C):
    """tr((C^T C)^{-1}); +inf when the Fisher information matrix is singular.

    The infinity sentinel (rather than an exception) lets sweep loops rank
    infeasible selections last without aborting.
    """
    C = np.asarray(C, dtype=float)
    fim = C.T @ C
    vals = np.linalg.eigvalsh(fim)
    if vals[0] <= 0.0 or vals[-1] / vals[0] > COND_LIMIT:
        return np.inf
    return float(np.sum(1.0 / vals))


def decoder_trace(K):
    """tr(K K^T), the squared Frobenius norm of the decoder gain."""
    K = np.asarray(K, dtype=float)
    return float(np.sum(K * K))
