"""Sparse and dense numeric kernels shared by every solver module.

Vectors and dense matrices are plain numpy arrays (complex or real double
precision); :class:`SparseMatrix` is a validated CSR container and the only
large operator that is ever multiplied.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

__all__ = [
    "DimensionError",
    "SingularMatrixError",
    "RankDeficientError",
    "EigenSolveError",
    "SparseMatrix",
    "GLOBAL_STATS",
    "spmv",
    "dense_solve",
    "dense_lstsq",
    "small_eig",
    "check_finite",
]

# |pivot| below PIVOT_RTOL * ||M||_F declares a factorization singular; matches
# the breakdown thresholds used by the solver layer.
PIVOT_RTOL = 1e-14

# Largest dense eigenproblem accepted by small_eig.
SMALL_EIG_CAP = 512


class DimensionError(ValueError):
    """Operand shapes are inconsistent."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A dense factorization hit an (effectively) zero pivot."""

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = pivot_index
        super().__init__(message or f"singular matrix: zero pivot at index {pivot_index}")


class RankDeficientError(np.linalg.LinAlgError):
    """A least-squares matrix does not have full column rank."""


class EigenSolveError(np.linalg.LinAlgError):
    """The dense eigensolver failed to converge."""


class _Stats:
    """Process-wide matvec tally.

    Per-solve attribution goes through ``OperatorHandle`` counters; this is
    just the global odometer.
    """

    def __init__(self):
        self.matvecs = 0

    def reset(self):
        self.matvecs = 0


GLOBAL_STATS = _Stats()


def check_finite(name: str, a: np.ndarray) -> np.ndarray:
    """Reject NaN/Inf entries on construction of a vector or matrix."""
    a = np.asarray(a)
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_scalar_array(values, name="values") -> np.ndarray:
    a = np.asarray(values)
    if np.iscomplexobj(a):
        return a.astype(np.complex128, copy=False)
    return a.astype(np.float64, copy=False)


@dataclass
class SparseMatrix:
    """Sparse operator in compressed sparse row form.

    ``row_offsets`` has length ``n_rows + 1``, is nondecreasing and brackets
    the ``col_indices``/``values`` slice of each row. Values may be real or
    complex double precision.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_offsets = np.asarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(self.col_indices, dtype=np.int64)
        self.values = check_finite("values", _as_scalar_array(self.values))
        if self.row_offsets.shape != (self.n_rows + 1,):
            raise DimensionError(
                f"row_offsets must have length n_rows+1={self.n_rows + 1}, "
                f"got {self.row_offsets.shape[0]}"
            )
        if self.row_offsets[0] != 0 or np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be nondecreasing")
        nnz = int(self.row_offsets[-1])
        if self.col_indices.shape != (nnz,) or self.values.shape != (nnz,):
            raise DimensionError("col_indices/values length must match row_offsets[-1]")
        if nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols):
            raise ValueError("col_indices out of range")
        self._csr = scipy.sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols),
        )

    # ---- constructors -------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        """Build from triplets; duplicate entries are summed."""
        m = scipy.sparse.coo_matrix(
            (_as_scalar_array(vals), (rows, cols)), shape=shape
        ).tocsr()
        m.sum_duplicates()
        return cls(shape[0], shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        m = scipy.sparse.csr_matrix(np.asarray(a))
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n)
        return cls.from_coo(idx, idx, np.ones(n), (n, n))

    @classmethod
    def diagonal(cls, d) -> "SparseMatrix":
        d = np.asarray(d)
        idx = np.arange(len(d))
        return cls.from_coo(idx, idx, d, (len(d), len(d)))

    # ---- queries -------------------------------------------------------

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def dtype(self):
        return self.values.dtype

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()


def spmv(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product ``a @ x`` per CSR row semantics.

    Counts one matvec in :data:`GLOBAL_STATS`.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != a.n_cols:
        raise DimensionError(
            f"operand length {x.shape} does not match n_cols={a.n_cols}"
        )
    GLOBAL_STATS.matvecs += 1
    return a._csr @ x


def dense_solve(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve the small square system ``m @ y = b`` by partial-pivoted LU.

    Raises :class:`SingularMatrixError` (carrying the pivot index) when a
    pivot falls below ``PIVOT_RTOL * ||m||_F``.
    """
    m = np.asarray(m)
    b = np.asarray(b)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected square matrix, got {m.shape}")
    if b.shape[0] != m.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} != {m.shape[0]}")
    if m.shape[0] == 0:
        return np.zeros(0, dtype=np.result_type(m.dtype, b.dtype, np.float64))
    scale = np.linalg.norm(m)
    if scale == 0.0:
        raise SingularMatrixError(0, "singular matrix: all entries zero")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.abs(np.diag(lu))
    bad = np.where(diag < PIVOT_RTOL * scale)[0]
    if bad.size:
        raise SingularMatrixError(int(bad[0]))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def dense_lstsq(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``argmin_z ||b - m @ z||_2`` via a reduced QR factorization.

    ``m`` must be tall (or square) with full column rank; rank deficiency is
    detected on the diagonal of R.
    """
    m = np.asarray(m)
    b = np.asarray(b)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionError(f"expected tall matrix, got {m.shape}")
    if b.shape[0] != m.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} != {m.shape[0]}")
    if m.shape[1] == 0:
        return np.zeros(0, dtype=np.result_type(m.dtype, b.dtype, np.float64))
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(m)
    if np.any(diag < PIVOT_RTOL * scale):
        raise RankDeficientError(
            f"rank-deficient least-squares matrix {m.shape}: "
            f"min |R_ii| = {diag.min():.3e}"
        )
    return scipy.linalg.solve_triangular(r, q.conj().T @ b, check_finite=False)


def small_eig(h: np.ndarray):
    """All eigenpairs of a small dense matrix.

    Returns ``(values, vectors)`` with unit-norm eigenvector columns, sorted
    as returned by the QR algorithm (no ordering guarantee).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected square matrix, got {h.shape}")
    if h.shape[0] > SMALL_EIG_CAP:
        raise DimensionError(
            f"eigenproblem size {h.shape[0]} exceeds cap {SMALL_EIG_CAP}"
        )
    if h.shape[0] == 0:
        return np.zeros(0, dtype=np.complex128), np.zeros((0, 0), dtype=np.complex128)
    try:
        values, vectors = scipy.linalg.eig(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise EigenSolveError(str(exc)) from exc
    return values, vectors
