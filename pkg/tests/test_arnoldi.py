import numpy as np
import pytest

from kryrec.arnoldi import (
    ArnoldiBreakdownError,
    OperatorHandle,
    arnoldi,
    arnoldi_relation_residual,
    as_operator,
)
from kryrec.core import DimensionError, SparseMatrix


def random_sparse(rng, n, shift=0.0):
    return SparseMatrix.from_dense(rng.standard_normal((n, n)) + shift * np.eye(n))


def test_identity_breaks_down_at_step_one():
    r = np.array([2.0, 1.0, 2.0]) / 3.0
    dec = arnoldi(SparseMatrix.identity(3), r, 3)
    assert dec.breakdown == 1
    assert dec.j == 1
    assert dec.v.shape == (3, 1)
    assert np.allclose(dec.hbar, [[1.0], [0.0]])
    assert np.allclose(dec.v[:, 0], r)


def test_two_by_two_hand_values():
    a = SparseMatrix.diagonal([1.0, 2.0])
    r = np.array([1.0, 1.0]) / np.sqrt(2)
    dec = arnoldi(a, r, 2)
    assert dec.hbar[0, 0] == pytest.approx(1.5)
    assert dec.hbar[1, 0] == pytest.approx(0.5)
    assert dec.hbar[0, 1] == pytest.approx(0.5)
    assert dec.hbar[1, 1] == pytest.approx(1.5)
    # grade 2: the process terminates exactly
    assert dec.breakdown == 2


@pytest.mark.parametrize("seed", range(10))
def test_orthonormality_and_relation(seed):
    rng = np.random.default_rng(seed)
    n, m = 100, 20
    a = random_sparse(rng, n)
    r = rng.standard_normal(n)
    dec = arnoldi(a, r, m)
    gram = dec.v.conj().T @ dec.v
    assert np.max(np.abs(gram - np.eye(dec.v.shape[1]))) <= 1e-12
    assert arnoldi_relation_residual(dec, a) <= 1e-12 * a.frobenius_norm()


@pytest.mark.parametrize("seed", range(5))
def test_orthonormality_without_reorth(seed):
    rng = np.random.default_rng(seed)
    n, m = 200, 50
    a = random_sparse(rng, n)
    dec = arnoldi(a, rng.standard_normal(n), m, reorth=False)
    gram = dec.v.conj().T @ dec.v
    assert np.max(np.abs(gram - np.eye(dec.v.shape[1]))) <= 1e-8


def test_grade_detection_on_constructed_operator():
    # minimal polynomial degree 3 w.r.t. a vector touching 3 eigenspaces
    a = SparseMatrix.diagonal([1.0, 2.0, 3.0, 3.0])
    r = np.array([1.0, 1.0, 1.0, 0.0])
    dec = arnoldi(a, r, 4)
    assert dec.breakdown == 3
    assert np.all(dec.hbar[-1, :] == 0.0)


def test_zero_start_vector_rejected():
    with pytest.raises(ArnoldiBreakdownError):
        arnoldi(SparseMatrix.identity(2), np.zeros(2), 2)


def test_bad_cycle_length_rejected():
    with pytest.raises(ValueError):
        arnoldi(SparseMatrix.identity(2), np.ones(2), 0)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionError):
        arnoldi(SparseMatrix.identity(3), np.ones(2), 2)


def test_complex_operator():
    rng = np.random.default_rng(3)
    n = 30
    dense = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = SparseMatrix.from_dense(dense)
    dec = arnoldi(a, rng.standard_normal(n), 8)
    gram = dec.v.conj().T @ dec.v
    assert np.max(np.abs(gram - np.eye(dec.v.shape[1]))) <= 1e-12
    assert arnoldi_relation_residual(dec, a) <= 1e-12 * a.frobenius_norm()


class TestRelationResidual:
    def test_valid_decomposition_is_tiny(self):
        rng = np.random.default_rng(0)
        a = random_sparse(rng, 40)
        dec = arnoldi(a, rng.standard_normal(40), 10)
        assert arnoldi_relation_residual(dec, a) <= 1e-12 * a.frobenius_norm()

    def test_zeroed_hessenberg_gives_av_norm(self):
        rng = np.random.default_rng(1)
        a = random_sparse(rng, 40)
        dec = arnoldi(a, rng.standard_normal(40), 6)
        dec.hbar[:] = 0.0
        av = np.column_stack([a.to_dense() @ dec.basis[:, i] for i in range(dec.j)])
        assert arnoldi_relation_residual(dec, a) == pytest.approx(np.linalg.norm(av))

    def test_perturbation_shows_up_linearly(self):
        rng = np.random.default_rng(2)
        a = random_sparse(rng, 40)
        dec = arnoldi(a, rng.standard_normal(40), 6)
        delta = 1e-3
        dec.hbar[2, 3] += delta
        assert arnoldi_relation_residual(dec, a) == pytest.approx(delta, rel=1e-6)


class TestOperatorHandle:
    def test_counts_applications(self):
        a = SparseMatrix.identity(4)
        op = as_operator(a)
        op(np.ones(4))
        op(np.ones(4))
        assert op.matvec_count == 2

    def test_callable_wrapper(self):
        op = OperatorHandle(3, lambda v: 2.0 * v)
        dec = arnoldi(op, np.array([1.0, 0.0, 0.0]), 3)
        assert dec.breakdown == 1
        assert dec.hbar[0, 0] == pytest.approx(2.0)

    def test_as_operator_passthrough(self):
        op = OperatorHandle(2, lambda v: v)
        assert as_operator(op) is op

    def test_wrapped_apply_is_linear(self):
        # spot check, not enforced at runtime
        rng = np.random.default_rng(0)
        op = as_operator(random_sparse(rng, 20))
        x, y = rng.standard_normal(20), rng.standard_normal(20)
        assert np.allclose(op(x + 2.0 * y), op(x) + 2.0 * op(y))
