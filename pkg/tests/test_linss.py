import numpy as np
import pytest

from looptune.errors import (DimensionMismatch, FrequencyAtPole,
                             SingularAlgebraicJacobian)
from looptune.linss import DaeJacobians, StateSpaceModel, reduce_dae, transfer_at


def random_jacobians(rng, n=3, m=2, p=2, q=2):
    """Well-conditioned blocks: gy gets a dominant diagonal, fx a stable shift."""
    j = DaeJacobians(
        fx=rng.normal(size=(n, n)) - (n + 1) * np.eye(n),
        fy=rng.normal(size=(n, m)),
        fu=rng.normal(size=(n, p)),
        gx=rng.normal(size=(m, n)),
        gy=rng.normal(size=(m, m)) + 3.0 * m * np.eye(m),
        gu=rng.normal(size=(m, p)),
        hx=rng.normal(size=(q, n)),
        hy=rng.normal(size=(q, m)),
        hu=rng.normal(size=(q, p)),
    )
    return j


def dc_gain_direct(j):
    """Independent oracle: solve the full linear DAE steady state directly."""
    n = j.n_states
    lhs = np.block([[j.fx, j.fy], [j.gx, j.gy]])
    rhs = -np.vstack([j.fu, j.gu])
    sol = np.linalg.solve(lhs, rhs)
    return j.hx @ sol[:n] + j.hy @ sol[n:] + j.hu


def test_reduce_without_algebraic_coupling():
    rng = np.random.default_rng(1)
    fx = rng.normal(size=(3, 3))
    fu = rng.normal(size=(3, 2))
    hx = rng.normal(size=(2, 3))
    hu = rng.normal(size=(2, 2))
    j = DaeJacobians(fx=fx, fy=np.zeros((3, 2)), fu=fu,
                     gx=rng.normal(size=(2, 3)), gy=np.eye(2),
                     gu=rng.normal(size=(2, 2)),
                     hx=hx, hy=np.zeros((2, 2)), hu=hu)
    ss = reduce_dae(j)
    assert np.array_equal(ss.A, fx)
    assert np.array_equal(ss.B, fu)
    assert np.array_equal(ss.C, hx)
    assert np.array_equal(ss.D, hu)


def test_reduce_scalar_hand_case():
    # fx=-1, fy=1, gx=2, gy=-1: A = -1 - (1)(-1)^-1(2) = 1
    j = DaeJacobians(fx=[[-1.0]], fy=[[1.0]], fu=[[1.0]],
                     gx=[[2.0]], gy=[[-1.0]], gu=[[0.0]],
                     hx=[[1.0]], hy=[[0.0]], hu=[[0.0]])
    ss = reduce_dae(j)
    assert ss.A[0, 0] == 1.0
    assert ss.B[0, 0] == 1.0
    assert ss.C[0, 0] == 1.0
    assert ss.D[0, 0] == 0.0


def test_singular_algebraic_jacobian():
    j = DaeJacobians(fx=[[-1.0]], fy=[[1.0]], fu=[[1.0]],
                     gx=[[2.0]], gy=[[0.0]], gu=[[0.0]],
                     hx=[[1.0]], hy=[[0.0]], hu=[[0.0]])
    with pytest.raises(SingularAlgebraicJacobian):
        reduce_dae(j)


def test_dimension_mismatch_names_block():
    with pytest.raises(DimensionMismatch, match="gx"):
        DaeJacobians(fx=np.eye(2), fy=np.zeros((2, 1)), fu=np.zeros((2, 1)),
                     gx=np.zeros((1, 3)), gy=np.eye(1), gu=np.zeros((1, 1)),
                     hx=np.zeros((1, 2)), hy=np.zeros((1, 1)),
                     hu=np.zeros((1, 1)))


def test_transfer_at_first_order_lag():
    ss = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    assert transfer_at(ss, 0.0)[0, 0] == pytest.approx(1.0)
    val = transfer_at(ss, 1j)[0, 0]
    assert val == pytest.approx(0.5 - 0.5j)


def test_transfer_at_pole_raises():
    integrator = StateSpaceModel([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(FrequencyAtPole):
        transfer_at(integrator, 0.0)


def test_dc_gain_matches_direct_dae_solve():
    rng = np.random.default_rng(7)
    for _ in range(50):
        j = random_jacobians(rng)
        ss = reduce_dae(j)
        got = transfer_at(ss, 0.0).real
        want = dc_gain_direct(j)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-9 * np.abs(want).max())


def test_conjugate_symmetry():
    rng = np.random.default_rng(3)
    j = random_jacobians(rng)
    ss = reduce_dae(j)
    for s in (0.3 + 1.2j, -0.1 + 0.5j, 2.0 + 0.01j):
        assert np.allclose(transfer_at(ss, np.conj(s)),
                           np.conj(transfer_at(ss, s)), rtol=1e-12)


def test_algebraic_permutation_invariance():
    rng = np.random.default_rng(11)
    j = random_jacobians(rng, n=3, m=4, p=2, q=2)
    ss = reduce_dae(j)
    perm_var = rng.permutation(4)    # reorder algebraic variables
    perm_eq = rng.permutation(4)     # reorder algebraic equations
    j2 = DaeJacobians(
        fx=j.fx, fy=j.fy[:, perm_var], fu=j.fu,
        gx=j.gx[perm_eq], gy=j.gy[np.ix_(perm_eq, perm_var)],
        gu=j.gu[perm_eq],
        hx=j.hx, hy=j.hy[:, perm_var], hu=j.hu)
    ss2 = reduce_dae(j2)
    for name in ("A", "B", "C", "D"):
        assert np.allclose(getattr(ss, name), getattr(ss2, name),
                           rtol=1e-12, atol=1e-12)


def test_json_roundtrips():
    rng = np.random.default_rng(5)
    j = random_jacobians(rng)
    j2 = DaeJacobians.from_dict(j.to_dict())
    assert np.array_equal(j.gy, j2.gy)
    ss = reduce_dae(j, input_names=["a", "b"], output_names=["y1", "y2"])
    ss2 = StateSpaceModel.from_dict(ss.to_dict())
    assert np.array_equal(ss.A, ss2.A)
    assert ss2.input_names == ["a", "b"]


def test_empty_algebraic_block():
    rng = np.random.default_rng(9)
    fx = rng.normal(size=(2, 2))
    j = DaeJacobians(fx=fx, fy=np.zeros((2, 0)), fu=np.ones((2, 1)),
                     gx=np.zeros((0, 2)), gy=np.zeros((0, 0)),
                     gu=np.zeros((0, 1)),
                     hx=np.eye(2), hy=np.zeros((2, 0)), hu=np.zeros((2, 1)))
    ss = reduce_dae(j)
    assert np.array_equal(ss.A, fx)
