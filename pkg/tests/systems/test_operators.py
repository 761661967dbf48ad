"""Tests for the structure operators and their laws."""

import numpy as np
import pytest

from discrete_energy.systems import (
    GKind,
    LawFlags,
    NegativeFrictionError,
    apply_G,
    build_custom,
    build_D,
    build_D2,
    build_S,
    build_SminusR,
    check_laws,
    dense,
    gspec_from_descriptor,
    split_operator,
)
from discrete_energy.tensor import ShapeMismatchError, Tensor, grad
from discrete_energy.tensor import ops as F


def test_symplectic_matrix_layout():
    np.testing.assert_array_equal(dense(build_S(1)), [[0.0, 1.0], [-1.0, 0.0]])
    matrix = dense(build_S(2))
    np.testing.assert_array_equal(matrix[:2, 2:], np.eye(2))
    np.testing.assert_array_equal(matrix[2:, :2], -np.eye(2))


def test_damped_operator_subtracts_friction_on_momenta():
    matrix = dense(build_SminusR(2, [0.1, 0.3]))
    np.testing.assert_allclose(np.diag(matrix)[2:], [-0.1, -0.3])
    np.testing.assert_allclose(np.diag(matrix)[:2], [0.0, 0.0])


def test_negative_friction_is_rejected():
    with pytest.raises(NegativeFrictionError):
        build_SminusR(1, -0.1)


def test_central_difference_matrix():
    matrix = dense(build_D(5, 0.5))
    assert matrix[0, 1] == pytest.approx(1.0)
    assert matrix[0, 4] == pytest.approx(-1.0)
    assert matrix[0, 0] == 0.0


def test_grid_operators_validate_arguments():
    with pytest.raises(ValueError):
        build_D(0, 0.1)
    with pytest.raises(ValueError):
        build_D2(8, 0.0)
    with pytest.raises(ValueError):
        build_S(0)


@pytest.mark.parametrize("n_points", [5, 16, 64])
def test_structured_apply_matches_dense(n_points, rng):
    for g in (build_D(n_points, 0.1), build_D2(n_points, 0.1)):
        x = rng.standard_normal(n_points)
        matrix = dense(g)
        structured = apply_G(g, Tensor(x)).data
        expected = matrix @ x
        assert np.max(np.abs(structured - expected)) <= 1e-13 * max(1.0, np.max(np.abs(expected)))


def test_apply_g_on_batches(rng):
    g = build_SminusR(2, 0.2)
    x = rng.standard_normal((3, 4))
    np.testing.assert_allclose(apply_G(g, Tensor(x)).data, x @ dense(g).T, rtol=1e-14)


def test_apply_g_checks_dimension():
    with pytest.raises(ShapeMismatchError):
        apply_G(build_S(1), Tensor(np.ones(3)))


def test_declared_laws():
    assert check_laws(build_S(3), seed=1).ok
    assert check_laws(build_D(32, 0.2), seed=1).ok
    assert check_laws(build_D2(32, 0.2), seed=1).ok
    assert check_laws(build_SminusR(2, 0.5), seed=1).ok


def test_law_violations_are_measured():
    s_report = check_laws(build_S(2), seed=3)
    assert s_report.skew_violation <= 1e-13
    d2_report = check_laws(build_D2(20, 0.1), seed=3)
    assert d2_report.neg_semidef_violation <= 1e-12
    assert d2_report.mass_kernel_violation <= 1e-13


def test_custom_operator_laws_are_checked_not_trusted():
    claimed = build_custom(np.array([[1.0, 0.0], [0.0, 1.0]]), LawFlags(skew=True))
    report = check_laws(claimed, seed=0)
    assert not report.ok
    assert not report.skew_holds


def test_custom_operator_must_be_square():
    with pytest.raises(ShapeMismatchError):
        build_custom(np.ones((2, 3)), LawFlags())


def test_split_operator_parts(rng):
    matrix = rng.standard_normal((4, 4))
    sym, skew = split_operator(matrix)
    np.testing.assert_allclose(sym + skew, matrix)
    np.testing.assert_allclose(sym, sym.T)
    np.testing.assert_allclose(skew, -skew.T)


def test_split_of_forward_difference_gives_central_and_laplacian():
    n, dx = 10, 0.3
    forward = (np.roll(np.eye(n), 1, axis=1) - np.eye(n)) / dx
    sym, skew = split_operator(forward)
    np.testing.assert_allclose(skew, dense(build_D(n, dx)), atol=1e-14)
    np.testing.assert_allclose(sym, 0.5 * dx * dense(build_D2(n, dx)), atol=1e-13)


def test_learnable_friction_is_differentiable_and_projected():
    g = build_SminusR(1, 0.0, learnable=True)
    assert g.parameters() == [g.friction]
    x = Tensor([0.5, 2.0])
    _, (gf,) = grad(lambda f: F.reduce_sum(apply_G(g, x)), [g.friction])
    assert gf.data[0] == pytest.approx(-2.0)
    g.friction.assign(np.array([-0.3]))
    g.project()
    assert g.friction.data[0] == 0.0


def test_descriptor_round_trip():
    for g in (build_S(2), build_SminusR(1, 0.1), build_D(8, 0.2), build_D2(8, 0.2)):
        rebuilt = gspec_from_descriptor(g.descriptor())
        assert rebuilt.kind is g.kind
        np.testing.assert_allclose(dense(rebuilt), dense(g))
    custom = build_custom(np.array([[0.0, 2.0], [-2.0, 0.0]]), LawFlags(skew=True))
    assert gspec_from_descriptor(custom.descriptor()).kind is GKind.CUSTOM
