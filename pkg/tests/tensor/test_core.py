"""Tests for tensors and precision tags."""

import numpy as np
import pytest

from discrete_energy.tensor import (
    NonFiniteTensorError,
    Precision,
    PrecisionMismatchError,
    ShapeMismatchError,
    Tensor,
    as_tensor,
)
from discrete_energy.tensor import ops as F


def test_precision_parse_aliases():
    assert Precision.parse("f32") is Precision.SINGLE
    assert Precision.parse("float64") is Precision.DOUBLE
    assert Precision.parse(np.float32) is Precision.SINGLE
    with pytest.raises(ValueError):
        Precision.parse("half")


def test_precision_codes_are_stable():
    assert Precision.SINGLE.code == 1
    assert Precision.DOUBLE.code == 2
    assert Precision.from_code(1) is Precision.SINGLE
    with pytest.raises(ValueError):
        Precision.from_code(7)


def test_tensor_infers_precision_from_dtype():
    assert Tensor(np.zeros(3, dtype=np.float32)).precision is Precision.SINGLE
    assert Tensor([1.0, 2.0]).precision is Precision.DOUBLE
    assert Tensor([1.0], "single").data.dtype == np.float32


def test_tensor_data_is_read_only():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_tensor_copies_its_input():
    source = np.array([1.0, 2.0])
    t = Tensor(source)
    source[0] = 9.0
    assert t.data[0] == 1.0


def test_non_finite_values_are_rejected():
    with pytest.raises(NonFiniteTensorError):
        Tensor([1.0, np.nan])
    with pytest.raises(NonFiniteTensorError):
        F.exp(Tensor([1000.0]))


def test_assign_checks_shape_and_finiteness():
    t = Tensor([1.0, 2.0], name="w")
    t.assign(np.array([3.0, 4.0]))
    np.testing.assert_array_equal(t.data, [3.0, 4.0])
    with pytest.raises(ShapeMismatchError):
        t.assign(np.zeros(3))
    with pytest.raises(NonFiniteTensorError):
        t.assign(np.array([np.inf, 0.0]))


def test_item_requires_single_entry():
    assert Tensor(2.5).item() == 2.5
    with pytest.raises(ShapeMismatchError):
        Tensor([1.0, 2.0]).item()


def test_mixed_precision_operands_fail():
    with pytest.raises(PrecisionMismatchError):
        F.add(Tensor([1.0], "single"), Tensor([1.0], "double"))


def test_as_tensor_reuses_matching_tensor():
    t = Tensor([1.0])
    assert as_tensor(t) is t
    assert as_tensor(t, "single") is not t


def test_operator_overloads_match_ops():
    a = Tensor([1.0, 2.0])
    b = Tensor([3.0, 5.0])
    np.testing.assert_allclose((a + b).data, [4.0, 7.0])
    np.testing.assert_allclose((a - b).data, [-2.0, -3.0])
    np.testing.assert_allclose((a * b).data, [3.0, 10.0])
    np.testing.assert_allclose((b / a).data, [3.0, 2.5])
    np.testing.assert_allclose((1.0 - a).data, [0.0, -1.0])
    np.testing.assert_allclose((2.0 / a).data, [2.0, 1.0])
    np.testing.assert_allclose((-a).data, [-1.0, -2.0])
