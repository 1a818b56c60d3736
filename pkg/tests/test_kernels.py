import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skit.errors import DegenerateInputError, InputError
from skit.kernels import KernelSpec, eval_kernel, gram_matrix, median_heuristic

finite = st.floats(-50, 50, allow_nan=False)


def test_rbf_identity_is_one():
    assert eval_kernel(KernelSpec("rbf", 0.25), [1.7], [1.7]) == 1.0


def test_linear_is_dot_product():
    assert eval_kernel(KernelSpec("linear"), [2, 0], [3, 1]) == 6.0


def test_rbf_value(golden):
    val = eval_kernel(KernelSpec("rbf", 0.25), [0.0], [2.0])
    assert val == pytest.approx(golden["kernels"]["rbf_0_2"], rel=1e-15)
    assert val == pytest.approx(0.367879, abs=1e-6)


def test_laplace_uses_l1_distance():
    assert eval_kernel(KernelSpec("laplace", 0.5), [0, 0], [1, -2]) == pytest.approx(math.exp(-1.5))


def test_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(KernelSpec(), [1.0, 2.0], [1.0])


@pytest.mark.parametrize("kind,bw", [("rbf", 0.0), ("laplace", -1.0), ("rbf", float("nan")), ("cosine", 1.0)])
def test_bad_spec(kind, bw):
    with pytest.raises(InputError):
        KernelSpec(kind, bw)


def test_gram_single_point():
    assert gram_matrix(KernelSpec("rbf", 3.0), [[0.4]]).tolist() == [[1.0]]


def test_gram_two_points(golden):
    np.testing.assert_allclose(gram_matrix(KernelSpec("rbf", 0.25), [0.0, 2.0]), golden["kernels"]["gram_0_2"], rtol=1e-15)


def test_gram_linear():
    assert gram_matrix(KernelSpec("linear"), [[1.0], [-1.0]]).tolist() == [[1, -1], [-1, 1]]


def test_gram_empty():
    with pytest.raises(InputError):
        gram_matrix(KernelSpec(), np.empty((0, 1)))


@pytest.mark.parametrize(
    "points,expected",
    [([0.0, 2.0], 0.125), ([0.0, 1.0, 2.0], 0.5), ([[0, 0], [3, 4]], 1 / 50)],
)
def test_median_heuristic(points, expected):
    assert median_heuristic(points) == pytest.approx(expected)


def test_median_heuristic_even_count_averages():
    # distances {1, 2, 3, 1, 2, 1} -> sorted 1,1,1,2,2,3 -> median 1.5
    assert median_heuristic([0.0, 1.0, 2.0, 3.0]) == pytest.approx(1 / (2 * 1.5**2))


@pytest.mark.parametrize("points", [[0.0, 0.0], [[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]])
def test_median_heuristic_degenerate(points):
    with pytest.raises(DegenerateInputError):
        median_heuristic(points)


def test_median_heuristic_needs_two_points():
    with pytest.raises(InputError):
        median_heuristic([1.0])


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["rbf", "laplace"]), st.floats(0.01, 10), arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
def test_bounded_kernels_in_unit_interval(kind, bw, x, xp):
    spec = KernelSpec(kind, bw)
    v = eval_kernel(spec, x, xp)
    assert 0.0 <= v <= 1.0
    assert eval_kernel(spec, x, x) == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, (12, 2), elements=finite), st.floats(0.01, 5))
def test_gram_bitwise_symmetric(points, bw):
    k = gram_matrix(KernelSpec("rbf", bw), points)
    assert np.array_equal(k, k.T)
    assert np.all(np.diag(k) == 1.0)


def test_gram_psd(rng):
    for _ in range(20):
        pts = rng.normal(size=(20, 2))
        k = gram_matrix(KernelSpec("rbf", rng.uniform(0.1, 3)), pts)
        assert np.linalg.eigvalsh(k).min() >= -1e-8


def test_spec_round_trip():
    spec = KernelSpec("Laplace", 0.3)
    assert spec.kind == "laplace"
    assert KernelSpec.from_dict(spec.to_dict()) == spec
