import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnconv.tensor import DimensionError, Rng, ewise, matmul, rand_uniform


def naive_matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.result_type(a, b))
    for i in range(m):
        for j in range(n):
            acc = out.dtype.type(0)
            for p in range(k):
                acc = acc + a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def test_matmul_identity():
    assert matmul([[1, 0], [0, 1]], [[3], [4]]).tolist() == [[3], [4]]


def test_matmul_worked_example():
    out = matmul(np.array([[2.0, -2.0]]), np.array([[0.6], [0.4]]))
    assert out[0, 0] == pytest.approx(0.4, abs=1e-15)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_matmul_matches_triple_loop_bitwise(dtype):
    rng = Rng(7)
    a = rand_uniform(rng, (3, 4), -1, 1).astype(dtype)
    b = rand_uniform(rng, (4, 2), -1, 1).astype(dtype)
    np.testing.assert_array_equal(matmul(a, b), naive_matmul(a, b))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32))
def test_matmul_oracle_and_identity(m, k, n, seed):
    rng = Rng(seed)
    a = rand_uniform(rng, (m, k), -3, 3)
    b = rand_uniform(rng, (k, n), -3, 3)
    np.testing.assert_array_equal(matmul(a, b), naive_matmul(a, b))
    np.testing.assert_array_equal(matmul(a, np.eye(k)), a)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_ewise_examples():
    assert ewise("floor", [1.0, 1.7, -0.2]).tolist() == [1, 1, -1]
    assert ewise("clamp", [-1, 0.5, 2], 0, 1).tolist() == [0, 0.5, 1]
    assert ewise("scale", [2, 4], 0.5).tolist() == [1, 2]
    assert ewise("add", [1, 2], 1).tolist() == [2, 3]
    assert ewise("max", [1, -2], [0, 0]).tolist() == [1, 0]
    assert ewise("floor", [3.0])[0] == 3.0


def test_ewise_rejects_broadcasting():
    with pytest.raises(DimensionError):
        ewise("add", np.zeros(3), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ewise("pow", 1, 2)


def test_rand_uniform_deterministic_and_shaped():
    a = rand_uniform(Rng(3), (2, 3), 0, 1)
    b = rand_uniform(Rng(3), (2, 3), 0, 1)
    assert a.shape == (2, 3) and a.size == 6
    assert a.tobytes() == b.tobytes()


def test_rand_uniform_mean_and_range():
    x = rand_uniform(Rng(11), 10_000, 0.0, 1.0)
    assert abs(x.mean() - 0.5) < 0.02
    assert x.min() >= 0.0 and x.max() < 1.0


def test_rand_uniform_rejects_empty_interval():
    with pytest.raises(ValueError):
        rand_uniform(Rng(0), 3, 1.0, 1.0)


def test_rng_advances_and_spawn_is_stable():
    rng = Rng(5)
    assert not np.array_equal(rng.uniform(4), rng.uniform(4))
    assert Rng(5).spawn(1).uniform(3).tobytes() == Rng(5).spawn(1).uniform(3).tobytes()
