import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualspace import (
    Image,
    MeasurementSet,
    SamplingPlan,
    Space,
    SparseSpec,
    build_operator,
    coherence,
    dft_matrix,
    gen_shepp_logan,
    gen_sparse_image,
    measure,
    random_plan,
)
from dualspace.errors import DimensionError, InvalidSpecError
from dualspace.transforms import fd_matrix


def test_dft_n1():
    assert np.allclose(dft_matrix(1).entries, [[1.0]])


@pytest.mark.parametrize("n", [4, 9, 64])
def test_dft_unitary(n):
    F = dft_matrix(n).entries
    assert np.abs(F @ F.conj().T - np.eye(n)).max() < 1e-12


def test_dft_of_delta_is_flat():
    F = dft_matrix(64).entries
    e0 = np.zeros(64)
    e0[0] = 1.0
    assert np.allclose(F @ e0, 1 / 8.0, atol=1e-15)


def test_dft_2d_is_tensor_product():
    F = dft_matrix(12, (3, 4)).entries
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.allclose(F @ x.ravel(), np.fft.fft2(x, norm="ortho").ravel())


def test_random_plan_fig2_counts():
    plan = random_plan(Space.K, 64, 6, seed=1)
    assert plan.m == 6 and len(set(plan.indices)) == 6


def test_random_plan_full_and_bounds():
    assert sorted(random_plan(Space.X, 9, 9, seed=3).indices) == list(range(9))
    with pytest.raises(InvalidSpecError):
        random_plan(Space.K, 9, 10)


def test_plan_from_one_based_indices():
    plan = SamplingPlan(Space.K, tuple(i - 1 for i in (2, 5, 6, 9)), 9)
    assert plan.indices == (1, 4, 5, 8)


def test_plan_validation():
    with pytest.raises(InvalidSpecError):
        SamplingPlan(Space.K, (1, 1), 9)
    with pytest.raises(InvalidSpecError):
        SamplingPlan(Space.X, (9,), 9)
    with pytest.raises(InvalidSpecError):
        SamplingPlan(Space.X, (1,), 9, axis=0)


def test_plan_dict_round_trip():
    plan = random_plan(Space.FD, 64, 5, seed=2, shape=(8, 8), axis=1)
    assert SamplingPlan.from_dict(plan.to_dict()) == plan


@given(st.integers(1, 60), st.data(), st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_random_plan_properties(n, data, seed):
    m = data.draw(st.integers(0, n))
    force = tuple(data.draw(st.lists(st.integers(0, n - 1), max_size=m, unique=True)))
    a = random_plan(Space.K, n, m, seed, force=force)
    assert a == random_plan(Space.K, n, m, seed, force=force)
    assert a.m == m and set(force) <= set(a.indices)


def test_xspace_operator_pixel_7():
    A = build_operator(SamplingPlan(Space.X, (7,), 9)).entries
    expect = np.zeros((1, 9))
    expect[0, 7] = 1.0
    assert np.array_equal(A, expect)


def test_full_kspace_operator_is_dft():
    A = build_operator(SamplingPlan(Space.K, tuple(range(16)), 16)).entries
    assert np.allclose(A, dft_matrix(16).entries, atol=1e-14)


def test_fd_operator_rows():
    A = build_operator(SamplingPlan(Space.FD, (3, 8), 9)).entries
    assert A[0, 3] == -1 and A[0, 4] == 1
    assert A[1, 8] == -1 and A[1, 0] == 1
    assert np.allclose(A @ np.full(9, 3.3), 0.0)


def test_fd_matrix_2d_wraps():
    D = fd_matrix((3, 4), axis=1)
    x = np.arange(12.0).reshape(3, 4)
    assert np.allclose(D @ x.ravel(), (np.roll(x, -1, axis=1) - x).ravel())


def test_measure_zero_image():
    plan = random_plan(Space.K, 16, 5, seed=0)
    assert np.all(measure(Image.from_array(np.zeros(16)), plan).values == 0)


def test_measure_delta_full_plan():
    x = np.zeros(16)
    x[0] = 1.0
    ms = measure(Image.from_array(x), SamplingPlan(Space.K, tuple(range(16)), 16))
    assert np.allclose(ms.values, 0.25)


def test_measure_matches_explicit_dft_oracle(frozen):
    ref = frozen["fig1_measure"]
    img = gen_sparse_image(SparseSpec(64, 6, seed=ref["image_seed"]))
    plan = random_plan(Space.K, 64, 9, seed=ref["plan_seed"])
    assert list(plan.indices) == ref["indices"]
    ms = measure(img, plan)
    expect = np.array(ref["re"]) + 1j * np.array(ref["im"])
    assert np.abs(ms.values - expect).max() < 1e-12


@pytest.mark.parametrize("space", [Space.K, Space.X, Space.FD])
def test_measure_equals_operator_product(space):
    img = gen_shepp_logan(16)
    plan = random_plan(space, 256, 40, seed=4, shape=(16, 16), axis=1)
    ms = measure(img, plan)
    assert np.abs(ms.values - build_operator(plan) @ img.data).max() < 1e-12


def test_measure_shape_mismatch():
    with pytest.raises(DimensionError):
        measure(Image.from_array(np.zeros(8)), random_plan(Space.K, 9, 3))
    with pytest.raises(DimensionError):
        MeasurementSet(random_plan(Space.K, 9, 3), np.zeros(2))


@given(st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_full_plan_inverts_and_conjugate_symmetry(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=20)
    plan = SamplingPlan(Space.K, tuple(range(20)), 20)
    b = measure(Image.from_array(x), plan).values
    back = build_operator(plan).entries.conj().T @ b
    assert np.abs(back.real - x).max() < 1e-10
    k = np.arange(1, 20)
    assert np.abs(b[k] - np.conj(b[20 - k])).max() < 1e-12


@pytest.mark.parametrize("n", [4, 16, 64])
def test_coherence_dft_identity(n):
    assert abs(coherence(dft_matrix(n), np.eye(n)) - 1.0) < 1e-12


def test_coherence_self_and_symmetry():
    F = dft_matrix(8)
    assert np.isclose(coherence(np.eye(8), np.eye(8)), np.sqrt(8))
    Q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(8, 8)))
    assert np.isclose(coherence(F, Q), coherence(Q, F))
    assert 1.0 - 1e-12 <= coherence(F, Q) <= np.sqrt(8) + 1e-12


def test_coherence_fd_eigenbasis_oracle(frozen):
    # the circulant FD operator is diagonalised by Fourier vectors
    D = fd_matrix((8,))
    _, V = np.linalg.eig(D)
    V = V / np.linalg.norm(V, axis=0)
    Q, _ = np.linalg.qr(V)
    assert abs(coherence(dft_matrix(8), Q) - frozen["coherence_dft_fd_eig_8"]) < 1e-9


def test_coherence_rejects_non_unitary():
    with pytest.raises(InvalidSpecError):
        coherence(np.ones((4, 4)), np.eye(4))
    with pytest.raises(DimensionError):
        coherence(np.eye(3), np.eye(4))
