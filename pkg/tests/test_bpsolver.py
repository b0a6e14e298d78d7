import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualspace import (
    Image,
    L1Problem,
    SamplingPlan,
    SolverConfig,
    Space,
    SparseSpec,
    Status,
    build_operator,
    gen_shepp_logan,
    gen_sparse_image,
    gen_step_signal,
    l0_oracle,
    lp_solve,
    measure,
    random_plan,
    solve_bp,
    solve_truncated_bp,
    solve_wtv,
    to_real_system,
)
from dualspace.analysis import fidelity
from dualspace.bpsolver import dual_certificate, solve_bpdn
from dualspace.errors import (
    DimensionError,
    EnumerationBoundError,
    InvalidSpecError,
    NotFound,
    UnderdeterminedError,
)


def kspace_problem(x, plan):
    ms = measure(Image.from_array(x), plan)
    return L1Problem(*to_real_system(build_operator(plan).entries, ms.values))


# lp_solve

def test_lp_single_equality():
    sol = lp_solve([1.0], [[1.0]], [3.0])
    assert sol.status is Status.OPTIMAL and abs(sol.x[0] - 3.0) < 1e-8


def test_lp_degenerate_objective_unique():
    sol = lp_solve([1.0, 1.0], [[1.0, 1.0]], [2.0])
    assert sol.status is Status.OPTIMAL and abs(sol.objective - 2.0) < 1e-8


def test_lp_vertex_oracle(frozen):
    for case in frozen["vertex_lps"]:
        sol = lp_solve(case["c"], case["A"], case["b"])
        assert sol.status is Status.OPTIMAL
        assert abs(sol.objective - case["objective"]) < 1e-8 * max(1.0, abs(case["objective"]))


def test_lp_infeasible_and_unbounded():
    assert lp_solve([1.0], [[1.0]], [-1.0]).status is Status.INFEASIBLE
    assert lp_solve([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0]).status is Status.INFEASIBLE
    assert lp_solve([-1.0, 0.0], [[1.0, -1.0]], [0.0]).status is Status.UNBOUNDED


def test_lp_lower_bounds():
    sol = lp_solve([1.0, 2.0], [[1.0, 1.0]], [5.0], lower_bounds=[1.0, 1.5])
    assert sol.status is Status.OPTIMAL
    assert np.allclose(sol.x, [3.5, 1.5], atol=1e-7)


def test_lp_deterministic():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(5, 12))
    b = A @ np.abs(rng.normal(size=12))
    c = np.abs(rng.normal(size=12))
    a, b2 = lp_solve(c, A, b), lp_solve(c, A, b)
    assert np.array_equal(a.x, b2.x) and a.iterations == b2.iterations


def test_lp_rejects_nonfinite():
    with pytest.raises(ValueError):
        lp_solve([np.nan], [[1.0]], [1.0])


# real split

def test_real_split_passthrough():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([1.0, 2.0])
    A2, b2 = to_real_system(A, b)
    assert np.array_equal(A2, A) and np.array_equal(b2, b)


def test_real_split_one_complex_row():
    A2, b2 = to_real_system(np.array([[1 + 1j]]), np.array([2 + 0j]))
    assert np.array_equal(A2, [[1.0], [1.0]]) and np.array_equal(b2, [2.0, 0.0])


def test_real_split_substitute_back():
    rng = np.random.default_rng(8)
    plan = random_plan(Space.K, 8, 5, seed=2)
    A = build_operator(plan).entries
    x = rng.normal(size=8)
    Ar, br = to_real_system(A, A @ x)
    z, *_ = np.linalg.lstsq(Ar, br, rcond=None)
    assert np.abs(A @ z - A @ x).max() < 1e-10


# solve_bp

def test_bp_identity():
    b = np.array([0.0, 1.5, -2.0, 0.0])
    res = solve_bp(L1Problem(np.eye(4), b))
    assert res.ok and np.abs(res.solution - b).max() < 1e-9


def test_bp_dimension_errors():
    with pytest.raises(DimensionError):
        L1Problem(np.eye(3), np.zeros(2))
    with pytest.raises(InvalidSpecError):
        L1Problem(np.eye(3), np.zeros(3), weights=-np.ones(3))
    with pytest.raises(InvalidSpecError):
        SolverConfig(feas_tol=0.0)


def test_bp_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert solve_bp(L1Problem(A, [1.0, 2.0])).status is Status.INFEASIBLE


def test_bp_fig1_single_often_imperfect():
    fails = 0
    for seed in range(30):
        x = gen_sparse_image(SparseSpec(64, 6, seed=seed)).data
        res = solve_bp(kspace_problem(x, random_plan(Space.K, 64, 9, seed=seed + 100)))
        fails += fidelity(res.solution, x) < 1 - 1e-6
    assert fails > 0


def test_bp_n10_s2_m8_matches_l0():
    matched = 0
    for seed in range(20):
        x = gen_sparse_image(SparseSpec(10, 2, seed=seed)).data
        prob = kspace_problem(x, random_plan(Space.K, 10, 4, seed=seed))
        if prob.A.shape[0] < 8:
            continue
        ref = l0_oracle(prob.A, prob.b, 2)
        res = solve_bp(prob)
        if ref.unique:
            assert tuple(res.support) == ref.support
            matched += 1
    assert matched > 0


@given(st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_bp_certificate_and_minimality(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 14))
    x0 = np.zeros(14)
    x0[rng.choice(14, 3, replace=False)] = rng.normal(size=3)
    prob = L1Problem(A, A @ x0)
    res = solve_bp(prob)
    assert res.ok and res.residual_inf < 1e-7
    assert dual_certificate(prob, res, tol=1e-6)
    assert res.objective <= np.abs(x0).sum() + 1e-7


@given(st.integers(0, 2**32), st.floats(0.1, 10.0))
@settings(max_examples=25, deadline=None)
def test_bp_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(7, 12))
    x0 = np.zeros(12)
    x0[rng.choice(12, 2, replace=False)] = 1.0 + rng.random(2)
    a = solve_bp(L1Problem(A, A @ x0))
    b = solve_bp(L1Problem(A, scale * (A @ x0)))
    assert np.abs(b.solution - scale * a.solution).max() < 1e-6 * scale


def test_bp_weights_steer_solution():
    A = np.array([[1.0, 1.0]])
    res = solve_bp(L1Problem(A, [1.0], weights=[1.0, 3.0]))
    assert np.allclose(res.solution, [1.0, 0.0], atol=1e-7)


def test_bp_deterministic():
    x = gen_sparse_image(SparseSpec(64, 6, seed=1)).data
    prob = kspace_problem(x, random_plan(Space.K, 64, 12, seed=3))
    assert np.array_equal(solve_bp(prob).solution, solve_bp(prob).solution)


def test_bpdn_zero_epsilon_near_bp():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(8, 16))
    x0 = np.zeros(16)
    x0[[2, 9]] = [1.0, -0.7]
    res = solve_bpdn(L1Problem(A, A @ x0), 1e-9)
    assert np.abs(res.solution - x0).max() < 1e-5


# truncated BP

def test_truncated_empty_equals_bp():
    x = gen_sparse_image(SparseSpec(32, 3, seed=5)).data
    prob = kspace_problem(x, random_plan(Space.K, 32, 8, seed=2))
    assert np.array_equal(solve_truncated_bp(prob, [], []).solution, solve_bp(prob).solution)


def test_truncated_n9_drops_pixel_7():
    x = np.zeros(9)
    x[[3, 7]] = [1.0, 0.8]
    prob = kspace_problem(x, SamplingPlan(Space.K, (1, 4, 5), 9))
    res = solve_truncated_bp(prob, [7], [0.8])
    assert res.solution[7] == 0.8 and res.solution.size == 9
    assert res.ok


def test_truncated_errors():
    prob = L1Problem(np.eye(3), np.ones(3))
    with pytest.raises(DimensionError):
        solve_truncated_bp(prob, [0], [1.0, 2.0])
    with pytest.raises(InvalidSpecError):
        solve_truncated_bp(prob, [0, 0], [1.0, 1.0])
    with pytest.raises(InvalidSpecError):
        solve_truncated_bp(prob, [3], [1.0])


def test_truncated_all_known():
    prob = L1Problem(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert solve_truncated_bp(prob, [0, 1, 2], [1.0, 2.0, 3.0]).ok
    assert solve_truncated_bp(prob, [0, 1, 2], [1.0, 2.0, 0.0]).status is Status.INFEASIBLE


def test_truncation_rescues_fig1_cases():
    rescued = 0
    for seed in range(40):
        img = gen_sparse_image(SparseSpec(64, 6, seed=seed))
        prob = kspace_problem(img.data, random_plan(Space.K, 64, 6, seed=seed))
        plain = fidelity(solve_bp(prob).solution, img.data)
        sup = img.support()[:4]
        trunc = fidelity(solve_truncated_bp(prob, sup, img.data[sup]).solution, img.data)
        rescued += plain < 1 - 1e-6 and trunc >= 1 - 1e-6
    assert rescued > 0


@pytest.mark.slow
def test_truncation_never_hurts_on_average():
    plain, trunc = [], []
    rng = np.random.default_rng(0)
    for seed in range(500):
        img = gen_sparse_image(SparseSpec(64, 6, seed=seed))
        prob = kspace_problem(img.data, random_plan(Space.K, 64, 8, seed=seed + 7))
        sup = img.support()
        sub = np.sort(rng.choice(sup, rng.integers(1, sup.size + 1), replace=False))
        plain.append(fidelity(solve_bp(prob).solution, img.data))
        trunc.append(fidelity(solve_truncated_bp(prob, sub, img.data[sub]).solution, img.data))
    assert np.mean(trunc) >= np.mean(plain)


# l0 oracle

def test_l0_zero_rhs():
    res = l0_oracle(np.eye(3), np.zeros(3), 2)
    assert res.support == () and res.unique


def test_l0_bounds_and_not_found():
    with pytest.raises(EnumerationBoundError):
        l0_oracle(np.zeros((2, 30)), np.ones(2), 2)
    with pytest.raises(EnumerationBoundError):
        l0_oracle(np.zeros((2, 10)), np.ones(2), 5)
    with pytest.raises(NotFound):
        l0_oracle(np.eye(4), np.ones(4), 2)


def test_l0_n9_m4_planted():
    found = 0
    for seed in range(20):
        x = gen_sparse_image(SparseSpec(9, 2, seed=seed)).data
        plan = random_plan(Space.K, 9, 4, seed=seed)
        prob = kspace_problem(x, plan)
        res = l0_oracle(prob.A, prob.b, 2)
        if res.unique:
            assert res.support == tuple(np.flatnonzero(x))
            found += 1
    assert found > 0


def test_l0_n12_random_matrix():
    rng = np.random.default_rng(4)
    hits, unique = 0, 0
    for _ in range(30):
        A = rng.normal(size=(5, 12))
        S = tuple(sorted(rng.choice(12, 2, replace=False)))
        x = np.zeros(12)
        x[list(S)] = rng.normal(size=2)
        res = l0_oracle(A, A @ x, 2)
        unique += res.unique
        hits += res.unique and res.support == S
    assert hits == unique and unique > 0


# weighted TV

def test_wtv_full_kspace_exact():
    img = gen_step_signal(32, 3, seed=1)
    plan = SamplingPlan(Space.K, tuple(range(32)), 32)
    res = solve_wtv(measure(img, plan))
    assert res.ok and np.abs(res.solution - img.data).max() < 1e-6


def test_wtv_step_signal_dual_budget_exact():
    img = gen_step_signal(64, 2, seed=3)
    k = measure(img, random_plan(Space.K, 64, 11, seed=3, force=(0,)))
    fd_idx = tuple(np.flatnonzero(np.abs(np.roll(img.data, -1) - img.data) > 1e-9)) + (10,)
    fd = measure(img, SamplingPlan(Space.FD, tuple(sorted(set(fd_idx))), 64, 0))
    res = solve_wtv(k, fd)
    assert fidelity(res.solution, img.data) >= 1 - 1e-6


def test_wtv_requires_dc():
    img = gen_step_signal(16, 2, seed=1)
    with pytest.raises(UnderdeterminedError):
        solve_wtv(measure(img, SamplingPlan(Space.K, (1, 2, 3), 16)))
    with pytest.raises(InvalidSpecError):
        solve_wtv(measure(img, SamplingPlan(Space.X, (0, 1), 16)))


def test_wtv_routes_agree_1d():
    img = gen_step_signal(32, 3, seed=6)
    k = measure(img, random_plan(Space.K, 32, 9, seed=2, force=(0,)))
    a = solve_wtv(k, method="fd")
    b = solve_wtv(k, method="structured")
    assert abs(a.objective - b.objective) < 1e-5 * max(1.0, a.objective)


def test_wtv_2d_full_kspace():
    img = gen_shepp_logan(16)
    plan = SamplingPlan(Space.K, tuple(range(256)), 256, shape=(16, 16))
    res = solve_wtv(measure(img, plan))
    assert res.ok and np.abs(res.solution - img.data).max() < 1e-5


def test_bp_degenerate_tie_returns_vertex():
    # every split of 1 between the two entries is optimal; a vertex has one non-zero
    res = solve_bp(L1Problem(np.array([[1.0, 1.0]]), [1.0]))
    assert res.ok and np.isclose(res.objective, 1.0)
    assert np.count_nonzero(res.solution) == 1
