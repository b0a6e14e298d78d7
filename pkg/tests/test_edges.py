import numpy as np
import pytest

from dualspace import (
    EdgeBudget,
    EdgeMap,
    Image,
    edge_scores,
    extract_edges,
    gen_shepp_logan,
    gen_step_signal,
    rank_candidates,
    run_dual_edge,
    run_single_edge,
)
from dualspace.analysis import fidelity
from dualspace.errors import DimensionError, InvalidSpecError


def test_constant_image_has_no_edges():
    assert extract_edges(Image.from_array(np.full((8, 8), 0.3)), 0.1).count == 0


def test_two_step_edges():
    img = gen_step_signal(64, 2, seed=5)
    step = np.abs(np.roll(img.data, -1) - img.data).max()
    em = extract_edges(img, 0.5 * step)
    assert em.count == 2 and em.vertical is None


def test_phantom_edges_g0():
    em = extract_edges(gen_shepp_logan(64), 0.52)
    assert em.shape == (64, 64) and em.count > 0


def test_edge_map_validation():
    with pytest.raises(InvalidSpecError):
        EdgeMap(np.zeros(4), None, 0.0)
    with pytest.raises(DimensionError):
        EdgeMap(np.zeros((2, 2)), np.zeros((3, 3)), 0.1)
    with pytest.raises(InvalidSpecError):
        EdgeBudget(0, 1)
    with pytest.raises(InvalidSpecError):
        EdgeBudget(3, -1)


def test_edge_scores_identity_and_complement():
    rng = np.random.default_rng(1)
    g = rng.random((2, 6, 6)) > 0.7
    a = EdgeMap.from_axes(g, 0.1)
    tp, fp, c = edge_scores(a, a)
    assert (tp, fp) == (int(g.sum()), 0) and np.isclose(c, 1.0)
    _, _, c2 = edge_scores(EdgeMap.from_axes(~g, 0.1), a)
    assert np.isclose(c2, -1.0)


def test_edge_scores_constant_and_mismatch():
    a = EdgeMap(np.zeros(5, bool), None, 0.1)
    b = EdgeMap(np.array([1, 0, 0, 0, 0], bool), None, 0.1)
    assert edge_scores(a, b)[2] == 0.0
    with pytest.raises(DimensionError):
        edge_scores(a, EdgeMap(np.zeros(6, bool), None, 0.1))


def test_rank_candidates_joint_order():
    x = np.zeros((4, 4))
    x[1, 1] = 1.0
    x[2, 2] = 0.5
    axes, pix = rank_candidates(Image.from_array(x), 3)
    # the unit pixel produces four pairs of size 1, lower axis first
    assert list(axes) == [0, 0, 1]
    assert list(pix) == [1, 5, 4]
    with pytest.raises(InvalidSpecError):
        rank_candidates(Image.from_array(x), 33)


def test_single_edge_full_kspace_exact():
    img = gen_step_signal(32, 3, seed=2)
    G0 = 0.1
    rec, em = run_single_edge(img, 32, G0, seed=0)
    assert fidelity(rec, img) > 1 - 1e-9
    assert edge_scores(em, extract_edges(img, G0))[2] == 1.0


def test_dual_edge_zero_fd_is_single():
    img = gen_step_signal(64, 2, seed=1)
    a, ea, tr = run_dual_edge(img, EdgeBudget(11, 0), 0.25, seed=4)
    b, eb = run_single_edge(img, 11, 0.25, seed=4)
    assert np.array_equal(a.data, b.data) and np.array_equal(ea.stacked(), eb.stacked())
    assert tr.t == 0


def test_dual_edge_1d_two_step_mostly_exact():
    exact = 0
    for seed in range(20):
        img = gen_step_signal(64, 2, seed=seed)
        rec, em, tr = run_dual_edge(img, EdgeBudget(11, 3), 0.25, seed=seed)
        assert tr.selected_idx.size == 3 and len(tr.k_indices) == 11 and 0 in tr.k_indices
        exact += fidelity(rec, img) >= 1 - 1e-6
    assert exact >= 14


def test_dual_edge_pins_measured_pairs():
    img = gen_shepp_logan(16)
    rec, _, tr = run_dual_edge(img, EdgeBudget(40, 12), 0.2, seed=3)
    fd = np.stack([np.roll(rec.array, -1, axis=a) - rec.array for a in (0, 1)]).ravel()
    assert np.abs(fd[tr.selected_idx] - tr.x_values).max() < 1e-6
    assert tr.s == extract_edges(img, 0.2).count


def test_dual_edge_rejects_bad_g0():
    with pytest.raises(InvalidSpecError):
        run_dual_edge(gen_step_signal(16, 2, seed=0), EdgeBudget(5, 1), 0.0)
