"""End-to-end acceptance runs, one test per criterion.

Each test prints a single PASS/FAIL verdict line (collected again in the
terminal summary). Thresholds are applied exactly as stated; a failing
criterion fails its test.
"""

from itertools import combinations

import numpy as np
import pytest

from dualspace import (
    L1Problem,
    Space,
    SparseSpec,
    build_operator,
    coherence,
    dft_matrix,
    gen_sparse_image,
    l0_oracle,
    measure,
    random_plan,
    solve_bp,
    to_real_system,
)
from dualspace import cli
from dualspace.analysis import (
    EdgeTrialSpec,
    TrialSpec,
    child_seed,
    curves_overlap,
    edge_turning_point,
    fit_s_bound,
    fit_scaling,
    phase_transition,
    resolve_workers,
    run_batch,
    tnsp_gamma,
    verify_exact_recovery_theorem,
)
from dualspace.bpsolver import dual_certificate
from dualspace.errors import NotFound

WORKERS = resolve_workers()


def paired_gain(dual, single):
    """Mean paired fidelity difference and its 95% lower confidence bound."""
    d = dual.values("fidelity") - single.values("fidelity")
    se = d.std(ddof=1) / np.sqrt(d.size)
    return float(d.mean()), float(d.mean() - 1.959964 * se)


@pytest.mark.slow
def test_criterion_01_fig1_dual_beats_single(acceptance):
    n, s, trials, seed = 64, 6, 1000, 20240101
    single = run_batch(TrialSpec(n, s, 9), trials, seed, workers=WORKERS)
    dual = run_batch(TrialSpec(n, s, 6, 3), trials, seed, workers=WORKERS)
    gain, lower = paired_gain(dual, single)
    p_d, p_s = dual.summary()["p_exact"], single.summary()["p_exact"]
    ok = lower > 0 and p_d - p_s >= 0.05
    acceptance(1, ok, f"mean F dual-single = {gain:+.4f} (95% lower bound {lower:+.4f}); "
                      f"P[exact] dual {p_d:.3f} vs single {p_s:.3f} "
                      f"(diff {100 * (p_d - p_s):+.1f} pp, need >= +5)")
    assert ok


def test_criterion_02_bp_matches_l0(acceptance):
    rng = np.random.default_rng(2)
    compared = mismatches = instances = 0
    while compared < 250 and instances < 5000:
        n = int(rng.integers(9, 13))
        s = int(rng.integers(1, 3))
        img = gen_sparse_image(SparseSpec(n, s, seed=int(rng.integers(2**32))))
        plan = random_plan(Space.K, n, int(rng.integers(4, n)), seed=int(rng.integers(2**32)))
        A, b = to_real_system(build_operator(plan).entries, measure(img, plan).values)
        # conjugate k-space pairs give linearly dependent rows; count independent ones
        if np.linalg.matrix_rank(A) < 8:
            continue
        instances += 1
        try:
            ref = l0_oracle(A, b, 2)
        except NotFound:
            continue
        prob = L1Problem(A, b)
        res = solve_bp(prob)
        if not (ref.unique and res.ok and dual_certificate(prob, res, tol=1e-6)):
            continue
        compared += 1
        mismatches += tuple(int(i) for i in res.support) != ref.support
    ok = compared >= 200 and mismatches == 0
    acceptance(2, ok, f"{compared} certified instances with a unique l0 solution "
                      f"(of {instances} drawn), {mismatches} support mismatches")
    assert ok


@pytest.mark.slow
def test_criterion_03_phase_curves_overlap(acceptance):
    n, h, trials, seed = 64, 3, 200, 303
    grid = list(range(4, 33, 2))
    curves = {}
    for m_x in (1, 2, 3):
        curves[m_x] = phase_transition(n, h + m_x, m_x, grid, trials, 0.8,
                                       child_seed(seed, m_x), effective_sparsity=h,
                                       workers=WORKERS)
    fracs = {}
    for a, b in combinations(curves, 2):
        agree = curves_overlap(curves[a].curve, curves[b].curve, 2.0)
        fracs[(a, b)] = float(agree.mean())
    stars = {m: curves[m].m_k_star for m in curves}
    reached = all(v is not None for v in stars.values())
    star_ok = reached and max(stars.values()) - min(stars.values()) <= 2
    overlap_ok = all(f >= 0.9 for f in fracs.values())
    ok = overlap_ok and star_ok
    pairs = ", ".join(f"m_x {a}/{b}: {100 * f:.0f}%" for (a, b), f in fracs.items())
    acceptance(3, ok, f"pointwise agreement within 2 SE ({pairs}; need >= 90%); "
                      f"m_k* by m_x = {stars} (need spread <= one grid step of 2)")
    assert ok


@pytest.fixture(scope="module")
def scaling_points():
    n, trials, seed = 64, 200, 404
    points = []
    for s in range(3, 9):
        for a in range(0, 4):
            points.append(phase_transition(n, s, a, range(1, 41), trials, 0.8,
                                           child_seed(seed, s, a),
                                           effective_sparsity=(s - a) if a else None,
                                           stop_at_target=True, workers=WORKERS))
    return points


@pytest.mark.slow
def test_criterion_04_scaling_plane(acceptance, scaling_points):
    C, r2 = fit_scaling(scaling_points, 64)
    unreached = sum(not p.reached for p in scaling_points)
    ok = r2 >= 0.9
    acceptance(4, ok, f"m_k* = C (s - alpha_x m_x) log n: C = {C:.4f}, r^2 = {r2:.4f} "
                      f"(need >= 0.9), {unreached} unreached grid cells")
    assert ok


@pytest.mark.slow
def test_single_space_column_consistent_with_plane(scaling_points):
    C, _ = fit_scaling(scaling_points, 64)
    C0, _ = fit_scaling([p for p in scaling_points if p.m_x == 0], 64)
    assert abs(C0 - C) / C <= 0.2


@pytest.mark.slow
def test_criterion_05_noise_robustness(acceptance):
    n, s, trials, seed = 64, 6, 200, 505
    rows, ok = [], True
    for i, snr in enumerate((1, 2, 5, 10, 20, 50)):
        sub = child_seed(seed, i)
        single = run_batch(TrialSpec(n, s, 9, snr=snr), trials, sub, workers=WORKERS)
        dual = run_batch(TrialSpec(n, s, 6, 3, snr=snr), trials, sub, workers=WORKERS)
        fd, fs = dual.summary()["mean_fidelity"], single.summary()["mean_fidelity"]
        ok &= fd >= fs
        rows.append(f"SNR {snr}: {fd:.4f} vs {fs:.4f}")
    acceptance(5, ok, "mean fidelity dual vs single: " + "; ".join(rows))
    assert ok


@pytest.mark.slow
def test_criterion_06_1d_edge_program(acceptance):
    n, seed = 64, 606
    dual = run_batch(EdgeTrialSpec("step", n, 11, 3, 0.25, 2), 100, seed, workers=WORKERS)
    single = run_batch(EdgeTrialSpec("step", n, 14, 0, 0.25, 2), 100, seed, workers=WORKERS)
    p_exact = dual.summary()["p_exact"]
    fd, fs = dual.summary()["mean_fidelity"], single.summary()["mean_fidelity"]
    part1 = p_exact >= 0.8 and fs < fd

    m_fd, steps = 5, list(range(4, 11))
    s_vals, mk, hits = [], [], []
    for k in steps:
        pt = edge_turning_point(n, k, m_fd, range(2, 60), 100, 0.8, child_seed(seed, k),
                                workers=WORKERS)
        if pt.reached:
            s_vals.append(k)
            mk.append(pt.m_k_star)
            hits.append(pt.alpha_m_x / m_fd)
    alpha = float(np.mean(hits)) if hits else 0.0
    fit = fit_s_bound(s_vals, mk, alpha, m_fd, n) if len(s_vals) >= 2 else None
    part2 = fit is not None and len(s_vals) == len(steps) and fit.relative_rms <= 0.1
    ok = part1 and part2
    fit_txt = ("no fit" if fit is None else
               f"c0 = {fit.c0:.3f}, alpha_x = {alpha:.3f}, RMS = {fit.rms:.2f} = "
               f"{100 * fit.relative_rms:.1f}% of m_k* range (need <= 10%)")
    acceptance(6, ok, f"dual exact {100 * p_exact:.0f}% (need >= 80%); mean F dual {fd:.6f} "
                      f"vs single m=14 {fs:.6f} (need single strictly lower); "
                      f"turning points m_k* {dict(zip(s_vals, mk))}; {fit_txt}")
    assert ok


@pytest.mark.slow
def test_criterion_07_2d_edges(acceptance):
    size, m_k, m_fd, G0, seed = 64, 82, 31, 0.52, 707
    dual = run_batch(EdgeTrialSpec("phantom", size, m_k, m_fd, G0), 30, seed, workers=WORKERS)
    single = run_batch(EdgeTrialSpec("phantom", size, m_k + m_fd, 0, G0), 30, seed,
                       workers=WORKERS)
    cd = float(dual.values("edge_correlation").mean())
    cs = float(single.values("edge_correlation").mean())
    ok = cd > cs
    acceptance(7, ok, f"64x64 phantom, total budget {m_k + m_fd}: mean edge correlation "
                      f"dual {cd:.4f} vs single {cs:.4f}; mean F dual "
                      f"{dual.summary()['mean_fidelity']:.4f} vs single "
                      f"{single.summary()['mean_fidelity']:.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_08_nsp_recovery(acceptance):
    q, rows, t, L, seed = 10, 9, 8, 1, 808
    systems, draws, bad, gammas = 0, 0, 0, []
    while systems < 20 and draws < 1000:
        A = np.random.default_rng(child_seed(seed, draws)).normal(size=(rows, q))
        draws += 1
        g = tnsp_gamma(A, t, L)
        if not g < 1:
            continue
        rep = verify_exact_recovery_theorem(A, t, L, 100, child_seed(seed, draws, 1), gamma=g)
        bad += len(rep.counterexamples)
        gammas.append(g)
        systems += 1
    ok = systems == 20 and bad == 0
    acceptance(8, ok, f"{systems} systems ({rows}x{q}, t={t}, L={L}) with gamma < 1 "
                      f"(max gamma {max(gammas, default=float('nan')):.3f}, {draws} draws), "
                      f"{bad} counterexamples in {100 * systems} planted signals")
    assert ok


def test_criterion_09_coherence(acceptance):
    errs = {n: abs(coherence(dft_matrix(n), np.eye(n)) - 1.0) for n in (4, 16, 64)}
    ok = all(e <= 1e-12 for e in errs.values())
    acceptance(9, ok, "|mu(DFT, I) - 1| = " + ", ".join(f"{e:.1e} (n={n})" for n, e in errs.items()))
    assert ok


SMALL_RUNS = {
    "fig1_histograms": {"trials": 20},
    "fig2_walkthrough": {},
    "fig3_noise_sweep": {"trials": 5, "snr": [2, 20]},
    "fig4_edges": {"trials": 2, "size": 16, "m_k": 20, "m_fd": 8, "G0": 0.2},
    "phase_transition": {"trials": 10, "m_k_min": 4, "m_k_max": 16, "m_k_step": 4,
                         "effective_sparsity": 4, "s": 6, "m_x": 3},
    "scaling_fit": {"trials": 10, "s_values": [3, 4, 5], "alpha_m_x_values": [0, 1],
                    "m_k_min": 1, "m_k_max": 25, "m_k_step": 3},
    "nsp_check": {"trials": 2, "signals": 5},
    "si_fig5_1d_edges": {"trials": 5, "tp_steps": [4, 5], "tp_trials": 5,
                         "m_k_min": 2, "m_k_max": 40, "m_k_step": 4},
}


def _cli_run(name, over, out, workers):
    argv = ["run", "--experiment", name, "--master_seed", "1234", "--output_dir", str(out),
            "--workers", str(workers)]
    for k, v in over.items():
        argv += [f"--{k}", str(v).replace(" ", "")]
    assert cli.main(argv) == 0
    return out / name / "1234"


@pytest.mark.slow
def test_criterion_10_determinism(acceptance, tmp_path):
    differing = []
    files = ("results.csv", "trials.jsonl")
    for name, over in SMALL_RUNS.items():
        a = _cli_run(name, over, tmp_path / "a", 1)
        first = [(a / f).read_bytes() for f in files]
        b = _cli_run(name, over, tmp_path / "b", 2)
        c = _cli_run(name, over, tmp_path / "a", 1)
        for f, blob in zip(files, first):
            if not blob == (b / f).read_bytes() == (c / f).read_bytes():
                differing.append(f"{name}/{f}")
    ok = not differing
    acceptance(10, ok, f"{len(SMALL_RUNS)} experiments run three times (1 and 2 workers, "
                       f"rerun into the same directory): "
                       + ("byte-identical results.csv and trials.jsonl" if ok
                          else "differences in " + ", ".join(differing)))
    assert ok
