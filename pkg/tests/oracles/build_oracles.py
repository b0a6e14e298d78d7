"""Independent reference values, computed once and frozen to frozen.json.

Every value here comes from a brute-force or textbook code path that shares
nothing with the package's solvers: explicit DFT sums, vertex enumeration of
LPs, eigen-decomposition scans and random null-space sampling. Run
``python tests/oracles/build_oracles.py`` to regenerate.
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).with_name("frozen.json")


def phantom_fd_count(img: np.ndarray) -> int:
    count = 0
    for axis in range(img.ndim):
        d = np.roll(img, -1, axis=axis) - img
        count += int(np.sum(np.abs(d) > 1e-12))
    return count


def explicit_dft_rows(x: np.ndarray, ks) -> np.ndarray:
    n = x.size
    j = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * k * j / n)) / np.sqrt(n) for k in ks])


def vertex_lp(c, A, b) -> float:
    """min c.x, A x = b, x >= 0 by enumerating every basis."""
    m, q = A.shape
    best = np.inf
    for B in itertools.combinations(range(q), m):
        AB = A[:, B]
        if abs(np.linalg.det(AB)) < 1e-10:
            continue
        xB = np.linalg.solve(AB, b)
        if np.all(xB >= -1e-10):
            best = min(best, float(c[list(B)] @ xB))
    return best


def fd_eig_coherence(n: int) -> float:
    D = np.roll(np.eye(n), 1, axis=1) - np.eye(n)
    _, V = np.linalg.eig(D)
    V = V / np.linalg.norm(V, axis=0)
    F = np.array([[np.exp(-2j * np.pi * j * k / n) for k in range(n)] for j in range(n)]) / np.sqrt(n)
    best = 0.0
    for i in range(n):
        for k in range(n):
            best = max(best, abs(np.vdot(F[:, i], V[:, k])))
    return float(np.sqrt(n) * best)


def partial_dft_real(n: int, ks) -> np.ndarray:
    j = np.arange(n)
    rows = []
    for k in ks:
        r = np.exp(-2j * np.pi * k * j / n) / np.sqrt(n)
        rows += [r.real, r.imag]
    return np.array(rows)


def sampled_nsp_gamma(A: np.ndarray, L: int, draws: int, seed: int) -> float:
    """Lower bound on the NSP constant from random null-space vectors."""
    _, sv, Vt = np.linalg.svd(A)
    N = Vt[np.sum(sv > 1e-10):].T
    rng = np.random.default_rng(seed)
    best = 0.0
    for chunk in range(draws // 100_000):
        E = np.abs(N @ rng.normal(size=(N.shape[1], 100_000)))
        # for each draw the worst S is its L largest entries
        top = -np.sort(-E, axis=0)[:L].sum(axis=0)
        rest = E.sum(axis=0) - top
        best = max(best, float(np.max(top / rest)))
    return best


def main() -> None:
    from dualspace import gen_shepp_logan, gen_sparse_image, random_plan, SparseSpec, Space

    out = {}
    out["phantom64_fd_sparsity"] = phantom_fd_count(gen_shepp_logan(64).array)

    img = gen_sparse_image(SparseSpec(64, 6, seed=2024))
    plan = random_plan(Space.K, 64, 9, seed=7)
    b = explicit_dft_rows(img.data, plan.indices)
    out["fig1_measure"] = {"image_seed": 2024, "plan_seed": 7, "indices": list(plan.indices),
                           "re": b.real.tolist(), "im": b.imag.tolist()}

    rng = np.random.default_rng(11)
    lps = []
    for _ in range(6):
        m, q = 4, 10
        A = rng.normal(size=(m, q))
        x0 = np.abs(rng.normal(size=q))
        c = np.abs(rng.normal(size=q)) + 0.1
        b = A @ x0
        lps.append({"c": c.tolist(), "A": A.tolist(), "b": b.tolist(),
                    "objective": vertex_lp(c, A, b)})
    out["vertex_lps"] = lps

    out["coherence_dft_fd_eig_8"] = fd_eig_coherence(8)

    A = partial_dft_real(10, (1, 2, 4))
    out["nsp_partial_dft"] = {"n": 10, "ks": [1, 2, 4], "L": 2,
                              "sampled_gamma": sampled_nsp_gamma(A, 2, 1_000_000, 5)}
    OUT.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
