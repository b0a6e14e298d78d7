"""Optional PNG figures rendered from an experiment's output files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import io


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _floats(rows, key):
    return np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])


def _fig1(out: Path, plt):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, color in (("single", "tab:blue"), ("dual", "tab:red")):
        rows = io.read_csv(out / f"hist_{name}.csv")
        lo, hi, c = _floats(rows, "bin_lo"), _floats(rows, "bin_hi"), _floats(rows, "count")
        ax.bar(lo, c, width=hi - lo, align="edge", alpha=0.5, color=color, label=name)
    ax.set_xlabel("fidelity")
    ax.set_ylabel("trials")
    ax.legend()
    return fig


def _fig2(out: Path, plt):
    fig, axes = plt.subplots(4, 1, figsize=(6, 7), sharex=True)
    for ax, name in zip(axes, ("truth", "intermediate", "dual_final", "single_final")):
        img = io.load_image(out / f"{name}.csv")
        ax.stem(img.data, markerfmt=".", basefmt=" ")
        ax.set_ylabel(name.replace("_", " "), fontsize=8)
    axes[-1].set_xlabel("pixel")
    return fig


def _by_arm(rows, x, y):
    out = {}
    for arm in ("single", "dual"):
        sel = [r for r in rows if r["arm"] == arm]
        out[arm] = (_floats(sel, x), _floats(sel, y))
    return out


def _fig3(out: Path, plt):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for arm, (x, y) in _by_arm(io.read_csv(out / "results.csv"), "snr", "mean_fidelity").items():
        ax.semilogx(x, y, "o-", label=arm)
    ax.set_xlabel("SNR")
    ax.set_ylabel("mean fidelity")
    ax.legend()
    return fig


def _fig4(out: Path, plt):
    rows = io.read_csv(out / "results.csv")
    fig, ax = plt.subplots(figsize=(4, 3.5))
    keys = ("mean_fidelity", "mean_correlation", "mean_edge_correlation")
    w = 0.35
    for i, r in enumerate(rows):
        ax.bar(np.arange(len(keys)) + i * w, [float(r[k] or "nan") for k in keys], w, label=r["arm"])
    ax.set_xticks(np.arange(len(keys)) + w / 2, ["fidelity", "correlation", "edge corr."])
    ax.legend()
    return fig


def _phase(out: Path, plt):
    rows = io.read_csv(out / "results.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(_floats(rows, "m_k"), _floats(rows, "p_exact"), 2 * _floats(rows, "stderr"),
                marker="o", capsize=2)
    ax.set_xlabel("m_k")
    ax.set_ylabel("P[exact]")
    return fig


def _scaling(out: Path, plt):
    rows = [r for r in io.read_csv(out / "results.csv") if r["m_k_star"] != ""]
    fit = json.loads((out / "fit.json").read_text())
    fig, ax = plt.subplots(figsize=(5, 3.5))
    h, mk = _floats(rows, "h"), _floats(rows, "m_k_star")
    ax.scatter(h, mk, c=_floats(rows, "m_x"), cmap="viridis")
    if "C" in fit and h.size and np.any(h > 0):
        k = float(np.sum(mk * h) / np.sum(h * h))
        hh = np.linspace(0, h.max(), 50)
        ax.plot(hh, k * hh, "k--", label=f"r2 = {fit['r_squared']:.3f}")
        ax.legend()
    ax.set_xlabel("s - alpha_x m_x")
    ax.set_ylabel("m_k*")
    return fig


def _nsp(out: Path, plt):
    rows = io.read_csv(out / "results.csv")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(_floats(rows, "system"), _floats(rows, "gamma"))
    ax.axhline(1.0, color="k", ls="--")
    ax.set_xlabel("system")
    ax.set_ylabel("gamma")
    return fig


def _fig5(out: Path, plt):
    rows = [r for r in io.read_csv(out / "turning_points.csv") if r["m_k_star"] != ""]
    fit = json.loads((out / "fit.json").read_text())
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(_floats(rows, "m_k_star"), _floats(rows, "s"), "o", label="turning points")
    if "predicted" in fit:
        ax.plot(fit["predicted"], _floats(rows, "s"), "-", label=f"c0 = {fit['c0']:.3f}")
    ax.set_xlabel("m_k*")
    ax.set_ylabel("s")
    ax.legend()
    return fig


_RENDERERS = {
    "fig1_histograms": _fig1,
    "fig2_walkthrough": _fig2,
    "fig3_noise_sweep": _fig3,
    "fig4_edges": _fig4,
    "phase_transition": _phase,
    "scaling_fit": _scaling,
    "nsp_check": _nsp,
    "si_fig5_1d_edges": _fig5,
}


def render_figures(experiment: str, out) -> Path:
    """Write ``figure.png`` next to the experiment's results."""
    out = Path(out)
    plt = _plt()
    fig = _RENDERERS[experiment](out, plt)
    fig.tight_layout()
    path = out / "figure.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
