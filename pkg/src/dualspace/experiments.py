"""Experiment registry: parameter schemas and runners used by the CLI.

Every runner writes ``results.csv`` and ``trials.jsonl`` (plus optional
extras) into its output directory and returns a summary for the manifest.
Result files never contain wall-clock data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import io
from .analysis import (
    EdgeTrialSpec,
    TrialSpec,
    child_seed,
    edge_turning_point,
    fit_s_bound,
    fidelity,
    fit_scaling,
    is_exact,
    phase_transition,
    run_batch,
    tnsp_search,
    verify_exact_recovery_theorem,
)
from .analysis.batch import TrialBatch
from .dualcs import DualPlanSpec, run_dual_cs, run_single_cs
from .errors import FitError
from .signals import SparseSpec, gen_sparse_image
from .transforms import SamplingPlan, Space


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, str, int_list, float_list, opt_int, bool
    default: Any
    help: str = ""
    minimum: float | None = None
    choices: tuple = ()


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    params: dict[str, Param]
    default_trials: int
    runner: Callable
    checks: tuple[Callable[[dict, int], list[str]], ...] = field(default=())


def _coerce(name: str, p: Param, value) -> tuple[Any, str | None]:
    try:
        if p.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            v = int(value)
        elif p.kind == "opt_int":
            if value is None or (isinstance(value, str) and value.lower() in ("", "none", "null")):
                return None, None
            v = int(value)
        elif p.kind == "float":
            v = float(value)
        elif p.kind == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError
                v = value.lower() in ("true", "1")
            else:
                v = bool(value)
        elif p.kind in ("int_list", "float_list"):
            cast = int if p.kind == "int_list" else float
            items = value.split(",") if isinstance(value, str) else list(value)
            v = [cast(x) for x in items]
            if not v:
                raise ValueError
        else:
            v = str(value)
    except (TypeError, ValueError):
        return None, f"{name}: cannot read {value!r} as {p.kind}"
    if p.choices and v not in p.choices:
        return None, f"{name}: {v!r} not in {list(p.choices)}"
    if p.minimum is not None:
        vals = v if isinstance(v, list) else ([] if v is None else [v])
        if any(x < p.minimum for x in vals):
            return None, f"{name}: must be >= {p.minimum}"
    return v, None


def resolve_params(exp: Experiment, given: dict) -> tuple[dict, list[str]]:
    """Defaults merged with ``given``; returns the params and error strings."""
    errors = [f"unknown parameter {k!r} for {exp.name}" for k in given if k not in exp.params]
    out = {}
    for name, p in exp.params.items():
        raw = given.get(name, p.default)
        v, err = _coerce(name, p, raw)
        if err:
            errors.append(err)
        out[name] = v
    return out, errors


# ---------------------------------------------------------------- checks

def _budget_check(n_key, pairs):
    def check(params, trials):
        errs = []
        n = params.get(n_key)
        for mk, mx in pairs:
            a, b = params.get(mk), params.get(mx) if mx else 0
            if None in (n, a, b):
                continue
            if a + b > n:
                errs.append(f"range violation: {mk} + {mx or '0'} = {a + b} exceeds {n_key} = {n}")
        return errs
    return check


def _sparsity_check(params, trials):
    if params.get("s") is not None and params.get("n") is not None and params["s"] > params["n"]:
        return [f"range violation: s = {params['s']} exceeds n = {params['n']}"]
    return []


def _target_check(params, trials):
    t = params.get("target")
    if t is not None and not 0.0 < t < 1.0:
        return ["range violation: target must lie in (0, 1)"]
    return []


def _nsp_check(params, trials):
    errs = []
    q, t, rows = params.get("q"), params.get("t"), params.get("rows")
    if None not in (q, t) and t > q:
        errs.append(f"range violation: t = {t} exceeds q = {q}")
    if q is not None and q > 12:
        errs.append("range violation: q must be <= 12")
    if params.get("L") is not None and params["L"] > 3:
        errs.append("range violation: L must be <= 3")
    if None not in (q, rows) and params.get("matrix") == "identity" and rows != q:
        errs.append("range violation: identity matrix needs rows = q")
    return errs


# ---------------------------------------------------------------- helpers

def _trial_rows(batch: TrialBatch, **tags) -> list[dict]:
    out = []
    for rec in batch.records():
        rec = {**tags, **rec}
        out.append(rec)
    return out


def _summary_row(batch: TrialBatch, **tags) -> dict:
    row = dict(tags)
    summ = batch.summary()
    summ.pop("experiment_id")
    row.update(summ)
    corr = [t.correlation for t in batch.trials if t.correlation is not None]
    row["mean_correlation"] = float(np.mean(corr)) if corr else None
    if batch.trials and "edge_correlation" in batch.trials[0].extra:
        row["mean_edge_correlation"] = float(batch.values("edge_correlation").mean())
        row["mean_true_positive"] = float(batch.values("true_positive").mean())
        row["mean_false_positive"] = float(batch.values("false_positive").mean())
    row["failed_solves"] = sum(t.status != "Optimal" for t in batch.trials)
    return row


def _timing(*batches: TrialBatch) -> float:
    return float(sum(b.total_time for b in batches))


def _histogram(values: np.ndarray, bins: int) -> list[dict]:
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
    return [{"bin_lo": float(lo), "bin_hi": float(hi), "count": int(c)}
            for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


# ---------------------------------------------------------------- runners

def run_fig1(params, trials, seed, workers, out: Path) -> dict:
    n, s = params["n"], params["s"]
    single = run_batch(TrialSpec(n, s, params["m"]), trials, seed, experiment_id="single",
                       workers=workers)
    dual = run_batch(TrialSpec(n, s, params["m_k"], params["m_x"]), trials, seed,
                     experiment_id="dual", workers=workers)
    io.write_csv([_summary_row(single, arm="single", n=n, s=s, m_k=params["m"], m_x=0),
                  _summary_row(dual, arm="dual", n=n, s=s, m_k=params["m_k"], m_x=params["m_x"])],
                 out / "results.csv")
    io.write_jsonl(_trial_rows(single, arm="single") + _trial_rows(dual, arm="dual"),
                   out / "trials.jsonl")
    for name, b in (("single", single), ("dual", dual)):
        io.write_csv(_histogram(b.values("fidelity"), params["bins"]), out / f"hist_{name}.csv")
    return {"solve_seconds": _timing(single, dual)}


def run_fig2(params, trials, seed, workers, out: Path) -> dict:
    n, s = params["n"], params["s"]
    t0 = time.perf_counter()
    truth = gen_sparse_image(SparseSpec(n, s, seed=child_seed(seed, 0)))
    plan_seed = child_seed(seed, 0, 1)
    single, sres = run_single_cs(truth, params["m_k"] + params["m_x"], plan_seed)
    final, trace = run_dual_cs(truth, DualPlanSpec(params["m_k"], params["m_x"], plan_seed))
    elapsed = time.perf_counter() - t0
    rows = [
        {"arm": "single", "m_k": params["m_k"] + params["m_x"], "m_x": 0,
         "fidelity": fidelity(single, truth), "exact": is_exact(single, truth),
         "status": sres.status.value},
        {"arm": "dual", "m_k": params["m_k"], "m_x": params["m_x"],
         "fidelity": fidelity(final, truth), "exact": is_exact(final, truth),
         "status": trace.final_status.value, "t": trace.t, "s_T": trace.s_T,
         "alpha_x": trace.alpha_x},
    ]
    io.write_csv(rows, out / "results.csv")
    io.write_jsonl([{"arm": "single", "result": sres.to_dict()},
                    {"arm": "dual", "trace": trace.to_dict()}], out / "trials.jsonl")
    io.save_image(truth, out / "truth.csv")
    io.save_image(trace.intermediate, out / "intermediate.csv")
    io.save_image(final, out / "dual_final.csv")
    io.save_image(single, out / "single_final.csv")
    k_plan = SamplingPlan(Space.K, tuple(trace.k_indices), n)
    (out / "k_plan.json").write_text(io.plan_to_json(k_plan) + "\n")
    return {"solve_seconds": elapsed}


def run_fig3(params, trials, seed, workers, out: Path) -> dict:
    n, s = params["n"], params["s"]
    rows, recs, batches = [], [], []
    for i, snr in enumerate(params["snr"]):
        sub = child_seed(seed, i)
        single = run_batch(TrialSpec(n, s, params["m"], snr=snr), trials, sub, workers=workers)
        dual = run_batch(TrialSpec(n, s, params["m_k"], params["m_x"], snr=snr), trials, sub,
                         workers=workers)
        batches += [single, dual]
        rows.append(_summary_row(single, arm="single", snr=snr, m_k=params["m"], m_x=0))
        rows.append(_summary_row(dual, arm="dual", snr=snr, m_k=params["m_k"], m_x=params["m_x"]))
        recs += _trial_rows(single, arm="single", snr=snr) + _trial_rows(dual, arm="dual", snr=snr)
    io.write_csv(rows, out / "results.csv")
    io.write_jsonl(recs, out / "trials.jsonl")
    return {"solve_seconds": _timing(*batches)}


def run_fig4(params, trials, seed, workers, out: Path) -> dict:
    size, G0 = params["size"], params["G0"]
    total = params["m_k"] + params["m_fd"]
    dual = run_batch(EdgeTrialSpec("phantom", size, params["m_k"], params["m_fd"], G0), trials,
                     seed, workers=workers)
    single = run_batch(EdgeTrialSpec("phantom", size, total, 0, G0), trials, seed, workers=workers)
    io.write_csv([_summary_row(single, arm="single", size=size, m_k=total, m_fd=0),
                  _summary_row(dual, arm="dual", size=size, m_k=params["m_k"],
                               m_fd=params["m_fd"])], out / "results.csv")
    io.write_jsonl(_trial_rows(single, arm="single") + _trial_rows(dual, arm="dual"),
                   out / "trials.jsonl")
    return {"solve_seconds": _timing(single, dual)}


def _grid(params) -> list[int]:
    return list(range(params["m_k_min"], params["m_k_max"] + 1, params["m_k_step"]))


def run_phase(params, trials, seed, workers, out: Path) -> dict:
    t0 = time.perf_counter()
    pt = phase_transition(params["n"], params["s"], params["m_x"], _grid(params), trials,
                          params["target"], seed, effective_sparsity=params["effective_sparsity"],
                          workers=workers)
    elapsed = time.perf_counter() - t0
    io.write_csv([c.to_dict() for c in pt.curve], out / "results.csv",
                 ["m_k", "p_exact", "stderr", "trials", "attempts", "mean_alpha_m_x"])
    recs = [{"m_k": c.m_k, **t.to_dict()} for c in pt.curve for t in c.kept]
    io.write_jsonl(recs, out / "trials.jsonl")
    io.write_json({"s": pt.s, "m_x": pt.m_x, "alpha_m_x": pt.alpha_m_x, "m_k_star": pt.m_k_star,
                   "status": pt.status, "probability_target": pt.probability_target},
                  out / "phase_point.json")
    return {"solve_seconds": elapsed, "m_k_star": pt.m_k_star}


def run_scaling(params, trials, seed, workers, out: Path) -> dict:
    t0 = time.perf_counter()
    n = params["n"]
    points, rows, recs = [], [], []
    for s in params["s_values"]:
        for a in params["alpha_m_x_values"]:
            if a > s:
                continue
            pt = phase_transition(n, s, a, _grid(params), trials, params["target"],
                                  child_seed(seed, s, a), effective_sparsity=(s - a) if a else None,
                                  stop_at_target=True, workers=workers)
            points.append(pt)
            rows.append({"s": s, "m_x": a, "alpha_m_x": pt.alpha_m_x, "h": pt.h,
                         "m_k_star": pt.m_k_star, "status": pt.status})
            recs.append({"s": s, "m_x": a, "m_k_star": pt.m_k_star,
                         "curve": [c.to_dict() for c in pt.curve]})
    fit = {}
    try:
        C, r2 = fit_scaling(points, n)
        fit.update(C=C, r_squared=r2)
        C0, r20 = fit_scaling([p for p in points if p.m_x == 0], n)
        fit.update(C_single_space=C0, r_squared_single_space=r20,
                   relative_difference=abs(C0 - C) / C)
    except FitError as exc:
        fit["error"] = str(exc)
    io.write_csv(rows, out / "results.csv")
    io.write_jsonl(recs, out / "trials.jsonl")
    io.write_json(fit, out / "fit.json")
    return {"solve_seconds": time.perf_counter() - t0, **fit}


def _nsp_matrix(params, rng) -> np.ndarray:
    q, rows = params["q"], params["rows"]
    if params["matrix"] == "identity":
        return np.eye(q)
    return rng.normal(size=(rows, q))


def run_nsp(params, trials, seed, workers, out: Path) -> dict:
    t0 = time.perf_counter()
    rows, recs = [], []
    draws = 0
    for i in range(trials):
        # with require_guarantee, redraw until the system has gamma < 1
        for attempt in range(params["max_draws"]):
            rng = np.random.default_rng(child_seed(seed, i, attempt))
            A = _nsp_matrix(params, rng)
            g = tnsp_search(A, params["t"], params["L"], workers)
            draws += 1
            if g.gamma < 1.0 or not params["require_guarantee"]:
                break
        rep = verify_exact_recovery_theorem(A, params["t"], params["L"], params["signals"],
                                            child_seed(seed, i, attempt, 1), gamma=g.gamma)
        rows.append({"system": i, "draw": attempt, "gamma": g.gamma, "guaranteed": rep.guaranteed,
                     "exact": rep.exact, "signals": rep.num_signals,
                     "counterexamples": len(rep.counterexamples), "verdict": rep.verdict})
        recs.append({"system": i, "draw": attempt, "matrix": A, "worst_S": g.worst_S,
                     "worst_T": g.worst_T, **rep.to_dict()})
    io.write_csv(rows, out / "results.csv")
    io.write_jsonl(recs, out / "trials.jsonl")
    return {"solve_seconds": time.perf_counter() - t0, "draws": draws}


def run_fig5(params, trials, seed, workers, out: Path) -> dict:
    t0 = time.perf_counter()
    n, G0 = params["n"], params["G0"]
    dual = run_batch(EdgeTrialSpec("step", n, params["m_k"], params["m_fd"], G0,
                                   params["num_steps"]), trials, seed, workers=workers)
    single = run_batch(EdgeTrialSpec("step", n, params["m_single"], 0, G0, params["num_steps"]),
                       trials, seed, workers=workers)
    io.write_csv([_summary_row(single, arm="single", n=n, m_k=params["m_single"], m_fd=0),
                  _summary_row(dual, arm="dual", n=n, m_k=params["m_k"], m_fd=params["m_fd"])],
                 out / "results.csv")
    io.write_jsonl(_trial_rows(single, arm="single") + _trial_rows(dual, arm="dual"),
                   out / "trials.jsonl")
    tp_rows, s_vals, mk, am = [], [], [], []
    grid = _grid(params)
    for steps in params["tp_steps"]:
        pt = edge_turning_point(n, steps, params["tp_m_fd"], grid, params["tp_trials"],
                                params["target"], child_seed(seed, steps), G0, workers=workers)
        tp_rows.append({"s": steps, "m_fd": params["tp_m_fd"], "m_k_star": pt.m_k_star,
                        "alpha_m_x": pt.alpha_m_x, "status": pt.status})
        if pt.reached:
            s_vals.append(steps)
            mk.append(pt.m_k_star)
            am.append(pt.alpha_m_x / params["tp_m_fd"])
    io.write_csv(tp_rows, out / "turning_points.csv")
    fit = {}
    try:
        # one curve through all turning points: alpha_x is the mean measured hit rate
        alpha = float(np.mean(am)) if am else 0.0
        bf = fit_s_bound(s_vals, mk, alpha, params["tp_m_fd"], n)
        fit = {"c0": bf.c0, "alpha_x": alpha, "rms": bf.rms, "m_k_range": bf.m_k_range,
               "relative_rms": bf.relative_rms, "predicted": list(bf.predicted)}
    except FitError as exc:
        fit = {"error": str(exc)}
    io.write_json(fit, out / "fit.json")
    return {"solve_seconds": time.perf_counter() - t0, **fit}


_PHASE_GRID = {
    "m_k_min": Param("int", 4, "smallest k-space budget on the grid", 1),
    "m_k_max": Param("int", 32, "largest k-space budget on the grid", 1),
    "m_k_step": Param("int", 2, "grid step", 1),
    "target": Param("float", 0.8, "P[exact] defining the transition"),
}

EXPERIMENTS: dict[str, Experiment] = {
    "fig1_histograms": Experiment(
        "fig1_histograms", "Fidelity histograms of single- vs dual-space CS on sparse images",
        {"n": Param("int", 64, "pixels", 1), "s": Param("int", 6, "non-zeros", 0),
         "m": Param("int", 9, "single-space k samples", 1),
         "m_k": Param("int", 6, "dual k samples", 1), "m_x": Param("int", 3, "dual x samples", 0),
         "bins": Param("int", 20, "histogram bins", 1)},
        1000, run_fig1,
        (_budget_check("n", [("m", None), ("m_k", "m_x")]), _sparsity_check)),
    "fig2_walkthrough": Experiment(
        "fig2_walkthrough", "One dual-space run with every intermediate written out",
        {"n": Param("int", 64, "pixels", 1), "s": Param("int", 6, "non-zeros", 0),
         "m_k": Param("int", 6, "k samples", 1), "m_x": Param("int", 3, "x samples", 0)},
        1, run_fig2, (_budget_check("n", [("m_k", "m_x")]), _sparsity_check)),
    "fig3_noise_sweep": Experiment(
        "fig3_noise_sweep", "Mean fidelity against image SNR for both programs",
        {"n": Param("int", 64, "pixels", 1), "s": Param("int", 6, "non-zeros", 1),
         "m": Param("int", 9, "single-space k samples", 1),
         "m_k": Param("int", 6, "dual k samples", 1), "m_x": Param("int", 3, "dual x samples", 0),
         "snr": Param("float_list", [1.0, 2.0, 5.0, 10.0, 20.0, 50.0], "SNR grid", 1e-12)},
        200, run_fig3, (_budget_check("n", [("m", None), ("m_k", "m_x")]), _sparsity_check)),
    "fig4_edges": Experiment(
        "fig4_edges", "Phantom edge detection, dual vs single at equal total budget",
        {"size": Param("int", 64, "phantom side length", 4),
         "m_k": Param("int", 82, "k samples", 1), "m_fd": Param("int", 31, "FD samples", 0),
         "G0": Param("float", 0.52, "edge gradient threshold", 1e-12)},
        30, run_fig4, ()),
    "phase_transition": Experiment(
        "phase_transition", "P[exact] against m_k with optional post-selection",
        {"n": Param("int", 64, "pixels", 1), "s": Param("int", 6, "non-zeros", 0),
         "m_x": Param("int", 3, "x samples", 0),
         "effective_sparsity": Param("opt_int", None, "keep trials with this s_T", 0),
         **_PHASE_GRID},
        200, run_phase, (_sparsity_check, _target_check)),
    "scaling_fit": Experiment(
        "scaling_fit", "Fit m_k* = C (s - alpha_x m_x) log n over a grid",
        {"n": Param("int", 64, "pixels", 1),
         "s_values": Param("int_list", [3, 4, 5, 6, 7, 8], "sparsities", 1),
         "alpha_m_x_values": Param("int_list", [0, 1, 2, 3], "post-selected peak hits", 0),
         **{**_PHASE_GRID, "m_k_min": Param("int", 1, "smallest k budget", 1),
            "m_k_max": Param("int", 40, "largest k budget", 1),
            "m_k_step": Param("int", 1, "grid step", 1)}},
        200, run_scaling, (_target_check,)),
    "nsp_check": Experiment(
        "nsp_check", "t-NSP constants and planted-signal recovery checks",
        {"q": Param("int", 10, "columns", 1), "rows": Param("int", 9, "rows", 1),
         "t": Param("int", 8, "unknown-set size", 0), "L": Param("int", 1, "sparsity order", 1),
         "signals": Param("int", 100, "planted signals per system", 1),
         "matrix": Param("str", "gaussian", "system family", choices=("gaussian", "identity")),
         "require_guarantee": Param("bool", True, "redraw until gamma < 1"),
         "max_draws": Param("int", 50, "redraw limit per system", 1)},
        20, run_nsp, (_nsp_check,)),
    "si_fig5_1d_edges": Experiment(
        "si_fig5_1d_edges", "1-D step-signal edge program and turning-point fit",
        {"n": Param("int", 64, "samples", 4), "num_steps": Param("int", 2, "steps", 2),
         "m_k": Param("int", 11, "dual k samples", 1), "m_fd": Param("int", 3, "FD samples", 0),
         "m_single": Param("int", 14, "single-space k samples", 1),
         "G0": Param("float", 0.25, "edge threshold", 1e-12),
         "tp_steps": Param("int_list", [4, 5, 6, 7, 8, 9, 10], "step counts for turning points", 2),
         "tp_m_fd": Param("int", 5, "FD samples for turning points", 0),
         "tp_trials": Param("int", 100, "trials per turning-point grid point", 1),
         **{**_PHASE_GRID, "m_k_min": Param("int", 2, "smallest k budget", 1),
            "m_k_max": Param("int", 59, "largest k budget", 1),
            "m_k_step": Param("int", 1, "grid step", 1)}},
        100, run_fig5,
        (_budget_check("n", [("m_k", "m_fd"), ("m_single", None)]), _target_check)),
}
