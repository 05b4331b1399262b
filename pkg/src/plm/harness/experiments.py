"""Monte Carlo sweeps. Trials run on a process pool; aggregation is a fold over
results sorted by (point, trial), so output never depends on scheduling."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import asymptotics
from ..cyclefinder import CycleFinderConfig, TreeParams, find_cycles, flip_cycle, verify_alternating
from ..dist import WeightDistribution, ld_tail_bound, ld_tail_empirical
from ..match import InfeasibleMatching, build_llr, mle
from ..model import ModelSpec, generate_dense, generate_exponential, generate_sparse, generate_unweighted
from ..paths import bridge_range_prob, sample_bridges
from ..posterior import exhaustive_posterior
from ..rng import stable_hash, stream
from .config import ExperimentConfig
from .report import mean_ci, proportion_ci, to_csv


@dataclass(frozen=True)
class TrialResult:
    point: tuple
    point_index: int
    trial: int
    seed: int
    values: dict
    wall: float


def trial_seed(master: int, point: tuple, trial: int) -> int:
    return stable_hash(int(master), tuple(point), int(trial))


def make_instance(model: str, point: dict, seed: int):
    n = int(point["n"])
    if model == "unweighted":
        return generate_unweighted(n, point["d"], seed)
    if model == "exponential":
        return generate_exponential(n, point["lam"], seed)
    spec = ModelSpec.parse(model, n)
    if spec.kind == "exponential":
        return generate_exponential(n, spec.lam, seed)
    if spec.kind == "dense":
        return generate_dense(n, spec.p, spec.rho, seed)
    return generate_sparse(n, point["d"], spec.p, spec.q, seed)


@lru_cache(maxsize=None)
def _ode(lam: float) -> asymptotics.OdeSolution:
    return asymptotics.solve(lam)


def _mle_trial(model, point, seed):
    inst = make_instance(model, point, seed)
    g = build_llr(inst)
    try:
        perm = mle(g)
    except InfeasibleMatching:
        return {"failed": True, "error": math.nan, "objective": math.nan}
    return {"failed": False, "error": float(2.0 * np.count_nonzero(perm != inst.planted) / inst.n),
            "objective": g.objective(perm)}


def _ld_trial(model, point, seed):
    p, q = WeightDistribution.exponential(point["lam"]), WeightDistribution.exponential(1.0)
    ell, x, m = int(point["ell"]), point["x"], int(point["samples"])
    est, _ = ld_tail_empirical(p, q, x, ell, m, stream(seed, "ld"))
    return {"hits": int(round(est * m)), "samples": m}


def _bridge_trial(model, point, seed):
    ell, A, m = int(point["ell"]), point["A"], int(point["samples"])
    rng = stream(seed, "bridge")
    R, _ = sample_bridges(ell, min(m, 1000), rng)
    end = float(np.max(np.abs(R[:, -1])))
    p, _ = bridge_range_prob(ell, A, m, rng)
    return {"hits": int(round(p * m)), "samples": m, "endpoint": end}


def _cycle_trial(model, point, seed):
    inst = make_instance(model, point, seed)
    cap = int(point.get("size_cap", 16))
    cfg = CycleFinderConfig(trees=TreeParams.unweighted(inst.d, size_cap=cap), tau_red=0.0, tau_blue=0.0)
    res = find_cycles(inst, cfg, seed)
    ok = all(verify_alternating(c, inst).ok for c in res.cycles)
    for c in res.cycles:
        flip_cycle(c, inst.planted)
    longest = max((len(c) for c in res.cycles), default=0)
    sg = res.super_graph
    return {"cycles": len(res.cycles), "longest": longest, "verified": ok,
            "success": ok and longest >= 0.001 * inst.n,
            "K1": sg.K1 if sg else 0, "K2": sg.K2 if sg else 0}


def _oracle_trial(model, point, seed):
    inst = make_instance(model, point, seed)
    g = build_llr(inst)
    obj = g.objective(mle(g))
    table = exhaustive_posterior(g)
    best = g.objective(table.argmax())
    return {"diff": abs(obj - best)}


_TRIALS = {
    "phase_diagram": _mle_trial,
    "mle_vs_ode": _mle_trial,
    "ld_check": _ld_trial,
    "bridge_check": _bridge_trial,
    "cyclefind_demo": _cycle_trial,
    "posterior_oracle": _oracle_trial,
}


def _run_task(task) -> TrialResult:
    kind, model, point, idx, trial, seed = task
    t0 = time.perf_counter()
    vals = _TRIALS[kind](model, dict(point), seed)
    return TrialResult(point, idx, trial, seed, vals, time.perf_counter() - t0)


def run_trials(config: ExperimentConfig) -> list[TrialResult]:
    tasks = [(config.kind, config.model, pt, i, t, trial_seed(config.seed, pt, t))
             for i, pt in enumerate(config.points()) for t in range(config.trials)]
    if config.workers == 1 or len(tasks) == 1:
        out = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            out = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    return sorted(out, key=lambda r: (r.point_index, r.trial))


def _group(results):
    groups: dict[int, list[TrialResult]] = {}
    for r in results:
        groups.setdefault(r.point_index, []).append(r)
    return [groups[k] for k in sorted(groups)]


def _aggregate_mle(config, results, with_ode: bool):
    keys = list(config.grid)
    header = keys + ["trials", "failures", "mean_error", "ci_lo", "ci_hi", "flagged"]
    if with_ode:
        header += ["ode_error", "rel_gap"]
    rows = []
    for grp in _group(results):
        errs = [r.values["error"] for r in grp if not r.values["failed"]]
        fails = len(grp) - len(errs)
        m, lo, hi = mean_ci(errs)
        row = dict(grp[0].point)
        row.update(trials=len(grp), failures=fails, mean_error=m, ci_lo=lo, ci_hi=hi, flagged=fails > 0.1 * len(grp))
        if with_ode:
            ode = _ode(float(row["lam"])).error
            row.update(ode_error=ode, rel_gap=abs(m - ode) / ode)
        rows.append(row)
    return to_csv(header, rows)


def _aggregate_ld(config, results):
    keys = list(config.grid)
    header = keys + ["estimate", "stderr", "bound", "pass"]
    rows = []
    for grp in _group(results):
        pt = dict(grp[0].point)
        hits = sum(r.values["hits"] for r in grp)
        m = sum(r.values["samples"] for r in grp)
        est = hits / m
        se = math.sqrt(est * (1 - est) / m)
        p, q = WeightDistribution.exponential(pt["lam"]), WeightDistribution.exponential(1.0)
        bound = ld_tail_bound(p, q, pt["x"], int(pt["ell"]))
        rows.append({**pt, "estimate": est, "stderr": se, "bound": bound, "pass": est <= bound + 3 * se})
    return to_csv(header, rows)


def _aggregate_bridge(config, results):
    keys = list(config.grid)
    header = keys + ["estimate", "stderr", "endpoint_max", "pass"]
    rows = []
    for grp in _group(results):
        pt = dict(grp[0].point)
        hits = sum(r.values["hits"] for r in grp)
        m = sum(r.values["samples"] for r in grp)
        est = hits / m
        end = max(r.values["endpoint"] for r in grp)
        rows.append({**pt, "estimate": est, "stderr": math.sqrt(est * (1 - est) / m), "endpoint_max": end,
                     "pass": end <= 1e-12})
    return to_csv(header, rows)


def _aggregate_cycles(config, results):
    keys = list(config.grid)
    header = keys + ["trials", "successes", "rate", "ci_lo", "ci_hi", "mean_cycles", "mean_longest", "mean_K1",
                     "mean_K2", "all_verified"]
    rows = []
    for grp in _group(results):
        k = sum(bool(r.values["success"]) for r in grp)
        lo, hi = proportion_ci(k, len(grp))
        rows.append({**dict(grp[0].point), "trials": len(grp), "successes": k, "rate": k / len(grp),
                     "ci_lo": lo, "ci_hi": hi,
                     "mean_cycles": float(np.mean([r.values["cycles"] for r in grp])),
                     "mean_longest": float(np.mean([r.values["longest"] for r in grp])),
                     "mean_K1": float(np.mean([r.values["K1"] for r in grp])),
                     "mean_K2": float(np.mean([r.values["K2"] for r in grp])),
                     "all_verified": all(r.values["verified"] for r in grp)})
    return to_csv(header, rows)


def _aggregate_oracle(config, results):
    keys = list(config.grid)
    header = keys + ["trials", "mismatches", "max_abs_diff", "pass"]
    rows = []
    for grp in _group(results):
        diffs = [r.values["diff"] for r in grp]
        bad = sum(d > 1e-9 for d in diffs)
        rows.append({**dict(grp[0].point), "trials": len(grp), "mismatches": bad, "max_abs_diff": max(diffs),
                     "pass": bad == 0})
    return to_csv(header, rows)


def ode_rows(lams, tol: float = 1e-13) -> str:
    header = ["lambda", "delta", "error", "x_max", "remainder_bound"]
    rows = []
    for lam in lams:
        s = _ode(float(lam)) if tol == 1e-13 else asymptotics.solve(float(lam), tol)
        rows.append({"lambda": float(lam), "delta": s.delta, "error": s.error, "x_max": s.x_max,
                     "remainder_bound": s.remainder_bound()})
    return to_csv(header, rows)


def run_experiment(config: ExperimentConfig) -> str:
    """Run the configured sweep and return its CSV text."""
    if config.kind == "ode_curve":
        return ode_rows(config.grid["lam"])
    results = run_trials(config)
    if config.kind == "phase_diagram":
        return _aggregate_mle(config, results, with_ode=False)
    if config.kind == "mle_vs_ode":
        return _aggregate_mle(config, results, with_ode=True)
    if config.kind == "ld_check":
        return _aggregate_ld(config, results)
    if config.kind == "bridge_check":
        return _aggregate_bridge(config, results)
    if config.kind == "cyclefind_demo":
        return _aggregate_cycles(config, results)
    return _aggregate_oracle(config, results)
