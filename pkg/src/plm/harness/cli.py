"""Command-line entry point: ``plm <subcommand> ...``.

Exit status: 0 on success, 1 when a property check fails, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import math
import sys


from ..cyclefinder import CycleFinderConfig, TreeParams, find_cycles
from ..dist import SpecParseError, divergences, exponential_threshold, parse_spec
from ..match import build_llr, min_weight_matching, mle, reconstruction_error, threshold_estimator
from ..model import read_instance, write_instance
from .checks import CHECKS, CheckConfig, run_checks
from .config import ConfigError, ExperimentConfig, default_workers
from .experiments import make_instance, ode_rows, run_experiment
from .plot import SchemaError, emit_plot
from .report import fmt, parse_csv


class UsageError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_generate(a) -> int:
    point = {"n": a.n, "d": a.d, "lam": a.lam}
    model = a.model
    if model.startswith("exponential") and a.lam is not None:
        model = "exponential"
    inst = make_instance(model, point, a.seed)
    _write(write_instance(inst, include_planted=not a.blind), a.out)
    return 0


def cmd_solve(a) -> int:
    inst = read_instance(_read(a.instance))
    g = build_llr(inst)
    if a.estimator == "mle":
        perm = mle(g)
    elif a.estimator == "minweight":
        perm = min_weight_matching(inst)
    else:
        perm = threshold_estimator(inst)
    lines = [f"{i} -> {int(j)}" for i, j in enumerate(perm)]
    obj = g.objective(perm)
    if inst.planted is not None:
        lines.append(f"error={fmt(reconstruction_error(perm, inst.planted))} objective={fmt(obj)}")
    else:
        lines.append(f"objective={fmt(obj)}")
    _write("\n".join(lines) + "\n", a.out)
    return 0


def cmd_threshold(a) -> int:
    if a.exp_n is not None:
        _write(f"lambda_c={fmt(exponential_threshold(a.exp_n))}\n", a.out)
        return 0
    if a.p is None or a.q is None or a.d is None:
        raise UsageError("threshold needs --p, --q and --d (or --exp-n)")
    p, q = parse_spec(a.p), parse_spec(a.q)
    rep = divergences(p, q)
    margin = math.sqrt(a.d) * rep.bhattacharyya - 1
    regime = "almost-perfect-recovery" if margin < 0 else "no-almost-perfect-recovery"
    _write(f"B={fmt(rep.bhattacharyya)} alpha={fmt(rep.alpha)} kl_pq={fmt(rep.kl_pq)} kl_qp={fmt(rep.kl_qp)} "
           f"margin={fmt(margin)} regime={regime}\n", a.out)
    return 0


def _grid(spec: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"bad grid {spec!r}; expected a:b:step") from None
    if step <= 0 or hi < lo:
        raise UsageError("grid needs step > 0 and a <= b")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return [lo + i * step for i in range(k + 1)]


def cmd_ode(a) -> int:
    lams = _grid(a.grid) if a.grid else ([a.lam] if a.lam is not None else None)
    if not lams:
        raise UsageError("ode needs --lambda or --grid")
    _write(ode_rows(lams, a.tol), a.out)
    return 0


def cmd_cyclefind(a) -> int:
    inst = read_instance(_read(a.instance))
    if inst.planted is None:
        raise UsageError("cyclefind needs an instance with the #PLANTED trailer")
    if inst.model.kind == "unweighted":
        tp = TreeParams.unweighted(inst.d, size_cap=a.size_cap)
        cfg = CycleFinderConfig(trees=tp, tau_red=0.0, tau_blue=0.0, subsets=a.subsets)
    else:
        tp = TreeParams.defaults(inst.P, inst.Q, inst.d, H=a.H, L=a.L)
        over = {k: v for k, v in (("gamma", a.gamma), ("zeta", a.zeta), ("m", a.m)) if v is not None}
        if over:
            tp = TreeParams(**{**tp.__dict__, **over})
        cfg = CycleFinderConfig(trees=tp, tau_red=a.tau_red, tau_blue=a.tau_blue, subsets=a.subsets)
    res = find_cycles(inst, cfg, a.seed)
    lines = [f"len={len(c)} delta={fmt(c.delta)} key={c.key}" for c in res.cycles]
    lines.append(" ".join(f"{k}={fmt(v)}" for k, v in res.summary().items()))
    _write("\n".join(lines) + "\n", a.out)
    return 0


def _load_config(a) -> ExperimentConfig:
    if not a.config:
        raise UsageError("--config is required")
    cfg = ExperimentConfig.load(a.config)
    if a.workers is not None:
        cfg.workers = a.workers
    if a.seed is not None:
        cfg.seed = a.seed
    if a.out is not None:
        cfg.out = a.out
    return cfg


def cmd_experiment(a) -> int:
    cfg = _load_config(a)
    text = run_experiment(cfg)
    _write(text, cfg.out)
    if a.plot:
        _write(emit_plot(text, cfg.kind), a.plot)
    return 0


def cmd_check(a) -> int:
    if a.config:
        cfg = _load_config(a)
        text = run_experiment(cfg)
        _write(text, cfg.out)
        header, rows = parse_csv(text)
        if "pass" not in header:
            raise UsageError(f"experiment kind {cfg.kind} has no pass column")
        return 0 if all(r["pass"] == "1" for r in rows) else 1
    names = tuple(a.only) if a.only else CHECKS
    res = run_checks(CheckConfig(names=names, seed=a.seed or 0, samples=a.samples, instances=a.instances))
    _write("".join(r.line() + "\n" for r in res), a.out)
    return 0 if all(r.passed for r in res) else 1


def cmd_plot(a) -> int:
    _write(emit_plot(_read(a.csv), a.kind), a.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--workers", type=int, default=None)
    ap = argparse.ArgumentParser(prog="plm", description="Planted matching experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample an instance file")
    g.add_argument("--model", default="unweighted")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=float, default=1.0)
    g.add_argument("--lam", "--lambda", dest="lam", type=float, default=None)
    g.add_argument("--blind", action="store_true", help="omit the planted trailer")
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="estimate the planted matching")
    s.add_argument("instance")
    s.add_argument("--estimator", choices=("mle", "threshold", "minweight"), default="mle")
    s.set_defaults(fn=cmd_solve)

    t = sub.add_parser("threshold", parents=[common], help="divergences and the recovery margin")
    t.add_argument("--p")
    t.add_argument("--q")
    t.add_argument("--d", type=float)
    t.add_argument("--exp-n", type=float, default=None, help="threshold λ of the exponential model at this n")
    t.set_defaults(fn=cmd_threshold)

    o = sub.add_parser("ode", parents=[common], help="limiting error of the exponential model")
    o.add_argument("--lambda", dest="lam", type=float)
    o.add_argument("--grid")
    o.add_argument("--tol", type=float, default=1e-13)
    o.set_defaults(fn=cmd_ode)

    c = sub.add_parser("cyclefind", parents=[common], help="search for alternating cycles")
    c.add_argument("instance")
    c.add_argument("--size-cap", type=int, default=16)
    c.add_argument("--subsets", type=int, default=8)
    c.add_argument("--H", type=int, default=4)
    c.add_argument("--L", type=int, default=8)
    c.add_argument("--gamma", type=float)
    c.add_argument("--zeta", type=float)
    c.add_argument("--m", type=int)
    c.add_argument("--tau-red", type=float)
    c.add_argument("--tau-blue", type=float)
    c.set_defaults(fn=cmd_cyclefind)

    e = sub.add_parser("experiment", parents=[common], help="run a configured sweep")
    e.add_argument("--plot", default=None, help="also write an SVG figure here")
    e.set_defaults(fn=cmd_experiment)

    k = sub.add_parser("check", parents=[common], help="run property checks")
    k.add_argument("--only", nargs="+", choices=CHECKS)
    k.add_argument("--samples", type=int, default=100_000)
    k.add_argument("--instances", type=int, default=100)
    k.set_defaults(fn=cmd_check)

    p = sub.add_parser("plot", parents=[common], help="SVG figure from an experiment CSV")
    p.add_argument("csv")
    p.add_argument("--kind", required=True)
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    if getattr(a, "seed", None) is None and a.cmd in ("generate", "cyclefind"):
        a.seed = 0
    if a.workers is None and a.cmd in ("experiment", "check"):
        a.workers = None if a.config else default_workers()
    try:
        return a.fn(a)
    except (UsageError, ConfigError, SpecParseError, SchemaError, FileNotFoundError) as e:
        print(f"plm: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
