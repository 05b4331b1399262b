"""Run every config in scripts/configs and write CSV (plus SVG where a plot exists) to an output directory.

    python3 scripts/run_experiments.py --out-dir results --workers 8
    python3 scripts/run_experiments.py --only mle_vs_ode ode_curve
"""
from __future__ import annotations

import argparse
import pathlib
import time

from plm.harness.config import ExperimentConfig
from plm.harness.experiments import run_experiment
from plm.harness.plot import emit_plot

HERE = pathlib.Path(__file__).resolve().parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=pathlib.Path, default=HERE / "configs")
    ap.add_argument("--out-dir", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="+", help="config stems to run")
    a = ap.parse_args()
    a.out_dir.mkdir(parents=True, exist_ok=True)
    for path in sorted(a.configs.glob("*.cfg")):
        if a.only and path.stem not in a.only:
            continue
        cfg = ExperimentConfig.load(str(path))
        cfg.workers = a.workers
        t0 = time.perf_counter()
        text = run_experiment(cfg)
        (a.out_dir / f"{path.stem}.csv").write_text(text, encoding="utf-8")
        if cfg.kind in ("phase_diagram", "mle_vs_ode"):
            (a.out_dir / f"{path.stem}.svg").write_text(emit_plot(text, cfg.kind), encoding="utf-8")
        print(f"{path.stem}: {time.perf_counter() - t0:.1f}s -> {a.out_dir / path.stem}.csv")


if __name__ == "__main__":
    main()
