"""Property checks with measured margins; any failure means a nonzero exit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dist import WeightDistribution, ld_tail_bound, ld_tail_empirical
from ..match import build_llr, mle
from ..model import generate_sparse
from ..paths import erlang_chernoff, erlang_tail_empirical, sample_bridges, turan_bound, turan_independent_set
from ..posterior import exhaustive_posterior
from ..rng import stream

CHECKS = ("ld_check", "bridge_check", "erlang_check", "turan_check", "posterior_oracle")


@dataclass(frozen=True)
class CheckConfig:
    names: tuple = CHECKS
    seed: int = 0
    samples: int = 100_000
    instances: int = 100


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} margin={self.margin:.6g} {self.detail}"


def _ld(cfg):
    p, q = WeightDistribution.exponential(3.0), WeightDistribution.exponential(1.0)
    est, se = ld_tail_empirical(p, q, 0.0, 20, cfg.samples, stream(cfg.seed, "check-ld"))
    bound = ld_tail_bound(p, q, 0.0, 20)
    margin = bound + 3 * se - est
    return CheckResult("ld_check", margin >= 0, margin, f"est={est:.4g} bound={bound:.4g} se={se:.2g}")


def _bridge(cfg):
    R, _ = sample_bridges(50, min(cfg.samples, 20000), stream(cfg.seed, "check-bridge"))
    end = float(np.max(np.abs(R[:, -1])))
    return CheckResult("bridge_check", end <= 1e-12, 1e-12 - end, f"max|R_ell|={end:.3g}")


def _erlang(cfg):
    worst = math.inf
    parts = []
    for xi in (0.5, 1.5):
        est, se = erlang_tail_empirical(50, xi, cfg.samples, stream(cfg.seed, "check-erlang", xi))
        bound = erlang_chernoff(50, xi)
        worst = min(worst, bound + 3 * se - est)
        parts.append(f"xi={xi}:est={est:.3g}<=bound={bound:.3g}")
    return CheckResult("erlang_check", worst >= 0, worst, " ".join(parts))


def _turan(cfg):
    rng = stream(cfg.seed, "check-turan")
    worst = math.inf
    for _ in range(cfg.instances):
        nv = int(rng.integers(1, 60))
        prob = rng.random()
        iu, ju = np.triu_indices(nv, 1)
        keep = rng.random(len(iu)) < prob
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        got = len(turan_independent_set(nv, edges))
        worst = min(worst, got - turan_bound(nv, len(edges)))
    return CheckResult("turan_check", worst >= 0, worst, f"graphs={cfg.instances}")


def _oracle(cfg):
    p, q = WeightDistribution.exponential(2.0), WeightDistribution.exponential(1.0)
    worst = 0.0
    for k in range(cfg.instances):
        inst = generate_sparse(5, 5.0, p, q, cfg.seed * 1_000_003 + k)
        g = build_llr(inst)
        best = g.objective(exhaustive_posterior(g).argmax())
        worst = max(worst, abs(g.objective(mle(g)) - best))
    return CheckResult("posterior_oracle", worst <= 1e-9, 1e-9 - worst, f"instances={cfg.instances}")


_RUN = {"ld_check": _ld, "bridge_check": _bridge, "erlang_check": _erlang, "turan_check": _turan,
        "posterior_oracle": _oracle}


def run_checks(cfg: CheckConfig = CheckConfig()) -> list[CheckResult]:
    unknown = set(cfg.names) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    return [_RUN[name](cfg) for name in cfg.names]
