"""Two-stage cycle finding: trees, sprinkling, super-graph DFS, expansion."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dist import llr_median
from ..model import PlantedInstance
from ..rng import stream
from .cycles import BLUE, RED, AlternatingCycle, dfs_long_cycle, many_cycles, verify_alternating
from .sprinkle import SuperGraph, sprinkle
from .trees import Forest, TreeParams, build_trees, select_k1


class ConfigError(ValueError):
    """Parameters cannot guarantee augmenting cycles."""


def default_thresholds(instance: PlantedInstance) -> tuple[float, float]:
    """(τ_red, τ_blue): medians of llr under P and under Q."""
    p, q = instance.P, instance.Q
    return llr_median(p, q, p), llr_median(p, q, q)


def exponential_thresholds(n: int, lam: float, tau: float) -> tuple[float, float]:
    """τ_red = log(nλ) and τ_blue = log(nλ) − (λ−1/n)τ for the exponential model.

    With these, every reserved vertex survives and a blue edge is kept iff its
    weight is at most τ.
    """
    base = math.log(n * lam)
    return base, base - (lam - 1.0 / n) * tau


@dataclass
class CycleFinderConfig:
    trees: TreeParams = field(default_factory=TreeParams)
    tau_red: float | None = None
    tau_blue: float | None = None
    s: float | None = None
    subsets: int = 8
    window_factor: float = 16.0
    check_central: bool = True

    def validate(self) -> None:
        """Weighted runs need ζ·4HL ≥ 12(τ_red − τ_blue) so that every expanded cycle is augmenting."""
        t = self.trees
        if t.select and self.tau_red is not None and self.tau_blue is not None:
            if t.zeta * 4 * t.H * t.L < 12 * (self.tau_red - self.tau_blue):
                raise ConfigError("zeta*4HL must be at least 12(tau_red - tau_blue)")


def _block_order(c: AlternatingCycle) -> list[int]:
    """Left super vertices a_1, ..., a_r with blue super edges (a_t, a_{t+1}′)."""
    seq, colors = c.vertices, c.colors
    m = len(seq)
    if not any(seq[t][0] == "R" and colors[t] == RED for t in range(m)):
        seq = seq[::-1]
        colors = [colors[(m - 2 - t) % m] for t in range(m)]
    start = next(t for t in range(m) if seq[t][0] == "R" and colors[t] == RED)
    order = []
    for t in range(start, start + m, 2):
        order.append(seq[(t + 1) % m][1])
    return order


def expand_cycle(c_super: AlternatingCycle, forest, sg: SuperGraph, planted) -> tuple[AlternatingCycle, float]:
    """Replace each red super edge by its tree path and stitch hubs with witness blue edges.

    Returns the cycle on G and Δ computed incrementally from the tree and
    stitching bookkeeping.
    """
    if len(c_super) < 4:
        raise ValueError("a super cycle needs at least two super vertices")
    order = _block_order(c_super)
    r = len(order)
    seq, colors = [], []
    delta = 0.0
    wits = []
    for t in range(r):
        a, nxt = order[t], order[(t + 1) % r]
        if (a, nxt) not in sg.witness:
            raise RuntimeError(f"missing witness for super edge ({a}, {nxt}')")
        wits.append(sg.witness[(a, nxt)])
    for t in range(r):
        a = order[t]
        tree = forest[sg.k2[a]]
        v = wits[t - 1][1]
        u = wits[t][0]
        r_pair = sg.b_wit[v]
        l_pair = sg.a_wit[u]
        path = tree.path_vertices(r_pair, l_pair, planted)
        block = [("R", int(planted[v])), ("L", v)] + path + [("R", int(planted[u])), ("L", u)]
        seq += block
        colors += [RED, BLUE] + [RED if k % 2 == 0 else BLUE for k in range(len(path) - 1)] + [BLUE, RED, BLUE]
        delta += tree.path_delta(r_pair, l_pair)
        delta += sg.stitch_llr[("B", v)] + sg.stitch_llr[("A", u)] + sg.stitch_llr[("S", u, wits[t][1])]
        delta -= sg.hub_red_llr[v] + sg.hub_red_llr[u]
    cyc = AlternatingCycle(seq, colors)
    cyc.delta = delta
    return cyc, delta


@dataclass
class PipelineResult:
    cycles: list
    forest: Forest
    super_graph: SuperGraph | None
    reserved: np.ndarray
    rejected: int = 0

    def summary(self) -> dict:
        out = {"K": len(self.forest), "m": self.forest.m}
        if self.super_graph is not None:
            out.update(self.super_graph.summary())
        return out


def find_cycles(instance: PlantedInstance, config: CycleFinderConfig, seed: int) -> PipelineResult:
    """Run the full pipeline. Every returned cycle has passed verify_alternating."""
    config.validate()
    n = instance.n
    p = config.trees
    rng = stream(seed, "reserve")
    reserved = np.sort(rng.choice(n, size=int(p.gamma * n), replace=False))
    forest = build_trees(instance, reserved, p)
    tau_red, tau_blue = config.tau_red, config.tau_blue
    if tau_red is None or tau_blue is None:
        dr, db = default_thresholds(instance)
        tau_red = dr if tau_red is None else tau_red
        tau_blue = db if tau_blue is None else tau_blue
    s = config.s
    if s is None:
        s = p.size_cap if not p.select else p.min_leaves()
    k1 = select_k1(forest, s, tau_red if (p.select and config.check_central) else None)
    sg = sprinkle(instance, forest, reserved, tau_red, tau_blue, k1=k1, s=s)
    if sg.K2 < 2:
        return PipelineResult([], forest, sg, reserved)
    found = {}
    first = dfs_long_cycle(sg.blue, None, config.window_factor)
    supers = ([first] if first is not None else [])
    if config.subsets > 0:
        supers += many_cycles(sg.blue, config.subsets, stream(seed, "subsets"), config.window_factor)
    rejected = 0
    for cs in supers:
        if cs.key in found:
            continue
        cyc, _ = expand_cycle(cs, forest, sg, instance.planted)
        rep = verify_alternating(cyc, instance)
        if not rep.ok:
            rejected += 1
            continue
        cyc.delta = rep.delta
        found[cs.key] = cyc
    return PipelineResult(list(found.values()), forest, sg, reserved, rejected)
