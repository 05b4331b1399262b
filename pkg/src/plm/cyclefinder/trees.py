"""Two-sided color-alternating trees grown on the non-reserved part of the graph.

Vertices are addressed by planted pair: pair q is left vertex q together with
its planted partner π*(q) on the right. A left subtree hangs child pair q off
parent pair p through the blue edge (p, π*(q)) and the red edge (q, π*(q)); a
right subtree uses the blue edge (q, π*(p)) instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dist import divergences, llr as _llr
from ..dist import WeightDistribution
from ..model import PlantedInstance


@dataclass(frozen=True)
class TreeParams:
    """Knobs of the tree construction.

    ``select=False`` gives the unweighted variant: no leaf selection, each
    side grows breadth-first until it holds ``size_cap`` vertices or dies, and
    no padding is applied.
    """

    gamma: float = 0.05
    zeta: float = 0.1
    H: int = 4
    L: int = 8
    eps: float = 0.1
    alpha: float = 0.0
    m: int | None = None
    select: bool = True
    size_cap: int = 16

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if self.H < 1 or self.L < 1 or self.size_cap < 1:
            raise ValueError("H, L and size_cap must be positive")
        if self.eps <= 0 or self.alpha < 0:
            raise ValueError("need eps > 0 and alpha >= 0")

    def budget(self, n: int) -> int:
        """Per-side vertex budget m, rounded up and capped so at least one tree fits."""
        if not self.select:
            return self.size_cap
        if self.m is not None:
            m = int(self.m)
        else:
            log_m = 2 * self.H * self.L * math.log1p(self.eps) + 3 * self.H * self.alpha + self.eps * self.H
            m = math.ceil(math.exp(min(log_m, 700.0)))
        return max(1, min(m, int(self.gamma * n) // 2))

    def min_leaves(self) -> float:
        """(1+3ε/4)^{2HL}: leaf count a good weighted tree reaches on each side."""
        return (1 + 0.75 * self.eps) ** (2 * self.H * self.L)

    @staticmethod
    def defaults(p: WeightDistribution, q: WeightDistribution, d: float, H: int = 4, L: int = 8) -> "TreeParams":
        """γ = ε/32 and ζ = min(ε/32, KL(P‖Q)+KL(Q‖P)) with 1+ε = √d·B(P,Q)."""
        rep = divergences(p, q)
        eps = math.sqrt(d) * rep.bhattacharyya - 1
        if eps <= 0:
            raise ValueError("defaults need √d·B(P,Q) > 1")
        return TreeParams(gamma=eps / 32, zeta=min(eps / 32, rep.kl_pq + rep.kl_qp), H=H, L=L,
                          eps=eps, alpha=rep.alpha)

    @staticmethod
    def unweighted(d: float, size_cap: int = 16) -> "TreeParams":
        """γ = ε/2 with √d = 1+ε, selection off."""
        eps = math.sqrt(d) - 1
        if eps <= 0:
            raise ValueError("need d > 1")
        return TreeParams(gamma=min(eps / 2, 0.49), zeta=0.0, H=1, L=1, eps=eps, alpha=0.0,
                          select=False, size_cap=size_cap)


@dataclass
class PairGraph:
    """Blue edges of G₁ in pair labels, both directions, with their llr values."""

    n: int
    planted: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    out_llr: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    in_llr: np.ndarray
    red_llr: np.ndarray

    @staticmethod
    def from_instance(instance: PlantedInstance, allowed: np.ndarray) -> "PairGraph":
        """``allowed`` marks the pairs of G₁; edges touching other pairs are dropped."""
        if instance.planted is None:
            raise ValueError("trees need the planted permutation")
        n = instance.n
        planted = np.asarray(instance.planted, np.int64)
        inv = np.empty(n, np.int64)
        inv[planted] = np.arange(n)
        vals = np.asarray(_llr(instance.P, instance.Q, instance.weights), float)
        red_llr = np.full(n, -np.inf)
        red = instance.cols == planted[instance.rows]
        red_llr[instance.rows[red]] = vals[red]
        q = inv[instance.cols]
        keep = ~red & allowed[instance.rows] & allowed[q]
        src, dst, lv = instance.rows[keep], q[keep], vals[keep]
        o = np.lexsort((dst, src))
        i = np.lexsort((src, dst))
        return PairGraph(n, planted,
                         np.searchsorted(src[o], np.arange(n + 1)), dst[o], lv[o],
                         np.searchsorted(dst[i], np.arange(n + 1)), src[i], lv[i], red_llr)


@dataclass
class TwoSidedTree:
    """Left and right alternating subtrees joined by the red root edge (i_k, i_k′).

    ``left_parent`` / ``right_parent`` map a pair to its parent pair (the root
    maps to -1); ``*_delta`` holds the running Δ from the root along the tree.
    ``L`` lists left vertices, ``R`` right vertices.
    """

    root: int
    root_right: int
    central_llr: float
    left_parent: dict = field(default_factory=dict)
    right_parent: dict = field(default_factory=dict)
    left_delta: dict = field(default_factory=dict)
    right_delta: dict = field(default_factory=dict)
    L: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    R: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    R_pairs: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    left_used: int = 0
    right_used: int = 0
    padding: list = field(default_factory=list)
    terminated: bool = False
    candidates: int = 0
    selected: int = 0

    def pairs(self) -> set[int]:
        return set(self.left_parent) | set(self.right_parent) | set(self.padding)

    def left_path(self, q: int) -> list[int]:
        """Pairs from the root down to left pair q."""
        out = [q]
        while self.left_parent[out[-1]] >= 0:
            out.append(self.left_parent[out[-1]])
        return out[::-1]

    def right_path(self, q: int) -> list[int]:
        """Pairs from right pair q up to the root."""
        out = [q]
        while self.right_parent[out[-1]] >= 0:
            out.append(self.right_parent[out[-1]])
        return out

    def path_vertices(self, r_pair: int, l_pair: int, planted) -> list[tuple[str, int]]:
        """Alternating path from right leaf π*(r) to left leaf l through the root edge.

        Starts and ends with a red edge.
        """
        seq = []
        for p in self.right_path(r_pair):
            seq += [("R", int(planted[p])), ("L", p)]
        for p in self.left_path(l_pair)[1:]:
            seq += [("R", int(planted[p])), ("L", p)]
        return seq

    def path_delta(self, r_pair: int, l_pair: int) -> float:
        return self.right_delta[r_pair] + self.left_delta[l_pair] - self.central_llr


@dataclass
class Forest:
    trees: list
    m: int
    planned: int
    exhausted: bool
    unexplored_left: int

    def __iter__(self):
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __getitem__(self, k):
        return self.trees[k]


class _Pool:
    """Unexplored pairs with O(1) removal and smallest-index lookup."""

    def __init__(self, mask: np.ndarray):
        self.free = mask.copy()
        self.count = int(mask.sum())
        self.ptr = 0

    def take(self, q: int) -> None:
        self.free[q] = False
        self.count -= 1

    def smallest(self) -> int:
        while not self.free[self.ptr]:
            self.ptr += 1
        return self.ptr

    def first(self, k: int) -> list[int]:
        out = []
        j = self.ptr
        while len(out) < k:
            if self.free[j]:
                out.append(j)
            j += 1
        return out


def _grow(g: PairGraph, pool: _Pool, root: int, side: str, params: TreeParams, cap: int,
          used: int, tree: TwoSidedTree) -> tuple[list[int], int, bool]:
    """Grow one subtree. Returns (leaf pairs, pairs used, terminated)."""
    ptr, idx, lv = (g.out_ptr, g.out_idx, g.out_llr) if side == "L" else (g.in_ptr, g.in_idx, g.in_llr)
    parent = tree.left_parent if side == "L" else tree.right_parent
    total = tree.left_delta if side == "L" else tree.right_delta
    parent[root] = -1
    total[root] = 0.0
    if not params.select:
        members = [root]
        gen = [root]
        while gen and used < cap:
            nxt = []
            for v in gen:
                for k in range(ptr[v], ptr[v + 1]):
                    q = int(idx[k])
                    if used >= cap:
                        break
                    if pool.free[q]:
                        pool.take(q)
                        used += 1
                        parent[q] = v
                        total[q] = total[v] + lv[k] - g.red_llr[q]
                        nxt.append(q)
            members += nxt
            gen = sorted(nxt)
        return members, used, False
    roots = [root]
    for _ in range(params.L):
        epoch = {v: 0.0 for v in roots}
        gen = sorted(roots)
        for _ in range(params.H):
            nxt = []
            for v in gen:
                for k in range(ptr[v], ptr[v + 1]):
                    q = int(idx[k])
                    if not pool.free[q]:
                        continue
                    if used >= cap:
                        return [], used, True
                    pool.take(q)
                    used += 1
                    parent[q] = v
                    step = lv[k] - g.red_llr[q]
                    epoch[q] = epoch[v] + step
                    total[q] = total[v] + step
                    nxt.append(q)
            gen = sorted(nxt)
        tree.candidates += len(gen)
        roots = [q for q in gen if epoch[q] >= params.zeta * params.H]
        tree.selected += len(roots)
        if not roots:
            return [], used, False
    return sorted(roots), used, False


def build_trees(instance: PlantedInstance, reserved, params: TreeParams, graph: PairGraph | None = None) -> Forest:
    """Grow K = ⌊γn/(2m)⌋ two-sided trees on G₁ = G[Vᶜ × (Vᶜ)′].

    Each tree is rooted at the smallest unexplored pair. In the weighted
    variant each side stops once it would exceed m pairs (the tree then yields
    no leaves) and is padded with the smallest unexplored indices so that it
    uses exactly m pairs. Production stops early when fewer pairs remain than a
    tree needs; ``Forest.exhausted`` records this.
    """
    n = instance.n
    reserved = np.asarray(sorted({int(v) for v in reserved}), np.int64)
    if len(reserved) != int(params.gamma * n):
        raise ValueError("reserved set must have floor(gamma*n) vertices")
    allowed = np.ones(n, bool)
    allowed[reserved] = False
    g = graph if graph is not None else PairGraph.from_instance(instance, allowed)
    pool = _Pool(allowed)
    m = params.budget(n)
    planned = max(int(params.gamma * n) // (2 * m), 0)
    trees = []
    exhausted = False
    target = n - 2 * len(reserved)
    while True:
        if params.select:
            if len(trees) >= planned:
                break
            if pool.count < 2 * m:
                exhausted = True
                break
        elif pool.count <= max(target, 0):
            break
        root = pool.smallest()
        pool.take(root)
        t = TwoSidedTree(root=root, root_right=int(g.planted[root]), central_llr=float(g.red_llr[root]))
        leaves_l, used_l, term_l = _grow(g, pool, root, "L", params, m, 1, t)
        if params.select:
            pad = pool.first(m - used_l)
            for q in pad:
                pool.take(q)
            t.padding += pad
        leaves_r, used_r, term_r = _grow(g, pool, root, "R", params, m, 0 if params.select else 1, t)
        if params.select:
            pad = pool.first(m - used_r)
            for q in pad:
                pool.take(q)
            t.padding += pad
            used_l = used_r = m
        t.left_used, t.right_used = used_l, used_r
        t.terminated = term_l or term_r
        if t.terminated:
            leaves_l, leaves_r = [], []
        t.L = np.asarray(sorted(leaves_l), np.int64)
        t.R_pairs = np.asarray(sorted(leaves_r), np.int64)
        t.R = g.planted[t.R_pairs] if len(t.R_pairs) else np.zeros(0, np.int64)
        trees.append(t)
    return Forest(trees, m, planned, exhausted, pool.count)


def select_k1(forest, s: float, tau_red: float | None = None) -> list[int]:
    """Indices of trees with |L_k|, |R_k| ≥ s and, if given, central red llr ≤ τ_red."""
    out = []
    for k, t in enumerate(forest):
        if len(t.L) >= s and len(t.R) >= s and (tau_red is None or t.central_llr <= tau_red):
            out.append(k)
    return out


def check_disjoint(forest, reserved) -> bool:
    """Trees are pairwise vertex-disjoint and avoid the reserved set."""
    seen = {int(v) for v in reserved}
    for t in forest:
        ps = t.pairs()
        if ps & seen:
            return False
        seen |= ps
    return True
