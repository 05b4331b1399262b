"""Alternating cycles: representation, verification, and the DFS long-cycle search.

A vertex is a tuple ``("L", i)`` or ``("R", j)``. A cycle is stored as a
cyclic vertex sequence; edge t joins ``vertices[t]`` and ``vertices[t+1]``
(wrapping around). Red edges belong to the planted matching, blue ones do not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dist import llr as _llr
from ..model import PlantedInstance
from ..rng import stable_hash

RED, BLUE = "red", "blue"


def canonical_key(vertices) -> str:
    """Hash of the lexicographically smallest rotation over both directions.

    Vertices of a cycle are distinct, so every minimal rotation starts at the
    smallest vertex; only the direction has to be decided.
    """
    seq = [tuple(v) for v in vertices]
    if not seq:
        return "0" * 16
    k = min(range(len(seq)), key=seq.__getitem__)
    fwd = seq[k:] + seq[:k]
    bwd = [fwd[0]] + fwd[1:][::-1]
    best = min(fwd, bwd)
    return f"{stable_hash(tuple(best)):016x}"


@dataclass
class AlternatingCycle:
    vertices: list
    colors: list
    delta: float = math.nan
    key: str = field(init=False)

    def __post_init__(self):
        self.vertices = [tuple(v) for v in self.vertices]
        if len(self.colors) != len(self.vertices):
            raise ValueError("one color per edge")
        self.key = canonical_key(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[int, int, str]]:
        """(left, right, color) per edge in traversal order."""
        out = []
        m = len(self.vertices)
        for t in range(m):
            a, b = self.vertices[t], self.vertices[(t + 1) % m]
            left, right = (a, b) if a[0] == "L" else (b, a)
            out.append((left[1], right[1], self.colors[t]))
        return out

    def left_vertices(self) -> list[int]:
        return [v[1] for v in self.vertices if v[0] == "L"]


def _edge_color(instance: PlantedInstance, i: int, j: int) -> str:
    return RED if int(instance.planted[i]) == j else BLUE


def cycle_from_sequence(seq, instance: PlantedInstance) -> AlternatingCycle:
    """Attach colors from the planted matching and Δ from the instance weights."""
    seq = [tuple(v) for v in seq]
    cyc = AlternatingCycle(seq, [_edge_color(instance, i, j) for i, j, _ in _raw_edges(seq)])
    rep = verify_alternating(cyc, instance)
    cyc.delta = rep.delta
    return cyc


def _sides_ok(seq, t) -> bool:
    return seq[t][0] != seq[(t + 1) % len(seq)][0]


def _raw_edges(seq):
    m = len(seq)
    for t in range(m):
        a, b = seq[t], seq[(t + 1) % m]
        left, right = (a, b) if a[0] == "L" else (b, a)
        yield left[1], right[1], None


@dataclass
class VerifyReport:
    ok: bool
    reason: str
    n_red: int
    n_blue: int
    delta: float

    def __bool__(self) -> bool:
        return self.ok


def verify_alternating(cycle, instance: PlantedInstance) -> VerifyReport:
    """Check an alternating cycle against an instance and compute Δ(C).

    Accepts an :class:`AlternatingCycle` or a bare vertex sequence. The report
    names the first violation found.
    """
    if instance.planted is None:
        raise ValueError("verification needs the planted permutation")
    if isinstance(cycle, AlternatingCycle):
        seq, claimed = cycle.vertices, cycle.colors
    else:
        seq, claimed = [tuple(v) for v in cycle], None
    m = len(seq)

    def bad(reason):
        return VerifyReport(False, reason, 0, 0, math.nan)

    if m % 2:
        return bad("odd length")
    if m < 4:
        return bad("shorter than 4")
    if any(v[0] not in ("L", "R") or not 0 <= v[1] < instance.n for v in seq):
        return bad("vertex out of range")
    if len(set(seq)) != m:
        return bad("repeated vertex")
    n_red = n_blue = 0
    delta = 0.0
    prev = None
    for t, (i, j, _) in enumerate(_raw_edges(seq)):
        if not _sides_ok(seq, t):
            return bad(f"edge {t} joins two vertices on the same side")
        color = _edge_color(instance, i, j)
        if claimed is not None and claimed[t] != color:
            return bad(f"edge {t} labelled {claimed[t]} but is {color}")
        if color == prev:
            return bad(f"colors do not alternate at edge {t}")
        w = instance.weight(i, j)
        if math.isnan(w):
            return bad(f"edge ({i},{j}) absent from the graph")
        v = float(_llr(instance.P, instance.Q, w))
        if color == RED:
            n_red += 1
            delta -= v
        else:
            n_blue += 1
            delta += v
        prev = color
    if _edge_color(instance, *next(iter(_raw_edges(seq)))[:2]) == prev:
        return bad("colors do not alternate across the wrap")
    return VerifyReport(True, "ok", n_red, n_blue, delta)


def flip_cycle(cycle: AlternatingCycle, planted) -> np.ndarray:
    """Matching obtained by swapping the cycle's red edges for its blue ones."""
    perm = np.array(planted, dtype=np.int64, copy=True)
    for i, j, color in cycle.edges():
        if color == BLUE:
            perm[i] = j
    if len(np.unique(perm)) != len(perm):
        raise ValueError("flip does not give a perfect matching")
    return perm


# --- DFS on pair-labelled bicolored graphs -------------------------------------
# Left vertex i and right vertex i' form the red pair i. ``blue[i]`` lists the
# right labels j' with a blue edge (i, j').


def dfs_long_cycle(blue, subset=None, window_factor: float = 1.0) -> AlternatingCycle | None:
    """Alternating DFS with unexplored / dead / path state.

    The search stops the first time |D| = |U|; at that moment a blue edge from
    one of the last w path vertices back to one of the first w closes the
    cycle, where w = ceil(window_factor·|V|/16) (|V|/16 is the last-n/32 window
    when |V| = n/2). The closing pair that maximises the cycle length is used.
    Returns None when no closing edge exists.
    """
    nv = len(blue)
    verts = sorted(set(range(nv)) if subset is None else {int(v) for v in subset})
    if not verts:
        return None
    in_v = np.zeros(nv, bool)
    in_v[verts] = True
    unexplored = in_v.copy()
    cursor = np.zeros(nv, np.int64)
    n_u, n_d = len(verts), 0
    path: list[int] = []
    start_ptr = 0

    def pop_start():
        nonlocal start_ptr, n_u
        while start_ptr < len(verts) and not unexplored[verts[start_ptr]]:
            start_ptr += 1
        v = verts[start_ptr]
        unexplored[v] = False
        n_u -= 1
        return v

    path.append(pop_start())
    while n_d != n_u:
        if not path:
            path.append(pop_start())
            continue
        v = path[-1]
        nb = blue[v]
        c = cursor[v]
        hit = np.flatnonzero(unexplored[nb[c:]])
        c = c + int(hit[0]) if hit.size else len(nb)
        cursor[v] = c
        if c < len(nb):
            u = int(nb[c])
            unexplored[u] = False
            n_u -= 1
            path.append(u)
        else:
            path.pop()
            n_d += 1
    r = len(path)
    if r < 2:
        return None
    w = min(r, max(1, math.ceil(window_factor * len(verts) / 16)))
    pos = {v: t for t, v in enumerate(path[:w])}
    best = None
    for i in range(r - 1, r - w - 1, -1):
        for j in blue[path[i]]:
            t = pos.get(int(j))
            if t is not None and t < i and (best is None or i - t > best[0] - best[1]):
                best = (i, t)
    if best is None:
        return None
    i, j = best
    seq, colors = [], []
    for t in range(j, i + 1):
        seq += [("R", path[t]), ("L", path[t])]
        colors += [RED, BLUE]
    return AlternatingCycle(seq, colors)


def _half_subsets(n: int, k: int, rng: np.random.Generator, max_tries: int) -> list[np.ndarray]:
    """Up to k random n/2-subsets with pairwise symmetric difference ≥ n/3."""
    half = n // 2
    need = n / 3
    masks: list[np.ndarray] = []
    tries = 0
    while len(masks) < k and tries < max_tries:
        tries += 1
        mask = np.zeros(n, bool)
        mask[rng.choice(n, size=half, replace=False)] = True
        if all(np.count_nonzero(mask ^ other) >= need for other in masks):
            masks.append(mask)
    return [np.flatnonzero(m) for m in masks]


def many_cycles(blue, k: int, rng: np.random.Generator, window_factor: float = 1.0,
                max_tries: int | None = None) -> list[AlternatingCycle]:
    """DFS long cycles on k well-separated half-size subsets, deduplicated by key."""
    if k < 1:
        raise ValueError("k must be at least 1")
    subsets = _half_subsets(len(blue), k, rng, max_tries if max_tries is not None else 50 * k)
    seen: dict[str, AlternatingCycle] = {}
    for s in subsets:
        cyc = dfs_long_cycle(blue, s, window_factor)
        if cyc is not None and cyc.key not in seen:
            seen[cyc.key] = cyc
    return list(seen.values())


def bipartite_blue(n: int, prob: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Blue adjacency of a planted bipartite graph: each (i, j'), j ≠ i, with probability prob."""
    out = []
    for i in range(n):
        nb = np.flatnonzero(rng.random(n) < prob)
        out.append(nb[nb != i])
    return out
