"""Connect tree leaf sets through reserved vertices into a contracted super graph."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dist import llr as _llr
from ..model import PlantedInstance


@dataclass
class SuperGraph:
    """Super vertex a stands for tree ``k2[a]``; red edges are (a, a′).

    ``blue[a]`` lists b with a blue super edge (a, b′), witnessed by the G₂
    edge ``witness[(a, b)] = (u, v)`` joining u ∈ U_{k2[a]} to π*(v) with
    v ∈ V_{k2[b]}. ``U[a]`` and ``V[a]`` hold left vertices of V*; ``a_wit[u]``
    is a leaf l ∈ L with blue edge (l, π*(u)) and ``b_wit[v]`` a right-leaf
    pair r with blue edge (v, π*(r)).
    """

    k1: list
    k2: list
    blue: list
    witness: dict
    U: list
    V: list
    a_wit: dict
    b_wit: dict
    v_star: np.ndarray
    beta: float
    eta: float
    s: float
    b: float
    kappa: float
    d_super: float
    stitch_llr: dict = field(default_factory=dict)
    hub_red_llr: dict = field(default_factory=dict)

    @property
    def K1(self) -> int:
        return len(self.k1)

    @property
    def K2(self) -> int:
        return len(self.k2)

    def summary(self) -> dict:
        return {"K1": self.K1, "K2": self.K2, "beta": self.beta, "b": self.b,
                "kappa": self.kappa, "d_super": self.d_super}


def blue_rate(instance: PlantedInstance, tau_blue: float, grid: int = 1 << 16) -> float:
    """η = d·Q[llr ≥ τ_blue], by quantile inversion of Q."""
    u = (np.arange(grid) + 0.5) / grid
    vals = np.asarray(_llr(instance.P, instance.Q, instance.Q.ppf(u)), float)
    return float(instance.d * np.mean(vals >= tau_blue))


def sprinkle(instance: PlantedInstance, forest, reserved, tau_red: float, tau_blue: float,
             k1: list | None = None, s: float | None = None) -> SuperGraph:
    """Hub sets, overlap removal, 𝒦₂ and the blue super edges.

    ``k1`` selects the trees to use (all by default); ``s`` is the leaf-set
    size entering b = βsη/4 (defaults to the smallest leaf set among them).
    """
    if not (math.isfinite(tau_red) and math.isfinite(tau_blue)):
        raise ValueError("thresholds must be finite")
    n = instance.n
    planted = np.asarray(instance.planted, np.int64)
    inv = np.empty(n, np.int64)
    inv[planted] = np.arange(n)
    trees = list(forest)
    k1 = list(range(len(trees))) if k1 is None else list(k1)
    reserved = np.asarray(sorted({int(v) for v in reserved}), np.int64)
    in_res = np.zeros(n, bool)
    in_res[reserved] = True

    vals = np.asarray(_llr(instance.P, instance.Q, instance.weights), float)
    red = instance.cols == planted[instance.rows]
    red_llr = np.full(n, -np.inf)
    red_llr[instance.rows[red]] = vals[red]
    star = in_res & (red_llr <= tau_red)
    v_star = np.flatnonzero(star)

    # G₂: blue edges outside Vᶜ × (Vᶜ)′ that pass the threshold, in pair labels
    qcol = inv[instance.cols]
    g2 = ~red & (vals >= tau_blue) & (in_res[instance.rows] | in_res[qcol])
    rows, qs, lv = instance.rows[g2], qcol[g2], vals[g2]

    owner_l = np.full(n, -1, np.int64)  # pair -> position in k1, for L leaves
    owner_r = np.full(n, -1, np.int64)  # pair -> position in k1, for R leaf pairs
    for a, k in enumerate(k1):
        t = trees[k]
        if np.any(in_res[t.L]) or np.any(in_res[t.R_pairs]):
            raise ValueError("trees overlap the reserved set")
        owner_l[t.L] = a
        owner_r[t.R_pairs] = a

    # A'_k: v' ∈ (V*)' with an edge from L_k; B_k: v ∈ V* with an edge to R_k
    a_sets = [dict() for _ in k1]
    b_sets = [dict() for _ in k1]
    for i, q, w in zip(rows.tolist(), qs.tolist(), lv.tolist()):
        if star[q] and owner_l[i] >= 0:
            a_sets[owner_l[i]].setdefault(q, (i, w))
        if star[i] and owner_r[q] >= 0:
            b_sets[owner_r[q]].setdefault(i, (q, w))
    deg = np.zeros(n, np.int64)
    for a in range(len(k1)):
        for v in a_sets[a]:
            deg[v] += 1
        for v in b_sets[a]:
            deg[v] += 1
    overlap = deg >= 2

    beta = len(v_star) / n
    eta = blue_rate(instance, tau_blue)
    if s is None:
        s = min((min(len(trees[k].L), len(trees[k].R)) for k in k1), default=0)
    b = beta * s * eta / 4
    U = [sorted(v for v in a_sets[a] if not overlap[v]) for a in range(len(k1))]
    V = [sorted(v for v in b_sets[a] if not overlap[v]) for a in range(len(k1))]
    keep = [a for a in range(len(k1)) if len(U[a]) >= b and len(V[a]) >= b and len(U[a]) and len(V[a])]
    k2 = [k1[a] for a in keep]
    U2 = [np.asarray(U[a], np.int64) for a in keep]
    V2 = [np.asarray(V[a], np.int64) for a in keep]
    a_wit, b_wit, stitch, hub_red = {}, {}, {}, {}
    for a in keep:
        for u in U[a]:
            a_wit[u] = a_sets[a][u][0]
            stitch[("A", u)] = a_sets[a][u][1]
        for v in V[a]:
            b_wit[v] = b_sets[a][v][0]
            stitch[("B", v)] = b_sets[a][v][1]
    hub_u = np.full(n, -1, np.int64)
    hub_v = np.full(n, -1, np.int64)
    for pos, arr in enumerate(U2):
        hub_u[arr] = pos
        for u in arr.tolist():
            hub_red[u] = float(red_llr[u])
    for pos, arr in enumerate(V2):
        hub_v[arr] = pos
        for v in arr.tolist():
            hub_red[v] = float(red_llr[v])

    blue: list[set] = [set() for _ in keep]
    witness = {}
    for i, q, w in zip(rows.tolist(), qs.tolist(), lv.tolist()):
        a, c = hub_u[i], hub_v[q]
        if a >= 0 and c >= 0 and a != c and (a, c) not in witness:
            witness[(int(a), int(c))] = (i, q)
            stitch[("S", i, q)] = w
            blue[a].add(int(c))
    blue_arr = [np.asarray(sorted(x), np.int64) for x in blue]
    kappa = 2 * len(k1) * s * eta / n
    d_super = len(k1) * b * b * eta / (32 * n)
    return SuperGraph(k1, k2, blue_arr, witness, U2, V2, a_wit, b_wit, v_star, beta, eta, s, b,
                      kappa, d_super, stitch, hub_red)


def hubs_disjoint(sg: SuperGraph) -> bool:
    """U sets pairwise disjoint, V sets pairwise disjoint, and no vertex in both."""
    us = np.concatenate(sg.U) if sg.U else np.zeros(0, np.int64)
    vs = np.concatenate(sg.V) if sg.V else np.zeros(0, np.int64)
    return len(np.unique(us)) == len(us) and len(np.unique(vs)) == len(vs) and not set(us.tolist()) & set(vs.tolist())
