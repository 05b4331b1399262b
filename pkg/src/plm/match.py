"""Maximum-likelihood matching, min-weight matching, and error metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import min_weight_full_bipartite_matching

from .dist import llr as _llr
from .model import PlantedInstance

LEX_REFINE_MAX_N = 16


class InfeasibleMatching(ValueError):
    """No perfect matching with finite objective exists."""


@dataclass
class LlrGraph:
    """Per-edge log-likelihood ratios; pairs not listed carry −∞."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @staticmethod
    def from_matrix(mat) -> "LlrGraph":
        mat = np.asarray(mat, dtype=float)
        r, c = np.nonzero(mat > -np.inf)
        return LlrGraph(mat.shape[0], r.astype(np.int64), c.astype(np.int64), mat[r, c])

    def dense(self) -> np.ndarray:
        out = np.full((self.n, self.n), -np.inf)
        out[self.rows, self.cols] = self.values
        return out

    @property
    def complete(self) -> bool:
        return len(self.values) == self.n * self.n and bool(np.all(self.values > -np.inf))

    def objective(self, perm) -> float:
        m = self.dense() if self.n <= 4096 else None
        perm = np.asarray(perm)
        if m is not None:
            return float(m[np.arange(self.n), perm].sum())
        lookup = dict(zip(zip(self.rows.tolist(), self.cols.tolist()), self.values.tolist()))
        return float(sum(lookup.get((i, int(j)), -math.inf) for i, j in enumerate(perm)))


def build_llr(instance: PlantedInstance) -> LlrGraph:
    """log(P/Q) on present edges. The per-edge constant log(n/d) of the sparse
    likelihood is dropped: every perfect matching uses n edges, so it shifts all
    objectives equally."""
    vals = np.asarray(_llr(instance.P, instance.Q, instance.weights), dtype=float)
    keep = vals > -np.inf
    return LlrGraph(instance.n, instance.rows[keep], instance.cols[keep], vals[keep])


def check_matching(perm, n: int | None = None) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    m = len(perm) if n is None else n
    if len(perm) != m or not np.array_equal(np.sort(perm), np.arange(m)):
        raise ValueError("not a bijection on [0, n)")
    return perm


def _solve_max(n: int, rows, cols, vals) -> tuple[np.ndarray, float]:
    """Exact max-weight perfect matching over the listed finite edges."""
    if n == 0:
        return np.zeros(0, np.int64), 0.0
    if len(vals) == n * n:
        mat = np.empty((n, n))
        mat[rows, cols] = vals
        r, c = linear_sum_assignment(mat, maximize=True)
        perm = np.empty(n, np.int64)
        perm[r] = c
        return perm, float(mat[r, c].sum())
    if len(vals) == 0:
        raise InfeasibleMatching("no edges")
    cost = (vals.max() - vals) + 1.0  # shift keeps every matching's rank; avoids zeros
    g = csr_matrix((cost, (rows, cols)), shape=(n, n))
    try:
        r, c = min_weight_full_bipartite_matching(g)
    except ValueError as e:
        raise InfeasibleMatching(str(e)) from None
    perm = np.empty(n, np.int64)
    perm[r] = c
    lookup = {}
    for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
        lookup[(i, j)] = v
    return perm, float(sum(lookup[(i, int(perm[i]))] for i in range(n)))


def _lex_refine(n: int, rows, cols, vals, best: float, tol: float) -> np.ndarray:
    """Lexicographically smallest optimal permutation, row by row."""
    mat = np.full((n, n), -np.inf)
    mat[rows, cols] = vals
    fixed_rows: list[int] = []
    fixed_cols: list[int] = []
    acc = 0.0
    perm = np.empty(n, np.int64)
    for i in range(n):
        for j in range(n):
            if j in fixed_cols or mat[i, j] == -np.inf:
                continue
            fr = fixed_rows + [i]
            fc = fixed_cols + [j]
            rest_r = [a for a in range(n) if a not in fr]
            rest_c = [b for b in range(n) if b not in fc]
            sub = mat[np.ix_(rest_r, rest_c)]
            rr, cc = np.nonzero(sub > -np.inf)
            try:
                _, val = _solve_max(len(rest_r), rr, cc, sub[rr, cc])
            except InfeasibleMatching:
                continue
            if acc + mat[i, j] + val >= best - tol:
                perm[i] = j
                acc += mat[i, j]
                fixed_rows.append(i)
                fixed_cols.append(j)
                break
        else:
            raise InfeasibleMatching("refinement lost feasibility")
    return perm


def mle(graph: LlrGraph, tol: float = 1e-9) -> np.ndarray:
    """argmax over perfect matchings of Σ llr.

    −∞ pairs are left out of the solver graph. +∞ entries are ranked first by
    count, then by the finite remainder. Ties are broken toward the
    lexicographically smallest permutation when n ≤ 16.
    """
    n = graph.n
    vals = np.asarray(graph.values, dtype=float)
    rows, cols = np.asarray(graph.rows), np.asarray(graph.cols)
    pos = vals == np.inf
    if pos.any():
        fin = vals[~pos]
        span = (fin.max() - fin.min()) if len(fin) else 0.0
        vals = np.where(pos, (n + 1) * (span + 1.0) + (fin.max() if len(fin) else 0.0), vals)
    perm, best = _solve_max(n, rows, cols, vals)
    if n <= LEX_REFINE_MAX_N:
        perm = _lex_refine(n, rows, cols, vals, best, tol * max(1.0, abs(best)))
    return perm


def min_weight_matching(instance: PlantedInstance, tol: float = 1e-9) -> np.ndarray:
    """argmin of total raw weight over perfect matchings of the observable graph."""
    g = LlrGraph(instance.n, instance.rows, instance.cols, -instance.weights)
    return mle(g, tol)


def reconstruction_error(estimate, truth) -> float:
    """|M △ M̂| / n."""
    estimate, truth = np.asarray(estimate), np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ValueError("size mismatch")
    n = len(truth)
    return 2.0 * np.count_nonzero(estimate != truth) / n


def threshold_estimator(instance: PlantedInstance) -> np.ndarray:
    """Per-row minimum-weight proposals, conflicts resolved greedily by weight.

    Rows left without a partner take the lightest free incident edge; any that
    remain are paired with free columns in index order.
    """
    n = instance.n
    perm = np.full(n, -1, np.int64)
    taken = np.zeros(n, bool)
    order = np.lexsort((instance.cols, instance.rows, instance.weights))
    first = np.full(n, -1, np.int64)
    for k in order:
        i = instance.rows[k]
        if first[i] < 0:
            first[i] = k
    props = sorted((instance.weights[k], instance.rows[k], instance.cols[k]) for k in first if k >= 0)
    for _, i, j in props:
        if not taken[j]:
            perm[i] = j
            taken[j] = True
    for k in order:
        i, j = instance.rows[k], instance.cols[k]
        if perm[i] < 0 and not taken[j]:
            perm[i] = j
            taken[j] = True
    free = iter(np.flatnonzero(~taken).tolist())
    for i in np.flatnonzero(perm < 0):
        perm[i] = next(free)
    return perm
