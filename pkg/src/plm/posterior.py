"""Exact Gibbs posterior over perfect matchings for small instances."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dist import llr as _llr
from .match import LlrGraph, build_llr
from .model import PlantedInstance

MAX_EXHAUSTIVE_N = 9


def excess_weight(edges, instance: PlantedInstance) -> float:
    """Σ_blue llr − Σ_red llr over an edge set, red meaning planted.

    A blue pair absent from the observable graph contributes −∞.
    """
    if instance.planted is None:
        raise ValueError("excess weight needs the planted permutation")
    total = 0.0
    for i, j in edges:
        v = float(_llr(instance.P, instance.Q, instance.weight(int(i), int(j))))
        if instance.planted[i] == j:
            total -= v
        else:
            total += v
    return total


def symmetric_difference(perm, truth) -> list[tuple[int, int]]:
    """Edges of M △ M* as (left, right) pairs."""
    perm, truth = np.asarray(perm), np.asarray(truth)
    diff = np.flatnonzero(perm != truth)
    return [(int(i), int(perm[i])) for i in diff] + [(int(i), int(truth[i])) for i in diff]


def heap_permutations(n: int) -> np.ndarray:
    """All n! permutations of range(n) in Heap's order, one per row."""
    a = list(range(n))
    out = np.empty((math.factorial(n), n), dtype=np.int8 if n < 128 else np.int64)
    out[0] = a
    c = [0] * n
    k = 1
    i = 1
    while i < n:
        if c[i] < i:
            if i % 2 == 0:
                a[0], a[i] = a[i], a[0]
            else:
                a[c[i]], a[i] = a[i], a[c[i]]
            out[k] = a
            k += 1
            c[i] += 1
            i = 1
        else:
            c[i] = 0
            i += 1
    return out


@dataclass
class PosteriorTable:
    """Matchings with finite likelihood and their normalised log masses."""

    perms: np.ndarray
    log_mass: np.ndarray
    log_z: float

    @property
    def n(self) -> int:
        return self.perms.shape[1]

    def masses(self) -> np.ndarray:
        return np.exp(self.log_mass)

    def index_of(self, perm) -> int:
        hit = np.flatnonzero(np.all(self.perms == np.asarray(perm), axis=1))
        return int(hit[0]) if len(hit) else -1

    def log_mass_of(self, perm) -> float:
        k = self.index_of(perm)
        return float(self.log_mass[k]) if k >= 0 else -math.inf

    def argmax(self) -> np.ndarray:
        return self.perms[int(np.argmax(self.log_mass))].astype(np.int64)


def _llr_matrix(source) -> np.ndarray:
    if isinstance(source, PlantedInstance):
        return build_llr(source).dense()
    if isinstance(source, LlrGraph):
        return source.dense()
    return np.asarray(source, dtype=float)


def exhaustive_posterior(source) -> PosteriorTable:
    """μ_W(m) ∝ exp(Σ_e∈m llr(e)) over every permutation with finite likelihood."""
    mat = _llr_matrix(source)
    n = mat.shape[0]
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration capped at n={MAX_EXHAUSTIVE_N}")
    perms = heap_permutations(n)
    scores = mat[np.arange(n)[None, :], perms.astype(np.int64)].sum(axis=1)
    keep = scores > -np.inf
    perms, scores = perms[keep], scores[keep]
    if np.any(scores == np.inf):
        raise ValueError("infinite likelihood ratio; posterior is degenerate")
    log_z = float(logsumexp(scores))
    return PosteriorTable(perms.astype(np.int64), scores - log_z, log_z)


def marginals(table: PosteriorTable) -> np.ndarray:
    n = table.n
    w = table.masses()
    out = np.zeros((n, n))
    for i in range(n):
        np.add.at(out[i], table.perms[:, i], w)
    return out


def _project(marg: np.ndarray) -> np.ndarray:
    """Greedy repair: take highest-marginal edges that keep a matching, then fill in."""
    n = marg.shape[0]
    perm = np.full(n, -1, np.int64)
    used = np.zeros(n, bool)
    order = np.lexsort((np.tile(np.arange(n), n), np.repeat(np.arange(n), n), -marg.ravel()))
    for k in order:
        i, j = divmod(int(k), n)
        if perm[i] < 0 and not used[j] and marg[i, j] > 0:
            perm[i] = j
            used[j] = True
    free = iter(np.flatnonzero(~used).tolist())
    for i in np.flatnonzero(perm < 0):
        perm[i] = next(free)
    return perm


def marginal_map(table: PosteriorTable, n: int | None = None, tol: float = 1e-12):
    """Edges whose posterior marginal is at least 1/2, plus a projection to a perfect matching.

    Returns ``(edges, perm)`` with ``edges`` a sorted list of (i, j).
    """
    marg = marginals(table)
    if n is not None and n != marg.shape[0]:
        raise ValueError("n does not match the table")
    r, c = np.nonzero(marg >= 0.5 - tol)
    edges = sorted(zip(r.tolist(), c.tolist()))
    return edges, _project(marg)


def sample_posterior(table: PosteriorTable, rng: np.random.Generator, size: int | None = None):
    cdf = np.cumsum(table.masses())
    cdf /= cdf[-1]
    u = rng.random(1 if size is None else size)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    out = table.perms[idx]
    return out[0] if size is None else out


def mass_split(table: PosteriorTable, truth, delta: float) -> tuple[float, float, float, float]:
    """(good, bad, good/μ(M*), bad/μ(M*)) with good meaning |M △ M*|/n < 2δ."""
    truth = np.asarray(truth)
    n = table.n
    err = 2.0 * np.count_nonzero(table.perms != truth[None, :], axis=1) / n
    w = table.masses()
    good = float(w[err < 2 * delta].sum())
    bad = float(w[err >= 2 * delta].sum())
    star = math.exp(table.log_mass_of(truth))
    rg = good / star if star > 0 else math.inf
    rb = bad / star if star > 0 else (math.inf if bad > 0 else 0.0)
    return good, bad, rg, rb


def derangements(ell: int) -> int:
    """!ℓ by the recurrence D(ℓ) = (ℓ−1)(D(ℓ−1) + D(ℓ−2)); equals round(ℓ!/e) for ℓ ≥ 1."""
    if ell < 0:
        raise ValueError("negative size")
    a, b = 1, 0
    if ell == 0:
        return 1
    for k in range(2, ell + 1):
        a, b = b, (k - 1) * (a + b)
    return b


def count_matchings_at_distance(n: int, ell: int) -> int:
    """Number of perfect matchings differing from a fixed one on exactly ℓ left vertices."""
    if not 0 <= ell <= n:
        raise ValueError("need 0 <= ell <= n")
    return derangements(ell) * math.comb(n, ell)


def dump_table(table: PosteriorTable) -> str:
    """Lines ``<perm> <log-mass>`` sorted by descending mass."""
    order = sorted(range(len(table.log_mass)), key=lambda k: (-table.log_mass[k], tuple(table.perms[k])))
    lines = [" ".join(str(int(x)) for x in table.perms[k]) + f" {table.log_mass[k]:.17g}" for k in order]
    return "\n".join(lines) + ("\n" if lines else "")
