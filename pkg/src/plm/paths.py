"""Alternating-path statistics for the exponential model.

Lightness and uniformity predicates, exp-minus-one bridges, Erlang
utilities, the first-moment bound, and greedy Turán extraction of
vertex-disjoint paths.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln


@dataclass(frozen=True)
class AlternatingPathSample:
    """Red weights φ₁..φ_ℓ and blue weights ψ₁..ψ_{ℓ−1} in path order."""

    red: np.ndarray
    blue: np.ndarray
    starts_left: bool = True

    def __post_init__(self):
        red = np.asarray(self.red, dtype=float)
        blue = np.asarray(self.blue, dtype=float)
        if len(red) != len(blue) + 1:
            raise ValueError("need exactly one more red edge than blue")
        if np.any(red < 0) or np.any(blue < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "red", red)
        object.__setattr__(self, "blue", blue)

    @property
    def ell(self) -> int:
        return len(self.red)


@dataclass(frozen=True)
class PathStats:
    wt_r: float
    wt_b: float
    dev_r: float
    dev_b: float


def _dev(x: np.ndarray) -> float:
    k = len(x)
    if k == 0:
        return 0.0
    tot = x.sum()
    if tot <= 0:
        raise ValueError("total weight is zero; deviation undefined")
    s = np.cumsum(x) * (k / tot) - np.arange(1, k + 1)
    return float(np.max(np.abs(s)))


def path_stats(path: AlternatingPathSample) -> PathStats:
    return PathStats(float(path.red.sum()), float(path.blue.sum()), _dev(path.red), _dev(path.blue))


def light_params(lam: float, zeta: float) -> tuple[float, float]:
    """(a, b) = (2/λ, (2 − ζ)/λ)."""
    return 2.0 / lam, (2.0 - zeta) / lam


def is_light(stats: PathStats, ell: int, a: float, b: float, eta: float) -> bool:
    return abs(stats.wt_r - a * ell) <= eta / 2 and abs(stats.wt_b - b * (ell - 1)) <= eta / 2


def is_uniform(stats: PathStats, A: float) -> bool:
    return stats.dev_r <= A and stats.dev_b <= A


def subpath_excess_ok(path: AlternatingPathSample, n: int, lam: float, zeta0: float, eps: float) -> bool:
    """Every subpath with ℓ′ ≥ ⌈ℓ/3⌉ red edges has Δ ≥ (λ − 1/n)·ζ₀·ε·ℓ′.

    Δ(Q) = −(λ − 1/n)(wt_b(Q) − wt_r(Q)): the per-edge constant log(nλ)
    of the likelihood ratio is left out, as for closed alternating walks.
    """
    ell = path.ell
    if 2 * ell - 1 < 3:
        raise ValueError("path needs at least three edges")
    kappa = lam - 1.0 / n
    cr = np.concatenate([[0.0], np.cumsum(path.red)])
    cb = np.concatenate([[0.0], np.cumsum(path.blue)])
    for lp in range(math.ceil(ell / 3), ell + 1):
        k = np.arange(0, ell - lp + 1)
        wr = cr[k + lp] - cr[k]
        wb = cb[k + lp - 1] - cb[k]
        delta = -kappa * (wb - wr)
        if np.any(delta < kappa * zeta0 * eps * lp):
            return False
    return True


@dataclass(frozen=True)
class BridgeSample:
    R: np.ndarray
    total: float

    @property
    def dev(self) -> float:
        return float(np.max(np.abs(self.R)))


def bridge_from_increments(x: np.ndarray) -> np.ndarray:
    """R_j = Σ_{i≤j}(X_i·ℓ/X − 1) along the last axis, with R_0 = 0 prepended."""
    x = np.asarray(x, dtype=float)
    ell = x.shape[-1]
    s = np.cumsum(x, axis=-1)
    tot = s[..., -1:]
    r = s * ell / tot - np.arange(1, ell + 1)
    r[..., -1] = 0.0  # telescopes to zero; remove rounding residue
    z = np.zeros(x.shape[:-1] + (1,))
    return np.concatenate([z, r], axis=-1)


def sample_bridge(ell: int, rng: np.random.Generator) -> BridgeSample:
    if ell < 1:
        raise ValueError("ell must be positive")
    x = rng.exponential(1.0, ell)
    return BridgeSample(bridge_from_increments(x), float(x.sum()))


def sample_bridges(ell: int, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """m bridges at once: (R of shape (m, ℓ+1), totals of shape (m,))."""
    x = rng.exponential(1.0, (m, ell))
    return bridge_from_increments(x), x.sum(axis=1)


def bridge_range_prob(ell: int, A: float, trials: int, rng: np.random.Generator,
                      chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo P(max_j |R_j| ≤ A) and its standard error."""
    if A >= ell:
        return 1.0, 0.0
    hits = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        R, _ = sample_bridges(ell, m, rng)
        hits += int(np.count_nonzero(np.max(np.abs(R), axis=1) <= A))
        done += m
    p = hits / trials
    return p, math.sqrt(p * (1 - p) / trials)


def fit_bridge_rate(ells, probs, A: float) -> float:
    """Least-squares c in P ≈ exp(−c·ℓ/A²); diagnostic only."""
    ells = np.asarray(ells, float)
    y = -np.log(np.asarray(probs, float))
    x = ells / A**2
    return float(np.dot(x, y) / np.dot(x, x))


def erlang_logpdf(ell: int, rate: float, x):
    x = np.asarray(x, dtype=float)
    if ell == 1:
        out = np.where(x >= 0, math.log(rate) - rate * x, -np.inf)
    else:
        with np.errstate(divide="ignore"):
            out = np.where(x >= 0, ell * math.log(rate) + (ell - 1) * np.log(np.maximum(x, 0)) - rate * x
                           - gammaln(ell), -np.inf)
    return out if out.ndim else float(out)


def erlang_pdf(ell: int, rate: float, x):
    """rate^ℓ x^{ℓ−1} e^{−rate·x} / (ℓ−1)!"""
    if ell < 1 or rate <= 0:
        raise ValueError("need ell >= 1 and rate > 0")
    return np.exp(erlang_logpdf(ell, rate, x))


def erlang_log_interval(ell: int, rate: float, lo: float, hi: float) -> float:
    """log P(lo ≤ Erlang(ℓ, rate) ≤ hi), stable when the probability is astronomically small."""
    lo = max(lo, 0.0)
    if hi <= lo:
        return -math.inf
    mode = (ell - 1) / rate
    ref = float(erlang_logpdf(ell, rate, min(max(mode, lo), hi)))
    val, _ = integrate.quad(lambda x: math.exp(erlang_logpdf(ell, rate, x) - ref), lo, hi,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return ref + math.log(val) if val > 0 else -math.inf


def erlang_chernoff(n: int, xi: float) -> float:
    """exp(−n(ξ − log ξ − 1)); bounds the upper tail for ξ > 1 and the lower tail for ξ < 1."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    if xi == 1:
        return 1.0
    return math.exp(-n * (xi - math.log(xi) - 1.0))


def erlang_tail_empirical(n: int, xi: float, samples: int, rng: np.random.Generator,
                          chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo P(ΣXᵢ ≥ nξ) for ξ > 1, or P(ΣXᵢ ≤ nξ) for ξ < 1, Xᵢ ~ Exp(1)."""
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        s = rng.exponential(1.0, (m, n)).sum(axis=1)
        hits += int(np.count_nonzero(s >= n * xi if xi > 1 else s <= n * xi))
        done += m
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


def log_num_paths(n: int, ell: int) -> float:
    """log |𝒫_ℓ| = log n(n−1)⋯(n−ℓ+1)."""
    if ell > n:
        return -math.inf
    return float(gammaln(n + 1) - gammaln(n - ell + 1))


def log_first_moment_bound(n: int, ell: int, lam: float, zeta: float, eta: float, A: float,
                           p_ell: float) -> float:
    """log of n·(η²λ/(8e³bℓ))·(2b·e^{−b/n})^{ℓ−1}·e^{−ℓ²/n}·p_ℓ."""
    if lam > 4 or eta > 1 or A < 1 or ell < A * A:
        raise ValueError("need lambda <= 4, eta <= 1, A >= 1, ell >= A^2")
    if p_ell <= 0:
        return -math.inf
    b = (2.0 - zeta) / lam
    return (math.log(n) + math.log(eta**2 * lam / (8 * math.e**3 * b * ell))
            + (ell - 1) * (math.log(2 * b) - b / n) - ell**2 / n + math.log(p_ell))


def first_moment_bound(n: int, ell: int, lam: float, zeta: float, eta: float, A: float, p_ell: float) -> float:
    return math.exp(log_first_moment_bound(n, ell, lam, zeta, eta, A, p_ell))


@dataclass(frozen=True)
class LogEstimate:
    """A positive quantity held as its logarithm, with relative standard error."""

    log_value: float
    rel_se: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > -math.inf else 0.0


def log_light_prob(n: int, ell: int, lam: float, zeta: float, eta: float) -> float:
    """log P(path is (a, b, η)-light) with a = 2/λ, b = (2 − ζ)/λ, exactly.

    Red total ~ Erlang(ℓ, λ), blue total ~ Erlang(ℓ−1, 1/n), independent.
    """
    a, b = light_params(lam, zeta)
    lr = erlang_log_interval(ell, lam, a * ell - eta / 2, a * ell + eta / 2)
    if ell == 1:
        return lr
    lb = erlang_log_interval(ell - 1, 1.0 / n, b * (ell - 1) - eta / 2, b * (ell - 1) + eta / 2)
    return lr + lb


def estimate_uniform_prob(ell: int, A: float, trials: int, rng: np.random.Generator) -> LogEstimate:
    """P(A-uniform) = P(dev ≤ A at length ℓ)·P(dev ≤ A at length ℓ−1), by bridge Monte Carlo."""
    pr, sr = bridge_range_prob(ell, A, trials, rng)
    if ell - 1 >= 1:
        pb, sb = bridge_range_prob(ell - 1, A, trials, rng)
    else:
        pb, sb = 1.0, 0.0
    if pr == 0 or pb == 0:
        return LogEstimate(-math.inf, math.inf)
    rel = math.sqrt((sr / pr) ** 2 + (sb / pb) ** 2)
    return LogEstimate(math.log(pr) + math.log(pb), rel)


def estimate_expected_S(n: int, ell: int, lam: float, zeta: float, eta: float, A: float, trials: int,
                        rng: np.random.Generator) -> LogEstimate:
    """E|S| = |𝒫_ℓ|·P(light)·P(A-uniform), using independence of totals and bridges.

    The lightness factor is evaluated exactly (its blue part is far too small
    to sample); uniformity comes from bridge Monte Carlo.
    """
    lp = log_light_prob(n, ell, lam, zeta, eta)
    if lp == -math.inf:
        return LogEstimate(-math.inf, 0.0)
    u = estimate_uniform_prob(ell, A, trials, rng)
    return LogEstimate(log_num_paths(n, ell) + lp + u.log_value, u.rel_se)


def turan_independent_set(num_vertices: int, edges) -> list[int]:
    """Greedy: repeatedly take a minimum-degree vertex and delete its closed neighbourhood.

    The result has size at least |V|²/(2|E| + |V|).
    """
    adj = [set() for _ in range(num_vertices)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    alive = np.ones(num_vertices, bool)
    deg = [len(a) for a in adj]
    heap = [(deg[v], v) for v in range(num_vertices)]
    heapq.heapify(heap)
    chosen = []
    while heap:
        dv, v = heapq.heappop(heap)
        if not alive[v] or dv != deg[v]:
            continue
        chosen.append(v)
        removed = [v] + [u for u in adj[v] if alive[u]]
        for u in removed:
            alive[u] = False
        for u in removed:
            for w in adj[u]:
                if alive[w]:
                    adj[w].discard(u)
                    deg[w] -= 1
                    heapq.heappush(heap, (deg[w], w))
    return sorted(chosen)


def turan_bound(num_vertices: int, num_edges: int) -> float:
    if num_vertices == 0:
        return 0.0
    return num_vertices**2 / (2 * num_edges + num_vertices)


def conflict_graph(vertex_sets) -> tuple[int, list[tuple[int, int]]]:
    """Paths as nodes; an edge joins two paths that share a vertex."""
    owners: dict = {}
    for k, vs in enumerate(vertex_sets):
        for v in set(vs):
            owners.setdefault(v, []).append(k)
    edges = set()
    for ks in owners.values():
        for x in range(len(ks)):
            for y in range(x + 1, len(ks)):
                edges.add((ks[x], ks[y]))
    return len(vertex_sets), sorted(edges)


def extract_disjoint_paths(vertex_sets) -> list[int]:
    """Indices of a pairwise vertex-disjoint subfamily, via Turán on the conflict graph."""
    nv, edges = conflict_graph(vertex_sets)
    return turan_independent_set(nv, edges)
