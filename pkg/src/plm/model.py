"""Planted-matching instance generators, densify reduction and instance files."""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dist import WeightDistribution, llr, parse_spec
from .rng import stream


class InfeasibleDecomposition(ValueError):
    """The mixture Q = t·Q′ + (1−t)·Q̄ would need a negative residual density."""


@dataclass(frozen=True)
class ModelSpec:
    """Which generator produced an instance, with its weight laws."""

    kind: str  # sparse | dense | exponential | unweighted
    p: WeightDistribution
    q: WeightDistribution
    rho: WeightDistribution | None = None
    lam: float | None = None

    def describe(self) -> str:
        if self.kind == "unweighted":
            return "unweighted"
        if self.kind == "exponential":
            return f"exponential(lambda={self.lam!r})"
        if self.kind == "dense":
            return f"dense(p={self.p.to_spec()};rho={self.rho.to_spec()})"
        return f"sparse(p={self.p.to_spec()};q={self.q.to_spec()})"

    @staticmethod
    def parse(desc: str, n: int) -> "ModelSpec":
        if desc == "unweighted":
            one = WeightDistribution.point_mass(1.0)
            return ModelSpec("unweighted", one, one)
        m = re.fullmatch(r"exponential\(lambda=([^)]*)\)", desc)
        if m:
            lam = float(m.group(1))
            return ModelSpec("exponential", WeightDistribution.exponential(lam),
                             WeightDistribution.exponential(1.0 / n), WeightDistribution.exponential(1.0), lam)
        m = re.fullmatch(r"dense\(p=([^;]*);rho=([^)]*)\)", desc)
        if m:
            p, rho = parse_spec(m.group(1)), parse_spec(m.group(2))
            return ModelSpec("dense", p, rho.scaled(n), rho)
        m = re.fullmatch(r"sparse\(p=([^;]*);q=([^)]*)\)", desc)
        if m:
            return ModelSpec("sparse", parse_spec(m.group(1)), parse_spec(m.group(2)))
        raise ValueError(f"unrecognised model descriptor {desc!r}")


@dataclass
class PlantedInstance:
    """Observable weighted bipartite graph plus the hidden planted permutation.

    Edges are stored sorted by (i, j) in three parallel arrays; ``indptr``
    gives per-left-vertex slices (adjacency-list access), and
    ``weight_matrix`` materialises the n×n array (NaN for absent pairs).
    """

    n: int
    d: float
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    planted: np.ndarray | None
    model: ModelSpec
    seed: int
    indptr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        order = np.lexsort((self.cols, self.rows))
        self.rows = np.ascontiguousarray(self.rows[order], dtype=np.int64)
        self.cols = np.ascontiguousarray(self.cols[order], dtype=np.int64)
        self.weights = np.ascontiguousarray(self.weights[order], dtype=float)
        self.indptr = np.searchsorted(self.rows, np.arange(self.n + 1)).astype(np.int64)
        if len(self.rows) > 1:
            same = (self.rows[1:] == self.rows[:-1]) & (self.cols[1:] == self.cols[:-1])
            if same.any():
                raise ValueError("duplicate edge")
        if len(self.rows) and (self.rows.min() < 0 or self.rows.max() >= self.n
                               or self.cols.min() < 0 or self.cols.max() >= self.n):
            raise ValueError("edge index out of range")

    @property
    def P(self) -> WeightDistribution:
        return self.model.p

    @property
    def Q(self) -> WeightDistribution:
        return self.model.q

    @property
    def num_edges(self) -> int:
        return len(self.rows)

    @property
    def is_dense(self) -> bool:
        return self.d > self.n / 4

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.cols[a:b], self.weights[a:b]

    def weight(self, i: int, j: int) -> float:
        """Weight of (i, j), NaN when the pair is absent."""
        a, b = self.indptr[i], self.indptr[i + 1]
        k = a + np.searchsorted(self.cols[a:b], j)
        if k < b and self.cols[k] == j:
            return float(self.weights[k])
        return math.nan

    def weight_matrix(self) -> np.ndarray:
        w = np.full((self.n, self.n), np.nan)
        w[self.rows, self.cols] = self.weights
        return w

    def planted_mask(self) -> np.ndarray:
        if self.planted is None:
            raise ValueError("instance carries no planted permutation")
        return self.cols == self.planted[self.rows]

    def blind(self) -> "PlantedInstance":
        return PlantedInstance(self.n, self.d, self.rows.copy(), self.cols.copy(), self.weights.copy(),
                               None, self.model, self.seed)


def _check_planted(inst: PlantedInstance) -> None:
    if inst.planted is not None and np.count_nonzero(inst.planted_mask()) != inst.n:
        raise AssertionError("planted matching missing from the edge set")


def _sample_offdiag(n: int, prob: float, perm: np.ndarray | None, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Include each pair independently with probability ``prob``.

    With ``perm`` given, only the n(n−1) pairs (i, j≠perm[i]) are candidates;
    otherwise all n² pairs are.
    """
    if prob <= 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    width = n if perm is None else n - 1
    total = n * width
    if prob >= 1:
        lin = np.arange(total, dtype=np.int64)
    elif prob > 0.05 or total <= 200_000:
        lin = np.flatnonzero(rng.random(total) < prob).astype(np.int64)
    else:
        k = int(rng.binomial(total, prob))
        lin = np.sort(rng.choice(total, size=k, replace=False)).astype(np.int64)
    i = lin // width
    c = lin % width
    if perm is None:
        return i, c
    return i, np.where(c < perm[i], c, c + 1)


def generate_sparse(n: int, d: float, p: WeightDistribution, q: WeightDistribution, seed: int,
                    _spec: ModelSpec | None = None) -> PlantedInstance:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (0 < d <= n):
        raise ValueError("need 0 < d <= n")
    perm = stream(seed, "planted").permutation(n).astype(np.int64)
    ui, uj = _sample_offdiag(n, d / n, perm, stream(seed, "structure"))
    wrng = stream(seed, "weights")
    pw = p.sample(wrng, n)
    qw = q.sample(wrng, len(ui))
    rows = np.concatenate([np.arange(n), ui])
    cols = np.concatenate([perm, uj])
    w = np.concatenate([np.asarray(pw, float), np.asarray(qw, float)])
    inst = PlantedInstance(n, float(d), rows, cols, w, perm, _spec or ModelSpec("sparse", p, q), seed)
    _check_planted(inst)
    return inst


def generate_dense(n: int, p: WeightDistribution, rho: WeightDistribution, seed: int,
                   _spec: ModelSpec | None = None) -> PlantedInstance:
    """Complete graph; unplanted weights are n·X with X ~ rho, i.e. density ρ(x/n)/n."""
    if n < 1:
        raise ValueError("n must be positive")
    perm = stream(seed, "planted").permutation(n).astype(np.int64)
    wrng = stream(seed, "weights")
    pw = np.asarray(p.sample(wrng, n), float)
    qw = np.asarray(rho.sample(wrng, (n, n)), float) * n
    qw[np.arange(n), perm] = pw
    rows = np.repeat(np.arange(n), n)
    cols = np.tile(np.arange(n), n)
    spec = _spec or ModelSpec("dense", p, rho.scaled(n), rho)
    inst = PlantedInstance(n, float(n), rows, cols, qw.ravel(), perm, spec, seed)
    _check_planted(inst)
    return inst


def generate_exponential(n: int, lam: float, seed: int) -> PlantedInstance:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    p = WeightDistribution.exponential(lam)
    rho = WeightDistribution.exponential(1.0)
    spec = ModelSpec("exponential", p, WeightDistribution.exponential(1.0 / n), rho, float(lam))
    return generate_dense(n, p, rho, seed, _spec=spec)


def generate_unweighted(n: int, d: float, seed: int) -> PlantedInstance:
    one = WeightDistribution.point_mass(1.0)
    return generate_sparse(n, d, one, one, seed, _spec=ModelSpec("unweighted", one, one))


def densify_source_params(rho: WeightDistribution, gamma: float, eps: float) -> tuple[float, WeightDistribution]:
    """Sparse parameters (d′, Q′) whose densification reaches the dense model with density ρ.

    Q′ = Unif[−Γ/2, Γ/2] and d′ = Γ·ρ(0)·(1 − ε/2)².
    """
    rho0 = float(rho.pdf(0.0))
    return gamma * rho0 * (1 - eps / 2) ** 2, WeightDistribution.uniform(-gamma / 2, gamma / 2)


def _residual_grid(q_src: WeightDistribution, q_tgt: WeightDistribution, points: int) -> np.ndarray:
    if q_src.is_atomic:
        return np.unique(np.asarray(q_src.params if q_src.family == "point" else q_src.table))
    lo, hi = q_src.support
    hi = min(hi, max(q_src.tail_cut(), lo + 1.0))
    return np.linspace(lo, hi, points)


def densify(sparse: PlantedInstance, target_d: float, target_q: WeightDistribution, seed: int,
            grid_points: int = 1024) -> PlantedInstance:
    """Map a (d′, P, Q′) instance to a (d, P, Q) instance without reading the planted matching.

    Existing edges keep their weights; each absent pair is added with
    probability r/n, r = (d − d′)/(1 − d′/n), and new weights come from
    Q̄ = (Q − t·Q′)/(1 − t), t = d′/d, sampled by rejection from Q.
    """
    n, d0 = sparse.n, sparse.d
    if target_d < d0 or target_d > n:
        raise ValueError("need d' <= target_d <= n")
    t = d0 / target_d
    q_src = sparse.Q
    grid = _residual_grid(q_src, target_q, grid_points)
    ratio = t * np.exp(llr(q_src, target_q, grid))
    if np.any(ratio > 1 + 1e-12):
        bad = grid[np.argmax(ratio)]
        raise InfeasibleDecomposition(f"residual density negative near w={bad:.6g}")
    spec = ModelSpec("unweighted", sparse.P, target_q) if sparse.model.kind == "unweighted" and target_q == sparse.Q \
        else ModelSpec("sparse", sparse.P, target_q)
    if target_d == d0:
        return PlantedInstance(n, float(target_d), sparse.rows.copy(), sparse.cols.copy(), sparse.weights.copy(),
                               None if sparse.planted is None else sparse.planted.copy(), spec, sparse.seed)
    r = (target_d - d0) / (1 - d0 / n)
    # candidates range over all n² pairs; pairs already present are dropped
    ci, cj = _sample_offdiag(n, r / n, None, stream(seed, "densify-structure"))
    existing = set(zip(sparse.rows.tolist(), sparse.cols.tolist()))
    new = np.array([(i, j) for i, j in zip(ci.tolist(), cj.tolist()) if (i, j) not in existing], dtype=np.int64)
    new = new.reshape(-1, 2)
    wrng = stream(seed, "densify-weights")
    neww = _sample_residual(target_q, q_src, t, len(new), wrng)
    rows = np.concatenate([sparse.rows, new[:, 0]])
    cols = np.concatenate([sparse.cols, new[:, 1]])
    w = np.concatenate([sparse.weights, neww])
    out = PlantedInstance(n, float(target_d), rows, cols, w,
                          None if sparse.planted is None else sparse.planted.copy(), spec, sparse.seed)
    return out


def _sample_residual(q: WeightDistribution, q_src: WeightDistribution, t: float, k: int,
                     rng: np.random.Generator) -> np.ndarray:
    out = np.empty(k)
    filled = 0
    while filled < k:
        m = max(16, 2 * (k - filled))
        x = np.asarray(q.sample(rng, m), float)
        acc = rng.random(m) < 1.0 - t * np.exp(llr(q_src, q, x))
        x = x[acc][: k - filled]
        out[filled:filled + len(x)] = x
        filled += len(x)
    return out


def write_instance(inst: PlantedInstance, fh: io.TextIOBase | None = None, include_planted: bool = True) -> str:
    """Serialise to the line-oriented PLM v1 text format; returns the text."""
    buf = io.StringIO()
    buf.write(f"PLM v1 n={inst.n} d={inst.d!r} model={inst.model.describe()} seed={inst.seed}\n")
    for i, j, w in zip(inst.rows.tolist(), inst.cols.tolist(), inst.weights.tolist()):
        buf.write(f"{i} {j} {w:.17g}\n")
    if include_planted and inst.planted is not None:
        buf.write("#PLANTED\n")
        buf.write(" ".join(str(int(x)) for x in inst.planted) + "\n")
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


_HEADER = re.compile(r"PLM v1 n=(\d+) d=(\S+) model=(\S+) seed=(-?\d+)")


def read_instance(fh: io.TextIOBase | str) -> PlantedInstance:
    """Parse a PLM v1 file; the ``#PLANTED`` trailer is optional."""
    lines = fh.splitlines() if isinstance(fh, str) else fh.read().splitlines()
    m = _HEADER.fullmatch(lines[0].strip()) if lines else None
    if m is None:
        raise ValueError("missing or malformed PLM v1 header")
    n, d, desc, seed = int(m.group(1)), float(m.group(2)), m.group(3), int(m.group(4))
    rows, cols, ws = [], [], []
    planted = None
    k = 1
    while k < len(lines):
        line = lines[k].strip()
        k += 1
        if not line:
            continue
        if line == "#PLANTED":
            rest = " ".join(lines[k:]).split()
            planted = np.array([int(x) for x in rest], dtype=np.int64)
            if len(planted) != n:
                raise ValueError("planted trailer has wrong length")
            break
        i, j, w = line.split()
        rows.append(int(i))
        cols.append(int(j))
        ws.append(float(w))
    inst = PlantedInstance(n, d, np.array(rows, np.int64), np.array(cols, np.int64), np.array(ws, float),
                           planted, ModelSpec.parse(desc, n), seed)
    _check_planted(inst)
    return inst
