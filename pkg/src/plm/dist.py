"""Weight distributions, divergences and the recovery-threshold functional."""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

MISSING = None
"""Symbol for an absent edge; ``llr`` maps it (and NaN) to -inf."""

_TINY = 1e-16


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SpecParseError(ValueError):
    def __init__(self, text: str, pos: int, msg: str):
        super().__init__(f"{msg} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    limit: int = 500
    bin_width: float | None = None  # empirical-vs-continuous binning; None means singular


@dataclass(frozen=True)
class WeightDistribution:
    """A parametric weight law.

    ``family`` is one of ``exp``, ``unif``, ``fgauss``, ``point``, ``emp``.
    Point masses and empirical tables are atoms with respect to counting
    measure; the other families are densities with respect to Lebesgue measure.
    """

    family: str
    params: tuple = ()
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        f, p = self.family, self.params
        if f == "exp":
            if not (len(p) == 1 and p[0] > 0 and math.isfinite(p[0])):
                raise ValueError("exp needs one positive rate")
        elif f == "unif":
            if not (len(p) == 2 and p[0] < p[1]):
                raise ValueError("unif needs lo < hi")
        elif f == "fgauss":
            if not (len(p) == 1 and p[0] > 0):
                raise ValueError("fgauss needs positive variance")
        elif f == "point":
            if len(p) != 1:
                raise ValueError("point needs one atom")
        elif f == "emp":
            if len(self.table) == 0:
                raise ValueError("empirical table is empty")
            if list(self.table) != sorted(self.table):
                raise ValueError("empirical table must be sorted")
        else:
            raise ValueError(f"unknown family {f!r}")

    # constructors
    @staticmethod
    def exponential(rate: float) -> "WeightDistribution":
        return WeightDistribution("exp", (float(rate),))

    @staticmethod
    def uniform(lo: float, hi: float) -> "WeightDistribution":
        return WeightDistribution("unif", (float(lo), float(hi)))

    @staticmethod
    def folded_gaussian(kappa: float) -> "WeightDistribution":
        return WeightDistribution("fgauss", (float(kappa),))

    @staticmethod
    def point_mass(atom: float) -> "WeightDistribution":
        return WeightDistribution("point", (float(atom),))

    @staticmethod
    def empirical(sample) -> "WeightDistribution":
        return WeightDistribution("emp", (), tuple(sorted(float(x) for x in sample)))

    @property
    def is_atomic(self) -> bool:
        return self.family in ("point", "emp")

    @property
    def support(self) -> tuple[float, float]:
        f, p = self.family, self.params
        if f in ("exp", "fgauss"):
            return (0.0, math.inf)
        if f == "unif":
            return p
        if f == "point":
            return (p[0], p[0])
        return (self.table[0], self.table[-1])

    def scale(self) -> float:
        """Characteristic length used to place quadrature breakpoints."""
        f, p = self.family, self.params
        if f == "exp":
            return 1.0 / p[0]
        if f == "fgauss":
            return math.sqrt(p[0])
        if f == "unif":
            return p[1] - p[0]
        return 1.0

    def tail_cut(self) -> float:
        """Point beyond which the density stays below 1e-16."""
        f, p = self.family, self.params
        if f == "exp":
            r = p[0]
            return max(0.0, math.log(r / _TINY) / r)
        if f == "fgauss":
            c = 2.0 / math.sqrt(2 * math.pi * p[0])
            return math.sqrt(max(0.0, 2 * p[0] * math.log(c / _TINY)))
        return self.support[1]

    def scaled(self, c: float) -> "WeightDistribution":
        """Law of c·X."""
        f, p = self.family, self.params
        if c <= 0:
            raise ValueError("scale factor must be positive")
        if f == "exp":
            return WeightDistribution.exponential(p[0] / c)
        if f == "unif":
            return WeightDistribution.uniform(p[0] * c, p[1] * c)
        if f == "fgauss":
            return WeightDistribution.folded_gaussian(p[0] * c * c)
        if f == "point":
            return WeightDistribution.point_mass(p[0] * c)
        return WeightDistribution("emp", (), tuple(x * c for x in self.table))

    def mean(self) -> float:
        f, p = self.family, self.params
        if f == "exp":
            return 1.0 / p[0]
        if f == "unif":
            return 0.5 * (p[0] + p[1])
        if f == "fgauss":
            return math.sqrt(2 * p[0] / math.pi)
        if f == "point":
            return p[0]
        return float(np.mean(self.table))

    def logpdf(self, w):
        """Log density of the continuous part; -inf outside support and for atomic laws."""
        w = np.asarray(w, dtype=float)
        out = np.full(w.shape, -np.inf)
        f, p = self.family, self.params
        with np.errstate(invalid="ignore", over="ignore"):
            if f == "exp":
                ok = (w >= 0) & np.isfinite(w)
                out[ok] = math.log(p[0]) - p[0] * w[ok]
            elif f == "unif":
                ok = (w >= p[0]) & (w <= p[1])
                out[ok] = -math.log(p[1] - p[0])
            elif f == "fgauss":
                ok = (w >= 0) & np.isfinite(w)
                out[ok] = math.log(2.0) - 0.5 * math.log(2 * math.pi * p[0]) - w[ok] ** 2 / (2 * p[0])
        return out if out.ndim else float(out)

    def pdf(self, w):
        return np.exp(self.logpdf(w))

    def log_atom(self, w):
        """Log mass of the atom at w (-inf when there is none)."""
        w = np.asarray(w, dtype=float)
        out = np.full(w.shape, -np.inf)
        if self.family == "point":
            out[w == self.params[0]] = 0.0
        elif self.family == "emp":
            t = np.asarray(self.table)
            lo = np.searchsorted(t, w, side="left")
            hi = np.searchsorted(t, w, side="right")
            cnt = hi - lo
            ok = cnt > 0
            out[ok] = np.log(cnt[ok] / len(t))
        return out if out.ndim else float(out)

    def cdf(self, w):
        w = np.asarray(w, dtype=float)
        f, p = self.family, self.params
        if f == "exp":
            out = np.where(w > 0, -np.expm1(-p[0] * np.maximum(w, 0)), 0.0)
        elif f == "unif":
            out = np.clip((w - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        elif f == "fgauss":
            out = np.where(w > 0, special.erf(np.maximum(w, 0) / math.sqrt(2 * p[0])), 0.0)
        elif f == "point":
            out = (w >= p[0]).astype(float)
        else:
            out = np.searchsorted(np.asarray(self.table), w, side="right") / len(self.table)
        return out if np.ndim(out) else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        f, p = self.family, self.params
        if f == "exp":
            out = -np.log1p(-u) / p[0]
        elif f == "unif":
            out = p[0] + u * (p[1] - p[0])
        elif f == "fgauss":
            out = math.sqrt(2 * p[0]) * special.erfinv(u)
        elif f == "point":
            out = np.full(u.shape, p[0])
        else:
            t = np.asarray(self.table)
            idx = np.clip(np.ceil(u * len(t)).astype(int) - 1, 0, len(t) - 1)
            out = t[idx]
        return out if np.ndim(out) else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        f, p = self.family, self.params
        if f == "exp":
            return rng.exponential(1.0 / p[0], size)
        if f == "unif":
            return rng.uniform(p[0], p[1], size)
        if f == "fgauss":
            return np.abs(rng.normal(0.0, math.sqrt(p[0]), size))
        if f == "point":
            return np.full(size, p[0]) if size is not None else p[0]
        t = np.asarray(self.table)
        return t[rng.integers(0, len(t), size)]

    def to_spec(self) -> str:
        f, p = self.family, self.params
        if f == "emp":
            raise ValueError("empirical laws have no spec string")
        names = {"exp": "exp", "unif": "unif", "fgauss": "fgauss", "point": "point"}
        return ":".join([names[f]] + [repr(float(x)) for x in p])


_ARITY = {"exp": 1, "unif": 2, "fgauss": 1, "point": 1}
_NUM = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def parse_spec(text: str) -> WeightDistribution:
    """Parse ``exp:<rate>``, ``unif:<lo>:<hi>``, ``fgauss:<kappa>`` or ``point:<atom>``."""
    s = text.strip().lower()
    offset = len(text) - len(text.lstrip())
    colon = s.find(":")
    if colon < 0:
        raise SpecParseError(text, offset + len(s), "expected ':' after family name")
    fam = s[:colon]
    if fam not in _ARITY:
        raise SpecParseError(text, offset, f"unknown family {fam!r}")
    vals = []
    pos = colon + 1
    for k in range(_ARITY[fam]):
        m = _NUM.match(s, pos)
        if m is None:
            raise SpecParseError(text, offset + pos, "expected a number")
        vals.append(float(m.group()))
        pos = m.end()
        if k < _ARITY[fam] - 1:
            if pos >= len(s) or s[pos] != ":":
                raise SpecParseError(text, offset + pos, "expected ':'")
            pos += 1
    if pos != len(s):
        raise SpecParseError(text, offset + pos, "trailing characters")
    try:
        return WeightDistribution(fam, tuple(vals))
    except ValueError as e:
        raise SpecParseError(text, offset + colon + 1, str(e)) from None


@dataclass(frozen=True)
class DivergenceReport:
    bhattacharyya: float
    alpha: float
    kl_pq: float
    kl_qp: float


def _quad(fn, lo: float, hi: float, quad: QuadConfig, breakpoints=()) -> float:
    pts = sorted({b for b in breakpoints if lo < b < hi})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err, info = integrate.quad(
            fn, lo, hi, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.limit,
            points=pts or None, full_output=True,
        )[:3]
    if err > max(quad.abs_tol, quad.rel_tol * abs(val)) * 100:
        raise QuadratureError(f"quadrature did not converge (err={err:.3g})")
    return val


def _window(dists, support) -> tuple[float, float, list[float]]:
    lo, hi = support
    cut = max(d.tail_cut() for d in dists)
    hi = min(hi, max(cut, lo))
    bps = [lo + c * d.scale() for d in dists for c in (0.5, 2.0, 8.0, 32.0)]
    return lo, hi, bps


def _intersect(p, q):
    a = max(p.support[0], q.support[0])
    b = min(p.support[1], q.support[1])
    return a, b


def _binned(emp: WeightDistribution, width: float):
    t = np.asarray(emp.table)
    edges = np.arange(t[0], t[-1] + width, width)
    if len(edges) < 2:
        edges = np.array([t[0], t[0] + width])
    counts, edges = np.histogram(t, bins=edges)
    return edges, counts / (len(t) * width)


def bhattacharyya(p: WeightDistribution, q: WeightDistribution, quad: QuadConfig = QuadConfig(),
                  method: str = "auto") -> float:
    """Bhattacharyya coefficient ∫√(f g) dμ, clamped to [0, 1]."""
    if p == q:
        return 1.0
    fp, fq = p.family, q.family
    if p.is_atomic or q.is_atomic:
        if p.is_atomic and q.is_atomic:
            atoms = sorted(set(_atoms(p)) & set(_atoms(q)))
            val = sum(math.sqrt(math.exp(p.log_atom(a) + q.log_atom(a))) for a in atoms)
            return min(1.0, max(0.0, val))
        emp, cont = (p, q) if p.is_atomic else (q, p)
        if emp.family == "emp" and quad.bin_width:
            edges, dens = _binned(emp, quad.bin_width)
            # piecewise constant histogram: integrate bin by bin
            val = sum(math.sqrt(h) * _quad(lambda x: math.sqrt(cont.pdf(x)), a, b, quad)
                      for a, b, h in zip(edges[:-1], edges[1:], dens) if h > 0)
            return min(1.0, max(0.0, val))
        return 0.0
    if method == "auto" and fp == fq == "exp":
        a, b = p.params[0], q.params[0]
        return min(1.0, 2.0 * math.sqrt(a * b) / (a + b))
    if method == "auto" and fp == fq == "unif":
        lo, hi = _intersect(p, q)
        if hi <= lo:
            return 0.0
        lp = p.params[1] - p.params[0]
        lq = q.params[1] - q.params[0]
        return min(1.0, (hi - lo) / math.sqrt(lp * lq))
    lo, hi = _intersect(p, q)
    if hi <= lo:
        return 0.0
    lo, hi, bps = _window((p, q), (lo, hi))

    def integrand(x):
        return math.exp(0.5 * (p.logpdf(x) + q.logpdf(x)))

    return min(1.0, max(0.0, _quad(integrand, lo, hi, quad, bps)))


def _atoms(d: WeightDistribution):
    return d.params if d.family == "point" else d.table


def _kl(p: WeightDistribution, q: WeightDistribution, quad: QuadConfig) -> float:
    if p == q:
        return 0.0
    if p.is_atomic != q.is_atomic:
        return math.inf
    if p.is_atomic:
        tot = 0.0
        for a in sorted(set(_atoms(p))):
            lp, lq = p.log_atom(a), q.log_atom(a)
            if lq == -math.inf:
                return math.inf
            tot += math.exp(lp) * (lp - lq)
        return max(0.0, tot)
    if not (q.support[0] <= p.support[0] and p.support[1] <= q.support[1]):
        return math.inf
    if p.family == q.family == "exp":
        a, b = p.params[0], q.params[0]
        return math.log(a / b) + b / a - 1.0
    if p.family == q.family == "unif":
        return math.log((q.params[1] - q.params[0]) / (p.params[1] - p.params[0]))
    lo, hi, bps = _window((p,), p.support)

    def integrand(x):
        lf = p.logpdf(x)
        if lf == -math.inf:
            return 0.0
        return math.exp(lf) * (lf - q.logpdf(x))

    return max(0.0, _quad(integrand, lo, hi, quad, bps))


def divergences(p: WeightDistribution, q: WeightDistribution, quad: QuadConfig = QuadConfig()) -> DivergenceReport:
    b = bhattacharyya(p, q, quad)
    alpha = -2.0 * math.log(b) if b > 0 else math.inf
    return DivergenceReport(b, max(0.0, alpha), _kl(p, q, quad), _kl(q, p, quad))


def llr(p: WeightDistribution, q: WeightDistribution, w):
    """log f(w) − log g(w) on the extended reals.

    ``MISSING`` (None) or NaN entries give -inf. Atoms dominate densities, so a
    point mass against a continuous law gives +inf at the atom.
    """
    if w is MISSING:
        return -math.inf
    arr = np.asarray(w, dtype=float)
    miss = np.isnan(arr)
    x = np.where(miss, 0.0, arr)
    af, ag = p.log_atom(x), q.log_atom(x)
    cf, cg = p.logpdf(x), q.logpdf(x)
    af, ag, cf, cg = (np.asarray(v, dtype=float) for v in (af, ag, cf, cg))
    atomic = (af > -np.inf) | (ag > -np.inf)
    lf = np.where(atomic, af, cf)
    lg = np.where(atomic, ag, cg)
    with np.errstate(invalid="ignore"):
        out = np.where(lf == -np.inf, -np.inf, np.where(lg == -np.inf, np.inf, lf - lg))
    out = np.where(miss, -np.inf, out)
    return out if out.ndim else float(out)


def llr_median(p: WeightDistribution, q: WeightDistribution, under: WeightDistribution, grid: int = 1 << 16) -> float:
    """Median of llr(X) for X ~ ``under`` via quantile inversion on a midpoint grid."""
    u = (np.arange(grid) + 0.5) / grid
    return float(np.median(llr(p, q, under.ppf(u))))


def threshold_margin(d: float, p: WeightDistribution, q: WeightDistribution, quad: QuadConfig = QuadConfig()) -> float:
    """√d·B(P,Q) − 1: negative means almost-perfect recovery, positive means impossibility."""
    if d <= 0:
        raise ValueError("d must be positive")
    return math.sqrt(d) * bhattacharyya(p, q, quad) - 1.0


def exponential_threshold(n: float, method: str = "auto", quad: QuadConfig = QuadConfig()) -> float:
    """Root in λ of √n·B(Exp(λ), Exp(1/n)) = 1 above the matched rate; tends to 4 as n grows."""
    q = WeightDistribution.exponential(1.0 / n)

    def f(lam):
        return math.sqrt(n) * bhattacharyya(WeightDistribution.exponential(lam), q, quad, method) - 1.0

    if n <= 1:
        raise ValueError("need n > 1")
    hi = 8.0
    while f(hi) > 0:
        hi *= 2
    return float(optimize.brentq(f, 1.0 / n, hi, xtol=1e-12))


def ld_tail_bound(p: WeightDistribution, q: WeightDistribution, x: float, ell: int,
                  quad: QuadConfig = QuadConfig()) -> float:
    """exp(−ℓ(α + x/2)) bounding P{Σ(Yᵢ − Xᵢ) ≥ xℓ}."""
    if x < 0 or ell < 1:
        raise ValueError("need x >= 0 and ell >= 1")
    b = bhattacharyya(p, q, quad)
    if b == 0.0:
        return 0.0
    alpha = max(0.0, -2.0 * math.log(b))
    return math.exp(-ell * (alpha + x / 2.0))


def ld_tail_empirical(p: WeightDistribution, q: WeightDistribution, x: float, ell: int, samples: int,
                      rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of P{Σ(Yᵢ − Xᵢ) ≥ xℓ} and its binomial standard error."""
    hits = 0
    done = 0
    chunk = max(1, min(samples, 2_000_000 // ell))
    while done < samples:
        m = min(chunk, samples - done)
        xs = llr(p, q, p.sample(rng, (m, ell)))
        ys = llr(p, q, q.sample(rng, (m, ell)))
        hits += int(np.count_nonzero((ys - xs).sum(axis=1) >= x * ell))
        done += m
    est = hits / samples
    return est, math.sqrt(max(est * (1 - est), 0.0) / samples)
