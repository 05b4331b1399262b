"""CSV formatting and confidence intervals."""
from __future__ import annotations

import math

import numpy as np

Z95 = 1.959963984540054


def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def to_csv(header, rows) -> str:
    """Comma-separated, LF line endings, 17 significant digits for floats."""
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(r[h]) for h in header))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> tuple[list[str], list[dict]]:
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        return [], []
    header = lines[0].split(",")
    return header, [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def wilson(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def mean_ci(values, z: float = Z95) -> tuple[float, float, float]:
    """Mean with a normal-approximation interval; the half-width is 0 for one value."""
    x = np.asarray(values, float)
    if len(x) == 0:
        return math.nan, math.nan, math.nan
    m = float(x.mean())
    if len(x) < 2:
        return m, m, m
    h = z * float(x.std(ddof=1)) / math.sqrt(len(x))
    return m, m - h, m + h


def proportion_ci(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Normal interval, falling back to Wilson when it would leave [0, 1] or k is 0 or n."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    h = z * math.sqrt(p * (1 - p) / n)
    if k in (0, n) or p - h < 0 or p + h > 1:
        return wilson(k, n, z)
    return p - h, p + h
