"""Static SVG figures written as raw path elements."""
from __future__ import annotations

import math

from .report import parse_csv

W, H, PAD = 480, 320, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_SCHEMA = {
    "phase_diagram": {"mean_error", "ci_lo", "ci_hi", "n"},
    "mle_vs_ode": {"mean_error", "ci_lo", "ci_hi", "n", "lam", "ode_error"},
}


class SchemaError(ValueError):
    pass


def _scale(lo, hi, a, b):
    if hi <= lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _frame(xlabel: str, ylabel: str, body: list[str]) -> str:
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
             f'<path d="M{PAD} {PAD} V{H - PAD} H{W - PAD}" stroke="black" fill="none"/>',
             f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
             f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {H / 2})">{ylabel}</text>']
    return "\n".join(parts + body + ["</svg>"]) + "\n"


def _poly(pts) -> str:
    return " ".join(("M" if k == 0 else "L") + f"{x:.2f} {y:.2f}" for k, (x, y) in enumerate(pts))


def emit_plot(csv_text: str, kind: str) -> str:
    """Error against the swept parameter with a CI band, one curve per group."""
    header, rows = parse_csv(csv_text)
    if not rows:
        return _frame("", "", [])
    if kind not in _SCHEMA:
        raise SchemaError(f"no plot for kind {kind!r}")
    missing = _SCHEMA[kind] - set(header)
    if missing:
        raise SchemaError(f"csv lacks columns {sorted(missing)}")
    if kind == "phase_diagram":
        xkey = next(k for k in header if k not in ("n", "trials") and k in ("d", "lam"))
        group = "n"
    else:
        xkey, group = "n", "lam"
    f = {k: [float(r[k]) for r in rows] for k in (xkey, group, "mean_error", "ci_lo", "ci_hi")}
    ys = [v for k in ("ci_lo", "ci_hi", "mean_error") for v in f[k] if math.isfinite(v)]
    if kind == "mle_vs_ode":
        ys += [float(r["ode_error"]) for r in rows]
    sx = _scale(min(f[xkey]), max(f[xkey]), PAD, W - PAD)
    sy = _scale(min(ys + [0.0]), max(ys + [0.0]), H - PAD, PAD)
    body = []
    for gi, g in enumerate(sorted(set(f[group]))):
        color = COLORS[gi % len(COLORS)]
        idx = sorted((i for i in range(len(rows)) if f[group][i] == g), key=lambda i: f[xkey][i])
        up = [(sx(f[xkey][i]), sy(f["ci_hi"][i])) for i in idx]
        dn = [(sx(f[xkey][i]), sy(f["ci_lo"][i])) for i in idx][::-1]
        body.append(f'<path d="{_poly(up + dn)} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        mid = [(sx(f[xkey][i]), sy(f["mean_error"][i])) for i in idx]
        if kind == "phase_diagram":
            body.append(f'<path d="{_poly(mid)}" stroke="{color}" fill="none"/>')
        for x, y in mid:
            body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
        if kind == "mle_vs_ode":
            ode = sy(float(rows[idx[0]]["ode_error"]))
            body.append(f'<path d="M{PAD} {ode:.2f} H{W - PAD}" stroke="{color}" stroke-dasharray="4 3"/>')
        body.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * gi}" font-size="10" fill="{color}">{group}={g:g}</text>')
    return _frame(xkey, "error", body)
