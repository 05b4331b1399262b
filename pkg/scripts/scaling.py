"""Shooting parameter and limiting error of the exponential model near λ = 4.

Prints δ(λ) and error(λ) for λ = 4 − ε, the constant c′ with
δ ≤ (c′/√ε)·exp(−π/√ε), and the slope of log error against 1/√ε.
"""
from __future__ import annotations

import argparse
import math

from plm.asymptotics import fit_delta_constant, scaling_slope, solve


def main() -> None:
    ap = argparse.ArgumentParser(description="near-threshold scaling of the exponential model")
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.5, 0.25])
    ap.add_argument("--tol", type=float, default=1e-13)
    a = ap.parse_args()
    sols = [solve(4 - e, a.tol) for e in a.eps]
    print("eps,lambda,delta,error,delta_envelope")
    for e, s in zip(a.eps, sols):
        print(f"{e:g},{4 - e:g},{s.delta:.10g},{s.error:.10g},{math.exp(-math.pi / math.sqrt(e)) / math.sqrt(e):.10g}")
    print(f"c' = {fit_delta_constant(a.eps, [s.delta for s in sols]):.5f}")
    print(f"slope of log error vs 1/sqrt(eps) = {scaling_slope(a.eps, a.tol):.4f} (-2pi = {-2 * math.pi:.4f})")


if __name__ == "__main__":
    main()
