"""Limiting MLE error of the exponential model via ODE shooting.

The state (U, V, W) starts at (1/2, δ, δ). For δ too small, U rises through 1
("overshoots"); for δ too large, V races to 1 first and U collapses toward 0
("undershoots"). The unique δ between the two gives U, V → 1, and the error is
4∫(1−UV)(1−(1−U)W)VW dx along that trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

CONVERGES = "converges"
OVERSHOOTS = "overshoots"
UNDERSHOOTS = "undershoots"
CAP = "cap"


class ShootingError(RuntimeError):
    """Classification was not monotone across the bracket, or the integrator failed."""


@dataclass(frozen=True)
class OdeControls:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    x_cap: float | None = None  # default 400/λ
    floor: float = 0.05
    conv_eps: float = 1e-6


@dataclass
class OdeSolution:
    lam: float
    delta: float
    x: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    integral: np.ndarray  # running error integral
    classification: str
    dense: object = None

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @property
    def error(self) -> float:
        return float(self.integral[-1])

    def remainder_bound(self) -> float:
        """Tail beyond x_max: the integrand is at most 4W ≤ 4e^{−λx}."""
        return 4.0 / self.lam * math.exp(-self.lam * self.x_max)

    def w_closed_form(self) -> np.ndarray:
        return self.V * np.exp(-self.lam * self.x)


def ode_rhs(state, lam: float) -> tuple[float, float, float]:
    U, V, W = state
    dU = -lam * U * (1 - U) + (1 - U * V) * (1 - (1 - U) * W)
    dV = lam * V * (1 - U)
    dW = -lam * W * U
    return dU, dV, dW


def _augmented(x, y, lam):
    U, V, W, _ = y
    g = (1 - U * V) * (1 - (1 - U) * W)
    return [-lam * U * (1 - U) + g, lam * V * (1 - U), -lam * W * U, 4.0 * g * V * W]


def integrate(lam: float, delta: float, controls: OdeControls = OdeControls(), dense: bool = False) -> OdeSolution:
    """Integrate from (1/2, δ, δ) with an embedded 8(5,3) Runge–Kutta pair until classification."""
    if not (0 < lam <= 4):
        raise ValueError("lambda must lie in (0, 4]")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    x_cap = controls.x_cap if controls.x_cap is not None else 400.0 / lam

    def over(x, y, lam):
        return y[0] - 1.0

    over.terminal, over.direction = True, 1

    def under(x, y, lam):
        return y[0] - controls.floor

    under.terminal, under.direction = True, -1

    def conv(x, y, lam):
        return min(y[0], y[1]) - (1.0 - controls.conv_eps)

    conv.terminal, conv.direction = True, 1

    sol = solve_ivp(_augmented, (0.0, x_cap), [0.5, delta, delta, 0.0], args=(lam,), method="DOP853",
                    rtol=controls.rel_tol, atol=controls.abs_tol, events=[over, under, conv],
                    dense_output=dense)
    if sol.status < 0:
        raise ShootingError(sol.message)
    if sol.t_events[2].size:
        cls = CONVERGES
    elif sol.t_events[0].size:
        cls = OVERSHOOTS
    elif sol.t_events[1].size:
        cls = UNDERSHOOTS
    else:
        cls = CAP
    U, V, W, I = sol.y
    return OdeSolution(lam, delta, sol.t, U, V, W, I, cls, sol.sol if dense else None)


def check_invariants(sol: OdeSolution) -> bool:
    """0 < U, V, W < 1, UV < 1 and (1−U)W < 1 at every accepted step."""
    U, V, W = sol.U, sol.V, sol.W
    inside = np.all((U > 0) & (U < 1) & (V > 0) & (V < 1) & (W > 0) & (W < 1))
    return bool(inside and np.all(U * V < 1) and np.all((1 - U) * W < 1))


def _valid_prefix(sol: OdeSolution) -> OdeSolution:
    """Cut the trajectory at the first step leaving the admissible region."""
    U, V, W = sol.U, sol.V, sol.W
    ok = (U > 0) & (U < 1) & (V > 0) & (V < 1) & (W > 0) & (W < 1) & (U * V < 1) & ((1 - U) * W < 1)
    bad = np.flatnonzero(~ok)
    k = len(U) if len(bad) == 0 else max(int(bad[0]), 1)
    if k == len(U):
        return sol
    return OdeSolution(sol.lam, sol.delta, sol.x[:k], U[:k], V[:k], W[:k], sol.integral[:k],
                       sol.classification, sol.dense)


def _bracket(lam: float, tol: float, controls: OdeControls, max_iter: int = 400):
    lo, hi = math.log(1e-300), math.log(1 - 1e-6)
    s_lo = integrate(lam, math.exp(lo), controls)
    s_hi = integrate(lam, math.exp(hi), controls)
    if s_lo.classification != OVERSHOOTS or s_hi.classification != UNDERSHOOTS:
        raise ShootingError(f"bracket ends classified {s_lo.classification}/{s_hi.classification}")
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        s = integrate(lam, math.exp(mid), controls)
        if s.classification == CONVERGES:
            return mid, mid, s, s
        if s.classification == OVERSHOOTS:
            lo, s_lo = mid, s
        elif s.classification == UNDERSHOOTS:
            hi, s_hi = mid, s
        else:
            raise ShootingError(f"trajectory reached x_cap at delta={math.exp(mid):.3g}")
    return lo, hi, s_lo, s_hi


def shoot_delta(lam: float, tol: float = 1e-13, controls: OdeControls = OdeControls()) -> float:
    """Bisection in log δ; ``tol`` is the final bracket width in log δ."""
    if not (0 < lam < 4):
        raise ValueError("lambda must lie in (0, 4)")
    lo, hi, _, _ = _bracket(lam, tol, controls)
    return math.exp(0.5 * (lo + hi))


def solve(lam: float, tol: float = 1e-13, controls: OdeControls = OdeControls()) -> OdeSolution:
    """Shoot for δ and return the trajectory that tracks the separatrix longest."""
    if not (0 < lam < 4):
        raise ValueError("lambda must lie in (0, 4)")
    lo, hi, s_lo, s_hi = _bracket(lam, tol, controls)
    cands = [_valid_prefix(integrate(lam, s.delta, controls, dense=True)) for s in (s_lo, s_hi)]
    out = max(cands, key=lambda s: s.x_max)
    out.delta = math.exp(0.5 * (lo + hi))
    return out


def asymptotic_error(lam: float, tol: float = 1e-13, controls: OdeControls = OdeControls()) -> float:
    """Limit of the MLE reconstruction error as n → ∞ at fixed λ."""
    return solve(lam, tol, controls).error


def first_crossing_below_half(sol: OdeSolution) -> float:
    """x₀ = inf{x : U(x) < 1/2}; +inf if U never drops below 1/2."""
    k = np.flatnonzero(sol.U < 0.5)
    if len(k) == 0:
        return math.inf
    j = k[0]
    if j == 0:
        return 0.0
    x1, x2, u1, u2 = sol.x[j - 1], sol.x[j], sol.U[j - 1], sol.U[j]
    return float(x1 + (0.5 - u1) * (x2 - x1) / (u2 - u1))


def v_closed_form(sol: OdeSolution, points: int = 200001) -> tuple[np.ndarray, np.ndarray]:
    """(V from the integrator, δ·exp(λ∫(1−U))) on a uniform grid, by trapezoid."""
    if sol.dense is None:
        raise ValueError("solution lacks dense output")
    x = np.linspace(0.0, sol.x_max, points)
    y = sol.dense(x)
    one_minus_u = 1.0 - y[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (one_minus_u[1:] + one_minus_u[:-1]) * np.diff(x))])
    return y[1], sol.delta * np.exp(sol.lam * cum)


def fit_delta_constant(eps_values, deltas) -> float:
    """Smallest c′ with δ ≤ (c′/√ε)·e^{−π/√ε} on the given points."""
    eps = np.asarray(eps_values, float)
    return float(np.max(np.asarray(deltas) * np.sqrt(eps) * np.exp(np.pi / np.sqrt(eps))))


def scaling_slope(eps_values, tol: float = 1e-13) -> float:
    """Least-squares slope of log error against 1/√ε."""
    eps = np.asarray(eps_values, float)
    errs = [asymptotic_error(4 - e, tol) for e in eps]
    return float(np.polyfit(1 / np.sqrt(eps), np.log(errs), 1)[0])
