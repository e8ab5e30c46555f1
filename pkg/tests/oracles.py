"""Independent reference computations.

Nothing here imports the package's integrator, models or maps: vector fields
are written out again by hand and integrated with scipy's solve_ivp, special
functions are evaluated with mpmath.  ``python tests/freeze.py`` stores the
results in ``tests/data/frozen.json``; the tests compare the package against
the stored values and a slow test re-runs the oracles.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

MU_S, MU_M, RHO, C_FRIC = 1.0, 0.5, 4.0, 0.85


def mu(y):
    return MU_M + (MU_S - MU_M) * np.exp(-RHO * y) + C_FRIC * y


def y0_golden() -> float:
    r = minimize_scalar(mu, bracket=(0.0, 0.5, 2.0), method="golden", tol=1e-10)
    return float(r.x)


def gk_mp(s, eps, dps: int = 50):
    """Goldbeter-Koshland switch in extended precision, as printed (no rearrangement)."""
    with mp.workdps(dps):
        s, e = mp.mpf(s), mp.mpf(eps)
        R = mp.sqrt(4 + s**2 + 2 * e * s**2 + 4 * e * s + e**2 * s**2)
        return (2 + e * R + 2 * e + e * s + e**2 * s) / ((2 - s + e * s + R) * (1 + e))


def phi_sqrt(s):
    return 0.5 * (1.0 + s / np.sqrt(s * s + 1.0))


# --- friction oscillator, pure Z+ -------------------------------------------

def _zplus(alpha):
    def f(t, z):
        return [z[1] - alpha, -z[0] - mu(z[1])]

    return f


def _half_turns(f, xe, s, rtol, dense=False):
    """Two half turns around the equilibrium starting from (xe, s), s < alpha."""

    def up(t, z):
        return z[0] - xe

    up.terminal, up.direction = True, 1

    def down(t, z):
        return z[0] - xe

    down.terminal, down.direction = True, -1
    kw = dict(method="DOP853", rtol=rtol, atol=rtol * 1e-2, dense_output=dense)
    a = solve_ivp(f, (0, 200), [xe, s], events=up, **kw)
    if not a.t_events[0].size:
        return None
    b = solve_ivp(f, (0, 200), a.y_events[0][0], events=down, **kw)
    if not b.t_events[0].size:
        return None
    return a, b


def zplus_return(s: float, alpha: float, rtol: float = 1e-12) -> float:
    xe = -float(mu(alpha))
    r = _half_turns(_zplus(alpha), xe, s, rtol)
    return math.nan if r is None else float(r[1].y_events[0][0][1])


def zplus_cycle(alpha: float, rtol: float = 1e-12) -> tuple[float, float]:
    """(s, y_min) of the repelling Z+ cycle around the equilibrium."""
    grid = np.linspace(alpha - 0.6, alpha - 1e-3, 60)
    vals = [zplus_return(s, alpha, rtol) - s for s in grid]
    # innermost sign change (cycle closest to the equilibrium)
    idx = [i for i in range(len(grid) - 1) if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0]
    if not idx:
        raise RuntimeError(f"no cycle at alpha={alpha}")
    i = idx[-1]
    s = brentq(lambda u: zplus_return(u, alpha, rtol) - u, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14)
    xe = -float(mu(alpha))
    a, b = _half_turns(_zplus(alpha), xe, s, rtol, dense=True)
    ymin = math.inf
    for seg in (a, b):
        ts = np.linspace(seg.t[0], seg.t[-1], 4000)
        ys = seg.sol(ts)[1]
        j = int(np.argmin(ys))
        lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, len(ts) - 1)]
        r = minimize_scalar(lambda t: seg.sol(t)[1], bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        ymin = min(ymin, float(r.fun))
    return s, ymin


def alpha_star(lo: float = 0.23, hi: float = 0.25) -> float:
    """Parameter where the Z+ cycle touches y = 0."""
    return brentq(lambda a: zplus_cycle(a)[1], lo, hi, xtol=1e-12)


# --- regularized friction, smooth_sqrt ---------------------------------------

def _regularized(alpha, eps):
    def f(t, z):
        x, y = z
        p = phi_sqrt(y / eps)
        return [y - alpha, -x - p * mu(y) + (1.0 - p) * mu(-y)]

    return f


def regularized_return(s: float, alpha: float, eps: float, rtol: float = 1e-10) -> float:
    xe = -float(mu(alpha))
    f = _regularized(alpha, eps)

    def up(t, z):
        return z[0] - xe

    up.terminal, up.direction = True, 1

    def down(t, z):
        return z[0] - xe

    down.terminal, down.direction = True, -1
    kw = dict(method="LSODA", rtol=rtol, atol=rtol * 1e-2)
    a = solve_ivp(f, (0, 200), [xe, s], events=up, **kw)
    if not a.t_events[0].size:
        return math.nan
    b = solve_ivp(f, (0, 200), a.y_events[0][0], events=down, **kw)
    if not b.t_events[0].size:
        return math.nan
    return float(b.y_events[0][0][1])


def count_cycles(alpha: float, eps: float, n: int = 60) -> int:
    """Sign changes of P(s) - s on the vertical section below the equilibrium."""
    grid = np.linspace(-0.05, alpha - 1e-4, n)
    d = np.array([regularized_return(s, alpha, eps) - s for s in grid])
    d = d[np.isfinite(d)]
    return int(np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1])))


# --- normal form, slow-manifold exit ----------------------------------------

def m_eps(eps: float, delta: float = 0.04, x_start: float = -0.5) -> float:
    def f(t, z):
        x, y = z
        p = phi_sqrt(y / eps)
        return [p, p * 2.0 * x + (1.0 - p)]

    def jac(t, z):
        x, y = z
        s = y / eps
        p = phi_sqrt(s)
        dp = 0.5 / (s * s + 1.0) ** 1.5 / eps
        return [[0.0, dp], [2.0 * p, dp * (2.0 * x - 1.0)]]

    def hit(t, z):
        return z[1] - delta if z[0] > 0 else -1.0

    hit.terminal, hit.direction = True, 1
    b = solve_ivp(f, (0, 100), [x_start, 0.0], method="Radau", jac=jac, rtol=1e-11, atol=1e-14, events=hit)
    return float(b.y_events[0][0][0])
