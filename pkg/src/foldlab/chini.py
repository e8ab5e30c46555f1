"""Section map of the Chini system u' = 1, v' = 2u + v^(-k).

Orbits start on {v = c} with v' < 0 at (u0, c) and return to {v = c} with
v' > 0 after time T(u0); the map is U(u0) = u0 + T(u0).  Derivatives come
from the first and second variations v1 = dv/du0, v2 = d^2v/du0^2:

    v1' = 2 - k v^(-k-1) v1,                          v1(0) = 0,
    v2' = -k v^(-k-1) v2 + k (k+1) v^(-k-2) v1^2,     v2(0) = 0.

Differentiating v(T(u0), u0) = c once and twice gives

    T'  = -v1 / v_t,
    T'' = -(v_tt T'^2 + 2 v_tu T' + v2) / v_t,

with v_t = 2u + v^(-k), v_tt = 2 - k v^(-k-1) v_t and v_tu = 2 - k v^(-k-1) v1,
all evaluated at t = T.

Far from the nullcline U' is exponentially small and T' = -v1/v_t loses it to
cancellation.  The reported U' and U'' therefore use the planar Liouville
formula for the (u, v) flow between the two sections {v = c},

    U' = exp(L) v_t(0) / v_t(T),    L = int_0^T -k v^(-k-1) dt,

which keeps full relative accuracy, and its logarithmic derivative

    U''/U' = -k c^(-k-1) T' + int_0^T k (k+1) v^(-k-2) v1 dt + 2/v_t(0) - 2 U'/v_t(T).

The variational values are kept as ``U1_var``/``U2_var`` for cross-checks.

The integration uses scipy's DOP853, independently of the integrator used
for the planar models, so that this module can serve as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from foldlab.errors import DerivativeUndefinedError, DomainError, NoReturnError, SingularityError
from foldlab.integrate import EventSpec
from foldlab.maps import horizontal_section, transition
from foldlab.models import assemble_regularized, make_normal_form
from foldlab.regfn import RegFn

V_GUARD = 1e-6
BOUNDARY_LAYER = 1e-4


@dataclass(frozen=True)
class ChiniConfig:
    k: int
    c: float
    u0: float

    def __post_init__(self):
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise DomainError(f"k must be a positive integer, got {self.k!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"c must be positive, got {self.c!r}")
        if not math.isfinite(self.u0) or self.boundary_offset > 0:
            raise DomainError(f"start point must satisfy 2 u0 + c^-k <= 0, got u0={self.u0!r}")

    @property
    def u_nullcline(self) -> float:
        return -0.5 * self.c ** (-self.k)

    @property
    def boundary_offset(self) -> float:
        """2 u0 + c^-k (negative inside the incoming section)."""
        return 2.0 * self.u0 + self.c ** (-self.k)


@dataclass(frozen=True)
class ChiniResult:
    u0: float
    T: float
    U: float
    U1: float = math.nan
    U2: float = math.nan
    v1: float = math.nan
    v2: float = math.nan
    vdot: float = math.nan
    w: float = math.nan
    U1_var: float = math.nan
    U2_var: float = math.nan

    @property
    def T1(self) -> float:
        return self.U1 - 1.0


def _rhs(k):
    def f(t, z, u0):
        v, v1, v2 = z[0], z[1], z[2]
        vk1 = v ** (-k - 1)
        vk2 = k * (k + 1) * vk1 / v
        return (
            2.0 * (u0 + t) + v ** (-k),
            2.0 - k * vk1 * v1,
            -k * vk1 * v2 + vk2 * v1 * v1,
            -k * vk1,
            vk2 * v1,
        )

    return f


def _solve(cfg: ChiniConfig, tol: float, t_max: Optional[float]):
    k, c, u0 = cfg.k, cfg.c, cfg.u0

    def ret(t, z, u0):
        return z[0] - c

    ret.terminal = True
    ret.direction = 1

    def guard(t, z, u0):
        return z[0] - V_GUARD

    guard.terminal = True
    guard.direction = -1
    t_max = t_max or 20.0 + 4.0 * abs(u0)
    sol = solve_ivp(
        _rhs(k),
        (0.0, t_max),
        (c, 0.0, 0.0, 0.0, 0.0),
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-3,
        events=(ret, guard),
        args=(u0,),
        # start below the time scale of the return so the event is not
        # triggered by g = 0 at t = 0
        first_step=min(1e-2, 0.05 * abs(cfg.boundary_offset)),
    )
    if sol.t_events[1].size:
        raise SingularityError(f"v fell below {V_GUARD:g} from u0={u0!r}")
    if not sol.t_events[0].size:
        raise NoReturnError(f"no return to v = c within t={t_max:g} from u0={u0!r}")
    return float(sol.t_events[0][0]), sol.y_events[0][0]


def chini_transition(cfg: ChiniConfig, tol: float = 1e-12, t_max: Optional[float] = None) -> tuple[float, float]:
    """(U, T) for the start point (u0, c)."""
    if cfg.boundary_offset == 0.0:
        return cfg.u0, 0.0
    T, _ = _solve(cfg, tol, t_max)
    return cfg.u0 + T, T


def chini_derivatives(cfg: ChiniConfig, tol: float = 1e-12, t_max: Optional[float] = None) -> ChiniResult:
    """U, U' and U'' with the variational quantities at the return."""
    if cfg.boundary_offset == 0.0:
        raise DerivativeUndefinedError("start point on the nullcline: tangential return")
    T, z = _solve(cfg, tol, t_max)
    k, c = cfg.k, cfg.c
    v, v1, v2, L, J = (float(q) for q in z)
    u = cfg.u0 + T
    vt = 2.0 * u + v ** (-k)
    if not vt > 0:
        raise DerivativeUndefinedError(f"tangential return at u={u!r}")
    vk1 = k * v ** (-k - 1)
    T1 = -v1 / vt
    vtt = 2.0 - vk1 * vt
    vtu = 2.0 - vk1 * v1
    T2 = -(vtt * T1 * T1 + 2.0 * vtu * T1 + v2) / vt
    vt0 = cfg.boundary_offset
    U1 = math.exp(L) * vt0 / vt
    U2 = U1 * (-k * c ** (-k - 1) * (U1 - 1.0) + J + 2.0 / vt0 - 2.0 * U1 / vt)
    return ChiniResult(cfg.u0, T, u, U1, U2, v1, v2, vt, 2.0 * vt - v1, 1.0 + T1, T2)


def boundary_T1(k: int, c: float, u0: float) -> float:
    """Leading-order T'(u0) next to the nullcline point u0 = -c^-k / 2."""
    return -2.0 - (2.0 / 3.0) * k * c ** (-k - 1) * (c ** (-k) + 2.0 * u0)


def boundary_error(k: int, c: float, h: float, tol: float = 1e-13) -> float:
    """Relative error of :func:`boundary_T1` at distance 2 u0 + c^-k = -h from the nullcline."""
    u0 = -0.5 * (c ** (-k) + h)
    ref = chini_derivatives(ChiniConfig(k, c, u0), tol).T1
    return abs(boundary_T1(k, c, u0) - ref) / abs(ref)


@dataclass
class ChiniReport:
    k: int
    c: float
    results: list[ChiniResult]
    failures: list[tuple[float, str]]

    def _arr(self, name):
        return np.array([getattr(r, name) for r in self.results])

    @property
    def checks(self) -> dict[str, bool]:
        if not self.results:
            return {"U1_in_(-1,0)": False, "U2<0": False, "v1>0": False, "v2>0": False, "w>0": False, "U_decreasing": False}
        U1, U2 = self._arr("U1"), self._arr("U2")
        U = self._arr("U")
        return {
            "U1_in_(-1,0)": bool(np.all((U1 > -1) & (U1 < 0))),
            "U2<0": bool(np.all(U2 < 0)),
            "v1>0": bool(np.all(self._arr("v1") > 0)),
            "v2>0": bool(np.all(self._arr("v2") > 0)),
            "w>0": bool(np.all(self._arr("w") > 0)),
            "U_decreasing": self._u_decreasing(),
        }

    def _u_decreasing(self, rtol: float = 1e-12) -> bool:
        # pairs whose predicted change |U'| du is below the resolution of U
        # carry no sign information and are skipped
        U, U1, u0 = self._arr("U"), self._arr("U1"), self._arr("u0")
        dU, du = np.diff(U), np.diff(u0)
        expect = 0.5 * (np.abs(U1[1:]) + np.abs(U1[:-1])) * du
        res = rtol * np.maximum(1.0, np.abs(U[1:]))
        ok = (dU < 0) | ((expect < res) & (np.abs(dU) < res))
        return bool(np.all(ok))

    @property
    def passed(self) -> bool:
        return not self.failures and all(self.checks.values())

    @property
    def margins(self) -> dict[str, float]:
        if not self.results:
            return {}
        U1, U2 = self._arr("U1"), self._arr("U2")
        return {
            "U1_min": float(U1.min()),
            "U1_max": float(U1.max()),
            "U2_max": float(U2.max()),
            "v1_min": float(self._arr("v1").min()),
            "v2_min": float(self._arr("v2").min()),
            "w_min": float(self._arr("w").min()),
        }


def default_u0_grid(k: int, c: float, n: int = 200, span: float = 3.0) -> np.ndarray:
    """n start points from the boundary layer edge to span + c^-k/2 below it."""
    ub = -0.5 * c ** (-k)
    return ub - BOUNDARY_LAYER - np.linspace(0.0, span, n)


def chini_property_scan(k: int, c: float, u0_grid: Optional[Sequence[float]] = None, tol: float = 1e-12) -> ChiniReport:
    """Evaluate U', U'', v1(T), v2(T), w(T) on a grid of start points (sorted increasing)."""
    grid = np.sort(np.asarray(default_u0_grid(k, c) if u0_grid is None else u0_grid, dtype=float))
    res, fails = [], []
    for u0 in grid:
        try:
            res.append(chini_derivatives(ChiniConfig(k, c, float(u0)), tol))
        except (DomainError, SingularityError, NoReturnError, DerivativeUndefinedError) as exc:
            fails.append((float(u0), f"{type(exc).__name__}: {exc}"))
    return ChiniReport(k, c, res, fails)


def rescaled_fold_map(fn: RegFn, eps: float, c: float, u0: float, tol: float = 1e-11) -> tuple[float, float]:
    """Fold transition of the regularized normal form in Chini units.

    With lambda = (phi_+(0,0) eps^k)^(1/(2k+1)), the substitution x = lambda u,
    y = lambda^2 v turns the flow near the fold into the Chini system as
    eps -> 0.  Returns (U, U') measured between the sections y = lambda^2 c.
    """
    k = fn.k_plus
    lam = (fn.phi_plus_00 * eps**k) ** (1.0 / (2 * k + 1))
    h = lam * lam * c
    fld = assemble_regularized(make_normal_form(), fn, eps)
    src = horizontal_section(h, -1, name="in")
    dst = horizontal_section(h, 1, lo=lam * (-0.5 * c ** (-k)), name="out")
    r = transition(fld, src, dst, lam * u0, 0.0, tol=tol, t_max=100.0)
    return r.x_out / lam, r.d1
