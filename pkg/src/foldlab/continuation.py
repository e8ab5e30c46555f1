"""Limit cycles of the friction oscillator: shooting Newton, branches, folds.

Cycles are fixed points of a return map P(s, alpha) on a section that every
cycle around the Z_+ equilibrium crosses (by default the vertical line
through the equilibrium, see :func:`foldlab.maps.friction_return_section`).
P'_s comes from the variational equation; derivatives in alpha and second
derivatives from central differences of the variational quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from foldlab.errors import (
    DegenerateFoldError,
    DivergenceError,
    DomainError,
    EscapeError,
    NoReturnError,
    NotFoundError,
    NumericalError,
)
from foldlab.integrate import integrate
from foldlab.maps import (
    ReturnSample,
    Section,
    friction_return_section,
    hausdorff_distance,
    min_y_of_orbit,
    transition,
)
from foldlab.models import (
    PwsModel,
    SmoothField2D,
    cycle_field,
    friction_params_of,
    friction_props,
)
from foldlab.regfn import RegFn

NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50
NEWTON_HALVINGS = 6
FOLD_TOL = 1e-9
NONDEGENERACY_FLOOR = 1e-6

SectionSpec = Union[Section, Callable[[float], Section], None]


@dataclass(frozen=True)
class BranchPoint:
    alpha: float
    x_fix: float
    multiplier: float
    y_min: float
    flight_time: float
    residual: float = 0.0
    fold: bool = False
    orbit: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass
class Branch:
    points: list[BranchPoint]
    truncated: bool = False
    reason: str = ""

    @property
    def folds(self) -> list[int]:
        return [i for i, p in enumerate(self.points) if p.fold]


@dataclass(frozen=True)
class FoldPoint:
    eps: float
    alpha_sn: float
    x_sn: float
    p_xx: float
    p_alpha: float
    multiplier: float
    residual: float
    iterations: int
    orbit: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass
class ScalingFit:
    points: list[tuple[float, float]]
    slope: float
    intercept: float
    r_squared: float
    alpha_star: float
    folds: list[FoldPoint] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)


class CycleProblem:
    """Return map P(s, alpha) for one model, regularization and eps.

    ``eps = 0`` means the smooth field Z_+ alone.
    """

    def __init__(
        self,
        model: PwsModel,
        fn: Optional[RegFn],
        eps: float,
        section: SectionSpec = None,
        *,
        tol: float = 1e-11,
        t_max: float = 200.0,
    ):
        if eps < 0:
            raise DomainError("eps must be non-negative")
        if eps > 0 and fn is None:
            raise DomainError("a regularization function is needed for eps > 0")
        self.model = model
        self.fn = fn
        self.eps = eps
        self.field: SmoothField2D = cycle_field(model, fn, eps)
        if section is None:
            params = friction_params_of(model)
            section = lambda a: friction_return_section(params, a)  # noqa: E731
        self._section = section
        self.tol = tol
        self.t_max = t_max
        self.nevals = 0

    def section(self, alpha: float) -> Section:
        return self._section(alpha) if callable(self._section) else self._section

    def P(self, s: float, alpha: float, keep_orbit: bool = False) -> ReturnSample:
        sec = self.section(alpha)
        self.nevals += 1
        return transition(self.field, sec, sec, s, alpha, tol=self.tol, t_max=self.t_max, keep_orbit=keep_orbit)

    def fd_step(self) -> float:
        if self.eps == 0.0 or self.fn is None:
            return 1e-5
        return max(1e-5, self.eps**self.fn.exponent / 100.0)

    def P_alpha(self, s: float, alpha: float, h: Optional[float] = None) -> tuple[float, ReturnSample, ReturnSample]:
        h = h or self.fd_step()
        rp = self.P(s, alpha + h)
        rm = self.P(s, alpha - h)
        return (rp.x_out - rm.x_out) / (2 * h), rp, rm

    def point(self, s: float, alpha: float, residual: float = 0.0, keep_polyline: bool = True) -> BranchPoint:
        r = self.P(s, alpha, keep_orbit=True)
        ymin, _ = min_y_of_orbit(r.orbit)
        poly = r.orbit.sample(4) if keep_polyline else None
        return BranchPoint(alpha, s, r.d1, ymin, r.flight_time, abs(r.x_out - s), orbit=poly)


def _safe_P(prob: CycleProblem, s: float, alpha: float) -> Optional[ReturnSample]:
    if not prob.section(alpha).contains(s):
        return None
    try:
        return prob.P(s, alpha)
    except (NoReturnError, EscapeError, NumericalError):
        return None


def cycle_newton(
    prob: CycleProblem,
    x0: float,
    alpha: float,
    *,
    tol: float = NEWTON_TOL,
    maxit: int = NEWTON_MAXIT,
    keep_polyline: bool = True,
) -> BranchPoint:
    """Damped Newton on F(s) = P(s) - s; works for repelling cycles too."""
    s = float(x0)
    r = _safe_P(prob, s, alpha)
    if r is None:
        raise DivergenceError(f"return map undefined at the seed s={s:.12g}", math.inf)
    F = r.x_out - s
    hi = prob.section(alpha).hi
    for _ in range(maxit):
        if abs(F) <= tol:
            break
        dF = r.d1 - 1.0
        if dF == 0.0 or not math.isfinite(dF):
            raise DivergenceError("zero Newton derivative", abs(F))
        step = -F / dF
        lam = 1.0
        for _ in range(NEWTON_HALVINGS + 1):
            trial = s + lam * step
            rt = _safe_P(prob, trial, alpha)
            if rt is not None and abs(rt.x_out - trial) < abs(F):
                break
            lam *= 0.5
        else:
            raise DivergenceError(f"no decrease after {NEWTON_HALVINGS} halvings at s={s:.12g}", abs(F))
        s, r = trial, rt
        F = r.x_out - s
    if abs(F) > tol:
        raise DivergenceError(f"Newton did not converge in {maxit} iterations", abs(F))
    if math.isfinite(hi) and hi - s < 1e-6:
        # the equilibrium sits on the end of the section and is a trivial fixed point
        raise DivergenceError("Newton converged to the equilibrium, not to a cycle", abs(F))
    return prob.point(s, alpha, abs(F), keep_polyline)


def seed_from_simulation(
    prob: CycleProblem,
    z0: Sequence[float],
    alpha: float,
    t_transient: float = 300.0,
    backward: bool = False,
) -> float:
    """Section coordinate of the last crossing of a long simulation.

    Forward time converges to attracting cycles, backward time to repelling
    ones.  Crossings are counted in the forward sense of the section.
    """
    sec = prob.section(alpha)
    ev = sec.event(terminal=False)
    if backward:
        ev = replace(ev, direction=-ev.direction)
    orb = integrate(prob.field, z0, alpha, t_transient, max(prob.tol, 1e-10), [ev], backward=backward)
    hits = orb.hits(sec.name)
    if not hits:
        raise NotFoundError("simulation never crossed the section")
    x, y = hits[-1].state
    return sec.s_of(x, y)


def _tangent(prob: CycleProblem, s: float, alpha: float, r: ReturnSample, direction: float) -> np.ndarray:
    Pa, _, _ = prob.P_alpha(s, alpha)
    t = np.array((-Pa, r.d1 - 1.0))
    t /= np.linalg.norm(t)
    if t[1] * direction < 0:
        t = -t
    return t


def trace_branch(
    prob: CycleProblem,
    alpha_start: float,
    alpha_end: float,
    seed: BranchPoint,
    *,
    ds: float = 2e-3,
    ds_min: float = 1e-5,
    ds_max: float = 1e-2,
    max_points: int = 400,
    stop_on_fold: bool = False,
    stop_on_graze: bool = False,
    keep_polyline: bool = False,
    fold_ds: float = 1e-4,
) -> Branch:
    """Pseudo-arclength continuation of fixed points of P in (s, alpha).

    Starts at ``seed`` heading towards ``alpha_end``; stops when alpha
    leaves the window.  A point is flagged as a fold when d alpha changes
    sign along the arclength or the multiplier crosses 1; detection retries
    with shorter steps until the step is at most ``fold_ds``.
    """
    lo, hi = sorted((alpha_start, alpha_end))
    direction = 1.0 if alpha_end >= alpha_start else -1.0
    pts = [seed]
    u = np.array((seed.x_fix, seed.alpha))
    r0 = prob.P(seed.x_fix, seed.alpha)
    t = _tangent(prob, seed.x_fix, seed.alpha, r0, direction)
    prev_u = None
    ds = min(max(ds, ds_min), ds_max)
    while len(pts) < max_points:
        if prev_u is not None:
            sec = u - prev_u
            n = np.linalg.norm(sec)
            if n > 0:
                t_new = sec / n
                t = t_new
        ok = False
        for _ in range(4):  # initial try plus 3 halvings
            pred = u + ds * t
            res = _corrector(prob, pred, t)
            if res is not None:
                ok = True
                break
            ds *= 0.5
            if ds < ds_min:
                break
        if not ok:
            return Branch(pts, truncated=True, reason="corrector failed")
        u_new, r_new, its = res
        bp = prob.point(u_new[0], u_new[1], abs(r_new.x_out - u_new[0]), keep_polyline)
        d_alpha_prev = u[1] - prev_u[1] if prev_u is not None else t[1]
        d_alpha = u_new[1] - u[1]
        fold = (d_alpha * d_alpha_prev < 0) or ((bp.multiplier - 1.0) * (pts[-1].multiplier - 1.0) < 0)
        if fold and ds > fold_ds:
            # close to a fold the branch turns sharply; re-approach it with
            # shorter steps so the flagged pair brackets it tightly
            ds = max(0.25 * ds, ds_min)
            continue
        if fold:
            bp = replace(bp, fold=True)
        pts.append(bp)
        prev_u, u = u, u_new
        if fold and stop_on_fold:
            return Branch(pts, reason="fold")
        if stop_on_graze and bp.y_min * pts[-2].y_min < 0:
            return Branch(pts, reason="graze")
        if not lo <= u[1] <= hi:
            return Branch(pts, reason="window")
        if its <= 3:
            ds = min(ds * 1.5, ds_max)
    return Branch(pts, reason="max_points")


def _corrector(prob: CycleProblem, pred: np.ndarray, t: np.ndarray, maxit: int = 8):
    u = pred.copy()
    for it in range(1, maxit + 1):
        r = _safe_P(prob, u[0], u[1])
        if r is None:
            return None
        G = r.x_out - u[0]
        arc = float(t @ (u - pred))
        if abs(G) <= NEWTON_TOL and abs(arc) <= 1e-12:
            return u, r, it
        try:
            Pa, _, _ = prob.P_alpha(u[0], u[1])
        except (NoReturnError, EscapeError, NumericalError):
            return None
        A = np.array(((r.d1 - 1.0, Pa), (t[0], t[1])))
        try:
            du = np.linalg.solve(A, -np.array((G, arc)))
        except np.linalg.LinAlgError:
            return None
        u = u + du
        if not np.all(np.isfinite(u)):
            return None
    r = _safe_P(prob, u[0], u[1])
    if r is not None and abs(r.x_out - u[0]) <= NEWTON_TOL:
        return u, r, maxit
    return None


def solve_fold(
    prob: CycleProblem, guess: BranchPoint, *, tol: float = FOLD_TOL, maxit: int = 30, max_step: float = 0.01
) -> FoldPoint:
    """Newton on {P - s = 0, P_s - 1 = 0} in (s, alpha)."""
    s, a = guess.x_fix, guess.alpha
    h = prob.fd_step()
    res = math.inf
    for it in range(1, maxit + 1):
        r = prob.P(s, a)
        G = np.array((r.x_out - s, r.d1 - 1.0))
        res = float(np.max(np.abs(G)))
        rsp, rsm = prob.P(s + h, a), prob.P(s - h, a)
        rap, ram = prob.P(s, a + h), prob.P(s, a - h)
        Pss = (rsp.d1 - rsm.d1) / (2 * h)
        Pa = (rap.x_out - ram.x_out) / (2 * h)
        Psa = (rap.d1 - ram.d1) / (2 * h)
        if res <= tol:
            if abs(Pss) < NONDEGENERACY_FLOOR or abs(Pa) < NONDEGENERACY_FLOOR:
                raise DegenerateFoldError(f"nondegeneracy fails: P_ss={Pss:.3g}, P_alpha={Pa:.3g}")
            bp = prob.point(s, a, res, keep_polyline=True)
            return FoldPoint(prob.eps, a, s, Pss, Pa, r.d1, res, it, bp.orbit)
        J = np.array(((r.d1 - 1.0, Pa), (Pss, Psa)))
        det = np.linalg.det(J)
        if abs(det) < 1e-14 * max(1.0, np.abs(J).max() ** 2):
            raise DegenerateFoldError(f"singular augmented Jacobian (det={det:.3g})")
        du = np.linalg.solve(J, -G)
        # trust region, then keep the update where the return map is defined
        lam = min(1.0, max_step / max(abs(du[0]), abs(du[1])))
        for _ in range(NEWTON_HALVINGS + 1):
            if _safe_P(prob, s + lam * du[0], a + lam * du[1]) is not None:
                break
            lam *= 0.5
        else:
            raise DivergenceError("fold Newton step leaves the domain of the return map", res)
        s, a = s + lam * du[0], a + lam * du[1]
    raise DivergenceError(f"fold Newton did not converge in {maxit} iterations", res)


def count_fixed_points(
    prob: CycleProblem,
    alpha: float,
    s_lo: float,
    s_hi: float,
    n: int = 60,
    polish: bool = True,
) -> list[BranchPoint]:
    """Fixed points of P(., alpha) located by sign changes of P(s) - s on a grid."""
    grid = np.linspace(s_lo, s_hi, n)
    vals = []
    for s in grid:
        r = _safe_P(prob, float(s), alpha)
        vals.append(math.nan if r is None else r.x_out - s)
    out = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if not (math.isfinite(a) and math.isfinite(b)) or a * b > 0:
            continue
        s0 = float(grid[i] if a == 0 else grid[i + 1] if b == 0 else grid[i] - a * (grid[i + 1] - grid[i]) / (b - a))
        if polish:
            try:
                out.append(cycle_newton(prob, s0, alpha))
                continue
            except DivergenceError:
                pass
        out.append(BranchPoint(alpha, s0, math.nan, math.nan, math.nan, abs(a)))
    # distinct points only
    uniq: list[BranchPoint] = []
    for p in out:
        if all(abs(p.x_fix - q.x_fix) > 1e-6 for q in uniq):
            uniq.append(p)
    return uniq


def equilibrium(fld: SmoothField2D, alpha: float, z0: Sequence[float], tol: float = 1e-13, maxit: int = 50) -> np.ndarray:
    z = np.array(z0, dtype=float)
    for _ in range(maxit):
        F = np.array(fld.f(z[0], z[1], alpha))
        if np.max(np.abs(F)) <= tol:
            return z
        J = np.array(fld.jac(z[0], z[1], alpha))
        z = z - np.linalg.solve(J, F)
    F = np.array(fld.f(z[0], z[1], alpha))
    if np.max(np.abs(F)) <= 1e3 * tol:
        return z
    raise DivergenceError("equilibrium Newton did not converge", float(np.max(np.abs(F))))


@dataclass(frozen=True)
class HopfPoint:
    alpha: float
    z: tuple[float, float]
    determinant: float


def equilibrium_hopf(model: PwsModel, fn: Optional[RegFn], eps: float, alpha_window: tuple[float, float]) -> HopfPoint:
    """alpha where the trace of the Jacobian at the equilibrium vanishes."""
    fld = cycle_field(model, fn, eps)
    params = friction_params_of(model)

    def eq(alpha):
        return equilibrium(fld, alpha, (-params.mu(alpha), alpha))

    def trace(alpha):
        z = eq(alpha)
        (a, _), (_, d) = fld.jac(z[0], z[1], alpha)
        return a + d

    lo, hi = alpha_window
    tl, th = trace(lo), trace(hi)
    if tl * th > 0:
        raise NotFoundError(f"trace has no sign change on [{lo}, {hi}]")
    a = brentq(trace, lo, hi, xtol=1e-14, rtol=1e-15)
    z = eq(a)
    det = float(np.linalg.det(np.array(fld.jac(z[0], z[1], a))))
    return HopfPoint(a, (float(z[0]), float(z[1])), det)


@dataclass(frozen=True)
class GrazingResult:
    alpha_star: float
    y_min: float
    slope: float
    cycle: BranchPoint
    curvature: float


def _cycle_near(prob: CycleProblem, alpha: float, seed_s: Optional[float]) -> BranchPoint:
    if seed_s is not None:
        try:
            return cycle_newton(prob, seed_s, alpha)
        except DivergenceError:
            pass
    params = friction_params_of(prob.model)
    z0 = (-params.mu(alpha), alpha - 1e-3)
    s = seed_from_simulation(prob, z0, alpha, 3000.0, backward=True)
    return cycle_newton(prob, s, alpha)


def grazing_alpha(model: PwsModel, alpha_window: Optional[tuple[float, float]] = None, *, tol: float = 1e-8) -> GrazingResult:
    """alpha where the repelling Z_+ cycle touches y = 0.

    The Z_+ cycle family is followed from the Hopf side in natural
    parameter steps until y_min changes sign, then refined by the secant
    method on alpha -> y_min.
    """
    props = friction_props(friction_params_of(model))
    prob = CycleProblem(model, None, 0.0, tol=1e-12)
    lo, hi = alpha_window or (props.y0 + 5e-3, props.y0 + 0.5)
    alphas = np.arange(lo, hi + 1e-12, 5e-3)
    prev = None
    cur = None
    seed = None
    for a in alphas:
        try:
            cur = _cycle_near(prob, float(a), seed)
        except (DivergenceError, NotFoundError, NumericalError):
            break
        seed = cur.x_fix
        if prev is not None and prev.y_min > 0 >= cur.y_min:
            break
        prev = cur
    else:
        raise NotFoundError(f"y_min of the Z_+ cycle does not cross 0 in [{lo}, {hi}]")
    if prev is None or cur is None or not (prev.y_min > 0 >= cur.y_min):
        raise NotFoundError(f"y_min of the Z_+ cycle does not cross 0 in [{lo}, {hi}]")
    # secant steps, falling back to bisection when they leave the bracket
    pos, neg = prev, cur
    best = cur
    a_old, y_old = prev.alpha, prev.y_min
    for _ in range(60):
        a_new = best.alpha - best.y_min * (best.alpha - a_old) / (best.y_min - y_old)
        if not min(pos.alpha, neg.alpha) < a_new < max(pos.alpha, neg.alpha):
            a_new = 0.5 * (pos.alpha + neg.alpha)
        a_old, y_old = best.alpha, best.y_min
        best = cycle_newton(prob, best.x_fix, a_new)
        if abs(best.y_min) <= tol:
            break
        if best.y_min > 0:
            pos = best
        else:
            neg = best
    else:
        raise NotFoundError("secant iteration for the grazing value did not converge")
    # derivative of y_min with respect to the shifted parameter alpha* - alpha,
    # positive when the cycle dips below y = 0 for alpha > alpha*
    slope = -(cur.y_min - prev.y_min) / (cur.alpha - prev.alpha)
    curv = _min_curvature(prob, best)
    return GrazingResult(best.alpha, best.y_min, slope, best, curv)


def _min_curvature(prob: CycleProblem, bp: BranchPoint) -> float:
    """Second time derivative of y at the minimum of the cycle."""
    r = prob.P(bp.x_fix, bp.alpha, keep_orbit=True)
    ymin, tm = min_y_of_orbit(r.orbit)
    h = 1e-3
    y = [float(r.orbit(t)[1]) for t in (tm - h, tm, tm + h)]
    return (y[0] - 2 * y[1] + y[2]) / h**2


def grazing_cycle_polyline(model: PwsModel, graze: GrazingResult) -> np.ndarray:
    prob = CycleProblem(model, None, 0.0, tol=1e-12)
    return prob.point(graze.cycle.x_fix, graze.alpha_star).orbit


def alpha_for_ymin(model: PwsModel, graze: GrazingResult, target: float) -> BranchPoint:
    """Z_+ cycle whose minimum height equals ``target`` (between Hopf and grazing)."""
    prob = CycleProblem(model, None, 0.0, tol=1e-12)
    props = friction_props(friction_params_of(model))
    a_hi = graze.alpha_star
    a_lo = props.y0 + 1e-3
    seed = graze.cycle.x_fix
    cache: dict[float, BranchPoint] = {}

    def fy(a):
        nonlocal seed
        bp = _cycle_near(prob, a, seed)
        seed = bp.x_fix
        cache[a] = bp
        return bp.y_min - target

    # walk down from grazing so each Newton is seeded by a nearby cycle
    a_prev = a_hi
    f_prev = -target
    a = a_hi
    step = 0.02 * (a_hi - a_lo)
    while True:
        a = max(a - step, a_lo)
        fa = fy(a)
        if fa >= 0 or a <= a_lo:
            break
        a_prev, f_prev = a, fa
        step *= 1.5
    if fa < 0:
        raise NotFoundError(f"no Z_+ cycle with y_min = {target}")
    a_sol = brentq(fy, a, a_prev, xtol=1e-10)
    return cache.get(a_sol) or _cycle_near(prob, a_sol, seed)


def fold_for_eps(
    model: PwsModel,
    fn: RegFn,
    eps: float,
    graze: GrazingResult,
    *,
    seed_factor: float = 8.0,
    max_ladder: int = 3,
    tol: float = 1e-11,
) -> tuple[FoldPoint, Branch]:
    """Saddle-node of the regularized system, approached from the grazing side.

    The regularized unstable cycle is seeded from the Z_+ cycle with
    y_min = seed_factor * eps**(2k/(2k+1)); if shooting does not land on a
    repelling cycle there, the target height is doubled (moving towards the
    Hopf point) up to ``max_ladder`` times.  Failing that, the small repelling
    cycle born at the regularized Hopf point is used (:func:`hopf_side_seed`).
    The seed is then continued in increasing alpha until the fold is flagged.
    """
    prob = CycleProblem(model, fn, eps, tol=tol)
    y_cap = 0.8 * friction_props(friction_params_of(model)).y0
    target = seed_factor * eps**fn.exponent
    seed = None
    tries = 0
    while target <= y_cap and tries < max_ladder:
        tries += 1
        z_seed = alpha_for_ymin(model, graze, target)
        try:
            seed = cycle_newton(prob, z_seed.x_fix, z_seed.alpha, keep_polyline=False)
        except DivergenceError:
            seed = None
        if seed is not None and seed.multiplier > 1.0:
            break
        # the regularized unstable cycle is too far from the Z_+ one; move towards Hopf
        seed = None
        target *= 2.0
    if seed is None:
        seed = hopf_side_seed(prob)
    branch = trace_branch(
        prob, seed.alpha, graze.alpha_star + 0.05, seed, ds=1e-3, stop_on_fold=True, max_points=300
    )
    if not branch.folds:
        raise NotFoundError(f"no fold found for eps={eps:g} ({branch.reason})")
    guess = branch.points[branch.folds[0]]
    # the flagged point lies just past the fold; the previous one is on the near side
    before = branch.points[branch.folds[0] - 1]
    guess = before if abs(before.multiplier - 1) < abs(guess.multiplier - 1) else guess
    return solve_fold(prob, guess), branch


def hopf_side_seed(prob: CycleProblem, eta: float = 3e-3, n: int = 60) -> BranchPoint:
    """Repelling cycle just past the (subcritical) Hopf point of the regularized field.

    P(s) - s is scanned on the section at alpha_H + eta; the repelling fixed
    point nearest to the equilibrium is the Hopf cycle.
    """
    hopf = equilibrium_hopf(prob.model, prob.fn, prob.eps, _hopf_window(prob.model))
    a = hopf.alpha + eta
    cands = [p for p in count_fixed_points(prob, a, -0.05, a - 1e-4, n) if p.multiplier > 1.0]
    if not cands:
        raise NotFoundError(f"no repelling cycle next to the Hopf point alpha_H={hopf.alpha:.6g}")
    return max(cands, key=lambda p: p.x_fix)


def _hopf_window(model: PwsModel) -> tuple[float, float]:
    y0 = friction_props(friction_params_of(model)).y0
    return 0.5 * y0, 1.5 * y0


def scaling_fit(eps_list: Sequence[float], gaps: Sequence[float]) -> tuple[float, float, float]:
    le, lg = np.log(np.asarray(eps_list, dtype=float)), np.log(np.asarray(gaps, dtype=float))
    slope, intercept = np.polyfit(le, lg, 1)
    pred = slope * le + intercept
    ss_res = float(np.sum((lg - pred) ** 2))
    ss_tot = float(np.sum((lg - lg.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def scaling_sweep(
    model: PwsModel,
    fn: RegFn,
    eps_list: Sequence[float],
    graze: Optional[GrazingResult] = None,
    *,
    solver: Optional[Callable[[float], FoldPoint]] = None,
    jobs: int = 1,
) -> ScalingFit:
    """Fold for each eps and the log-log fit of alpha* - alpha_SN against eps.

    With ``jobs > 1`` (friction models only) the eps values run in a process
    pool; each worker rebuilds the model from its parameters.
    """
    graze = graze or grazing_alpha(model)
    if jobs > 1 and solver is None:
        from concurrent.futures import ProcessPoolExecutor

        params = friction_params_of(model)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_fold_job, [(params, fn.id, e, graze) for e in eps_list]))
    else:
        outs = []
        for eps in eps_list:
            try:
                fp = solver(eps) if solver else fold_for_eps(model, fn, eps, graze)[0]
                outs.append((eps, fp))
            except (NumericalError, DomainError) as exc:
                outs.append((eps, f"{type(exc).__name__}: {exc}"))
    folds = [o for _, o in outs if isinstance(o, FoldPoint)]
    fails = [(e, o) for e, o in outs if isinstance(o, str)]
    pts = [(fp.eps, graze.alpha_star - fp.alpha_sn) for fp in folds]
    good = [(e, g) for e, g in pts if g > 0]
    if len(good) >= 2:
        slope, icpt, r2 = scaling_fit([e for e, _ in good], [g for _, g in good])
    else:
        slope = icpt = r2 = math.nan
    return ScalingFit(pts, slope, icpt, r2, graze.alpha_star, folds, fails)


def _fold_job(args):
    from foldlab.models import make_friction
    from foldlab.regfn import get_regfn

    params, fn_name, eps, graze = args
    try:
        return eps, fold_for_eps(make_friction(params), get_regfn(fn_name), eps, graze)[0]
    except (NumericalError, DomainError) as exc:
        return eps, f"{type(exc).__name__}: {exc}"


def fold_hausdorff(fold: FoldPoint, gamma0: np.ndarray) -> float:
    return hausdorff_distance(fold.orbit, gamma0)
