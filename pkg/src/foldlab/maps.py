"""Section-to-section maps and orbit statistics.

A :class:`Section` is a straight line segment {p + s e} with unit normal n
and crossing direction.  For a transition from section A at coordinate s to
the first admissible crossing of section B, the derivative follows from the
transported tangent V (started at e_A) projected along the flow,

    d1 = e_B . (V - F (n_B . V) / (n_B . F)),

and, independently, from Liouville's formula for planar flows,

    d1 = exp(int tr J dt) * (F(z0) ^ e_A) / (F(zT) ^ e_B),

where a ^ b is the 2d cross product.  The second form is used for log|d1|
when the tangent itself contracts below round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from foldlab.errors import DerivativeUndefinedError, DomainError, EscapeError, ModelError, NoReturnError
from foldlab.integrate import EventSpec, OrbitSegment, box_event, integrate
from foldlab.models import (
    FrictionParams,
    PwsModel,
    SigmaTag,
    SmoothField2D,
    assemble_regularized,
    classify_sigma_point,
    filippov_drift,
    friction_params_of,
)
from foldlab.regfn import RegFn


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


@dataclass(frozen=True)
class Section:
    """Line {point + s * coord} crossed in direction ``direction`` of ``normal``."""

    point: tuple[float, float]
    normal: tuple[float, float]
    coord: tuple[float, float]
    direction: int = 1
    lo: float = -math.inf
    hi: float = math.inf
    name: str = "section"

    def g(self, x: float, y: float) -> float:
        return self.normal[0] * (x - self.point[0]) + self.normal[1] * (y - self.point[1])

    def s_of(self, x: float, y: float) -> float:
        return self.coord[0] * (x - self.point[0]) + self.coord[1] * (y - self.point[1])

    def at(self, s: float) -> tuple[float, float]:
        return self.point[0] + s * self.coord[0], self.point[1] + s * self.coord[1]

    def contains(self, s: float) -> bool:
        return self.lo <= s <= self.hi

    def event(self, terminal: bool = True) -> EventSpec:
        def accept(x, y):
            return self.lo <= self.s_of(x, y) <= self.hi

        return EventSpec(self.g, self.direction, terminal, self.name, accept)


def horizontal_section(height: float, direction: int, lo: float = -math.inf, hi: float = math.inf, name: str = "") -> Section:
    """Section y = height with coordinate x."""
    return Section((0.0, height), (0.0, 1.0), (1.0, 0.0), direction, lo, hi, name or f"y={height:g}")


@dataclass(frozen=True)
class SectionPair:
    """Entry and exit sections at height delta on either side of the fold.

    ``I_L`` is the interval of the incoming section (orbits cross downward),
    ``I_R`` that of the outgoing one (orbits cross upward).  ``xi`` is the
    half-width of the box outside of which orbits count as escaped.
    """

    delta: float
    I_L: tuple[float, float]
    I_R: tuple[float, float]
    xi: float = math.inf

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"section height must be positive, got {self.delta!r}")
        if not (self.I_L[0] < self.I_L[1] and self.I_R[0] < self.I_R[1]):
            raise DomainError("section intervals must be nonempty")
        if math.isfinite(self.xi) and not self.delta < self.xi:
            raise DomainError("need delta < xi")

    @property
    def sigma_L(self) -> Section:
        return horizontal_section(self.delta, -1, self.I_L[0], self.I_L[1], "sigma_L")

    @property
    def sigma_R(self) -> Section:
        return horizontal_section(self.delta, 1, self.I_R[0], self.I_R[1], "sigma_R")

    def box(self) -> Optional[EventSpec]:
        if not math.isfinite(self.xi):
            return None
        return box_event(-self.xi, self.xi, -self.xi, self.xi)


def normal_form_sections(delta: float = 0.04, xi: float = 1.0) -> SectionPair:
    r = math.sqrt(delta)
    return SectionPair(delta, (-xi, -0.1 * r), (0.1 * r, xi), xi)


def friction_sections(params: FrictionParams, delta: float = 0.04) -> SectionPair:
    """Sections at y = delta around the fold (-mu_s, 0).

    Near the fold Z_+ moves leftward, so the incoming interval lies to the
    right of the point where y' vanishes on y = delta and the outgoing one to
    the left of it.
    """
    xc = -params.mu(delta)
    return SectionPair(delta, (xc, xc + 2.0), (xc - 2.0, xc))


def friction_return_section(params: FrictionParams, alpha: float) -> Section:
    """Vertical line through the Z_+ equilibrium, crossed leftward below it.

    Every cycle around the equilibrium (-mu_+(alpha), alpha) crosses it once;
    the coordinate is the y value of the crossing.
    """
    xe = -params.mu(alpha)
    return Section((xe, 0.0), (-1.0, 0.0), (0.0, 1.0), 1, -math.inf, alpha, "return")


@dataclass(frozen=True)
class ReturnSample:
    x_out: float
    d1: float
    flight_time: float
    d2: Optional[float] = None
    log_abs_d1: Optional[float] = None
    sign_d1: Optional[float] = None
    state_out: tuple[float, float] = (math.nan, math.nan)
    orbit: Optional[OrbitSegment] = None


def tangent_orbit_points(model: PwsModel, delta: float, alpha: float = 0.0, tol: float = 1e-12) -> tuple[float, float]:
    """(gamma_L, gamma_R): where the Z_+ orbit tangent at the fold meets y = delta."""
    if model.fold_x is None:
        raise ModelError("model has no fold location")
    z0 = (model.fold_x, 0.0)
    ev = EventSpec(lambda x, y: y - delta, 1, True, "up")
    fwd = integrate(model.z_plus, z0, alpha, 100.0, tol, [ev])
    bwd = integrate(model.z_plus, z0, alpha, 100.0, tol, [ev], backward=True)
    if fwd.terminal_event is None or bwd.terminal_event is None:
        raise NoReturnError("tangent orbit does not reach the section height")
    return bwd.terminal_event.state[0], fwd.terminal_event.state[0]


def transition(
    fld: SmoothField2D,
    src: Section,
    dst: Section,
    s: float,
    alpha: float = 0.0,
    *,
    tol: float = 1e-10,
    t_max: float = 100.0,
    box: Optional[EventSpec] = None,
    want_d1: bool = True,
    want_log: bool = False,
    keep_orbit: bool = False,
    method: str = "auto",
) -> ReturnSample:
    """Map coordinate ``s`` on ``src`` to the first admissible crossing of ``dst``."""
    z0 = src.at(s)
    events = [dst.event(True)]
    if box is not None:
        events.append(box)
    v0 = src.coord if want_d1 else None
    orb = integrate(fld, z0, alpha, t_max, tol, events, v0=v0, log_div=want_log, method=method)
    hit = orb.terminal_event
    if hit is None:
        raise NoReturnError(f"no crossing of {dst.name} within t_max={t_max:g} from s={s:.12g}")
    if hit.name == "escape":
        raise EscapeError(f"orbit from s={s:.12g} left the box at {hit.state}")
    xs, ys = hit.state
    F = fld.f(xs, ys, alpha)
    d1 = math.nan
    if want_d1:
        V = hit.tangent
        nF = dst.normal[0] * F[0] + dst.normal[1] * F[1]
        if nF == 0.0:
            raise DerivativeUndefinedError(f"tangential arrival at {hit.state}")
        nV = dst.normal[0] * V[0] + dst.normal[1] * V[1]
        d1 = dst.coord[0] * (V[0] - F[0] * nV / nF) + dst.coord[1] * (V[1] - F[1] * nV / nF)
    log_d1 = sgn = None
    if want_log:
        F0 = fld.f(z0[0], z0[1], alpha)
        ratio = _cross(F0, src.coord) / _cross(F, dst.coord)
        log_d1 = hit.log_div + math.log(abs(ratio))
        sgn = math.copysign(1.0, ratio)
    return ReturnSample(
        x_out=dst.s_of(xs, ys),
        d1=d1,
        flight_time=hit.t,
        log_abs_d1=log_d1,
        sign_d1=sgn,
        state_out=(xs, ys),
        orbit=orb if keep_orbit else None,
    )


def richardson_d2(d1_at, x: float, h: float) -> float:
    """Second derivative from central differences of d1 with steps h and h/2."""
    D1 = (d1_at(x + h) - d1_at(x - h)) / (2 * h)
    h2 = 0.5 * h
    D2 = (d1_at(x + h2) - d1_at(x - h2)) / (2 * h2)
    return (4.0 * D2 - D1) / 3.0


def d2_step(fn: Optional[RegFn], eps: float) -> float:
    if fn is None or eps == 0.0:
        return 1e-5
    return max(1e-5, eps ** fn.exponent / 100.0)


def _q_pws(model: PwsModel, sections: SectionPair, x: float, alpha: float, tol: float, t_max: float) -> ReturnSample:
    """eps = 0: Z_+ flight, possibly a Filippov slide to the fold and lift-off."""
    zp = model.z_plus
    sL, sR = sections.sigma_L, sections.sigma_R
    ground = EventSpec(lambda xx, yy: yy, -1, True, "sigma")
    events = [sR.event(True), ground]
    if sections.box() is not None:
        events.append(sections.box())
    orb = integrate(zp, sL.at(x), alpha, t_max, tol, events, v0=sL.coord)
    hit = orb.terminal_event
    if hit is None:
        raise NoReturnError(f"no return to the exit section from x={x:.12g}")
    if hit.name == "escape":
        raise EscapeError(f"orbit from x={x:.12g} left the box at {hit.state}")
    if hit.name == "sigma_R":
        xs, ys = hit.state
        F = zp.f(xs, ys, alpha)
        V = hit.tangent
        d1 = V[0] - F[0] * V[1] / F[1]
        return ReturnSample(xs, d1, hit.t, state_out=hit.state)
    xs = hit.state[0]
    cls = classify_sigma_point(model, xs, alpha)
    if cls.tag is not SigmaTag.SLIDING:
        raise DomainError(f"orbit reaches the switching line at x={xs:.12g} outside the sliding region")
    xf = model.fold_x
    v = filippov_drift(model, xs, alpha)
    if (xf - xs) * v <= 0:
        raise DomainError("sliding flow does not move towards the fold")
    # the drift stays bounded away from zero up to the fold
    t_slide, _ = quad(lambda u: 1.0 / _drift_or_edge(model, u, alpha, xf), xs, xf, epsabs=1e-13, epsrel=1e-12)
    lift = integrate(zp, (xf, 0.0), alpha, t_max, tol, [sR.event(True)])
    end = lift.terminal_event
    if end is None:
        raise NoReturnError("lift-off orbit does not reach the exit section")
    return ReturnSample(end.state[0], 0.0, hit.t + t_slide + end.t, state_out=end.state)


def _drift_or_edge(model, u, alpha, xf):
    # quad may sample the fold itself, where the Filippov weight degenerates
    # to the Z_+ direction; use the Z_+ first component there
    try:
        return filippov_drift(model, u, alpha)
    except DomainError:
        return model.z_plus.f(xf, 0.0, alpha)[0]


def q_map(
    model: PwsModel,
    fn: Optional[RegFn],
    eps: float,
    sections: SectionPair,
    x: float,
    alpha: float = 0.0,
    want_d2: bool = False,
    *,
    tol: float = 1e-10,
    t_max: float = 100.0,
    want_log: bool = False,
) -> ReturnSample:
    """Local transition from the incoming to the outgoing section past the fold."""
    if not sections.I_L[0] <= x <= sections.I_L[1]:
        raise DomainError(f"x={x} outside the incoming interval {sections.I_L}")
    if eps < 0:
        raise DomainError("eps must be non-negative")
    if eps == 0.0:
        res = _q_pws(model, sections, x, alpha, tol, t_max)
        if want_d2:
            h = d2_step(fn, eps)
            res = replace(res, d2=richardson_d2(lambda u: _q_pws(model, sections, u, alpha, tol, t_max).d1, x, h))
        return res
    fld = assemble_regularized(model, fn, eps)
    kw = dict(tol=tol, t_max=t_max, box=sections.box())
    res = transition(fld, sections.sigma_L, sections.sigma_R, x, alpha, want_log=want_log, **kw)
    if want_d2:
        h = d2_step(fn, eps)
        d2 = richardson_d2(lambda u: transition(fld, sections.sigma_L, sections.sigma_R, u, alpha, **kw).d1, x, h)
        res = replace(res, d2=d2)
    return res


def r_map(model, fn, eps, sections, x, alpha=0.0, *, tol=1e-10, t_max=100.0) -> ReturnSample:
    """Global return from the outgoing section back to the incoming one."""
    fld = model.z_plus if eps == 0.0 else assemble_regularized(model, fn, eps)
    return transition(fld, sections.sigma_R, sections.sigma_L, x, alpha, tol=tol, t_max=t_max, box=sections.box())


def p_map(model, fn, eps, sections, x, alpha=0.0, *, tol=1e-10, t_max=100.0) -> ReturnSample:
    """Full return to the incoming section, integrated in one piece."""
    if eps == 0.0:
        q = _q_pws(model, sections, x, alpha, tol, t_max)
        r = r_map(model, fn, eps, sections, q.x_out, alpha, tol=tol, t_max=t_max)
        return ReturnSample(r.x_out, q.d1 * r.d1, q.flight_time + r.flight_time, state_out=r.state_out)
    fld = assemble_regularized(model, fn, eps)
    return transition(fld, sections.sigma_L, sections.sigma_L, x, alpha, tol=tol, t_max=t_max, box=sections.box())


def min_y_of_orbit(orbit: OrbitSegment) -> tuple[float, float]:
    """Global minimum of y along the dense output and the time where it occurs."""
    rhs = orbit.rhs
    ys = orbit.states[:, 1]
    i0 = int(np.argmin(ys))
    best = (float(ys[i0]), float(orbit.times[i0]))
    # y' changes sign from - to + inside a step at every interior minimum
    for p in orbit.pieces:
        ts = p.t0 + np.array((0.0, 0.25, 0.5, 0.75, 1.0)) * p.h
        zs = [np.asarray(p(t), dtype=float) for t in ts]
        dy = [rhs(z)[1] for z in zs]
        for a, b, ta, tb in zip(dy[:-1], dy[1:], ts[:-1], ts[1:]):
            if a < 0.0 <= b:
                tm = ta if b == 0.0 else brentq(lambda t: rhs(np.asarray(p(t), dtype=float))[1], ta, tb, xtol=1e-15 * max(1.0, abs(tb)))
                ym = float(p(tm)[1])
                if ym < best[0]:
                    best = (ym, float(tm))
    return best


def hausdorff_distance(a, b, chunk: int = 2048) -> float:
    """Two-sided Hausdorff distance between closed polylines (vertices to segments)."""
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != 2 or B.shape[1] != 2:
        raise DomainError("polylines must be (n, 2) arrays")
    if len(A) < 3 or len(B) < 3:
        raise DomainError("polylines need at least 3 points")
    return max(_directed(A, B, chunk), _directed(B, A, chunk))


def _directed(P, Q, chunk):
    """max over vertices of P of the distance to the closed polyline Q."""
    q0 = Q
    q1 = np.roll(Q, -1, axis=0)
    d = q1 - q0
    L2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(L2 > 0, L2, 1.0)
    out = 0.0
    for i in range(0, len(P), chunk):
        p = P[i : i + chunk]
        w = p[:, None, :] - q0[None, :, :]
        t = np.einsum("ijk,jk->ij", w, d) / safe
        t = np.clip(np.where(L2 > 0, t, 0.0), 0.0, 1.0)
        r = w - t[:, :, None] * d[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", r, r)).min(axis=1)
        out = max(out, float(dist.max()))
    return out


def deep_sliding_point(model: PwsModel, alpha: float = 0.0, distance: float = 0.3) -> float:
    """Point on the sliding region at ``distance`` from the fold, upstream of the drift."""
    if model.fold_x is None:
        raise ModelError("model has no fold location")
    for side in (-1.0, 1.0):
        x = model.fold_x + side * distance
        if classify_sigma_point(model, x, alpha).tag is SigmaTag.SLIDING:
            if (model.fold_x - x) * filippov_drift(model, x, alpha) > 0:
                return x
    raise ModelError("no sliding region drifting towards the fold")


def measure_slow_manifold_exit(
    model: PwsModel,
    fn: RegFn,
    eps: float,
    sections: SectionPair,
    x_start: Optional[float] = None,
    alpha: float = 0.0,
    *,
    tol: float = 1e-11,
    t_max: float = 100.0,
) -> float:
    """x where an orbit started on the sliding region first reaches the exit section.

    The start point (x_start, 0) is attracted to the slow manifold within a
    time O(eps) and then drifts to the fold; the exit section lies above the
    layer, so it can be armed from the start.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if x_start is None:
        x_start = deep_sliding_point(model, alpha)
    fld = assemble_regularized(model, fn, eps)
    events = [sections.sigma_R.event(True)]
    if sections.box() is not None:
        events.append(sections.box())
    orb = integrate(fld, (x_start, 0.0), alpha, t_max, tol, events)
    hit = orb.terminal_event
    if hit is None:
        raise NoReturnError("orbit did not reach the exit section")
    if hit.name == "escape":
        raise EscapeError("orbit left the box before reaching the exit section")
    return hit.state[0]
