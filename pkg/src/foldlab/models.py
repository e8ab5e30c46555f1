"""Piecewise-smooth planar models with switching manifold {y = 0}.

A model is a pair of smooth fields ``z_plus`` (used for y > 0) and
``z_minus`` (y < 0).  The regularized field

    Z = phi(y/eps, eps) Z_+ + (1 - phi(y/eps, eps)) Z_-

is assembled by :func:`assemble_regularized`.  Points on the switching line
are classified by the signs of the Lie derivatives Z_+ h and Z_- h with
h(x, y) = y, which are simply the second components of the fields.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from foldlab.errors import DomainError, ModelError
from foldlab.regfn import RegFn

TOL_SIGN = 1e-10

Pair = tuple[float, float]
Mat = tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class SmoothField2D:
    """A smooth planar field depending on a scalar parameter alpha.

    ``f``, ``jac`` and ``d_alpha`` take ``(x, y, alpha)`` and return plain
    floats: the field, its 2x2 Jacobian with respect to (x, y) as nested
    tuples, and the partial derivative with respect to alpha.
    ``eps`` is set for regularized fields and locates the stiff layer.
    """

    f: Callable[[float, float, float], Pair]
    jac: Callable[[float, float, float], Mat]
    d_alpha: Callable[[float, float, float], Pair]
    eps: Optional[float] = None
    name: str = ""

    def __call__(self, x: float, y: float, alpha: float = 0.0) -> Pair:
        return self.f(x, y, alpha)

    def jacobian(self, x: float, y: float, alpha: float = 0.0) -> np.ndarray:
        return np.array(self.jac(x, y, alpha))

    def divergence(self, x: float, y: float, alpha: float = 0.0) -> float:
        (a, _), (_, d) = self.jac(x, y, alpha)
        return a + d


@dataclass(frozen=True)
class FrictionParams:
    mu_s: float = 1.0
    mu_m: float = 0.5
    rho: float = 4.0
    c_fric: float = 0.85

    def __post_init__(self):
        vals = (self.mu_s, self.mu_m, self.rho, self.c_fric)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ModelError(f"friction parameters must be positive and finite: {vals}")
        if not self.mu_s > self.mu_m:
            raise ModelError("need mu_s > mu_m")
        if not self.c_fric < self.rho * (self.mu_s - self.mu_m):
            raise ModelError("need c_fric < rho (mu_s - mu_m) for an interior friction minimum")

    def mu(self, y: float) -> float:
        return self.mu_m + (self.mu_s - self.mu_m) * math.exp(-self.rho * y) + self.c_fric * y

    def dmu(self, y: float) -> float:
        return -self.rho * (self.mu_s - self.mu_m) * math.exp(-self.rho * y) + self.c_fric


@dataclass(frozen=True)
class PwsModel:
    """Pair of smooth fields switching across y = 0."""

    z_plus: SmoothField2D
    z_minus: SmoothField2D
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    fold_x: Optional[float] = None

    def h(self, x: float, y: float) -> float:
        return y


class SigmaTag(enum.Enum):
    CROSSING = "Crossing"
    SLIDING = "Sliding"
    TANGENCY = "Tangency"


class TangencyKind(enum.Enum):
    VISIBLE_FOLD = "VisibleFold"
    OTHER = "Other"


@dataclass(frozen=True)
class SigmaClass:
    tag: SigmaTag
    tangency_kind: Optional[TangencyKind] = None

    @property
    def is_visible_fold(self) -> bool:
        return self.tangency_kind is TangencyKind.VISIBLE_FOLD


def assemble_regularized(model: PwsModel, fn: RegFn, eps: float) -> SmoothField2D:
    if not (eps > 0.0 and math.isfinite(eps)):
        raise DomainError(f"regularization needs eps > 0, got {eps!r}; use the Filippov tools for eps = 0")
    zp, zm = model.z_plus, model.z_minus
    fast = fn.fast
    inv = 1.0 / eps

    def f(x, y, alpha):
        p, _ = fast(y * inv, eps)
        a1, a2 = zp.f(x, y, alpha)
        b1, b2 = zm.f(x, y, alpha)
        return p * a1 + (1.0 - p) * b1, p * a2 + (1.0 - p) * b2

    def jac(x, y, alpha):
        p, dp = fast(y * inv, eps)
        a1, a2 = zp.f(x, y, alpha)
        b1, b2 = zm.f(x, y, alpha)
        (pa, pb), (pc, pd) = zp.jac(x, y, alpha)
        (ma, mb), (mc, md) = zm.jac(x, y, alpha)
        q = 1.0 - p
        w = dp * inv
        return (
            (p * pa + q * ma, p * pb + q * mb + w * (a1 - b1)),
            (p * pc + q * mc, p * pd + q * md + w * (a2 - b2)),
        )

    def d_alpha(x, y, alpha):
        p, _ = fast(y * inv, eps)
        a1, a2 = zp.d_alpha(x, y, alpha)
        b1, b2 = zm.d_alpha(x, y, alpha)
        return p * a1 + (1.0 - p) * b1, p * a2 + (1.0 - p) * b2

    return SmoothField2D(f, jac, d_alpha, eps=eps, name=f"{model.kind}[{fn.id}, eps={eps:g}]")


def cycle_field(model: PwsModel, fn: Optional[RegFn], eps: float) -> SmoothField2D:
    """Regularized field for eps > 0, the smooth ``Z_+`` for eps == 0."""
    if eps == 0.0:
        return model.z_plus
    return assemble_regularized(model, fn, eps)


def lie_derivatives(model: PwsModel, x: float, alpha: float) -> tuple[float, float, float]:
    """(Z_+ h, Z_- h, Z_+(Z_+ h)) at the point (x, 0)."""
    a1, a2 = model.z_plus.f(x, 0.0, alpha)
    _, b2 = model.z_minus.f(x, 0.0, alpha)
    (_, _), (pc, pd) = model.z_plus.jac(x, 0.0, alpha)
    return a2, b2, pc * a1 + pd * a2


def classify_sigma_point(model: PwsModel, x: float, alpha: float = 0.0, tol: float = TOL_SIGN) -> SigmaClass:
    zph, zmh, zpzph = lie_derivatives(model, x, alpha)
    if abs(zph) <= tol or abs(zmh) <= tol:
        if abs(zph) <= tol and zpzph > tol and zmh > tol:
            return SigmaClass(SigmaTag.TANGENCY, TangencyKind.VISIBLE_FOLD)
        return SigmaClass(SigmaTag.TANGENCY, TangencyKind.OTHER)
    if zph * zmh > 0.0:
        return SigmaClass(SigmaTag.CROSSING)
    return SigmaClass(SigmaTag.SLIDING)


def filippov_weight(model: PwsModel, x: float, alpha: float = 0.0) -> float:
    """Convex weight lambda with lambda Z_+ h + (1 - lambda) Z_- h = 0."""
    cls = classify_sigma_point(model, x, alpha)
    if cls.tag is not SigmaTag.SLIDING:
        raise DomainError(f"point ({x}, 0) is not in the sliding region ({cls.tag.value})")
    zph, zmh, _ = lie_derivatives(model, x, alpha)
    return zmh / (zmh - zph)


def filippov_drift(model: PwsModel, x: float, alpha: float = 0.0) -> float:
    lam = filippov_weight(model, x, alpha)
    a1, _ = model.z_plus.f(x, 0.0, alpha)
    b1, _ = model.z_minus.f(x, 0.0, alpha)
    return lam * a1 + (1.0 - lam) * b1


def _grad_fd(fun: Callable[[float, float], float], h: float = 1e-6) -> Callable[[float, float], Pair]:
    def grad(x, y):
        return (
            (fun(x + h, y) - fun(x - h, y)) / (2 * h),
            (fun(x, y + h) - fun(x, y - h)) / (2 * h),
        )

    return grad


def _zero(x, y):
    return 0.0


def _zero_grad(x, y):
    return 0.0, 0.0


def make_normal_form(
    f: Optional[Callable[[float, float], float]] = None,
    g: Optional[Callable[[float, float], float]] = None,
    f_grad: Optional[Callable[[float, float], Pair]] = None,
    g_grad: Optional[Callable[[float, float], Pair]] = None,
) -> PwsModel:
    """Visible-fold normal form Z_+ = (1 + f, 2x + y g), Z_- = (0, 1).

    ``f`` and ``g`` default to zero.  Gradients are used for the Jacobian;
    when omitted for a supplied function they are approximated by central
    differences.
    """
    if f is None:
        f, f_grad = _zero, _zero_grad
    if g is None:
        g, g_grad = _zero, _zero_grad
    f0 = f(0.0, 0.0)
    if abs(f0) > 1e-14:
        raise ModelError(f"normal form requires f(0, 0) = 0, got {f0!r}")
    fg = f_grad or _grad_fd(f)
    gg = g_grad or _grad_fd(g)

    def zp(x, y, alpha):
        return 1.0 + f(x, y), 2.0 * x + y * g(x, y)

    def zp_jac(x, y, alpha):
        fx, fy = fg(x, y)
        gx, gy = gg(x, y)
        return (fx, fy), (2.0 + y * gx, g(x, y) + y * gy)

    def zm(x, y, alpha):
        return 0.0, 1.0

    def zm_jac(x, y, alpha):
        return (0.0, 0.0), (0.0, 0.0)

    def no_alpha(x, y, alpha):
        return 0.0, 0.0

    return PwsModel(
        SmoothField2D(zp, zp_jac, no_alpha, name="Z+ normal form"),
        SmoothField2D(zm, zm_jac, no_alpha, name="Z- normal form"),
        kind="normal_form",
        params={},
        fold_x=0.0,
    )


def make_friction(params: FrictionParams = FrictionParams()) -> PwsModel:
    """Spring-mass on a moving belt: x' = y - alpha, y' = -x - mu(y, p).

    Both fields derive from the single friction branch mu_+, so the law is
    odd under (y, p) -> (-y, 1 - p) by construction.
    """
    mu, dmu = params.mu, params.dmu

    def zp(x, y, alpha):
        return y - alpha, -x - mu(y)

    def zp_jac(x, y, alpha):
        return (0.0, 1.0), (-1.0, -dmu(y))

    def zm(x, y, alpha):
        return y - alpha, -x + mu(-y)

    def zm_jac(x, y, alpha):
        return (0.0, 1.0), (-1.0, -dmu(-y))

    def d_alpha(x, y, alpha):
        return -1.0, 0.0

    return PwsModel(
        SmoothField2D(zp, zp_jac, d_alpha, name="Z+ friction"),
        SmoothField2D(zm, zm_jac, d_alpha, name="Z- friction"),
        kind="friction",
        params={"mu_s": params.mu_s, "mu_m": params.mu_m, "rho": params.rho, "c_fric": params.c_fric},
        fold_x=-params.mu_s,
    )


def friction_params_of(model: PwsModel) -> FrictionParams:
    if model.kind != "friction":
        raise ModelError(f"not a friction model: {model.kind}")
    return FrictionParams(**model.params)


@dataclass(frozen=True)
class FrictionProps:
    y0: float
    mu_pp: float
    mu_ppp: float
    alpha_hopf: float
    y0_numeric: float

    @property
    def subcritical(self) -> bool:
        return self.mu_ppp < 0.0


def friction_props(params: FrictionParams) -> FrictionProps:
    """Minimum y0 of mu_+, curvature data at y0 and the eps = 0 Hopf value.

    y0 comes from the closed form and is cross-checked against a bounded
    golden-section minimization of mu_+ on [0, 2].
    """
    p = params
    y0 = -math.log(p.c_fric / (p.rho * (p.mu_s - p.mu_m))) / p.rho
    res = minimize_scalar(p.mu, bounds=(0.0, 2.0), method="bounded", options={"xatol": 1e-10})
    if abs(res.x - y0) > 1e-6:
        raise ModelError(f"closed-form minimum {y0} disagrees with numerical minimum {res.x}")
    return FrictionProps(
        y0=y0,
        mu_pp=p.rho * p.c_fric,
        mu_ppp=-p.rho**2 * p.c_fric,
        alpha_hopf=y0,
        y0_numeric=float(res.x),
    )
