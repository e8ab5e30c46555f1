"""Regularization functions phi(s, eps).

Four families are supported.  All of them are smooth, strictly increasing in
``s`` and tend to 0 / 1 as ``s -> -inf / +inf``.  Three of them have
algebraic decay towards the limits,

    1 - phi(1/e1, r1*e1) = e1**k_plus  * (phi_plus(0, 0)  + o(1)),
        phi(-1/e3, r3*e3) = e3**k_minus * (phi_minus(0, 0) + o(1)),

and the decay data (k_plus, k_minus, phi_plus(0,0), phi_minus(0,0)) is stored
on the descriptor.  The logistic function decays exponentially and is kept for
numerical comparison only (``a2_excluded``).

Every function is evaluated in a cancellation-free form, see the comments on
the individual implementations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from foldlab.errors import DomainError

__all__ = [
    "RegFn",
    "DecayData",
    "SMOOTH_SQRT",
    "GOLDBETER_KOSHLAND",
    "ARCTAN",
    "LOGISTIC",
    "get_regfn",
    "REGFN_IDS",
    "fit_decay_rate",
]


class DecayData(NamedTuple):
    k_plus: float
    k_minus: float
    phi_plus_00: float
    phi_minus_00: float
    a2_excluded: bool


def _check(s: float, eps: float) -> None:
    if not (math.isfinite(s) and math.isfinite(eps)):
        raise DomainError(f"non-finite argument s={s!r}, eps={eps!r}")
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps!r}")


# -- smooth_sqrt: phi(s) = (1 + s / sqrt(s^2 + 1)) / 2 ----------------------
#
# For s < 0 the bracket cancels; multiplying by (sqrt(s^2+1) - s) gives
#     phi(s) = 1 / (2 (sqrt(s^2+1) - s) sqrt(s^2+1)),
# and symmetrically 1 - phi(s) = phi(-s).


def _sqrt_phi(s: float, eps: float) -> float:
    q = math.sqrt(s * s + 1.0)
    if s >= 0.0:
        return 1.0 - 0.5 / ((q + s) * q)
    return 0.5 / ((q - s) * q)


def _sqrt_comp(s: float, eps: float) -> float:
    return _sqrt_phi(-s, eps)


def _sqrt_dphi(s: float, eps: float) -> float:
    q2 = s * s + 1.0
    return 0.5 / (q2 * math.sqrt(q2))


# -- arctan: phi(s) = 1/2 + arctan(s)/pi -------------------------------------
#
# 1 - phi(s) = arctan(1/s)/pi for s > 0 avoids the subtraction at large s.


def _atan_phi(s: float, eps: float) -> float:
    if s > 1.0:
        return 1.0 - math.atan(1.0 / s) / math.pi
    if s < -1.0:
        return math.atan(-1.0 / s) / math.pi
    return 0.5 + math.atan(s) / math.pi


def _atan_comp(s: float, eps: float) -> float:
    return _atan_phi(-s, eps)


def _atan_dphi(s: float, eps: float) -> float:
    return 1.0 / (math.pi * (1.0 + s * s))


# -- logistic: phi(s) = e^s / (1 + e^s) ---------------------------------------


def _logistic_phi(s: float, eps: float) -> float:
    if s >= 0.0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


def _logistic_comp(s: float, eps: float) -> float:
    return _logistic_phi(-s, eps)


def _logistic_dphi(s: float, eps: float) -> float:
    p = _logistic_phi(s, eps)
    return p * _logistic_phi(-s, eps)


# -- Goldbeter-Koshland -------------------------------------------------------
#
# With a = 1 + eps and D = 4 + 4 eps s + a^2 s^2 (> 0 for all s),
#
#     phi = N / (a M),   N = 2 + 2 eps + eps (a s + sqrt(D)),
#                        M = 2 - (1 - eps) s + sqrt(D).
#
# Cancellations and their rearrangements:
#   * N for s < 0:   a s + sqrt(D) = 4 (1 + eps s) / (sqrt(D) - a s)
#   * M for s > 0:   sqrt(D) - (1 - eps) s
#                      = 4 (1 + eps s + eps s^2) / (sqrt(D) + (1 - eps) s)
# At eps = 0 this reduces to phi(s, 0) = 2 / (2 - s + sqrt(s^2 + 4)), which is
# evaluated directly through the same rearranged M (N = 2).


def _gk_parts(s: float, eps: float):
    a = 1.0 + eps
    b = 1.0 - eps
    D = 4.0 + 4.0 * eps * s + a * a * s * s
    r = math.sqrt(D)
    if eps == 0.0:
        N = 2.0
    elif s >= 0.0:
        N = 2.0 + 2.0 * eps + eps * (a * s + r)
    else:
        N = 2.0 + 2.0 * eps + eps * 4.0 * (1.0 + eps * s) / (r - a * s)
    if s > 0.0:
        M = 2.0 + 4.0 * (1.0 + eps * s + eps * s * s) / (r + b * s)
    else:
        M = 2.0 - b * s + r
    return a, b, D, r, N, M


def _gk_phi(s: float, eps: float) -> float:
    a, _, _, _, N, M = _gk_parts(s, eps)
    return N / (a * M)


def _gk_comp(s: float, eps: float) -> float:
    # a M - N = sqrt(D) - a s, which for s > 0 is 4 (1 + eps s) / (sqrt(D) + a s)
    a, _, _, r, _, M = _gk_parts(s, eps)
    if s > 0.0:
        num = 4.0 * (1.0 + eps * s) / (r + a * s)
    else:
        num = r - a * s
    return num / (a * M)


def _gk_dphi(s: float, eps: float) -> float:
    a, b, D, r, N, M = _gk_parts(s, eps)
    # dD/ds / (2 r) = (2 eps + a^2 s) / r =: q
    p = 2.0 * eps + a * a * s
    q = p / r
    # N' = eps (a + q); a + q cancels when p < 0:
    #   a r + p = (a^2 D - p^2) / (a r - p) = 4 (a^2 - eps^2) / (a r - p)
    if p >= 0.0:
        dN = eps * (a + q)
    else:
        dN = eps * 4.0 * (a * a - eps * eps) / ((a * r - p) * r)
    # M' = -b + q; cancels when p > 0:
    #   p - b r = (p^2 - b^2 D) / (p + b r),
    #   p^2 - b^2 D = 4 eps a^2 s^2 + 16 eps^2 s + 4 eps^2 - 4 b^2
    if p > 0.0:
        dM = (4.0 * eps * a * a * s * s + 16.0 * eps * eps * s + 4.0 * eps * eps - 4.0 * b * b) / (
            (p + b * r) * r
        )
    else:
        dM = -b + q
    if s > 0.0:
        # differentiate 1 - phi = C / (a M) with C = 4 (1 + eps s) / (r + a s);
        # the quotient N / (a M) loses relative accuracy in phi' for large s.
        w = r + a * s
        C = 4.0 * (1.0 + eps * s) / w
        dC = 4.0 * (2.0 * eps + 2.0 * eps * eps * s - a * a * s - a * r) / (r * w * w)
        return -(dC * M - C * dM) / (a * M * M)
    return (dN * M - N * dM) / (a * M * M)


@dataclass(frozen=True)
class RegFn:
    """Descriptor of a regularization function and its decay data.

    ``phi_plus_00`` for ``smooth_sqrt`` is 1/4: the expansion
    1 - phi(1/e1) = (sqrt(1+e1^2) - 1) / (2 sqrt(1+e1^2)) = e1^2/4 + O(e1^4)
    is read as e1^k * phi_plus with k = 2, so phi_plus(0, 0) = 1/4.  Taken
    literally as "phi_plus(e1, r1 e1) = e1^2/4 + ..." the coefficient function
    would vanish at the origin, which the decay assumption does not allow;
    the stored value follows the first reading.
    """

    id: str
    k_plus: float
    k_minus: float
    phi_plus_00: float
    phi_minus_00: float
    _phi: Callable[[float, float], float]
    _comp: Callable[[float, float], float]
    _dphi: Callable[[float, float], float]
    eps_dependent: bool = False

    def __call__(self, s: float, eps: float = 0.0) -> float:
        return self.eval(s, eps)

    def eval(self, s: float, eps: float = 0.0) -> float:
        _check(s, eps)
        return self._phi(s, eps)

    def complement(self, s: float, eps: float = 0.0) -> float:
        """``1 - phi(s, eps)`` without cancellation for large positive ``s``."""
        _check(s, eps)
        return self._comp(s, eps)

    def deriv_s(self, s: float, eps: float = 0.0) -> float:
        _check(s, eps)
        return self._dphi(s, eps)

    def decay_data(self) -> DecayData:
        return DecayData(
            self.k_plus,
            self.k_minus,
            self.phi_plus_00,
            self.phi_minus_00,
            a2_excluded=math.isinf(self.k_plus) or math.isinf(self.k_minus),
        )

    @property
    def k(self) -> float:
        return self.k_plus

    @property
    def exponent(self) -> float:
        """Scaling exponent 2k/(2k+1); 1.0 in the exponential-decay limit."""
        if math.isinf(self.k_plus):
            return 1.0
        return 2.0 * self.k_plus / (2.0 * self.k_plus + 1.0)

    # unchecked fast paths used inside vector fields
    def fast(self, s: float, eps: float) -> tuple[float, float]:
        return self._phi(s, eps), self._dphi(s, eps)

    def grid(self, s, eps: float = 0.0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.vectorize(lambda v: self.eval(float(v), eps), otypes=[float])(s)

    def grid_deriv(self, s, eps: float = 0.0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.vectorize(lambda v: self.deriv_s(float(v), eps), otypes=[float])(s)


SMOOTH_SQRT = RegFn("smooth_sqrt", 2, 2, 0.25, 0.25, _sqrt_phi, _sqrt_comp, _sqrt_dphi)
GOLDBETER_KOSHLAND = RegFn(
    "goldbeter_koshland", 1, 1, 1.0, 1.0, _gk_phi, _gk_comp, _gk_dphi, eps_dependent=True
)
ARCTAN = RegFn("arctan", 1, 1, 1.0 / math.pi, 1.0 / math.pi, _atan_phi, _atan_comp, _atan_dphi)
LOGISTIC = RegFn(
    "logistic", math.inf, math.inf, math.nan, math.nan, _logistic_phi, _logistic_comp, _logistic_dphi
)

_REGISTRY = {fn.id: fn for fn in (SMOOTH_SQRT, GOLDBETER_KOSHLAND, ARCTAN, LOGISTIC)}
REGFN_IDS = tuple(_REGISTRY)


def get_regfn(name: str) -> RegFn:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown regularization function {name!r}; choose from {REGFN_IDS}") from None


def fit_decay_rate(fn: RegFn, e1_lo: float = 1e-4, e1_hi: float = 1e-2, n: int = 25) -> float:
    """Least-squares slope of log(1 - phi(1/e1, 0)) against log(e1)."""
    e1 = np.geomspace(e1_lo, e1_hi, n)
    tail = np.array([fn.complement(1.0 / v, 0.0) for v in e1])
    slope, _ = np.polyfit(np.log(e1), np.log(tail), 1)
    return float(slope)
