"""Blowup charts as coordinate lenses, and the region report for the fold map Q.

Cylinder over Sigma = {y = 0, eps = 0}, directional charts:

    cyl_y1:   y = r1,          eps = r1 * e1      (r1 >= 0, e1 >= 0)
    cyl_eps2: y = r2 * y2,     eps = r2           (r2 >= 0)
    cyl_ym3:  y = -r3,         eps = r3 * e3      (r3 >= 0)

Sphere over the fold point, built on cyl_y1 with (r, x, e) = (r1, x, e1) and
weights (2k, k, 1):

    sph_r1:   r = rho1^(2k),          x = rho1^k x1,  e = rho1 * e1
    sph_eps2: r = rho2^(2k) * r2,     x = rho2^k x2,  e = rho2

Composing with cyl_y1 gives eps = rho1^(2k+1) e1 = rho2^(2k+1) r2.
No flow is integrated in chart variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from foldlab.errors import DomainError, ModelError
from foldlab.maps import SectionPair, d2_step, q_map, richardson_d2, tangent_orbit_points
from foldlab.models import PwsModel
from foldlab.regfn import RegFn

CYL_CHARTS = ("cyl_y1", "cyl_eps2", "cyl_ym3")
SPH_CHARTS = ("sph_r1", "sph_eps2")
CHART_IDS = CYL_CHARTS + SPH_CHARTS

# slope at which the center window is probed for a unique crossing
UPSILON = -0.5


@dataclass(frozen=True)
class ChartPoint:
    chart_id: str
    coords: tuple[float, ...]
    k: Optional[int] = None

    def __post_init__(self):
        if self.chart_id not in CHART_IDS:
            raise DomainError(f"unknown chart {self.chart_id!r}")
        c = tuple(float(v) for v in self.coords)
        object.__setattr__(self, "coords", c)
        want = 2 if self.chart_id in CYL_CHARTS else 3
        if len(c) != want:
            raise DomainError(f"{self.chart_id} takes {want} coordinates, got {len(c)}")
        if not all(math.isfinite(v) for v in c):
            raise DomainError(f"non-finite chart coordinates {c}")
        if self.chart_id in SPH_CHARTS:
            if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
                raise DomainError(f"sphere charts need a positive integer k, got {self.k!r}")
        elif self.k is not None:
            raise DomainError("cylinder charts take no k")
        a, b = c[0], c[1]
        cid = self.chart_id
        if a < 0:
            raise DomainError(f"radial coordinate of {cid} must be >= 0, got {a}")
        if cid == "cyl_y1" and b < 0:
            raise DomainError(f"e1 must be >= 0, got {b}")
        if cid == "sph_r1" and c[2] < 0:
            raise DomainError(f"e1 must be >= 0, got {c[2]}")
        if cid == "sph_eps2" and b < 0:
            raise DomainError(f"r2 must be >= 0, got {b}")


def _need(p: ChartPoint, family: Sequence[str]) -> None:
    if p.chart_id not in family:
        raise DomainError(f"chart {p.chart_id} is not in {family}")


# --- cylinder ---------------------------------------------------------------

def cyl_to_cartesian(p: ChartPoint) -> tuple[float, float]:
    """(y, eps) of a cylinder chart point."""
    _need(p, CYL_CHARTS)
    a, b = p.coords
    if p.chart_id == "cyl_y1":
        return a, a * b
    if p.chart_id == "cyl_eps2":
        return a * b, a
    return -a, a * b


def cartesian_to_cyl(y: float, eps: float, chart_id: str) -> ChartPoint:
    if eps < 0:
        raise DomainError("eps must be non-negative")
    if chart_id == "cyl_y1":
        if y <= 0:
            raise DomainError("cyl_y1 covers y > 0 only")
        return ChartPoint(chart_id, (y, eps / y))
    if chart_id == "cyl_eps2":
        if eps <= 0:
            raise DomainError("cyl_eps2 covers eps > 0 only")
        return ChartPoint(chart_id, (eps, y / eps))
    if chart_id == "cyl_ym3":
        if y >= 0:
            raise DomainError("cyl_ym3 covers y < 0 only")
        return ChartPoint(chart_id, (-y, -eps / y))
    raise DomainError(f"not a cylinder chart: {chart_id!r}")


def cyl_chart_change(p: ChartPoint, target: str) -> ChartPoint:
    """Change between overlapping cylinder charts (y1 <-> eps2 <-> ym3)."""
    _need(p, CYL_CHARTS)
    if target not in CYL_CHARTS:
        raise DomainError(f"not a cylinder chart: {target!r}")
    src = p.chart_id
    a, b = p.coords
    if src == target:
        return p
    if src == "cyl_y1" and target == "cyl_eps2":
        if not b > 0:
            raise DomainError("cyl_y1 -> cyl_eps2 needs e1 > 0")
        return ChartPoint(target, (a * b, 1.0 / b))
    if src == "cyl_ym3" and target == "cyl_eps2":
        if not b > 0:
            raise DomainError("cyl_ym3 -> cyl_eps2 needs e3 > 0")
        return ChartPoint(target, (a * b, -1.0 / b))
    if src == "cyl_eps2" and target == "cyl_y1":
        if not b > 0:
            raise DomainError("cyl_eps2 -> cyl_y1 needs y2 > 0")
        return ChartPoint(target, (a * b, 1.0 / b))
    if src == "cyl_eps2" and target == "cyl_ym3":
        if not b < 0:
            raise DomainError("cyl_eps2 -> cyl_ym3 needs y2 < 0")
        return ChartPoint(target, (-a * b, -1.0 / b))
    raise DomainError(f"charts {src} and {target} do not overlap")


# --- sphere -----------------------------------------------------------------

def sphere_to_chart1(x: float, y: float, eps: float, k: int) -> ChartPoint:
    """(x, y, eps) with y >= 0 to sph_r1: rho1 = y^(1/2k), x1 = x y^(-1/2), e1 = eps y^(-(2k+1)/2k).

    On y = 0 only the origin (x = eps = 0) has a limit, returned as rho1 = 0.
    """
    if y < 0 or eps < 0:
        raise DomainError("sph_r1 covers y >= 0, eps >= 0")
    if y == 0:
        if x == 0 and eps == 0:
            return ChartPoint("sph_r1", (0.0, 0.0, 0.0), k)
        raise DomainError("point on y = 0 away from the fold is outside sph_r1")
    rho = y ** (1.0 / (2 * k))
    return ChartPoint("sph_r1", (rho, x / rho**k, eps / (y * rho)), k)


def sphere_to_chart2(x: float, y: float, eps: float, k: int) -> ChartPoint:
    """(x, y, eps) with eps > 0 to sph_eps2 (through cyl_y1, so y >= 0)."""
    if y < 0:
        raise DomainError("sph_eps2 is built on cyl_y1 and covers y >= 0")
    if not eps > 0:
        raise DomainError("sph_eps2 covers eps > 0 only")
    if y == 0:
        raise DomainError("sph_eps2 needs y > 0 (e1 = eps / y)")
    e1 = eps / y
    return ChartPoint("sph_eps2", (e1, y / e1 ** (2 * k), x / e1**k), k)


def sphere_to_cartesian(p: ChartPoint) -> tuple[float, float, float]:
    """(x, y, eps) of a sphere chart point."""
    _need(p, SPH_CHARTS)
    k = p.k
    if p.chart_id == "sph_r1":
        rho, x1, e1 = p.coords
        r, x, e = rho ** (2 * k), rho**k * x1, rho * e1
    else:
        rho, r2, x2 = p.coords
        r, x, e = rho ** (2 * k) * r2, rho**k * x2, rho
    return x, r, r * e


def sphere_chart_change(p: ChartPoint, target: str) -> ChartPoint:
    """sph_r1 <-> sph_eps2: rho2 = rho1 e1, r2 = e1^(-2k), x2 = e1^(-k) x1."""
    _need(p, SPH_CHARTS)
    if target not in SPH_CHARTS:
        raise DomainError(f"not a sphere chart: {target!r}")
    if target == p.chart_id:
        return p
    k = p.k
    if p.chart_id == "sph_r1":
        rho, x1, e1 = p.coords
        if not e1 > 0:
            raise DomainError("sph_r1 -> sph_eps2 needs e1 > 0")
        return ChartPoint(target, (rho * e1, e1 ** (-2 * k), x1 * e1 ** (-k)), k)
    rho, r2, x2 = p.coords
    if not r2 > 0:
        raise DomainError("sph_eps2 -> sph_r1 needs r2 > 0")
    e1 = r2 ** (-1.0 / (2 * k))
    return ChartPoint(target, (rho / e1, x2 * e1**k, e1), k)


def conserved_eps(p: ChartPoint) -> float:
    """The original eps as a chart invariant: rho1^(2k+1) e1, or rho2^(2k+1) r2."""
    _need(p, SPH_CHARTS)
    rho, a, b = p.coords
    if p.chart_id == "sph_r1":
        return rho ** (2 * p.k + 1) * b
    return rho ** (2 * p.k + 1) * a


# --- region report for Q ----------------------------------------------------

@dataclass
class RegionStats:
    eps: float
    window: float
    x: dict[str, np.ndarray]
    d1: dict[str, np.ndarray]
    d2: np.ndarray
    log_abs_d1_K: np.ndarray
    failures: list[tuple[float, str]] = field(default_factory=list)

    @property
    def max_abs_d1_i(self) -> float:
        return float(np.max(np.abs(self.d1["i"])))

    @property
    def max_log_abs_d1_K(self) -> float:
        return float(np.max(self.log_abs_d1_K))

    @property
    def center_signs_ok(self) -> bool:
        return bool(np.all(self.d1["ii"] < 0) and np.all(self.d2 < 0))

    @property
    def upsilon_crossings(self) -> int:
        s = np.sign(self.d1["ii"] - UPSILON)
        return int(np.count_nonzero(s[1:] != s[:-1]))

    @property
    def max_dev_iii(self) -> float:
        return float(np.max(np.abs(np.abs(self.d1["iii"]) - 1.0)))

    def row(self) -> dict[str, float]:
        return {
            "eps": self.eps,
            "window": self.window,
            "max_abs_d1_i": self.max_abs_d1_i,
            "max_log_abs_d1_K": self.max_log_abs_d1_K,
            "center_signs_ok": float(self.center_signs_ok),
            "upsilon_crossings": float(self.upsilon_crossings),
            "max_dev_iii": self.max_dev_iii,
        }


@dataclass
class RegionReport:
    stats: list[RegionStats]
    chi: float
    theta: float

    @property
    def log_slope_i(self) -> float:
        """Least-squares slope of max log|Q'| on K against 1/eps."""
        inv = np.array([1.0 / s.eps for s in self.stats])
        lg = np.array([s.max_log_abs_d1_K for s in self.stats])
        if len(inv) < 2:
            return math.nan
        return float(np.polyfit(inv, lg, 1)[0])


def _signed_d1(r) -> float:
    return r.sign_d1 * math.exp(r.log_abs_d1)


def q_region_stats(
    model: PwsModel,
    fn: RegFn,
    eps: float,
    sections: SectionPair,
    chi: float = 8.0,
    theta: float = 0.05,
    *,
    n: int = 30,
    alpha: float = 0.0,
    tol: float = 1e-10,
) -> RegionStats:
    """Sample Q' (and Q'' in the center window) on the three regions around gamma_L.

    The window half-width is chi * eps^(2k/(2k+1)).  Region (i) runs from
    gamma_L - theta to the window, the set K = [gamma_L - 2 theta, gamma_L - theta]
    carries the exponential contraction (reported as log|Q'|), region (iii)
    runs from the window towards the right end of I_L.  Derivatives use the
    Liouville form so exponentially small values keep their sign and size;
    Q'' = Q' * d(log|Q'|)/dx with the log-derivative by Richardson differences.
    """
    if not eps > 0:
        raise DomainError("region report needs eps > 0")
    if model.fold_x is None:
        raise ModelError("model has no fold location")
    gl, _ = tangent_orbit_points(model, sections.delta, alpha)
    w = chi * eps**fn.exponent
    lo, hi = sections.I_L
    if not (lo < gl - 2 * theta and gl + w < hi and theta > w):
        raise DomainError(f"windows do not fit in I_L: gamma_L={gl}, window={w}, theta={theta}")

    def Q(x):
        return q_map(model, fn, eps, sections, float(x), alpha, tol=tol, want_log=True)

    xs = {
        "i": gl - np.geomspace(theta, w, n),
        "ii": np.linspace(gl - w, gl + w, n),
        # stop short of the right end, whose image sits on the edge of I_R
        "iii": gl + w + 0.9 * (hi - gl - w) * (np.linspace(0.0, 1.0, n) ** 2),
    }
    d1 = {key: np.array([_signed_d1(Q(x)) for x in v]) for key, v in xs.items()}
    h = d2_step(fn, eps)
    d2 = np.array(
        [d * richardson_d2(lambda u: Q(u).log_abs_d1, x, h) for x, d in zip(xs["ii"], d1["ii"])]
    )
    K = np.linspace(gl - 2 * theta, gl - theta, n)
    logK = np.array([Q(x).log_abs_d1 for x in K])
    xs["K"] = K
    return RegionStats(eps, w, xs, d1, d2, logK)


def q_region_report(
    model: PwsModel,
    fn: RegFn,
    eps_list: Sequence[float],
    sections: SectionPair,
    chi: float = 8.0,
    theta: float = 0.05,
    **kw,
) -> RegionReport:
    return RegionReport([q_region_stats(model, fn, e, sections, chi, theta, **kw) for e in eps_list], chi, theta)
