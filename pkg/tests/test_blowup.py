from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foldlab.blowup import (
    ChartPoint,
    cartesian_to_cyl,
    conserved_eps,
    cyl_chart_change,
    cyl_to_cartesian,
    q_region_stats,
    sphere_chart_change,
    sphere_to_cartesian,
    sphere_to_chart1,
    sphere_to_chart2,
)
from foldlab.errors import DomainError
from foldlab.maps import normal_form_sections
from foldlab.regfn import get_regfn

pos = st.floats(1e-4, 1.0)
small = st.floats(1e-7, 1e-2)
ks = st.integers(1, 3)


def test_cylinder_chart_examples():
    assert cyl_to_cartesian(ChartPoint("cyl_y1", (0.3, 0.2))) == pytest.approx((0.3, 0.06), rel=1e-15)
    assert cyl_to_cartesian(ChartPoint("cyl_eps2", (0.06, 5.0))) == pytest.approx((0.3, 0.06), rel=1e-15)
    assert cyl_to_cartesian(ChartPoint("cyl_y1", (0.3, 0.0))) == (0.3, 0.0)
    assert cyl_to_cartesian(ChartPoint("cyl_ym3", (0.3, 0.2))) == pytest.approx((-0.3, 0.06), rel=1e-15)


def test_cylinder_chart_change_example():
    q = cyl_chart_change(ChartPoint("cyl_y1", (0.3, 0.2)), "cyl_eps2")
    assert q.coords == pytest.approx((0.06, 5.0), rel=1e-15)
    back = cyl_chart_change(q, "cyl_y1")
    assert back.coords == pytest.approx((0.3, 0.2), rel=1e-15)


def test_cylinder_overlap_errors():
    with pytest.raises(DomainError):
        cyl_chart_change(ChartPoint("cyl_y1", (0.3, 0.0)), "cyl_eps2")
    with pytest.raises(DomainError):
        cyl_chart_change(ChartPoint("cyl_ym3", (0.3, 0.0)), "cyl_eps2")
    with pytest.raises(DomainError):
        cyl_chart_change(ChartPoint("cyl_y1", (0.3, 0.2)), "cyl_ym3")
    with pytest.raises(DomainError):
        cyl_chart_change(ChartPoint("cyl_eps2", (0.06, 5.0)), "cyl_ym3")


def test_chart_point_validation():
    with pytest.raises(DomainError):
        ChartPoint("cyl_y1", (-0.1, 0.2))
    with pytest.raises(DomainError):
        ChartPoint("sph_r1", (0.1, 0.2, 0.3))  # k missing
    with pytest.raises(DomainError):
        ChartPoint("cyl_y1", (0.1, 0.2), k=2)
    with pytest.raises(DomainError):
        ChartPoint("polar", (0.1, 0.2))


def test_sphere_chart_example():
    p = sphere_to_chart1(0.02, 0.0016, 1e-5, 2)
    rho, x1, e1 = p.coords
    assert rho == pytest.approx(0.2, rel=1e-15)
    assert x1 == pytest.approx(0.5, rel=1e-14)
    assert e1 == pytest.approx(1e-5 / 0.2**5, rel=1e-14)


def test_sphere_y_zero():
    assert sphere_to_chart1(0.0, 0.0, 0.0, 2).coords == (0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        sphere_to_chart1(0.1, 0.0, 0.0, 2)
    with pytest.raises(DomainError):
        sphere_to_chart1(0.0, -0.1, 1e-3, 2)
    with pytest.raises(DomainError):
        sphere_to_chart2(0.0, 0.1, 0.0, 2)


@given(pos, small, st.sampled_from([1.0, -1.0]))
@settings(max_examples=200, deadline=None)
def test_cylinder_round_trips(y, eps, sign):
    for cid, yy in (("cyl_y1", y), ("cyl_eps2", sign * y), ("cyl_ym3", -y)):
        p = cartesian_to_cyl(yy, eps, cid)
        assert cyl_to_cartesian(p) == pytest.approx((yy, eps), rel=1e-13)
    p1 = cartesian_to_cyl(y, eps, "cyl_y1")
    assert cyl_chart_change(cyl_chart_change(p1, "cyl_eps2"), "cyl_y1").coords == pytest.approx(p1.coords, rel=1e-13)
    p3 = cartesian_to_cyl(-y, eps, "cyl_ym3")
    assert cyl_chart_change(cyl_chart_change(p3, "cyl_eps2"), "cyl_ym3").coords == pytest.approx(p3.coords, rel=1e-13)


@given(st.floats(-1, 1), pos, small, ks)
@settings(max_examples=200, deadline=None)
def test_sphere_round_trips_and_conservation(x, y, eps, k):
    q1 = sphere_to_chart1(x, y, eps, k)
    q2 = sphere_chart_change(q1, "sph_eps2")
    assert sphere_to_cartesian(q1) == pytest.approx((x, y, eps), rel=1e-13, abs=1e-300)
    assert sphere_to_cartesian(q2) == pytest.approx((x, y, eps), rel=1e-13, abs=1e-300)
    assert sphere_chart_change(q2, "sph_r1").coords == pytest.approx(q1.coords, rel=1e-13, abs=1e-300)
    assert sphere_to_chart2(x, y, eps, k).coords == pytest.approx(q2.coords, rel=1e-13, abs=1e-300)
    rho2, r2, _ = q2.coords
    assert rho2 ** (2 * k + 1) * r2 == pytest.approx(eps, rel=1e-13)
    assert conserved_eps(q1) == pytest.approx(eps, rel=1e-13)
    assert conserved_eps(q2) == pytest.approx(eps, rel=1e-13)


def test_sphere_chart1_weights():
    # scaling (x, y, eps) -> (s^k x, s^2k y, s^(2k+1) eps) scales rho1 by s only
    k, s = 2, 0.3
    a = sphere_to_chart1(0.01, 0.002, 1e-6, k)
    b = sphere_to_chart1(s**k * 0.01, s ** (2 * k) * 0.002, s ** (2 * k + 1) * 1e-6, k)
    assert b.coords[0] == pytest.approx(s * a.coords[0], rel=1e-14)
    assert b.coords[1:] == pytest.approx(a.coords[1:], rel=1e-12)


def test_region_stats_single_eps(normal_form):
    st_ = q_region_stats(normal_form, get_regfn("smooth_sqrt"), 2e-4, normal_form_sections(0.04), n=12)
    assert not st_.failures
    assert st_.max_abs_d1_i <= 0.05
    assert st_.center_signs_ok
    assert st_.upsilon_crossings == 1
    assert np.all(st_.log_abs_d1_K < 0)


def test_region_report_approaches_pws_limit(normal_form):
    from foldlab.blowup import q_region_report

    rep = q_region_report(normal_form, get_regfn("smooth_sqrt"), [4e-4, 1e-5], normal_form_sections(0.04), n=10)
    coarse, fine = rep.stats
    # left of gamma_L the limit derivative is 0, right of it the reflection gives -1
    assert fine.max_abs_d1_i <= coarse.max_abs_d1_i
    assert fine.max_dev_iii <= coarse.max_dev_iii
    assert np.all(np.asarray(fine.d1["iii"]) < 0)
