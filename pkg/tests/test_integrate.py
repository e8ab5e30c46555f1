from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from foldlab.errors import DomainError
from foldlab.integrate import (
    EventSpec,
    integrate,
    integrate_implicit,
    integrate_variational,
    linear_field,
)
from foldlab.models import SmoothField2D, assemble_regularized
from foldlab.regfn import get_regfn

SQRT = get_regfn("smooth_sqrt")
ROT = linear_field(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _stiff_field(lam=1e6):
    # x plays the role of time: x' = 1, y' = -lam (y - cos x)
    return SmoothField2D(
        f=lambda x, y, a: (1.0, -lam * (y - math.cos(x))),
        jac=lambda x, y, a: ((0.0, 0.0), (lam * math.sin(x), -lam)),
        d_alpha=lambda x, y, a: (0.0, 0.0),
        name="stiff",
    )


def test_harmonic_oscillator_period():
    orb = integrate(ROT, (1.0, 0.0), t_max=2 * math.pi, tol=1e-10)
    assert np.linalg.norm(orb.states[-1] - [1.0, 0.0]) <= 1e-9
    assert orb.t_end == pytest.approx(2 * math.pi, abs=1e-14)


def test_dense_output_accuracy():
    orb = integrate(ROT, (1.0, 0.0), t_max=3.0, tol=1e-11)
    for t in np.linspace(0, 3, 37):
        assert np.allclose(orb(t), [math.cos(t), -math.sin(t)], atol=1e-9)


def test_times_strictly_increasing():
    orb = integrate(ROT, (1.0, 0.0), t_max=10.0, tol=1e-9)
    assert np.all(np.diff(orb.times) > 0)


def test_convergence_order():
    errs, steps = [], []
    for tol in (1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11):
        orb = integrate(ROT, (1.0, 0.0), t_max=2 * math.pi, tol=tol)
        errs.append(np.linalg.norm(orb.states[-1] - [1.0, 0.0]))
        steps.append(orb.n_explicit)
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert -slope == pytest.approx(5.0, abs=0.5)


def test_parabola_event(normal_form):
    ev = EventSpec(lambda x, y: y - 0.04, direction=1, terminal=True, name="up")
    orb = integrate(normal_form.z_plus, (-0.2, 0.04), t_max=5.0, tol=1e-12, events=[ev])
    assert orb.status == "terminal"
    hit = orb.events[0]
    assert hit.t == pytest.approx(0.4, abs=1e-12)
    assert hit.state[0] == pytest.approx(0.2, abs=1e-12)
    assert abs(hit.state[1] - 0.04) <= 1e-12


def test_no_hit_is_not_an_error(normal_form):
    ev = EventSpec(lambda x, y: y + 1.0, direction=-1, terminal=True)
    orb = integrate(normal_form.z_plus, (-0.2, 0.04), t_max=1.0, tol=1e-10, events=[ev])
    assert orb.events == [] and orb.t_end == pytest.approx(1.0)


def test_backward_integration_retraces():
    fwd = integrate(ROT, (1.0, 0.0), t_max=1.3, tol=1e-12)
    back = integrate(ROT, tuple(fwd.states[-1]), t_max=1.3, tol=1e-12, backward=True)
    assert np.allclose(back.states[-1], [1.0, 0.0], atol=1e-10)


def test_tolerance_range():
    with pytest.raises(DomainError):
        integrate(ROT, (1.0, 0.0), t_max=1.0, tol=1e-3)


def test_regularized_layer_explicit_vs_implicit(friction):
    fld = assemble_regularized(friction, SQRT, 1e-3)
    z0 = (-1.2, 0.3)
    a = integrate(fld, z0, 0.22, t_max=15.0, tol=1e-8)
    b = integrate_implicit(fld, z0, 0.22, t_max=15.0, tol=1e-8)
    assert min(a.states[:, 1]) < 1e-2  # the orbit does enter the layer
    assert np.allclose(a.states[-1], b.states[-1], atol=1e-6)


def test_linear_tangent_is_matrix_exponential():
    A = np.array([[-0.3, 1.2], [-0.7, 0.1]])
    v0 = np.array([0.4, -1.1])
    orb = integrate_variational(linear_field(A), (0.5, 0.2), v0, t_max=2.5, tol=1e-12)
    assert np.allclose(orb.tangents[-1], expm(2.5 * A) @ v0, atol=1e-9)


def test_zero_tangent_stays_zero(friction):
    fld = assemble_regularized(friction, SQRT, 1e-2)
    orb = integrate_variational(fld, (-1.0, 0.2), (0.0, 0.0), 0.22, t_max=5.0, tol=1e-10)
    assert np.all(orb.tangents == 0.0)


@pytest.mark.parametrize("z0", [(-1.2, 0.3), (-0.7, 0.05)])
def test_tangent_vs_finite_difference(friction, z0):
    fld = assemble_regularized(friction, SQRT, 1e-2)
    h, T = 1e-6, 4.0
    for v0 in ((1.0, 0.0), (0.0, 1.0)):
        orb = integrate_variational(fld, z0, v0, 0.22, t_max=T, tol=1e-12)
        up = integrate(fld, (z0[0] + h * v0[0], z0[1] + h * v0[1]), 0.22, t_max=T, tol=1e-12).states[-1]
        dn = integrate(fld, (z0[0] - h * v0[0], z0[1] - h * v0[1]), 0.22, t_max=T, tol=1e-12).states[-1]
        fd = (up - dn) / (2 * h)
        assert np.linalg.norm(orb.tangents[-1] - fd) <= 1e-6 * np.linalg.norm(fd)


def test_log_divergence_is_liouville(friction):
    # the area element grows like exp(integral of the divergence)
    fld = assemble_regularized(friction, SQRT, 1e-2)
    orb = integrate(fld, (-1.2, 0.3), 0.22, t_max=3.0, tol=1e-12, log_div=True)
    Phi = np.column_stack(
        [integrate_variational(fld, (-1.2, 0.3), v, 0.22, t_max=3.0, tol=1e-12).tangents[-1] for v in ((1, 0), (0, 1))]
    )
    assert orb.log_div[-1] == pytest.approx(math.log(abs(np.linalg.det(Phi))), abs=1e-8)


def test_stiff_linear_benchmark():
    orb = integrate_implicit(_stiff_field(), (0.0, 0.0), t_max=3.0, tol=1e-8)
    assert len(orb.times) <= 10_000
    x, y = orb.states[-1]
    assert y == pytest.approx(math.cos(x), abs=1e-5)
    assert np.all(np.isfinite(orb.states))


def test_implicit_agrees_with_explicit_on_normal_form(normal_form):
    z0 = (-0.3, 0.5)
    a = integrate(normal_form.z_plus, z0, t_max=1.0, tol=1e-12)
    b = integrate_implicit(normal_form.z_plus, z0, t_max=1.0, tol=1e-12)
    assert np.allclose(a.states[-1], b.states[-1], atol=1e-8)


def test_implicit_through_thin_layer(normal_form):
    fld = assemble_regularized(normal_form, SQRT, 1e-6)
    orb = integrate_implicit(fld, (-0.5, 0.04), t_max=1.5, tol=1e-8)
    assert orb.status == "t_max"
    assert np.all(np.isfinite(orb.states))
    assert abs(orb.states[:, 1]).min() < 1e-4


def test_auto_switch_handles_thin_layer(normal_form):
    fld = assemble_regularized(normal_form, SQRT, 1e-6)
    orb = integrate(fld, (-0.5, 0.04), t_max=1.5, tol=1e-8)
    assert orb.n_implicit > 0
    assert np.all(np.isfinite(orb.states))


def test_event_does_not_retrigger(normal_form):
    ev = EventSpec(lambda x, y: y - 0.04, direction=0, terminal=True)
    first = integrate(normal_form.z_plus, (-0.5, 0.25), t_max=5.0, tol=1e-12, events=[ev])
    again = integrate(normal_form.z_plus, first.events[0].state, t_max=5.0, tol=1e-12, events=[ev])
    assert again.events[0].t >= 1e-10
    assert again.events[0].t == pytest.approx(0.4, abs=1e-10)


@pytest.mark.parametrize("tol", [1e-8, 1e-10])
def test_time_reversal(friction, tol):
    fld = assemble_regularized(friction, SQRT, 1e-2)
    z0 = (-1.0, 0.3)
    fwd = integrate(fld, z0, 0.22, t_max=2.0, tol=tol)
    back = integrate(fld, tuple(fwd.states[-1]), 0.22, t_max=2.0, tol=tol, backward=True)
    assert np.max(np.abs(back.states[-1] - z0)) <= 10 * tol
