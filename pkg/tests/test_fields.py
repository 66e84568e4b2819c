import math

import numpy as np
from hypothesis import given, strategies as st

from affroll import fields as fl
from affroll import shapes as sh
from affroll.core import E1, E3

from strategies import unit3, vec3

SPHERE5 = sh.balanced_sphere(1.0, 0.5, 2.5, 3.0, 5.0)
MODES = [[0.3, 1.0, 0.5, 0.2], [-0.2, -0.4, 2.0, 1.0]]


def test_rotating_plane_examples():
    V = fl.rotating_plane(1.0)
    assert np.allclose(V.eval(E1), [0, 1, 0])
    assert np.allclose(V.eval(np.zeros(3)), 0)


@given(vec3)
def test_rotating_and_constant_divergence_free(x):
    assert fl.div_plane(fl.rotating_plane(0.7), x) == 0.0
    assert fl.div_plane(fl.constant_plane(1, 2), x) == 0.0


@given(vec3, vec3)
def test_constant_plane(x, d):
    V = fl.constant_plane(1, 2)
    assert np.array_equal(V.eval(x), [1, 2, 0])
    assert np.array_equal(V.jac(x) @ d, np.zeros(3))


@given(vec3)
def test_plane_fields_horizontal(x):
    for V in (fl.rotating_plane(2.0), fl.constant_plane(3, 4), fl.stream_plane(MODES, 0.5, 1, 2)):
        assert V.eval(x)[2] == 0.0


def test_div_plane_linear_field():
    V = fl.custom_plane(lambda x: np.array([x[0], x[1], 0.0]))
    assert abs(fl.div_plane(V, np.array([0.3, -2.0, 0.0])) - 2.0) < 1e-8


@given(st.tuples(*[st.floats(-2, 2)] * 5), vec3)
def test_div_plane_polynomial_field(c, x):
    a, b, k, d, e = c
    V = fl.custom_plane(lambda x: np.array([a * x[0] ** 2 + b * x[0] * x[1] + k, d * x[1] ** 2 + e * x[0], 0.0]))
    exact = 2 * a * x[0] + b * x[1] + 2 * d * x[1]
    assert abs(fl.div_plane(V, x) - exact) < 1e-6 * max(1.0, abs(exact))


@given(vec3)
def test_stream_plane_divergence_free_with_exact_jacobian(x):
    V = fl.stream_plane(MODES, eta=0.4, v1=1.0, v2=-2.0)
    assert abs(fl.div_plane(V, x)) < 1e-14
    assert np.allclose(V.jac(x), fl.fd_jacobian(V.eval, x), atol=1e-8)


@given(vec3)
def test_stream_plane_without_modes_is_rotating_plus_constant(x):
    V = fl.stream_plane([], eta=0.7, v1=1.0, v2=2.0)
    assert np.allclose(V.eval(x), fl.rotating_plane(0.7).eval(x) + fl.constant_plane(1, 2).eval(x), atol=1e-14)


def test_cats_toy_example():
    W = fl.cats_toy(10.0).bind(SPHERE5)
    assert np.allclose(W.eval_gamma(E1), [0, 50, 0])


@given(unit3)
def test_cats_toy_poles(axis):
    W = fl.cats_toy(3.0, axis).bind(SPHERE5)
    assert np.allclose(W.eval_gamma(axis), 0, atol=1e-12)
    assert np.allclose(W.eval_gamma(-axis), 0, atol=1e-12)


@given(unit3, unit3)
def test_cats_toy_tangent(axis, g):
    W = fl.cats_toy(3.0, axis).bind(SPHERE5)
    assert abs(W.eval_gamma(g) @ g) < 1e-12


@given(unit3, vec3)
def test_sphere_tangent_field(g, c):
    W = fl.sphere_tangent(c, sigma=1.5, axis=np.array([1.0, 2.0, 2.0]) / 3).bind(SPHERE5)
    w = W.eval_gamma(g)
    assert abs(w @ g) < 1e-12 * max(1.0, np.linalg.norm(w))
    rho = SPHERE5.rho_fn(g)
    assert np.allclose(W.jac_body(rho), fl.fd_jacobian(W.eval_body, rho), atol=1e-7)


@given(unit3)
def test_div_sphere_cats_toy_zero(g):
    W = fl.cats_toy(4.0, E3).bind(SPHERE5)
    assert abs(fl.div_sphere(W, g)) < 1e-12


def spherical_divergence(W_of_gamma, g, h=1e-5):
    """Divergence in spherical coordinates: (d_theta(sin W_theta) + d_phi W_phi) / sin."""
    th, ph = math.acos(g[2]), math.atan2(g[1], g[0])

    def comps(th, ph):
        p = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        e_th = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
        e_ph = np.array([-math.sin(ph), math.cos(ph), 0.0])
        w = W_of_gamma(p)
        return w @ e_th, w @ e_ph

    d_th = (math.sin(th + h) * comps(th + h, ph)[0] - math.sin(th - h) * comps(th - h, ph)[0]) / (2 * h)
    d_ph = (comps(th, ph + h)[1] - comps(th, ph - h)[1]) / (2 * h)
    return (d_th + d_ph) / math.sin(th)


@given(unit3.filter(lambda g: abs(g[2]) < 0.95), vec3)
def test_div_sphere_matches_spherical_coordinates(g, c):
    fn = lambda x: x * (x @ c) - c * (x @ x)
    W = fl.gamma_field(fn)
    expected = spherical_divergence(fn, g)
    assert abs(fl.div_sphere(W, g) - expected) < 1e-6 * max(1.0, np.linalg.norm(c))
    # gamma x (gamma x c) is minus the gradient of <c, gamma>; its divergence is 2 <c, gamma>
    assert abs(expected - 2 * (c @ g)) < 1e-6 * max(1.0, np.linalg.norm(c))


@given(unit3, vec3, vec3)
def test_div_sphere_extension_independent(g, c, d):
    f1 = lambda x: x * (x @ c) - c
    f2 = lambda x: (x * (x @ c) - c * (x @ x)) * (x @ x) ** 2 + (1.0 - x @ x) * d
    j1 = lambda x: np.outer(x, c) + (x @ c) * np.eye(3)
    W1, W2 = fl.gamma_field(f1, j1), fl.gamma_field(f2)
    assert abs(fl.div_sphere(W1, g) - fl.div_sphere(W2, g)) < 1e-8 * max(1.0, np.linalg.norm(c) + np.linalg.norm(d))
