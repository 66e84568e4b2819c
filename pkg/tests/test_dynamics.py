import math

import numpy as np
import pytest
from hypothesis import given

from affroll import dynamics as dyn
from affroll import fields as fl
from affroll import kernels
from affroll import shapes as sh
from affroll.core import E1, E3, hat, random_rotation, random_unit, rot_e3
from affroll.errors import VariantMismatch
from affroll.integrate import IntegratorOptions, integrate

from helpers import (FIG5_SHAPE, ROUTH, catalogue_params, fig5_params, fig6_params, random_full, random_reduced,
                     routh_params)
from strategies import seeds

TIGHT = IntegratorOptions(rtol=1e-12, atol=1e-14)


def kappa(params):
    shape = params.shape
    mr2 = shape.m * shape.radius ** 2
    return mr2 * params.sigma / (shape.inertia[2] + mr2)


# ------------------------------------------------------------------ inversion


def test_A_matrix_fig5():
    assert np.allclose(dyn.A_matrix(FIG5_SHAPE, random_unit(np.random.default_rng(0))),
                       np.diag([1 / 25.5, 1 / 27.5, 1 / 28]), rtol=1e-15)


def test_A_matrix_homogeneous_sphere_scalar():
    A = dyn.A_matrix(sh.homogeneous_sphere(1.0, 2.0, 3.0), E1)
    assert np.allclose(A, np.eye(3) / 11.0)


def test_A_matrix_revolution_varies_with_gamma3():
    body = sh.revolution_body(1.0, 0.4, 0.6, ROUTH)
    g2 = np.array([math.sqrt(0.75), 0.0, 0.5])
    for g in (E3, g2):
        rho = body.rho_fn(g)
        assert np.allclose(dyn.A_matrix(body, g), np.diag(1 / (body.inertia + rho @ rho)))
    assert not np.allclose(dyn.A_matrix(body, E3), dyn.A_matrix(body, g2))


def test_momentum_axis_spin():
    p = dyn.ScenarioParams(FIG5_SHAPE)
    B, u = np.eye(3), np.array([0, 0, 5.0])
    assert np.allclose(dyn.momentum_from_omega(p, B, u, [0, 0, 2.0]), [0, 0, 6.0])
    assert np.allclose(dyn.momentum_from_omega(p, B, u, np.zeros(3)), 0)
    assert np.allclose(dyn.omega_from_momentum(p, B, u, [0, 0, 3.0]), [0, 0, 1.0])


@pytest.mark.parametrize("params", catalogue_params(), ids=lambda p: f"{p.shape.kind}-{p.V.kind}-{p.W.kind}")
def test_inversion_round_trip(params):
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = random_full(params, rng)
        Om = dyn.omega_from_momentum(params, s.B, s.u, s.M)
        assert np.allclose(dyn.momentum_from_omega(params, s.B, s.u, Om), s.M, rtol=0, atol=1e-12 * max(1, np.abs(s.M).max()))


@given(seeds)
def test_fig5_round_trip(seed):
    rng = np.random.default_rng(seed)
    p = fig5_params()
    M0 = rng.standard_normal(3) * 100.0
    B = random_rotation(rng)
    Om = dyn.omega_reduced(p, M0, B[2])
    M = dyn.momentum_from_omega(p, B, np.array([0, 0, 5.0]), Om)
    assert np.allclose(M, M0, atol=1e-12 * np.abs(M0).max())


@given(seeds)
def test_homsphere_closed_form_omega(seed):
    rng = np.random.default_rng(seed)
    p = fig6_params(eta=0.7, sigma=1.3)
    s = random_full(p, rng)
    red = dyn.full_to_sphere_reduced(s)
    assert np.allclose(dyn.omega_homsphere(p, red), dyn.omega_from_momentum(p, s.B, s.u, s.M), atol=1e-12)


# ------------------------------------------------------------------ full system


def test_vertical_spin_equilibrium():
    p = fig5_params()
    s = dyn.FullState([0, 0, 7.0], np.eye(3), [0, 0, 5.0])
    d = dyn.full_rhs(p, s)
    assert np.allclose(d.M, 0, atol=1e-12) and np.allclose(d.u, 0, atol=1e-12)
    assert not np.allclose(d.B, 0)


@pytest.mark.parametrize("params", catalogue_params()[::5], ids=lambda p: f"{p.shape.kind}-{p.V.kind}-{p.W.kind}")
def test_u3_rate_is_derivative_of_contact_height(params):
    rng = np.random.default_rng(2)
    for _ in range(10):
        s = random_full(params, rng)
        Om = dyn.omega_from_momentum(params, s.B, s.u, s.M)
        g = s.B[2]
        gdot = np.cross(g, Om)
        rho = params.shape.rho_fn(g)
        expected = -(params.shape.drho_fn(g) @ gdot) @ g - rho @ gdot
        assert abs(dyn.full_rhs(params, s).u[2] - expected) < 1e-9 * max(1.0, np.abs(Om).max())


def test_full_kernel_matches_python_rhs():
    rng = np.random.default_rng(3)
    for p in catalogue_params():
        system = dyn.full_system(p)
        if not system.jit:
            continue
        for _ in range(5):
            y = random_full(p, rng).to_array()
            a, b = system.f(0.0, y, system.p), dyn._full_f(0.0, y, p)
            assert np.allclose(a, b, rtol=0, atol=1e-12 * max(1, np.abs(b).max()))


def test_full_system_energy_with_gravity():
    p = routh_params(sigma=0.0)
    s = random_full(p, np.random.default_rng(4))
    tr = integrate(dyn.full_system(p), s, (0, 50), IntegratorOptions(rtol=1e-10, atol=1e-12))
    E = np.array([dyn.classical_energy(p, tr.state(i)) for i in range(len(tr))])
    assert np.abs(E - E[0]).max() / abs(E[0]) < 1e-8


def test_contact_height_follows_trajectory_without_projection():
    p = routh_params(sigma=3.0)
    s = random_full(p, np.random.default_rng(5))
    tr = integrate(dyn.full_system(p), s, (0, 10), IntegratorOptions(rtol=1e-11, atol=1e-13, project=False))
    for i in range(0, len(tr), 50):
        st = tr.state(i)
        g = st.B[2] / np.linalg.norm(st.B[2])
        assert abs(st.u[2] - dyn.holonomic_u3(p.shape, g)) < 1e-8


def test_holonomic_u3_examples():
    assert dyn.holonomic_u3(FIG5_SHAPE, random_unit(np.random.default_rng(0))) == pytest.approx(5.0, abs=1e-14)
    body = sh.revolution_body(1.0, 0.4, 0.6, ROUTH)
    assert dyn.holonomic_u3(body, E3) == pytest.approx(-ROUTH.f2(1.0), abs=1e-15)


# ------------------------------------------------------------------ reduced system


def test_revolution_axis_relative_equilibrium():
    p = routh_params(sigma=0.0)
    for sgn in (1.0, -1.0):
        d = dyn.reduced_rhs_V0(p, dyn.ReducedState(2.5 * sgn * E3, sgn * E3))
        assert np.allclose(d.gamma, 0, atol=1e-14)
        assert np.allclose(np.cross(d.M, E3), 0, atol=1e-14)


def test_reduced_matches_projected_full_trajectory():
    p = routh_params(sigma=3.0)
    s = random_full(p, np.random.default_rng(6))
    ts = np.linspace(0, 5, 21)
    full = integrate(dyn.full_system(p), s, (0, 5), TIGHT)(ts)
    red = integrate(dyn.reduced_system(p), dyn.ReducedState(s.M, s.B[2]), (0, 5), TIGHT)(ts)
    assert np.abs(full[:, 0:3] - red[:, 0:3]).max() < 1e-9 * max(1, np.abs(red[:, 0:3]).max())
    assert np.abs(full[:, 9:12] - red[:, 3:6]).max() < 1e-9


@given(seeds)
def test_sphere_code_paths_agree(seed):
    rng = np.random.default_rng(seed)
    p = fig5_params()
    y = random_reduced(rng, 50.0).to_array()
    a = dyn._reduced_f(0.0, y, p)
    b = dyn._sphere_f(0.0, y, p)
    c = kernels.cat_rhs(0.0, y, dyn._cat_p(p))
    scale = max(1.0, np.abs(a).max())
    assert np.allclose(a, b, atol=1e-12 * scale) and np.allclose(a, c, atol=1e-12 * scale)


def test_reduced_system_rejects_plane_field():
    with pytest.raises(VariantMismatch):
        dyn.reduced_system(dyn.ScenarioParams(FIG5_SHAPE, V=fl.rotating_plane(1.0)))


@given(seeds)
def test_M_parallel_gamma_stays_parallel(seed):
    rng = np.random.default_rng(seed)
    p = fig5_params()
    g = random_unit(rng)
    s = dyn.ReducedState(7.0 * g, g)
    d = dyn.chaplygin_sphere_rhs(p, s)
    assert np.allclose(np.cross(d.M, s.gamma) + np.cross(s.M, d.gamma), 0, atol=1e-12)


def test_classical_sphere_integrals_long_run():
    p = fig5_params(sigma=0.0)
    s = random_reduced(np.random.default_rng(7), 3.0)
    tr = integrate(dyn.reduced_system(p), s, (0, 100), TIGHT)
    M, g = tr.states[:, 0:3], tr.states[:, 3:6]
    for F in (np.sum(M * M, axis=1), np.sum(M * g, axis=1)):
        assert np.abs(F - F[0]).max() / abs(F[0]) < 1e-10


def test_fig5_level_zero_conserved():
    from affroll.poincare import seed_andoyer

    p = fig5_params()
    s = seed_andoyer(2 * 250.0, 0.3, 1.0)
    tr = integrate(dyn.reduced_system(p), s, (0, 20), IntegratorOptions(rtol=1e-10, atol=1e-12))
    f = np.sum(tr.states[:, 0:3] * tr.states[:, 3:6], axis=1)
    assert abs(f[0]) < 1e-12 and np.abs(f).max() < 1e-9 * 500


# ------------------------------------------------------------------ M parallel to gamma


def test_mparallel_poles_are_equilibria():
    p = fig5_params()
    for g in (E3, -E3):
        assert np.allclose(dyn.mparallel_rhs(p, 40.0, g), 0, atol=1e-13)


@given(seeds)
def test_mparallel_is_restriction(seed):
    rng = np.random.default_rng(seed)
    p = fig5_params()
    g = random_unit(rng)
    lam = rng.uniform(-300, 300)
    full = dyn.chaplygin_sphere_rhs(p, dyn.ReducedState(lam * g, g))
    assert np.allclose(dyn.mparallel_rhs(p, lam, g), full.gamma, atol=1e-12 * max(1, np.abs(full.gamma).max()))
    system = dyn.mparallel_system(p, lam)
    assert np.allclose(system.f(0.0, g, system.p), full.gamma, atol=1e-12 * max(1, np.abs(full.gamma).max()))


def test_mparallel_invariant_parallel_below_threshold():
    from affroll import invariants as inv

    p = fig5_params()
    mr2 = 25.0
    lam = 0.05 * mr2 * 10.0
    g3 = inv.parallel_gamma3(p, lam)
    assert abs(g3) < 1
    k = kappa(p)
    for phi in np.linspace(0, 2 * np.pi, 7):
        g = np.array([math.sqrt(1 - g3 * g3) * math.cos(phi), math.sqrt(1 - g3 * g3) * math.sin(phi), g3])
        d = dyn.mparallel_rhs(p, lam, g)
        assert abs(d[2]) < 1e-12
        assert np.allclose(d[:2], k * np.array([-g[1], g[0]]), atol=1e-12)


# ------------------------------------------------------------------ limit system


@given(seeds)
def test_omega_split(seed):
    rng = np.random.default_rng(seed)
    s = random_reduced(rng, 30.0)
    p = fig5_params()
    om_l, om_a = dyn.omega_split(p, s)
    assert np.allclose(om_l + om_a, dyn.omega_reduced(p, s.M, s.gamma), atol=1e-12 * max(1, np.abs(om_l).max()))
    assert np.array_equal(dyn.omega_split(fig5_params(0.0), s)[1], np.zeros(3))


def test_omega_a_on_equator():
    p = fig5_params()
    for phi in np.linspace(0, 2 * np.pi, 5):
        g = rot_e3(phi) @ E1
        _, om_a = dyn.omega_split(p, dyn.ReducedState(np.ones(3), g))
        assert np.allclose(om_a / p.sigma, -kappa(p) / p.sigma * E3, atol=1e-14)


def test_limit_equator_is_harmonic():
    p = fig5_params()
    k = kappa(p) / p.sigma
    for phi in np.linspace(0, 2 * np.pi, 5):
        g = rot_e3(phi) @ E1
        d = dyn.limit_rhs(p, dyn.ReducedState(np.array([1.0, 2.0, 3.0]), g))
        assert abs(d.gamma[2]) < 1e-15
        assert np.allclose(d.gamma[:2], k * np.array([-g[1], g[0]]), atol=1e-14)


def test_limit_integrals():
    from affroll import invariants as inv

    p = fig5_params()
    s = dyn.ReducedState([1.0, -2.0, 0.5], random_unit(np.random.default_rng(8)))
    tr = integrate(dyn.limit_system(p), s, (0, 50), TIGHT)
    M, g = tr.states[:, 0:3], tr.states[:, 3:6]
    for F in (np.linalg.norm(M, axis=1), np.sum(M * g, axis=1), np.linalg.norm(g, axis=1)):
        assert np.abs(F - F[0]).max() < 1e-10 * max(1, abs(F[0]))
    # k = exp(-h) underflows at this mass ratio, so h is compared instead
    h = np.exp([inv.limit_log_h(p, gi) for gi in g])
    assert np.abs(h - h[0]).max() / h[0] < 1e-8


# ------------------------------------------------------------------ homogeneous sphere


def test_homsphere_equilibria():
    p = fig6_params()
    for sgn in (1.0, -1.0):
        s = dyn.SphereReducedState([0, 0, 1.7], [0, 0, sgn], [0, 0, sgn * 2.0])
        assert np.allclose(dyn.homsphere_reduced_rhs(p, s).to_array(), 0, atol=1e-14)


def test_homsphere_geometric_integrals_without_projection():
    p = fig6_params()
    g = random_unit(np.random.default_rng(9))
    s = dyn.SphereReducedState([0.5, -1.0, 1.2], g, 2.0 * g + np.cross(g, [0.3, 0.1, -0.4]))
    tr = integrate(dyn.homsphere_system(p), s, (0, 100), IntegratorOptions(rtol=1e-12, atol=1e-14, project=False))
    g, U = tr.states[:, 3:6], tr.states[:, 6:9]
    assert np.abs(np.sum(U * g, axis=1) - 2.0).max() < 1e-9
    assert np.abs(np.linalg.norm(g, axis=1) - 1.0).max() < 1e-9


def test_homsphere_fig6_momentum_levels():
    from affroll.poincare import seed_homsphere

    p = fig6_params()
    s = seed_homsphere(p, 2.0, 0.0, math.pi / 4, -8.0, 0.5, 0.0)
    tr = integrate(dyn.homsphere_system(p), s, (0, 100), IntegratorOptions(rtol=1e-10, atol=1e-12))
    M, g = tr.states[:, 0:3], tr.states[:, 3:6]
    assert np.abs(np.linalg.norm(M, axis=1) - 2.0).max() < 1e-9
    assert np.abs(np.sum(M * g, axis=1)).max() < 1e-9


def test_homsphere_is_reduction_of_full_system():
    p = fig6_params(eta=0.7, sigma=1.3)
    s = random_full(p, np.random.default_rng(10))
    ts = np.linspace(0, 5, 11)
    full = integrate(dyn.full_system(p), s, (0, 5), TIGHT)
    red = integrate(dyn.homsphere_system(p), dyn.full_to_sphere_reduced(s), (0, 5), TIGHT)(ts)
    for t, r in zip(ts, red):
        ref = dyn.full_to_sphere_reduced(dyn.FullState.from_array(full(t)))
        assert np.allclose(ref.to_array(), r, atol=1e-9 * max(1, np.abs(r).max()))


def test_homsphere_needs_homogeneous_body():
    with pytest.raises(VariantMismatch):
        dyn.homsphere_system(fig5_params())


# ------------------------------------------------------------------ large-epsilon shadowing


def test_large_epsilon_shadowing_error_scales_inversely():
    from affroll.poincare import seed_andoyer

    p = fig5_params()
    opts = IntegratorOptions(rtol=1e-12, atol=1e-12)
    scaled = []
    for eps in (50.0, 200.0, 800.0):
        G = eps * 25.0 * p.sigma
        y0 = seed_andoyer(G, 0.3, 1.0, 0.5).to_array()
        # one time unit of the classical flow, whose rates grow like G
        T = 1.0 / (eps * p.sigma)
        ts = np.linspace(0, T, 101)
        a = integrate(dyn.reduced_system(p), y0, (0, T), opts)(ts)
        b = integrate(dyn.classical_sphere_system(p), y0, (0, T), opts)(ts)
        d = max(np.abs(a[:, :3] - b[:, :3]).max() / G, np.abs(a[:, 3:] - b[:, 3:]).max())
        scaled.append(d * eps)
    assert max(scaled) / min(scaled) < 1.05


# ------------------------------------------------------------------ SO(2) equivariance


@given(seeds)
def test_revolution_rhs_is_so2_equivariant(seed):
    rng = np.random.default_rng(seed)
    p = routh_params(sigma=3.0)
    s = random_reduced(rng, 3.0)
    R = rot_e3(rng.uniform(0, 2 * np.pi))
    d = dyn.reduced_rhs_V0(p, s)
    dr = dyn.reduced_rhs_V0(p, dyn.ReducedState(R @ s.M, R @ s.gamma))
    assert np.allclose(dr.M, R @ d.M, atol=1e-12 * max(1, np.abs(d.M).max()))
    assert np.allclose(dr.gamma, R @ d.gamma, atol=1e-12)


@given(seeds)
def test_homsphere_rhs_is_so2_equivariant(seed):
    rng = np.random.default_rng(seed)
    p = fig6_params(eta=0.7, sigma=1.3)
    g = random_unit(rng)
    s = dyn.SphereReducedState(rng.standard_normal(3), g, 2.0 * g + np.cross(g, rng.standard_normal(3)))
    R = rot_e3(rng.uniform(0, 2 * np.pi))
    d = dyn.homsphere_reduced_rhs(p, s)
    dr = dyn.homsphere_reduced_rhs(p, dyn.SphereReducedState(R @ s.M, R @ s.gamma, R @ s.U))
    scale = max(1, np.abs(d.to_array()).max())
    for a, b in ((dr.M, d.M), (dr.gamma, d.gamma), (dr.U, d.U)):
        assert np.allclose(a, R @ b, atol=1e-12 * scale)
