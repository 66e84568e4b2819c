"""Self-check suites: shape consistency, field tangency, inversion round trips and Liouville identities.

Every check returns a :class:`CheckResult`; :func:`selfcheck` picks the
checks that apply to a set of scenario parameters.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from . import invariants as inv
from . import shapes as sh
from .core import random_rotation, random_unit

LIOUVILLE_TOL = 1e-5
ROUNDTRIP_TOL = 1e-12
TANGENCY_TOL = 1e-12
NORMAL_TOL = 1e-8
DRHO_TOL = 1e-6
# states whose log density is below this cannot be represented in double precision
MIN_LOG_DENSITY = -700.0
R = "R"
S2 = "S2"


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    @classmethod
    def of(cls, name, value, tol, detail=""):
        value = float(value)
        return cls(name, value, tol, bool(math.isfinite(value) and value < tol), detail)


# ------------------------------------------------------------------ geometry and fields


def shape_residual_check(profile):
    grid = sh.chebyshev_grid()
    res = np.array([sh.shape_ode_residual(profile, g) for g in grid], dtype=float)
    return CheckResult.of("shape_ode_residual", np.max(np.abs(res)), sh.RESIDUAL_TOL, profile.name)


def normal_check(shape, rng, n):
    worst = max(sh.normal_defect(shape, random_unit(rng)) for _ in range(n))
    return CheckResult.of("surface_normal", worst, NORMAL_TOL)


def drho_check(shape, rng, n, h=1e-6):
    worst = 0.0
    for _ in range(n):
        g = random_unit(rng)
        d = random_unit(rng)
        d -= (d @ g) * g
        d /= np.linalg.norm(d)
        fd = (shape.rho_fn(math.cos(h) * g + math.sin(h) * d) - shape.rho_fn(math.cos(h) * g - math.sin(h) * d)) / (2 * h)
        scale = max(1.0, float(np.abs(shape.drho_fn(g)).max()))
        worst = max(worst, float(np.abs(fd - shape.drho_fn(g) @ d).max()) / scale)
    return CheckResult.of("drho_finite_difference", worst, DRHO_TOL)


def tangency_check(params, rng, n):
    shape = params.shape
    worst = 0.0
    for _ in range(n):
        g = random_unit(rng)
        rho = shape.rho_fn(g)
        w = params.W.eval_body(rho)
        worst = max(worst, abs(float(w @ g)) / max(1.0, float(np.linalg.norm(w))))
    return CheckResult.of("W_tangency", worst, TANGENCY_TOL, params.W.kind)


def horizontality_check(params, rng, n):
    worst = max(abs(float(params.V.eval(np.r_[rng.standard_normal(2) * 5, 0.0])[2])) for _ in range(n))
    return CheckResult.of("V_horizontal", worst, TANGENCY_TOL, params.V.kind)


def random_full_state(params, rng, m_scale=1.0, x_scale=2.0):
    B = random_rotation(rng)
    u = np.r_[rng.standard_normal(2) * x_scale, 0.0]
    u[2] = dyn.holonomic_u3(params.shape, B[2])
    return dyn.FullState(rng.standard_normal(3) * m_scale, B, u)


def inversion_check(params, rng, n, m_scale=1.0):
    worst = 0.0
    for _ in range(n):
        s = random_full_state(params, rng, m_scale)
        Om = dyn.omega_from_momentum(params, s.B, s.u, s.M)
        M2 = dyn.momentum_from_omega(params, s.B, s.u, Om)
        worst = max(worst, float(np.abs(M2 - s.M).max()) / max(1.0, float(np.abs(s.M).max())))
    return CheckResult.of("inversion_roundtrip", worst, ROUNDTRIP_TOL)


# ------------------------------------------------------------------ Liouville identities


def _sample(rng, n, make, log_density=None, max_tries=100):
    """``n`` states from ``make(rng)`` restricted to where the density is representable."""
    out = []
    tries = 0
    while len(out) < n:
        y = make(rng)
        tries += 1
        if log_density is None or log_density(y) > MIN_LOG_DENSITY:
            out.append(y)
        elif tries > max_tries * n:
            break
    return out


def _liouville(name, X, log_density, states, blocks, dlog=None, tol=LIOUVILLE_TOL):
    worst = 0.0
    for y in states:
        worst = max(worst, inv.liouville_residual(X, log_density, y, blocks, dlog=dlog)[0])
    return CheckResult.of(name, worst, tol, f"{len(states)} states")


def _mg(rng, m_scale):
    return np.r_[rng.standard_normal(3) * m_scale, random_unit(rng)]


def liouville_mu(params, rng, n, eps=2.0):
    _, mr2, sigma = inv._sphere_data(params)
    lam = eps * mr2 * abs(sigma)
    X = lambda g: dyn.mparallel_rhs(params, lam, g)
    L = lambda g: inv.mparallel_log_density(params, lam, g)
    return _liouville("liouville_mu", X, L, _sample(rng, n, random_unit), [(S2, slice(0, 3))])


def liouville_nu(params, rng, n, eps=None):
    _, mr2, sigma = inv._sphere_data(params)
    eps = 0.5 * inv.epsilon_threshold(params) if eps is None else eps
    lam = eps * mr2 * abs(sigma)
    X = lambda g: dyn.mparallel_rhs(params, lam, g)
    L = lambda g: inv.mparallel_log_density(params, lam, g)
    states = _sample(rng, n, random_unit, L)
    return _liouville("liouville_nu", X, L, states, [(S2, slice(0, 3))], dlog=inv.mparallel_dlog(params, lam))


def liouville_chi(params, rng, n, m_scale=1.0):
    X = lambda y: dyn.limit_rhs(params, dyn.ReducedState.from_array(y)).to_array()
    L = lambda y: inv.limit_log_chi(params, y[3:6])
    states = _sample(rng, n, lambda r: _mg(r, m_scale), L)
    return _liouville("liouville_chi", X, L, states, [(R, slice(0, 3)), (S2, slice(3, 6))],
                      dlog=inv.limit_dlog(params))


def liouville_chaplygin_reduced(params, rng, n, m_scale=1.0):
    """Classical Chaplygin sphere (V = W = 0) on (M, gamma) with density 1/sqrt(1 - mr^2 <g, A g>)."""
    X = lambda y: dyn._sphere_f(0.0, y, params)
    L = lambda y: math.log(inv.chaplygin_w0_measure_density(params, y[3:6] / np.linalg.norm(y[3:6])))
    return _liouville("liouville_chaplygin", X, L, _sample(rng, n, lambda r: _mg(r, m_scale)),
                      [(R, slice(0, 3)), (S2, slice(3, 6))])


def liouville_full_w0(params, rng, n, m_scale=1.0):
    """Full (M, B, u) system with W = 0 and a divergence-free V, density 1/sqrt(1 - mr^2 <g, A g>)."""
    shape = params.shape
    mr2 = shape.m * shape.radius ** 2
    X = lambda y: dyn._full_f(0.0, y, params)
    # the density is written on the ambient space through the third row of B
    L = lambda y: -0.5 * math.log(1.0 - mr2 * float(np.sum(y[9:12] ** 2 / (shape.inertia + mr2))))
    states = [random_full_state(params, rng, m_scale).to_array() for _ in range(n)]
    return _liouville("liouville_full_w0", X, L, states, [(R, slice(0, 15))])


def liouville_revolution(params, rng, n, m_scale=1.0):
    profile = params.shape.profile
    X = lambda y: dyn._reduced_f(0.0, y, params)
    L = lambda y: -math.log(inv.revolution_measure_density(profile, params, y[5] / np.linalg.norm(y[3:6])))
    return _liouville("liouville_revolution", X, L, _sample(rng, n, lambda r: _mg(r, m_scale)),
                      [(R, slice(0, 3)), (S2, slice(3, 6))])


def liouville_homsphere(params, rng, n, m_scale=1.0):
    """Reduced (M, gamma, U) system with the constant density."""
    r = params.shape.radius
    X = lambda y: dyn.homsphere_reduced_rhs(params, dyn.SphereReducedState.from_array(y)).to_array()

    def make(rng):
        g = random_unit(rng)
        U = rng.standard_normal(3) * r
        U += (r - U @ g) * g
        return np.r_[rng.standard_normal(3) * m_scale, g, U]

    return _liouville("liouville_homsphere", X, lambda y: 0.0, _sample(rng, n, make),
                      [(R, slice(0, 3)), (S2, slice(3, 6)), (R, slice(6, 9))])


def measure_checks(params, system, rng, n):
    """Liouville checks for every density implemented for this body/field/system combination."""
    shape = params.shape
    V, W = params.V, params.W
    out = []
    if system == "homsphere":
        out.append(liouville_homsphere(params, rng, n))
    if shape.is_sphere and V.is_zero and params.cats_toy_e3 and params.sigma != 0.0:
        mr2 = shape.m * shape.radius ** 2
        out += [liouville_mu(params, rng, n), liouville_nu(params, rng, n),
                liouville_chi(params, rng, n, m_scale=mr2 * abs(params.sigma))]
    if shape.is_sphere and V.is_zero and W.is_zero:
        out.append(liouville_chaplygin_reduced(params, rng, n))
    if shape.is_sphere and W.is_zero and V.kind in ("none", "rotating", "constant", "stream"):
        out.append(liouville_full_w0(params, rng, n))
    if shape.profile is not None and V.is_zero and params.cats_toy_e3:
        out.append(liouville_revolution(params, rng, n))
    return out


# ------------------------------------------------------------------ scenario-level driver


def selfcheck(params_or_none, system, profile=None, n=200, seed=0):
    """All applicable checks.  ``params_or_none`` is None when the shape could not be built;
    ``profile`` is then checked alone."""
    rng = np.random.default_rng(seed)
    out = []
    if profile is not None:
        res = shape_residual_check(profile)
        out.append(res)
        if not res.passed or params_or_none is None:
            return out
    params = params_or_none
    shape = params.shape
    out.append(normal_check(shape, rng, n))
    out.append(drho_check(shape, rng, n))
    out.append(tangency_check(params, rng, n))
    out.append(horizontality_check(params, rng, n))
    out.append(inversion_check(params, rng, n))
    out += measure_checks(params, system, rng, n)
    return out
