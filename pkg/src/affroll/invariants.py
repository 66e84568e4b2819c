"""First integrals, moving energies, invariant-measure densities and Liouville checks."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import dynamics as dyn
from .core import E3
from .errors import DomainError, VariantMismatch
from .integrate import IntegratorOptions, System, integrate
from .shapes import unit_gamma

ZERO_TOL = 1e-12


# ------------------------------------------------------------------ drift reports


def drift(values, scale=None):
    """Max |F(t) - F(0)| divided by |F(0)|, or by ``scale`` when given.

    Falls back to the absolute deviation when the normalizer is below 1e-12.
    """
    v = np.asarray(values, dtype=float)
    dev = float(np.max(np.abs(v - v[0]))) if v.size else 0.0
    ref = abs(v[0]) if scale is None else float(scale)
    return dev / ref if ref >= ZERO_TOL else dev


@dataclass
class IntegralReport:
    name: str
    values: np.ndarray = field(repr=False)
    max_drift: float
    tol: float
    passed: bool

    @classmethod
    def build(cls, name, values, tol, scale=None):
        d = drift(values, scale)
        return cls(name, np.asarray(values, dtype=float), d, tol, bool(d < tol))


# ------------------------------------------------------------------ momentum integrals


def spatial_momentum(s, w, B=None):
    """``<M, B^{-1} w>``; ``B`` is taken from a FullState or passed with a ReducedState."""
    if B is None:
        B = s.B
    return float(np.asarray(s.M) @ (np.asarray(B).T @ np.asarray(w, dtype=float)))


def reduced_sphere_integrals(s):
    M, g = np.asarray(s.M), np.asarray(s.gamma)
    return float(M @ M), float(M @ g), float(g @ g)


# ------------------------------------------------------------------ moving energies

MOVING_ENERGY_VARIANTS = ("rotating_plane", "translation", "axisymmetric", "general", "homsphere")


def _state_omega(params, s):
    if isinstance(s, dyn.FullState):
        return dyn.omega_from_momentum(params, s.B, s.u, s.M), unit_gamma(s.B[2])
    if isinstance(s, dyn.SphereReducedState):
        return dyn.omega_homsphere(params, s), unit_gamma(s.gamma)
    if not params.V.is_zero:
        raise VariantMismatch("a nonzero plane field needs the full state (M, B, u)")
    g = unit_gamma(s.gamma)
    return dyn.omega_reduced(params, s.M, g), g


def _plane_at_rest(V):
    return V.is_zero or (V.kind == "rotating" and V.params["eta"] == 0.0)


def _check_variant(params, s, variant):
    V, W, shape = params.V, params.W, params.shape
    axis_ok = params.cats_toy_e3
    if variant == "rotating_plane":
        ok = V.kind in ("rotating", "none") and W.is_zero
        ok = ok and isinstance(s, dyn.FullState)
    elif variant == "translation":
        ok = (V.kind == "constant" or _plane_at_rest(V)) and W.is_zero
    elif variant == "axisymmetric":
        ok = shape.is_axisymmetric and axis_ok and (V.kind == "constant" or _plane_at_rest(V))
    elif variant == "general":
        ok = shape.is_axisymmetric and axis_ok and V.kind in ("rotating", "none") and isinstance(s, dyn.FullState)
    elif variant == "homsphere":
        ok = (shape.kind == "homogeneous_sphere" and axis_ok and V.kind in ("rotating", "none")
              and isinstance(s, dyn.SphereReducedState))
    else:
        raise VariantMismatch(f"unknown moving-energy variant {variant!r}; expected one of {MOVING_ENERGY_VARIANTS}")
    if not ok:
        raise VariantMismatch(f"moving-energy variant {variant!r} does not apply to this body/field/state combination")


def moving_energy(params, s, variant):
    """Conserved moving energy.

    ``rotating_plane``: W = 0, V = eta e3 x x.  ``translation``: W = 0, V
    constant.  ``axisymmetric``: I1 = I2, cat's toy about E3, V zero or
    constant.  ``general``: I1 = I2, cat's toy and rotating plane.
    ``homsphere``: homogeneous sphere in (M, gamma, U) variables.
    """
    _check_variant(params, s, variant)
    shape = params.shape
    I, m, grav = shape.inertia, shape.m, params.g
    Om, g = _state_omega(params, s)
    rho = shape.rho_fn(g)
    eta, sigma = params.eta, params.sigma
    if variant == "homsphere":
        r = shape.radius
        Os = Om + sigma * E3
        gxo = np.cross(g, Os)
        return float(0.5 * I[0] * Os @ Os + 0.5 * m * r * r * gxo @ gxo - 0.5 * m * eta * eta * s.U @ s.U)
    potential = -m * grav * (rho @ g)
    if variant == "translation":
        rxo = np.cross(rho, Om)
        return float(0.5 * Om @ (I * Om) + 0.5 * m * rxo @ rxo + potential)
    if variant == "axisymmetric":
        Os = Om + sigma * E3
        rxo = np.cross(rho, Os)
        return float(0.5 * Os @ (I * Os) + 0.5 * m * rxo @ rxo + potential)
    # rotating_plane is the sigma = 0 case of the general expression
    Os = Om + sigma * E3
    rxo = np.cross(rho, Os)
    u = s.u
    return float(0.5 * Om @ (I * Om) + (I * Om) @ (-eta * g + sigma * E3) + 0.5 * m * rxo @ rxo
                 - m * eta * rxo @ np.cross(rho, g) + 0.5 * m * eta * eta * (rho @ rho - u @ u) + potential)


# ------------------------------------------------------------------ M parallel to gamma


def _sphere_data(params):
    shape = params.shape
    if not shape.is_sphere or not params.cats_toy_e3:
        raise VariantMismatch("balanced sphere with a cat's toy about E3 required")
    mr2 = shape.m * shape.radius ** 2
    return shape.inertia, mr2, params.sigma


def _den(params, g):
    I, mr2, _ = _sphere_data(params)
    return 1.0 - mr2 * np.sum(g * g / (I + mr2))


def epsilon(params, lam):
    _, mr2, sigma = _sphere_data(params)
    return abs(lam) / (mr2 * abs(sigma))


def epsilon_threshold(params):
    I, mr2, _ = _sphere_data(params)
    return I[2] / (I[2] + mr2)


def parallel_gamma3(params, lam):
    """Height of the parallel where ``lam (I3 + mr^2) + mr^2 sigma I3 g3`` vanishes."""
    I, mr2, sigma = _sphere_data(params)
    return -lam * (I[2] + mr2) / (mr2 * sigma * I[2])


def _mpar_lin(params, lam, g):
    I, mr2, sigma = _sphere_data(params)
    return lam * (I[2] + mr2) + mr2 * sigma * I[2] * g[2]


def mparallel_log_f(params, lam, gamma):
    """``log f``; stays finite where f itself under- or overflows."""
    I, mr2, _ = _sphere_data(params)
    g = np.asarray(gamma, dtype=float)
    return -(mr2 / I[2]) * math.log(abs(_mpar_lin(params, lam, g))) - 0.5 * math.log(_den(params, g))


def mparallel_integral_f(params, lam, gamma):
    if epsilon(params, lam) <= epsilon_threshold(params):
        raise DomainError("f is singular on a parallel for this momentum; use mparallel_integral_g")
    return math.exp(mparallel_log_f(params, lam, gamma))


def mparallel_integral_g(params, lam, gamma):
    g = np.asarray(gamma, dtype=float)
    if _mpar_lin(params, lam, g) == 0.0:
        return 0.0
    lf = mparallel_log_f(params, lam, g)
    if lf > 709.0:
        return 0.0
    return math.exp(-math.exp(lf))


def mparallel_measure_density(params, lam, gamma):
    """mu above the epsilon threshold, nu = g mu at or below it."""
    g = np.asarray(gamma, dtype=float)
    lin = _mpar_lin(params, lam, g)
    if epsilon(params, lam) > epsilon_threshold(params):
        return 1.0 / abs(lin)
    if lin == 0.0:
        return 0.0
    return mparallel_integral_g(params, lam, g) / abs(lin)


def mparallel_log_density(params, lam, gamma):
    g = np.asarray(gamma, dtype=float)
    lin = abs(_mpar_lin(params, lam, g))
    if epsilon(params, lam) > epsilon_threshold(params):
        return -math.log(lin)
    return -math.exp(mparallel_log_f(params, lam, g)) - math.log(lin)


# ------------------------------------------------------------------ limit system


def limit_log_h(params, gamma):
    """``log h`` with ``h = |g3|^(-mr^2/I3) / sqrt(1 - mr^2 <g, A g>)``; k = exp(-h)."""
    I, mr2, _ = _sphere_data(params)
    g = np.asarray(gamma, dtype=float)
    return -(mr2 / I[2]) * math.log(abs(g[2])) - 0.5 * math.log(_den(params, g))


def limit_integral_k(params, gamma):
    g = np.asarray(gamma, dtype=float)
    if g[2] == 0.0:
        return 0.0
    lh = limit_log_h(params, g)
    return 0.0 if lh > 709.0 else math.exp(-math.exp(lh))


def limit_measure_chi(params, gamma):
    g = np.asarray(gamma, dtype=float)
    if g[2] == 0.0:
        return 0.0
    return limit_integral_k(params, g) / abs(g[2])


def mparallel_dlog(params, lam):
    """Chain-rule directional derivative of the log of nu (see :func:`dlog_exp_form`)."""
    return dlog_exp_form(lambda g: mparallel_log_f(params, lam, g),
                         lambda g: -math.log(abs(_mpar_lin(params, lam, g))))


def limit_dlog(params):
    """Chain-rule directional derivative of the log of chi on (M, gamma) arrays."""
    return dlog_exp_form(lambda y: limit_log_h(params, y[3:6]), lambda y: -math.log(abs(y[5])))


def limit_log_chi(params, gamma):
    g = np.asarray(gamma, dtype=float)
    return -math.exp(limit_log_h(params, g)) - math.log(abs(g[2]))


# ------------------------------------------------------------------ measure densities


def chaplygin_w0_measure_density(params, gamma):
    shape = params.shape
    if not shape.is_sphere:
        raise VariantMismatch("balanced sphere required")
    g = unit_gamma(gamma)
    mr2 = shape.m * shape.radius ** 2
    return 1.0 / math.sqrt(1.0 - mr2 * np.sum(g * g / (shape.inertia + mr2)))


def _rev_data(params):
    shape = params.shape
    if shape.profile is None:
        raise VariantMismatch("body of revolution required")
    return shape.profile, shape.m, shape.inertia[0], shape.inertia[2]


def revolution_measure_density(profile, params, g3):
    """``mu(g3)``; the invariant measure is ``dM dgamma / mu``."""
    _, m, I1, I3 = _rev_data(params)
    f1, f2 = profile.f1(g3), profile.f2(g3)
    return float(np.sqrt(I1 * I3 + m * I1 * f1 * f1 * (1.0 - g3 * g3) + m * I3 * f2 * f2))


# ------------------------------------------------------------------ bodies of revolution


def K1K2(params, s):
    profile, *_ = _rev_data(params)
    g = unit_gamma(s.gamma)
    rho = params.shape.rho_fn(g)
    Om = dyn.omega_reduced(params, s.M, g)
    return (float(s.M @ rho / profile.f1(g[2])),
            revolution_measure_density(profile, params, g[2]) * float(Om[2]))


def G_matrix(profile, params, g3):
    _, m, I1, I3 = _rev_data(params)
    f1, df1, f2, df2 = profile.f1(g3), profile.df1(g3), profile.f2(g3), profile.df2(g3)
    mu = revolution_measure_density(profile, params, g3)
    ratio_d = (df2 * f1 - f2 * df1) / (f1 * f1)
    return -np.array([[0.0, I3 * (1.0 - ratio_d)], [m * f1 * (f1 - df2), 0.0]]) / mu


def b_vector(profile, params, g3):
    _, m, I1, I3 = _rev_data(params)
    f1, df1 = profile.f1(g3), profile.df1(g3)
    mu = revolution_measure_density(profile, params, g3)
    return -np.array([0.0, -m * f1 * I1 * (f1 * g3 - (1.0 - g3 * g3) * df1)]) / mu


@dataclass(frozen=True)
class YyTable:
    """Y(g3) and y(g3) on [-1, 1] with cubic Hermite interpolation."""

    grid: np.ndarray
    Y: np.ndarray
    y: np.ndarray
    spline: object = field(repr=False)
    order: int = 3

    def __call__(self, g3):
        v = self.spline(g3)
        return v[..., :4].reshape(np.shape(g3) + (2, 2)), v[..., 4:]

    def Y_at(self, g3):
        return self(g3)[0]

    def y_at(self, g3):
        return self(g3)[1]


def _yy_rhs(profile, params, sign):
    def f(t, z, p):
        g3 = sign * t
        G = G_matrix(profile, params, g3)
        b = b_vector(profile, params, g3)
        Y = z[:4].reshape(2, 2)
        return sign * np.concatenate([(G @ Y).ravel(), G @ z[4:] + b])
    return f


def solve_Yy(profile, params, rtol=1e-12, atol=1e-14, max_step=0.01):
    """Solve dY/dg3 = G Y, dy/dg3 = G y + b outward from g3 = 0 to both ends."""
    z0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    opts = IntegratorOptions(rtol=rtol, atol=atol, max_step=max_step)
    parts = []
    for sign in (-1.0, 1.0):
        tr = integrate(System(f=_yy_rhs(profile, params, sign), name="Yy"), z0, (0.0, 1.0), opts)
        parts.append((sign * tr.times, tr.states, sign * tr.derivs))
    (tm, zm, dm), (tp, zp, dp) = parts
    grid = np.concatenate([tm[::-1], tp[1:]])
    z = np.concatenate([zm[::-1], zp[1:]])
    dz = np.concatenate([dm[::-1], dp[1:]])
    return YyTable(grid, z[:, :4].reshape(-1, 2, 2), z[:, 4:], CubicHermiteSpline(grid, z, dz, axis=0))


def J_integrals(yy, params, s):
    sigma = params.sigma
    g3 = float(unit_gamma(s.gamma)[2])
    Y, y = yy(g3)
    K = np.array(K1K2(params, s))
    return tuple(float(v) for v in np.linalg.solve(Y, K - sigma * y))


# ------------------------------------------------------------------ homogeneous sphere


def homsphere_integrals(params, s):
    M, g = np.asarray(s.M), np.asarray(s.gamma)
    return float(M @ M), float(M @ g), moving_energy(params, s, "homsphere")


# ------------------------------------------------------------------ Liouville checks

FD_STEP = 1e-5


def _sphere_basis(g):
    a = np.cross(g, E3 if abs(g[2]) < 0.9 else np.array([1.0, 0.0, 0.0]))
    a /= np.linalg.norm(a)
    return a, np.cross(g, a)


def dlog_exp_form(log_inner, rest):
    """Directional derivative for log densities of the form ``-exp(log_inner) + rest``.

    Differencing ``log_inner`` and applying the chain rule keeps the check
    accurate where ``exp(log_inner)`` is huge (next to the singular parallel
    or the equator).
    """
    def dlog(yp, ym, y, h):
        return (-math.exp(log_inner(y)) * (log_inner(yp) - log_inner(ym)) + rest(yp) - rest(ym)) / (2 * h)
    return dlog


def liouville_residual(X, log_density, y, blocks, h=FD_STEP, dlog=None):
    """Relative residual of ``div(mu X) = 0`` at ``y`` by extrapolated central differences.

    ``X(y)`` is the vector field and ``log_density(y)`` the log of the
    density.  ``blocks`` lists ``(kind, slice)`` pairs with kind ``"R"`` for
    a Euclidean factor and ``"S2"`` for a unit-sphere factor; divergence on a
    sphere factor is taken along an orthonormal tangent frame with the
    other coordinates fixed.  Returns (residual, scale) where residual is
    |div X + <X, grad log mu>| divided by the sum of the absolute values of
    its terms.  ``dlog(y_plus, y_minus, y, h)`` overrides the central
    difference of ``log_density``.
    """
    y = np.asarray(y, dtype=float)
    Xy = X(y)
    terms = []
    for kind, sl in blocks:
        idx = np.arange(y.size)[sl]
        if kind == "R":
            dirs = [np.eye(y.size)[i] for i in idx]
        else:
            g = y[sl]
            a, b = _sphere_basis(g)
            dirs = []
            for t in (a, b):
                d = np.zeros(y.size)
                d[sl] = t
                dirs.append(d)
        for d in dirs:
            if kind == "S2":
                # move along the great circle so the point stays on the sphere
                def shift(eps, d=d):
                    z = y.copy()
                    g = y[sl]
                    z[sl] = math.cos(eps) * g + math.sin(eps) * d[sl]
                    return z
            else:
                def shift(eps, d=d):
                    return y + eps * d
            def central(k, shift=shift):
                yp, ym = shift(k), shift(-k)
                dX = (X(yp) - X(ym)) / (2 * k)
                if dlog is None:
                    return dX, (log_density(yp) - log_density(ym)) / (2 * k)
                return dX, dlog(yp, ym, y, k)

            # Richardson extrapolation of the steps h and 2h: fourth-order accurate
            (dX1, dL1), (dX2, dL2) = central(h), central(2 * h)
            dX = (4 * dX1 - dX2) / 3
            dL = (4 * dL1 - dL2) / 3
            terms.append(float(d @ dX))
            terms.append(float(d @ Xy) * dL)
    total = sum(terms)
    scale = sum(abs(t) for t in terms)
    return (abs(total) / scale if scale > 0 else abs(total)), scale


# ------------------------------------------------------------------ automatic selection

MOMENTUM_TOL = 1e-9
ENERGY_TOL = 1e-8
J_TOL = 1e-6
K_TOL = 1e-8
NORM_TOL = 1e-9
# most specific first; one moving energy is reported per scenario
_VARIANT_ORDER = ("homsphere", "axisymmetric", "translation", "rotating_plane", "general")


@dataclass(frozen=True)
class Integral:
    name: str
    fn: object = field(repr=False)
    tol: float = ENERGY_TOL
    # drift normalizer computed from the initial state; None means relative to |F(0)|
    scale: object = field(default=None, repr=False)


def _moving_energy_variant(params, s):
    for v in _VARIANT_ORDER:
        try:
            _check_variant(params, s, v)
        except VariantMismatch:
            continue
        return v
    return None


def applicable_integrals(params, s, system):
    """First integrals that hold for ``params`` along ``system`` ("reduced", "limit", "homsphere" or "full").

    ``s`` is a typed state of that system, used only to pick the variants.
    """
    shape, V, W = params.shape, params.V, params.W
    out = []
    if system == "homsphere":
        return [
            Integral("G2", lambda s: float(s.M @ s.M), MOMENTUM_TOL),
            Integral("f", lambda s: float(s.M @ s.gamma), MOMENTUM_TOL),
            Integral("E_mov_homsphere", lambda s: moving_energy(params, s, "homsphere"), ENERGY_TOL),
            Integral("U_dot_gamma", lambda s: float(s.U @ s.gamma), NORM_TOL),
            Integral("gamma_norm2", lambda s: float(s.gamma @ s.gamma), NORM_TOL),
        ]
    norm_m = lambda s: float(np.linalg.norm(s.M))
    if system == "full":
        if shape.is_sphere:
            for i, axis in enumerate(("x", "y", "z")):
                w = np.eye(3)[i]
                out.append(Integral(f"momentum_{axis}", lambda s, w=w: spatial_momentum(s, w), MOMENTUM_TOL, norm_m))
    elif shape.is_sphere:
        out += [Integral("M_norm2", lambda s: float(s.M @ s.M), MOMENTUM_TOL),
                Integral("M_dot_gamma", lambda s: float(s.M @ s.gamma), MOMENTUM_TOL, norm_m)]
    if system == "limit":
        # k = exp(-h) underflows away from the poles; the absolute drift of log k = -h is
        # the relative drift of k to first order
        out.append(Integral("log_k", lambda s: -math.exp(limit_log_h(params, s.gamma)), K_TOL, lambda s: 1.0))
        return out
    if V.is_zero and W.is_zero:
        out.append(Integral("energy", lambda s: _classical_energy(params, s), ENERGY_TOL))
    else:
        v = _moving_energy_variant(params, s)
        if v is not None:
            out.append(Integral(f"E_mov_{v}", lambda s, v=v: moving_energy(params, s, v), ENERGY_TOL))
    if shape.profile is not None and V.is_zero and params.cats_toy_e3:
        yy = solve_Yy(shape.profile, params)
        out += [Integral("J1", lambda s: J_integrals(yy, params, s)[0], J_TOL),
                Integral("J2", lambda s: J_integrals(yy, params, s)[1], J_TOL)]
    return out


def _classical_energy(params, s):
    if isinstance(s, dyn.FullState):
        return dyn.classical_energy(params, s)
    return moving_energy(params, s, "translation")


def integral_reports(params, states, system, integrals=None):
    """IntegralReport per applicable integral along a sequence of typed states."""
    states = list(states)
    integrals = applicable_integrals(params, states[0], system) if integrals is None else integrals
    out = []
    for it in integrals:
        vals = np.array([it.fn(s) for s in states])
        scale = None if it.scale is None else it.scale(states[0])
        out.append(IntegralReport.build(it.name, vals, it.tol, scale))
    return out
