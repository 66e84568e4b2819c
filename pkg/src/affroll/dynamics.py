"""Equations of motion: momentum/angular-velocity inversion and every right-hand side.

State vectors are flat float arrays when handed to the integrator:

* ``FullState``           ``[M (3), B rows (9), u (3)]``
* ``ReducedState``        ``[M (3), gamma (3)]``
* ``SphereReducedState``  ``[M (3), gamma (3), U (3)]``

Right-hand sides for the balanced sphere with a cat's toy about E3 and for
the homogeneous sphere on a rotating plane have compiled kernels
(:mod:`affroll.kernels`); everything else runs through the general formulas
below, which accept arbitrary shapes and fields.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import E3, orthonormalize
from .errors import SingularInertia, VariantMismatch
from .fields import PlaneField, SurfaceField, no_plane, no_surface
from .integrate import System
from .shapes import BodyShape, unit_gamma

SINGULAR_TOL = 1e-12


# ------------------------------------------------------------------ states


@dataclass
class FullState:
    M: np.ndarray
    B: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.u = np.asarray(self.u, dtype=float)

    @property
    def gamma(self):
        return self.B[2]

    def to_array(self):
        return np.concatenate([self.M, self.B.ravel(), self.u])

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:12].reshape(3, 3).copy(), y[12:15].copy())


@dataclass
class ReducedState:
    M: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)

    def to_array(self):
        return np.concatenate([self.M, self.gamma])

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy())


@dataclass
class SphereReducedState:
    M: np.ndarray
    gamma: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.U = np.asarray(self.U, dtype=float)

    def to_array(self):
        return np.concatenate([self.M, self.gamma, self.U])

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:9].copy())


@dataclass(frozen=True)
class ScenarioParams:
    """Body, constraint fields and gravity.  ``W`` is bound to ``shape`` on construction."""

    shape: BodyShape
    V: PlaneField = field(default_factory=no_plane)
    W: SurfaceField = field(default_factory=no_surface)
    g: float = 0.0

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError(f"gravity must be non-negative, got {self.g}")
        object.__setattr__(self, "W", self.W.bind(self.shape))

    @property
    def eta(self):
        return self.V.params.get("eta", 0.0) if self.V.kind == "rotating" else 0.0

    @property
    def sigma(self):
        return self.W.params.get("sigma", 0.0) if self.W.kind == "cats_toy" else 0.0

    @property
    def cats_toy_e3(self):
        """True when W is absent or a cat's toy about E3."""
        if self.W.kind == "none":
            return True
        return self.W.kind == "cats_toy" and np.allclose(self.W.params["axis"], E3, atol=0.0, rtol=0.0)


# ------------------------------------------------------------------ inversion


def A_matrix(shape, gamma):
    rho = shape.rho_fn(unit_gamma(gamma))
    return np.diag(1.0 / (shape.inertia + shape.m * (rho @ rho)))


def _invert(shape, rho, N):
    """``A (N + m <N, A rho> / (1 - m <A rho, rho>) rho)``."""
    m = shape.m
    a = 1.0 / (shape.inertia + m * (rho @ rho))
    Arho = a * rho
    den = 1.0 - m * (Arho @ rho)
    if den <= SINGULAR_TOL:
        raise SingularInertia(f"1 - m<A rho, rho> = {den:.3e}")
    return a * (N + (m * (N @ Arho) / den) * rho)


def _slip_body(params, B, u, rho):
    """``B^{-1} V_s(x) + W_b(rho)`` with ``x = u + B rho``."""
    w = params.W.eval_body(rho)
    if params.V.is_zero:
        return w
    x = u + B @ rho
    return B.T @ params.V.eval(x) + w


def momentum_from_omega(params, B, u, Omega):
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    rho = params.shape.rho_fn(unit_gamma(B[2]))
    m = params.shape.m
    return params.shape.inertia * Omega + m * np.cross(
        rho, np.cross(Omega, rho) - _slip_body(params, B, np.asarray(u, dtype=float), rho))


def omega_from_momentum(params, B, u, M):
    B = np.asarray(B, dtype=float)
    rho = params.shape.rho_fn(unit_gamma(B[2]))
    zeta = params.shape.m * np.cross(rho, _slip_body(params, B, np.asarray(u, dtype=float), rho))
    return _invert(params.shape, rho, np.asarray(M, dtype=float) + zeta)


def omega_reduced(params, M, gamma):
    """Angular velocity for V = 0, a function of (M, gamma) only."""
    rho = params.shape.rho_fn(gamma)
    zeta = params.shape.m * np.cross(rho, params.W.eval_body(rho))
    return _invert(params.shape, rho, np.asarray(M, dtype=float) + zeta)


def holonomic_u3(shape, gamma):
    g = unit_gamma(gamma)
    return float(-(shape.rho_fn(g) @ g))


# ------------------------------------------------------------------ full system


def _full_f(t, y, params):
    shape = params.shape
    M = y[0:3]
    B = y[3:12].reshape(3, 3)
    u = y[12:15]
    gamma = B[2]
    rho = shape.rho_fn(gamma)
    slip = _slip_body(params, B, u, rho)
    m = shape.m
    Om = _invert(shape, rho, M + m * np.cross(rho, slip))
    rho_dot = shape.drho_fn(gamma) @ np.cross(gamma, Om)
    om_x_rho = np.cross(Om, rho)
    M_dot = (np.cross(M, Om) + m * np.cross(rho_dot, om_x_rho) + m * params.g * np.cross(rho, gamma)
             + m * np.cross(slip, rho_dot + om_x_rho))
    B_dot = B @ np.array([[0.0, -Om[2], Om[1]], [Om[2], 0.0, -Om[0]], [-Om[1], Om[0], 0.0]])
    u_dot = B @ (np.cross(rho, Om) + slip)
    return np.concatenate([M_dot, B_dot.ravel(), u_dot])


def full_rhs(params, s):
    """Time derivative of a :class:`FullState`, returned as a FullState of rates."""
    return FullState.from_array(_full_f(0.0, s.to_array(), params))


def _full_proj(y, params):
    out = y.copy()
    B = orthonormalize(y[3:12].reshape(3, 3))
    out[3:12] = B.ravel()
    out[14] = -(params.shape.rho_fn(B[2]) @ B[2])
    return out


def full_sphere_p(params):
    """Kernel parameters for :func:`kernels.full_sphere_rhs`, or None when the fields fall outside its family."""
    shape = params.shape
    V, W = params.V, params.W
    if not shape.is_sphere or V.kind not in ("none", "rotating", "constant", "stream"):
        return None
    if W.kind not in ("none", "cats_toy", "sphere_tangent"):
        return None
    vp, wp = V.params, W.params
    modes = np.asarray(vp.get("modes", []), dtype=float).reshape(-1, 4)
    head = [*shape.inertia, shape.m, shape.radius,
            vp.get("eta", 0.0), vp.get("v1", 0.0), vp.get("v2", 0.0),
            wp.get("sigma", 0.0), *wp.get("axis", E3), *wp.get("c", (0.0, 0.0, 0.0)), len(modes)]
    return np.concatenate([np.array(head, dtype=float), modes.ravel()])


def full_system(params):
    """Full (M, B, u) system; compiled for balanced spheres with catalogue fields."""
    p = full_sphere_p(params)
    if p is not None:
        return System(f=kernels.full_sphere_rhs, p=p, proj=kernels.proj_full_sphere, jit=True,
                      unpack=FullState.from_array, name="full_sphere")
    return System(f=_full_f, p=params, proj=_full_proj, jit=False,
                  unpack=FullState.from_array, name="full")


def center_of_mass_velocity(params, s):
    """Spatial velocity of the center of mass, ``u'``."""
    B, u = s.B, s.u
    rho = params.shape.rho_fn(unit_gamma(B[2]))
    Om = omega_from_momentum(params, B, u, s.M)
    return B @ (np.cross(rho, Om) + _slip_body(params, B, u, rho))


def classical_energy(params, s):
    """Kinetic plus potential energy of a FullState."""
    shape = params.shape
    Om = omega_from_momentum(params, s.B, s.u, s.M)
    gamma = unit_gamma(s.B[2])
    ud = center_of_mass_velocity(params, s)
    return float(0.5 * Om @ (shape.inertia * Om) + 0.5 * shape.m * ud @ ud
                 - shape.m * params.g * (shape.rho_fn(gamma) @ gamma))


# ------------------------------------------------------------------ reduced (V = 0)


def _require_v0(params):
    if not params.V.is_zero:
        raise VariantMismatch("the reduced system requires V = 0")


def _reduced_f(t, y, params):
    shape = params.shape
    M = y[0:3]
    gamma = y[3:6]
    rho = shape.rho_fn(gamma)
    w = params.W.eval_body(rho)
    m = shape.m
    Om = _invert(shape, rho, M + m * np.cross(rho, w))
    gxo = np.cross(gamma, Om)
    rho_dot = shape.drho_fn(gamma) @ gxo
    om_x_rho = np.cross(Om, rho)
    M_dot = (np.cross(M, Om) + m * np.cross(rho_dot, om_x_rho) + m * params.g * np.cross(rho, gamma)
             + m * np.cross(w, rho_dot + om_x_rho))
    return np.concatenate([M_dot, gxo])


def reduced_rhs_V0(params, s):
    _require_v0(params)
    return ReducedState.from_array(_reduced_f(0.0, s.to_array(), params))


def _cat_p(params):
    """Kernel parameter array for a balanced sphere with (optional) cat's toy about E3."""
    shape = params.shape
    if not shape.is_sphere:
        raise VariantMismatch("balanced sphere required")
    if not params.cats_toy_e3:
        raise VariantMismatch("cat's toy about E3 required")
    return np.array([*shape.inertia, shape.m, shape.radius, params.sigma])


def _sphere_f(t, y, params):
    M = y[0:3]
    gamma = y[3:6]
    Om = omega_reduced(params, M, gamma)
    return np.concatenate([np.cross(M, Om), np.cross(gamma, Om)])


def chaplygin_sphere_rhs(params, s):
    """``M' = M x Omega``, ``gamma' = gamma x Omega`` for a balanced sphere with any W and V = 0."""
    if not params.shape.is_sphere:
        raise VariantMismatch("balanced sphere required")
    _require_v0(params)
    return ReducedState.from_array(_sphere_f(0.0, s.to_array(), params))


def reduced_system(params):
    """Integrable bundle for the V = 0 reduced dynamics; uses the compiled kernel when possible."""
    _require_v0(params)
    if params.shape.is_sphere and params.cats_toy_e3:
        return System(f=kernels.cat_rhs, p=_cat_p(params), proj=kernels.proj_gamma_at3, jit=True,
                      unpack=ReducedState.from_array, name="chaplygin_sphere")
    f = _sphere_f if params.shape.is_sphere else _reduced_f
    return System(f=f, p=params, proj=_proj_gamma_py, jit=False,
                  unpack=ReducedState.from_array, name="reduced")


def _proj_gamma_py(y, p):
    out = y.copy()
    out[3:6] /= np.linalg.norm(out[3:6])
    return out


# ------------------------------------------------------------------ M parallel to gamma


def mparallel_rhs(params, lam, gamma):
    """``gamma' = gamma x Omega(lam gamma, gamma)``."""
    if not params.shape.is_sphere:
        raise VariantMismatch("balanced sphere required")
    g = np.asarray(gamma, dtype=float)
    return np.cross(g, omega_reduced(params, lam * g, g))


def mparallel_system(params, lam):
    p = np.append(_cat_p(params), float(lam))
    return System(f=kernels.mparallel_rhs, p=p, proj=kernels.proj_gamma_only, jit=True, name="mparallel")


# ------------------------------------------------------------------ limit system


def omega_split(params, s):
    """(Omega_l, Omega_a): parts of Omega driven by M and by the surface field."""
    if not params.shape.is_sphere:
        raise VariantMismatch("balanced sphere required")
    shape = params.shape
    rho = shape.rho_fn(s.gamma)
    zeta = shape.m * np.cross(rho, params.W.eval_body(rho))
    return _invert(shape, rho, s.M), _invert(shape, rho, zeta)


def limit_rhs(params, s):
    """Rescaled-time limit ``M' = M x Om_a/sigma``, ``gamma' = gamma x Om_a/sigma``."""
    sigma = params.sigma
    if sigma == 0.0:
        raise VariantMismatch("limit system needs a nonzero cat's toy rate")
    _om_l, om_a = omega_split(params, s)
    om = om_a / sigma
    return ReducedState(np.cross(s.M, om), np.cross(s.gamma, om))


def limit_system(params):
    return System(f=kernels.limit_rhs, p=_cat_p(params), proj=kernels.proj_gamma_at3, jit=True,
                  unpack=ReducedState.from_array, name="limit")


def classical_sphere_system(params):
    """Balanced sphere with the cat's toy switched off."""
    return System(f=kernels.classical_rhs, p=_cat_p(params), proj=kernels.proj_gamma_at3, jit=True,
                  unpack=ReducedState.from_array, name="classical_sphere")


# ------------------------------------------------------------------ homogeneous sphere


def _hom_p(params):
    shape = params.shape
    if shape.kind != "homogeneous_sphere":
        raise VariantMismatch("homogeneous sphere required")
    if params.V.kind not in ("none", "rotating") or not params.cats_toy_e3:
        raise VariantMismatch("rotating plane and cat's toy about E3 required")
    return np.array([shape.inertia[0], shape.m, shape.radius, params.eta, params.sigma])


def omega_homsphere(params, s):
    """Closed-form angular velocity of the homogeneous sphere as a function of (M, gamma, U)."""
    return kernels.homsphere_omega(s.to_array(), _hom_p(params))


def homsphere_reduced_rhs(params, s):
    return SphereReducedState.from_array(kernels.homsphere_rhs(0.0, s.to_array(), _hom_p(params)))


def homsphere_system(params):
    return System(f=kernels.homsphere_rhs, p=_hom_p(params), proj=kernels.proj_homsphere, jit=True,
                  unpack=SphereReducedState.from_array, name="homsphere")


def full_to_sphere_reduced(s):
    """(M, gamma, U) with ``U = B^{-1} u``."""
    return SphereReducedState(s.M.copy(), s.B[2].copy(), s.B.T @ s.u)
