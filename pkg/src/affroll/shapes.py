"""Body geometry: contact point as a function of the vertical, inertia data.

The contact point ``rho`` (body frame, measured from the center of mass) is
parametrized by the body-frame vertical ``gamma`` through the inverse Gauss
map, ``rho = n_b^{-1}(-gamma)``.  Each shape carries two raw callables,
``rho_fn`` and ``drho_fn``, which accept any 3-vector (they are the smooth
extension used for derivatives); the public evaluators below validate and
renormalize ``gamma`` first.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ShapeODEViolation

UNIT_TOL = 1e-9
RENORMALIZE_TOL = 1e-6
RESIDUAL_TOL = 1e-8
RESIDUAL_GRID = 201


@dataclass(frozen=True)
class RevolutionProfile:
    """Profile functions of a body of revolution.

    ``rho(gamma) = (f1(g3) g1, f1(g3) g2, f2(g3))``.  The four callables must
    satisfy ``f2' g3 - f1 g3 + (1 - g3^2) f1' = 0``.  ``f1`` must not vanish on
    [-1, 1]; its sign fixes which side of the surface is in contact, and a
    physical body (contact point below the center of mass) has ``f1 < 0``.
    """

    f1: Callable[[float], float]
    df1: Callable[[float], float]
    f2: Callable[[float], float]
    df2: Callable[[float], float]
    name: str = "custom"
    params: dict = field(default_factory=dict)


def constant_curvature_profile(c, a=0.0):
    """Sphere-shaped profile ``f1 = c``, ``f2 = c*g3 + a``."""
    c, a = float(c), float(a)
    return RevolutionProfile(
        f1=lambda g3: c + 0.0 * g3,
        df1=lambda g3: 0.0 * g3,
        f2=lambda g3: c * g3 + a,
        df2=lambda g3: c + 0.0 * g3,
        name="constant_curvature",
        params={"c": c, "a": a},
    )


def routh_profile(R, a):
    """Routh's sphere: radius ``R``, center of mass ``a`` below the geometric center along E3.

    Geometric center sits at ``a*E3`` from the center of mass, so the contact
    point is ``a*E3 - R*gamma``, i.e. ``f1 = -R``, ``f2 = a - R*g3``.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if abs(a) >= R:
        raise ValueError("center of mass must lie inside the sphere (|a| < R)")
    p = constant_curvature_profile(-R, a)
    return RevolutionProfile(p.f1, p.df1, p.f2, p.df2, name="routh", params={"R": float(R), "a": float(a)})


def ellipsoid_profile(b, c, a=0.0):
    """Ellipsoid of revolution with equatorial semi-axis ``b`` and polar semi-axis ``c``.

    ``a`` shifts the geometric center along E3 as in :func:`routh_profile`.
    """
    b2, c2 = float(b) ** 2, float(c) ** 2
    k = c2 - b2

    def D(g3):
        return np.sqrt(b2 + k * g3 * g3)

    return RevolutionProfile(
        f1=lambda g3: -b2 / D(g3),
        df1=lambda g3: b2 * k * g3 / D(g3) ** 3,
        f2=lambda g3: a - c2 * g3 / D(g3),
        df2=lambda g3: -b2 * c2 / D(g3) ** 3,
        name="ellipsoid",
        params={"b": float(b), "c": float(c), "a": float(a)},
    )


def polynomial_profile(f1, f2):
    """Profile from coefficient lists in increasing powers of ``g3``; no consistency is implied."""
    p1 = np.polynomial.Polynomial(np.asarray(f1, dtype=float))
    p2 = np.polynomial.Polynomial(np.asarray(f2, dtype=float))
    d1, d2 = p1.deriv(), p2.deriv()
    return RevolutionProfile(
        f1=p1, df1=d1, f2=p2, df2=d2,
        name="polynomial",
        params={"f1": [float(c) for c in p1.coef], "f2": [float(c) for c in p2.coef]},
    )


def shape_ode_residual(profile, g3):
    """``f2' g3 - f1 g3 + (1 - g3^2) f1'``; zero for a consistent profile."""
    return profile.df2(g3) * g3 - profile.f1(g3) * g3 + (1.0 - g3 * g3) * profile.df1(g3)


def chebyshev_grid(n=RESIDUAL_GRID):
    k = np.arange(n)
    return np.cos(np.pi * (2 * k + 1) / (2 * n))[::-1]


def check_profile(profile, tol=RESIDUAL_TOL):
    """Raise ShapeODEViolation unless the profile passes the residual grid check."""
    grid = chebyshev_grid()
    res = np.array([shape_ode_residual(profile, g) for g in grid], dtype=float)
    worst = float(np.max(np.abs(res)))
    if not np.isfinite(worst) or worst > tol:
        raise ShapeODEViolation(f"shape_ode_residual reaches {worst:.3e} (tolerance {tol:.0e})")
    f1 = np.array([profile.f1(g) for g in np.concatenate([grid, [-1.0, 1.0]])], dtype=float)
    if np.any(f1 == 0.0) or not (np.all(f1 > 0) or np.all(f1 < 0)):
        raise ShapeODEViolation("f1 must keep a constant nonzero sign on [-1, 1]")
    return worst


@dataclass(frozen=True)
class BodyShape:
    kind: str
    m: float
    inertia: np.ndarray
    rho_fn: Callable = field(repr=False)
    drho_fn: Callable = field(repr=False)
    radius: Optional[float] = None
    profile: Optional[RevolutionProfile] = None

    @property
    def is_sphere(self):
        return self.kind in ("balanced_sphere", "homogeneous_sphere")

    @property
    def is_axisymmetric(self):
        # every built-in surface is symmetric about E3; the mass distribution decides
        return bool(self.inertia[0] == self.inertia[1])


def _check_mass(m, inertia):
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    if not np.all(np.asarray(inertia) > 0):
        raise ValueError(f"moments of inertia must be positive, got {inertia}")


def balanced_sphere(m, I1, I2, I3, r):
    """Sphere of radius ``r`` whose center of mass is its geometric center."""
    inertia = np.array([I1, I2, I3], dtype=float)
    _check_mass(m, inertia)
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    r = float(r)
    minus_r_id = -r * np.eye(3)
    return BodyShape(
        kind="balanced_sphere",
        m=float(m),
        inertia=inertia,
        rho_fn=lambda g: -r * np.asarray(g, dtype=float),
        drho_fn=lambda g: minus_r_id.copy(),
        radius=r,
    )


def homogeneous_sphere(m, I, r):
    s = balanced_sphere(m, I, I, I, r)
    return BodyShape("homogeneous_sphere", s.m, s.inertia, s.rho_fn, s.drho_fn, radius=s.radius)


def revolution_body(m, I1, I3, profile):
    """Body of revolution about E3 with ``I2 = I1``."""
    inertia = np.array([I1, I1, I3], dtype=float)
    _check_mass(m, inertia)
    check_profile(profile)
    f1, df1, f2, df2 = profile.f1, profile.df1, profile.f2, profile.df2

    def rho_fn(g):
        a = f1(g[2])
        return np.array([a * g[0], a * g[1], f2(g[2])])

    def drho_fn(g):
        a, da = f1(g[2]), df1(g[2])
        return np.array([[a, 0.0, da * g[0]], [0.0, a, da * g[1]], [0.0, 0.0, df2(g[2])]])

    return BodyShape("revolution", float(m), inertia, rho_fn, drho_fn, profile=profile)


def unit_gamma(gamma):
    """Validate a unit vertical, silently renormalizing small drift."""
    g = np.asarray(gamma, dtype=float)
    n = np.linalg.norm(g)
    if not abs(n - 1.0) <= RENORMALIZE_TOL:
        raise DomainError(f"|gamma| = {n!r} is not unit within {RENORMALIZE_TOL:g}")
    return g / n if abs(n - 1.0) > 0.0 else g


def gauss_inverse(shape, gamma):
    """Contact point ``rho`` for the body-frame vertical ``gamma``."""
    return np.asarray(shape.rho_fn(unit_gamma(gamma)), dtype=float)


def rho_dot(shape, gamma, Omega):
    """Rate of change of ``rho`` along ``gamma' = gamma x Omega``."""
    g = unit_gamma(gamma)
    return shape.drho_fn(g) @ np.cross(g, Omega)


def normal_defect(shape, gamma):
    """Largest |<d rho . v, gamma>| over a tangent basis v of the unit sphere at gamma.

    Zero when the surface normal at ``rho(gamma)`` is parallel to ``gamma``.
    """
    g = unit_gamma(gamma)
    t1 = np.cross(g, [1.0, 0.0, 0.0] if abs(g[0]) < 0.9 else [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(g, t1)
    J = shape.drho_fn(g)
    return max(abs(g @ (J @ t1)), abs(g @ (J @ t2)))
