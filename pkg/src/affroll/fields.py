"""Affine constraint data: a horizontal field on the plane and a tangent field on the body surface."""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import E3

FD_STEP = 1e-6


def fd_jacobian(fn, x, h=FD_STEP):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        cols.append((np.asarray(fn(x + dx)) - np.asarray(fn(x - dx))) / (2 * h))
    return np.column_stack(cols)


@dataclass(frozen=True)
class PlaneField:
    """``V_s(x) = (V1, V2, 0)`` in the spatial frame."""

    fn: Callable = field(repr=False)
    jac_fn: Optional[Callable] = field(default=None, repr=False)
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def jac_is_fd(self):
        return self.jac_fn is None

    @property
    def is_zero(self):
        return self.kind == "none"

    def eval(self, x):
        v = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        return np.array([v[0], v[1], 0.0])

    def jac(self, x):
        if self.jac_fn is None:
            return fd_jacobian(self.eval, x)
        return np.asarray(self.jac_fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class SurfaceField:
    """``W_b(rho)`` in the body frame, optionally bound to a shape.

    Binding a shape lets the field be read as a function of the vertical,
    ``W(gamma) = W_b(rho(gamma))``, which is how the dynamics consumes it.
    """

    fn: Callable = field(repr=False)
    jac_fn: Optional[Callable] = field(default=None, repr=False)
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    shape: object = field(default=None, repr=False)

    @property
    def jac_is_fd(self):
        return self.jac_fn is None

    @property
    def is_zero(self):
        return self.kind == "none"

    def bind(self, shape):
        return replace(self, shape=shape)

    def eval_body(self, rho):
        return np.asarray(self.fn(np.asarray(rho, dtype=float)), dtype=float)

    def jac_body(self, rho):
        if self.jac_fn is None:
            return fd_jacobian(self.eval_body, rho)
        return np.asarray(self.jac_fn(np.asarray(rho, dtype=float)), dtype=float)

    def _need_shape(self):
        if self.shape is None:
            raise ValueError("surface field is not bound to a shape; call bind(shape) first")
        return self.shape

    def eval_gamma(self, gamma):
        return self.eval_body(self._need_shape().rho_fn(np.asarray(gamma, dtype=float)))

    def jac_gamma(self, gamma):
        shape = self._need_shape()
        g = np.asarray(gamma, dtype=float)
        return self.jac_body(shape.rho_fn(g)) @ shape.drho_fn(g)


def no_plane():
    return PlaneField(lambda x: np.zeros(3), lambda x: np.zeros((3, 3)), kind="none")


def rotating_plane(eta):
    """Plane spinning at rate ``eta`` about the spatial origin: ``V = eta e3 x x``."""
    eta = float(eta)
    J = np.array([[0.0, -eta, 0.0], [eta, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return PlaneField(
        lambda x: np.array([-eta * x[1], eta * x[0], 0.0]),
        lambda x: J.copy(),
        kind="rotating",
        params={"eta": eta},
    )


def constant_plane(v1, v2):
    v = np.array([float(v1), float(v2), 0.0])
    return PlaneField(lambda x: v.copy(), lambda x: np.zeros((3, 3)), kind="constant", params={"v1": v[0], "v2": v[1]})


def stream_plane(modes, eta=0.0, v1=0.0, v2=0.0):
    """Divergence-free field from the stream function ``psi = sum a sin(k1 x1 + k2 x2 + phi)``.

    ``V = (d psi/dx2 - eta x2 + v1, -d psi/dx1 + eta x1 + v2)``; ``modes`` is a
    list of ``(a, k1, k2, phi)``.  The rotating and constant planes are the
    special cases without modes.
    """
    modes = np.asarray(modes, dtype=float).reshape(-1, 4)
    a, k1, k2, ph = modes.T
    eta, v1, v2 = float(eta), float(v1), float(v2)

    def fn(x):
        c = np.cos(k1 * x[0] + k2 * x[1] + ph)
        return np.array([np.sum(a * k2 * c) - eta * x[1] + v1, -np.sum(a * k1 * c) + eta * x[0] + v2, 0.0])

    def jac(x):
        s = np.sin(k1 * x[0] + k2 * x[1] + ph)
        J = np.zeros((3, 3))
        J[0, 0] = -np.sum(a * k2 * k1 * s)
        J[0, 1] = -np.sum(a * k2 * k2 * s) - eta
        J[1, 0] = np.sum(a * k1 * k1 * s) + eta
        J[1, 1] = np.sum(a * k1 * k2 * s)
        return J

    return PlaneField(fn, jac, kind="stream",
                      params={"modes": modes.tolist(), "eta": eta, "v1": v1, "v2": v2})


def custom_plane(fn, jac=None):
    return PlaneField(fn, jac, kind="custom")


def no_surface():
    return SurfaceField(lambda rho: np.zeros(3), lambda rho: np.zeros((3, 3)), kind="none")


def cats_toy(sigma, axis=E3):
    """Shell driven at rate ``sigma`` about a body axis: ``W_b(rho) = sigma rho x axis``."""
    sigma = float(sigma)
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError("cat's toy axis must be a unit vector")
    J = -sigma * np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    return SurfaceField(
        lambda rho: sigma * np.cross(rho, axis),
        lambda rho: J.copy(),
        kind="cats_toy",
        params={"sigma": sigma, "axis": [float(a) for a in axis]},
    )


def sphere_tangent(c, sigma=0.0, axis=E3):
    """Cat's toy plus the constant ``c`` projected on the tangent plane at ``rho``.

    ``W_b(rho) = sigma rho x axis + c - <c, rho> rho / |rho|^2``; tangent to any
    sphere centred at the origin of the body frame.
    """
    c = np.asarray(c, dtype=float)
    toy = cats_toy(sigma, axis)
    J0 = toy.jac_fn(None)

    def fn(rho):
        rr = rho @ rho
        return toy.fn(rho) + c - (c @ rho) / rr * rho

    def jac(rho):
        rr = rho @ rho
        cr = c @ rho
        return J0 - (np.outer(rho, c) + cr * np.eye(3)) / rr + 2.0 * cr / rr ** 2 * np.outer(rho, rho)

    return SurfaceField(fn, jac, kind="sphere_tangent",
                        params={"c": [float(x) for x in c], "sigma": toy.params["sigma"], "axis": toy.params["axis"]})


def custom_surface(fn, jac=None):
    return SurfaceField(fn, jac, kind="custom")


def gamma_field(fn, jac=None):
    """Tangent field on the unit sphere given directly as a function of ``gamma``."""
    from .shapes import balanced_sphere

    unit = balanced_sphere(1.0, 1.0, 1.0, 1.0, 1.0)
    body_jac = None if jac is None else (lambda rho: -np.asarray(jac(-rho)))
    return SurfaceField(lambda rho: fn(-rho), body_jac, kind="custom", shape=unit)


def div_plane(V, x):
    """Planar divergence dV1/dx1 + dV2/dx2."""
    J = V.jac(x)
    return float(J[0, 0] + J[1, 1])


def div_sphere(W, gamma):
    """Divergence on the unit sphere of ``gamma -> W(gamma)``.

    Uses ``Tr W' - gamma^T W' gamma`` with the Jacobian of any smooth extension
    of the field to R^3; the value does not depend on the extension.
    """
    g = np.asarray(gamma, dtype=float)
    J = W.jac_gamma(g)
    return float(np.trace(J) - g @ J @ g)
