"""Hot right-hand sides, projections and section functions on flat arrays.

Every function here has the signature used by the integrator cores,
``f(t, y, p) -> dy``, ``proj(y, p) -> y`` and ``sec(y, q) -> (value, gate)``,
and is compiled by numba unless ``AFFROLL_DISABLE_JIT`` is set.

Parameter layouts:

* sphere with cat's toy (balanced sphere, V = 0): ``p = [I1, I2, I3, m, r, sigma]``
* the same restricted to ``M = lam * gamma``: ``p = [I1, I2, I3, m, r, sigma, lam]``
* homogeneous sphere on a rotating plane: ``p = [I, m, r, eta, sigma]``
* full balanced sphere with a stream-function plane field and a tangent surface field:
  ``p = [I1, I2, I3, m, r, eta, v1, v2, sigma, axis (3), c (3), n, (a, k1, k2, phi) * n]``
"""
import math

import numpy as np

from ._accel import maybe_njit


@maybe_njit
def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@maybe_njit
def _cat_parts(y, p):
    """Return (A diag, gamma, zeta-direction, denominator) for the balanced sphere."""
    mr2 = p[3] * p[4] * p[4]
    A = np.empty(3)
    A[0] = 1.0 / (p[0] + mr2)
    A[1] = 1.0 / (p[1] + mr2)
    A[2] = 1.0 / (p[2] + mr2)
    g = y[3:6]
    # gamma x (gamma x E3)
    gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
    c = np.empty(3)
    c[0] = g[2] * g[0]
    c[1] = g[2] * g[1]
    c[2] = g[2] * g[2] - gg
    den = 1.0 - mr2 * (A[0] * g[0] * g[0] + A[1] * g[1] * g[1] + A[2] * g[2] * g[2])
    return A, g, c, den, mr2


@maybe_njit
def _apply_inverse(A, g, n, den, mr2):
    """``A (n + mr^2 <n, A g> / den * g)``."""
    s = mr2 * (n[0] * A[0] * g[0] + n[1] * A[1] * g[1] + n[2] * A[2] * g[2]) / den
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i] * (n[i] + s * g[i])
    return out


@maybe_njit
def cat_omega(y, p):
    """Body angular velocity of the balanced sphere with a cat's toy about E3."""
    A, g, c, den, mr2 = _cat_parts(y, p)
    n = y[0:3] + mr2 * p[5] * c
    return _apply_inverse(A, g, n, den, mr2)


@maybe_njit
def cat_omega_split(y, p):
    """(Omega_l, Omega_a): momentum part and cat's-toy part of Omega."""
    A, g, c, den, mr2 = _cat_parts(y, p)
    om_l = _apply_inverse(A, g, y[0:3].copy(), den, mr2)
    om_a = _apply_inverse(A, g, mr2 * p[5] * c, den, mr2)
    return om_l, om_a


@maybe_njit
def cat_rhs(t, y, p):
    om = cat_omega(y, p)
    out = np.empty(6)
    out[0:3] = cross(y[0:3], om)
    out[3:6] = cross(y[3:6], om)
    return out


@maybe_njit
def limit_rhs(t, y, p):
    """Small-momentum limit in rescaled time ``tau = sigma t``."""
    A, g, c, den, mr2 = _cat_parts(y, p)
    om = _apply_inverse(A, g, mr2 * c, den, mr2)
    out = np.empty(6)
    out[0:3] = cross(y[0:3], om)
    out[3:6] = cross(g, om)
    return out


@maybe_njit
def classical_rhs(t, y, p):
    """Balanced sphere with the cat's-toy term dropped (classical rolling)."""
    A, g, c, den, mr2 = _cat_parts(y, p)
    om = _apply_inverse(A, g, y[0:3].copy(), den, mr2)
    out = np.empty(6)
    out[0:3] = cross(y[0:3], om)
    out[3:6] = cross(g, om)
    return out


@maybe_njit
def mparallel_rhs(t, y, p):
    """``gamma' = gamma x Omega(lam gamma, gamma)``; ``y`` holds gamma only."""
    z = np.empty(6)
    z[0:3] = p[6] * y[0:3]
    z[3:6] = y[0:3]
    om = cat_omega(z, p)
    return cross(y[0:3], om)


@maybe_njit
def homsphere_omega(y, p):
    I, m, r, eta, sigma = p[0], p[1], p[2], p[3], p[4]
    M = y[0:3]
    g = y[3:6]
    U = y[6:9]
    f = M[0] * g[0] + M[1] * g[1] + M[2] * g[2]
    gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
    gU = g[0] * U[0] + g[1] * U[1] + g[2] * U[2]
    mr2 = m * r * r
    out = np.empty(3)
    for i in range(3):
        # gamma x (U x gamma) = U |g|^2 - g <g,U>;  gamma x (gamma x E3) = g g3 - E3 |g|^2
        gxg_e3 = g[i] * g[2] - (gg if i == 2 else 0.0)
        out[i] = (M[i] + mr2 / I * f * g[i] + m * r * eta * (U[i] * gg - g[i] * gU)
                  + mr2 * sigma * gxg_e3) / (I + mr2)
    return out


@maybe_njit
def homsphere_rhs(t, y, p):
    r, eta, sigma = p[2], p[3], p[4]
    om = homsphere_omega(y, p)
    g = y[3:6]
    U = y[6:9]
    out = np.empty(9)
    out[0:3] = cross(y[0:3], om)
    gxo = cross(g, om)
    out[3:6] = gxo
    uxo = cross(U, om)
    uxg = cross(U, g)
    out[6] = -r * gxo[0] + uxo[0] - r * sigma * g[1] - eta * uxg[0]
    out[7] = -r * gxo[1] + uxo[1] + r * sigma * g[0] - eta * uxg[1]
    out[8] = -r * gxo[2] + uxo[2] - eta * uxg[2]
    return out


@maybe_njit
def _sphere_slip(B, u, rho, p):
    """``B^T V(u + B rho) + W_b(rho)`` for the field family of :func:`full_sphere_rhs`."""
    x0 = u[0] + B[0, 0] * rho[0] + B[0, 1] * rho[1] + B[0, 2] * rho[2]
    x1 = u[1] + B[1, 0] * rho[0] + B[1, 1] * rho[1] + B[1, 2] * rho[2]
    V0 = -p[5] * x1 + p[6]
    V1 = p[5] * x0 + p[7]
    n = int(p[15])
    for k in range(n):
        a, k1, k2, ph = p[16 + 4 * k], p[17 + 4 * k], p[18 + 4 * k], p[19 + 4 * k]
        c = math.cos(k1 * x0 + k2 * x1 + ph)
        V0 += a * k2 * c
        V1 -= a * k1 * c
    w = p[8] * cross(rho, p[9:12])
    rr = rho[0] * rho[0] + rho[1] * rho[1] + rho[2] * rho[2]
    cr = (p[12] * rho[0] + p[13] * rho[1] + p[14] * rho[2]) / rr
    out = np.empty(3)
    for i in range(3):
        out[i] = B[0, i] * V0 + B[1, i] * V1 + w[i] + p[12 + i] - cr * rho[i]
    return out


@maybe_njit
def full_sphere_rhs(t, y, p):
    """Full (M, B, u) dynamics of a balanced sphere; gravity does no work on it."""
    m, r = p[3], p[4]
    mr2 = m * r * r
    B = y[3:12].reshape(3, 3)
    u = y[12:15]
    g = B[2]
    rho = -r * g
    slip = _sphere_slip(B, u, rho, p)
    A = np.empty(3)
    for i in range(3):
        A[i] = 1.0 / (p[i] + mr2)
    den = 1.0 - mr2 * (A[0] * g[0] * g[0] + A[1] * g[1] * g[1] + A[2] * g[2] * g[2])
    n = y[0:3] + m * cross(rho, slip)
    om = _apply_inverse(A, g, n, den, mr2)
    rho_dot = -r * cross(g, om)
    oxr = cross(om, rho)
    out = np.empty(15)
    out[0:3] = cross(y[0:3], om) + m * cross(rho_dot, oxr) + m * cross(slip, rho_dot + oxr)
    for i in range(3):
        out[3 + 3 * i:6 + 3 * i] = cross(B[i], om)
    v = cross(rho, om) + slip
    for i in range(3):
        out[12 + i] = B[i, 0] * v[0] + B[i, 1] * v[1] + B[i, 2] * v[2]
    return out


@maybe_njit
def proj_full_sphere(y, p):
    """Re-orthonormalize B and restore the contact height ``u3 = r``."""
    out = y.copy()
    B = y[3:12].reshape(3, 3).copy()
    for _ in range(3):
        for i in range(2):
            b = B[i]
            for j in range(i):
                b = b - (b[0] * B[j, 0] + b[1] * B[j, 1] + b[2] * B[j, 2]) * B[j]
            B[i] = b / math.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
        B[2] = cross(B[0], B[1])
    out[3:12] = B.ravel()
    out[14] = p[4]
    return out


@maybe_njit
def no_proj(y, p):
    return y


@maybe_njit
def proj_gamma_at3(y, p):
    """Renormalize the vertical stored in ``y[3:6]``."""
    n = math.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
    out = y.copy()
    out[3:6] = y[3:6] / n
    return out


@maybe_njit
def proj_gamma_only(y, p):
    n = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    return y / n


@maybe_njit
def proj_homsphere(y, p):
    """Renormalize gamma and restore <U, gamma> = r."""
    out = proj_gamma_at3(y, p)
    g = out[3:6]
    d = p[2] - (out[6] * g[0] + out[7] * g[1] + out[8] * g[2])
    out[6:9] = out[6:9] + d * g
    return out


@maybe_njit
def angle_g(y):
    """Sine and cosine of the Andoyer angle g of (M, gamma) stored in ``y[0:6]``.

    ``g = atan2(G (M2 g1 - M1 g2), f L - G^2 g3)`` with ``G = |M|``, ``L = M3``
    and ``f = <M, gamma>``.
    """
    M1, M2, M3 = y[0], y[1], y[2]
    g1, g2, g3 = y[3], y[4], y[5]
    G2 = M1 * M1 + M2 * M2 + M3 * M3
    G = math.sqrt(G2)
    f = M1 * g1 + M2 * g2 + M3 * g3
    num = G * (M2 * g1 - M1 * g2)
    den = f * M3 - G2 * g3
    h = math.hypot(num, den)
    return num / h, den / h


@maybe_njit
def sec_g(y, q):
    """Section ``g = q[0]`` as (sin(g - g0), cos(g - g0))."""
    sg, cg = angle_g(y)
    s0, c0 = math.sin(q[0]), math.cos(q[0])
    return sg * c0 - cg * s0, cg * c0 + sg * s0


@maybe_njit
def sec_plane(y, q):
    """Section ``<y - q[:d], q[d:2d]> = 0`` through a point with a normal; gated by distance.

    ``q = [point (d), normal (d), radius]``; the gate is positive inside the ball.
    """
    d = y.shape[0]
    s = 0.0
    dist2 = 0.0
    for i in range(d):
        diff = y[i] - q[i]
        s += diff * q[d + i]
        dist2 += diff * diff
    return s, q[2 * d] * q[2 * d] - dist2
