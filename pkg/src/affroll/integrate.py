"""Adaptive Dormand-Prince 5(4) integration with projection and section events.

The stepping loops are plain functions over flat float arrays and are
compiled twice when numba is available: ``*_jit`` for kernels from
:mod:`affroll.kernels`, and the interpreted original for arbitrary Python
right-hand sides.  Both produce identical steps for identical inputs.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from ._accel import maybe_njit
from .errors import StepSizeUnderflow
from . import kernels

MIN_STEP = 1e-14

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order weights minus the embedded fourth-order ones
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

OK, UNDERFLOW, MAX_STEPS, T_MAX = 0, 1, 2, 3


def _dp_step(f, t, y, h, k1, p):
    k2 = f(t + C2 * h, y + h * (A21 * k1), p)
    k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2), p)
    k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3), p)
    k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), p)
    k6 = f(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), p)
    y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    k7 = f(t + h, y_new, p)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    return y_new, k7, err


def _err_norm(err, y, y_new, rtol, atol):
    s = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        e = err[i] / sc
        s += e * e
    v = math.sqrt(s / n)
    if v != v:
        return math.inf
    return v


def _initial_step(f, t, y, f0, p, rtol, atol, max_step):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y + h0 * f0
    f1 = f(t + h0, y1, p)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def _next_h(h, err):
    if err == 0.0:
        fac = 5.0
    else:
        fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
    return h * fac


def _solve_core(f, proj, p, t0, y0, t1, rtol, atol, h0, max_step, max_steps):
    """Integrate from t0 to t1 and record every accepted step.

    Returns (ts, ys, fs, n_accepted, n_rejected, status).
    """
    n = y0.shape[0]
    cap = 256
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    fs = np.empty((cap, n))
    y = proj(y0.copy(), p)
    t = t0
    k1 = f(t, y, p)
    ts[0] = t
    ys[0] = y
    fs[0] = k1
    count = 1
    h = h0 if h0 > 0 else _initial_step(f, t, y, k1, p, rtol, atol, max_step)
    n_acc = 0
    n_rej = 0
    status = OK
    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = MAX_STEPS
            break
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        if h < MIN_STEP * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        y_new, k_new, err = _dp_step(f, t, y, h, k1, p)
        en = _err_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            t = t1 if last else t + h
            y = proj(y_new, p)
            k1 = k_new
            n_acc += 1
            if count == cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, n))
                fs2 = np.empty((cap, n))
                ts2[:count] = ts[:count]
                ys2[:count] = ys[:count]
                fs2[:count] = fs[:count]
                ts, ys, fs = ts2, ys2, fs2
            ts[count] = t
            ys[count] = y
            fs[count] = k1
            count += 1
            h = min(_next_h(h, en), max_step)
        else:
            n_rej += 1
            h = h * max(0.2, 0.9 * en ** -0.2) if en < math.inf else h * 0.2
    return ts[:count], ys[:count], fs[:count], n_acc, n_rej, status


def _rk4_core(f, proj, p, t0, y0, t1, dt):
    n_steps = int(math.ceil((t1 - t0) / dt - 1e-12))
    n = y0.shape[0]
    ts = np.empty(n_steps + 1)
    ys = np.empty((n_steps + 1, n))
    fs = np.empty((n_steps + 1, n))
    y = proj(y0.copy(), p)
    t = t0
    ts[0] = t
    ys[0] = y
    fs[0] = f(t, y, p)
    for i in range(n_steps):
        h = min(dt, t1 - t)
        k1 = fs[i]
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1, p)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2, p)
        k4 = f(t + h, y + h * k3, p)
        y = proj(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), p)
        t = t0 + (i + 1) * dt if i + 1 < n_steps else t1
        ts[i + 1] = t
        ys[i + 1] = y
        fs[i + 1] = f(t, y, p)
    return ts, ys, fs


def _hermite(y0, f0, y1, f1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


def _hermite_root(sec, q, y0, f0, y1, f1, h, s0, s1):
    """Bisection on the cubic Hermite interpolant; returns theta in (0, 1)."""
    lo, hi = 0.0, 1.0
    slo = s0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        sm, _g = sec(_hermite(y0, f0, y1, f1, h, mid), q)
        if (sm < 0.0) == (slo < 0.0):
            lo, slo = mid, sm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _section_core(f, proj, sec, p, q, t0, y0, t_max, rtol, atol, h0, max_step,
                  n_cross, direction, sec_tol, max_steps):
    """Integrate until ``n_cross`` crossings of ``sec`` in ``direction`` (+1, -1, 0 for both).

    A crossing is a sign change of the section value between consecutive
    accepted steps with a positive gate value.  It is bracketed on the
    Hermite interpolant, then refined with exact partial Runge-Kutta steps
    from the step start (Illinois iteration) until |value| < sec_tol.

    Returns (times, states, signs, n_found, status, n_steps, worst_residual).
    """
    n = y0.shape[0]
    times = np.empty(n_cross)
    states = np.empty((n_cross, n))
    signs = np.empty(n_cross)
    y = proj(y0.copy(), p)
    t = t0
    k1 = f(t, y, p)
    s_old, _g = sec(y, q)
    h = h0 if h0 > 0 else _initial_step(f, t, y, k1, p, rtol, atol, max_step)
    found = 0
    steps = 0
    worst = 0.0
    status = OK
    while found < n_cross:
        if t >= t_max:
            status = T_MAX
            break
        if steps >= max_steps:
            status = MAX_STEPS
            break
        if h < MIN_STEP * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        y_new, k_new, err = _dp_step(f, t, y, h, k1, p)
        steps += 1
        en = _err_norm(err, y, y_new, rtol, atol)
        if en > 1.0:
            h = h * max(0.2, 0.9 * en ** -0.2) if en < math.inf else h * 0.2
            continue
        y_new = proj(y_new, p)
        s_new, gate = sec(y_new, q)
        up = s_old < 0.0 <= s_new
        down = s_old > 0.0 >= s_new
        hit = (direction >= 0 and up) or (direction <= 0 and down)
        if hit and gate > 0.0:
            # bracket on the interpolant, then refine on exact sub-steps
            th = _hermite_root(sec, q, y, k1, y_new, k_new, h, s_old, s_new)
            a, b = 0.0, 1.0
            sa, sb = s_old, s_new
            yc = y_new
            sc = s_new
            side = 0
            for _ in range(60):
                yc, _k, _e = _dp_step(f, t, y, th * h, k1, p)
                yc = proj(yc, p)
                sc, _g = sec(yc, q)
                if abs(sc) < sec_tol:
                    break
                if (sc < 0.0) == (sa < 0.0):
                    a, sa = th, sc
                    if side == -1:
                        sb *= 0.5
                    side = -1
                else:
                    b, sb = th, sc
                    if side == 1:
                        sa *= 0.5
                    side = 1
                th = (a * sb - b * sa) / (sb - sa)
            if abs(sc) > worst:
                worst = abs(sc)
            times[found] = t + th * h
            states[found] = yc
            signs[found] = 1.0 if up else -1.0
            found += 1
        t = t + h
        y = y_new
        k1 = k_new
        s_old = s_new
        h = min(_next_h(h, en), max_step)
    return times[:found], states[:found], signs[:found], found, status, steps, worst


_dp_step_jit = maybe_njit(_dp_step, cache=False)
_err_norm_jit = maybe_njit(_err_norm)
_initial_step_jit = maybe_njit(_initial_step, cache=False)
_next_h_jit = maybe_njit(_next_h)
_hermite_jit = maybe_njit(_hermite)
_hermite_root_jit = maybe_njit(_hermite_root, cache=False)


def _rebind(fn, **names):
    """Copy of ``fn`` whose globals resolve ``names`` to the given objects."""
    import types

    g = dict(fn.__globals__)
    g.update(names)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__, fn.__closure__)


_jit_names = dict(
    _dp_step=_dp_step_jit,
    _err_norm=_err_norm_jit,
    _initial_step=_initial_step_jit,
    _next_h=_next_h_jit,
    _hermite=_hermite_jit,
    _hermite_root=_hermite_root_jit,
)
_hermite_root_jit = maybe_njit(_rebind(_hermite_root, _hermite=_hermite_jit), cache=False)
_jit_names["_hermite_root"] = _hermite_root_jit
solve_jit = maybe_njit(_rebind(_solve_core, **_jit_names), cache=False)
rk4_jit = maybe_njit(_rk4_core, cache=False)
section_jit = maybe_njit(_rebind(_section_core, **_jit_names), cache=False)


# --------------------------------------------------------------------------- API


@dataclass(frozen=True)
class System:
    """A right-hand side on flat arrays plus its constraint projection.

    ``jit`` marks kernels that may be handed to the compiled cores.
    ``unpack`` turns a flat row back into the typed state.
    """

    f: Callable
    p: Any = None
    proj: Callable = kernels.no_proj
    jit: bool = False
    unpack: Optional[Callable] = None
    name: str = "system"


@dataclass
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    fixed_dt: Optional[float] = None
    h0: float = 0.0
    max_steps: int = 10_000_000
    project: bool = True


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray = field(repr=False)
    n_accepted: int = 0
    n_rejected: int = 0
    unpack: Optional[Callable] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        row = self.states[i]
        return self.unpack(row) if self.unpack is not None else row

    def __call__(self, t):
        """Cubic Hermite dense output at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[i + 1] - self.times[i]
        theta = ((t - self.times[i]) / h)[..., None]
        return _hermite(self.states[i], self.derivs[i], self.states[i + 1], self.derivs[i + 1], h[..., None], theta)


def as_system(rhs):
    if isinstance(rhs, System):
        return rhs
    return System(f=lambda t, y, p: np.asarray(rhs(t, y), dtype=float), name=getattr(rhs, "__name__", "rhs"))


def _flat(state):
    if hasattr(state, "to_array"):
        state = state.to_array()
    return np.ascontiguousarray(state, dtype=float)


def _identity(y, p):
    return y


def _proj_for(system, opts):
    if opts.project:
        return system.proj
    return kernels.no_proj if system.jit else _identity


def _cores(system):
    if system.jit:
        return solve_jit, rk4_jit, section_jit
    return _solve_core, _rk4_core, _section_core


def _status_error(status, where):
    if status == UNDERFLOW:
        raise StepSizeUnderflow(f"step size fell below {MIN_STEP:g} in {where}")
    if status == MAX_STEPS:
        raise StepSizeUnderflow(f"maximum number of steps exceeded in {where}")


def integrate(rhs, state, t_span, opts=None):
    """Integrate ``rhs`` from ``state`` over ``t_span = (t0, t1)``.

    ``rhs`` is a :class:`System` or a plain ``f(t, y)`` on flat arrays.
    ``state`` is a flat array or a typed state with ``to_array``.
    """
    opts = opts or IntegratorOptions()
    system = as_system(rhs)
    y0 = _flat(state)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    proj = _proj_for(system, opts)
    solve, rk4, _ = _cores(system)
    if opts.fixed_dt:
        ts, ys, fs = rk4(system.f, proj, system.p, t0, y0, t1, float(opts.fixed_dt))
        return Trajectory(ts, ys, fs, len(ts) - 1, 0, system.unpack)
    ts, ys, fs, n_acc, n_rej, status = solve(
        system.f, proj, system.p, t0, y0, t1, float(opts.rtol), float(opts.atol),
        float(opts.h0), float(opts.max_step), int(opts.max_steps))
    _status_error(status, system.name)
    return Trajectory(ts, ys, fs, int(n_acc), int(n_rej), system.unpack)


def find_crossings(rhs, sec, q, state, n_crossings, t_max, opts=None, direction=1, sec_tol=1e-12, t0=0.0):
    """Low-level section run; see :func:`affroll.poincare.section_map`.

    Returns (times, states, signs, status, n_steps, worst_residual) without
    raising when fewer crossings than requested were found.
    """
    opts = opts or IntegratorOptions()
    system = as_system(rhs)
    y0 = _flat(state)
    proj = _proj_for(system, opts)
    _, _, section = _cores(system)
    q = np.ascontiguousarray(q, dtype=float)
    times, states, signs, found, status, steps, worst = section(
        system.f, proj, sec, system.p, q, float(t0), y0, float(t_max), float(opts.rtol), float(opts.atol),
        float(opts.h0), float(opts.max_step), int(n_crossings), int(direction), float(sec_tol), int(opts.max_steps))
    if status in (UNDERFLOW,):
        _status_error(status, system.name)
    return times, states, signs, int(status), int(steps), float(worst)
