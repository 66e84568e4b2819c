"""Charts, section crossings, seeding on integral levels and the two section experiments."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import dynamics as dyn
from . import invariants as inv
from . import kernels
from .errors import ChartSingularity, DomainError, MaxTimeExceeded, NoSeedFound
from .integrate import IntegratorOptions, find_crossings

TWO_PI = 2.0 * math.pi
CHART_TOL = 1e-14
SECTION_TOL = 1e-10
DIRECTIONS = {"+": 1, "-": -1, "both": 0}


# ------------------------------------------------------------------ Andoyer chart on <M, gamma> = 0


def andoyer_to_state(L, G, l, g):
    if not G > 0:
        raise DomainError("G must be positive")
    if abs(L) > G:
        raise DomainError(f"|L| = {abs(L)} exceeds G = {G}")
    c = L / G
    s = math.sqrt(max(0.0, 1.0 - c * c))
    sl, cl, sg, cg = math.sin(l), math.cos(l), math.sin(g), math.cos(g)
    M = np.array([G * s * sl, G * s * cl, L])
    gamma = np.array([c * cg * sl + sg * cl, c * cg * cl - sg * sl, -s * cg])
    return dyn.ReducedState(M, gamma)


def state_to_andoyer(s, tol=1e-8):
    """(L, G, l, g) with l in [0, 2 pi) and g in (-pi, pi]."""
    M = np.asarray(s.M, dtype=float)
    gam = np.asarray(s.gamma, dtype=float)
    G = float(np.linalg.norm(M))
    if abs(M @ gam) > tol * max(G * np.linalg.norm(gam), 1.0):
        raise DomainError("state is off the level <M, gamma> = 0")
    L = float(M[2])
    if G * G - L * L < CHART_TOL:
        raise ChartSingularity("M is vertical in the body frame (|L| = G)")
    l = math.atan2(M[0], M[1])
    sl, cl = math.sin(l), math.cos(l)
    c = L / G
    sn = math.sqrt(max(0.0, 1.0 - c * c))
    g = math.atan2(gam[0] * cl - gam[1] * sl, c * (gam[0] * sl + gam[1] * cl) - sn * gam[2])
    return L, G, l % TWO_PI, g


# ------------------------------------------------------------------ invariant chart for the homogeneous sphere


def homsphere_state_to_invariants(s):
    """(L, s1, s2, G, f, g), all unchanged by rotations about E3."""
    M, gam, U = (np.asarray(v, dtype=float) for v in (s.M, s.gamma, s.U))
    G = float(np.linalg.norm(M))
    f = float(M @ gam)
    L = float(M[2])
    num = G * (M[1] * gam[0] - M[0] * gam[1])
    den = f * L - G * G * gam[2]
    if abs(num) < CHART_TOL and abs(den) < CHART_TOL:
        raise ChartSingularity("g is undefined at this state")
    s1 = float(U[0] * gam[0] + U[1] * gam[1])
    s2 = float(U[0] * gam[1] - U[1] * gam[0])
    return L, s1, s2, G, f, math.atan2(num, den)


def homsphere_invariants_to_state(L, s1, s2, G, f, g, l=0.0, r=1.0, tol=1e-12):
    """Rebuild (M, gamma, U) from the invariant chart; ``l`` picks the point on the E3 orbit.

    ``U3`` is fixed by ``<U, gamma> = r``.
    """
    if not G > 0 or abs(L) > G:
        raise DomainError("need G > 0 and |L| <= G")
    if abs(f) > G:
        raise DomainError("need |f| <= G")
    c = L / G
    sn = math.sqrt(max(0.0, 1.0 - c * c))
    sl, cl = math.sin(l), math.cos(l)
    M = np.array([G * sn * sl, G * sn * cl, L])
    a = np.array([c * sl, c * cl, -sn])
    b = np.array([cl, -sl, 0.0])
    w = math.sqrt(max(0.0, 1.0 - (f / G) ** 2))
    gam = (f / (G * G)) * M + w * (math.cos(g) * a + math.sin(g) * b)
    h2 = gam[0] ** 2 + gam[1] ** 2
    if h2 < tol or abs(gam[2]) < tol:
        raise ChartSingularity("reconstruction denominators vanish")
    U = np.array([(s1 * gam[0] + s2 * gam[1]) / h2, (s1 * gam[1] - s2 * gam[0]) / h2, (r - s1) / gam[2]])
    return dyn.SphereReducedState(M, gam, U)


# ------------------------------------------------------------------ sections


@dataclass(frozen=True)
class SectionSpec:
    """``chart`` is ``"andoyer"`` (coordinates (l, L/G)) or ``"homsphere"`` ((s2, L))."""

    chart: str
    g0: float = 0.0
    direction: str = "+"
    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {sorted(DIRECTIONS)}")
        if self.chart not in ("andoyer", "homsphere"):
            raise ValueError(f"unknown chart {self.chart!r}")

    def coords(self, y):
        if self.chart == "andoyer":
            M = y[0:3]
            G = float(np.linalg.norm(M))
            return (math.atan2(M[0], M[1]) % TWO_PI, float(M[2]) / G)
        return (float(y[6] * y[4] - y[7] * y[3]), float(y[2]))

    @property
    def coord_names(self):
        return ("l", "L_over_G") if self.chart == "andoyer" else ("s2", "L")


@dataclass
class CrossingEvent:
    time: float
    coords: tuple
    direction: int
    state: np.ndarray = field(repr=False)
    residual: float = 0.0


def section_map(system, spec, seed, n_crossings, opts=None, t_max=1e5, strict=True):
    """Successive crossings of ``sin(g - g0) = 0`` (with ``cos(g - g0) > 0``).

    Raises MaxTimeExceeded when fewer than ``n_crossings`` occur before
    ``t_max`` unless ``strict`` is false; the partial list is attached to the
    exception as ``events``.
    """
    opts = opts or IntegratorOptions()
    q = np.array([spec.g0])
    times, states, signs, status, _steps, _worst = find_crossings(
        system, kernels.sec_g, q, seed, n_crossings, t_max, opts,
        direction=DIRECTIONS[spec.direction], sec_tol=SECTION_TOL * 1e-2)
    events = []
    for t, y, sg in zip(times, states, signs):
        res, _gate = kernels.sec_g(y, q)
        events.append(CrossingEvent(float(t), spec.coords(y), int(sg), y, abs(float(res))))
    if len(events) < n_crossings and strict:
        err = MaxTimeExceeded(f"{len(events)} of {n_crossings} crossings before t = {t_max:g}")
        err.events = events
        raise err
    return events


def first_return(system, y0, t_max, opts=None, radius=None):
    """Return time and state for the plane through ``y0`` normal to the flow.

    Returns (period, state, distance to ``y0``).
    """
    opts = opts or IntegratorOptions()
    y0 = np.ascontiguousarray(y0, dtype=float)
    n = system.f(0.0, y0, system.p)
    speed = float(np.linalg.norm(n))
    if speed == 0.0:
        raise DomainError("equilibrium: no return map")
    n = n / speed
    if radius is None:
        radius = 0.5
    q = np.concatenate([y0, n, [radius]])
    times, states, _s, status, _n, _w = find_crossings(system, kernels.sec_plane, q, y0, 1, t_max, opts, direction=1)
    if len(times) == 0:
        raise MaxTimeExceeded(f"no return before t = {t_max:g}")
    return float(times[0]), states[0], float(np.linalg.norm(states[0] - y0))


# ------------------------------------------------------------------ seeding on integral levels


def seed_andoyer(G, L_over_G, l, g0=0.0):
    return andoyer_to_state(L_over_G * G, G, l, g0)


def homsphere_energy_at(params, L, s1, s2, G, f, g):
    return inv.moving_energy(params, homsphere_invariants_to_state(L, s1, s2, G, f, g, 0.0, params.shape.radius),
                             "homsphere")


def seed_homsphere(params, G, f, g, E, L, s2, s1_box=(-50.0, 50.0), n_scan=2001, tol=1e-10):
    """Solve ``E_mov = E`` for ``s1`` on a bounded interval with the other chart values fixed.

    The interval is scanned for sign changes and the bracket whose root is
    closest to ``s1 = 0`` is refined.  Raises NoSeedFound when the level set
    misses the interval.
    """
    grid = np.linspace(s1_box[0], s1_box[1], n_scan)

    def resid(s1):
        try:
            return homsphere_energy_at(params, L, s1, s2, G, f, g) - E
        except ChartSingularity:
            return math.nan

    vals = np.array([resid(v) for v in grid])
    roots = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0.0:
            roots.append(brentq(resid, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
    if not roots:
        raise NoSeedFound(f"E_mov = {E} not reached for s1 in {s1_box} at L = {L}, s2 = {s2}")
    s1 = min(roots, key=abs)
    state = homsphere_invariants_to_state(L, s1, s2, G, f, g, 0.0, params.shape.radius)
    r = abs(inv.moving_energy(params, state, "homsphere") - E)
    if r > tol * max(1.0, abs(E)):
        raise NoSeedFound(f"root refinement stalled with residual {r:.2e}")
    return state


def seed_from_levels(params, levels, free_coords, **kw):
    """State on the requested integral levels.

    ``levels`` holds ``G`` (or ``epsilon`` for the balanced sphere) and, for
    the homogeneous sphere, ``f``, ``g`` and ``E``.  ``free_coords`` holds
    ``(l, L_over_G)`` or ``(L, s2)`` respectively.
    """
    if params.shape.kind == "homogeneous_sphere" and "E" in levels:
        L, s2 = free_coords
        return seed_homsphere(params, levels["G"], levels.get("f", 0.0), levels["g"], levels["E"], L, s2, **kw)
    G = levels.get("G")
    if G is None:
        shape = params.shape
        G = levels["epsilon"] * shape.m * shape.radius ** 2 * abs(params.sigma)
    l, c = free_coords
    return seed_andoyer(G, c, l, levels.get("g", 0.0))


# ------------------------------------------------------------------ structure of section orbits


FIT_NEIGHBOURS = 12


def curve_fit_residual(points, ranges, periodic=(False, False), k=FIT_NEIGHBOURS):
    """Max deviation of a point cloud from a smooth one-dimensional curve.

    Coordinates are scaled by ``ranges`` to the unit square.  Around each
    point, its ``k`` nearest neighbours are fitted with a quadratic in their
    principal-axis frame, and the largest misfit over all such local fits is
    returned.  Points on a curve give values near zero, while points filling
    an area give values comparable to the neighbourhood size.
    """
    P = np.asarray(points, dtype=float) / np.asarray(ranges, dtype=float)
    n = len(P)
    if n < 10:
        return 0.0
    k = min(k, n)
    periodic = np.asarray(periodic, dtype=bool)
    boxsize = None
    if periodic.any():
        # non-periodic axes get a box wide enough that wrapping never brings points closer
        P = P.copy()
        P[:, periodic] %= 1.0
        P[:, ~periodic] -= P[:, ~periodic].min(axis=0)
        boxsize = np.where(periodic, 1.0, 2.0 * P.max(axis=0) + 1.0)
    tree = cKDTree(P, boxsize=boxsize)
    _, idx = tree.query(P, k=k)
    worst = 0.0
    for i in range(n):
        Q = P[idx[i]] - P[i]
        Q[:, periodic] -= np.round(Q[:, periodic])
        Q -= Q.mean(axis=0)
        _, _, vt = np.linalg.svd(Q, full_matrices=False)
        u = Q @ vt[0]
        v = Q @ vt[1]
        X = np.column_stack([np.ones_like(u), u, u * u])
        coef, *_ = np.linalg.lstsq(X, v, rcond=None)
        worst = max(worst, float(np.abs(v - X @ coef).max()))
    return worst


# ------------------------------------------------------------------ output


def write_svg(path, series, xlabel, ylabel, xlim=None, ylim=None, size=480):
    """Minimal scatter plot; ``series`` is a list of (N, 2) arrays, one colour each."""
    pts = [np.asarray(s, dtype=float) for s in series if len(s)]
    allp = np.vstack(pts) if pts else np.zeros((1, 2))
    x0, x1 = xlim if xlim else (allp[:, 0].min(), allp[:, 0].max())
    y0, y1 = ylim if ylim else (allp[:, 1].min(), allp[:, 1].max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    pad = 40
    w = size - 2 * pad

    def px(x, y):
        return pad + (x - x0) / (x1 - x0) * w, size - pad - (y - y0) / (y1 - y0) * w

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<rect x="{pad}" y="{pad}" width="{w}" height="{w}" fill="none" stroke="black"/>',
             f'<text x="{size / 2}" y="{size - 8}" text-anchor="middle" font-size="14">{xlabel}</text>',
             f'<text x="12" y="{size / 2}" text-anchor="middle" font-size="14" '
             f'transform="rotate(-90 12 {size / 2})">{ylabel}</text>',
             f'<text x="{pad}" y="{size - pad + 14}" font-size="10">{x0:.3g}</text>',
             f'<text x="{size - pad}" y="{size - pad + 14}" font-size="10" text-anchor="end">{x1:.3g}</text>',
             f'<text x="{pad - 4}" y="{size - pad}" font-size="10" text-anchor="end">{y0:.3g}</text>',
             f'<text x="{pad - 4}" y="{pad + 8}" font-size="10" text-anchor="end">{y1:.3g}</text>']
    for i, s in enumerate(pts):
        hue = (i * 137) % 360
        lines.append(f'<g fill="hsl({hue},70%,40%)">')
        for x, y in s:
            cx, cy = px(x, y)
            lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="0.9"/>')
        lines.append("</g>")
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
