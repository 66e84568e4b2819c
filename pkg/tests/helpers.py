"""Parameter sets and random states shared by several test modules."""
import numpy as np

from affroll import dynamics as dyn
from affroll import fields as fl
from affroll import shapes as sh
from affroll.core import random_rotation, random_unit

FIG5_SHAPE = sh.balanced_sphere(1.0, 0.5, 2.5, 3.0, 5.0)
ROUTH = sh.routh_profile(1.0, 0.3)


def fig5_params(sigma=10.0):
    return dyn.ScenarioParams(FIG5_SHAPE, W=fl.cats_toy(sigma))


def fig6_params(eta=1.0, sigma=1.0):
    return dyn.ScenarioParams(sh.homogeneous_sphere(1.0, 1.0, 2.0), V=fl.rotating_plane(eta), W=fl.cats_toy(sigma))


def routh_params(sigma=3.0, g=1.0):
    body = sh.revolution_body(1.0, 0.4, 0.6, ROUTH)
    W = fl.cats_toy(sigma) if sigma else fl.no_surface()
    return dyn.ScenarioParams(body, W=W, g=g)


def random_reduced(rng, m_scale=1.0):
    return dyn.ReducedState(rng.standard_normal(3) * m_scale, random_unit(rng))


def random_full(params, rng, m_scale=1.0, x_scale=2.0):
    B = random_rotation(rng)
    u = np.r_[rng.standard_normal(2) * x_scale, dyn.holonomic_u3(params.shape, B[2])]
    return dyn.FullState(rng.standard_normal(3) * m_scale, B, u)


def catalogue_params():
    """One ScenarioParams per (shape class, V, W) catalogue combination."""
    shapes = [sh.balanced_sphere(1.3, 0.5, 2.5, 3.0, 2.0), sh.homogeneous_sphere(0.7, 0.4, 1.5),
              sh.revolution_body(1.0, 0.4, 0.6, ROUTH), sh.revolution_body(2.0, 0.9, 1.1, sh.ellipsoid_profile(0.8, 1.5, 0.2))]
    Vs = [fl.no_plane(), fl.rotating_plane(0.8), fl.constant_plane(0.3, -1.2),
          fl.stream_plane([[0.3, 1.0, 0.5, 0.2]], eta=0.4, v1=0.1)]
    out = []
    for shape in shapes:
        Ws = [fl.no_surface(), fl.cats_toy(3.0)]
        if shape.is_sphere:
            # tilted rotation fields and general tangent fields are tangent only to spheres
            Ws.append(fl.cats_toy(-2.0, np.array([0.6, 0.0, 0.8])))
            Ws.append(fl.sphere_tangent([0.3, -0.2, 0.5], sigma=1.5, axis=np.array([1.0, 2.0, 2.0]) / 3))
        for V in Vs:
            for W in Ws:
                out.append(dyn.ScenarioParams(shape, V=V, W=W, g=1.0))
    return out
