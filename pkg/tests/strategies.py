"""Hypothesis strategies shared by the property tests."""
import numpy as np
from hypothesis import strategies as st

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(lambda t: np.array(t))


def _unit(t):
    v = np.array(t)
    return v / np.linalg.norm(v)


unit3 = (st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
         .filter(lambda t: 0.1 < np.linalg.norm(t)).map(_unit))
seeds = st.integers(0, 2 ** 32 - 1)
