"""3-vector and rotation algebra shared by every module."""
import numpy as np

from .errors import NonOrthonormalizable

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat(a):
    """Skew matrix with ``hat(a) @ b == cross(a, b)``."""
    a1, a2, a3 = a
    return np.array([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])


def poisson_vectors(B):
    """Body-frame images of the spatial axes, i.e. the rows of ``B``."""
    B = np.asarray(B, dtype=float)
    return B[0].copy(), B[1].copy(), B[2].copy()


def rot_e3(phi):
    """Rotation by ``phi`` about the third axis."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orthonormalize(B, max_defect=1e-3):
    """Project a nearly orthogonal matrix back onto SO(3).

    Rows are Gram-Schmidt orthonormalized three times in the order 1, 2, 3 and
    the third row is then replaced by the cross product of the first two.
    Exact rotations are returned unchanged up to rounding.
    """
    B = np.array(B, dtype=float)
    if B.shape != (3, 3) or not np.all(np.isfinite(B)):
        raise NonOrthonormalizable("expected a finite 3x3 matrix")
    defect = np.max(np.abs(B @ B.T - np.eye(3)))
    if defect > max_defect:
        raise NonOrthonormalizable(f"matrix is {defect:.2e} away from orthogonal")
    if np.linalg.det(B) <= 0.0:
        raise NonOrthonormalizable("determinant is not positive")
    for _ in range(3):
        B[0] /= np.linalg.norm(B[0])
        B[1] -= (B[1] @ B[0]) * B[0]
        B[1] /= np.linalg.norm(B[1])
        B[2] -= (B[2] @ B[0]) * B[0] + (B[2] @ B[1]) * B[1]
        B[2] /= np.linalg.norm(B[2])
    B[2] = np.cross(B[0], B[1])
    return B


def random_rotation(rng):
    """Uniformly distributed rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_unit(rng, n=None):
    if n is None:
        v = rng.standard_normal(3)
        return v / np.linalg.norm(v)
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
