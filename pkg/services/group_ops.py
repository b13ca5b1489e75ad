"""Group-level operations: exponential, composition, reprojection, Haar oracle, Brownian motion"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.linalg import expm, polar, qr

from config import Config
from services.lie_structure import (
    AlgebraDescriptor,
    AlgebraElement,
    AlgebraFamily,
    OrthonormalBasis,
    sample_algebra_gaussian,
)
from utils.errors import (
    DescriptorMismatchError,
    GroupProjectionError,
    NonFiniteStateError,
    UnsupportedFamilyError,
)
from utils.rng import RngStream

logger = logging.getLogger(__name__)

# reproject() refuses matrices further than this from the group
MAX_REPROJECT_DEFECT = 0.1


@dataclass(frozen=True, eq=False)
class GroupElement:
    """
    g in SO(n), SU(n) or the additive group R^n.

    For R^n the element is stored as the vector itself.
    """
    matrix: np.ndarray
    descriptor: AlgebraDescriptor

    def defect(self) -> float:
        return group_defect(self)


def _same(g: GroupElement, h: GroupElement):
    if g.descriptor != h.descriptor:
        raise DescriptorMismatchError(f"{g.descriptor} vs {h.descriptor}")


def identity(descriptor: AlgebraDescriptor) -> GroupElement:
    if descriptor.is_abelian:
        return GroupElement(np.zeros(descriptor.ambient_size), descriptor)
    return GroupElement(np.eye(descriptor.ambient_size, dtype=descriptor.dtype), descriptor)


def exp_algebra(X: AlgebraElement) -> GroupElement:
    """
    Lie exponential.

    scipy's expm (scaling and squaring, degree-13 Pade) for the matrix
    families; the identity map on R^n.
    """
    if not np.all(np.isfinite(X.matrix)):
        raise NonFiniteStateError("cannot exponentiate a non-finite algebra element")
    if X.descriptor.is_abelian:
        return GroupElement(np.array(X.matrix, dtype=float), X.descriptor)
    return GroupElement(expm(X.matrix), X.descriptor)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    _same(g, h)
    if g.descriptor.is_abelian:
        return GroupElement(g.matrix + h.matrix, g.descriptor)
    return GroupElement(g.matrix @ h.matrix, g.descriptor)


def inverse(g: GroupElement) -> GroupElement:
    if g.descriptor.is_abelian:
        return GroupElement(-g.matrix, g.descriptor)
    if g.descriptor.family is AlgebraFamily.SO:
        return GroupElement(g.matrix.T.copy(), g.descriptor)
    return GroupElement(g.matrix.conj().T.copy(), g.descriptor)


def _orthogonality_defect(M: np.ndarray) -> float:
    n = M.shape[0]
    return float(np.linalg.norm(M.conj().T @ M - np.eye(n)))


def group_defect(g: GroupElement) -> float:
    """
    ||g^dagger g - I||_F + |det g / |det g| - 1|.

    The determinant term measures the sign (SO) or phase (SU) of det g; it is
    zero exactly when g lies on the group up to the orthogonality term. Always
    zero on R^n for finite vectors.
    """
    M = g.matrix
    if not np.all(np.isfinite(M)):
        return float('inf')
    if g.descriptor.is_abelian:
        return 0.0
    det = np.linalg.det(M)
    if det == 0:
        return _orthogonality_defect(M) + 1.0
    return _orthogonality_defect(M) + float(abs(det / abs(det) - 1.0))


def reproject(g: GroupElement, max_defect: float = MAX_REPROJECT_DEFECT) -> GroupElement:
    """
    Nearest group element via the polar decomposition.

    Args:
        g: matrix close to the group
        max_defect: inputs with ||g^dagger g - I||_F above this are rejected

    Returns:
        unitary polar factor, with the SU(n) determinant phase divided out
    """
    if g.descriptor.is_abelian:
        if not np.all(np.isfinite(g.matrix)):
            raise NonFiniteStateError("non-finite group element")
        return g
    M = g.matrix
    if not np.all(np.isfinite(M)):
        raise NonFiniteStateError("non-finite group element")
    off = _orthogonality_defect(M)
    if off > max_defect:
        raise GroupProjectionError(
            f"matrix is too far from {g.descriptor} to reproject (||g^T g - I|| = {off:.3g})"
        )
    u, _ = polar(M, side='right')
    if g.descriptor.family is AlgebraFamily.SO:
        u = np.real(u)
        if np.linalg.det(u) < 0:
            raise GroupProjectionError("matrix has negative determinant; it is not near SO(n)")
        return GroupElement(u, g.descriptor)
    n = g.descriptor.ambient_size
    phase = np.angle(np.linalg.det(u))
    return GroupElement(u * np.exp(-1j * phase / n), g.descriptor)


def geodesic(g0: GroupElement, X: AlgebraElement, t: float) -> GroupElement:
    """g0 . exp(tX)"""
    if g0.descriptor != X.descriptor:
        raise DescriptorMismatchError(f"{g0.descriptor} vs {X.descriptor}")
    return compose(g0, exp_algebra(t * X))


def adjoint_action(g: GroupElement, X: AlgebraElement) -> AlgebraElement:
    """Ad_g X = g X g^-1"""
    if g.descriptor != X.descriptor:
        raise DescriptorMismatchError(f"{g.descriptor} vs {X.descriptor}")
    if g.descriptor.is_abelian:
        return X
    return AlgebraElement(g.matrix @ X.matrix @ inverse(g).matrix, X.descriptor)


def haar_sample(rng: RngStream, descriptor: AlgebraDescriptor) -> GroupElement:
    """
    Haar-distributed element from the QR decomposition of a Gaussian matrix.

    The diagonal of R is normalised to be positive (sign/phase correction);
    SO(n) then flips the first column when det < 0 and SU(n) divides out the
    determinant phase.
    """
    if descriptor.is_abelian:
        raise UnsupportedFamilyError("R^n carries no normalisable Haar measure")
    n = descriptor.ambient_size
    if descriptor.family is AlgebraFamily.SO:
        z = rng.standard_normal((n, n))
        q, r = qr(z)
        d = np.sign(np.diag(r))
        d[d == 0] = 1.0
        q = q * d
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return GroupElement(q, descriptor)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = qr(z)
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))
    q = q * np.exp(-1j * np.angle(np.linalg.det(q)) / n)
    return GroupElement(q, descriptor)


def rbm_step(g: GroupElement, h: float, rng: RngStream, basis: OrthonormalBasis) -> GroupElement:
    """One Euler-exponential step of the left-trivialised Brownian motion: g . exp(sqrt(h) xi)"""
    if h < 0:
        raise ValueError(f"step size must be non-negative, got {h}")
    xi = sample_algebra_gaussian(rng, basis)
    if h == 0:
        return g
    return compose(g, exp_algebra(np.sqrt(h) * xi))


def rbm_path(
    g0: GroupElement,
    T: float,
    h: float,
    rng: RngStream,
    basis: OrthonormalBasis,
    record_every: int = 1,
    reproject_every: int = None,
) -> List[Tuple[float, GroupElement]]:
    """
    Iterated rbm_step with periodic reprojection.

    Args:
        g0: start point
        T: horizon (0 returns the start point only)
        h: step size, > 0
        rng: stream driving the increments
        basis: orthonormal basis of the algebra
        record_every: keep every k-th point; the final point is always kept
        reproject_every: reprojection cadence in steps (Config.REPROJECT_EVERY by default)

    Returns:
        list of (time, GroupElement)
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    if T < 0:
        raise ValueError(f"horizon must be non-negative, got {T}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    reproject_every = reproject_every or Config.REPROJECT_EVERY

    n_steps = int(round(T / h))
    path = [(0.0, g0)]
    g = g0
    for k in range(1, n_steps + 1):
        g = rbm_step(g, h, rng, basis)
        if k % reproject_every == 0:
            g = reproject(g)
        if k % record_every == 0 or k == n_steps:
            path.append((k * h, g))
    logger.debug("rbm path on %s: %d steps, %d recorded points", g0.descriptor, n_steps, len(path))
    return path
