"""Reductive matrix Lie algebras: brackets, bi-invariant metrics, bases, curvature"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

from config import Config
from utils.errors import DescriptorMismatchError, UnsupportedFamilyError

logger = logging.getLogger(__name__)


class AlgebraFamily(str, Enum):
    SO = 'so'
    SU = 'su'
    ABELIAN = 'rn'


@dataclass(frozen=True)
class AlgebraDescriptor:
    """Which algebra: so(n), su(n) or the abelian R^n"""
    family: AlgebraFamily
    ambient_size: int

    def __post_init__(self):
        object.__setattr__(self, 'family', AlgebraFamily(self.family))
        n = self.ambient_size
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ValueError(f"ambient_size must be an integer, got {n!r}")
        minimum = 1 if self.family is AlgebraFamily.ABELIAN else 2
        if n < minimum:
            raise ValueError(f"{self.family.value}({n}) is not a supported algebra (n >= {minimum})")
        object.__setattr__(self, 'ambient_size', int(n))

    @property
    def dimension(self) -> int:
        n = self.ambient_size
        if self.family is AlgebraFamily.SO:
            return n * (n - 1) // 2
        if self.family is AlgebraFamily.SU:
            return n * n - 1
        return n

    @property
    def scalar_field(self) -> str:
        return 'complex' if self.family is AlgebraFamily.SU else 'real'

    @property
    def dtype(self):
        return np.complex128 if self.family is AlgebraFamily.SU else np.float64

    @property
    def is_abelian(self) -> bool:
        return self.family is AlgebraFamily.ABELIAN

    @property
    def is_compact(self) -> bool:
        return not self.is_abelian

    @property
    def shape(self) -> Tuple[int, ...]:
        n = self.ambient_size
        return (n,) if self.is_abelian else (n, n)

    @property
    def label(self) -> str:
        if self.is_abelian:
            return f"rn:{self.ambient_size}"
        return f"{self.family.value}{self.ambient_size}"

    def __str__(self):
        return self.label


class MetricKind(str, Enum):
    FROBENIUS = 'frobenius'
    NEGATIVE_KILLING = 'negative_killing'


@dataclass(frozen=True)
class BiInvariantMetric:
    """
    Q(X, Y) = scale * factor * Re tr(X^dagger Y).

    factor is 1 for the Frobenius kind; for the negative Killing kind it is the
    closed-form ratio -kappa / Frobenius: (n - 2) on so(n), 2n on su(n).
    """
    kind: MetricKind = MetricKind.FROBENIUS
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', MetricKind(self.kind))
        if not self.scale > 0:
            raise ValueError(f"metric scale must be positive, got {self.scale}")

    def factor(self, descriptor: AlgebraDescriptor) -> float:
        if self.kind is MetricKind.FROBENIUS:
            return self.scale
        if descriptor.is_abelian:
            raise UnsupportedFamilyError("negative Killing form vanishes on abelian algebras")
        n = descriptor.ambient_size
        if descriptor.family is AlgebraFamily.SO:
            if n < 3:
                raise UnsupportedFamilyError("negative Killing form vanishes on so(2)")
            return self.scale * (n - 2)
        return self.scale * 2 * n

    def pair_arrays(self, x: np.ndarray, y: np.ndarray, descriptor: AlgebraDescriptor) -> float:
        return self.factor(descriptor) * float(np.real(np.vdot(x, y)))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """
    Element of the algebra (or, through Q, of its dual).

    ``matrix`` is an n x n array for so(n)/su(n); for the abelian R^n it holds
    the coordinate vector itself.
    """
    matrix: np.ndarray
    descriptor: AlgebraDescriptor

    def _check(self, other: 'AlgebraElement'):
        if self.descriptor != other.descriptor:
            raise DescriptorMismatchError(f"{self.descriptor} vs {other.descriptor}")

    def __add__(self, other: 'AlgebraElement') -> 'AlgebraElement':
        self._check(other)
        return AlgebraElement(self.matrix + other.matrix, self.descriptor)

    def __sub__(self, other: 'AlgebraElement') -> 'AlgebraElement':
        self._check(other)
        return AlgebraElement(self.matrix - other.matrix, self.descriptor)

    def __mul__(self, scalar: float) -> 'AlgebraElement':
        return AlgebraElement(self.matrix * scalar, self.descriptor)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> 'AlgebraElement':
        return AlgebraElement(self.matrix / scalar, self.descriptor)

    def __neg__(self) -> 'AlgebraElement':
        return AlgebraElement(-self.matrix, self.descriptor)

    def norm(self) -> float:
        """Frobenius norm of the underlying array"""
        return float(np.linalg.norm(self.matrix))

    def membership_defect(self) -> float:
        x = self.matrix
        if not np.all(np.isfinite(x)):
            return math.inf
        if self.descriptor.is_abelian:
            return float(np.linalg.norm(np.imag(x))) if np.iscomplexobj(x) else 0.0
        if self.descriptor.family is AlgebraFamily.SO:
            return float(np.linalg.norm(x + x.T) + np.linalg.norm(np.imag(x)))
        return float(np.linalg.norm(x + x.conj().T) + abs(np.trace(x)))

    def is_member(self, tol: float = None) -> bool:
        tol = Config.ALGEBRA_TOL if tol is None else tol
        return self.membership_defect() <= tol * max(1.0, self.norm())

    @staticmethod
    def zeros(descriptor: AlgebraDescriptor) -> 'AlgebraElement':
        return AlgebraElement(np.zeros(descriptor.shape, dtype=descriptor.dtype), descriptor)


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Q-orthonormal basis {X_i} in canonical generator order"""
    elements: Tuple[AlgebraElement, ...]
    metric: BiInvariantMetric
    descriptor: AlgebraDescriptor
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        stack = np.stack([x.matrix for x in self.elements])
        object.__setattr__(self, '_stack', stack)

    @property
    def dimension(self) -> int:
        return len(self.elements)

    @property
    def stack(self) -> np.ndarray:
        return self._stack

    def __getitem__(self, i: int) -> AlgebraElement:
        return self.elements[i]

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def coefficients(self, X: AlgebraElement) -> np.ndarray:
        """c_i = Q(X, X_i)"""
        if X.descriptor != self.descriptor:
            raise DescriptorMismatchError(f"{X.descriptor} vs {self.descriptor}")
        flat = self._stack.reshape(self.dimension, -1)
        raw = np.real(flat.conj() @ X.matrix.reshape(-1))
        return self.metric.factor(self.descriptor) * raw

    def combine(self, coefficients) -> AlgebraElement:
        """sum_i c_i X_i"""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} coefficients, got shape {c.shape}")
        return AlgebraElement(np.tensordot(c, self._stack, axes=1), self.descriptor)


@dataclass(frozen=True, eq=False)
class StructureConstants:
    """tensor[k, i, j] = C^k_ij with [X_i, X_j] = sum_k C^k_ij X_k"""
    tensor: np.ndarray

    def jacobi_defect(self) -> float:
        C = self.tensor
        # sum_m C^m_ij C^l_mk + C^m_jk C^l_mi + C^m_ki C^l_mj
        first = np.einsum('mij,lmk->lijk', C, C)
        total = first + np.transpose(first, (0, 2, 3, 1)) + np.transpose(first, (0, 3, 1, 2))
        return float(np.max(np.abs(total))) if total.size else 0.0


def canonical_generators(descriptor: AlgebraDescriptor):
    """
    Generators before orthonormalisation.

    so(n): E_(a,b) for a < b in lexicographic order, entry (b, a) = 1 and (a, b) = -1.
    su(n): for each pair a < b, i(e_ab + e_ba) then e_ab - e_ba; then the
    traceless diagonals i(e_aa - e_(a+1)(a+1)).
    R^n: coordinate vectors.
    """
    n = descriptor.ambient_size
    dtype = descriptor.dtype
    if descriptor.is_abelian:
        return [np.eye(n)[i] for i in range(n)]
    gens = []
    if descriptor.family is AlgebraFamily.SO:
        for a in range(n):
            for b in range(a + 1, n):
                E = np.zeros((n, n), dtype=dtype)
                E[b, a] = 1.0
                E[a, b] = -1.0
                gens.append(E)
        return gens
    if descriptor.family is AlgebraFamily.SU:
        for a in range(n):
            for b in range(a + 1, n):
                S = np.zeros((n, n), dtype=dtype)
                S[a, b] = S[b, a] = 1j
                A = np.zeros((n, n), dtype=dtype)
                A[a, b] = 1.0
                A[b, a] = -1.0
                gens.extend([S, A])
        for a in range(n - 1):
            D = np.zeros((n, n), dtype=dtype)
            D[a, a] = 1j
            D[a + 1, a + 1] = -1j
            gens.append(D)
        return gens
    raise UnsupportedFamilyError(f"unsupported algebra family {descriptor.family!r}")


def build_basis(descriptor: AlgebraDescriptor, metric: BiInvariantMetric = None) -> OrthonormalBasis:
    """
    Q-orthonormal basis by modified Gram-Schmidt over the canonical generators.

    Args:
        descriptor: algebra descriptor
        metric: bi-invariant metric (Frobenius, scale 1 when omitted)

    Returns:
        OrthonormalBasis with deterministic ordering
    """
    metric = metric or BiInvariantMetric()
    factor = metric.factor(descriptor)
    vectors = []
    for gen in canonical_generators(descriptor):
        v = gen.astype(descriptor.dtype, copy=True)
        for u in vectors:
            v = v - factor * float(np.real(np.vdot(u, v))) * u
        norm = math.sqrt(factor * float(np.real(np.vdot(v, v))))
        vectors.append(v / norm)
    logger.debug("built %s basis of dimension %d (%s, scale %g)",
                 descriptor, len(vectors), metric.kind.value, metric.scale)
    elements = tuple(AlgebraElement(v, descriptor) for v in vectors)
    return OrthonormalBasis(elements, metric, descriptor)


def bracket(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    """[X, Y] = XY - YX"""
    if X.descriptor != Y.descriptor:
        raise DescriptorMismatchError(f"cannot bracket {X.descriptor} with {Y.descriptor}")
    if X.descriptor.is_abelian:
        return AlgebraElement(np.zeros_like(X.matrix, dtype=float), X.descriptor)
    return AlgebraElement(X.matrix @ Y.matrix - Y.matrix @ X.matrix, X.descriptor)


def pairing(metric: BiInvariantMetric, X: AlgebraElement, Y: AlgebraElement) -> float:
    """Q(X, Y) = scale * Re tr(X^dagger Y) (times the Killing factor when requested)"""
    if X.descriptor != Y.descriptor:
        raise DescriptorMismatchError(f"cannot pair {X.descriptor} with {Y.descriptor}")
    return metric.pair_arrays(X.matrix, Y.matrix, X.descriptor)


def project_to_algebra(M: np.ndarray, descriptor: AlgebraDescriptor) -> AlgebraElement:
    """Frobenius-orthogonal projection of an ambient matrix onto the algebra"""
    M = np.asarray(M)
    if M.shape != descriptor.shape:
        raise ValueError(f"expected shape {descriptor.shape}, got {M.shape}")
    if descriptor.is_abelian:
        return AlgebraElement(np.real(M).astype(float), descriptor)
    if descriptor.family is AlgebraFamily.SO:
        R = np.real(M)
        return AlgebraElement(0.5 * (R - R.T), descriptor)
    A = 0.5 * (M - M.conj().T)
    n = descriptor.ambient_size
    A = A - (np.trace(A) / n) * np.eye(n)
    return AlgebraElement(A.astype(np.complex128), descriptor)


def ad_matrix(basis: OrthonormalBasis, X: AlgebraElement) -> np.ndarray:
    """A[k, j] = Q([X, X_j], X_k), the matrix of ad_X in the basis"""
    d = basis.dimension
    if X.descriptor.is_abelian:
        return np.zeros((d, d))
    S = basis.stack
    images = X.matrix @ S - S @ X.matrix
    raw = np.real(np.einsum('kab,jab->kj', S.conj(), images))
    return basis.metric.factor(basis.descriptor) * raw


def killing_form(basis: OrthonormalBasis, X: AlgebraElement, Y: AlgebraElement) -> float:
    """kappa(X, Y) = tr(ad_X o ad_Y)"""
    if X.descriptor != Y.descriptor:
        raise DescriptorMismatchError(f"{X.descriptor} vs {Y.descriptor}")
    return float(np.trace(ad_matrix(basis, X) @ ad_matrix(basis, Y)))


def killing_matrix(basis: OrthonormalBasis) -> np.ndarray:
    ads = [ad_matrix(basis, X) for X in basis]
    d = basis.dimension
    K = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            K[i, j] = K[j, i] = np.trace(ads[i] @ ads[j])
    return K


def structure_constants(basis: OrthonormalBasis) -> StructureConstants:
    """C^k_ij = Q([X_i, X_j], X_k); filled for i < j and mirrored"""
    d = basis.dimension
    C = np.zeros((d, d, d))
    if basis.descriptor.is_abelian:
        return StructureConstants(C)
    for i in range(d):
        for j in range(i + 1, d):
            coeffs = basis.coefficients(bracket(basis[i], basis[j]))
            C[:, i, j] = coeffs
            C[:, j, i] = -coeffs
    return StructureConstants(C)


def christoffel_symbols(basis: OrthonormalBasis) -> np.ndarray:
    """Gamma^k_ij = C^k_ij / 2 for the bi-invariant Levi-Civita connection"""
    return 0.5 * structure_constants(basis).tensor


def covariant_derivative(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    """nabla_X Y = [X, Y] / 2 on left-invariant fields"""
    return 0.5 * bracket(X, Y)


def curvature_tensor(X: AlgebraElement, Y: AlgebraElement, Z: AlgebraElement) -> AlgebraElement:
    """R(X, Y)Z = -[[X, Y], Z] / 4"""
    return -0.25 * bracket(bracket(X, Y), Z)


def ricci(basis: OrthonormalBasis, X: AlgebraElement, Y: AlgebraElement) -> float:
    """Ric(X, Y) = -kappa(X, Y) / 4"""
    return -0.25 * killing_form(basis, X, Y)


def ricci_from_curvature(basis: OrthonormalBasis, X: AlgebraElement, Y: AlgebraElement) -> float:
    """sum_i Q(R(X_i, X)Y, X_i); must agree with ``ricci``"""
    return sum(pairing(basis.metric, curvature_tensor(Xi, X, Y), Xi) for Xi in basis)


def sectional_curvature(metric: BiInvariantMetric, X: AlgebraElement, Y: AlgebraElement) -> float:
    """Q(R(X, Y)Y, X), equal to |[X, Y]|^2 / 4"""
    return pairing(metric, curvature_tensor(X, Y, Y), X)


def sample_algebra_gaussian(rng, basis: OrthonormalBasis) -> AlgebraElement:
    """sum_i xi_i X_i with xi_i i.i.d. standard normal"""
    return basis.combine(rng.standard_normal(basis.dimension))
