"""
Trivialised Hamiltonian mechanics on T*G = G x g*.

Momenta live in the algebra through the metric identification, so every
duality pairing is a call to ``pairing`` with the basis metric. The coadjoint
action is the bracket coadjoint(X, m) = [m, X], i.e. Q(coadjoint(X, m), Y) =
Q(m, [X, Y]); with left-trivialised group derivatives this is the sign for
which the bracket below satisfies the Jacobi identity.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from config import Config
from models.schemas import PotentialKind, PotentialSpec
from services.group_ops import GroupElement, compose, exp_algebra, group_defect
from services.lie_structure import (
    AlgebraElement,
    OrthonormalBasis,
    bracket,
    pairing,
    project_to_algebra,
)
from utils.errors import DescriptorMismatchError, DiagnosticError, NonFiniteStateError

logger = logging.getLogger(__name__)

# central finite-difference steps
GRADIENT_FD_STEP = 1e-6
FLOW_FD_STEP = 1e-5

# implicit midpoint fixed-point iteration
MIDPOINT_TOL = 1e-14
MIDPOINT_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class PhaseState:
    """(g, m): group position and left-trivialised momentum"""
    g: GroupElement
    m: AlgebraElement

    def __post_init__(self):
        if self.g.descriptor != self.m.descriptor:
            raise DescriptorMismatchError(f"g in {self.g.descriptor} but m in {self.m.descriptor}")

    @property
    def descriptor(self):
        return self.g.descriptor

    def validate(self, group_tol: float = None, algebra_tol: float = None) -> 'PhaseState':
        group_tol = Config.GROUP_TOL if group_tol is None else group_tol
        if not (np.all(np.isfinite(self.g.matrix)) and np.all(np.isfinite(self.m.matrix))):
            raise NonFiniteStateError("phase state contains non-finite entries")
        defect = group_defect(self.g)
        if defect > group_tol:
            raise ValueError(f"g is off the group (defect {defect:.3g} > {group_tol:g})")
        if not self.m.is_member(algebra_tol):
            raise ValueError(f"m is not in {self.m.descriptor} (defect {self.m.membership_defect():.3g})")
        return self


def coadjoint(X: AlgebraElement, m: AlgebraElement) -> AlgebraElement:
    """ad*_X m as an algebra element: [m, X]"""
    return bracket(m, X)


def conjugate(theta: AlgebraElement, m: AlgebraElement) -> AlgebraElement:
    """exp(theta) m exp(-theta), reprojected onto the algebra"""
    if m.descriptor.is_abelian:
        return m
    E = expm(theta.matrix)
    return project_to_algebra(E @ m.matrix @ E.conj().T, m.descriptor)


def coadjoint_flow(B: AlgebraElement, m: AlgebraElement) -> AlgebraElement:
    """Time-one flow of dm/dt = coadjoint(B, m): exp(-B) m exp(B)"""
    return conjugate(-B, m)


def directional_gradient(fn: Callable[[GroupElement], float], g: GroupElement,
                         basis: OrthonormalBasis, step: float = GRADIENT_FD_STEP) -> AlgebraElement:
    """
    Left-trivialised gradient by central differences along g . exp(+-step X_i).

    Args:
        fn: scalar function on the group
        g: base point
        basis: orthonormal basis giving the directions
        step: finite-difference step

    Returns:
        sum_i c_i X_i with c_i the directional derivative along X_i
    """
    coeffs = np.empty(basis.dimension)
    for i, X in enumerate(basis):
        plus = fn(compose(g, exp_algebra(step * X)))
        minus = fn(compose(g, exp_algebra(-step * X)))
        coeffs[i] = (plus - minus) / (2 * step)
    return basis.combine(coeffs)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

class Potential:
    """V: G -> R with its left-trivialised gradient"""
    kind: PotentialKind = PotentialKind.CUSTOM

    def __init__(self, basis: OrthonormalBasis):
        self.basis = basis
        self.descriptor = basis.descriptor

    def value(self, g: GroupElement) -> float:
        raise NotImplementedError

    def gradient(self, g: GroupElement) -> AlgebraElement:
        return directional_gradient(self.value, g, self.basis)

    def lower_bound(self) -> Optional[float]:
        return None

    def __call__(self, g: GroupElement) -> float:
        return self.value(g)


class ZeroPotential(Potential):
    kind = PotentialKind.ZERO

    def value(self, g):
        return 0.0

    def gradient(self, g):
        return AlgebraElement.zeros(self.descriptor)

    def lower_bound(self):
        return 0.0


class TracePotential(Potential):
    """V(g) = -Re tr(A^dagger g)"""
    kind = PotentialKind.TRACE

    def __init__(self, basis: OrthonormalBasis, A: np.ndarray):
        super().__init__(basis)
        if self.descriptor.is_abelian:
            raise ValueError("trace potential needs a matrix group")
        A = np.asarray(A)
        n = self.descriptor.ambient_size
        if A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}, got {A.shape}")
        self.A = A
        self._factor = basis.metric.factor(self.descriptor)

    def value(self, g):
        return -float(np.real(np.vdot(self.A, g.matrix)))

    def gradient(self, g):
        # d/de V(g exp(eX)) = -<Pi(g^dagger A), X>_F
        P = project_to_algebra(g.matrix.conj().T @ self.A, self.descriptor)
        return P * (-1.0 / self._factor)

    def lower_bound(self):
        # |Re tr(A^dagger g)| <= nuclear norm of A on unitary g
        return -float(np.sum(np.linalg.svd(self.A, compute_uv=False)))


class QuadraticPotential(Potential):
    """V(q) = sum_i k_i q_i^2 / 2 on R^n"""
    kind = PotentialKind.QUADRATIC_EUCLIDEAN

    def __init__(self, basis: OrthonormalBasis, k: Sequence[float]):
        super().__init__(basis)
        if not self.descriptor.is_abelian:
            raise ValueError("quadratic_euclidean potential lives on R^n")
        self.k = np.asarray(k, dtype=float)
        if self.k.shape != (self.descriptor.ambient_size,) or np.any(self.k <= 0):
            raise ValueError("k must hold one positive stiffness per coordinate")
        self._factor = basis.metric.factor(self.descriptor)

    def value(self, g):
        return 0.5 * float(np.dot(self.k, g.matrix ** 2))

    def gradient(self, g):
        return AlgebraElement(self.k * g.matrix / self._factor, self.descriptor)

    def lower_bound(self):
        return 0.0


class CustomPotential(Potential):
    """Callback potential; the gradient falls back to central differences"""
    kind = PotentialKind.CUSTOM

    def __init__(self, basis: OrthonormalBasis, value_fn: Callable[[GroupElement], float],
                 gradient_fn: Callable[[GroupElement], AlgebraElement] = None,
                 lower_bound: float = None, fd_step: float = GRADIENT_FD_STEP):
        super().__init__(basis)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self._lower_bound = lower_bound
        self.fd_step = fd_step

    def value(self, g):
        return float(self._value_fn(g))

    def gradient(self, g):
        if self._gradient_fn is not None:
            return self._gradient_fn(g)
        return directional_gradient(self.value, g, self.basis, self.fd_step)

    def lower_bound(self):
        return self._lower_bound


def build_potential(spec: PotentialSpec, basis: OrthonormalBasis) -> Potential:
    """PotentialSpec (config) -> Potential bound to a basis"""
    if spec.kind is PotentialKind.ZERO:
        return ZeroPotential(basis)
    if spec.kind is PotentialKind.TRACE:
        return TracePotential(basis, spec.matrix())
    if spec.kind is PotentialKind.QUADRATIC_EUCLIDEAN:
        return QuadraticPotential(basis, spec.k)
    raise ValueError(f"potential kind {spec.kind.value!r} cannot be built from a config")


def left_trivialized_gradient(V: Potential, g: GroupElement) -> AlgebraElement:
    """grad^t V(g): Q(grad^t V(g), X) = d/de V(g exp(eX))"""
    return V.gradient(g)


# ---------------------------------------------------------------------------
# Hamiltonians and observables
# ---------------------------------------------------------------------------

class InertiaOperator:
    """Diagonal inertia in the orthonormal basis: Omega_i = m_i / I_i"""

    def __init__(self, coefficients: Sequence[float], basis: OrthonormalBasis):
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (basis.dimension,) or np.any(c <= 0):
            raise ValueError(f"inertia needs {basis.dimension} positive coefficients")
        self.coefficients = c
        self.basis = basis

    def apply_inverse(self, m: AlgebraElement) -> AlgebraElement:
        return self.basis.combine(self.basis.coefficients(m) / self.coefficients)

    def kinetic_energy(self, m: AlgebraElement) -> float:
        c = self.basis.coefficients(m)
        return 0.5 * float(np.sum(c * c / self.coefficients))


@dataclass
class DriftHamiltonian:
    """H0(g, m) = kinetic(m) + V(g)"""
    potential: Potential
    inertia: Optional[InertiaOperator] = None

    @property
    def basis(self) -> OrthonormalBasis:
        return self.potential.basis

    def velocity(self, m: AlgebraElement) -> AlgebraElement:
        """delta H / delta m"""
        if self.inertia is None:
            return m
        return self.inertia.apply_inverse(m)

    def kinetic(self, m: AlgebraElement) -> float:
        if self.inertia is None:
            return 0.5 * pairing(self.basis.metric, m, m)
        return self.inertia.kinetic_energy(m)

    def value(self, s: PhaseState) -> float:
        return self.kinetic(s.m) + self.potential.value(s.g)


@dataclass(frozen=True)
class Observable:
    """
    F(g, m) with optional variational derivatives.

    dm returns delta F / delta m under Q; dg_triv returns the left-trivialised
    group derivative, Q(dg_triv, X) = d/de F(g exp(eX), m).
    """
    name: str
    value: Callable[[PhaseState], float]
    dm: Optional[Callable[[PhaseState], AlgebraElement]] = field(default=None, compare=False)
    dg_triv: Optional[Callable[[PhaseState], AlgebraElement]] = field(default=None, compare=False)

    @property
    def has_derivatives(self) -> bool:
        return self.dm is not None and self.dg_triv is not None

    def __call__(self, s: PhaseState) -> float:
        return float(self.value(s))


def fd_momentum_derivative(fn, s: PhaseState, basis: OrthonormalBasis,
                           step: float = GRADIENT_FD_STEP) -> AlgebraElement:
    coeffs = np.empty(basis.dimension)
    for i, X in enumerate(basis):
        plus = fn(PhaseState(s.g, s.m + step * X))
        minus = fn(PhaseState(s.g, s.m - step * X))
        coeffs[i] = (plus - minus) / (2 * step)
    return basis.combine(coeffs)


def fd_group_derivative(fn, s: PhaseState, basis: OrthonormalBasis,
                        step: float = GRADIENT_FD_STEP) -> AlgebraElement:
    return directional_gradient(lambda g: fn(PhaseState(g, s.m)), s.g, basis, step)


def observable_with_fd(name: str, fn: Callable[[PhaseState], float],
                       basis: OrthonormalBasis, step: float = GRADIENT_FD_STEP) -> Observable:
    """Observable whose derivatives are central differences of ``fn``"""
    return Observable(
        name=name,
        value=fn,
        dm=lambda s: fd_momentum_derivative(fn, s, basis, step),
        dg_triv=lambda s: fd_group_derivative(fn, s, basis, step),
    )


def product_observable(F: Observable, G: Observable) -> Observable:
    """F * G with the Leibniz rule applied to the derivatives"""
    dm = dg = None
    if F.has_derivatives and G.has_derivatives:
        dm = lambda s: F.dm(s) * G(s) + G.dm(s) * F(s)
        dg = lambda s: F.dg_triv(s) * G(s) + G.dg_triv(s) * F(s)
    return Observable(f"{F.name}*{G.name}", lambda s: F(s) * G(s), dm, dg)


def hamiltonian_vector_field(F: Observable, s: PhaseState) -> Tuple[AlgebraElement, AlgebraElement]:
    """
    X_F at s as (dm, xi): dm = [m, dF/dm] - dg_triv F, xi = dF/dm.

    The rate of change of G along X_F is poisson_bracket(G, F, ...).
    """
    if not F.has_derivatives:
        raise DiagnosticError(f"observable {F.name!r} has no derivatives for its Hamiltonian vector field")
    Fm = F.dm(s)
    return coadjoint(Fm, s.m) - F.dg_triv(s), Fm


def euler_chart(s: PhaseState, dm: AlgebraElement, xi: AlgebraElement, t: float) -> PhaseState:
    """(g exp(t xi), m + t dm), a curve through s with velocity (xi, dm)"""
    return PhaseState(compose(s.g, exp_algebra(t * xi)), s.m + t * dm)


def _flow_derivative(F: Observable, G: Observable, s: PhaseState, step: float) -> float:
    dm, xi = hamiltonian_vector_field(G, s)
    plus = F(euler_chart(s, dm, xi, step))
    minus = F(euler_chart(s, dm, xi, -step))
    return (plus - minus) / (2 * step)


def poisson_bracket(F: Observable, G: Observable, s: PhaseState,
                    basis: OrthonormalBasis, step: float = FLOW_FD_STEP) -> float:
    """
    {F, G} = -Q(m, [dF/dm, dG/dm]) + Q(dG/dm, dg F) - Q(dF/dm, dg G).

    When only one side carries derivatives, the bracket is the derivative of
    the other side along its Hamiltonian flow (central difference, ``step``).
    """
    if s.m.descriptor != basis.descriptor:
        raise DescriptorMismatchError(f"state in {s.m.descriptor}, basis for {basis.descriptor}")
    if F.has_derivatives and G.has_derivatives:
        Fm, Gm = F.dm(s), G.dm(s)
        Q = basis.metric
        return (pairing(Q, Gm, F.dg_triv(s))
                - pairing(Q, s.m, bracket(Fm, Gm))
                - pairing(Q, Fm, G.dg_triv(s)))
    if G.has_derivatives:
        return _flow_derivative(F, G, s, step)
    if F.has_derivatives:
        return -_flow_derivative(G, F, s, step)
    raise DiagnosticError(f"neither {F.name!r} nor {G.name!r} has derivatives")


def bracket_observable(F: Observable, G: Observable, basis: OrthonormalBasis) -> Observable:
    """Observable s -> {F, G}(s), without analytic derivatives"""
    return Observable(f"{{{F.name},{G.name}}}", lambda s: poisson_bracket(F, G, s, basis))


def total_energy(H: DriftHamiltonian, s: PhaseState) -> float:
    return H.value(s)


# ---------------------------------------------------------------------------
# Deterministic flows
# ---------------------------------------------------------------------------

def hamiltonian_drift(H: DriftHamiltonian, s: PhaseState) -> Tuple[AlgebraElement, AlgebraElement]:
    """
    Trivialised Hamilton equations.

    Returns:
        (dm, xi) with xi = dH/dm and dm = [m, xi] - grad^t V(g); the group
        moves along g . xi
    """
    xi = H.velocity(s.m)
    dm = coadjoint(xi, s.m) - H.potential.gradient(s.g)
    return dm, xi


def _midpoint_velocity(H: DriftHamiltonian, m: AlgebraElement, h: float) -> AlgebraElement:
    """Fixed point B = dH/dm((m + exp(-hB) m exp(hB)) / 2)"""
    B = H.velocity(m)
    if H.inertia is None:
        return B
    for _ in range(MIDPOINT_MAX_ITER):
        m_next = coadjoint_flow(h * B, m)
        B_next = H.velocity(0.5 * (m + m_next))
        change = (B_next - B).norm()
        B = B_next
        if change <= MIDPOINT_TOL * max(1.0, B.norm()):
            return B
    logger.warning("implicit midpoint did not converge in %d iterations (h=%g)", MIDPOINT_MAX_ITER, h)
    return B


def symplectic_drift_step(H: DriftHamiltonian, s: PhaseState, h: float) -> PhaseState:
    """
    Strang splitting: half kick, kinetic flow, half kick.

    The kinetic flow is the exact geodesic g exp(h m) for the bi-invariant
    kinetic energy; with an inertia operator it is the implicit-midpoint
    Lie-Poisson conjugation m -> exp(-hB) m exp(hB), g -> g exp(hB), which
    keeps the spatial momentum g m g^-1 fixed.
    """
    m = s.m - (0.5 * h) * H.potential.gradient(s.g)
    B = _midpoint_velocity(H, m, h)
    if H.inertia is not None:
        m = coadjoint_flow(h * B, m)
    g = compose(s.g, exp_algebra(h * B))
    m = m - (0.5 * h) * H.potential.gradient(g)
    return PhaseState(g, m)


@dataclass(frozen=True)
class LiePoissonNoise:
    """Stochastic Lie-Poisson forcing: sum_a dZ_a * Y_a(m)"""
    generators: Tuple[Callable[[AlgebraElement], AlgebraElement], ...]
    increments: np.ndarray

    def __post_init__(self):
        if len(self.generators) != len(self.increments):
            raise ValueError("one increment per noise generator is required")

    def direction(self, m: AlgebraElement) -> AlgebraElement:
        total = AlgebraElement.zeros(m.descriptor)
        for dz, Y in zip(self.increments, self.generators):
            total = total + float(dz) * Y(m)
        return total


def basis_noise(rng, basis: OrthonormalBasis, h: float, scale: float) -> LiePoissonNoise:
    """Constant generators X_i with increments scale * sqrt(h) * xi_i"""
    increments = scale * np.sqrt(h) * rng.standard_normal(basis.dimension)
    generators = tuple((lambda X: (lambda m: X))(X) for X in basis)
    return LiePoissonNoise(generators, increments)


def lie_poisson_step(H: DriftHamiltonian, m: AlgebraElement, h: float,
                     noise: LiePoissonNoise = None) -> AlgebraElement:
    """
    One isospectral step m -> exp(-hB) m exp(hB).

    Deterministic: B is the implicit-midpoint velocity. Stochastic: Heun
    predictor-corrector on the algebra coefficient, then one conjugation.
    """
    if noise is None:
        return coadjoint_flow(h * _midpoint_velocity(H, m, h), m)
    b0 = h * H.velocity(m) + noise.direction(m)
    predicted = coadjoint_flow(b0, m)
    b1 = h * H.velocity(predicted) + noise.direction(predicted)
    return coadjoint_flow(0.5 * (b0 + b1), m)
