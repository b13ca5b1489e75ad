"""Executable property suite behind the `check` command"""
import logging
from typing import Callable, List, Tuple

import numpy as np
from scipy.linalg import expm

from models.schemas import CheckResult, LangevinConfig, LangevinVariant
from services.group_ops import (
    compose,
    exp_algebra,
    geodesic,
    group_defect,
    haar_sample,
    identity,
    inverse,
    rbm_path,
    reproject,
    GroupElement,
)
from services.langevin import momentum_langevin_step, position_langevin_step, symplectic_langevin_step
from services.lie_structure import (
    AlgebraDescriptor,
    AlgebraElement,
    AlgebraFamily,
    OrthonormalBasis,
    ad_matrix,
    bracket,
    killing_form,
    killing_matrix,
    pairing,
    project_to_algebra,
    ricci,
    ricci_from_curvature,
    sample_algebra_gaussian,
    sectional_curvature,
    structure_constants,
)
from services.mechanics import (
    DriftHamiltonian,
    InertiaOperator,
    PhaseState,
    QuadraticPotential,
    TracePotential,
    ZeroPotential,
    directional_gradient,
    fd_group_derivative,
    fd_momentum_derivative,
    lie_poisson_step,
    poisson_bracket,
    bracket_observable,
    product_observable,
    symplectic_drift_step,
)
from services.diagnostics import default_observable_suite, momentum_spectrum
from utils.rng import RngStream

logger = logging.getLogger(__name__)

SUITE_SEED = 20240917
N_RANDOM = 10
N_AD_INVARIANCE = 100
# flow-derivative step for nested brackets (keeps truncation error well under 1e-8)
JACOBI_FD_STEP = 2e-6


class _Suite:
    """랜덤 입력 생성기 + 결과 수집기"""

    def __init__(self, basis: OrthonormalBasis, seed: int):
        self.basis = basis
        self.descriptor = basis.descriptor
        self.rng = RngStream(seed, 0)
        self.results: List[CheckResult] = []

    def element(self) -> AlgebraElement:
        return sample_algebra_gaussian(self.rng, self.basis)

    def group_element(self) -> GroupElement:
        if self.descriptor.is_abelian:
            return exp_algebra(self.element())
        return haar_sample(self.rng, self.descriptor)

    def state(self) -> PhaseState:
        return PhaseState(self.group_element(), self.element())

    def pairing(self, X, Y) -> float:
        return pairing(self.basis.metric, X, Y)

    def run(self, name: str, tolerance: float, fn: Callable[[], Tuple[float, str]]):
        try:
            error, detail = fn()
            passed = bool(np.isfinite(error) and error <= tolerance)
        except Exception as e:  # 검사 하나의 실패가 전체를 멈추지 않도록
            error, detail, passed = float('inf'), f"{type(e).__name__}: {e}", False
        self.results.append(CheckResult(
            name=name, group=self.descriptor.label, passed=passed,
            max_error=float(error), tolerance=tolerance, detail=detail,
        ))


def _is_semisimple(descriptor: AlgebraDescriptor) -> bool:
    return not descriptor.is_abelian and descriptor.dimension > 1


def _algebra_checks(suite: _Suite):
    basis, Q = suite.basis, suite.pairing

    def orthonormality():
        G = np.array([[Q(X, Y) for Y in basis] for X in basis])
        return float(np.max(np.abs(G - np.eye(basis.dimension)))), ''

    def span():
        X = project_to_algebra(
            np.asarray(suite.rng.standard_normal(suite.descriptor.shape), dtype=suite.descriptor.dtype),
            suite.descriptor)
        return (basis.combine(basis.coefficients(X)) - X).norm(), ''

    def closure():
        worst = 0.0
        for _ in range(N_RANDOM):
            Z = bracket(suite.element(), suite.element())
            worst = max(worst, Z.membership_defect() / max(1.0, Z.norm()))
        return worst, ''

    def antisymmetry():
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y = suite.element(), suite.element()
            worst = max(worst, (bracket(X, Y) + bracket(Y, X)).norm(), bracket(X, X).norm())
        return worst, ''

    def jacobi():
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y, Z = suite.element(), suite.element(), suite.element()
            total = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
            worst = max(worst, total.norm())
        return worst, ''

    def ad_invariance():
        worst = 0.0
        for _ in range(N_AD_INVARIANCE):
            X, Y, Z = suite.element(), suite.element(), suite.element()
            scale = X.norm() * Y.norm() * Z.norm()
            worst = max(worst, abs(Q(bracket(X, Y), Z) + Q(Y, bracket(X, Z))) / scale)
        return worst, f"{N_AD_INVARIANCE} random triples"

    def ad_skew():
        worst = 0.0
        for _ in range(N_RANDOM):
            A = ad_matrix(basis, suite.element())
            worst = max(worst, float(np.max(np.abs(A + A.T))) if A.size else 0.0)
        return worst, ''

    def constants_jacobi():
        return structure_constants(basis).jacobi_defect(), ''

    def constants_antisymmetry():
        C = structure_constants(basis).tensor
        first = float(np.max(np.abs(C + np.transpose(C, (0, 2, 1))))) if C.size else 0.0
        # C^k_ij = -C^j_ik
        full = float(np.max(np.abs(C + np.transpose(C, (2, 1, 0))))) if C.size else 0.0
        return max(first, full), ''

    def projection():
        M = np.asarray(suite.rng.standard_normal(suite.descriptor.shape), dtype=suite.descriptor.dtype)
        P = project_to_algebra(M, suite.descriptor)
        idempotent = (project_to_algebra(P.matrix, suite.descriptor) - P).norm()
        # <Pi M, Y> = <M, Y> for Y in the algebra
        orth = max(abs(Q(P, Y) - basis.metric.pair_arrays(M, Y.matrix, suite.descriptor)) for Y in basis)
        return max(idempotent, orth), ''

    suite.run('basis_orthonormality', 1e-12, orthonormality)
    suite.run('basis_span', 1e-10, span)
    suite.run('bracket_closure', 1e-12, closure)
    suite.run('bracket_antisymmetry', 1e-12, antisymmetry)
    suite.run('jacobi_identity', 1e-10, jacobi)
    suite.run('metric_ad_invariance', 1e-12, ad_invariance)
    suite.run('ad_skew_adjoint', 1e-12, ad_skew)
    suite.run('structure_constants_jacobi', 1e-10, constants_jacobi)
    suite.run('structure_constants_antisymmetry', 1e-12, constants_antisymmetry)
    suite.run('projection', 1e-12, projection)


def _killing_checks(suite: _Suite):
    basis, Q = suite.basis, suite.pairing
    descriptor = suite.descriptor

    def closed_form():
        n = descriptor.ambient_size
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y = suite.element(), suite.element()
            if descriptor.is_abelian:
                expected = 0.0
            else:
                coefficient = (n - 2) if descriptor.family is AlgebraFamily.SO else 2 * n
                expected = coefficient * float(np.real(np.trace(X.matrix @ Y.matrix)))
            worst = max(worst, abs(killing_form(basis, X, Y) - expected))
        return worst, ''

    def negative_definite():
        if not _is_semisimple(descriptor):
            K = killing_matrix(basis)
            return float(np.max(np.abs(K))), 'Killing form vanishes identically'
        top = float(np.max(np.linalg.eigvalsh(killing_matrix(basis))))
        return max(0.0, top + 1e-8), f'largest eigenvalue {top:.3g}'

    def ricci_cross_check():
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y = suite.element(), suite.element()
            worst = max(worst, abs(ricci(basis, X, Y) - ricci_from_curvature(basis, X, Y)))
        return worst, ''

    def sectional():
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y = suite.element(), suite.element()
            Z = bracket(X, Y)
            k = sectional_curvature(basis.metric, X, Y)
            expected = 0.25 * Q(Z, Z)
            worst = max(worst, abs(k - expected) / max(1.0, expected), max(0.0, -k))
        return worst, ''

    suite.run('killing_closed_form', 1e-10, closed_form)
    suite.run('killing_negative_definite', 1e-12 if not _is_semisimple(descriptor) else 0.0, negative_definite)
    suite.run('ricci_curvature_cross_check', 1e-10, ricci_cross_check)
    suite.run('sectional_curvature', 1e-12, sectional)


def _group_checks(suite: _Suite):
    basis = suite.basis
    descriptor = suite.descriptor
    e = identity(descriptor)

    def exp_on_group():
        return max(group_defect(exp_algebra(suite.element())) for _ in range(N_RANDOM)), ''

    def exp_inverse():
        worst = 0.0
        for _ in range(N_RANDOM):
            X = suite.element()
            product = compose(exp_algebra(X), exp_algebra(-X))
            worst = max(worst, float(np.linalg.norm(product.matrix - e.matrix)))
        return worst, ''

    def adjoint_exp():
        worst = 0.0
        for _ in range(N_RANDOM):
            X, Y = suite.element(), suite.element()
            g = exp_algebra(X)
            if descriptor.is_abelian:
                lhs = Y.matrix
            else:
                lhs = basis.coefficients(AlgebraElement(g.matrix @ Y.matrix @ inverse(g).matrix, descriptor))
                rhs = expm(ad_matrix(basis, X)) @ basis.coefficients(Y)
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
                continue
            worst = max(worst, float(np.max(np.abs(lhs - Y.matrix))))
        return worst, ''

    def associativity():
        worst = 0.0
        for _ in range(N_RANDOM):
            a, b, c = suite.group_element(), suite.group_element(), suite.group_element()
            left = compose(compose(a, b), c).matrix
            right = compose(a, compose(b, c)).matrix
            worst = max(worst, float(np.linalg.norm(left - right)))
        return worst, ''

    def reprojection():
        if descriptor.is_abelian:
            return 0.0, 'identity on R^n'
        worst = 0.0
        for _ in range(N_RANDOM):
            g = suite.group_element()
            noisy = GroupElement(g.matrix + 1e-6 * suite.rng.standard_normal(g.matrix.shape), descriptor)
            fixed = reproject(noisy)
            again = reproject(fixed)
            worst = max(worst, group_defect(fixed), float(np.linalg.norm(again.matrix - fixed.matrix)))
        return worst, ''

    def one_parameter():
        worst = 0.0
        for _ in range(N_RANDOM):
            X = suite.element()
            s, t = suite.rng.uniform(2)
            joint = geodesic(e, X, s + t).matrix
            split = compose(geodesic(e, X, s), geodesic(e, X, t)).matrix
            worst = max(worst, float(np.linalg.norm(joint - split)))
        return worst, ''

    def haar_on_group():
        if descriptor.is_abelian:
            return 0.0, 'no Haar probability measure on R^n'
        return max(group_defect(haar_sample(suite.rng, descriptor)) for _ in range(N_RANDOM)), ''

    def rbm_defect():
        path = rbm_path(e, 1.0, 1e-2, suite.rng, basis, record_every=10)
        return max(group_defect(g) for _, g in path), f'{len(path)} recorded points'

    suite.run('exp_on_group', 1e-10, exp_on_group)
    suite.run('exp_inverse', 1e-12, exp_inverse)
    suite.run('adjoint_exp_ad', 1e-8, adjoint_exp)
    suite.run('compose_associativity', 1e-12, associativity)
    suite.run('reprojection', 1e-13, reprojection)
    suite.run('geodesic_one_parameter', 1e-12, one_parameter)
    suite.run('haar_on_group', 1e-10, haar_on_group)
    suite.run('rbm_defect', 1e-10, rbm_defect)


def _mechanics_checks(suite: _Suite):
    basis = suite.basis
    descriptor = suite.descriptor
    if descriptor.is_abelian:
        V = QuadraticPotential(basis, np.arange(1, descriptor.ambient_size + 1, dtype=float))
    else:
        A = np.asarray(suite.rng.standard_normal(descriptor.shape), dtype=descriptor.dtype)
        V = TracePotential(basis, A)
    observables = default_observable_suite(basis)

    def gradient():
        worst = 0.0
        for _ in range(N_RANDOM // 2):
            g = suite.group_element()
            analytic = basis.coefficients(V.gradient(g))
            numeric = basis.coefficients(directional_gradient(V.value, g, basis))
            worst = max(worst, float(np.max(np.abs(analytic - numeric))) / max(1.0, float(np.max(np.abs(numeric)))))
        return worst, ''

    def observable_derivatives():
        worst = 0.0
        s = suite.state()
        for F in observables:
            dm = basis.coefficients(F.dm(s))
            dg = basis.coefficients(F.dg_triv(s))
            fd_m = basis.coefficients(fd_momentum_derivative(F, s, basis))
            fd_g = basis.coefficients(fd_group_derivative(F, s, basis))
            scale = max(1.0, float(np.max(np.abs(fd_m))), float(np.max(np.abs(fd_g))))
            worst = max(worst, float(np.max(np.abs(dm - fd_m))) / scale, float(np.max(np.abs(dg - fd_g))) / scale)
        return worst, ''

    def poisson_antisymmetry():
        worst = 0.0
        for _ in range(N_RANDOM // 2):
            s = suite.state()
            for F in observables:
                for G in observables:
                    worst = max(worst, abs(poisson_bracket(F, G, s, basis) + poisson_bracket(G, F, s, basis)))
        return worst, ''

    def poisson_leibniz():
        F, G, H = observables[0], observables[2], observables[3]
        FG = product_observable(F, G)
        worst = 0.0
        for _ in range(N_RANDOM // 2):
            s = suite.state()
            lhs = poisson_bracket(FG, H, s, basis)
            rhs = F(s) * poisson_bracket(G, H, s, basis) + G(s) * poisson_bracket(F, H, s, basis)
            worst = max(worst, abs(lhs - rhs))
        return worst, ''

    def poisson_jacobi():
        F, G, H = observables[0], observables[2], observables[3]
        GH, HF, FG = (bracket_observable(G, H, basis), bracket_observable(H, F, basis),
                      bracket_observable(F, G, basis))
        worst = 0.0
        for _ in range(N_RANDOM // 2):
            s = suite.state()
            total = (poisson_bracket(F, GH, s, basis, JACOBI_FD_STEP) + poisson_bracket(G, HF, s, basis, JACOBI_FD_STEP)
                     + poisson_bracket(H, FG, s, basis, JACOBI_FD_STEP))
            worst = max(worst, abs(total))
        return worst, ''

    def drift_geodesic():
        H = DriftHamiltonian(ZeroPotential(basis))
        s = suite.state()
        h, steps = 1e-2, 100
        start = s
        for _ in range(steps):
            s = symplectic_drift_step(H, s, h)
        expected = geodesic(start.g, start.m, h * steps).matrix
        return float(np.linalg.norm(s.g.matrix - expected)) + (s.m - start.m).norm(), ''

    def reversibility():
        inertia = InertiaOperator(np.linspace(1.0, 2.0, basis.dimension), basis)
        H = DriftHamiltonian(V, inertia)
        s = suite.state()
        back = symplectic_drift_step(H, symplectic_drift_step(H, s, 1e-2), -1e-2)
        return float(np.linalg.norm(back.g.matrix - s.g.matrix)) + (back.m - s.m).norm(), ''

    def isospectral():
        inertia = InertiaOperator(np.linspace(1.0, 3.0, basis.dimension), basis)
        H = DriftHamiltonian(ZeroPotential(basis), inertia)
        m = suite.element()
        start = momentum_spectrum(m)
        for _ in range(200):
            m = lie_poisson_step(H, m, 1e-2)
        return float(np.max(np.abs(momentum_spectrum(m) - start))), ''

    def variant_reduction():
        start = suite.state()
        reductions = (
            (momentum_langevin_step, LangevinVariant.MOMENTUM, dict(gamma1=0.7, gamma2=0.0)),
            (position_langevin_step, LangevinVariant.POSITION, dict(gamma1=0.0, gamma2=0.7)),
        )
        mismatches = 0
        for step, variant, gammas in reductions:
            cfg = LangevinConfig(variant=variant, gamma=0.7, h=1e-2)
            symplectic = LangevinConfig(variant=LangevinVariant.SYMPLECTIC, h=1e-2, **gammas)
            direct, via = start, start
            rng_direct, rng_via = RngStream(5, 1), RngStream(5, 1)
            for _ in range(20):
                direct = step(direct, cfg, V, rng_direct)
                via = symplectic_langevin_step(via, symplectic, V, rng_via)
            if not (np.array_equal(direct.g.matrix, via.g.matrix) and np.array_equal(direct.m.matrix, via.m.matrix)):
                mismatches += 1
        return float(mismatches), 'bitwise comparison over 20 steps'

    suite.run('potential_gradient', 1e-5, gradient)
    suite.run('observable_derivatives', 1e-5, observable_derivatives)
    suite.run('poisson_antisymmetry', 1e-10, poisson_antisymmetry)
    suite.run('poisson_leibniz', 1e-10, poisson_leibniz)
    suite.run('poisson_jacobi', 1e-8, poisson_jacobi)
    suite.run('drift_geodesic', 1e-10, drift_geodesic)
    suite.run('drift_reversibility', 1e-12, reversibility)
    suite.run('lie_poisson_isospectral', 1e-10, isospectral)
    suite.run('langevin_variant_reduction', 0.0, variant_reduction)


def run_invariant_suite(basis: OrthonormalBasis, seed: int = SUITE_SEED) -> List[CheckResult]:
    """
    전체 성질 검사 실행

    Args:
        basis: 검사할 대수의 직교정규 기저
        seed: 랜덤 입력 시드

    Returns:
        CheckResult 리스트 (검사 그룹당 하나)
    """
    suite = _Suite(basis, seed)
    _algebra_checks(suite)
    _killing_checks(suite)
    _group_checks(suite)
    _mechanics_checks(suite)
    failed = [r.name for r in suite.results if not r.passed]
    if failed:
        logger.warning("❌ %s: %d/%d checks failed (%s)", basis.descriptor, len(failed),
                       len(suite.results), ", ".join(failed))
    else:
        logger.info("✅ %s: all %d checks passed", basis.descriptor, len(suite.results))
    return suite.results
