import numpy as np
import pytest
from scipy.linalg import expm

from models.schemas import PotentialKind, PotentialSpec
from services.diagnostics import (
    drift_observable,
    momentum_component_observable,
    momentum_spectrum,
    momentum_square_observable,
    trace_observable,
)
from services.group_ops import GroupElement, haar_sample, identity, inverse
from services.lie_structure import AlgebraElement, bracket, pairing, sample_algebra_gaussian
from services.mechanics import (
    CustomPotential,
    DriftHamiltonian,
    InertiaOperator,
    LiePoissonNoise,
    Observable,
    PhaseState,
    QuadraticPotential,
    TracePotential,
    ZeroPotential,
    basis_noise,
    build_potential,
    coadjoint,
    coadjoint_flow,
    directional_gradient,
    hamiltonian_drift,
    hamiltonian_vector_field,
    left_trivialized_gradient,
    lie_poisson_step,
    poisson_bracket,
    symplectic_drift_step,
    total_energy,
)
from utils.errors import DescriptorMismatchError, DiagnosticError, NonFiniteStateError
from utils.rng import RngStream


def _random_state(basis, seed):
    rng = RngStream(seed, 0)
    return PhaseState(haar_sample(rng, basis.descriptor), sample_algebra_gaussian(rng, basis))


def test_trace_potential_gradient_matches_finite_differences(su3):
    rng = RngStream(7, 0)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    V = TracePotential(su3, A)
    g = haar_sample(rng, su3.descriptor)
    np.testing.assert_allclose(su3.coefficients(V.gradient(g)),
                               su3.coefficients(directional_gradient(V.value, g, su3)), atol=1e-7)


def test_trace_potential_minimum_at_identity(so3):
    V = TracePotential(so3, np.eye(3))
    assert V.lower_bound() == pytest.approx(-3.0)
    assert V.value(identity(so3.descriptor)) == pytest.approx(-3.0)
    assert V.gradient(identity(so3.descriptor)).norm() < 1e-15


def test_quadratic_potential(make_basis):
    basis = make_basis('rn', 2)
    V = QuadraticPotential(basis, [4.0, 1.0])
    q = GroupElement(np.array([0.5, -2.0]), basis.descriptor)
    assert V.value(q) == pytest.approx(0.5 * (4 * 0.25 + 4.0))
    np.testing.assert_allclose(V.gradient(q).matrix, [2.0, -2.0])
    with pytest.raises(ValueError):
        QuadraticPotential(basis, [1.0, -1.0])


def test_custom_potential_falls_back_to_finite_differences(so3):
    V = CustomPotential(so3, lambda g: -float(np.trace(g.matrix)))
    reference = TracePotential(so3, np.eye(3))
    g = haar_sample(RngStream(4, 0), so3.descriptor)
    np.testing.assert_allclose(V.gradient(g).matrix, reference.gradient(g).matrix, atol=1e-8)
    assert V.lower_bound() is None


def test_build_potential(so3, make_basis):
    assert isinstance(build_potential(PotentialSpec(), so3), ZeroPotential)
    trace = build_potential(PotentialSpec(kind=PotentialKind.TRACE, A=np.eye(3).tolist()), so3)
    assert isinstance(trace, TracePotential)
    quad = build_potential(PotentialSpec(kind=PotentialKind.QUADRATIC_EUCLIDEAN, k=[1.0]), make_basis('rn', 1))
    assert isinstance(quad, QuadraticPotential)
    with pytest.raises(ValueError):
        TracePotential(make_basis('rn', 2), np.eye(2))


def test_coadjoint_is_dual_to_bracket(su3):
    rng = RngStream(12, 0)
    X, Y, m = (sample_algebra_gaussian(rng, su3) for _ in range(3))
    lhs = pairing(su3.metric, coadjoint(X, m), Y)
    assert lhs == pytest.approx(pairing(su3.metric, m, bracket(X, Y)), rel=1e-12)


def test_coadjoint_flow_is_isospectral(su3):
    rng = RngStream(13, 0)
    B, m = sample_algebra_gaussian(rng, su3), sample_algebra_gaussian(rng, su3)
    np.testing.assert_allclose(momentum_spectrum(coadjoint_flow(B, m)), momentum_spectrum(m), atol=1e-12)


def test_poisson_bracket_of_momentum_components(so3):
    s = _random_state(so3, 1)
    F1, F2, F3 = (momentum_component_observable(so3, i) for i in range(3))
    # {Q(m,X1), Q(m,X2)} = -Q(m,[X1,X2]) = -Q(m,X3)/sqrt(2)
    assert poisson_bracket(F1, F2, s, so3) == pytest.approx(-F3(s) / np.sqrt(2), rel=1e-12)
    assert poisson_bracket(F2, F1, s, so3) == pytest.approx(F3(s) / np.sqrt(2), rel=1e-12)


def test_hamiltonian_vector_field_sign(so3):
    s = _random_state(so3, 14)
    dm, xi = hamiltonian_vector_field(momentum_component_observable(so3, 0), s)
    np.testing.assert_allclose(dm.matrix, bracket(s.m, so3[0]).matrix, atol=1e-15)
    np.testing.assert_array_equal(xi.matrix, so3[0].matrix)
    dm, _ = hamiltonian_vector_field(trace_observable(np.eye(3), so3, 'tr g'), s)
    np.testing.assert_allclose(dm.matrix, -trace_observable(np.eye(3), so3, 'tr g').dg_triv(s).matrix)


def test_poisson_bracket_canonical_pair(so3):
    s = _random_state(so3, 2)
    tr = trace_observable(np.eye(3), so3, 'tr g')
    mX = momentum_component_observable(so3, 0)
    # {tr g, Q(m,X1)} is the derivative of tr g along X1
    expected = float(np.real(np.trace(s.g.matrix @ so3[0].matrix)))
    assert poisson_bracket(tr, mX, s, so3) == pytest.approx(expected, rel=1e-10)


def test_poisson_bracket_needs_derivatives(so3):
    s = _random_state(so3, 3)
    bare = Observable("bare", momentum_square_observable(so3).value)
    with pytest.raises(DiagnosticError):
        poisson_bracket(bare, bare, s, so3)


def test_bracket_matches_time_derivative_along_drift(so3):
    V = TracePotential(so3, np.diag([1.0, 2.0, 3.0]))
    H = DriftHamiltonian(V, InertiaOperator([1.0, 2.0, 3.0], so3))
    H0 = drift_observable(H)
    s = _random_state(so3, 4)
    h = 1e-4
    forward, backward = symplectic_drift_step(H, s, h), symplectic_drift_step(H, s, -h)
    for F in (trace_observable(np.eye(3), so3, 'tr g'), momentum_component_observable(so3, 0)):
        rate = (F(forward) - F(backward)) / (2 * h)
        assert rate == pytest.approx(poisson_bracket(F, H0, s, so3), abs=1e-5)


def test_hamiltonian_drift_vanishes_for_free_bi_invariant_motion(su2):
    s = _random_state(su2, 5)
    dm, xi = hamiltonian_drift(DriftHamiltonian(ZeroPotential(su2)), s)
    assert dm.norm() < 1e-14
    np.testing.assert_array_equal(xi.matrix, s.m.matrix)


def test_symplectic_drift_conserves_energy(so3):
    H = DriftHamiltonian(TracePotential(so3, np.eye(3)))
    s = _random_state(so3, 6)
    start = H.value(s)
    for _ in range(1000):
        s = symplectic_drift_step(H, s, 1e-3)
    assert abs(H.value(s) - start) < 1e-4


def test_symplectic_drift_keeps_spatial_momentum(so3):
    H = DriftHamiltonian(ZeroPotential(so3), InertiaOperator([1.0, 2.0, 3.0], so3))
    s = _random_state(so3, 7)

    def spatial(state):
        return state.g.matrix @ state.m.matrix @ inverse(state.g).matrix

    start = spatial(s)
    for _ in range(100):
        s = symplectic_drift_step(H, s, 1e-2)
    np.testing.assert_allclose(spatial(s), start, atol=1e-12)


def _max_energy_error(H, s, h, T):
    start = H.value(s)
    worst = 0.0
    for _ in range(int(round(T / h))):
        s = symplectic_drift_step(H, s, h)
        worst = max(worst, abs(H.value(s) - start))
    return worst


def test_symplectic_drift_is_second_order(so3):
    H = DriftHamiltonian(TracePotential(so3, np.eye(3)), InertiaOperator([1.0, 2.0, 3.0], so3))
    s = _random_state(so3, 12)
    coarse = _max_energy_error(H, s, 0.02, 2.0)
    fine = _max_energy_error(H, s, 0.01, 2.0)
    assert coarse > 1e-7
    assert coarse / fine == pytest.approx(4.0, rel=0.1)


def test_symplectic_drift_is_reversible(so3):
    H = DriftHamiltonian(TracePotential(so3, np.eye(3)), InertiaOperator([1.0, 2.0, 3.0], so3))
    s = _random_state(so3, 13)
    back = s
    for _ in range(10):
        back = symplectic_drift_step(H, back, 1e-2)
    assert not np.allclose(back.m.matrix, s.m.matrix)
    for _ in range(10):
        back = symplectic_drift_step(H, back, -1e-2)
    np.testing.assert_allclose(back.g.matrix, s.g.matrix, atol=1e-12)
    np.testing.assert_allclose(back.m.matrix, s.m.matrix, atol=1e-12)


def test_rigid_body_lie_poisson_is_isospectral(so3):
    H = DriftHamiltonian(ZeroPotential(so3), InertiaOperator([1.0, 2.0, 3.0], so3))
    m = so3.combine([1.0, 1.0, 1.0])
    spectrum, casimir, energy = momentum_spectrum(m), pairing(so3.metric, m, m), H.kinetic(m)
    for _ in range(2000):
        m = lie_poisson_step(H, m, 1e-3)
    np.testing.assert_allclose(momentum_spectrum(m), spectrum, atol=1e-10)
    assert pairing(so3.metric, m, m) == pytest.approx(casimir, abs=1e-10)
    assert H.kinetic(m) == pytest.approx(energy, abs=1e-4)
    assert not np.allclose(so3.coefficients(m), [1.0, 1.0, 1.0])


@pytest.mark.slow
def test_rigid_body_spectrum_over_long_runs(so3):
    H = DriftHamiltonian(ZeroPotential(so3), InertiaOperator([1.0, 2.0, 3.0], so3))
    m = so3.combine([1.0, 1.0, 1.0])
    spectrum, casimir = momentum_spectrum(m), pairing(so3.metric, m, m)
    for _ in range(100000):
        m = lie_poisson_step(H, m, 1e-2)
    assert np.max(np.abs(momentum_spectrum(m) - spectrum)) <= 1e-10
    assert pairing(so3.metric, m, m) == pytest.approx(casimir, abs=1e-10)


def test_bi_invariant_lie_poisson_is_stationary(su3):
    H = DriftHamiltonian(ZeroPotential(su3))
    m = sample_algebra_gaussian(RngStream(8, 0), su3)
    np.testing.assert_allclose(lie_poisson_step(H, m, 1e-2).matrix, m.matrix, atol=1e-13)


def test_stochastic_lie_poisson_is_isospectral(so3):
    H = DriftHamiltonian(ZeroPotential(so3), InertiaOperator([1.0, 2.0, 3.0], so3))
    m = so3.combine([0.3, -1.0, 0.5])
    spectrum = momentum_spectrum(m)
    rng = RngStream(9, 0)
    for _ in range(500):
        m = lie_poisson_step(H, m, 1e-2, basis_noise(rng, so3, 1e-2, 0.5))
    np.testing.assert_allclose(momentum_spectrum(m), spectrum, atol=1e-10)


def test_lie_poisson_noise_needs_one_increment_per_generator(so3):
    with pytest.raises(ValueError):
        LiePoissonNoise((lambda m: m,), np.zeros(2))


def test_phase_state_validation(so3, su2):
    with pytest.raises(DescriptorMismatchError):
        PhaseState(identity(so3.descriptor), AlgebraElement.zeros(su2.descriptor))
    bad = PhaseState(identity(so3.descriptor), so3[0] * np.nan)
    with pytest.raises(NonFiniteStateError):
        bad.validate()
    off = PhaseState(GroupElement(1.1 * np.eye(3), so3.descriptor), so3[0])
    with pytest.raises(ValueError):
        off.validate()


def test_inertia_requires_positive_coefficients(so3):
    with pytest.raises(ValueError):
        InertiaOperator([1.0, 0.0, 2.0], so3)
    with pytest.raises(ValueError):
        InertiaOperator([1.0, 2.0], so3)


def test_group_motion_follows_velocity(so3):
    H = DriftHamiltonian(ZeroPotential(so3))
    s = PhaseState(identity(so3.descriptor), so3[2])
    out = symplectic_drift_step(H, s, 0.5)
    np.testing.assert_allclose(out.g.matrix, expm(0.5 * so3[2].matrix), atol=1e-14)
    np.testing.assert_array_equal(out.m.matrix, so3[2].matrix)


def test_total_energy_of_trace_hamiltonian(so3):
    H = DriftHamiltonian(TracePotential(so3, np.eye(3)))
    s = PhaseState(identity(so3.descriptor), so3.elements[0])
    assert total_energy(H, s) == pytest.approx(0.5 - 3.0, abs=1e-12)
    assert total_energy(H, PhaseState(identity(so3.descriptor), AlgebraElement.zeros(so3.descriptor))) == pytest.approx(-3.0)


def test_left_trivialized_gradient(so3):
    V = TracePotential(so3, np.eye(3))
    assert np.allclose(left_trivialized_gradient(V, identity(so3.descriptor)).matrix, 0.0, atol=1e-14)
    g = haar_sample(RngStream(11, 0), so3.descriptor)
    np.testing.assert_allclose(left_trivialized_gradient(V, g).matrix, V.gradient(g).matrix)
