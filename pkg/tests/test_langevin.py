import numpy as np
import pytest

from models.schemas import LangevinConfig, LangevinVariant
from services.diagnostics import compare_to_oracle, default_observable_suite, ergodic_average, gibbs_oracle_sample
from services.group_ops import GroupElement, group_defect, haar_sample, identity
from services.langevin import (
    generalized_momentum_langevin_step,
    langevin_step,
    momentum_langevin_step,
    position_langevin_step,
    simulate,
    simulate_ensemble,
    symplectic_langevin_step,
    variant_gammas,
)
from services.lie_structure import (
    AlgebraDescriptor,
    AlgebraFamily,
    BiInvariantMetric,
    MetricKind,
    build_basis,
    sample_algebra_gaussian,
)
from services.mechanics import PhaseState, QuadraticPotential, TracePotential, ZeroPotential
from utils.errors import DescriptorMismatchError
from utils.rng import RngStream


def _start(basis, seed=0):
    rng = RngStream(seed, 99)
    return PhaseState(haar_sample(rng, basis.descriptor), sample_algebra_gaussian(rng, basis))


def test_variant_gammas():
    assert variant_gammas(LangevinConfig(variant='momentum', gamma=0.4)) == (0.4, 0.0)
    assert variant_gammas(LangevinConfig(variant='position', gamma=0.4)) == (0.0, 0.4)
    assert variant_gammas(LangevinConfig(variant='symplectic', gamma1=0.2, gamma2=0.3)) == (0.2, 0.3)


@pytest.mark.parametrize('step,variant,gammas', [
    (momentum_langevin_step, LangevinVariant.MOMENTUM, dict(gamma1=0.7, gamma2=0.0)),
    (position_langevin_step, LangevinVariant.POSITION, dict(gamma1=0.0, gamma2=0.7)),
])
def test_symplectic_reduces_bitwise(step, variant, gammas, su2):
    V = TracePotential(su2, np.array([[1.0, 0.5], [0.0, 2.0]]))
    cfg = LangevinConfig(variant=variant, gamma=0.7, beta=2.0, h=5e-3)
    symplectic = LangevinConfig(variant=LangevinVariant.SYMPLECTIC, beta=2.0, h=5e-3, **gammas)
    direct = via = _start(su2)
    rng_direct, rng_via = RngStream(17, 3), RngStream(17, 3)
    for _ in range(50):
        direct = step(direct, cfg, V, rng_direct)
        via = symplectic_langevin_step(via, symplectic, V, rng_via)
    np.testing.assert_array_equal(direct.g.matrix, via.g.matrix)
    np.testing.assert_array_equal(direct.m.matrix, via.m.matrix)


def test_every_step_draws_both_noise_blocks(so3):
    V = ZeroPotential(so3)
    for variant in LangevinVariant:
        rng, replay = RngStream(1, 0), RngStream(1, 0)
        langevin_step(_start(so3), LangevinConfig(variant=variant), V, rng)
        replay.standard_normal(3)
        replay.standard_normal(3)
        assert rng.standard_normal() == replay.standard_normal()


def test_step_rejects_wrong_variant(so3):
    with pytest.raises(ValueError):
        momentum_langevin_step(_start(so3), LangevinConfig(variant='position'), ZeroPotential(so3), RngStream())


def test_simulate_is_reproducible_and_records_final_step(so3):
    V = TracePotential(so3, np.eye(3))
    cfg = LangevinConfig(variant='symplectic', T=0.1, h=0.01, record_every=3, seed=5)
    first = simulate(cfg, so3.descriptor, V)
    second = simulate(cfg, so3.descriptor, V)
    np.testing.assert_allclose(first.times, [0.0, 0.03, 0.06, 0.09, 0.1])
    np.testing.assert_array_equal(first.g, second.g)
    np.testing.assert_array_equal(first.m, second.m)
    assert first.metadata['steps'] == 10
    assert np.all(first.defect < 1e-12)

    other = simulate(cfg.model_copy(update={'stream_id': 1}), so3.descriptor, V)
    assert not np.array_equal(first.m, other.m)


def test_simulate_rejects_foreign_potential(so3, su2):
    with pytest.raises(DescriptorMismatchError):
        simulate(LangevinConfig(T=0.01), su2.descriptor, ZeroPotential(so3))


def test_simulate_rejects_off_group_start(so3):
    with pytest.raises(ValueError):
        simulate(LangevinConfig(T=0.01), so3.descriptor, ZeroPotential(so3),
                 g0=GroupElement(2.0 * np.eye(3), so3.descriptor))


def test_reprojection_keeps_long_runs_on_the_group(su3):
    V = TracePotential(su3, np.eye(3))
    cfg = LangevinConfig(variant='position', T=3.0, h=0.01, record_every=50, reproject_every=25)
    record = simulate(cfg, su3.descriptor, V)
    assert np.max(record.defect) < 1e-12
    assert group_defect(record.state(len(record) - 1, su3).g) < 1e-12


def test_ensemble_members_use_consecutive_streams(so3):
    V = TracePotential(so3, np.eye(3))
    cfg = LangevinConfig(T=0.05, h=0.01, seed=3, stream_id=10)
    ensemble = simulate_ensemble(cfg, so3.descriptor, V, n_traj=3)
    assert [r.metadata['stream_id'] for r in ensemble] == [10, 11, 12]
    single = simulate(cfg.model_copy(update={'stream_id': 11}), so3.descriptor, V)
    np.testing.assert_array_equal(ensemble[1].m, single.m)


def test_ensemble_does_not_depend_on_worker_count(so3):
    V = TracePotential(so3, np.eye(3))
    cfg = LangevinConfig(T=0.05, h=0.01, seed=3)
    serial = simulate_ensemble(cfg, so3.descriptor, V, n_traj=3, max_workers=1)
    pooled = simulate_ensemble(cfg, so3.descriptor, V, n_traj=3, max_workers=2)
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.g, b.g)
        np.testing.assert_array_equal(a.m, b.m)


def test_ensemble_with_initial_states(so3):
    m0 = so3.combine([1.0, 0.0, 0.0])
    inits = [(identity(so3.descriptor), m0), (None, None)]
    records = simulate_ensemble(LangevinConfig(T=0.0), so3.descriptor, ZeroPotential(so3), inits=inits)
    np.testing.assert_allclose(records[0].m[0], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(records[1].m[0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        simulate_ensemble(LangevinConfig(T=0.0), so3.descriptor, ZeroPotential(so3), n_traj=0)


def test_position_noise_keeps_casimir_without_potential(so3):
    cfg = LangevinConfig(variant='position', gamma=0.8, T=20.0, h=0.01, record_every=100)
    m0 = so3.combine([1.0, 0.5, -0.3])
    record = simulate(cfg, so3.descriptor, ZeroPotential(so3), m0=m0)
    np.testing.assert_allclose(record.casimir, record.casimir[0], rtol=1e-10)
    assert not np.allclose(record.m[-1], record.m[0])


def test_generalized_momentum_without_diffusion_is_verlet(make_basis):
    basis = make_basis('rn', 2)
    V = QuadraticPotential(basis, [1.0, 4.0])
    cfg = LangevinConfig(h=1e-3)
    s = PhaseState(GroupElement(np.array([1.0, 0.0]), basis.descriptor), basis.combine([0.0, 1.0]))
    energy = lambda st: V.value(st.g) + 0.5 * float(np.dot(st.m.matrix, st.m.matrix))
    start = energy(s)
    rng = RngStream(0, 0)
    for _ in range(1000):
        s = generalized_momentum_langevin_step(s, cfg, V, lambda q: np.zeros((2, 1)), rng)
    assert abs(energy(s) - start) < 1e-5


def test_generalized_momentum_validates_inputs(so3, make_basis):
    with pytest.raises(ValueError):
        generalized_momentum_langevin_step(_start(so3), LangevinConfig(), ZeroPotential(so3),
                                           lambda q: np.eye(3), RngStream())
    basis = make_basis('rn', 2)
    s = PhaseState(identity(basis.descriptor), basis.combine([0.0, 0.0]))
    with pytest.raises(ValueError):
        generalized_momentum_langevin_step(s, LangevinConfig(), ZeroPotential(basis),
                                           lambda q: np.eye(3), RngStream())


@pytest.mark.slow
@pytest.mark.parametrize('variant', list(LangevinVariant))
def test_euclidean_stationary_moments(variant, make_basis):
    # k = 4, beta = 1: E[q^2] = 1/4, E[p^2] = 1
    basis = make_basis('rn', 1)
    V = QuadraticPotential(basis, [4.0])
    cfg = LangevinConfig(variant=variant, beta=1.0, gamma=1.0, gamma1=1.0, gamma2=1.0,
                         h=0.01, T=2000.0, record_every=10, seed=2024)
    record = simulate(cfg, basis.descriptor, V)
    suite = default_observable_suite(basis)
    q_sq, p_sq = suite[1], suite[2]
    for obs, target in ((q_sq, 0.25), (p_sq, 1.0)):
        mean, se = ergodic_average(record, obs, 0.1, basis)
        assert abs(mean - target) < max(4 * se, 0.01 * target), (obs.name, mean, se)
        assert abs(mean - target) < 0.15 * target


@pytest.fixture(scope='module')
def so3_trace_oracle():
    basis = build_basis(AlgebraDescriptor(AlgebraFamily.SO, 3), BiInvariantMetric(MetricKind.FROBENIUS))
    V = TracePotential(basis, np.eye(3))
    rng = RngStream(4242, 0)
    return basis, V, [gibbs_oracle_sample(rng, 2.0, V, basis.descriptor, basis) for _ in range(10000)]


@pytest.mark.slow
@pytest.mark.parametrize('variant', list(LangevinVariant))
def test_trajectories_sample_the_gibbs_measure_on_so3(variant, so3_trace_oracle):
    basis, V, oracle = so3_trace_oracle
    cfg = LangevinConfig(variant=variant, beta=2.0, gamma=1.0, gamma1=1.0, gamma2=1.0,
                         h=0.01, T=2000.0, record_every=10, seed=77)
    record = simulate(cfg, basis.descriptor, V)
    reports = compare_to_oracle(record, default_observable_suite(basis, np.eye(3)), oracle, basis,
                                burn_in_fraction=0.1, threshold=4.0)
    assert len(reports) == 6
    assert all(r.passed for r in reports), [(r.observable, r.ergodic_mean, r.oracle_mean, r.z_score)
                                            for r in reports]
