import numpy as np
import pytest

from services.group_ops import (
    GroupElement,
    adjoint_action,
    compose,
    exp_algebra,
    geodesic,
    group_defect,
    haar_sample,
    identity,
    inverse,
    rbm_path,
    rbm_step,
    reproject,
)
from services.diagnostics import group_traces, ks_critical_value, trace_ks_test
from services.lie_structure import sample_algebra_gaussian
from utils.errors import GroupProjectionError, NonFiniteStateError, UnsupportedFamilyError
from utils.rng import RngStream


@pytest.mark.parametrize('family,n', [('so', 3), ('so', 5), ('su', 2), ('su', 3)])
def test_exp_lands_on_group(family, n, make_basis):
    basis = make_basis(family, n)
    rng = RngStream(11, 0)
    for _ in range(5):
        g = exp_algebra(2.0 * sample_algebra_gaussian(rng, basis))
        assert group_defect(g) < 1e-12
        product = compose(g, inverse(g))
        np.testing.assert_allclose(product.matrix, np.eye(n), atol=1e-12)


def test_exp_rejects_non_finite(so3):
    with pytest.raises(NonFiniteStateError):
        exp_algebra(so3[0] * np.nan)


def test_reproject_small_perturbation(so3):
    g = haar_sample(RngStream(5, 0), so3.descriptor)
    noise = RngStream(5, 1).standard_normal((3, 3))
    fixed = reproject(GroupElement(g.matrix + 1e-6 * noise, so3.descriptor))
    assert group_defect(fixed) <= 1e-13
    assert np.linalg.norm(fixed.matrix - g.matrix) < 1e-5


def test_reproject_su_removes_determinant_phase(su2):
    g = haar_sample(RngStream(6, 0), su2.descriptor)
    drifted = GroupElement(g.matrix * np.exp(1e-4j), su2.descriptor)
    fixed = reproject(drifted)
    assert abs(np.linalg.det(fixed.matrix) - 1.0) < 1e-13
    assert group_defect(fixed) < 1e-13


def test_reproject_rejects_far_matrices(so3):
    with pytest.raises(GroupProjectionError):
        reproject(GroupElement(2.0 * np.eye(3), so3.descriptor))
    with pytest.raises(GroupProjectionError):
        reproject(GroupElement(np.diag([-1.0, 1.0, 1.0]), so3.descriptor))


def test_group_defect_sees_determinant_sign(so3):
    reflection = GroupElement(np.diag([-1.0, 1.0, 1.0]), so3.descriptor)
    assert group_defect(reflection) == pytest.approx(2.0)
    assert group_defect(identity(so3.descriptor)) == 0.0


def test_haar_sample_on_group_and_centred(so3, su2):
    for basis in (so3, su2):
        rng = RngStream(21, 0)
        traces = []
        for _ in range(2000):
            g = haar_sample(rng, basis.descriptor)
            assert group_defect(g) < 1e-12
            traces.append(np.real(np.trace(g.matrix)))
        # E[tr g] = 0 and E[tr(g)^2] = 1 under Haar measure
        assert abs(np.mean(traces)) < 0.1
        assert np.mean(np.square(traces)) == pytest.approx(1.0, abs=0.15)


def test_haar_sample_rejects_abelian(make_basis):
    with pytest.raises(UnsupportedFamilyError):
        haar_sample(RngStream(0, 0), make_basis('rn', 2).descriptor)


def test_geodesic_and_adjoint_action(su3):
    rng = RngStream(8, 0)
    X, Y = sample_algebra_gaussian(rng, su3), sample_algebra_gaussian(rng, su3)
    e = identity(su3.descriptor)
    np.testing.assert_allclose(geodesic(e, X, 0.7).matrix,
                               compose(geodesic(e, X, 0.3), geodesic(e, X, 0.4)).matrix, atol=1e-12)
    g = haar_sample(rng, su3.descriptor)
    assert adjoint_action(g, Y).is_member(1e-12)


def test_rbm_step_consumes_draws_even_for_zero_step(so3):
    g = identity(so3.descriptor)
    rng, replay = RngStream(3, 0), RngStream(3, 0)
    assert rbm_step(g, 0.0, rng, so3) is g
    replay.standard_normal(3)
    assert rng.standard_normal() == replay.standard_normal()
    with pytest.raises(ValueError):
        rbm_step(g, -1.0, rng, so3)


def test_rbm_path_recording(so3):
    e = identity(so3.descriptor)
    assert len(rbm_path(e, 0.0, 0.01, RngStream(1, 0), so3)) == 1

    path = rbm_path(e, 1.0, 0.01, RngStream(1, 0), so3, record_every=30)
    assert [t for t, _ in path] == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    assert max(group_defect(g) for _, g in path) < 1e-10


def test_rbm_path_is_reproducible(su2):
    e = identity(su2.descriptor)
    first = rbm_path(e, 0.5, 0.01, RngStream(9, 4), su2)
    second = rbm_path(e, 0.5, 0.01, RngStream(9, 4), su2)
    assert all(np.array_equal(a.matrix, b.matrix) for (_, a), (_, b) in zip(first, second))


def test_rbm_on_line_sums_increments(make_basis):
    basis = make_basis('rn', 2)
    h = 0.01
    path = rbm_path(identity(basis.descriptor), 1.0, h, RngStream(2, 0), basis, record_every=100)
    increments = RngStream(2, 0).standard_normal((100, 2))
    np.testing.assert_allclose(path[-1][1].matrix, np.sqrt(h) * increments.sum(axis=0), atol=1e-12)


def test_rbm_path_validates_arguments(so3):
    e = identity(so3.descriptor)
    with pytest.raises(ValueError):
        rbm_path(e, 1.0, 0.0, RngStream(0, 0), so3)
    with pytest.raises(ValueError):
        rbm_path(e, -1.0, 0.1, RngStream(0, 0), so3)
    with pytest.raises(ValueError):
        rbm_path(e, 1.0, 0.1, RngStream(0, 0), so3, record_every=0)


@pytest.mark.slow
def test_brownian_motion_equilibrates_to_haar(so3):
    # E[tr g_T] = 3 exp(-T/2) from the identity, ~0.02 at T = 10
    n = 2000
    endpoints = [rbm_path(identity(so3.descriptor), 10.0, 1e-2, RngStream(31, i), so3, record_every=1000)[-1][1]
                 for i in range(n)]
    traces = group_traces(endpoints)
    assert abs(np.mean(traces)) < 0.1
    assert np.mean(traces ** 2) == pytest.approx(1.0, abs=0.15)

    haar_rng = RngStream(32, 0)
    reference = group_traces(haar_sample(haar_rng, so3.descriptor) for _ in range(n))
    assert trace_ks_test(traces, reference).statistic < ks_critical_value(n, n)
