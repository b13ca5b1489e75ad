"""Statistical verification: Gibbs oracle, ergodic averages, generator test, monitors, ESS"""
import logging
import math
from typing import Callable, Iterable, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy.stats import ks_2samp

from config import Config
from models.schemas import ConservationReport, GibbsOracleConfig, LangevinVariant, MomentReport
from services.group_ops import GroupElement, haar_sample
from services.langevin import TrajectoryRecord
from services.lie_structure import AlgebraDescriptor, AlgebraElement, OrthonormalBasis, pairing, project_to_algebra
from services.mechanics import (
    DriftHamiltonian,
    Observable,
    PhaseState,
    Potential,
    bracket_observable,
    build_potential,
    poisson_bracket,
    product_observable,
)
from utils.errors import DiagnosticError, OracleError, UnsupportedFamilyError
from utils.rng import RngStream

logger = logging.getLogger(__name__)

# Kolmogorov-Smirnov c(alpha) for alpha = 0.01
KS_C_ALPHA_01 = 1.628


class AutocorrelationResult(NamedTuple):
    tau: float
    ess: float
    degenerate: bool


class KsResult(NamedTuple):
    statistic: float
    pvalue: float


class StationarityResult(NamedTuple):
    observable: str
    mean: float
    standard_error: float
    z_score: float
    passed: bool


# ---------------------------------------------------------------------------
# Gibbs oracle
# ---------------------------------------------------------------------------

def gibbs_oracle_sample(rng: RngStream, beta: float, V: Potential, descriptor: AlgebraDescriptor,
                        basis: OrthonormalBasis, max_proposals: int = None,
                        lower_bound: float = None) -> PhaseState:
    """
    One exact draw from Z^-1 exp(-beta H0) mu(dg) lambda(dm).

    m is Gaussian with covariance I/beta in the orthonormal basis; g is drawn
    by rejection from Haar proposals with acceptance exp(-beta (V(g) - V_min)).
    """
    if descriptor.is_abelian:
        raise UnsupportedFamilyError("Gibbs oracle needs a compact group (Haar reference measure)")
    v_min = V.lower_bound() if lower_bound is None else lower_bound
    if v_min is None:
        raise OracleError("potential has no lower bound; rejection sampling is unavailable")
    max_proposals = max_proposals or Config.ORACLE_MAX_PROPOSALS

    m = basis.combine(rng.standard_normal(basis.dimension)) / math.sqrt(beta)
    for _ in range(max_proposals):
        g = haar_sample(rng, descriptor)
        excess = V.value(g) - v_min
        if excess < -1e-9 * max(1.0, abs(v_min)):
            raise OracleError(f"lower bound {v_min:g} exceeds V(g) = {V.value(g):g}; bound misconfigured")
        if rng.uniform() < math.exp(-beta * max(excess, 0.0)):
            return PhaseState(g, m)
    raise OracleError(f"no proposal accepted in {max_proposals} tries (beta={beta:g}, V_min={v_min:g})")


def gibbs_oracle_samples(cfg: GibbsOracleConfig, descriptor: AlgebraDescriptor, basis: OrthonormalBasis,
                         rng: RngStream, V: Potential = None) -> List[PhaseState]:
    """cfg.n_samples i.i.d. oracle draws; V defaults to the configured potential"""
    V = V or build_potential(cfg.potential, basis)
    samples = [
        gibbs_oracle_sample(rng, cfg.beta, V, descriptor, basis, cfg.max_proposals, cfg.lower_bound)
        for _ in range(cfg.n_samples)
    ]
    logger.info("Gibbs oracle: %d samples on %s at beta=%g", len(samples), descriptor, cfg.beta)
    return samples


# ---------------------------------------------------------------------------
# Averages and standard errors
# ---------------------------------------------------------------------------

def batch_means(series) -> Tuple[float, float]:
    """
    Mean and batch-means standard error with floor(sqrt(N)) batches.

    A constant series returns SE 0 and logs a warning.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise DiagnosticError("empty series")
    mean = float(np.mean(x))
    if np.all(x == x[0]):
        logger.warning("degenerate (constant) series of length %d: standard error set to 0", n)
        return mean, 0.0
    if n < 4:
        return mean, float(np.std(x, ddof=1) / math.sqrt(n))
    n_batches = int(math.isqrt(n))
    size = n // n_batches
    # drop the oldest remainder so every batch has the same length
    batches = x[n - n_batches * size:].reshape(n_batches, size).mean(axis=1)
    return mean, float(np.std(batches, ddof=1) / math.sqrt(n_batches))


def observable_series(traj: TrajectoryRecord, obs: Observable, basis: OrthonormalBasis,
                      burn_in_fraction: float = 0.0) -> np.ndarray:
    """obs evaluated at the recorded states after burn-in"""
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    start = int(math.floor(burn_in_fraction * len(traj)))
    if start >= len(traj):
        raise DiagnosticError("trajectory has no samples after burn-in")
    return np.array([obs(traj.state(k, basis)) for k in range(start, len(traj))])


def ergodic_average(traj: TrajectoryRecord, obs: Observable, burn_in_fraction: float,
                    basis: OrthonormalBasis) -> Tuple[float, float]:
    """Time average after burn-in with its batch-means standard error"""
    return batch_means(observable_series(traj, obs, basis, burn_in_fraction))


def _z_score(delta: float, se: float) -> float:
    if se > 0:
        return abs(delta) / se
    return 0.0 if delta == 0 else math.inf


def compare_to_oracle(trajs: Union[TrajectoryRecord, Sequence[TrajectoryRecord]],
                      observables: Iterable[Observable], oracle_samples: Sequence[PhaseState],
                      basis: OrthonormalBasis, burn_in_fraction: float = 0.2,
                      threshold: float = 3.0) -> List[MomentReport]:
    """
    Ergodic means vs oracle means, one MomentReport per observable.

    Several trajectories are pooled by averaging their means; their
    batch-means errors combine in quadrature.
    """
    if isinstance(trajs, TrajectoryRecord):
        trajs = [trajs]
    if not trajs:
        raise DiagnosticError("no trajectories to compare")
    if not oracle_samples:
        raise DiagnosticError("no oracle samples to compare against")

    reports = []
    for obs in observables:
        stats = [ergodic_average(t, obs, burn_in_fraction, basis) for t in trajs]
        mean = float(np.mean([m for m, _ in stats]))
        se = math.sqrt(sum(e * e for _, e in stats)) / len(stats)
        values = np.array([obs(s) for s in oracle_samples])
        oracle_mean = float(np.mean(values))
        oracle_se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        z = _z_score(mean - oracle_mean, math.hypot(se, oracle_se))
        reports.append(MomentReport(
            observable=obs.name,
            ergodic_mean=mean,
            standard_error=se,
            oracle_mean=oracle_mean,
            oracle_standard_error=oracle_se,
            z_score=z,
            passed=z <= threshold,
        ))
    failed = [r.observable for r in reports if not r.passed]
    if failed:
        logger.warning("❌ oracle comparison failed for %s", ", ".join(failed))
    else:
        logger.info("✅ oracle comparison passed for %d observables", len(reports))
    return reports


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def trace_observable(B: np.ndarray, basis: OrthonormalBasis, name: str) -> Observable:
    """F = Re tr(B^dagger g), dg_triv F = Pi(g^dagger B) / factor"""
    descriptor = basis.descriptor
    factor = basis.metric.factor(descriptor)
    zero = AlgebraElement.zeros(descriptor)
    return Observable(
        name=name,
        value=lambda s: float(np.real(np.vdot(B, s.g.matrix))),
        dm=lambda s: zero,
        dg_triv=lambda s: project_to_algebra(s.g.matrix.conj().T @ B, descriptor) / factor,
    )


def momentum_square_observable(basis: OrthonormalBasis, name: str = 'Q(m,m)', weight: float = 1.0) -> Observable:
    """weight * Q(m, m)"""
    zero = AlgebraElement.zeros(basis.descriptor)
    return Observable(
        name=name,
        value=lambda s: weight * pairing(basis.metric, s.m, s.m),
        dm=lambda s: (2.0 * weight) * s.m,
        dg_triv=lambda s: zero,
    )


def momentum_component_observable(basis: OrthonormalBasis, i: int = 0) -> Observable:
    """Q(m, X_i)"""
    X = basis[i]
    zero = AlgebraElement.zeros(basis.descriptor)
    return Observable(
        name=f"Q(m,X_{i + 1})",
        value=lambda s: pairing(basis.metric, s.m, X),
        dm=lambda s: X,
        dg_triv=lambda s: zero,
    )


def _square(F: Observable, name: str) -> Observable:
    return Observable(
        name=name,
        value=lambda s: F(s) ** 2,
        dm=lambda s: (2.0 * F(s)) * F.dm(s),
        dg_triv=lambda s: (2.0 * F(s)) * F.dg_triv(s),
    )


def _position_coordinate(basis: OrthonormalBasis, i: int) -> Observable:
    """q_i on R^n (abelian suite)"""
    X = basis[i]
    zero = AlgebraElement.zeros(basis.descriptor)
    factor = basis.metric.factor(basis.descriptor)
    return Observable(
        name=f"q_{i + 1}",
        value=lambda s: factor * float(np.dot(X.matrix, s.g.matrix)),
        dm=lambda s: zero,
        dg_triv=lambda s: X,
    )


def default_observable_suite(basis: OrthonormalBasis, A: np.ndarray = None) -> List[Observable]:
    """
    Observables with analytic derivatives used by compare and the generator test.

    Compact groups: tr g, (tr g)^2, Q(m,m), Q(m,X_1), Re tr(A^dagger g), tr(g) Q(m,m).
    R^n: q_1, q_1^2, Q(m,m), Q(m,X_1).
    """
    descriptor = basis.descriptor
    if descriptor.is_abelian:
        q1 = _position_coordinate(basis, 0)
        return [q1, _square(q1, 'q_1^2'), momentum_square_observable(basis),
                momentum_component_observable(basis, 0)]
    n = descriptor.ambient_size
    A = np.eye(n) if A is None else np.asarray(A)
    tr = trace_observable(np.eye(n), basis, 'tr g')
    mm = momentum_square_observable(basis)
    return [
        tr,
        _square(tr, '(tr g)^2'),
        mm,
        momentum_component_observable(basis, 0),
        trace_observable(A, basis, 'Re tr(A^dagger g)'),
        product_observable(tr, mm),
    ]


def drift_observable(H: DriftHamiltonian) -> Observable:
    return Observable(
        name='H0',
        value=H.value,
        dm=lambda s: H.velocity(s.m),
        dg_triv=lambda s: H.potential.gradient(s.g),
    )


def diffusion_hamiltonians(variant: LangevinVariant, gamma1: float, gamma2: float,
                           basis: OrthonormalBasis) -> List[Observable]:
    """
    Diffusion Hamiltonians linear in the Darboux coordinates.

    Momentum family (gamma1): specified by its left-trivialised derivative
    -sqrt(2 gamma1) X_i only. On R^n that derivative integrates to
    -sqrt(2 gamma1) Q(X_i, q); on a non-abelian group the 1-form has no
    primitive, so evaluating the value raises DiagnosticError and only the
    derivatives enter the brackets. Position family (gamma2):
    H_i = sqrt(2 gamma2) Q(m, X_i).
    """
    variant = LangevinVariant(variant)
    zero = AlgebraElement.zeros(basis.descriptor)
    result = []
    if variant in (LangevinVariant.MOMENTUM, LangevinVariant.SYMPLECTIC) and gamma1 > 0:
        c = math.sqrt(2.0 * gamma1)
        for i, X in enumerate(basis):
            result.append(Observable(
                name=f"H_mom_{i + 1}",
                value=_momentum_family_value(X, c, basis),
                dm=lambda s: zero,
                dg_triv=(lambda X, c: lambda s: -c * X)(X, c),
            ))
    if variant in (LangevinVariant.POSITION, LangevinVariant.SYMPLECTIC) and gamma2 > 0:
        c = math.sqrt(2.0 * gamma2)
        for i, X in enumerate(basis):
            result.append(Observable(
                name=f"H_pos_{i + 1}",
                value=(lambda X, c: lambda s: c * pairing(basis.metric, s.m, X))(X, c),
                dm=(lambda X, c: lambda s: c * X)(X, c),
                dg_triv=lambda s: zero,
            ))
    return result


def _momentum_family_value(X: AlgebraElement, c: float, basis: OrthonormalBasis) -> Callable:
    if basis.descriptor.is_abelian:
        # linear in q, so the value matches the trivialised derivative exactly
        factor = basis.metric.factor(basis.descriptor)
        return lambda s: -c * factor * float(np.dot(X.matrix, s.g.matrix))

    def undefined(s: PhaseState) -> float:
        raise DiagnosticError(f"momentum-family Hamiltonians on {basis.descriptor} are defined by derivatives only")
    return undefined


# ---------------------------------------------------------------------------
# Generator stationarity
# ---------------------------------------------------------------------------

def generator_value(F: Observable, s: PhaseState, H0: Observable, diffusion: Sequence[Observable],
                    beta: float, basis: OrthonormalBasis, include_double_bracket: bool = True,
                    brackets: Sequence[Observable] = None) -> float:
    """
    LF = {F,H0} + (beta/2) sum_i {H_i,H0}{F,H_i} + 1/2 sum_i {{F,H_i},H_i}.

    include_double_bracket=False drops the (beta/2) dissipation term.
    """
    brackets = brackets or [bracket_observable(F, Hi, basis) for Hi in diffusion]
    total = poisson_bracket(F, H0, s, basis)
    for Hi, FHi in zip(diffusion, brackets):
        if include_double_bracket:
            total += 0.5 * beta * poisson_bracket(Hi, H0, s, basis) * FHi(s)
        total += 0.5 * poisson_bracket(FHi, Hi, s, basis)
    return total


def generator_stationarity(variant: LangevinVariant, beta: float, gammas: Tuple[float, float],
                           V: Potential, observables: Iterable[Observable],
                           oracle_samples: Sequence[PhaseState], basis: OrthonormalBasis,
                           include_double_bracket: bool = True,
                           threshold: float = 3.0) -> List[StationarityResult]:
    """
    Weak-form stationarity: the Gibbs mean of LF vanishes for every observable.

    Args:
        variant: which diffusion Hamiltonians enter the generator
        beta: inverse temperature
        gammas: (gamma1, gamma2) as returned by variant_gammas
        V: potential of the drift Hamiltonian
        observables: observables with analytic derivatives
        oracle_samples: i.i.d. Gibbs draws
        basis: orthonormal basis
        include_double_bracket: keep the dissipation term (False is the mutation test)
        threshold: pass iff |mean| / SE <= threshold

    Returns:
        one StationarityResult per observable
    """
    if not oracle_samples:
        raise DiagnosticError("no oracle samples")
    H0 = drift_observable(DriftHamiltonian(V))
    diffusion = diffusion_hamiltonians(variant, gammas[0], gammas[1], basis)
    results = []
    for F in observables:
        if not F.has_derivatives:
            raise DiagnosticError(f"observable {F.name!r} needs analytic derivatives for the generator test")
        brackets = [bracket_observable(F, Hi, basis) for Hi in diffusion]
        values = np.array([
            generator_value(F, s, H0, diffusion, beta, basis, include_double_bracket, brackets)
            for s in oracle_samples
        ])
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        z = _z_score(mean, se)
        results.append(StationarityResult(F.name, mean, se, z, z <= threshold))
    logger.info("generator test (%s, %d samples): max |z| = %.2f",
                LangevinVariant(variant).value, len(oracle_samples),
                max((r.z_score for r in results), default=0.0))
    return results


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------

def momentum_spectrum(m: AlgebraElement) -> np.ndarray:
    """Sorted spectrum of m (of the Hermitian i m for matrix algebras)"""
    if m.descriptor.is_abelian:
        return np.sort(m.matrix)
    return np.linalg.eigvalsh(1j * m.matrix)


def conservation_monitors(traj: TrajectoryRecord, basis: OrthonormalBasis,
                          thresholds: dict = None) -> ConservationReport:
    """
    Drifts of energy, Casimir Q(m,m) and the spectrum of m against the first sample.

    Energy and Casimir drifts are relative to max(1, |initial value|). A quantity
    fails only when a threshold is given for it ('energy', 'casimir',
    'spectrum', 'defect'); the defect threshold defaults to 1e-9.
    """
    if len(traj) == 0:
        raise DiagnosticError("empty trajectory")
    limits = {'defect': 1e-9}
    limits.update(thresholds or {})

    def drift(series):
        series = np.asarray(series, dtype=float)
        d = np.abs(series - series[0]) / max(1.0, abs(series[0]))
        return float(np.max(d)), float(d[-1])

    energy_max, energy_end = drift(traj.energy)
    casimir_max, casimir_end = drift(traj.casimir)
    spectra = np.array([momentum_spectrum(basis.combine(c)) for c in traj.m])
    spec = np.max(np.abs(spectra - spectra[0]), axis=1) if spectra.size else np.zeros(1)
    observed = {
        'energy': energy_max,
        'casimir': casimir_max,
        'spectrum': float(np.max(spec)),
        'defect': float(np.max(traj.defect)),
    }
    violations = [k for k, limit in limits.items() if k in observed and observed[k] > limit]
    return ConservationReport(
        energy_drift_max=energy_max,
        energy_drift_terminal=energy_end,
        casimir_drift_max=casimir_max,
        casimir_drift_terminal=casimir_end,
        spectrum_drift_max=observed['spectrum'],
        spectrum_drift_terminal=float(spec[-1]),
        defect_max=observed['defect'],
        thresholds=limits,
        violations=violations,
        passed=not violations,
    )


def autocorrelation_ess(series) -> AutocorrelationResult:
    """
    Integrated autocorrelation time tau = sum_{t>=1} rho_t, truncated by the
    initial positive sequence of paired autocorrelations, and ESS = N / (2 tau + 1).
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DiagnosticError("need at least two samples for an autocorrelation estimate")
    x = x - np.mean(x)
    if not np.any(x):
        logger.warning("degenerate (constant) series: autocorrelation undefined")
        return AutocorrelationResult(0.0, float(n), True)
    f = np.fft.rfft(x, n=2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    pair_sum = 0.0
    for k in range(n // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0:
            break
        pair_sum += pair
    tau = pair_sum - 1.0
    return AutocorrelationResult(float(tau), float(n / (2.0 * tau + 1.0)), False)


def trace_ks_test(a, b) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test (scipy) on trace samples"""
    result = ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return KsResult(float(result.statistic), float(result.pvalue))


def ks_critical_value(n: int, m: int, c_alpha: float = KS_C_ALPHA_01) -> float:
    """Asymptotic two-sample KS critical value c(alpha) sqrt((n + m) / (n m))"""
    return c_alpha * math.sqrt((n + m) / (n * m))


def group_traces(elements: Iterable[GroupElement]) -> np.ndarray:
    return np.array([float(np.real(np.trace(g.matrix))) for g in elements])
