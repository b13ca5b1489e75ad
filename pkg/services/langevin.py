"""
Langevin diffusions with double-bracket dissipation on reductive groups.

All three variants run through one splitting kernel

    B(h/2) A(h/2) [O(h) P(h)] A(h/2) B(h/2)

B kicks m with the potential gradient, A moves g along exp((h/2) m), O is the
exact Ornstein-Uhlenbeck step for the additive momentum noise (gamma1) and P
is a Stratonovich Heun step for the shared-increment position noise (gamma2).
Each step draws the W block (d normals) and then the W~ block (d normals),
whatever the variant, so symplectic(gamma1=0) is position and
symplectic(gamma2=0) is momentum bit for bit.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from models.schemas import LangevinConfig, LangevinVariant
from services.group_ops import GroupElement, compose, exp_algebra, group_defect, identity, reproject
from services.lie_structure import AlgebraDescriptor, AlgebraElement, OrthonormalBasis
from services.mechanics import DriftHamiltonian, PhaseState, Potential, coadjoint_flow
from utils.errors import DescriptorMismatchError, NonFiniteStateError
from utils.rng import RngStream

logger = logging.getLogger(__name__)


def variant_gammas(cfg: LangevinConfig) -> Tuple[float, float]:
    """(gamma1, gamma2): momentum-noise and position-noise strengths of the variant"""
    if cfg.variant is LangevinVariant.MOMENTUM:
        return cfg.gamma, 0.0
    if cfg.variant is LangevinVariant.POSITION:
        return 0.0, cfg.gamma
    return cfg.gamma1, cfg.gamma2


def langevin_kernel(s: PhaseState, beta: float, gamma1: float, gamma2: float, h: float,
                    V: Potential, rng: RngStream) -> PhaseState:
    """One step of the shared splitting scheme"""
    basis = V.basis
    d = basis.dimension
    zeta = rng.standard_normal(d)        # W
    zeta_tilde = rng.standard_normal(d)  # W~

    half = 0.5 * h
    m = s.m - half * V.gradient(s.g)
    g = compose(s.g, exp_algebra(half * m))

    if gamma1 > 0:
        decay = math.exp(-beta * gamma1 * h)
        spread = math.sqrt(-math.expm1(-2.0 * beta * gamma1 * h) / beta)
        m = decay * m + spread * basis.combine(zeta_tilde)

    if gamma2 > 0:
        noise = math.sqrt(2.0 * gamma2 * h) * basis.combine(zeta)
        friction = beta * gamma2 * h
        grad0 = V.gradient(g)
        predicted = compose(g, exp_algebra(noise - friction * grad0))
        theta = noise - 0.5 * friction * (grad0 + V.gradient(predicted))
        # same increment drives g and the bracket term of m
        m = coadjoint_flow(theta, m)
        g = compose(g, exp_algebra(theta))

    g = compose(g, exp_algebra(half * m))
    m = m - half * V.gradient(g)
    return PhaseState(g, m)


def _require(cfg: LangevinConfig, variant: LangevinVariant):
    if cfg.variant is not variant:
        raise ValueError(f"{variant.value} step called with a {cfg.variant.value} config")


def momentum_langevin_step(s: PhaseState, cfg: LangevinConfig, V: Potential, rng: RngStream) -> PhaseState:
    """Noise and friction in m only: BAOAB with an exact OU sub-step"""
    _require(cfg, LangevinVariant.MOMENTUM)
    return langevin_kernel(s, cfg.beta, cfg.gamma, 0.0, cfg.h, V, rng)


def position_langevin_step(s: PhaseState, cfg: LangevinConfig, V: Potential, rng: RngStream) -> PhaseState:
    """Brownian motion on g with the matching multiplicative noise on m"""
    _require(cfg, LangevinVariant.POSITION)
    return langevin_kernel(s, cfg.beta, 0.0, cfg.gamma, cfg.h, V, rng)


def symplectic_langevin_step(s: PhaseState, cfg: LangevinConfig, V: Potential, rng: RngStream) -> PhaseState:
    _require(cfg, LangevinVariant.SYMPLECTIC)
    return langevin_kernel(s, cfg.beta, cfg.gamma1, cfg.gamma2, cfg.h, V, rng)


def langevin_step(s: PhaseState, cfg: LangevinConfig, V: Potential, rng: RngStream) -> PhaseState:
    gamma1, gamma2 = variant_gammas(cfg)
    return langevin_kernel(s, cfg.beta, gamma1, gamma2, cfg.h, V, rng)


def generalized_momentum_langevin_step(
    s: PhaseState,
    cfg: LangevinConfig,
    V: Potential,
    diffusion_gradient: Callable[[np.ndarray], np.ndarray],
    rng: RngStream,
) -> PhaseState:
    """
    Euclidean momentum Langevin with position-dependent diffusion Hamiltonians.

    dp = -grad V dt - (beta/2) D D^T p dt + D o dW, dq = p dt, with
    D = diffusion_gradient(q) an n x k matrix in basis coordinates. B-A-O-A-B;
    O is the exact matrix OU step for D frozen at the mid-point q. Draws n
    normals per step.
    """
    basis = V.basis
    if not basis.descriptor.is_abelian:
        raise ValueError("generalized momentum Langevin is defined on R^n")
    n = basis.dimension
    zeta = rng.standard_normal(n)

    half = 0.5 * cfg.h
    m = s.m - half * V.gradient(s.g)
    g = compose(s.g, exp_algebra(half * m))

    D = np.atleast_2d(np.asarray(diffusion_gradient(g.matrix), dtype=float))
    if D.shape[0] != n:
        raise ValueError(f"diffusion gradient must have {n} rows, got {D.shape}")
    M = 0.5 * cfg.beta * (D @ D.T)
    lam, U = np.linalg.eigh(M)
    lam = np.clip(lam, 0.0, None)
    p = U.T @ basis.coefficients(m)
    p = np.exp(-lam * cfg.h) * p + np.sqrt(-np.expm1(-2.0 * lam * cfg.h) / cfg.beta) * (U.T @ zeta)
    m = basis.combine(U @ p)

    g = compose(g, exp_algebra(half * m))
    m = m - half * V.gradient(g)
    return PhaseState(g, m)


@dataclass
class TrajectoryRecord:
    """Recorded samples of one trajectory; m stored as basis coefficients"""
    descriptor: AlgebraDescriptor
    times: np.ndarray
    g: np.ndarray
    m: np.ndarray
    energy: np.ndarray
    casimir: np.ndarray
    defect: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, k: int, basis: OrthonormalBasis) -> PhaseState:
        return PhaseState(GroupElement(self.g[k], self.descriptor), basis.combine(self.m[k]))

    def states(self, basis: OrthonormalBasis) -> Iterator[PhaseState]:
        for k in range(len(self)):
            yield self.state(k, basis)


class TrajectoryRecorder:
    """Accumulates samples and freezes them into a TrajectoryRecord"""

    def __init__(self, H: DriftHamiltonian, basis: OrthonormalBasis):
        self.H = H
        self.basis = basis
        self._rows = {'times': [], 'g': [], 'm': [], 'energy': [], 'casimir': [], 'defect': []}

    def record(self, t: float, s: PhaseState):
        coeffs = self.basis.coefficients(s.m)
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(s.g.matrix))):
            raise NonFiniteStateError(f"trajectory became non-finite at t={t:g}")
        self._rows['times'].append(t)
        self._rows['g'].append(np.array(s.g.matrix))
        self._rows['m'].append(coeffs)
        self._rows['energy'].append(self.H.value(s))
        self._rows['casimir'].append(float(np.dot(coeffs, coeffs)))
        self._rows['defect'].append(group_defect(s.g))

    def freeze(self, metadata: dict = None) -> TrajectoryRecord:
        rows = self._rows
        d = self.basis.dimension
        shape = self.basis.descriptor.shape
        return TrajectoryRecord(
            descriptor=self.basis.descriptor,
            times=np.asarray(rows['times'], dtype=float),
            g=np.asarray(rows['g']) if rows['g'] else np.empty((0,) + shape),
            m=np.asarray(rows['m'], dtype=float).reshape(-1, d),
            energy=np.asarray(rows['energy'], dtype=float),
            casimir=np.asarray(rows['casimir'], dtype=float),
            defect=np.asarray(rows['defect'], dtype=float),
            metadata=dict(metadata or {}),
        )


def initial_state(descriptor: AlgebraDescriptor, basis: OrthonormalBasis,
                  g0: GroupElement = None, m0: AlgebraElement = None) -> PhaseState:
    g0 = identity(descriptor) if g0 is None else g0
    m0 = AlgebraElement.zeros(descriptor) if m0 is None else m0
    try:
        return PhaseState(g0, m0).validate()
    except (ValueError, DescriptorMismatchError) as e:
        raise ValueError(f"invalid initial state: {e}") from e


def simulate(cfg: LangevinConfig, descriptor: AlgebraDescriptor, V: Potential,
             g0: GroupElement = None, m0: AlgebraElement = None,
             step: Callable = None) -> TrajectoryRecord:
    """
    Run one trajectory of the configured variant.

    Args:
        cfg: integrator settings (variant, beta, gammas, h, T, seed, stream_id, cadences)
        descriptor: group
        V: potential bound to the basis that defines the noise directions
        g0, m0: initial state (identity and zero momentum by default)
        step: alternative step function with the langevin_step signature

    Returns:
        TrajectoryRecord with samples every cfg.record_every steps plus the last step
    """
    if V.descriptor != descriptor:
        raise DescriptorMismatchError(f"potential on {V.descriptor}, run on {descriptor}")
    basis = V.basis
    step = step or langevin_step
    s = initial_state(descriptor, basis, g0, m0)
    rng = RngStream(cfg.seed, cfg.stream_id)
    recorder = TrajectoryRecorder(DriftHamiltonian(V), basis)

    n_steps = int(round(cfg.T / cfg.h))
    logger.debug("simulate %s %s: %d steps (stream %d)", cfg.variant.value, descriptor, n_steps, cfg.stream_id)
    recorder.record(0.0, s)
    for k in range(1, n_steps + 1):
        s = step(s, cfg, V, rng)
        if k % cfg.reproject_every == 0 and not descriptor.is_abelian:
            s = PhaseState(reproject(s.g), s.m)
        if k % cfg.record_every == 0 or k == n_steps:
            recorder.record(k * cfg.h, s)
    return recorder.freeze({
        'variant': cfg.variant.value,
        'seed': cfg.seed,
        'stream_id': cfg.stream_id,
        'steps': n_steps,
    })


def _run_member(job) -> TrajectoryRecord:
    cfg, descriptor, V, g0, m0 = job
    return simulate(cfg, descriptor, V, g0, m0)


def simulate_ensemble(cfg: LangevinConfig, descriptor: AlgebraDescriptor, V: Potential,
                      inits: Optional[Sequence[Tuple[GroupElement, AlgebraElement]]] = None,
                      n_traj: int = 1, max_workers: int = 1) -> List[TrajectoryRecord]:
    """
    Independent trajectories on streams cfg.stream_id + index.

    Results are ordered by trajectory index and do not depend on max_workers.
    A process pool is used when max_workers > 1; the potential must then be
    picklable.
    """
    if inits is not None:
        n_traj = len(inits)
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    jobs = []
    for i in range(n_traj):
        g0, m0 = inits[i] if inits is not None else (None, None)
        member = cfg.model_copy(update={'stream_id': cfg.stream_id + i})
        jobs.append((member, descriptor, V, g0, m0))

    logger.info("ensemble of %d %s trajectories on %s (workers=%d)",
                n_traj, cfg.variant.value, descriptor, max_workers)
    if max_workers > 1 and n_traj > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(_run_member, jobs))
    return [_run_member(job) for job in jobs]
