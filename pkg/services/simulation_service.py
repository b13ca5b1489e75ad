"""Run orchestration shared by the CLI and the HTTP API"""
import logging
import os
from typing import List

import numpy as np

from models.schemas import Command, GibbsOracleConfig, RunConfig, RunSummary
from services.basis_registry import BasisRegistry
from services.diagnostics import (
    compare_to_oracle,
    conservation_monitors,
    default_observable_suite,
    gibbs_oracle_samples,
    group_traces,
)
from services.group_ops import GroupElement, identity, rbm_path
from services.invariant_checks import SUITE_SEED, run_invariant_suite
from services.langevin import TrajectoryRecord, simulate_ensemble
from services.lie_structure import OrthonormalBasis
from services.mechanics import (
    DriftHamiltonian,
    InertiaOperator,
    basis_noise,
    build_potential,
    lie_poisson_step,
)
from utils.errors import OutputError
from utils.group_aliases import CHECK_ALL_GROUPS, CHECK_ALL_KEYWORD
from utils.output_writers import (
    config_sha256,
    emit_plot_data,
    emit_trace_histogram,
    group_columns,
    write_rbm_csv,
    write_report_json,
    write_table_csv,
    write_trajectory_csv,
    write_trajectory_jsonl,
)
from utils.rng import RngStream

logger = logging.getLogger(__name__)

# lie-poisson 보존량 허용치
LIE_POISSON_THRESHOLDS = {'spectrum': 1e-9, 'casimir': 1e-9}


class SimulationService:
    """실행 서비스: config → 시뮬레이션/진단 → 파일 저장 → RunSummary"""

    def __init__(self):
        """Initialize run service"""
        self.registry = BasisRegistry()

    def _basis(self, cfg: RunConfig, group: str = None) -> OrthonormalBasis:
        return self.registry.for_group(group or cfg.group, cfg.metric_kind, cfg.metric_scale)

    def _run_dir(self, cfg: RunConfig, digest: str) -> str:
        path = os.path.join(cfg.output_dir, f"{cfg.command.value}_{digest[:12]}")
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create output directory {path}: {e}") from e
        return path

    def _write_record(self, record: TrajectoryRecord, run_dir: str, name: str, cfg: RunConfig,
                      digest: str) -> str:
        if cfg.format == 'jsonl':
            return write_trajectory_jsonl(record, os.path.join(run_dir, f"{name}.jsonl"), digest)
        return write_trajectory_csv(record, os.path.join(run_dir, f"{name}.csv"), digest)

    def run(self, cfg: RunConfig) -> RunSummary:
        """
        명령 실행

        Args:
            cfg: 검증된 RunConfig

        Returns:
            RunSummary (exit_code 0: 성공, 1: 진단 실패)
        """
        digest = config_sha256(cfg)
        handlers = {
            Command.RBM: self._run_rbm,
            Command.LANGEVIN: self._run_langevin,
            Command.LIE_POISSON: self._run_lie_poisson,
            Command.GIBBS_ORACLE: self._run_gibbs_oracle,
            Command.CHECK: self._run_check,
            Command.COMPARE: self._run_compare,
        }
        logger.info("▶ %s on %s (config %s)", cfg.command.value, cfg.group, digest[:12])
        summary = handlers[cfg.command](cfg, digest)
        logger.info("%s %s finished with exit code %d", "✅" if summary.exit_code == 0 else "❌",
                    cfg.command.value, summary.exit_code)
        return summary

    def _run_rbm(self, cfg: RunConfig, digest: str) -> RunSummary:
        basis = self._basis(cfg)
        run_dir = self._run_dir(cfg, digest)
        artifacts = []
        endpoints: List[GroupElement] = []
        for i in range(cfg.n_traj):
            rng = RngStream(cfg.seed, cfg.stream_id + i)
            path = rbm_path(identity(basis.descriptor), cfg.T, cfg.h, rng, basis,
                            record_every=cfg.record_every, reproject_every=cfg.reproject_every)
            endpoints.append(path[-1][1])
            if i == 0:
                artifacts.append(write_rbm_csv(path, os.path.join(run_dir, 'rbm.csv'), digest))
        if not basis.descriptor.is_abelian:
            artifacts.append(emit_trace_histogram(group_traces(endpoints),
                                                  os.path.join(run_dir, 'rbm_trace_histogram.csv')))
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0, config_sha256=digest,
                          artifacts=artifacts, message=f"{cfg.n_traj} Brownian path(s)")

    def _run_langevin(self, cfg: RunConfig, digest: str) -> RunSummary:
        basis = self._basis(cfg)
        V = build_potential(cfg.potential, basis)
        m0 = basis.combine(cfg.m0) if cfg.m0 is not None else None
        inits = [(None, m0)] * cfg.n_traj if m0 is not None else None
        records = simulate_ensemble(cfg.langevin(), basis.descriptor, V, inits=inits,
                                    n_traj=cfg.n_traj, max_workers=cfg.workers)
        run_dir = self._run_dir(cfg, digest)
        artifacts = []
        for i, record in enumerate(records):
            artifacts.append(self._write_record(record, run_dir, f"langevin_{i:03d}", cfg, digest))
        report = conservation_monitors(records[0], basis)
        artifacts.append(write_report_json(report, os.path.join(run_dir, 'conservation.json')))
        artifacts.append(emit_plot_data(records[0], os.path.join(run_dir, 'plot_data.csv')))
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0 if report.passed else 1,
                          config_sha256=digest, artifacts=artifacts, passed=report.passed,
                          conservation=report, message=f"{len(records)} trajectory(ies)")

    def _run_lie_poisson(self, cfg: RunConfig, digest: str) -> RunSummary:
        basis = self._basis(cfg)
        descriptor = basis.descriptor
        inertia = InertiaOperator(cfg.inertia, basis) if cfg.inertia is not None else None
        H = DriftHamiltonian(build_potential(cfg.potential, basis), inertia)
        m = basis.combine(cfg.m0 if cfg.m0 is not None else np.ones(basis.dimension))
        rng = RngStream(cfg.seed, cfg.stream_id)

        e = identity(descriptor)
        times, coeffs, energy = [0.0], [basis.coefficients(m)], [H.kinetic(m)]
        n_steps = int(round(cfg.T / cfg.h))
        for k in range(1, n_steps + 1):
            noise = basis_noise(rng, basis, cfg.h, cfg.noise_scale) if cfg.noise_scale > 0 else None
            m = lie_poisson_step(H, m, cfg.h, noise)
            if k % cfg.record_every == 0 or k == n_steps:
                times.append(k * cfg.h)
                coeffs.append(basis.coefficients(m))
                energy.append(H.kinetic(m))
        coeffs = np.asarray(coeffs)
        record = TrajectoryRecord(
            descriptor=descriptor,
            times=np.asarray(times),
            g=np.repeat(np.asarray(e.matrix)[None, ...], len(times), axis=0),
            m=coeffs,
            energy=np.asarray(energy),
            casimir=np.sum(coeffs * coeffs, axis=1),
            defect=np.zeros(len(times)),
            metadata={'command': cfg.command.value, 'steps': n_steps},
        )
        report = conservation_monitors(record, basis, LIE_POISSON_THRESHOLDS)
        run_dir = self._run_dir(cfg, digest)
        d = basis.dimension
        rows = ([t, *c, E, C] for t, c, E, C in zip(record.times, record.m, record.energy, record.casimir))
        artifacts = [
            write_table_csv(['t'] + [f"m_{i + 1}" for i in range(d)] + ['energy', 'casimir'], rows,
                            os.path.join(run_dir, 'lie_poisson.csv'), digest),
            write_report_json(report, os.path.join(run_dir, 'conservation.json')),
            emit_plot_data(record, os.path.join(run_dir, 'plot_data.csv'), ('energy', 'casimir')),
        ]
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0 if report.passed else 1,
                          config_sha256=digest, artifacts=artifacts, passed=report.passed,
                          conservation=report,
                          message=f"spectrum drift {report.spectrum_drift_max:.3g} over {n_steps} steps")

    def _oracle(self, cfg: RunConfig, basis: OrthonormalBasis, V):
        oracle_cfg = GibbsOracleConfig(beta=cfg.beta, potential=cfg.potential, n_samples=cfg.n_samples,
                                       max_proposals=cfg.max_proposals)
        # oracle 스트림은 궤적 스트림과 겹치지 않도록 분리
        rng = RngStream(cfg.seed, (cfg.stream_id + cfg.n_traj) % (1 << 64))
        return gibbs_oracle_samples(oracle_cfg, basis.descriptor, basis, rng, V)

    def _run_gibbs_oracle(self, cfg: RunConfig, digest: str) -> RunSummary:
        basis = self._basis(cfg)
        V = build_potential(cfg.potential, basis)
        samples = self._oracle(cfg, basis, V)
        descriptor = basis.descriptor
        complex_entries = descriptor.scalar_field == 'complex'
        columns = (group_columns(descriptor.shape, complex_entries)
                   + [f"m_{i + 1}" for i in range(basis.dimension)] + ['V', 'tr_g'])

        def rows():
            for s in samples:
                flat = s.g.matrix.ravel()
                g_vals = [x for z in flat for x in (z.real, z.imag)] if complex_entries else list(np.real(flat))
                yield g_vals + list(basis.coefficients(s.m)) + [V.value(s.g), float(np.real(np.trace(s.g.matrix)))]

        run_dir = self._run_dir(cfg, digest)
        artifacts = [
            write_table_csv(columns, rows(), os.path.join(run_dir, 'gibbs_samples.csv'), digest),
            emit_trace_histogram(group_traces(s.g for s in samples),
                                 os.path.join(run_dir, 'gibbs_trace_histogram.csv')),
        ]
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0, config_sha256=digest,
                          artifacts=artifacts, message=f"{len(samples)} oracle samples")

    def _run_check(self, cfg: RunConfig, digest: str) -> RunSummary:
        groups = CHECK_ALL_GROUPS if cfg.group == CHECK_ALL_KEYWORD else (cfg.group,)
        checks = []
        for group in groups:
            checks.extend(run_invariant_suite(self._basis(cfg, group), seed=(SUITE_SEED + cfg.seed) % (1 << 64)))
        passed = all(c.passed for c in checks)
        run_dir = self._run_dir(cfg, digest)
        artifacts = [write_report_json(checks, os.path.join(run_dir, 'checks.json'))]
        failed = [f"{c.group}:{c.name}" for c in checks if not c.passed]
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0 if passed else 1,
                          config_sha256=digest, artifacts=artifacts, passed=passed, checks=checks,
                          message="all checks passed" if passed else "failed: " + ", ".join(failed))

    def _run_compare(self, cfg: RunConfig, digest: str) -> RunSummary:
        basis = self._basis(cfg)
        V = build_potential(cfg.potential, basis)
        records = simulate_ensemble(cfg.langevin(), basis.descriptor, V, n_traj=cfg.n_traj,
                                    max_workers=cfg.workers)
        samples = self._oracle(cfg, basis, V)
        A = cfg.potential.matrix()
        observables = default_observable_suite(basis, A)
        reports = compare_to_oracle(records, observables, samples, basis,
                                    burn_in_fraction=cfg.burn_in_fraction, threshold=cfg.z_threshold)
        passed = all(r.passed for r in reports)
        run_dir = self._run_dir(cfg, digest)
        artifacts = [write_report_json(reports, os.path.join(run_dir, 'moments.json'))]
        failed = [r.observable for r in reports if not r.passed]
        return RunSummary(command=cfg.command, group=cfg.group, exit_code=0 if passed else 1,
                          config_sha256=digest, artifacts=artifacts, passed=passed, moments=reports,
                          message="all observables within threshold" if passed
                          else "failing observables: " + ", ".join(failed))
