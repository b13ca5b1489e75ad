"""Pydantic schemas for run configuration and diagnostic reports"""
import json
import os
from enum import Enum
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config


class Command(str, Enum):
    RBM = 'rbm'
    LANGEVIN = 'langevin'
    LIE_POISSON = 'lie-poisson'
    GIBBS_ORACLE = 'gibbs-oracle'
    CHECK = 'check'
    COMPARE = 'compare'


class LangevinVariant(str, Enum):
    MOMENTUM = 'momentum'
    POSITION = 'position'
    SYMPLECTIC = 'symplectic'


class PotentialKind(str, Enum):
    ZERO = 'zero'
    TRACE = 'trace'
    QUADRATIC_EUCLIDEAN = 'quadratic_euclidean'
    CUSTOM = 'custom'


class PotentialSpec(BaseModel):
    """Potential V on the group: kind plus parameters"""
    model_config = ConfigDict(extra='forbid')

    kind: PotentialKind = Field(PotentialKind.ZERO, description="퍼텐셜 종류")
    A: Optional[List[List[float]]] = Field(None, description="trace 퍼텐셜 행렬 A (실수부)")
    A_imag: Optional[List[List[float]]] = Field(None, description="A의 허수부 (su(n) 전용)")
    A_file: Optional[str] = Field(None, description="A를 담은 .json 또는 .npy 파일 경로")
    k: Optional[List[float]] = Field(None, description="quadratic_euclidean 좌표별 강성 k_i > 0")

    @model_validator(mode='after')
    def _check_parameters(self):
        if self.A is not None and self.A_file is not None:
            raise ValueError("potential.A and potential.A_file are mutually exclusive")
        if self.A_file is not None and not os.path.isfile(self.A_file):
            raise ValueError(f"potential.A_file does not exist: {self.A_file}")
        if self.kind is PotentialKind.TRACE and self.A is None and self.A_file is None:
            raise ValueError("trace potential needs potential.A or potential.A_file")
        if self.kind is PotentialKind.QUADRATIC_EUCLIDEAN:
            if not self.k:
                raise ValueError("quadratic_euclidean potential needs potential.k")
            if any(not k > 0 for k in self.k):
                raise ValueError("potential.k entries must be positive")
        if self.kind is PotentialKind.CUSTOM:
            raise ValueError("custom potentials are programmatic only and cannot be configured")
        return self

    def matrix(self) -> Optional[np.ndarray]:
        """A as an array (complex when A_imag is given), loaded from A_file if needed"""
        if self.A_file is not None:
            if self.A_file.endswith('.npy'):
                return np.load(self.A_file)
            with open(self.A_file, 'r', encoding='utf-8') as f:
                data = json.load(f)
            if isinstance(data, dict):
                real = np.asarray(data['A'], dtype=float)
                imag = data.get('A_imag')
                return real if imag is None else real + 1j * np.asarray(imag, dtype=float)
            return np.asarray(data, dtype=float)
        if self.A is None:
            return None
        real = np.asarray(self.A, dtype=float)
        if self.A_imag is None:
            return real
        return real + 1j * np.asarray(self.A_imag, dtype=float)


class LangevinConfig(BaseModel):
    """Integrator settings shared by the three Langevin variants"""
    model_config = ConfigDict(extra='forbid')

    variant: LangevinVariant = Field(LangevinVariant.MOMENTUM, description="momentum / position / symplectic")
    beta: float = Field(1.0, gt=0, description="역온도 β")
    gamma: float = Field(1.0, ge=0, description="momentum/position 변형의 γ")
    gamma1: float = Field(1.0, ge=0, description="symplectic: 운동량 잡음 γ₁")
    gamma2: float = Field(1.0, ge=0, description="symplectic: 위치 잡음 γ₂")
    h: float = Field(1e-3, gt=0, description="스텝 크기")
    T: float = Field(10.0, ge=0, description="시간 지평")
    seed: int = Field(0, ge=0, lt=2 ** 64)
    stream_id: int = Field(0, ge=0, lt=2 ** 64)
    record_every: int = Field(10, ge=1)
    reproject_every: int = Field(default_factory=lambda: Config.REPROJECT_EVERY, ge=1)


class RunConfig(LangevinConfig):
    """One CLI/API run: command, group, potential and integrator settings"""
    model_config = ConfigDict(extra='forbid')

    command: Command
    group: str = Field('so3', description='"so3", "so5", "su2", "su3", "rn:<k>"')
    metric_kind: Literal['frobenius', 'negative_killing'] = 'frobenius'
    metric_scale: float = Field(1.0, gt=0)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    inertia: Optional[List[float]] = Field(None, description="강체 관성 계수 (직교정규 기저 기준)")
    m0: Optional[List[float]] = Field(None, description="초기 운동량 계수")
    noise_scale: float = Field(0.0, ge=0, description="lie-poisson 확률 잡음 세기")
    n_traj: int = Field(1, ge=1)
    workers: int = Field(default_factory=lambda: Config.DEFAULT_WORKERS, ge=1)
    n_samples: int = Field(10000, ge=1, description="Gibbs oracle 샘플 수")
    max_proposals: int = Field(default_factory=lambda: Config.ORACLE_MAX_PROPOSALS, ge=1)
    burn_in_fraction: float = Field(0.2, ge=0, lt=1)
    z_threshold: float = Field(3.0, gt=0)
    output_dir: str = Field(default_factory=lambda: Config.OUTPUT_DIR)
    format: Literal['csv', 'jsonl'] = 'csv'

    @model_validator(mode='after')
    def _check_group(self):
        # 순환 import 방지
        from services.lie_structure import AlgebraFamily
        from utils.descriptor_parser import parse_group
        from utils.group_aliases import CHECK_ALL_KEYWORD

        if self.command is Command.CHECK and self.group == CHECK_ALL_KEYWORD:
            return self
        descriptor = parse_group(self.group)
        if descriptor.is_abelian and self.command in (Command.GIBBS_ORACLE, Command.COMPARE):
            raise ValueError(f"{self.command.value} needs a compact group (no Haar measure on {self.group})")
        n, d = descriptor.ambient_size, descriptor.dimension
        A = self.potential.matrix()
        if A is not None and A.shape != (n, n):
            raise ValueError(f"potential.A must be {n}x{n} for {self.group}, got {A.shape}")
        if self.potential.kind is PotentialKind.QUADRATIC_EUCLIDEAN:
            if not descriptor.is_abelian:
                raise ValueError("quadratic_euclidean potential requires an rn:<k> group")
            if len(self.potential.k) != n:
                raise ValueError(f"potential.k must have {n} entries")
        if self.potential.kind is PotentialKind.TRACE and descriptor.is_abelian:
            raise ValueError("trace potential requires a compact group")
        if self.inertia is not None:
            if len(self.inertia) != d or any(not i > 0 for i in self.inertia):
                raise ValueError(f"inertia must hold {d} positive coefficients")
        if self.m0 is not None and len(self.m0) != d:
            raise ValueError(f"m0 must hold {d} coefficients")
        if self.metric_kind == 'negative_killing' and (
                descriptor.is_abelian or (descriptor.family is AlgebraFamily.SO and n < 3)):
            raise ValueError(f"negative_killing metric is degenerate on {self.group}")
        return self

    def langevin(self) -> LangevinConfig:
        return LangevinConfig(**{k: getattr(self, k) for k in LangevinConfig.model_fields})


class GibbsOracleConfig(BaseModel):
    """Rejection-sampling oracle settings"""
    beta: float = Field(1.0, gt=0)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    n_samples: int = Field(10000, ge=1)
    max_proposals: int = Field(default_factory=lambda: Config.ORACLE_MAX_PROPOSALS, ge=1)
    lower_bound: Optional[float] = Field(None, description="V의 하한 (없으면 퍼텐셜에서 계산)")


class MomentReport(BaseModel):
    """Ergodic average vs Gibbs oracle for one observable"""
    observable: str
    ergodic_mean: float
    standard_error: float = Field(..., ge=0)
    oracle_mean: float
    oracle_standard_error: float = Field(..., ge=0)
    z_score: float
    passed: bool


class ConservationReport(BaseModel):
    """Drift of conserved quantities along a trajectory"""
    energy_drift_max: float
    energy_drift_terminal: float
    casimir_drift_max: float
    casimir_drift_terminal: float
    spectrum_drift_max: float
    spectrum_drift_terminal: float
    defect_max: float
    thresholds: Dict[str, float] = Field(default_factory=dict)
    violations: List[str] = Field(default_factory=list)
    passed: bool = True


class CheckResult(BaseModel):
    """One property group of the invariant suite"""
    name: str
    group: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ''


class RunSummary(BaseModel):
    """What a run produced - CLI and API response format"""
    command: Command
    group: str
    exit_code: int
    config_sha256: str
    artifacts: List[str] = Field(default_factory=list)
    passed: Optional[bool] = None
    message: str = ''
    moments: List[MomentReport] = Field(default_factory=list)
    conservation: Optional[ConservationReport] = None
    checks: List[CheckResult] = Field(default_factory=list)
