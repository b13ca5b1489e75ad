"""Models package for run configuration and report schemas"""
from .schemas import (
    CheckResult,
    Command,
    ConservationReport,
    GibbsOracleConfig,
    LangevinConfig,
    LangevinVariant,
    MomentReport,
    PotentialKind,
    PotentialSpec,
    RunConfig,
    RunSummary,
)

__all__ = [
    'CheckResult', 'Command', 'ConservationReport', 'GibbsOracleConfig', 'LangevinConfig',
    'LangevinVariant', 'MomentReport', 'PotentialKind', 'PotentialSpec', 'RunConfig', 'RunSummary',
]
