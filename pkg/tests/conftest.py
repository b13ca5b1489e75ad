import pytest

from config import Config
from services.lie_structure import AlgebraDescriptor, AlgebraFamily, BiInvariantMetric, MetricKind, build_basis


@pytest.fixture
def make_basis():
    def _make(family: str, n: int, metric_kind: str = 'frobenius'):
        descriptor = AlgebraDescriptor(AlgebraFamily(family), n)
        return build_basis(descriptor, BiInvariantMetric(MetricKind(metric_kind)))
    return _make


@pytest.fixture
def so3(make_basis):
    return make_basis('so', 3)


@pytest.fixture
def su2(make_basis):
    return make_basis('su', 2)


@pytest.fixture
def su3(make_basis):
    return make_basis('su', 3)


@pytest.fixture
def r1(make_basis):
    return make_basis('rn', 1)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Artifacts of the test go to a fresh directory"""
    path = tmp_path / 'output'
    monkeypatch.setattr(Config, 'OUTPUT_DIR', str(path))
    return path
