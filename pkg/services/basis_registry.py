"""Process-wide cache of orthonormal bases"""
import logging
import threading
from typing import Dict, Tuple

from services.lie_structure import (
    AlgebraDescriptor,
    BiInvariantMetric,
    MetricKind,
    OrthonormalBasis,
    build_basis,
)
from utils.descriptor_parser import parse_group

logger = logging.getLogger(__name__)


class BasisRegistry:
    """직교정규 기저 캐시 (Singleton)"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(BasisRegistry, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        """Initialize the cache (only once)"""
        if BasisRegistry._initialized:
            return
        self._bases: Dict[Tuple[AlgebraDescriptor, BiInvariantMetric], OrthonormalBasis] = {}
        self._lock = threading.Lock()
        BasisRegistry._initialized = True

    def get(self, descriptor: AlgebraDescriptor, metric: BiInvariantMetric = None) -> OrthonormalBasis:
        """
        기저 조회 (없으면 생성 후 캐시)

        Args:
            descriptor: 대수 디스크립터
            metric: 쌍선형 형식 (기본값 Frobenius, scale 1)

        Returns:
            OrthonormalBasis
        """
        metric = metric or BiInvariantMetric()
        key = (descriptor, metric)
        with self._lock:
            basis = self._bases.get(key)
            if basis is None:
                basis = build_basis(descriptor, metric)
                self._bases[key] = basis
                logger.info("🔧 basis for %s built (dim %d, %s)", descriptor, basis.dimension, metric.kind.value)
        return basis

    def for_group(self, group: str, metric_kind: str = 'frobenius', scale: float = 1.0) -> OrthonormalBasis:
        """그룹 문자열("so3", "rn:2" ...)로 기저 조회"""
        return self.get(parse_group(group), BiInvariantMetric(MetricKind(metric_kind), scale))

    def clear(self):
        with self._lock:
            self._bases.clear()

    def __len__(self):
        return len(self._bases)
