"""Parse group strings such as "so3", "su(2)" or "rn:4" into algebra descriptors"""
import logging
import re
from functools import lru_cache

from services.lie_structure import AlgebraDescriptor, AlgebraFamily
from utils.errors import ConfigError
from .group_aliases import rule_lookup_group

logger = logging.getLogger(__name__)

_PATTERN = re.compile(r"^(so|su)\(?(\d+)\)?$|^r(?:n|\^)?[:(]?(\d+)\)?$")


class DescriptorParser:
    """디스크립터 파서: 룰 기반 우선, 정규식 fallback"""

    def parse(self, text: str) -> AlgebraDescriptor:
        """
        그룹 문자열 → AlgebraDescriptor

        Args:
            text: "so3", "so(5)", "su2", "rn:4", "rotation" ...

        Returns:
            AlgebraDescriptor

        Raises:
            ConfigError: 인식할 수 없거나 지원하지 않는 그룹
        """
        if not isinstance(text, str) or not text.strip():
            raise ConfigError("group must be a non-empty string", key="group")

        # 1. 룰 기반 조회 우선
        rule_result = rule_lookup_group(text)
        if rule_result:
            family, n = rule_result
            return AlgebraDescriptor(AlgebraFamily(family), n)

        # 2. 정규식 fallback
        key = text.strip().lower().replace(" ", "")
        match = _PATTERN.match(key)
        if not match:
            raise ConfigError(f"unrecognised group {text!r} (expected e.g. so3, su2, rn:4)", key="group")
        if match.group(1):
            family, n = match.group(1), int(match.group(2))
        else:
            family, n = "rn", int(match.group(3))
        try:
            return AlgebraDescriptor(AlgebraFamily(family), n)
        except ValueError as e:
            raise ConfigError(f"unsupported group {text!r}: {e}", key="group") from e


_parser = DescriptorParser()


@lru_cache(maxsize=64)
def parse_group(text: str) -> AlgebraDescriptor:
    return _parser.parse(text)
