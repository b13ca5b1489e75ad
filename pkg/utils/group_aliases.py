"""Group descriptor aliases for rule-based descriptor parsing"""
from typing import Optional, Tuple


# 자주 쓰이는 군 이름 → (family, n) 룰 기반 맵
# 정규식 파싱 전에 먼저 조회
GROUP_ALIASES = {
    "so3": ("so", 3),
    "so(3)": ("so", 3),
    "rotation": ("so", 3),
    "rotations": ("so", 3),
    "rigid_body": ("so", 3),
    "so4": ("so", 4),
    "so5": ("so", 5),
    "su2": ("su", 2),
    "su(2)": ("su", 2),
    "spin": ("su", 2),
    "quaternion": ("su", 2),
    "su3": ("su", 3),
    "su(3)": ("su", 3),
    "line": ("rn", 1),
    "r1": ("rn", 1),
    "plane": ("rn", 2),
    "r2": ("rn", 2),
}


def rule_lookup_group(text: str) -> Optional[Tuple[str, int]]:
    """
    룰 기반 군 이름 조회

    Args:
        text: 입력 문자열 (대소문자, 공백 무시)

    Returns:
        (family, n) 또는 None (룰이 없는 경우)
    """
    key = text.strip().lower().replace(" ", "")
    return GROUP_ALIASES.get(key)


# `check --group=all` 대상 그룹
CHECK_ALL_KEYWORD = "all"
CHECK_ALL_GROUPS = ("so2", "so3", "so4", "so5", "su2", "su3", "rn:1", "rn:3")
