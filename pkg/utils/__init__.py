"""Utils package for helper functions"""
from .group_aliases import GROUP_ALIASES, rule_lookup_group
from .rng import RngStream

__all__ = ['GROUP_ALIASES', 'rule_lookup_group', 'RngStream']
