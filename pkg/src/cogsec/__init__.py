"""Secrecy rate bounds, region search and coding simulation for the
state-dependent cognitive interference channel."""
from ._accel import backend_name
from .bounds import RateTriple, case_split, inner_bound_point, outer_bound_point
from .channel import (
    AuxiliaryPolicy,
    ChannelSpec,
    build_joint,
    parse_channel_spec,
    parse_policy,
    validate_channel,
    validate_policy,
)
from .errors import ConsistencyError, DomainError, GenerationError, ParseError, ResourceError
from .probability import JointDistribution, conditional_mi, entropy, mutual_information
from .search import SearchConfig, downward_hull, search_outer, search_region

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryPolicy",
    "ChannelSpec",
    "ConsistencyError",
    "DomainError",
    "GenerationError",
    "JointDistribution",
    "ParseError",
    "RateTriple",
    "ResourceError",
    "SearchConfig",
    "backend_name",
    "build_joint",
    "case_split",
    "conditional_mi",
    "downward_hull",
    "entropy",
    "inner_bound_point",
    "mutual_information",
    "outer_bound_point",
    "parse_channel_spec",
    "parse_policy",
    "search_outer",
    "search_region",
    "validate_channel",
    "validate_policy",
]
