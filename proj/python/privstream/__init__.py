"""Randomized-response crowdsourced counting: Python face of the C++ core."""

from ._core import (
    Bucket,
    EstimateResult,
    FleetConfig,
    PrivacyCost,
    Query,
    RandomizationParams,
    bucket_index_of,
    epsilon_of,
    estimate_true_count,
    estimator_stddev,
    generate_population,
    params_for_target,
    parse_fleet_config,
    parse_query,
    pseudonym_for_epoch,
    randomize_answer,
    relative_error,
    run_fleet_summary,
    serialize_fleet_config,
    serialize_query,
    speed_query,
    validate_query,
)

__all__ = [
    "Bucket",
    "EstimateResult",
    "FleetConfig",
    "PrivacyCost",
    "Query",
    "RandomizationParams",
    "bucket_index_of",
    "epsilon_of",
    "estimate_true_count",
    "estimator_stddev",
    "generate_population",
    "params_for_target",
    "parse_fleet_config",
    "parse_query",
    "pseudonym_for_epoch",
    "randomize_answer",
    "relative_error",
    "run_fleet_summary",
    "serialize_fleet_config",
    "serialize_query",
    "speed_query",
    "validate_query",
]
