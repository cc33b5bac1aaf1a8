"""LLM agent chain: tiered providers, analysis rows, synthesis, validation."""

from .chain import (
    ContributionRow,
    FunctionalityRow,
    RoleAssignment,
    StudentSummary,
    SynthesisBundle,
    TeamSummary,
    ValidationReport,
    describe_contribution,
    record_usage,
    summarize_file,
    synthesize,
    validate_summary,
)
from .provider import (
    HttpProvider,
    MockProvider,
    ModelTier,
    ProviderResponse,
    ReplayProvider,
    TokenBucket,
    estimate_tokens,
)

__all__ = [
    "ContributionRow",
    "FunctionalityRow",
    "HttpProvider",
    "MockProvider",
    "ModelTier",
    "ProviderResponse",
    "ReplayProvider",
    "RoleAssignment",
    "StudentSummary",
    "SynthesisBundle",
    "TeamSummary",
    "TokenBucket",
    "ValidationReport",
    "describe_contribution",
    "estimate_tokens",
    "record_usage",
    "summarize_file",
    "synthesize",
    "validate_summary",
]
