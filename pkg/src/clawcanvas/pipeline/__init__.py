"""Staged generation pipeline over pluggable, ledgered tool clients."""

from .clients import FIXTURES_ENV, Finding, FixtureClients, ReviewReport, ToolClients, bundled_fixtures, fixtures_dir
from .ledger import LedgerIncomplete, PipelineLedger, StageTrace, ToolCall, check_ledger
from .run import (
    ClientTimeout,
    PipelineConfig,
    PipelineResult,
    StageFailure,
    attribute_failure,
    run_pipeline,
    select_backend,
)
