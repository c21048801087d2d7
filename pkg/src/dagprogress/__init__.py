"""Lachesis-style event DAG with DAG-progress metrics and metric-driven emission."""

from .dag import (
    DagError,
    DagStore,
    DuplicateId,
    Event,
    EventId,
    EventProto,
    HighestBefore,
    InvalidParents,
    InvalidSeq,
    MissingParent,
    SnapshotError,
    UnknownEvent,
    ValidatorSet,
    dump_snapshot,
    load_snapshot,
)
from .emission import (
    EmissionStrategy,
    Metric,
    TimingDecision,
    build_event,
    rank_candidate_parents,
    select_parents,
    should_emit,
    timing_decision,
    rank_stakes,
    timing_metric,
)
from .metrics import (
    HypotheticalEvent,
    NoSelfEvent,
    ProgressReport,
    QiComponents,
    RootKnowledgeColumn,
    forkless_cause_progress,
    qi_components,
    qi_metric,
    root_progress,
)
from .simulator import (
    ConfigError,
    MetricsReport,
    SimConfig,
    Simulation,
    run_experiment,
    run_simulation,
    sample_stakes,
)

__version__ = "0.1.0"

__all__ = [
    "build_event",
    "ConfigError",
    "DagError",
    "DagStore",
    "dump_snapshot",
    "DuplicateId",
    "EmissionStrategy",
    "Event",
    "EventId",
    "EventProto",
    "forkless_cause_progress",
    "HighestBefore",
    "HypotheticalEvent",
    "InvalidParents",
    "InvalidSeq",
    "load_snapshot",
    "Metric",
    "MetricsReport",
    "MissingParent",
    "NoSelfEvent",
    "ProgressReport",
    "qi_components",
    "qi_metric",
    "QiComponents",
    "rank_candidate_parents",
    "rank_stakes",
    "root_progress",
    "RootKnowledgeColumn",
    "run_experiment",
    "run_simulation",
    "sample_stakes",
    "select_parents",
    "should_emit",
    "SimConfig",
    "Simulation",
    "SnapshotError",
    "timing_decision",
    "timing_metric",
    "TimingDecision",
    "UnknownEvent",
    "ValidatorSet",
]
