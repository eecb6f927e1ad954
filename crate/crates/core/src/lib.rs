//! Mining of organizational and informational workflow perspectives from
//! performative-extended event logs: interaction protocol discovery via
//! declarative state-machine templates, organizational structure
//! classification over the actor interaction graph, document flow and
//! lifecycle performance statistics, plus a deterministic log generator
//! and flat/tree serialization.

pub mod analysis;
pub mod generator;
pub mod io;
pub mod model;
pub mod orgstruct;
pub mod protocol;

pub use analysis::{
    export_agr_dot, extract_occurrences, mine_documents, perf_report, DocumentFlowReport,
    Occurrence, PerfReport,
};
pub use generator::{generate, GeneratorConfig, GeneratorError, StructureSpec};
pub use io::{convert, parse_log, serialize_log, IoError, LogFormat};
pub use model::{
    validate_log, Actor, EventLine, LifecycleState, Performative, Process, ProcessInstance,
    Severity, ValidationReport, Violation, WorkflowLog,
};
pub use orgstruct::{
    build_interaction_graph, mine_structures, mine_structures_per_process, structure_dot,
    InteractionGraph, StructureLabel, StructureReport, StructureThresholds, StructureVerdict,
};
pub use protocol::{
    builtin_templates, load_templates, mine_protocols, Conversation, Outcome, ProtocolInstance,
    ProtocolReport, ProtocolTemplate,
};
