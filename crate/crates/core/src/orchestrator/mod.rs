//! Multi-node evaluation: round-robin pipelines over in-process worker
//! nodes, noise barriers between blocks, and a hash-chained audit ledger.

pub mod audit;
pub mod pipeline;

pub use audit::{audit_append, audit_verify, AuditRecord, Ledger, Verification, GENESIS_RULE};
pub use pipeline::{
    job_run, pipeline_build, ExecMode, JobMessage, JobOutcome, Message, Node, NodeConfig, Pipeline, PipelineSpec, Route,
    DEFAULT_BARRIER_LOG2,
};
