//! Toolkit for annotating agentic tasks with solution trajectories and serving
//! those annotations as dynamically selected in-context demonstrations.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`types`] / [`pool`]: domain types and the line-delimited pool file format.
//! - [`embed`]: tokenization and embedding providers (a deterministic offline
//!   hash embedder by default, a remote endpoint client behind the `remote`
//!   feature).
//! - [`select`]: demonstration scoring and selection — cosine ranking,
//!   BERTScore-Recall, greedy set-coverage selection, and thought-keyed
//!   snippet retrieval.
//! - [`annotate`]: the iterative annotation loop that bootstraps from
//!   already-annotated tasks.
//! - [`agent`]: ReAct and Plan-and-Execute solver loops with prompt assembly,
//!   truncation, and step budgeting.
//! - [`provider`]: chat-completion providers — remote client, deterministic
//!   scripted provider, and a record/replay wrapper.
//! - [`miniworld`]: a deterministic toy environment with three apps, an action
//!   DSL, a templated task catalog, and unit-test checkers.
//! - [`eval`]: batch runner and the TGC/RTGC/SGC metric suite.

pub mod agent;
pub mod annotate;
pub mod embed;
pub mod eval;
pub mod miniworld;
pub mod pool;
pub mod provider;
pub mod select;
pub mod types;

pub use pool::{load_pool, save_pool, PoolError};
pub use types::{
    AnnotationPool, AnnotationRecord, Plan, RecordKind, Split, Step, Subtask, Task, Terminal,
    Trajectory,
};
