//! Search engine that builds, refines and ensembles ML solution scripts
//! through role-specialised LLM agents.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod finalize;
pub mod init;
pub mod journal;
pub mod llm;
pub mod orchestrator;
pub mod refine;
pub mod robustness;
pub mod scenario;
pub mod score;
pub mod session;
pub mod solution;
pub mod task;
pub mod testkit;

pub use error::{Error, Result};
