//! Agent roles, prompt templates, providers and response parsing.

mod gateway;
mod http;
mod mock;
mod parse;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use gateway::Gateway;
pub use http::HttpProvider;
pub use mock::MockProvider;
pub use parse::{
    extract_json, extract_script, format_model_cards, parse_model_cards, BlockAnswer,
    LeakageAnswer, TargetAnswer,
};
pub use template::{render_prompt, Bindings, PromptTemplate, TemplateSet};

/// Every agent the engine talks to. Each has one prompt template asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Retriever,
    Init,
    Merger,
    Abl,
    Summarize,
    Extractor,
    Coder,
    Planner,
    EnsPlanner,
    Ensembler,
    Debugger,
    LeakageExtractor,
    LeakageCorrector,
    DataUsage,
    Test,
    SubsampleExtractor,
    SubsampleRemover,
}

impl AgentRole {
    pub const ALL: [AgentRole; 17] = [
        AgentRole::Retriever,
        AgentRole::Init,
        AgentRole::Merger,
        AgentRole::Abl,
        AgentRole::Summarize,
        AgentRole::Extractor,
        AgentRole::Coder,
        AgentRole::Planner,
        AgentRole::EnsPlanner,
        AgentRole::Ensembler,
        AgentRole::Debugger,
        AgentRole::LeakageExtractor,
        AgentRole::LeakageCorrector,
        AgentRole::DataUsage,
        AgentRole::Test,
        AgentRole::SubsampleExtractor,
        AgentRole::SubsampleRemover,
    ];

    /// File stem used for templates and mock transcripts.
    pub fn stem(self) -> &'static str {
        match self {
            AgentRole::Retriever => "retriever",
            AgentRole::Init => "init",
            AgentRole::Merger => "merger",
            AgentRole::Abl => "abl",
            AgentRole::Summarize => "summarize",
            AgentRole::Extractor => "extractor",
            AgentRole::Coder => "coder",
            AgentRole::Planner => "planner",
            AgentRole::EnsPlanner => "ens_planner",
            AgentRole::Ensembler => "ensembler",
            AgentRole::Debugger => "debugger",
            AgentRole::LeakageExtractor => "leakage_extractor",
            AgentRole::LeakageCorrector => "leakage_corrector",
            AgentRole::DataUsage => "data_usage",
            AgentRole::Test => "test",
            AgentRole::SubsampleExtractor => "subsample_extractor",
            AgentRole::SubsampleRemover => "subsample_remover",
        }
    }

    pub fn from_stem(stem: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.stem() == stem)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stem())
    }
}

/// A retrieved (or user-supplied) model description with example code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCard {
    pub model_description: String,
    pub example_code: String,
}

impl ModelCard {
    pub fn new(description: impl Into<String>, code: impl Into<String>) -> crate::Result<Self> {
        let card = Self {
            model_description: description.into(),
            example_code: code.into(),
        };
        if card.model_description.trim().is_empty() || card.example_code.trim().is_empty() {
            return Err(crate::Error::InvalidInput(
                "model card fields must be non-empty".into(),
            ));
        }
        Ok(card)
    }
}

/// One request sent to a provider.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub role: AgentRole,
    pub prompt: &'a str,
    /// Journal stream issuing the call (`main`, `lane-1`, ...).
    pub channel: &'a str,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("{0}")]
    Unavailable(String),
}

/// A text-completion backend.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;

    /// Called instead of [`Provider::complete`] when a journaled response is
    /// replayed, so stateful providers can stay aligned.
    fn skip(&self, _request: &CompletionRequest<'_>) {}
}
