//! Run configuration: search budgets, executor, provider and user guidance.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::ModelCard;

/// Search-shape parameters. Defaults: four retrieved models, four outer and
/// four inner refinement steps, two parallel solutions, five ensemble rounds
/// and a 24 hour budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub num_candidates: u32,
    pub outer_steps: u32,
    pub inner_steps: u32,
    pub parallel_solutions: u32,
    pub ensemble_rounds: u32,
    pub max_debug_rounds: u32,
    pub per_exec_timeout_secs: u64,
    pub total_budget_secs: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            num_candidates: 4,
            outer_steps: 4,
            inner_steps: 4,
            parallel_solutions: 2,
            ensemble_rounds: 5,
            max_debug_rounds: 3,
            per_exec_timeout_secs: 60 * 60,
            total_budget_secs: 24 * 60 * 60,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn per_exec_timeout(&self) -> Duration {
        Duration::from_secs(self.per_exec_timeout_secs)
    }

    pub fn total_budget(&self) -> Duration {
        Duration::from_secs(self.total_budget_secs)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_candidates", self.num_candidates),
            ("outer_steps", self.outer_steps),
            ("inner_steps", self.inner_steps),
            ("parallel_solutions", self.parallel_solutions),
            ("ensemble_rounds", self.ensemble_rounds),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.per_exec_timeout_secs == 0 {
            return Err(Error::Config(
                "per_exec_timeout_secs must be positive".into(),
            ));
        }
        if self.per_exec_timeout_secs > self.total_budget_secs {
            return Err(Error::Config(
                "per_exec_timeout_secs must not exceed total_budget_secs".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    /// Interpreter command; the script path is appended as the last argument.
    pub interpreter: Vec<String>,
    /// Optional wrapper (container runtime, `nice`, ...) placed before the interpreter.
    pub command_prefix: Vec<String>,
    /// Maximum concurrent executions. Defaults to half the physical cores.
    pub pool_size: Option<usize>,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            interpreter: vec!["python3".into()],
            command_prefix: Vec::new(),
            pool_size: None,
        }
    }
}

impl ExecutorConfig {
    pub fn pool_size(&self) -> usize {
        self.pool_size
            .unwrap_or_else(|| num_cpus::get_physical() / 2)
            .max(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleEndpoint {
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible chat completions API.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub request_timeout_secs: u64,
    /// Per-role overrides keyed by role file stem, e.g. `retriever` pointed
    /// at a search-enabled model.
    pub roles: std::collections::BTreeMap<String, RoleEndpoint>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            api_key_env: None,
            request_timeout_secs: 600,
            roles: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Attempts per agent call, including the first.
    pub max_attempts: u32,
    /// Base delay for exponential backoff after provider failures.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(
            self.backoff_ms
                .saturating_mul(1 << attempt.saturating_sub(1).min(16)),
        )
    }
}

/// A user-written ablation summary that replaces the ablation study of one
/// outer step (counted from 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOverride {
    pub step: u32,
    pub summary: String,
}

/// Human guidance injected into the search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Guidance {
    /// Placed ahead of retrieved cards; counts toward `num_candidates`.
    pub model_cards: Vec<ModelCard>,
    pub ablation: Vec<AblationOverride>,
}

impl Guidance {
    pub fn ablation_override(&self, step: u32) -> Option<&str> {
        self.ablation
            .iter()
            .find(|o| o.step == step)
            .map(|o| o.summary.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    #[serde(flatten)]
    pub run: RunConfig,
    pub executor: ExecutorConfig,
    pub provider: ProviderConfig,
    pub retry: RetryPolicy,
    /// Directory of prompt templates overriding the bundled ones.
    pub prompts_dir: Option<PathBuf>,
    pub guidance: Guidance,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(Error::io(format!("reading config {}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.executor.interpreter.is_empty() {
            return Err(Error::Config(
                "executor.interpreter must not be empty".into(),
            ));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config(
                "retry.max_attempts must be at least 1".into(),
            ));
        }
        if self.guidance.model_cards.len() > self.run.num_candidates as usize {
            return Err(Error::Config(
                "more injected model cards than num_candidates".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(
            (
                c.num_candidates,
                c.outer_steps,
                c.inner_steps,
                c.parallel_solutions,
                c.ensemble_rounds
            ),
            (4, 4, 4, 2, 5)
        );
        assert_eq!(c.total_budget(), Duration::from_secs(86_400));
        c.validate().unwrap();
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn parses_flat_run_fields_and_sections() {
        let c = Config::from_toml(
            r#"
            outer_steps = 2
            seed = 7

            [executor]
            interpreter = ["python3", "-u"]

            [retry]
            backoff_ms = 0

            [[guidance.ablation]]
            step = 1
            summary = "feature engineering matters most"
            "#,
        )
        .unwrap();
        assert_eq!(c.run.outer_steps, 2);
        assert_eq!(c.run.inner_steps, 4);
        assert_eq!(c.run.seed, 7);
        assert_eq!(c.executor.interpreter, vec!["python3", "-u"]);
        assert_eq!(c.retry.backoff_ms, 0);
        assert_eq!(c.retry.max_attempts, 3);
        assert_eq!(
            c.guidance.ablation_override(1),
            Some("feature engineering matters most")
        );
        assert_eq!(c.guidance.ablation_override(0), None);
    }

    #[test]
    fn rejects_zero_counts_and_oversized_timeout() {
        assert!(Config::from_toml("inner_steps = 0").is_err());
        assert!(Config::from_toml("per_exec_timeout_secs = 10\ntotal_budget_secs = 5").is_err());
    }

    #[test]
    fn backoff_is_exponential() {
        let p = RetryPolicy {
            max_attempts: 3,
            backoff_ms: 100,
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(3), Duration::from_millis(400));
    }
}
