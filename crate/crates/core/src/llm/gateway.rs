use std::sync::Arc;
use std::time::Instant;

use crate::config::RetryPolicy;
use crate::error::{Error, Result};
use crate::journal::{Event, JournalStream};

use super::{render_prompt, AgentRole, Bindings, CompletionRequest, Provider, TemplateSet};

/// Renders prompts, calls the provider with bounded retries, and journals
/// every attempt before returning.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    templates: TemplateSet,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, templates: TemplateSet, retry: RetryPolicy) -> Self {
        Self {
            provider,
            templates,
            retry,
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        self.retry
    }

    pub fn render(
        &self,
        role: AgentRole,
        variant: Option<&str>,
        bindings: &Bindings,
    ) -> Result<String> {
        render_prompt(self.templates.get(role, variant)?, bindings)
    }

    /// Sends `prompt` to the provider, retrying empty answers and provider
    /// failures up to the retry budget.
    pub fn invoke(
        &self,
        journal: &mut JournalStream,
        role: AgentRole,
        prompt: &str,
        seed: u64,
    ) -> Result<String> {
        let channel = journal.name().to_string();
        let request = CompletionRequest {
            role,
            prompt,
            channel: &channel,
            seed,
        };
        let attempts = self.retry.max_attempts.max(1);
        let mut last_error: Option<String> = None;
        for attempt in 1..=attempts {
            let (response, error) = match journal.replay_call(role)? {
                Some(recorded) => {
                    self.provider.skip(&request);
                    (recorded.response, recorded.error)
                }
                None => {
                    let started = Instant::now();
                    let outcome = self.provider.complete(&request);
                    let wall_ms = started.elapsed().as_millis() as u64;
                    let (response, error) = match outcome {
                        Ok(text) => (Some(text), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    journal.record(Event::AgentCall {
                        role,
                        attempt,
                        seed,
                        prompt: prompt.to_string(),
                        response: response.clone(),
                        error: error.clone(),
                        wall_ms,
                    })?;
                    if attempt < attempts && (error.is_some() || is_blank(&response)) {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                    (response, error)
                }
            };
            match (response, error) {
                (Some(text), None) if !text.trim().is_empty() => return Ok(text),
                (_, Some(e)) => last_error = Some(e),
                _ => last_error = None,
            }
        }
        Err(match last_error {
            Some(reason) => Error::ProviderUnavailable {
                role,
                attempts,
                reason,
            },
            None => Error::EmptyResponse { role, attempts },
        })
    }

    /// Renders and invokes, then parses; parse failures re-prompt with the
    /// error appended, up to the retry budget. Returns the last parse error
    /// when every attempt fails.
    pub fn invoke_parsed<T>(
        &self,
        journal: &mut JournalStream,
        role: AgentRole,
        bindings: &Bindings,
        seed: u64,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let base = self.render(role, None, bindings)?;
        self.invoke_parsed_prompt(
            journal,
            role,
            &base,
            seed,
            self.retry.max_attempts.max(1),
            parse,
        )
    }

    pub fn invoke_parsed_prompt<T>(
        &self,
        journal: &mut JournalStream,
        role: AgentRole,
        base: &str,
        seed: u64,
        tries: u32,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let mut prompt = base.to_string();
        let mut last = None;
        for _ in 0..tries.max(1) {
            let response = self.invoke(journal, role, &prompt, seed)?;
            match parse(&response) {
                Ok(value) => return Ok(value),
                Err(e) => {
                    prompt = format!(
                        "{base}\n\nYour previous answer could not be used: {e}\nAnswer again in the required format."
                    );
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one try"))
    }
}

fn is_blank(response: &Option<String>) -> bool {
    response.as_deref().is_none_or(|t| t.trim().is_empty())
}
