use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::scenario::Scenario;

use super::{AgentRole, CompletionRequest, Provider, ProviderError};

/// Replays scenario transcripts: each (channel, role) pair reads its own
/// transcript in order.
#[derive(Debug)]
pub struct MockProvider {
    scenario: Arc<Scenario>,
    cursors: Mutex<HashMap<(String, AgentRole), usize>>,
    prompts: Mutex<Vec<(String, AgentRole, String)>>,
}

impl MockProvider {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        Self {
            scenario,
            cursors: Mutex::new(HashMap::new()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    fn advance(&self, channel: &str, role: AgentRole) -> usize {
        let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        let cursor = cursors.entry((channel.to_string(), role)).or_default();
        let index = *cursor;
        *cursor += 1;
        index
    }

    /// Prompts received for `role` on any channel, in order.
    pub fn prompts(&self, role: AgentRole) -> Vec<String> {
        self.prompts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|(_, r, _)| *r == role)
            .map(|(_, _, p)| p.clone())
            .collect()
    }

    /// Number of live (non-replayed) requests served.
    pub fn calls(&self) -> usize {
        self.prompts.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.prompts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((
                request.channel.to_string(),
                request.role,
                request.prompt.to_string(),
            ));
        let index = self.advance(request.channel, request.role);
        self.scenario
            .response_at(request.channel, request.role, index)
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::Unavailable(format!(
                    "mock transcript for {} on {} exhausted after {index} responses",
                    request.role, request.channel
                ))
            })
    }

    fn skip(&self, request: &CompletionRequest<'_>) {
        self.advance(request.channel, request.role);
    }
}
