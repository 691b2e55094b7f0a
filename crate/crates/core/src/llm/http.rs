use std::time::Duration;

use serde_json::{json, Value};

use crate::config::ProviderConfig;
use crate::error::{Error, Result};

use super::{CompletionRequest, Provider, ProviderError};

/// Client for an OpenAI-compatible `chat/completions` endpoint.
///
/// Roles can be routed to a different endpoint or model through
/// `provider.roles.<stem>`; the retriever is typically pointed at a
/// search-enabled model this way.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    config: ProviderConfig,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn from_config(config: &ProviderConfig) -> Result<Self> {
        if config.endpoint.is_none() || config.model.is_none() {
            return Err(Error::Config(
                "provider.endpoint and provider.model are required without --mock".into(),
            ));
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("building HTTP client: {e}")))?;
        Ok(Self {
            client,
            config: config.clone(),
            api_key,
        })
    }

    fn route(&self, request: &CompletionRequest<'_>) -> (String, String) {
        let role = self.config.roles.get(request.role.stem());
        let endpoint = role
            .and_then(|r| r.endpoint.clone())
            .or_else(|| self.config.endpoint.clone())
            .unwrap_or_default();
        let model = role
            .and_then(|r| r.model.clone())
            .or_else(|| self.config.model.clone())
            .unwrap_or_default();
        (endpoint, model)
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let (endpoint, model) = self.route(request);
        let url = format!("{}/chat/completions", endpoint.trim_end_matches('/'));
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt}],
            "seed": request.seed,
        });
        let mut call = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let status = response.status();
        let payload: Value = response
            .json()
            .map_err(|e| ProviderError::Unavailable(format!("{status}: {e}")))?;
        if !status.is_success() {
            return Err(ProviderError::Unavailable(format!("{status}: {payload}")));
        }
        Ok(payload["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string())
    }
}
