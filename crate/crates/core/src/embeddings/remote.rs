//! Client for OpenAI-style embedding endpoints.
//!
//! Request: `POST {endpoint}` with `{"model": ..., "input": [...]}` and an
//! optional `Authorization: Bearer <token>` header read from the configured
//! environment variable. Response: `{"data": [{"embedding": [...]}, ...]}`
//! in input order.

use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, ProviderConfig};

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

pub struct RemoteProvider {
    config: ProviderConfig,
    endpoint: String,
    model: String,
    credential_env: Option<String>,
    retry_base: Duration,
    // Built lazily: the blocking client must not be created on an async
    // runtime thread.
    client: OnceLock<reqwest::blocking::Client>,
}

impl RemoteProvider {
    pub fn new(
        config: ProviderConfig,
        endpoint: String,
        model: String,
        credential_env: Option<String>,
        retry_base: Duration,
    ) -> Self {
        Self {
            config,
            endpoint,
            model,
            credential_env,
            retry_base,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds")
        })
    }

    fn token(&self) -> Result<Option<String>, EmbedError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| EmbedError::Config(format!("credential variable {var} is not set"))),
        }
    }

    fn attempt(&self, texts: &[String], token: Option<&str>) -> Result<Vec<Vec<f32>>, Attempt> {
        let mut req = self.client().post(&self.endpoint).json(&EmbeddingRequest {
            model: &self.model,
            input: texts,
        });
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req
            .send()
            .map_err(|e| Attempt::Retry(format!("transport error: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let msg = format!("HTTP {status}");
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Retry(msg)
            } else {
                Attempt::Fatal(EmbedError::Remote {
                    attempts: 1,
                    message: msg,
                })
            });
        }
        let body: EmbeddingResponse = resp
            .json()
            .map_err(|e| Attempt::Retry(format!("bad response body: {e}")))?;
        if body.data.len() != texts.len() {
            return Err(Attempt::Fatal(EmbedError::Remote {
                attempts: 1,
                message: format!(
                    "endpoint returned {} embeddings for {} inputs",
                    body.data.len(),
                    texts.len()
                ),
            }));
        }
        body.data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.config.dim {
                    return Err(Attempt::Fatal(EmbedError::DimensionMismatch {
                        expected: self.config.dim,
                        got: d.embedding.len(),
                    }));
                }
                Ok(d.embedding.into_iter().map(|v| v as f32).collect())
            })
            .collect()
    }
}

enum Attempt {
    Retry(String),
    Fatal(EmbedError),
}

impl EmbeddingProvider for RemoteProvider {
    fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let token = self.token()?;
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry_base * 2u32.saturating_pow(attempt - 1);
                tracing::warn!(attempt, ?delay, error = %last, "retrying embedding request");
                thread::sleep(delay);
            }
            match self.attempt(texts, token.as_deref()) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(EmbedError::Remote {
            attempts,
            message: last,
        })
    }
}
