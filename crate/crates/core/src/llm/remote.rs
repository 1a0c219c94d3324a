use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{BackendConfig, ChatBackend, CompletionParams, LlmError, PromptMessage};

const DEFAULT_MODEL: &str = "gpt-4o";
const DEFAULT_IN_FLIGHT: usize = 4;

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cond: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cond: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cond.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cond.notify_one();
    }
}

enum Failure {
    Retry(LlmError),
    Fatal(LlmError),
}

/// OpenAI-compatible chat-completion client.
pub struct RemoteBackend {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    backoff_base: Duration,
    gate: Gate,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("endpoint", &self.endpoint).field("model", &self.model).finish()
    }
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: DEFAULT_MODEL.to_string(),
            backoff_base: Duration::from_millis(250),
            gate: Gate::new(DEFAULT_IN_FLIGHT),
            agent,
        }
    }

    /// Reads the key from the environment variable named in the config.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, LlmError> {
        let endpoint = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| LlmError::InvalidConfig("remote backend needs endpoint_url".into()))?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| LlmError::InvalidConfig(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let mut backend = Self::new(endpoint, api_key);
        if let Some(model) = &cfg.model {
            backend.model = model.clone();
        }
        Ok(backend)
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Base delay of the exponential backoff (250 ms by default).
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.gate = Gate::new(n);
        self
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let jitter = rand::rng().random_range(0.8..=1.2);
        self.backoff_base.mul_f64(f64::from(1u32 << attempt.min(16)) * jitter)
    }

    fn attempt(&self, body: &Value, params: &CompletionParams, attempts: u32) -> Result<String, Failure> {
        let mut req = self.agent.post(&self.endpoint).config().timeout_global(Some(params.timeout)).build();
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Failure::Retry(LlmError::Timeout { attempts })),
            Err(e) => return Err(Failure::Retry(LlmError::Transport { message: e.to_string(), attempts })),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(Failure::Fatal(LlmError::Auth { status })),
            408 | 429 | 500..=599 => return Err(Failure::Retry(LlmError::Http { status, attempts })),
            _ => return Err(Failure::Fatal(LlmError::Http { status, attempts })),
        }
        let payload: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(ureq::Error::Timeout(_)) => return Err(Failure::Retry(LlmError::Timeout { attempts })),
            Err(e) => return Err(Failure::Fatal(LlmError::MalformedResponse(e.to_string()))),
        };
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal(LlmError::MalformedResponse("choices[0].message.content missing".into())))
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, messages: &[PromptMessage], params: &CompletionParams) -> Result<String, LlmError> {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let _permit = self.gate.acquire();
        let mut attempt = 0;
        loop {
            match self.attempt(&body, params, attempt + 1) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(e)) => {
                    if attempt >= params.retries {
                        return Err(e);
                    }
                    log::debug!("completion attempt {} failed ({e}), retrying", attempt + 1);
                    thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }
}
