use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{CandidateExample, Stage};

/// Environment variable holding the annotator endpoint URL.
pub const ANNOTATOR_URL_ENV: &str = "DRAGBENCH_ANNOTATOR_URL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotatorError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed annotator response: {0}")]
    Protocol(String),
}

/// Wire body of one annotator call. `image` is a base64-encoded PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorRequest {
    pub stage: Stage,
    pub image: String,
    pub payload: Value,
}

/// Wire response. Verdict stages set `accepted`; generative stages set
/// `content`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnnotatorResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<Value>,
    #[serde(default)]
    pub notes: String,
}

/// The two questions a filter verdict must answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterChecks {
    /// The instruction unambiguously refers to the intended span.
    pub instruction_clear: bool,
    /// The marked start and end tightly enclose the span.
    pub tight_enclosure: bool,
}

impl FilterChecks {
    pub fn passed(&self) -> bool {
        self.instruction_clear && self.tight_enclosure
    }
}

pub trait Annotator: Send + Sync {
    fn call(&self, request: &AnnotatorRequest) -> Result<AnnotatorResponse, AnnotatorError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpAnnotatorConfig {
    pub url: String,
    pub timeout_secs: f64,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for HttpAnnotatorConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            timeout_secs: 60.0,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

impl HttpAnnotatorConfig {
    /// Default settings pointed at the URL in [`ANNOTATOR_URL_ENV`], if set.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ANNOTATOR_URL_ENV).ok()?;
        (!url.trim().is_empty()).then(|| Self { url, ..Self::default() })
    }
}

/// Counting gate bounding concurrent requests.
struct InFlight {
    active: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// Annotator reached by one JSON `POST` per stage.
pub struct HttpAnnotator {
    config: HttpAnnotatorConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl HttpAnnotator {
    pub fn new(config: HttpAnnotatorConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        Self {
            config,
            agent,
            in_flight: InFlight {
                active: Mutex::new(0),
                freed: Condvar::new(),
                limit,
            },
        }
    }

    fn once(&self, request: &AnnotatorRequest) -> Result<AnnotatorResponse, AnnotatorError> {
        let _slot = self.in_flight.acquire();
        let mut response = self
            .agent
            .post(&self.config.url)
            .send_json(request)
            .map_err(|e| AnnotatorError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(AnnotatorError::Transport(format!("HTTP {status}")));
        }
        response
            .body_mut()
            .read_json::<AnnotatorResponse>()
            .map_err(|e| AnnotatorError::Protocol(e.to_string()))
    }
}

impl Annotator for HttpAnnotator {
    fn call(&self, request: &AnnotatorRequest) -> Result<AnnotatorResponse, AnnotatorError> {
        let mut attempt = 0;
        loop {
            match self.once(request) {
                Err(AnnotatorError::Transport(_)) if attempt < self.config.retries => attempt += 1,
                other => return other,
            }
        }
    }
}

type FilterRule = Box<dyn Fn(&Value) -> FilterChecks + Send + Sync>;
type GroundingRule = Box<dyn Fn(&Value) -> Value + Send + Sync>;

/// Deterministic stand-in for the annotator service.
///
/// Stage 1 returns the preloaded candidates matching the requested category
/// and granularity. Grounding checks answer `not_grounded` unless a rule is
/// installed. Filters accept everything unless a rule is installed.
pub struct StubAnnotator {
    candidates: Vec<CandidateExample>,
    filter: FilterRule,
    grounding: GroundingRule,
    fail_on_call: Option<usize>,
    calls: AtomicUsize,
}

impl Default for StubAnnotator {
    fn default() -> Self {
        Self::new()
    }
}

impl StubAnnotator {
    pub fn new() -> Self {
        Self {
            candidates: Vec::new(),
            filter: Box::new(|_| FilterChecks {
                instruction_clear: true,
                tight_enclosure: true,
            }),
            grounding: Box::new(|_| {
                json!({"status": "not_grounded", "start_id": null, "end_id": null,
                       "notes": "stub annotator does not ground"})
            }),
            fail_on_call: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_candidates(mut self, candidates: Vec<CandidateExample>) -> Self {
        self.candidates = candidates;
        self
    }

    /// Filter rule over the filter request payload.
    pub fn with_filter(mut self, rule: impl Fn(&Value) -> FilterChecks + Send + Sync + 'static) -> Self {
        self.filter = Box::new(rule);
        self
    }

    /// Grounding rule returning a `{status, start_id, end_id, notes}` object.
    pub fn with_grounding(mut self, rule: impl Fn(&Value) -> Value + Send + Sync + 'static) -> Self {
        self.grounding = Box::new(rule);
        self
    }

    /// Makes the `n`-th call (zero-based) fail with a transport error.
    pub fn failing_on_call(mut self, n: usize) -> Self {
        self.fail_on_call = Some(n);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Annotator for StubAnnotator {
    fn call(&self, request: &AnnotatorRequest) -> Result<AnnotatorResponse, AnnotatorError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail_on_call == Some(n) {
            return Err(AnnotatorError::Transport(format!("stub failure on call {n}")));
        }
        match request.stage {
            Stage::InstructionGen => {
                let wants = |field: &str, value: String| {
                    request.payload.get(field).and_then(Value::as_str) == Some(value.as_str())
                };
                let count = request.payload.get("count").and_then(Value::as_u64).unwrap_or(u64::MAX) as usize;
                let picked: Vec<&CandidateExample> = self
                    .candidates
                    .iter()
                    .filter(|c| {
                        wants("category", c.category.to_string()) && wants("granularity", c.granularity.to_string())
                    })
                    .take(count)
                    .collect();
                Ok(AnnotatorResponse {
                    accepted: None,
                    content: Some(serde_json::to_value(picked).expect("candidates serialize")),
                    notes: "stub instructions".into(),
                })
            }
            Stage::GroundingCheck => Ok(AnnotatorResponse {
                accepted: None,
                content: Some((self.grounding)(&request.payload)),
                notes: "stub grounding".into(),
            }),
            Stage::Filter => {
                let checks = (self.filter)(&request.payload);
                Ok(AnnotatorResponse {
                    accepted: Some(checks.passed()),
                    content: Some(serde_json::to_value(checks).expect("checks serialize")),
                    notes: "stub filter".into(),
                })
            }
        }
    }
}
