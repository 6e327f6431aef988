//! Blocking JSON-over-HTTP client for a remote scorer, and the shared
//! transport used by the chat endpoint client.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use super::{check_candidates, DecoderStepResult, Scorer, ScorerContext, ScorerError, ScorerInfo};

pub const CORRELATION_HEADER: &str = "X-Correlation-Id";

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(50),
            max_delay: Duration::from_secs(2),
            timeout: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff with up to 50% added jitter.
    fn delay(&self, attempt: u32, rng: &mut ChaCha8Rng) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        let capped = exp.min(self.max_delay);
        let jitter = rng.random_range(0.0..=0.5);
        capped.mul_f64(1.0 + jitter)
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct ErrorBody {
    #[serde(default)]
    error: String,
    #[serde(default)]
    kind: Option<String>,
}

/// Retrying JSON transport with a cap on requests in flight.
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
    policy: RetryPolicy,
    headers: Vec<(String, String)>,
    slots: Semaphore,
    rng: Mutex<ChaCha8Rng>,
    next_id: AtomicU64,
    retries: AtomicU64,
}

impl HttpTransport {
    pub fn new(base_url: &str, policy: RetryPolicy, max_in_flight: usize, seed: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(policy.timeout))
            .build()
            .into();
        HttpTransport {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            policy,
            headers: Vec::new(),
            slots: Semaphore {
                free: Mutex::new(max_in_flight.max(1)),
                cv: Condvar::new(),
            },
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            next_id: AtomicU64::new(1),
            retries: AtomicU64::new(0),
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Retries performed so far across all requests.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T, ScorerError> {
        let body = self.request(path, None)?;
        serde_json::from_str(&body).map_err(|e| ScorerError::Protocol(e.to_string()))
    }

    pub fn post_json<T: DeserializeOwned>(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<T, ScorerError> {
        let body = self.request(path, Some(body.to_string()))?;
        serde_json::from_str(&body).map_err(|e| ScorerError::Protocol(e.to_string()))
    }

    fn request(&self, path: &str, body: Option<String>) -> Result<String, ScorerError> {
        let _permit = self.slots.acquire();
        let mut attempt = 1;
        loop {
            match self.once(path, body.as_deref()) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && attempt < self.policy.max_attempts => {
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    let delay = {
                        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
                        self.policy.delay(attempt - 1, &mut rng)
                    };
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(ScorerError::RetriesExhausted {
                        attempts: attempt,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn once(&self, path: &str, body: Option<&str>) -> Result<String, ScorerError> {
        let url = format!("{}{}", self.base, path);
        let id = format!("asrec-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let result = match body {
            None => {
                let mut req = self.agent.get(&url).header(CORRELATION_HEADER, &id);
                for (k, v) in &self.headers {
                    req = req.header(k, v);
                }
                req.call()
            }
            Some(b) => {
                let mut req = self
                    .agent
                    .post(&url)
                    .header(CORRELATION_HEADER, &id)
                    .header("Content-Type", "application/json");
                for (k, v) in &self.headers {
                    req = req.header(k, v);
                }
                req.send(b)
            }
        };
        let resp = result.map_err(|e| ScorerError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if let Some(echo) = resp.headers().get(CORRELATION_HEADER) {
            if echo.as_bytes() != id.as_bytes() {
                return Err(ScorerError::Protocol(format!(
                    "correlation id mismatch: sent {id}, got {}",
                    String::from_utf8_lossy(echo.as_bytes())
                )));
            }
        }
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        if (200..300).contains(&status) {
            return Ok(text);
        }
        let parsed: Option<ErrorBody> = serde_json::from_str(&text).ok();
        let message = parsed
            .as_ref()
            .map(|b| b.error.clone())
            .filter(|m| !m.is_empty())
            .unwrap_or(text.clone());
        if status >= 500 {
            return Err(ScorerError::Server { status, message });
        }
        let tokenization =
            status == 422 || parsed.and_then(|b| b.kind).as_deref() == Some("tokenization");
        if tokenization {
            Err(ScorerError::Tokenization(message))
        } else {
            Err(ScorerError::Rejected { status, message })
        }
    }
}

#[derive(Deserialize)]
struct LogProbs {
    logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct Generated {
    text: String,
}

/// Scorer backed by a remote service.
pub struct HttpScorer {
    transport: HttpTransport,
}

impl HttpScorer {
    pub fn new(base_url: &str, policy: RetryPolicy, max_in_flight: usize, seed: u64) -> Self {
        HttpScorer {
            transport: HttpTransport::new(base_url, policy, max_in_flight, seed),
        }
    }

    pub fn transport(&self) -> &HttpTransport {
        &self.transport
    }

    fn logprobs(
        &self,
        path: &str,
        body: serde_json::Value,
        expected: usize,
    ) -> Result<Vec<f64>, ScorerError> {
        let r: LogProbs = self.transport.post_json(path, &body)?;
        if r.logprobs.len() != expected {
            return Err(ScorerError::Protocol(format!(
                "expected {expected} logprobs, got {}",
                r.logprobs.len()
            )));
        }
        if let Some(bad) = r.logprobs.iter().find(|p| p.is_nan()) {
            return Err(ScorerError::Protocol(format!("invalid logprob {bad}")));
        }
        Ok(r.logprobs)
    }
}

impl Scorer for HttpScorer {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        self.transport.get_json("/v1/info")
    }

    fn score_batch(
        &self,
        ctx: &ScorerContext,
        candidates: &[String],
    ) -> Result<Vec<f64>, ScorerError> {
        check_candidates(candidates)?;
        self.logprobs(
            "/v1/score",
            json!({"context": ctx.text(), "candidates": candidates}),
            candidates.len(),
        )
    }

    fn decoder_step(
        &self,
        ctx: &ScorerContext,
        history: &[String],
        candidates: &[String],
    ) -> Result<DecoderStepResult, ScorerError> {
        check_candidates(candidates)?;
        let lp = self.logprobs(
            "/v1/step",
            json!({"context": ctx.text(), "history": history, "candidates": candidates}),
            candidates.len(),
        )?;
        Ok(DecoderStepResult {
            logprobs: candidates.iter().cloned().zip(lp).collect(),
        })
    }

    fn generate(&self, ctx: &ScorerContext) -> Result<String, ScorerError> {
        let g: Generated = self
            .transport
            .post_json("/v1/generate", &json!({"context": ctx.text()}))?;
        Ok(g.text)
    }

    fn retries(&self) -> u64 {
        self.transport.retries()
    }
}
