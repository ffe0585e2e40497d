//! Client for the transformer scoring service.
//!
//! The service exposes three JSON routes under `/v1`: `masked_topk`
//! (bidirectional mask filling), `conditional` (left-to-right log-probability
//! of a word, summed over its sub-word pieces) and `health`. All
//! log-probabilities on the wire are natural logs.

use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    check_mask, floor_logprob, ScoredWord, Scorer, ScorerDescriptor, ScorerError, ScorerKind,
    DEFAULT_LOG_FLOOR,
};
use crate::text::normalize_word;

/// Request and response bodies of the scoring service.
pub mod wire {
    use serde::{Deserialize, Serialize};
    use serde_json::{Map, Value};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MaskedTopkRequest {
        pub tokens: Vec<String>,
        pub mask_index: usize,
        pub k: usize,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct WireCandidate {
        pub word: String,
        pub logprob: f64,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MaskedTopkResponse {
        pub candidates: Vec<WireCandidate>,
        pub model_identity: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ConditionalRequest {
        pub context: Vec<String>,
        pub target: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ConditionalResponse {
        pub logprob: f64,
        pub n_pieces: u32,
        pub model_identity: String,
    }

    /// `GET /v1/health`. Only `status` is required; `models` maps a role
    /// (e.g. `masked`, `causal`) to a model identity.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct HealthResponse {
        pub status: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub models: Option<Map<String, Value>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub model_identity: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub vocabulary_size: Option<u64>,
    }

    pub const MASKED_TOPK: &str = "/v1/masked_topk";
    pub const CONDITIONAL: &str = "/v1/conditional";
    pub const HEALTH: &str = "/v1/health";
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub max_in_flight: usize,
    pub timeout: Duration,
    /// Depth of the extra top-k query used to score a word that missed the
    /// regular top-k list; words beyond it get the log floor.
    pub veridical_search_k: usize,
    pub floor: f64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
            veridical_search_k: 1000,
            floor: DEFAULT_LOG_FLOOR,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteScorer {
    agent: ureq::Agent,
    base: String,
    config: RemoteConfig,
    gate: Gate,
    descriptor: ScorerDescriptor,
    masked_identity: OnceLock<String>,
    conditional_identity: OnceLock<String>,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer")
            .field("base", &self.base)
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

impl RemoteScorer {
    /// Checks `/v1/health` and records the advertised model identities.
    pub fn connect(config: RemoteConfig) -> Result<Self, ScorerError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let base = config.endpoint.trim_end_matches('/').to_string();
        let mut scorer = Self {
            agent,
            base,
            gate: Gate::new(config.max_in_flight),
            config,
            descriptor: ScorerDescriptor {
                kind: ScorerKind::Remote,
                identity: String::new(),
                vocabulary_size: None,
            },
            masked_identity: OnceLock::new(),
            conditional_identity: OnceLock::new(),
        };

        let health: wire::HealthResponse = scorer.get(wire::HEALTH)?;
        if health.status != "ok" {
            return Err(ScorerError::Unavailable(format!(
                "service at {} reports status {:?}",
                scorer.base, health.status
            )));
        }
        scorer.descriptor.identity = health_identity(&health);
        scorer.descriptor.vocabulary_size = health.vocabulary_size;
        Ok(scorer)
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn get<T: DeserializeOwned>(&self, route: &str) -> Result<T, ScorerError> {
        let _permit = self.gate.acquire();
        let url = format!("{}{route}", self.base);
        let response = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| transport_error(&url, e))?;
        decode(&url, response)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, route: &str, body: &B) -> Result<T, ScorerError> {
        let _permit = self.gate.acquire();
        let url = format!("{}{route}", self.base);
        let response = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| transport_error(&url, e))?;
        decode(&url, response)
    }

    fn request_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        let request = wire::MaskedTopkRequest {
            tokens: words.to_vec(),
            mask_index,
            k,
        };
        let response: wire::MaskedTopkResponse = self.post(wire::MASKED_TOPK, &request)?;
        check_identity(&self.masked_identity, &response.model_identity, wire::MASKED_TOPK)?;

        if response.candidates.len() > k {
            return Err(ScorerError::Protocol(format!(
                "asked for {k} candidates, received {}",
                response.candidates.len()
            )));
        }
        if let Some(bad) = response.candidates.iter().find(|c| c.logprob.is_nan()) {
            return Err(ScorerError::Protocol(format!("NaN logprob for {:?}", bad.word)));
        }
        if response
            .candidates
            .windows(2)
            .any(|w| w[0].logprob < w[1].logprob)
        {
            return Err(ScorerError::Protocol(
                "masked_topk candidates not sorted by logprob".into(),
            ));
        }
        Ok(response
            .candidates
            .into_iter()
            .map(|c| ScoredWord {
                word: c.word,
                logprob: floor_logprob(c.logprob, self.config.floor),
            })
            .collect())
    }
}

impl Scorer for RemoteScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        self.descriptor.clone()
    }

    fn masked_topk(
        &self,
        words: &[String],
        mask_index: usize,
        k: usize,
    ) -> Result<Vec<ScoredWord>, ScorerError> {
        check_mask(words, mask_index, k)?;
        self.request_topk(words, mask_index, k)
    }

    fn masked_logprob(
        &self,
        words: &[String],
        mask_index: usize,
        word: &str,
    ) -> Result<f64, ScorerError> {
        check_mask(words, mask_index, 1)?;
        let wanted = normalize_word(word);
        let deep = self.request_topk(words, mask_index, self.config.veridical_search_k.max(1))?;
        Ok(deep
            .into_iter()
            .find(|c| normalize_word(&c.word) == wanted)
            .map_or(self.config.floor, |c| c.logprob))
    }

    fn conditional_logprob(&self, context: &[String], target: &str) -> Result<f64, ScorerError> {
        let request = wire::ConditionalRequest {
            context: context.to_vec(),
            target: target.to_string(),
        };
        let response: wire::ConditionalResponse = self.post(wire::CONDITIONAL, &request)?;
        check_identity(
            &self.conditional_identity,
            &response.model_identity,
            wire::CONDITIONAL,
        )?;
        if response.n_pieces == 0 {
            return Err(ScorerError::Protocol("conditional response with zero pieces".into()));
        }
        if response.logprob.is_nan() {
            return Err(ScorerError::Protocol(format!("NaN logprob for {target:?}")));
        }
        Ok(floor_logprob(response.logprob, self.config.floor))
    }
}

fn health_identity(health: &wire::HealthResponse) -> String {
    if let Some(models) = &health.models {
        // serde_json preserves insertion order; sort for a stable key
        let mut parts: Vec<String> = models
            .iter()
            .map(|(role, v)| match v.as_str() {
                Some(name) => format!("{role}={name}"),
                None => format!("{role}={v}"),
            })
            .collect();
        parts.sort();
        if !parts.is_empty() {
            return parts.join(",");
        }
    }
    health
        .model_identity
        .clone()
        .unwrap_or_else(|| "unknown".to_string())
}

fn check_identity(slot: &OnceLock<String>, seen: &str, route: &str) -> Result<(), ScorerError> {
    let first = slot.get_or_init(|| seen.to_string());
    if first != seen {
        return Err(ScorerError::Protocol(format!(
            "{route} model identity changed from {first:?} to {seen:?}"
        )));
    }
    Ok(())
}

fn transport_error(url: &str, err: ureq::Error) -> ScorerError {
    ScorerError::Unavailable(format!("{url}: {err}"))
}

fn decode<T: DeserializeOwned>(
    url: &str,
    mut response: ureq::http::Response<ureq::Body>,
) -> Result<T, ScorerError> {
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        let detail = response.body_mut().read_to_string().unwrap_or_default();
        let message = format!("{url} returned HTTP {status}: {}", detail.trim());
        return Err(if status >= 500 {
            ScorerError::Unavailable(message)
        } else {
            ScorerError::Protocol(message)
        });
    }
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| ScorerError::Unavailable(format!("{url}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| ScorerError::Protocol(format!("{url}: malformed response body: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn identity_from_models_map_is_sorted() {
        let health: wire::HealthResponse = serde_json::from_value(json!({
            "status": "ok",
            "models": {"masked": "roberta-base", "causal": "gpt2"}
        }))
        .unwrap();
        assert_eq!(health_identity(&health), "causal=gpt2,masked=roberta-base");
    }

    #[test]
    fn identity_fallbacks() {
        let health: wire::HealthResponse =
            serde_json::from_value(json!({"status": "ok", "model_identity": "m"})).unwrap();
        assert_eq!(health_identity(&health), "m");
        let health: wire::HealthResponse = serde_json::from_value(json!({"status": "ok"})).unwrap();
        assert_eq!(health_identity(&health), "unknown");
    }

    #[test]
    fn identity_drift_is_rejected() {
        let slot = OnceLock::new();
        assert!(check_identity(&slot, "a", "/x").is_ok());
        assert!(check_identity(&slot, "a", "/x").is_ok());
        assert!(matches!(check_identity(&slot, "b", "/x"), Err(ScorerError::Protocol(_))));
    }

    #[test]
    fn unreachable_service_is_unavailable() {
        // port 9 (discard) on localhost is essentially never served
        let mut config = RemoteConfig::new("http://127.0.0.1:9");
        config.timeout = Duration::from_secs(2);
        assert!(matches!(RemoteScorer::connect(config), Err(ScorerError::Unavailable(_))));
    }

    #[test]
    fn gate_bounds_permits() {
        let gate = Gate::new(2);
        let a = gate.acquire();
        let _b = gate.acquire();
        assert_eq!(*gate.free.lock().unwrap(), 0);
        drop(a);
        assert_eq!(*gate.free.lock().unwrap(), 1);
    }
}
