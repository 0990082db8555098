//! Completion-provider protocol for the non-scriptable tasks.
//!
//! The pipeline talks to an external model through a single POST endpoint:
//! request `{prompt, max_tokens, stop}`, response `{text}`. Completions end
//! with an `[END]` sentinel. Feedback completions name a step, quote a
//! segment, and give a reason; the segment must be a verbatim quote of the
//! named step or the completion is rejected as malformed rather than being
//! silently repaired.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::editor::{FeedbackModule, ImproveModule};
use crate::error::{PipelineError, Result};
use crate::feedback::{classify_reason, nonterminal_feedback, terminal_feedback, Feedback};
use crate::parse::parse_attempt;
use crate::step::{Attempt, StepLabel};
use crate::task::TaskInstance;

pub const END_SENTINEL: &str = "[END]";

/// Environment variable holding the bearer token for the HTTP provider.
pub const API_KEY_VAR: &str = "RETRACE_API_KEY";

const FEEDBACK_TEMPLATE: &str = include_str!("../assets/prompts/feedback.txt");
const IMPROVE_TEMPLATE: &str = include_str!("../assets/prompts/improve.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

pub trait ProviderClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String>;
}

/// Blocking HTTP client with bounded retries and exponential backoff.
/// Transport failures and error statuses are retried; a malformed response
/// body is not, since it will not get better on its own.
pub struct HttpProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    max_retries: u32,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>) -> HttpProvider {
        HttpProvider {
            endpoint: endpoint.into(),
            client: reqwest::blocking::Client::new(),
            api_key: std::env::var(API_KEY_VAR).ok(),
            max_retries: 3,
        }
    }
}

impl ProviderClient for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..self.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 << attempt));
            }
            let mut call = self.client.post(&self.endpoint).json(req);
            if let Some(key) = &self.api_key {
                call = call.bearer_auth(key);
            }
            match call.send() {
                Ok(resp) if resp.status().is_success() => {
                    let body: CompletionResponse = resp.json().map_err(|e| {
                        PipelineError::ProviderFormat(format!(
                            "completion response is not {{\"text\": …}}: {e}"
                        ))
                    })?;
                    return Ok(body.text);
                }
                Ok(resp) => last = format!("endpoint returned status {}", resp.status()),
                Err(e) => last = e.to_string(),
            }
        }
        Err(PipelineError::ProviderTransport(last))
    }
}

/// Canned-response provider for tests and offline fixtures. Hands out its
/// responses in order and records every request it saw.
#[derive(Debug, Default)]
pub struct FixtureProvider {
    responses: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl FixtureProvider {
    pub fn new<I, S>(responses: I) -> FixtureProvider
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FixtureProvider {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Requests seen so far, in order.
    pub fn seen_requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("fixture lock").clone()
    }
}

impl ProviderClient for FixtureProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        self.requests.lock().expect("fixture lock").push(req.clone());
        self.responses
            .lock()
            .expect("fixture lock")
            .pop_front()
            .ok_or_else(|| {
                PipelineError::ProviderFormat(
                    "fixture provider ran out of canned responses".into(),
                )
            })
    }
}

fn strip_sentinel(text: &str) -> &str {
    let t = text.trim();
    t.strip_suffix(END_SENTINEL).map(str::trim_end).unwrap_or(t)
}

fn parse_label(token: &str) -> StepLabel {
    let t = token.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(t);
    StepLabel::new(inner.trim())
}

/// Feedback via the provider. A correct final answer is recognized locally
/// and returns terminal feedback without a call; otherwise the completion
/// must name an existing step and quote a verbatim segment of it.
pub fn remote_feedback(
    client: &dyn ProviderClient,
    inst: &TaskInstance,
    attempt: &Attempt,
) -> Result<Feedback> {
    if attempt.final_answer.as_deref() == Some(inst.gold_answer.as_str()) {
        return Ok(terminal_feedback(attempt));
    }
    let prompt = FEEDBACK_TEMPLATE
        .replace("{question}", &inst.question)
        .replace("{attempt}", &attempt.text);
    let completion = client.complete(&CompletionRequest {
        prompt,
        max_tokens: 256,
        stop: vec![END_SENTINEL.into()],
    })?;
    parse_feedback_completion(attempt, &completion)
}

/// Parses a feedback completion of the form:
///
/// ```text
/// (3)
/// Error segment: "…"
/// Error reason: … [END]
/// ```
pub fn parse_feedback_completion(attempt: &Attempt, completion: &str) -> Result<Feedback> {
    let body = strip_sentinel(completion);
    let mut lines = body.lines().filter(|l| !l.trim().is_empty());
    let label_line = lines.next().ok_or_else(|| {
        PipelineError::ProviderFormat("empty feedback completion".into())
    })?;
    let label = parse_label(label_line);
    let mut segment = None;
    let mut reason = None;
    for line in lines {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("Error segment:") {
            let rest = rest.trim();
            let unquoted = rest
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .unwrap_or(rest);
            segment = Some(unquoted.to_string());
        } else if let Some(rest) = t.strip_prefix("Error reason:") {
            let rest = strip_sentinel(rest.trim());
            reason = Some(rest.strip_suffix('.').unwrap_or(rest).to_string());
        }
    }
    let segment = segment.ok_or_else(|| {
        PipelineError::ProviderFormat("feedback completion lacks an error segment".into())
    })?;
    let reason = reason.ok_or_else(|| {
        PipelineError::ProviderFormat("feedback completion lacks an error reason".into())
    })?;
    let Some(idx) = attempt.position_of(&label) else {
        return Err(PipelineError::ProviderFormat(format!(
            "feedback names step {} which the attempt does not have",
            label.render()
        )));
    };
    if !attempt.steps[idx].raw_text.contains(&segment) {
        return Err(PipelineError::ProviderFormat(format!(
            "quoted segment {segment:?} does not appear in step {}",
            label.render()
        )));
    }
    let kind = classify_reason(&reason);
    Ok(nonterminal_feedback(attempt, label, segment, kind, reason))
}

/// Improvement via the provider: the prompt shows the attempt, the feedback,
/// and the kept prefix (steps before the located error); the completion must
/// continue into a parseable attempt with a final response.
pub fn remote_improve(
    client: &dyn ProviderClient,
    inst: &TaskInstance,
    prev: &Attempt,
    fb: &Feedback,
) -> Result<Attempt> {
    if fb.terminal {
        return Err(PipelineError::Parameter(
            "terminal feedback leaves nothing to improve".into(),
        ));
    }
    let error_step = fb.error_step.as_ref().ok_or_else(|| {
        PipelineError::Parameter("non-terminal feedback has no error step".into())
    })?;
    let idx = prev.position_of(error_step).ok_or_else(|| {
        PipelineError::ImprovementImpossible(format!(
            "the attempt has no step {}",
            error_step.render()
        ))
    })?;
    let mut prefix = String::new();
    if !prev.preamble.is_empty() {
        prefix.push_str(&prev.preamble);
    }
    for s in &prev.steps[..idx] {
        if !prefix.is_empty() {
            prefix.push('\n');
        }
        prefix.push_str(&s.raw_text);
    }
    let prompt = IMPROVE_TEMPLATE
        .replace("{question}", &inst.question)
        .replace("{attempt}", &prev.text)
        .replace("{feedback}", &fb.rendered)
        .replace("{prefix}", &prefix);
    let completion = client.complete(&CompletionRequest {
        prompt,
        max_tokens: 512,
        stop: vec![END_SENTINEL.into()],
    })?;
    let continuation = strip_sentinel(&completion);
    let full = if prefix.is_empty() {
        continuation.trim_start().to_string()
    } else {
        format!("{prefix}\n{}", continuation.trim())
    };
    let attempt = parse_attempt(inst.kind, &full)?;
    if attempt.final_answer.is_none() {
        return Err(PipelineError::ProviderFormat(
            "revised attempt lacks a final response".into(),
        ));
    }
    Ok(attempt)
}

/// [`FeedbackModule`] backed by a provider.
pub struct RemoteFeedbackModule<'a> {
    pub client: &'a dyn ProviderClient,
}

impl FeedbackModule for RemoteFeedbackModule<'_> {
    fn feedback(&self, inst: &TaskInstance, attempt: &Attempt) -> Result<Feedback> {
        remote_feedback(self.client, inst, attempt)
    }
}

/// [`ImproveModule`] backed by a provider.
pub struct RemoteImproveModule<'a> {
    pub client: &'a dyn ProviderClient,
}

impl ImproveModule for RemoteImproveModule<'_> {
    fn improve(&self, inst: &TaskInstance, prev: &Attempt, fb: &Feedback) -> Result<Attempt> {
        remote_improve(self.client, inst, prev, fb)
    }
}
