//! Optional client for producing rewrite variants through a chat-completion
//! endpoint. The offline path reads [`RewriteSet`] files instead.

use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{RewriteSet, VARIANTS_PER_ANSWER};
use crate::corpus::{Answer, Origin};
use crate::error::{Error, Result};

pub const PARAPHRASE_TEMPLATE: &str = include_str!("../../resources/paraphrase_prompt.txt");

pub fn paraphrase_prompt(answer: &str) -> String {
    PARAPHRASE_TEMPLATE.replacen("{answer}", answer, 1)
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#(\d+)#").expect("static regex"))
}

/// Extracts the `#1#`, `#2#`, `#3#` variants of a rewriting response, in
/// marker order regardless of the order they appear in.
pub fn parse_rewriting(response: &str) -> Result<Vec<String>> {
    let fail = |why: &str| Error::Format(format!("{why}; raw response: {response:?}"));
    let marks: Vec<_> = marker_re().captures_iter(response).collect();
    let mut slots: Vec<Option<String>> = vec![None; VARIANTS_PER_ANSWER];
    for (i, cap) in marks.iter().enumerate() {
        let whole = cap.get(0).expect("group 0");
        let n: usize = cap[1].parse().map_err(|_| fail("bad marker number"))?;
        if n == 0 || n > VARIANTS_PER_ANSWER {
            return Err(fail(&format!("unexpected marker #{n}#")));
        }
        let end = marks.get(i + 1).map_or(response.len(), |next| next.get(0).expect("group 0").start());
        let body = response[whole.end()..end].trim();
        if body.is_empty() {
            return Err(fail(&format!("empty variant #{n}#")));
        }
        if slots[n - 1].replace(body.to_owned()).is_some() {
            return Err(fail(&format!("duplicate marker #{n}#")));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| fail(&format!("missing marker #{}#", i + 1))))
        .collect()
}

pub trait ChatTransport: Sync {
    /// Sends one user message and returns the assistant text.
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Minimum spacing between requests.
    #[serde(default = "default_interval_ms")]
    pub min_interval_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_interval_ms() -> u64 {
    1000
}

fn default_timeout_s() -> u64 {
    120
}

pub struct HttpChatClient {
    config: EndpointConfig,
    token: Option<String>,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

impl HttpChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_s))
            .build();
        HttpChatClient {
            config,
            token,
            agent,
            last_request: Mutex::new(None),
        }
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("throttle lock");
        let spacing = Duration::from_millis(self.config.min_interval_ms);
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < spacing {
                thread::sleep(spacing - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl ChatTransport for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.throttle();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.agent.post(&url).set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = req
            .send_json(body)
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        let parsed: ChatResponse = resp
            .into_json()
            .map_err(|e| Error::Transport(format!("{url}: unreadable body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Format(format!("{url}: response without choices")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FetchOptions {
    /// Extra attempts after a response that does not parse.
    pub max_retries: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions { max_retries: 2 }
    }
}

/// Requests three paraphrases for each original answer of one group.
///
/// Requests are issued sequentially so output order follows input order;
/// rate limiting belongs to the transport.
pub fn fetch_paraphrases(
    pair_id: &str,
    label: bool,
    answers: &[Answer],
    transport: &dyn ChatTransport,
    opts: FetchOptions,
) -> Result<Vec<RewriteSet>> {
    if answers.is_empty() {
        return Err(Error::Validation(format!("pair {pair_id}: no answers to paraphrase")));
    }
    let mut out = Vec::new();
    let originals = answers.iter().filter(|a| a.origin == Origin::Original);
    for (index, answer) in originals.enumerate() {
        let prompt = paraphrase_prompt(&answer.text);
        let mut attempt = 0;
        let variants = loop {
            let raw = transport.complete(&prompt)?;
            match parse_rewriting(&raw) {
                Ok(v) => break v,
                Err(e) if attempt >= opts.max_retries => return Err(e),
                Err(_) => attempt += 1,
            }
        };
        out.push(RewriteSet {
            pair_id: pair_id.to_owned(),
            label,
            source_answer_index: index,
            source_text: Some(answer.text.clone()),
            variants,
        });
    }
    Ok(out)
}
