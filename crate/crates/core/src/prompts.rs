//! Zero-shot correction prompts, reply parsing, and the contamination quiz.
//!
//! Instruction wording lives in versioned template files under `templates/`.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::decode::{closest_map, strip_wrapping};
use crate::error::{Error, Result};
use crate::scorer::{HttpTransport, RetryPolicy, ScorerError};
use crate::types::NBestList;

pub const TEMPLATE_VERSION: &str = "v1";
const UNCON: &str = include_str!("../templates/uncon_v1.txt");
const CONSTR: &str = include_str!("../templates/constr_v1.txt");
const PARAPHRASE: &str = include_str!("../templates/paraphrase_v1.txt");
const QUIZ: &str = include_str!("../templates/quiz_v1.txt");

/// The reply format requested by the constrained prompt.
pub const REPLY_SCHEMA: &str = "<option?> The selected ASR transcription </option?>";

/// Environment variable holding the chat endpoint bearer token.
pub const CHAT_TOKEN_ENV: &str = "ASREC_CHAT_TOKEN";

/// Substitutes `{name}` placeholders in one pass, so substituted text is
/// never rescanned.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out.trim_end().to_string()
}

fn tagged(nbest: &NBestList, n: usize, tag: &str, pad: bool) -> Result<String> {
    let sp = if pad { " " } else { "" };
    Ok(nbest
        .top(n)?
        .iter()
        .enumerate()
        .map(|(i, h)| format!("<{tag}{k}>{sp}{}{sp}</{tag}{k}>", h.text, k = i + 1))
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Free-correction prompt with `<hypothesisK>` tags around the top `n`.
pub fn build_uncon_prompt(nbest: &NBestList, n: usize) -> Result<String> {
    let body = tagged(nbest, n, "hypothesis", false)?;
    Ok(render(UNCON, &[("hypotheses", &body)]))
}

/// Selection prompt with `<optionK>` tags and the reply format.
pub fn build_constr_prompt(nbest: &NBestList, n: usize) -> Result<String> {
    let body = tagged(nbest, n, "option", true)?;
    Ok(render(CONSTR, &[("options", &body)]))
}

/// A well-formed selection reply for option `k`.
pub fn render_reply(k: usize, text: &str) -> String {
    format!("<option{k}> {text} </option{k}>")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSelection {
    /// 1-based option index.
    pub rank: usize,
    /// True when no tag parsed and the closest option was used instead.
    pub fallback: bool,
}

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<option(\d+)>(.*?)</option(\d+)>").expect("valid regex"))
}

/// Reads the chosen option from a reply: the first `<optionK>...</optionK>`
/// block with matching numbers and `1 <= K <= n`. Otherwise, when
/// `fallback` is set, the option nearest to the raw reply.
pub fn parse_selection(
    response: &str,
    options: &NBestList,
    n: usize,
    fallback: bool,
) -> Result<ParsedSelection> {
    if n == 0 {
        return Err(Error::invalid("selection needs at least one option"));
    }
    for cap in option_re().captures_iter(response) {
        if cap[1] != cap[3] {
            continue;
        }
        if let Ok(k) = cap[1].parse::<usize>() {
            if (1..=n).contains(&k) {
                return Ok(ParsedSelection {
                    rank: k,
                    fallback: false,
                });
            }
        }
    }
    if !fallback {
        return Err(Error::Selection);
    }
    let m = closest_map(response, options, n)?;
    Ok(ParsedSelection {
        rank: m.hypothesis.rank,
        fallback: true,
    })
}

/// Asks for `count` meaning-preserving rewrites of the reference.
pub fn build_paraphrase_prompt(reference: &str, count: usize) -> String {
    render(
        PARAPHRASE,
        &[("count", &count.to_string()), ("reference", reference)],
    )
}

/// One candidate per non-empty line, with list markers and quotes removed;
/// lines equal to the reference are dropped.
pub fn parse_paraphrases(reply: &str, reference: &str) -> Vec<String> {
    static MARK: OnceLock<Regex> = OnceLock::new();
    let mark = MARK.get_or_init(|| {
        Regex::new(r"^\s*(?:[-*\u{2022}]|\d+[.)]|[A-Za-z][.)])\s+").expect("valid regex")
    });
    reply
        .lines()
        .map(|l| strip_wrapping(&mark.replace(l, "")))
        .filter(|l| !l.is_empty() && l.trim() != reference.trim())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QuizOrder {
    OrigFirst,
    ParaFirst,
}

pub fn build_quiz(reference: &str, paraphrase: &str, order: QuizOrder) -> Result<String> {
    if reference.trim() == paraphrase.trim() {
        return Err(Error::invalid("quiz options must differ"));
    }
    let (a, b) = match order {
        QuizOrder::OrigFirst => (reference, paraphrase),
        QuizOrder::ParaFirst => (paraphrase, reference),
    };
    Ok(render(QUIZ, &[("option_a", a), ("option_b", b)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuizAnswer {
    A,
    B,
    C,
}

impl QuizAnswer {
    /// The first standalone `A`, `B` or `C` in a reply.
    pub fn parse(reply: &str) -> Option<QuizAnswer> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| Regex::new(r"\b([ABC])\b").expect("valid regex"));
        re.captures(reply).map(|c| match &c[1] {
            "A" => QuizAnswer::A,
            "B" => QuizAnswer::B,
            _ => QuizAnswer::C,
        })
    }

    pub fn picks_original(self, order: QuizOrder) -> bool {
        matches!(
            (self, order),
            (QuizAnswer::A, QuizOrder::OrigFirst) | (QuizAnswer::B, QuizOrder::ParaFirst)
        )
    }
}

/// Answers for one utterance in both option orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizPair {
    pub id: String,
    pub orig_first: Option<QuizAnswer>,
    pub para_first: Option<QuizAnswer>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QuizRule {
    /// Contaminated only when the original is picked in both orders.
    #[default]
    BothOrders,
    /// Mean of the two single-order hit rates.
    Average,
}

pub fn score_quiz(answers: &[QuizPair], rule: QuizRule) -> Result<f64> {
    if answers.is_empty() {
        return Err(Error::invalid("no quiz answers"));
    }
    let mut total = 0.0;
    for p in answers {
        let (Some(a), Some(b)) = (p.orig_first, p.para_first) else {
            return Err(Error::invalid(format!(
                "utterance {:?} lacks an answer for one order",
                p.id
            )));
        };
        let hits = [
            a.picks_original(QuizOrder::OrigFirst),
            b.picks_original(QuizOrder::ParaFirst),
        ];
        total += match rule {
            QuizRule::BothOrders => f64::from(u8::from(hits[0] && hits[1])),
            QuizRule::Average => hits.iter().filter(|h| **h).count() as f64 / 2.0,
        };
    }
    Ok(total / answers.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, ScorerError>;

    fn retries(&self) -> u64 {
        0
    }
}

#[derive(Deserialize)]
struct ChatReply {
    text: String,
}

/// `POST {"messages": [...]}` returning `{"text": ...}`.
pub struct HttpChatClient {
    transport: HttpTransport,
}

impl HttpChatClient {
    /// Sends a bearer token from [`CHAT_TOKEN_ENV`] when it is set.
    pub fn new(url: &str, policy: RetryPolicy, max_in_flight: usize, seed: u64) -> Self {
        let mut transport = HttpTransport::new(url, policy, max_in_flight, seed);
        if let Ok(token) = std::env::var(CHAT_TOKEN_ENV) {
            transport = transport.with_header("Authorization", format!("Bearer {token}"));
        }
        HttpChatClient { transport }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, ScorerError> {
        let r: ChatReply = self
            .transport
            .post_json("", &json!({ "messages": messages }))?;
        Ok(r.text)
    }

    fn retries(&self) -> u64 {
        self.transport.retries()
    }
}
