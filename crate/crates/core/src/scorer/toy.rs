//! Deterministic character-bigram scorer estimated from the context.
//!
//! Each context hypothesis is padded with a boundary symbol on both sides
//! and its character bigrams counted. Probabilities use add-one smoothing
//! over the context alphabet plus the boundary symbol and one class for
//! characters never seen in the context:
//!
//! `P(b | a) = (c(a, b) + 1) / (c(a) + |alphabet| + 2)`
//!
//! A sequence scores the sum of its bigram log-probabilities, boundary to
//! boundary.

use std::collections::{HashMap, HashSet};

use super::{
    check_candidates, DecoderStepResult, Scorer, ScorerContext, ScorerError, ScorerInfo, EOS,
};
use crate::lattice::MarkerConvention;

pub const TOY_SCORER_NAME: &str = "toy-char-bigram";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Sym {
    Boundary,
    Char(char),
    Unknown,
}

struct Model {
    pair: HashMap<(Sym, Sym), u64>,
    from: HashMap<Sym, u64>,
    alphabet: HashSet<char>,
    vocab: f64,
}

impl Model {
    fn new(ctx: &ScorerContext) -> Model {
        let mut pair = HashMap::new();
        let mut from = HashMap::new();
        let mut alphabet = HashSet::new();
        for seg in ctx.segments() {
            let mut prev = Sym::Boundary;
            for c in seg.chars().map(Sym::Char).chain([Sym::Boundary]) {
                if let Sym::Char(ch) = c {
                    alphabet.insert(ch);
                }
                *pair.entry((prev, c)).or_insert(0) += 1;
                *from.entry(prev).or_insert(0) += 1;
                prev = c;
            }
        }
        let vocab = (alphabet.len() + 2) as f64;
        Model {
            pair,
            from,
            alphabet,
            vocab,
        }
    }

    fn sym(&self, c: char) -> Sym {
        if self.alphabet.contains(&c) {
            Sym::Char(c)
        } else {
            Sym::Unknown
        }
    }

    fn logp(&self, a: Sym, b: Sym) -> f64 {
        let num = self.pair.get(&(a, b)).copied().unwrap_or(0) as f64 + 1.0;
        let den = self.from.get(&a).copied().unwrap_or(0) as f64 + self.vocab;
        (num / den).ln()
    }

    /// Log-probability of `chars` following `prev`, optionally closing with the boundary.
    fn run(&self, mut prev: Sym, chars: &str, close: bool) -> f64 {
        let mut total = 0.0;
        for c in chars.chars() {
            let s = self.sym(c);
            total += self.logp(prev, s);
            prev = s;
        }
        if close {
            total += self.logp(prev, Sym::Boundary);
        }
        total
    }
}

/// The built-in scorer. Tokens passed to [`Scorer::decoder_step`] are
/// rendered to text with the configured marker convention.
#[derive(Debug, Clone)]
pub struct ToyScorer {
    convention: MarkerConvention,
}

impl Default for ToyScorer {
    fn default() -> Self {
        ToyScorer {
            convention: MarkerConvention::Words,
        }
    }
}

impl ToyScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_convention(convention: MarkerConvention) -> Self {
        ToyScorer { convention }
    }

    fn last_sym(model: &Model, text: &str) -> Sym {
        text.chars().last().map_or(Sym::Boundary, |c| model.sym(c))
    }
}

impl Scorer for ToyScorer {
    fn info(&self) -> Result<ScorerInfo, ScorerError> {
        Ok(ScorerInfo {
            name: TOY_SCORER_NAME.into(),
            tokenizer: self.convention.as_arg(),
        })
    }

    fn score_batch(
        &self,
        ctx: &ScorerContext,
        candidates: &[String],
    ) -> Result<Vec<f64>, ScorerError> {
        check_candidates(candidates)?;
        let model = Model::new(ctx);
        Ok(candidates
            .iter()
            .map(|c| model.run(Sym::Boundary, c, true))
            .collect())
    }

    fn decoder_step(
        &self,
        ctx: &ScorerContext,
        history: &[String],
        candidates: &[String],
    ) -> Result<DecoderStepResult, ScorerError> {
        check_candidates(candidates)?;
        let model = Model::new(ctx);
        let prefix = self.convention.join(history);
        let prev = Self::last_sym(&model, &prefix);
        let last_tok = history.last().map(String::as_str);
        let logprobs = candidates
            .iter()
            .map(|c| {
                let lp = if c == EOS {
                    model.logp(prev, Sym::Boundary)
                } else {
                    model.run(prev, &self.convention.piece(last_tok, c), false)
                };
                (c.clone(), lp)
            })
            .collect();
        Ok(DecoderStepResult { logprobs })
    }

    fn generate(&self, ctx: &ScorerContext) -> Result<String, ScorerError> {
        let model = Model::new(ctx);
        let mut best: Option<(&str, f64)> = None;
        for seg in ctx.segments() {
            let s = model.run(Sym::Boundary, seg, true);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((seg, s));
            }
        }
        Ok(best.map(|(t, _)| t.to_string()).unwrap_or_default())
    }
}
