//! The correction strategies: free generation, N-best constrained
//! selection, closest mapping, lattice-constrained beam search, and the
//! interpolation-weight grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{lattice_from_nbest, Lattice, MarkerConvention};
use crate::metrics::{align, corpus_wer};
use crate::scorer::{Scorer, ScorerContext, EOS};
use crate::textnorm::{normalize_eval, words};
use crate::types::{EcConfig, Hypothesis, NBestList, Utterance};

/// Output of free generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconResult {
    pub text: String,
    /// Fewer than half as many words as the rank-1 hypothesis.
    pub suspected_truncation: bool,
}

/// Removes matching quotes and `<tag>...</tag>` wrappers around a reply.
pub fn strip_wrapping(text: &str) -> String {
    let mut t = text.trim();
    loop {
        let before = t;
        for (open, close) in [
            ('"', '"'),
            ('\'', '\''),
            ('\u{201C}', '\u{201D}'),
            ('`', '`'),
        ] {
            if t.chars().count() >= 2 && t.starts_with(open) && t.ends_with(close) {
                t = t[open.len_utf8()..t.len() - close.len_utf8()].trim();
            }
        }
        if let Some(rest) = t.strip_prefix('<') {
            if let Some(gt) = rest.find('>') {
                let name = &rest[..gt];
                let closing = format!("</{name}>");
                let valid =
                    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if valid && t.ends_with(&closing) && t.len() >= gt + 2 + closing.len() {
                    t = t[gt + 2..t.len() - closing.len()].trim();
                }
            }
        }
        if t == before {
            return t.to_string();
        }
    }
}

/// Fewer than half as many words as the reference-length hypothesis.
pub fn is_truncated(output: &str, rank1: &str) -> bool {
    let out = output.split_whitespace().count();
    let full = rank1.split_whitespace().count();
    2 * out < full
}

pub fn correct_unconstrained(
    utt: &Utterance,
    scorer: &dyn Scorer,
    cfg: &EcConfig,
) -> Result<UnconResult> {
    cfg.validate()?;
    let ctx = ScorerContext::new(&utt.nbest, cfg.n_input, &cfg.sep)?;
    let raw = scorer.generate(&ctx)?;
    let text = strip_wrapping(&raw);
    let suspected_truncation = is_truncated(&text, &utt.nbest.best().text);
    Ok(UnconResult {
        text,
        suspected_truncation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub hypothesis: Hypothesis,
    /// Interpolated score of the winner.
    pub score: f64,
}

fn interpolate(lambda: f64, asr: f64, ec: f64) -> f64 {
    let a = if lambda >= 1.0 {
        0.0
    } else {
        (1.0 - lambda) * asr
    };
    let e = if lambda <= 0.0 { 0.0 } else { lambda * ec };
    a + e
}

/// Correction-model scores of the top `cfg.n_input` hypotheses, length
/// normalized when configured. Skips the scorer entirely at `lambda == 0`.
fn ec_scores(utt: &Utterance, scorer: &dyn Scorer, cfg: &EcConfig) -> Result<Vec<f64>> {
    let top = utt.nbest.top(cfg.n_input)?;
    if cfg.lambda <= 0.0 {
        return Ok(vec![0.0; top.len()]);
    }
    let ctx = ScorerContext::new(&utt.nbest, cfg.n_input, &cfg.sep)?;
    let texts: Vec<String> = top.iter().map(|h| h.text.clone()).collect();
    let mut ec = scorer.score_batch(&ctx, &texts)?;
    if ec.len() != texts.len() {
        return Err(Error::Arity {
            expected: texts.len(),
            actual: ec.len(),
        });
    }
    if cfg.length_norm {
        for (s, t) in ec.iter_mut().zip(&texts) {
            *s /= t.split_whitespace().count().max(1) as f64;
        }
    }
    Ok(ec)
}

fn pick(top: &[Hypothesis], ec: &[f64], lambda: f64) -> Result<Selection> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (h, e)) in top.iter().zip(ec).enumerate() {
        if !h.asr_logscore.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite ASR score at rank {}",
                h.rank
            )));
        }
        let s = interpolate(lambda, h.asr_logscore, *e);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (i, score) = best.expect("top is non-empty");
    Ok(Selection {
        hypothesis: top[i].clone(),
        score,
    })
}

/// Argmax of `(1 - lambda) * asr + lambda * ec` over the top `n_input`
/// hypotheses; ties go to the lower rank.
pub fn select_constrained(
    utt: &Utterance,
    scorer: &dyn Scorer,
    cfg: &EcConfig,
) -> Result<Selection> {
    cfg.validate()?;
    let top = utt.nbest.top(cfg.n_input)?;
    let ec = ec_scores(utt, scorer, cfg)?;
    pick(top, &ec, cfg.lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosestMatch {
    pub hypothesis: Hypothesis,
    /// Word-level edit distance after eval normalization.
    pub distance: usize,
}

/// The top-`n` hypothesis nearest to `output` in word edit distance; ties
/// go to the lower rank.
pub fn closest_map(output: &str, nbest: &NBestList, n: usize) -> Result<ClosestMatch> {
    let top = nbest.top(n)?;
    let target = words(&normalize_eval(output));
    let mut best: Option<(usize, usize)> = None;
    for (i, h) in top.iter().enumerate() {
        let d = align(&target, &words(&normalize_eval(&h.text)))
            .counts
            .errors();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    let (i, distance) = best.expect("top is non-empty");
    Ok(ClosestMatch {
        hypothesis: top[i].clone(),
        distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeResult {
    pub tokens: Vec<String>,
    pub score: f64,
}

impl LatticeResult {
    pub fn text(&self, convention: &MarkerConvention) -> String {
        convention.join(&self.tokens)
    }
}

#[derive(Debug, Clone)]
struct Partial {
    score: f64,
    history: Vec<String>,
    seq: u64,
}

/// Keeps the `cap` best partial hypotheses; among equal scores the earlier
/// insertion survives.
struct BoundedHeap {
    cap: usize,
    items: Vec<Partial>,
}

impl BoundedHeap {
    fn push(&mut self, p: Partial) {
        if self.items.len() < self.cap {
            self.items.push(p);
            return;
        }
        let (worst, min) = self
            .items
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.score.total_cmp(&b.score).then(b.seq.cmp(&a.seq)))
            .map(|(i, x)| (i, x.score))
            .expect("capacity is at least one");
        if p.score > min {
            self.items[worst] = p;
        }
    }

    fn in_insertion_order(mut self) -> Vec<Partial> {
        self.items.sort_by_key(|p| p.seq);
        self.items
    }
}

/// Beam search over lattice paths. Each edge `v -> x` adds
/// `lambda * log o[x] + (1 - lambda) * s_vx`, where `o` is the scorer's
/// next-token distribution given the partial hypothesis; the end node is
/// scored as [`EOS`]. Every node keeps at most `beam_width` partials.
pub fn lattice_decode(
    lattice: &Lattice,
    scorer: &dyn Scorer,
    ctx: &ScorerContext,
    cfg: &EcConfig,
) -> Result<LatticeResult> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let token_of = |x: usize| -> &str {
        if x == lattice.end() {
            EOS
        } else {
            lattice.token(x)
        }
    };
    let mut heaps: Vec<Option<BoundedHeap>> = (0..lattice.len())
        .map(|_| {
            Some(BoundedHeap {
                cap: cfg.beam_width,
                items: Vec::new(),
            })
        })
        .collect();
    let mut seq = 0u64;
    heaps[lattice.start()]
        .as_mut()
        .expect("fresh heap")
        .push(Partial {
            score: 0.0,
            history: Vec::new(),
            seq,
        });

    for &v in lattice.order() {
        if v == lattice.end() {
            continue;
        }
        let arcs = lattice.successors(v);
        let mut candidates: Vec<String> = Vec::with_capacity(arcs.len());
        for a in arcs {
            let t = token_of(a.to);
            if !candidates.iter().any(|c| c == t) {
                candidates.push(t.to_string());
            }
        }
        let partials = heaps[v]
            .take()
            .expect("each node is visited once")
            .in_insertion_order();
        for n in partials {
            let o = if lambda > 0.0 {
                Some(scorer.decoder_step(ctx, &n.history, &candidates)?)
            } else {
                None
            };
            for a in arcs {
                let t = token_of(a.to);
                let lm = match &o {
                    Some(o) => o
                        .get(t)
                        .ok_or_else(|| Error::invalid(format!("scorer omitted candidate {t:?}")))?,
                    None => 0.0,
                };
                let score = n.score + interpolate(lambda, a.score, lm);
                let mut history = n.history.clone();
                if a.to != lattice.end() {
                    history.push(t.to_string());
                }
                seq += 1;
                heaps[a.to]
                    .as_mut()
                    .expect("successors come later in topological order")
                    .push(Partial {
                        score,
                        history,
                        seq,
                    });
            }
        }
    }

    let finals = heaps[lattice.end()].take().expect("end heap").items;
    let best = finals
        .into_iter()
        .max_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| b.history.cmp(&a.history))
        })
        .expect("a valid lattice always reaches its end node");
    Ok(LatticeResult {
        tokens: best.history,
        score: best.score,
    })
}

/// The utterance's lattice, or one merged from its top `n_input` hypotheses.
pub fn utterance_lattice(utt: &Utterance, cfg: &EcConfig) -> Result<Lattice> {
    if let Some(l) = &utt.lattice {
        return Ok(l.clone());
    }
    let top = NBestList::pooled(utt.nbest.top(cfg.n_input)?.to_vec())?;
    Ok(lattice_from_nbest(&top)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridStrategy {
    Constrained,
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: 0.0,
            hi: 1.0,
            step: 0.05,
        }
    }
}

impl LambdaGrid {
    /// Grid points `lo + k * step`, rounded to 1e-12 so accumulated error
    /// never adds or drops an endpoint.
    pub fn values(&self) -> Result<Vec<f64>> {
        let ordered = self.lo <= self.hi;
        if !self.step.is_finite() || self.step <= 0.0 || !ordered || self.lo < 0.0 || self.hi > 1.0
        {
            return Err(Error::invalid(format!(
                "bad lambda grid lo={} hi={} step={}",
                self.lo, self.hi, self.step
            )));
        }
        let k = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        Ok((0..=k)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub errors: usize,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_lambda: f64,
    pub best_wer: f64,
    pub curve: Vec<GridPoint>,
}

/// Evaluates every grid value on `dev` and returns the one with the fewest
/// corpus errors; ties go to the smaller lambda.
pub fn grid_search_lambda(
    dev: &[Utterance],
    scorer: &dyn Scorer,
    strategy: GridStrategy,
    grid: &LambdaGrid,
    cfg: &EcConfig,
    convention: &MarkerConvention,
) -> Result<GridResult> {
    if dev.is_empty() {
        return Err(Error::invalid("grid search needs a non-empty dev set"));
    }
    for u in dev {
        u.reference()?;
    }
    let lambdas = grid.values()?;

    // Constrained selection scores each hypothesis once and reuses it.
    let cached_ec: Option<Vec<Vec<f64>>> = match strategy {
        GridStrategy::Constrained => Some(
            dev.par_iter()
                .map(|u| ec_scores(u, scorer, &cfg.for_list(u.nbest.len()).with_lambda(1.0)))
                .collect::<Result<_>>()?,
        ),
        GridStrategy::Lattice => None,
    };
    let lattices: Vec<Lattice> = match strategy {
        GridStrategy::Lattice => dev
            .iter()
            .map(|u| utterance_lattice(u, &cfg.for_list(u.nbest.len())))
            .collect::<Result<_>>()?,
        GridStrategy::Constrained => Vec::new(),
    };

    let mut curve = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let c = cfg.with_lambda(lambda);
        let texts: Vec<String> = match &cached_ec {
            Some(ec) => dev
                .iter()
                .zip(ec)
                .map(|(u, e)| Ok(pick(u.nbest.top(e.len())?, e, lambda)?.hypothesis.text))
                .collect::<Result<_>>()?,
            None => dev
                .par_iter()
                .zip(lattices.par_iter())
                .map(|(u, l)| {
                    let c = c.for_list(u.nbest.len());
                    let ctx = ScorerContext::new(&u.nbest, c.n_input, &c.sep)?;
                    Ok(lattice_decode(l, scorer, &ctx, &c)?.text(convention))
                })
                .collect::<Result<_>>()?,
        };
        let report = corpus_wer(dev, &texts)?;
        curve.push(GridPoint {
            lambda,
            errors: report.totals.errors(),
            wer: report.wer,
        });
    }
    let best = curve
        .iter()
        .min_by_key(|p| p.errors)
        .expect("grid has at least one value");
    Ok(GridResult {
        best_lambda: best.lambda,
        best_wer: best.wer,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::ToyScorer;

    fn utt(hyps: &[(&str, f64)]) -> Utterance {
        Utterance::new(
            "u",
            Some(hyps[0].0.into()),
            NBestList::new(hyps.iter().copied()).unwrap(),
        )
    }

    #[test]
    fn strips_quotes_and_tags() {
        assert_eq!(strip_wrapping("  \"the gut\" "), "the gut");
        assert_eq!(strip_wrapping("<option2> the gut </option2>"), "the gut");
        assert_eq!(strip_wrapping("'<hypothesis1>a b</hypothesis1>'"), "a b");
        assert_eq!(strip_wrapping("<b>x</i>"), "<b>x</i>");
        assert_eq!(strip_wrapping("\""), "\"");
    }

    #[test]
    fn truncation_rule() {
        let rank1 = (0..20)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        assert!(is_truncated("The gut and", &rank1));
        assert!(!is_truncated(&rank1, &rank1));
        // Exactly half is not truncated.
        assert!(!is_truncated("a b c d e f g h i j", &rank1));
        assert!(is_truncated("a b c d e f g h i", &rank1));
    }

    #[test]
    fn uncon_with_toy_returns_a_list_text() {
        let u = utt(&[("the gut", -1.0), ("the gun", -2.0), ("a gut", -3.0)]);
        let cfg = EcConfig {
            n_input: 3,
            ..EcConfig::default()
        };
        let r = correct_unconstrained(&u, &ToyScorer::new(), &cfg).unwrap();
        assert!(u.nbest.texts().any(|t| t == r.text));
        assert!(!r.suspected_truncation);
        let cfg = EcConfig {
            n_input: 4,
            ..EcConfig::default()
        };
        assert!(correct_unconstrained(&u, &ToyScorer::new(), &cfg).is_err());
    }

    #[test]
    fn constrained_lambda_zero_is_rank_one() {
        let u = utt(&[("zzz", -1.0), ("the gut", -1.5), ("the gut", -2.0)]);
        let cfg = EcConfig {
            lambda: 0.0,
            n_input: 3,
            ..EcConfig::default()
        };
        assert_eq!(
            select_constrained(&u, &ToyScorer::new(), &cfg)
                .unwrap()
                .hypothesis
                .rank,
            1
        );
    }

    #[test]
    fn constrained_matches_hand_interpolation() {
        let u = utt(&[("a b", -1.0), ("a c", -1.2), ("b b", -3.0)]);
        let t = ToyScorer::new();
        let ctx = ScorerContext::new(&u.nbest, 3, "[SEP]").unwrap();
        let ec: Vec<f64> = u
            .nbest
            .texts()
            .map(|x| t.score_sequence(&ctx, x).unwrap())
            .collect();
        let asr = [-1.0, -1.2, -3.0];
        let sums: Vec<f64> = (0..3).map(|i| 0.5 * asr[i] + 0.5 * ec[i]).collect();
        let want = (0..3).fold(0, |b, i| if sums[i] > sums[b] { i } else { b });
        let cfg = EcConfig {
            lambda: 0.5,
            n_input: 3,
            ..EcConfig::default()
        };
        let got = select_constrained(&u, &t, &cfg).unwrap();
        assert_eq!(got.hypothesis.rank, want + 1);
        assert!((got.score - sums[want]).abs() < 1e-12);
    }

    #[test]
    fn closest_example_distances() {
        let nb = NBestList::new([
            ("the gut and the gallant", -1.0),
            ("the gut and the gullet", -2.0),
            ("the gun and the gullet", -3.0),
        ])
        .unwrap();
        let m = closest_map("The gut and the gullet.", &nb, 3).unwrap();
        assert_eq!((m.hypothesis.rank, m.distance), (2, 0));
        let m = closest_map("the gut and a gullet", &nb, 3).unwrap();
        assert_eq!((m.hypothesis.rank, m.distance), (2, 1));
        // Rank 1 and 3 both at distance 1: earlier wins.
        let m = closest_map("the gut and the gallant", &nb, 1).unwrap();
        assert_eq!(m.hypothesis.rank, 1);
    }

    #[test]
    fn heap_keeps_best_and_earliest() {
        let mut h = BoundedHeap {
            cap: 2,
            items: Vec::new(),
        };
        for (i, s) in [-1.0, -2.0, -2.0, -0.5, -1.0].into_iter().enumerate() {
            h.push(Partial {
                score: s,
                history: vec![i.to_string()],
                seq: i as u64,
            });
        }
        let kept: Vec<_> = h
            .in_insertion_order()
            .into_iter()
            .map(|p| p.history[0].clone())
            .collect();
        assert_eq!(kept, ["0", "3"]);
    }

    #[test]
    fn grid_has_21_points() {
        let v = LambdaGrid::default().values().unwrap();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[20], 1.0);
        assert_eq!(v[7], 0.35);
        assert!(LambdaGrid {
            lo: 0.0,
            hi: 1.0,
            step: 0.0
        }
        .values()
        .is_err());
    }
}
