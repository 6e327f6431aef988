//! Edit-distance alignment and the corpus statistics built on it: WER,
//! N-best oracle WER, cross-WER, Uniq and WERR.

use std::collections::HashSet;
use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{normalize_eval, normalize_stats, words};
use crate::types::{NBestList, Utterance};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    pub cor: usize,
    pub sub: usize,
    pub del: usize,
    pub ins: usize,
    pub ref_len: usize,
}

impl AlignmentCounts {
    pub fn errors(&self) -> usize {
        self.sub + self.del + self.ins
    }

    /// Error rate as a fraction; `None` when the reference is empty.
    pub fn wer(&self) -> Option<f64> {
        (self.ref_len > 0).then(|| self.errors() as f64 / self.ref_len as f64)
    }

    pub fn hyp_len(&self) -> usize {
        self.cor + self.sub + self.ins
    }
}

impl Add for AlignmentCounts {
    type Output = AlignmentCounts;

    fn add(self, o: AlignmentCounts) -> AlignmentCounts {
        AlignmentCounts {
            cor: self.cor + o.cor,
            sub: self.sub + o.sub,
            del: self.del + o.del,
            ins: self.ins + o.ins,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

impl AddAssign for AlignmentCounts {
    fn add_assign(&mut self, o: AlignmentCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for AlignmentCounts {
    fn sum<I: Iterator<Item = AlignmentCounts>>(iter: I) -> Self {
        iter.fold(AlignmentCounts::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Cor { r: usize, h: usize },
    Sub { r: usize, h: usize },
    Del { r: usize },
    Ins { h: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub counts: AlignmentCounts,
    pub path: Vec<EditOp>,
}

/// Minimum-edit alignment of `hyp` against `reference`.
///
/// Among equally cheap alignments the backtrace prefers, at every cell, the
/// diagonal move (correct/substitution), then deletion, then insertion.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> Alignment {
    let n = reference.len();
    let m = hyp.len();
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for (j, cell) in d.iter_mut().take(width).enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * width] = i;
        for j in 1..=m {
            let cost = usize::from(reference[i - 1] != hyp[j - 1]);
            let diag = d[(i - 1) * width + j - 1] + cost;
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut path = Vec::with_capacity(n.max(m));
    let mut counts = AlignmentCounts {
        ref_len: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if here == d[(i - 1) * width + j - 1] + usize::from(!same) {
                if same {
                    counts.cor += 1;
                    path.push(EditOp::Cor { r: i - 1, h: j - 1 });
                } else {
                    counts.sub += 1;
                    path.push(EditOp::Sub { r: i - 1, h: j - 1 });
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * width + j] + 1 {
            counts.del += 1;
            path.push(EditOp::Del { r: i - 1 });
            i -= 1;
        } else {
            counts.ins += 1;
            path.push(EditOp::Ins { h: j - 1 });
            j -= 1;
        }
    }
    path.reverse();
    Alignment { counts, path }
}

/// Word-level alignment counts of two raw strings after eval normalization.
pub fn align_text(reference: &str, hyp: &str) -> AlignmentCounts {
    let r = words(&normalize_eval(reference));
    let h = words(&normalize_eval(hyp));
    align(&r, &h).counts
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub id: String,
    pub counts: AlignmentCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub totals: AlignmentCounts,
    /// Percent WER from summed counts, rounded to two decimals.
    pub wer: f64,
    pub utterances: Vec<UtteranceScore>,
}

impl CorpusReport {
    fn from_scores(utterances: Vec<UtteranceScore>) -> Result<Self> {
        let totals: AlignmentCounts = utterances.iter().map(|u| u.counts).sum();
        let frac = totals
            .wer()
            .ok_or_else(|| Error::invalid("corpus has no reference words"))?;
        Ok(CorpusReport {
            totals,
            wer: round2(frac * 100.0),
            utterances,
        })
    }

    /// Unrounded WER as a fraction.
    pub fn exact_wer(&self) -> f64 {
        self.totals.wer().unwrap_or(0.0)
    }

    /// Sub/Del/Ins as percentages of the reference length, rounded.
    pub fn breakdown(&self) -> [f64; 3] {
        let pct = |x: usize| round2(100.0 * x as f64 / self.totals.ref_len.max(1) as f64);
        [
            pct(self.totals.sub),
            pct(self.totals.del),
            pct(self.totals.ins),
        ]
    }

    pub fn to_table(&self) -> String {
        let [s, d, i] = self.breakdown();
        format!(
            "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n{:>8} {:>8} {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
            "utts",
            "words",
            "sub%",
            "del%",
            "ins%",
            "wer%",
            self.utterances.len(),
            self.totals.ref_len,
            s,
            d,
            i,
            self.wer
        )
    }
}

/// Corpus WER of `chosen_texts[i]` against `utterances[i].reference`.
pub fn corpus_wer<S: AsRef<str> + Sync>(
    utterances: &[Utterance],
    chosen_texts: &[S],
) -> Result<CorpusReport> {
    if utterances.len() != chosen_texts.len() {
        return Err(Error::Arity {
            expected: utterances.len(),
            actual: chosen_texts.len(),
        });
    }
    let scores = utterances
        .par_iter()
        .zip(chosen_texts.par_iter())
        .map(|(u, h)| {
            Ok(UtteranceScore {
                id: u.id.clone(),
                counts: align_text(u.reference()?, h.as_ref()),
                chosen_rank: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CorpusReport::from_scores(scores)
}

/// Corpus WER when each utterance picks, among its top `n` hypotheses, the
/// one with fewest errors (ties to the lower rank).
pub fn oracle_wer(utterances: &[Utterance], n: usize) -> Result<CorpusReport> {
    if n == 0 {
        return Err(Error::invalid("oracle N must be at least 1"));
    }
    let scores = utterances
        .par_iter()
        .map(|u| {
            let reference = words(&normalize_eval(u.reference()?));
            let mut best: Option<(usize, AlignmentCounts)> = None;
            for h in u.nbest.iter().take(n) {
                let c = align(&reference, &words(&normalize_eval(&h.text))).counts;
                if best.is_none_or(|(_, b)| c.errors() < b.errors()) {
                    best = Some((h.rank, c));
                }
            }
            let (rank, counts) = best.expect("N-best lists are non-empty");
            Ok(UtteranceScore {
                id: u.id.clone(),
                counts,
                chosen_rank: Some(rank),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CorpusReport::from_scores(scores)
}

/// Pairwise disagreement among the distinct hypotheses of one or more lists.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossWer {
    pub counts: AlignmentCounts,
    pub pairs: usize,
}

impl CrossWer {
    fn pct(&self, x: usize) -> f64 {
        if self.counts.ref_len == 0 {
            0.0
        } else {
            100.0 * x as f64 / self.counts.ref_len as f64
        }
    }

    /// `[all, sub, del, ins]` as percentages of summed pair reference lengths.
    pub fn percentages(&self) -> [f64; 4] {
        [
            self.pct(self.counts.errors()),
            self.pct(self.counts.sub),
            self.pct(self.counts.del),
            self.pct(self.counts.ins),
        ]
    }

    /// `All / Sub / Del / Ins` with one decimal.
    pub fn format_row(&self) -> String {
        let [a, s, d, i] = self.percentages();
        format!("{a:.1} / {s:.1} / {d:.1} / {i:.1}")
    }
}

impl Add for CrossWer {
    type Output = CrossWer;

    fn add(self, o: CrossWer) -> CrossWer {
        CrossWer {
            counts: self.counts + o.counts,
            pairs: self.pairs + o.pairs,
        }
    }
}

fn unique_stats_texts(nbest: &NBestList) -> Vec<String> {
    let mut seen = HashSet::new();
    nbest
        .texts()
        .map(normalize_stats)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Cross-WER of one list: every ordered pair of distinct normalized
/// hypotheses, first as reference, second as hypothesis.
pub fn cross_wer(nbest: &NBestList) -> CrossWer {
    let uniq: Vec<Vec<String>> = unique_stats_texts(nbest).iter().map(|t| words(t)).collect();
    let mut out = CrossWer::default();
    for (i, r) in uniq.iter().enumerate() {
        for (j, h) in uniq.iter().enumerate() {
            if i != j {
                out.counts += align(r, h).counts;
                out.pairs += 1;
            }
        }
    }
    out
}

pub fn cross_wer_corpus<'a>(lists: impl IntoIterator<Item = &'a NBestList>) -> CrossWer {
    lists
        .into_iter()
        .map(cross_wer)
        .fold(CrossWer::default(), Add::add)
}

/// Mean number of distinct (stats-normalized) hypotheses per list.
pub fn uniq<'a>(lists: impl IntoIterator<Item = &'a NBestList>) -> Result<f64> {
    let (sum, count) = lists.into_iter().fold((0usize, 0usize), |(s, c), l| {
        (s + unique_stats_texts(l).len(), c + 1)
    });
    if count == 0 {
        return Err(Error::invalid("uniq needs at least one list"));
    }
    Ok(sum as f64 / count as f64)
}

/// Relative WER reduction in percent.
pub fn werr(baseline_wer: f64, system_wer: f64) -> Result<f64> {
    if baseline_wer.is_nan() || baseline_wer <= 0.0 {
        return Err(Error::invalid(format!(
            "baseline WER must be positive, got {baseline_wer}"
        )));
    }
    Ok((baseline_wer - system_wer) / baseline_wer * 100.0)
}
