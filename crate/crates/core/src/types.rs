//! Domain types shared by every module: hypotheses, N-best lists,
//! utterances and the decoding configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Separator placed between hypotheses when an N-best list is flattened
/// into a single model input.
pub const DEFAULT_SEP: &str = "[SEP]";

/// One ASR hypothesis. `asr_logscore` is a natural-log score; `rank` is
/// 1-based within its list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub asr_logscore: f64,
    pub rank: usize,
    /// System tag for hypotheses pooled from several recognisers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// A ranked, non-empty list of hypotheses.
///
/// Lists built with [`NBestList::new`] are sorted by descending
/// `asr_logscore` (stable, so equal scores keep input order). Lists pooled
/// from several systems with [`NBestList::pooled`] keep the caller's order
/// because scores from different recognisers are not comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    hypotheses: Vec<Hypothesis>,
    #[serde(default)]
    mixed_sources: bool,
}

impl NBestList {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        Self::new_reporting(entries).map(|(list, _)| list)
    }

    /// Like [`NBestList::new`], also reporting whether the input had to be
    /// re-sorted.
    pub fn new_reporting<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<(Self, bool)> {
        let mut hyps: Vec<Hypothesis> = entries
            .into_iter()
            .enumerate()
            .map(|(i, (text, score))| Hypothesis {
                text: text.into(),
                asr_logscore: score,
                rank: i + 1,
                source: None,
            })
            .collect();
        if hyps.is_empty() {
            return Err(Error::invalid(
                "an N-best list needs at least one hypothesis",
            ));
        }
        if let Some(h) = hyps.iter().find(|h| h.asr_logscore.is_nan()) {
            return Err(Error::invalid(format!("NaN ASR score for {:?}", h.text)));
        }
        let was_sorted = hyps
            .windows(2)
            .all(|w| w[0].asr_logscore >= w[1].asr_logscore);
        if !was_sorted {
            hyps.sort_by(|a, b| b.asr_logscore.total_cmp(&a.asr_logscore));
            for (i, h) in hyps.iter_mut().enumerate() {
                h.rank = i + 1;
            }
        }
        Ok((
            NBestList {
                hypotheses: hyps,
                mixed_sources: false,
            },
            !was_sorted,
        ))
    }

    /// Builds a list in exactly the given order, renumbering ranks 1..k.
    pub fn pooled(hypotheses: Vec<Hypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::invalid(
                "an N-best list needs at least one hypothesis",
            ));
        }
        let mut sources: Vec<&Option<String>> = hypotheses.iter().map(|h| &h.source).collect();
        sources.dedup();
        sources.sort();
        sources.dedup();
        let mixed_sources = sources.len() > 1;
        let hypotheses = hypotheses
            .into_iter()
            .enumerate()
            .map(|(i, h)| Hypothesis { rank: i + 1, ..h })
            .collect();
        Ok(NBestList {
            hypotheses,
            mixed_sources,
        })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// True when hypotheses come from more than one system, in which case
    /// their ASR scores are not on a common scale.
    pub fn has_mixed_sources(&self) -> bool {
        self.mixed_sources
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hypothesis> {
        self.hypotheses.iter()
    }

    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }

    /// Hypothesis at a 1-based rank.
    pub fn rank(&self, rank: usize) -> Option<&Hypothesis> {
        rank.checked_sub(1).and_then(|i| self.hypotheses.get(i))
    }

    /// The first `n` hypotheses; errors when `n` is zero or exceeds the list.
    pub fn top(&self, n: usize) -> Result<&[Hypothesis]> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!(
                "requested top {n} of a {}-best list",
                self.len()
            )));
        }
        Ok(&self.hypotheses[..n])
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.hypotheses.iter().map(|h| h.text.as_str())
    }
}

impl<'a> IntoIterator for &'a NBestList {
    type Item = &'a Hypothesis;
    type IntoIter = std::slice::Iter<'a, Hypothesis>;

    fn into_iter(self) -> Self::IntoIter {
        self.hypotheses.iter()
    }
}

/// One test item.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub reference: Option<String>,
    pub nbest: NBestList,
    pub lattice: Option<Lattice>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, reference: Option<String>, nbest: NBestList) -> Self {
        Utterance {
            id: id.into(),
            reference,
            nbest,
            lattice: None,
        }
    }

    pub fn reference(&self) -> Result<&str> {
        self.reference
            .as_deref()
            .ok_or_else(|| Error::MissingReference(self.id.clone()))
    }
}

/// Decoding knobs shared by the correction strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcConfig {
    /// Weight on the correction-model score; `1 - lambda` goes to the ASR score.
    pub lambda: f64,
    pub beam_width: usize,
    /// How many hypotheses feed the scorer context or prompt.
    pub n_input: usize,
    /// Divide correction-model sequence scores by token count before
    /// interpolating (N-best selection only).
    #[serde(default)]
    pub length_norm: bool,
    #[serde(default = "default_sep")]
    pub sep: String,
}

fn default_sep() -> String {
    DEFAULT_SEP.to_string()
}

impl Default for EcConfig {
    fn default() -> Self {
        EcConfig {
            lambda: 0.5,
            beam_width: 1,
            n_input: 5,
            length_norm: false,
            sep: default_sep(),
        }
    }
}

impl EcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::invalid("beam width must be at least 1"));
        }
        if self.n_input == 0 {
            return Err(Error::invalid("n_input must be at least 1"));
        }
        Ok(())
    }

    /// Caps `n_input` at the size of a list with `len` hypotheses.
    pub fn for_list(&self, len: usize) -> Self {
        EcConfig {
            n_input: self.n_input.min(len.max(1)),
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        EcConfig {
            lambda,
            ..self.clone()
        }
    }
}

/// Joins the texts of the top `n` hypotheses with `sep`.
pub fn sep_concat(nbest: &NBestList, n: usize, sep: &str) -> Result<String> {
    let top = nbest.top(n)?;
    Ok(top
        .iter()
        .map(|h| h.text.as_str())
        .collect::<Vec<_>>()
        .join(sep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(texts: &[&str]) -> NBestList {
        NBestList::new(texts.iter().enumerate().map(|(i, t)| (*t, -(i as f64)))).unwrap()
    }

    #[test]
    fn sep_concat_joins_top_n() {
        let l = list(&["a b", "a c"]);
        assert_eq!(sep_concat(&l, 2, "[SEP]").unwrap(), "a b[SEP]a c");
        assert_eq!(sep_concat(&l, 1, "[SEP]").unwrap(), "a b");
        assert!(sep_concat(&l, 3, "[SEP]").is_err());
        assert!(sep_concat(&l, 0, "[SEP]").is_err());
    }

    #[test]
    fn new_sorts_descending_and_reports() {
        let (l, resorted) =
            NBestList::new_reporting([("x", -3.0), ("y", -1.0), ("z", -2.0)]).unwrap();
        assert!(resorted);
        assert_eq!(l.texts().collect::<Vec<_>>(), ["y", "z", "x"]);
        assert_eq!(l.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);

        let (_, resorted) = NBestList::new_reporting([("a", -1.0), ("b", -1.0)]).unwrap();
        assert!(!resorted);
    }

    #[test]
    fn ties_keep_input_order() {
        let l = NBestList::new([("p", -5.0), ("q", -1.0), ("r", -1.0)]).unwrap();
        assert_eq!(l.texts().collect::<Vec<_>>(), ["q", "r", "p"]);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(NBestList::new(Vec::<(String, f64)>::new()).is_err());
        assert!(NBestList::new([("a", f64::NAN)]).is_err());
    }

    #[test]
    fn pooled_keeps_order_and_flags_sources() {
        let mk = |t: &str, s: f64, src: &str| Hypothesis {
            text: t.into(),
            asr_logscore: s,
            rank: 9,
            source: Some(src.into()),
        };
        let l = NBestList::pooled(vec![mk("a", -9.0, "E"), mk("b", -1.0, "T")]).unwrap();
        assert!(l.has_mixed_sources());
        assert_eq!(l.texts().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(l.rank(2).unwrap().rank, 2);
    }

    #[test]
    fn config_validation() {
        assert!(EcConfig::default().validate().is_ok());
        assert!(EcConfig::default().with_lambda(1.5).validate().is_err());
        let cfg = EcConfig {
            beam_width: 0,
            ..EcConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
