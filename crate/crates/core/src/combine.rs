//! System combination: ROVER voting over a word transition network, and
//! pooled N-best lists drawn from several recognisers.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Hypothesis, NBestList};

/// Aligned slots; `slots[k][s]` is system `s`'s word in slot `k`, `None`
/// for a null arc.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordTransitionNetwork {
    pub slots: Vec<Vec<Option<String>>>,
    pub systems: usize,
}

#[derive(Clone, Copy)]
enum Move {
    Diag,
    Null,
    Insert,
}

impl WordTransitionNetwork {
    /// Aligns every hypothesis into the network in order; the first seeds it.
    pub fn build<S: AsRef<str>>(hypotheses: &[S]) -> Self {
        let mut wtn = WordTransitionNetwork::default();
        let mut seen: Vec<(Vec<&str>, usize)> = Vec::new();
        for h in hypotheses {
            let words: Vec<&str> = h.as_ref().split_whitespace().collect();
            match seen.iter().find(|(w, _)| *w == words) {
                Some(&(_, sys)) => wtn.copy_system(sys),
                None => {
                    seen.push((words.clone(), wtn.systems));
                    wtn.add(&words);
                }
            }
        }
        wtn
    }

    /// Adds a new system whose traversal repeats system `sys`.
    fn copy_system(&mut self, sys: usize) {
        for slot in &mut self.slots {
            let arc = slot[sys].clone();
            slot.push(arc);
        }
        self.systems += 1;
    }

    fn add(&mut self, words: &[&str]) {
        let k = self.slots.len();
        let m = words.len();
        let w = m + 1;
        let match_cost = |slot: &[Option<String>], word: &str| {
            usize::from(!slot.iter().any(|a| a.as_deref() == Some(word)))
        };
        let null_cost = |slot: &[Option<String>]| usize::from(!slot.iter().any(Option::is_none));

        let mut d = vec![0usize; (k + 1) * w];
        for (j, cell) in d.iter_mut().enumerate().take(w) {
            *cell = j;
        }
        for i in 1..=k {
            let slot = &self.slots[i - 1];
            d[i * w] = d[(i - 1) * w] + null_cost(slot);
            for j in 1..=m {
                let diag = d[(i - 1) * w + j - 1] + match_cost(slot, words[j - 1]);
                let null = d[(i - 1) * w + j] + null_cost(slot);
                let ins = d[i * w + j - 1] + 1;
                d[i * w + j] = diag.min(null).min(ins);
            }
        }

        let mut moves = Vec::with_capacity(k + m);
        let (mut i, mut j) = (k, m);
        while i > 0 || j > 0 {
            let here = d[i * w + j];
            if i > 0
                && j > 0
                && here == d[(i - 1) * w + j - 1] + match_cost(&self.slots[i - 1], words[j - 1])
            {
                moves.push(Move::Diag);
                i -= 1;
                j -= 1;
            } else if i > 0 && here == d[(i - 1) * w + j] + null_cost(&self.slots[i - 1]) {
                moves.push(Move::Null);
                i -= 1;
            } else {
                moves.push(Move::Insert);
                j -= 1;
            }
        }
        moves.reverse();

        let prior = self.systems;
        let mut slots = Vec::with_capacity(k + m);
        let mut old = std::mem::take(&mut self.slots).into_iter();
        let mut word = words.iter();
        for mv in moves {
            match mv {
                Move::Diag => {
                    let mut s = old.next().expect("slot");
                    s.push(Some(word.next().expect("word").to_string()));
                    slots.push(s);
                }
                Move::Null => {
                    let mut s = old.next().expect("slot");
                    s.push(None);
                    slots.push(s);
                }
                Move::Insert => {
                    let mut s = vec![None; prior];
                    s.push(Some(word.next().expect("word").to_string()));
                    slots.push(s);
                }
            }
        }
        self.slots = slots;
        self.systems += 1;
    }

    /// Weighted vote per slot. Ties go to the symbol of the earliest system
    /// that proposed it; a winning null arc emits nothing.
    pub fn vote(&self, weights: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        for slot in &self.slots {
            let mut tally: Vec<(&Option<String>, f64)> = Vec::new();
            for (arc, wt) in slot.iter().zip(weights) {
                match tally.iter_mut().find(|(a, _)| *a == arc) {
                    Some(e) => e.1 += wt,
                    None => tally.push((arc, *wt)),
                }
            }
            let mut best = &tally[0];
            for t in &tally[1..] {
                if t.1 > best.1 {
                    best = t;
                }
            }
            if let Some(word) = best.0 {
                out.push(word.clone());
            }
        }
        out
    }
}

/// ROVER over `(text, weight)` pairs.
pub fn rover<S: AsRef<str>>(hypotheses: &[(S, f64)]) -> Result<String> {
    if hypotheses.is_empty() {
        return Err(Error::invalid("rover needs at least one hypothesis"));
    }
    if let Some((_, w)) = hypotheses.iter().find(|(_, w)| !w.is_finite() || *w <= 0.0) {
        return Err(Error::invalid(format!(
            "rover weights must be positive, got {w}"
        )));
    }
    let texts: Vec<&str> = hypotheses.iter().map(|(t, _)| t.as_ref()).collect();
    let weights: Vec<f64> = hypotheses.iter().map(|(_, w)| *w).collect();
    Ok(WordTransitionNetwork::build(&texts)
        .vote(&weights)
        .join(" "))
}

fn pattern_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Za-z]+)([0-9]+)").expect("valid regex"))
}

/// Parses a pattern such as `E1E2T1T2T3` into `(tag, rank)` pairs.
pub fn parse_pattern(pattern: &str) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut covered = 0;
    for cap in pattern_re().captures_iter(pattern) {
        let whole = cap.get(0).expect("match");
        if whole.start() != covered {
            break;
        }
        covered = whole.end();
        let rank: usize = cap[2]
            .parse()
            .map_err(|_| Error::invalid(format!("bad rank in pattern {pattern:?}")))?;
        if rank == 0 {
            return Err(Error::invalid(format!(
                "ranks are 1-based in pattern {pattern:?}"
            )));
        }
        out.push((cap[1].to_string(), rank));
    }
    if out.is_empty() || covered != pattern.len() {
        return Err(Error::invalid(format!("malformed pattern {pattern:?}")));
    }
    Ok(out)
}

/// Tags in order of first appearance in the pattern.
pub fn pattern_tags(pattern: &str) -> Result<Vec<String>> {
    let mut tags: Vec<String> = Vec::new();
    for (t, _) in parse_pattern(pattern)? {
        if !tags.contains(&t) {
            tags.push(t);
        }
    }
    Ok(tags)
}

/// Pools hypotheses from tagged lists in pattern order. Each copy keeps its
/// ASR score and carries its tag as `source`.
pub fn build_multi_nbest_tagged(lists: &[(&str, &NBestList)], pattern: &str) -> Result<NBestList> {
    let mut hyps = Vec::new();
    for (tag, rank) in parse_pattern(pattern)? {
        let (_, list) = lists
            .iter()
            .find(|(t, _)| *t == tag)
            .ok_or_else(|| Error::invalid(format!("pattern tag {tag:?} names no input list")))?;
        let h = list.rank(rank).ok_or_else(|| {
            Error::invalid(format!(
                "{tag}{rank}: list {tag} has only {} hypotheses",
                list.len()
            ))
        })?;
        hyps.push(Hypothesis {
            source: Some(tag.clone()),
            ..h.clone()
        });
    }
    NBestList::pooled(hyps)
}

/// Two-list form: the first tag to appear in the pattern names `list_a`,
/// the second names `list_b`.
pub fn build_multi_nbest(
    list_a: &NBestList,
    list_b: &NBestList,
    pattern: &str,
) -> Result<NBestList> {
    let tags = pattern_tags(pattern)?;
    if tags.len() > 2 {
        return Err(Error::invalid(format!(
            "pattern {pattern:?} names more than two systems"
        )));
    }
    let mut lists: Vec<(&str, &NBestList)> = vec![(tags[0].as_str(), list_a)];
    if let Some(t) = tags.get(1) {
        lists.push((t.as_str(), list_b));
    }
    build_multi_nbest_tagged(&lists, pattern)
}
