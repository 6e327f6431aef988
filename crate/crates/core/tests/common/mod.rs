#![allow(dead_code)]

use std::collections::HashMap;

use asrec::lattice::{Edge, Lattice, MarkerConvention, Node};
use asrec::scorer::{Scorer, ScorerContext, EOS};
use asrec::{NBestList, Utterance};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Plain recursive Levenshtein distance with memoization.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(
        a: &[T],
        b: &[T],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j + 1, memo)
                .min(go(a, b, i + 1, j, memo))
                .min(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Every sequence over `alphabet` of length `0..=max_len`.
pub fn all_sequences(alphabet: &[char], max_len: usize) -> Vec<Vec<char>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &c in alphabet {
                let mut t: Vec<char> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Random valid lattice with `interior` token nodes drawn from `vocab`.
/// Node ids are shuffled relative to topological order.
pub fn random_lattice<R: Rng>(
    rng: &mut R,
    vocab: &[&str],
    interior: usize,
    max_paths: u128,
) -> Lattice {
    loop {
        let k = interior.max(1);
        let end = k + 1;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let add = |e: (usize, usize), edges: &mut Vec<(usize, usize)>| {
            if e != (0, end) && !edges.contains(&e) {
                edges.push(e);
            }
        };
        for i in 1..=k {
            let from = rng.random_range(0..i);
            add((from, i), &mut edges);
            let to = rng.random_range(i + 1..=end);
            add((i, to), &mut edges);
        }
        for _ in 0..rng.random_range(0..=k) {
            let a = rng.random_range(0..end);
            let b = rng.random_range(a + 1..=end);
            add((a, b), &mut edges);
        }
        let mut ids: Vec<u64> = (0..=end as u64).map(|x| x * 7 + 3).collect();
        for i in (1..ids.len()).rev() {
            let j = rng.random_range(0..=i);
            ids.swap(i, j);
        }
        let nodes = (0..=end)
            .map(|i| Node {
                id: ids[i],
                token: if i == 0 || i == end {
                    String::new()
                } else {
                    vocab.choose(rng).unwrap().to_string()
                },
            })
            .collect();
        let edges = edges
            .into_iter()
            .map(|(f, t)| Edge {
                from: ids[f],
                to: ids[t],
                score: -rng.random_range(0.0..3.0),
            })
            .collect();
        let l =
            Lattice::new(nodes, edges, ids[0], ids[end]).expect("generator builds valid lattices");
        if l.num_paths() <= max_paths {
            return l;
        }
    }
}

/// All start-to-end paths as (tokens, summed edge score).
pub fn enumerate_paths(l: &Lattice) -> Vec<(Vec<String>, f64)> {
    fn dfs(
        l: &Lattice,
        v: usize,
        toks: &mut Vec<String>,
        score: f64,
        out: &mut Vec<(Vec<String>, f64)>,
    ) {
        if v == l.end() {
            out.push((toks.clone(), score));
            return;
        }
        for a in l.successors(v) {
            let push = a.to != l.end();
            if push {
                toks.push(l.token(a.to).to_string());
            }
            dfs(l, a.to, toks, score + a.score, out);
            if push {
                toks.pop();
            }
        }
    }
    let mut out = Vec::new();
    dfs(l, l.start(), &mut Vec::new(), 0.0, &mut out);
    out
}

/// Correction-model log-probability of a token sequence by chaining single
/// decoder steps, ending with the end-of-sequence token.
pub fn chained_ec(scorer: &dyn Scorer, ctx: &ScorerContext, tokens: &[String]) -> f64 {
    let mut total = 0.0;
    for i in 0..=tokens.len() {
        let next = tokens.get(i).map_or(EOS, String::as_str).to_string();
        let o = scorer
            .decoder_step(ctx, &tokens[..i], std::slice::from_ref(&next))
            .unwrap();
        total += o.get(&next).unwrap();
    }
    total
}

/// Exhaustive argmax of the interpolated path score. Ties go to the
/// lexicographically smallest token sequence.
pub fn brute_force_decode(
    l: &Lattice,
    scorer: &dyn Scorer,
    ctx: &ScorerContext,
    lambda: f64,
) -> (Vec<String>, f64) {
    let mut best: Option<(Vec<String>, f64)> = None;
    for (toks, asr) in enumerate_paths(l) {
        let score = if lambda == 0.0 {
            asr
        } else if lambda == 1.0 {
            chained_ec(scorer, ctx, &toks)
        } else {
            (1.0 - lambda) * asr + lambda * chained_ec(scorer, ctx, &toks)
        };
        let better = match &best {
            None => true,
            Some((bt, bs)) => score > *bs || (score == *bs && toks < *bt),
        };
        if better {
            best = Some((toks, score));
        }
    }
    best.unwrap()
}

/// Surface strings of every path under `conv`.
pub fn path_strings(l: &Lattice, conv: &MarkerConvention) -> std::collections::BTreeSet<String> {
    enumerate_paths(l)
        .into_iter()
        .map(|(t, _)| conv.join(&t))
        .collect()
}

pub fn random_sentence<R: Rng>(rng: &mut R, vocab: &[&str], min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| *vocab.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random list of `n` hypotheses with strictly decreasing scores.
pub fn random_nbest<R: Rng>(rng: &mut R, vocab: &[&str], n: usize) -> NBestList {
    let mut score = 0.0;
    let entries: Vec<(String, f64)> = (0..n)
        .map(|_| {
            score -= rng.random_range(0.01..2.0);
            (random_sentence(rng, vocab, 1, 6), score)
        })
        .collect();
    NBestList::new(entries).unwrap()
}

pub const WORDS: &[&str] = &[
    "the", "cat", "sat", "on", "a", "mat", "hat", "that", "at", "cap",
];

/// Utterances whose hypotheses are noisy copies of a random reference.
pub fn toy_dataset<R: Rng>(rng: &mut R, count: usize, n: usize) -> Vec<Utterance> {
    (0..count)
        .map(|i| {
            let reference = random_sentence(rng, WORDS, 3, 7);
            let mut score = 0.0;
            let entries: Vec<(String, f64)> = (0..n)
                .map(|_| {
                    score -= rng.random_range(0.01..1.0);
                    (perturb(rng, &reference), score)
                })
                .collect();
            Utterance::new(
                format!("utt{i:03}"),
                Some(reference),
                NBestList::new(entries).unwrap(),
            )
        })
        .collect()
}

/// Applies zero to two random word substitutions, deletions or insertions.
pub fn perturb<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut w: Vec<&str> = text.split(' ').collect();
    for _ in 0..rng.random_range(0..=2) {
        let i = rng.random_range(0..w.len());
        match rng.random_range(0..3) {
            0 => w[i] = WORDS.choose(rng).unwrap(),
            1 if w.len() > 1 => {
                w.remove(i);
            }
            _ => w.insert(i, WORDS.choose(rng).unwrap()),
        }
    }
    w.join(" ")
}

pub fn write_jsonl(path: &std::path::Path, rows: &[serde_json::Value]) {
    let text: String = rows.iter().map(|r| r.to_string() + "\n").collect();
    std::fs::write(path, text).unwrap();
}
