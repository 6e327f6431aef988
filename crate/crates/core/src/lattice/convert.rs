//! Lattice conversions: subword lattice to word lattice, word lattice to a
//! different tokenizer's pieces, and N-best list to a merged lattice.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Builder, Lattice, LatticeError, NodeId};
use crate::types::NBestList;

/// How subword pieces mark word boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "marker", rename_all = "kebab-case")]
pub enum MarkerConvention {
    /// Every token is a whole word.
    Words,
    /// A piece ending with the marker continues into the next piece (`lig@@ atures`).
    Continuation(String),
    /// A piece starting with the marker begins a new word (`▁lig atures`).
    WordStart(String),
}

impl MarkerConvention {
    /// `words`, `continuation:@@` or `word-start:▁`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.split_once(':') {
            None if s == "words" => Some(MarkerConvention::Words),
            Some(("continuation", m)) if !m.is_empty() => {
                Some(MarkerConvention::Continuation(m.into()))
            }
            Some(("word-start", m)) if !m.is_empty() => Some(MarkerConvention::WordStart(m.into())),
            _ => None,
        }
    }

    pub fn as_arg(&self) -> String {
        match self {
            MarkerConvention::Words => "words".into(),
            MarkerConvention::Continuation(m) => format!("continuation:{m}"),
            MarkerConvention::WordStart(m) => format!("word-start:{m}"),
        }
    }

    /// Whether `next` continues the word that `prev` is part of.
    pub fn continues(&self, prev: &str, next: &str) -> bool {
        match self {
            MarkerConvention::Words => false,
            MarkerConvention::Continuation(m) => prev.ends_with(m.as_str()),
            MarkerConvention::WordStart(m) => !next.starts_with(m.as_str()),
        }
    }

    /// The token with its boundary marker removed.
    pub fn surface<'a>(&self, token: &'a str) -> &'a str {
        match self {
            MarkerConvention::Words => token,
            MarkerConvention::Continuation(m) => token.strip_suffix(m.as_str()).unwrap_or(token),
            MarkerConvention::WordStart(m) => token.strip_prefix(m.as_str()).unwrap_or(token),
        }
    }

    /// Text contributed by `token` when it follows `prev`.
    pub fn piece(&self, prev: Option<&str>, token: &str) -> String {
        let surface = self.surface(token);
        match prev {
            Some(p) if !self.continues(p, token) => format!(" {surface}"),
            _ => surface.to_string(),
        }
    }

    /// Renders a token sequence as space-separated words.
    pub fn join<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let mut out = String::new();
        let mut prev: Option<&str> = None;
        for t in tokens {
            out.push_str(&self.piece(prev, t.as_ref()));
            prev = Some(t.as_ref());
        }
        out
    }

    /// True when `pieces` spell exactly `word` as one word under this convention.
    pub fn spells_word<S: AsRef<str>>(&self, word: &str, pieces: &[S]) -> bool {
        let Some(first) = pieces.first() else {
            return false;
        };
        if let MarkerConvention::WordStart(m) = self {
            if !first.as_ref().starts_with(m.as_str()) {
                return false;
            }
        }
        let internal_ok = pieces
            .windows(2)
            .all(|w| self.continues(w[0].as_ref(), w[1].as_ref()));
        let last = pieces[pieces.len() - 1].as_ref();
        let closes = match self {
            MarkerConvention::Continuation(m) => !last.ends_with(m.as_str()),
            _ => true,
        };
        internal_ok && closes && self.join(pieces) == word
    }
}

/// Splits words into another model's pieces.
pub trait TokenizerAdapter {
    fn name(&self) -> &str;
    fn convention(&self) -> MarkerConvention;
    fn segment(&self, word: &str) -> Vec<String>;
}

/// One piece per word.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTokenizer;

impl TokenizerAdapter for IdentityTokenizer {
    fn name(&self) -> &str {
        "identity"
    }

    fn convention(&self) -> MarkerConvention {
        MarkerConvention::Words
    }

    fn segment(&self, word: &str) -> Vec<String> {
        vec![word.to_string()]
    }
}

/// One piece per character, marked with the given convention.
#[derive(Debug, Clone)]
pub struct CharTokenizer {
    convention: MarkerConvention,
}

impl CharTokenizer {
    pub fn new(convention: MarkerConvention) -> Self {
        CharTokenizer { convention }
    }
}

impl TokenizerAdapter for CharTokenizer {
    fn name(&self) -> &str {
        "chars"
    }

    fn convention(&self) -> MarkerConvention {
        self.convention.clone()
    }

    fn segment(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let last = chars.len().saturating_sub(1);
        chars
            .iter()
            .enumerate()
            .map(|(i, c)| match &self.convention {
                MarkerConvention::Words => c.to_string(),
                MarkerConvention::Continuation(m) if i < last => format!("{c}{m}"),
                MarkerConvention::Continuation(_) => c.to_string(),
                MarkerConvention::WordStart(m) if i == 0 => format!("{m}{c}"),
                MarkerConvention::WordStart(_) => c.to_string(),
            })
            .collect()
    }
}

/// Greedy longest-match over a piece vocabulary, SentencePiece style
/// (`▁` opens a word). Characters missing from the vocabulary become
/// single-character pieces.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    name: String,
    marker: String,
    vocab: std::collections::HashSet<String>,
    max_len: usize,
}

impl VocabTokenizer {
    pub fn new(name: impl Into<String>, pieces: impl IntoIterator<Item = String>) -> Self {
        let vocab: std::collections::HashSet<String> =
            pieces.into_iter().filter(|p| !p.is_empty()).collect();
        let max_len = vocab.iter().map(|p| p.chars().count()).max().unwrap_or(1);
        VocabTokenizer {
            name: name.into(),
            marker: "\u{2581}".into(),
            vocab,
            max_len,
        }
    }
}

impl TokenizerAdapter for VocabTokenizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn convention(&self) -> MarkerConvention {
        MarkerConvention::WordStart(self.marker.clone())
    }

    fn segment(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = format!("{}{word}", self.marker).chars().collect();
        let marker_len = self.marker.chars().count();
        let mut pieces = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            // The first piece must keep the whole marker.
            let min = if i == 0 { marker_len + 1 } else { 1 };
            let mut take = None;
            for len in (min..=self.max_len.min(chars.len() - i)).rev() {
                let cand: String = chars[i..i + len].iter().collect();
                if self.vocab.contains(&cand) {
                    take = Some(len);
                    break;
                }
            }
            let len = take.unwrap_or(min.min(chars.len() - i));
            pieces.push(chars[i..i + len].iter().collect());
            i += len;
        }
        pieces
    }
}

/// Collapses each word spelled by a run of subword nodes into one word node.
///
/// Word nodes are keyed by (first piece node, last piece node, word); when
/// several runs between the same pair spell the same word, the best-scoring
/// run is kept. A word node's incoming edge score is the boundary edge score
/// plus the run's internal edge scores, so every word path scores the
/// maximum over the subword paths that spell it.
pub fn word_lattice_from_subword(
    lattice: &Lattice,
    convention: &MarkerConvention,
) -> Result<Lattice, LatticeError> {
    let start = lattice.start();
    let end = lattice.end();
    let tok = |v: usize| lattice.token(v);

    let continuing = |u: usize, v: usize| -> Result<bool, LatticeError> {
        if u == start {
            if let MarkerConvention::WordStart(m) = convention {
                if v != end && !tok(v).starts_with(m.as_str()) {
                    return Err(LatticeError::DanglingPiece {
                        node: lattice.id(v),
                        token: tok(v).into(),
                    });
                }
            }
            return Ok(false);
        }
        if v == end {
            if let MarkerConvention::Continuation(m) = convention {
                if tok(u).ends_with(m.as_str()) {
                    return Err(LatticeError::DanglingPiece {
                        node: lattice.id(u),
                        token: tok(u).into(),
                    });
                }
            }
            return Ok(false);
        }
        Ok(convention.continues(tok(u), tok(v)))
    };

    let n = lattice.len();
    let mut cont = vec![Vec::new(); n];
    let mut boundary_out = vec![Vec::new(); n];
    let mut entry = vec![false; n];
    for (u, arc) in lattice.edge_indices() {
        if continuing(u, arc.to)? {
            cont[u].push(arc);
        } else {
            boundary_out[u].push(arc);
            entry[arc.to] = true;
        }
    }

    let pos: Vec<usize> = {
        let mut p = vec![0; n];
        for (i, &v) in lattice.order().iter().enumerate() {
            p[v] = i;
        }
        p
    };

    // (topo pos of first, topo pos of last, word) -> (first, last, best internal score)
    let mut words: BTreeMap<(usize, usize, String), (usize, usize, f64)> = BTreeMap::new();
    for &b in lattice.order() {
        if b == start || b == end || !entry[b] {
            continue;
        }
        let mut stack = vec![(b, convention.surface(tok(b)).to_string(), 0.0f64)];
        while let Some((v, word, score)) = stack.pop() {
            if !boundary_out[v].is_empty() {
                let slot = words.entry((pos[b], pos[v], word.clone())).or_insert((
                    b,
                    v,
                    f64::NEG_INFINITY,
                ));
                if score > slot.2 {
                    slot.2 = score;
                }
            }
            for a in &cont[v] {
                stack.push((
                    a.to,
                    format!("{word}{}", convention.surface(tok(a.to))),
                    score + a.score,
                ));
            }
        }
    }

    let mut b = Builder::default();
    let s = b.node("");
    let mut by_first: HashMap<usize, Vec<(NodeId, f64)>> = HashMap::new();
    let mut by_id: Vec<(NodeId, usize)> = Vec::with_capacity(words.len());
    for ((_, _, word), (first, last, internal)) in &words {
        let id = b.node(word.clone());
        by_first.entry(*first).or_default().push((id, *internal));
        by_id.push((id, *last));
    }
    let e = b.node("");

    let connect = |b: &mut Builder, from: NodeId, last: usize| {
        for a in &boundary_out[last] {
            if a.to == end {
                b.edge(from, e, a.score);
            } else if let Some(targets) = by_first.get(&a.to) {
                for (to, internal) in targets {
                    b.edge(from, *to, a.score + internal);
                }
            }
        }
    };
    connect(&mut b, s, start);
    for (id, last) in by_id {
        connect(&mut b, id, last);
    }
    b.build(s, e)
}

/// Expands every word node into a chain of the tokenizer's pieces. The
/// word's incoming scores move to its first piece; edges inside a word
/// score 0.
pub fn retokenize_lattice(
    word_lattice: &Lattice,
    tok: &dyn TokenizerAdapter,
) -> Result<Lattice, LatticeError> {
    let convention = tok.convention();
    let mut b = Builder::default();
    let mut span: Vec<(NodeId, NodeId)> = vec![(0, 0); word_lattice.len()];
    for &v in word_lattice.order() {
        if v == word_lattice.start() || v == word_lattice.end() {
            let id = b.node("");
            span[v] = (id, id);
            continue;
        }
        let word = word_lattice.token(v);
        let pieces = tok.segment(word);
        if !convention.spells_word(word, &pieces) {
            return Err(LatticeError::Tokenizer {
                tokenizer: tok.name().to_string(),
                word: word.to_string(),
                pieces,
            });
        }
        let ids: Vec<NodeId> = pieces.into_iter().map(|p| b.node(p)).collect();
        for w in ids.windows(2) {
            b.edge(w[0], w[1], 0.0);
        }
        span[v] = (ids[0], ids[ids.len() - 1]);
    }
    for (u, arc) in word_lattice.edge_indices() {
        b.edge(span[u].1, span[arc.to].0, arc.score);
    }
    b.build(span[word_lattice.start()].0, span[word_lattice.end()].0)
}

/// Prefix trie of the whitespace-tokenized hypotheses, with nodes that share
/// a token and an identical set of suffixes merged.
///
/// Each hypothesis's score sits on its first edge (0 elsewhere); an edge
/// shared by several hypotheses keeps the maximum. Every hypothesis is a
/// path of the result.
pub fn lattice_from_nbest(nbest: &NBestList) -> Result<Lattice, LatticeError> {
    struct TrieNode {
        token: String,
        children: BTreeMap<String, usize>,
        terminal: bool,
    }
    let mut trie = vec![TrieNode {
        token: String::new(),
        children: BTreeMap::new(),
        terminal: false,
    }];
    let mut first_score: HashMap<usize, f64> = HashMap::new();
    for h in nbest {
        let toks: Vec<&str> = h.text.split_whitespace().collect();
        if toks.is_empty() {
            return Err(LatticeError::EmptyHypothesis(h.rank));
        }
        let mut cur = 0;
        for (i, t) in toks.iter().enumerate() {
            let next = match trie[cur].children.get(*t) {
                Some(&c) => c,
                None => {
                    trie.push(TrieNode {
                        token: t.to_string(),
                        children: BTreeMap::new(),
                        terminal: false,
                    });
                    let c = trie.len() - 1;
                    trie[cur].children.insert(t.to_string(), c);
                    c
                }
            };
            if i == 0 {
                let s = first_score.entry(next).or_insert(f64::NEG_INFINITY);
                *s = s.max(h.asr_logscore);
            }
            cur = next;
        }
        trie[cur].terminal = true;
    }

    // Right-language classes, computed bottom-up. Children always have
    // larger indices than their parent.
    type Sig = (String, bool, Vec<usize>);
    let mut class = vec![usize::MAX; trie.len()];
    let mut classes: HashMap<Sig, usize> = HashMap::new();
    for v in (1..trie.len()).rev() {
        let mut kids: Vec<usize> = trie[v].children.values().map(|&c| class[c]).collect();
        kids.sort_unstable();
        let sig = (trie[v].token.clone(), trie[v].terminal, kids);
        let next = classes.len();
        class[v] = *classes.entry(sig).or_insert(next);
    }

    // Number classes by first appearance in a breadth-first walk.
    let mut b = Builder::default();
    let s = b.node("");
    let mut class_node: HashMap<usize, NodeId> = HashMap::new();
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut visited = vec![false; trie.len()];
    let mut edges: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut terminals = Vec::new();
    while let Some(v) = queue.pop_front() {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        let from = if v == 0 { s } else { class_node[&class[v]] };
        if trie[v].terminal {
            terminals.push(from);
        }
        for &c in trie[v].children.values() {
            let to = *class_node
                .entry(class[c])
                .or_insert_with(|| b.node(trie[c].token.clone()));
            let score = if v == 0 { first_score[&c] } else { 0.0 };
            let slot = edges.entry((from, to)).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(score);
            queue.push_back(c);
        }
    }
    let e = b.node("");
    for (from, to) in terminals.into_iter().map(|f| (f, e)) {
        edges.entry((from, to)).or_insert(0.0);
    }
    for ((from, to), score) in edges {
        b.edge(from, to, score);
    }
    b.build(s, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::tests::lat;

    fn cont() -> MarkerConvention {
        MarkerConvention::Continuation("@@".into())
    }

    fn paths(l: &Lattice) -> Vec<(Vec<String>, f64)> {
        fn go(
            l: &Lattice,
            v: usize,
            acc: &mut Vec<String>,
            score: f64,
            out: &mut Vec<(Vec<String>, f64)>,
        ) {
            if v == l.end() {
                out.push((acc.clone(), score));
                return;
            }
            for a in l.successors(v) {
                let pushed = a.to != l.end();
                if pushed {
                    acc.push(l.token(a.to).to_string());
                }
                go(l, a.to, acc, score + a.score, out);
                if pushed {
                    acc.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(l, l.start(), &mut Vec::new(), 0.0, &mut out);
        out
    }

    #[test]
    fn marker_parse_round_trip() {
        for s in ["words", "continuation:@@", "word-start:\u{2581}"] {
            assert_eq!(MarkerConvention::parse(s).unwrap().as_arg(), s);
        }
        assert!(MarkerConvention::parse("bogus").is_none());
    }

    #[test]
    fn join_handles_each_convention() {
        assert_eq!(cont().join(&["lig@@", "atures", "the"]), "ligatures the");
        let ws = MarkerConvention::WordStart("\u{2581}".into());
        assert_eq!(
            ws.join(&["\u{2581}gul", "let", "\u{2581}the"]),
            "gullet the"
        );
        assert_eq!(MarkerConvention::Words.join(&["a", "b"]), "a b");
    }

    #[test]
    fn single_path_collapse() {
        let l = lat(
            &[(0, ""), (1, "lig@@"), (2, "atures"), (3, "")],
            &[(0, 1, -0.5), (1, 2, -0.25), (2, 3, -1.0)],
            0,
            3,
        )
        .unwrap();
        let w = word_lattice_from_subword(&l, &cont()).unwrap();
        let p = paths(&w);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].0, vec!["ligatures"]);
        assert!((p[0].1 - (-1.75)).abs() < 1e-12);
        // Collapsed node's incoming edge holds the run sum.
        let first = w.successors(w.start())[0];
        assert!((first.score - (-0.75)).abs() < 1e-12);
    }

    #[test]
    fn parallel_runs_keep_max() {
        // spin@@ ning  vs  spinn@@ ing, both "spinning", between the same boundary nodes.
        let l = lat(
            &[
                (0, ""),
                (1, "x"),
                (2, "spin@@"),
                (3, "spinn@@"),
                (4, "ning"),
                (5, "ing"),
                (6, "y"),
                (7, ""),
            ],
            &[
                (0, 1, 0.0),
                (1, 2, -1.0),
                (1, 3, -2.0),
                (2, 4, 0.0),
                (3, 5, 0.0),
                (4, 6, 0.0),
                (5, 6, 0.0),
                (6, 7, 0.0),
            ],
            0,
            7,
        )
        .unwrap();
        let w = word_lattice_from_subword(&l, &cont()).unwrap();
        let p = paths(&w);
        // Different last-piece nodes make two word nodes; both spell "spinning".
        assert!(p.iter().all(|(t, _)| t == &["x", "spinning", "y"]));
        let best = p.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, -1.0);

        // Same first and last node: one word node, max score.
        let l = lat(
            &[
                (0, ""),
                (1, "sp@@"),
                (2, "in@@"),
                (3, "i@@"),
                (4, "nning"),
                (5, ""),
            ],
            &[
                (0, 1, 0.0),
                (1, 2, -1.0),
                (1, 3, -2.0),
                (2, 4, 0.0),
                (3, 4, 0.0),
                (4, 5, 0.0),
            ],
            0,
            5,
        );
        // "sp"+"in"+"nning" = "spinnning"; "sp"+"i"+"nning" = "spinning": distinct words.
        let w = word_lattice_from_subword(&l.unwrap(), &cont()).unwrap();
        let mut words: Vec<String> = paths(&w).into_iter().map(|(t, _)| t.join(" ")).collect();
        words.sort();
        assert_eq!(words, ["spinning", "spinnning"]);

        let l = lat(
            &[
                (0, ""),
                (1, "spin@@"),
                (2, "s@@"),
                (3, "pin@@"),
                (4, "ning"),
                (5, ""),
            ],
            &[
                (0, 1, -1.0),
                (0, 2, -0.5),
                (2, 3, -1.5),
                (1, 4, 0.0),
                (3, 4, 0.0),
                (4, 5, 0.0),
            ],
            0,
            5,
        )
        .unwrap();
        // Two runs from different first nodes: two word nodes, scores -1.0 and -2.0.
        let w = word_lattice_from_subword(&l, &cont()).unwrap();
        let mut scores: Vec<f64> = paths(&w).into_iter().map(|x| x.1).collect();
        scores.sort_by(f64::total_cmp);
        assert_eq!(scores, [-2.0, -1.0]);

        // Same boundary nodes, two inner runs spelling the same word.
        let l = lat(
            &[
                (0, ""),
                (1, "sp@@"),
                (2, "in@@"),
                (3, "in@@"),
                (4, "ning"),
                (5, ""),
            ],
            &[
                (0, 1, 0.0),
                (1, 2, -1.0),
                (1, 3, -2.0),
                (2, 4, 0.0),
                (3, 4, 0.0),
                (4, 5, 0.0),
            ],
            0,
            5,
        )
        .unwrap();
        let w = word_lattice_from_subword(&l, &cont()).unwrap();
        let p = paths(&w);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].0, ["spinning"]);
        assert_eq!(p[0].1, -1.0);
    }

    #[test]
    fn dangling_pieces_rejected() {
        let l = lat(
            &[(0, ""), (1, "lig@@"), (2, "")],
            &[(0, 1, 0.0), (1, 2, 0.0)],
            0,
            2,
        )
        .unwrap();
        assert!(matches!(
            word_lattice_from_subword(&l, &cont()),
            Err(LatticeError::DanglingPiece { node: 1, .. })
        ));
        let ws = MarkerConvention::WordStart("\u{2581}".into());
        let l = lat(
            &[(0, ""), (1, "gul"), (2, "")],
            &[(0, 1, 0.0), (1, 2, 0.0)],
            0,
            2,
        )
        .unwrap();
        assert!(matches!(
            word_lattice_from_subword(&l, &ws),
            Err(LatticeError::DanglingPiece { node: 1, .. })
        ));
    }

    #[test]
    fn retokenize_gullet() {
        let w = lat(
            &[(0, ""), (1, "gullet"), (2, "")],
            &[(0, 1, -0.3), (1, 2, -0.1)],
            0,
            2,
        )
        .unwrap();
        let tok = VocabTokenizer::new("toy", ["\u{2581}gul".to_string(), "let".to_string()]);
        assert_eq!(tok.segment("gullet"), ["\u{2581}gul", "let"]);
        let r = retokenize_lattice(&w, &tok).unwrap();
        assert_eq!(r.len(), 4);
        let p = paths(&r);
        assert_eq!(p[0].0, ["\u{2581}gul", "let"]);
        let gul = r.successors(r.start())[0];
        assert_eq!(gul.score, -0.3);
        assert_eq!(r.successors(gul.to)[0].score, 0.0);
    }

    #[test]
    fn identity_retokenize_is_isomorphic() {
        let w = lat(
            &[(0, ""), (1, "a"), (2, "b"), (3, "c"), (4, "")],
            &[
                (0, 1, -1.0),
                (0, 2, -2.0),
                (1, 3, 0.0),
                (2, 3, -0.5),
                (3, 4, 0.0),
            ],
            0,
            4,
        )
        .unwrap();
        let r = retokenize_lattice(&w, &IdentityTokenizer).unwrap();
        assert_eq!(r.len(), w.len());
        assert_eq!(r.num_edges(), w.num_edges());
        let mut a = paths(&w);
        let mut b = paths(&r);
        a.sort_by(|x, y| x.0.cmp(&y.0));
        b.sort_by(|x, y| x.0.cmp(&y.0));
        assert_eq!(a, b);
    }

    #[test]
    fn bad_tokenizer_rejected() {
        struct Broken;
        impl TokenizerAdapter for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn convention(&self) -> MarkerConvention {
                MarkerConvention::Words
            }
            fn segment(&self, w: &str) -> Vec<String> {
                vec![w[..1].to_string()]
            }
        }
        let w = lat(
            &[(0, ""), (1, "ab"), (2, "")],
            &[(0, 1, 0.0), (1, 2, 0.0)],
            0,
            2,
        )
        .unwrap();
        assert!(matches!(
            retokenize_lattice(&w, &Broken),
            Err(LatticeError::Tokenizer { .. })
        ));
    }

    #[test]
    fn char_tokenizer_spells_words() {
        for conv in [
            cont(),
            MarkerConvention::WordStart("\u{2581}".into()),
            MarkerConvention::Words,
        ] {
            let t = CharTokenizer::new(conv.clone());
            let pieces = t.segment("gut");
            if conv == MarkerConvention::Words {
                assert!(!conv.spells_word("gut", &pieces));
            } else {
                assert!(conv.spells_word("gut", &pieces), "{conv:?} {pieces:?}");
            }
        }
    }

    #[test]
    fn nbest_single_hypothesis_is_linear() {
        let nb = NBestList::new([("a b", -2.5)]).unwrap();
        let l = lattice_from_nbest(&nb).unwrap();
        let p = paths(&l);
        assert_eq!(p, vec![(vec!["a".to_string(), "b".to_string()], -2.5)]);
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn nbest_prefix_merge() {
        let nb = NBestList::new([("a b", -1.0), ("a c", -2.0)]).unwrap();
        let l = lattice_from_nbest(&nb).unwrap();
        assert_eq!(l.successors(l.start()).len(), 1);
        let a = l.successors(l.start())[0];
        assert_eq!(l.token(a.to), "a");
        assert_eq!(a.score, -1.0);
        let mut next: Vec<&str> = l.successors(a.to).iter().map(|x| l.token(x.to)).collect();
        next.sort();
        assert_eq!(next, ["b", "c"]);
    }

    #[test]
    fn nbest_suffix_merge() {
        let nb = NBestList::new([("x a b", -1.0), ("y a b", -2.0)]).unwrap();
        let l = lattice_from_nbest(&nb).unwrap();
        // start, x, y, shared a, shared b, end
        assert_eq!(l.len(), 6);
        let mut p: Vec<_> = paths(&l);
        p.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(p[0], (vec!["x".into(), "a".into(), "b".into()], -1.0));
        assert_eq!(p[1], (vec!["y".into(), "a".into(), "b".into()], -2.0));
    }

    #[test]
    fn nbest_prefix_terminal() {
        let nb = NBestList::new([("a", -1.0), ("a b", -2.0)]).unwrap();
        let l = lattice_from_nbest(&nb).unwrap();
        let mut p: Vec<Vec<String>> = paths(&l).into_iter().map(|x| x.0).collect();
        p.sort();
        assert_eq!(
            p,
            vec![
                vec!["a".to_string()],
                vec!["a".to_string(), "b".to_string()]
            ]
        );
    }

    #[test]
    fn nbest_empty_hypothesis_rejected() {
        let nb = NBestList::new([("a", -1.0), ("  ", -2.0)]).unwrap();
        assert_eq!(
            lattice_from_nbest(&nb).unwrap_err(),
            LatticeError::EmptyHypothesis(2)
        );
    }
}
