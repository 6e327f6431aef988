//! Lowest word error rate over all lattice paths.

use super::{Lattice, LatticeError};
use crate::metrics::AlignmentCounts;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeOracle {
    pub counts: AlignmentCounts,
    /// Tokens of the best path.
    pub path: Vec<String>,
}

impl LatticeOracle {
    pub fn errors(&self) -> usize {
        self.counts.errors()
    }
}

#[derive(Debug, Clone, Copy)]
enum Back {
    Origin,
    Diag(usize),
    Del,
    Ins(usize),
    Pass(usize),
}

/// Edit-distance DP over (node, reference position). Tokens are compared
/// verbatim, so callers normalize both sides beforehand.
pub fn lattice_oracle_wer<S: AsRef<str>>(
    lattice: &Lattice,
    reference: &[S],
) -> Result<LatticeOracle, LatticeError> {
    if reference.is_empty() {
        return Err(LatticeError::EmptyReference);
    }
    let m = reference.len();
    let n = lattice.len();
    let mut cost = vec![usize::MAX; n * (m + 1)];
    let mut back = vec![Back::Origin; n * (m + 1)];
    let at = |v: usize, i: usize| v * (m + 1) + i;

    let s = lattice.start();
    for i in 0..=m {
        cost[at(s, i)] = i;
        back[at(s, i)] = if i == 0 { Back::Origin } else { Back::Del };
    }

    for &v in lattice.order() {
        if v == s {
            continue;
        }
        let preds = lattice.predecessors(v);
        if v == lattice.end() {
            for i in 0..=m {
                for a in preds {
                    if cost[at(a.to, i)] < cost[at(v, i)] {
                        cost[at(v, i)] = cost[at(a.to, i)];
                        back[at(v, i)] = Back::Pass(a.to);
                    }
                }
            }
            continue;
        }
        let tok = lattice.token(v);
        for i in 0..=m {
            let mut best = usize::MAX;
            let mut choice = Back::Origin;
            if i > 0 {
                let sub = usize::from(tok != reference[i - 1].as_ref());
                for a in preds {
                    let c = cost[at(a.to, i - 1)] + sub;
                    if c < best {
                        best = c;
                        choice = Back::Diag(a.to);
                    }
                }
                let c = cost[at(v, i - 1)] + 1;
                if c < best {
                    best = c;
                    choice = Back::Del;
                }
            }
            for a in preds {
                let c = cost[at(a.to, i)] + 1;
                if c < best {
                    best = c;
                    choice = Back::Ins(a.to);
                }
            }
            cost[at(v, i)] = best;
            back[at(v, i)] = choice;
        }
    }

    let mut counts = AlignmentCounts {
        ref_len: m,
        ..Default::default()
    };
    let mut path = Vec::new();
    let (mut v, mut i) = (lattice.end(), m);
    loop {
        match back[at(v, i)] {
            Back::Origin => break,
            Back::Pass(u) => v = u,
            Back::Del => {
                counts.del += 1;
                i -= 1;
            }
            Back::Diag(u) => {
                if lattice.token(v) == reference[i - 1].as_ref() {
                    counts.cor += 1;
                } else {
                    counts.sub += 1;
                }
                path.push(lattice.token(v).to_string());
                v = u;
                i -= 1;
            }
            Back::Ins(u) => {
                counts.ins += 1;
                path.push(lattice.token(v).to_string());
                v = u;
            }
        }
    }
    path.reverse();
    debug_assert_eq!(counts.errors(), cost[at(lattice.end(), m)]);
    Ok(LatticeOracle { counts, path })
}
