//! JSONL dataset I/O.
//!
//! One record per line:
//! `{"id": str, "ref": str|null, "nbest": [{"text": str, "score": float}], "lattice": {...}}`

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::types::{Hypothesis, NBestList, Utterance};

/// Domain of the `score` field in the input file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScoreDomain {
    /// Natural-log scores, stored as given.
    #[default]
    Log,
    /// Linear probabilities, converted with `ln` at ingestion.
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordHyp {
    text: String,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(rename = "ref", default)]
    reference: Option<String>,
    nbest: Vec<RecordHyp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice: Option<Lattice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
    pub warnings: Vec<LoadWarning>,
}

pub fn load_dataset(path: impl AsRef<Path>, domain: ScoreDomain) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), domain).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_dataset(reader: impl BufRead, domain: ScoreDomain) -> Result<Dataset> {
    let mut out = Dataset::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty id".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId {
                id: rec.id,
                line: lineno,
            });
        }
        let utt = record_to_utterance(rec, domain, lineno, &mut out.warnings)?;
        out.utterances.push(utt);
    }
    Ok(out)
}

fn record_to_utterance(
    rec: Record,
    domain: ScoreDomain,
    line: usize,
    warnings: &mut Vec<LoadWarning>,
) -> Result<Utterance> {
    let parse_err = |message: String| Error::Parse { line, message };
    let mut entries = Vec::with_capacity(rec.nbest.len());
    for h in &rec.nbest {
        let score = match domain {
            ScoreDomain::Log => h.score,
            ScoreDomain::Linear => {
                if h.score < 0.0 {
                    return Err(parse_err(format!("negative probability {}", h.score)));
                }
                h.score.ln()
            }
        };
        entries.push((h.text.clone(), score));
    }
    let sources: Vec<Option<String>> = rec.nbest.iter().map(|h| h.source.clone()).collect();
    let nbest = if sources.iter().any(Option::is_some) {
        // Pooled lists keep file order.
        let hyps = entries
            .into_iter()
            .zip(sources)
            .map(|((text, asr_logscore), source)| Hypothesis {
                text,
                asr_logscore,
                rank: 0,
                source,
            })
            .collect();
        NBestList::pooled(hyps).map_err(|e| parse_err(e.to_string()))?
    } else {
        let (list, resorted) =
            NBestList::new_reporting(entries).map_err(|e| parse_err(e.to_string()))?;
        if resorted {
            warnings.push(LoadWarning {
                line,
                message: format!("{}: N-best list re-sorted by descending score", rec.id),
            });
        }
        list
    };
    Ok(Utterance {
        id: rec.id,
        reference: rec.reference,
        nbest,
        lattice: rec.lattice,
    })
}

fn utterance_to_record(u: &Utterance) -> Record {
    Record {
        id: u.id.clone(),
        reference: u.reference.clone(),
        nbest: u
            .nbest
            .iter()
            .map(|h| RecordHyp {
                text: h.text.clone(),
                score: h.asr_logscore,
                source: h.source.clone(),
            })
            .collect(),
        lattice: u.lattice.clone(),
    }
}

pub fn write_dataset(mut w: impl Write, utterances: &[Utterance]) -> Result<()> {
    for u in utterances {
        serde_json::to_writer(&mut w, &utterance_to_record(u))?;
        w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, utterances: &[Utterance]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, utterances)?;
    w.flush().map_err(|e| Error::io(path, e))
}
