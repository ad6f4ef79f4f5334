//! Parallel terminology extraction from UMLS concept atoms.
//!
//! Atoms are grouped by CUI. For every concept that has at least one atom in
//! each language of the pair, exactly one term pair is produced from the
//! preferred atom on each side. The preference order is:
//!
//! 1. term status `P` before anything else,
//! 2. `ISPREF = Y` before anything else,
//! 3. unsuppressed (`SUPPRESS = N`) before suppressed,
//! 4. lexicographically smallest SUI, then AUI, then the string itself.
//!
//! The order is total, so the result does not depend on input order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::ingest::ConceptAtom;
use crate::model::{LangPair, ModelError, SegmentPair};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermPair {
    pub cui: String,
    pub source_term: String,
    pub target_term: String,
    pub pair: LangPair,
}

impl TermPair {
    /// The pair as a training segment; the CUI becomes the document id.
    pub fn to_segment(&self, corpus_id: &str) -> Result<SegmentPair, ModelError> {
        SegmentPair::new(
            self.source_term.as_str(),
            self.target_term.as_str(),
            corpus_id,
            Some(self.cui.clone()),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub concepts_seen: u64,
    pub pairs_emitted: u64,
    pub concepts_missing_source: u64,
    pub concepts_missing_target: u64,
}

/// Sort key for atom preference; smaller is better.
pub fn preference_key(atom: &ConceptAtom) -> (bool, bool, bool, &str, &str, &str) {
    (
        atom.ts != "P",
        atom.ispref != 'Y',
        atom.suppress != 'N',
        atom.sui.as_str(),
        atom.aui.as_str(),
        atom.str_text.as_str(),
    )
}

#[derive(Debug, Default, Clone)]
struct Slots {
    source: Option<ConceptAtom>,
    target: Option<ConceptAtom>,
}

fn offer(slot: &mut Option<ConceptAtom>, atom: ConceptAtom) {
    match slot {
        Some(best) if preference_key(best) <= preference_key(&atom) => {}
        _ => *slot = Some(atom),
    }
}

#[derive(Debug, Default)]
struct Grouping(BTreeMap<String, Slots>);

impl Grouping {
    fn add(&mut self, atom: ConceptAtom, pair: &LangPair) {
        let is_source = &atom.lat == pair.source();
        if !is_source && &atom.lat != pair.target() {
            return;
        }
        let slots = self.0.entry(atom.cui.clone()).or_default();
        if is_source {
            offer(&mut slots.source, atom);
        } else {
            offer(&mut slots.target, atom);
        }
    }

    fn merge(&mut self, other: Grouping) {
        for (cui, slots) in other.0 {
            let mine = self.0.entry(cui).or_default();
            if let Some(a) = slots.source {
                offer(&mut mine.source, a);
            }
            if let Some(a) = slots.target {
                offer(&mut mine.target, a);
            }
        }
    }

    fn finish(self, pair: &LangPair) -> (Vec<TermPair>, ExtractionReport) {
        let mut report = ExtractionReport::default();
        let mut pairs = Vec::new();
        for (cui, slots) in self.0 {
            report.concepts_seen += 1;
            match (slots.source, slots.target) {
                (Some(s), Some(t)) => {
                    report.pairs_emitted += 1;
                    pairs.push(TermPair {
                        cui,
                        source_term: s.str_text,
                        target_term: t.str_text,
                        pair: pair.clone(),
                    });
                }
                (None, _) => report.concepts_missing_source += 1,
                (_, None) => report.concepts_missing_target += 1,
            }
        }
        (pairs, report)
    }
}

/// Streaming extraction. Memory is bounded by the number of distinct CUIs,
/// not the number of atoms. Output is sorted by CUI.
pub fn extract_parallel_concepts<I>(atoms: I, pair: &LangPair) -> (Vec<TermPair>, ExtractionReport)
where
    I: IntoIterator<Item = ConceptAtom>,
{
    let mut grouping = Grouping::default();
    for atom in atoms {
        grouping.add(atom, pair);
    }
    grouping.finish(pair)
}

/// Sharded extraction over an in-memory atom list; identical output to
/// [`extract_parallel_concepts`] for any strategy.
pub fn extract_parallel_concepts_with(
    atoms: &[ConceptAtom],
    pair: &LangPair,
    exec: Exec,
) -> (Vec<TermPair>, ExtractionReport) {
    let shards = exec.map_chunks(atoms, CHUNK, |chunk| {
        let mut g = Grouping::default();
        for atom in chunk {
            g.add(atom.clone(), pair);
        }
        g
    });
    let mut merged = Grouping::default();
    for shard in shards {
        merged.merge(shard);
    }
    merged.finish(pair)
}

/// `cui<TAB>source_term<TAB>target_term`, with a header row.
pub fn term_pairs_to_tsv(pairs: &[TermPair]) -> String {
    let mut out = String::from("cui\tsource_term\ttarget_term\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            p.cui,
            p.source_term.replace('\t', " "),
            p.target_term.replace('\t', " ")
        );
    }
    out
}
