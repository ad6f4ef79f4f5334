//! Monotone word-by-word beam decoder.
//!
//! Each source word is replaced by one of its top candidates from the
//! translation table; source words the table does not know are copied
//! through unchanged. Hypotheses ending in the same word are recombined,
//! since the bigram model only looks one word back.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::smt::lm::{BOS, EOS};
use crate::smt::{BaselineError, LanguageModel, TranslationTable};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderWeights {
    pub lambda_tm: f64,
    pub lambda_lm: f64,
    pub beam_width: usize,
    /// Translation options considered per source word.
    pub max_candidates: usize,
}

impl Default for DecoderWeights {
    fn default() -> Self {
        DecoderWeights {
            lambda_tm: 1.0,
            lambda_lm: 1.0,
            beam_width: 5,
            max_candidates: 10,
        }
    }
}

impl DecoderWeights {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let ok_lambda = |l: f64| l.is_finite() && l >= 0.0;
        if !ok_lambda(self.lambda_tm) || !ok_lambda(self.lambda_lm) {
            return Err(BaselineError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        if self.lambda_tm + self.lambda_lm <= 0.0 {
            return Err(BaselineError::InvalidWeights("at least one weight must be positive".into()));
        }
        if self.beam_width == 0 || self.max_candidates == 0 {
            return Err(BaselineError::InvalidWeights("beam width and candidate count must be positive".into()));
        }
        Ok(())
    }
}

fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Translation options for one source word: `(word, ln t)`.
fn options<'a>(f: &'a str, tt: &'a TranslationTable, w: &DecoderWeights) -> Vec<(&'a str, f64)> {
    if tt.knows_source(f) {
        tt.candidates(f)
            .iter()
            .take(w.max_candidates)
            .map(|(e, p)| (e.as_str(), floored_ln(*p)))
            .collect()
    } else {
        vec![(f, 0.0)]
    }
}

/// Weighted log score of `target` as a translation of `source`, using the
/// same terms the decoder maximises. Copied words contribute no
/// translation-model term.
pub fn model_score(source: &[String], target: &[String], tt: &TranslationTable, lm: &LanguageModel, w: &DecoderWeights) -> f64 {
    assert_eq!(source.len(), target.len(), "monotone decoding is one word per word");
    let mut score = 0.0;
    let mut prev = BOS;
    for (f, e) in source.iter().zip(target) {
        if tt.knows_source(f) {
            score += w.lambda_tm * floored_ln(tt.prob(e, f));
        }
        score += w.lambda_lm * floored_ln(lm.prob(prev, e));
        prev = e;
    }
    if !source.is_empty() {
        score += w.lambda_lm * floored_ln(lm.prob(prev, EOS));
    }
    score
}

#[derive(Debug, Clone)]
struct Hyp<'a> {
    score: f64,
    words: Vec<&'a str>,
}

/// Higher score first, then lexicographically smaller output.
fn rank(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.words.cmp(&b.words))
}

fn beam_search<'a>(
    lattice: &[Vec<(&'a str, f64)>],
    lm: &LanguageModel,
    w: &DecoderWeights,
    width: usize,
) -> Hyp<'a> {
    let mut beam = vec![Hyp { score: 0.0, words: Vec::new() }];
    for opts in lattice {
        let mut by_state: HashMap<&str, Hyp> = HashMap::new();
        for hyp in &beam {
            let prev = hyp.words.last().copied().unwrap_or(BOS);
            for &(e, ln_t) in opts {
                let score = hyp.score + w.lambda_tm * ln_t + w.lambda_lm * floored_ln(lm.prob(prev, e));
                let mut words = hyp.words.clone();
                words.push(e);
                let cand = Hyp { score, words };
                match by_state.get(e) {
                    Some(best) if rank(best, &cand) != Ordering::Greater => {}
                    _ => {
                        by_state.insert(e, cand);
                    }
                }
            }
        }
        beam = by_state.into_values().collect();
        beam.sort_by(rank);
        beam.truncate(width);
    }
    for hyp in &mut beam {
        if let Some(last) = hyp.words.last() {
            hyp.score += w.lambda_lm * floored_ln(lm.prob(last, EOS));
        }
    }
    beam.sort_by(rank);
    beam.swap_remove(0)
}

/// Translates one tokenised sentence.
///
/// The result is the best hypothesis found by any beam of width
/// `1..=beam_width`, so a wider beam never returns a lower-scoring output
/// and width 1 is plain greedy search. Widths beyond the largest number of
/// options at any position are exact and are not repeated.
pub fn decode(source: &[String], tt: &TranslationTable, lm: &LanguageModel, w: &DecoderWeights) -> Vec<String> {
    if source.is_empty() {
        return Vec::new();
    }
    let lattice: Vec<Vec<(&str, f64)>> = source.iter().map(|f| options(f, tt, w)).collect();
    let exact_width = lattice.iter().map(Vec::len).max().unwrap_or(1);
    let mut best: Option<Hyp> = None;
    for width in 1..=w.beam_width.min(exact_width) {
        let hyp = beam_search(&lattice, lm, w, width);
        if best.as_ref().is_none_or(|b| rank(&hyp, b) == Ordering::Less) {
            best = Some(hyp);
        }
    }
    best.expect("at least one width")
        .words
        .into_iter()
        .map(str::to_string)
        .collect()
}

pub fn decode_corpus(
    sources: &[Vec<String>],
    tt: &TranslationTable,
    lm: &LanguageModel,
    w: &DecoderWeights,
    exec: Exec,
) -> Result<Vec<Vec<String>>, BaselineError> {
    w.validate()?;
    Ok(exec.map(sources, |s| decode(s, tt, lm, w)))
}
