//! Corpus-level BLEU with a single reference per hypothesis.
//!
//! Clipped n-gram matches and candidate n-gram totals are summed over the
//! whole corpus before the geometric mean is taken, and the brevity penalty
//! uses the summed candidate and reference lengths.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::exec::Exec;

pub const DEFAULT_MAX_ORDER: usize = 4;
const CHUNK: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BleuError {
    #[error("{hypotheses} hypotheses but {references} references")]
    PairCountMismatch { hypotheses: usize, references: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
}

/// Splits on whitespace after NFKC normalisation; every character that is
/// neither alphanumeric nor whitespace becomes a token of its own.
pub fn tokenize_eval(text: &str, lowercase: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    for c in text.nfkc() {
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c.is_alphanumeric() {
            if lowercase {
                word.extend(c.to_lowercase());
            } else {
                word.push(c);
            }
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramPrecision {
    pub order: usize,
    pub matched: u64,
    pub total: u64,
}

impl NgramPrecision {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// Adds one to the numerator and denominator of every order from 2 up.
    AddOneFromOrder2,
}

impl FromStr for Smoothing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Smoothing::None),
            "add-one" | "add_one" | "add_one_from_order_2" => Ok(Smoothing::AddOneFromOrder2),
            other => Err(format!("unknown smoothing {other:?} (expected none or add-one)")),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothing::None => "none",
            Smoothing::AddOneFromOrder2 => "add-one",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub precisions: Vec<NgramPrecision>,
    pub candidate_length: u64,
    pub reference_length: u64,
    pub brevity_penalty: f64,
    /// 0 to 100.
    pub score: f64,
    pub max_order: usize,
    pub smoothing: Smoothing,
}

impl BleuReport {
    /// Score rounded to two decimals.
    pub fn rounded_score(&self) -> f64 {
        (self.score * 100.0).round() / 100.0
    }

    pub fn summary(&self) -> String {
        let precisions: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", 100.0 * p.ratio()))
            .collect();
        let ratio = if self.reference_length == 0 {
            0.0
        } else {
            self.candidate_length as f64 / self.reference_length as f64
        };
        format!(
            "BLEU = {:.2} {} (BP = {:.3}, ratio = {:.3}, hyp_len = {}, ref_len = {})",
            self.score,
            precisions.join("/"),
            self.brevity_penalty,
            ratio,
            self.candidate_length,
            self.reference_length
        )
    }
}

pub fn brevity_penalty(candidate_len: u64, reference_len: u64) -> f64 {
    if candidate_len > reference_len {
        1.0
    } else if candidate_len == 0 {
        if reference_len == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// (clipped matches, candidate n-gram count) for one sentence pair.
fn sentence_ngrams<S: AsRef<str>>(hyp: &[S], reference: &[S], n: usize) -> (u64, u64) {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let matched = hyp_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hyp.len().saturating_sub(n - 1) as u64)
}

fn check_aligned<T>(hypotheses: &[T], references: &[T]) -> Result<(), BleuError> {
    if hypotheses.len() != references.len() {
        return Err(BleuError::PairCountMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    Ok(())
}

pub fn modified_precision<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    n: usize,
) -> Result<NgramPrecision, BleuError> {
    if n == 0 {
        return Err(BleuError::InvalidOrder);
    }
    check_aligned(hypotheses, references)?;
    let (matched, total) = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| sentence_ngrams(h, r, n))
        .fold((0, 0), |(m, t), (dm, dt)| (m + dm, t + dt));
    Ok(NgramPrecision { order: n, matched, total })
}

/// Sufficient statistics; summing them is associative.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Stats {
    matched: Vec<u64>,
    total: Vec<u64>,
    candidate: u64,
    reference: u64,
}

impl Stats {
    fn zero(max_order: usize) -> Self {
        Stats {
            matched: vec![0; max_order],
            total: vec![0; max_order],
            candidate: 0,
            reference: 0,
        }
    }

    fn add(&mut self, other: &Stats) {
        for (a, b) in self.matched.iter_mut().zip(&other.matched) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
        self.candidate += other.candidate;
        self.reference += other.reference;
    }

    fn of_pair<S: AsRef<str>>(hyp: &[S], reference: &[S], max_order: usize) -> Self {
        let mut s = Stats::zero(max_order);
        for n in 1..=max_order {
            let (m, t) = sentence_ngrams(hyp, reference, n);
            s.matched[n - 1] = m;
            s.total[n - 1] = t;
        }
        s.candidate = hyp.len() as u64;
        s.reference = reference.len() as u64;
        s
    }
}

pub fn corpus_bleu<S: AsRef<str> + Sync>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_order: usize,
    smoothing: Smoothing,
) -> Result<BleuReport, BleuError> {
    corpus_bleu_with(hypotheses, references, max_order, smoothing, Exec::default())
}

pub fn corpus_bleu_with<S: AsRef<str> + Sync>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_order: usize,
    smoothing: Smoothing,
    exec: Exec,
) -> Result<BleuReport, BleuError> {
    if max_order == 0 {
        return Err(BleuError::InvalidOrder);
    }
    check_aligned(hypotheses, references)?;
    let pairs: Vec<(&Vec<S>, &Vec<S>)> = hypotheses.iter().zip(references).collect();
    let partials = exec.map_chunks(&pairs, CHUNK, |chunk| {
        let mut acc = Stats::zero(max_order);
        for (h, r) in chunk {
            acc.add(&Stats::of_pair(h, r, max_order));
        }
        acc
    });
    let mut stats = Stats::zero(max_order);
    for p in &partials {
        stats.add(p);
    }
    Ok(report_from_stats(&stats, max_order, smoothing))
}

fn report_from_stats(stats: &Stats, max_order: usize, smoothing: Smoothing) -> BleuReport {
    let precisions: Vec<NgramPrecision> = (0..max_order)
        .map(|i| NgramPrecision {
            order: i + 1,
            matched: stats.matched[i],
            total: stats.total[i],
        })
        .collect();
    let bp = brevity_penalty(stats.candidate, stats.reference);

    let mut log_sum = 0.0;
    let mut zero = stats.candidate == 0;
    for p in &precisions {
        let (m, t) = match smoothing {
            Smoothing::AddOneFromOrder2 if p.order >= 2 => (p.matched + 1, p.total + 1),
            _ => (p.matched, p.total),
        };
        if m == 0 {
            zero = true;
            break;
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    let score = if zero {
        0.0
    } else {
        100.0 * bp * (log_sum / max_order as f64).exp()
    };
    BleuReport {
        precisions,
        candidate_length: stats.candidate,
        reference_length: stats.reference,
        brevity_penalty: bp,
        score,
        max_order,
        smoothing,
    }
}
