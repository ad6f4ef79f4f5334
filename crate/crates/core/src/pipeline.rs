//! Corpus preparation stages: title normalisation, overlap filtering against
//! a bibliographic exclusion index, deduplication, seeded train/dev
//! partitioning and corpus statistics.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::exec::Exec;
use crate::ingest::DocMeta;
use crate::model::{CorpusManifest, LangPair, ModelError, SegmentPair};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("corpus {corpus} is {found}, expected {expected}")]
    MixedPairs {
        corpus: String,
        expected: LangPair,
        found: LangPair,
    },
    #[error("corpus {0} listed twice for the same language pair")]
    DuplicateCorpus(String),
    #[error("cannot read printed total {0:?}")]
    BadPrintedTotal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Match key for titles: NFKC, lowercased, punctuation and symbols removed,
/// whitespace collapsed.
pub fn normalize_title(raw: &str) -> String {
    let folded: String = raw.nfkc().flat_map(char::to_lowercase).collect();
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        let kept: String = word.chars().filter(|c| c.is_alphanumeric()).collect();
        if kept.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&kept);
    }
    out
}

/// Lookup over bibliographic records by pii and by normalised title.
/// Record ids are positions in the input stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionIndex {
    pub by_pii: BTreeMap<String, usize>,
    pub by_title_key: BTreeMap<String, usize>,
    pub record_count: usize,
    pub pii_collisions: usize,
    pub title_collisions: usize,
}

impl ExclusionIndex {
    pub fn contains_pii(&self, pii: &str) -> bool {
        self.by_pii.contains_key(pii)
    }

    pub fn contains_title_key(&self, key: &str) -> bool {
        !key.is_empty() && self.by_title_key.contains_key(key)
    }
}

pub fn build_exclusion_index<I: IntoIterator<Item = DocMeta>>(docs: I) -> ExclusionIndex {
    let mut index = ExclusionIndex::default();
    for (id, doc) in docs.into_iter().enumerate() {
        index.record_count += 1;
        if let Some(pii) = doc.pii.as_deref().map(str::trim).filter(|p| !p.is_empty()) {
            if index.by_pii.contains_key(pii) {
                index.pii_collisions += 1;
            } else {
                index.by_pii.insert(pii.to_string(), id);
            }
        }
        let key = normalize_title(&doc.title);
        if !key.is_empty() {
            match index.by_title_key.entry(key) {
                Entry::Occupied(_) => index.title_collisions += 1,
                Entry::Vacant(slot) => {
                    slot.insert(id);
                }
            }
        }
    }
    index
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// No document id, or a document that matched nothing.
    Keep,
    /// Document id with no known title and no pii match.
    KeepUntitled,
    RemoveByPii,
    RemoveByTitle,
}

impl Verdict {
    pub fn removes(self) -> bool {
        matches!(self, Verdict::RemoveByPii | Verdict::RemoveByTitle)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_segments: u64,
    pub kept_segments: u64,
    pub removed_segments: u64,
    /// Distinct documents removed through a pii match.
    pub matched_by_pii: u64,
    /// Distinct documents removed through a title match (and no pii match).
    pub matched_by_title: u64,
    /// Distinct documents kept because their title was unknown.
    pub untitled_docs: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<SegmentPair>,
    pub removed: Vec<SegmentPair>,
    pub report: FilterReport,
}

/// Decides, per document, whether its segments overlap the index.
pub struct OverlapFilter<'a> {
    titles_by_doc: &'a BTreeMap<String, String>,
    index: &'a ExclusionIndex,
}

impl<'a> OverlapFilter<'a> {
    pub fn new(titles_by_doc: &'a BTreeMap<String, String>, index: &'a ExclusionIndex) -> Self {
        OverlapFilter { titles_by_doc, index }
    }

    pub fn classify_doc(&self, doc_id: &str) -> Verdict {
        if self.index.contains_pii(doc_id) {
            return Verdict::RemoveByPii;
        }
        match self.titles_by_doc.get(doc_id) {
            None => Verdict::KeepUntitled,
            Some(title) if self.index.contains_title_key(&normalize_title(title)) => Verdict::RemoveByTitle,
            Some(_) => Verdict::Keep,
        }
    }
}

#[derive(Default)]
struct Tally {
    report: FilterReport,
    docs_seen: HashSet<String>,
}

impl Tally {
    fn record(&mut self, seg: &SegmentPair, verdict: Verdict) {
        self.report.input_segments += 1;
        if verdict.removes() {
            self.report.removed_segments += 1;
        } else {
            self.report.kept_segments += 1;
        }
        if let Some(doc) = seg.doc_id() {
            if self.docs_seen.insert(doc.to_string()) {
                match verdict {
                    Verdict::RemoveByPii => self.report.matched_by_pii += 1,
                    Verdict::RemoveByTitle => self.report.matched_by_title += 1,
                    Verdict::KeepUntitled => self.report.untitled_docs += 1,
                    Verdict::Keep => {}
                }
            }
        }
    }
}

/// Streaming filter: documents are classified on first sight and memoised.
pub fn filter_overlap<I>(segments: I, titles_by_doc: &BTreeMap<String, String>, index: &ExclusionIndex) -> FilterOutcome
where
    I: IntoIterator<Item = SegmentPair>,
{
    let filter = OverlapFilter::new(titles_by_doc, index);
    let mut memo: HashMap<String, Verdict> = HashMap::new();
    let mut tally = Tally::default();
    let mut outcome = FilterOutcome::default();
    for seg in segments {
        let verdict = match seg.doc_id() {
            None => Verdict::Keep,
            Some(doc) => *memo.entry(doc.to_string()).or_insert_with(|| filter.classify_doc(doc)),
        };
        tally.record(&seg, verdict);
        if verdict.removes() {
            outcome.removed.push(seg);
        } else {
            outcome.kept.push(seg);
        }
    }
    outcome.report = tally.report;
    outcome
}

/// Same result as [`filter_overlap`]; distinct documents are classified
/// under `exec` and segments are then split in input order.
pub fn filter_overlap_with(
    segments: Vec<SegmentPair>,
    titles_by_doc: &BTreeMap<String, String>,
    index: &ExclusionIndex,
    exec: Exec,
) -> FilterOutcome {
    let filter = OverlapFilter::new(titles_by_doc, index);
    let docs: Vec<&str> = segments
        .iter()
        .filter_map(SegmentPair::doc_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let verdicts = exec.map(&docs, |doc| filter.classify_doc(doc));
    let by_doc: HashMap<String, Verdict> = docs
        .iter()
        .map(|d| d.to_string())
        .zip(verdicts)
        .collect();

    let mut tally = Tally::default();
    let mut outcome = FilterOutcome::default();
    for seg in segments {
        let verdict = seg.doc_id().map_or(Verdict::Keep, |d| by_doc[d]);
        tally.record(&seg, verdict);
        if verdict.removes() {
            outcome.removed.push(seg);
        } else {
            outcome.kept.push(seg);
        }
    }
    outcome.report = tally.report;
    outcome
}

/// Drops exact duplicates of (trimmed source, trimmed target), keeping the
/// first occurrence.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: HashSet<(String, String)>,
    duplicates: u64,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// True if `seg` is new.
    pub fn admit(&mut self, seg: &SegmentPair) -> bool {
        let key = (seg.source_text().trim().to_string(), seg.target_text().trim().to_string());
        if self.seen.insert(key) {
            true
        } else {
            self.duplicates += 1;
            false
        }
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }
}

pub fn dedup<I: IntoIterator<Item = SegmentPair>>(segments: I) -> (Vec<SegmentPair>, u64) {
    let mut d = Deduplicator::new();
    let unique = segments.into_iter().filter(|s| d.admit(s)).collect();
    (unique, d.duplicates())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionUnit {
    #[default]
    Segment,
    /// Whole documents go to one side; segments without a document id are
    /// their own unit.
    Document,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub dev_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub unit: PartitionUnit,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl PartitionSpec {
    pub fn new(dev_size: usize) -> Self {
        PartitionSpec {
            dev_size,
            seed: DEFAULT_SEED,
            unit: PartitionUnit::Segment,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<SegmentPair>,
    pub dev: Vec<SegmentPair>,
}

/// Seeded split: `dev_size` units drawn uniformly without replacement.
/// Both sides keep input order.
pub fn partition(segments: Vec<SegmentPair>, spec: &PartitionSpec) -> Result<Split, PipelineError> {
    let (unit_of, units) = match spec.unit {
        PartitionUnit::Segment => ((0..segments.len()).collect::<Vec<_>>(), segments.len()),
        PartitionUnit::Document => {
            let mut ids: HashMap<&str, usize> = HashMap::new();
            let mut next = 0;
            let unit_of = segments
                .iter()
                .map(|seg| {
                    let mut fresh = || {
                        next += 1;
                        next - 1
                    };
                    match seg.doc_id() {
                        Some(doc) => *ids.entry(doc).or_insert_with(fresh),
                        None => fresh(),
                    }
                })
                .collect::<Vec<_>>();
            (unit_of, next)
        }
    };
    if spec.dev_size == 0 {
        return Err(PipelineError::InvalidSpec("dev_size must be positive".into()));
    }
    if spec.dev_size >= units {
        return Err(PipelineError::InvalidSpec(format!(
            "dev_size {} must be smaller than the {} available units",
            spec.dev_size, units
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_dev = vec![false; units];
    for u in rand::seq::index::sample(&mut rng, units, spec.dev_size) {
        in_dev[u] = true;
    }
    let mut split = Split::default();
    for (seg, unit) in segments.into_iter().zip(unit_of) {
        if in_dev[unit] {
            split.dev.push(seg);
        } else {
            split.train.push(seg);
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub corpus: String,
    pub pair: LangPair,
    pub segments: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTotal {
    pub pair: LangPair,
    pub segments: u64,
}

/// Per-corpus segment counts with exact totals per language pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
    pub totals: Vec<PairTotal>,
    pub warnings: Vec<String>,
}

/// Exact sum of segment counts; every manifest must be for `pair`.
pub fn pair_total(pair: &LangPair, manifests: &[CorpusManifest]) -> Result<u64, PipelineError> {
    manifests.iter().try_fold(0u64, |acc, m| {
        let found = m.pair.resolve()?;
        if &found != pair {
            return Err(PipelineError::MixedPairs {
                corpus: m.name.clone(),
                expected: pair.clone(),
                found,
            });
        }
        Ok(acc + m.segment_count)
    })
}

pub fn corpus_stats(manifests: &[CorpusManifest]) -> Result<StatsTable, PipelineError> {
    let mut table = StatsTable::default();
    let mut by_pair: Vec<(LangPair, Vec<CorpusManifest>)> = Vec::new();
    let mut seen = HashSet::new();
    for m in manifests {
        let pair = m.pair.resolve()?;
        if !seen.insert((m.name.clone(), pair.clone())) {
            return Err(PipelineError::DuplicateCorpus(m.name.clone()));
        }
        table.rows.push(StatsRow {
            corpus: m.name.clone(),
            pair: pair.clone(),
            segments: m.segment_count,
        });
        match by_pair.iter_mut().find(|(p, _)| *p == pair) {
            Some((_, group)) => group.push(m.clone()),
            None => by_pair.push((pair, vec![m.clone()])),
        }
    }
    for (pair, group) in by_pair {
        let segments = pair_total(&pair, &group)?;
        table.totals.push(PairTotal { pair, segments });
    }
    Ok(table)
}

/// A figure as printed in a table: either exact (`950,252`) or rounded to
/// millions (`2.37M`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrintedFigure {
    value: f64,
    /// Half of the last printed digit's place value.
    half_step: f64,
}

impl PrintedFigure {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let bad = || PipelineError::BadPrintedTotal(text.to_string());
        let t = text.trim().replace(',', "");
        if let Some(num) = t.strip_suffix(['M', 'm']) {
            let decimals = num.split_once('.').map_or(0, |(_, d)| d.len());
            let value: f64 = num.parse().map_err(|_| bad())?;
            Ok(PrintedFigure {
                value: value * 1e6,
                half_step: 0.5 * 10f64.powi(6 - decimals as i32),
            })
        } else {
            let value: u64 = t.parse().map_err(|_| bad())?;
            Ok(PrintedFigure { value: value as f64, half_step: 0.5 })
        }
    }

    pub fn agrees_with(&self, exact: u64) -> bool {
        let diff = (exact as f64 - self.value).abs();
        diff < self.half_step || (diff - self.half_step).abs() < 1e-9
    }
}

impl StatsTable {
    pub fn total(&self, pair: &LangPair) -> Option<u64> {
        self.totals.iter().find(|t| &t.pair == pair).map(|t| t.segments)
    }

    /// Compares the exact total for `pair` against a printed figure and
    /// records a warning when they disagree. Returns the warning, if any.
    pub fn check_printed_total(&mut self, pair: &LangPair, printed: &str) -> Result<Option<String>, PipelineError> {
        let figure = PrintedFigure::parse(printed)?;
        let exact = self.total(pair).unwrap_or(0);
        if figure.agrees_with(exact) {
            return Ok(None);
        }
        let warning = format!(
            "{} total: rows sum to {} ({:.2}M) but the printed total is {}",
            pair.short_label(),
            exact,
            exact as f64 / 1e6,
            printed.trim()
        );
        self.warnings.push(warning.clone());
        Ok(Some(warning))
    }

    fn layout(&self) -> (Vec<String>, Vec<LangPair>) {
        let mut corpora: Vec<String> = Vec::new();
        let mut pairs: Vec<LangPair> = Vec::new();
        for r in &self.rows {
            if !corpora.contains(&r.corpus) {
                corpora.push(r.corpus.clone());
            }
            if !pairs.contains(&r.pair) {
                pairs.push(r.pair.clone());
            }
        }
        (corpora, pairs)
    }

    fn cell(&self, corpus: &str, pair: &LangPair) -> String {
        self.rows
            .iter()
            .find(|r| r.corpus == corpus && &r.pair == pair)
            .map_or_else(|| "-".to_string(), |r| r.segments.to_string())
    }

    fn grid(&self) -> Vec<Vec<String>> {
        let (corpora, pairs) = self.layout();
        let mut grid = vec![std::iter::once("corpus".to_string())
            .chain(pairs.iter().map(LangPair::short_label))
            .collect::<Vec<_>>()];
        for c in &corpora {
            grid.push(
                std::iter::once(c.clone())
                    .chain(pairs.iter().map(|p| self.cell(c, p)))
                    .collect(),
            );
        }
        if !corpora.is_empty() {
            grid.push(
                std::iter::once("total".to_string())
                    .chain(pairs.iter().map(|p| self.total(p).unwrap_or(0).to_string()))
                    .collect(),
            );
        }
        grid
    }

    /// Corpus × language-pair grid with a total row.
    pub fn to_tsv(&self) -> String {
        self.grid().iter().map(|row| row.join("\t") + "\n").collect()
    }

    pub fn render_text(&self) -> String {
        render_columns(&self.grid())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Left-aligns the first column and right-aligns the rest.
pub(crate) fn render_columns(grid: &[Vec<String>]) -> String {
    let cols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in grid {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
