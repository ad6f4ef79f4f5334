//! Config-driven corpus preparation run: ingest, overlap filter, dedup,
//! partition and terminology append, writing bitext files, manifests and
//! reports to one output directory.
//!
//! A run is a pure function of the config and the input files. Nothing
//! time- or environment-dependent is written, so reruns are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::exec::Exec;
use crate::ingest::{self, IngestError, IssueLog};
use crate::model::{sha256_hex, CorpusManifest, FileFormat, FileRef, LangPair, ModelError, PairCodes, SegmentPair};
use crate::pipeline::{self, render_columns, PartitionSpec, PartitionUnit, PipelineError, StatsTable};
use crate::report::ReportError;
use crate::smt::BaselineError;
use crate::umls;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("manifest has {0} violation(s)")]
    ManifestViolations(usize),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl WorkflowError {
    /// 0 success, 1 validation failure, 2 I/O failure, 3 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkflowError::Io { .. } => 2,
            WorkflowError::Input { source: IngestError::Io(_), .. } => 2,
            WorkflowError::Model(ModelError::IoFailure { .. }) => 2,
            WorkflowError::Report(ReportError::Fixture { .. }) => 2,
            WorkflowError::Invariant(_) => 3,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        WorkflowError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, WorkflowError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| WorkflowError::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), WorkflowError> {
    fs::write(path, contents).map_err(|e| WorkflowError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusSpec {
    Tsv { name: String, path: PathBuf },
    Text { name: String, source: PathBuf, target: PathBuf },
}

impl CorpusSpec {
    pub fn name(&self) -> &str {
        match self {
            CorpusSpec::Tsv { name, .. } | CorpusSpec::Text { name, .. } => name,
        }
    }

    fn files(&self) -> Vec<(&Path, FileFormat)> {
        match self {
            CorpusSpec::Tsv { path, .. } => vec![(path, FileFormat::Tsv)],
            CorpusSpec::Text { source, target, .. } => {
                vec![(source, FileFormat::TextSource), (target, FileFormat::TextTarget)]
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestedCorpus {
    pub segments: Vec<SegmentPair>,
    pub manifest: Option<CorpusManifest>,
    /// Blank lines dropped.
    pub skipped: u64,
    pub issues: IssueLog,
}

/// Reads one corpus and describes it with a manifest. Relative paths
/// resolve against `base`.
pub fn read_corpus(spec: &CorpusSpec, base: &Path, pair: &LangPair) -> Result<IngestedCorpus, WorkflowError> {
    let mut out = IngestedCorpus::default();
    let input_err = |path: &Path, source| WorkflowError::Input {
        path: path.to_path_buf(),
        source,
    };
    match spec {
        CorpusSpec::Tsv { name, path } => {
            let full = base.join(path);
            let mut reader = ingest::parse_tsv_bitext(open(&full)?, pair.clone(), name.as_str());
            for seg in reader.by_ref() {
                out.segments.push(seg.map_err(|e| input_err(&full, e))?);
            }
            out.issues = reader.issues().clone();
            out.skipped = out.issues.len() as u64;
        }
        CorpusSpec::Text { name, source, target } => {
            let (src, tgt) = (base.join(source), base.join(target));
            let mut reader = ingest::parse_bitext(open(&src)?, open(&tgt)?, pair.clone(), name.as_str());
            for seg in reader.by_ref() {
                out.segments.push(seg.map_err(|e| input_err(&src, e))?);
            }
            out.skipped = reader.blank_pairs();
        }
    }
    let file_refs = spec
        .files()
        .into_iter()
        .map(|(p, f)| FileRef::describe(base, p, f))
        .collect::<Result<Vec<_>, _>>()?;
    out.manifest = Some(CorpusManifest {
        name: spec.name().to_string(),
        pair: PairCodes::from(pair),
        segment_count: out.segments.len() as u64,
        file_refs,
        provenance_note: "ingested input".into(),
    });
    Ok(out)
}

/// Writes `<stem>.src` and `<stem>.tgt`, one segment per line, and returns
/// a manifest whose paths are relative to `dir`.
pub fn write_bitext(
    dir: &Path,
    stem: &str,
    segments: &[SegmentPair],
    pair: &LangPair,
    provenance_note: &str,
) -> Result<CorpusManifest, WorkflowError> {
    type Side = fn(&SegmentPair) -> &str;
    let sides: [(&str, FileFormat, Side); 2] = [
        ("src", FileFormat::TextSource, SegmentPair::source_text),
        ("tgt", FileFormat::TextTarget, SegmentPair::target_text),
    ];
    let mut file_refs = Vec::new();
    for (ext, format, side) in sides {
        let name = format!("{stem}.{ext}");
        let path = dir.join(&name);
        let file = File::create(&path).map_err(|e| WorkflowError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for seg in segments {
            writeln!(w, "{}", side(seg)).map_err(|e| WorkflowError::io(&path, e))?;
        }
        w.flush().map_err(|e| WorkflowError::io(&path, e))?;
        file_refs.push(FileRef::describe(dir, name, format)?);
    }
    Ok(CorpusManifest {
        name: stem.to_string(),
        pair: PairCodes::from(pair),
        segment_count: segments.len() as u64,
        file_refs,
        provenance_note: provenance_note.to_string(),
    })
}

/// `source<TAB>target[<TAB>doc_id]` rows, the format [`ingest::parse_tsv_bitext`] reads.
pub fn segments_to_tsv(segments: &[SegmentPair]) -> String {
    let mut out = String::new();
    for seg in segments {
        out.push_str(seg.source_text());
        out.push('\t');
        out.push_str(seg.target_text());
        if let Some(doc) = seg.doc_id() {
            out.push('\t');
            out.push_str(doc);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Filter,
    Dedup,
    AppendTerms,
    Partition,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Dedup => "dedup",
            Stage::AppendTerms => "append-terms",
            Stage::Partition => "partition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSettings {
    pub dev_size: usize,
    #[serde(default)]
    pub unit: PartitionUnit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub pair: LangPair,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpora: Vec<CorpusSpec>,
    /// Bibliographic exports (`pmid`/`pii`/`title`/`language` TSV).
    #[serde(default)]
    pub metadata: Vec<PathBuf>,
    /// `doc_id<TAB>title` file for the corpora's documents.
    #[serde(default)]
    pub doc_titles: Option<PathBuf>,
    /// MRCONSO subset used by `append-terms`.
    #[serde(default)]
    pub terminology: Option<PathBuf>,
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub partition: Option<PartitionSettings>,
}

fn default_seed() -> u64 {
    pipeline::DEFAULT_SEED
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, WorkflowError> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(|e| WorkflowError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<(), WorkflowError> {
        let bad = |m: &str| Err(WorkflowError::Config(m.to_string()));
        if self.stages.is_empty() {
            return bad("stage list is empty");
        }
        if self.stages[0] != Stage::Ingest {
            return bad("the first stage must be ingest");
        }
        if self.stages.iter().collect::<BTreeSet<_>>().len() != self.stages.len() {
            return bad("a stage is listed twice");
        }
        if self.corpora.is_empty() {
            return bad("no corpora listed");
        }
        let names: BTreeSet<&str> = self.corpora.iter().map(CorpusSpec::name).collect();
        if names.len() != self.corpora.len() {
            return bad("corpus names must be unique");
        }
        let has = |s: Stage| self.stages.contains(&s);
        if has(Stage::Filter) && self.metadata.is_empty() {
            return bad("filter needs at least one metadata file");
        }
        if has(Stage::AppendTerms) && self.terminology.is_none() {
            return bad("append-terms needs a terminology file");
        }
        if has(Stage::Partition) != self.partition.is_some() {
            return bad("partition settings and the partition stage go together");
        }
        if let Some(p) = self.stages.iter().position(|&s| s == Stage::Partition) {
            if self.stages[p + 1..].iter().any(|&s| s != Stage::AppendTerms) {
                return bad("only append-terms may follow partition");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: u64,
    pub kept: u64,
    pub removed: u64,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRow {
    pub pair: LangPair,
    pub train: u64,
    pub dev: u64,
}

/// Train/dev sizes per language pair.
pub fn render_splits(rows: &[SplitRow]) -> String {
    let mut grid = vec![vec!["language".to_string(), "train".to_string(), "dev".to_string()]];
    for r in rows {
        grid.push(vec![r.pair.short_label(), r.train.to_string(), r.dev.to_string()]);
    }
    render_columns(&grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_hash: String,
    pub pair: LangPair,
    pub stages: Vec<StageReport>,
    pub input_stats: StatsTable,
    pub splits: Vec<SplitRow>,
}

impl RunSummary {
    fn new(config: &PipelineConfig) -> Self {
        RunSummary {
            seed: config.seed,
            config_hash: config.hash(),
            pair: config.pair.clone(),
            stages: Vec::new(),
            input_stats: StatsTable::default(),
            splits: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: WorkflowError,
    pub partial: RunSummary,
}

struct Run<'a> {
    config: &'a PipelineConfig,
    base: &'a Path,
    out: PathBuf,
    exec: Exec,
    summary: RunSummary,
    current: Vec<SegmentPair>,
    dev: Option<Vec<SegmentPair>>,
}

impl Run<'_> {
    fn note(&self) -> String {
        format!("seed={} config={}", self.config.seed, self.summary.config_hash)
    }

    fn push(&mut self, stage: Stage, input: u64, kept: u64, removed: u64, detail: serde_json::Value) -> Result<(), WorkflowError> {
        self.summary.stages.push(StageReport {
            stage: stage.name().to_string(),
            input,
            kept,
            removed,
            detail,
        });
        if kept + removed != input {
            return Err(WorkflowError::Invariant(format!(
                "{}: kept {kept} + removed {removed} != input {input}",
                stage.name()
            )));
        }
        Ok(())
    }

    fn ingest(&mut self) -> Result<(), WorkflowError> {
        let mut manifests = Vec::new();
        let mut issues = String::from("corpus\tline_no\treason\n");
        let mut skipped = 0;
        for spec in &self.config.corpora {
            let corpus = read_corpus(spec, self.base, &self.config.pair)?;
            skipped += corpus.skipped;
            for issue in &corpus.issues.issues {
                issues.push_str(&format!("{}\t{}\t{}\n", spec.name(), issue.line, issue.reason));
            }
            self.current.extend(corpus.segments);
            manifests.extend(corpus.manifest);
        }
        let stats = pipeline::corpus_stats(&manifests)?;
        write_file(&self.out.join("ingest_issues.tsv"), &issues)?;
        write_file(&self.out.join("input_stats.tsv"), &stats.to_tsv())?;
        write_file(&self.out.join("input_stats.txt"), &stats.render_text())?;
        write_file(&self.out.join("input_stats.json"), &stats.to_json())?;
        write_file(
            &self.out.join("input_manifests.json"),
            &serde_json::to_string_pretty(&manifests).expect("manifests serialize"),
        )?;
        self.summary.input_stats = stats;
        let kept = self.current.len() as u64;
        self.push(Stage::Ingest, kept + skipped, kept, skipped, json!({ "corpora": self.config.corpora.len(), "blank_lines": skipped }))
    }

    fn filter(&mut self) -> Result<(), WorkflowError> {
        let mut docs = Vec::new();
        for path in &self.config.metadata {
            let full = self.base.join(path);
            let reader = ingest::parse_doc_metadata(open(&full)?).map_err(|source| WorkflowError::Input { path: full.clone(), source })?;
            for doc in reader {
                docs.push(doc.map_err(|source| WorkflowError::Input { path: full.clone(), source })?);
            }
        }
        let index = pipeline::build_exclusion_index(docs);
        let titles = match &self.config.doc_titles {
            None => BTreeMap::new(),
            Some(p) => {
                let full = self.base.join(p);
                ingest::parse_doc_titles(open(&full)?).map_err(|source| WorkflowError::Input { path: full, source })?
            }
        };
        let segments = std::mem::take(&mut self.current);
        let outcome = pipeline::filter_overlap_with(segments, &titles, &index, self.exec);
        let r = outcome.report;
        write_bitext(&self.out, "removed", &outcome.removed, &self.config.pair, &self.note())?;
        write_file(&self.out.join("filter_report.json"), &serde_json::to_string_pretty(&r).expect("report serializes"))?;
        write_file(
            &self.out.join("filter_report.tsv"),
            &format!(
                "input_segments\tkept_segments\tremoved_segments\tmatched_by_pii\tmatched_by_title\tuntitled_docs\n{}\t{}\t{}\t{}\t{}\t{}\n",
                r.input_segments, r.kept_segments, r.removed_segments, r.matched_by_pii, r.matched_by_title, r.untitled_docs
            ),
        )?;
        self.current = outcome.kept;
        let detail = json!({
            "index_records": index.record_count,
            "pii_collisions": index.pii_collisions,
            "title_collisions": index.title_collisions,
            "report": r,
        });
        self.push(Stage::Filter, r.input_segments, r.kept_segments, r.removed_segments, detail)
    }

    fn dedup(&mut self) -> Result<(), WorkflowError> {
        let input = self.current.len() as u64;
        let (unique, dups) = pipeline::dedup(std::mem::take(&mut self.current));
        self.current = unique;
        self.push(Stage::Dedup, input, self.current.len() as u64, dups, json!({ "duplicates": dups }))
    }

    fn partition(&mut self) -> Result<(), WorkflowError> {
        let settings = self.config.partition.expect("validated");
        let spec = PartitionSpec {
            dev_size: settings.dev_size,
            seed: self.config.seed,
            unit: settings.unit,
        };
        let input = self.current.len() as u64;
        let split = pipeline::partition(std::mem::take(&mut self.current), &spec)?;
        let (train, dev) = (split.train.len() as u64, split.dev.len() as u64);
        self.current = split.train;
        self.dev = Some(split.dev);
        // dev segments are set aside, not discarded
        self.push(Stage::Partition, input, train, dev, json!({ "train": train, "dev": dev, "seed": spec.seed, "unit": spec.unit }))
    }

    fn append_terms(&mut self) -> Result<(), WorkflowError> {
        let path = self.base.join(self.config.terminology.as_ref().expect("validated"));
        let keep = [self.config.pair.source().clone(), self.config.pair.target().clone()]
            .into_iter()
            .collect();
        let mut reader = ingest::parse_mrconso(open(&path)?, keep);
        let mut atoms = Vec::new();
        for atom in reader.by_ref() {
            atoms.push(atom.map_err(|source| WorkflowError::Input { path: path.clone(), source })?);
        }
        let counts = reader.counts();
        let (pairs, report) = umls::extract_parallel_concepts_with(&atoms, &self.config.pair, self.exec);
        write_file(&self.out.join("terms.tsv"), &umls::term_pairs_to_tsv(&pairs))?;
        write_file(&self.out.join("mrconso_issues.tsv"), &reader.issues().to_tsv())?;
        let mut appended = 0;
        for p in &pairs {
            self.current.push(p.to_segment("umls")?);
            appended += 1;
        }
        let detail = json!({ "mrconso": counts, "extraction": report });
        self.push(Stage::AppendTerms, pairs.len() as u64, appended, 0, detail)
    }

    fn finish(&mut self) -> Result<(), WorkflowError> {
        let note = self.note();
        let train = write_bitext(&self.out, "train", &self.current, &self.config.pair, &note)?;
        write_file(&self.out.join("train.manifest.json"), &train.to_json())?;
        let dev_len = match &self.dev {
            Some(dev) => {
                let m = write_bitext(&self.out, "dev", dev, &self.config.pair, &note)?;
                write_file(&self.out.join("dev.manifest.json"), &m.to_json())?;
                dev.len() as u64
            }
            None => 0,
        };
        self.summary.splits = vec![SplitRow {
            pair: self.config.pair.clone(),
            train: self.current.len() as u64,
            dev: dev_len,
        }];
        write_file(&self.out.join("splits.txt"), &render_splits(&self.summary.splits))?;
        write_file(
            &self.out.join("splits.json"),
            &serde_json::to_string_pretty(&self.summary.splits).expect("splits serialize"),
        )?;
        Ok(())
    }

    fn execute(&mut self) -> Result<(), WorkflowError> {
        fs::create_dir_all(&self.out).map_err(|e| WorkflowError::io(&self.out, e))?;
        for &stage in &self.config.stages {
            match stage {
                Stage::Ingest => self.ingest()?,
                Stage::Filter => self.filter()?,
                Stage::Dedup => self.dedup()?,
                Stage::Partition => self.partition()?,
                Stage::AppendTerms => self.append_terms()?,
            }
        }
        self.finish()
    }
}

/// Runs every configured stage. Relative paths in the config resolve
/// against `base`. On failure the stages completed so far are returned
/// alongside the error and also dumped to `partial_report.json` when the
/// output directory is writable.
pub fn run_pipeline(config: &PipelineConfig, base: &Path, exec: Exec) -> Result<RunSummary, Box<RunFailure>> {
    let mut run = Run {
        config,
        base,
        out: base.join(&config.output_dir),
        exec,
        summary: RunSummary::new(config),
        current: Vec::new(),
        dev: None,
    };
    let result = config.validate().and_then(|_| run.execute());
    let summary_json = serde_json::to_string_pretty(&run.summary).expect("summary serializes");
    match result {
        Ok(()) => {
            let path = run.out.join("run_summary.json");
            match write_file(&path, &summary_json) {
                Ok(()) => Ok(run.summary),
                Err(error) => Err(Box::new(RunFailure { error, partial: run.summary })),
            }
        }
        Err(error) => {
            if run.out.is_dir() {
                let dump = json!({ "error": error.to_string(), "partial": run.summary });
                let _ = fs::write(
                    run.out.join("partial_report.json"),
                    serde_json::to_string_pretty(&dump).expect("dump serializes"),
                );
            }
            Err(Box::new(RunFailure { error, partial: run.summary }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> PipelineConfig {
        PipelineConfig::from_json(
            r#"{
                "pair": "ENG-SPA",
                "output_dir": "out",
                "corpora": [{"format": "tsv", "name": "a", "path": "a.tsv"}],
                "stages": ["ingest", "dedup"]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = base_config();
        assert_eq!(c.seed, 42);
        assert_eq!(c.hash(), base_config().hash());

        let mut bad = c.clone();
        bad.stages = vec![];
        assert!(bad.validate().is_err());
        bad.stages = vec![Stage::Dedup, Stage::Ingest];
        assert!(bad.validate().is_err());
        bad.stages = vec![Stage::Ingest, Stage::Filter];
        assert!(bad.validate().is_err());
        bad.stages = vec![Stage::Ingest, Stage::Partition];
        assert!(bad.validate().is_err());
        bad.partition = Some(PartitionSettings { dev_size: 1, unit: PartitionUnit::Segment });
        assert!(bad.validate().is_ok());
        bad.stages = vec![Stage::Ingest, Stage::Partition, Stage::Dedup];
        assert!(bad.validate().is_err());
        assert!(PipelineConfig::from_json(r#"{"pair": "ENG-SPA"}"#).is_err());
    }

    #[test]
    fn missing_input_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&base_config(), dir.path(), Exec::Sequential).unwrap_err();
        assert_eq!(err.error.exit_code(), 2);
        assert!(err.error.to_string().contains("a.tsv"));
        assert!(dir.path().join("out/partial_report.json").exists());
    }

    #[test]
    fn small_run() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.tsv"), "a\tx\nb\ty\na\tx\n").unwrap();
        let summary = run_pipeline(&base_config(), dir.path(), Exec::Sequential).unwrap();
        assert_eq!(summary.stages.len(), 2);
        assert_eq!(summary.stages[1].removed, 1);
        assert_eq!(fs::read_to_string(dir.path().join("out/train.src")).unwrap(), "a\nb\n");
        let m = CorpusManifest::from_json(&fs::read_to_string(dir.path().join("out/train.manifest.json")).unwrap()).unwrap();
        assert!(crate::model::validate_manifest(&m, &dir.path().join("out")).unwrap().is_valid());
        assert!(m.provenance_note.contains("seed=42"));
    }
}
