//! Shared domain types: language tags, segment pairs, corpus manifests and
//! the captured NMT hyperparameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported file format tag {0:?}")]
    UnsupportedFormat(String),
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
    #[error("malformed language code {0:?} (expected three ASCII letters)")]
    MalformedLanguageCode(String),
    #[error("language pair needs two distinct languages, got {0} twice")]
    SameLanguage(LanguageTag),
    #[error("invalid language pair {0:?}")]
    MalformedPair(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Registry of accepted language codes, following UMLS `LAT` conventions.
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    codes: BTreeSet<String>,
    aliases: BTreeMap<String, String>,
}

impl LanguageRegistry {
    /// ENG, SPA and POR, plus the two-letter aliases EN, ES and PT.
    pub fn standard() -> Self {
        let codes = ["ENG", "SPA", "POR"].iter().map(|c| c.to_string()).collect();
        let aliases = [("EN", "ENG"), ("ES", "SPA"), ("PT", "POR")]
            .iter()
            .map(|(a, c)| (a.to_string(), c.to_string()))
            .collect();
        LanguageRegistry { codes, aliases }
    }

    pub fn register(&mut self, code: &str) -> Result<LanguageTag, ModelError> {
        let code = canonical_code(code)?;
        self.codes.insert(code.clone());
        Ok(LanguageTag(code))
    }

    pub fn contains(&self, code: &str) -> bool {
        self.tag(code).is_ok()
    }

    pub fn tag(&self, code: &str) -> Result<LanguageTag, ModelError> {
        let upper = code.trim().to_ascii_uppercase();
        if let Some(full) = self.aliases.get(&upper) {
            return Ok(LanguageTag(full.clone()));
        }
        let code = canonical_code(&upper)?;
        if self.codes.contains(&code) {
            Ok(LanguageTag(code))
        } else {
            Err(ModelError::UnknownLanguage(code))
        }
    }
}

fn canonical_code(code: &str) -> Result<String, ModelError> {
    let upper = code.trim().to_ascii_uppercase();
    if upper.len() == 3 && upper.bytes().all(|b| b.is_ascii_alphabetic()) {
        Ok(upper)
    } else {
        Err(ModelError::MalformedLanguageCode(code.to_string()))
    }
}

fn standard_registry() -> &'static LanguageRegistry {
    static REGISTRY: OnceLock<LanguageRegistry> = OnceLock::new();
    REGISTRY.get_or_init(LanguageRegistry::standard)
}

/// A registered three-letter language code, stored uppercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageTag(String);

impl LanguageTag {
    /// Parses against the standard registry (case-insensitive).
    pub fn parse(code: &str) -> Result<Self, ModelError> {
        standard_registry().tag(code)
    }

    pub fn code(&self) -> &str {
        &self.0
    }

    /// Two-letter label used in report headers (EN, ES, PT); other codes
    /// fall back to the full code.
    pub fn short_label(&self) -> &str {
        match self.0.as_str() {
            "ENG" => "EN",
            "SPA" => "ES",
            "POR" => "PT",
            other => other,
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageTag {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::parse(s)
    }
}

impl Serialize for LanguageTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LanguageTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        LanguageTag::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Translation direction. Source and target always differ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LangPair {
    source: LanguageTag,
    target: LanguageTag,
}

impl LangPair {
    pub fn new(source: LanguageTag, target: LanguageTag) -> Result<Self, ModelError> {
        if source == target {
            return Err(ModelError::SameLanguage(source));
        }
        Ok(LangPair { source, target })
    }

    pub fn source(&self) -> &LanguageTag {
        &self.source
    }

    pub fn target(&self) -> &LanguageTag {
        &self.target
    }

    pub fn reversed(&self) -> LangPair {
        LangPair {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// "EN/ES"-style label.
    pub fn short_label(&self) -> String {
        format!("{}/{}", self.source.short_label(), self.target.short_label())
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

/// Accepts `ENG-SPA`, `ENG/SPA`, `en/es` and similar.
impl FromStr for LangPair {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(['-', '/', '_']);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => LangPair::new(a.parse()?, b.parse()?),
            _ => Err(ModelError::MalformedPair(s.to_string())),
        }
    }
}

impl Serialize for LangPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LangPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One aligned sentence pair with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentPair {
    source_text: String,
    target_text: String,
    corpus_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    doc_id: Option<String>,
}

impl SegmentPair {
    pub fn new(
        source_text: impl Into<String>,
        target_text: impl Into<String>,
        corpus_id: impl Into<String>,
        doc_id: Option<String>,
    ) -> Result<Self, ModelError> {
        let source_text = source_text.into();
        let target_text = target_text.into();
        for text in [&source_text, &target_text] {
            if text.trim().is_empty() {
                return Err(ModelError::InvalidSegment("empty text"));
            }
            if text.contains(['\n', '\r']) {
                return Err(ModelError::InvalidSegment("embedded newline"));
            }
        }
        Ok(SegmentPair {
            source_text,
            target_text,
            corpus_id: corpus_id.into(),
            doc_id,
        })
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn target_text(&self) -> &str {
        &self.target_text
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn doc_id(&self) -> Option<&str> {
        self.doc_id.as_deref()
    }
}

/// Raw language codes as written in a manifest. Kept unvalidated so that an
/// unregistered code surfaces as a validation violation instead of a parse
/// failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCodes {
    pub source: String,
    pub target: String,
}

impl From<&LangPair> for PairCodes {
    fn from(pair: &LangPair) -> Self {
        PairCodes {
            source: pair.source.code().to_string(),
            target: pair.target.code().to_string(),
        }
    }
}

impl PairCodes {
    pub fn resolve(&self) -> Result<LangPair, ModelError> {
        LangPair::new(self.source.parse()?, self.target.parse()?)
    }
}

/// Known file format tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// `source<TAB>target[<TAB>doc_id]` per line.
    Tsv,
    /// Source side of a line-parallel pair.
    TextSource,
    /// Target side of a line-parallel pair.
    TextTarget,
}

impl FileFormat {
    pub fn tag(self) -> &'static str {
        match self {
            FileFormat::Tsv => "tsv",
            FileFormat::TextSource => "text-source",
            FileFormat::TextTarget => "text-target",
        }
    }
}

impl FromStr for FileFormat {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(FileFormat::Tsv),
            "text-source" => Ok(FileFormat::TextSource),
            "text-target" => Ok(FileFormat::TextTarget),
            other => Err(ModelError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: PathBuf,
    pub format: String,
    /// Hex SHA-256 of the raw file bytes.
    pub checksum: String,
}

impl FileRef {
    /// Reads `base.join(path)` and records its checksum.
    pub fn describe(base: &Path, path: impl Into<PathBuf>, format: FileFormat) -> Result<Self, ModelError> {
        let path = path.into();
        let bytes = read_file(&base.join(&path))?;
        Ok(FileRef {
            path,
            format: format.tag().to_string(),
            checksum: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_file(path: &Path) -> Result<Vec<u8>, ModelError> {
    fs::read(path).map_err(|source| ModelError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub pair: PairCodes,
    pub segment_count: u64,
    pub file_refs: Vec<FileRef>,
    #[serde(default)]
    pub provenance_note: String,
}

impl CorpusManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CountMismatch { declared: u64, actual: u64 },
    ChecksumMismatch { path: PathBuf },
    UnknownLanguage { code: String },
    SameLanguage { code: String },
    UnpairedFile { path: PathBuf },
    Unparseable { path: PathBuf, reason: String },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::CountMismatch { .. } => "CountMismatch",
            Violation::ChecksumMismatch { .. } => "ChecksumMismatch",
            Violation::UnknownLanguage { .. } => "UnknownLanguage",
            Violation::SameLanguage { .. } => "SameLanguage",
            Violation::UnpairedFile { .. } => "UnpairedFile",
            Violation::Unparseable { .. } => "Unparseable",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Violation::CountMismatch { declared, actual } => {
                format!("declared {declared} segments, files hold {actual}")
            }
            Violation::ChecksumMismatch { path } => format!("{} changed", path.display()),
            Violation::UnknownLanguage { code } => format!("{code} is not registered"),
            Violation::SameLanguage { code } => format!("source and target are both {code}"),
            Violation::UnpairedFile { path } => {
                format!("{} has no matching side", path.display())
            }
            Violation::Unparseable { path, reason } => format!("{}: {reason}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// `violation_kind<TAB>detail` per line, with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("violation_kind\tdetail\n");
        for v in &self.violations {
            out.push_str(v.kind());
            out.push('\t');
            out.push_str(&v.detail().replace(['\t', '\n'], " "));
            out.push('\n');
        }
        out
    }
}

/// Checks a manifest against the files it names. Relative paths resolve
/// against `base`.
pub fn validate_manifest(manifest: &CorpusManifest, base: &Path) -> Result<ValidationReport, ModelError> {
    let mut violations = Vec::new();

    for code in [&manifest.pair.source, &manifest.pair.target] {
        if !standard_registry().contains(code) {
            violations.push(Violation::UnknownLanguage { code: code.clone() });
        }
    }
    if violations.is_empty() && manifest.pair.resolve().is_err() {
        violations.push(Violation::SameLanguage {
            code: manifest.pair.source.to_ascii_uppercase(),
        });
    }

    // Resolve every format tag before touching the filesystem.
    let formats = manifest
        .file_refs
        .iter()
        .map(|r| r.format.parse::<FileFormat>())
        .collect::<Result<Vec<_>, _>>()?;

    let mut contents = Vec::with_capacity(manifest.file_refs.len());
    for file in &manifest.file_refs {
        let bytes = read_file(&base.join(&file.path))?;
        if sha256_hex(&bytes) != file.checksum {
            violations.push(Violation::ChecksumMismatch { path: file.path.clone() });
        }
        contents.push(bytes);
    }

    let mut actual = 0u64;
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    for (i, format) in formats.iter().enumerate() {
        match format {
            FileFormat::Tsv => match ingest::count_tsv_segments(&contents[i][..]) {
                Ok(n) => actual += n,
                Err(e) => violations.push(Violation::Unparseable {
                    path: manifest.file_refs[i].path.clone(),
                    reason: e.to_string(),
                }),
            },
            FileFormat::TextSource => sources.push(i),
            FileFormat::TextTarget => targets.push(i),
        }
    }
    for (k, &s) in sources.iter().enumerate() {
        let Some(&t) = targets.get(k) else {
            violations.push(Violation::UnpairedFile { path: manifest.file_refs[s].path.clone() });
            continue;
        };
        match ingest::count_bitext_segments(&contents[s][..], &contents[t][..]) {
            Ok(n) => actual += n,
            Err(e) => violations.push(Violation::Unparseable {
                path: manifest.file_refs[s].path.clone(),
                reason: e.to_string(),
            }),
        }
    }
    for &t in targets.iter().skip(sources.len()) {
        violations.push(Violation::UnpairedFile { path: manifest.file_refs[t].path.clone() });
    }

    if actual != manifest.segment_count {
        violations.push(Violation::CountMismatch {
            declared: manifest.segment_count,
            actual,
        });
    }
    Ok(ValidationReport { violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderType {
    BidirectionalRecurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderType {
    Seq2seqAttention,
}

/// Hyperparameters of the NMT system, recorded for reproduction. Defaults
/// are the published settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmtConfigCapture {
    pub encoder_type: EncoderType,
    pub decoder_type: DecoderType,
    pub word_vector_size: u32,
    pub layers: u32,
    pub rnn_size: u32,
    pub batch_size: u32,
    pub vocabulary_size: u32,
}

impl Default for NmtConfigCapture {
    fn default() -> Self {
        NmtConfigCapture {
            encoder_type: EncoderType::BidirectionalRecurrent,
            decoder_type: DecoderType::Seq2seqAttention,
            word_vector_size: 600,
            layers: 4,
            rnn_size: 800,
            batch_size: 64,
            vocabulary_size: 50_000,
        }
    }
}

impl NmtConfigCapture {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("word_vector_size", self.word_vector_size),
            ("layers", self.layers),
            ("rnn_size", self.rnn_size),
            ("batch_size", self.batch_size),
            ("vocabulary_size", self.vocabulary_size),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn with_overrides(overrides: &NmtConfigOverrides) -> Result<Self, ModelError> {
        fn positive(name: &str, value: Option<i64>, default: u32) -> Result<u32, ModelError> {
            match value {
                None => Ok(default),
                Some(v) if v > 0 && v <= u32::MAX as i64 => Ok(v as u32),
                Some(v) => Err(ModelError::InvalidConfig(format!("{name} must be positive, got {v}"))),
            }
        }
        let d = NmtConfigCapture::default();
        let config = NmtConfigCapture {
            encoder_type: overrides.encoder_type.unwrap_or(d.encoder_type),
            decoder_type: overrides.decoder_type.unwrap_or(d.decoder_type),
            word_vector_size: positive("word_vector_size", overrides.word_vector_size, d.word_vector_size)?,
            layers: positive("layers", overrides.layers, d.layers)?,
            rnn_size: positive("rnn_size", overrides.rnn_size, d.rnn_size)?,
            batch_size: positive("batch_size", overrides.batch_size, d.batch_size)?,
            vocabulary_size: positive("vocabulary_size", overrides.vocabulary_size, d.vocabulary_size)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Partial [`NmtConfigCapture`]; absent fields take the defaults. Numeric
/// fields are signed so that non-positive values can be rejected explicitly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmtConfigOverrides {
    pub encoder_type: Option<EncoderType>,
    pub decoder_type: Option<DecoderType>,
    pub word_vector_size: Option<i64>,
    pub layers: Option<i64>,
    pub rnn_size: Option<i64>,
    pub batch_size: Option<i64>,
    pub vocabulary_size: Option<i64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eng_spa() -> LangPair {
        "ENG-SPA".parse().unwrap()
    }

    #[test]
    fn language_tags_fold_case() {
        assert_eq!(LanguageTag::parse("spa").unwrap().code(), "SPA");
        assert_eq!(LanguageTag::parse("Pt").unwrap().code(), "POR");
        assert!(matches!(LanguageTag::parse("XXX"), Err(ModelError::UnknownLanguage(_))));
        assert!(matches!(LanguageTag::parse("E1G"), Err(ModelError::MalformedLanguageCode(_))));
    }

    #[test]
    fn registry_is_extensible() {
        let mut reg = LanguageRegistry::standard();
        assert!(!reg.contains("FRE"));
        reg.register("fre").unwrap();
        assert_eq!(reg.tag("FRE").unwrap().code(), "FRE");
    }

    #[test]
    fn pair_rejects_identical_languages() {
        assert!(matches!("ENG/ENG".parse::<LangPair>(), Err(ModelError::SameLanguage(_))));
        let p: LangPair = "en/pt".parse().unwrap();
        assert_eq!(p.to_string(), "ENG-POR");
        assert_eq!(p.short_label(), "EN/PT");
        assert_eq!(p.reversed().short_label(), "PT/EN");
    }

    #[test]
    fn segment_invariants() {
        assert!(SegmentPair::new("a", "b", "c", None).is_ok());
        assert!(SegmentPair::new("  ", "b", "c", None).is_err());
        assert!(SegmentPair::new("a", "b\nc", "c", None).is_err());
    }

    fn write_fixture(dir: &Path) -> CorpusManifest {
        fs::write(dir.join("c.tsv"), "a\tx\nb\ty\nc\tz\n").unwrap();
        let refs = vec![FileRef::describe(dir, "c.tsv", FileFormat::Tsv).unwrap()];
        CorpusManifest {
            name: "fixture".into(),
            pair: PairCodes::from(&eng_spa()),
            segment_count: 3,
            file_refs: refs,
            provenance_note: "unit test".into(),
        }
    }

    #[test]
    fn consistent_manifest_validates() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_fixture(dir.path());
        assert!(validate_manifest(&m, dir.path()).unwrap().is_valid());
    }

    #[test]
    fn wrong_count_is_one_violation() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_fixture(dir.path());
        m.segment_count = 4;
        let report = validate_manifest(&m, dir.path()).unwrap();
        assert_eq!(report.violations, vec![Violation::CountMismatch { declared: 4, actual: 3 }]);
        assert!(report.to_tsv().contains("CountMismatch\tdeclared 4 segments"));
    }

    #[test]
    fn unknown_language_is_one_violation() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_fixture(dir.path());
        m.pair.target = "XXX".into();
        let report = validate_manifest(&m, dir.path()).unwrap();
        assert_eq!(report.violations, vec![Violation::UnknownLanguage { code: "XXX".into() }]);
    }

    #[test]
    fn changed_file_and_bad_format() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_fixture(dir.path());
        fs::write(dir.path().join("c.tsv"), "a\tx\nb\ty\nc\tw\n").unwrap();
        let report = validate_manifest(&m, dir.path()).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind(), "ChecksumMismatch");

        m.file_refs[0].format = "tmx".into();
        assert!(matches!(validate_manifest(&m, dir.path()), Err(ModelError::UnsupportedFormat(_))));
        m.file_refs[0].format = "tsv".into();
        m.file_refs[0].path = "missing.tsv".into();
        assert!(matches!(validate_manifest(&m, dir.path()), Err(ModelError::IoFailure { .. })));
    }

    #[test]
    fn line_parallel_files_are_counted_in_pairs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.en"), "one\ntwo\n").unwrap();
        fs::write(dir.path().join("a.es"), "uno\ndos\n").unwrap();
        let m = CorpusManifest {
            name: "lp".into(),
            pair: PairCodes::from(&eng_spa()),
            segment_count: 2,
            file_refs: vec![
                FileRef::describe(dir.path(), "a.en", FileFormat::TextSource).unwrap(),
                FileRef::describe(dir.path(), "a.es", FileFormat::TextTarget).unwrap(),
            ],
            provenance_note: String::new(),
        };
        assert!(validate_manifest(&m, dir.path()).unwrap().is_valid());
        let mut lonely = m.clone();
        lonely.file_refs.pop();
        lonely.segment_count = 0;
        let report = validate_manifest(&lonely, dir.path()).unwrap();
        assert_eq!(report.violations[0].kind(), "UnpairedFile");
    }

    #[test]
    fn nmt_defaults_serialize_seven_fields() {
        let value: serde_json::Value = serde_json::from_str(&NmtConfigCapture::default().to_json()).unwrap();
        let obj = value.as_object().unwrap();
        assert_eq!(obj.len(), 7);
        assert_eq!(obj["encoder_type"], "bidirectional_recurrent");
        assert_eq!(obj["decoder_type"], "seq2seq_attention");
        assert_eq!(obj["word_vector_size"], 600);
        assert_eq!(obj["layers"], 4);
        assert_eq!(obj["rnn_size"], 800);
        assert_eq!(obj["batch_size"], 64);
        assert_eq!(obj["vocabulary_size"], 50000);
    }

    #[test]
    fn nmt_overrides() {
        let o = NmtConfigOverrides { layers: Some(2), ..Default::default() };
        let c = NmtConfigCapture::with_overrides(&o).unwrap();
        assert_eq!(c.layers, 2);
        assert_eq!(c.rnn_size, 800);
        let bad = NmtConfigOverrides { batch_size: Some(0), ..Default::default() };
        assert!(matches!(NmtConfigCapture::with_overrides(&bad), Err(ModelError::InvalidConfig(_))));
        let neg = NmtConfigOverrides { rnn_size: Some(-5), ..Default::default() };
        assert!(NmtConfigCapture::with_overrides(&neg).is_err());
    }

    fn arb_manifest() -> impl Strategy<Value = CorpusManifest> {
        (
            "[a-z]{1,12}",
            prop::sample::select(vec!["ENG", "SPA", "POR", "XXX"]),
            prop::sample::select(vec!["ENG", "SPA", "POR"]),
            any::<u64>(),
            prop::collection::vec(("[a-z/]{1,20}", prop::sample::select(vec!["tsv", "text-source"]), "[0-9a-f]{64}"), 0..4),
            ".{0,40}",
        )
            .prop_map(|(name, s, t, n, refs, note)| CorpusManifest {
                name,
                pair: PairCodes { source: s.into(), target: t.into() },
                segment_count: n,
                file_refs: refs
                    .into_iter()
                    .map(|(p, f, c)| FileRef { path: p.into(), format: f.into(), checksum: c })
                    .collect(),
                provenance_note: note,
            })
    }

    proptest! {
        #[test]
        fn manifest_json_round_trip(m in arb_manifest()) {
            let back = CorpusManifest::from_json(&m.to_json()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
