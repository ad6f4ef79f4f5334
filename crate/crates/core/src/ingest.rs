//! Streaming readers for the input formats: line-parallel bitext, TSV
//! bitext, bibliographic metadata exports and UMLS `MRCONSO.RRF`.
//!
//! Every reader pulls one line at a time from a [`BufRead`]; nothing is
//! buffered beyond the current record. Rows that are skipped or rejected are
//! recorded in an [`IssueLog`] with their 1-based line number.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Lines};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LangPair, LanguageTag, SegmentPair};

pub const DEFAULT_MALFORMED_CAP: usize = 1000;
const MRCONSO_FIELDS: usize = 18;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
    #[error("line counts differ: source has {0}, target has {1}")]
    LineCountMismatch(u64, u64),
    #[error("line {0} is blank on one side only")]
    AsymmetricBlank(u64),
    #[error("line {0} is malformed")]
    MalformedRow(u64),
    #[error("line {line}: {reason}")]
    InvalidSegment { line: u64, reason: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("more than {cap} malformed rows (last at line {line})")]
    MalformedLimit { cap: usize, line: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueLog {
    pub issues: Vec<Issue>,
}

impl IssueLog {
    pub fn push(&mut self, line: u64, reason: impl Into<String>) {
        self.issues.push(Issue { line, reason: reason.into() });
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// `line_no<TAB>reason` per line, with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("line_no\treason\n");
        for issue in &self.issues {
            out.push_str(&format!("{}\t{}\n", issue.line, issue.reason.replace(['\t', '\n'], " ")));
        }
        out
    }
}

/// Pairs line `i` of the source stream with line `i` of the target stream.
pub struct BitextReader<S, T> {
    source: Lines<S>,
    target: Lines<T>,
    pair: LangPair,
    corpus_id: String,
    line: u64,
    blank_pairs: u64,
    done: bool,
}

pub fn parse_bitext<S: BufRead, T: BufRead>(
    source: S,
    target: T,
    pair: LangPair,
    corpus_id: impl Into<String>,
) -> BitextReader<S, T> {
    BitextReader {
        source: source.lines(),
        target: target.lines(),
        pair,
        corpus_id: corpus_id.into(),
        line: 0,
        blank_pairs: 0,
        done: false,
    }
}

impl<S: BufRead, T: BufRead> BitextReader<S, T> {
    pub fn pair(&self) -> &LangPair {
        &self.pair
    }

    /// Lines consumed so far.
    pub fn lines_read(&self) -> u64 {
        self.line
    }

    /// Blank/blank line pairs dropped so far.
    pub fn blank_pairs(&self) -> u64 {
        self.blank_pairs
    }

    fn fail(&mut self, err: IngestError) -> Option<Result<SegmentPair, IngestError>> {
        self.done = true;
        Some(Err(err))
    }

    fn count_rest<I: Iterator>(iter: I) -> u64 {
        iter.count() as u64
    }
}

impl<S: BufRead, T: BufRead> Iterator for BitextReader<S, T> {
    type Item = Result<SegmentPair, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match (self.source.next(), self.target.next()) {
                (None, None) => self.done = true,
                (Some(src), Some(tgt)) => {
                    self.line += 1;
                    let (src, tgt) = match (src, tgt) {
                        (Ok(s), Ok(t)) => (s, t),
                        (Err(e), _) | (_, Err(e)) => return self.fail(e.into()),
                    };
                    match (src.trim().is_empty(), tgt.trim().is_empty()) {
                        (true, true) => {
                            self.blank_pairs += 1;
                            continue;
                        }
                        (false, false) => {}
                        _ => return self.fail(IngestError::AsymmetricBlank(self.line)),
                    }
                    let line = self.line;
                    return match SegmentPair::new(src, tgt, self.corpus_id.as_str(), None) {
                        Ok(seg) => Some(Ok(seg)),
                        Err(e) => self.fail(IngestError::InvalidSegment { line, reason: e.to_string() }),
                    };
                }
                (Some(_), None) => {
                    let src_n = self.line + 1 + Self::count_rest(&mut self.source);
                    return self.fail(IngestError::LineCountMismatch(src_n, self.line));
                }
                (None, Some(_)) => {
                    let tgt_n = self.line + 1 + Self::count_rest(&mut self.target);
                    return self.fail(IngestError::LineCountMismatch(self.line, tgt_n));
                }
            }
        }
        None
    }
}

/// Reads `source<TAB>target[<TAB>doc_id]` rows. Extra columns are ignored;
/// fully blank lines are skipped and logged.
pub struct TsvBitextReader<R> {
    lines: Lines<R>,
    pair: LangPair,
    corpus_id: String,
    line: u64,
    issues: IssueLog,
    done: bool,
}

pub fn parse_tsv_bitext<R: BufRead>(reader: R, pair: LangPair, corpus_id: impl Into<String>) -> TsvBitextReader<R> {
    TsvBitextReader {
        lines: reader.lines(),
        pair,
        corpus_id: corpus_id.into(),
        line: 0,
        issues: IssueLog::default(),
        done: false,
    }
}

impl<R: BufRead> TsvBitextReader<R> {
    pub fn pair(&self) -> &LangPair {
        &self.pair
    }

    pub fn issues(&self) -> &IssueLog {
        &self.issues
    }
}

fn tsv_row(line: &str, line_no: u64, corpus_id: &str) -> Result<SegmentPair, IngestError> {
    let mut cols = line.split('\t');
    let (Some(src), Some(tgt)) = (cols.next(), cols.next()) else {
        return Err(IngestError::MalformedRow(line_no));
    };
    let doc_id = cols.next().map(str::trim).filter(|d| !d.is_empty()).map(str::to_string);
    SegmentPair::new(src, tgt, corpus_id, doc_id).map_err(|e| IngestError::InvalidSegment {
        line: line_no,
        reason: e.to_string(),
    })
}

impl<R: BufRead> Iterator for TsvBitextReader<R> {
    type Item = Result<SegmentPair, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let Some(line) = self.lines.next() else {
                self.done = true;
                break;
            };
            self.line += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            };
            if line.trim().is_empty() {
                self.issues.push(self.line, "blank line skipped");
                continue;
            }
            let row = tsv_row(&line, self.line, &self.corpus_id);
            self.done = row.is_err();
            return Some(row);
        }
        None
    }
}

/// Counts the segments a TSV bitext yields, failing on the first bad row.
pub fn count_tsv_segments<R: BufRead>(reader: R) -> Result<u64, IngestError> {
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        tsv_row(&line, i as u64 + 1, "")?;
        n += 1;
    }
    Ok(n)
}

/// Counts the segments a line-parallel pair yields.
pub fn count_bitext_segments<S: BufRead, T: BufRead>(source: S, target: T) -> Result<u64, IngestError> {
    // The pair only labels the stream; any valid one will do for counting.
    let pair: LangPair = "ENG-SPA".parse().expect("standard pair");
    let mut n = 0;
    for seg in parse_bitext(source, target, pair, "") {
        seg?;
        n += 1;
    }
    Ok(n)
}

/// One `MRCONSO.RRF` row restricted to the fields used downstream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptAtom {
    pub cui: String,
    pub lat: LanguageTag,
    pub ts: String,
    pub ispref: char,
    pub sui: String,
    pub aui: String,
    pub sab: String,
    pub str_text: String,
    pub suppress: char,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrconsoCounts {
    pub lines: u64,
    pub emitted: u64,
    pub skipped: u64,
    pub malformed: u64,
}

fn single_char(field: &str) -> Option<char> {
    let mut chars = field.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

fn is_cui(cui: &str) -> bool {
    cui.len() > 1 && cui.starts_with('C') && cui[1..].bytes().all(|b| b.is_ascii_digit())
}

/// Parses one row. `Ok(None)` means the row is well formed but its language
/// is not in `keep`.
///
/// Column layout:
/// `CUI|LAT|TS|LUI|STT|SUI|ISPREF|AUI|SAUI|SCUI|SDUI|SAB|TTY|CODE|STR|SRL|SUPPRESS|CVF|`
pub fn parse_mrconso_line(
    line: &str,
    line_no: u64,
    keep: &BTreeSet<LanguageTag>,
) -> Result<Option<ConceptAtom>, (IngestError, &'static str)> {
    let malformed = |why| Err((IngestError::MalformedRow(line_no), why));
    let body = line.strip_suffix('|').unwrap_or(line);
    let fields: Vec<&str> = body.split('|').collect();
    if fields.len() != MRCONSO_FIELDS {
        return malformed("field count is not 18");
    }
    let cui = fields[0];
    let str_text = fields[14];
    if cui.is_empty() {
        return malformed("empty CUI");
    }
    if !is_cui(cui) {
        return malformed("CUI is not C followed by digits");
    }
    if str_text.is_empty() {
        return malformed("empty STR");
    }
    let lat = fields[1].to_ascii_uppercase();
    let Some(lat) = keep.iter().find(|t| t.code() == lat) else {
        return Ok(None);
    };
    let (Some(ispref), Some(suppress)) = (single_char(fields[6]), single_char(fields[16])) else {
        return malformed("ISPREF and SUPPRESS must be single characters");
    };
    Ok(Some(ConceptAtom {
        cui: cui.to_string(),
        lat: lat.clone(),
        ts: fields[2].to_string(),
        ispref,
        sui: fields[5].to_string(),
        aui: fields[7].to_string(),
        sab: fields[11].to_string(),
        str_text: str_text.to_string(),
        suppress,
    }))
}

/// Streams atoms whose `LAT` is in the keep set. Malformed rows are logged
/// rather than raised until more than `malformed_cap` of them are seen.
pub struct MrconsoReader<R> {
    lines: Lines<R>,
    keep: BTreeSet<LanguageTag>,
    malformed_cap: usize,
    counts: MrconsoCounts,
    issues: IssueLog,
    done: bool,
}

pub fn parse_mrconso<R: BufRead>(reader: R, keep: BTreeSet<LanguageTag>) -> MrconsoReader<R> {
    MrconsoReader {
        lines: reader.lines(),
        keep,
        malformed_cap: DEFAULT_MALFORMED_CAP,
        counts: MrconsoCounts::default(),
        issues: IssueLog::default(),
        done: false,
    }
}

impl<R: BufRead> MrconsoReader<R> {
    pub fn with_malformed_cap(mut self, cap: usize) -> Self {
        self.malformed_cap = cap;
        self
    }

    pub fn counts(&self) -> MrconsoCounts {
        self.counts
    }

    pub fn issues(&self) -> &IssueLog {
        &self.issues
    }
}

impl<R: BufRead> Iterator for MrconsoReader<R> {
    type Item = Result<ConceptAtom, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let Some(line) = self.lines.next() else {
                self.done = true;
                break;
            };
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            };
            self.counts.lines += 1;
            let line_no = self.counts.lines;
            match parse_mrconso_line(&line, line_no, &self.keep) {
                Ok(Some(atom)) => {
                    self.counts.emitted += 1;
                    return Some(Ok(atom));
                }
                Ok(None) => self.counts.skipped += 1,
                Err((_, why)) => {
                    self.counts.malformed += 1;
                    self.issues.push(line_no, why);
                    if self.counts.malformed as usize > self.malformed_cap {
                        self.done = true;
                        return Some(Err(IngestError::MalformedLimit {
                            cap: self.malformed_cap,
                            line: line_no,
                        }));
                    }
                }
            }
        }
        None
    }
}

/// Bibliographic record from a metadata export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub pmid: Option<String>,
    pub pii: Option<String>,
    pub title: String,
    pub language: Option<LanguageTag>,
}

#[derive(Debug, Clone, Copy)]
struct MetaColumns {
    pmid: Option<usize>,
    pii: Option<usize>,
    title: usize,
    language: Option<usize>,
}

/// Reads a headed TSV export with columns among `pmid`, `pii`, `title` and
/// `language` (any order, case-insensitive; others ignored).
pub struct DocMetaReader<R> {
    lines: Lines<R>,
    columns: MetaColumns,
    line: u64,
    issues: IssueLog,
    done: bool,
}

pub fn parse_doc_metadata<R: BufRead>(reader: R) -> Result<DocMetaReader<R>, IngestError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let names: Vec<String> = header.split('\t').map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |name: &str| names.iter().position(|h| h == name);
    let title = find("title").ok_or_else(|| IngestError::MissingColumn("title".into()))?;
    Ok(DocMetaReader {
        lines,
        columns: MetaColumns {
            pmid: find("pmid"),
            pii: find("pii"),
            title,
            language: find("language"),
        },
        line: 1,
        issues: IssueLog::default(),
        done: false,
    })
}

impl<R: BufRead> DocMetaReader<R> {
    pub fn issues(&self) -> &IssueLog {
        &self.issues
    }

    fn record(&mut self, line: &str) -> Option<DocMeta> {
        let cols: Vec<&str> = line.split('\t').collect();
        let get = |idx: Option<usize>| {
            idx.and_then(|i| cols.get(i))
                .map(|v| v.trim())
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        let pmid = get(self.columns.pmid);
        let pii = get(self.columns.pii);
        let title = get(Some(self.columns.title)).unwrap_or_default();
        if pmid.is_none() && pii.is_none() && title.is_empty() {
            self.issues.push(self.line, "empty row skipped");
            return None;
        }
        let language = match get(self.columns.language) {
            None => None,
            Some(code) => match LanguageTag::parse(&code) {
                Ok(tag) => Some(tag),
                Err(_) => {
                    self.issues.push(self.line, format!("unknown language {code:?} dropped"));
                    None
                }
            },
        };
        Some(DocMeta { pmid, pii, title, language })
    }
}

impl<R: BufRead> Iterator for DocMetaReader<R> {
    type Item = Result<DocMeta, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let Some(line) = self.lines.next() else {
                self.done = true;
                break;
            };
            self.line += 1;
            match line {
                Ok(l) => {
                    if let Some(meta) = self.record(&l) {
                        return Some(Ok(meta));
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        None
    }
}

/// Reads a headed `doc_id<TAB>title` file into a lookup map. Later rows for
/// the same document id are ignored.
pub fn parse_doc_titles<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>, IngestError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let names: Vec<String> = header.split('\t').map(|h| h.trim().to_ascii_lowercase()).collect();
    let doc_col = names
        .iter()
        .position(|h| h == "doc_id")
        .ok_or_else(|| IngestError::MissingColumn("doc_id".into()))?;
    let title_col = names
        .iter()
        .position(|h| h == "title")
        .ok_or_else(|| IngestError::MissingColumn("title".into()))?;
    let mut titles = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (Some(doc), Some(title)) = (cols.get(doc_col), cols.get(title_col)) else {
            return Err(IngestError::MalformedRow(i as u64 + 2));
        };
        titles.entry(doc.trim().to_string()).or_insert_with(|| title.to_string());
    }
    Ok(titles)
}
