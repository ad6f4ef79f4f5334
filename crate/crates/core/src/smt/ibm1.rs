//! IBM Model 1 lexical translation probabilities trained with EM.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::exec::Exec;
use crate::smt::{BaselineError, TokenPair};

/// Token standing for the empty source word when NULL alignment is enabled.
pub const NULL_WORD: &str = "<NULL>";
const HEADER: &str = "# biomt translation-table v1";
const CHUNK: usize = 512;

/// Lexical table `t(e|f)`. For every source word `f` the candidates are kept
/// sorted by descending probability, ties by ascending target word.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TranslationTable {
    entries: BTreeMap<String, Vec<(String, f64)>>,
    target_vocab: BTreeSet<String>,
    includes_null: bool,
}

impl TranslationTable {
    /// A table with no entries: every word is out of vocabulary.
    pub fn empty() -> Self {
        Self::default()
    }

    fn from_rows(rows: BTreeMap<String, Vec<(String, f64)>>, includes_null: bool) -> Self {
        let mut entries = rows;
        let mut target_vocab = BTreeSet::new();
        for cands in entries.values_mut() {
            cands.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            target_vocab.extend(cands.iter().map(|(e, _)| e.clone()));
        }
        TranslationTable {
            entries,
            target_vocab,
            includes_null,
        }
    }

    pub fn includes_null(&self) -> bool {
        self.includes_null
    }

    /// Source vocabulary, including [`NULL_WORD`] when enabled.
    pub fn source_vocab(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn target_vocab(&self) -> &BTreeSet<String> {
        &self.target_vocab
    }

    /// True for real source words the table can translate.
    pub fn knows_source(&self, f: &str) -> bool {
        f != NULL_WORD && self.entries.contains_key(f)
    }

    pub fn candidates(&self, f: &str) -> &[(String, f64)] {
        self.entries.get(f).map_or(&[], Vec::as_slice)
    }

    pub fn prob(&self, e: &str, f: &str) -> f64 {
        self.candidates(f)
            .iter()
            .find(|(w, _)| w == e)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Argmax of `t(·|f)`, ties broken toward the smaller word.
    pub fn best(&self, f: &str) -> Option<&str> {
        self.candidates(f).first().map(|(e, _)| e.as_str())
    }

    /// One header line, then `f<TAB>e<TAB>t` sorted by `f` and descending `t`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{HEADER}\tnull={}\n", self.includes_null);
        for (f, cands) in &self.entries {
            for (e, p) in cands {
                let _ = writeln!(out, "{f}\t{e}\t{p}");
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, BaselineError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let includes_null = match header.strip_prefix(HEADER) {
            Some("\tnull=true") => true,
            Some("\tnull=false") => false,
            _ => return Err(BaselineError::format(1, "unrecognised translation-table header")),
        };
        let mut rows: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let cols: Vec<&str> = line.split('\t').collect();
            let [f, e, p] = cols[..] else {
                return Err(BaselineError::format(line_no, "expected three columns"));
            };
            let p: f64 = p
                .parse()
                .ok()
                .filter(|p: &f64| p.is_finite() && *p >= 0.0)
                .ok_or_else(|| BaselineError::format(line_no, "bad probability"))?;
            rows.entry(f.to_string()).or_default().push((e.to_string(), p));
        }
        Ok(Self::from_rows(rows, includes_null))
    }
}

/// Word-id view of the corpus plus a CSR layout of co-occurring pairs.
struct Model {
    source_words: Vec<String>,
    target_words: Vec<String>,
    sentences: Vec<(Vec<u32>, Vec<u32>)>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    t: Vec<f64>,
}

impl Model {
    fn build(corpus: &[TokenPair], use_null: bool) -> Self {
        let mut source_set: BTreeSet<&str> = BTreeSet::new();
        let mut target_set: BTreeSet<&str> = BTreeSet::new();
        for (f, e) in corpus {
            source_set.extend(f.iter().map(String::as_str));
            target_set.extend(e.iter().map(String::as_str));
        }
        let mut source_words: Vec<String> = Vec::new();
        if use_null {
            source_words.push(NULL_WORD.to_string());
        }
        source_words.extend(source_set.iter().map(|s| s.to_string()));
        let target_words: Vec<String> = target_set.iter().map(|s| s.to_string()).collect();

        let src_id: HashMap<&str, u32> = source_words.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        let tgt_id: HashMap<&str, u32> = target_words.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();

        let sentences: Vec<(Vec<u32>, Vec<u32>)> = corpus
            .iter()
            .map(|(f, e)| {
                let mut fs: Vec<u32> = Vec::with_capacity(f.len() + 1);
                if use_null {
                    fs.push(0);
                }
                fs.extend(f.iter().map(|w| src_id[w.as_str()]));
                (fs, e.iter().map(|w| tgt_id[w.as_str()]).collect())
            })
            .collect();

        let mut rows: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); source_words.len()];
        for (fs, es) in &sentences {
            for &f in fs {
                rows[f as usize].extend(es.iter().copied());
            }
        }
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut t = Vec::new();
        for row in &rows {
            row_start.push(cols.len());
            let uniform = 1.0 / row.len().max(1) as f64;
            for &e in row {
                cols.push(e);
                t.push(uniform);
            }
        }
        row_start.push(cols.len());
        Model {
            source_words,
            target_words,
            sentences,
            row_start,
            cols,
            t,
        }
    }

    fn slot(&self, f: u32, e: u32) -> usize {
        let (lo, hi) = (self.row_start[f as usize], self.row_start[f as usize + 1]);
        lo + self.cols[lo..hi]
            .binary_search(&e)
            .expect("co-occurrence table covers every sentence pair")
    }

    /// Expected counts and log-likelihood for one chunk of sentences.
    fn expect(&self, chunk: &[(Vec<u32>, Vec<u32>)], want_counts: bool) -> (HashMap<usize, f64>, f64) {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        let mut ll = 0.0;
        let mut slots: Vec<usize> = Vec::new();
        for (fs, es) in chunk {
            let norm = (fs.len() as f64).ln();
            for &e in es {
                slots.clear();
                slots.extend(fs.iter().map(|&f| self.slot(f, e)));
                let denom: f64 = slots.iter().map(|&s| self.t[s]).sum();
                ll += denom.ln() - norm;
                if want_counts {
                    for &s in &slots {
                        *counts.entry(s).or_insert(0.0) += self.t[s] / denom;
                    }
                }
            }
        }
        (counts, ll)
    }

    /// One E-step over fixed chunks merged in chunk order.
    fn e_step(&self, exec: Exec, want_counts: bool) -> (Vec<f64>, f64) {
        let parts = exec.map_chunks(&self.sentences, CHUNK, |chunk| self.expect(chunk, want_counts));
        let mut counts = vec![0.0; if want_counts { self.t.len() } else { 0 }];
        let mut ll = 0.0;
        for (part, part_ll) in parts {
            ll += part_ll;
            for (slot, c) in part {
                counts[slot] += c;
            }
        }
        (counts, ll)
    }

    fn m_step(&mut self, counts: &[f64]) {
        for f in 0..self.source_words.len() {
            let (lo, hi) = (self.row_start[f], self.row_start[f + 1]);
            let total: f64 = counts[lo..hi].iter().sum();
            if total > 0.0 {
                for (t, c) in self.t[lo..hi].iter_mut().zip(&counts[lo..hi]) {
                    *t = c / total;
                }
            }
        }
    }

    fn table(&self, use_null: bool) -> TranslationTable {
        let mut rows = BTreeMap::new();
        for (f, word) in self.source_words.iter().enumerate() {
            let (lo, hi) = (self.row_start[f], self.row_start[f + 1]);
            let cands = (lo..hi)
                .map(|s| (self.target_words[self.cols[s] as usize].clone(), self.t[s]))
                .collect();
            rows.insert(word.clone(), cands);
        }
        TranslationTable::from_rows(rows, use_null)
    }
}

/// Runs `iterations` rounds of EM starting from `t(e|f)` uniform over the
/// target words co-occurring with `f`. Returns the table and the corpus
/// log-likelihood after each round.
pub fn train_ibm1_tokens(
    corpus: &[TokenPair],
    iterations: usize,
    use_null: bool,
    exec: Exec,
) -> Result<(TranslationTable, Vec<f64>), BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(BaselineError::ZeroIterations);
    }
    if corpus.iter().any(|(f, e)| e.is_empty() || (f.is_empty() && !use_null)) {
        return Err(BaselineError::EmptySentence);
    }
    let mut model = Model::build(corpus, use_null);
    let mut history = Vec::with_capacity(iterations);
    for round in 0..iterations {
        let (counts, ll) = model.e_step(exec, true);
        if round > 0 {
            history.push(ll);
        }
        model.m_step(&counts);
    }
    history.push(model.e_step(exec, false).1);
    Ok((model.table(use_null), history))
}
