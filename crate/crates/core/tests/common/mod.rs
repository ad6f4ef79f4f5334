//! Reference implementations and generators shared by the integration tests.
//! The oracles are written independently of the library code paths they
//! check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use biomt::ingest::DocMeta;
use biomt::model::SegmentPair;
use biomt::pipeline::normalize_title;
use rand::Rng;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn seg(src: &str, tgt: &str, doc: Option<&str>) -> SegmentPair {
    SegmentPair::new(src, tgt, "test", doc.map(str::to_string)).unwrap()
}

/// Corpus BLEU on the 0-1 scale in product / n-th root form:
/// `BP * (p1 * ... * pN)^(1/N)`, counting n-grams by linear scan.
pub fn oracle_bleu(hyps: &[Vec<String>], refs: &[Vec<String>], max_n: usize, add_one: bool) -> f64 {
    let mut product = 1.0f64;
    for n in 1..=max_n {
        let mut matched = 0u64;
        let mut total = 0u64;
        for (h, r) in hyps.iter().zip(refs) {
            if h.len() < n {
                continue;
            }
            let hyp_grams: Vec<&[String]> = h.windows(n).collect();
            let ref_grams: Vec<&[String]> = if r.len() >= n { r.windows(n).collect() } else { Vec::new() };
            total += hyp_grams.len() as u64;
            let mut seen: Vec<&[String]> = Vec::new();
            for g in &hyp_grams {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let in_hyp = hyp_grams.iter().filter(|x| *x == g).count() as u64;
                let in_ref = ref_grams.iter().filter(|x| *x == g).count() as u64;
                matched += in_hyp.min(in_ref);
            }
        }
        let bump = if add_one && n >= 2 { 1 } else { 0 };
        if total + bump == 0 {
            return 0.0;
        }
        product *= (matched + bump) as f64 / (total + bump) as f64;
    }
    let c: usize = hyps.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c > r {
        1.0
    } else if c == 0 {
        if r == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * product.powf(1.0 / max_n as f64)
}

pub fn random_sentence<R: Rng>(rng: &mut R, vocab: usize, len: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let n = rng.random_range(len);
    (0..n).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
}

/// Random (hypotheses, references) with 5-50 pairs over at most 30 words.
pub fn random_bleu_corpus<R: Rng>(rng: &mut R) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let pairs = rng.random_range(5..=50);
    let vocab = rng.random_range(2..=30);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..pairs {
        let r = random_sentence(rng, vocab, 0..=12);
        // half the time start from the reference so matches are common
        let h = if rng.random_bool(0.5) {
            let mut h = r.clone();
            for w in h.iter_mut() {
                if rng.random_bool(0.3) {
                    *w = format!("w{}", rng.random_range(0..vocab));
                }
            }
            h
        } else {
            random_sentence(rng, vocab, 0..=12)
        };
        hyps.push(h);
        refs.push(r);
    }
    (hyps, refs)
}

/// All-pairs overlap check: every segment against every metadata record.
pub fn oracle_filter(
    segments: &[SegmentPair],
    titles: &BTreeMap<String, String>,
    records: &[DocMeta],
) -> (Vec<SegmentPair>, Vec<SegmentPair>) {
    let record_keys: Vec<(Option<&str>, String)> = records
        .iter()
        .map(|r| (r.pii.as_deref().map(str::trim).filter(|p| !p.is_empty()), normalize_title(&r.title)))
        .collect();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for s in segments {
        let mut hit = false;
        if let Some(doc) = s.doc_id() {
            let doc_key = titles.get(doc).map(|t| normalize_title(t)).filter(|k| !k.is_empty());
            for (pii, key) in &record_keys {
                hit |= *pii == Some(doc) || doc_key.as_ref() == Some(key);
            }
        }
        if hit {
            removed.push(s.clone());
        } else {
            kept.push(s.clone());
        }
    }
    (kept, removed)
}

/// Random filter fixture: up to `max_segments` segments over a pool of
/// documents, up to `max_records` metadata records, some matching by pii,
/// some by a differently formatted title.
pub fn random_filter_fixture<R: Rng>(
    rng: &mut R,
    max_segments: usize,
    max_records: usize,
) -> (Vec<SegmentPair>, BTreeMap<String, String>, Vec<DocMeta>) {
    let docs = rng.random_range(1..=60);
    let topics = ["Renal failure", "Acute asthma", "Heart failure", "Lyme disease", "Sepsis", "Gout"];
    let title_of = |d: usize| format!("{} in cohort {}", topics[d % topics.len()], d / 3);
    let mut titles = BTreeMap::new();
    for d in 0..docs {
        if d % 7 != 3 {
            titles.insert(format!("doc{d}"), title_of(d));
        }
    }
    let n_segments = rng.random_range(0..=max_segments);
    let segments = (0..n_segments)
        .map(|i| {
            let doc = if rng.random_bool(0.1) { None } else { Some(format!("doc{}", rng.random_range(0..docs))) };
            SegmentPair::new(format!("s{i}"), format!("t{i}"), "c", doc).unwrap()
        })
        .collect();
    let n_records = rng.random_range(0..=max_records);
    let records = (0..n_records)
        .map(|_| {
            let d = rng.random_range(0..docs + 20);
            let pii = match rng.random_range(0..3) {
                0 => Some(format!("doc{d}")),
                1 => Some(format!("S{d:04}")),
                _ => None,
            };
            let mut title = title_of(rng.random_range(0..docs + 20));
            if rng.random_bool(0.5) {
                title = format!("  {}.", title.to_uppercase());
            }
            DocMeta { pmid: None, pii, title, language: None }
        })
        .collect();
    (segments, titles, records)
}

pub fn distinct<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
    items.iter().cloned().collect()
}

/// Files for a synthetic desk-scale run, written into one directory.
pub struct SyntheticRun {
    pub rows: usize,
    pub duplicates: usize,
}

/// Writes `corpus.tsv` (`rows` lines, ten per document, including
/// `duplicates` exact repeats), `metadata.tsv` and `titles.tsv`, plus a
/// `config.json` running ingest, filter, dedup and partition with
/// `dev_size` held out. Targets are a word-for-word substitution of the
/// sources with one word in ten replaced at random.
pub fn write_synthetic_run(dir: &std::path::Path, rows: usize, dev_size: usize, seed: u64) -> SyntheticRun {
    use std::fmt::Write as _;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let vocab = 40;
    let translate = |i: usize| format!("e{}", (i * 7) % vocab);
    let mut corpus = String::new();
    let mut emitted: Vec<String> = Vec::new();
    let duplicates = rows / 40;
    for r in 0..rows {
        let doc = r / 10;
        let text = if r % 40 == 39 {
            emitted[rng.random_range(0..emitted.len())].clone()
        } else {
            let len = rng.random_range(4..=8);
            let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..vocab)).collect();
            let src: Vec<String> = ids.iter().map(|i| format!("f{i}")).collect();
            let tgt: Vec<String> = ids
                .iter()
                .map(|&i| translate(if rng.random_bool(0.1) { rng.random_range(0..vocab) } else { i }))
                .collect();
            format!("{}\t{}", src.join(" "), tgt.join(" "))
        };
        emitted.push(text.clone());
        let _ = writeln!(corpus, "{text}\tdoc{doc}");
    }
    std::fs::write(dir.join("corpus.tsv"), corpus).unwrap();
    let docs = rows.div_ceil(10);
    let mut titles = String::from("doc_id\ttitle\n");
    for d in 0..docs {
        let _ = writeln!(titles, "doc{d}\tStudy number {d} of synthetic outcomes");
    }
    std::fs::write(dir.join("titles.tsv"), titles).unwrap();
    // two documents by pii, two by a reformatted title
    let metadata = "pmid\tpii\ttitle\n\
        1\tdoc3\tUnrelated record\n\
        2\tdoc17\tAnother unrelated record\n\
        3\t\tSTUDY NUMBER 8 OF SYNTHETIC OUTCOMES.\n\
        4\tX999\tStudy  number 21 of synthetic outcomes\n";
    std::fs::write(dir.join("metadata.tsv"), metadata).unwrap();
    let config = serde_json::json!({
        "pair": "ENG-SPA",
        "seed": 42,
        "output_dir": "out",
        "corpora": [{"format": "tsv", "name": "synthetic", "path": "corpus.tsv"}],
        "metadata": ["metadata.tsv"],
        "doc_titles": "titles.tsv",
        "stages": ["ingest", "filter", "dedup", "partition"],
        "partition": {"dev_size": dev_size, "unit": "segment"}
    });
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config).unwrap()).unwrap();
    SyntheticRun { rows, duplicates }
}
