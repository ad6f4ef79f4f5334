use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;

use biomt::ingest::{parse_mrconso, ConceptAtom};
use biomt::model::{LangPair, LanguageTag};
use biomt::umls::{extract_parallel_concepts, extract_parallel_concepts_with, ExtractionReport, TermPair};
use biomt::Exec;
use proptest::prelude::*;

const FIXTURE: &str = include_str!("../fixtures/mrconso_sample.rrf");

fn pair(s: &str) -> LangPair {
    s.parse().unwrap()
}

fn atoms(text: &str, p: &LangPair) -> Vec<ConceptAtom> {
    let keep: BTreeSet<LanguageTag> = [p.source().clone(), p.target().clone()].into();
    parse_mrconso(Cursor::new(text.as_bytes()), keep).map(Result::unwrap).collect()
}

fn triples(pairs: &[TermPair]) -> Vec<(&str, &str, &str)> {
    pairs
        .iter()
        .map(|p| (p.cui.as_str(), p.source_term.as_str(), p.target_term.as_str()))
        .collect()
}

#[test]
fn fixture_has_fifty_rows() {
    assert_eq!(FIXTURE.lines().count(), 50);
}

#[test]
fn english_spanish_fixture() {
    let p = pair("ENG-SPA");
    let keep: BTreeSet<LanguageTag> = [p.source().clone(), p.target().clone()].into();
    let mut reader = parse_mrconso(Cursor::new(FIXTURE.as_bytes()), keep);
    let atoms: Vec<ConceptAtom> = reader.by_ref().map(Result::unwrap).collect();
    let counts = reader.counts();
    assert_eq!((counts.lines, counts.malformed), (50, 4));
    let malformed_lines: Vec<u64> = reader.issues().issues.iter().map(|i| i.line).collect();
    assert_eq!(malformed_lines, vec![28, 42, 43, 44]);

    let (pairs, report) = extract_parallel_concepts(atoms, &p);
    assert_eq!(
        triples(&pairs),
        vec![
            ("C0000001", "Heart", "Corazón"),
            ("C0000004", "Kidney", "Riñón"),
            ("C0000005", "Hepatopathy", "Hepatopatía"),
            ("C0000006", "Arterial pressure", "Presión arterial"),
            ("C0000010", "Fever", "Fiebre"),
            ("C0000011", "Headache", "Cefalea"),
            ("C0000012", "Diabetes Mellitus", "Diabetes mellitus"),
            ("C0000013", "Skin structure", "Piel"),
            ("C0000017", "Anemia", "Anemia"),
        ]
    );
    assert_eq!(
        report,
        ExtractionReport {
            concepts_seen: 13,
            pairs_emitted: 9,
            concepts_missing_source: 1,
            concepts_missing_target: 3,
        }
    );
}

#[test]
fn english_portuguese_fixture() {
    let p = pair("ENG-POR");
    let (pairs, _) = extract_parallel_concepts(atoms(FIXTURE, &p), &p);
    assert_eq!(
        triples(&pairs),
        vec![
            ("C0000001", "Heart", "Coração"),
            ("C0000007", "Pancreas", "Pâncreas"),
            ("C0000013", "Skin structure", "Pele"),
            ("C0000017", "Anemia", "Anemia"),
        ]
    );
}

/// Per CUI and side, the atom that beats every other under the stated
/// preference rules, found by pairwise comparison.
fn oracle(atoms: &[ConceptAtom], p: &LangPair) -> Vec<(String, String, String)> {
    let beats = |a: &ConceptAtom, b: &ConceptAtom| -> bool {
        let rank = |x: &ConceptAtom| [x.ts == "P", x.ispref == 'Y', x.suppress == 'N'];
        if rank(a) != rank(b) {
            // true sorts before false in preference
            return rank(a).iter().zip(rank(b)).find(|(x, y)| **x != *y).map(|(x, _)| *x).unwrap();
        }
        (&a.sui, &a.aui, &a.str_text) <= (&b.sui, &b.aui, &b.str_text)
    };
    let pick = |cui: &str, lat: &LanguageTag| -> Option<String> {
        let side: Vec<&ConceptAtom> = atoms.iter().filter(|a| a.cui == cui && &a.lat == lat).collect();
        side.iter()
            .find(|a| side.iter().all(|b| beats(a, b)))
            .map(|a| a.str_text.clone())
    };
    let cuis: BTreeSet<&str> = atoms.iter().map(|a| a.cui.as_str()).collect();
    cuis.into_iter()
        .filter_map(|c| Some((c.to_string(), pick(c, p.source())?, pick(c, p.target())?)))
        .collect()
}

fn arb_atom() -> impl Strategy<Value = ConceptAtom> {
    (
        0u8..8,
        prop::sample::select(vec!["ENG", "SPA", "POR"]),
        prop::sample::select(vec!["P", "S"]),
        prop::sample::select(vec!['Y', 'N']),
        0u8..4,
        0u8..4,
        prop::sample::select(vec!['N', 'O', 'E']),
        0u8..3,
    )
        .prop_map(|(c, lat, ts, ispref, sui, aui, suppress, s)| ConceptAtom {
            cui: format!("C{c:07}"),
            lat: LanguageTag::parse(lat).unwrap(),
            ts: ts.to_string(),
            ispref,
            sui: format!("S{sui}"),
            aui: format!("A{aui}"),
            sab: "SRC".into(),
            str_text: format!("{lat}-{c}-{s}"),
            suppress,
        })
}

proptest! {
    #[test]
    fn matches_pairwise_oracle(list in prop::collection::vec(arb_atom(), 0..80)) {
        let p = pair("ENG-SPA");
        let (pairs, _) = extract_parallel_concepts(list.clone(), &p);
        let got: Vec<(String, String, String)> =
            pairs.into_iter().map(|t| (t.cui, t.source_term, t.target_term)).collect();
        prop_assert_eq!(got, oracle(&list, &p));
    }

    #[test]
    fn permutation_invariant_and_one_per_cui(order in Just((0..50usize).collect::<Vec<_>>()).prop_shuffle()) {
        let p = pair("ENG-SPA");
        let lines: Vec<&str> = FIXTURE.lines().collect();
        let shuffled: String = order.iter().map(|&i| format!("{}\n", lines[i])).collect();
        let (base, base_report) = extract_parallel_concepts(atoms(FIXTURE, &p), &p);
        let (got, report) = extract_parallel_concepts(atoms(&shuffled, &p), &p);
        prop_assert_eq!(&got, &base);
        prop_assert_eq!(report, base_report);
        let per_cui: BTreeMap<&str, usize> = got.iter().fold(BTreeMap::new(), |mut m, t| {
            *m.entry(t.cui.as_str()).or_default() += 1;
            m
        });
        prop_assert!(per_cui.values().all(|&n| n == 1));
    }

    #[test]
    fn sharded_matches_streaming(list in prop::collection::vec(arb_atom(), 0..200)) {
        let p = pair("ENG-POR");
        let streamed = extract_parallel_concepts(list.clone(), &p);
        prop_assert_eq!(&extract_parallel_concepts_with(&list, &p, Exec::Sequential), &streamed);
        prop_assert_eq!(&extract_parallel_concepts_with(&list, &p, Exec::Parallel), &streamed);
    }
}
