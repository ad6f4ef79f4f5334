mod common;

use biomt::smt::{
    decode, model_score, train_bigram_lm, train_ibm1_tokens, DecoderWeights, LanguageModel, TokenPair, TranslationTable,
};
use biomt::Exec;
use common::{random_sentence, words};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bitext(seed: u64) -> Vec<TokenPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = rng.random_range(1..=15);
    let (fv, ev) = (rng.random_range(2..=12), rng.random_range(2..=12));
    (0..pairs)
        .map(|_| (random_sentence(&mut rng, fv, 1..=6), random_sentence(&mut rng, ev, 1..=6)))
        .map(|(f, e)| (f.into_iter().map(|w| format!("f{w}")).collect(), e))
        .collect()
}

fn toy() -> Vec<TokenPair> {
    [("la maison", "the house"), ("la maison bleue", "the blue house"), ("la fleur", "the flower")]
        .iter()
        .map(|(f, e)| (words(f), words(e)))
        .collect()
}

fn assert_tt_normalised(tt: &TranslationTable) {
    for f in tt.source_vocab() {
        let s: f64 = tt.candidates(f).iter().map(|(_, p)| p).sum();
        assert!((s - 1.0).abs() < 1e-9, "t(.|{f}) sums to {s}");
    }
}

fn assert_lm_normalised(lm: &LanguageModel) {
    for h in lm.histories().chain(["<never-seen>"]) {
        let s: f64 = lm.vocab().iter().map(|w| lm.prob(h, w)).sum();
        assert!((s - 1.0).abs() < 1e-9, "p(.|{h}) sums to {s}");
    }
}

#[test]
fn em_log_likelihood_never_decreases() {
    for seed in 0..50 {
        for use_null in [false, true] {
            let (_, ll) = train_ibm1_tokens(&random_bitext(seed), 12, use_null, Exec::Sequential).unwrap();
            assert_eq!(ll.len(), 12);
            for w in ll.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} then {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn la_aligns_to_the() {
    for iterations in 1..=20 {
        let (tt, _) = train_ibm1_tokens(&toy(), iterations, false, Exec::Sequential).unwrap();
        if tt.best("la") == Some("the") {
            return;
        }
    }
    panic!("t(e|la) never peaked at \"the\" within 20 iterations");
}

#[test]
fn first_iteration_by_hand() {
    // Uniform start over co-occurring words: t(.|la) = 1/4, t(.|maison) =
    // t(.|bleue) = 1/3, t(.|fleur) = 1/2. Posterior share of "la" for each
    // target word, per sentence:
    let s1 = 0.25 / (0.25 + 1.0 / 3.0);
    let s2 = 0.25 / (0.25 + 2.0 / 3.0);
    let s3 = 0.25 / (0.25 + 0.5);
    let (tt, _) = train_ibm1_tokens(&toy(), 1, false, Exec::Sequential).unwrap();
    let (c_the_la, c_house_la, c_blue_la, c_flower_la) = (s1 + s2 + s3, s1 + s2, s2, s3);
    let total = c_the_la + c_house_la + c_blue_la + c_flower_la;
    assert!((tt.prob("the", "la") - c_the_la / total).abs() < 1e-12);
    assert!((tt.prob("flower", "la") - c_flower_la / total).abs() < 1e-12);
}

#[test]
fn strategies_agree_bit_for_bit() {
    let corpus: Vec<TokenPair> = (0..40).flat_map(random_bitext).collect();
    let a = train_ibm1_tokens(&corpus, 5, true, Exec::Sequential).unwrap();
    let b = train_ibm1_tokens(&corpus, 5, true, Exec::Parallel).unwrap();
    assert_eq!(a.1, b.1);
    assert_eq!(a.0.to_tsv(), b.0.to_tsv());
}

#[test]
fn model_files_round_trip() {
    let (tt, _) = train_ibm1_tokens(&toy(), 5, true, Exec::Sequential).unwrap();
    let back = TranslationTable::from_tsv(&tt.to_tsv()).unwrap();
    assert_eq!(back.to_tsv(), tt.to_tsv());
    assert!(back.includes_null());
}

/// Highest-scoring output among every combination of options, by
/// enumeration.
fn exhaustive_best(source: &[String], tt: &TranslationTable, lm: &LanguageModel, w: &DecoderWeights) -> f64 {
    let options: Vec<Vec<String>> = source
        .iter()
        .map(|f| {
            if tt.knows_source(f) {
                tt.candidates(f).iter().take(w.max_candidates).map(|(e, _)| e.clone()).collect()
            } else {
                vec![f.clone()]
            }
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; options.len()];
    loop {
        let out: Vec<String> = idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
        best = best.max(model_score(source, &out, tt, lm, w));
        let mut k = 0;
        loop {
            if k == idx.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn trained(seed: u64) -> (Vec<TokenPair>, TranslationTable, LanguageModel) {
    let corpus = random_bitext(seed);
    let (tt, _) = train_ibm1_tokens(&corpus, 4, false, Exec::Sequential).unwrap();
    let lm = train_bigram_lm(corpus.iter().map(|(_, e)| e), 0.5).unwrap();
    (corpus, tt, lm)
}

#[test]
fn wide_beam_is_exact_on_toy() {
    let (tt, _) = train_ibm1_tokens(&toy(), 10, false, Exec::Sequential).unwrap();
    let lm = train_bigram_lm(toy().iter().map(|(_, e)| e), 0.1).unwrap();
    let w = DecoderWeights { beam_width: 50, ..Default::default() };
    let src = words("la maison");
    let out = decode(&src, &tt, &lm, &w);
    assert_eq!(out, words("the house"));
    assert!((model_score(&src, &out, &tt, &lm, &w) - exhaustive_best(&src, &tt, &lm, &w)).abs() < 1e-9);
}

#[test]
fn normalisation_on_fixtures() {
    let (tt, _) = train_ibm1_tokens(&toy(), 7, true, Exec::Sequential).unwrap();
    assert_tt_normalised(&tt);
    assert_lm_normalised(&train_bigram_lm(toy().iter().map(|(_, e)| e), 0.01).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_sum_to_one(seed in any::<u64>(), iters in 1usize..8, null in any::<bool>(), k in 0.001f64..3.0) {
        let corpus = random_bitext(seed);
        let (tt, _) = train_ibm1_tokens(&corpus, iters, null, Exec::Sequential).unwrap();
        assert_tt_normalised(&tt);
        assert_lm_normalised(&train_bigram_lm(corpus.iter().map(|(_, e)| e), k).unwrap());
    }

    #[test]
    fn exact_beam_matches_enumeration(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (corpus, tt, lm) = trained(seed);
        let src = &corpus[pick.index(corpus.len())].0;
        let w = DecoderWeights { beam_width: 64, max_candidates: 3, ..Default::default() };
        let out = decode(src, &tt, &lm, &w);
        prop_assert!((model_score(src, &out, &tt, &lm, &w) - exhaustive_best(src, &tt, &lm, &w)).abs() < 1e-9);
    }

    #[test]
    fn wider_beam_never_scores_lower(seed in any::<u64>(), width in 1usize..6) {
        let (corpus, tt, lm) = trained(seed);
        let narrow = DecoderWeights { beam_width: width, max_candidates: 4, ..Default::default() };
        let wide = DecoderWeights { beam_width: width + 1, ..narrow };
        for (src, _) in &corpus {
            let a = model_score(src, &decode(src, &tt, &lm, &narrow), &tt, &lm, &narrow);
            let b = model_score(src, &decode(src, &tt, &lm, &wide), &tt, &lm, &wide);
            prop_assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn width_one_is_greedy(seed in any::<u64>()) {
        let (corpus, tt, lm) = trained(seed);
        let w = DecoderWeights { beam_width: 1, max_candidates: 4, ..Default::default() };
        for (src, _) in &corpus {
            let mut prev = "<s>".to_string();
            let mut greedy = Vec::new();
            for f in src {
                let options: Vec<(String, f64)> = if tt.knows_source(f) {
                    tt.candidates(f).iter().take(4).map(|(e, p)| (e.clone(), p.max(1e-12).ln())).collect()
                } else {
                    vec![(f.clone(), 0.0)]
                };
                let (e, _) = options
                    .into_iter()
                    .map(|(e, ln_t)| {
                        let s = ln_t + lm.prob(&prev, &e).max(1e-12).ln();
                        (e, s)
                    })
                    .fold(None::<(String, f64)>, |best, (e, s)| match best {
                        Some((be, bs)) if bs > s || (bs == s && be <= e) => Some((be, bs)),
                        _ => Some((e, s)),
                    })
                    .unwrap();
                prev = e.clone();
                greedy.push(e);
            }
            prop_assert_eq!(decode(src, &tt, &lm, &w), greedy);
        }
    }
}
