use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::smt::BaselineError;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
const HEADER: &str = "# biomt bigram-lm v1";

#[derive(Debug, Clone, Default, PartialEq)]
struct History {
    total: u64,
    next: HashMap<String, u64>,
}

/// Add-k smoothed bigram model:
/// `p(w|h) = (c(h,w) + k) / (c(h) + k·|V|)`, where `V` is the training
/// vocabulary plus `</s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    k: f64,
    vocab: BTreeSet<String>,
    histories: HashMap<String, History>,
}

pub fn train_bigram_lm<I, S>(sentences: I, k: f64) -> Result<LanguageModel, BaselineError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    if !(k > 0.0 && k.is_finite()) {
        return Err(BaselineError::InvalidSmoothing(k));
    }
    let mut lm = LanguageModel {
        k,
        vocab: BTreeSet::from([EOS.to_string()]),
        histories: HashMap::new(),
    };
    let mut any = false;
    for sentence in sentences {
        any = true;
        let tokens = sentence.as_ref();
        let mut prev = BOS;
        for w in tokens.iter().map(String::as_str).chain(std::iter::once(EOS)) {
            lm.observe(prev, w, 1);
            prev = w;
        }
        lm.vocab.extend(tokens.iter().cloned());
    }
    if !any {
        return Err(BaselineError::EmptyCorpus);
    }
    Ok(lm)
}

impl LanguageModel {
    fn observe(&mut self, h: &str, w: &str, n: u64) {
        let hist = self.histories.entry(h.to_string()).or_default();
        hist.total += n;
        *hist.next.entry(w.to_string()).or_insert(0) += n;
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Predictable words, including `</s>`.
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Histories seen in training, including `<s>`.
    pub fn histories(&self) -> impl Iterator<Item = &str> {
        self.histories.keys().map(String::as_str)
    }

    pub fn count(&self, h: &str, w: &str) -> u64 {
        self.histories
            .get(h)
            .and_then(|hist| hist.next.get(w))
            .copied()
            .unwrap_or(0)
    }

    /// Unseen histories fall back to the uniform distribution over `V`.
    /// Words outside `V` receive the same mass as an unseen bigram.
    pub fn prob(&self, h: &str, w: &str) -> f64 {
        let (pair, hist) = match self.histories.get(h) {
            Some(hist) => (hist.next.get(w).copied().unwrap_or(0), hist.total),
            None => (0, 0),
        };
        (pair as f64 + self.k) / (hist as f64 + self.k * self.vocab.len() as f64)
    }

    /// One header line carrying `k`, then `h<TAB>w<TAB>count` sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{HEADER}\tk={}\n", self.k);
        let sorted: BTreeMap<&String, BTreeMap<&String, &u64>> = self
            .histories
            .iter()
            .map(|(h, hist)| (h, hist.next.iter().collect()))
            .collect();
        for (h, next) in sorted {
            for (w, c) in next {
                let _ = writeln!(out, "{h}\t{w}\t{c}");
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, BaselineError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let k: f64 = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.strip_prefix("\tk="))
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| BaselineError::format(1, "unrecognised language-model header"))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(BaselineError::InvalidSmoothing(k));
        }
        let mut lm = LanguageModel {
            k,
            vocab: BTreeSet::from([EOS.to_string()]),
            histories: HashMap::new(),
        };
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let [h, w, c] = cols[..] else {
                return Err(BaselineError::format(i + 2, "expected three columns"));
            };
            let c: u64 = c.parse().map_err(|_| BaselineError::format(i + 2, "bad count"))?;
            lm.observe(h, w, c);
            lm.vocab.insert(w.to_string());
        }
        Ok(lm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn add_one_arithmetic() {
        let lm = train_bigram_lm([sent("a b")], 1.0).unwrap();
        assert_eq!(lm.vocab().len(), 3);
        assert_eq!(lm.prob("a", "b"), 0.5);
        // unseen bigram: (0 + 1) / (1 + 3)
        assert_eq!(lm.prob("a", "a"), 0.25);
        assert!(lm.prob("b", "a") > 0.0);
    }

    #[test]
    fn histories_normalise() {
        let lm = train_bigram_lm([sent("a b a"), sent("b b c"), sent("")], 0.3).unwrap();
        for h in lm.histories().chain(["never-seen"]) {
            let s: f64 = lm.vocab().iter().map(|w| lm.prob(h, w)).sum();
            assert!((s - 1.0).abs() < 1e-9, "{h}: {s}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(train_bigram_lm(Vec::<Vec<String>>::new(), 1.0), Err(BaselineError::EmptyCorpus)));
        assert!(matches!(train_bigram_lm([sent("a")], 0.0), Err(BaselineError::InvalidSmoothing(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let lm = train_bigram_lm([sent("x y z"), sent("y x")], 0.5).unwrap();
        let text = lm.to_tsv();
        assert!(text.starts_with("# biomt bigram-lm v1\tk=0.5\n<s>\tx\t1\n"));
        assert_eq!(LanguageModel::from_tsv(&text).unwrap(), lm);
    }
}
