//! Desk-scale statistical baseline: IBM Model 1 lexical translation, an
//! add-k bigram language model and a monotone beam decoder that copies
//! unknown source words through.

mod decoder;
mod ibm1;
mod lm;

pub use decoder::{decode, decode_corpus, model_score, DecoderWeights, PROB_FLOOR};
pub use ibm1::{train_ibm1_tokens, TranslationTable, NULL_WORD};
pub use lm::{train_bigram_lm, LanguageModel, BOS, EOS};

use thiserror::Error;

use crate::bleu::{corpus_bleu_with, tokenize_eval, BleuError, BleuReport, Smoothing, DEFAULT_MAX_ORDER};
use crate::exec::Exec;
use crate::model::SegmentPair;

/// Tokenised (source, target) sentence pair.
pub type TokenPair = (Vec<String>, Vec<String>);

/// Tokenised sentences, one per line of a side.
pub type Sentences = Vec<Vec<String>>;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("iteration count must be positive")]
    ZeroIterations,
    #[error("sentence pair with an empty side")]
    EmptySentence,
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("invalid decoder weights: {0}")]
    InvalidWeights(String),
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Bleu(#[from] BleuError),
}

impl BaselineError {
    pub(crate) fn format(line: usize, reason: &str) -> Self {
        BaselineError::Format {
            line,
            reason: reason.to_string(),
        }
    }
}

/// Evaluation tokenisation of both sides, case preserved.
pub fn tokenize_bitext(bitext: &[SegmentPair]) -> Vec<TokenPair> {
    bitext
        .iter()
        .map(|s| (tokenize_eval(s.source_text(), false), tokenize_eval(s.target_text(), false)))
        .collect()
}

/// Trains Model 1 on a segment bitext. See [`train_ibm1_tokens`].
pub fn train_ibm1(
    bitext: &[SegmentPair],
    iterations: usize,
    use_null: bool,
) -> Result<(TranslationTable, Vec<f64>), BaselineError> {
    train_ibm1_tokens(&tokenize_bitext(bitext), iterations, use_null, Exec::default())
}

/// Decodes every source side and scores it against the target side with
/// add-one smoothed 4-gram BLEU.
pub fn evaluate_baseline(
    test: &[SegmentPair],
    tt: &TranslationTable,
    lm: &LanguageModel,
    w: &DecoderWeights,
    exec: Exec,
) -> Result<BleuReport, BaselineError> {
    let (hyps, refs) = translate_test_set(test, tt, lm, w, exec)?;
    Ok(corpus_bleu_with(&hyps, &refs, DEFAULT_MAX_ORDER, Smoothing::AddOneFromOrder2, exec)?)
}

/// (hypotheses, references) for a test bitext.
pub fn translate_test_set(
    test: &[SegmentPair],
    tt: &TranslationTable,
    lm: &LanguageModel,
    w: &DecoderWeights,
    exec: Exec,
) -> Result<(Sentences, Sentences), BaselineError> {
    if test.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let (sources, refs): (Vec<_>, Vec<_>) = tokenize_bitext(test).into_iter().unzip();
    let hyps = decode_corpus(&sources, tt, lm, w, exec)?;
    Ok((hyps, refs))
}

/// BLEU of the hypotheses paired with the wrong references (hypothesis `i`
/// against reference `i + 1`, cyclically): a floor any real system should
/// clear.
pub fn rotated_control_bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<BleuReport, BaselineError> {
    if hyps.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let mut rotated = refs.to_vec();
    rotated.rotate_left(1);
    Ok(corpus_bleu_with(hyps, &rotated, DEFAULT_MAX_ORDER, Smoothing::AddOneFromOrder2, Exec::default())?)
}
