//! Multinomial Naive Bayes with additive smoothing, in log space.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::text::{vectorize_text, CountVector, Vocabulary};

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct NaiveBayesModel {
    vocabulary: Vocabulary,
    class_log_prior: [f64; 2],
    token_log_likelihood: [Vec<f64>; 2],
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocabulary: Vocabulary,
    class_log_prior: PerLabel<f64>,
    token_log_likelihood: PerLabel<Vec<f64>>,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct PerLabel<T> {
    negative: T,
    positive: T,
}

impl From<NaiveBayesModel> for ModelFile {
    fn from(m: NaiveBayesModel) -> Self {
        let [ln, lp] = m.token_log_likelihood;
        ModelFile {
            vocabulary: m.vocabulary,
            class_log_prior: PerLabel {
                negative: m.class_log_prior[0],
                positive: m.class_log_prior[1],
            },
            token_log_likelihood: PerLabel {
                negative: ln,
                positive: lp,
            },
            alpha: m.alpha,
        }
    }
}

impl TryFrom<ModelFile> for NaiveBayesModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let v = f.vocabulary.len();
        if f.token_log_likelihood.negative.len() != v || f.token_log_likelihood.positive.len() != v {
            return Err(Error::invalid("likelihood arrays do not match vocabulary size"));
        }
        if f.alpha.is_nan() || f.alpha <= 0.0 {
            return Err(Error::invalid("alpha must be positive"));
        }
        Ok(NaiveBayesModel {
            vocabulary: f.vocabulary,
            class_log_prior: [f.class_log_prior.negative, f.class_log_prior.positive],
            token_log_likelihood: [f.token_log_likelihood.negative, f.token_log_likelihood.positive],
            alpha: f.alpha,
        })
    }
}

impl NaiveBayesModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn class_log_prior(&self, label: Label) -> f64 {
        self.class_log_prior[label.index()]
    }

    pub fn token_log_likelihood(&self, label: Label) -> &[f64] {
        &self.token_log_likelihood[label.index()]
    }
}

pub fn fit_mnb(train: &Corpus, vocab: &Vocabulary, alpha: f64) -> Result<NaiveBayesModel> {
    fit_mnb_with(train, vocab, alpha, Execution::default())
}

/// `log P(c) = ln(N_c / N)` and
/// `log P(t | c) = ln((count(t, c) + alpha) / (tokens(c) + alpha * V))`.
pub fn fit_mnb_with(train: &Corpus, vocab: &Vocabulary, alpha: f64, exec: Execution) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if vocab.is_empty() {
        return Err(Error::invalid("vocabulary is empty"));
    }
    if train.labels().len() != 2 {
        return Err(Error::invalid("training corpus must contain both Positive and Negative reviews"));
    }
    let v = vocab.len();
    let partials = exec::map_chunks(exec, train.reviews(), 256, |chunk| {
        let mut counts = [vec![0u64; v], vec![0u64; v]];
        for review in chunk {
            let row = &mut counts[review.label().index()];
            for &(id, c) in vectorize_text(review.text(), vocab).entries() {
                row[id as usize] += u64::from(c);
            }
        }
        counts
    });
    let mut counts = [vec![0u64; v], vec![0u64; v]];
    for part in partials {
        for (acc, p) in counts.iter_mut().zip(part) {
            for (a, x) in acc.iter_mut().zip(p) {
                *a += x;
            }
        }
    }

    let n = train.len() as f64;
    let class_log_prior = Label::ALL.map(|l| (train.count(l) as f64 / n).ln());
    let token_log_likelihood = counts.map(|row| {
        let total: u64 = row.iter().sum();
        let denom = (total as f64 + alpha * v as f64).ln();
        row.iter().map(|&c| (c as f64 + alpha).ln() - denom).collect()
    });
    Ok(NaiveBayesModel {
        vocabulary: vocab.clone(),
        class_log_prior,
        token_log_likelihood,
        alpha,
    })
}

/// Unnormalized log joint `log P(c) + Σ count(t) log P(t | c)`, indexed by
/// `Label::index`.
pub fn predict_log_posteriors(model: &NaiveBayesModel, doc: &CountVector) -> Result<[f64; 2]> {
    if doc.vocabulary_size() != model.vocabulary.len() {
        return Err(Error::invalid(format!(
            "document has vocabulary size {}, model has {}",
            doc.vocabulary_size(),
            model.vocabulary.len()
        )));
    }
    Ok(Label::ALL.map(|l| {
        let ll = &model.token_log_likelihood[l.index()];
        doc.entries()
            .iter()
            .fold(model.class_log_prior[l.index()], |acc, &(id, c)| {
                acc + f64::from(c) * ll[id as usize]
            })
    }))
}

/// Exact ties go to Negative.
pub fn decide(scores: [f64; 2]) -> Label {
    if scores[Label::Positive.index()] > scores[Label::Negative.index()] {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn predict(model: &NaiveBayesModel, doc: &CountVector) -> Result<Label> {
    predict_log_posteriors(model, doc).map(decide)
}

pub fn predict_text(model: &NaiveBayesModel, text: &str) -> Label {
    let doc = vectorize_text(text, &model.vocabulary);
    predict(model, &doc).expect("vectorized against the model's own vocabulary")
}

pub fn predict_corpus(model: &NaiveBayesModel, corpus: &Corpus, exec: Execution) -> Vec<Label> {
    exec::map_indexed(exec, corpus.reviews(), |_, r| predict_text(model, r.text()))
}
