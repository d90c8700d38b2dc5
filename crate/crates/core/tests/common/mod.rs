#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use augbench::corpus::{self, Corpus, Format, Label, LabeledReview, Provenance};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_corpus() -> Corpus {
    let file = std::fs::File::open(fixture("pizza_reviews.csv")).unwrap();
    corpus::load_corpus(file, Format::Csv).unwrap().corpus
}

pub fn labeled(items: &[(String, Label)]) -> Corpus {
    Corpus::new(
        items
            .iter()
            .map(|(t, l)| LabeledReview::new(t.clone(), *l, Provenance::Genuine).unwrap())
            .collect(),
    )
}

/// Naive n-gram enumeration over whitespace-separated lowercase documents.
pub fn brute_ngrams(docs: &[Vec<String>], n: usize) -> BTreeMap<Vec<String>, u64> {
    let mut out = BTreeMap::new();
    for doc in docs {
        if doc.len() < n {
            continue;
        }
        for start in 0..=doc.len() - n {
            let mut gram = Vec::with_capacity(n);
            for k in 0..n {
                gram.push(doc[start + k].clone());
            }
            *out.entry(gram).or_insert(0) += 1;
        }
    }
    out
}

/// Direct Multinomial NB joint probability P(c) * Π P(t|c)^count, computed
/// from raw token lists without the library's vectorizer.
pub struct BruteNb {
    pub vocab: Vec<String>,
    pub docs: Vec<(Vec<String>, Label)>,
    pub alpha: f64,
}

impl BruteNb {
    pub fn joint(&self, doc: &[String], label: Label) -> f64 {
        let n = self.docs.len() as f64;
        let n_c = self.docs.iter().filter(|(_, l)| *l == label).count() as f64;
        let total_c: usize = self
            .docs
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(d, _)| d.iter().filter(|t| self.vocab.contains(t)).count())
            .sum();
        let v = self.vocab.len() as f64;
        let mut p = n_c / n;
        for tok in doc {
            if !self.vocab.contains(tok) {
                continue;
            }
            let count = self
                .docs
                .iter()
                .filter(|(_, l)| *l == label)
                .map(|(d, _)| d.iter().filter(|t| *t == tok).count())
                .sum::<usize>() as f64;
            p *= (count + self.alpha) / (total_c as f64 + self.alpha * v);
        }
        p
    }
}
