//! Tokenization and bag-of-words vectors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Lowercases, turns every character other than a letter, digit or
/// apostrophe into a space, and splits on whitespace.
///
/// ```
/// assert_eq!(augbench::text::tokenize("wouldn't share."), ["wouldn't", "share"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphabetic() || c.is_numeric() || c == '\'' {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Dense token ids in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Fits over documents in order; ids follow first occurrence.
    pub fn fit<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Vocabulary::default();
        for doc in docs {
            for tok in tokenize(doc) {
                vocab.insert(tok);
            }
        }
        vocab
    }

    /// Returns the id of `token`, adding it if unseen.
    pub fn insert(&mut self, token: String) -> u32 {
        if let Some(&id) = self.ids.get(&token) {
            return id;
        }
        let id = u32::try_from(self.tokens.len()).expect("vocabulary exceeds u32 ids");
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for tok in tokens {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid vocabulary token {tok:?}")));
            }
            let expected = vocab.len();
            if vocab.insert(tok.clone()) as usize != expected {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(vocab)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

pub fn build_vocabulary(corpus: &Corpus) -> Result<Vocabulary> {
    let vocab = Vocabulary::fit(corpus.texts());
    if vocab.is_empty() {
        return Err(Error::invalid("corpus contains no tokens"));
    }
    Ok(vocab)
}

/// Sparse token counts over a vocabulary, sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountVector {
    vocabulary_size: usize,
    entries: Vec<(u32, u32)>,
}

impl CountVector {
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary_size
    }

    /// `(id, count)` pairs, ids ascending, counts ≥ 1.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> u32 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map_or(0, |k| self.entries[k].1)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Counts in-vocabulary tokens; unknown tokens are dropped.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> CountVector {
    let mut ids: Vec<u32> = tokens.iter().filter_map(|t| vocab.id(t.as_ref())).collect();
    ids.sort_unstable();
    let mut entries: Vec<(u32, u32)> = Vec::new();
    for id in ids {
        match entries.last_mut() {
            Some((last, count)) if *last == id => *count += 1,
            _ => entries.push((id, 1)),
        }
    }
    CountVector {
        vocabulary_size: vocab.len(),
        entries,
    }
}

pub fn vectorize_text(text: &str, vocab: &Vocabulary) -> CountVector {
    vectorize(&tokenize(text), vocab)
}
