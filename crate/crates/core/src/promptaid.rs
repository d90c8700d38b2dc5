//! N-gram frequency tables, percentile banding, and prompt composition.
//!
//! Bands use a min-max normalized count percentile:
//! `p = 100 * (count - min) / (max - min)`, or 100 when every count is equal.
//! An n-gram belongs to the band with `lo <= p <= hi`; when two bands share
//! an endpoint the higher band owns it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::seed;
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRow {
    pub ngram: Vec<String>,
    pub count: u64,
}

impl NgramRow {
    pub fn phrase(&self) -> String {
        self.ngram.join(" ")
    }
}

/// Rows sorted by count descending, ties lexicographically ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramTable {
    pub order: usize,
    pub rows: Vec<NgramRow>,
}

impl NgramTable {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, top: usize) -> String {
        let mut out = String::new();
        let width = self
            .rows
            .iter()
            .take(top)
            .map(|r| r.phrase().chars().count())
            .max()
            .unwrap_or(0)
            .max(5);
        let _ = writeln!(out, "{:<width$}  count", "ngram");
        for row in self.rows.iter().take(top) {
            let _ = writeln!(out, "{:<width$}  {}", row.phrase(), row.count);
        }
        out
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=3).contains(&order) {
        Ok(())
    } else {
        Err(Error::invalid(format!("n-gram order must be 1, 2 or 3, got {order}")))
    }
}

pub fn count_ngrams(corpus: &Corpus, order: usize) -> Result<NgramTable> {
    count_ngrams_with(corpus, order, Execution::default())
}

/// Counts windows of `order` tokens within each review (windows never span
/// two reviews).
pub fn count_ngrams_with(corpus: &Corpus, order: usize, exec: Execution) -> Result<NgramTable> {
    check_order(order)?;
    if corpus.is_empty() {
        return Err(Error::invalid("cannot count n-grams of an empty corpus"));
    }
    let partials = exec::map_chunks(exec, corpus.reviews(), 64, |chunk| {
        let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
        for review in chunk {
            let tokens = tokenize(review.text());
            for window in tokens.windows(order) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
        counts
    });
    let mut merged: HashMap<Vec<String>, u64> = HashMap::new();
    for part in partials {
        for (k, v) in part {
            *merged.entry(k).or_insert(0) += v;
        }
    }
    let mut rows: Vec<NgramRow> = merged
        .into_iter()
        .map(|(ngram, count)| NgramRow { ngram, count })
        .collect();
    rows.sort_unstable_by(|a, b| b.count.cmp(&a.count).then_with(|| a.ngram.cmp(&b.ngram)));
    Ok(NgramTable { order, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        BandSpec {
            label: format!("{lo}% - {hi}%"),
            lo,
            hi,
        }
    }

    /// `80-100`, `50-80`, `25-50`.
    pub fn defaults() -> Vec<BandSpec> {
        vec![
            BandSpec::new(80.0, 100.0),
            BandSpec::new(50.0, 80.0),
            BandSpec::new(25.0, 50.0),
        ]
    }

    /// Parses a comma separated list such as `80-100,50-80,25-50`.
    pub fn parse_list(s: &str) -> Result<Vec<BandSpec>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(BandSpec::from_str)
            .collect()
    }

    fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

impl FromStr for BandSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("band `{s}` is not of the form LO-HI"));
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        let lo: f64 = lo.trim().trim_end_matches('%').parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().trim_end_matches('%').parse().map_err(|_| bad())?;
        Ok(BandSpec::new(lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub ngrams: Vec<NgramRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedTable {
    pub order: usize,
    pub bands: Vec<Band>,
    #[serde(skip)]
    pub source: Option<NgramTable>,
}

impl BandedTable {
    /// The band with the highest upper bound.
    pub fn top_band(&self) -> Option<&Band> {
        self.bands
            .iter()
            .max_by(|a, b| a.hi.total_cmp(&b.hi).then(a.lo.total_cmp(&b.lo)))
    }

    pub fn render(&self, top: usize) -> String {
        let mut out = String::new();
        for band in &self.bands {
            let shown: Vec<String> = band.ngrams.iter().take(top).map(|r| format!("\"{}\"", r.phrase())).collect();
            let _ = writeln!(out, "{:>12}  {}", band.label, shown.join(", "));
        }
        out
    }
}

pub fn percentile(count: u64, min: u64, max: u64) -> f64 {
    if max > min {
        100.0 * (count - min) as f64 / (max - min) as f64
    } else {
        100.0
    }
}

pub fn band_table(table: &NgramTable, bands: &[BandSpec]) -> Result<BandedTable> {
    if table.is_empty() {
        return Err(Error::invalid("cannot band an empty n-gram table"));
    }
    for b in bands {
        if !(0.0..=100.0).contains(&b.lo) || !(0.0..=100.0).contains(&b.hi) || b.lo >= b.hi {
            return Err(Error::invalid(format!(
                "band `{}` must satisfy 0 <= lo < hi <= 100",
                b.label
            )));
        }
    }
    for (i, a) in bands.iter().enumerate() {
        for b in &bands[i + 1..] {
            if a.lo < b.hi && b.lo < a.hi {
                return Err(Error::invalid(format!(
                    "bands `{}` and `{}` overlap",
                    a.label, b.label
                )));
            }
        }
    }

    let max = table.rows.iter().map(|r| r.count).max().unwrap_or(0);
    let min = table.rows.iter().map(|r| r.count).min().unwrap_or(0);
    // Try bands highest first so a shared endpoint lands in the upper band.
    let mut by_height: Vec<usize> = (0..bands.len()).collect();
    by_height.sort_by(|&a, &b| bands[b].lo.total_cmp(&bands[a].lo));

    let mut out: Vec<Band> = bands
        .iter()
        .map(|b| Band {
            label: b.label.clone(),
            lo: b.lo,
            hi: b.hi,
            ngrams: Vec::new(),
        })
        .collect();
    for row in &table.rows {
        let p = percentile(row.count, min, max);
        if let Some(&i) = by_height.iter().find(|&&i| bands[i].contains(p)) {
            out[i].ngrams.push(row.clone());
        }
    }
    Ok(BandedTable {
        order: table.order,
        bands: out,
        source: Some(table.clone()),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PromptRecord")]
pub struct Prompt {
    text: String,
    class_label: Label,
}

#[derive(Deserialize)]
struct PromptRecord {
    text: String,
    class_label: Label,
}

impl TryFrom<PromptRecord> for Prompt {
    type Error = Error;

    fn try_from(r: PromptRecord) -> Result<Self> {
        Prompt::new(r.text, r.class_label)
    }
}

impl Prompt {
    pub fn new(text: impl Into<String>, class_label: Label) -> Result<Self> {
        let text = text.into();
        if tokenize(&text).is_empty() {
            return Err(Error::invalid(format!("prompt {text:?} has no tokens")));
        }
        Ok(Prompt { text, class_label })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn class_label(&self) -> Label {
        self.class_label
    }
}

/// Reads `{text, class_label}` JSONL.
pub fn read_prompts<R: std::io::Read>(source: R) -> Result<Vec<Prompt>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let prompt: Prompt = serde_json::from_str(&line)
            .map_err(|e| Error::record(i + 1, "prompt", e.to_string()))?;
        out.push(prompt);
    }
    Ok(out)
}

pub fn write_prompts<W: std::io::Write>(prompts: &[Prompt], mut out: W) -> Result<()> {
    for p in prompts {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Draws without replacement, refilling from a fresh shuffle when empty.
struct Pool<'a> {
    items: &'a [NgramRow],
    queue: Vec<&'a NgramRow>,
}

impl<'a> Pool<'a> {
    fn new(items: &'a [NgramRow]) -> Self {
        Pool {
            items,
            queue: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn draw(&mut self, rng: &mut seed::Rng) -> &'a NgramRow {
        if self.queue.is_empty() {
            self.queue = self.items.iter().collect();
            self.queue.shuffle(rng);
            self.queue.reverse();
        }
        self.queue.pop().expect("pool is non-empty")
    }
}

/// Composes `k` prompts from the top bands of the given tables.
///
/// Patterns rotate through: a trigram alone, a bigram followed by a word,
/// and a trigram followed by a bigram. A pattern whose bands are empty is
/// skipped. If no pattern is possible the non-empty top band is used alone.
pub fn suggest_prompts(tables: &[BandedTable], class_label: Label, k: usize, seed: u64) -> Result<Vec<Prompt>> {
    if k == 0 {
        return Err(Error::invalid("prompt count must be positive"));
    }
    let top = |order: usize| -> &[NgramRow] {
        tables
            .iter()
            .filter(|t| t.order == order)
            .find_map(|t| t.top_band())
            .map_or(&[][..], |b| b.ngrams.as_slice())
    };
    let mut pools = [Pool::new(top(1)), Pool::new(top(2)), Pool::new(top(3))];
    if pools.iter().all(Pool::is_empty) {
        return Err(Error::invalid("all top bands are empty; nothing to compose prompts from"));
    }
    const PATTERNS: [&[usize]; 3] = [&[3], &[2, 1], &[3, 2]];
    let feasible: Vec<&[usize]> = PATTERNS
        .iter()
        .copied()
        .filter(|p| p.iter().all(|&o| !pools[o - 1].is_empty()))
        .collect();
    let fallback: Vec<&[usize]> = [&[3usize][..], &[2], &[1]]
        .into_iter()
        .filter(|p| !pools[p[0] - 1].is_empty())
        .take(1)
        .collect();
    let patterns = if feasible.is_empty() { fallback } else { feasible };

    let mut rng = seed::rng(seed);
    let mut prompts = Vec::with_capacity(k);
    for i in 0..k {
        let pattern = patterns[i % patterns.len()];
        let parts: Vec<String> = pattern
            .iter()
            .map(|&o| pools[o - 1].draw(&mut rng).phrase())
            .collect();
        prompts.push(Prompt::new(parts.join(" "), class_label)?);
    }
    Ok(prompts)
}

/// Counts orders 1..=3 for one class corpus and bands each table.
pub fn analyze_class(corpus: &Corpus, bands: &[BandSpec], exec: Execution) -> Result<Vec<BandedTable>> {
    (1..=3)
        .filter_map(|order| match count_ngrams_with(corpus, order, exec) {
            Ok(t) if t.is_empty() => None,
            Ok(t) => Some(band_table(&t, bands)),
            Err(e) => Some(Err(e)),
        })
        .collect()
}
