//! Review ingestion, star-rating binarization, ground-truth holdout, and
//! genuine/synthetic concatenation.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::seed;

/// Sentiment class. `Negative < Positive`; this order fixes the row and
/// column order of confusion matrices and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "Negative",
            Label::Positive => "Positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(Label::Positive),
            "negative" | "neg" => Ok(Label::Negative),
            _ => Err(Error::invalid(format!("unknown label `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Genuine,
    Synthetic,
}

/// A star-rated review as it appears in the source data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawReview {
    stars: u8,
    text: String,
}

impl RawReview {
    pub fn new(stars: i64, text: impl Into<String>) -> Result<Self> {
        if !(1..=5).contains(&stars) {
            return Err(Error::invalid(format!("stars out of range: {stars}")));
        }
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("empty text"));
        }
        Ok(RawReview {
            stars: stars as u8,
            text,
        })
    }

    pub fn stars(&self) -> u8 {
        self.stars
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ReviewRecord")]
pub struct LabeledReview {
    text: String,
    label: Label,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct ReviewRecord {
    text: String,
    label: Label,
    provenance: Provenance,
}

impl TryFrom<ReviewRecord> for LabeledReview {
    type Error = Error;

    fn try_from(r: ReviewRecord) -> Result<Self> {
        LabeledReview::new(r.text, r.label, r.provenance)
    }
}

impl LabeledReview {
    pub fn new(text: impl Into<String>, label: Label, provenance: Provenance) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("empty text"));
        }
        Ok(LabeledReview {
            text,
            label,
            provenance,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Ordered reviews with cached per-label counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Corpus {
    reviews: Vec<LabeledReview>,
    counts: [usize; 2],
}

impl Corpus {
    pub fn new(reviews: Vec<LabeledReview>) -> Self {
        let mut counts = [0; 2];
        for r in &reviews {
            counts[r.label.index()] += 1;
        }
        Corpus { reviews, counts }
    }

    pub fn reviews(&self) -> &[LabeledReview] {
        &self.reviews
    }

    pub fn into_reviews(self) -> Vec<LabeledReview> {
        self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.counts[label.index()]
    }

    /// Labels present in the corpus, in `Label` order.
    pub fn labels(&self) -> Vec<Label> {
        Label::ALL
            .into_iter()
            .filter(|l| self.count(*l) > 0)
            .collect()
    }

    pub fn with_label(&self, label: Label) -> Corpus {
        Corpus::new(
            self.reviews
                .iter()
                .filter(|r| r.label == label)
                .cloned()
                .collect(),
        )
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.reviews.iter().map(|r| r.text.as_str())
    }

    /// Serializes as JSONL, one `{text, label, provenance}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.reviews {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            _ => Err(Error::invalid(format!("unknown format `{s}`"))),
        }
    }
}

/// One decoded input record before binarization. `label`/`provenance` are
/// only available from JSONL.
struct InputRecord {
    line: usize,
    stars: Option<i64>,
    text: String,
    label: Option<Label>,
    provenance: Option<Provenance>,
}

fn read_records<R: Read>(source: R, format: Format, require_stars: bool) -> Result<Vec<InputRecord>> {
    match format {
        Format::Csv => read_csv(source),
        Format::Jsonl => read_jsonl(source, require_stars),
    }
}

fn read_csv<R: Read>(source: R) -> Result<Vec<InputRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::record(1, "header", e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::record(1, name, "missing column in header"))
    };
    let (stars_col, text_col) = (col("stars")?, col("text")?);

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::record(line, "row", e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let stars_raw = row.get(stars_col).unwrap_or("").trim();
        let stars = stars_raw
            .parse::<i64>()
            .map_err(|_| Error::record(line, "stars", format!("not an integer: `{stars_raw}`")))?;
        let text = row.get(text_col).unwrap_or("").to_owned();
        out.push(InputRecord {
            line,
            stars: Some(stars),
            text,
            label: None,
            provenance: None,
        });
    }
    Ok(out)
}

fn read_jsonl<R: Read>(source: R, require_stars: bool) -> Result<Vec<InputRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::record(line_no, "line", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::record(line_no, "json", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::record(line_no, "json", "expected an object"))?;
        let stars = match obj.get("stars") {
            None | Some(Value::Null) if !require_stars => None,
            None => return Err(Error::record(line_no, "stars", "missing")),
            Some(v) => Some(
                v.as_i64()
                    .ok_or_else(|| Error::record(line_no, "stars", format!("not an integer: {v}")))?,
            ),
        };
        let text = match obj.get("text") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::record(line_no, "text", "expected a string")),
            None => return Err(Error::record(line_no, "text", "missing")),
        };
        let label = match obj.get("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(
                serde_json::from_value(Value::String(s.clone()))
                    .map_err(|_| Error::record(line_no, "label", format!("unknown label `{s}`")))?,
            ),
            Some(_) => return Err(Error::record(line_no, "label", "expected a string")),
        };
        let provenance = match obj.get("provenance") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value(v.clone())
                    .map_err(|_| Error::record(line_no, "provenance", format!("unknown provenance {v}")))?,
            ),
        };
        out.push(InputRecord {
            line: line_no,
            stars,
            text,
            label,
            provenance,
        });
    }
    Ok(out)
}

fn to_raw(rec: InputRecord) -> Result<RawReview> {
    let stars = rec.stars.expect("stars required by reader");
    if !(1..=5).contains(&stars) {
        return Err(Error::record(rec.line, "stars", format!("stars out of range: {stars}")));
    }
    if rec.text.trim().is_empty() {
        return Err(Error::record(rec.line, "text", "empty text"));
    }
    RawReview::new(stars, rec.text)
}

/// Decodes star-rated reviews from CSV (`stars,text` header) or JSONL
/// (`{"stars":..,"text":..}` per line), preserving input order.
pub fn load_reviews<R: Read>(source: R, format: Format) -> Result<Vec<RawReview>> {
    read_records(source, format, true)?
        .into_iter()
        .map(to_raw)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binarized {
    Labeled(LabeledReview),
    /// 3-star reviews belong to neither class.
    Excluded,
}

/// 4-5 stars map to Positive, 1-2 to Negative, 3 is excluded.
pub fn binarize(raw: &RawReview) -> Binarized {
    let label = match raw.stars {
        4 | 5 => Label::Positive,
        1 | 2 => Label::Negative,
        _ => return Binarized::Excluded,
    };
    Binarized::Labeled(LabeledReview {
        text: raw.text.clone(),
        label,
        provenance: Provenance::Genuine,
    })
}

/// Result of loading a file straight into a corpus.
#[derive(Debug)]
pub struct Loaded {
    pub corpus: Corpus,
    /// Records dropped by binarization (3-star reviews).
    pub excluded: usize,
}

/// Loads any supported file as a labeled corpus. JSONL records carrying a
/// `label` keep it (and their `provenance`, default Genuine); all other
/// records are binarized from `stars`.
pub fn load_corpus<R: Read>(source: R, format: Format) -> Result<Loaded> {
    let mut reviews = Vec::new();
    let mut excluded = 0;
    for rec in read_records(source, format, false)? {
        if let Some(label) = rec.label {
            if rec.text.trim().is_empty() {
                return Err(Error::record(rec.line, "text", "empty text"));
            }
            let provenance = rec.provenance.unwrap_or(Provenance::Genuine);
            reviews.push(LabeledReview::new(rec.text, label, provenance)?);
            continue;
        }
        if rec.stars.is_none() {
            return Err(Error::record(rec.line, "stars", "missing (and no label given)"));
        }
        match binarize(&to_raw(rec)?) {
            Binarized::Labeled(r) => reviews.push(r),
            Binarized::Excluded => excluded += 1,
        }
    }
    Ok(Loaded {
        corpus: Corpus::new(reviews),
        excluded,
    })
}

/// Splits off a seeded, class-stratified, genuine-only test set.
///
/// The test set takes `holdout_size / 2` Negative reviews and the rest
/// Positive (the odd one goes to whichever class can supply it, Positive
/// first). Both halves keep the corpus order.
pub fn partition_holdout(corpus: &Corpus, holdout_size: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    if corpus
        .reviews
        .iter()
        .any(|r| r.provenance != Provenance::Genuine)
    {
        return Err(Error::invalid(
            "holdout corpus must contain only genuine reviews",
        ));
    }
    if holdout_size > corpus.len() {
        return Err(Error::invalid(format!(
            "holdout size {holdout_size} exceeds corpus size {}",
            corpus.len()
        )));
    }
    let avail_neg = corpus.count(Label::Negative);
    let avail_pos = corpus.count(Label::Positive);
    let mut want_neg = holdout_size / 2;
    let mut want_pos = holdout_size - want_neg;
    if want_pos > avail_pos && want_neg < want_pos && avail_neg > want_neg {
        std::mem::swap(&mut want_neg, &mut want_pos);
    }
    if want_neg > avail_neg || want_pos > avail_pos {
        return Err(Error::invalid(format!(
            "cannot stratify a holdout of {holdout_size}: need {want_neg} Negative and {want_pos} Positive, \
             available {avail_neg} Negative and {avail_pos} Positive"
        )));
    }

    let mut rng = seed::rng(seed);
    let mut in_test = vec![false; corpus.len()];
    for (label, want) in [(Label::Negative, want_neg), (Label::Positive, want_pos)] {
        let members: Vec<usize> = corpus
            .reviews
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        for pick in index::sample(&mut rng, members.len(), want).into_iter() {
            in_test[members[pick]] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, is_test) in corpus.reviews.iter().zip(in_test) {
        if is_test {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((Corpus::new(train), Corpus::new(test)))
}

/// Appends synthetic reviews after the genuine ones.
pub fn concat(genuine: &Corpus, synthetic: &Corpus) -> Result<Corpus> {
    if let Some(pos) = synthetic
        .reviews
        .iter()
        .position(|r| r.provenance != Provenance::Synthetic)
    {
        return Err(Error::invalid(format!(
            "synthetic corpus record {} is not marked Synthetic",
            pos + 1
        )));
    }
    let mut reviews = Vec::with_capacity(genuine.len() + synthetic.len());
    reviews.extend_from_slice(&genuine.reviews);
    reviews.extend_from_slice(&synthetic.reviews);
    Ok(Corpus::new(reviews))
}
