//! Class-conditional synthetic review generation.
//!
//! Each class gets its own back-off n-gram model. Generation continues a
//! prompt token by token, sampling from the longest context that has been
//! observed in training and backing off to shorter contexts (down to the
//! unigram table) otherwise.
//!
//! Length control: the end-of-review marker is masked out until the output
//! reaches `target_length` tokens. From then on generation stops at the
//! first step whose selected context has ever been followed by an end of
//! review. `max_length` is a hard cap.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, LabeledReview, Provenance};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::promptaid::Prompt;
use crate::seed;
use crate::text::{tokenize, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Next {
    Token(u32),
    End,
}

/// Outcomes sorted by `Next`, so sampling order is stable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Distribution {
    outcomes: Vec<(Next, u64)>,
}

impl Distribution {
    fn add(&mut self, next: Next) {
        match self.outcomes.binary_search_by_key(&next, |&(n, _)| n) {
            Ok(i) => self.outcomes[i].1 += 1,
            Err(i) => self.outcomes.insert(i, (next, 1)),
        }
    }

    fn has_end(&self) -> bool {
        self.outcomes.last().is_some_and(|&(n, _)| n == Next::End)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerativeModel {
    class_label: Label,
    max_order: usize,
    vocabulary: Vocabulary,
    /// `tables[k - 1]` maps contexts of `k - 1` tokens.
    tables: Vec<HashMap<Vec<u32>, Distribution>>,
    trained_on: usize,
}

impl GenerativeModel {
    pub fn class_label(&self) -> Label {
        self.class_label
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    /// Observed continuations of `context` (`None` is end of review), in
    /// token-id order with the end marker last.
    pub fn transitions(&self, context: &[&str]) -> Option<Vec<(Option<&str>, u64)>> {
        let table = self.tables.get(context.len())?;
        let ids: Option<Vec<u32>> = context.iter().map(|t| self.vocabulary.id(t)).collect();
        let dist = table.get(&ids?)?;
        Some(
            dist.outcomes
                .iter()
                .map(|&(n, c)| (self.outcome_token(n), c))
                .collect(),
        )
    }

    /// Number of distinct contexts stored for n-gram order `order`.
    pub fn context_count(&self, order: usize) -> usize {
        self.tables.get(order.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    fn outcome_token(&self, next: Next) -> Option<&str> {
        match next {
            Next::Token(id) => self.vocabulary.token(id),
            Next::End => None,
        }
    }
}

pub fn fit_generator(class_corpus: &Corpus, max_order: usize) -> Result<GenerativeModel> {
    if max_order < 2 {
        return Err(Error::invalid(format!("max_order must be at least 2, got {max_order}")));
    }
    let class_label = match class_corpus.labels().as_slice() {
        [label] => *label,
        [] => return Err(Error::invalid("cannot fit a generator on an empty corpus")),
        _ => return Err(Error::invalid("generator corpus mixes Positive and Negative reviews")),
    };
    let mut vocabulary = Vocabulary::default();
    let mut tables: Vec<HashMap<Vec<u32>, Distribution>> = vec![HashMap::new(); max_order];
    for text in class_corpus.texts() {
        let ids: Vec<u32> = tokenize(text).into_iter().map(|t| vocabulary.insert(t)).collect();
        for i in 0..=ids.len() {
            let next = ids.get(i).map_or(Next::End, |&id| Next::Token(id));
            for order in 1..=max_order.min(i + 1) {
                let context = ids[i + 1 - order..i].to_vec();
                tables[order - 1].entry(context).or_default().add(next);
            }
        }
    }
    Ok(GenerativeModel {
        class_label,
        max_order,
        vocabulary,
        tables,
        trained_on: class_corpus.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub target_length: usize,
    pub max_length: usize,
    pub temperature: f64,
    pub count: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams::with_target(70)
    }
}

impl GenerationParams {
    pub fn with_target(target_length: usize) -> Self {
        GenerationParams {
            target_length,
            max_length: 2 * target_length,
            temperature: 1.0,
            count: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_length == 0 {
            return Err(Error::invalid("target_length must be positive"));
        }
        if self.max_length < self.target_length {
            return Err(Error::invalid("max_length must be at least target_length"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature must be a positive finite number"));
        }
        if self.count == 0 {
            return Err(Error::invalid("count must be positive"));
        }
        Ok(())
    }
}

/// Draws from counts raised to `1 / temperature`, computed relative to the
/// largest count in log space so small temperatures cannot overflow.
fn sample(outcomes: &[(Next, u64)], temperature: f64, rng: &mut seed::Rng) -> Next {
    debug_assert!(!outcomes.is_empty());
    if outcomes.len() == 1 {
        return outcomes[0].0;
    }
    let max_ln = outcomes
        .iter()
        .map(|&(_, c)| (c as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = outcomes
        .iter()
        .map(|&(_, c)| (((c as f64).ln() - max_ln) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (&(next, _), w) in outcomes.iter().zip(&weights) {
        if u < *w {
            return next;
        }
        u -= w;
    }
    // rounding can leave u marginally above the last weight
    outcomes
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map_or(outcomes[0].0, |(&(n, _), _)| n)
}

fn generate_tokens(
    model: &GenerativeModel,
    prompt_tokens: Vec<String>,
    params: &GenerationParams,
    rng: &mut seed::Rng,
) -> Vec<String> {
    let mut history: Vec<Option<u32>> = prompt_tokens.iter().map(|t| model.vocabulary.id(t)).collect();
    let mut out = prompt_tokens;
    let mut scratch: Vec<(Next, u64)> = Vec::new();

    while out.len() < params.max_length {
        let allow_end = out.len() >= params.target_length;
        let mut chosen: Option<&Distribution> = None;
        for order in (1..=model.max_order).rev() {
            if history.len() + 1 < order {
                continue;
            }
            let window = &history[history.len() + 1 - order..];
            let Some(context) = window.iter().copied().collect::<Option<Vec<u32>>>() else {
                continue;
            };
            if let Some(dist) = model.tables[order - 1].get(&context) {
                if allow_end || dist.outcomes.iter().any(|&(n, _)| n != Next::End) {
                    chosen = Some(dist);
                    break;
                }
            }
        }
        let Some(dist) = chosen else { break };
        if allow_end && dist.has_end() {
            break;
        }
        scratch.clear();
        scratch.extend(dist.outcomes.iter().filter(|&&(n, _)| n != Next::End));
        match sample(&scratch, params.temperature, rng) {
            Next::Token(id) => {
                history.push(Some(id));
                out.push(model.vocabulary.token(id).expect("id from the model").to_owned());
            }
            Next::End => unreachable!("end marker filtered before sampling"),
        }
    }
    out
}

fn prompt_tokens(prompt: &Prompt, params: &GenerationParams) -> Result<Vec<String>> {
    let tokens = tokenize(prompt.text());
    if tokens.is_empty() {
        return Err(Error::invalid("prompt has no tokens"));
    }
    if tokens.len() > params.max_length {
        return Err(Error::invalid(format!(
            "prompt has {} tokens, more than max_length {}",
            tokens.len(),
            params.max_length
        )));
    }
    Ok(tokens)
}

/// Continues `prompt`; the output's tokens start with the prompt's tokens.
pub fn generate(model: &GenerativeModel, prompt: &Prompt, params: &GenerationParams, seed: u64) -> Result<String> {
    params.validate()?;
    let tokens = prompt_tokens(prompt, params)?;
    let mut rng = seed::rng(seed);
    Ok(generate_tokens(model, tokens, params, &mut rng).join(" "))
}

pub fn generate_batch(model: &GenerativeModel, prompts: &[Prompt], params: &GenerationParams, seed: u64) -> Result<Corpus> {
    let counts = vec![params.count; prompts.len()];
    generate_batch_with(model, prompts, &counts, params, seed, Execution::default())
}

/// Generates `counts[i]` reviews for `prompts[i]`. Prompt `i` draws from
/// its own stream seeded with `seed ^ i`, so the result does not depend on
/// the execution strategy.
pub fn generate_batch_with(
    model: &GenerativeModel,
    prompts: &[Prompt],
    counts: &[usize],
    params: &GenerationParams,
    seed: u64,
    exec: Execution,
) -> Result<Corpus> {
    if counts.len() != prompts.len() {
        return Err(Error::invalid("one count per prompt required"));
    }
    if prompts.is_empty() {
        return Ok(Corpus::default());
    }
    params.validate()?;
    let mut prepared = Vec::with_capacity(prompts.len());
    for (i, p) in prompts.iter().enumerate() {
        if p.class_label() != model.class_label {
            return Err(Error::invalid(format!(
                "prompt {} is labeled {} but the model generates {}",
                i + 1,
                p.class_label(),
                model.class_label
            )));
        }
        prepared.push((prompt_tokens(p, params)?, counts[i]));
    }
    let per_prompt = exec::map_indexed(exec, &prepared, |i, (tokens, count)| {
        let mut rng = seed::rng(seed ^ i as u64);
        (0..*count)
            .map(|_| generate_tokens(model, tokens.clone(), params, &mut rng).join(" "))
            .collect::<Vec<String>>()
    });
    let reviews = per_prompt
        .into_iter()
        .flatten()
        .map(|text| LabeledReview::new(text, model.class_label, Provenance::Synthetic))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(reviews))
}

/// Splits `total` across `n` prompts as evenly as possible, earlier prompts
/// taking the remainder.
pub fn spread(total: usize, n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct Imported {
    pub corpus: Corpus,
    pub rejected: Vec<Rejection>,
}

/// Reads externally generated `{text, label}` JSONL as Synthetic reviews.
/// Records labeled other than `expected_label` are reported, not kept.
pub fn import_synthetic<R: Read>(source: R, expected_label: Label) -> Result<Imported> {
    #[derive(Deserialize)]
    struct Record {
        text: String,
        label: Label,
    }
    let mut reviews = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::record(line_no, "json", e.to_string()))?;
        if rec.label != expected_label {
            rejected.push(Rejection {
                line: line_no,
                reason: format!("label {} does not match expected {}", rec.label, expected_label),
            });
            continue;
        }
        let review = LabeledReview::new(rec.text, rec.label, Provenance::Synthetic)
            .map_err(|e| Error::record(line_no, "text", e.to_string()))?;
        reviews.push(review);
    }
    Ok(Imported {
        corpus: Corpus::new(reviews),
        rejected,
    })
}

// Serialized form: contexts and continuations spelled as tokens, entries
// sorted so equal models serialize to equal bytes.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    class_label: Label,
    max_order: usize,
    trained_on: usize,
    vocabulary: Vocabulary,
    tables: Vec<Vec<ContextEntry>>,
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    context: Vec<String>,
    next: Vec<(Option<String>, u64)>,
}

impl Serialize for GenerativeModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let tok = |id: u32| self.vocabulary.token(id).unwrap_or_default().to_owned();
        let tables = self
            .tables
            .iter()
            .map(|table| {
                let mut entries: Vec<ContextEntry> = table
                    .iter()
                    .map(|(ctx, dist)| ContextEntry {
                        context: ctx.iter().map(|&id| tok(id)).collect(),
                        next: dist
                            .outcomes
                            .iter()
                            .map(|&(n, c)| (self.outcome_token(n).map(str::to_owned), c))
                            .collect(),
                    })
                    .collect();
                entries.sort_by(|a, b| a.context.cmp(&b.context));
                entries
            })
            .collect();
        ModelFile {
            class_label: self.class_label,
            max_order: self.max_order,
            trained_on: self.trained_on,
            vocabulary: self.vocabulary.clone(),
            tables,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GenerativeModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = ModelFile::deserialize(d)?;
        if file.max_order < 2 || file.tables.len() != file.max_order {
            return Err(D::Error::custom("inconsistent max_order"));
        }
        let id = |t: &str| {
            file.vocabulary
                .id(t)
                .ok_or_else(|| D::Error::custom(format!("token {t:?} not in vocabulary")))
        };
        let mut tables = Vec::with_capacity(file.tables.len());
        for (k, entries) in file.tables.iter().enumerate() {
            let mut table = HashMap::new();
            for e in entries {
                if e.context.len() != k {
                    return Err(D::Error::custom("context length does not match its order"));
                }
                let ctx = e.context.iter().map(|t| id(t)).collect::<std::result::Result<Vec<_>, _>>()?;
                let mut outcomes = Vec::with_capacity(e.next.len());
                for (t, c) in &e.next {
                    if *c == 0 {
                        return Err(D::Error::custom("zero transition count"));
                    }
                    let n = match t {
                        Some(t) => Next::Token(id(t)?),
                        None => Next::End,
                    };
                    outcomes.push((n, *c));
                }
                outcomes.sort_by_key(|&(n, _)| n);
                table.insert(ctx, Distribution { outcomes });
            }
            tables.push(table);
        }
        Ok(GenerativeModel {
            class_label: file.class_label,
            max_order: file.max_order,
            vocabulary: file.vocabulary,
            tables,
            trained_on: file.trained_on,
        })
    }
}
