//! End-to-end experiment: ingest, split, generate, concatenate, train two
//! baselines, and evaluate both on one ground-truth test set.
//!
//! Manifest syntax is one `key = value` pair per line; `#` starts a comment.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{self, NaiveBayesModel, DEFAULT_ALPHA};
use crate::corpus::{self, Corpus, Format, Label};
use crate::error::{Error, Result, StageExt};
use crate::evaluation::{self, ComparisonReport, ConfusionMatrix, MetricsReport};
use crate::exec::Execution;
use crate::generator::{self, GenerationParams, GenerativeModel};
use crate::promptaid::{self, BandSpec, Prompt};
use crate::seed;
use crate::text::{self, Vocabulary};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq)]
pub struct ClassSettings {
    /// External synthetic reviews to import for this class.
    pub synthetic_file: Option<PathBuf>,
    /// Prompt file; when absent prompts are composed from the class corpus.
    pub prompts_file: Option<PathBuf>,
    /// Number of reviews to generate.
    pub synthetic_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub genuine: PathBuf,
    pub genuine_format: Option<Format>,
    pub test: Option<PathBuf>,
    pub test_format: Option<Format>,
    pub holdout_size: usize,
    pub seed: u64,
    pub max_order: usize,
    pub auto_prompts: usize,
    pub bands: Vec<BandSpec>,
    pub target_length: usize,
    pub max_length: Option<usize>,
    pub temperature: f64,
    pub alpha: f64,
    pub negative: ClassSettings,
    pub positive: ClassSettings,
    pub out_dir: Option<PathBuf>,
    /// Canonical `key = value` echo of every setting.
    echo: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "genuine",
    "genuine_format",
    "test",
    "test_format",
    "holdout_size",
    "seed",
    "max_order",
    "auto_prompts",
    "bands",
    "target_length",
    "max_length",
    "temperature",
    "alpha",
    "synthetic_neg",
    "synthetic_pos",
    "prompts_neg",
    "prompts_pos",
    "synthetic_count_neg",
    "synthetic_count_pos",
    "out_dir",
];

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split_once('#').map_or(line, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::record(line_no, "manifest", "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::record(line_no, key, "unknown manifest key"));
            }
            if raw.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(Error::record(line_no, key, "duplicate manifest key"));
            }
        }
        Self::from_map(raw, base)
    }

    fn from_map(raw: BTreeMap<String, String>, base: &Path) -> Result<Self> {
        fn num<T: std::str::FromStr>(raw: &BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
            match raw.get(key) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::invalid(format!("manifest `{key}`: cannot parse `{v}`"))),
                None => default.ok_or_else(|| Error::invalid(format!("manifest is missing `{key}`"))),
            }
        }
        let path = |key: &str| raw.get(key).map(|v| base.join(v));
        let format = |key: &str| raw.get(key).map(|v| v.parse::<Format>()).transpose();

        let genuine = path("genuine").ok_or_else(|| Error::invalid("manifest is missing `genuine`"))?;
        let test = path("test");
        let holdout_size = num(&raw, "holdout_size", Some(if test.is_some() { 0 } else { 198 }))?;
        if test.is_some() && holdout_size > 0 {
            return Err(Error::invalid("set either `test` or `holdout_size`, not both"));
        }
        let max_length = raw.get("max_length").map(|_| num(&raw, "max_length", None)).transpose()?;
        let manifest = ExperimentManifest {
            genuine,
            genuine_format: format("genuine_format")?,
            test,
            test_format: format("test_format")?,
            holdout_size,
            seed: num(&raw, "seed", None)?,
            max_order: num(&raw, "max_order", Some(3))?,
            auto_prompts: num(&raw, "auto_prompts", Some(10))?,
            bands: match raw.get("bands") {
                Some(v) => BandSpec::parse_list(v)?,
                None => BandSpec::defaults(),
            },
            target_length: num(&raw, "target_length", Some(70))?,
            max_length,
            temperature: num(&raw, "temperature", Some(1.0))?,
            alpha: num(&raw, "alpha", Some(DEFAULT_ALPHA))?,
            negative: ClassSettings {
                synthetic_file: path("synthetic_neg"),
                prompts_file: path("prompts_neg"),
                synthetic_count: num(&raw, "synthetic_count_neg", Some(0))?,
            },
            positive: ClassSettings {
                synthetic_file: path("synthetic_pos"),
                prompts_file: path("prompts_pos"),
                synthetic_count: num(&raw, "synthetic_count_pos", Some(0))?,
            },
            out_dir: path("out_dir"),
            echo: BTreeMap::new(),
        };
        manifest.generation_params(1)?;
        Ok(manifest.with_echo(raw))
    }

    fn with_echo(mut self, raw: BTreeMap<String, String>) -> Self {
        let mut echo = raw;
        let defaults = [
            ("holdout_size", self.holdout_size.to_string()),
            ("max_order", self.max_order.to_string()),
            ("auto_prompts", self.auto_prompts.to_string()),
            ("target_length", self.target_length.to_string()),
            ("temperature", self.temperature.to_string()),
            ("alpha", self.alpha.to_string()),
            ("synthetic_count_neg", self.negative.synthetic_count.to_string()),
            ("synthetic_count_pos", self.positive.synthetic_count.to_string()),
            (
                "bands",
                self.bands
                    .iter()
                    .map(|b| format!("{}-{}", b.lo, b.hi))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        ];
        for (k, v) in defaults {
            echo.entry(k.to_owned()).or_insert(v);
        }
        self.echo = echo;
        self
    }

    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }

    fn class(&self, label: Label) -> &ClassSettings {
        match label {
            Label::Negative => &self.negative,
            Label::Positive => &self.positive,
        }
    }

    fn generation_params(&self, count: usize) -> Result<GenerationParams> {
        let params = GenerationParams {
            target_length: self.target_length,
            max_length: self.max_length.unwrap_or(2 * self.target_length),
            temperature: self.temperature,
            count,
        };
        params.validate()?;
        if self.max_order < 2 {
            return Err(Error::invalid("max_order must be at least 2"));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::invalid("alpha must be positive"));
        }
        Ok(params)
    }

    fn check_paths(&self) -> Result<()> {
        let mut paths = vec![&self.genuine];
        paths.extend(self.test.as_ref());
        for class in [&self.negative, &self.positive] {
            paths.extend(class.synthetic_file.as_ref());
            paths.extend(class.prompts_file.as_ref());
        }
        for p in paths {
            if !p.is_file() {
                return Err(Error::invalid(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub genuine_train: usize,
    pub synthetic: usize,
    pub combined: usize,
    pub test: usize,
    /// 3-star reviews dropped during ingestion.
    pub excluded: usize,
    pub synthetic_rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub training_size: usize,
    pub vocabulary_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub manifest: BTreeMap<String, String>,
    pub sizes: DatasetSizes,
    pub genuine: ModelResult,
    pub combined: ModelResult,
    pub comparison: ComparisonReport,
    pub artifact_digest: String,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.sizes;
        let _ = writeln!(out, "{}", self.tool_version);
        let _ = writeln!(
            out,
            "genuine train {}  synthetic {}  combined {}  test {}",
            s.genuine_train, s.synthetic, s.combined, s.test
        );
        let _ = writeln!(out);
        out.push_str(&self.comparison.render("genuine", "combined"));
        let _ = writeln!(out);
        let _ = writeln!(out, "genuine model confusion (rows actual, cols predicted; Negative, Positive)");
        let _ = writeln!(out, "{}", self.genuine.confusion);
        let _ = writeln!(out, "combined model confusion");
        let _ = writeln!(out, "{}", self.combined.confusion);
        out
    }
}

/// Everything trained during a run, for inspection and leak checks.
#[derive(Debug)]
pub struct Artifacts {
    pub genuine_train: Corpus,
    pub test: Corpus,
    pub synthetic: Corpus,
    pub prompts: Vec<Prompt>,
    pub generators: Vec<GenerativeModel>,
    pub genuine_vocabulary: Vocabulary,
    pub combined_vocabulary: Vocabulary,
    pub genuine_model: NaiveBayesModel,
    pub combined_model: NaiveBayesModel,
}

impl Artifacts {
    /// SHA-256 over the serialized trained state: prompts, generators,
    /// vocabularies and classifiers. Test data is not part of it.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |bytes: Vec<u8>| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        };
        feed(json(&self.prompts));
        feed(json(&self.generators));
        feed(json(&self.genuine_vocabulary));
        feed(json(&self.combined_vocabulary));
        feed(json(&self.genuine_model));
        feed(json(&self.combined_model));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("artifact serializes")
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub artifacts: Artifacts,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn load_file(path: &Path, format: Option<Format>) -> Result<corpus::Loaded> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    corpus::load_corpus(open(path)?, format)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn evaluate(model: &NaiveBayesModel, training_size: usize, test: &Corpus) -> Result<ModelResult> {
    let predicted = classifier::predict_corpus(model, test, Execution::default());
    let actual: Vec<Label> = test.reviews().iter().map(|r| r.label()).collect();
    let confusion = evaluation::confusion(&actual, &predicted)?;
    Ok(ModelResult {
        training_size,
        vocabulary_size: model.vocabulary().len(),
        metrics: evaluation::metrics(&confusion)?,
        confusion,
    })
}

pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    let params = manifest.generation_params(1).stage("manifest")?;
    manifest.check_paths().stage("manifest")?;

    let loaded = load_file(&manifest.genuine, manifest.genuine_format).stage("ingest")?;
    let mut excluded = loaded.excluded;
    let (genuine_train, test) = match &manifest.test {
        Some(path) => {
            let t = load_file(path, manifest.test_format).stage("ingest")?;
            excluded += t.excluded;
            if t.corpus.reviews().iter().any(|r| r.provenance() != corpus::Provenance::Genuine) {
                return Err(Error::invalid("test set must contain only genuine reviews")).stage("ingest");
            }
            (loaded.corpus, t.corpus)
        }
        None => corpus::partition_holdout(
            &loaded.corpus,
            manifest.holdout_size,
            seed::substream(manifest.seed, "split"),
        )
        .stage("split")?,
    };
    if test.is_empty() {
        return Err(Error::invalid("test set is empty")).stage("split");
    }

    let mut generators = Vec::new();
    let mut prompts = Vec::new();
    let mut synthetic_parts = Vec::new();
    let mut rejected = 0;
    for label in Label::ALL {
        let settings = manifest.class(label);
        let tag = label.as_str().to_ascii_lowercase();
        let class_train = genuine_train.with_label(label);

        if let Some(path) = &settings.synthetic_file {
            let imported = generator::import_synthetic(open(path).stage("import")?, label)
                .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
                .stage("import")?;
            rejected += imported.rejected.len();
            synthetic_parts.push(imported.corpus);
        }
        if settings.synthetic_count == 0 {
            continue;
        }
        let model = generator::fit_generator(&class_train, manifest.max_order).stage("fit generator")?;
        let class_prompts = match &settings.prompts_file {
            Some(path) => {
                let ps = promptaid::read_prompts(open(path).stage("prompts")?).stage("prompts")?;
                if let Some(p) = ps.iter().find(|p| p.class_label() != label) {
                    return Err(Error::invalid(format!(
                        "{}: prompt {:?} is not labeled {label}",
                        path.display(),
                        p.text()
                    )))
                    .stage("prompts");
                }
                ps
            }
            None => {
                let tables = promptaid::analyze_class(&class_train, &manifest.bands, Execution::default())
                    .stage("prompts")?;
                promptaid::suggest_prompts(
                    &tables,
                    label,
                    manifest.auto_prompts,
                    seed::substream(manifest.seed, &format!("prompts-{tag}")),
                )
                .stage("prompts")?
            }
        };
        if class_prompts.is_empty() {
            return Err(Error::invalid(format!("no prompts for {label}"))).stage("prompts");
        }
        let counts = generator::spread(settings.synthetic_count, class_prompts.len());
        let batch = generator::generate_batch_with(
            &model,
            &class_prompts,
            &counts,
            &params,
            seed::substream(manifest.seed, &format!("generate-{tag}")),
            Execution::default(),
        )
        .stage("generate")?;
        synthetic_parts.push(batch);
        prompts.extend(class_prompts);
        generators.push(model);
    }
    let synthetic = Corpus::new(synthetic_parts.into_iter().flat_map(Corpus::into_reviews).collect());
    let combined = corpus::concat(&genuine_train, &synthetic).stage("concat")?;

    let genuine_vocabulary = text::build_vocabulary(&genuine_train).stage("train")?;
    let combined_vocabulary = text::build_vocabulary(&combined).stage("train")?;
    let genuine_model = classifier::fit_mnb(&genuine_train, &genuine_vocabulary, manifest.alpha).stage("train")?;
    let combined_model = classifier::fit_mnb(&combined, &combined_vocabulary, manifest.alpha).stage("train")?;

    let genuine = evaluate(&genuine_model, genuine_train.len(), &test).stage("evaluate")?;
    let combined_result = evaluate(&combined_model, combined.len(), &test).stage("evaluate")?;
    let comparison = evaluation::compare(&genuine.metrics, &combined_result.metrics).stage("evaluate")?;

    let artifacts = Artifacts {
        genuine_train,
        test,
        synthetic,
        prompts,
        generators,
        genuine_vocabulary,
        combined_vocabulary,
        genuine_model,
        combined_model,
    };
    let report = ExperimentReport {
        tool_version: TOOL_VERSION.to_owned(),
        manifest: manifest.echo.clone(),
        sizes: DatasetSizes {
            genuine_train: artifacts.genuine_train.len(),
            synthetic: artifacts.synthetic.len(),
            combined: combined.len(),
            test: artifacts.test.len(),
            excluded,
            synthetic_rejected: rejected,
        },
        genuine,
        combined: combined_result,
        comparison,
        artifact_digest: artifacts.digest(),
    };
    Ok(ExperimentOutcome { report, artifacts })
}

/// Writes the report and trained artifacts into `dir`. On failure every
/// file written by this call is removed again.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            written.push(path.clone());
            fs::write(&path, bytes)?;
            Ok(())
        };
        let a = &outcome.artifacts;
        put("report.json", outcome.report.to_json().into_bytes())?;
        put("report.txt", outcome.report.render().into_bytes())?;
        put("train.jsonl", a.genuine_train.to_jsonl_string().into_bytes())?;
        put("test.jsonl", a.test.to_jsonl_string().into_bytes())?;
        put("synthetic.jsonl", a.synthetic.to_jsonl_string().into_bytes())?;
        let mut prompts = Vec::new();
        promptaid::write_prompts(&a.prompts, &mut prompts)?;
        put("prompts.jsonl", prompts)?;
        put("model_genuine.json", serde_json::to_vec(&a.genuine_model)?)?;
        put("model_combined.json", serde_json::to_vec(&a.combined_model)?)?;
        for g in &a.generators {
            let name = format!("generator_{}.json", g.class_label().as_str().to_ascii_lowercase());
            put(&name, serde_json::to_vec(g)?)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}
