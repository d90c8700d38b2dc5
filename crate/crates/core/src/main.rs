use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use augbench::classifier::{self, NaiveBayesModel, DEFAULT_ALPHA};
use augbench::corpus::{self, Corpus, Format, Label};
use augbench::evaluation::{self, ConfusionMatrix, MetricsReport};
use augbench::experiment::{self, ExperimentManifest};
use augbench::generator::{self, GenerationParams};
use augbench::promptaid::{self, BandSpec};
use augbench::{text, Error, Execution};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "augbench", version, about = "Synthetic review augmentation benchmark")]
struct Cli {
    /// Output format for stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Pos,
    Neg,
}

impl From<ClassArg> for Label {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Pos => Label::Positive,
            ClassArg::Neg => Label::Negative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Csv,
    Jsonl,
}

impl From<InputFormat> for Format {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Csv => Format::Csv,
            InputFormat::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load star-rated or labeled reviews and write a labeled corpus.
    Ingest(IngestArgs),
    /// Count n-grams, band them by frequency, and suggest prompts.
    Analyze(AnalyzeArgs),
    /// Fit a class generator and produce synthetic reviews.
    Generate(GenerateArgs),
    /// Fit a Multinomial Naive Bayes model.
    Train(TrainArgs),
    /// Score a model on a labeled test corpus.
    Evaluate(EvaluateArgs),
    /// Run a full experiment from a manifest.
    Run(RunArgs),
    /// Compare two evaluation reports.
    Compare(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the file extension.
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
    /// Treat the input as externally generated `{text, label}` JSONL.
    #[arg(long, requires = "class")]
    synthetic: bool,
    #[arg(long, value_enum)]
    class: Option<ClassArg>,
    /// Split off a stratified ground-truth test set of this size.
    #[arg(long, requires = "test_out")]
    holdout: Option<usize>,
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Restrict to one class.
    #[arg(long, value_enum)]
    class: Option<ClassArg>,
    /// N-gram order(s); all of 1, 2, 3 when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    order: Vec<u8>,
    #[arg(long, default_value = "80-100,50-80,25-50")]
    bands: String,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Number of prompts to suggest (requires --class).
    #[arg(long, requires = "class")]
    prompts: Option<usize>,
    #[arg(long, requires = "prompts")]
    prompts_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    class: ClassArg,
    /// Genuine corpus to fit the generator on (only reviews of --class are used).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    /// Reviews per prompt.
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 70)]
    target_len: usize,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 3)]
    max_order: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also save the fitted generator as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    manifest: PathBuf,
    /// Output directory (overrides `out_dir` in the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct EvaluationFile {
    test_size: usize,
    confusion: ConfusionMatrix,
    metrics: MetricsReport,
}

fn open(path: &Path) -> augbench::Result<File> {
    File::open(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path, format: Option<Format>) -> augbench::Result<corpus::Loaded> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    corpus::load_corpus(open(path)?, format).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> augbench::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn emit<T: Serialize>(format: OutputFormat, value: &T, text: impl FnOnce() -> String) -> augbench::Result<()> {
    let mut stdout = io::stdout().lock();
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        }
        OutputFormat::Text => write!(stdout, "{}", text())?,
    }
    Ok(())
}

fn corpus_summary(c: &Corpus) -> serde_json::Value {
    serde_json::json!({
        "reviews": c.len(),
        "Negative": c.count(Label::Negative),
        "Positive": c.count(Label::Positive),
    })
}

/// Outcome of a command that ran to completion but wants a non-zero exit.
enum Done {
    Ok,
    PartialReject,
}

fn ingest(a: IngestArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    if a.synthetic {
        let label = Label::from(a.class.expect("clap enforces --class"));
        let imported = generator::import_synthetic(open(&a.input)?, label)?;
        write_file(&a.out, imported.corpus.to_jsonl_string().as_bytes())?;
        for r in &imported.rejected {
            eprintln!("{}: line {}: rejected: {}", a.input.display(), r.line, r.reason);
        }
        let summary = serde_json::json!({
            "corpus": corpus_summary(&imported.corpus),
            "rejected": imported.rejected,
        });
        emit(fmt, &summary, || {
            format!("imported {} synthetic reviews, rejected {}\n", imported.corpus.len(), imported.rejected.len())
        })?;
        return Ok(if imported.rejected.is_empty() { Done::Ok } else { Done::PartialReject });
    }

    let loaded = read_corpus(&a.input, a.input_format.map(Format::from))?;
    let (train, test) = match a.holdout {
        Some(n) => {
            let (train, test) = corpus::partition_holdout(&loaded.corpus, n, a.seed)?;
            (train, Some(test))
        }
        None => (loaded.corpus, None),
    };
    write_file(&a.out, train.to_jsonl_string().as_bytes())?;
    if let (Some(test), Some(path)) = (&test, &a.test_out) {
        write_file(path, test.to_jsonl_string().as_bytes())?;
    }
    let summary = serde_json::json!({
        "corpus": corpus_summary(&train),
        "test": test.as_ref().map(corpus_summary),
        "excluded": loaded.excluded,
    });
    emit(fmt, &summary, || {
        let mut s = format!(
            "{} reviews ({} Negative, {} Positive), {} excluded\n",
            train.len(),
            train.count(Label::Negative),
            train.count(Label::Positive),
            loaded.excluded
        );
        if let Some(t) = &test {
            s.push_str(&format!(
                "test set {} reviews ({} Negative, {} Positive)\n",
                t.len(),
                t.count(Label::Negative),
                t.count(Label::Positive)
            ));
        }
        s
    })?;
    Ok(Done::Ok)
}

fn analyze(a: AnalyzeArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let mut corpus = read_corpus(&a.corpus, None)?.corpus;
    let label = a.class.map(Label::from);
    if let Some(l) = label {
        corpus = corpus.with_label(l);
    }
    let bands = BandSpec::parse_list(&a.bands)?;
    let orders: Vec<usize> = if a.order.is_empty() {
        vec![1, 2, 3]
    } else {
        a.order.iter().map(|&o| o as usize).collect()
    };
    let mut tables = Vec::new();
    let mut banded = Vec::new();
    for order in orders {
        let table = promptaid::count_ngrams(&corpus, order)?;
        if !table.is_empty() {
            banded.push(promptaid::band_table(&table, &bands)?);
        }
        tables.push(table);
    }
    let prompts = match (a.prompts, label) {
        (Some(k), Some(l)) => promptaid::suggest_prompts(&banded, l, k, a.seed)?,
        _ => Vec::new(),
    };
    if let Some(path) = &a.prompts_out {
        let mut buf = Vec::new();
        promptaid::write_prompts(&prompts, &mut buf)?;
        write_file(path, &buf)?;
    }
    let tops: Vec<promptaid::NgramTable> = tables
        .iter()
        .map(|t| promptaid::NgramTable {
            order: t.order,
            rows: t.rows.iter().take(a.top).cloned().collect(),
        })
        .collect();
    let doc = serde_json::json!({ "tables": tops, "banded": banded, "prompts": prompts });
    if let Some(path) = &a.out {
        write_file(path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    emit(fmt, &doc, || {
        let mut s = String::new();
        for (t, b) in tables.iter().zip(&banded) {
            s.push_str(&format!("order {} ({} distinct, {} total)\n", t.order, t.rows.len(), t.total()));
            s.push_str(&t.render(a.top));
            s.push_str(&b.render(a.top));
            s.push('\n');
        }
        for (i, p) in prompts.iter().enumerate() {
            s.push_str(&format!("Prompt {}: {}\n", i + 1, p.text()));
        }
        s
    })?;
    Ok(Done::Ok)
}

fn generate(a: GenerateArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let label = Label::from(a.class);
    let corpus = read_corpus(&a.corpus, None)?.corpus.with_label(label);
    let model = generator::fit_generator(&corpus, a.max_order)?;
    let prompts = promptaid::read_prompts(open(&a.prompts)?)?;
    let params = GenerationParams {
        target_length: a.target_len,
        max_length: a.max_len.unwrap_or(2 * a.target_len),
        temperature: a.temperature,
        count: a.count,
    };
    let batch = generator::generate_batch(&model, &prompts, &params, a.seed)?;
    write_file(&a.out, batch.to_jsonl_string().as_bytes())?;
    if let Some(path) = &a.model_out {
        write_file(path, &serde_json::to_vec(&model)?)?;
    }
    let summary = serde_json::json!({ "class": label, "prompts": prompts.len(), "generated": batch.len() });
    emit(fmt, &summary, || format!("generated {} {label} reviews from {} prompts\n", batch.len(), prompts.len()))?;
    Ok(Done::Ok)
}

fn train(a: TrainArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let corpus = read_corpus(&a.corpus, None)?.corpus;
    let vocab = text::build_vocabulary(&corpus)?;
    let model = classifier::fit_mnb(&corpus, &vocab, a.alpha)?;
    write_file(&a.out, &serde_json::to_vec(&model)?)?;
    let summary = serde_json::json!({ "corpus": corpus_summary(&corpus), "vocabulary_size": vocab.len() });
    emit(fmt, &summary, || format!("trained on {} reviews, vocabulary {}\n", corpus.len(), vocab.len()))?;
    Ok(Done::Ok)
}

fn evaluate(a: EvaluateArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let model: NaiveBayesModel = serde_json::from_reader(io::BufReader::new(open(&a.model)?))?;
    let test = read_corpus(&a.test, None)?.corpus;
    let predicted = classifier::predict_corpus(&model, &test, Execution::default());
    let actual: Vec<Label> = test.reviews().iter().map(|r| r.label()).collect();
    let confusion = evaluation::confusion(&actual, &predicted)?;
    let report = EvaluationFile {
        test_size: test.len(),
        confusion,
        metrics: evaluation::metrics(&confusion)?,
    };
    if let Some(path) = &a.out {
        write_file(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    emit(fmt, &report, || {
        format!("{}\n{}\n", evaluation::render_metrics(&report.metrics), report.confusion)
    })?;
    Ok(Done::Ok)
}

fn compare(a: CompareArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let read = |p: &Path| -> augbench::Result<EvaluationFile> {
        Ok(serde_json::from_reader(io::BufReader::new(open(p)?))?)
    };
    let (b, c) = (read(&a.baseline)?, read(&a.candidate)?);
    let cmp = evaluation::compare(&b.metrics, &c.metrics)?;
    if let Some(path) = &a.out {
        write_file(path, serde_json::to_string_pretty(&cmp)?.as_bytes())?;
    }
    emit(fmt, &cmp, || cmp.render("baseline", "candidate"))?;
    Ok(Done::Ok)
}

fn run(a: RunArgs, fmt: OutputFormat) -> augbench::Result<Done> {
    let mut manifest = ExperimentManifest::load(&a.manifest)
        .map_err(|e| Error::Invalid(format!("{}: {e}", a.manifest.display())))?;
    if let Some(seed) = a.seed {
        manifest.seed = seed;
    }
    let out_dir = a.out.or_else(|| manifest.out_dir.clone());
    let outcome = experiment::run_experiment(&manifest)?;
    if let Some(dir) = &out_dir {
        experiment::write_outputs(&outcome, dir)?;
    }
    emit(fmt, &outcome.report, || outcome.report.render())?;
    Ok(Done::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let fmt = cli.format;
    let result = std::panic::catch_unwind(move || match cli.command {
        Command::Ingest(a) => ingest(a, fmt),
        Command::Analyze(a) => analyze(a, fmt),
        Command::Generate(a) => generate(a, fmt),
        Command::Train(a) => train(a, fmt),
        Command::Evaluate(a) => evaluate(a, fmt),
        Command::Run(a) => run(a, fmt),
        Command::Compare(a) => compare(a, fmt),
    });
    match result {
        Ok(Ok(Done::Ok)) => ExitCode::SUCCESS,
        Ok(Ok(Done::PartialReject)) => ExitCode::from(EXIT_DATA),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(EXIT_DATA)
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
