//! Command-line interface: sentence prediction, code-switching detection,
//! dataset evaluation, and corpus mining over JSONL/TSV streams.

use std::collections::BTreeSet;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use masklid::eval::{
    baseline_predict, ingest_token_labeled, preprocess, score, BaselineConfig, DatasetFormat,
    LabelMap,
};
use masklid::inference::{featurize, load_label_file, predict, restrict_labels, LabelSubset};
use masklid::mask::{masklid, MaskLIDConfig, TerminationReason};
use masklid::model::{canonical_label, load_model, tokenize, ClassifierModel};

#[derive(Parser)]
#[command(
    name = "masklid",
    version,
    about = "Code-switching language identification with fastText-format models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank languages for each input line.
    Predict(PredictArgs),
    /// Detect the set of languages per line, with word assignments.
    Detect(DetectArgs),
    /// Score a predictor against a gold dataset.
    Evaluate(EvaluateArgs),
    /// Stream a corpus and keep only code-switched lines.
    Mine(MineArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Path to the binary model file.
    #[arg(long, env = "MASKLID_MODEL")]
    model: PathBuf,
    /// Label-subset file (one label per line, # comments) restricting the
    /// softmax to those languages.
    #[arg(long, env = "MASKLID_LABELS")]
    labels: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<(ClassifierModel, LabelSubset), CliError> {
        let model = load_model(&self.model)
            .with_context(|| format!("loading model {}", self.model.display()))
            .map_err(CliError::Config)?;
        let subset = match &self.labels {
            None => LabelSubset::full(&model),
            Some(path) => {
                let names = load_label_file(path)
                    .with_context(|| format!("reading labels {}", path.display()))
                    .map_err(CliError::Config)?;
                let restriction = restrict_labels(&model, &names)
                    .context("restricting label set")
                    .map_err(CliError::Config)?;
                if !restriction.unmatched.is_empty() {
                    eprintln!(
                        "warning: {} label(s) not in the model: {}",
                        restriction.unmatched.len(),
                        restriction.unmatched.join(", ")
                    );
                }
                restriction.subset
            }
        };
        Ok((model, subset))
    }
}

#[derive(Args)]
struct MaskArgs {
    /// Config file with key = value lines; flags override it.
    #[arg(long, env = "MASKLID_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "MASKLID_ALPHA")]
    alpha: Option<usize>,
    #[arg(long, env = "MASKLID_BETA")]
    beta: Option<usize>,
    #[arg(long, env = "MASKLID_TAU")]
    tau: Option<usize>,
    #[arg(long, env = "MASKLID_LAMBDA")]
    lambda: Option<usize>,
    /// Minimum probability for accepting a language's feature set.
    #[arg(long = "conf", env = "MASKLID_CONF")]
    conf: Option<f32>,
    #[arg(long, env = "MASKLID_BETA_RETRY")]
    beta_retry: Option<usize>,
    /// Optional confidence floor for the per-round dominant prediction.
    #[arg(long = "step1-conf", env = "MASKLID_STEP1_CONF")]
    step1_conf: Option<f32>,
}

impl MaskArgs {
    fn resolve(&self) -> Result<MaskLIDConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => MaskLIDConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(CliError::Config)?,
            None => MaskLIDConfig::default(),
        };
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.conf {
            cfg.feature_set_confidence = v;
        }
        if let Some(v) = self.beta_retry {
            cfg.beta_retry_factor = v;
        }
        if let Some(v) = self.step1_conf {
            cfg.step1_confidence = Some(v);
        }
        cfg.validate()
            .map_err(|e| CliError::Config(anyhow!(e)))?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Tsv,
    Jsonl,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of labels to report per line.
    #[arg(long, default_value_t = 5, env = "MASKLID_TOP_K")]
    top_k: usize,
    #[arg(long, value_enum, default_value = "tsv", env = "MASKLID_FORMAT")]
    format: OutputFormat,
    /// Sentence to classify; reads stdin lines when omitted.
    text: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long, value_enum, default_value = "jsonl", env = "MASKLID_FORMAT")]
    format: OutputFormat,
    /// Sentence to analyze; reads stdin lines when omitted.
    text: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Masklid,
    Baseline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dataset file.
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset format: jsonl, or tokens (token-per-line with tags).
    #[arg(long, default_value = "jsonl")]
    dataset_format: String,
    /// Tag-to-label mapping file for token-per-line datasets.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Predictor to evaluate.
    #[arg(long, value_enum, default_value = "masklid", env = "MASKLID_MODE")]
    mode: EvalMode,
    #[command(flatten)]
    mask: MaskArgs,
    /// Baseline probability threshold.
    #[arg(long, default_value_t = 0.3)]
    threshold: f32,
    /// Baseline label cap.
    #[arg(long, default_value_t = 2)]
    max_labels: usize,
    /// Worker threads for the prediction pass.
    #[arg(long, default_value_t = 1, env = "MASKLID_JOBS")]
    jobs: usize,
    /// Skip cleaning and byte-length filtering.
    #[arg(long)]
    raw: bool,
    #[arg(long, value_enum, default_value = "tsv", env = "MASKLID_FORMAT")]
    format: ReportFormat,
}

#[derive(Args)]
struct MineArgs {
    /// Path to the binary model file.
    #[arg(long, env = "MASKLID_MODEL")]
    model: PathBuf,
    /// Label-subset file; required when mining so the label space is
    /// explicit.
    #[arg(long, env = "MASKLID_LABELS")]
    labels: PathBuf,
    #[command(flatten)]
    mask: MaskArgs,
    /// Worker threads; output order is input order regardless.
    #[arg(long, default_value_t = 1, env = "MASKLID_JOBS")]
    jobs: usize,
    #[arg(long, value_enum, default_value = "jsonl", env = "MASKLID_FORMAT")]
    format: OutputFormat,
    /// Input file; reads stdin when omitted.
    input: Option<PathBuf>,
}

enum CliError {
    /// Bad input data: exit code 1.
    Input(anyhow::Error),
    /// Bad configuration or model: exit code 2.
    Config(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Input(e) | CliError::Config(e) => e,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Predict(args) => cmd_predict(args),
        Cmd::Detect(args) => cmd_detect(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Mine(args) => cmd_mine(args),
    }
}

/// One output record of detect/mine.
#[derive(Serialize)]
struct MineRecord {
    line: usize,
    text: String,
    assignments: Vec<RecordAssignment>,
    termination: TerminationReason,
}

#[derive(Serialize)]
struct RecordAssignment {
    label: String,
    words: Vec<String>,
    probability: f32,
}

impl MineRecord {
    fn build(
        line: usize,
        text: &str,
        prediction: &masklid::SentencePrediction,
        model: &ClassifierModel,
    ) -> Self {
        let words = tokenize(text);
        let assignments = prediction
            .assignments
            .iter()
            .map(|a| RecordAssignment {
                label: canonical_label(model.dictionary().label(a.label)).to_string(),
                words: a.words.iter().map(|&t| words[t].to_string()).collect(),
                probability: a.probability,
            })
            .collect();
        MineRecord {
            line,
            text: text.to_string(),
            assignments,
            termination: prediction.termination,
        }
    }

    fn to_tsv(&self) -> String {
        let assignments = self
            .assignments
            .iter()
            .map(|a| format!("{}:{:.4}:{}", a.label, a.probability, a.words.join("+")))
            .collect::<Vec<_>>()
            .join("\t");
        let reason = serde_json::to_value(self.termination)
            .expect("enum serializes")
            .as_str()
            .unwrap()
            .to_string();
        format!("{}\t{}\t{}\t{}", self.line, reason, self.text, assignments)
    }
}

fn input_lines(text: Option<String>) -> Box<dyn Iterator<Item = io::Result<String>>> {
    match text {
        Some(t) => Box::new(t.lines().map(|l| Ok(l.to_string())).collect::<Vec<_>>().into_iter()),
        None => Box::new(io::stdin().lock().lines()),
    }
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let (model, subset) = args.model.load()?;
    let stdout = io::stdout().lock();
    let mut out = BufWriter::new(stdout);
    for line in input_lines(args.text) {
        let line = line.map_err(|e| CliError::Input(e.into()))?;
        if tokenize(&line).is_empty() {
            continue;
        }
        let ranked = match featurize(&line, &model).and_then(|f| predict(&f, &model, &subset)) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("skipping line ({e})");
                continue;
            }
        };
        let top: Vec<(String, f32)> = ranked
            .ranked()
            .iter()
            .take(args.top_k)
            .map(|(l, p)| (canonical_label(model.dictionary().label(*l)).to_string(), *p))
            .collect();
        let rendered = match args.format {
            OutputFormat::Tsv => top
                .iter()
                .map(|(l, p)| format!("{l}\t{p:.6}"))
                .collect::<Vec<_>>()
                .join("\t"),
            OutputFormat::Jsonl => serde_json::json!({
                "labels": top
                    .iter()
                    .map(|(l, p)| serde_json::json!({"label": l, "probability": p}))
                    .collect::<Vec<_>>()
            })
            .to_string(),
        };
        writeln!(out, "{rendered}").map_err(|e| CliError::Input(e.into()))?;
    }
    out.flush().map_err(|e| CliError::Input(e.into()))?;
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let cfg = args.mask.resolve()?;
    let (model, subset) = args.model.load()?;
    let stdout = io::stdout().lock();
    let mut out = BufWriter::new(stdout);
    for (no, line) in input_lines(args.text).enumerate() {
        let line = line.map_err(|e| CliError::Input(e.into()))?;
        if tokenize(&line).is_empty() {
            continue;
        }
        match masklid(&line, &model, &subset, &cfg) {
            Ok(prediction) => {
                let record = MineRecord::build(no + 1, &line, &prediction, &model);
                let rendered = match args.format {
                    OutputFormat::Jsonl => serde_json::to_string(&record)
                        .map_err(|e| CliError::Input(e.into()))?,
                    OutputFormat::Tsv => record.to_tsv(),
                };
                writeln!(out, "{rendered}").map_err(|e| CliError::Input(e.into()))?;
            }
            Err(e) => eprintln!("line {}: {e}", no + 1),
        }
    }
    out.flush().map_err(|e| CliError::Input(e.into()))?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let format: DatasetFormat = args
        .dataset_format
        .parse()
        .map_err(|e: String| CliError::Config(anyhow!(e)))?;
    let cfg = args.mask.resolve()?;
    let (model, subset) = args.model.load()?;
    let label_map = match &args.label_map {
        Some(path) => Some(LabelMap::from_path(path).map_err(|e| CliError::Config(anyhow!(e)))?),
        None => None,
    };
    let sentences = ingest_token_labeled(&args.dataset, format, label_map.as_ref())
        .map_err(|e| CliError::Input(anyhow!(e)))?;
    let sentences = if args.raw {
        sentences
    } else {
        preprocess(sentences)
    };

    let baseline_cfg = BaselineConfig {
        threshold: args.threshold,
        max_labels: args.max_labels,
    };
    let predictions: Vec<BTreeSet<String>> = ordered_map(&sentences, args.jobs, |s| {
        predict_set(&s.text, &model, &subset, args.mode, &cfg, &baseline_cfg)
    });
    let report = score(&predictions, &sentences).map_err(|e| CliError::Input(anyhow!(e)))?;
    let rendered = match args.format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Input(e.into()))?;
            s.push('\n');
            s
        }
    };
    print!("{rendered}");
    Ok(())
}

fn predict_set(
    text: &str,
    model: &ClassifierModel,
    subset: &LabelSubset,
    mode: EvalMode,
    cfg: &MaskLIDConfig,
    baseline_cfg: &BaselineConfig,
) -> BTreeSet<String> {
    match mode {
        EvalMode::Baseline => baseline_predict(text, model, subset, baseline_cfg)
            .unwrap_or_default(),
        EvalMode::Masklid => match masklid(text, model, subset, cfg) {
            Ok(p) => p
                .assignments
                .iter()
                .map(|a| canonical_label(model.dictionary().label(a.label)).to_string())
                .collect(),
            Err(_) => BTreeSet::new(),
        },
    }
}

fn cmd_mine(args: MineArgs) -> Result<(), CliError> {
    let cfg = args.mask.resolve()?;
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))
        .map_err(CliError::Config)?;
    let names = load_label_file(&args.labels)
        .with_context(|| format!("reading labels {}", args.labels.display()))
        .map_err(CliError::Config)?;
    let subset = restrict_labels(&model, &names)
        .context("restricting label set")
        .map_err(CliError::Config)?
        .subset;

    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(io::BufReader::new(
            std::fs::File::open(path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(CliError::Input)?,
        )),
        None => Box::new(io::BufReader::new(io::stdin())),
    };
    let stdout = io::stdout().lock();
    let mut out = BufWriter::new(stdout);

    // Ordered parallel map over batches: workers run per line, output is
    // reassembled in input order, so results are byte-identical for any
    // job count. Lines that fail to decode are logged and skipped.
    const BATCH: usize = 4096;
    let mut line_no = 0usize;
    let mut reader = reader;
    let mut done = false;
    while !done {
        let mut batch: Vec<(usize, String)> = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            let mut raw = Vec::new();
            let n = reader
                .read_until(b'\n', &mut raw)
                .map_err(|e| CliError::Input(e.into()))?;
            if n == 0 {
                done = true;
                break;
            }
            line_no += 1;
            while raw.last().is_some_and(|b| matches!(b, b'\n' | b'\r')) {
                raw.pop();
            }
            match String::from_utf8(raw) {
                Ok(line) => batch.push((line_no, line)),
                Err(_) => eprintln!("line {line_no}: not valid UTF-8, skipped"),
            }
        }
        if batch.is_empty() {
            break;
        }
        let results = ordered_map(&batch, args.jobs, |(no, line)| {
            mine_line(*no, line, &model, &subset, &cfg, args.format)
        });
        for result in results {
            match result {
                Ok(Some(rendered)) => {
                    writeln!(out, "{rendered}").map_err(|e| CliError::Input(e.into()))?
                }
                Ok(None) => {}
                Err(msg) => eprintln!("{msg}"),
            }
        }
    }
    out.flush().map_err(|e| CliError::Input(e.into()))?;
    Ok(())
}

fn mine_line(
    no: usize,
    line: &str,
    model: &ClassifierModel,
    subset: &LabelSubset,
    cfg: &MaskLIDConfig,
    format: OutputFormat,
) -> Result<Option<String>, String> {
    if tokenize(line).is_empty() {
        return Ok(None);
    }
    let prediction = masklid(line, model, subset, cfg).map_err(|e| format!("line {no}: {e}"))?;
    if !prediction.is_code_switched() {
        return Ok(None);
    }
    let record = MineRecord::build(no, line, &prediction, model);
    let rendered = match format {
        OutputFormat::Jsonl => serde_json::to_string(&record).map_err(|e| e.to_string())?,
        OutputFormat::Tsv => record.to_tsv(),
    };
    Ok(Some(rendered))
}

/// Maps items to results, preserving input order for every job count.
fn ordered_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 {
        items.iter().map(f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            items.par_iter().map(|t| f(t)).collect()
        })
    }
}
