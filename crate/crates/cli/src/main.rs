//! `dragbench` command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use dragbench::document::{load_ocr_file, normalize_reading_order, Document, DocumentError};
use dragbench::geometry::Point;
use dragbench::grounding::{fuzzy_ground_span, ground_span};
use dragbench::harness::{
    emit_report, evaluate, load_dataset, load_predictions, render_table, DatasetError, PredictionError, ReportError,
    ReportFormat,
};
use dragbench::metrics::EvalConfig;
use dragbench::selection::{simulate_detailed, DragGesture};
use dragbench::som::{load_image, render_som, save_png, Mark, SomError};
use dragbench::synth::{
    corpus_jsonl, parse_corpus_jsonl, run_corpus, spot_check_sample, CandidateExample, CorpusRecord, HttpAnnotator,
    HttpAnnotatorConfig, PipelineError, PipelineInput, PipelinePolicy, Screenshot, ANNOTATOR_URL_ENV,
};
use dragbench::taxonomy::GroupKey;

enum Failure {
    Validation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Io(m) => m,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Io { .. } => Failure::Io(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. }
            | DatasetError::Ocr {
                source: DocumentError::Io { .. },
                ..
            } => Failure::Io(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<PredictionError> for Failure {
    fn from(e: PredictionError) -> Self {
        match e {
            PredictionError::Io { .. } => Failure::Io(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => Failure::Io(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<SomError> for Failure {
    fn from(e: SomError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            invalid(e)
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Checkpoint { .. } | PipelineError::Annotator { .. } => Failure::Io(e.to_string()),
            PipelineError::Som(s) => s.into(),
            other => invalid(other),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dragbench",
    version,
    about = "Text-drag grounding evaluation and data tooling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against a benchmark dataset.
    Eval(EvalArgs),
    /// Print an OCR file in reading order.
    Reorder {
        doc: PathBuf,
        /// Replace word ids with their reading index.
        #[arg(long)]
        renumber: bool,
    },
    /// Locate a text span among a document's words.
    Ground {
        doc: PathBuf,
        #[arg(long)]
        span: String,
        /// Token edits allowed when no exact match exists.
        #[arg(long, default_value_t = 0)]
        max_edits: usize,
    },
    /// Simulate the selection a drag produces.
    Simulate {
        doc: PathBuf,
        #[arg(long)]
        start: PointArg,
        #[arg(long)]
        end: PointArg,
    },
    /// Run the synthesis pipeline described by a TOML config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = ANNOTATOR_URL_ENV, hide_env_values = true)]
        annotator_url: Option<String>,
    },
    /// Draw numbered marks on an image.
    RenderSom {
        image: PathBuf,
        /// JSON list of `{id, bbox | point, color?}`.
        marks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample corpus records for manual review.
    SpotCheck {
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Pixel threshold (default 3).
    #[arg(long)]
    phi: Option<f64>,
    /// Count untriggered examples as failures in SR.
    #[arg(long)]
    unconditional: bool,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Comma-separated grouping keys.
    #[arg(long, value_delimiter = ',')]
    group_by: Vec<GroupKey>,
    /// TOML file with `phi`, `conditional_aggregation`, `min_confidence`, `group_by`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; `.json` and `.txt` files are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [Format::Json, Format::Text])]
    format: Vec<Format>,
    /// Record the wall-clock time in the report.
    #[arg(long)]
    timestamp: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Text,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Text => "text",
        })
    }
}

#[derive(Clone, Copy)]
struct PointArg(Point);

impl FromStr for PointArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let p = Point::new(parse(x)?, parse(y)?);
        if !p.is_finite() {
            return Err("coordinates must be finite".into());
        }
        Ok(PointArg(p))
    }
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct EvalFile {
    phi: Option<f64>,
    conditional_aggregation: Option<bool>,
    min_confidence: Option<f64>,
    group_by: Option<Vec<GroupKey>>,
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_doc(path: &Path) -> Result<Document, Failure> {
    Ok(normalize_reading_order(load_ocr_file(path)?))
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let file: EvalFile = match &a.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => EvalFile::default(),
    };
    let mut cfg = EvalConfig::default();
    cfg.phi = a.phi.or(file.phi).unwrap_or(cfg.phi);
    cfg.conditional_aggregation = !a.unconditional && file.conditional_aggregation.unwrap_or(true);
    cfg.min_confidence = a.min_confidence.or(file.min_confidence).unwrap_or(cfg.min_confidence);
    let group_by = if a.group_by.is_empty() {
        file.group_by.unwrap_or_default()
    } else {
        a.group_by
    };

    let dataset = load_dataset(&a.dataset)?;
    for w in &dataset.warnings {
        eprintln!("warning: record {} ({}): {}", w.index, w.example_id, w.message);
    }
    let predictions = load_predictions(&a.predictions)?;
    let mut report = evaluate(&dataset, &predictions, &cfg, &group_by).map_err(invalid)?;
    if a.timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.generated_at = Some(format!("unix:{secs}"));
    }
    let formats: Vec<ReportFormat> = a
        .format
        .iter()
        .map(|f| match f {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        })
        .collect();
    let written = emit_report(&report, &a.out, &formats)?;
    print!("{}", render_table(&report));
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_reorder(doc: &Path, renumber: bool) -> CmdResult {
    let doc = load_doc(doc)?;
    let mut records = doc.to_records();
    if renumber {
        for (k, r) in records.iter_mut().enumerate() {
            r.id = k as u64;
        }
    }
    println!("{}", serde_json::to_string_pretty(&records).expect("records serialize"));
    Ok(())
}

fn cmd_ground(doc: &Path, span: &str, max_edits: usize) -> CmdResult {
    let doc = load_doc(doc)?;
    let result = if max_edits == 0 {
        ground_span(&doc, span)
    } else {
        fuzzy_ground_span(&doc, span, max_edits)
    };
    println!("{}", serde_json::to_string_pretty(&result).expect("results serialize"));
    Ok(())
}

fn cmd_simulate(doc: &Path, start: Point, end: Point) -> CmdResult {
    let doc = load_doc(doc)?;
    let gesture = DragGesture::new(start, end);
    let selection = simulate_detailed(&doc, &gesture);
    let out = json!({ "gesture": gesture, "selection": selection });
    println!("{}", serde_json::to_string_pretty(&out).expect("selection serializes"));
    Ok(())
}

fn cmd_render_som(image: &Path, marks: &Path, out: &Path) -> CmdResult {
    let img = load_image(image)?;
    let marks: Vec<Mark> =
        serde_json::from_str(&read_text(marks)?).map_err(|e| invalid(format!("{}: {e}", marks.display())))?;
    let rendered = render_som(&img, &marks)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    save_png(&rendered, out)?;
    Ok(())
}

fn cmd_spot_check(corpus: &Path, fraction: f64, seed: u64, out: Option<&Path>) -> CmdResult {
    let records: Vec<CorpusRecord> = parse_corpus_jsonl(&read_text(corpus)?)
        .map_err(|(line, e)| invalid(format!("{} line {}: {e}", corpus.display(), line + 1)))?;
    let manifest = spot_check_sample(&records, fraction, seed).map_err(invalid)?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize") + "\n";
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthConfig {
    /// Corpus JSONL output.
    output: PathBuf,
    /// Dropped-candidate JSONL output.
    #[serde(default)]
    dropped: Option<PathBuf>,
    #[serde(default)]
    policy: PipelinePolicy,
    #[serde(default)]
    annotator: HttpAnnotatorConfig,
    screenshots: Vec<ScreenshotEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenshotEntry {
    id: String,
    image: String,
    ocr: PathBuf,
    /// JSON list of pre-authored candidates.
    #[serde(default)]
    candidates: Option<PathBuf>,
}

fn cmd_synth(config: &Path, annotator_url: Option<String>) -> CmdResult {
    let mut cfg: SynthConfig =
        toml::from_str(&read_text(config)?).map_err(|e| invalid(format!("{}: {e}", config.display())))?;
    let base = config.parent().unwrap_or(Path::new(""));
    cfg.policy.som_dir = cfg.policy.som_dir.map(|d| base.join(d));
    cfg.policy.checkpoint_dir = cfg.policy.checkpoint_dir.map(|d| base.join(d));

    let mut shots = Vec::new();
    let mut docs = Vec::new();
    let mut candidates = Vec::new();
    for s in &cfg.screenshots {
        let image = load_image(&base.join(&s.image))?;
        let doc = load_doc(&base.join(&s.ocr))?.with_image_size(image.width(), image.height());
        let given: Option<Vec<CandidateExample>> = match &s.candidates {
            Some(p) => {
                let p = base.join(p);
                Some(serde_json::from_str(&read_text(&p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?)
            }
            None => None,
        };
        shots.push(Screenshot {
            id: s.id.clone(),
            reference: s.image.clone(),
            image,
        });
        docs.push(doc);
        candidates.push(given);
    }
    let inputs: Vec<PipelineInput> = shots
        .iter()
        .zip(&docs)
        .zip(candidates)
        .map(|((screenshot, doc), candidates)| PipelineInput {
            screenshot,
            doc,
            candidates,
        })
        .collect();

    let http = match (&annotator_url, cfg.policy.offline) {
        (Some(url), false) => Some(HttpAnnotator::new(HttpAnnotatorConfig {
            url: url.clone(),
            ..cfg.annotator.clone()
        })),
        (None, false) => {
            return Err(invalid(format!(
                "online synthesis needs an annotator URL (--annotator-url or {ANNOTATOR_URL_ENV})"
            )))
        }
        (_, true) => None,
    };
    let annotator = http.as_ref().map(|h| h as &dyn dragbench::synth::Annotator);

    let mut records = Vec::new();
    let mut dropped = String::new();
    for result in run_corpus(&inputs, annotator, &cfg.policy) {
        let out = result?;
        records.extend(out.examples.iter().map(CorpusRecord::from));
        for d in &out.dropped {
            dropped.push_str(&serde_json::to_string(d).expect("drop records serialize"));
            dropped.push('\n');
        }
    }
    write_text(&base.join(&cfg.output), &corpus_jsonl(&records))?;
    if let Some(p) = &cfg.dropped {
        write_text(&base.join(p), &dropped)?;
    }
    eprintln!(
        "{} examples emitted, {} candidates dropped",
        records.len(),
        dropped.lines().count()
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Reorder { doc, renumber } => cmd_reorder(&doc, renumber),
        Command::Ground { doc, span, max_edits } => cmd_ground(&doc, &span, max_edits),
        Command::Simulate { doc, start, end } => cmd_simulate(&doc, start.0, end.0),
        Command::Synth { config, annotator_url } => cmd_synth(&config, annotator_url),
        Command::RenderSom { image, marks, out } => cmd_render_som(&image, &marks, &out),
        Command::SpotCheck {
            corpus,
            fraction,
            seed,
            out,
        } => cmd_spot_check(&corpus, fraction, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
