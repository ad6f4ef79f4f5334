use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biomt::bleu::{corpus_bleu_with, tokenize_eval, Smoothing, DEFAULT_MAX_ORDER};
use biomt::exec::set_thread_cap;
use biomt::ingest::{self, DocMeta};
use biomt::model::{sha256_hex, validate_manifest, CorpusManifest, LangPair, NmtConfigCapture, NmtConfigOverrides};
use biomt::pipeline::{self, PartitionSpec, PartitionUnit, DEFAULT_SEED};
use biomt::report::{load_official_scores, DEFAULT_FIXTURE};
use biomt::smt::{
    decode_corpus, rotated_control_bleu, tokenize_bitext, train_bigram_lm, train_ibm1_tokens, BaselineError,
    DecoderWeights, LanguageModel, TranslationTable,
};
use biomt::umls;
use biomt::workflow::{self, open, write_file, CorpusSpec, PipelineConfig, Stage, WorkflowError};
use biomt::Exec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const TT_FILE: &str = "translation_table.tsv";
const LM_FILE: &str = "language_model.tsv";
const LOG_FILE: &str = "training_log.json";

#[derive(Debug, Parser, Serialize)]
#[command(name = "biomt", version, about = "Biomedical parallel corpus preparation and evaluation")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    #[serde(skip)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Read a bitext and write its manifest.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        /// Manifest path; stdout if absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check a manifest against the files it lists.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory the manifest paths are relative to; defaults to the manifest's directory.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Pair preferred UMLS terms across two languages.
    UmlsExtract {
        #[arg(long)]
        mrconso: PathBuf,
        #[arg(long, default_value = "ENG-SPA")]
        pair: LangPair,
        /// Term pair TSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = ingest::DEFAULT_MALFORMED_CAP)]
        max_malformed: usize,
    },
    /// Drop segments from documents listed in bibliographic exports.
    Filter {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "metadata", required = true)]
        metadata: Vec<PathBuf>,
        /// `doc_id<TAB>title` file.
        #[arg(long)]
        titles: Option<PathBuf>,
        /// Kept segments as TSV.
        #[arg(long)]
        out: PathBuf,
        /// Removed segments as TSV.
        #[arg(long)]
        removed: Option<PathBuf>,
    },
    /// Seeded train/dev split.
    Partition {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        dev_size: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = UnitArg::Segment)]
        unit: UnitArg,
        /// Receives train.tsv and dev.tsv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-corpus and per-pair segment counts from manifests.
    Stats {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        /// Printed total to compare against, e.g. `ENG-SPA=2.37M`.
        #[arg(long = "printed")]
        printed: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Train the lexical baseline.
    TrainBaseline {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        /// Allow alignment to an empty source word.
        #[arg(long)]
        null: bool,
        /// Add-k constant of the bigram model.
        #[arg(long, default_value_t = 0.1)]
        lm_k: f64,
        #[arg(long)]
        model_dir: PathBuf,
    },
    /// Translate one sentence per line.
    Translate {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Translate a test bitext and score it, next to a rotated-reference control.
    Evaluate {
        #[arg(long)]
        model_dir: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Corpus BLEU of a hypothesis file against a reference file.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        lowercase: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
        max_n: usize,
        #[arg(long, default_value = "none")]
        smoothing: Smoothing,
    },
    /// Official shared-task scores.
    Report {
        #[arg(long, default_value = DEFAULT_FIXTURE)]
        fixture: PathBuf,
        /// One direction only, e.g. `ES/EN`.
        #[arg(long)]
        direction: Option<String>,
    },
    /// Write the neural system configuration record.
    EmitNmtConfig {
        #[arg(long, allow_negative_numbers = true)]
        word_vector_size: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        layers: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        rnn_size: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        batch_size: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        vocabulary_size: Option<i64>,
        /// Stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configured preparation pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Skip the terminology stage even if configured.
        #[arg(long)]
        no_append_terms: bool,
    },
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// `source<TAB>target[<TAB>doc_id]` file.
    #[arg(long, conflicts_with_all = ["source", "target"], required_unless_present = "source")]
    tsv: Option<PathBuf>,
    /// Source side, one segment per line.
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    #[arg(long, default_value = "ENG-SPA")]
    pair: LangPair,
    /// Corpus name recorded on each segment.
    #[arg(long, default_value = "corpus")]
    name: String,
}

impl InputArgs {
    fn spec(&self) -> CorpusSpec {
        match (&self.tsv, &self.source, &self.target) {
            (Some(path), _, _) => CorpusSpec::Tsv {
                name: self.name.clone(),
                path: path.clone(),
            },
            (None, Some(source), Some(target)) => CorpusSpec::Text {
                name: self.name.clone(),
                source: source.clone(),
                target: target.clone(),
            },
            _ => unreachable!("clap enforces one input form"),
        }
    }

    fn read(&self) -> Result<workflow::IngestedCorpus, WorkflowError> {
        workflow::read_corpus(&self.spec(), Path::new(""), &self.pair)
    }
}

#[derive(Debug, Args, Serialize)]
struct DecoderArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda_tm: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_lm: f64,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
    #[arg(long, default_value_t = 10)]
    max_candidates: usize,
}

impl DecoderArgs {
    fn weights(&self) -> DecoderWeights {
        DecoderWeights {
            lambda_tm: self.lambda_tm,
            lambda_lm: self.lambda_lm,
            beam_width: self.beam_width,
            max_candidates: self.max_candidates,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum UnitArg {
    Segment,
    Document,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Format {
    Text,
    Tsv,
    Json,
}

fn main() -> ExitCode {
    // clap reports usage errors as 2, which is reserved here for I/O failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = set_thread_cap(threads) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match dispatch(&cli, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Seed and a hash of the effective arguments, so outputs can be traced to
/// the invocation that produced them.
fn announce(seed: u64, config_hash: &str) {
    eprintln!("seed={seed} config_hash={config_hash}");
}

fn read_to_string(path: &Path) -> Result<String, WorkflowError> {
    fs::read_to_string(path).map_err(|e| WorkflowError::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>, WorkflowError> {
    open(path)?
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| WorkflowError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), WorkflowError> {
    match out {
        Some(path) => write_file(path, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| WorkflowError::io(Path::new("<stdout>"), e)),
    }
}

fn create_dir(path: &Path) -> Result<(), WorkflowError> {
    fs::create_dir_all(path).map_err(|e| WorkflowError::io(path, e))
}

fn load_model(dir: &Path) -> Result<(TranslationTable, LanguageModel), WorkflowError> {
    let tt = TranslationTable::from_tsv(&read_to_string(&dir.join(TT_FILE))?)?;
    let lm = LanguageModel::from_tsv(&read_to_string(&dir.join(LM_FILE))?)?;
    Ok((tt, lm))
}

fn dispatch(cli: &Cli, exec: Exec) -> Result<(), WorkflowError> {
    if let Command::Run { config, no_append_terms } = &cli.command {
        return run(config, *no_append_terms, exec);
    }
    let hash = sha256_hex(serde_json::to_string(&cli.command).expect("arguments serialize").as_bytes());
    let seed = match &cli.command {
        Command::Partition { seed, .. } => *seed,
        _ => DEFAULT_SEED,
    };
    announce(seed, &hash);

    match &cli.command {
        Command::Ingest { input, manifest } => {
            let corpus = input.read()?;
            let mut m = corpus.manifest.expect("read_corpus sets a manifest");
            m.provenance_note = format!("seed={seed} config={hash}");
            emit(manifest.as_deref(), &(m.to_json() + "\n"))?;
            eprintln!("{} segments, {} blank lines skipped", m.segment_count, corpus.skipped);
        }
        Command::Validate { manifest, base } => {
            let m = CorpusManifest::from_json(&read_to_string(manifest)?)
                .map_err(|e| WorkflowError::Config(format!("{}: {e}", manifest.display())))?;
            let base = base
                .clone()
                .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            let report = validate_manifest(&m, &base)?;
            print!("{}", report.to_tsv());
            if !report.is_valid() {
                return Err(WorkflowError::ManifestViolations(report.violations.len()));
            }
        }
        Command::UmlsExtract { mrconso, pair, out, max_malformed } => {
            let keep = [pair.source().clone(), pair.target().clone()].into_iter().collect();
            let mut reader = ingest::parse_mrconso(open(mrconso)?, keep).with_malformed_cap(*max_malformed);
            let mut atoms = Vec::new();
            for atom in reader.by_ref() {
                atoms.push(atom.map_err(|source| WorkflowError::Input { path: mrconso.clone(), source })?);
            }
            let (pairs, report) = umls::extract_parallel_concepts_with(&atoms, pair, exec);
            write_file(out, &umls::term_pairs_to_tsv(&pairs))?;
            let summary = serde_json::json!({ "mrconso": reader.counts(), "extraction": report, "issues": reader.issues() });
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Filter { input, metadata, titles, out, removed } => {
            let segments = input.read()?.segments;
            let mut docs: Vec<DocMeta> = Vec::new();
            for path in metadata {
                let wrap = |source| WorkflowError::Input { path: path.clone(), source };
                for doc in ingest::parse_doc_metadata(open(path)?).map_err(wrap)? {
                    docs.push(doc.map_err(wrap)?);
                }
            }
            let index = pipeline::build_exclusion_index(docs);
            let titles = match titles {
                Some(p) => ingest::parse_doc_titles(open(p)?).map_err(|source| WorkflowError::Input { path: p.clone(), source })?,
                None => Default::default(),
            };
            let outcome = pipeline::filter_overlap_with(segments, &titles, &index, exec);
            write_file(out, &workflow::segments_to_tsv(&outcome.kept))?;
            if let Some(path) = removed {
                write_file(path, &workflow::segments_to_tsv(&outcome.removed))?;
            }
            println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes"));
        }
        Command::Partition { input, dev_size, seed, unit, out_dir } => {
            let segments = input.read()?.segments;
            let spec = PartitionSpec {
                dev_size: *dev_size,
                seed: *seed,
                unit: match unit {
                    UnitArg::Segment => PartitionUnit::Segment,
                    UnitArg::Document => PartitionUnit::Document,
                },
            };
            let split = pipeline::partition(segments, &spec)?;
            create_dir(out_dir)?;
            write_file(&out_dir.join("train.tsv"), &workflow::segments_to_tsv(&split.train))?;
            write_file(&out_dir.join("dev.tsv"), &workflow::segments_to_tsv(&split.dev))?;
            let rows = [workflow::SplitRow {
                pair: input.pair.clone(),
                train: split.train.len() as u64,
                dev: split.dev.len() as u64,
            }];
            print!("{}", workflow::render_splits(&rows));
        }
        Command::Stats { manifests, printed, format } => {
            let mut list = Vec::new();
            for path in manifests {
                list.push(
                    CorpusManifest::from_json(&read_to_string(path)?)
                        .map_err(|e| WorkflowError::Config(format!("{}: {e}", path.display())))?,
                );
            }
            let mut table = pipeline::corpus_stats(&list)?;
            for entry in printed {
                let (pair, figure) = entry
                    .split_once('=')
                    .ok_or_else(|| WorkflowError::Config(format!("expected PAIR=FIGURE, got {entry:?}")))?;
                let pair: LangPair = pair.parse()?;
                if let Some(warning) = table.check_printed_total(&pair, figure)? {
                    eprintln!("warning: {warning}");
                }
            }
            match format {
                Format::Text => print!("{}", table.render_text()),
                Format::Tsv => print!("{}", table.to_tsv()),
                Format::Json => println!("{}", table.to_json()),
            }
        }
        Command::TrainBaseline { input, iterations, null, lm_k, model_dir } => {
            let corpus = tokenize_bitext(&input.read()?.segments);
            let (tt, history) = train_ibm1_tokens(&corpus, *iterations, *null, exec)?;
            let lm = train_bigram_lm(corpus.iter().map(|(_, e)| e), *lm_k)?;
            create_dir(model_dir)?;
            write_file(&model_dir.join(TT_FILE), &tt.to_tsv())?;
            write_file(&model_dir.join(LM_FILE), &lm.to_tsv())?;
            let log = serde_json::json!({ "iterations": iterations, "null": null, "lm_k": lm_k, "log_likelihood": history });
            write_file(&model_dir.join(LOG_FILE), &serde_json::to_string_pretty(&log).expect("log serializes"))?;
            for (i, ll) in history.iter().enumerate() {
                println!("iteration {}\tlog-likelihood {ll:.4}", i + 1);
            }
        }
        Command::Translate { model_dir, input, output, decoder } => {
            let (tt, lm) = load_model(model_dir)?;
            let sources: Vec<Vec<String>> = read_lines(input)?.iter().map(|l| tokenize_eval(l, false)).collect();
            let hyps = decode_corpus(&sources, &tt, &lm, &decoder.weights(), exec)?;
            let mut text = String::new();
            for h in hyps {
                text.push_str(&h.join(" "));
                text.push('\n');
            }
            emit(output.as_deref(), &text)?;
        }
        Command::Evaluate { model_dir, input, decoder } => {
            let (tt, lm) = load_model(model_dir)?;
            let test = input.read()?.segments;
            let (hyps, refs) = biomt::smt::translate_test_set(&test, &tt, &lm, &decoder.weights(), exec)?;
            let report = corpus_bleu_with(&hyps, &refs, DEFAULT_MAX_ORDER, Smoothing::AddOneFromOrder2, exec)
                .map_err(BaselineError::from)?;
            let control = rotated_control_bleu(&hyps, &refs)?;
            let out = serde_json::json!({ "system": report, "rotated_control": control });
            println!("{}", serde_json::to_string_pretty(&out).expect("report serializes"));
            println!("system  {}", report.summary());
            println!("control {}", control.summary());
        }
        Command::Bleu { hyp, reference, lowercase, max_n, smoothing } => {
            let tok = |lines: Vec<String>| -> Vec<Vec<String>> { lines.iter().map(|l| tokenize_eval(l, *lowercase)).collect() };
            let hyps = tok(read_lines(hyp)?);
            let refs = tok(read_lines(reference)?);
            let report = corpus_bleu_with(&hyps, &refs, *max_n, *smoothing, exec).map_err(BaselineError::from)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            println!("{}", report.summary());
        }
        Command::Report { fixture, direction } => {
            let scores = load_official_scores(fixture)?;
            print!("{}", scores.render(direction.as_deref())?);
        }
        Command::EmitNmtConfig { word_vector_size, layers, rnn_size, batch_size, vocabulary_size, out } => {
            let overrides = NmtConfigOverrides {
                word_vector_size: *word_vector_size,
                layers: *layers,
                rnn_size: *rnn_size,
                batch_size: *batch_size,
                vocabulary_size: *vocabulary_size,
                ..Default::default()
            };
            let config = NmtConfigCapture::with_overrides(&overrides)?;
            emit(out.as_deref(), &(config.to_json() + "\n"))?;
        }
        Command::Run { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn run(config_path: &Path, no_append_terms: bool, exec: Exec) -> Result<(), WorkflowError> {
    let mut config = PipelineConfig::from_json(&read_to_string(config_path)?)?;
    if no_append_terms {
        config.stages.retain(|&s| s != Stage::AppendTerms);
    }
    announce(config.seed, &config.hash());
    let base = config_path.parent().unwrap_or(Path::new(""));
    let summary = workflow::run_pipeline(&config, base, exec).map_err(|f| {
        eprintln!("stopped after {} stage(s); see partial_report.json", f.partial.stages.len());
        f.error
    })?;
    for s in &summary.stages {
        println!("{:<13}input {:>9}  kept {:>9}  removed {:>9}", s.stage, s.input, s.kept, s.removed);
    }
    print!("{}", workflow::render_splits(&summary.splits));
    Ok(())
}
