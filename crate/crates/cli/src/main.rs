mod manifest;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use wwm_core::builder::default_max_predictions;
use wwm_core::ingest::{clean_documents, decode_utf8, parse_corpus, split_extracted, write_corpus};
use wwm_core::record::write_sidecar_entry;
use wwm_core::rng::stream;
use wwm_core::wwm::{align, apply_mask, per_token_units, unit_text};
use wwm_core::{
    analyze, build_all, prepare_corpus, AnalyzeOptions, BuildConfig, Lexicon, MaskingConfig, RecordFormat,
    RecordHeader, RecordReader, RecordWriter, SegMode, Segmenter, SidecarReader, Tokenizer, Vocab,
};

use manifest::{with_suffix, AtomicFile, RunManifest};

/// Documents built per parallel batch. Output order does not depend on it.
const BUILD_BATCH: usize = 256;

#[derive(Parser)]
#[command(name = "wwm", version, about = "Whole word masking pre-training data for Chinese corpora")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean extracted text and write the one-sentence-per-line corpus.
    Ingest(IngestArgs),
    /// Show pieces and word units for one sentence.
    Tokenize(TokenizeArgs),
    /// Convert a corpus into masked training records.
    Build(BuildArgs),
    /// Report masking and atomicity statistics for a record file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input file or directory (searched recursively).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TokenizeArgs {
    /// Sentence to tokenize; read from --file when absent.
    text: Option<String>,
    #[arg(long, conflicts_with = "text")]
    file: Option<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value = "presegmented")]
    seg_mode: SegMode,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Lowercase and strip accents from non-CJK text.
    #[arg(long)]
    lowercase: bool,
    /// Comma-separated words to mask with `[MASK]`.
    #[arg(long, value_delimiter = ',')]
    mask_words: Vec<String>,
    /// Print a JSON object instead of the row layout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BuildArgs {
    /// Rerun the build recorded in this manifest. Only --out and --threads
    /// may be combined with it.
    #[arg(long, conflicts_with_all = [
        "input", "vocab", "seg_mode", "lexicon", "lowercase", "max_seq_len", "masked_lm_prob",
        "max_predictions_per_seq", "dupe_factor", "short_seq_prob", "random_seed", "emit_units", "format",
    ])]
    manifest: Option<PathBuf>,
    /// Corpus file: one sentence per line, blank line between documents.
    #[arg(long, required_unless_present = "manifest")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    vocab: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
    #[arg(long, default_value = "fmm")]
    seg_mode: SegMode,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Lowercase and strip accents from non-CJK text.
    #[arg(long)]
    lowercase: bool,
    #[arg(long, default_value_t = 128)]
    max_seq_len: usize,
    #[arg(long, default_value_t = 0.15)]
    masked_lm_prob: f64,
    /// Defaults to round(max_seq_len * masked_lm_prob), at least 20 and at most max_seq_len - 3.
    #[arg(long)]
    max_predictions_per_seq: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dupe_factor: usize,
    #[arg(long, default_value_t = 0.1)]
    short_seq_prob: f64,
    #[arg(long, default_value_t = 12345)]
    random_seed: u64,
    /// Also write `<out>.units.jsonl` with word units and actions.
    #[arg(long)]
    emit_units: bool,
    #[arg(long, default_value = "jsonl")]
    format: RecordFormat,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Skip instances shorter than this many unpadded tokens.
    #[arg(long, default_value_t = 0)]
    min_unpadded_len: usize,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(wwm_core::Error),
    Io(io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(wwm_core::Error::Config(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<wwm_core::Error> for CliError {
    fn from(e: wwm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn with_path<T>(path: &Path, r: io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WWM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Tokenize(a) => cmd_tokenize(a),
        Command::Build(a) => cmd_build(a),
        Command::Stats(a) => cmd_stats(a),
    })
}

fn load_vocab(path: &Path) -> CliResult<Vocab> {
    let bytes = with_path(path, fs::read(path))?;
    Ok(Vocab::from_bytes(&bytes)?)
}

fn make_segmenter(mode: SegMode, lexicon: Option<&Path>) -> CliResult<Segmenter> {
    Ok(match mode {
        SegMode::Fmm => {
            let path = lexicon.ok_or_else(|| CliError::Usage("--seg-mode fmm requires --lexicon".into()))?;
            let text = decode_utf8(with_path(path, fs::read(path))?)?;
            Segmenter::Fmm(Lexicon::from_text(&text)?)
        }
        SegMode::Presegmented => Segmenter::Presegmented,
        SegMode::Char => Segmenter::Char,
    })
}

fn cmd_ingest(args: IngestArgs) -> CliResult<()> {
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(&args.input).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io(e.into()))?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    let mut raw = Vec::new();
    for path in &files {
        let text = decode_utf8(with_path(path, fs::read(path))?)?;
        let id = path.strip_prefix(&args.input).unwrap_or(path).to_string_lossy().into_owned();
        let id = if id.is_empty() { path.to_string_lossy().into_owned() } else { id };
        raw.extend(split_extracted(&text, &id));
    }
    let docs = clean_documents(&raw);
    let mut out = with_path(&args.out, AtomicFile::create(&args.out))?;
    let lines = write_corpus(&docs, &mut out)?;
    out.commit()?;
    info!("{} files, {} documents, {lines} lines written to {}", files.len(), docs.len(), args.out.display());
    Ok(())
}

fn cmd_tokenize(args: TokenizeArgs) -> CliResult<()> {
    let text = match (&args.text, &args.file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => decode_utf8(with_path(p, fs::read(p))?)?,
        (None, None) => return Err(CliError::Usage("give a sentence or --file".into())),
    };
    let text = text.trim_end_matches(['\n', '\r']).to_owned();
    let vocab = load_vocab(&args.vocab)?;
    let segmenter = make_segmenter(args.seg_mode, args.lexicon.as_deref())?;
    let tokenizer = Tokenizer::new(&vocab).with_lowercase(args.lowercase);

    let tokens = tokenizer.tokenize(&text);
    let words = segmenter.segment(&text);
    let units = if args.seg_mode == SegMode::Char {
        per_token_units(tokens.len())
    } else {
        align(&words, &tokens, &text).units
    };
    let pieces: Vec<&str> = tokens.texts(&vocab);
    let sizes: Vec<usize> = units.iter().map(|u| u.len()).collect();
    let original: String = text.chars().filter(|&c| !wwm_core::text::is_blank(c)).collect();

    let masked = if args.mask_words.is_empty() {
        None
    } else {
        let chosen: Vec<usize> = (0..units.len())
            .filter(|&i| args.mask_words.iter().any(|w| *w == unit_text(units[i], &tokens, &text)))
            .collect();
        let all_mask = MaskingConfig {
            mask_ratio: 1.0,
            random_ratio: 0.0,
            keep_ratio: 0.0,
            ..MaskingConfig::default()
        };
        let mut ids = tokens.ids();
        apply_mask(&mut ids, &units, &chosen, &all_mask, &vocab, &mut stream(0, &[]));
        Some(ids.iter().map(|&id| vocab.token(id).unwrap_or("[UNK]").to_owned()).collect::<Vec<_>>())
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.json {
        let value = serde_json::json!({
            "original": original,
            "words": words.texts(),
            "pieces": pieces,
            "unit_sizes": sizes,
            "masked": masked,
        });
        writeln!(out, "{value}")?;
    } else {
        writeln!(out, "{:<20}{original}", "Original Sentence")?;
        writeln!(out, "{:<20}{}", "+ CWS", words.texts().join(" "))?;
        writeln!(out, "{:<20}{}", "+ BERT Tokenizer", pieces.join(" "))?;
        let sizes: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{:<20}[{}]", "Word Units", sizes.join(","))?;
        if let Some(m) = masked {
            writeln!(out, "{:<20}{}", "Whole Word Masking", m.join(" "))?;
        }
    }
    Ok(())
}

fn cmd_build(args: BuildArgs) -> CliResult<()> {
    let manifest = match &args.manifest {
        Some(path) => {
            let mut m = with_path(path, RunManifest::load(path))?;
            if let Some(out) = &args.out {
                m.sidecar = m.sidecar.is_some().then(|| with_suffix(out, ".units.jsonl"));
                m.output = out.clone();
            }
            m
        }
        None => {
            let out = args.out.clone().expect("required by clap");
            let max_predictions = args
                .max_predictions_per_seq
                .unwrap_or_else(|| default_max_predictions(args.max_seq_len, args.masked_lm_prob));
            let config = BuildConfig {
                max_seq_len: args.max_seq_len,
                short_seq_prob: args.short_seq_prob,
                dupe_factor: args.dupe_factor,
                masking: MaskingConfig {
                    masked_lm_prob: args.masked_lm_prob,
                    max_predictions_per_seq: max_predictions,
                    seed: args.random_seed,
                    ..MaskingConfig::default()
                },
                ..BuildConfig::for_length(args.max_seq_len)
            };
            RunManifest {
                tool: "wwm".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                input: args.input.clone().expect("required by clap"),
                vocab: args.vocab.clone().expect("required by clap"),
                lexicon: args.lexicon.clone(),
                sidecar: args.emit_units.then(|| with_suffix(&out, ".units.jsonl")),
                output: out,
                format: args.format,
                seg_mode: args.seg_mode,
                lowercase: args.lowercase,
                config,
                vocab_fingerprint: String::new(),
                counters: Default::default(),
            }
        }
    };
    run_build(manifest)
}

fn run_build(mut m: RunManifest) -> CliResult<()> {
    let started = Instant::now();
    m.config.validate()?;
    let vocab = load_vocab(&m.vocab)?;
    let fingerprint = format!("{:016x}", vocab.fingerprint());
    if !m.vocab_fingerprint.is_empty() && m.vocab_fingerprint != fingerprint {
        log::warn!("manifest vocabulary {} differs from loaded {}", m.vocab_fingerprint, fingerprint);
    }
    m.vocab_fingerprint = fingerprint;
    let segmenter = make_segmenter(m.seg_mode, m.lexicon.as_deref())?;
    let tokenizer = Tokenizer::new(&vocab).with_lowercase(m.lowercase);

    let text = decode_utf8(with_path(&m.input, fs::read(&m.input))?)?;
    let lines = parse_corpus(&text);
    let (docs, prep) = prepare_corpus(&lines, &tokenizer, &segmenter);
    info!("{} documents, {} sentences tokenized", prep.documents, prep.sentences);

    let header = RecordHeader::new(m.config.max_seq_len, m.config.masking.max_predictions_per_seq, &vocab);
    let out = with_path(&m.output, AtomicFile::create(&m.output))?;
    let mut writer = RecordWriter::new(out, m.format, header)?;
    let mut sidecar = match &m.sidecar {
        Some(p) => Some(with_path(p, AtomicFile::create(p))?),
        None => None,
    };
    let built = build_all(&docs, &m.config, &vocab, BUILD_BATCH, |batch| {
        for b in &batch {
            writer.write(&b.instance)?;
            if let Some(s) = sidecar.as_mut() {
                write_sidecar_entry(s, &b.sidecar)?;
            }
        }
        Ok(())
    })?;
    writer.into_inner()?.commit()?;
    if let Some(s) = sidecar {
        s.commit()?;
    }

    m.counters = built;
    m.counters.documents = prep.documents;
    m.counters.sentences = prep.sentences;
    m.counters.alignment_mismatches = prep.alignment_mismatches;
    m.save(&RunManifest::path_for(&m.output))?;
    info!(
        "{} instances written to {} in {:.1}s",
        m.counters.instances,
        m.output.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> CliResult<()> {
    let vocab = load_vocab(&args.vocab)?;
    let records = RecordReader::new(BufReader::new(with_path(&args.records, File::open(&args.records))?))?;
    let sidecar = match &args.sidecar {
        Some(p) => Some(SidecarReader::new(BufReader::new(with_path(p, File::open(p))?))),
        None => None,
    };
    let opts = AnalyzeOptions {
        min_unpadded_len: args.min_unpadded_len,
    };
    let report = analyze(records, &vocab, sidecar, &opts)?;
    let json = serde_json::to_string_pretty(&report).map_err(io::Error::from)?;
    match &args.report_out {
        Some(p) => {
            let mut f = BufWriter::new(with_path(p, File::create(p))?);
            writeln!(f, "{json}")?;
            f.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}
