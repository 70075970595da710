//! The `autolabel` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use autolabel::corpus::{load_dataset, synth_corpus, Dataset, DatasetFormat, VocabSpec};
use autolabel::data;
use autolabel::encode::{random_embeddings, EncodedInstance, Vocab};
use autolabel::evalx::{
    aggregate_metrics_csv, agreement, distribution_csv, run_experiment, run_key, write_report, EmbeddingSource,
    ExperimentConfig, ExperimentPlan, PipelineResources,
};
use autolabel::lexlabel::{label_dataset, LabelMethod, LabelSource, Lexicons};
use autolabel::models::{build_model, encode_batch, Architecture, Experiment, TrainConfig};
use autolabel::nn::{self, gradient_check, Activation, Layer, Mode, Node, DEFAULT_EPS};
use autolabel::textprep::{bundled_junk_words, load_word_list, StopwordPolicy};
use autolabel::Error;
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

/// Tolerance `gradcheck` applies to every layer and architecture.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "autolabel",
    version,
    about = "Lexicon labelling and sentiment classifier experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Append automatic label columns to a dataset.
    Label {
        #[command(flatten)]
        io: Io,
        /// afinn, vader or textblob; repeat or comma-separate for several.
        #[arg(long, value_delimiter = ',', required = true)]
        method: Vec<LabelMethod>,
        #[command(flatten)]
        lex: LexArgs,
    },
    /// Percentage agreement between two label sources.
    Agree {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        a: LabelSource,
        #[arg(long)]
        b: LabelSource,
        #[command(flatten)]
        lex: LexArgs,
    },
    /// Label distribution table as CSV.
    Dist {
        #[command(flatten)]
        io: Io,
        /// Automatic methods to include (default: all three).
        #[arg(long, value_delimiter = ',')]
        method: Vec<LabelMethod>,
        #[command(flatten)]
        lex: LexArgs,
    },
    /// One training run; writes report.json and metrics.csv to --out.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bilstm")]
        arch: Architecture,
        #[arg(long, default_value = "e1")]
        experiment: Experiment,
        /// Required for e2 and e3.
        #[arg(long)]
        method: Option<LabelMethod>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Training keys (key=value lines or JSON) over the protocol defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        pipe: PipelineArgs,
    },
    /// Every protocol × labeller × architecture cell of a plan.
    Experiment {
        /// Dataset; may also be given as `dataset=` in the config.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Plan file (key=value lines or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; overrides the plan's `seed` (default 42).
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the plan to these protocols.
        #[arg(long, value_delimiter = ',')]
        experiment: Vec<Experiment>,
        #[arg(long, value_delimiter = ',')]
        method: Vec<LabelMethod>,
        #[arg(long, value_delimiter = ',')]
        arch: Vec<Architecture>,
        #[command(flatten)]
        pipe: PipelineArgs,
    },
    /// Finite-difference check of every layer and architecture.
    Gradcheck {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Concatenate the metrics.csv of run directories into one CSV.
    Report {
        /// Run directories, or parents of run directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Io {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LexArgs {
    /// Directory holding the lexicon files; defaults to $AUTOLABEL_DATA_DIR,
    /// then to the bundled copies.
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    lex: LexArgs,
    /// Pretrained vectors (`word v1 ... vd`, plain or gzip).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = autolabel::encode::DEFAULT_EMBEDDING_DIM)]
    embedding_dim: usize,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    stopword_exceptions: Option<PathBuf>,
    #[arg(long)]
    junk_words: Option<PathBuf>,
}

/// Errors the front end can raise, each mapped to one exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Lib(e) => exit_code_for(e),
        }
    }
}

/// Exit code class of a library error.
pub fn exit_code_for(e: &Error) -> i32 {
    if e.is_numeric() {
        return EXIT_NUMERIC;
    }
    match e {
        Error::InvalidConfig(_)
        | Error::ConfigViolation(_)
        | Error::BadDropoutScheduleLength { .. }
        | Error::InvalidSplit(_)
        | Error::UnknownMethod(_)
        | Error::UnknownSource(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code. Results go to standard output, diagnostics to standard error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let code = f.exit_code();
            let _ = match &f {
                Failure::Usage(msg) => writeln!(err, "error: {msg}\n\n{}", synopsis()),
                Failure::Lib(e) if code == EXIT_USAGE => writeln!(err, "error: {e}\n\n{}", synopsis()),
                Failure::Lib(e) => writeln!(err, "error: {e}"),
                Failure::Numeric(msg) => writeln!(err, "error: {msg}"),
            };
            code
        }
    }
}

fn synopsis() -> String {
    use clap::CommandFactory;
    Cli::command().render_usage().to_string()
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Label { io, method, lex } => {
            let lexicons = lex.load()?;
            let mut ds = read_dataset(&io.input)?;
            for m in method {
                ds = label_dataset(&ds, m, &lexicons);
            }
            emit(out, io.out.as_deref(), &ds.to_tsv())
        }
        Command::Agree { input, a, b, lex } => {
            let lexicons = lex.load()?;
            let ds = with_labels(read_dataset(&input)?, &[a, b], &lexicons);
            let pct = agreement(&ds.labels(a)?, &ds.labels(b)?)?;
            write_out(out, &format!("{pct:.4}\n"))
        }
        Command::Dist { io, method, lex } => {
            let lexicons = lex.load()?;
            let methods = if method.is_empty() {
                LabelMethod::ALL.to_vec()
            } else {
                method
            };
            let mut sources: Vec<LabelSource> = methods.into_iter().map(LabelSource::Auto).collect();
            let mut ds = read_dataset(&io.input)?;
            if ds.instances.iter().all(|i| i.gold_label.is_some()) {
                sources.insert(0, LabelSource::Gold);
            }
            ds = with_labels(ds, &sources, &lexicons);
            emit(out, io.out.as_deref(), &distribution_csv(&ds, &sources)?)
        }
        Command::Train {
            input,
            out: dir,
            arch,
            experiment,
            method,
            seed,
            config,
            pipe,
        } => {
            let mut cfg = ExperimentConfig::new(experiment, method, arch, seed)?;
            if let Some(path) = config {
                let unknown = cfg.train.apply_file(&path)?;
                if let Some((k, _)) = unknown.first() {
                    return Err(Failure::Usage(format!(
                        "unknown training key {k:?} in {}",
                        path.display()
                    )));
                }
                // the seed flag is the single source of randomness
                cfg.train.seed = seed;
            }
            let ds = read_dataset(&input)?;
            let report = run_experiment(&cfg, &ds, &pipe.resources()?)?;
            write_report(&report, &dir)?;
            write_out(out, &report.metrics_csv())
        }
        Command::Experiment {
            input,
            out: dir,
            config,
            seed,
            experiment,
            method,
            arch,
            pipe,
        } => {
            let mut plan = match &config {
                Some(p) => ExperimentPlan::from_file(p)?,
                None => ExperimentPlan::default(),
            };
            plan.seed = seed.unwrap_or(plan.seed);
            restrict(&mut plan.experiments, &experiment);
            restrict(&mut plan.methods, &method);
            restrict(&mut plan.architectures, &arch);
            let input = input
                .or_else(|| plan.extra.get("dataset").map(PathBuf::from))
                .ok_or_else(|| Failure::Usage("no dataset: pass --in or set dataset= in the config".into()))?;
            let ds = read_dataset(&input)?;
            let res = pipe.resources()?;
            let mut dirs = Vec::new();
            for cfg in plan.runs(&ds.name)? {
                let run_dir = dir.join(run_key(&cfg));
                log::info!("running {}", run_dir.display());
                let report = run_experiment(&cfg, &ds, &res)?;
                write_report(&report, &run_dir)?;
                dirs.push(run_dir);
            }
            let csv = aggregate_metrics_csv(&dirs)?;
            let path = dir.join("metrics.csv");
            std::fs::write(&path, &csv).map_err(|e| io_error(&path, e))?;
            write_out(out, &csv)
        }
        Command::Gradcheck { seed } => gradcheck(seed, out),
        Command::Report { dirs, out: dest } => {
            let mut runs = BTreeSet::new();
            for d in &dirs {
                collect_runs(d, &mut runs)?;
            }
            if runs.is_empty() {
                return Err(Failure::Lib(Error::EmptyDataset));
            }
            let csv = aggregate_metrics_csv(&runs.into_iter().collect::<Vec<_>>())?;
            emit(out, dest.as_deref(), &csv)
        }
    }
}

fn restrict<T: PartialEq + Copy>(items: &mut Vec<T>, keep: &[T]) {
    if !keep.is_empty() {
        items.retain(|x| keep.contains(x));
    }
}

/// A run directory holds `report.json`; anything else is searched one
/// level down.
fn collect_runs(dir: &Path, runs: &mut BTreeSet<PathBuf>) -> Outcome {
    if dir.join("report.json").is_file() {
        runs.insert(dir.to_path_buf());
        return Ok(());
    }
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.join("report.json").is_file() {
            runs.insert(path);
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    Ok(load_dataset(path, DatasetFormat::Tsv)?)
}

/// Labels with every automatic source not already present in the file.
fn with_labels(mut ds: Dataset, sources: &[LabelSource], lex: &Lexicons) -> Dataset {
    for s in sources {
        if let LabelSource::Auto(m) = *s {
            if ds.instances.iter().any(|i| !i.auto_labels.contains_key(&m)) {
                ds = label_dataset(&ds, m, lex);
            }
        }
    }
    ds
}

fn write_out(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())
        .map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn emit(out: &mut dyn Write, dest: Option<&Path>, text: &str) -> Outcome {
    match dest {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => write_out(out, text),
    }
}

fn data_dir(explicit: &Option<PathBuf>) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| std::env::var_os("AUTOLABEL_DATA_DIR").map(PathBuf::from))
}

impl LexArgs {
    fn load(&self) -> Result<Lexicons, Failure> {
        Ok(match data_dir(&self.lexicon_dir) {
            Some(dir) => Lexicons::from_dir(&dir)?,
            None => Lexicons::bundled(),
        })
    }
}

impl PipelineArgs {
    fn resources(&self) -> Result<PipelineResources, Failure> {
        let embeddings = match &self.embeddings {
            Some(path) => EmbeddingSource::File {
                path: path.clone(),
                dim: self.embedding_dim,
            },
            None => EmbeddingSource::Random {
                dim: self.embedding_dim,
            },
        };
        let mut res = PipelineResources::bundled(embeddings);
        res.lexicons = self.lex.load()?;
        let dir = data_dir(&self.lex.lexicon_dir);
        // explicit flags win over files found in the data directory
        let pick = |flag: &Option<PathBuf>, name: &str| {
            flag.clone()
                .or_else(|| dir.as_ref().map(|d| d.join(name)).filter(|p| p.is_file()))
        };
        if let Some(stop) = pick(&self.stopwords, data::STOPWORDS) {
            let exceptions = pick(&self.stopword_exceptions, data::STOPWORD_EXCEPTIONS);
            res.stopwords = StopwordPolicy::from_file(&stop, exceptions.as_deref())?;
        }
        res.junk_words = match pick(&self.junk_words, data::JUNK_WORDS) {
            Some(p) => load_word_list(&p)?,
            None => bundled_junk_words(),
        };
        Ok(res)
    }
}

/// Small batch of 4 synthetic sequences for the gradient checks.
fn gradcheck_batch(seed: u64) -> Result<(Vocab, Vec<EncodedInstance>), Failure> {
    let spec = VocabSpec::new(["good", "nice"], ["bad", "ugly"], ["desk", "lamp"]);
    let ds = synth_corpus(2, &spec, seed)?;
    let toks: Vec<_> = ds
        .instances
        .iter()
        .map(|i| autolabel::textprep::preprocess_for_model(&i.text, &StopwordPolicy::bundled(), &BTreeSet::new()))
        .collect();
    let vocab = autolabel::encode::build_vocab(&toks, 1)?;
    let data = ds
        .instances
        .iter()
        .zip(&toks)
        .take(4)
        .map(|(i, t)| Ok(EncodedInstance::new(t, &vocab, 8, i.require_label(LabelSource::Gold)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok((vocab, data))
}

fn gradcheck(seed: u64, out: &mut dyn Write) -> Outcome {
    use ndarray::Array3;
    use rand::{Rng as _, SeedableRng};

    let mut rng = nn::Rng::seed_from_u64(seed);
    let x3 = Array3::from_shape_fn((4, 8, 5), |_| rng.random_range(-1.0..1.0)).into_dyn();
    let x2 = x3.index_axis(ndarray::Axis(1), 0).to_owned().into_dyn();
    let mut cases: Vec<(String, f64)> = Vec::new();
    let layer_cases: Vec<(Node, &ndarray::ArrayD<f64>, Mode)> = vec![
        (
            Node::Dense(nn::Dense::new(5, 4, Activation::Identity, &mut rng)),
            &x2,
            Mode::Eval,
        ),
        (
            Node::Dense(nn::Dense::new(5, 4, Activation::Relu, &mut rng)),
            &x2,
            Mode::Eval,
        ),
        (
            Node::Conv1D(nn::Conv1D::new(5, 3, 3, Activation::Relu, &mut rng)),
            &x3,
            Mode::Eval,
        ),
        (Node::GlobalMaxPool1D(nn::GlobalMaxPool1D::new()), &x3, Mode::Eval),
        (Node::BiLstm(nn::BiLstm::new(5, 3, 0.2, &mut rng)?), &x3, Mode::Train),
        (
            Node::SpatialDropout1D(nn::SpatialDropout1D::new(0.3)?),
            &x3,
            Mode::Train,
        ),
        (Node::Dropout(nn::Dropout::new(0.3)?), &x2, Mode::Train),
        (Node::Softmax(nn::Softmax::new()), &x2, Mode::Eval),
    ];
    for (layer, x, mode) in &layer_cases {
        let r = nn::check_layer(layer, x, *mode, DEFAULT_EPS, seed)?;
        cases.push((layer.kind().to_string(), r.max_rel_error));
    }
    let (vocab, data) = gradcheck_batch(seed)?;
    let emb = random_embeddings(&vocab, 6, seed);
    for arch in Architecture::ALL {
        let mut cfg = TrainConfig::for_experiment(arch, Experiment::E1);
        cfg.max_len = 8;
        cfg.seed = seed;
        cfg.dims.conv_filters = 4;
        cfg.dims.kernel_size = 3;
        cfg.dims.lstm_units = 3;
        cfg.dims.dense_units = 5;
        let mut model = build_model(arch, &emb, &cfg)?;
        let (x, t) = encode_batch(&data, cfg.max_len)?;
        let r = gradient_check(&mut model.net, &x, &t, DEFAULT_EPS, seed)?;
        cases.push((arch.to_string(), r.max_rel_error));
    }
    let mut text = String::from("case,max_rel_error,status\n");
    let mut worst: Option<&str> = None;
    for (name, e) in &cases {
        let ok = *e < GRADCHECK_TOLERANCE;
        if !ok {
            worst.get_or_insert(name);
        }
        text.push_str(&format!("{name},{e:.3e},{}\n", if ok { "ok" } else { "FAIL" }));
    }
    write_out(out, &text)?;
    match worst {
        Some(name) => Err(Failure::Numeric(format!("gradient check failed for {name}"))),
        None => Ok(()),
    }
}
