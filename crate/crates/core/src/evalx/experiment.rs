use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    agreement, confusion, distribution, macro_metrics, per_class_metrics, ClassMetrics, ConfusionMatrix, Distribution,
    MacroMetrics,
};
use crate::corpus::{split, Dataset, SplitSpec};
use crate::encode::{build_vocab, load_embeddings, random_embeddings, EncodedInstance, DEFAULT_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::lexlabel::{label_dataset, LabelMethod, LabelSource, Lexicons};
use crate::models::{self, parse_pairs, Architecture, Experiment, TrainConfig, TrainHistory};
use crate::textprep::{bundled_junk_words, preprocess_for_model, StopwordPolicy, TokenList};

pub const METRICS_CSV_HEADER: &str = "dataset,experiment,labeller,architecture,seed,acc,macroP,macroR,macroF1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EmbeddingSource {
    /// No pretrained file: every row drawn from uniform(-0.05, 0.05).
    Random { dim: usize },
    /// A `word v1 ... vd` text file, plain or gzip.
    File { path: PathBuf, dim: usize },
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Random {
            dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

/// Read-only inputs shared by every run.
#[derive(Debug, Clone)]
pub struct PipelineResources {
    pub lexicons: Lexicons,
    pub stopwords: StopwordPolicy,
    pub junk_words: BTreeSet<String>,
    pub embeddings: EmbeddingSource,
    pub min_count: usize,
}

impl PipelineResources {
    pub fn bundled(embeddings: EmbeddingSource) -> Self {
        PipelineResources {
            lexicons: Lexicons::bundled(),
            stopwords: StopwordPolicy::bundled(),
            junk_words: bundled_junk_words(),
            embeddings,
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub train_source: LabelSource,
    pub test_source: LabelSource,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub dataset: String,
    /// Seed of the train/test split, shared by all protocols.
    pub seed: u64,
    pub train_fraction: f64,
}

impl ExperimentConfig {
    /// The canonical sources for `experiment` with the published training
    /// settings. `method` is ignored for E1 and required otherwise.
    pub fn new(
        experiment: Experiment,
        method: Option<LabelMethod>,
        architecture: Architecture,
        seed: u64,
    ) -> Result<Self> {
        let auto = || {
            method
                .map(LabelSource::Auto)
                .ok_or_else(|| Error::ConfigViolation(format!("{experiment} needs an automatic labelling method")))
        };
        let (train_source, test_source) = match experiment {
            Experiment::E1 => (LabelSource::Gold, LabelSource::Gold),
            Experiment::E2 => (auto()?, auto()?),
            Experiment::E3 => (auto()?, LabelSource::Gold),
        };
        let mut train = TrainConfig::for_experiment(architecture, experiment);
        train.seed = seed;
        Ok(ExperimentConfig {
            experiment,
            train_source,
            test_source,
            architecture,
            train,
            dataset: String::new(),
            seed,
            train_fraction: 0.8,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.experiment {
            Experiment::E1 => self.train_source == LabelSource::Gold && self.test_source == LabelSource::Gold,
            Experiment::E2 => {
                matches!(self.train_source, LabelSource::Auto(_)) && self.train_source == self.test_source
            }
            Experiment::E3 => {
                matches!(self.train_source, LabelSource::Auto(_)) && self.test_source == LabelSource::Gold
            }
        };
        if !ok {
            return Err(Error::ConfigViolation(format!(
                "{} cannot train on {} and test on {}",
                self.experiment, self.train_source, self.test_source
            )));
        }
        SplitSpec::new(self.train_fraction, self.seed)?;
        self.train.validate(self.architecture)
    }

    /// `gold` for E1, otherwise the automatic method.
    pub fn labeller(&self) -> LabelSource {
        self.train_source
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub vocab_size: usize,
    pub embedding_coverage: f64,
    pub confusion: ConfusionMatrix,
    /// Metrics of the final epoch.
    pub metrics: MacroMetrics,
    /// Positive, Negative, Neutral.
    pub per_class: [ClassMetrics; 3],
    /// Test metrics after every epoch, and their mean.
    pub epoch_metrics: Vec<MacroMetrics>,
    pub epoch_mean: Option<MacroMetrics>,
    pub history: TrainHistory,
    /// Whole-dataset label shares per source used.
    pub label_distribution: BTreeMap<String, Distribution>,
    /// Agreement (%) of the automatic training labels with gold, when both exist.
    pub agreement_with_gold: Option<f64>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn metrics_csv_row(&self) -> String {
        let c = &self.config;
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            c.dataset,
            c.experiment,
            c.labeller(),
            c.architecture,
            c.seed,
            m.accuracy,
            m.macro_precision,
            m.macro_recall,
            m.macro_f1
        )
    }

    pub fn metrics_csv(&self) -> String {
        format!("{METRICS_CSV_HEADER}\n{}\n", self.metrics_csv_row())
    }
}

fn ensure_labels(ds: Dataset, source: LabelSource, lex: &Lexicons) -> Dataset {
    match source {
        LabelSource::Auto(m) if ds.instances.iter().any(|i| !i.auto_labels.contains_key(&m)) => {
            label_dataset(&ds, m, lex)
        }
        _ => ds,
    }
}

/// label → split → preprocess → vocabulary from the training texts →
/// encode → build → train → predict on the test split → metrics.
pub fn run_experiment(cfg: &ExperimentConfig, ds: &Dataset, res: &PipelineResources) -> Result<ExperimentReport> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = Instant::now();
    let mut cfg = cfg.clone();
    if cfg.dataset.is_empty() {
        cfg.dataset = ds.name.clone();
    }
    let mut labelled = ensure_labels(ds.clone(), cfg.train_source, &res.lexicons);
    labelled = ensure_labels(labelled, cfg.test_source, &res.lexicons);

    let (train_ds, test_ds) = split(&labelled, &SplitSpec::new(cfg.train_fraction, cfg.seed)?)?;
    let tokens = |d: &Dataset| -> Vec<TokenList> {
        d.instances
            .iter()
            .map(|i| preprocess_for_model(&i.text, &res.stopwords, &res.junk_words))
            .collect()
    };
    let (train_tok, test_tok) = (tokens(&train_ds), tokens(&test_ds));
    let vocab = build_vocab(&train_tok, res.min_count)?;
    let emb = match &res.embeddings {
        EmbeddingSource::Random { dim } => random_embeddings(&vocab, *dim, cfg.train.seed),
        EmbeddingSource::File { path, dim } => load_embeddings(path, &vocab, *dim, cfg.train.seed)?,
    };
    let encode = |d: &Dataset, toks: &[TokenList], source: LabelSource| -> Result<Vec<EncodedInstance>> {
        d.instances
            .iter()
            .zip(toks)
            .map(|(inst, t)| {
                Ok(EncodedInstance::new(
                    t,
                    &vocab,
                    cfg.train.max_len,
                    inst.require_label(source)?,
                ))
            })
            .collect()
    };
    let train_set = encode(&train_ds, &train_tok, cfg.train_source)?;
    let test_set = encode(&test_ds, &test_tok, cfg.test_source)?;
    if test_set.is_empty() {
        return Err(Error::InvalidSplit(cfg.train_fraction));
    }
    let truth: Vec<_> = test_set.iter().map(EncodedInstance::label).collect();

    let mut model = models::build_model(cfg.architecture, &emb, &cfg.train)?;
    let mut epoch_metrics = Vec::new();
    let mut last_cm = None;
    let history = models::train_with_callback(&mut model, &train_set, |_, m| {
        let preds = models::predict(m, &test_set)?;
        let cm = confusion(&truth, &preds.labels)?;
        epoch_metrics.push(macro_metrics(&cm)?);
        last_cm = Some(cm);
        Ok(())
    })?;
    let cm = match last_cm {
        Some(cm) => cm,
        None => confusion(&truth, &models::predict(&mut model, &test_set)?.labels)?,
    };

    let mut label_distribution = BTreeMap::new();
    for source in [LabelSource::Gold, cfg.train_source, cfg.test_source] {
        if let Ok(d) = distribution(&labelled, source) {
            label_distribution.insert(source.to_string(), d);
        }
    }
    let agreement_with_gold = match cfg.train_source {
        LabelSource::Auto(_) => match (labelled.labels(LabelSource::Gold), labelled.labels(cfg.train_source)) {
            (Ok(g), Ok(a)) => Some(agreement(&g, &a)?),
            _ => None,
        },
        LabelSource::Gold => None,
    };

    Ok(ExperimentReport {
        train_size: train_set.len(),
        test_size: test_set.len(),
        vocab_size: vocab.len(),
        embedding_coverage: emb.coverage(),
        metrics: macro_metrics(&cm)?,
        per_class: per_class_metrics(&cm),
        confusion: cm,
        epoch_mean: MacroMetrics::mean(&epoch_metrics),
        epoch_metrics,
        history,
        label_distribution,
        agreement_with_gold,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: cfg,
    })
}

/// Writes `report.json` and the one-row `metrics.csv` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("metrics.csv");
    std::fs::write(&csv, report.metrics_csv()).map_err(|e| Error::io(&csv, e))
}

/// Concatenates the `metrics.csv` rows of several run directories under
/// one header.
pub fn aggregate_metrics_csv(dirs: &[PathBuf]) -> Result<String> {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for dir in dirs {
        let path = dir.join("metrics.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for line in text.lines().filter(|l| !l.is_empty() && *l != METRICS_CSV_HEADER) {
            let _ = writeln!(out, "{line}");
        }
    }
    Ok(out)
}

/// A run-specific seed from a base seed and a stable key (FNV-1a of the key
/// mixed with the base by the SplitMix64 finaliser).
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ base.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Which protocol × labeller × architecture cells to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub experiments: Vec<Experiment>,
    pub methods: Vec<LabelMethod>,
    pub architectures: Vec<Architecture>,
    pub seed: u64,
    pub train_fraction: f64,
    /// Training keys applied on top of each protocol's defaults.
    pub train_overrides: Vec<(String, String)>,
    /// Keys the plan does not interpret (dataset paths, output directory).
    pub extra: BTreeMap<String, String>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            experiments: Experiment::ALL.to_vec(),
            methods: LabelMethod::ALL.to_vec(),
            architectures: Architecture::ALL.to_vec(),
            seed: 42,
            train_fraction: 0.8,
            train_overrides: Vec::new(),
            extra: BTreeMap::new(),
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, T::Err> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

impl ExperimentPlan {
    /// Reads `key=value` lines or a JSON object. Plan keys: experiments,
    /// methods, architectures, seed, train_fraction. Training keys are
    /// checked and kept as overrides; anything else lands in `extra`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::default();
        let mut probe = TrainConfig::default();
        for (k, v) in parse_pairs(text)? {
            let bad = |what: &str| Error::InvalidConfig(format!("{k}: {what} {v:?}"));
            match k.as_str() {
                "experiments" => plan.experiments = parse_list(&v)?,
                "methods" => plan.methods = parse_list(&v)?,
                "architectures" => plan.architectures = parse_list(&v)?,
                "seed" => plan.seed = v.parse().map_err(|_| bad("cannot parse"))?,
                "train_fraction" => plan.train_fraction = v.parse().map_err(|_| bad("cannot parse"))?,
                _ => match probe.set(&k, &v) {
                    Ok(()) => plan.train_overrides.push((k, v)),
                    Err(Error::InvalidConfig(msg)) if msg.starts_with("unknown training key") => {
                        plan.extra.insert(k, v);
                    }
                    Err(e) => return Err(e),
                },
            }
        }
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&crate::data::read_to_string(path)?)
    }

    /// Every cell in protocol, labeller, architecture order. The split seed
    /// is the plan seed for all cells; each model seed is derived from the
    /// plan seed and the cell key.
    pub fn runs(&self, dataset: &str) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        for &exp in &self.experiments {
            let methods: Vec<Option<LabelMethod>> = match exp {
                Experiment::E1 => vec![None],
                _ => self.methods.iter().copied().map(Some).collect(),
            };
            for method in methods {
                for &arch in &self.architectures {
                    let mut cfg = ExperimentConfig::new(exp, method, arch, self.seed)?;
                    for (k, v) in &self.train_overrides {
                        cfg.train.set(k, v)?;
                    }
                    cfg.train.seed = derive_seed(self.seed, &run_key(&cfg));
                    cfg.dataset = dataset.to_string();
                    cfg.train_fraction = self.train_fraction;
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

/// `E2-afinn-bilstm` style directory name for a run.
pub fn run_key(cfg: &ExperimentConfig) -> String {
    format!("{}-{}-{}", cfg.experiment, cfg.labeller(), cfg.architecture)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_sources_are_enforced() {
        let mut cfg = ExperimentConfig::new(Experiment::E3, Some(LabelMethod::Afinn), Architecture::Cnn, 1).unwrap();
        cfg.validate().unwrap();
        cfg.test_source = LabelSource::Auto(LabelMethod::Afinn);
        assert!(matches!(cfg.validate(), Err(Error::ConfigViolation(_))));
        cfg.experiment = Experiment::E2;
        cfg.validate().unwrap();
        cfg.test_source = LabelSource::Auto(LabelMethod::Vader);
        assert!(matches!(cfg.validate(), Err(Error::ConfigViolation(_))));
        assert!(ExperimentConfig::new(Experiment::E2, None, Architecture::Cnn, 1).is_err());
    }

    #[test]
    fn plan_cells_and_seeds() {
        let plan = ExperimentPlan::from_text(
            "experiments=e1,e3\nmethods=afinn,vader\narchitectures=cnn\nepochs=2\nseed=7\nout=runs\n",
        )
        .unwrap();
        let runs = plan.runs("ds").unwrap();
        let keys: Vec<_> = runs.iter().map(run_key).collect();
        assert_eq!(keys, ["E1-gold-cnn", "E3-afinn-cnn", "E3-vader-cnn"]);
        assert!(runs.iter().all(|r| r.seed == 7 && r.train.epochs == 2));
        assert_ne!(runs[1].train.seed, runs[2].train.seed);
        assert_eq!(runs[1].train.seed, derive_seed(7, "E3-afinn-cnn"));
        assert_eq!(plan.extra.get("out").map(String::as_str), Some("runs"));
        assert_eq!(runs[0].train.learning_rate, 0.0001);
    }

    #[test]
    fn derived_seeds_are_stable() {
        assert_eq!(derive_seed(42, "E2-afinn-bilstm"), derive_seed(42, "E2-afinn-bilstm"));
        assert_ne!(derive_seed(42, "a"), derive_seed(43, "a"));
    }
}
