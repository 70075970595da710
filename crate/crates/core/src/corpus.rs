//! Datasets: TSV ingest and export, seeded splits and synthetic corpora.
//!
//! File schema, one instance per line:
//!
//! ```text
//! id<TAB>label<TAB>text[<TAB>method=label ...]
//! ```
//!
//! `label` is `positive`, `negative`, `neutral` (any case) or `-` for no gold
//! label. Trailing `method=label` columns carry automatic labels.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexlabel::{LabelMethod, LabelSource, SentimentLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub id: String,
    pub text: String,
    pub gold_label: Option<SentimentLabel>,
    pub auto_labels: BTreeMap<LabelMethod, SentimentLabel>,
}

impl LabeledInstance {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: Option<SentimentLabel>) -> Self {
        LabeledInstance {
            id: id.into(),
            text: text.into(),
            gold_label: gold,
            auto_labels: BTreeMap::new(),
        }
    }

    pub fn label(&self, source: LabelSource) -> Option<SentimentLabel> {
        match source {
            LabelSource::Gold => self.gold_label,
            LabelSource::Auto(m) => self.auto_labels.get(&m).copied(),
        }
    }

    pub fn require_label(&self, source: LabelSource) -> Result<SentimentLabel> {
        self.label(source).ok_or_else(|| Error::MissingLabels {
            source_name: source.to_string(),
            id: self.id.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<LabeledInstance>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, instances: Vec<LabeledInstance>) -> Self {
        Dataset {
            name: name.into(),
            instances,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Labels from `source` in instance order; errors on the first gap.
    pub fn labels(&self, source: LabelSource) -> Result<Vec<SentimentLabel>> {
        self.instances.iter().map(|i| i.require_label(source)).collect()
    }

    /// Writes the dataset in the TSV schema. Automatic labels follow the
    /// text as `method=label` columns in method order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            let gold = inst.gold_label.map_or("-", SentimentLabel::as_str);
            let _ = write!(out, "{}\t{}\t{}", inst.id, gold, sanitize(&inst.text));
            for (m, l) in &inst.auto_labels {
                let _ = write!(out, "\t{m}={l}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn sanitize(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    Tsv,
}

/// Reads a dataset file. The dataset is named after the file stem.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    match format {
        DatasetFormat::Tsv => parse_tsv(&name, &text),
    }
}

pub fn parse_tsv(name: &str, text: &str) -> Result<Dataset> {
    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::MalformedLine(line_no));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::EmptyId(line_no));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: id.to_string(),
            });
        }
        let gold = match fields[1].trim() {
            "-" => None,
            s => Some(s.parse().map_err(|_| Error::UnknownLabel(line_no))?),
        };
        let mut inst = LabeledInstance::new(id, fields[2], gold);
        for extra in &fields[3..] {
            let (method, label) = extra.split_once('=').ok_or(Error::MalformedLine(line_no))?;
            let method: LabelMethod = method.parse()?;
            let label = label.parse().map_err(|_| Error::UnknownLabel(line_no))?;
            inst.auto_labels.insert(method, label);
        }
        instances.push(inst);
    }
    if instances.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(Dataset::new(name, instances))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec { train_fraction, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidSplit(self.train_fraction))
        }
    }

    /// `floor(train_fraction * n)`, robust to products like `0.29 * 100`
    /// landing one ulp below an integer.
    pub fn train_size(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64) * (1.0 + 1e-12)).floor() as usize
    }
}

/// Shuffled indices of a split: the first `train_size` go to training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(spec.train_size(n));
    Ok((order, test))
}

/// Seeded uniform shuffle followed by a prefix cut.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), spec)?;
    let pick = |idx: &[usize], suffix: &str| {
        Dataset::new(
            format!("{}-{suffix}", ds.name),
            idx.iter().map(|&i| ds.instances[i].clone()).collect(),
        )
    };
    Ok((pick(&train, "train"), pick(&test, "test")))
}

/// Keyword lists for [`synth_corpus`], one per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSpec {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub neutral: Vec<String>,
}

impl VocabSpec {
    pub fn new<S: Into<String>>(
        positive: impl IntoIterator<Item = S>,
        negative: impl IntoIterator<Item = S>,
        neutral: impl IntoIterator<Item = S>,
    ) -> Self {
        VocabSpec {
            positive: positive.into_iter().map(Into::into).collect(),
            negative: negative.into_iter().map(Into::into).collect(),
            neutral: neutral.into_iter().map(Into::into).collect(),
        }
    }

    fn for_label(&self, label: SentimentLabel) -> &[String] {
        match label {
            SentimentLabel::Positive => &self.positive,
            SentimentLabel::Negative => &self.negative,
            SentimentLabel::Neutral => &self.neutral,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for label in SentimentLabel::ALL {
            let words = self.for_label(label);
            if words.is_empty() {
                return Err(Error::OverlappingVocab(format!("{label} list is empty")));
            }
            for w in words.iter().collect::<BTreeSet<_>>() {
                if !seen.insert(w.to_lowercase()) {
                    return Err(Error::OverlappingVocab(format!("{w:?} appears in more than one list")));
                }
            }
        }
        Ok(())
    }
}

/// Function words sprinkled into synthetic sentences. None of them carries
/// sentiment in the bundled lexicons.
pub const FILLER_WORDS: [&str; 8] = ["the", "a", "to", "and", "of", "it", "on", "with"];

/// Share of words in a synthetic sentence drawn from its class list.
pub const SYNTH_KEYWORD_SHARE: f64 = 0.75;

/// `3 * n_per_class` short sentences, each built mostly from one class's
/// keywords (at least one keyword, the rest filler) and gold-labelled with
/// that class. Instances are interleaved by class.
pub fn synth_corpus(n_per_class: usize, vocab: &VocabSpec, seed: u64) -> Result<Dataset> {
    vocab.validate()?;
    if n_per_class == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(3 * n_per_class);
    for k in 0..n_per_class {
        for label in SentimentLabel::ALL {
            let keywords = vocab.for_label(label);
            let len = rng.random_range(4..=10);
            let anchor = rng.random_range(0..len);
            let words: Vec<&str> = (0..len)
                .map(|j| {
                    if j == anchor || rng.random_bool(SYNTH_KEYWORD_SHARE) {
                        keywords[rng.random_range(0..keywords.len())].as_str()
                    } else {
                        FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())]
                    }
                })
                .collect();
            instances.push(LabeledInstance::new(
                format!("s{}-{k}", label.index()),
                words.join(" "),
                Some(label),
            ));
        }
    }
    Ok(Dataset::new("synthetic", instances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> Dataset {
        Dataset::new(
            "toy",
            (0..n)
                .map(|i| LabeledInstance::new(format!("t{i}"), format!("text {i}"), Some(SentimentLabel::ALL[i % 3])))
                .collect(),
        )
    }

    #[test]
    fn parse_three_lines() {
        let ds = parse_tsv("x", "t1\tpositive\thello\nt2\tNEGATIVE\tbad day\nt3\t-\tmeh").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.instances[0].id, "t1");
        assert_eq!(ds.instances[0].gold_label, Some(SentimentLabel::Positive));
        assert_eq!(ds.instances[1].gold_label, Some(SentimentLabel::Negative));
        assert_eq!(ds.instances[2].gold_label, None);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_tsv("x", "t1\tpositive"), Err(Error::MalformedLine(1))));
        assert!(matches!(
            parse_tsv("x", "t1\tpositive\tok\nt2\tgreat\tno"),
            Err(Error::UnknownLabel(2))
        ));
        assert!(matches!(parse_tsv("x", ""), Err(Error::EmptyFile)));
        assert!(matches!(parse_tsv("x", "\n\n"), Err(Error::EmptyFile)));
        assert!(matches!(
            parse_tsv("x", "a\t-\tx\na\t-\ty"),
            Err(Error::DuplicateId { line: 2, .. })
        ));
        assert!(matches!(
            parse_tsv("x", "a\t-\tx\tvader=nice"),
            Err(Error::UnknownLabel(1))
        ));
    }

    #[test]
    fn auto_label_columns_round_trip() {
        let ds = parse_tsv("x", "t1\t-\thi there\tafinn=positive\tvader=neutral\n").unwrap();
        assert_eq!(
            ds.instances[0].label(LabelSource::Auto(LabelMethod::Afinn)),
            Some(SentimentLabel::Positive)
        );
        assert_eq!(parse_tsv("x", &ds.to_tsv()).unwrap(), ds);
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split(&toy(10), &SplitSpec::new(0.8, 1).unwrap()).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(SplitSpec::default().train_size(14885), 11908);
        assert_eq!(14885 - SplitSpec::default().train_size(14885), 2977);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            split(&toy(0), &SplitSpec::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(SplitSpec::new(1.0, 0), Err(Error::InvalidSplit(_))));
        assert!(matches!(SplitSpec::new(0.0, 0), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn synth_singletons() {
        let vocab = VocabSpec::new(["joy"], ["grief"], ["table"]);
        let ds = synth_corpus(1, &vocab, 3).unwrap();
        assert_eq!(ds.len(), 3);
        let golds: Vec<_> = ds.instances.iter().map(|i| i.gold_label.unwrap()).collect();
        assert_eq!(golds, SentimentLabel::ALL);
        assert!(ds.instances[0].text.contains("joy"));
        assert!(!ds.instances[0].text.contains("grief"));
    }

    #[test]
    fn synth_is_deterministic_and_checks_overlap() {
        let vocab = VocabSpec::new(["joy", "win"], ["grief", "loss"], ["table", "door"]);
        assert_eq!(
            synth_corpus(100, &vocab, 9).unwrap(),
            synth_corpus(100, &vocab, 9).unwrap()
        );
        assert_ne!(
            synth_corpus(100, &vocab, 9).unwrap(),
            synth_corpus(100, &vocab, 10).unwrap()
        );
        let bad = VocabSpec::new(["joy"], ["joy"], ["table"]);
        assert!(matches!(synth_corpus(1, &bad, 0), Err(Error::OverlappingVocab(_))));
        let empty = VocabSpec::new(vec!["joy"], vec![], vec!["table"]);
        assert!(matches!(synth_corpus(1, &empty, 0), Err(Error::OverlappingVocab(_))));
    }

    proptest! {
        #[test]
        fn split_partitions(n in 1usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let ds = toy(n);
            let spec = SplitSpec::new(frac, seed).unwrap();
            let (tr, te) = split(&ds, &spec).unwrap();
            prop_assert_eq!(tr.len(), spec.train_size(n));
            let mut ids: Vec<_> = tr.instances.iter().chain(&te.instances).map(|i| i.id.clone()).collect();
            ids.sort();
            let mut want: Vec<_> = ds.instances.iter().map(|i| i.id.clone()).collect();
            want.sort();
            prop_assert_eq!(ids, want);
            let again = split(&ds, &spec).unwrap();
            prop_assert_eq!((tr, te), again);
        }

        #[test]
        fn tsv_round_trip(rows in proptest::collection::vec(("[a-z0-9]{1,6}", proptest::option::of(0usize..3), "[^\t\n\r]{0,30}"), 1..20)) {
            let mut seen = HashSet::new();
            let instances: Vec<_> = rows
                .into_iter()
                .filter(|(id, _, _)| seen.insert(id.clone()))
                .map(|(id, g, text)| LabeledInstance::new(id, text, g.map(|g| SentimentLabel::ALL[g])))
                .collect();
            let ds = Dataset::new("p", instances);
            let back = parse_tsv("p", &ds.to_tsv()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
