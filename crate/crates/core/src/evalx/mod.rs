//! Metrics, label agreement, label distributions and the experiment runner.

mod experiment;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::lexlabel::{LabelSource, SentimentLabel};

pub use experiment::{
    aggregate_metrics_csv, derive_seed, run_experiment, run_key, write_report, EmbeddingSource, ExperimentConfig,
    ExperimentPlan, ExperimentReport, PipelineResources, METRICS_CSV_HEADER,
};

/// Counts indexed `[true][predicted]` in (Positive, Negative, Neutral) order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    /// Predicted as `class` but truly another.
    pub fn false_positives(&self, class: usize) -> u64 {
        (0..3).filter(|&r| r != class).map(|r| self.counts[r][class]).sum()
    }

    /// Truly `class` but predicted as another.
    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..3).filter(|&c| c != class).map(|c| self.counts[class][c]).sum()
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

pub fn confusion(y_true: &[SentimentLabel], y_pred: &[SentimentLabel]) -> Result<ConfusionMatrix> {
    check_lengths(y_true.len(), y_pred.len())?;
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of the per-class F1 scores, not the F1 of the macro averages.
    pub macro_f1: f64,
}

impl MacroMetrics {
    /// Element-wise mean, for averaging across epochs.
    pub fn mean(items: &[MacroMetrics]) -> Option<MacroMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let sum = |f: fn(&MacroMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(MacroMetrics {
            accuracy: sum(|m| m.accuracy),
            macro_precision: sum(|m| m.macro_precision),
            macro_recall: sum(|m| m.macro_recall),
            macro_f1: sum(|m| m.macro_f1),
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 per class; each is 0 when its denominator is.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> [ClassMetrics; 3] {
    std::array::from_fn(|c| {
        let tp = cm.true_positives(c);
        let precision = ratio(tp, tp + cm.false_positives(c));
        let recall = ratio(tp, tp + cm.false_negatives(c));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: cm.counts[c].iter().sum(),
        }
    })
}

pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MacroMetrics> {
    if cm.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per = per_class_metrics(cm);
    let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / 3.0;
    Ok(MacroMetrics {
        accuracy: ratio(cm.trace(), cm.total()),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
    })
}

/// Percentage of positions carrying the same label.
pub fn agreement(a: &[SentimentLabel], b: &[SentimentLabel]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(100.0 * same as f64 / a.len() as f64)
}

/// Label shares in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
}

impl Distribution {
    pub fn get(&self, label: SentimentLabel) -> f64 {
        match label {
            SentimentLabel::Positive => self.positive,
            SentimentLabel::Negative => self.negative,
            SentimentLabel::Neutral => self.neutral,
        }
    }
}

pub fn distribution(ds: &Dataset, source: LabelSource) -> Result<Distribution> {
    let labels = ds.labels(source)?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let share = |l: SentimentLabel| 100.0 * labels.iter().filter(|&&x| x == l).count() as f64 / labels.len() as f64;
    Ok(Distribution {
        positive: share(SentimentLabel::Positive),
        negative: share(SentimentLabel::Negative),
        neutral: share(SentimentLabel::Neutral),
    })
}

pub const DISTRIBUTION_CSV_HEADER: &str = "dataset,labeller,positive,negative,neutral";

/// One row per source, percentages to two decimals.
pub fn distribution_csv(ds: &Dataset, sources: &[LabelSource]) -> Result<String> {
    let mut out = format!("{DISTRIBUTION_CSV_HEADER}\n");
    for &s in sources {
        let d = distribution(ds, s)?;
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2}",
            ds.name, s, d.positive, d.negative, d.neutral
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledInstance;
    use SentimentLabel::*;

    #[test]
    fn identical_vectors_give_a_diagonal() {
        let y = [Positive, Negative, Neutral, Neutral];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!(cm.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
        let m = macro_metrics(&cm).unwrap();
        assert_eq!(
            (m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn single_pair_lands_in_row_true_col_pred() {
        let cm = confusion(&[Positive], &[Negative]).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn always_positive_on_balanced_set() {
        let truth = [Positive, Negative, Neutral].repeat(4);
        let cm = confusion(&truth, &[Positive; 12]).unwrap();
        let m = macro_metrics(&cm).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.macro_recall - 1.0 / 3.0).abs() < 1e-15);
        // only Positive has a non-zero precision: 4 / 12
        assert!((m.macro_precision - 1.0 / 9.0).abs() < 1e-15);
        // F1 for Positive: 2 * (1/3) * 1 / (4/3) = 1/2
        assert!((m.macro_f1 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn length_and_empty_errors() {
        assert!(matches!(
            confusion(&[Positive], &[]),
            Err(Error::LengthMismatch { left: 1, right: 0 })
        ));
        assert!(matches!(agreement(&[], &[]), Err(Error::EmptyMatrix)));
        assert!(matches!(
            macro_metrics(&ConfusionMatrix::default()),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn agreement_extremes() {
        let a = [Positive, Negative, Neutral];
        assert_eq!(agreement(&a, &a).unwrap(), 100.0);
        assert_eq!(agreement(&a, &[Negative, Neutral, Positive]).unwrap(), 0.0);
    }

    #[test]
    fn distribution_of_all_positive() {
        let ds = Dataset::new(
            "p",
            (0..5)
                .map(|i| LabeledInstance::new(format!("{i}"), "x", Some(Positive)))
                .collect(),
        );
        let d = distribution(&ds, LabelSource::Gold).unwrap();
        assert_eq!((d.positive, d.negative, d.neutral), (100.0, 0.0, 0.0));
        assert_eq!(
            distribution_csv(&ds, &[LabelSource::Gold]).unwrap(),
            "dataset,labeller,positive,negative,neutral\np,gold,100.00,0.00,0.00\n"
        );
        let missing = distribution(&ds, "vader".parse().unwrap());
        assert!(matches!(missing, Err(Error::MissingLabels { .. })));
    }
}
