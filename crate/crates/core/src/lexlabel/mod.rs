//! Rule-based automatic sentiment labelling.
//!
//! Three engines score a cleaned text and a per-engine threshold rule turns
//! the score into a ternary [`SentimentLabel`]:
//!
//! | engine     | score                         | Positive  | Negative   |
//! |------------|-------------------------------|-----------|------------|
//! | `afinn`    | sum of word scores            | `> 0`     | `< 0`      |
//! | `vader`    | compound in (-1, 1)           | `> 0.05`  | `< -0.05`  |
//! | `textblob` | mean word polarity in [-1, 1] | `> 0`     | `< 0`      |
//!
//! Everything else is Neutral.

mod afinn;
mod pattern;
pub mod vader;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::data as files;
use crate::error::{Error, Result};
use crate::textprep::clean_for_labelling;

pub use afinn::{afinn_score, load_afinn, AfinnLexicon};
pub use pattern::{load_pattern, pattern_polarity, PatternLexicon};
pub use vader::{load_valence, vader_scores, VaderScores, ValenceLexicon};

/// Ternary sentiment. The declaration order is the canonical column order
/// used by one-hot targets, confusion matrices and argmax tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        match self {
            SentimentLabel::Positive => 0,
            SentimentLabel::Negative => 1,
            SentimentLabel::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            _ => Err(()),
        }
    }
}

/// An automatic labelling engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMethod {
    Afinn,
    Vader,
    #[serde(rename = "textblob")]
    TextBlob,
}

impl LabelMethod {
    pub const ALL: [LabelMethod; 3] = [LabelMethod::Afinn, LabelMethod::Vader, LabelMethod::TextBlob];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelMethod::Afinn => "afinn",
            LabelMethod::Vader => "vader",
            LabelMethod::TextBlob => "textblob",
        }
    }
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "afinn" => Ok(LabelMethod::Afinn),
            "vader" => Ok(LabelMethod::Vader),
            "textblob" => Ok(LabelMethod::TextBlob),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Where a label comes from: the human annotation or one of the engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Gold,
    #[serde(untagged)]
    Auto(LabelMethod),
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Gold => "gold",
            LabelSource::Auto(m) => m.as_str(),
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("gold") {
            return Ok(LabelSource::Gold);
        }
        s.parse::<LabelMethod>()
            .map(LabelSource::Auto)
            .map_err(|_| Error::UnknownSource(s.to_string()))
    }
}

/// Ternary threshold rule for an engine's scalar score.
pub fn to_ternary(method: LabelMethod, score: f64) -> SentimentLabel {
    let cutoff = match method {
        LabelMethod::Afinn | LabelMethod::TextBlob => 0.0,
        LabelMethod::Vader => vader::LABEL_CUTOFF,
    };
    if score > cutoff {
        SentimentLabel::Positive
    } else if score < -cutoff {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    }
}

/// [`to_ternary`] keyed by method name.
pub fn to_ternary_named(method: &str, score: f64) -> Result<SentimentLabel> {
    Ok(to_ternary(method.parse()?, score))
}

/// The three lexicons, loaded once and shared read-only.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub afinn: AfinnLexicon,
    pub valence: ValenceLexicon,
    pub pattern: PatternLexicon,
}

impl Lexicons {
    /// Lexicons compiled into the library (AFINN-111, VADER 3.3.2, Pattern 1.3).
    pub fn bundled() -> Self {
        Lexicons {
            afinn: AfinnLexicon::bundled(),
            valence: ValenceLexicon::bundled(),
            pattern: PatternLexicon::bundled(),
        }
    }

    /// Loads every lexicon from `dir` using the bundled file names
    /// (see [`crate::data`] for the layout).
    pub fn from_dir(dir: &Path) -> Result<Self> {
        Ok(Lexicons {
            afinn: load_afinn(&dir.join(files::AFINN))?,
            valence: load_valence(
                &dir.join(files::VADER_LEXICON),
                &dir.join(files::VADER_BOOSTERS),
                &dir.join(files::VADER_NEGATORS),
            )?,
            pattern: load_pattern(&dir.join(files::PATTERN))?,
        })
    }

    /// The engine's raw scalar for an already cleaned text.
    pub fn score(&self, method: LabelMethod, cleaned: &str) -> f64 {
        match method {
            LabelMethod::Afinn => afinn_score(cleaned, &self.afinn) as f64,
            LabelMethod::Vader => vader_scores(cleaned, &self.valence).compound,
            LabelMethod::TextBlob => pattern_polarity(cleaned, &self.pattern),
        }
    }

    /// Clean, score and threshold one raw text.
    pub fn label_text(&self, method: LabelMethod, raw: &str) -> SentimentLabel {
        let cleaned = clean_for_labelling(raw);
        to_ternary(method, self.score(method, &cleaned))
    }
}

/// Returns a copy of `ds` with `auto_labels[method]` set on every instance.
/// Gold labels and texts are left untouched.
pub fn label_dataset(ds: &Dataset, method: LabelMethod, lex: &Lexicons) -> Dataset {
    let mut out = ds.clone();
    for inst in &mut out.instances {
        let label = lex.label_text(method, &inst.text);
        inst.auto_labels.insert(method, label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vader_paper_quadruple_is_positive() {
        assert_eq!(to_ternary(LabelMethod::Vader, 0.1027), SentimentLabel::Positive);
    }

    #[test]
    fn vader_boundary_is_neutral() {
        assert_eq!(to_ternary(LabelMethod::Vader, 0.05), SentimentLabel::Neutral);
        assert_eq!(to_ternary(LabelMethod::Vader, -0.05), SentimentLabel::Neutral);
        assert_eq!(to_ternary(LabelMethod::Vader, -0.0501), SentimentLabel::Negative);
    }

    #[test]
    fn sign_rules() {
        assert_eq!(to_ternary(LabelMethod::Afinn, -1.0), SentimentLabel::Negative);
        assert_eq!(to_ternary(LabelMethod::Afinn, 0.0), SentimentLabel::Neutral);
        assert_eq!(to_ternary(LabelMethod::Afinn, 2.0), SentimentLabel::Positive);
        assert_eq!(to_ternary(LabelMethod::TextBlob, 0.01), SentimentLabel::Positive);
        assert_eq!(to_ternary(LabelMethod::TextBlob, 0.0), SentimentLabel::Neutral);
    }

    #[test]
    fn unknown_method_name() {
        assert!(matches!(
            to_ternary_named("sentiwordnet", 1.0),
            Err(Error::UnknownMethod(_))
        ));
        assert_eq!(to_ternary_named("VADER", 0.5).unwrap(), SentimentLabel::Positive);
    }

    #[test]
    fn label_and_source_round_trip() {
        for l in SentimentLabel::ALL {
            assert_eq!(l.as_str().parse::<SentimentLabel>().unwrap(), l);
            assert_eq!(SentimentLabel::from_index(l.index()), Some(l));
        }
        assert_eq!("Neutral".parse::<SentimentLabel>(), Ok(SentimentLabel::Neutral));
        for s in ["gold", "afinn", "vader", "textblob"] {
            assert_eq!(s.parse::<LabelSource>().unwrap().as_str(), s);
        }
        assert!("human".parse::<LabelSource>().is_err());
        let json = serde_json::to_string(&LabelSource::Auto(LabelMethod::TextBlob)).unwrap();
        assert_eq!(json, "\"textblob\"");
        let back: LabelSource = serde_json::from_str("\"gold\"").unwrap();
        assert_eq!(back, LabelSource::Gold);
    }

    #[test]
    fn empty_text_is_neutral_for_every_engine() {
        let lex = Lexicons::bundled();
        for m in LabelMethod::ALL {
            assert_eq!(lex.label_text(m, ""), SentimentLabel::Neutral);
        }
    }
}
