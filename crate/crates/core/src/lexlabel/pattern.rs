use std::collections::HashMap;
use std::path::Path;

use crate::data;
use crate::error::{Error, Result};

/// Multiplier for a polarity preceded by a negation ("not good" is only
/// mildly bad).
pub const NEGATION_FACTOR: f64 = -0.5;

const NEGATIONS: [&str; 3] = ["no", "not", "never"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternEntry {
    pub polarity: f64,
    /// Loaded for completeness; scoring only uses polarity.
    pub subjectivity: f64,
}

/// Word to mean polarity in [-1, 1], one row per word form.
#[derive(Debug, Clone, Default)]
pub struct PatternLexicon {
    entries: HashMap<String, PatternEntry>,
}

impl PatternLexicon {
    pub fn bundled() -> Self {
        parse(data::PATTERN_DATA, data::PATTERN).expect("bundled pattern lexicon is valid")
    }

    pub fn get(&self, word: &str) -> Option<PatternEntry> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Loads a `word<TAB>polarity<TAB>subjectivity` file.
pub fn load_pattern(path: &Path) -> Result<PatternLexicon> {
    parse(&data::read_to_string(path)?, &path.display().to_string())
}

fn parse(text: &str, file: &str) -> Result<PatternLexicon> {
    let mut entries = HashMap::new();
    let mut duplicates = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::BadScore {
            file: file.to_string(),
            line: i + 1,
        };
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default().trim().to_lowercase();
        let polarity: f64 = fields
            .next()
            .ok_or_else(|| Error::BadLexiconLine {
                file: file.to_string(),
                line: i + 1,
            })?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let subjectivity: f64 = match fields.next() {
            Some(s) => s.trim().parse().map_err(|_| bad())?,
            None => 0.0,
        };
        if word.is_empty() || !(-1.0..=1.0).contains(&polarity) || !(0.0..=1.0).contains(&subjectivity) {
            return Err(bad());
        }
        let entry = PatternEntry { polarity, subjectivity };
        if entries.insert(word, entry).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{file}: {duplicates} duplicate entries (last one wins)");
    }
    Ok(PatternLexicon { entries })
}

fn is_negation(word: &str) -> bool {
    NEGATIONS.contains(&word) || word.ends_with("n't")
}

/// Mean polarity of the lexicon words in `text`; 0.0 when none match.
///
/// A negation flips and halves the polarity of the next lexicon word. The
/// negation survives one-letter words in between ("not a good") but any
/// longer unknown word cancels it.
pub fn pattern_polarity(text: &str, lex: &PatternLexicon) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut negated = false;
    for raw in text.split_whitespace() {
        let word = raw
            .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
            .to_lowercase();
        if word.is_empty() {
            continue;
        }
        match lex.get(&word) {
            Some(entry) => {
                let p = if negated {
                    entry.polarity * NEGATION_FACTOR
                } else {
                    entry.polarity
                };
                sum += p;
                count += 1;
                negated = is_negation(&word);
            }
            None => {
                if is_negation(&word) {
                    negated = true;
                } else if word.trim_matches('\'').chars().count() > 1 {
                    negated = false;
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).clamp(-1.0, 1.0)
    }
}
