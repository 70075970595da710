//! Data files compiled into the library and the file names used when the
//! same files are read from a lexicon directory.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const AFINN: &str = "AFINN-111.txt";
pub const VADER_LEXICON: &str = "vader_lexicon.txt";
pub const VADER_BOOSTERS: &str = "vader_boosters.tsv";
pub const VADER_NEGATORS: &str = "vader_negators.txt";
pub const PATTERN: &str = "pattern_sentiment.tsv";
pub const STOPWORDS: &str = "stopwords_english.txt";
pub const STOPWORD_EXCEPTIONS: &str = "stopword_exceptions.txt";
pub const JUNK_WORDS: &str = "junk_words.txt";

pub(crate) const AFINN_DATA: &str = include_str!("../data/AFINN-111.txt");
pub(crate) const VADER_LEXICON_DATA: &str = include_str!("../data/vader_lexicon.txt");
pub(crate) const VADER_BOOSTERS_DATA: &str = include_str!("../data/vader_boosters.tsv");
pub(crate) const VADER_NEGATORS_DATA: &str = include_str!("../data/vader_negators.txt");
pub(crate) const PATTERN_DATA: &str = include_str!("../data/pattern_sentiment.tsv");
pub(crate) const STOPWORDS_DATA: &str = include_str!("../data/stopwords_english.txt");
pub(crate) const STOPWORD_EXCEPTIONS_DATA: &str = include_str!("../data/stopword_exceptions.txt");
pub(crate) const JUNK_WORDS_DATA: &str = include_str!("../data/junk_words.txt");

const ALL: [(&str, &str); 8] = [
    (AFINN, AFINN_DATA),
    (VADER_LEXICON, VADER_LEXICON_DATA),
    (VADER_BOOSTERS, VADER_BOOSTERS_DATA),
    (VADER_NEGATORS, VADER_NEGATORS_DATA),
    (PATTERN, PATTERN_DATA),
    (STOPWORDS, STOPWORDS_DATA),
    (STOPWORD_EXCEPTIONS, STOPWORD_EXCEPTIONS_DATA),
    (JUNK_WORDS, JUNK_WORDS_DATA),
];

/// Contents of a bundled file by its directory name.
pub fn bundled_file(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

/// Writes every bundled file into `dir`, creating it if needed.
pub fn write_bundled(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, data) in ALL {
        let path = dir.join(name);
        fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// One entry per non-empty, non-comment line, trimmed.
pub(crate) fn word_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}
