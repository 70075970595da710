//! The two cleaning pipelines.
//!
//! [`clean_for_labelling`] is deliberately light: it only removes mentions,
//! `#`, `$` and retweet markers, because the valence engine reads casing and
//! punctuation. [`preprocess_for_model`] is the heavy pipeline used before
//! vocabulary building: lowercase, strip digits, tokenize, drop stopwords and
//! junk words.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::Result;

/// Lowercase, whitespace-free, non-empty tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenList(Vec<String>);

impl TokenList {
    /// Keeps only tokens that satisfy the invariants.
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Self {
        TokenList(
            tokens
                .into_iter()
                .map(|t| t.to_lowercase())
                .filter(|t| !t.is_empty() && !t.chars().any(char::is_whitespace))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Stopwords to drop, minus the ones the model pipeline keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordPolicy {
    stoplist: BTreeSet<String>,
    keep_exceptions: BTreeSet<String>,
}

impl StopwordPolicy {
    pub fn new(stoplist: impl IntoIterator<Item = String>, keep_exceptions: impl IntoIterator<Item = String>) -> Self {
        StopwordPolicy {
            stoplist: stoplist.into_iter().map(|w| w.to_lowercase()).collect(),
            keep_exceptions: keep_exceptions.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    /// The bundled 179-word English list with demonstratives and
    /// first-person plural possessives kept.
    pub fn bundled() -> Self {
        Self::new(
            data::word_lines(data::STOPWORDS_DATA).map(String::from),
            data::word_lines(data::STOPWORD_EXCEPTIONS_DATA).map(String::from),
        )
    }

    /// Reads a one-word-per-line stoplist; the exceptions default to the
    /// bundled set.
    pub fn from_file(stoplist: &Path, exceptions: Option<&Path>) -> Result<Self> {
        let stop = data::read_to_string(stoplist)?;
        let keep = match exceptions {
            Some(p) => data::read_to_string(p)?,
            None => data::STOPWORD_EXCEPTIONS_DATA.to_string(),
        };
        Ok(Self::new(
            data::word_lines(&stop).map(String::from),
            data::word_lines(&keep).map(String::from),
        ))
    }

    pub fn removes(&self, word: &str) -> bool {
        self.stoplist.contains(word) && !self.keep_exceptions.contains(word)
    }

    pub fn stoplist(&self) -> &BTreeSet<String> {
        &self.stoplist
    }

    pub fn keep_exceptions(&self) -> &BTreeSet<String> {
        &self.keep_exceptions
    }
}

/// Words dropped by the model pipeline regardless of the stoplist.
pub fn bundled_junk_words() -> BTreeSet<String> {
    data::word_lines(data::JUNK_WORDS_DATA).map(String::from).collect()
}

pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>> {
    Ok(data::word_lines(&data::read_to_string(path)?)
        .map(str::to_lowercase)
        .collect())
}

fn is_username_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Removes `#`/`$` and leading `@username` runs until the token is stable.
fn clean_token(token: &str) -> String {
    let mut t: String = token.to_string();
    loop {
        t.retain(|c| c != '#' && c != '$');
        match t.strip_prefix('@') {
            Some(rest) => {
                let end = rest.find(|c| !is_username_char(c)).unwrap_or(rest.len());
                t = rest[end..].to_string();
            }
            None => return t,
        }
    }
}

fn needs_cleaning(token: &str) -> bool {
    token == "RT" || token.starts_with('@') || token.contains(['#', '$'])
}

/// Removes @-mentions (with the username), the characters `#` and `$`, and
/// standalone `RT` tokens. Casing and punctuation are preserved. When
/// something is removed the remaining tokens are re-joined with single spaces;
/// otherwise the text is returned unchanged.
pub fn clean_for_labelling(text: &str) -> String {
    if !text.split_whitespace().any(needs_cleaning) {
        return text.to_string();
    }
    text.split_whitespace()
        .map(clean_token)
        .filter(|t| !t.is_empty() && t != "RT")
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercase, apply [`clean_for_labelling`], strip digits, split on anything
/// outside `[a-z']`, then drop effective stopwords and junk words.
pub fn preprocess_for_model(text: &str, policy: &StopwordPolicy, junk_words: &BTreeSet<String>) -> TokenList {
    let cleaned = clean_for_labelling(text).to_lowercase();
    let no_digits: String = cleaned.chars().filter(|c| !c.is_numeric()).collect();
    TokenList(
        no_digits
            .split(|c: char| !(c.is_ascii_lowercase() || c == '\''))
            .map(|t| t.trim_matches('\''))
            .filter(|t| !t.is_empty())
            .filter(|t| !policy.removes(t) && !junk_words.contains(*t))
            .map(String::from)
            .collect(),
    )
}
