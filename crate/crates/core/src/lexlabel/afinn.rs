use std::collections::HashMap;
use std::path::Path;

use crate::data;
use crate::error::{Error, Result};

/// Word (or short phrase) to integer score in [-5, 5].
///
/// Phrase entries such as `not good` or `cover-up` are stored with their
/// parts joined by a single space so that hyphenated and spaced spellings
/// match the same token run.
#[derive(Debug, Clone, Default)]
pub struct AfinnLexicon {
    entries: HashMap<String, i32>,
    max_phrase_len: usize,
    duplicates: usize,
}

impl AfinnLexicon {
    pub fn bundled() -> Self {
        parse(data::AFINN_DATA, data::AFINN).expect("bundled AFINN file is valid")
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, i32)>,
        S: AsRef<str>,
    {
        let mut lex = AfinnLexicon::default();
        for (i, (word, score)) in entries.into_iter().enumerate() {
            if !(-5..=5).contains(&score) {
                return Err(Error::BadScore {
                    file: "<entries>".into(),
                    line: i + 1,
                });
            }
            lex.insert(word.as_ref(), score);
        }
        Ok(lex)
    }

    fn insert(&mut self, word: &str, score: i32) {
        let parts = phrase_parts(word);
        if parts.is_empty() {
            return;
        }
        self.max_phrase_len = self.max_phrase_len.max(parts.len());
        if self.entries.insert(parts.join(" "), score).is_some() {
            self.duplicates += 1;
        }
    }

    pub fn get(&self, word: &str) -> Option<i32> {
        self.entries.get(&phrase_parts(word).join(" ")).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries overwritten by a later line during loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, i32)> {
        self.entries.iter().map(|(w, s)| (w.as_str(), *s))
    }
}

fn phrase_parts(word: &str) -> Vec<String> {
    tokenize(word)
}

/// Lowercased runs of alphanumerics, underscores and apostrophes.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Loads a `word<TAB>score` file. Duplicates resolve last-write-wins.
pub fn load_afinn(path: &Path) -> Result<AfinnLexicon> {
    let text = data::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

fn parse(text: &str, file: &str) -> Result<AfinnLexicon> {
    let mut lex = AfinnLexicon::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (word, score) = line.rsplit_once('\t').ok_or_else(|| Error::BadLexiconLine {
            file: file.to_string(),
            line: i + 1,
        })?;
        let score: i32 = score.trim().parse().map_err(|_| Error::BadScore {
            file: file.to_string(),
            line: i + 1,
        })?;
        if !(-5..=5).contains(&score) {
            return Err(Error::BadScore {
                file: file.to_string(),
                line: i + 1,
            });
        }
        lex.insert(word, score);
    }
    if lex.is_empty() {
        log::warn!("{file}: AFINN lexicon is empty");
    }
    if lex.duplicates > 0 {
        log::warn!("{file}: {} duplicate entries (last one wins)", lex.duplicates);
    }
    Ok(lex)
}

/// Sum of lexicon scores over the text's tokens. At each position the
/// longest matching phrase is taken; unmatched tokens contribute 0.
pub fn afinn_score(text: &str, lex: &AfinnLexicon) -> i64 {
    let tokens = tokenize(text);
    let mut total = 0i64;
    let mut i = 0;
    while i < tokens.len() {
        let longest = lex.max_phrase_len.min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|n| lex.entries.get(&tokens[i..i + n].join(" ")).map(|s| (n, *s)));
        match hit {
            Some((n, score)) => {
                total += score as i64;
                i += n;
            }
            None => i += 1,
        }
    }
    total
}
