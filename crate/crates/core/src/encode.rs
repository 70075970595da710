//! Vocabulary, pretrained vectors and fixed-length index encoding.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexlabel::SentimentLabel;
use crate::textprep::TokenList;

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const DEFAULT_MAX_LEN: usize = 30;
pub const DEFAULT_EMBEDDING_DIM: usize = 300;
/// Half-width of the uniform range for rows without a pretrained vector.
pub const RANDOM_ROW_SCALE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    /// Index to word; positions 0 and 1 hold the pad and OOV markers.
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().skip(2).map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }

    /// Restores the lookup table after deserialisation.
    pub fn rebuild_index(&mut self) {
        *self = Vocab::from_words(std::mem::take(&mut self.words));
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn index_or_oov(&self, word: &str) -> usize {
        self.get(word).unwrap_or(OOV)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    /// Number of rows including pad and OOV.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    /// Real words in index order.
    pub fn words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.words.iter().enumerate().skip(2).map(|(i, w)| (i, w.as_str()))
    }
}

/// Indexes training tokens by descending frequency, ties broken
/// lexicographically. Words seen fewer than `min_count` times map to OOV.
pub fn build_vocab(train_tokens: &[TokenList], min_count: usize) -> Result<Vocab> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tokens in train_tokens {
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut words = vec!["<pad>".to_string(), "<oov>".to_string()];
    words.extend(ranked.into_iter().map(|(w, _)| w.to_string()));
    Ok(Vocab::from_words(words))
}

/// `|vocab| x dim` matrix with an all-zero pad row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub weights: Array2<f64>,
    /// Vocabulary words that received a pretrained vector.
    pub found: usize,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }

    /// Share of real vocabulary words covered by the pretrained file.
    pub fn coverage(&self) -> f64 {
        let real = self.rows().saturating_sub(2);
        if real == 0 {
            0.0
        } else {
            self.found as f64 / real as f64
        }
    }
}

/// Every row but the pad row drawn from uniform(-0.05, 0.05).
pub fn random_embeddings(vocab: &Vocab, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Array2::zeros((vocab.len(), dim));
    for mut row in weights.rows_mut().into_iter().skip(1) {
        row.mapv_inplace(|_| rng.random_range(-RANDOM_ROW_SCALE..RANDOM_ROW_SCALE));
    }
    EmbeddingMatrix { weights, found: 0 }
}

/// Standard-normal rows scaled by `scale`, for synthetic experiments that
/// need embeddings on the scale of real pretrained vectors.
pub fn gaussian_embeddings(vocab: &Vocab, dim: usize, scale: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).expect("finite scale");
    let mut weights = Array2::zeros((vocab.len(), dim));
    for mut row in weights.rows_mut().into_iter().skip(1) {
        row.mapv_inplace(|_| rng.sample(normal));
    }
    EmbeddingMatrix { weights, found: 0 }
}

fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Reads a `word v1 ... vd` text file (plain or gzip). Vocabulary words found
/// in the file get their vector verbatim; the rest, including OOV, are drawn
/// as in [`random_embeddings`].
pub fn load_embeddings(path: &Path, vocab: &Vocab, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let mut matrix = random_embeddings(vocab, dim, seed);
    let mut filled = vec![false; vocab.len()];
    let reader = open_maybe_gzip(path)?;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        // word2vec-style "count dim" header
        if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                line: i + 1,
                expected: dim,
                found: values.len(),
            });
        }
        let Some(row) = vocab.get(word) else {
            continue;
        };
        if filled[row] {
            continue;
        }
        for (j, v) in values.iter().enumerate() {
            let v: f64 = v.parse().map_err(|_| Error::DimensionMismatch {
                line: i + 1,
                expected: dim,
                found: j,
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{} line {}", path.display(), i + 1)));
            }
            matrix.weights[[row, j]] = v;
        }
        filled[row] = true;
        matrix.found += 1;
    }
    Ok(matrix)
}

/// Maps tokens to indices, keeps the first `max_len`, left-pads with 0.
pub fn encode_sequence(tokens: &TokenList, vocab: &Vocab, max_len: usize) -> Vec<usize> {
    let ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.index_or_oov(t)).collect();
    let mut out = vec![PAD; max_len - ids.len()];
    out.extend(ids);
    out
}

/// Columns in (Positive, Negative, Neutral) order.
pub fn one_hot(label: SentimentLabel) -> [f64; 3] {
    let mut v = [0.0; 3];
    v[label.index()] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInstance {
    pub indices: Vec<usize>,
    pub target: [f64; 3],
}

impl EncodedInstance {
    pub fn new(tokens: &TokenList, vocab: &Vocab, max_len: usize, label: SentimentLabel) -> Self {
        EncodedInstance {
            indices: encode_sequence(tokens, vocab, max_len),
            target: one_hot(label),
        }
    }

    pub fn label(&self) -> SentimentLabel {
        argmax_label(&self.target)
    }
}

/// Highest column wins; ties go to the earlier column.
pub fn argmax_label(row: &[f64]) -> SentimentLabel {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().take(3) {
        if *v > row[best] {
            best = i;
        }
    }
    SentimentLabel::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tl(words: &[&str]) -> TokenList {
        TokenList::new(words.iter().map(|w| w.to_string()))
    }

    #[test]
    fn vocab_by_frequency() {
        let v = build_vocab(&[tl(&["a", "b"]), tl(&["b"])], 1).unwrap();
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.get("a"), Some(3));
        assert_eq!(v.len(), 4);
        assert_eq!(v, build_vocab(&[tl(&["a", "b"]), tl(&["b"])], 1).unwrap());
    }

    #[test]
    fn vocab_min_count() {
        let v = build_vocab(&[tl(&["a", "b"]), tl(&["b"])], 2).unwrap();
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.get("a"), None);
        assert_eq!(v.index_or_oov("a"), OOV);
        assert!(matches!(build_vocab(&[tl(&[])], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn vocab_ties_are_lexicographic() {
        let v = build_vocab(&[tl(&["zeta", "alpha", "mid"])], 1).unwrap();
        let words: Vec<_> = v.words().map(|(_, w)| w).collect();
        assert_eq!(words, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn sequence_padding_and_truncation() {
        let v = build_vocab(&[tl(&["known", "other", "third"])], 1).unwrap();
        assert_eq!(encode_sequence(&tl(&[]), &v, 30), vec![0; 30]);
        let seq = encode_sequence(&tl(&["known", "mystery"]), &v, 30);
        assert_eq!(seq.len(), 30);
        assert!(seq[..28].iter().all(|&i| i == PAD));
        assert_eq!(&seq[28..], &[v.get("known").unwrap(), OOV]);
        let long: Vec<String> = (0..35)
            .map(|i| if i < 30 { "known".into() } else { "other".into() })
            .collect();
        let seq = encode_sequence(&TokenList::new(long), &v, 30);
        assert!(seq.iter().all(|&i| i == v.get("known").unwrap()));
    }

    #[test]
    fn one_hot_columns() {
        assert_eq!(one_hot(SentimentLabel::Positive), [1.0, 0.0, 0.0]);
        assert_eq!(one_hot(SentimentLabel::Negative), [0.0, 1.0, 0.0]);
        assert_eq!(one_hot(SentimentLabel::Neutral), [0.0, 0.0, 1.0]);
        for l in SentimentLabel::ALL {
            assert_eq!(one_hot(l).iter().sum::<f64>(), 1.0);
            assert_eq!(argmax_label(&one_hot(l)), l);
        }
        assert_eq!(argmax_label(&[1.0 / 3.0; 3]), SentimentLabel::Positive);
        assert_eq!(argmax_label(&[0.1, 0.7, 0.2]), SentimentLabel::Negative);
    }

    fn write_vectors(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn embeddings_from_file() {
        let v = build_vocab(&[tl(&["cat", "dog", "cat"])], 1).unwrap();
        let f = write_vectors("cat 0.5 -1.25 2\nbird 1 1 1\n");
        let m = load_embeddings(f.path(), &v, 3, 7).unwrap();
        let cat = v.get("cat").unwrap();
        assert_eq!(m.weights.row(cat).to_vec(), vec![0.5, -1.25, 2.0]);
        assert_eq!(m.weights.row(PAD).to_vec(), vec![0.0; 3]);
        let dog = v.get("dog").unwrap();
        assert!(m.weights.row(dog).iter().all(|x| x.abs() < RANDOM_ROW_SCALE));
        assert!(m
            .weights
            .row(OOV)
            .iter()
            .all(|x| x.abs() < RANDOM_ROW_SCALE && *x != 0.0));
        assert_eq!(m.found, 1);
        assert_eq!(m.coverage(), 0.5);
        let again = load_embeddings(f.path(), &v, 3, 7).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn embeddings_gzip_and_header() {
        let v = build_vocab(&[tl(&["cat"])], 1).unwrap();
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(b"2 2\ncat 0.25 0.75\ndog 1 2\n").unwrap();
        let f = write_vectors("");
        std::fs::write(f.path(), gz.finish().unwrap()).unwrap();
        let m = load_embeddings(f.path(), &v, 2, 0).unwrap();
        assert_eq!(m.weights.row(2).to_vec(), vec![0.25, 0.75]);
    }

    #[test]
    fn embeddings_dimension_mismatch() {
        let v = build_vocab(&[tl(&["cat"])], 1).unwrap();
        let f = write_vectors("cat 1 2 3\ndog 1 2\n");
        assert!(matches!(
            load_embeddings(f.path(), &v, 3, 0),
            Err(Error::DimensionMismatch {
                line: 2,
                expected: 3,
                found: 2
            })
        ));
    }
}
