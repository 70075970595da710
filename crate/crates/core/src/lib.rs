//! Automatic sentiment labelling of short texts with lexicon-based tools, and
//! the neural classifiers trained on those labels.
//!
//! The pipeline runs in this order:
//!
//! 1. [`corpus`] loads a labelled dataset and splits it.
//! 2. [`lexlabel`] assigns ternary labels with AFINN, VADER or TextBlob-style
//!    pattern scoring.
//! 3. [`textprep`] turns raw text into model tokens.
//! 4. [`encode`] builds the vocabulary and embedding matrix, then encodes
//!    fixed-length sequences.
//! 5. [`models`] trains CNN, BiLSTM and CNN-BiLSTM classifiers built from the
//!    [`nn`] layers.
//! 6. [`evalx`] computes metrics and runs whole experiments.
//!
//! ```
//! use autolabel::lexlabel::{LabelMethod, Lexicons, SentimentLabel};
//!
//! let lex = Lexicons::bundled();
//! let label = lex.label_text(LabelMethod::Vader, "What a wonderful day!");
//! assert_eq!(label, SentimentLabel::Positive);
//! ```

pub mod corpus;
pub mod data;
pub mod encode;
pub mod error;
pub mod evalx;
pub mod lexlabel;
pub mod models;
pub mod nn;
pub mod textprep;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their examples run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/labelling.md")]
    mod labelling {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
