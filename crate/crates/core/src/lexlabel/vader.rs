//! Valence-aware scoring with the VADER heuristics.
//!
//! Each whitespace token gets its lexicon valence, adjusted by the up to
//! three preceding tokens (degree adverbs, negations), by ALL-CAPS emphasis
//! and by a handful of idioms. A contrastive `but` halves everything before
//! it and boosts everything after it. The adjusted sum, plus a punctuation
//! bonus, is squashed into the compound score `s / sqrt(s^2 + ALPHA)`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};

/// Normalisation constant of the compound score.
pub const ALPHA: f64 = 15.0;
/// Degree-adverb increment (dampeners use the negation of this).
pub const BOOSTER_INCR: f64 = 0.293;
/// Multiplier applied to a negated valence.
pub const NEGATION_SCALAR: f64 = -0.74;
/// Increment for an ALL-CAPS word in otherwise mixed-case text.
pub const CAPS_INCR: f64 = 0.733;
/// Per-`!` increment and the number of marks counted at most.
pub const EXCLAMATION_INCR: f64 = 0.292;
pub const EXCLAMATION_CAP: usize = 4;
/// Per-`?` increment for 2 or 3 marks, and the flat value for more.
pub const QUESTION_INCR: f64 = 0.18;
pub const QUESTION_CAP: f64 = 0.96;
/// Weights for valences before and after a contrastive `but`.
pub const BUT_BEFORE: f64 = 0.5;
pub const BUT_AFTER: f64 = 1.5;
/// Decay of a modifier two and three tokens back.
pub const MODIFIER_DECAY: [f64; 3] = [1.0, 0.95, 0.9];
/// "never so good" style emphasis.
pub const NEVER_SO_SCALAR: f64 = 1.25;
/// Ternary threshold on the compound score.
pub const LABEL_CUTOFF: f64 = 0.05;

/// Multi-word expressions whose valence overrides the word's own.
pub const SPECIAL_CASES: [(&str, f64); 9] = [
    ("the shit", 3.0),
    ("the bomb", 3.0),
    ("bad ass", 1.5),
    ("badass", 1.5),
    ("bus stop", 0.0),
    ("yeah right", -2.0),
    ("kiss of death", -1.5),
    ("to die for", 3.0),
    ("beating heart", 3.5),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaderScores {
    pub neg: f64,
    pub neu: f64,
    pub pos: f64,
    pub compound: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ValenceLexicon {
    pub entries: HashMap<String, f64>,
    pub boosters: HashMap<String, f64>,
    pub negators: HashSet<String>,
}

impl ValenceLexicon {
    pub fn bundled() -> Self {
        let mut lex = ValenceLexicon::default();
        parse_valence(data::VADER_LEXICON_DATA, data::VADER_LEXICON, &mut lex)
            .expect("bundled valence lexicon is valid");
        parse_boosters(data::VADER_BOOSTERS_DATA, data::VADER_BOOSTERS, &mut lex)
            .expect("bundled booster table is valid");
        lex.negators = data::word_lines(data::VADER_NEGATORS_DATA)
            .map(str::to_lowercase)
            .collect();
        lex
    }

    fn valence(&self, lower: &str) -> Option<f64> {
        self.entries.get(lower).copied()
    }

    fn contains(&self, lower: &str) -> bool {
        self.entries.contains_key(lower)
    }

    fn is_negation(&self, lower: &str) -> bool {
        self.negators.contains(lower) || lower.contains("n't")
    }
}

/// Loads the valence lexicon and its booster and negator companions.
pub fn load_valence(lexicon: &Path, boosters: &Path, negators: &Path) -> Result<ValenceLexicon> {
    let mut lex = ValenceLexicon::default();
    parse_valence(
        &data::read_to_string(lexicon)?,
        &lexicon.display().to_string(),
        &mut lex,
    )?;
    parse_boosters(
        &data::read_to_string(boosters)?,
        &boosters.display().to_string(),
        &mut lex,
    )?;
    lex.negators = data::word_lines(&data::read_to_string(negators)?)
        .map(str::to_lowercase)
        .collect();
    if lex.negators.is_empty() {
        return Err(Error::BadLexiconLine {
            file: negators.display().to_string(),
            line: 0,
        });
    }
    Ok(lex)
}

fn parse_valence(text: &str, file: &str, lex: &mut ValenceLexicon) -> Result<()> {
    let mut duplicates = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default().trim();
        let value = fields.next().ok_or_else(|| Error::BadLexiconLine {
            file: file.to_string(),
            line: i + 1,
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::BadScore {
            file: file.to_string(),
            line: i + 1,
        })?;
        if token.is_empty() || !value.is_finite() {
            return Err(Error::BadScore {
                file: file.to_string(),
                line: i + 1,
            });
        }
        if lex.entries.insert(token.to_string(), value).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::debug!("{file}: {duplicates} duplicate entries (last one wins)");
    }
    Ok(())
}

fn parse_boosters(text: &str, file: &str, lex: &mut ValenceLexicon) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (token, incr) = match line.split_once('\t') {
            Some((t, v)) => {
                let v: f64 = v.trim().parse().map_err(|_| Error::BadScore {
                    file: file.to_string(),
                    line: i + 1,
                })?;
                if !v.is_finite() {
                    return Err(Error::BadScore {
                        file: file.to_string(),
                        line: i + 1,
                    });
                }
                (t.trim(), v)
            }
            None => (line, BOOSTER_INCR),
        };
        lex.boosters.insert(token.to_lowercase(), incr);
    }
    Ok(())
}

/// `s / sqrt(s^2 + ALPHA)`, kept strictly inside (-1, 1).
pub fn normalize_compound(sum: f64) -> f64 {
    let largest_below_one = 1.0 - f64::EPSILON / 2.0;
    (sum / sum.hypot(ALPHA.sqrt())).clamp(-largest_below_one, largest_below_one)
}

/// Python's `str.isupper`: at least one cased character and no lowercase ones.
fn is_upper(s: &str) -> bool {
    s.chars().any(char::is_uppercase) && !s.chars().any(char::is_lowercase)
}

const ASCII_PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Strips surrounding punctuation unless that would leave two or fewer
/// characters (which keeps emoticons such as `:)` intact).
fn strip_punctuation(token: &str) -> &str {
    let stripped = token.trim_matches(|c| ASCII_PUNCTUATION.contains(c));
    if stripped.chars().count() <= 2 {
        token
    } else {
        stripped
    }
}

struct SentiText<'a> {
    words: Vec<&'a str>,
    lower: Vec<String>,
    cap_differential: bool,
}

impl<'a> SentiText<'a> {
    fn new(text: &'a str) -> Self {
        let words: Vec<&str> = text.split_whitespace().map(strip_punctuation).collect();
        let lower = words.iter().map(|w| w.to_lowercase()).collect();
        let caps = words.iter().filter(|w| is_upper(w)).count();
        let diff = words.len() - caps;
        SentiText {
            cap_differential: diff > 0 && diff < words.len(),
            words,
            lower,
        }
    }
}

/// Scores a text that has already been through `clean_for_labelling`.
pub fn vader_scores(text: &str, lex: &ValenceLexicon) -> VaderScores {
    let st = SentiText::new(text);
    let n = st.words.len();
    let mut sentiments = Vec::with_capacity(n);
    for i in 0..n {
        let lower = st.lower[i].as_str();
        if lex.boosters.contains_key(lower) {
            sentiments.push(0.0);
            continue;
        }
        if i + 1 < n && lower == "kind" && st.lower[i + 1] == "of" {
            sentiments.push(0.0);
            continue;
        }
        sentiments.push(word_valence(&st, i, lex));
    }
    but_reweight(&st.lower, &mut sentiments);
    score_valence(&sentiments, text)
}

fn word_valence(st: &SentiText<'_>, i: usize, lex: &ValenceLexicon) -> f64 {
    let words = &st.lower;
    let Some(base) = lex.valence(&words[i]) else {
        return 0.0;
    };
    let mut valence = base;

    // "no" directly before another lexicon word acts as a negation, not as a word
    if words[i] == "no" && i + 1 < words.len() && lex.contains(&words[i + 1]) {
        valence = 0.0;
    }
    if (i > 0 && words[i - 1] == "no")
        || (i > 1 && words[i - 2] == "no")
        || (i > 2 && words[i - 3] == "no" && (words[i - 1] == "or" || words[i - 1] == "nor"))
    {
        valence = base * NEGATION_SCALAR;
    }

    if is_upper(st.words[i]) && st.cap_differential {
        if valence > 0.0 {
            valence += CAPS_INCR;
        } else {
            valence -= CAPS_INCR;
        }
    }

    for back in 0..3 {
        if i > back && !lex.contains(&words[i - back - 1]) {
            let prev = i - back - 1;
            let mut s = booster_scalar(st.words[prev], &words[prev], valence, st.cap_differential, lex);
            if s != 0.0 {
                s *= MODIFIER_DECAY[back];
            }
            valence += s;
            valence = negation_check(valence, words, back, i, lex);
            if back == 2 {
                valence = special_idioms(valence, words, i, lex);
            }
        }
    }

    least_check(valence, words, i, lex)
}

fn booster_scalar(word: &str, lower: &str, valence: f64, cap_diff: bool, lex: &ValenceLexicon) -> f64 {
    let Some(&incr) = lex.boosters.get(lower) else {
        return 0.0;
    };
    let mut scalar = if valence < 0.0 { -incr } else { incr };
    if is_upper(word) && cap_diff {
        if valence > 0.0 {
            scalar += CAPS_INCR;
        } else {
            scalar -= CAPS_INCR;
        }
    }
    scalar
}

fn negation_check(valence: f64, w: &[String], back: usize, i: usize, lex: &ValenceLexicon) -> f64 {
    match back {
        0 => {
            if lex.is_negation(&w[i - 1]) {
                return valence * NEGATION_SCALAR;
            }
        }
        1 => {
            if w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this") {
                return valence * NEVER_SO_SCALAR;
            } else if w[i - 2] == "without" && w[i - 1] == "doubt" {
                return valence;
            } else if lex.is_negation(&w[i - 2]) {
                return valence * NEGATION_SCALAR;
            }
        }
        _ => {
            if (w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this"))
                || (w[i - 1] == "so" || w[i - 1] == "this")
            {
                return valence * NEVER_SO_SCALAR;
            } else if w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt") {
                return valence;
            } else if lex.is_negation(&w[i - 3]) {
                return valence * NEGATION_SCALAR;
            }
        }
    }
    valence
}

fn special_idioms(mut valence: f64, w: &[String], i: usize, lex: &ValenceLexicon) -> f64 {
    let special = |seq: &str| SPECIAL_CASES.iter().find(|(k, _)| *k == seq).map(|(_, v)| *v);
    let one_zero = format!("{} {}", w[i - 1], w[i]);
    let two_one_zero = format!("{} {} {}", w[i - 2], w[i - 1], w[i]);
    let two_one = format!("{} {}", w[i - 2], w[i - 1]);
    let three_two_one = format!("{} {} {}", w[i - 3], w[i - 2], w[i - 1]);
    let three_two = format!("{} {}", w[i - 3], w[i - 2]);

    for seq in [&one_zero, &two_one_zero, &two_one, &three_two_one, &three_two] {
        if let Some(v) = special(seq) {
            valence = v;
            break;
        }
    }
    if i + 1 < w.len() {
        if let Some(v) = special(&format!("{} {}", w[i], w[i + 1])) {
            valence = v;
        }
    }
    if i + 2 < w.len() {
        if let Some(v) = special(&format!("{} {} {}", w[i], w[i + 1], w[i + 2])) {
            valence = v;
        }
    }
    // multi-word degree adverbs such as "sort of"
    for gram in [&three_two_one, &three_two, &two_one] {
        if let Some(incr) = lex.boosters.get(gram.as_str()) {
            valence += incr;
        }
    }
    valence
}

fn least_check(valence: f64, w: &[String], i: usize, lex: &ValenceLexicon) -> f64 {
    if i > 0 && w[i - 1] == "least" && !lex.contains(&w[i - 1]) {
        if i > 1 {
            if w[i - 2] != "at" && w[i - 2] != "very" {
                return valence * NEGATION_SCALAR;
            }
        } else {
            return valence * NEGATION_SCALAR;
        }
    }
    valence
}

fn but_reweight(lower: &[String], sentiments: &mut [f64]) {
    if let Some(bi) = lower.iter().position(|w| w == "but") {
        for (si, s) in sentiments.iter_mut().enumerate() {
            if si < bi {
                *s *= BUT_BEFORE;
            } else if si > bi {
                *s *= BUT_AFTER;
            }
        }
    }
}

fn punctuation_emphasis(text: &str) -> f64 {
    let ep = text.matches('!').count().min(EXCLAMATION_CAP) as f64 * EXCLAMATION_INCR;
    let qm_count = text.matches('?').count();
    let qm = match qm_count {
        0 | 1 => 0.0,
        2 | 3 => qm_count as f64 * QUESTION_INCR,
        _ => QUESTION_CAP,
    };
    ep + qm
}

fn score_valence(sentiments: &[f64], text: &str) -> VaderScores {
    if sentiments.is_empty() {
        return VaderScores {
            neg: 0.0,
            neu: 1.0,
            pos: 0.0,
            compound: 0.0,
        };
    }
    let mut sum: f64 = sentiments.iter().sum();
    let emphasis = punctuation_emphasis(text);
    if sum > 0.0 {
        sum += emphasis;
    } else if sum < 0.0 {
        sum -= emphasis;
    }
    let compound = normalize_compound(sum);

    // neutral words count 1 each, so sentiment-bearing words are shifted by 1
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    let mut neu_count = 0.0;
    for &s in sentiments {
        if s > 0.0 {
            pos_sum += s + 1.0;
        } else if s < 0.0 {
            neg_sum += s - 1.0;
        } else {
            neu_count += 1.0;
        }
    }
    if pos_sum > neg_sum.abs() {
        pos_sum += emphasis;
    } else if pos_sum < neg_sum.abs() {
        neg_sum -= emphasis;
    }
    let total = pos_sum + neg_sum.abs() + neu_count;
    VaderScores {
        neg: (neg_sum / total).abs(),
        neu: (neu_count / total).abs(),
        pos: (pos_sum / total).abs(),
        compound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> ValenceLexicon {
        ValenceLexicon::bundled()
    }

    fn compound(text: &str) -> f64 {
        vader_scores(text, &lex()).compound
    }

    #[test]
    fn no_lexicon_tokens_is_fully_neutral() {
        let s = vader_scores("install the newest version", &lex());
        assert_eq!(s.compound, 0.0);
        assert_eq!(s.neu, 1.0);
        let empty = vader_scores("", &lex());
        assert_eq!((empty.neg, empty.neu, empty.pos, empty.compound), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn normalization_spot_value() {
        let expected = 4.0 / 31f64.sqrt();
        assert!((normalize_compound(4.0) - expected).abs() < 1e-15);
        assert!((normalize_compound(4.0) - 0.7184).abs() < 1e-4);
        assert!(normalize_compound(1e300) < 1.0);
        assert!(normalize_compound(-1e300) > -1.0);
    }

    // (neg, neu, pos, compound) from vaderSentiment 3.3.2 on the same
    // sentences; that tool rounds to 3 and 4 places.
    #[test]
    fn matches_reference_tool() {
        let cases: [(&str, [f64; 4]); 22] = [
            ("VADER is smart, handsome, and funny.", [0.0, 0.254, 0.746, 0.8316]),
            ("VADER is smart, handsome, and funny!", [0.0, 0.248, 0.752, 0.8439]),
            ("VADER is very smart, handsome, and funny.", [0.0, 0.299, 0.701, 0.8545]),
            ("VADER is VERY SMART, handsome, and FUNNY.", [0.0, 0.246, 0.754, 0.9227]),
            (
                "VADER is VERY SMART, handsome, and FUNNY!!!",
                [0.0, 0.233, 0.767, 0.9342],
            ),
            ("VADER is not smart, handsome, nor funny.", [0.646, 0.354, 0.0, -0.7424]),
            ("The book was good.", [0.0, 0.508, 0.492, 0.4404]),
            ("At least it isn't a horrible book.", [0.0, 0.678, 0.322, 0.431]),
            ("The book was only kind of good.", [0.0, 0.697, 0.303, 0.3832]),
            (
                "The plot was good, but the characters are uncompelling and the dialog is not great.",
                [0.327, 0.579, 0.094, -0.7042],
            ),
            ("Today SUX!", [0.779, 0.221, 0.0, -0.5461]),
            ("Not bad at all", [0.0, 0.513, 0.487, 0.431]),
            ("Sentiment analysis has never been good.", [0.325, 0.675, 0.0, -0.3412]),
            (
                "Sentiment analysis has never been this good!",
                [0.0, 0.621, 0.379, 0.5672],
            ),
            (
                "With VADER, sentiment analysis is the shit!",
                [0.0, 0.583, 0.417, 0.6476],
            ),
            ("On the other hand, VADER is quite bad ass", [0.0, 0.423, 0.577, 0.802]),
            (
                "Roger Dodger is one of the least compelling variations on this theme.",
                [0.132, 0.868, 0.0, -0.1695],
            ),
            (
                "Good movie, but the ending was TERRIBLE!!",
                [0.456, 0.391, 0.153, -0.7081],
            ),
            ("No fun at all, no good", [0.561, 0.439, 0.0, -0.6259]),
            ("Without a doubt, excellent idea.", [0.0, 0.341, 0.659, 0.7013]),
            (
                "It was kind of great but sort of awful?? really?",
                [0.324, 0.52, 0.156, -0.5538],
            ),
            ("I am SO HAPPY but not really glad!!!!!!", [0.244, 0.414, 0.342, 0.342]),
        ];
        for (text, want) in cases {
            let s = vader_scores(text, &lex());
            let got = [s.neg, s.neu, s.pos, s.compound];
            for (k, (g, w)) in got.iter().zip(want).enumerate() {
                let tol = if k == 3 { 5e-5 } else { 5e-4 };
                assert!((g - w).abs() <= tol + 1e-12, "{text}: got {got:?}, want {want:?}");
            }
        }
    }

    #[test]
    fn label_cutoffs() {
        assert!(compound("good") > LABEL_CUTOFF);
        assert!(compound("bad") < -LABEL_CUTOFF);
        assert_eq!(compound("the table"), 0.0);
    }

    #[test]
    fn proportions_sum_to_one() {
        let s = vader_scores("Good movie, but the ending was TERRIBLE!!", &lex());
        assert!((s.neg + s.neu + s.pos - 1.0).abs() < 1e-6);
        assert!(s.neg > 0.0 && s.pos > 0.0);
    }

    proptest! {
        #[test]
        fn compound_is_bounded_and_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (ca, cb) = (normalize_compound(a), normalize_compound(b));
            prop_assert!(ca.abs() < 1.0 && cb.abs() < 1.0);
            if a < b {
                prop_assert!(ca <= cb);
            }
        }

        #[test]
        fn scores_are_valid_for_any_text(text in "[a-zA-Z!?:) ]{0,60}") {
            let s = vader_scores(&text, &lex());
            prop_assert!((s.neg + s.neu + s.pos - 1.0).abs() < 1e-6);
            prop_assert!(s.compound > -1.0 && s.compound < 1.0);
            for v in [s.neg, s.neu, s.pos] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
