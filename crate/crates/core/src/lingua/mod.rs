//! Length, readability and formality of explanation texts.

mod compare;
mod formality;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub use compare::{
    group_comparison, parse_group_list, GroupComparison, GroupRow, MetricCell, Metric,
    SIGNIFICANCE_LEVEL,
};
pub use formality::{FormalityScorer, HeylighenDewaele, ProcessScorer, Tag};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum LinguaError {
    #[error("text has no words")]
    EmptyText,
    #[error("formality scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("group `{group}` has {got} texts, need at least 2")]
    GroupTooSmall { group: String, got: usize },
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "corp",
    "dept", "gov", "sen", "rep", "gen", "no", "fig", "approx", "jan", "feb", "mar", "apr", "jun",
    "jul", "aug", "sep", "sept", "oct", "nov", "dec", "e.g", "i.e", "u.s", "u.k", "u.n", "a.m",
    "p.m",
];

static EXCEPTIONS: Lazy<HashMap<&'static str, usize>> = Lazy::new(|| {
    [
        ("science", 2),
        ("media", 3),
        ("area", 3),
        ("idea", 3),
        ("quiet", 2),
        ("being", 2),
        ("every", 2),
        ("business", 2),
        ("evening", 2),
        ("poem", 2),
        ("client", 2),
        ("diet", 2),
        ("society", 4),
        ("video", 3),
        ("radio", 3),
        ("museum", 3),
        ("genuine", 3),
        ("naive", 2),
        ("sometimes", 2),
        ("someone", 2),
        ("something", 2),
        ("anyone", 3),
    ]
    .into_iter()
    .collect()
});

fn is_vowel(chars: &[char], i: usize) -> bool {
    match chars[i] {
        'a' | 'e' | 'i' | 'o' | 'u' => true,
        'y' => i > 0,
        _ => false,
    }
}

/// Vowel-group syllable estimate without the exception lexicon.
pub fn heuristic_syllables(word: &str) -> usize {
    let chars: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let n = chars.len();
    if n == 0 {
        return 1;
    }
    let mut groups = 0;
    let mut prev = false;
    for i in 0..n {
        let v = is_vowel(&chars, i);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let consonant_at = |i: usize| !is_vowel(&chars, i);
    if n >= 2 && chars[n - 1] == 'e' && consonant_at(n - 2) {
        let syllabic_le = n >= 3 && chars[n - 2] == 'l' && consonant_at(n - 3);
        if !syllabic_le {
            groups -= 1;
        }
    } else if n >= 3 && chars[n - 2] == 'e' && consonant_at(n - 3) {
        let before = chars[n - 3];
        let silent = match chars[n - 1] {
            'd' => !matches!(before, 't' | 'd'),
            's' => {
                let sibilant = matches!(before, 's' | 'x' | 'z' | 'c' | 'g')
                    || (n >= 4 && matches!(chars[n - 4], 'c' | 's') && before == 'h');
                !sibilant
            }
            _ => false,
        };
        if silent {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Syllables for one word: the exception lexicon first, then the heuristic.
pub fn syllables(word: &str) -> usize {
    let key: String = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    EXCEPTIONS
        .get(key.as_str())
        .copied()
        .unwrap_or_else(|| heuristic_syllables(&key))
}

fn strip_word(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn ends_sentence(token: &str) -> bool {
    let core = token.trim_end_matches(|c: char| matches!(c, '"' | '\'' | ')' | ']' | '’' | '”'));
    if core.ends_with(['!', '?']) {
        return true;
    }
    if !core.ends_with('.') {
        return false;
    }
    let bare = core
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .trim_end_matches('.')
        .to_lowercase();
    if ABBREVIATIONS.contains(&bare.as_str()) {
        return false;
    }
    // a single initial like "J."
    let mut letters = bare.chars();
    !matches!((letters.next(), letters.next()), (Some(c), None) if c.is_alphabetic() && core.len() == 2)
}

/// Words, sentences and syllables of `text`.
pub fn count_units(text: &str) -> Result<Counts, LinguaError> {
    let mut words = 0;
    let mut syl = 0;
    let mut sentences = 0;
    let mut open = false;
    for token in text.split_whitespace() {
        let w = strip_word(token);
        if !w.is_empty() {
            words += 1;
            syl += syllables(w);
            open = true;
        }
        if open && ends_sentence(token) {
            sentences += 1;
            open = false;
        }
    }
    if words == 0 {
        return Err(LinguaError::EmptyText);
    }
    if open {
        sentences += 1;
    }
    Ok(Counts {
        words,
        sentences,
        syllables: syl,
    })
}

/// Flesch Reading Ease. Higher is easier.
pub fn reading_ease(c: &Counts) -> f64 {
    206.835 - 1.015 * (c.words as f64 / c.sentences as f64) - 84.6 * (c.syllables as f64 / c.words as f64)
}

/// Flesch-Kincaid grade level.
pub fn fk_grade(c: &Counts) -> f64 {
    0.39 * (c.words as f64 / c.sentences as f64) + 11.8 * (c.syllables as f64 / c.words as f64) - 15.59
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
    pub length_words: usize,
    pub reading_ease: f64,
    pub fk_grade: f64,
    pub formality: f64,
}

pub fn text_metrics(text: &str, scorer: &dyn FormalityScorer) -> Result<TextMetrics, LinguaError> {
    let c = count_units(text)?;
    Ok(TextMetrics {
        words: c.words,
        sentences: c.sentences,
        syllables: c.syllables,
        length_words: c.words,
        reading_ease: reading_ease(&c),
        fk_grade: fk_grade(&c),
        formality: scorer.score(text)?,
    })
}
