//! Surface readability analysis: tokenization, syllable counting, and the
//! Flesch-Kincaid grade level.
//!
//! The formula is `0.39 * (words/sentences) + 11.8 * (syllables/words) - 15.59`
//! (higher = harder to read). Scores are never clamped; short simple sentences
//! legitimately go negative.
//!
//! Syllables are counted with a dictionary-free heuristic so results are
//! reproducible by hand:
//!
//! 1. lowercase the word and keep only its letters;
//! 2. count maximal vowel groups (`aeiouy`);
//! 3. subtract one for a terminal silent `e`, unless that would reach zero;
//! 4. add one back for a terminal consonant + `le` ("simple", "little");
//! 5. floor at one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts underpinning FKGL for one text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub sentence_count: usize,
    pub word_count: usize,
    pub syllable_count: usize,
}

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'y'];

fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

/// Count syllables in a single word.
///
/// The word must contain at least one alphabetic character; punctuation and
/// digits inside it are ignored. Always returns >= 1.
pub fn count_syllables(word: &str) -> Result<usize> {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    if letters.is_empty() {
        return Err(Error::Invalid(format!(
            "word {word:?} has no alphabetic characters"
        )));
    }

    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &letters {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }

    let mut count = groups;
    if letters.last() == Some(&'e') && count > 1 {
        count -= 1;
    }
    if letters.len() >= 3 {
        let tail = &letters[letters.len() - 3..];
        if tail[1] == 'l' && tail[2] == 'e' && !is_vowel(tail[0]) {
            count += 1;
        }
    }
    Ok(count.max(1))
}

/// Split `text` into word tokens: maximal alphanumeric runs, with internal
/// apostrophes and hyphens kept inside one token ("don't", "well-known").
pub fn word_tokens(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut end = i;
        while end + 1 < chars.len() {
            let next = chars[end + 1].1;
            if next.is_alphanumeric() {
                end += 1;
            } else if (next == '\'' || next == '-')
                && end + 2 < chars.len()
                && chars[end + 2].1.is_alphanumeric()
            {
                end += 2;
            } else {
                break;
            }
        }
        let stop = if end + 1 < chars.len() {
            chars[end + 1].0
        } else {
            text.len()
        };
        tokens.push(&text[start..stop]);
        i = end + 1;
    }
    tokens
}

/// Number of syllables for a word token produced by [`word_tokens`].
///
/// Digit-only tokens count as one syllable so numbers never break FKGL.
fn token_syllables(token: &str) -> Result<usize> {
    if token.chars().any(|c| c.is_alphabetic()) {
        count_syllables(token)
    } else {
        Ok(1)
    }
}

/// Count sentence segments: splits after `.`, `!` or `?` followed by
/// whitespace or end of text. Only segments containing a word count; the
/// result is floored at one.
fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut segments = 0usize;
    let mut has_word = false;
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            has_word = true;
        }
        let terminator = matches!(c, '.' | '!' | '?');
        let at_boundary =
            terminator && chars.get(i + 1).is_none_or(|next| next.is_whitespace());
        if at_boundary && has_word {
            segments += 1;
            has_word = false;
        }
    }
    if has_word {
        segments += 1;
    }
    segments.max(1)
}

/// Tokenize and count sentences, words, and syllables.
///
/// Errors if the text contains no word tokens.
pub fn analyze(text: &str) -> Result<TextStats> {
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return Err(Error::Invalid(format!("text {text:?} contains no words")));
    }
    let mut syllables = 0usize;
    for token in &tokens {
        syllables += token_syllables(token)?;
    }
    Ok(TextStats {
        sentence_count: sentence_count(text),
        word_count: tokens.len(),
        syllable_count: syllables,
    })
}

/// Flesch-Kincaid grade level of pre-computed stats. Pure arithmetic, no
/// clamping.
pub fn fkgl(stats: &TextStats) -> f64 {
    let words_per_sentence = stats.word_count as f64 / stats.sentence_count as f64;
    let syllables_per_word = stats.syllable_count as f64 / stats.word_count as f64;
    0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59
}

/// Analyze `text` and return its FKGL in one step.
pub fn fkgl_of(text: &str) -> Result<f64> {
    Ok(fkgl(&analyze(text)?))
}
