//! Character vocabulary and label encoding.
//!
//! 37 classes: a-z (0..25), 0-9 (26..35) and an end-of-sequence symbol (36).

use crate::error::{Result, VlanError};
use crate::rng::{mix, Rng};

pub const VOCAB_SIZE: usize = 37;
pub const EOS: usize = 36;

/// Ordered charset a-z then 0-9, plus EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    charset: Vec<char>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let charset = ('a'..='z').chain('0'..='9').collect();
        Vocabulary { charset }
    }

    pub fn size(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn eos_index(&self) -> usize {
        EOS
    }

    pub fn index_of(&self, ch: char) -> Result<usize> {
        match ch {
            'a'..='z' => Ok(ch as usize - 'a' as usize),
            '0'..='9' => Ok(26 + ch as usize - '0' as usize),
            other => Err(VlanError::Vocab(format!("character '{other}' outside charset"))),
        }
    }

    pub fn char_at(&self, index: usize) -> Result<char> {
        self.charset
            .get(index)
            .copied()
            .ok_or_else(|| VlanError::Vocab(format!("index {index} outside charset (EOS is not a character)")))
    }
}

/// Per-step labels for one word, padded with EOS up to `n` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedText {
    pub labels: Vec<usize>,
    /// Steps carrying supervision: the word itself plus one EOS.
    pub supervised_len: usize,
}

/// Encodes `word` into `n` class labels: characters, one EOS, then EOS
/// padding that carries no supervision.
pub fn encode_text(word: &str, vocab: &Vocabulary, n: usize) -> Result<EncodedText> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() >= n {
        return Err(VlanError::Length(format!(
            "word '{word}' has {} characters, needs at most {} for {} steps",
            chars.len(),
            n - 1,
            n
        )));
    }
    let mut labels = Vec::with_capacity(n);
    for ch in &chars {
        labels.push(vocab.index_of(*ch)?);
    }
    labels.resize(n, EOS);
    Ok(EncodedText { labels, supervised_len: chars.len() + 1 })
}

/// Inverse of [`encode_text`]: reads classes until the first EOS.
pub fn decode_labels(labels: &[usize], vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    for &l in labels {
        if l == EOS {
            break;
        }
        out.push(vocab.char_at(l)?);
    }
    Ok(out)
}

/// Supervision targets for the two complementary branches: the single
/// occluded character at 1-based position `p`, and the word with that
/// position removed.
pub fn make_mlm_labels(
    word: &str,
    p: usize,
    vocab: &Vocabulary,
    n: usize,
) -> Result<(EncodedText, EncodedText)> {
    let chars: Vec<char> = word.chars().collect();
    if p < 1 || p > chars.len() {
        return Err(VlanError::Index(format!(
            "character index {p} out of [1, {}] for word '{word}'",
            chars.len()
        )));
    }
    let mas: String = chars[p - 1].to_string();
    let rem: String = chars
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != p - 1)
        .map(|(_, c)| c)
        .collect();
    Ok((encode_text(&mas, vocab, n)?, encode_text(&rem, vocab, n)?))
}

/// Uniform 1-based character index in [1, word_len], deterministic per seed.
pub fn sample_char_index(word_len: usize, seed: u64) -> Result<usize> {
    if word_len < 1 {
        return Err(VlanError::Index("cannot sample a character index from an empty word".into()));
    }
    let mut rng = Rng::new(mix(&[seed, 0x6368_6172]));
    Ok(rng.below(word_len) + 1)
}
