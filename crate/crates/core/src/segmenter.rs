//! Chinese word segmentation: a dictionary forward-maximum-matching
//! segmenter, a parser for externally segmented (space-separated) lines and
//! a per-character control mode.
//!
//! Word spans are codepoint offsets into the sentence with all separator
//! characters removed, so segmentations from every mode live in the same
//! coordinate system regardless of spacing in the input.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{is_blank, is_isolated};

#[derive(Debug, Clone)]
pub struct Lexicon {
    words: HashSet<String>,
    max_word_len: usize,
}

impl Lexicon {
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: HashSet<String> = words.into_iter().map(Into::into).filter(|w| !w.is_empty()).collect();
        let max_word_len = words.iter().map(|w| w.chars().count()).max().ok_or(Error::EmptyLexicon)?;
        Ok(Lexicon { words, max_word_len })
    }

    /// One word per line; `#` lines are comments. Only the first
    /// whitespace-separated field is used, so jieba-style `word freq tag`
    /// dictionaries load directly.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .filter_map(|l| l.split_whitespace().next()),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::InvalidUtf8 {
            offset: e.valid_up_to(),
        })?;
        Self::from_text(text)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    /// Span in the separator-free sentence, in characters.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub words: Vec<Word>,
}

impl Segmentation {
    fn push(&mut self, text: &str) {
        let start = self.words.last().map_or(0, |w| w.end);
        let end = start + text.chars().count();
        self.words.push(Word {
            text: text.to_owned(),
            start,
            end,
        });
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }
}

/// Characters the basic tokenizer groups into multi-character runs.
fn is_run_char(c: char) -> bool {
    !is_blank(c) && !is_isolated(c)
}

/// Forward maximum matching. Runs of non-CJK letters and digits are always
/// one word; elsewhere the longest lexicon word starting at the current
/// position wins, falling back to a single character. Matches never cross
/// separators and never end inside a letter/digit run.
pub fn fmm_segment(sentence: &str, lex: &Lexicon) -> Segmentation {
    let chars: Vec<(usize, char)> = sentence.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { sentence.len() };
    let mut seg = Segmentation::default();

    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        if is_blank(c) {
            i += 1;
            continue;
        }
        let end = if is_run_char(c) {
            let mut j = i + 1;
            while j < n && is_run_char(chars[j].1) {
                j += 1;
            }
            j
        } else {
            let mut limit = i;
            while limit < n && limit - i < lex.max_word_len() && !is_blank(chars[limit].1) {
                limit += 1;
            }
            (i + 2..=limit)
                .rev()
                .find(|&e| {
                    let splits_run = e < n && is_run_char(chars[e - 1].1) && is_run_char(chars[e].1);
                    !splits_run && lex.contains(&sentence[byte_at(i)..byte_at(e)])
                })
                .unwrap_or(i + 1)
        };
        seg.push(&sentence[byte_at(i)..byte_at(end)]);
        i = end;
    }
    seg
}

/// Parses a line whose words are separated by spaces, as produced by an
/// external segmenter.
pub fn parse_presegmented(line: &str) -> Segmentation {
    let mut seg = Segmentation::default();
    for word in line.split(is_blank).filter(|w| !w.is_empty()) {
        seg.push(word);
    }
    seg
}

/// Every non-separator character is its own word.
pub fn char_segment(sentence: &str) -> Segmentation {
    let mut seg = Segmentation::default();
    let mut buf = [0u8; 4];
    for c in sentence.chars().filter(|&c| !is_blank(c)) {
        seg.push(c.encode_utf8(&mut buf));
    }
    seg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegMode {
    Fmm,
    Presegmented,
    Char,
}

impl FromStr for SegMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fmm" => Ok(SegMode::Fmm),
            "presegmented" => Ok(SegMode::Presegmented),
            "char" => Ok(SegMode::Char),
            other => Err(Error::Config(format!("unknown segmentation mode {other:?}"))),
        }
    }
}

impl fmt::Display for SegMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegMode::Fmm => "fmm",
            SegMode::Presegmented => "presegmented",
            SegMode::Char => "char",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Segmenter {
    Fmm(Lexicon),
    Presegmented,
    Char,
}

impl Segmenter {
    pub fn mode(&self) -> SegMode {
        match self {
            Segmenter::Fmm(_) => SegMode::Fmm,
            Segmenter::Presegmented => SegMode::Presegmented,
            Segmenter::Char => SegMode::Char,
        }
    }

    pub fn segment(&self, sentence: &str) -> Segmentation {
        match self {
            Segmenter::Fmm(lex) => fmm_segment(sentence, lex),
            Segmenter::Presegmented => parse_presegmented(sentence),
            Segmenter::Char => char_segment(sentence),
        }
    }
}
