//! Basic tokenization (CJK isolation, punctuation and whitespace splitting)
//! followed by greedy longest-match-first WordPiece.
//!
//! Spans are codepoint offsets into the text handed to [`Tokenizer::tokenize`],
//! which lets the aligner compare them against segmenter word spans.

use unicode_normalization::UnicodeNormalization;

use crate::text::{is_blank, is_combining_mark, is_isolated};
use crate::vocab::Vocab;

pub const CONTINUATION_PREFIX: &str = "##";

/// Longest basic token (in characters) that WordPiece will try to split.
pub const DEFAULT_MAX_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicToken {
    pub text: String,
    /// Source span `[start, end)` in characters.
    pub start: usize,
    pub end: usize,
    /// Source character offset of each character in `text`. Empty when the
    /// mapping is the identity (no lowercasing took place).
    char_map: Vec<usize>,
}

impl BasicToken {
    /// Source offset of the boundary before text character `i`.
    fn source_offset(&self, i: usize) -> usize {
        if self.char_map.is_empty() {
            self.start + i
        } else {
            self.char_map.get(i).copied().unwrap_or(self.end)
        }
    }
}

/// Splits text into basic tokens. CJK characters and punctuation become
/// single-character tokens; other runs are split on whitespace. With
/// `lowercase`, Latin letters are lowered and accents stripped.
pub fn basic_tokenize(text: &str, lowercase: bool) -> Vec<BasicToken> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, usize)> = None; // (char start, byte start)

    let flush = |run: &mut Option<(usize, usize)>, end_char: usize, end_byte: usize, tokens: &mut Vec<BasicToken>| {
        if let Some((start_char, start_byte)) = run.take() {
            if let Some(tok) = make_token(&text[start_byte..end_byte], start_char, end_char, lowercase) {
                tokens.push(tok);
            }
        }
    };

    let mut char_idx = 0;
    for (byte_idx, c) in text.char_indices() {
        if is_blank(c) {
            flush(&mut run, char_idx, byte_idx, &mut tokens);
        } else if is_isolated(c) {
            flush(&mut run, char_idx, byte_idx, &mut tokens);
            let end = byte_idx + c.len_utf8();
            if let Some(tok) = make_token(&text[byte_idx..end], char_idx, char_idx + 1, lowercase) {
                tokens.push(tok);
            }
        } else if run.is_none() {
            run = Some((char_idx, byte_idx));
        }
        char_idx += 1;
    }
    flush(&mut run, char_idx, text.len(), &mut tokens);
    tokens
}

fn make_token(raw: &str, start: usize, end: usize, lowercase: bool) -> Option<BasicToken> {
    if !lowercase {
        return Some(BasicToken {
            text: raw.to_owned(),
            start,
            end,
            char_map: Vec::new(),
        });
    }
    let mut text = String::with_capacity(raw.len());
    let mut char_map = Vec::with_capacity(end - start);
    for (i, c) in raw.chars().enumerate() {
        for n in c.to_lowercase().nfd().filter(|&n| !is_combining_mark(n)) {
            text.push(n);
            char_map.push(start + i);
        }
    }
    if text.is_empty() {
        return None;
    }
    Some(BasicToken {
        text,
        start,
        end,
        char_map,
    })
}

/// One WordPiece of a basic token, in token-relative character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordPiece {
    pub id: u32,
    pub is_continuation: bool,
    pub start: usize,
    pub end: usize,
}

/// Greedy longest-match-first WordPiece. Non-initial pieces are looked up
/// with the `##` prefix. If any position has no match, or the token is longer
/// than `max_chars`, the whole token becomes a single `[UNK]`.
pub fn wordpiece(token: &str, vocab: &Vocab, max_chars: usize) -> Vec<WordPiece> {
    let bounds: Vec<usize> = token
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(token.len()))
        .collect();
    let n = bounds.len() - 1;
    let unk = || {
        vec![WordPiece {
            id: vocab.specials().unk,
            is_continuation: false,
            start: 0,
            end: n,
        }]
    };
    if n == 0 {
        return Vec::new();
    }
    if n > max_chars {
        return unk();
    }

    let mut pieces = Vec::new();
    let mut buf = String::new();
    let mut start = 0;
    while start < n {
        let mut end = n;
        let mut found = None;
        while end > start {
            let sub = &token[bounds[start]..bounds[end]];
            let id = if start == 0 {
                vocab.id(sub)
            } else {
                buf.clear();
                buf.push_str(CONTINUATION_PREFIX);
                buf.push_str(sub);
                vocab.id(&buf)
            };
            if let Some(id) = id {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => {
                pieces.push(WordPiece {
                    id,
                    is_continuation: start > 0,
                    start,
                    end,
                });
                start = end;
            }
            None => return unk(),
        }
    }
    pieces
}

/// A token with its source span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece {
    pub id: u32,
    pub is_continuation: bool,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSeq {
    pub pieces: Vec<Piece>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.pieces.iter().map(|p| p.id).collect()
    }

    pub fn texts<'v>(&self, vocab: &'v Vocab) -> Vec<&'v str> {
        self.pieces.iter().map(|p| vocab.token(p.id).unwrap_or("[UNK]")).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tokenizer<'v> {
    vocab: &'v Vocab,
    lowercase: bool,
    max_chars: usize,
}

impl<'v> Tokenizer<'v> {
    pub fn new(vocab: &'v Vocab) -> Self {
        Tokenizer {
            vocab,
            lowercase: false,
            max_chars: DEFAULT_MAX_CHARS,
        }
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn with_max_chars(mut self, max_chars: usize) -> Self {
        self.max_chars = max_chars;
        self
    }

    pub fn vocab(&self) -> &'v Vocab {
        self.vocab
    }

    pub fn tokenize(&self, text: &str) -> TokenSeq {
        let mut pieces = Vec::new();
        let mut prev_end = 0;
        for token in basic_tokenize(text, self.lowercase) {
            for wp in wordpiece(&token.text, self.vocab, self.max_chars) {
                // Lowercasing may expand one source character into several;
                // clamp so spans stay ordered and disjoint.
                let start = token.source_offset(wp.start).max(prev_end);
                let end = token.source_offset(wp.end).max(start);
                pieces.push(Piece {
                    id: wp.id,
                    is_continuation: wp.is_continuation,
                    start,
                    end,
                });
                prev_end = end;
            }
        }
        TokenSeq { pieces }
    }
}
