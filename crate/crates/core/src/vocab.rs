//! BERT `vocab.txt` handling: one token per line, id = zero-based line index.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::text::fnv1a64;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// Ids of the five special tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    specials: SpecialIds,
    /// Special ids in ascending order, for uniform sampling of the rest.
    specials_sorted: [u32; 5],
    fingerprint: u64,
}

impl Vocab {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
            offset: e.valid_up_to(),
        })?;
        Self::from_text(text)
    }

    /// Parses vocabulary text. Line numbers in errors are zero-based, i.e.
    /// they equal the id the offending token would have received.
    pub fn from_text(text: &str) -> Result<Self> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(Error::EmptyVocab);
        }
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        for (line, raw) in body.split('\n').enumerate() {
            let token = raw.strip_suffix('\r').unwrap_or(raw);
            if token.is_empty() {
                return Err(Error::EmptyToken { line });
            }
            if index.insert(token.to_owned(), line as u32).is_some() {
                return Err(Error::DuplicateToken {
                    token: token.to_owned(),
                    line,
                });
            }
            tokens.push(token.to_owned());
        }

        let find = |name: &'static str| index.get(name).copied().ok_or(Error::MissingSpecialToken(name));
        let specials = SpecialIds {
            pad: find(PAD)?,
            unk: find(UNK)?,
            cls: find(CLS)?,
            sep: find(SEP)?,
            mask: find(MASK)?,
        };
        let mut specials_sorted = [specials.pad, specials.unk, specials.cls, specials.sep, specials.mask];
        specials_sorted.sort_unstable();

        Ok(Vocab {
            tokens,
            index,
            specials,
            specials_sorted,
            fingerprint: fnv1a64(text.as_bytes()),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.specials_sorted.contains(&id)
    }

    /// FNV-1a over the vocabulary file bytes.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Uniformly samples an id that is not one of the five special tokens.
    /// Returns `None` when the vocabulary holds nothing else.
    pub fn random_non_special<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u32> {
        let available = self.tokens.len() - self.specials_sorted.len();
        if available == 0 {
            return None;
        }
        let mut id = rng.random_range(0..available as u32);
        for &special in &self.specials_sorted {
            if id >= special {
                id += 1;
            }
        }
        Some(id)
    }
}
