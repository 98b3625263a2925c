//! Seeded mixed-script corpus generator for tests and benchmarks.
//!
//! Sentences are drawn from a word list plus Latin words, digit runs and
//! punctuation. Each generated sentence keeps its word boundaries, so callers
//! get a gold segmentation alongside the plain text.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::ingest::SENTENCE_TERMINATORS;
use crate::rng::stream;

const LATIN: &[&str] = &[
    "probability", "model", "BERT", "data", "token", "GPU", "python", "learning", "Transformer", "vector",
    "network", "API", "search", "cloud", "version", "the", "open", "Linux", "test", "graph",
];

const INNER_PUNCT: &[&str] = &["，", "、", "：", "（", "）", "“", "”"];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub documents: usize,
    /// Inclusive range of sentences per document.
    pub sentences: (usize, usize),
    /// Inclusive range of words per sentence, terminator excluded.
    pub words: (usize, usize),
    pub latin_prob: f64,
    pub digit_prob: f64,
    pub punct_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 100,
            sentences: (2, 20),
            words: (4, 24),
            latin_prob: 0.05,
            digit_prob: 0.03,
            punct_prob: 0.08,
            seed: 7,
        }
    }
}

/// A sentence as its word sequence; the last word is the terminator.
pub type WordSentence = Vec<String>;

/// Generates documents as lists of segmented sentences. Document `d` only
/// depends on `(cfg.seed, d)`.
pub fn generate<S: AsRef<str>>(vocab_words: &[S], cfg: &SyntheticConfig) -> Vec<Vec<WordSentence>> {
    assert!(!vocab_words.is_empty(), "word list must not be empty");
    (0..cfg.documents).map(|d| generate_document(vocab_words, cfg, d)).collect()
}

fn generate_document<S: AsRef<str>>(vocab_words: &[S], cfg: &SyntheticConfig, doc: usize) -> Vec<WordSentence> {
    let mut rng = stream(cfg.seed, &[doc as u64]);
    let n = rng.random_range(cfg.sentences.0..=cfg.sentences.1.max(cfg.sentences.0));
    (0..n)
        .map(|_| {
            let len = rng.random_range(cfg.words.0..=cfg.words.1.max(cfg.words.0));
            let mut words = Vec::with_capacity(len + 1);
            for _ in 0..len {
                let r: f64 = rng.random();
                let w = if r < cfg.latin_prob {
                    LATIN.choose(&mut rng).unwrap().to_string()
                } else if r < cfg.latin_prob + cfg.digit_prob {
                    rng.random_range(0..100_000u32).to_string()
                } else if r < cfg.latin_prob + cfg.digit_prob + cfg.punct_prob && !words.is_empty() {
                    INNER_PUNCT.choose(&mut rng).unwrap().to_string()
                } else {
                    vocab_words.choose(&mut rng).unwrap().as_ref().to_string()
                };
                words.push(w);
            }
            words.push(SENTENCE_TERMINATORS.choose(&mut rng).unwrap().to_string());
            words
        })
        .collect()
}

/// Joins words into running text, inserting a space only between two
/// adjacent Latin/digit words so they stay separate tokens.
pub fn join_plain(words: &[String]) -> String {
    let mut out = String::new();
    for w in words {
        let prev_alnum = out.chars().last().is_some_and(|c| c.is_ascii_alphanumeric());
        let next_alnum = w.chars().next().is_some_and(|c| c.is_ascii_alphanumeric());
        if prev_alnum && next_alnum {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// Joins words with single spaces, the pre-segmented input form.
pub fn join_segmented(words: &[String]) -> String {
    words.join(" ")
}

/// Renders documents in corpus format: one sentence per line, blank line
/// between documents.
pub fn to_corpus(docs: &[Vec<WordSentence>], segmented: bool) -> String {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for s in doc {
            out.push_str(&if segmented { join_segmented(s) } else { join_plain(s) });
            out.push('\n');
        }
    }
    out
}

/// Generates whole documents until the plain-text corpus reaches
/// `target_bytes`.
pub fn corpus_of_size<S: AsRef<str>>(vocab_words: &[S], target_bytes: usize, cfg: &SyntheticConfig) -> String {
    let mut out = String::new();
    let mut d = 0;
    while out.len() < target_bytes {
        if d > 0 {
            out.push('\n');
        }
        for s in generate_document(vocab_words, cfg, d) {
            out.push_str(&join_plain(&s));
            out.push('\n');
        }
        d += 1;
    }
    out
}
