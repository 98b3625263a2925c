//! Conversion of tokenized documents into pre-training instances.
//!
//! Packing follows the usual BERT recipe: sentences of a document are
//! accumulated into a chunk until a target length is reached, the chunk is
//! split into segments A and B (B is swapped for text from another document
//! for the random-next case), the pair is truncated and finally masked with
//! whole word masking.
//!
//! Randomness comes from streams keyed by `(seed, document, duplicate)` for
//! packing and `(seed, document, duplicate, sequence)` for masking, so the
//! output is identical for any number of worker threads.

use std::ops::AddAssign;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TrainingInstance;
use crate::record::SidecarEntry;
use crate::rng::{stream, StreamRng};
use crate::segmenter::{SegMode, Segmenter};
use crate::tokenizer::Tokenizer;
use crate::vocab::Vocab;
use crate::wwm::{align, apply_mask, per_token_units, select_units, MaskSelection, MaskingConfig, WordUnit};

const PACK_STREAM: u64 = 0;
const MASK_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub max_seq_len: usize,
    pub short_seq_prob: f64,
    pub dupe_factor: usize,
    pub nsp_random_prob: f64,
    pub masking: MaskingConfig,
}

impl BuildConfig {
    /// Configuration for `max_seq_len` with every other value at its default.
    pub fn for_length(max_seq_len: usize) -> Self {
        let masking = MaskingConfig {
            max_predictions_per_seq: default_max_predictions(max_seq_len, 0.15),
            ..MaskingConfig::default()
        };
        BuildConfig {
            max_seq_len,
            short_seq_prob: 0.1,
            dupe_factor: 2,
            nsp_random_prob: 0.5,
            masking,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_seq_len < 8 {
            return Err(Error::Config(format!("max_seq_len must be at least 8, got {}", self.max_seq_len)));
        }
        if self.dupe_factor == 0 {
            return Err(Error::Config("dupe_factor must be at least 1".into()));
        }
        for (name, p) in [("short_seq_prob", self.short_seq_prob), ("nsp_random_prob", self.nsp_random_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        self.masking.validate()
    }

    fn max_num_tokens(&self) -> usize {
        self.max_seq_len - 3
    }
}

/// Default prediction cap: `round(max_seq_len * masked_lm_prob)`, raised to
/// 20 (the customary value at length 128) and limited to the number of
/// maskable positions.
pub fn default_max_predictions(max_seq_len: usize, masked_lm_prob: f64) -> usize {
    let raw = (max_seq_len as f64 * masked_lm_prob).round() as usize;
    raw.max(20).min(max_seq_len.saturating_sub(3)).max(1)
}

/// A tokenized sentence and its word units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sentence {
    pub ids: Vec<u32>,
    pub units: Vec<WordUnit>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounters {
    pub documents: usize,
    pub sentences: usize,
    pub instances: usize,
    pub alignment_mismatches: usize,
    pub nsp_fallbacks: usize,
}

impl AddAssign for BuildCounters {
    fn add_assign(&mut self, o: Self) {
        self.documents += o.documents;
        self.sentences += o.sentences;
        self.instances += o.instances;
        self.alignment_mismatches += o.alignment_mismatches;
        self.nsp_fallbacks += o.nsp_fallbacks;
    }
}

/// Tokenizes and aligns every line of a document. Lines with no tokens are
/// dropped.
pub fn build_document<S: AsRef<str>>(lines: &[S], tokenizer: &Tokenizer<'_>, segmenter: &Segmenter) -> (Document, BuildCounters) {
    let mut counters = BuildCounters::default();
    let mut doc = Document::default();
    for line in lines {
        let line = line.as_ref();
        let tokens = tokenizer.tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let units = if segmenter.mode() == SegMode::Char {
            per_token_units(tokens.len())
        } else {
            let al = align(&segmenter.segment(line), &tokens, line);
            counters.alignment_mismatches += al.mismatches;
            al.units
        };
        doc.sentences.push(Sentence { ids: tokens.ids(), units });
    }
    counters.sentences = doc.sentences.len();
    counters.documents = usize::from(!doc.sentences.is_empty());
    (doc, counters)
}

/// Tokenizes a whole corpus on the current rayon pool. Documents left
/// without sentences are dropped; order is preserved.
pub fn prepare_corpus<S: AsRef<str> + Sync>(
    docs: &[Vec<S>],
    tokenizer: &Tokenizer<'_>,
    segmenter: &Segmenter,
) -> (Vec<Document>, BuildCounters) {
    let built: Vec<(Document, BuildCounters)> = docs
        .par_iter()
        .map(|lines| build_document(lines, tokenizer, segmenter))
        .collect();
    let mut counters = BuildCounters::default();
    let mut out = Vec::with_capacity(built.len());
    for (doc, c) in built {
        counters += c;
        if !doc.sentences.is_empty() {
            out.push(doc);
        }
    }
    (out, counters)
}

/// One side of a sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segment {
    pub ids: Vec<u32>,
    pub units: Vec<WordUnit>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn extend(&mut self, s: &Sentence) {
        let offset = self.ids.len();
        self.ids.extend_from_slice(&s.ids);
        self.units.extend(s.units.iter().map(|u| u.shifted(offset)));
    }

    fn from_sentences<'a, I: IntoIterator<Item = &'a Sentence>>(sentences: I) -> Self {
        let mut seg = Segment::default();
        for s in sentences {
            seg.extend(s);
        }
        seg
    }

    /// Drops `front` tokens from the start and `back` from the end. Units cut
    /// by the trim are dissolved into single-token units.
    fn trim(&mut self, front: usize, back: usize) {
        if front == 0 && back == 0 {
            return;
        }
        let end = self.ids.len() - back;
        let mut units = Vec::with_capacity(self.units.len());
        for u in &self.units {
            if u.start >= front && u.end <= end {
                units.push(WordUnit::new(u.start - front, u.end - front));
            } else {
                for p in u.start.max(front)..u.end.min(end) {
                    units.push(WordUnit::new(p - front, p - front + 1));
                }
            }
        }
        self.ids.truncate(end);
        self.ids.drain(..front);
        self.units = units;
    }

    /// Splits at a unit boundary: `self` keeps units `..k`, the rest is returned.
    fn split_at_unit(&mut self, k: usize) -> Segment {
        let at = self.units[k].start;
        let tail_units = self.units.split_off(k).into_iter().map(|u| WordUnit::new(u.start - at, u.end - at)).collect();
        let tail_ids = self.ids.split_off(at);
        Segment {
            ids: tail_ids,
            units: tail_units,
        }
    }
}

/// Trims the longer side one token at a time, from the front or the back at
/// random, until the pair fits in `target` tokens.
pub fn truncate_pair<R: Rng + ?Sized>(a: &mut Segment, b: &mut Segment, target: usize, rng: &mut R) {
    let (mut a_front, mut a_back, mut b_front, mut b_back) = (0, 0, 0, 0);
    loop {
        let la = a.len() - a_front - a_back;
        let lb = b.len() - b_front - b_back;
        if la + lb <= target {
            break;
        }
        let front = rng.random::<f64>() < 0.5;
        match (la > lb, front) {
            (true, true) => a_front += 1,
            (true, false) => a_back += 1,
            (false, true) => b_front += 1,
            (false, false) => b_back += 1,
        }
    }
    a.trim(a_front, a_back);
    b.trim(b_front, b_back);
}

/// `[CLS] A [SEP] B [SEP]` with units shifted into packed coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedPair {
    pub ids: Vec<u32>,
    pub units: Vec<WordUnit>,
    pub len_a: usize,
    pub len_b: usize,
}

impl PackedPair {
    pub fn new(a: &Segment, b: &Segment, vocab: &Vocab) -> Self {
        let sp = vocab.specials();
        let mut ids = Vec::with_capacity(a.len() + b.len() + 3);
        ids.push(sp.cls);
        ids.extend_from_slice(&a.ids);
        ids.push(sp.sep);
        ids.extend_from_slice(&b.ids);
        ids.push(sp.sep);
        let b_offset = a.len() + 2;
        let units = a
            .units
            .iter()
            .map(|u| u.shifted(1))
            .chain(b.units.iter().map(|u| u.shifted(b_offset)))
            .collect();
        PackedPair {
            ids,
            units,
            len_a: a.len(),
            len_b: b.len(),
        }
    }

    /// Whole word masking over the packed pair. The budget is computed from
    /// the maskable (non-special) token count.
    pub fn mask<R: Rng + ?Sized>(&mut self, cfg: &MaskingConfig, vocab: &Vocab, rng: &mut R) -> MaskSelection {
        let chosen = select_units(&self.units, self.len_a + self.len_b, cfg, rng);
        apply_mask(&mut self.ids, &self.units, &chosen, cfg, vocab, rng)
    }
}

/// Assembles the padded instance. Fails if the pair does not fit.
pub fn finalize(
    packed: &PackedPair,
    selection: &MaskSelection,
    is_random_next: bool,
    cfg: &BuildConfig,
    vocab: &Vocab,
) -> Result<TrainingInstance> {
    let n = packed.ids.len();
    let max_pred = cfg.masking.max_predictions_per_seq;
    if n > cfg.max_seq_len {
        return Err(Error::Internal(format!("packed pair of {n} tokens exceeds max_seq_len {}", cfg.max_seq_len)));
    }
    if selection.len() > max_pred {
        return Err(Error::Internal(format!("{} predictions exceed the cap of {max_pred}", selection.len())));
    }
    let pad = vocab.specials().pad as i32;
    let mut input_ids: Vec<i32> = packed.ids.iter().map(|&id| id as i32).collect();
    input_ids.resize(cfg.max_seq_len, pad);
    let mut input_mask = vec![1; n];
    input_mask.resize(cfg.max_seq_len, 0);
    let first_sep = packed.len_a + 1;
    let mut segment_ids: Vec<i32> = (0..n).map(|i| i32::from(i > first_sep)).collect();
    segment_ids.resize(cfg.max_seq_len, 0);

    let mut masked_lm_positions: Vec<i32> = selection.positions.iter().map(|&p| p as i32).collect();
    let mut masked_lm_ids: Vec<i32> = selection.labels.iter().map(|&l| l as i32).collect();
    let mut masked_lm_weights = vec![1.0f32; selection.len()];
    masked_lm_positions.resize(max_pred, 0);
    masked_lm_ids.resize(max_pred, 0);
    masked_lm_weights.resize(max_pred, 0.0);

    Ok(TrainingInstance {
        input_ids,
        input_mask,
        segment_ids,
        masked_lm_positions,
        masked_lm_ids,
        masked_lm_weights,
        next_sentence_label: i32::from(is_random_next),
    })
}

/// An instance together with its audit record.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltInstance {
    pub instance: TrainingInstance,
    pub sidecar: SidecarEntry,
}

fn concat(doc: &Document, range: std::ops::Range<usize>) -> Segment {
    Segment::from_sentences(&doc.sentences[range])
}

/// Pulls sentences from a random other document until `target_b` tokens.
fn random_next(docs: &[Document], doc_index: usize, target_b: usize, rng: &mut StreamRng) -> Segment {
    let mut other = rng.random_range(0..docs.len() - 1);
    if other >= doc_index {
        other += 1;
    }
    let rd = &docs[other];
    let start = rng.random_range(0..rd.sentences.len());
    let mut b = Segment::default();
    for s in &rd.sentences[start..] {
        b.extend(s);
        if b.len() >= target_b {
            break;
        }
    }
    b
}

/// All instances for one pass (`dupe_index`) over document `doc_index`.
pub fn create_instances(
    docs: &[Document],
    doc_index: usize,
    dupe_index: usize,
    cfg: &BuildConfig,
    vocab: &Vocab,
    counters: &mut BuildCounters,
) -> Result<Vec<BuiltInstance>> {
    let seed = cfg.masking.seed;
    let mut rng = stream(seed, &[PACK_STREAM, doc_index as u64, dupe_index as u64]);
    let doc = &docs[doc_index];
    let n = doc.sentences.len();
    let has_other = docs.len() > 1;

    let max_num_tokens = cfg.max_num_tokens();
    let target = if rng.random::<f64>() < cfg.short_seq_prob {
        rng.random_range(2..=max_num_tokens)
    } else {
        max_num_tokens
    };

    let mut out = Vec::new();
    let mut chunk_start = 0;
    let mut chunk_len = 0;
    let mut i = 0;
    while i < n {
        chunk_len += doc.sentences[i].len();
        if i == n - 1 || chunk_len >= target {
            let chunk_end = i + 1;
            let chunk_size = chunk_end - chunk_start;
            let a_end = if chunk_size >= 2 {
                chunk_start + rng.random_range(1..chunk_size)
            } else {
                chunk_start + 1
            };
            let mut a = concat(doc, chunk_start..a_end);
            let wants_random = rng.random::<f64>() < cfg.nsp_random_prob;
            if wants_random && !has_other {
                counters.nsp_fallbacks += 1;
            }

            let (mut b, is_random_next) = if wants_random && has_other {
                let target_b = target.saturating_sub(a.len()).max(1);
                let b = random_next(docs, doc_index, target_b, &mut rng);
                // Sentences after segment A go back to the pool.
                i = a_end - 1;
                (b, true)
            } else if a_end < chunk_end {
                (concat(doc, a_end..chunk_end), false)
            } else if a.units.len() >= 2 {
                // A single-sentence chunk: the true continuation is the rest
                // of the sentence, split on a word boundary.
                let k = rng.random_range(1..a.units.len());
                (a.split_at_unit(k), false)
            } else if has_other {
                let target_b = target.saturating_sub(a.len()).max(1);
                (random_next(docs, doc_index, target_b, &mut rng), true)
            } else {
                if !wants_random {
                    counters.nsp_fallbacks += 1;
                }
                (Segment::default(), false)
            };

            truncate_pair(&mut a, &mut b, target, &mut rng);
            let seq_index = out.len() as u64;
            let mut mask_rng = stream(seed, &[MASK_STREAM, doc_index as u64, dupe_index as u64, seq_index]);
            let mut packed = PackedPair::new(&a, &b, vocab);
            let selection = packed.mask(&cfg.masking, vocab, &mut mask_rng);
            let instance = finalize(&packed, &selection, is_random_next, cfg, vocab)?;
            out.push(BuiltInstance {
                instance,
                sidecar: SidecarEntry::new(&packed.units, &selection.actions),
            });

            chunk_start = i + 1;
            chunk_len = 0;
        }
        i += 1;
    }
    counters.instances += out.len();
    Ok(out)
}

/// Builds all passes for every document in `range`, in parallel, returning
/// them in `(document, duplicate, sequence)` order.
pub fn build_range(
    docs: &[Document],
    range: std::ops::Range<usize>,
    cfg: &BuildConfig,
    vocab: &Vocab,
) -> Result<(Vec<BuiltInstance>, BuildCounters)> {
    let per_doc: Vec<Result<(Vec<BuiltInstance>, BuildCounters)>> = range
        .into_par_iter()
        .map(|d| {
            let mut counters = BuildCounters::default();
            let mut all = Vec::new();
            for dupe in 0..cfg.dupe_factor {
                all.extend(create_instances(docs, d, dupe, cfg, vocab, &mut counters)?);
            }
            Ok((all, counters))
        })
        .collect();
    let mut out = Vec::new();
    let mut counters = BuildCounters::default();
    for r in per_doc {
        let (instances, c) = r?;
        out.extend(instances);
        counters += c;
    }
    Ok((out, counters))
}

/// Streams every instance of the corpus to `sink` in emission order,
/// building `batch` documents at a time in parallel.
pub fn build_all<F>(docs: &[Document], cfg: &BuildConfig, vocab: &Vocab, batch: usize, mut sink: F) -> Result<BuildCounters>
where
    F: FnMut(Vec<BuiltInstance>) -> Result<()>,
{
    cfg.validate()?;
    let mut counters = BuildCounters::default();
    let batch = batch.max(1);
    let mut start = 0;
    while start < docs.len() {
        let end = (start + batch).min(docs.len());
        let (instances, c) = build_range(docs, start..end, cfg, vocab)?;
        counters += c;
        sink(instances)?;
        start = end;
    }
    Ok(counters)
}
