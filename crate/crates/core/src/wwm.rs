//! Whole word masking: aligns segmenter words to WordPiece tokens and picks
//! whole words as masking units.
//!
//! A word unit is a contiguous run of tokens belonging to one segmenter
//! word. Selection accepts or rejects units whole, so a word is either fully
//! masked or untouched. The replacement action (`[MASK]`, random token,
//! keep) is then drawn independently for every selected position.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::Segmentation;
use crate::text::is_blank;
use crate::tokenizer::TokenSeq;
use crate::vocab::Vocab;

/// Token span `[start, end)` of one masking unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordUnit {
    pub start: usize,
    pub end: usize,
}

impl WordUnit {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(end > start);
        WordUnit { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn shifted(self, offset: usize) -> Self {
        WordUnit {
            start: self.start + offset,
            end: self.end + offset,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    pub units: Vec<WordUnit>,
    /// Tokens that straddled a word boundary or fell outside every word.
    pub mismatches: usize,
}

/// One unit per token: original character-level masking.
pub fn per_token_units(len: usize) -> Vec<WordUnit> {
    (0..len).map(|i| WordUnit::new(i, i + 1)).collect()
}

/// Maps every word to the maximal run of tokens whose spans fall inside it.
///
/// `text` is the string the tokens were produced from; token spans are
/// converted to the separator-free coordinates used by segmentations. Words
/// touched by a straddling token are dissolved into one unit per token.
pub fn align(words: &Segmentation, tokens: &TokenSeq, text: &str) -> Alignment {
    let mut dense = Vec::with_capacity(text.len() + 1);
    let mut count = 0usize;
    for c in text.chars() {
        dense.push(count);
        if !is_blank(c) {
            count += 1;
        }
    }
    dense.push(count);
    let to_dense = |i: usize| dense[i.min(dense.len() - 1)];

    let words = &words.words;
    let mut owner: Vec<Option<usize>> = Vec::with_capacity(tokens.len());
    let mut dirty = vec![false; words.len()];
    let mut mismatches = 0;
    let mut w = 0;
    for piece in &tokens.pieces {
        let (ts, te) = (to_dense(piece.start), to_dense(piece.end));
        while w < words.len() && words[w].end <= ts {
            w += 1;
        }
        if w < words.len() && words[w].start <= ts && te <= words[w].end {
            owner.push(Some(w));
        } else {
            owner.push(None);
            mismatches += 1;
            let mut x = w;
            while x < words.len() && words[x].start < te.max(ts + 1) {
                dirty[x] = true;
                x += 1;
            }
        }
    }

    let mut units: Vec<WordUnit> = Vec::with_capacity(tokens.len());
    let mut open: Option<usize> = None;
    for (k, own) in owner.iter().enumerate() {
        match own {
            Some(w) if !dirty[*w] => {
                if open == Some(*w) {
                    units.last_mut().expect("open unit").end = k + 1;
                } else {
                    units.push(WordUnit::new(k, k + 1));
                    open = Some(*w);
                }
            }
            _ => {
                units.push(WordUnit::new(k, k + 1));
                open = None;
            }
        }
    }
    Alignment { units, mismatches }
}

/// Source text covered by `unit`. Token spans are char offsets into `text`.
pub fn unit_text(unit: WordUnit, tokens: &TokenSeq, text: &str) -> String {
    let start = tokens.pieces[unit.start].start;
    let end = tokens.pieces[unit.end - 1].end;
    text.chars().skip(start).take(end - start).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub masked_lm_prob: f64,
    pub mask_ratio: f64,
    pub random_ratio: f64,
    pub keep_ratio: f64,
    pub max_predictions_per_seq: usize,
    pub seed: u64,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            masked_lm_prob: 0.15,
            mask_ratio: 0.8,
            random_ratio: 0.1,
            keep_ratio: 0.1,
            max_predictions_per_seq: 20,
            seed: 12345,
        }
    }
}

impl MaskingConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.masked_lm_prob;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("masked_lm_prob must be in (0, 1), got {p}")));
        }
        let ratios = [self.mask_ratio, self.random_ratio, self.keep_ratio];
        if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(format!("replacement ratios must be in [0, 1], got {ratios:?}")));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("replacement ratios must sum to 1, got {sum}")));
        }
        if self.max_predictions_per_seq == 0 {
            return Err(Error::Config("max_predictions_per_seq must be at least 1".into()));
        }
        Ok(())
    }

    /// Prediction budget for a sequence of `token_count` maskable tokens:
    /// `min(cap, max(1, round(token_count * masked_lm_prob)))`, rounding
    /// half away from zero.
    pub fn num_to_predict(&self, token_count: usize) -> usize {
        let raw = (token_count as f64 * self.masked_lm_prob).round() as usize;
        raw.max(1).min(self.max_predictions_per_seq)
    }
}

/// Greedy whole-unit selection over a given visiting order: a unit is taken
/// if it fits in the remaining budget and skipped otherwise. Returns unit
/// indices in ascending order.
pub fn select_in_order<I>(units: &[WordUnit], order: I, budget: usize) -> Vec<usize>
where
    I: IntoIterator<Item = usize>,
{
    let mut chosen = Vec::new();
    let mut taken = 0;
    for u in order {
        if taken == budget {
            break;
        }
        let len = units[u].len();
        if taken + len <= budget {
            chosen.push(u);
            taken += len;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Picks whole units in a random order until the budget for `token_count`
/// maskable tokens is filled or no remaining unit fits.
pub fn select_units<R: Rng + ?Sized>(
    units: &[WordUnit],
    token_count: usize,
    cfg: &MaskingConfig,
    rng: &mut R,
) -> Vec<usize> {
    if units.is_empty() {
        return Vec::new();
    }
    let budget = cfg.num_to_predict(token_count);
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.shuffle(rng);
    select_in_order(units, order, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

impl MaskAction {
    pub fn code(self) -> char {
        match self {
            MaskAction::Mask => 'M',
            MaskAction::Random => 'R',
            MaskAction::Keep => 'K',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'M' => Some(MaskAction::Mask),
            'R' => Some(MaskAction::Random),
            'K' => Some(MaskAction::Keep),
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(cfg: &MaskingConfig, rng: &mut R) -> Self {
        let r: f64 = rng.random();
        if r < cfg.mask_ratio {
            MaskAction::Mask
        } else if r < cfg.mask_ratio + cfg.random_ratio {
            MaskAction::Random
        } else {
            MaskAction::Keep
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskSelection {
    /// Sorted token positions.
    pub positions: Vec<usize>,
    /// Original ids at `positions`.
    pub labels: Vec<u32>,
    pub actions: Vec<MaskAction>,
}

impl MaskSelection {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Replaces the tokens of the chosen units in place. Each selected position
/// independently becomes `[MASK]`, a random non-special token, or stays.
pub fn apply_mask<R: Rng + ?Sized>(
    ids: &mut [u32],
    units: &[WordUnit],
    chosen: &[usize],
    cfg: &MaskingConfig,
    vocab: &Vocab,
    rng: &mut R,
) -> MaskSelection {
    let mut positions: Vec<usize> = chosen.iter().flat_map(|&u| units[u].start..units[u].end).collect();
    positions.sort_unstable();
    let mut sel = MaskSelection {
        labels: Vec::with_capacity(positions.len()),
        actions: Vec::with_capacity(positions.len()),
        positions: Vec::new(),
    };
    let mask_id = vocab.specials().mask;
    for &p in &positions {
        sel.labels.push(ids[p]);
        let action = MaskAction::draw(cfg, rng);
        match action {
            MaskAction::Mask => ids[p] = mask_id,
            MaskAction::Random => {
                if let Some(id) = vocab.random_non_special(rng) {
                    ids[p] = id;
                }
            }
            MaskAction::Keep => {}
        }
        sel.actions.push(action);
    }
    sel.positions = positions;
    sel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::segmenter::{parse_presegmented, Segmentation, Word};
    use crate::tokenizer::Piece;

    fn seq(spans: &[(usize, usize)]) -> TokenSeq {
        TokenSeq {
            pieces: spans
                .iter()
                .enumerate()
                .map(|(i, &(start, end))| Piece {
                    id: i as u32,
                    is_continuation: false,
                    start,
                    end,
                })
                .collect(),
        }
    }

    fn sizes(units: &[WordUnit]) -> Vec<usize> {
        units.iter().map(WordUnit::len).collect()
    }

    #[test]
    fn align_groups_tokens_by_word() {
        let words = parse_presegmented("ab c");
        let al = align(&words, &seq(&[(0, 1), (1, 2), (2, 3)]), "abc");
        assert_eq!(sizes(&al.units), [2, 1]);
        assert_eq!(al.mismatches, 0);
    }

    #[test]
    fn single_word_single_token() {
        let al = align(&parse_presegmented("的"), &seq(&[(0, 1)]), "的");
        assert_eq!(al.units, [WordUnit::new(0, 1)]);
    }

    #[test]
    fn straddle_falls_back_per_token() {
        // words [ab][cd] [ef], tokens [a][bc][d] [ef]
        let words = Segmentation {
            words: vec![
                Word { text: "ab".into(), start: 0, end: 2 },
                Word { text: "cd".into(), start: 2, end: 4 },
                Word { text: "ef".into(), start: 4, end: 6 },
            ],
        };
        let al = align(&words, &seq(&[(0, 1), (1, 3), (3, 4), (5, 6), (6, 7)]), "abcd ef");
        assert_eq!(sizes(&al.units), [1, 1, 1, 2]);
        assert_eq!(al.mismatches, 1);
    }

    #[test]
    fn token_spans_skip_whitespace() {
        let words = parse_presegmented("中文 ab");
        let al = align(&words, &seq(&[(0, 1), (1, 2), (3, 5)]), "中文 ab");
        assert_eq!(sizes(&al.units), [2, 1]);
    }

    #[test]
    fn budget_rule() {
        let cfg = MaskingConfig::default();
        assert_eq!(cfg.num_to_predict(10), 2); // 1.5 rounds up
        assert_eq!(cfg.num_to_predict(3), 1); // floor of one
        assert_eq!(cfg.num_to_predict(1), 1);
        assert_eq!(cfg.num_to_predict(125), 19);
        assert_eq!(cfg.num_to_predict(1000), 20);
    }

    #[test]
    fn forced_order_takes_whole_units() {
        let units = [
            WordUnit::new(0, 2),
            WordUnit::new(2, 5),
            WordUnit::new(5, 6),
            WordUnit::new(6, 8),
        ];
        assert_eq!(select_in_order(&units, [1, 0, 2, 3], 4), [1, 2]);
        assert_eq!(select_in_order(&units, [0, 3, 1, 2], 4), [0, 3]);
        assert!(select_in_order(&units, [1], 2).is_empty());
    }

    #[test]
    fn empty_units_empty_selection() {
        let mut rng = stream(0, &[]);
        assert!(select_units(&[], 10, &MaskingConfig::default(), &mut rng).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(MaskingConfig::default().validate().is_ok());
        let bad = MaskingConfig { masked_lm_prob: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MaskingConfig { keep_ratio: 0.2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MaskingConfig { max_predictions_per_seq: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn action_codes_round_trip() {
        for a in [MaskAction::Mask, MaskAction::Random, MaskAction::Keep] {
            assert_eq!(MaskAction::from_code(a.code()), Some(a));
        }
        assert_eq!(MaskAction::from_code('x'), None);
    }
}
