use serde::{Deserialize, Serialize};

use crate::vocab::Vocab;

/// A finalized pre-training example. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingInstance {
    pub input_ids: Vec<i32>,
    pub input_mask: Vec<i32>,
    pub segment_ids: Vec<i32>,
    pub masked_lm_positions: Vec<i32>,
    pub masked_lm_ids: Vec<i32>,
    pub masked_lm_weights: Vec<f32>,
    /// 0 when segment B follows segment A, 1 when B is from another document.
    pub next_sentence_label: i32,
}

impl TrainingInstance {
    /// Number of non-padding positions.
    pub fn unpadded_len(&self) -> usize {
        self.input_mask.iter().take_while(|&&m| m == 1).count()
    }

    /// Number of real (non-padding) predictions.
    pub fn num_predictions(&self) -> usize {
        self.masked_lm_weights.iter().take_while(|&&w| w == 1.0).count()
    }

    /// Checks every structural invariant and returns the first violation.
    pub fn check(&self, vocab: &Vocab, max_seq_len: usize, max_predictions: usize) -> Result<(), String> {
        let sp = vocab.specials();
        let (cls, sep) = (sp.cls as i32, sp.sep as i32);
        for (name, len) in [
            ("input_ids", self.input_ids.len()),
            ("input_mask", self.input_mask.len()),
            ("segment_ids", self.segment_ids.len()),
        ] {
            if len != max_seq_len {
                return Err(format!("{name} has length {len}, expected {max_seq_len}"));
            }
        }
        for (name, len) in [
            ("masked_lm_positions", self.masked_lm_positions.len()),
            ("masked_lm_ids", self.masked_lm_ids.len()),
            ("masked_lm_weights", self.masked_lm_weights.len()),
        ] {
            if len != max_predictions {
                return Err(format!("{name} has length {len}, expected {max_predictions}"));
            }
        }

        let n = self.unpadded_len();
        if self.input_mask[n..].iter().any(|&m| m != 0) {
            return Err("input_mask is not a prefix of ones".into());
        }
        if self.input_mask[..n].iter().any(|&m| m != 1) {
            return Err("input_mask holds values other than 0/1".into());
        }
        if self.input_ids[n..].iter().any(|&id| id != sp.pad as i32) {
            return Err("padding positions hold non-[PAD] ids".into());
        }
        if n < 3 || self.input_ids[0] != cls {
            return Err("sequence does not start with [CLS]".into());
        }
        let seps: Vec<usize> = (0..n).filter(|&i| self.input_ids[i] == sep).collect();
        if seps.len() != 2 {
            return Err(format!("expected two [SEP] ids, found {}", seps.len()));
        }
        if seps[1] != n - 1 {
            return Err("second [SEP] is not the last unpadded token".into());
        }
        if self.input_ids[1..n].contains(&cls) {
            return Err("[CLS] appears after position 0".into());
        }
        for (i, &s) in self.segment_ids.iter().enumerate() {
            let expected = if i <= seps[0] {
                0
            } else if i < n {
                1
            } else {
                0
            };
            if s != expected {
                return Err(format!("segment_ids[{i}] = {s}, expected {expected}"));
            }
        }

        let k = self.num_predictions();
        if self.masked_lm_weights[k..].iter().any(|&w| w != 0.0) {
            return Err("masked_lm_weights is not ones followed by zeros".into());
        }
        if self.masked_lm_positions[k..].iter().any(|&p| p != 0) || self.masked_lm_ids[k..].iter().any(|&p| p != 0) {
            return Err("padded predictions are not zero".into());
        }
        let mut prev = 0i32;
        for (j, &p) in self.masked_lm_positions[..k].iter().enumerate() {
            if p <= prev && j > 0 {
                return Err("masked_lm_positions not strictly increasing".into());
            }
            prev = p;
            let p = p as usize;
            if p == 0 || p >= n || seps.contains(&p) {
                return Err(format!("masked position {p} is padding or a special token"));
            }
            let label = self.masked_lm_ids[j];
            if label < 0 || label as usize >= vocab.len() || vocab.is_special(label as u32) && label != sp.unk as i32 {
                return Err(format!("masked label {label} is not a regular vocabulary id"));
            }
        }
        if !(self.next_sentence_label == 0 || self.next_sentence_label == 1) {
            return Err(format!("next_sentence_label = {}", self.next_sentence_label));
        }
        Ok(())
    }
}
