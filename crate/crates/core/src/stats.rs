//! Validation statistics over record files.
//!
//! Everything is accumulated in integer counters and reduced in a fixed
//! order, so a report is a pure function of the input bytes. The optional
//! sidecar enables the whole-word atomicity audit and exact action ratios;
//! without it, `KEEP` cannot be told apart from an unmasked position and
//! actions are estimated from the records alone.

use std::io::BufRead;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::TrainingInstance;
use crate::record::{RecordReader, SidecarEntry, SidecarReader};
use crate::text::{script_of, Script};
use crate::vocab::Vocab;
use crate::wwm::MaskAction;

const HISTOGRAM_BUCKETS: usize = 16;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Instances with fewer unpadded tokens are skipped.
    pub min_unpadded_len: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ActionCounts {
    pub mask: u64,
    pub random: u64,
    pub keep: u64,
}

impl ActionCounts {
    fn total(&self) -> u64 {
        self.mask + self.random + self.keep
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ActionRatios {
    pub mask: f64,
    pub random: f64,
    pub keep: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScriptCounts {
    pub cjk: u64,
    pub latin: u64,
    pub other: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistogramBucket {
    pub start: usize,
    pub end: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub instance_count: u64,
    pub skipped_instances: u64,
    pub mean_unpadded_len: f64,
    pub max_unpadded_len: usize,
    /// Unpadded positions other than `[CLS]`/`[SEP]`.
    pub maskable_positions: u64,
    pub masked_positions: u64,
    pub masked_position_rate: f64,
    /// `"sidecar"` when actions come from the audit stream, else `"records"`.
    pub action_source: &'static str,
    pub action_counts: ActionCounts,
    pub action_ratios: ActionRatios,
    pub nsp_random_fraction: f64,
    pub atomicity_violations: Option<u64>,
    pub audited_units: Option<u64>,
    pub sidecar_inconsistencies: Option<u64>,
    pub invalid_instances: u64,
    pub unk_rate: f64,
    pub script_counts: ScriptCounts,
    pub length_histogram: Vec<HistogramBucket>,
    pub vocab_fingerprint_match: bool,
}

#[derive(Debug, Clone, Default)]
struct Accum {
    instances: u64,
    skipped: u64,
    len_sum: u64,
    max_len: usize,
    maskable: u64,
    masked: u64,
    actions: ActionCounts,
    nsp_random: u64,
    violations: u64,
    units: u64,
    inconsistencies: u64,
    invalid: u64,
    unk: u64,
    scripts: ScriptCounts,
    histogram: Vec<u64>,
}

impl Accum {
    fn new() -> Self {
        Accum {
            histogram: vec![0; HISTOGRAM_BUCKETS],
            ..Default::default()
        }
    }

    fn merge(mut self, o: Accum) -> Accum {
        self.instances += o.instances;
        self.skipped += o.skipped;
        self.len_sum += o.len_sum;
        self.max_len = self.max_len.max(o.max_len);
        self.maskable += o.maskable;
        self.masked += o.masked;
        self.actions.mask += o.actions.mask;
        self.actions.random += o.actions.random;
        self.actions.keep += o.actions.keep;
        self.nsp_random += o.nsp_random;
        self.violations += o.violations;
        self.units += o.units;
        self.inconsistencies += o.inconsistencies;
        self.invalid += o.invalid;
        self.unk += o.unk;
        self.scripts.cjk += o.scripts.cjk;
        self.scripts.latin += o.scripts.latin;
        self.scripts.other += o.scripts.other;
        for (a, b) in self.histogram.iter_mut().zip(o.histogram) {
            *a += b;
        }
        self
    }
}

struct Ctx<'a> {
    vocab: &'a Vocab,
    max_seq_len: usize,
    max_predictions: usize,
    bucket_width: usize,
    min_len: usize,
}

fn scripts_table(vocab: &Vocab) -> Vec<Script> {
    vocab.tokens().iter().map(|t| script_of(t)).collect()
}

fn visit(acc: &mut Accum, ctx: &Ctx<'_>, scripts: &[Script], inst: &TrainingInstance, side: Option<&SidecarEntry>) {
    let n = inst.unpadded_len();
    if n < ctx.min_len {
        acc.skipped += 1;
        return;
    }
    acc.instances += 1;
    if inst.check(ctx.vocab, ctx.max_seq_len, ctx.max_predictions).is_err() {
        acc.invalid += 1;
    }
    acc.len_sum += n as u64;
    acc.max_len = acc.max_len.max(n);
    acc.histogram[(n / ctx.bucket_width).min(HISTOGRAM_BUCKETS - 1)] += 1;
    acc.nsp_random += u64::from(inst.next_sentence_label == 1);

    let sp = ctx.vocab.specials();
    let k = inst.num_predictions();
    let positions = &inst.masked_lm_positions[..k];
    let labels = &inst.masked_lm_ids[..k];

    // Original ids: undo the replacement at masked positions.
    let mut original: Vec<i32> = inst.input_ids[..n].to_vec();
    let mut masked = vec![false; n];
    for (&p, &label) in positions.iter().zip(labels) {
        if let Some(slot) = original.get_mut(p as usize) {
            *slot = label;
            masked[p as usize] = true;
        }
    }
    for &id in &original {
        if id == sp.cls as i32 || id == sp.sep as i32 {
            continue;
        }
        acc.maskable += 1;
        if id == sp.unk as i32 {
            acc.unk += 1;
        }
        match scripts.get(id as usize).copied().unwrap_or(Script::Other) {
            Script::Cjk => acc.scripts.cjk += 1,
            Script::Latin => acc.scripts.latin += 1,
            Script::Other => acc.scripts.other += 1,
        }
    }
    acc.masked += k as u64;

    match side {
        None => {
            for (&p, &label) in positions.iter().zip(labels) {
                let cur = inst.input_ids.get(p as usize).copied().unwrap_or(-1);
                if cur == sp.mask as i32 {
                    acc.actions.mask += 1;
                } else if cur != label {
                    acc.actions.random += 1;
                } else {
                    acc.actions.keep += 1;
                }
            }
        }
        Some(entry) => {
            let actions: Vec<Option<MaskAction>> = entry.actions().collect();
            if actions.len() != k {
                acc.inconsistencies += 1;
            }
            for (j, action) in actions.iter().enumerate() {
                let (cur, label) = match positions.get(j) {
                    Some(&p) => (inst.input_ids[p as usize], labels[j]),
                    None => (-1, -1),
                };
                let consistent = match action {
                    Some(MaskAction::Mask) => {
                        acc.actions.mask += 1;
                        cur == sp.mask as i32
                    }
                    Some(MaskAction::Random) => {
                        acc.actions.random += 1;
                        cur >= 0 && !ctx.vocab.is_special(cur as u32)
                    }
                    Some(MaskAction::Keep) => {
                        acc.actions.keep += 1;
                        cur == label
                    }
                    None => false,
                };
                if !consistent {
                    acc.inconsistencies += 1;
                }
            }
            for &[s, e] in &entry.units {
                let (s, e) = (s as usize, e as usize);
                acc.units += 1;
                if s == 0 || e > n || s >= e {
                    acc.inconsistencies += 1;
                    continue;
                }
                let hit = masked[s..e].iter().filter(|&&m| m).count();
                if hit != 0 && hit != e - s {
                    acc.violations += 1;
                }
            }
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes a report over every record, optionally paired line-for-line
/// with a sidecar stream.
pub fn analyze<R: BufRead, S: BufRead>(
    mut records: RecordReader<R>,
    vocab: &Vocab,
    mut sidecar: Option<SidecarReader<S>>,
    opts: &AnalyzeOptions,
) -> Result<StatsReport> {
    let header = *records.header();
    let fingerprint_match = records.check_fingerprint(vocab);
    let ctx = Ctx {
        vocab,
        max_seq_len: header.max_seq_len,
        max_predictions: header.max_predictions_per_seq,
        bucket_width: header.max_seq_len.div_ceil(HISTOGRAM_BUCKETS).max(1),
        min_len: opts.min_unpadded_len,
    };
    let scripts = scripts_table(vocab);
    let mut total = Accum::new();
    let mut seen = 0usize;
    loop {
        let chunk = records.next_chunk(CHUNK)?;
        let sides = match sidecar.as_mut() {
            Some(sc) => {
                let mut v = Vec::with_capacity(chunk.len());
                for _ in 0..chunk.len() {
                    match sc.next_entry()? {
                        Some(e) => v.push(e),
                        None => {
                            return Err(Error::SidecarMismatch {
                                sidecar: seen + v.len(),
                                records: seen + chunk.len(),
                            })
                        }
                    }
                }
                Some(v)
            }
            None => None,
        };
        if chunk.is_empty() {
            break;
        }
        seen += chunk.len();
        let acc = chunk
            .par_iter()
            .enumerate()
            .fold(Accum::new, |mut acc, (i, inst)| {
                visit(&mut acc, &ctx, &scripts, inst, sides.as_ref().map(|s| &s[i]));
                acc
            })
            .reduce(Accum::new, Accum::merge);
        total = total.merge(acc);
    }
    if let Some(sc) = sidecar.as_mut() {
        if sc.next_entry()?.is_some() {
            return Err(Error::SidecarMismatch {
                sidecar: seen + 1,
                records: seen,
            });
        }
    }

    let has_sidecar = sidecar.is_some();
    let actions_total = total.actions.total();
    let bucket_width = ctx.bucket_width;
    Ok(StatsReport {
        instance_count: total.instances,
        skipped_instances: total.skipped,
        mean_unpadded_len: ratio(total.len_sum, total.instances),
        max_unpadded_len: total.max_len,
        maskable_positions: total.maskable,
        masked_positions: total.masked,
        masked_position_rate: ratio(total.masked, total.maskable),
        action_source: if has_sidecar { "sidecar" } else { "records" },
        action_counts: total.actions,
        action_ratios: ActionRatios {
            mask: ratio(total.actions.mask, actions_total),
            random: ratio(total.actions.random, actions_total),
            keep: ratio(total.actions.keep, actions_total),
        },
        nsp_random_fraction: ratio(total.nsp_random, total.instances),
        atomicity_violations: has_sidecar.then_some(total.violations),
        audited_units: has_sidecar.then_some(total.units),
        sidecar_inconsistencies: has_sidecar.then_some(total.inconsistencies),
        invalid_instances: total.invalid,
        unk_rate: ratio(total.unk, total.maskable),
        script_counts: total.scripts,
        length_histogram: total
            .histogram
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBucket {
                start: i * bucket_width,
                end: if i + 1 == HISTOGRAM_BUCKETS { header.max_seq_len + 1 } else { (i + 1) * bucket_width },
                count,
            })
            .collect(),
        vocab_fingerprint_match: fingerprint_match,
    })
}
