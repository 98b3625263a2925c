//! Record files for training instances, plus the per-instance audit sidecar.
//!
//! Two encodings share one header (format version, dimensions, vocabulary
//! fingerprint):
//!
//! * JSONL: a first line `{"__header__": {...}}`, then one object per
//!   instance with keys `input_ids`, `input_mask`, `segment_ids`,
//!   `masked_lm_positions`, `masked_lm_ids`, `masked_lm_weights`,
//!   `next_sentence_label`, in that order.
//! * Binary (little-endian): magic `WWMR`, `u32` version, `u32` max_seq_len,
//!   `u32` max_predictions_per_seq, `u64` fingerprint; then per record a `u32`
//!   payload length followed by the same fields as `i32` arrays, weights as
//!   `f32` and the label as `u8`.

use std::fmt;
use std::io::{BufRead, ErrorKind, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TrainingInstance;
use crate::vocab::Vocab;
use crate::wwm::{MaskAction, WordUnit};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"WWMR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Jsonl,
    Binary,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "binary" => Ok(RecordFormat::Binary),
            other => Err(Error::Config(format!("unknown record format {other:?}"))),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Jsonl => "jsonl",
            RecordFormat::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordHeader {
    pub format_version: u32,
    pub max_seq_len: usize,
    pub max_predictions_per_seq: usize,
    pub vocab_fingerprint: u64,
}

impl RecordHeader {
    pub fn new(max_seq_len: usize, max_predictions_per_seq: usize, vocab: &Vocab) -> Self {
        RecordHeader {
            format_version: FORMAT_VERSION,
            max_seq_len,
            max_predictions_per_seq,
            vocab_fingerprint: vocab.fingerprint(),
        }
    }

    fn check(&self, inst: &TrainingInstance, index: usize) -> Result<()> {
        let seq = [&inst.input_ids, &inst.input_mask, &inst.segment_ids];
        if seq.iter().any(|v| v.len() != self.max_seq_len) {
            return Err(Error::DimensionMismatch {
                index,
                detail: format!("sequence arrays must have length {}", self.max_seq_len),
            });
        }
        let p = self.max_predictions_per_seq;
        if inst.masked_lm_positions.len() != p || inst.masked_lm_ids.len() != p || inst.masked_lm_weights.len() != p {
            return Err(Error::DimensionMismatch {
                index,
                detail: format!("prediction arrays must have length {p}"),
            });
        }
        Ok(())
    }

    fn payload_len(&self) -> usize {
        12 * self.max_seq_len + 12 * self.max_predictions_per_seq + 1
    }
}

#[derive(Serialize, Deserialize)]
struct JsonHeaderBody {
    format_version: u32,
    max_seq_len: usize,
    max_predictions_per_seq: usize,
    vocab_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    #[serde(rename = "__header__")]
    header: JsonHeaderBody,
}

impl From<&RecordHeader> for JsonHeader {
    fn from(h: &RecordHeader) -> Self {
        JsonHeader {
            header: JsonHeaderBody {
                format_version: h.format_version,
                max_seq_len: h.max_seq_len,
                max_predictions_per_seq: h.max_predictions_per_seq,
                vocab_fingerprint: format!("{:016x}", h.vocab_fingerprint),
            },
        }
    }
}

pub struct RecordWriter<W: Write> {
    sink: W,
    format: RecordFormat,
    header: RecordHeader,
    count: usize,
    buf: Vec<u8>,
}

impl<W: Write> RecordWriter<W> {
    /// Writes the header immediately.
    pub fn new(mut sink: W, format: RecordFormat, header: RecordHeader) -> Result<Self> {
        match format {
            RecordFormat::Jsonl => {
                serde_json::to_writer(&mut sink, &JsonHeader::from(&header)).map_err(io_from_json)?;
                sink.write_all(b"\n")?;
            }
            RecordFormat::Binary => {
                sink.write_all(MAGIC)?;
                sink.write_all(&header.format_version.to_le_bytes())?;
                sink.write_all(&(header.max_seq_len as u32).to_le_bytes())?;
                sink.write_all(&(header.max_predictions_per_seq as u32).to_le_bytes())?;
                sink.write_all(&header.vocab_fingerprint.to_le_bytes())?;
            }
        }
        Ok(RecordWriter {
            sink,
            format,
            header,
            count: 0,
            buf: Vec::new(),
        })
    }

    pub fn write(&mut self, inst: &TrainingInstance) -> Result<()> {
        self.header.check(inst, self.count)?;
        self.buf.clear();
        match self.format {
            RecordFormat::Jsonl => {
                serde_json::to_writer(&mut self.buf, inst).map_err(io_from_json)?;
                self.buf.push(b'\n');
            }
            RecordFormat::Binary => {
                self.buf.extend_from_slice(&(self.header.payload_len() as u32).to_le_bytes());
                for arr in [&inst.input_ids, &inst.input_mask, &inst.segment_ids, &inst.masked_lm_positions, &inst.masked_lm_ids] {
                    for v in arr.iter() {
                        self.buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                for w in &inst.masked_lm_weights {
                    self.buf.extend_from_slice(&w.to_le_bytes());
                }
                self.buf.push(inst.next_sentence_label as u8);
            }
        }
        self.sink.write_all(&self.buf)?;
        self.count += 1;
        Ok(())
    }

    /// Flushes and returns the number of records written.
    pub fn finish(mut self) -> Result<usize> {
        self.sink.flush()?;
        Ok(self.count)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Flushes and hands back the sink.
    pub fn into_inner(mut self) -> Result<W> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

fn io_from_json(e: serde_json::Error) -> Error {
    Error::Io(e.into())
}

/// Writes a full record file and returns the record count.
pub fn write_records<W: Write>(
    instances: &[TrainingInstance],
    sink: W,
    format: RecordFormat,
    header: RecordHeader,
) -> Result<usize> {
    let mut w = RecordWriter::new(sink, format, header)?;
    for inst in instances {
        w.write(inst)?;
    }
    w.finish()
}

/// Streaming reader; the encoding is detected from the first bytes.
pub struct RecordReader<R: BufRead> {
    source: R,
    format: RecordFormat,
    header: RecordHeader,
    index: usize,
    line: String,
    buf: Vec<u8>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let peek = source.fill_buf()?;
        let format = if peek.starts_with(MAGIC) {
            RecordFormat::Binary
        } else if peek.first() == Some(&b'{') {
            RecordFormat::Jsonl
        } else {
            return Err(Error::BadHeader);
        };
        let header = match format {
            RecordFormat::Binary => {
                let mut raw = [0u8; 24];
                source.read_exact(&mut raw).map_err(|_| Error::BadHeader)?;
                let u32_at = |i: usize| u32::from_le_bytes(raw[i..i + 4].try_into().expect("4 bytes"));
                RecordHeader {
                    format_version: u32_at(4),
                    max_seq_len: u32_at(8) as usize,
                    max_predictions_per_seq: u32_at(12) as usize,
                    vocab_fingerprint: u64::from_le_bytes(raw[16..24].try_into().expect("8 bytes")),
                }
            }
            RecordFormat::Jsonl => {
                let mut line = String::new();
                source.read_line(&mut line)?;
                let parsed: JsonHeader = serde_json::from_str(line.trim_end()).map_err(|_| Error::BadHeader)?;
                let body = parsed.header;
                RecordHeader {
                    format_version: body.format_version,
                    max_seq_len: body.max_seq_len,
                    max_predictions_per_seq: body.max_predictions_per_seq,
                    vocab_fingerprint: u64::from_str_radix(&body.vocab_fingerprint, 16).map_err(|_| Error::BadHeader)?,
                }
            }
        };
        if header.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(RecordReader {
            source,
            format,
            header,
            index: 0,
            line: String::new(),
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> &RecordHeader {
        &self.header
    }

    pub fn format(&self) -> RecordFormat {
        self.format
    }

    /// Compares the header fingerprint with `vocab`, logging a warning on
    /// mismatch. Returns whether they agree.
    pub fn check_fingerprint(&self, vocab: &Vocab) -> bool {
        let ok = self.header.vocab_fingerprint == vocab.fingerprint();
        if !ok {
            log::warn!(
                "record file was written with vocabulary {:016x}, but {:016x} is loaded",
                self.header.vocab_fingerprint,
                vocab.fingerprint()
            );
        }
        ok
    }

    fn read_jsonl(&mut self) -> Result<Option<TrainingInstance>> {
        self.line.clear();
        if self.source.read_line(&mut self.line)? == 0 {
            return Ok(None);
        }
        let complete = self.line.ends_with('\n');
        match serde_json::from_str::<TrainingInstance>(self.line.trim_end()) {
            Ok(inst) => Ok(Some(inst)),
            Err(_) if !complete => Err(Error::TruncatedRecord { index: self.index }),
            Err(e) => Err(Error::MalformedRecord {
                index: self.index,
                detail: e.to_string(),
            }),
        }
    }

    fn read_binary(&mut self) -> Result<Option<TrainingInstance>> {
        let mut len = [0u8; 4];
        match read_full(&mut self.source, &mut len)? {
            0 => return Ok(None),
            4 => {}
            _ => return Err(Error::TruncatedRecord { index: self.index }),
        }
        let len = u32::from_le_bytes(len) as usize;
        if len != self.header.payload_len() {
            return Err(Error::DimensionMismatch {
                index: self.index,
                detail: format!("payload of {len} bytes, expected {}", self.header.payload_len()),
            });
        }
        self.buf.resize(len, 0);
        if read_full(&mut self.source, &mut self.buf)? != len {
            return Err(Error::TruncatedRecord { index: self.index });
        }
        let (l, p) = (self.header.max_seq_len, self.header.max_predictions_per_seq);
        let mut words = self.buf[..len - 1].chunks_exact(4).map(|c| <[u8; 4]>::try_from(c).expect("4 bytes"));
        let mut ints = |n: usize| -> Vec<i32> { words.by_ref().take(n).map(i32::from_le_bytes).collect() };
        let input_ids = ints(l);
        let input_mask = ints(l);
        let segment_ids = ints(l);
        let masked_lm_positions = ints(p);
        let masked_lm_ids = ints(p);
        let masked_lm_weights = words.map(f32::from_le_bytes).collect();
        Ok(Some(TrainingInstance {
            input_ids,
            input_mask,
            segment_ids,
            masked_lm_positions,
            masked_lm_ids,
            masked_lm_weights,
            next_sentence_label: self.buf[len - 1] as i32,
        }))
    }

    /// Next record, or `None` at end of file.
    pub fn next_record(&mut self) -> Result<Option<TrainingInstance>> {
        let inst = match self.format {
            RecordFormat::Jsonl => self.read_jsonl()?,
            RecordFormat::Binary => self.read_binary()?,
        };
        if let Some(inst) = &inst {
            self.header.check(inst, self.index)?;
            self.index += 1;
        }
        Ok(inst)
    }

    /// Reads up to `n` records.
    pub fn next_chunk(&mut self, n: usize) -> Result<Vec<TrainingInstance>> {
        let mut out = Vec::with_capacity(n.min(4096));
        while out.len() < n {
            match self.next_record()? {
                Some(inst) => out.push(inst),
                None => break,
            }
        }
        Ok(out)
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<TrainingInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Like `read_exact`, but reports how many bytes were available.
fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Reads a whole record file into memory.
pub fn read_records<R: BufRead>(source: R) -> Result<(RecordHeader, Vec<TrainingInstance>)> {
    let reader = RecordReader::new(source)?;
    let header = *reader.header();
    let instances = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, instances))
}

/// Audit data for one instance: the spans of its multi-token word units and
/// the replacement action of each masked position, in position order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarEntry {
    pub units: Vec<[u32; 2]>,
    /// One of `M`, `R`, `K` per masked position.
    pub actions: String,
}

impl SidecarEntry {
    pub fn new(units: &[WordUnit], actions: &[MaskAction]) -> Self {
        SidecarEntry {
            units: units
                .iter()
                .filter(|u| u.len() > 1)
                .map(|u| [u.start as u32, u.end as u32])
                .collect(),
            actions: actions.iter().map(|a| a.code()).collect(),
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = Option<MaskAction>> + '_ {
        self.actions.chars().map(MaskAction::from_code)
    }
}

pub fn write_sidecar_entry<W: Write>(sink: &mut W, entry: &SidecarEntry) -> Result<()> {
    serde_json::to_writer(&mut *sink, entry).map_err(io_from_json)?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Streaming sidecar reader.
pub struct SidecarReader<R: BufRead> {
    source: R,
    index: usize,
    line: String,
}

impl<R: BufRead> SidecarReader<R> {
    pub fn new(source: R) -> Self {
        SidecarReader {
            source,
            index: 0,
            line: String::new(),
        }
    }

    pub fn next_entry(&mut self) -> Result<Option<SidecarEntry>> {
        self.line.clear();
        if self.source.read_line(&mut self.line)? == 0 {
            return Ok(None);
        }
        let entry = serde_json::from_str(self.line.trim_end()).map_err(|e| Error::MalformedRecord {
            index: self.index,
            detail: format!("sidecar: {e}"),
        })?;
        self.index += 1;
        Ok(Some(entry))
    }
}
