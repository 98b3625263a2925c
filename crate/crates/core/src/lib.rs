//! Whole word masking pre-training data generation for Chinese corpora.
//!
//! The pipeline runs corpus cleaning ([`ingest`]), WordPiece tokenization
//! ([`tokenizer`]), word segmentation ([`segmenter`]), word-to-token
//! alignment and masking ([`wwm`]), instance packing ([`builder`]),
//! serialization ([`record`]) and validation ([`stats`]).

pub mod builder;
pub mod error;
pub mod ingest;
pub mod instance;
pub mod record;
pub mod rng;
pub mod segmenter;
pub mod stats;
pub mod synthetic;
pub mod text;
pub mod tokenizer;
pub mod vocab;
pub mod wwm;

pub use builder::{build_all, prepare_corpus, BuildConfig, BuildCounters, BuiltInstance, Document};
pub use error::{Error, Result};
pub use instance::TrainingInstance;
pub use record::{RecordFormat, RecordHeader, RecordReader, RecordWriter, SidecarEntry, SidecarReader};
pub use segmenter::{Lexicon, SegMode, Segmenter};
pub use stats::{analyze, AnalyzeOptions, StatsReport};
pub use tokenizer::Tokenizer;
pub use vocab::Vocab;
pub use wwm::{MaskAction, MaskingConfig, WordUnit};
