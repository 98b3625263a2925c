#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use wwm_core::Vocab;

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn reference_vocab() -> &'static Vocab {
    static VOCAB: OnceLock<Vocab> = OnceLock::new();
    VOCAB.get_or_init(|| Vocab::load(data_path("vocab/chinese_bert_vocab.txt")).expect("reference vocab"))
}

/// Lexicon words from the bundled word list, in file order.
pub fn lexicon_words(limit: usize) -> Vec<String> {
    let text = std::fs::read_to_string(data_path("lexicon/zh_common.txt")).expect("lexicon");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_whitespace().next())
        .take(limit)
        .map(str::to_owned)
        .collect()
}

/// A vocabulary with the five special tokens followed by `tokens`.
pub fn tiny_vocab(tokens: &[&str]) -> Vocab {
    let mut text = String::from("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\n");
    for t in tokens {
        text.push_str(t);
        text.push('\n');
    }
    Vocab::from_text(&text).expect("tiny vocab")
}

pub const SAMPLE_SENTENCE: &str = "使用语言模型来预测下一个词的probability。";
pub const SAMPLE_CWS: &str = "使用 语言 模型 来 预测 下 一个 词 的 probability 。";
