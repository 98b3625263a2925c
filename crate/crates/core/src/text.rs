//! Character classes shared by the cleaner, tokenizer and segmenter.
//!
//! All modules must agree on what counts as a separator, otherwise char
//! spans produced by the tokenizer and the segmenter would not line up.

use unicode_general_category::{get_general_category, GeneralCategory};

/// CJK Unified Ideographs, Extension A and the Compatibility Ideographs block.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0xF900..=0xFAFF)
}

/// Separator characters: whitespace and control characters.
///
/// Control characters never survive cleaning, but the tokenizer treats them
/// like whitespace so that spans stay consistent on uncleaned input.
pub fn is_blank(c: char) -> bool {
    c.is_whitespace() || c.is_control()
}

/// Punctuation in the BERT sense: every non-alphanumeric ASCII symbol plus
/// all Unicode `P*` categories.
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn is_combining_mark(c: char) -> bool {
    get_general_category(c) == GeneralCategory::NonspacingMark
}

/// Characters that stand alone as a basic token.
pub fn is_isolated(c: char) -> bool {
    is_cjk(c) || is_punctuation(c)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Rough script class of a token, used by the statistics report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    Cjk,
    Latin,
    Other,
}

pub fn script_of(token: &str) -> Script {
    let body = token.strip_prefix("##").unwrap_or(token);
    match body.chars().next() {
        Some(c) if is_cjk(c) => Script::Cjk,
        Some(c) if c.is_ascii_alphabetic() => Script::Latin,
        Some(c) if c.is_alphabetic() && (c as u32) < 0x0250 => Script::Latin,
        _ => Script::Other,
    }
}
