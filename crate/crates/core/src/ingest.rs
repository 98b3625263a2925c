//! Cleaning of extracted wiki text and conversion to the corpus format
//! consumed by the example builder: one sentence per line, one blank line
//! between documents, trailing newline at EOF.

use std::borrow::Cow;
use std::io::Write;

use rayon::prelude::*;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Sentence-final punctuation. Latin `.` is deliberately absent so that
/// numbers like "3.5" and URLs survive intact.
pub const SENTENCE_TERMINATORS: [char; 4] = ['。', '！', '？', '；'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDocument {
    pub id: String,
    pub sentences: Vec<String>,
}

/// Decodes bytes as UTF-8, reporting the offset of the first invalid byte.
pub fn decode_utf8(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Removes every `<...>` span. The scan is single-pass and non-nesting: a
/// `<` opens a tag that closes at the next `>`. An unclosed `<` is kept.
fn strip_tags(s: &str) -> Cow<'_, str> {
    if !s.contains('<') {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        match rest[open..].find('>') {
            Some(close) => rest = &rest[open + close + 1..],
            None => {
                rest = &rest[open..];
                break;
            }
        }
    }
    out.push_str(rest);
    Cow::Owned(out)
}

/// Strips markup tags and control characters, collapses whitespace runs to a
/// single space (newlines are kept, spaces at line edges dropped) and
/// NFC-normalizes the result.
pub fn clean_text(raw: &str) -> String {
    let stripped = strip_tags(raw);
    let mut out = String::with_capacity(stripped.len());
    let mut pending_space = false;
    for c in stripped.chars() {
        if c == '\n' {
            pending_space = false;
            out.push('\n');
        } else if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() && !out.ends_with('\n') {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    // NFC last: tag and control removal can bring a base character and a
    // combining mark together.
    out.nfc().collect()
}

/// Splits text into sentences on the CJK terminator set and on newlines.
/// Terminators stay attached to their sentence; empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    fn push<'a>(out: &mut Vec<&'a str>, s: &'a str) {
        let s = s.trim();
        if !s.is_empty() {
            out.push(s);
        }
    }
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' {
            push(&mut out, &text[start..i]);
            start = i + 1;
        } else if SENTENCE_TERMINATORS.contains(&c) {
            let end = i + c.len_utf8();
            push(&mut out, &text[start..end]);
            start = end;
        }
    }
    push(&mut out, &text[start..]);
    out
}

pub fn clean_document(raw: &RawDocument) -> CleanDocument {
    let text = clean_text(&raw.body);
    CleanDocument {
        id: raw.id.clone(),
        sentences: split_sentences(&text).into_iter().map(str::to_owned).collect(),
    }
}

/// Cleans documents on the current rayon pool. Output order matches input.
pub fn clean_documents(docs: &[RawDocument]) -> Vec<CleanDocument> {
    docs.par_iter().map(clean_document).collect()
}

/// Splits extractor output into documents.
///
/// Text wrapped in `<doc id="...">` ... `</doc>` blocks yields one document
/// per block; anything else is a single document named `fallback_id`.
pub fn split_extracted(text: &str, fallback_id: &str) -> Vec<RawDocument> {
    if !text.contains("<doc") {
        return vec![RawDocument {
            id: fallback_id.to_owned(),
            body: text.to_owned(),
        }];
    }
    let mut docs = Vec::new();
    let mut current: Option<(String, String)> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("<doc") && trimmed.ends_with('>') {
            if let Some((id, body)) = current.take() {
                docs.push(RawDocument { id, body });
            }
            let id = attr(trimmed, "id")
                .map(str::to_owned)
                .unwrap_or_else(|| format!("{fallback_id}#{}", docs.len()));
            current = Some((id, String::new()));
        } else if trimmed == "</doc>" {
            if let Some((id, body)) = current.take() {
                docs.push(RawDocument { id, body });
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some((id, body)) = current {
        docs.push(RawDocument { id, body });
    }
    docs
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!("{name}=\"");
    let start = tag.find(&key)? + key.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

/// Writes documents in the canonical corpus format and returns the number
/// of sentence lines written. Documents without sentences are skipped.
pub fn write_corpus<W: Write>(docs: &[CleanDocument], sink: &mut W) -> Result<usize> {
    let mut lines = 0;
    let mut first = true;
    for doc in docs.iter().filter(|d| !d.sentences.is_empty()) {
        if !first {
            sink.write_all(b"\n")?;
        }
        first = false;
        for sentence in &doc.sentences {
            debug_assert!(!sentence.contains('\n'));
            sink.write_all(sentence.as_bytes())?;
            sink.write_all(b"\n")?;
            lines += 1;
        }
    }
    sink.flush()?;
    Ok(lines)
}

/// Parses the canonical corpus format into documents of sentence lines.
/// Runs of blank lines are treated as a single document boundary.
pub fn parse_corpus(text: &str) -> Vec<Vec<&str>> {
    let mut docs = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                docs.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        docs.push(current);
    }
    docs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_tags() {
        assert_eq!(clean_text("使用<b>语言</b>模型"), "使用语言模型");
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("a <br/>b"), "a b");
    }

    #[test]
    fn unclosed_tag_is_kept() {
        assert_eq!(clean_text("x < y"), "x < y");
        assert_eq!(clean_text("a<b>c<d"), "ac<d");
    }

    #[test]
    fn whitespace_and_controls() {
        assert_eq!(clean_text("  a \t\r b  \n  c\u{0007}d  "), "a b\ncd");
        assert_eq!(clean_text("a\u{3000}\u{3000}b"), "a b");
    }

    #[test]
    fn nfc_after_removal() {
        // The tag separates a base letter from its combining accent.
        assert_eq!(clean_text("e<i>\u{0301}"), "\u{00e9}");
    }

    #[test]
    fn invalid_utf8_offset() {
        let err = decode_utf8(vec![b'a', b'b', 0xff, b'c']).unwrap_err();
        assert!(matches!(err, Error::InvalidUtf8 { offset: 2 }));
    }

    #[test]
    fn sentence_split_examples() {
        assert_eq!(split_sentences("今天晴。明天雨！"), vec!["今天晴。", "明天雨！"]);
        assert_eq!(split_sentences("no terminator"), vec!["no terminator"]);
        assert_eq!(split_sentences("版本3.5发布。\n\n第二行"), vec!["版本3.5发布。", "第二行"]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("\n \n").is_empty());
    }

    #[test]
    fn extractor_blocks() {
        let text = "<doc id=\"12\" url=\"x\" title=\"数学\">\n数学\n数学是科学。\n</doc>\n<doc id=\"13\">\n物理\n</doc>\n";
        let docs = split_extracted(text, "f");
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "12");
        assert_eq!(docs[0].body, "数学\n数学是科学。\n");
        assert_eq!(docs[1].id, "13");

        let plain = split_extracted("只有一段。", "f");
        assert_eq!(plain.len(), 1);
        assert_eq!(plain[0].id, "f");
    }

    #[test]
    fn corpus_format() {
        let docs = vec![
            CleanDocument { id: "a".into(), sentences: vec!["一。".into(), "二。".into()] },
            CleanDocument { id: "empty".into(), sentences: vec![] },
            CleanDocument { id: "b".into(), sentences: vec!["三。".into()] },
        ];
        let mut buf = Vec::new();
        assert_eq!(write_corpus(&docs, &mut buf).unwrap(), 3);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "一。\n二。\n\n三。\n");
        assert_eq!(parse_corpus(&text), vec![vec!["一。", "二。"], vec!["三。"]]);
    }

    #[test]
    fn empty_corpus_writes_nothing() {
        let mut buf = Vec::new();
        assert_eq!(write_corpus(&[], &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
    }
}
