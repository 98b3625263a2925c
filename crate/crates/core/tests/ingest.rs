use proptest::prelude::*;
use unicode_normalization::UnicodeNormalization;
use wwm_core::ingest::{
    clean_document, clean_text, decode_utf8, parse_corpus, split_extracted, split_sentences, write_corpus,
    CleanDocument, RawDocument, SENTENCE_TERMINATORS,
};
use wwm_core::Error;

/// Character-level state machine: drop every `<...>` span, keep an
/// unmatched `<` and everything after it.
fn strip_oracle(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some(off) = chars[i..].iter().position(|&c| c == '>') {
                i += off + 1;
                continue;
            }
            out.extend(&chars[i..]);
            break;
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn text_piece() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['使', '用', '語', '言', 'a', 'Z', '7', '，', '>', '.', 'é']), 0..6)
        .prop_map(|v| v.into_iter().collect())
}

fn tag() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec!["b", "/b", "br/", "a href=\"x y\"", "ref name=n", "", "/doc"]),
        any::<bool>(),
    )
        .prop_map(|(name, nl)| if nl { format!("<{name}\n>") } else { format!("<{name}>") })
}

fn tagged_string() -> impl Strategy<Value = String> {
    (prop::collection::vec((text_piece(), tag()), 0..6), text_piece(), any::<bool>()).prop_map(|(parts, tail, unclosed)| {
        let mut s = String::new();
        for (t, g) in parts {
            s.push_str(&t);
            s.push_str(&g);
        }
        s.push_str(&tail);
        if unclosed {
            s.push_str("<unclosed 3");
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tag_stripping_matches_scanner(s in tagged_string()) {
        let expected = strip_oracle(&s);
        // Tags may contain spaces and newlines; the remaining text has none
        // except the unclosed tail's single space.
        prop_assert_eq!(clean_text(&s), expected.nfc().collect::<String>());
    }

    #[test]
    fn clean_is_idempotent(s in "[\\PC\\s\u{0}-\u{1f}<>]{0,40}") {
        let once = clean_text(&s);
        prop_assert_eq!(clean_text(&once), once);
    }

    #[test]
    fn clean_invents_nothing(s in "[a-z\u{300}\u{301}使用 \t\n<>/é\u{7}]{0,40}") {
        let source: Vec<char> = s.nfd().collect();
        for c in clean_text(&s).nfd() {
            prop_assert!(c.is_whitespace() || source.contains(&c), "{:?} not in input", c);
        }
    }

    #[test]
    fn clean_output_is_tag_free_and_trimmed(s in tagged_string()) {
        let out = clean_text(&s);
        prop_assert!(!out.contains("  "));
        prop_assert!(!out.chars().any(|c| c.is_control() && c != '\n'));
        for line in out.lines() {
            prop_assert_eq!(line, line.trim());
        }
    }
}

fn known_sentence() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(prop::sample::select(vec!['今', '天', '晴', '3', '.', '5', 'w', ',', '，']), 1..8),
        prop::sample::select(SENTENCE_TERMINATORS.to_vec()),
    )
        .prop_map(|(body, t)| body.into_iter().chain(std::iter::once(t)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn split_recovers_concatenated_sentences(sentences in prop::collection::vec(known_sentence(), 1..10), newlines in any::<u16>()) {
        let mut text = String::new();
        for (i, s) in sentences.iter().enumerate() {
            text.push_str(s);
            if newlines >> (i % 16) & 1 == 1 {
                text.push('\n');
            }
        }
        prop_assert_eq!(split_sentences(&text), sentences);
    }

    #[test]
    fn split_concatenation_restores_input(s in "[今天晴。！？；\na-c]{0,30}") {
        let joined: String = split_sentences(&s).concat();
        prop_assert_eq!(joined, s.replace('\n', ""));
    }
}

#[test]
fn html_example() {
    assert_eq!(clean_text("使用<b>语言</b>模型"), "使用语言模型");
    assert_eq!(clean_text(""), "");
}

#[test]
fn split_examples() {
    assert_eq!(split_sentences("今天晴。明天雨！"), ["今天晴。", "明天雨！"]);
    assert_eq!(split_sentences("no terminator"), ["no terminator"]);
    assert_eq!(split_sentences("圆周率约3.14。"), ["圆周率约3.14。"]);
    assert!(split_sentences("").is_empty());
}

#[test]
fn invalid_utf8_reports_offset() {
    let err = decode_utf8(b"ab\xffcd".to_vec()).unwrap_err();
    assert!(matches!(err, Error::InvalidUtf8 { offset: 2 }));
}

#[test]
fn corpus_round_trip() {
    let docs = vec![
        CleanDocument { id: "a".into(), sentences: vec!["今天晴。".into(), "明天雨！".into()] },
        CleanDocument { id: "empty".into(), sentences: vec![] },
        CleanDocument { id: "b".into(), sentences: vec!["第二篇。".into()] },
    ];
    let mut buf = Vec::new();
    assert_eq!(write_corpus(&docs, &mut buf).unwrap(), 3);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text, "今天晴。\n明天雨！\n\n第二篇。\n");
    assert_eq!(parse_corpus(&text), vec![vec!["今天晴。", "明天雨！"], vec!["第二篇。"]]);
}

#[test]
fn extracted_dump_is_split_into_documents() {
    let dump = "<doc id=\"12\" url=\"u\" title=\"数学\">\n数学\n\n数学是<b>科学</b>。它很有用！\n</doc>\n<doc id=\"13\" title=\"x\">\n第二篇\n</doc>\n";
    let raw = split_extracted(dump, "file");
    assert_eq!(raw.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["12", "13"]);
    let clean = clean_document(&raw[0]);
    assert_eq!(clean.sentences, ["数学", "数学是科学。", "它很有用！"]);
    let plain = split_extracted("纯文本。", "f.txt");
    assert_eq!(plain, vec![RawDocument { id: "f.txt".into(), body: "纯文本。".into() }]);
}

#[test]
fn traditional_text_passes_unchanged() {
    assert_eq!(clean_text("這是繁體中文。"), "這是繁體中文。");
}
