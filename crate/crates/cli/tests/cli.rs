use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn vocab() -> String {
    data("vocab/chinese_bert_vocab.txt").to_string_lossy().into_owned()
}

fn wwm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wwm")).args(args).output().expect("run wwm")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CORPUS: &str = "使用语言模型来预测下一个词的probability。\n今天天气很好。\n我们去公园散步吧！\n\n第二篇文档讲的是数学。\n数学是一门科学。\n它研究数量和结构。\n\n第三篇只有一句话。\n";

fn write_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.txt");
    fs::write(&path, CORPUS).unwrap();
    path
}

#[test]
fn ingest_cleans_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir_all(raw.join("AA")).unwrap();
    fs::write(
        raw.join("AA/wiki_00"),
        "<doc id=\"1\" title=\"语言\">\n语言\n\n使用<b>语言</b>模型。  它\t很有用！\n</doc>\n<doc id=\"2\" title=\"空\">\n</doc>\n",
    )
    .unwrap();
    fs::write(raw.join("AA/wiki_01"), "没有标记的文本；第二句。").unwrap();
    let out = dir.path().join("corpus.txt");
    let o = wwm(&["ingest", "--input", s(&raw), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "语言\n使用语言模型。\n它 很有用！\n\n没有标记的文本；\n第二句。\n"
    );
}

#[test]
fn tokenize_prints_sample_rows() {
    let o = wwm(&[
        "tokenize",
        "--vocab",
        &vocab(),
        "--mask-words",
        "模型,预测,probability",
        "使用 语言 模型 来 预测 下 一个 词 的 probability 。",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].ends_with("使用语言模型来预测下一个词的probability。"));
    assert!(rows[2].ends_with("使 用 语 言 模 型 来 预 测 下 一 个 词 的 pro ##ba ##bility 。"));
    assert!(rows[3].ends_with("[2,2,2,1,2,1,2,1,1,3,1]"));
    assert!(rows[4].ends_with("使 用 语 言 [MASK] [MASK] 来 [MASK] [MASK] 下 一 个 词 的 [MASK] [MASK] [MASK] 。"));
}

#[test]
fn tokenize_with_bundled_lexicon() {
    let lexicon = data("lexicon/zh_common.txt");
    let o = wwm(&[
        "tokenize",
        "--vocab",
        &vocab(),
        "--seg-mode",
        "fmm",
        "--lexicon",
        s(&lexicon),
        "--json",
        "使用语言模型来预测下一个词的probability。",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["words"].as_array().unwrap().iter().any(|w| w == "probability"));
    assert_eq!(v["masked"], Value::Null);
}

#[test]
fn build_writes_manifest_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let out = dir.path().join("a.bin");
    let o = wwm(&[
        "build",
        "--input",
        s(&corpus),
        "--vocab",
        &vocab(),
        "--seg-mode",
        "char",
        "--max-seq-len",
        "32",
        "--dupe-factor",
        "3",
        "--random-seed",
        "7",
        "--format",
        "binary",
        "--emit-units",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest_path = dir.path().join("a.bin.manifest.json");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["config"]["masking"]["seed"], 7);
    assert_eq!(manifest["config"]["masking"]["max_predictions_per_seq"], 20);
    assert_eq!(manifest["counters"]["documents"], 3);
    assert_eq!(manifest["counters"]["sentences"], 7);
    assert!(manifest["counters"]["instances"].as_u64().unwrap() >= 9);
    assert!(!dir.path().join("a.bin.tmp").exists());

    let again = dir.path().join("b.bin");
    let o = wwm(&["--threads", "3", "build", "--manifest", s(&manifest_path), "--out", s(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.bin.units.jsonl")).unwrap(),
        fs::read(dir.path().join("b.bin.units.jsonl")).unwrap()
    );

    let stats = wwm(&[
        "stats",
        "--records",
        s(&out),
        "--vocab",
        &vocab(),
        "--sidecar",
        s(&dir.path().join("a.bin.units.jsonl")),
    ]);
    assert!(stats.status.success());
    let report: Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(report["instance_count"], manifest["counters"]["instances"]);
    assert_eq!(report["atomicity_violations"], 0);
}

#[test]
fn stats_on_empty_file_is_zeroed() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("r.jsonl");
    let o = wwm(&["build", "--input", s(&empty), "--vocab", &vocab(), "--seg-mode", "char", "--out", s(&out)]);
    assert!(o.status.success());
    let report_path = dir.path().join("report.json");
    let o = wwm(&["stats", "--records", s(&out), "--vocab", &vocab(), "--report-out", s(&report_path)]);
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["instance_count"], 0);
    assert_eq!(report["masked_position_rate"], 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let out = dir.path().join("r.jsonl");
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(code(wwm(&[])), 1);
    assert_eq!(code(wwm(&["build", "--input", s(&corpus)])), 1);
    assert_eq!(code(wwm(&["build", "--input", s(&corpus), "--vocab", &vocab(), "--out", s(&out)])), 1, "fmm without lexicon");
    assert_eq!(
        code(wwm(&["build", "--input", s(&corpus), "--vocab", &vocab(), "--seg-mode", "char", "--masked-lm-prob", "1.5", "--out", s(&out)])),
        1
    );
    assert_eq!(code(wwm(&["--version"])), 0);

    let missing = dir.path().join("missing.txt");
    assert_eq!(code(wwm(&["build", "--input", s(&missing), "--vocab", &vocab(), "--seg-mode", "char", "--out", s(&out)])), 3);

    let bad_vocab = dir.path().join("vocab.txt");
    fs::write(&bad_vocab, "[PAD]\n[UNK]\n的\n的\n").unwrap();
    let o = wwm(&["build", "--input", s(&corpus), "--vocab", s(&bad_vocab), "--seg-mode", "char", "--out", s(&out)]);
    assert_eq!(code(o), 2);

    let bad_utf8 = dir.path().join("bad.txt");
    fs::write(&bad_utf8, b"ok\xff\n").unwrap();
    let o = wwm(&["build", "--input", s(&bad_utf8), "--vocab", &vocab(), "--seg-mode", "char", "--out", s(&out)]);
    assert_eq!(code(o.clone()), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte offset 2"));

    let o = wwm(&["build", "--input", s(&corpus), "--vocab", &vocab(), "--seg-mode", "char", "--out", s(&out)]);
    assert!(o.status.success());
    let mut bytes = fs::read(&out).unwrap();
    bytes.truncate(bytes.len() - 20);
    let truncated = dir.path().join("t.jsonl");
    fs::write(&truncated, bytes).unwrap();
    let o = wwm(&["stats", "--records", s(&truncated), "--vocab", &vocab()]);
    assert_eq!(code(o.clone()), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn log_level_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let out = dir.path().join("r.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_wwm"))
        .env("WWM_LOG", "info")
        .args(["build", "--input", s(&corpus), "--vocab", &vocab(), "--seg-mode", "char", "--out", s(&out)])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("instances written"));
}
