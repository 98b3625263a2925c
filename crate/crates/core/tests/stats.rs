mod common;

use common::{lexicon_words, reference_vocab};
use wwm_core::record::{write_records, write_sidecar_entry};
use wwm_core::synthetic::{generate, join_plain, SyntheticConfig};
use wwm_core::{
    analyze, build_all, prepare_corpus, AnalyzeOptions, BuildConfig, BuiltInstance, Lexicon, RecordFormat,
    RecordHeader, RecordReader, SidecarReader, Segmenter, Tokenizer,
};

fn build(seg: &Segmenter, len: usize, docs: usize) -> (BuildConfig, Vec<BuiltInstance>) {
    let vocab = reference_vocab();
    let words = lexicon_words(5000);
    let cfg = SyntheticConfig { documents: docs, seed: 99, ..Default::default() };
    let lines: Vec<Vec<String>> = generate(&words, &cfg)
        .iter()
        .map(|d| d.iter().map(|s| join_plain(s)).collect())
        .collect();
    let (prepared, _) = prepare_corpus(&lines, &Tokenizer::new(vocab), seg);
    let build_cfg = BuildConfig::for_length(len);
    let mut out = Vec::new();
    build_all(&prepared, &build_cfg, vocab, 32, |b| {
        out.extend(b);
        Ok(())
    })
    .unwrap();
    (build_cfg, out)
}

fn files(cfg: &BuildConfig, built: &[BuiltInstance], format: RecordFormat) -> (Vec<u8>, Vec<u8>) {
    let header = RecordHeader::new(cfg.max_seq_len, cfg.masking.max_predictions_per_seq, reference_vocab());
    let instances: Vec<_> = built.iter().map(|b| b.instance.clone()).collect();
    let mut records = Vec::new();
    write_records(&instances, &mut records, format, header).unwrap();
    let mut sidecar = Vec::new();
    for b in built {
        write_sidecar_entry(&mut sidecar, &b.sidecar).unwrap();
    }
    (records, sidecar)
}

fn fmm() -> Segmenter {
    Segmenter::Fmm(Lexicon::from_words(lexicon_words(40_000)).unwrap())
}

#[test]
fn report_matches_direct_count() {
    let vocab = reference_vocab();
    let (cfg, built) = build(&fmm(), 128, 300);
    let (records, sidecar) = files(&cfg, &built, RecordFormat::Binary);
    let report = analyze(
        RecordReader::new(&records[..]).unwrap(),
        vocab,
        Some(SidecarReader::new(&sidecar[..])),
        &AnalyzeOptions::default(),
    )
    .unwrap();

    let masked: usize = built.iter().map(|b| b.instance.num_predictions()).sum();
    let maskable: usize = built.iter().map(|b| b.instance.unpadded_len() - 3).sum();
    let mask_actions: usize = built.iter().map(|b| b.sidecar.actions.matches('M').count()).sum();
    let random_next = built.iter().filter(|b| b.instance.next_sentence_label == 1).count();
    assert_eq!(report.instance_count as usize, built.len());
    assert_eq!(report.masked_positions as usize, masked);
    assert_eq!(report.maskable_positions as usize, maskable);
    assert_eq!(report.action_counts.mask as usize, mask_actions);
    assert_eq!(report.nsp_random_fraction, random_next as f64 / built.len() as f64);
    assert_eq!(report.atomicity_violations, Some(0));
    assert_eq!(report.sidecar_inconsistencies, Some(0));
    assert_eq!(report.invalid_instances, 0);
    assert_eq!(report.length_histogram.iter().map(|b| b.count).sum::<u64>(), report.instance_count);
    assert!(report.script_counts.latin > 0 && report.script_counts.cjk > 0);
    for r in [report.masked_position_rate, report.unk_rate, report.nsp_random_fraction] {
        assert!((0.0..=1.0).contains(&r));
    }
}

#[test]
fn report_is_deterministic_and_format_independent() {
    let vocab = reference_vocab();
    let (cfg, built) = build(&fmm(), 64, 100);
    let (json, sidecar) = files(&cfg, &built, RecordFormat::Jsonl);
    let (bin, _) = files(&cfg, &built, RecordFormat::Binary);
    let run = |bytes: &[u8]| {
        let r = analyze(
            RecordReader::new(bytes).unwrap(),
            vocab,
            Some(SidecarReader::new(&sidecar[..])),
            &AnalyzeOptions { min_unpadded_len: 20 },
        )
        .unwrap();
        serde_json::to_string(&r).unwrap()
    };
    let first = run(&json);
    assert_eq!(first, run(&json));
    assert_eq!(first, run(&bin));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    assert_eq!(first, pool.install(|| run(&json)));
}

#[test]
fn records_only_estimate_counts_random_equal_to_original_as_keep() {
    let vocab = reference_vocab();
    let (cfg, built) = build(&fmm(), 128, 200);
    let (records, sidecar) = files(&cfg, &built, RecordFormat::Jsonl);
    let none = analyze(RecordReader::new(&records[..]).unwrap(), vocab, None::<SidecarReader<&[u8]>>, &AnalyzeOptions::default()).unwrap();
    let with = analyze(
        RecordReader::new(&records[..]).unwrap(),
        vocab,
        Some(SidecarReader::new(&sidecar[..])),
        &AnalyzeOptions::default(),
    )
    .unwrap();
    assert_eq!(none.action_source, "records");
    assert_eq!(none.atomicity_violations, None);
    assert_eq!(none.action_counts.mask, with.action_counts.mask);
    assert!(none.action_counts.random <= with.action_counts.random);
    assert_eq!(
        none.action_counts.random + none.action_counts.keep,
        with.action_counts.random + with.action_counts.keep
    );
}

#[test]
fn corrupted_sidecar_is_flagged() {
    let vocab = reference_vocab();
    let (cfg, mut built) = build(&fmm(), 128, 20);
    let target = built.iter().position(|b| !b.sidecar.units.is_empty() && b.instance.num_predictions() > 0).unwrap();
    // Claim a unit that straddles a masked and an unmasked position.
    let p = built[target].instance.masked_lm_positions[0] as u32;
    let unit = if built[target].instance.masked_lm_positions[..built[target].instance.num_predictions()].contains(&(p as i32 + 1)) {
        [p - 1, p + 1]
    } else {
        [p, p + 2]
    };
    built[target].sidecar.units.push(unit);
    let (records, sidecar) = files(&cfg, &built, RecordFormat::Jsonl);
    let report = analyze(
        RecordReader::new(&records[..]).unwrap(),
        vocab,
        Some(SidecarReader::new(&sidecar[..])),
        &AnalyzeOptions::default(),
    )
    .unwrap();
    assert_eq!(report.atomicity_violations, Some(1));
}
