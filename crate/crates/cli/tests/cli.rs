//! End-to-end tests of the command-line surface. Every test drives the real
//! binary through temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biscale"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary failed to launch");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary failed to launch");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a small synthetic corpus and returns (src, tgt) paths.
fn synth_corpus(dir: &Path, sentences: usize, seed: u64) -> (PathBuf, PathBuf) {
    let src = dir.join("corpus.src");
    let tgt = dir.join("corpus.tgt");
    run_ok(bin().args([
        "synth-data",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--sentences",
        &sentences.to_string(),
        "--seed",
        &seed.to_string(),
    ]));
    (src, tgt)
}

const TINY_DIMS: [&str; 12] = [
    "--embed-dim", "6", "--encoder-dim", "6", "--word-dim", "10", "--chunk-dim", "10",
    "--chunk-embed-dim", "6", "--attention-dim", "8",
];

fn train(dir: &Path, src: &Path, tgt: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("run");
    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    cmd.args(TINY_DIMS);
    cmd.args(["--epochs", "2", "--batch-size", "8", "--seed", "5"]);
    cmd.args(extra);
    run_ok(&mut cmd);
    out
}

#[test]
fn train_translate_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 40, 11);
    let run = train(tmp.path(), &src, &tgt, &[]);

    let ckpt = run.join("model.ckpt");
    assert!(ckpt.is_file());
    assert!(run.join("effective-config.txt").is_file());
    let log = fs::read_to_string(run.join("train.log")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch\tloss\tloss_word\tloss_tag\tloss_boundary\tgrad_norm"
    );
    assert_eq!(lines.count(), 2);

    let hyp = tmp.path().join("hyp.txt");
    let chunked = tmp.path().join("hyp.chunked");
    run_ok(bin().args([
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        src.to_str().unwrap(),
        "--output",
        hyp.to_str().unwrap(),
        "--beam",
        "2",
        "--max-len",
        "25",
        "--dump-boundaries",
        chunked.to_str().unwrap(),
    ]));
    let hyp_body = fs::read_to_string(&hyp).unwrap();
    assert_eq!(hyp_body.lines().count(), 40);
    let chunk_body = fs::read_to_string(&chunked).unwrap();
    assert_eq!(chunk_body.lines().count(), 40);
    // Predicted chunkings serialize with tags, e.g. "(T0 a b) (T2 c)".
    assert!(chunk_body.lines().any(|l| l.starts_with('(')));

    // Hypotheses evaluated against themselves are a perfect translation.
    let out = run_ok(bin().args([
        "evaluate",
        "--hyp",
        hyp.to_str().unwrap(),
        "--ref",
        hyp.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("bleu\t100.000000"), "got: {text}");
    assert!(text.contains("sentences\t40"));
}

#[test]
fn evaluate_reports_model_accuracies_and_json_matches_text() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 12);
    let run = train(tmp.path(), &src, &tgt, &[]);
    let ckpt = run.join("model.ckpt");

    // Plain-text reference for BLEU: strip the annotation from the target.
    let plain = tmp.path().join("ref.txt");
    let stripped: String = fs::read_to_string(&tgt)
        .unwrap()
        .lines()
        .map(|l| {
            let words: Vec<&str> = l
                .split_whitespace()
                .filter(|w| !w.starts_with('('))
                .map(|w| w.trim_end_matches(')'))
                .collect();
            words.join(" ") + "\n"
        })
        .collect();
    fs::write(&plain, &stripped).unwrap();

    let args = |json: bool| {
        let mut v = vec![
            "evaluate".to_string(),
            "--hyp".into(),
            plain.to_str().unwrap().into(),
            "--ref".into(),
            plain.to_str().unwrap().into(),
            "--checkpoint".into(),
            ckpt.to_str().unwrap().into(),
            "--src".into(),
            src.to_str().unwrap().into(),
            "--annotated-ref".into(),
            tgt.to_str().unwrap().into(),
        ];
        if json {
            v.push("--json".into());
        }
        v
    };
    let text = String::from_utf8_lossy(&run_ok(bin().args(args(false))).stdout).into_owned();
    let json = String::from_utf8_lossy(&run_ok(bin().args(args(true))).stdout).into_owned();

    assert!(text.contains("boundary_accuracy\t"), "got: {text}");
    assert!(text.contains("tag_accuracy\t"), "got: {text}");
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["bleu"], 100.0);
    for key in ["boundary_accuracy", "tag_accuracy"] {
        let from_json = parsed[key].as_f64().unwrap();
        let line = text
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("{key} missing in text report"));
        let from_text: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert_eq!(from_json, from_text);
    }
}

#[test]
fn greedy_flag_equals_beam_one_argmax() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 13);
    let run = train(tmp.path(), &src, &tgt, &[]);
    let ckpt = run.join("model.ckpt");

    let translate = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut cmd = bin();
        cmd.args([
            "translate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--input",
            src.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ]);
        cmd.args(extra);
        run_ok(&mut cmd);
        fs::read(out).unwrap()
    };
    let greedy = translate("greedy.txt", &["--greedy"]);
    let beam1 = translate("beam1.txt", &["--beam", "1", "--gate-mode", "argmax"]);
    assert_eq!(greedy, beam1);
}

#[test]
fn empty_input_translates_to_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 14);
    let run = train(tmp.path(), &src, &tgt, &[]);

    let input = tmp.path().join("empty.txt");
    fs::write(&input, "").unwrap();
    let output = tmp.path().join("out.txt");
    run_ok(bin().args([
        "translate",
        "--checkpoint",
        run.join("model.ckpt").to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]));
    assert_eq!(fs::read_to_string(output).unwrap(), "");
}

#[test]
fn over_length_pairs_are_counted_as_filtered() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 15);

    // One absurdly long source sentence on top of the normal corpus.
    let long = ["tok"; 60].join(" ");
    fs::write(&src, format!("{}{long}\n", fs::read_to_string(&src).unwrap())).unwrap();
    fs::write(
        &tgt,
        format!("{}(T0 x y)\n", fs::read_to_string(&tgt).unwrap()),
    )
    .unwrap();

    let out = tmp.path().join("run");
    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "1",
        "--batch-size",
        "8",
    ]);
    cmd.args(TINY_DIMS);
    let stderr = String::from_utf8_lossy(&run_ok(&mut cmd).stderr).into_owned();
    assert!(
        stderr.contains("loaded 30 pairs, filtered 1"),
        "got: {stderr}"
    );
}

#[test]
fn jsonl_corpus_trains() {
    let tmp = tempfile::tempdir().unwrap();
    let jsonl = tmp.path().join("corpus.jsonl");
    run_ok(bin().args([
        "synth-data",
        "--src",
        tmp.path().join("s").to_str().unwrap(),
        "--tgt",
        tmp.path().join("t").to_str().unwrap(),
        "--jsonl",
        jsonl.to_str().unwrap(),
        "--sentences",
        "30",
        "--seed",
        "16",
    ]));

    let out = tmp.path().join("run");
    let mut cmd = bin();
    cmd.args([
        "train",
        "--data",
        jsonl.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "1",
        "--batch-size",
        "8",
    ]);
    cmd.args(TINY_DIMS);
    run_ok(&mut cmd);
    assert!(out.join("model.ckpt").is_file());
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 17);

    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# comment\nepochs = 3\nbatch_size = 4\nseed = 9\n").unwrap();

    let out = tmp.path().join("run");
    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    cmd.args(TINY_DIMS);
    run_ok(&mut cmd);

    // Flag beat the file for epochs; file settings survive for the rest.
    let log = fs::read_to_string(out.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 2, "header plus exactly one epoch");
    let snapshot = fs::read_to_string(out.join("effective-config.txt")).unwrap();
    assert!(snapshot.contains("epochs = 1"), "got: {snapshot}");
    assert!(snapshot.contains("batch_size = 4"));
    assert!(snapshot.contains("seed = 9"));

    // The snapshot reloads as a config file.
    let rerun = tmp.path().join("rerun");
    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        rerun.to_str().unwrap(),
        "--config",
        out.join("effective-config.txt").to_str().unwrap(),
    ]);
    run_ok(&mut cmd);
    assert_eq!(
        fs::read(out.join("train.log")).unwrap(),
        fs::read(rerun.join("train.log")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 18);
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "epochz = 3\n").unwrap();
    let stderr = run_err(bin().args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]));
    assert!(stderr.contains("unknown config key"), "got: {stderr}");
    assert!(stderr.contains("bad.cfg:1"), "got: {stderr}");
}

#[test]
fn biscale_training_without_annotations_names_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("plain.src");
    let tgt = tmp.path().join("plain.tgt");
    fs::write(&src, "a b c\nd e\n").unwrap();
    fs::write(&tgt, "x y\nz w v\n").unwrap();

    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    cmd.args(TINY_DIMS);
    let stderr = run_err(&mut cmd);
    assert!(stderr.contains("annotation"), "got: {stderr}");
    assert!(stderr.contains("baseline"), "got: {stderr}");

    // The same corpus trains fine as the baseline.
    let mut cmd = bin();
    cmd.args([
        "train",
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
        "--mode",
        "baseline",
        "--epochs",
        "1",
    ]);
    cmd.args(TINY_DIMS);
    run_ok(&mut cmd);
}

#[test]
fn attention_dumps_and_alignment_export_agree_on_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 19);
    let run = train(tmp.path(), &src, &tgt, &[]);
    let ckpt = run.join("model.ckpt");

    let dump_dir = tmp.path().join("attn");
    run_ok(bin().args([
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        src.to_str().unwrap(),
        "--output",
        tmp.path().join("hyp.txt").to_str().unwrap(),
        "--greedy",
        "--dump-attention",
        dump_dir.to_str().unwrap(),
    ]));
    let dumped: Vec<_> = fs::read_dir(&dump_dir).unwrap().collect();
    assert_eq!(dumped.len(), 30, "one heatmap per sentence");

    let align_dir = tmp.path().join("align");
    run_ok(bin().args([
        "export-align",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
        "--out",
        align_dir.to_str().unwrap(),
    ]));

    let first_src = fs::read_to_string(&src).unwrap().lines().next().unwrap().to_string();
    let n_src = first_src.split_whitespace().count();
    let body = fs::read_to_string(align_dir.join("sent-0001.tsv")).unwrap();
    let mut lines = body.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, format!("target\\source\t{}", first_src.replace(' ', "\t")));
    for line in lines {
        // token + one weight per source position
        assert_eq!(line.split('\t').count(), n_src + 1, "bad row: {line}");
    }
}

#[test]
fn translate_of_mismatched_checkpoint_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, tgt) = synth_corpus(tmp.path(), 30, 20);
    let run = train(tmp.path(), &src, &tgt, &[]);

    // Corrupt one tensor's shape header in the checkpoint.
    let ckpt = run.join("model.ckpt");
    let body = fs::read_to_string(&ckpt).unwrap();
    let broken = body.replacen("\"shape\":[", "\"shape\":[1,", 1);
    assert_ne!(body, broken);
    let bad = tmp.path().join("bad.ckpt");
    fs::write(&bad, broken).unwrap();

    let stderr = run_err(bin().args([
        "translate",
        "--checkpoint",
        bad.to_str().unwrap(),
        "--input",
        src.to_str().unwrap(),
        "--output",
        tmp.path().join("hyp.txt").to_str().unwrap(),
    ]));
    assert!(stderr.contains("src_embed"), "got: {stderr}");
}
