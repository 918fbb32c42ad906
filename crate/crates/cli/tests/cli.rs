use std::path::{Path, PathBuf};

use cvsc::lexer::TokenTable;
use cvsc::nn::{save_model, Model, ModelConfig};
use cvsc_cli::{run_pipeline, EXIT_ERROR, EXIT_FINDINGS, EXIT_OK};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cvsc(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_pipeline(std::iter::once("cvsc").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn zero_model(dir: &Path) -> PathBuf {
    let path = dir.join("zero.cvsc");
    let model = Model::zeros(ModelConfig::default(), TokenTable::default().fingerprint()).unwrap();
    save_model(&model, &path).unwrap();
    path
}

const SOURCE: &str = "int f(char *s)\n{\n\tchar buf[10];\n\tstrcpy(buf, s);\n\treturn 0;\n}\n\nvoid g(void) { }\n";

#[test]
fn help_and_version_exit_zero() {
    let help = cvsc(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    assert!(help.stdout.contains("scan"));
    assert_eq!(cvsc(&["--version"]).code, EXIT_OK);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cvsc(&[]).code, EXIT_ERROR);
    assert_eq!(cvsc(&["frobnicate"]).code, EXIT_ERROR);
    let missing = cvsc(&["scan", "--model", "m.cvsc"]);
    assert_eq!(missing.code, EXIT_ERROR);
    assert!(!missing.stderr.is_empty());
}

#[test]
fn tokenize_lists_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.c");
    std::fs::write(&file, "x = 10;").unwrap();
    let out = cvsc(&["tokenize", p(&file)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("4\t74\tNUMBER\t10"), "{}", lines[2]);

    let json = cvsc(&["tokenize", p(&file), "--format", "json"]);
    let first: serde_json::Value = serde_json::from_str(json.stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first["lexeme"], "x");
    assert_eq!(first["group"], "IDENTIFIER");

    let encoded = cvsc(&["tokenize", p(&file), "--encoded"]);
    assert_eq!(encoded.stdout.lines().count(), 500);
}

#[test]
fn missing_file_is_an_error() {
    let out = cvsc(&["tokenize", "/nonexistent/x.c"]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stderr.starts_with("error:"));
}

#[test]
fn dataset_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    assert_eq!(cvsc(&["synth", "--n", "6", "--seed", "3", "--out", p(&d("synth.jsonl"))]).code, EXIT_OK);
    let ingest = cvsc(&["ingest", p(&d("synth.jsonl")), "--out", p(&d("ingested.jsonl"))]);
    assert_eq!(ingest.code, EXIT_OK, "{}", ingest.stderr);
    assert_eq!(
        std::fs::read_to_string(d("synth.jsonl")).unwrap(),
        std::fs::read_to_string(d("ingested.jsonl")).unwrap()
    );
    assert_eq!(cvsc(&["dedup", p(&d("synth.jsonl")), "--out", p(&d("dedup.jsonl"))]).code, EXIT_OK);
    let balanced = cvsc(&["balance", p(&d("dedup.jsonl")), "--out", p(&d("bal.jsonl")), "--seed", "3"]);
    assert_eq!(balanced.code, EXIT_OK, "{}", balanced.stderr);
    let split = cvsc(&[
        "split",
        p(&d("bal.jsonl")),
        "--train-out",
        p(&d("train.jsonl")),
        "--test-out",
        p(&d("test.jsonl")),
        "--seed",
        "3",
    ]);
    assert_eq!(split.code, EXIT_OK, "{}", split.stderr);
    let lines = |name: &str| std::fs::read_to_string(d(name)).unwrap().lines().count();
    assert_eq!(lines("train.jsonl") + lines("test.jsonl"), lines("bal.jsonl"));
    assert!(lines("test.jsonl") > 0);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    assert_eq!(cvsc(&["synth", "--n", "2", "--seed", "5", "--out", p(&d("c.jsonl"))]).code, EXIT_OK);
    let train = cvsc(&["train", p(&d("c.jsonl")), "--out", p(&d("m.cvsc")), "--epochs", "1", "--seed", "5"]);
    assert_eq!(train.code, EXIT_OK, "{}", train.stderr);
    assert!(train.stderr.contains("epoch   1"));

    let text = cvsc(&["eval", p(&d("c.jsonl")), "--model", p(&d("m.cvsc"))]);
    assert_eq!(text.code, EXIT_OK, "{}", text.stderr);
    assert!(text.stdout.contains("# BUFFER\nthreshold\tprecision\trecall"));
    assert!(text.stdout.contains("macro accuracy\t"));

    let json = cvsc(&["eval", p(&d("c.jsonl")), "--model", p(&d("m.cvsc")), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert_eq!(v["curves"].as_array().unwrap().len(), 5);
    assert_eq!(v["confusion"]["counts"].as_array().unwrap().len(), 5);
}

#[test]
fn scan_exit_codes_follow_findings() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    std::fs::write(src.join("a.c"), SOURCE).unwrap();
    let model = zero_model(dir.path());

    let quiet = cvsc(&["scan", "--model", p(&model), p(&src)]);
    assert_eq!(quiet.code, EXIT_OK, "{}", quiet.stderr);
    assert!(quiet.stdout.is_empty());
    assert!(quiet.stderr.contains("scanned 1 files (0 skipped), analyzed 2 functions, 0 findings"));

    // A uniform model puts every function on the BUFFER tie-break at 0.2.
    let loud = cvsc(&["scan", "--model", p(&model), "--threshold", "0", "--format", "json", p(&src)]);
    assert_eq!(loud.code, EXIT_FINDINGS, "{}", loud.stderr);
    let findings: Vec<serde_json::Value> = loud.stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(findings.len(), 2);
    assert_eq!(findings[0]["function_name"], "f");
    assert_eq!(findings[0]["label"], "BUFFER");
    assert_eq!(findings[1]["function_name"], "g");
}

#[test]
fn scan_refuses_other_token_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.c"), SOURCE).unwrap();
    let model = zero_model(dir.path());
    let table = TokenTable::default().to_config_string().replace("strcpy", "strcpy_s");
    let table_path = dir.path().join("table.txt");
    std::fs::write(&table_path, table).unwrap();
    let out = cvsc(&["scan", "--model", p(&model), "--token-table", p(&table_path), p(dir.path())]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stderr.contains("error:"), "{}", out.stderr);
}

#[test]
fn bad_threshold_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.c"), SOURCE).unwrap();
    let model = zero_model(dir.path());
    let out = cvsc(&["scan", "--model", p(&model), "--threshold", "1.5", p(dir.path())]);
    assert_eq!(out.code, EXIT_ERROR);
}
