use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"corpus = "data/corpus.jsonl"
questions = "data/questions.jsonl"
lemmas = "data/lemmas.tsv"
synonyms = "data/synonyms.tsv"
gazetteer = "data/gazetteer.txt"
report = "report.tsv"
folds = 10
seed = 5
lda_iterations = 50
generations = 20
"#;

fn parafuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parafuse"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = parafuse(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Synthetic data plus a config file; built when `build` is set.
fn workspace(build: bool) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    ok(
        dir.path(),
        &["--config", "run.toml", "gen-synthetic", "--paragraphs", "100", "--n-questions", "20", "--out", "data"],
    );
    if build {
        ok(dir.path(), &["--config", "run.toml", "build"]);
    }
    dir
}

fn artifact_bytes(dir: &Path) -> Vec<Vec<u8>> {
    let mut names: Vec<_> = ["index", "models"]
        .iter()
        .flat_map(|d| fs::read_dir(dir.join(d)).unwrap().map(|e| e.unwrap().path()))
        .collect();
    names.sort();
    names.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn first_question(dir: &Path) -> (String, String) {
    let line = fs::read_to_string(dir.join("data/questions.jsonl")).unwrap();
    let first = line.lines().next().unwrap();
    let text = first.split("\"text\":\"").nth(1).unwrap().split('"').next().unwrap();
    let gold = first.split("\"gold\":[\"").nth(1).unwrap().split('"').next().unwrap();
    (text.to_string(), gold.to_string())
}

#[test]
fn gen_synthetic_writes_dataset() {
    let dir = workspace(false);
    for f in ["corpus.jsonl", "questions.jsonl", "lemmas.tsv", "synonyms.tsv", "gazetteer.txt", "stoplist.txt"] {
        assert!(dir.path().join("data").join(f).exists(), "{f}");
    }
    let corpus = fs::read_to_string(dir.path().join("data/corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 100);
}

#[test]
fn build_writes_six_reproducible_artifacts() {
    let dir = workspace(true);
    let first = artifact_bytes(dir.path());
    assert_eq!(first.len(), 6);
    ok(dir.path(), &["--config", "run.toml", "build"]);
    assert_eq!(artifact_bytes(dir.path()), first);
}

#[test]
fn missing_lexicon_is_a_user_error_naming_the_path() {
    let dir = workspace(false);
    let out = parafuse(dir.path(), &["--config", "run.toml", "build", "--lemmas", "missing/lemmas.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing/lemmas.tsv"), "{err}");
    assert!(err.contains("lemma lexicon"), "{err}");
}

#[test]
fn single_paragraph_corpus_builds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.jsonl"),
        "{\"doc_id\":\"d\",\"para_id\":\"d:1\",\"text\":\"Rivers flood valleys.\"}\n",
    )
    .unwrap();
    ok(dir.path(), &["build", "--corpus", "c.jsonl", "--lda-iterations", "10"]);
    let out = ok(dir.path(), &["retrieve", "--corpus", "c.jsonl", "valleys"]);
    assert_eq!(out.lines().nth(1).unwrap().split('\t').nth(1), Some("d:1"));
}

#[test]
fn retrieve_behaviour() {
    let dir = workspace(true);
    let d = dir.path();
    let corpus = fs::read_to_string(d.join("data/corpus.jsonl")).unwrap();
    let line = corpus.lines().nth(17).unwrap();
    let para_id = line.split("\"para_id\":\"").nth(1).unwrap().split('"').next().unwrap();
    let text = line.split("\"text\":\"").nth(1).unwrap().split('"').next().unwrap();

    let out = ok(d, &["--config", "run.toml", "retrieve", text]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("rank\tpara_id\tscore\ttext"));
    let top: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(top[0], "1");
    assert_eq!(top[1], para_id);
    assert!(top[3].chars().count() <= 120);

    let out = parafuse(d, &["--config", "run.toml", "retrieve", "what is the"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
    assert!(!out.stderr.is_empty());

    fs::write(d.join("bad.tsv"), "q_baseline\t0.5\n").unwrap();
    let out = parafuse(d, &["--config", "run.toml", "retrieve", "--weights", "bad.tsv", text]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tune_and_evaluate() {
    let dir = workspace(true);
    let d = dir.path();
    let out = ok(d, &["--config", "run.toml", "tune"]);
    assert!(out.starts_with("mean_test_mrr\tmean_uniform_mrr\n"));
    let report = fs::read_to_string(d.join("report.tsv")).unwrap();
    let rounds: Vec<&str> = report
        .lines()
        .skip_while(|l| *l != "# rounds")
        .skip(2)
        .take_while(|l| !l.is_empty())
        .collect();
    assert_eq!(rounds.len(), 10);
    let weights = fs::read(d.join("weights.tsv")).unwrap();
    ok(d, &["--config", "run.toml", "tune"]);
    assert_eq!(fs::read(d.join("weights.tsv")).unwrap(), weights);

    let tuned = ok(d, &["--config", "run.toml", "--weights", "weights.tsv", "evaluate"]);
    assert!(tuned.starts_with("mrr\n"));
    let mrr: f64 = tuned.lines().nth(1).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&mrr));

    let missing = parafuse(d, &["--config", "run.toml", "--weights", "nope.tsv", "evaluate"]);
    assert_eq!(missing.status.code(), Some(2));
    let untuned = parafuse(d, &["evaluate", "--corpus", "data/corpus.jsonl", "--questions", "data/questions.jsonl",
        "--lemmas", "data/lemmas.tsv", "--synonyms", "data/synonyms.tsv", "--gazetteer", "data/gazetteer.txt"]);
    let uniform_file: String = parafuse::WeightVector::uniform().to_tsv();
    fs::write(d.join("uniform.tsv"), uniform_file).unwrap();
    let with_file = ok(d, &["--config", "run.toml", "--weights", "uniform.tsv", "evaluate"]);
    assert_eq!(String::from_utf8(untuned.stdout).unwrap(), with_file);
}

#[test]
fn fold_count_must_divide_questions() {
    let dir = workspace(true);
    let out = parafuse(dir.path(), &["--config", "run.toml", "--folds", "3", "tune"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("folds"));
}

#[test]
fn evaluate_extremes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("c.jsonl"),
        "{\"doc_id\":\"d\",\"para_id\":\"d:1\",\"text\":\"The river flooded the northern valley in spring.\"}\n\
         {\"doc_id\":\"d\",\"para_id\":\"d:2\",\"text\":\"Parliament approved the budget for roads and bridges.\"}\n\
         {\"doc_id\":\"d\",\"para_id\":\"d:3\",\"text\":\"Farmers in the valley grow apples and pears.\"}\n",
    )
    .unwrap();
    fs::write(
        d.join("perfect.jsonl"),
        "{\"q_id\":\"a\",\"text\":\"Which valley did the river flood in spring?\",\"gold\":[\"d:1\"]}\n\
         {\"q_id\":\"b\",\"text\":\"What did Parliament approve for roads?\",\"gold\":[\"d:2\"]}\n",
    )
    .unwrap();
    fs::write(
        d.join("absent.jsonl"),
        "{\"q_id\":\"c\",\"text\":\"Who owns the castle tower?\",\"gold\":[\"d:3\"]}\n",
    )
    .unwrap();
    ok(d, &["build", "--corpus", "c.jsonl", "--lda-iterations", "20"]);
    let perfect = ok(d, &["evaluate", "--corpus", "c.jsonl", "--questions", "perfect.jsonl"]);
    assert_eq!(perfect, "mrr\n1.0\n");
    let absent = ok(d, &["evaluate", "--corpus", "c.jsonl", "--questions", "absent.jsonl"]);
    assert_eq!(absent, "mrr\n0.0\n");
}

#[test]
fn flags_override_config_file() {
    let dir = workspace(false);
    let out = parafuse(dir.path(), &["--config", "run.toml", "--corpus", "elsewhere.jsonl", "build"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elsewhere.jsonl"));
    fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    let out = parafuse(dir.path(), &["--config", "bad.toml", "build"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn first_question_finds_its_gold() {
    let dir = workspace(true);
    let (text, gold) = first_question(dir.path());
    let out = ok(dir.path(), &["--config", "run.toml", "retrieve", &text]);
    assert!(out.lines().skip(1).take(10).any(|l| l.split('\t').nth(1) == Some(gold.as_str())), "{out}");
}
