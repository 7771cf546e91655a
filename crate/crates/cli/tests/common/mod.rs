#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const WORDS: &[&str] = &[
    "river", "stone", "quiet", "market", "lantern", "orbit", "velvet", "harbor", "ember", "meadow",
    "copper", "signal", "willow", "thunder", "paper", "garden", "silver", "canyon", "pepper",
    "winter", "marble", "echo", "saddle", "violet",
];

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_styleprobe")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove(styleprobe_url_env())
        .output()
        .expect("spawn styleprobe")
}

pub fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove(styleprobe_url_env());
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn styleprobe")
}

pub fn styleprobe_url_env() -> &'static str {
    "STYLEPROBE_PROVIDER_URL"
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = serde_json::Value>) {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(4..9);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

pub fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..4);
    (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

pub struct Doc {
    pub doc_id: String,
    pub author_id: String,
    pub timestamp: i64,
    pub text: String,
}

/// `authors` authors with `per_author` posts each, in author-major order.
pub fn corpus_docs(authors: usize, per_author: usize, seed: u64) -> Vec<Doc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for a in 0..authors {
        for i in 0..per_author {
            docs.push(Doc {
                doc_id: format!("a{a:03}-{i:03}"),
                author_id: format!("author{a:03}"),
                timestamp: (i * 60) as i64,
                text: text(&mut rng),
            });
        }
    }
    docs
}

pub fn write_corpus(path: &Path, docs: &[Doc]) {
    write_lines(
        path,
        docs.iter()
            .map(|d| json!({"doc_id": d.doc_id, "author_id": d.author_id, "timestamp": d.timestamp, "text": d.text})),
    );
}

/// One pair per document. `reword` picks the paraphrase text.
pub fn write_pairs(path: &Path, docs: &[Doc], reword: impl Fn(usize, &str) -> String) {
    write_lines(
        path,
        docs.iter().enumerate().map(|(i, d)| {
            json!({
                "orig_id": d.doc_id,
                "para_id": format!("{}-p", d.doc_id),
                "orig_text": d.text,
                "para_text": reword(i, &d.text),
                "label": i % 3 != 0,
            })
        }),
    );
}

/// Drop every `k`-th word, shifting by document index.
pub fn drop_words(i: usize, text: &str, k: usize) -> String {
    text.split_whitespace()
        .enumerate()
        .filter(|(j, _)| !(j + i).is_multiple_of(k))
        .map(|(_, w)| w)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_labeled(path: &Path, labels: usize, per_label: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for l in 0..labels {
        for i in 0..per_label {
            lines.push(json!({"doc_id": format!("l{l}-{i:03}"), "labels": [format!("label{l}")], "text": text(&mut rng)}));
        }
    }
    write_lines(path, lines);
}

/// A store mapping every id to the same vector.
pub fn write_constant_store(path: &Path, ids: &[String], dim: usize) {
    write_lines(
        path,
        ids.iter().map(|id| {
            let mut v = vec![0.0; dim];
            v[0] = 1.0;
            json!({"episode_id": id, "vector": v})
        }),
    );
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
