//! Data-directory layout and its manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use surgery_core::corpus::{read_documents, read_mcqa, Document, MCQAItem};
use surgery_core::train::hex_string;

pub const CORPUS_FILES: [(&str, &str); 4] = [
    ("unl_problematic", "unl_problematic.jsonl"),
    ("unl_outdated", "unl_outdated.jsonl"),
    ("upd", "upd.jsonl"),
    ("rtn", "rtn.jsonl"),
];

pub const BENCHMARK_FILES: [(&str, &str); 3] = [
    ("unlearn", "mcqa_unlearn.jsonl"),
    ("update", "mcqa_update.jsonl"),
    ("retain", "mcqa_retain.jsonl"),
];

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub file: String,
    pub documents: usize,
    pub tokens: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub file: String,
    pub items: usize,
    pub validation: usize,
    pub test: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub corpora: BTreeMap<String, CorpusEntry>,
    pub benchmarks: BTreeMap<String, BenchmarkEntry>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::anyhow!("cannot hash {}: {e}", path.display()))?;
    Ok(hex_string(&Sha256::digest(&bytes)))
}

/// Typed access to a generated data directory.
pub struct DataDir {
    pub root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn corpus_path(&self, key: &str) -> PathBuf {
        let file = CORPUS_FILES
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, f)| *f)
            .expect("known corpus key");
        self.root.join(file)
    }

    pub fn benchmark_path(&self, key: &str) -> PathBuf {
        let file = BENCHMARK_FILES
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, f)| *f)
            .expect("known benchmark key");
        self.root.join(file)
    }

    pub fn load_corpus(&self, key: &str) -> anyhow::Result<Vec<Document>> {
        Ok(read_documents(&self.corpus_path(key))?)
    }

    /// Both unlearn splits, problematic first.
    pub fn load_unlearn(&self) -> anyhow::Result<Vec<Document>> {
        let mut docs = self.load_corpus("unl_problematic")?;
        docs.extend(self.load_corpus("unl_outdated")?);
        Ok(docs)
    }

    pub fn load_benchmark(&self, key: &str) -> anyhow::Result<Vec<MCQAItem>> {
        Ok(read_mcqa(&self.benchmark_path(key))?)
    }

    pub fn manifest(&self) -> anyhow::Result<Manifest> {
        Manifest::read(&self.root)
    }
}
