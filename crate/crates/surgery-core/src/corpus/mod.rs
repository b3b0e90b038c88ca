//! Deterministic synthetic corpora and benchmarks.
//!
//! Everything here is a pure function of (seed, configuration): the entity
//! set, the three training corpora, and the three MCQA benchmarks. The
//! update corpus re-renders the outdated entities with conflicting facts,
//! and the retain corpus never mentions an unlearn or update subject.

mod entities;
mod mcqa;
mod render;
pub mod tokenizer;
mod vocab;

pub use entities::{
    generate_entities, Attributes, Cohort, Entity, EntitySet, Slot, Variant, ALL_SLOTS,
    MUTABLE_SLOTS,
};
pub use mcqa::{generate_mcqa, BenchmarkTag, MCQAItem, Split};
pub use render::{build_retain_corpus, render_biography};
pub use tokenizer::{detokenize, tokenize};

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusTag {
    UnlProblematic,
    UnlOutdated,
    Upd,
    Rtn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entity_id: Option<u32>,
    pub corpus_tag: CorpusTag,
    pub text: String,
    #[serde(skip)]
    pub token_ids: Vec<u32>,
}

impl Document {
    pub fn new(id: String, entity_id: Option<u32>, corpus_tag: CorpusTag, text: String) -> Self {
        let token_ids = tokenize(&text);
        Document {
            id,
            entity_id,
            corpus_tag,
            text,
            token_ids,
        }
    }
}

/// The three tokenized corpora, with the unlearn set kept in its two splits.
#[derive(Debug, Clone)]
pub struct DatasetTriple {
    pub unl_problematic: Vec<Document>,
    pub unl_outdated: Vec<Document>,
    pub upd: Vec<Document>,
    pub rtn: Vec<Document>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub unl_problematic: usize,
    pub unl_outdated: usize,
    pub upd: usize,
    pub rtn: usize,
}

impl TokenCounts {
    pub fn unl_total(&self) -> usize {
        self.unl_problematic + self.unl_outdated
    }
}

impl DatasetTriple {
    /// Both unlearn splits, problematic first.
    pub fn unl_all(&self) -> Vec<&Document> {
        self.unl_problematic
            .iter()
            .chain(self.unl_outdated.iter())
            .collect()
    }

    pub fn token_counts(&self) -> TokenCounts {
        let count = |docs: &[Document]| docs.iter().map(|d| d.token_ids.len()).sum();
        TokenCounts {
            unl_problematic: count(&self.unl_problematic),
            unl_outdated: count(&self.unl_outdated),
            upd: count(&self.upd),
            rtn: count(&self.rtn),
        }
    }

    /// Structural invariants: same-subject linkage between the outdated and
    /// update corpora, retain/unlearn subject disjointness, and token
    /// consistency with the tokenizer.
    pub fn validate(&self, entities: &EntitySet) -> Result<()> {
        let outdated_ids: Vec<u32> = self
            .unl_outdated
            .iter()
            .filter_map(|d| d.entity_id)
            .collect();
        for doc in &self.upd {
            let id = doc.entity_id.ok_or_else(|| {
                Error::Contract(format!("update document {} has no entity", doc.id))
            })?;
            if !outdated_ids.contains(&id) {
                return Err(Error::Contract(format!(
                    "update document {} subject {id} not in the outdated split",
                    doc.id
                )));
            }
        }
        if self.upd.len() != self.unl_outdated.len() {
            return Err(Error::Contract(format!(
                "update/outdated bijection broken: {} vs {}",
                self.upd.len(),
                self.unl_outdated.len()
            )));
        }

        let unlearn_names: Vec<&str> = entities
            .unlearn_entities()
            .iter()
            .map(|e| e.name.as_str())
            .collect();
        for doc in &self.rtn {
            for name in &unlearn_names {
                if doc.text.contains(name) {
                    return Err(Error::Contract(format!(
                        "retain document {} mentions unlearn subject {name}",
                        doc.id
                    )));
                }
            }
        }

        for doc in self
            .unl_problematic
            .iter()
            .chain(&self.unl_outdated)
            .chain(&self.upd)
            .chain(&self.rtn)
        {
            if doc.text.is_empty() || doc.token_ids != tokenize(&doc.text) {
                return Err(Error::Contract(format!(
                    "document {} token ids inconsistent with its text",
                    doc.id
                )));
            }
        }
        Ok(())
    }
}

/// Generation knobs for the corpora and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub seed: u64,
    pub n_problematic: usize,
    pub n_outdated: usize,
    pub n_retain_pool: usize,
    pub unl_target_tokens: usize,
    pub upd_target_tokens: usize,
    pub rtn_target_tokens: usize,
    pub mcqa_per_entity: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            seed: 0,
            n_problematic: 119,
            n_outdated: 119,
            n_retain_pool: 160,
            unl_target_tokens: 100_000,
            upd_target_tokens: 80_000,
            rtn_target_tokens: 1_000_000,
            mcqa_per_entity: 10,
        }
    }
}

fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    x ^= x >> 30;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// Builds the full entity set and dataset triple for a configuration.
pub fn generate_dataset(cfg: &DataConfig) -> Result<(EntitySet, DatasetTriple)> {
    let entities = generate_entities(
        cfg.seed,
        cfg.n_problematic,
        cfg.n_outdated,
        cfg.n_retain_pool,
    )?;

    let n_unl = cfg.n_problematic + cfg.n_outdated;
    let per_unl = cfg.unl_target_tokens / n_unl.max(1);
    let per_upd = cfg.upd_target_tokens / cfg.n_outdated.max(1);

    let mut unl_problematic = Vec::new();
    let mut unl_outdated = Vec::new();
    let mut upd = Vec::new();
    for e in &entities.entities {
        match e.cohort {
            Cohort::Problematic => unl_problematic.push(render_biography(
                e,
                Variant::Original,
                mix_seed(cfg.seed, 1, e.id as u64),
                per_unl,
            )?),
            Cohort::Outdated => {
                unl_outdated.push(render_biography(
                    e,
                    Variant::Original,
                    mix_seed(cfg.seed, 2, e.id as u64),
                    per_unl,
                )?);
                upd.push(render_biography(
                    e,
                    Variant::Updated,
                    mix_seed(cfg.seed, 3, e.id as u64),
                    per_upd,
                )?);
            }
            Cohort::RetainPool => {}
        }
    }

    let retain_refs = entities.cohort(Cohort::RetainPool);
    let rtn = build_retain_corpus(
        mix_seed(cfg.seed, 4, 0),
        cfg.rtn_target_tokens,
        &retain_refs,
    )?;

    let triple = DatasetTriple {
        unl_problematic,
        unl_outdated,
        upd,
        rtn,
    };
    triple.validate(&entities)?;
    Ok((entities, triple))
}

/// The three MCQA benchmarks: unlearn (both splits, original facts), update
/// (outdated subjects, replacement facts), retain (retain-pool subjects).
#[derive(Debug, Clone)]
pub struct Benchmarks {
    pub unlearn: Vec<MCQAItem>,
    pub update: Vec<MCQAItem>,
    pub retain: Vec<MCQAItem>,
}

impl Benchmarks {
    pub fn get(&self, tag: BenchmarkTag) -> &[MCQAItem] {
        match tag {
            BenchmarkTag::Unlearn => &self.unlearn,
            BenchmarkTag::Update => &self.update,
            BenchmarkTag::Retain => &self.retain,
        }
    }
}

pub fn generate_benchmarks(
    entities: &EntitySet,
    n_per_entity: usize,
    seed: u64,
) -> Result<Benchmarks> {
    let unlearn = generate_mcqa(
        &entities.unlearn_entities(),
        Variant::Original,
        n_per_entity,
        mix_seed(seed, 10, 0),
        BenchmarkTag::Unlearn,
    )?;
    let update = generate_mcqa(
        &entities.cohort(Cohort::Outdated),
        Variant::Updated,
        n_per_entity,
        mix_seed(seed, 11, 0),
        BenchmarkTag::Update,
    )?;
    let retain = generate_mcqa(
        &entities.cohort(Cohort::RetainPool),
        Variant::Original,
        n_per_entity,
        mix_seed(seed, 12, 0),
        BenchmarkTag::Retain,
    )?;
    Ok(Benchmarks {
        unlearn,
        update,
        retain,
    })
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for doc in docs {
        buf.push_str(&serde_json::to_string(doc).expect("document serializes"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: Document = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", ln + 1),
        })?;
        doc.token_ids = tokenize(&doc.text);
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_mcqa(path: &Path, items: &[MCQAItem]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item).expect("item serializes"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_mcqa(path: &Path) -> Result<Vec<MCQAItem>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: MCQAItem = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", ln + 1),
        })?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests;
