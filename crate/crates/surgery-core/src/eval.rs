//! Likelihood-based MCQA scoring, result tables, and activation profiles.
//!
//! A choice is scored by the length-normalized log-likelihood of its tokens
//! conditioned on the question plus a single newline separator; the highest
//! score wins, ties to the lowest index. Because all three choices answer
//! the same slot, relative scores probe the subject-to-value binding rather
//! than surface form.

use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::{BenchmarkTag, Document, MCQAItem, Split};
use crate::error::{Error, Result};
use crate::model::{forward_on_tape, LeasedParams, ModelParams, Provenance};
use crate::tensor::{GradTape, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerItem {
    pub chosen: u8,
    pub correct: bool,
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub model_tag: Provenance,
    pub benchmark: BenchmarkTag,
    pub split: Split,
    pub accuracy: f64,
    pub n_items: usize,
    pub per_item: Vec<PerItem>,
}

/// Mean log-probability of `choice` tokens given `question` + newline.
/// Overlong questions are truncated from the left; the choice never is.
fn choice_score<T: Scalar>(
    leased: &LeasedParams<T>,
    question: &str,
    choice: &str,
) -> Result<f64> {
    let ctx = leased.config().ctx_len;
    let q_bytes = question.as_bytes();
    let c_bytes = choice.as_bytes();
    if c_bytes.is_empty() {
        return Err(Error::Contract("empty answer choice".into()));
    }
    // Tokens: BOS, question bytes, newline, choice bytes.
    let fixed = 2 + c_bytes.len(); // BOS + separator + choice
    if fixed + 1 > ctx {
        return Err(Error::Length {
            len: fixed + 1,
            min: 3,
            max: ctx,
        });
    }
    let keep = q_bytes.len().min(ctx - fixed);
    let q_tail = &q_bytes[q_bytes.len() - keep..];

    let mut tokens = Vec::with_capacity(fixed + keep);
    tokens.push(crate::model::BOS);
    tokens.extend(q_tail.iter().map(|&b| b as u32));
    tokens.push(b'\n' as u32);
    let choice_start = tokens.len();
    tokens.extend(c_bytes.iter().map(|&b| b as u32));

    let mut tape = GradTape::new();
    let (logits, _) = forward_on_tape(&mut tape, leased, &tokens, false)?;
    let data = logits.value();
    let v = leased.config().vocab_size;

    let mut total = 0.0f64;
    for (i, &tok) in tokens.iter().enumerate().skip(choice_start) {
        let row = &data[(i - 1) * v..i * v];
        let mx = row
            .iter()
            .map(|x| x.as_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = mx
            + row
                .iter()
                .map(|x| (x.as_f64() - mx).exp())
                .sum::<f64>()
                .ln();
        total += row[tok as usize].as_f64() - lse;
    }
    Ok(total / c_bytes.len() as f64)
}

fn choose<T: Scalar>(leased: &LeasedParams<T>, item: &MCQAItem) -> Result<u8> {
    let mut best = 0u8;
    let mut best_score = f64::NEG_INFINITY;
    for (i, choice) in item.choices.iter().enumerate() {
        let score = choice_score(leased, &item.question, choice)?;
        if score > best_score {
            best_score = score;
            best = i as u8;
        }
    }
    Ok(best)
}

/// Scores one item: argmax of per-choice normalized log-likelihood, ties
/// broken toward the lowest index.
pub fn score_mcqa_item<T: Scalar>(params: &ModelParams<T>, item: &MCQAItem) -> Result<u8> {
    let leased = params.lease(false);
    choose(&leased, item)
}

/// Accuracy over an item set; items are scored independently (and in
/// parallel), so the result is order-exact and thread-count independent.
pub fn evaluate_mcqa<T: Scalar>(params: &ModelParams<T>, items: &[MCQAItem]) -> Result<EvalResult> {
    if items.is_empty() {
        return Err(Error::Contract("evaluate_mcqa on an empty item set".into()));
    }
    let per_item: Vec<PerItem> = items
        .par_chunks(32)
        .map(|chunk| {
            let leased = params.lease(false);
            chunk
                .iter()
                .map(|item| {
                    let chosen = choose(&leased, item)?;
                    Ok(PerItem {
                        chosen,
                        correct: chosen == item.label,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let correct = per_item.iter().filter(|p| p.correct).count();
    Ok(EvalResult {
        model_tag: params.provenance(),
        benchmark: items[0].source_corpus,
        split: items[0].split,
        accuracy: correct as f64 / per_item.len() as f64,
        n_items: per_item.len(),
        per_item,
    })
}

/// Per-layer mean absolute activation per hidden unit over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationProfile {
    pub model_tag: Provenance,
    pub dataset_tag: String,
    /// One vector of length d_model per layer.
    pub layers: Vec<Vec<f64>>,
    pub positions: u64,
}

/// Runs the model with activation capture over up to `max_tokens` tokens of
/// the dataset (whole context windows, documents in order) and aggregates
/// mean |activation| per (layer, unit).
pub fn activation_profile<T: Scalar>(
    params: &ModelParams<T>,
    dataset_tag: &str,
    docs: &[&Document],
    max_tokens: u64,
) -> Result<ActivationProfile> {
    if docs.is_empty() {
        return Err(Error::Contract("activation profile over no documents".into()));
    }
    let cfg = *params.config();
    let (n_layers, d) = (cfg.n_layers, cfg.d_model);

    // Window boundaries first, so the accumulation can run in parallel.
    let mut windows: Vec<&[u32]> = Vec::new();
    let mut budget = 0u64;
    'outer: for doc in docs {
        for piece in doc.token_ids.chunks(cfg.ctx_len) {
            if piece.len() < 2 {
                continue;
            }
            if budget >= max_tokens {
                break 'outer;
            }
            windows.push(piece);
            budget += piece.len() as u64;
        }
    }
    if windows.is_empty() {
        return Err(Error::Contract("dataset has no scorable windows".into()));
    }

    let partials: Vec<(Vec<Vec<f64>>, u64)> = windows
        .par_chunks(16)
        .map(|chunk| {
            let leased = params.lease(false);
            let mut sums = vec![vec![0.0f64; d]; n_layers];
            let mut count = 0u64;
            for piece in chunk {
                let mut tape = GradTape::new();
                let (_, cap) = forward_on_tape(&mut tape, &leased, piece, true)?;
                let cap = cap.expect("capture requested");
                for (l, layer) in cap.layers.iter().enumerate() {
                    for (i, v) in layer.iter().enumerate() {
                        sums[l][i % d] += v.as_f64().abs();
                    }
                }
                count += piece.len() as u64;
            }
            Ok((sums, count))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![vec![0.0f64; d]; n_layers];
    let mut positions = 0u64;
    for (part, count) in partials {
        for (dst, src) in sums.iter_mut().zip(&part) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        positions += count;
    }
    for layer in sums.iter_mut() {
        for v in layer.iter_mut() {
            *v /= positions as f64;
        }
    }
    Ok(ActivationProfile {
        model_tag: params.provenance(),
        dataset_tag: dataset_tag.to_string(),
        layers: sums,
        positions,
    })
}

/// Per-layer cosine similarity between two profiles of identical shape.
pub fn profile_similarity(a: &ActivationProfile, b: &ActivationProfile) -> Result<Vec<f64>> {
    if a.layers.len() != b.layers.len()
        || a.layers.iter().zip(&b.layers).any(|(x, y)| x.len() != y.len())
    {
        return Err(Error::Contract(
            "activation profiles have different shapes".into(),
        ));
    }
    a.layers
        .iter()
        .zip(&b.layers)
        .map(|(x, y)| {
            let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            let nx: f64 = x.iter().map(|p| p * p).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|q| q * q).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::UndefinedSimilarity);
            }
            Ok(dot / (nx * ny))
        })
        .collect()
}

/// One row of the pairwise similarity tables.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityEntry {
    pub dataset: String,
    pub model_a: Provenance,
    pub model_b: Provenance,
    pub per_layer: Vec<f64>,
}

/// Identification stamped into every report artifact.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub config_hash_hex: String,
    pub seed: u64,
}

const MODEL_ROW_ORDER: [Provenance; 6] = [
    Provenance::Base,
    Provenance::Pre,
    Provenance::Surgery,
    Provenance::Gd,
    Provenance::GdKl,
    Provenance::Baseline,
];

const BENCH_COL_ORDER: [BenchmarkTag; 3] = [
    BenchmarkTag::Unlearn,
    BenchmarkTag::Update,
    BenchmarkTag::Retain,
];

/// Writes the accuracy table (CSV and aligned text), per-item diff files,
/// and per-dataset similarity matrices. Returns the created paths.
///
/// Rows follow the fixed provenance order (present subset); columns are the
/// unlearn / update / retain benchmarks. CSV files carry `#`-prefixed
/// metadata lines with the config hash and seed.
pub fn emit_report(
    results: &[EvalResult],
    similarities: &[SimilarityEntry],
    meta: &ReportMeta,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Contract("emit_report with no results".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let stamp = format!(
        "# config_hash={} seed={}\n",
        meta.config_hash_hex, meta.seed
    );

    let models: Vec<Provenance> = MODEL_ROW_ORDER
        .into_iter()
        .filter(|m| results.iter().any(|r| r.model_tag == *m))
        .collect();
    let benches: Vec<BenchmarkTag> = BENCH_COL_ORDER
        .into_iter()
        .filter(|b| results.iter().any(|r| r.benchmark == *b))
        .collect();
    let cell = |m: Provenance, b: BenchmarkTag| -> Option<f64> {
        results
            .iter()
            .find(|r| r.model_tag == m && r.benchmark == b)
            .map(|r| r.accuracy)
    };

    // CSV table.
    let csv_path = out_dir.join("results.csv");
    {
        let mut out = stamp.clone();
        out.push_str("model");
        for b in &benches {
            out.push(',');
            out.push_str(b.as_str());
        }
        out.push('\n');
        for m in &models {
            out.push_str(m.as_str());
            for b in &benches {
                out.push(',');
                match cell(*m, *b) {
                    Some(acc) => out.push_str(&format!("{acc}")),
                    None => out.push_str(""),
                }
            }
            out.push('\n');
        }
        std::fs::write(&csv_path, out).map_err(|e| Error::io(&csv_path, e))?;
        written.push(csv_path);
    }

    // Aligned text table.
    let txt_path = out_dir.join("results.txt");
    {
        let mut out = stamp.clone();
        out.push_str(&format!("{:<10}", "model"));
        for b in &benches {
            out.push_str(&format!("{:>10}", b.as_str()));
        }
        out.push('\n');
        for m in &models {
            out.push_str(&format!("{:<10}", m.as_str()));
            for b in &benches {
                match cell(*m, *b) {
                    Some(acc) => out.push_str(&format!("{:>10.4}", acc)),
                    None => out.push_str(&format!("{:>10}", "-")),
                }
            }
            out.push('\n');
        }
        std::fs::write(&txt_path, out).map_err(|e| Error::io(&txt_path, e))?;
        written.push(txt_path);
    }

    // Per-item diffs, one JSONL per (model, benchmark).
    for r in results {
        let path = out_dir.join(format!(
            "diff_{}_{}.jsonl",
            r.model_tag.as_str(),
            r.benchmark.as_str()
        ));
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut buf = String::new();
        for (idx, item) in r.per_item.iter().enumerate() {
            buf.push_str(
                &serde_json::json!({
                    "item_id": format!("{}-{idx:05}", r.benchmark.as_str()),
                    "model_tag": r.model_tag.as_str(),
                    "chosen": item.chosen,
                    "correct": item.correct,
                })
                .to_string(),
            );
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    // Similarity matrices grouped by dataset.
    let mut datasets: Vec<&str> = similarities.iter().map(|s| s.dataset.as_str()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    for ds in datasets {
        let path = out_dir.join(format!("similarity_{ds}.csv"));
        let mut out = stamp.clone();
        let n_layers = similarities
            .iter()
            .find(|s| s.dataset == ds)
            .map(|s| s.per_layer.len())
            .unwrap_or(0);
        out.push_str("model_a,model_b");
        for l in 0..n_layers {
            out.push_str(&format!(",layer{l}"));
        }
        out.push('\n');
        for s in similarities.iter().filter(|s| s.dataset == ds) {
            out.push_str(&format!("{},{}", s.model_a.as_str(), s.model_b.as_str()));
            for v in &s.per_layer {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    Ok(written)
}

#[cfg(test)]
mod tests;
