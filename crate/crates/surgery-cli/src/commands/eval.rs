use std::path::{Path, PathBuf};

use surgery_core::corpus::{MCQAItem, Split};
use surgery_core::eval::{evaluate_mcqa, emit_report, EvalResult, ReportMeta};
use surgery_core::model::{init_params, ModelParams};
use surgery_core::train::{hex_string, load_checkpoint};

use crate::config::RunConfig;
use crate::manifest::DataDir;

pub struct Args<'a> {
    pub config: &'a Path,
    pub data: &'a Path,
    pub ckpts: &'a [PathBuf],
    pub benchmarks: &'a [String],
    pub with_base: bool,
    pub validation_split: bool,
    pub out: &'a Path,
}

pub fn run(args: Args) -> anyhow::Result<i32> {
    let cfg = RunConfig::load(args.config)?;
    let hash = cfg.hash();
    let data = DataDir::new(args.data);

    let bench_keys: Vec<String> = if args.benchmarks.is_empty() {
        ["unlearn", "update", "retain"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        for b in args.benchmarks {
            if !["unlearn", "update", "retain"].contains(&b.as_str()) {
                anyhow::bail!(surgery_core::Error::Config(format!(
                    "unknown benchmark {b}; expected unlearn, update, or retain"
                )));
            }
        }
        args.benchmarks.to_vec()
    };

    if let Ok(manifest) = data.manifest() {
        if manifest.config_hash != hex_string(&hash) {
            eprintln!(
                "warning: data manifest config_hash {} differs from current config {}",
                manifest.config_hash,
                hex_string(&hash)
            );
        }
    }

    let mut models: Vec<ModelParams<f32>> = Vec::new();
    if args.with_base {
        models.push(init_params::<f32>(&cfg.model_config())?);
    }
    for path in args.ckpts {
        let ckpt = load_checkpoint(path)?;
        if ckpt.config_hash != hash {
            eprintln!(
                "warning: checkpoint {} config_hash {} differs from current config {}",
                path.display(),
                hex_string(&ckpt.config_hash),
                hex_string(&hash)
            );
        }
        models.push(ckpt.params);
    }

    let want = if args.validation_split {
        Split::Validation
    } else {
        Split::Test
    };
    let mut results: Vec<EvalResult> = Vec::new();
    for key in &bench_keys {
        let items: Vec<MCQAItem> = data
            .load_benchmark(key)?
            .into_iter()
            .filter(|i| i.split == want)
            .collect();
        for model in &models {
            let r = evaluate_mcqa(model, &items)?;
            println!(
                "{} on {key} ({} items): {:.4}",
                model.provenance(),
                r.n_items,
                r.accuracy
            );
            results.push(r);
        }
    }

    let meta = ReportMeta {
        config_hash_hex: hex_string(&hash),
        seed: cfg.seed,
    };
    let files = emit_report(&results, &[], &meta, args.out)?;
    println!("report: {} files in {}", files.len(), args.out.display());
    Ok(0)
}
