use std::path::Path;

use surgery_core::corpus::{generate_benchmarks, generate_dataset, write_documents, write_mcqa, Split};
use surgery_core::train::hex_string;

use crate::config::RunConfig;
use crate::manifest::{
    file_sha256, BenchmarkEntry, CorpusEntry, Manifest, BENCHMARK_FILES, CORPUS_FILES,
};

pub fn run(config_path: &Path, out: &Path, force: bool) -> anyhow::Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    let hash = cfg.hash();

    if out.exists() {
        let non_empty = std::fs::read_dir(out)
            .map_err(|e| anyhow::anyhow!("cannot inspect {}: {e}", out.display()))?
            .next()
            .is_some();
        if non_empty && !force {
            anyhow::bail!(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!(
                    "{} exists and is not empty; pass --force to overwrite",
                    out.display()
                ),
            ));
        }
    }
    std::fs::create_dir_all(out)?;

    let (entities, triple) = generate_dataset(&cfg.data_config())?;
    let benches = generate_benchmarks(&entities, cfg.data.mcqa_per_entity, cfg.seed)?;

    let mut manifest = Manifest {
        config_hash: hex_string(&hash),
        seed: cfg.seed,
        corpora: Default::default(),
        benchmarks: Default::default(),
    };

    let corpora = [
        ("unl_problematic", &triple.unl_problematic),
        ("unl_outdated", &triple.unl_outdated),
        ("upd", &triple.upd),
        ("rtn", &triple.rtn),
    ];
    for (key, docs) in corpora {
        let file = CORPUS_FILES.iter().find(|(k, _)| *k == key).unwrap().1;
        let path = out.join(file);
        write_documents(&path, docs)?;
        manifest.corpora.insert(
            key.to_string(),
            CorpusEntry {
                file: file.to_string(),
                documents: docs.len(),
                tokens: docs.iter().map(|d| d.token_ids.len()).sum(),
                sha256: file_sha256(&path)?,
            },
        );
    }

    let benchmarks = [
        ("unlearn", &benches.unlearn),
        ("update", &benches.update),
        ("retain", &benches.retain),
    ];
    for (key, items) in benchmarks {
        let file = BENCHMARK_FILES.iter().find(|(k, _)| *k == key).unwrap().1;
        let path = out.join(file);
        write_mcqa(&path, items)?;
        let validation = items.iter().filter(|i| i.split == Split::Validation).count();
        manifest.benchmarks.insert(
            key.to_string(),
            BenchmarkEntry {
                file: file.to_string(),
                items: items.len(),
                validation,
                test: items.len() - validation,
                sha256: file_sha256(&path)?,
            },
        );
    }

    manifest.write(out)?;

    println!("wrote {} (config_hash={})", out.display(), manifest.config_hash);
    for (key, entry) in &manifest.corpora {
        println!("  {key}: {} documents, {} tokens", entry.documents, entry.tokens);
    }
    for (key, entry) in &manifest.benchmarks {
        println!(
            "  mcqa {key}: {} items ({} val / {} test)",
            entry.items, entry.validation, entry.test
        );
    }
    Ok(0)
}
