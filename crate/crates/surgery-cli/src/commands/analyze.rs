use std::path::{Path, PathBuf};

use surgery_core::eval::{activation_profile, profile_similarity, SimilarityEntry};
use surgery_core::model::ModelParams;
use surgery_core::train::{hex_string, load_checkpoint};

use crate::config::RunConfig;
use crate::manifest::DataDir;

pub fn run(
    config_path: &Path,
    data_path: &Path,
    ckpts: &[PathBuf],
    max_tokens: Option<u64>,
    out: &Path,
) -> anyhow::Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    if ckpts.len() < 2 {
        anyhow::bail!(surgery_core::Error::Config(
            "analyze-activations needs at least two checkpoints".into()
        ));
    }
    let budget = max_tokens.unwrap_or(cfg.eval.max_profile_tokens);
    let data = DataDir::new(data_path);

    let mut models: Vec<ModelParams<f32>> = Vec::new();
    for path in ckpts {
        let ckpt = load_checkpoint(path)?;
        if !ckpt.params.config().same_arch(&cfg.model_config()) {
            anyhow::bail!(surgery_core::Error::Contract(format!(
                "checkpoint {} architecture differs from the configured model",
                path.display()
            )));
        }
        models.push(ckpt.params);
    }

    // Distinct file labels even if two checkpoints share a provenance tag.
    let mut labels: Vec<String> = Vec::new();
    for m in &models {
        let base = m.provenance().as_str().to_string();
        let mut label = base.clone();
        let mut k = 2;
        while labels.contains(&label) {
            label = format!("{base}{k}");
            k += 1;
        }
        labels.push(label);
    }

    let unl = data.load_unlearn()?;
    let upd = data.load_corpus("upd")?;
    let rtn = data.load_corpus("rtn")?;
    let datasets: [(&str, Vec<&surgery_core::corpus::Document>); 3] = [
        ("unl", unl.iter().collect()),
        ("upd", upd.iter().collect()),
        ("rtn", rtn.iter().collect()),
    ];

    std::fs::create_dir_all(out)?;
    let stamp = format!(
        "# config_hash={} seed={}\n",
        hex_string(&cfg.hash()),
        cfg.seed
    );

    let mut profiles = Vec::new();
    for (tag, docs) in &datasets {
        for (model, label) in models.iter().zip(&labels) {
            let profile = activation_profile(model, tag, docs, budget)?;
            let path = out.join(format!("profile_{label}_{tag}.csv"));
            let mut text = stamp.clone();
            for layer in &profile.layers {
                let row: Vec<String> = layer.iter().map(|v| format!("{v}")).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            profiles.push((tag.to_string(), label.clone(), profile));
        }
    }

    let mut entries = Vec::new();
    for (tag, _) in &datasets {
        let group: Vec<_> = profiles.iter().filter(|(t, _, _)| t == tag).collect();
        for i in 0..group.len() {
            for j in i..group.len() {
                let (_, _, pa) = group[i];
                let (_, _, pb) = group[j];
                entries.push(SimilarityEntry {
                    dataset: tag.to_string(),
                    model_a: pa.model_tag,
                    model_b: pb.model_tag,
                    per_layer: profile_similarity(pa, pb)?,
                });
            }
        }
    }

    for (tag, _) in &datasets {
        let path = out.join(format!("similarity_{tag}.csv"));
        let group: Vec<_> = entries.iter().filter(|e| e.dataset == *tag).collect();
        let n_layers = group.first().map(|e| e.per_layer.len()).unwrap_or(0);
        let mut text = stamp.clone();
        text.push_str("model_a,model_b");
        for l in 0..n_layers {
            text.push_str(&format!(",layer{l}"));
        }
        text.push('\n');
        for e in group {
            text.push_str(&format!("{},{}", e.model_a.as_str(), e.model_b.as_str()));
            for v in &e.per_layer {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
        }
        std::fs::write(&path, text)?;
    }

    println!(
        "wrote {} profiles and 3 similarity tables to {}",
        profiles.len(),
        out.display()
    );
    Ok(0)
}
