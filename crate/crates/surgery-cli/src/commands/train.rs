use std::path::Path;

use surgery_core::model::init_params;
use surgery_core::train::{
    hex_string, load_checkpoint, pretrain, run_surgery, sample_retain_subset, save_checkpoint,
    train_baseline, Checkpoint, Stage, StageResult, StartPoint,
};

use crate::config::RunConfig;
use crate::manifest::DataDir;
use crate::EXIT_DIVERGENCE;

pub struct Args<'a> {
    pub config: &'a Path,
    pub stage: Stage,
    pub data: &'a Path,
    pub input: Option<&'a Path>,
    pub resume: Option<&'a Path>,
    pub out: &'a Path,
    pub metrics: Option<&'a Path>,
    pub steps: Option<u64>,
    pub retain_fraction: Option<f64>,
}

pub fn run(args: Args) -> anyhow::Result<i32> {
    let cfg = RunConfig::load(args.config)?;
    let stage = args.stage;
    let mut train_cfg = cfg.train_config(stage);
    if let Some(steps) = args.steps {
        train_cfg.steps = steps;
    }
    if let Some(f) = args.retain_fraction {
        train_cfg.retain_fraction = f;
    }

    let data = DataDir::new(args.data);
    if let Ok(manifest) = data.manifest() {
        let here = hex_string(&cfg.hash());
        if manifest.config_hash != here {
            eprintln!(
                "warning: data manifest config_hash {} differs from current config {}",
                manifest.config_hash, here
            );
        }
    }

    let resume_ckpt = args
        .resume
        .map(|p| load_checkpoint(p))
        .transpose()?;

    let result: StageResult = match stage {
        Stage::Pretrain => {
            let base = init_params::<f32>(&cfg.model_config())?;
            let unl = data.load_unlearn()?;
            let rtn = data.load_corpus("rtn")?;
            let start = match &resume_ckpt {
                Some(c) => StartPoint::Resume(c),
                None => StartPoint::Fresh(&base),
            };
            pretrain(
                start,
                &unl.iter().collect::<Vec<_>>(),
                &rtn.iter().collect::<Vec<_>>(),
                &train_cfg,
            )?
        }
        Stage::Baseline => {
            let base = init_params::<f32>(&cfg.model_config())?;
            let upd = data.load_corpus("upd")?;
            let rtn = data.load_corpus("rtn")?;
            let start = match &resume_ckpt {
                Some(c) => StartPoint::Resume(c),
                None => StartPoint::Fresh(&base),
            };
            train_baseline(
                start,
                &upd.iter().collect::<Vec<_>>(),
                &rtn.iter().collect::<Vec<_>>(),
                &train_cfg,
            )?
        }
        Stage::Surgery | Stage::GdOnly | Stage::GdKl => {
            let input = args.input.ok_or_else(|| {
                anyhow::anyhow!(surgery_core::Error::Provenance {
                    expected: "pre".into(),
                    found: "no --in checkpoint given".into(),
                })
            })?;
            let pre_ckpt: Checkpoint = load_checkpoint(input)?;
            if pre_ckpt.config_hash != cfg.hash() {
                eprintln!(
                    "warning: input checkpoint config_hash {} differs from current config {}",
                    hex_string(&pre_ckpt.config_hash),
                    hex_string(&cfg.hash())
                );
            }
            let unl = data.load_unlearn()?;
            let upd = data.load_corpus("upd")?;
            let rtn = data.load_corpus("rtn")?;
            let subset = sample_retain_subset(&rtn, train_cfg.retain_fraction, cfg.seed ^ 0x5eed)?;
            let start = match &resume_ckpt {
                Some(c) => StartPoint::Resume(c),
                None => StartPoint::Fresh(&pre_ckpt.params),
            };
            run_surgery(
                start,
                &pre_ckpt.params,
                &unl.iter().collect::<Vec<_>>(),
                &upd.iter().collect::<Vec<_>>(),
                &subset.iter().collect::<Vec<_>>(),
                &train_cfg,
            )?
        }
    };

    let metrics_path = args
        .metrics
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| args.out.with_extension("metrics.jsonl"));
    result.metrics.validate()?;
    result.metrics.write_jsonl(&metrics_path)?;

    let last = result.metrics.records.last();
    if result.stop.is_divergence() {
        let lastgood = args.out.with_extension("lastgood.ckpt");
        save_checkpoint(&result.checkpoint, &lastgood)?;
        eprintln!(
            "stage {stage} diverged ({:?}); last good checkpoint at {}",
            result.stop,
            lastgood.display()
        );
        return Ok(EXIT_DIVERGENCE);
    }

    save_checkpoint(&result.checkpoint, args.out)?;
    println!(
        "stage {stage} finished at step {} ({:?}); checkpoint {}, metrics {}",
        result.metrics.final_step,
        result.stop,
        args.out.display(),
        metrics_path.display()
    );
    if let Some(rec) = last {
        println!(
            "  ce_unl={:.3} ce_upd={:.3} kl_rtn={:.4} loss={:.3} tokens=({}, {}, {})",
            rec.ce_unl, rec.ce_upd, rec.kl_rtn, rec.loss, rec.tokens_unl, rec.tokens_upd, rec.tokens_rtn
        );
    }
    Ok(0)
}
