//! Scratch pipeline driver for sizing training defaults.
//!
//! `cargo run --release -p surgery-core --example pilot -- small|timing|full`

use std::time::Instant;

use surgery_core::corpus::{
    generate_benchmarks, generate_dataset, BenchmarkTag, DataConfig, Split,
};
use surgery_core::eval::{activation_profile, evaluate_mcqa, profile_similarity};
use surgery_core::model::{init_params, ModelConfig, ModelParams};
use surgery_core::train::{
    pretrain, run_surgery, sample_retain_subset, train_baseline, Stage, StartPoint, TrainConfig,
};

fn acc(params: &ModelParams<f32>, items: &[surgery_core::corpus::MCQAItem]) -> f64 {
    let test: Vec<_> = items
        .iter()
        .filter(|i| i.split == Split::Test)
        .cloned()
        .collect();
    evaluate_mcqa(params, &test).unwrap().accuracy
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "small".into());
    let t0 = Instant::now();

    let (data_cfg, pre_steps, base_steps, surg_steps) = match mode.as_str() {
        "timing" | "full" => (DataConfig::default(), 2200u64, 2600u64, 300u64),
        _ => (
            DataConfig {
                seed: 0,
                n_problematic: 24,
                n_outdated: 24,
                n_retain_pool: 32,
                unl_target_tokens: 20_000,
                upd_target_tokens: 16_000,
                rtn_target_tokens: 120_000,
                mcqa_per_entity: 10,
            },
            600,
            700,
            150,
        ),
    };

    println!("[{:7.1?}] generating data...", t0.elapsed());
    let (entities, triple) = generate_dataset(&data_cfg).unwrap();
    let counts = triple.token_counts();
    println!(
        "[{:7.1?}] tokens: unl={} upd={} rtn={}",
        t0.elapsed(),
        counts.unl_total(),
        counts.upd,
        counts.rtn
    );
    let benches = generate_benchmarks(&entities, data_cfg.mcqa_per_entity, data_cfg.seed).unwrap();
    println!(
        "[{:7.1?}] mcqa: unl={} upd={} rtn={}",
        t0.elapsed(),
        benches.unlearn.len(),
        benches.update.len(),
        benches.retain.len()
    );

    let model_cfg = ModelConfig {
        seed: 7,
        ..ModelConfig::default()
    };
    let base = init_params::<f32>(&model_cfg).unwrap();

    let unl_refs = triple.unl_all();
    let rtn_refs: Vec<_> = triple.rtn.iter().collect();
    let upd_refs: Vec<_> = triple.upd.iter().collect();

    if mode == "timing" {
        // Ten pretraining steps at the default batch shape.
        let cfg = TrainConfig {
            steps: 10,
            stop_unl_ce: 0.0,
            eval_every: 1_000_000,
            ..TrainConfig::default_for(Stage::Pretrain)
        };
        let t = Instant::now();
        pretrain(StartPoint::Fresh(&base), &unl_refs, &rtn_refs, &cfg).unwrap();
        let per_step = t.elapsed() / 10;
        println!("pretrain step (4+4 x256): {per_step:?}");

        let t = Instant::now();
        let n = 60.min(benches.retain.len());
        evaluate_mcqa(&base, &benches.retain[..n]).unwrap();
        println!("mcqa item: {:?}", t.elapsed() / n as u32);
        return;
    }

    println!("[{:7.1?}] base accuracies:", t0.elapsed());
    let base_unl = acc(&base, &benches.unlearn);
    let base_upd = acc(&base, &benches.update);
    let base_rtn = acc(&base, &benches.retain);
    println!("  base: unl={base_unl:.3} upd={base_upd:.3} rtn={base_rtn:.3}");

    // Stage 1: continual pretraining on unl + rtn.
    let pre_cfg = TrainConfig {
        steps: pre_steps,
        seed: 1,
        ..TrainConfig::default_for(Stage::Pretrain)
    };
    let t = Instant::now();
    let pre_result = pretrain(StartPoint::Fresh(&base), &unl_refs, &rtn_refs, &pre_cfg).unwrap();
    let pre = pre_result.params;
    let last = pre_result.metrics.records.last().unwrap();
    println!(
        "[{:7.1?}] pretrain done in {:?}: step={} unl_ce={:.3} stop={:?}",
        t0.elapsed(),
        t.elapsed(),
        pre_result.metrics.final_step,
        last.ce_unl,
        pre_result.stop
    );
    let pre_unl = acc(&pre, &benches.unlearn);
    let pre_upd = acc(&pre, &benches.update);
    let pre_rtn = acc(&pre, &benches.retain);
    println!("  pre:  unl={pre_unl:.3} upd={pre_upd:.3} rtn={pre_rtn:.3}");

    // Stage 2: surgery + ablations from the pre model.
    let subset = sample_retain_subset(&triple.rtn, 0.02, 11).unwrap();
    let subset_refs: Vec<_> = subset.iter().collect();
    println!(
        "  retain subset: {} docs, {} tokens",
        subset.len(),
        subset.iter().map(|d| d.token_ids.len()).sum::<usize>()
    );

    for stage in [Stage::Surgery, Stage::GdOnly, Stage::GdKl] {
        let cfg = TrainConfig {
            steps: surg_steps,
            seed: 2,
            ..TrainConfig::default_for(stage)
        };
        let t = Instant::now();
        let result = run_surgery(
            StartPoint::Fresh(&pre),
            &pre,
            &unl_refs,
            &upd_refs,
            &subset_refs,
            &cfg,
        )
        .unwrap();
        let m = result.metrics.records.last().unwrap();
        println!(
            "[{:7.1?}] {stage} done in {:?}: ce_unl={:.2} ce_upd={:.2} kl={:.3} stop={:?} tokens={}",
            t0.elapsed(),
            t.elapsed(),
            m.ce_unl,
            m.ce_upd,
            m.kl_rtn,
            result.stop,
            result.metrics.ledger.consumed_total(),
        );
        let u = acc(&result.params, &benches.unlearn);
        let d = acc(&result.params, &benches.update);
        let r = acc(&result.params, &benches.retain);
        println!("  {stage}: unl={u:.3} upd={d:.3} rtn={r:.3}");

        if stage == Stage::Surgery {
            for (tag, docs) in [
                ("unl", &unl_refs),
                ("upd", &upd_refs),
                ("rtn", &rtn_refs),
            ] {
                let pa = activation_profile(&pre, tag, docs, 8_000).unwrap();
                let pb = activation_profile(&result.params, tag, docs, 8_000).unwrap();
                let sims = profile_similarity(&pa, &pb).unwrap();
                println!("  sim(pre,surgery) on {tag}: {sims:.3?}");
            }
        }
    }

    // Stage 3: the naive baseline from the base model.
    let base_cfg = TrainConfig {
        steps: base_steps,
        seed: 3,
        ..TrainConfig::default_for(Stage::Baseline)
    };
    let t = Instant::now();
    let baseline = train_baseline(StartPoint::Fresh(&base), &upd_refs, &rtn_refs, &base_cfg).unwrap();
    println!(
        "[{:7.1?}] baseline done in {:?}: tokens={}",
        t0.elapsed(),
        t.elapsed(),
        baseline.metrics.ledger.consumed_total()
    );
    let u = acc(&baseline.params, &benches.unlearn);
    let d = acc(&baseline.params, &benches.update);
    let r = acc(&baseline.params, &benches.retain);
    println!("  baseline: unl={u:.3} upd={d:.3} rtn={r:.3}");
    let _ = BenchmarkTag::Unlearn;
}
