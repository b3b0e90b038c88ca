//! Hyperparameter probe for the pretraining stage.
//!
//! `cargo run --release -p surgery-core --example sweep`

use std::time::Instant;

use surgery_core::corpus::{generate_benchmarks, generate_dataset, DataConfig, Split};
use surgery_core::eval::evaluate_mcqa;
use surgery_core::model::{init_params, ModelConfig};
use surgery_core::objective::{dataset_ce_backward, dataset_ce_term, GradBuffer};
use surgery_core::train::{chunk_documents, BatchPlan, Stage, TrainConfig};

fn main() {
    let data_cfg = DataConfig {
        seed: 0,
        n_problematic: 24,
        n_outdated: 24,
        n_retain_pool: 32,
        unl_target_tokens: 20_000,
        upd_target_tokens: 16_000,
        rtn_target_tokens: 120_000,
        mcqa_per_entity: 10,
    };
    let (entities, triple) = generate_dataset(&data_cfg).unwrap();
    let benches = generate_benchmarks(&entities, 10, 0).unwrap();
    let unl_test: Vec<_> = benches
        .unlearn
        .iter()
        .filter(|i| i.split == Split::Test)
        .cloned()
        .collect();
    let probe_items = &unl_test[..unl_test.len().min(120)];

    let model_cfg = ModelConfig {
        seed: 7,
        ..ModelConfig::default()
    };

    let variants: &[(&str, f64, f64, usize, usize)] = &[
        // (label, lr, clip, batch_unl, batch_rtn)
        ("clip1.0_lr1e-3", 1e-3, 1.0, 4, 4),
        ("clip5.0_lr1e-3", 1e-3, 5.0, 4, 4),
        ("clipOFF_lr1e-3", 1e-3, 1e9, 4, 4),
        ("clipOFF_lr3e-3", 3e-3, 1e9, 4, 4),
    ];

    let unl_refs = triple.unl_all();
    let rtn_refs: Vec<_> = triple.rtn.iter().collect();
    let unl_pool = chunk_documents(&unl_refs, 256);
    let rtn_pool = chunk_documents(&rtn_refs, 256);
    let unl_eval: Vec<Vec<u32>> = (0..24)
        .map(|i| unl_pool.seqs[i * unl_pool.seqs.len() / 24].clone())
        .collect();

    for &(label, lr, clip, b_unl, b_rtn) in variants {
        let cfg = TrainConfig {
            learning_rate: lr,
            grad_clip_norm: clip,
            batch_unl: b_unl,
            batch_rtn: b_rtn,
            ..TrainConfig::default_for(Stage::Pretrain)
        };
        let mut params = init_params::<f32>(&model_cfg).unwrap();
        let mut adam = surgery_core::train::Adam::new(
            &params,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
        );
        let mut unl_plan = BatchPlan::new(unl_pool.seqs.len(), b_unl, 0xA1);
        let mut rtn_plan = BatchPlan::new(rtn_pool.seqs.len(), b_rtn, 0xB2);
        let mut grads = GradBuffer::zeros_like(&params);
        let t = Instant::now();
        println!("== {label} ==");
        let mut norm_sum = 0.0;
        for step in 0..800u64 {
            let mut batch: Vec<Vec<u32>> = unl_plan
                .indices_for_step(step)
                .into_iter()
                .map(|i| unl_pool.seqs[i].clone())
                .collect();
            batch.extend(
                rtn_plan
                    .indices_for_step(step)
                    .into_iter()
                    .map(|i| rtn_pool.seqs[i].clone()),
            );
            grads.reset();
            dataset_ce_backward(&params, &batch, &mut grads).unwrap();
            norm_sum += surgery_core::train::clip_global_norm(&mut grads, clip);
            let warm = ((step + 1) as f64 / 100.0).min(1.0);
            adam.step(&mut params, &grads, lr * warm);

            if (step + 1) % 200 == 0 {
                let ce = dataset_ce_term(&params, &unl_eval).unwrap();
                params.set_provenance(surgery_core::model::Provenance::Pre);
                let acc = evaluate_mcqa(&params, probe_items).unwrap().accuracy;
                params.set_provenance(surgery_core::model::Provenance::Base);
                println!(
                    "  step {:4}: unl_ce={ce:.3} unl_acc={acc:.3} mean_grad_norm={:.2} [{:?}]",
                    step + 1,
                    norm_sum / 200.0,
                    t.elapsed()
                );
                norm_sum = 0.0;
            }
        }
    }
}
