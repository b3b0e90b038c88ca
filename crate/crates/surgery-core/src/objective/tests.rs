use super::*;
use crate::model::{init_params, ModelConfig};

fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 7,
        n_layers: 1,
        n_heads: 2,
        d_model: 8,
        d_ff: 16,
        ctx_len: 8,
        seed: 21,
    }
}

fn seqs(raw: &[&[u32]]) -> Vec<Vec<u32>> {
    raw.iter().map(|s| s.to_vec()).collect()
}

fn batches() -> BatchTriple {
    BatchTriple {
        unl: seqs(&[&[1, 2, 3, 4], &[5, 6, 0, 1, 2]]),
        upd: seqs(&[&[2, 2, 5, 1], &[0, 3, 3]]),
        rtn: seqs(&[&[4, 1, 6, 2, 0], &[6, 5, 4]]),
    }
}

#[test]
fn token_cross_entropy_uniform_is_log_vocab() {
    let dist = vec![0.25f64; 4];
    let ce = token_cross_entropy(&dist, 2).unwrap();
    assert!((ce - 4.0f64.ln()).abs() < 1e-12);
}

#[test]
fn token_cross_entropy_one_hot_is_zero() {
    let dist = vec![0.0, 1.0, 0.0];
    assert_eq!(token_cross_entropy(&dist, 1).unwrap(), 0.0);
}

#[test]
fn token_cross_entropy_matches_direct_log() {
    let mut dist = vec![0.05f64, 0.3, 0.15, 0.1, 0.2, 0.12, 0.08];
    let sum: f64 = dist.iter().sum();
    for d in dist.iter_mut() {
        *d /= sum;
    }
    for (t, &p) in dist.iter().enumerate() {
        let ce = token_cross_entropy(&dist, t).unwrap();
        assert!((ce + p.ln()).abs() < 1e-9);
    }
}

#[test]
fn token_cross_entropy_rejects_out_of_range_target() {
    assert!(matches!(
        token_cross_entropy(&[0.5f64, 0.5], 2),
        Err(Error::Vocab { .. })
    ));
}

#[test]
fn uniform_model_ce_term_is_exactly_log_vocab() {
    let cfg = tiny_config();
    let params = crate::model::ModelParams::<f64>::zeroed(&cfg).unwrap();
    let batch = seqs(&[&[1, 2, 3], &[4, 5, 6, 0, 1]]);
    let ce = dataset_ce_term(&params, &batch).unwrap();
    assert!((ce - 7.0f64.ln()).abs() < 1e-9, "{ce}");
}

#[test]
fn single_sequence_batch_equals_its_mean_ce() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let seq = vec![1u32, 5, 2, 0];
    let ce = dataset_ce_term(&params, &[seq.clone()]).unwrap();
    let (total, per) = crate::model::sequence_log_likelihood(&params, &seq).unwrap();
    assert_eq!(per.len(), 3);
    assert!((ce + total / 3.0).abs() < 1e-9);
}

#[test]
fn two_sequence_batch_is_mean_of_single_calls() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let a = vec![1u32, 2, 3, 4];
    let b = vec![6u32, 0, 5];
    let ab = dataset_ce_term(&params, &[a.clone(), b.clone()]).unwrap();
    let ca = dataset_ce_term(&params, &[a]).unwrap();
    let cb = dataset_ce_term(&params, &[b]).unwrap();
    assert!((ab - (ca + cb) / 2.0).abs() < 1e-9);
}

#[test]
fn empty_batch_is_a_contract_error() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    assert!(matches!(
        dataset_ce_term(&params, &[]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn kl_of_model_with_itself_is_zero() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let batch = seqs(&[&[1, 2, 3, 4], &[0, 6, 5]]);
    let kl = kl_term(&params, &params, &batch).unwrap();
    assert!(kl.abs() < 1e-9, "{kl}");
}

#[test]
fn kl_is_nonnegative_for_random_model_pairs() {
    let a = init_params::<f64>(&tiny_config()).unwrap();
    let b = init_params::<f64>(&ModelConfig {
        seed: 99,
        ..tiny_config()
    })
    .unwrap();
    let batch = seqs(&[&[3, 1, 4], &[2, 6, 0, 5]]);
    let kl = kl_term(&a, &b, &batch).unwrap();
    assert!(kl >= -1e-9, "{kl}");
    assert!(kl > 1e-4, "independent models should diverge, got {kl}");
}

#[test]
fn kl_rejects_architecture_mismatch() {
    let a = init_params::<f64>(&tiny_config()).unwrap();
    let b = init_params::<f64>(&ModelConfig {
        d_model: 16,
        n_heads: 4,
        ..tiny_config()
    })
    .unwrap();
    assert!(matches!(
        kl_term(&a, &b, &seqs(&[&[1, 2]])),
        Err(Error::Contract(_))
    ));
}

#[test]
fn symmetric_cancellation_gives_zero_loss() {
    // Uniform-output model as its own reference: J = -ln V + ln V + 0 = 0.
    let cfg = tiny_config();
    let params = crate::model::ModelParams::<f64>::zeroed(&cfg).unwrap();
    let w = TermWeights::for_vocab(cfg.vocab_size);
    let (loss, terms) =
        surgery_loss(&params, &params, &batches(), &w, ObjectiveMode::Full).unwrap();
    assert!(loss.abs() < 1e-9, "J = {loss}");
    assert!((terms.ce_unl - 7.0f64.ln()).abs() < 1e-9);
    assert!((terms.ce_upd - 7.0f64.ln()).abs() < 1e-9);
    assert!(terms.kl_rtn.abs() < 1e-9);
}

#[test]
fn gd_only_equals_weighted_update_ce() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let b = BatchTriple {
        unl: vec![],
        upd: seqs(&[&[2, 2, 5, 1], &[0, 3, 3]]),
        rtn: vec![],
    };
    let mut w = TermWeights::for_vocab(7);
    w.lambda_upd = 0.7;
    let (loss, terms) = surgery_loss(&params, &params, &b, &w, ObjectiveMode::GdOnly).unwrap();
    let direct = dataset_ce_term(&params, &b.upd).unwrap();
    assert!((loss - 0.7 * direct).abs() < 1e-12);
    assert!((terms.ce_upd - direct).abs() < 1e-12);
    assert_eq!(terms.ce_unl, 0.0);
    assert_eq!(terms.kl_rtn, 0.0);
}

#[test]
fn mode_batch_inconsistency_is_a_contract_error() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let w = TermWeights::for_vocab(7);
    let mut b = batches();
    b.rtn.clear();
    assert!(matches!(
        surgery_loss(&params, &params, &b, &w, ObjectiveMode::Full),
        Err(Error::Contract(_))
    ));
    let gd_with_unl = BatchTriple {
        unl: seqs(&[&[1, 2]]),
        upd: seqs(&[&[1, 2]]),
        rtn: vec![],
    };
    assert!(matches!(
        surgery_loss(&params, &params, &gd_with_unl, &w, ObjectiveMode::GdOnly),
        Err(Error::Contract(_))
    ));
}

#[test]
fn term_additivity_is_exact() {
    let params = init_params::<f64>(&tiny_config()).unwrap();
    let refp = init_params::<f64>(&ModelConfig {
        seed: 77,
        ..tiny_config()
    })
    .unwrap();
    let b = batches();
    let w = TermWeights {
        lambda_unl: 0.9,
        lambda_upd: 1.3,
        lambda_rtn: 2.1,
        unl_clamp_tau: f64::INFINITY,
    };
    let (loss, terms) = surgery_loss(&params, &refp, &b, &w, ObjectiveMode::Full).unwrap();
    let t1 = dataset_ce_term(&params, &b.unl).unwrap();
    let t2 = dataset_ce_term(&params, &b.upd).unwrap();
    let t3 = kl_term(&params, &refp, &b.rtn).unwrap();
    assert!((terms.ce_unl - t1).abs() < 1e-9);
    assert!((terms.ce_upd - t2).abs() < 1e-9);
    assert!((terms.kl_rtn - t3).abs() < 1e-9);
    assert!((loss - (-0.9 * t1 + 1.3 * t2 + 2.1 * t3)).abs() < 1e-9);
}

#[test]
fn non_finite_parameters_surface_with_term_attribution() {
    let mut params = init_params::<f64>(&tiny_config()).unwrap();
    params.buffers_mut()[0].data[0] = f64::NAN;
    let w = TermWeights::for_vocab(7);
    let res = surgery_loss(&params, &params, &batches(), &w, ObjectiveMode::Full);
    assert!(matches!(res, Err(Error::NonFinite { .. })), "{res:?}");
}

#[test]
fn full_surgery_gradient_matches_finite_differences() {
    let cfg = tiny_config();
    let params = init_params::<f64>(&cfg).unwrap();
    let refp = init_params::<f64>(&ModelConfig { seed: 99, ..cfg }).unwrap();
    let b = batches();
    // Clamp off so the loss is differentiable at every probed point.
    let w = TermWeights {
        unl_clamp_tau: f64::INFINITY,
        ..TermWeights::for_vocab(cfg.vocab_size)
    };

    let mut grads = GradBuffer::zeros_like(&params);
    surgery_loss_backward(&params, &refp, &b, &w, ObjectiveMode::Full, &mut grads).unwrap();

    let h = 1e-5;
    let mut probe = params.clone();
    let mut max_rel: f64 = 0.0;
    let n_bufs = params.buffers().len();
    for bi in 0..n_bufs {
        for i in 0..params.buffers()[bi].data.len() {
            let orig = params.buffers()[bi].data[i];
            probe.buffers_mut()[bi].data[i] = orig + h;
            let (plus, _) = surgery_loss(&probe, &refp, &b, &w, ObjectiveMode::Full).unwrap();
            probe.buffers_mut()[bi].data[i] = orig - h;
            let (minus, _) = surgery_loss(&probe, &refp, &b, &w, ObjectiveMode::Full).unwrap();
            probe.buffers_mut()[bi].data[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.buffers()[bi][i];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12);
            max_rel = max_rel.max(rel);
        }
    }
    assert!(max_rel < 1e-4, "max rel err {max_rel}");
}

#[test]
fn ascent_step_increases_unlearn_ce_and_descent_decreases_update_ce() {
    let cfg = tiny_config();
    let b = batches();
    let step = 1e-3;

    // Only the unlearn term active: one descent step on J must raise CE.
    let params = init_params::<f64>(&cfg).unwrap();
    let w_unl = TermWeights {
        lambda_upd: 0.0,
        lambda_rtn: 0.0,
        unl_clamp_tau: f64::INFINITY,
        ..TermWeights::for_vocab(cfg.vocab_size)
    };
    let before = dataset_ce_term(&params, &b.unl).unwrap();
    let mut grads = GradBuffer::zeros_like(&params);
    surgery_loss_backward(&params, &params.clone(), &b, &w_unl, ObjectiveMode::Full, &mut grads)
        .unwrap();
    let mut stepped = params.clone();
    for (buf, g) in stepped.buffers_mut().into_iter().zip(grads.buffers()) {
        for (p, gi) in buf.data.iter_mut().zip(g) {
            *p -= step * gi;
        }
    }
    let after = dataset_ce_term(&stepped, &b.unl).unwrap();
    assert!(after > before, "ascent: {before} -> {after}");

    // Only the update term active: the same step must lower CE.
    let w_upd = TermWeights {
        lambda_unl: 0.0,
        lambda_rtn: 0.0,
        unl_clamp_tau: f64::INFINITY,
        ..TermWeights::for_vocab(cfg.vocab_size)
    };
    let before = dataset_ce_term(&params, &b.upd).unwrap();
    let mut grads = GradBuffer::zeros_like(&params);
    surgery_loss_backward(&params, &params.clone(), &b, &w_upd, ObjectiveMode::Full, &mut grads)
        .unwrap();
    let mut stepped = params.clone();
    for (buf, g) in stepped.buffers_mut().into_iter().zip(grads.buffers()) {
        for (p, gi) in buf.data.iter_mut().zip(g) {
            *p -= step * gi;
        }
    }
    let after = dataset_ce_term(&stepped, &b.upd).unwrap();
    assert!(after < before, "descent: {before} -> {after}");
}

#[test]
fn clamped_unlearn_term_contributes_no_gradient() {
    let cfg = tiny_config();
    let params = init_params::<f64>(&cfg).unwrap();
    // An untrained model sits near ln V per token, far above tau = 0.001,
    // so every unlearn token is clamped.
    let w = TermWeights {
        lambda_upd: 0.0,
        lambda_rtn: 0.0,
        unl_clamp_tau: 1e-3,
        ..TermWeights::for_vocab(cfg.vocab_size)
    };
    let b = batches();
    let mut grads = GradBuffer::zeros_like(&params);
    let (_, terms) =
        surgery_loss_backward(&params, &params.clone(), &b, &w, ObjectiveMode::Full, &mut grads)
            .unwrap();
    assert!(terms.ce_unl > 1.0, "value still reported: {}", terms.ce_unl);
    assert!(grads.global_norm() < 1e-9, "norm {}", grads.global_norm());

    // With the clamp off the same setup produces gradient.
    let w_off = TermWeights {
        unl_clamp_tau: f64::INFINITY,
        ..w
    };
    let mut grads = GradBuffer::zeros_like(&params);
    surgery_loss_backward(&params, &params.clone(), &b, &w_off, ObjectiveMode::Full, &mut grads)
        .unwrap();
    assert!(grads.global_norm() > 1e-6);
}

#[test]
fn kl_gradient_vanishes_when_model_equals_reference() {
    let cfg = tiny_config();
    let params = init_params::<f64>(&cfg).unwrap();
    let w = TermWeights {
        lambda_unl: 0.0,
        lambda_upd: 0.0,
        ..TermWeights::for_vocab(cfg.vocab_size)
    };
    let b = BatchTriple {
        unl: vec![],
        upd: seqs(&[&[1, 2, 3]]),
        rtn: seqs(&[&[4, 1, 6, 2, 0], &[6, 5, 4]]),
    };
    let mut grads = GradBuffer::zeros_like(&params);
    let (loss, _) =
        surgery_loss_backward(&params, &params.clone(), &b, &w, ObjectiveMode::GdKl, &mut grads)
            .unwrap();
    assert!(loss.abs() < 1e-9);
    assert!(grads.global_norm() < 1e-6, "norm {}", grads.global_norm());
}
