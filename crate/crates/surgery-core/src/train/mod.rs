//! Training stages: continual pretraining, the naive full-retrain baseline,
//! and the three-term editing stage with its two ablations.
//!
//! Every stage is a pure function of (start parameters, corpora, config):
//! batch selection is stateless in the step counter, gradients reduce in a
//! fixed order, so reruns and checkpoint resumes are bit-identical at any
//! thread count.

mod adam;
mod checkpoint;
mod metrics;
mod plan;

pub use adam::{clip_global_norm, Adam};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, AdamSnapshot, Checkpoint, RngState, CHECKPOINT_VERSION,
};
pub use metrics::{hex_string, MetricsRecord, RunMetrics, TokenLedger};
pub use plan::{chunk_documents, sample_retain_subset, BatchPlan, SeqPool};

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Provenance};
use crate::objective::{
    dataset_ce_backward, dataset_ce_term, surgery_loss_backward, BatchTriple, GradBuffer,
    ObjectiveMode, TermWeights,
};

/// Learning-rate warmup length; the schedule is constant after warmup.
const WARMUP_STEPS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Baseline,
    Surgery,
    GdOnly,
    GdKl,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Baseline => "baseline",
            Stage::Surgery => "surgery",
            Stage::GdOnly => "gd_only",
            Stage::GdKl => "gd_kl",
        }
    }

    pub fn output_provenance(self) -> Provenance {
        match self {
            Stage::Pretrain => Provenance::Pre,
            Stage::Baseline => Provenance::Baseline,
            Stage::Surgery => Provenance::Surgery,
            Stage::GdOnly => Provenance::Gd,
            Stage::GdKl => Provenance::GdKl,
        }
    }

    pub fn required_input(self) -> Provenance {
        match self {
            Stage::Pretrain | Stage::Baseline => Provenance::Base,
            _ => Provenance::Pre,
        }
    }

    pub fn objective_mode(self) -> Option<ObjectiveMode> {
        match self {
            Stage::Surgery => Some(ObjectiveMode::Full),
            Stage::GdOnly => Some(ObjectiveMode::GdOnly),
            Stage::GdKl => Some(ObjectiveMode::GdKl),
            _ => None,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage: Stage,
    pub steps: u64,
    pub batch_unl: usize,
    pub batch_upd: usize,
    pub batch_rtn: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip_norm: f64,
    pub retain_fraction: f64,
    pub seed: u64,
    pub eval_every: u64,
    pub chunk_len: usize,
    pub lambda_unl: f64,
    pub lambda_upd: f64,
    pub lambda_rtn: f64,
    /// Ascent clamp; unset means ln(vocab_size).
    pub unl_clamp_tau: Option<f64>,
    /// Pretraining memorization stop: mean CE on the unlearn corpus.
    pub stop_unl_ce: f64,
    /// Divergence guard on the retain KL term.
    pub kl_abort_nats: f64,
    #[serde(skip)]
    pub config_hash: [u8; 32],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: Stage::Pretrain,
            steps: 2200,
            batch_unl: 4,
            batch_upd: 0,
            batch_rtn: 4,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip_norm: 1.0,
            retain_fraction: 0.02,
            seed: 0,
            eval_every: 25,
            chunk_len: 256,
            lambda_unl: 1.0,
            lambda_upd: 1.0,
            lambda_rtn: 1.0,
            unl_clamp_tau: None,
            stop_unl_ce: 0.5,
            kl_abort_nats: 5.0,
            config_hash: [0; 32],
        }
    }
}

impl TrainConfig {
    pub fn default_for(stage: Stage) -> Self {
        let base = TrainConfig::default();
        match stage {
            Stage::Pretrain => TrainConfig { stage, ..base },
            Stage::Baseline => TrainConfig {
                stage,
                steps: 2600,
                batch_unl: 0,
                batch_upd: 2,
                batch_rtn: 10,
                ..base
            },
            Stage::Surgery | Stage::GdOnly | Stage::GdKl => TrainConfig {
                stage,
                steps: 300,
                batch_unl: 2,
                batch_upd: 2,
                batch_rtn: 2,
                learning_rate: 3e-4,
                eval_every: 10,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 && self.stage != Stage::Pretrain && self.stage != Stage::Baseline {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.retain_fraction > 0.0 && self.retain_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "retain_fraction must lie in (0, 1], got {}",
                self.retain_fraction
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        if self.chunk_len < 2 {
            return Err(Error::Config("chunk_len must be >= 2".into()));
        }
        Ok(())
    }

    pub fn weights_for_vocab(&self, vocab_size: usize) -> TermWeights {
        TermWeights {
            lambda_unl: self.lambda_unl,
            lambda_upd: self.lambda_upd,
            lambda_rtn: self.lambda_rtn,
            unl_clamp_tau: self
                .unl_clamp_tau
                .unwrap_or_else(|| (vocab_size as f64).ln()),
        }
    }

    fn lr_at(&self, step: u64) -> f64 {
        let warm = ((step + 1) as f64 / WARMUP_STEPS as f64).min(1.0);
        self.learning_rate * warm
    }
}

/// Where a stage starts: fresh parameters or a mid-stage checkpoint.
pub enum StartPoint<'a> {
    Fresh(&'a ModelParams<f32>),
    Resume(&'a Checkpoint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    CompletedSteps,
    MemorizationReached,
    Diverged { step: u64, reason: String },
}

impl StopReason {
    pub fn is_divergence(&self) -> bool {
        matches!(self, StopReason::Diverged { .. })
    }
}

pub struct StageResult {
    pub params: ModelParams<f32>,
    pub metrics: RunMetrics,
    pub stop: StopReason,
    pub checkpoint: Checkpoint,
}

struct StageState {
    params: ModelParams<f32>,
    adam: Adam<f32>,
    start_step: u64,
}

fn begin_stage(
    start: StartPoint,
    cfg: &TrainConfig,
    stage: Stage,
) -> Result<StageState> {
    cfg.validate()?;
    if cfg.stage != stage {
        return Err(Error::Config(format!(
            "config stage {} does not match invoked stage {stage}",
            cfg.stage
        )));
    }
    match start {
        StartPoint::Fresh(params) => {
            let required = stage.required_input();
            if params.provenance() != required {
                return Err(Error::Provenance {
                    expected: required.as_str().into(),
                    found: params.provenance().as_str().into(),
                });
            }
            let mut params = params.clone();
            params.set_provenance(stage.output_provenance());
            let adam = Adam::new(&params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            Ok(StageState {
                params,
                adam,
                start_step: 0,
            })
        }
        StartPoint::Resume(ckpt) => {
            if ckpt.params.provenance() != stage.output_provenance() {
                return Err(Error::Provenance {
                    expected: stage.output_provenance().as_str().into(),
                    found: ckpt.params.provenance().as_str().into(),
                });
            }
            if ckpt.config_hash != cfg.config_hash {
                return Err(Error::Integrity {
                    path: "<resume checkpoint>".into(),
                    reason: "config hash mismatch on resume".into(),
                });
            }
            if ckpt.step >= cfg.steps {
                return Err(Error::Contract(format!(
                    "checkpoint already at step {} of {}",
                    ckpt.step, cfg.steps
                )));
            }
            let params = ckpt.params.clone();
            let mut adam = Adam::new(&params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            if let Some(opt) = &ckpt.optimizer {
                adam.restore(opt.step, opt.m.clone(), opt.v.clone());
            }
            Ok(StageState {
                params,
                adam,
                start_step: ckpt.step,
            })
        }
    }
}

fn finish_stage(
    state: StageState,
    cfg: &TrainConfig,
    mut run: RunMetrics,
    stop: StopReason,
    final_step: u64,
    started: Instant,
) -> StageResult {
    run.final_step = final_step;
    run.total_wall_ms = started.elapsed().as_millis() as u64;
    let (opt_step, m, v) = state.adam.state();
    let checkpoint = Checkpoint {
        params: state.params.clone(),
        step: final_step,
        rng: RngState::from_seed_u64(cfg.seed ^ final_step),
        config_hash: cfg.config_hash,
        optimizer: Some(AdamSnapshot {
            step: opt_step,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            m: m.to_vec(),
            v: v.to_vec(),
        }),
    };
    StageResult {
        params: state.params,
        metrics: run,
        stop,
        checkpoint,
    }
}

/// Evenly spaced evaluation sample of a pool, at most `max` sequences.
fn eval_sample(pool: &SeqPool, max: usize) -> Vec<Vec<u32>> {
    let n = pool.seqs.len();
    if n <= max {
        return pool.seqs.clone();
    }
    (0..max).map(|i| pool.seqs[i * n / max].clone()).collect()
}

fn gather<'p>(pool: &'p SeqPool, idxs: &[usize]) -> Vec<Vec<u32>> {
    idxs.iter().map(|&i| pool.seqs[i].clone()).collect()
}

fn batch_tokens(batch: &[Vec<u32>]) -> u64 {
    batch.iter().map(|s| s.len() as u64).sum()
}

/// Continual pretraining on the unlearn and retain corpora, stopping early
/// once the unlearn corpus is memorized to `stop_unl_ce` nats.
pub fn pretrain(
    start: StartPoint,
    d_unl: &[&Document],
    d_rtn: &[&Document],
    cfg: &TrainConfig,
) -> Result<StageResult> {
    let mut state = begin_stage(start, cfg, Stage::Pretrain)?;
    if cfg.batch_unl == 0 || cfg.batch_rtn == 0 {
        return Err(Error::Config(
            "pretraining needs batch_unl and batch_rtn >= 1".into(),
        ));
    }
    let unl_pool = chunk_documents(d_unl, cfg.chunk_len);
    let rtn_pool = chunk_documents(d_rtn, cfg.chunk_len);
    if unl_pool.seqs.is_empty() || rtn_pool.seqs.is_empty() {
        return Err(Error::Contract("pretraining corpora are empty".into()));
    }
    let unl_eval = eval_sample(&unl_pool, 24);

    let mut run = RunMetrics::new(Stage::Pretrain, cfg.seed, cfg.config_hash);
    run.ledger.available_unl = unl_pool.total_tokens;
    run.ledger.available_rtn = rtn_pool.total_tokens;

    let mut unl_plan = BatchPlan::new(unl_pool.seqs.len(), cfg.batch_unl, cfg.seed ^ 0xA1);
    let mut rtn_plan = BatchPlan::new(rtn_pool.seqs.len(), cfg.batch_rtn, cfg.seed ^ 0xB2);
    let mut grads = GradBuffer::zeros_like(&state.params);
    let started = Instant::now();
    let mut stop = StopReason::CompletedSteps;
    let mut last_good = state.params.clone();
    let mut final_step = state.start_step;

    for step in state.start_step..cfg.steps {
        let unl_batch = gather(&unl_pool, &unl_plan.indices_for_step(step));
        let rtn_batch = gather(&rtn_pool, &rtn_plan.indices_for_step(step));
        run.ledger.consumed_unl += batch_tokens(&unl_batch);
        run.ledger.consumed_rtn += batch_tokens(&rtn_batch);
        let mut combined = unl_batch;
        combined.extend(rtn_batch);

        grads.reset();
        let per_seq = match dataset_ce_backward(&state.params, &combined, &mut grads) {
            Ok(v) => v,
            Err(e @ Error::NonFinite { .. }) => {
                stop = StopReason::Diverged {
                    step,
                    reason: e.to_string(),
                };
                state.params = last_good;
                final_step = step;
                break;
            }
            Err(e) => return Err(e),
        };
        clip_global_norm(&mut grads, cfg.grad_clip_norm);
        state.adam.step(&mut state.params, &grads, cfg.lr_at(step));
        final_step = step + 1;

        if final_step % cfg.eval_every == 0 || final_step == cfg.steps {
            let unl_ce = dataset_ce_term(&state.params, &unl_eval)?;
            let batch_ce = per_seq.iter().sum::<f64>() / per_seq.len() as f64;
            run.push(MetricsRecord {
                step: final_step,
                ce_unl: unl_ce,
                ce_upd: 0.0,
                kl_rtn: 0.0,
                loss: batch_ce,
                tokens_unl: run.ledger.consumed_unl,
                tokens_upd: 0,
                tokens_rtn: run.ledger.consumed_rtn,
                wall_ms: started.elapsed().as_millis() as u64,
            });
            last_good = state.params.clone();
            if unl_ce < cfg.stop_unl_ce {
                stop = StopReason::MemorizationReached;
                break;
            }
        }
    }

    Ok(finish_stage(state, cfg, run, stop, final_step, started))
}

/// The naive comparison model: continual pretraining on the update corpus
/// plus the full retain corpus.
pub fn train_baseline(
    start: StartPoint,
    d_upd: &[&Document],
    d_rtn_full: &[&Document],
    cfg: &TrainConfig,
) -> Result<StageResult> {
    let mut state = begin_stage(start, cfg, Stage::Baseline)?;
    if cfg.batch_upd == 0 || cfg.batch_rtn == 0 {
        return Err(Error::Config(
            "baseline training needs batch_upd and batch_rtn >= 1".into(),
        ));
    }
    let upd_pool = chunk_documents(d_upd, cfg.chunk_len);
    let rtn_pool = chunk_documents(d_rtn_full, cfg.chunk_len);
    if upd_pool.seqs.is_empty() || rtn_pool.seqs.is_empty() {
        return Err(Error::Contract("baseline corpora are empty".into()));
    }

    let mut run = RunMetrics::new(Stage::Baseline, cfg.seed, cfg.config_hash);
    run.ledger.available_upd = upd_pool.total_tokens;
    run.ledger.available_rtn = rtn_pool.total_tokens;

    let mut upd_plan = BatchPlan::new(upd_pool.seqs.len(), cfg.batch_upd, cfg.seed ^ 0xC3);
    let mut rtn_plan = BatchPlan::new(rtn_pool.seqs.len(), cfg.batch_rtn, cfg.seed ^ 0xD4);
    let mut grads = GradBuffer::zeros_like(&state.params);
    let started = Instant::now();
    let mut stop = StopReason::CompletedSteps;
    let mut last_good = state.params.clone();
    let mut final_step = state.start_step;

    for step in state.start_step..cfg.steps {
        let upd_batch = gather(&upd_pool, &upd_plan.indices_for_step(step));
        let rtn_batch = gather(&rtn_pool, &rtn_plan.indices_for_step(step));
        run.ledger.consumed_upd += batch_tokens(&upd_batch);
        run.ledger.consumed_rtn += batch_tokens(&rtn_batch);
        let n_upd = upd_batch.len();
        let mut combined = upd_batch;
        combined.extend(rtn_batch);

        grads.reset();
        let per_seq = match dataset_ce_backward(&state.params, &combined, &mut grads) {
            Ok(v) => v,
            Err(e @ Error::NonFinite { .. }) => {
                stop = StopReason::Diverged {
                    step,
                    reason: e.to_string(),
                };
                state.params = last_good;
                final_step = step;
                break;
            }
            Err(e) => return Err(e),
        };
        clip_global_norm(&mut grads, cfg.grad_clip_norm);
        state.adam.step(&mut state.params, &grads, cfg.lr_at(step));
        final_step = step + 1;

        if final_step % cfg.eval_every == 0 || final_step == cfg.steps {
            let upd_ce = per_seq[..n_upd].iter().sum::<f64>() / n_upd as f64;
            let batch_ce = per_seq.iter().sum::<f64>() / per_seq.len() as f64;
            run.push(MetricsRecord {
                step: final_step,
                ce_unl: 0.0,
                ce_upd: upd_ce,
                kl_rtn: 0.0,
                loss: batch_ce,
                tokens_unl: 0,
                tokens_upd: run.ledger.consumed_upd,
                tokens_rtn: run.ledger.consumed_rtn,
                wall_ms: started.elapsed().as_millis() as u64,
            });
            last_good = state.params.clone();
        }
    }

    Ok(finish_stage(state, cfg, run, stop, final_step, started))
}

/// The editing stage: each step draws one minibatch from every corpus the
/// mode uses, takes one optimizer step on the joint objective, and aborts
/// if the loss turns non-finite or the retain KL passes the guard.
pub fn run_surgery(
    start: StartPoint,
    ref_pre: &ModelParams<f32>,
    d_unl: &[&Document],
    d_upd: &[&Document],
    rtn_subset: &[&Document],
    cfg: &TrainConfig,
) -> Result<StageResult> {
    let stage = cfg.stage;
    let mode = stage.objective_mode().ok_or_else(|| {
        Error::Config(format!("{stage} is not an editing stage"))
    })?;
    if ref_pre.provenance() != Provenance::Pre {
        return Err(Error::Provenance {
            expected: Provenance::Pre.as_str().into(),
            found: ref_pre.provenance().as_str().into(),
        });
    }
    let mut state = begin_stage(start, cfg, stage)?;

    let use_unl = mode == ObjectiveMode::Full;
    let use_rtn = mode != ObjectiveMode::GdOnly;
    if cfg.batch_upd == 0 || (use_unl && cfg.batch_unl == 0) || (use_rtn && cfg.batch_rtn == 0) {
        return Err(Error::Config(format!(
            "stage {stage} needs nonzero batch sizes for its active corpora"
        )));
    }

    let unl_pool = chunk_documents(d_unl, cfg.chunk_len);
    let upd_pool = chunk_documents(d_upd, cfg.chunk_len);
    let rtn_pool = chunk_documents(rtn_subset, cfg.chunk_len);
    if upd_pool.seqs.is_empty()
        || (use_unl && unl_pool.seqs.is_empty())
        || (use_rtn && rtn_pool.seqs.is_empty())
    {
        return Err(Error::Contract("editing corpora are empty".into()));
    }

    let mut run = RunMetrics::new(stage, cfg.seed, cfg.config_hash);
    run.ledger.available_unl = if use_unl { unl_pool.total_tokens } else { 0 };
    run.ledger.available_upd = upd_pool.total_tokens;
    run.ledger.available_rtn = if use_rtn { rtn_pool.total_tokens } else { 0 };

    let weights = cfg.weights_for_vocab(state.params.config().vocab_size);
    let mut unl_plan = use_unl
        .then(|| BatchPlan::new(unl_pool.seqs.len(), cfg.batch_unl, cfg.seed ^ 0xE5));
    let mut upd_plan = BatchPlan::new(upd_pool.seqs.len(), cfg.batch_upd, cfg.seed ^ 0xF6);
    let mut rtn_plan = use_rtn
        .then(|| BatchPlan::new(rtn_pool.seqs.len(), cfg.batch_rtn, cfg.seed ^ 0x17));

    let mut grads = GradBuffer::zeros_like(&state.params);
    let started = Instant::now();
    let mut stop = StopReason::CompletedSteps;
    let mut last_good = state.params.clone();
    let mut final_step = state.start_step;

    for step in state.start_step..cfg.steps {
        let batches = BatchTriple {
            unl: unl_plan
                .as_mut()
                .map(|p| gather(&unl_pool, &p.indices_for_step(step)))
                .unwrap_or_default(),
            upd: gather(&upd_pool, &upd_plan.indices_for_step(step)),
            rtn: rtn_plan
                .as_mut()
                .map(|p| gather(&rtn_pool, &p.indices_for_step(step)))
                .unwrap_or_default(),
        };
        run.ledger.consumed_unl += batch_tokens(&batches.unl);
        run.ledger.consumed_upd += batch_tokens(&batches.upd);
        run.ledger.consumed_rtn += batch_tokens(&batches.rtn);

        grads.reset();
        let (loss, terms) = match surgery_loss_backward(
            &state.params,
            ref_pre,
            &batches,
            &weights,
            mode,
            &mut grads,
        ) {
            Ok(v) => v,
            Err(e @ Error::NonFinite { .. }) => {
                stop = StopReason::Diverged {
                    step,
                    reason: e.to_string(),
                };
                state.params = last_good;
                final_step = step;
                break;
            }
            Err(e) => return Err(e),
        };
        if use_rtn && terms.kl_rtn > cfg.kl_abort_nats {
            stop = StopReason::Diverged {
                step,
                reason: format!(
                    "retain KL {:.3} nats exceeded the {:.1}-nat guard",
                    terms.kl_rtn, cfg.kl_abort_nats
                ),
            };
            state.params = last_good;
            final_step = step;
            break;
        }
        clip_global_norm(&mut grads, cfg.grad_clip_norm);
        state.adam.step(&mut state.params, &grads, cfg.lr_at(step));
        final_step = step + 1;

        if final_step % cfg.eval_every == 0 || final_step == cfg.steps {
            run.push(MetricsRecord {
                step: final_step,
                ce_unl: terms.ce_unl,
                ce_upd: terms.ce_upd,
                kl_rtn: terms.kl_rtn,
                loss,
                tokens_unl: run.ledger.consumed_unl,
                tokens_upd: run.ledger.consumed_upd,
                tokens_rtn: run.ledger.consumed_rtn,
                wall_ms: started.elapsed().as_millis() as u64,
            });
            last_good = state.params.clone();
        }
    }

    Ok(finish_stage(state, cfg, run, stop, final_step, started))
}
