//! The three-term editing objective and its ablations.
//!
//! The minimized scalar is
//!
//! ```text
//! J = -lambda_unl * CE(unlearn) + lambda_upd * CE(update) + lambda_rtn * KL(retain)
//! ```
//!
//! so one descent step ascends cross-entropy on the unlearn batch, descends
//! it on the update batch, and pulls the next-token distributions on retain
//! text toward a frozen reference model. Both cross-entropy terms average
//! per sequence over predicted positions, then over the batch; the KL term
//! is averaged the same way and sums over the full vocabulary.
//!
//! The ascent term carries a per-token ceiling: once a token's cross-entropy
//! exceeds `unl_clamp_tau`, that token stops contributing gradient (its
//! value is still reported), which keeps the ascent from diverging once the
//! model is at uniform-level ignorance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{forward_on_tape, ModelParams};
use crate::tensor::{lit, GradTape, Scalar, Tensor};

/// Term weights and the ascent clamp. The defaults are unit weights with the
/// clamp at ln(vocab_size); set the clamp to infinity to disable it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeights {
    pub lambda_unl: f64,
    pub lambda_upd: f64,
    pub lambda_rtn: f64,
    pub unl_clamp_tau: f64,
}

impl TermWeights {
    pub fn for_vocab(vocab_size: usize) -> Self {
        TermWeights {
            lambda_unl: 1.0,
            lambda_upd: 1.0,
            lambda_rtn: 1.0,
            unl_clamp_tau: (vocab_size as f64).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_unl < 0.0 || self.lambda_upd < 0.0 || self.lambda_rtn < 0.0 {
            return Err(Error::Contract("term weights must be non-negative".into()));
        }
        if !(self.unl_clamp_tau > 0.0) {
            return Err(Error::Contract(format!(
                "unl_clamp_tau must be positive, got {}",
                self.unl_clamp_tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// All three terms.
    Full,
    /// Gradient descent on the update batch only.
    GdOnly,
    /// Update descent plus retention, no ascent.
    GdKl,
}

/// One step's worth of token sequences per corpus.
#[derive(Debug, Clone, Default)]
pub struct BatchTriple {
    pub unl: Vec<Vec<u32>>,
    pub upd: Vec<Vec<u32>>,
    pub rtn: Vec<Vec<u32>>,
}

/// The three unweighted term values (mean CE, mean CE, mean KL).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValues {
    pub ce_unl: f64,
    pub ce_upd: f64,
    pub kl_rtn: f64,
}

/// Gradient accumulator aligned with [`ModelParams::buffers`].
#[derive(Debug, Clone)]
pub struct GradBuffer<T> {
    bufs: Vec<Vec<T>>,
}

impl<T: Scalar> GradBuffer<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        GradBuffer {
            bufs: params
                .buffers()
                .iter()
                .map(|b| vec![T::zero(); b.data.len()])
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for b in &mut self.bufs {
            for v in b.iter_mut() {
                *v = T::zero();
            }
        }
    }

    pub fn accumulate(&mut self, contributions: &[Vec<T>]) {
        debug_assert_eq!(self.bufs.len(), contributions.len());
        for (dst, src) in self.bufs.iter_mut().zip(contributions) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *d + *s;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.bufs
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        let f = T::from_f64(factor);
        for b in &mut self.bufs {
            for v in b.iter_mut() {
                *v = *v * f;
            }
        }
    }

    pub fn buffers(&self) -> &[Vec<T>] {
        &self.bufs
    }
}

/// Cross-entropy of a probability vector against a one-hot target:
/// `-ln(dist[target])`, floored at a machine-floor probability of 1e-12.
pub fn token_cross_entropy<T: Scalar>(dist: &[T], target: usize) -> Result<T> {
    if target >= dist.len() {
        return Err(Error::Vocab {
            id: target as u32,
            vocab_size: dist.len(),
        });
    }
    let p = dist[target].max(lit::<T>(1e-12));
    Ok(-p.ln())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TermKind {
    CeUnl,
    CeUpd,
    Kl,
}

struct SeqOutcome<T> {
    value: f64,
    grads: Option<Vec<Vec<T>>>,
}

/// Forward (and optionally backward) for one sequence under one term.
fn run_sequence<T: Scalar>(
    params: &ModelParams<T>,
    ref_params: Option<&ModelParams<T>>,
    tokens: &[u32],
    kind: TermKind,
    tau: f64,
    seed_coeff: Option<f64>,
) -> Result<SeqOutcome<T>> {
    let len = tokens.len();
    if len < 2 {
        return Err(Error::Contract(format!(
            "objective sequences need length >= 2, got {len}"
        )));
    }
    let with_grad = seed_coeff.is_some();
    let mut tape = GradTape::new();
    let leased = params.lease(with_grad);
    let (logits, _) = forward_on_tape(&mut tape, &leased, tokens, false)?;
    let n_pred = len - 1;
    let v = params.config().vocab_size;

    // Distributions predicting positions 2..=len: logits rows 0..len-1; the
    // final row predicts past the end of the sequence and is dropped.
    let pred_logits = tape.slice_rows(&logits, 0, n_pred)?;

    let per_pos: Tensor<T> = match kind {
        TermKind::CeUnl | TermKind::CeUpd => tape.ce_from_logits(&pred_logits, &tokens[1..])?,
        TermKind::Kl => {
            let refp = ref_params.expect("retain term requires a reference model");
            let ref_leased = refp.lease(false);
            let mut ref_tape = GradTape::new();
            let (ref_logits, _) = forward_on_tape(&mut ref_tape, &ref_leased, tokens, false)?;
            let ref_lp = log_softmax_rows(&ref_logits.value(), n_pred, v);
            tape.kl_from_logits(&pred_logits, &ref_lp)?
        }
    };

    // Ascent clamp: tokens already past tau stop contributing gradient.
    let pooled = if kind == TermKind::CeUnl && tau.is_finite() {
        let mask: Vec<T> = per_pos
            .value()
            .iter()
            .map(|&ce| {
                if ce.as_f64() > tau {
                    T::zero()
                } else {
                    T::one()
                }
            })
            .collect();
        tape.grad_mask(&per_pos, mask)?
    } else {
        per_pos
    };
    let weights = vec![lit::<T>(1.0 / n_pred as f64); n_pred];
    let seq_mean = tape.dot_const(&pooled, &weights)?;
    let value = seq_mean.item().as_f64();

    let grads = if let Some(coeff) = seed_coeff {
        tape.backward_seeded(&seq_mean, T::from_f64(coeff))?;
        Some(leased.grads())
    } else {
        None
    };
    Ok(SeqOutcome { value, grads })
}

fn log_softmax_rows<T: Scalar>(data: &[T], rows: usize, v: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * v];
    for r in 0..rows {
        let row = &data[r * v..(r + 1) * v];
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = mx
            + row
                .iter()
                .map(|&x| (x - mx).exp())
                .fold(T::zero(), |s, e| s + e)
                .ln();
        for c in 0..v {
            out[r * v + c] = row[c] - lse;
        }
    }
    out
}

fn check_sequences<T: Scalar>(params: &ModelParams<T>, batch: &[Vec<u32>]) -> Result<()> {
    let ctx = params.config().ctx_len;
    for s in batch {
        if s.len() < 2 || s.len() > ctx {
            return Err(Error::Contract(format!(
                "sequence length {} outside [2, {ctx}]",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Batch-mean cross-entropy: per-sequence token average over predicted
/// positions, then arithmetic mean over the batch.
pub fn dataset_ce_term<T: Scalar>(params: &ModelParams<T>, batch: &[Vec<u32>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("dataset_ce_term on an empty batch".into()));
    }
    check_sequences(params, batch)?;
    let outcomes: Vec<SeqOutcome<T>> = batch
        .par_iter()
        .map(|s| run_sequence(params, None, s, TermKind::CeUpd, f64::INFINITY, None))
        .collect::<Result<_>>()?;
    Ok(outcomes.iter().map(|o| o.value).sum::<f64>() / batch.len() as f64)
}

/// Standard next-token training loss: like [`dataset_ce_term`] but also
/// accumulating d(mean CE)/dparams into `grads`. Returns the per-sequence
/// mean cross-entropies so callers can attribute the batch to its corpora.
pub fn dataset_ce_backward<T: Scalar>(
    params: &ModelParams<T>,
    batch: &[Vec<u32>],
    grads: &mut GradBuffer<T>,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Contract("dataset_ce_backward on an empty batch".into()));
    }
    check_sequences(params, batch)?;
    let coeff = 1.0 / batch.len() as f64;
    let outcomes: Vec<SeqOutcome<T>> = batch
        .par_iter()
        .map(|s| {
            run_sequence(
                params,
                None,
                s,
                TermKind::CeUpd,
                f64::INFINITY,
                Some(coeff),
            )
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        grads.accumulate(o.grads.as_ref().expect("gradient pass"));
        values.push(o.value);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite {
            context: "next-token training loss".into(),
            ce_unl: 0.0,
            ce_upd: mean,
            kl_rtn: 0.0,
        });
    }
    Ok(values)
}

/// Batch-mean full-vocabulary KL divergence from `params` to a frozen
/// reference, averaged like [`dataset_ce_term`]. Gradients flow only
/// through `params` when used inside [`surgery_loss_backward`].
pub fn kl_term<T: Scalar>(
    params: &ModelParams<T>,
    ref_params: &ModelParams<T>,
    batch: &[Vec<u32>],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("kl_term on an empty batch".into()));
    }
    if !params.config().same_arch(ref_params.config()) {
        return Err(Error::Contract(
            "kl_term requires architecturally identical models".into(),
        ));
    }
    check_sequences(params, batch)?;
    let outcomes: Vec<SeqOutcome<T>> = batch
        .par_iter()
        .map(|s| {
            run_sequence(
                params,
                Some(ref_params),
                s,
                TermKind::Kl,
                f64::INFINITY,
                None,
            )
        })
        .collect::<Result<_>>()?;
    Ok(outcomes.iter().map(|o| o.value).sum::<f64>() / batch.len() as f64)
}

fn check_mode_batches(mode: ObjectiveMode, batches: &BatchTriple) -> Result<()> {
    let (u, d, r) = (
        !batches.unl.is_empty(),
        !batches.upd.is_empty(),
        !batches.rtn.is_empty(),
    );
    let ok = match mode {
        ObjectiveMode::Full => u && d && r,
        ObjectiveMode::GdOnly => !u && d && !r,
        ObjectiveMode::GdKl => !u && d && r,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "batches (unl={u}, upd={d}, rtn={r}) inconsistent with mode {mode:?}"
        )))
    }
}

fn assemble<T: Scalar>(
    params: &ModelParams<T>,
    ref_params: &ModelParams<T>,
    batches: &BatchTriple,
    weights: &TermWeights,
    mode: ObjectiveMode,
    with_grad: bool,
) -> Result<(f64, TermValues, Option<GradBuffer<T>>)> {
    weights.validate()?;
    check_mode_batches(mode, batches)?;
    if !params.config().same_arch(ref_params.config()) {
        return Err(Error::Contract(
            "surgery model and reference model differ architecturally".into(),
        ));
    }
    check_sequences(params, &batches.unl)?;
    check_sequences(params, &batches.upd)?;
    check_sequences(params, &batches.rtn)?;

    struct Job<'a> {
        kind: TermKind,
        tokens: &'a [u32],
        coeff: f64,
    }
    let mut jobs = Vec::new();
    for s in &batches.unl {
        jobs.push(Job {
            kind: TermKind::CeUnl,
            tokens: s,
            coeff: -weights.lambda_unl / batches.unl.len() as f64,
        });
    }
    for s in &batches.upd {
        jobs.push(Job {
            kind: TermKind::CeUpd,
            tokens: s,
            coeff: weights.lambda_upd / batches.upd.len() as f64,
        });
    }
    for s in &batches.rtn {
        jobs.push(Job {
            kind: TermKind::Kl,
            tokens: s,
            coeff: weights.lambda_rtn / batches.rtn.len() as f64,
        });
    }

    let outcomes: Vec<(TermKind, SeqOutcome<T>)> = jobs
        .par_iter()
        .map(|job| {
            let out = run_sequence(
                params,
                Some(ref_params),
                job.tokens,
                job.kind,
                weights.unl_clamp_tau,
                with_grad.then_some(job.coeff),
            )?;
            Ok((job.kind, out))
        })
        .collect::<Result<_>>()?;

    let mean_of = |kind: TermKind| -> f64 {
        let vals: Vec<f64> = outcomes
            .iter()
            .filter(|(k, _)| *k == kind)
            .map(|(_, o)| o.value)
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let terms = TermValues {
        ce_unl: mean_of(TermKind::CeUnl),
        ce_upd: mean_of(TermKind::CeUpd),
        kl_rtn: mean_of(TermKind::Kl),
    };
    let loss = -weights.lambda_unl * terms.ce_unl
        + weights.lambda_upd * terms.ce_upd
        + weights.lambda_rtn * terms.kl_rtn;

    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "surgery loss".into(),
            ce_unl: terms.ce_unl,
            ce_upd: terms.ce_upd,
            kl_rtn: terms.kl_rtn,
        });
    }

    let grads = if with_grad {
        // Fixed accumulation order keeps training bit-reproducible at any
        // thread count.
        let mut buf = GradBuffer::zeros_like(params);
        for (_, o) in &outcomes {
            buf.accumulate(o.grads.as_ref().expect("with_grad outcomes carry grads"));
        }
        Some(buf)
    } else {
        None
    };
    Ok((loss, terms, grads))
}

/// The minimized objective and its three unweighted term values.
///
/// Modes zero out excluded terms entirely: `gd_only` is descent on the
/// update batch alone, `gd_kl` adds retention, `full` adds the ascent term.
pub fn surgery_loss<T: Scalar>(
    params: &ModelParams<T>,
    ref_params: &ModelParams<T>,
    batches: &BatchTriple,
    weights: &TermWeights,
    mode: ObjectiveMode,
) -> Result<(f64, TermValues)> {
    let (loss, terms, _) = assemble(params, ref_params, batches, weights, mode, false)?;
    Ok((loss, terms))
}

/// As [`surgery_loss`], also accumulating dJ/dparams into `grads`.
pub fn surgery_loss_backward<T: Scalar>(
    params: &ModelParams<T>,
    ref_params: &ModelParams<T>,
    batches: &BatchTriple,
    weights: &TermWeights,
    mode: ObjectiveMode,
    grads: &mut GradBuffer<T>,
) -> Result<(f64, TermValues)> {
    let (loss, terms, new_grads) = assemble(params, ref_params, batches, weights, mode, true)?;
    grads.accumulate(new_grads.expect("gradient pass").buffers());
    Ok((loss, terms))
}

#[cfg(test)]
mod tests;
