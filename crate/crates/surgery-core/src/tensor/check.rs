//! Finite-difference verification of analytic gradients.
//!
//! The checker is the independent oracle for every differentiable primitive
//! and for whole losses: it never consults the tape's backward rules, only
//! forward evaluations at perturbed inputs.

use super::{GradTape, Scalar, Tensor};
use crate::error::{Error, Result};

/// Compares the analytic gradient of `f` at `x` against central finite
/// differences with step `h`, returning the maximum relative error
/// `|analytic - numeric| / (|analytic| + |numeric| + 1e-12)` over all
/// coordinates.
///
/// `f` must build a scalar from `x` on the supplied tape. Run this at `f64`;
/// 32-bit rounding swamps the comparison.
pub fn gradient_check<T, F>(f: F, x: &Tensor<T>, h: T) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut GradTape<T>, &Tensor<T>) -> Result<Tensor<T>>,
{
    let base = x.value();
    let shape = x.shape();

    // Analytic pass.
    let leaf = Tensor::leaf(shape.clone(), base.clone(), true)?;
    let mut tape = GradTape::new();
    let out = f(&mut tape, &leaf)?;
    if out.numel() != 1 {
        return Err(Error::Contract(format!(
            "gradient_check requires a scalar-valued function, got shape {:?}",
            out.shape()
        )));
    }
    tape.backward(&out)?;
    let analytic = leaf
        .grad()
        .ok_or_else(|| Error::Contract("no gradient reached the checked tensor".into()))?;

    // Numeric pass, one coordinate at a time.
    let mut max_rel = 0.0f64;
    let mut probe = base.clone();
    for i in 0..base.len() {
        let orig = probe[i];

        probe[i] = orig + h;
        let plus = eval_scalar(&f, &shape, &probe)?;
        probe[i] = orig - h;
        let minus = eval_scalar(&f, &shape, &probe)?;
        probe[i] = orig;

        let numeric = (plus - minus) / (2.0 * h.as_f64());
        let a = analytic[i].as_f64();
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

fn eval_scalar<T, F>(f: &F, shape: &[usize], data: &[T]) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut GradTape<T>, &Tensor<T>) -> Result<Tensor<T>>,
{
    let leaf = Tensor::leaf(shape.to_vec(), data.to_vec(), false)?;
    let mut tape = GradTape::new();
    let out = f(&mut tape, &leaf)?;
    if out.numel() != 1 {
        return Err(Error::Contract(
            "gradient_check requires a scalar-valued function".into(),
        ));
    }
    Ok(out.item().as_f64())
}
