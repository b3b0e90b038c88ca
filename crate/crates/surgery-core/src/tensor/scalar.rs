//! Element-type abstraction for the tensor core.
//!
//! Training runs at `f32` for speed; every gradient-verification path runs the
//! same code at `f64`, where central-difference comparisons are meaningful.

use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point element type usable by tensors, models, and losses.
///
/// The `gemm` hook dispatches to the matching `matrixmultiply` kernel so that
/// both precisions share one cache-blocked matrix multiply.
pub trait Scalar:
    num_traits::Float + Debug + Default + Send + Sync + Sum + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// C = alpha * A(m x k) * B(k x n) + beta * C, with explicit row/column
    /// strides so transposed views never materialize.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
        rsc: isize,
        csc: isize,
    ) {
        debug_assert!(gemm_bounds_ok(m, k, n, a.len(), b.len(), c.len(), rsa, csa, rsb, csb, rsc, csc));
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            );
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
        rsc: isize,
        csc: isize,
    ) {
        debug_assert!(gemm_bounds_ok(m, k, n, a.len(), b.len(), c.len(), rsa, csa, rsb, csb, rsc, csc));
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            );
        }
    }
}

/// Highest index any (row, col) access can touch must stay within each buffer.
#[allow(clippy::too_many_arguments)]
fn gemm_bounds_ok(
    m: usize,
    k: usize,
    n: usize,
    a_len: usize,
    b_len: usize,
    c_len: usize,
    rsa: isize,
    csa: isize,
    rsb: isize,
    csb: isize,
    rsc: isize,
    csc: isize,
) -> bool {
    fn max_index(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
        if rows == 0 || cols == 0 {
            return 0;
        }
        ((rows as isize - 1) * rs + (cols as isize - 1) * cs) as usize + 1
    }
    max_index(m, k, rsa, csa) <= a_len
        && max_index(k, n, rsb, csb) <= b_len
        && max_index(m, n, rsc, csc) <= c_len
}

/// Shorthand for lifting literals into the generic element type.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x)
}
