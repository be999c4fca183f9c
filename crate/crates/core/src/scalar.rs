//! Floating-point scalar abstraction shared by the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Element type of vectors, matrices and network parameters: `f32` or `f64`.
///
/// Besides the usual float arithmetic, a scalar knows how to run a strided
/// general matrix product, which is where training spends nearly all its time.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly rounded) in both impls.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal converts to scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `C ← α·A·B + β·C` for an `m×k` by `k×n` product with arbitrary strides.
    ///
    /// Strides are in elements: `a[i*rsa + l*csa]` is `A[i][l]`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        beta: Self,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    );
}

// Below this many multiply-adds the packing overhead of the blocked kernel
// outweighs its benefit.
const SMALL_GEMM: usize = 4096;

fn last_index(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs
    }
}

#[allow(clippy::too_many_arguments)]
fn check_extents<T>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    rsa: usize,
    csa: usize,
    b: &[T],
    rsb: usize,
    csb: usize,
    c: &[T],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(last_index(m, k, rsa, csa) < a.len(), "gemm: A too short");
        assert!(last_index(k, n, rsb, csb) < b.len(), "gemm: B too short");
    }
    assert!(last_index(m, n, rsc, csc) < c.len(), "gemm: C too short");
}

#[allow(clippy::too_many_arguments)]
fn naive_gemm<T: Float + NumAssign>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    rsa: usize,
    csa: usize,
    b: &[T],
    rsb: usize,
    csb: usize,
    beta: T,
    c: &mut [T],
    rsc: usize,
    csc: usize,
) {
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for l in 0..k {
                acc += a[i * rsa + l * csa] * b[l * rsb + j * csb];
            }
            let slot = &mut c[i * rsc + j * csc];
            *slot = if beta == T::zero() {
                alpha * acc
            } else {
                alpha * acc + beta * *slot
            };
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: usize,
                csa: usize,
                b: &[Self],
                rsb: usize,
                csb: usize,
                beta: Self,
                c: &mut [Self],
                rsc: usize,
                csc: usize,
            ) {
                check_extents(m, k, n, a, rsa, csa, b, rsb, csb, c, rsc, csc);
                if m == 0 || n == 0 {
                    return;
                }
                if m * n * k < SMALL_GEMM {
                    naive_gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
                    return;
                }
                // SAFETY: every index touched by the kernel is bounded by the
                // extents verified in `check_extents`, and `c` is uniquely borrowed.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        beta,
                        c.as_mut_ptr(),
                        rsc as isize,
                        csc as isize,
                    );
                }
            }
        }
    };
}

impl_scalar!(f64, matrixmultiply::dgemm);
impl_scalar!(f32, matrixmultiply::sgemm);
