use num_traits::Float;
use std::fmt::Debug;

use crate::numkit::Tensor;

/// Floating-point element type of the kernel: `f32` for training, `f64` for
/// gradient-check shadow copies.
pub trait Real: Float + Debug + Default + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `c ← alpha·a·b + beta·c` with arbitrary strides.
    ///
    /// # Safety
    /// Strides and extents must address memory inside the given slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

// The three products below are the only matrix shapes the layers need. Each
// checks extents before handing pointers to the packed kernel.

/// `a[m×k] · b[n×k]ᵀ → [m×n]`
pub fn matmul_nt<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    assert_eq!(k, b.cols(), "matmul_nt inner dims");
    let mut c = Tensor::zeros(&[m, n]);
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.data().as_ptr(),
            k as isize,
            1,
            b.data().as_ptr(),
            1,
            k as isize,
            T::zero(),
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// `a[m×k] · b[k×n] → [m×n]`
pub fn matmul_nn<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(k, b.rows(), "matmul_nn inner dims");
    let mut c = Tensor::zeros(&[m, n]);
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.data().as_ptr(),
            k as isize,
            1,
            b.data().as_ptr(),
            n as isize,
            1,
            T::zero(),
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub fn matmul_tn_acc<T: Real>(c: &mut Tensor<T>, a: &Tensor<T>, b: &Tensor<T>) {
    let (k, m, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(k, b.rows(), "matmul_tn_acc inner dims");
    assert_eq!((c.rows(), c.cols()), (m, n), "matmul_tn_acc output dims");
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.data().as_ptr(),
            1,
            m as isize,
            b.data().as_ptr(),
            n as isize,
            1,
            T::one(),
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
