//! Minimal dense/sparse kernels with reverse-mode gradients.
//!
//! Everything is rank ≤ 2 and row-major. Training runs in f32; the same
//! tape code runs in f64 for finite-difference gradient checking, where
//! f32 rounding would drown the comparison.

pub mod params;
pub mod tape;

pub use params::{grad_check, CheckpointError, LossFn, ParamStore};
pub use tape::{ParamVars, Tape, Var};

use crate::graph::NormalizedAdjacency;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Element type of tensors: f32 for training, f64 for gradient checks.
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    fn minimum(self, other: Self) -> Self;
    /// C ← alpha·A·B + beta·C for row-major buffers with explicit strides.
    ///
    /// # Safety
    /// Pointers must cover m×k, k×n and m×n elements under the given
    /// strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
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

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn maximum(self, other: Self) -> Self {
                self.max(other)
            }
            fn minimum(self, other: Self) -> Self {
                self.min(other)
            }
            unsafe fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
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
            ) {
                $gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Dense row-major matrix. Vectors are 1×n or n×1; scalars are 1×1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![S::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        Tensor { rows, cols, data }
    }

    pub fn scalar(x: S) -> Self {
        Tensor::from_vec(1, 1, vec![x])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, x: S) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = x;
    }

    pub fn item(&self) -> S {
        assert_eq!(self.shape(), (1, 1), "item() requires a 1x1 tensor");
        self.data[0]
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| T::from_f64(x.to_f64())).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_f64() * x.to_f64())
            .sum::<f64>()
            .sqrt()
    }
}

/// Sparse matrix in CSR form, used for Â and block-diagonal batches of Â.
#[derive(Debug, Clone)]
pub struct SparseMatrix<S: Scalar> {
    pub n: usize,
    pub row_ptr: Vec<u32>,
    pub col: Vec<u32>,
    pub vals: Vec<S>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn from_normalized(a: &NormalizedAdjacency) -> Self {
        let n = a.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for v in 0..n {
            let (cols, values) = a.row(v);
            col.extend_from_slice(cols);
            vals.extend(values.iter().map(|&x| S::from_f64(x as f64)));
            row_ptr.push(col.len() as u32);
        }
        SparseMatrix {
            n,
            row_ptr,
            col,
            vals,
        }
    }

    /// Block-diagonal concatenation, in order.
    pub fn block_diagonal(blocks: &[SparseMatrix<S>]) -> Self {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let nnz: usize = blocks.iter().map(|b| b.col.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        let mut offset = 0u32;
        for b in blocks {
            for v in 0..b.n {
                let (s, e) = (b.row_ptr[v] as usize, b.row_ptr[v + 1] as usize);
                col.extend(b.col[s..e].iter().map(|&c| c + offset));
                vals.extend_from_slice(&b.vals[s..e]);
                row_ptr.push(col.len() as u32);
            }
            offset += b.n as u32;
        }
        SparseMatrix {
            n,
            row_ptr,
            col,
            vals,
        }
    }

    /// out ← A·h, h and out dense (n×c).
    pub fn mul_dense(&self, h: &Tensor<S>, out: &mut Tensor<S>) {
        assert_eq!(
            h.rows, self.n,
            "spmm shape mismatch: matrix {}x{}, H {}x{}",
            self.n, self.n, h.rows, h.cols
        );
        assert_eq!(out.shape(), (self.n, h.cols));
        let c = h.cols;
        for r in 0..self.n {
            let (s, e) = (self.row_ptr[r] as usize, self.row_ptr[r + 1] as usize);
            let row_out = &mut out.data[r * c..(r + 1) * c];
            for x in row_out.iter_mut() {
                *x = S::ZERO;
            }
            for k in s..e {
                let j = self.col[k] as usize;
                let a = self.vals[k];
                let row_h = &h.data[j * c..(j + 1) * c];
                for (o, &hv) in row_out.iter_mut().zip(row_h) {
                    *o += a * hv;
                }
            }
        }
    }
}
