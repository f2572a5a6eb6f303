//! Kernels for the dependent bootstrap weights and their Toeplitz Gram
//! matrices.
//!
//! A kernel here maps a scaled lag to `[0, 1]` with `K(0) = 1`, symmetric
//! and nonincreasing on `[0, inf)`, with a nonnegative Fourier transform.
//! That last condition makes every Gram matrix `G[i][j] = K((i - j) / H)`
//! positive semi-definite; it is checked numerically through the smallest
//! eigenvalue of a reference Gram rather than analytically.
//!
//! The Gram factor is a dense Cholesky, O(T^3) in time and O(T^2) in
//! memory, with diagonal jitter escalated over [`JITTER_LADDER`] until the
//! factorisation succeeds.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{AnovaError, Result};

/// Diagonal jitter tried in order when factorising a Gram matrix.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Tolerance on the smallest Gram eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Anything usable as a lag kernel.
pub trait Kernel {
    fn weight(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Kernel for F {
    fn weight(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Kernels selectable by name in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-x^2 / 2)`
    #[default]
    Gaussian,
}

impl Kernel for KernelSpec {
    #[inline]
    fn weight(&self, x: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => (-0.5 * x * x).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian => f.write_str("gaussian"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = AnovaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelSpec::Gaussian),
            other => Err(AnovaError::InvalidArgument(format!(
                "unknown kernel `{other}` (available: gaussian)"
            ))),
        }
    }
}

/// Evaluate `spec` at a finite point.
pub fn kernel_eval(spec: KernelSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(AnovaError::InvalidArgument(format!(
            "kernel argument must be finite, got {x}"
        )));
    }
    Ok(spec.weight(x))
}

/// Toeplitz Gram matrix `G[i][j] = K((i - j) / H)` with its lower factor.
#[derive(Debug, Clone)]
pub struct ToeplitzGram {
    bandwidth: f64,
    /// `K(q / H)` for `q = 0..T`.
    lags: Vec<f64>,
    factor: Array2<f64>,
    jitter: f64,
}

impl ToeplitzGram {
    pub fn size(&self) -> usize {
        self.lags.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Jitter added to the diagonal before the factorisation succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Kernel weight at lag `q`.
    pub fn lag(&self, q: usize) -> f64 {
        self.lags[q]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lags[i.abs_diff(j)]
    }

    pub fn dense(&self) -> Array2<f64> {
        let n = self.size();
        Array2::from_shape_fn((n, n), |(i, j)| self.entry(i, j))
    }

    /// Lower-triangular `L` with `L L^T = G + jitter * I`.
    pub fn factor(&self) -> &Array2<f64> {
        &self.factor
    }

    /// `L z`.
    pub fn correlate(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.size();
        assert_eq!(z.len(), n, "gram size {n} does not match input length");
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let row = self.factor.row(i);
            let mut acc = 0.0;
            for j in 0..=i {
                acc += row[j] * z[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `vᵀ G v` over the leading `v.len()` rows, summed by lag. Jitter is
    /// not included.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert!(v.len() <= self.size());
        let mut total: f64 = v.iter().map(|x| x * x).sum();
        for q in 1..v.len() {
            let w = self.lags[q];
            if w == 0.0 {
                break;
            }
            let cross: f64 = v[..v.len() - q].iter().zip(&v[q..]).map(|(a, b)| a * b).sum();
            total += 2.0 * w * cross;
        }
        total
    }

    /// Smallest eigenvalue of `G` (without jitter).
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.dense())
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    dm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// In-place dense Cholesky of the lower triangle. Returns `false` when a
/// pivot is not strictly positive.
fn cholesky_lower(a: &mut Array2<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= a[[j, k]] * a[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / ljj;
        }
        for i in 0..j {
            a[[i, j]] = 0.0;
        }
    }
    true
}

/// Build the `T x T` Gram matrix for bandwidth `h` and factor it.
pub fn gram<K: Kernel + ?Sized>(kernel: &K, size: usize, h: f64) -> Result<ToeplitzGram> {
    if size == 0 {
        return Err(AnovaError::InvalidArgument("gram size must be at least 1".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(AnovaError::InvalidArgument(format!(
            "bandwidth H must be positive and finite, got {h}"
        )));
    }
    let lags: Vec<f64> = (0..size).map(|q| kernel.weight(q as f64 / h)).collect();
    let base = Array2::from_shape_fn((size, size), |(i, j)| lags[i.abs_diff(j)]);

    for &jitter in &JITTER_LADDER {
        let mut a = base.clone();
        if jitter > 0.0 {
            a.diag_mut().mapv_inplace(|v| v + jitter);
        }
        if cholesky_lower(&mut a) {
            return Ok(ToeplitzGram {
                bandwidth: h,
                lags,
                factor: a,
                jitter,
            });
        }
    }
    Err(AnovaError::NumericalFailure(format!(
        "Cholesky of the {size}x{size} kernel Gram (H = {h}) failed at jitter {}",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// Numerical admissibility check: `K(0) = 1`, symmetry, values in `[0, 1]`,
/// nonincreasing on the (sorted, nonnegative) grid, and a PSD reference
/// Gram of size 128 at `H = 8`.
pub fn check_admissible<K: Kernel + ?Sized>(kernel: &K, grid: &[f64]) -> bool {
    if (kernel.weight(0.0) - 1.0).abs() > 1e-12 {
        return false;
    }
    let mut prev = f64::INFINITY;
    for &x in grid {
        let v = kernel.weight(x);
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return false;
        }
        if (v - kernel.weight(-x)).abs() > 1e-12 * v.abs().max(1.0) {
            return false;
        }
        if v > prev {
            return false;
        }
        prev = v;
    }
    let lags: Vec<f64> = (0..128).map(|q| kernel.weight(q as f64 / 8.0)).collect();
    let g = Array2::from_shape_fn((128, 128), |(i, j)| lags[i.abs_diff(j)]);
    min_eigenvalue(&g) >= -PSD_TOLERANCE
}
