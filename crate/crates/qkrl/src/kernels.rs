//! Scalar and operator-valued kernels with Gram-matrix utilities.
//!
//! Quantum kernels (Kronecker delta, pure-state overlap and its powers, the
//! bandwidth squared-cosine kernel) are evaluated classically from their
//! feature encodings; classical kernels (RBF, Matern) are included for
//! critic-side regression. All variants are bounded by `kappa_max = 1` and
//! produce positive semidefinite Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar kernel variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ScalarKernel {
    /// Basis encoding: `kappa(x, y) = 1` iff `x == y`.
    KroneckerDelta,
    /// Amplitude encoding of grid vectors: `|<phi(x)|phi(y)>|^2` for
    /// normalized `phi`. The zero vector maps to a dedicated orthogonal
    /// feature direction.
    PureStateOverlap,
    /// Repeated amplitude encoding: overlap kernel raised to `r`.
    RPowerOverlap { r: u32 },
    /// Rotation encoding with bandwidth `c`:
    /// `prod_j cos^2(c (x_j - y_j) / 2)`.
    SquaredCosine { bandwidth: f64 },
    /// Radial basis function `exp(-||x-y||^2 / (2 l^2))`.
    Rbf { lengthscale: f64 },
    /// Matern kernel, `nu` restricted to 1/2, 3/2, 5/2.
    Matern { nu: MaternNu, lengthscale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl ScalarKernel {
    /// Validates variant parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarKernel::RPowerOverlap { r } if *r == 0 => {
                Err(Error::config("r-power overlap needs r >= 1"))
            }
            ScalarKernel::SquaredCosine { bandwidth } if !(*bandwidth > 0.0) => {
                Err(Error::config("squared-cosine bandwidth must be positive"))
            }
            ScalarKernel::Rbf { lengthscale } | ScalarKernel::Matern { lengthscale, .. }
                if !(*lengthscale > 0.0) =>
            {
                Err(Error::config("lengthscale must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Upper bound on the kernel value; 1 for every variant.
    pub fn kappa_max(&self) -> f64 {
        1.0
    }

    /// Whether an exact equality test is meaningful for the variant.
    pub fn is_quantum(&self) -> bool {
        !matches!(
            self,
            ScalarKernel::Rbf { .. } | ScalarKernel::Matern { .. }
        )
    }

    /// Kernel value `kappa(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::contract(format!(
                "kernel arguments of dimension {} vs {}",
                x.len(),
                y.len()
            )));
        }
        Ok(match self {
            ScalarKernel::KroneckerDelta => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarKernel::PureStateOverlap => overlap(x, y).powi(2),
            ScalarKernel::RPowerOverlap { r } => overlap(x, y).powi(2).powi(*r as i32),
            ScalarKernel::SquaredCosine { bandwidth } => x
                .iter()
                .zip(y)
                .map(|(a, b)| (bandwidth * (a - b) / 2.0).cos().powi(2))
                .product(),
            ScalarKernel::Rbf { lengthscale } => {
                let d2 = sq_dist(x, y);
                (-d2 / (2.0 * lengthscale * lengthscale)).exp()
            }
            ScalarKernel::Matern { nu, lengthscale } => {
                let r = sq_dist(x, y).sqrt() / lengthscale;
                match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let s = 3f64.sqrt() * r;
                        (1.0 + s) * (-s).exp()
                    }
                    MaternNu::FiveHalves => {
                        let s = 5f64.sqrt() * r;
                        (1.0 + s + s * s / 3.0) * (-s).exp()
                    }
                }
            }
        })
    }

    /// Symmetric Gram matrix over a point set.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&points[i], &points[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

/// Normalized inner product of amplitude encodings, with the zero vector
/// treated as its own orthogonal feature direction.
fn overlap(x: &[f64], y: &[f64]) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    match (nx == 0.0, ny == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny),
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// PSD tolerance for double-precision Gram matrices up to n = 512.
pub const PSD_TOL: f64 = 1e-8;

/// Operator-valued kernel `K(x, y) = kappa(x, y) * M` with PSD output
/// matrix `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorKernel {
    pub scalar: ScalarKernel,
    /// Row-major `A x A` output matrix; identity for the trivial case.
    pub output_matrix: Vec<Vec<f64>>,
}

impl OperatorKernel {
    pub fn new(scalar: ScalarKernel, output_matrix: Vec<Vec<f64>>) -> Result<Self> {
        scalar.validate()?;
        let k = Self {
            scalar,
            output_matrix,
        };
        k.validate()?;
        Ok(k)
    }

    /// Trivial case `K = kappa * I_A`.
    pub fn isotropic(scalar: ScalarKernel, a_dims: usize) -> Result<Self> {
        let m = (0..a_dims)
            .map(|i| (0..a_dims).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(scalar, m)
    }

    pub fn a_dims(&self) -> usize {
        self.output_matrix.len()
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.output_matrix.len();
        if a == 0 || self.output_matrix.iter().any(|row| row.len() != a) {
            return Err(Error::config("output matrix must be square"));
        }
        let m = self.matrix();
        for i in 0..a {
            for j in 0..a {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::config("output matrix must be symmetric"));
                }
            }
        }
        if min_eigenvalue(&m) < -PSD_TOL {
            return Err(Error::config("output matrix must be PSD"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let a = self.a_dims();
        DMatrix::from_fn(a, a, |i, j| self.output_matrix[i][j])
    }

    /// `kappa(x, y) * M`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.matrix() * self.scalar.eval(x, y)?)
    }

    /// Applies `K(x, y)` to a weight vector: `kappa(x, y) * M w`.
    pub fn apply(&self, x: &[f64], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let k = self.scalar.eval(x, y)?;
        let m = &self.output_matrix;
        Ok((0..self.a_dims())
            .map(|i| k * m[i].iter().zip(w).map(|(mij, wj)| mij * wj).sum::<f64>())
            .collect())
    }
}
