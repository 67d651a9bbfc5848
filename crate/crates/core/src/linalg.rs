//! Dense complex linear algebra and the normalized Moore-Penrose pseudo-inverses
//! used for zero-forcing precoding and post-coding.
//!
//! The right pseudo-inverse of a wide `N x M` matrix is `H^H (H H^H)^-1`; the
//! left pseudo-inverse of a tall `M x N` matrix is `(D^H D)^-1 D^H`. Both are
//! computed from the Gram matrix with a Cholesky solve. When the Gram matrix is
//! badly conditioned the SVD route is used instead.
//!
//! Normalizing a pseudo-inverse to unit Frobenius norm gives a precoder
//! `H^R = alpha H^dagger` with `H H^R = alpha I_N`, and similarly a post-coder
//! `D^L = beta D^ddagger` with `D^L D = beta I_N`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CVector = DVector<Complex64>;

/// Smallest admissible `sigma_min / sigma_max` before a matrix is declared rank deficient.
pub const RANK_RATIO_MIN: f64 = 1e-10;
/// Above this Gram-matrix condition number the SVD route replaces the Gram formula.
pub const GRAM_CONDITION_MAX: f64 = 1e6;
/// Relative residual bound for `H H^R = alpha I` and `D^L D = beta I`.
pub const DIAGONALIZATION_TOL: f64 = 1e-9;
/// Bound on `|tr(X^H X) - 1|` for a normalized pseudo-inverse.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is rank deficient (sigma_min/sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense complex matrix with finite entries and nonzero dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn from_row_major(
        rows: usize,
        cols: usize,
        entries: Vec<Complex64>,
    ) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Result<Self, LinalgError> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(LinalgError::Dimension(format!(
                "empty {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        for (col, column) in m.column_iter().enumerate() {
            for (row, z) in column.iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(LinalgError::NonFinite { row, col });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::from_dmatrix(DMatrix::from_diagonal(&d))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity of size 0");
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        self.0.transpose().iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if self.cols() != rhs.rows() {
            return Err(LinalgError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector, LinalgError> {
        if self.cols() != v.len() {
            return Err(LinalgError::Dimension(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows(),
                self.cols(),
                v.len()
            )));
        }
        Ok(&self.0 * v)
    }

    /// Squared Euclidean norm of each row.
    pub fn row_norms_sqr(&self) -> Vec<f64> {
        self.0
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

/// Singular values (nonincreasing) and the 2-norm condition number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDiagnostics {
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
}

impl ConditionDiagnostics {
    /// `sigma_min / sigma_max`, zero for a zero matrix.
    pub fn reciprocal_condition(&self) -> f64 {
        if self.condition_number.is_finite() {
            1.0 / self.condition_number
        } else {
            0.0
        }
    }
}

pub fn condition_diagnostics(a: &ComplexMatrix) -> ConditionDiagnostics {
    let mut singular_values: Vec<f64> = a.0.clone().singular_values().iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    let max = singular_values.first().copied().unwrap_or(0.0);
    let min = singular_values.last().copied().unwrap_or(0.0);
    let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
    ConditionDiagnostics {
        singular_values,
        condition_number,
    }
}

/// Which route produced a pseudo-inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PinvRoute {
    Gram,
    Svd,
}

fn full_rank_route(a: &ComplexMatrix) -> Result<PinvRoute, LinalgError> {
    let diag = condition_diagnostics(a);
    let ratio = diag.reciprocal_condition();
    if ratio < RANK_RATIO_MIN {
        return Err(LinalgError::RankDeficient { ratio });
    }
    // cond(A A^H) = cond(A)^2
    if diag.condition_number * diag.condition_number > GRAM_CONDITION_MAX {
        Ok(PinvRoute::Svd)
    } else {
        Ok(PinvRoute::Gram)
    }
}

/// Solves `G X = B` for Hermitian positive definite `G`.
fn cholesky_solve(g: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = g.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    let mut x = b.clone();
    for c in 0..x.ncols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Some(x)
}

fn svd_pseudo_inverse(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut v_scaled = v_t.adjoint();
    for (c, s) in svd.singular_values.iter().enumerate() {
        let inv = 1.0 / s;
        v_scaled.column_mut(c).iter_mut().for_each(|z| *z *= inv);
    }
    v_scaled * u.adjoint()
}

/// Right pseudo-inverse of a wide matrix, reporting the route taken.
pub fn right_pseudo_inverse_with_route(
    h: &ComplexMatrix,
) -> Result<(ComplexMatrix, PinvRoute), LinalgError> {
    let (n, m) = h.shape();
    if n > m {
        return Err(LinalgError::Dimension(format!(
            "right pseudo-inverse needs rows <= cols, got {n}x{m}"
        )));
    }
    let route = full_rank_route(h)?;
    let pinv = match route {
        PinvRoute::Gram => {
            let gram = &h.0 * h.0.adjoint();
            match cholesky_solve(&gram, &h.0) {
                Some(x) => x.adjoint(),
                None => return Ok((ComplexMatrix(svd_pseudo_inverse(&h.0)), PinvRoute::Svd)),
            }
        }
        PinvRoute::Svd => svd_pseudo_inverse(&h.0),
    };
    Ok((ComplexMatrix(pinv), route))
}

/// `H^H (H H^H)^-1` for an `N x M` matrix with `N <= M` and full row rank.
pub fn right_pseudo_inverse(h: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    right_pseudo_inverse_with_route(h).map(|(p, _)| p)
}

/// Left pseudo-inverse of a tall matrix, reporting the route taken.
pub fn left_pseudo_inverse_with_route(
    d: &ComplexMatrix,
) -> Result<(ComplexMatrix, PinvRoute), LinalgError> {
    let (m, n) = d.shape();
    if n > m {
        return Err(LinalgError::Dimension(format!(
            "left pseudo-inverse needs rows >= cols, got {m}x{n}"
        )));
    }
    let route = full_rank_route(d)?;
    let pinv = match route {
        PinvRoute::Gram => {
            let dh = d.0.adjoint();
            let gram = &dh * &d.0;
            match cholesky_solve(&gram, &dh) {
                Some(x) => x,
                None => return Ok((ComplexMatrix(svd_pseudo_inverse(&d.0)), PinvRoute::Svd)),
            }
        }
        PinvRoute::Svd => svd_pseudo_inverse(&d.0),
    };
    Ok((ComplexMatrix(pinv), route))
}

/// `(D^H D)^-1 D^H` for an `M x N` matrix with `N <= M` and full column rank.
pub fn left_pseudo_inverse(d: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    left_pseudo_inverse_with_route(d).map(|(p, _)| p)
}

/// Unit-Frobenius-norm right pseudo-inverse `H^R` with `H H^R = alpha I_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRightMppi {
    pub matrix: ComplexMatrix,
    pub alpha: f64,
}

/// Unit-Frobenius-norm left pseudo-inverse `D^L` with `D^L D = beta I_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLeftMppi {
    pub matrix: ComplexMatrix,
    pub beta: f64,
}

pub fn normalized_right_mppi(h: &ComplexMatrix) -> Result<NormalizedRightMppi, LinalgError> {
    let pinv = right_pseudo_inverse(h)?;
    // alpha^-2 = tr(pinv^H pinv) = ||pinv||_F^2
    let alpha = 1.0 / pinv.frobenius_norm();
    Ok(NormalizedRightMppi {
        matrix: pinv.scaled(alpha),
        alpha,
    })
}

pub fn normalized_left_mppi(d: &ComplexMatrix) -> Result<NormalizedLeftMppi, LinalgError> {
    let pinv = left_pseudo_inverse(d)?;
    let beta = 1.0 / pinv.frobenius_norm();
    Ok(NormalizedLeftMppi {
        matrix: pinv.scaled(beta),
        beta,
    })
}

/// `||H H^R - alpha I||_F / (alpha sqrt(N))`.
pub fn right_diagonalization_residual(h: &ComplexMatrix, hr: &NormalizedRightMppi) -> f64 {
    let n = h.rows();
    let prod = &h.0 * &hr.matrix.0;
    let target = DMatrix::<Complex64>::identity(n, n) * Complex64::new(hr.alpha, 0.0);
    (prod - target).norm() / (hr.alpha * (n as f64).sqrt())
}

/// `||D^L D - beta I||_F / (beta sqrt(N))`.
pub fn left_diagonalization_residual(d: &ComplexMatrix, dl: &NormalizedLeftMppi) -> f64 {
    let n = d.cols();
    let prod = &dl.matrix.0 * &d.0;
    let target = DMatrix::<Complex64>::identity(n, n) * Complex64::new(dl.beta, 0.0);
    (prod - target).norm() / (dl.beta * (n as f64).sqrt())
}

/// `|tr(X^H X) - 1|`.
pub fn normalization_error(x: &ComplexMatrix) -> f64 {
    let f = x.frobenius_norm();
    (f * f - 1.0).abs()
}

/// Scale applied to uplink symbols on top of the normalized precoder.
///
/// With `Unit`, a white symbol vector with total power `P` over `N`
/// components yields transmit power `P / N`. `PowerMatched` multiplies by
/// `sqrt(N)` so the transmit power equals the symbol power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerNormalization {
    #[default]
    Unit,
    PowerMatched,
}

impl PowerNormalization {
    pub fn gain(self, relay_antennas: usize) -> f64 {
        match self {
            PowerNormalization::Unit => 1.0,
            PowerNormalization::PowerMatched => (relay_antennas as f64).sqrt(),
        }
    }
}
