//! Dense complex-matrix kernels with fixed ordering and phase conventions.
//!
//! The raw factorizations come from `nalgebra`; this module adds what the
//! design code relies on:
//!
//! * singular values and eigenvalues are returned in a requested order, with
//!   ties (within `1e-12` relative) broken by the index of the
//!   largest-magnitude entry of the associated vector;
//! * every singular/eigen vector is rotated so that its largest-magnitude
//!   entry is real and positive;
//! * SVD factors are always full (square) unitaries.
//!
//! Together these make the reported factors a deterministic function of the
//! input bytes.

use nalgebra::linalg::{Cholesky, SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative asymmetry tolerated by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative negative-eigenvalue slack accepted as PSD.
pub const PSD_TOL: f64 = 1e-10;
const TIE_TOL: f64 = 1e-12;

#[inline]
pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn ensure_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(format!("{what} has non-finite entries")))
    }
}

pub fn ensure_shape(a: &ComplexMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if a.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * real(0.5)
}

/// `||A - B||_F / max(||A||_F, ||B||_F)`; zero when both are zero.
pub fn rel_frobenius_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Real part of `Tr(A B)`.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc.re
}

/// A square complex matrix that is exactly conjugate-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `a` if it is square, finite and Hermitian to within
    /// [`HERMITIAN_TOL`] relative Frobenius; stores `(A + A^H)/2`.
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        Self::check_square(&a)?;
        let asym = (&a - a.adjoint()).norm();
        if asym > HERMITIAN_TOL * a.norm().max(1.0) {
            return Err(Error::InvalidMatrix(format!(
                "matrix is not Hermitian (asymmetry {asym:e})"
            )));
        }
        Ok(Self(hermitize(&a)))
    }

    /// Takes the Hermitian part of `a` unconditionally. Used for products
    /// that are Hermitian in exact arithmetic.
    pub fn from_hermitian_part(a: &ComplexMatrix) -> Result<Self> {
        Self::check_square(a)?;
        Ok(Self(hermitize(a)))
    }

    fn check_square(a: &ComplexMatrix) -> Result<()> {
        if !a.is_square() {
            return Err(Error::Shape(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(a, "matrix")
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let diag = DVector::from_iterator(d.len(), d.iter().map(|&x| real(x)));
        Self(ComplexMatrix::from_diagonal(&diag))
    }

    /// `U diag(d) U^H`.
    pub fn from_eigen(u: &ComplexMatrix, d: &[f64]) -> Result<Self> {
        ensure_shape(u, d.len(), d.len(), "eigenvector matrix")?;
        let mut scaled = u.clone();
        for (j, &lambda) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        Self::from_hermitian_part(&(scaled * u.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * real(s))
    }

    /// `W^H A W`.
    pub fn congruence(&self, w: &ComplexMatrix) -> Result<Self> {
        if w.nrows() != self.dim() {
            return Err(Error::Shape(format!(
                "congruence factor has {} rows, matrix is {}x{}",
                w.nrows(),
                self.dim(),
                self.dim()
            )));
        }
        Self::from_hermitian_part(&(w.adjoint() * &self.0 * w))
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "dimension mismatch {} vs {}",
                self.dim(),
                other.dim()
            )))
        }
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone)]
pub struct OrderedEvd {
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: ComplexMatrix,
    pub eigenvalues: Vec<f64>,
}

impl OrderedEvd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        HermitianMatrix::from_eigen(&self.vectors, &self.eigenvalues)
            .expect("eigen factors are consistent")
            .into_matrix()
    }
}

/// Full SVD `A = U Σ V^H` with `U`, `V` square unitary and the singular
/// values nonincreasing.
#[derive(Debug, Clone)]
pub struct OrderedSvd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl OrderedSvd {
    /// The rectangular diagonal `Σ`.
    pub fn sigma(&self) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(self.u.nrows(), self.v.nrows());
        for (j, &x) in self.singular_values.iter().enumerate() {
            s[(j, j)] = real(x);
        }
        s
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.u * self.sigma() * self.v.adjoint()
    }
}

/// Index of the largest-magnitude entry; earlier indices win near-ties.
fn dominant_index(v: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-9) + 1e-300 {
            best = i;
            best_mag = mag;
        }
    }
    best
}

/// Unit-modulus factor that makes the dominant entry real positive.
fn phase_fix(v: &[Complex64]) -> Complex64 {
    let z = v[dominant_index(v)];
    let mag = z.norm();
    if mag == 0.0 {
        real(1.0)
    } else {
        z.conj() / mag
    }
}

fn column(a: &ComplexMatrix, j: usize) -> Vec<Complex64> {
    a.column(j).iter().copied().collect()
}

/// Sorts `values` in `order` and breaks clusters of ties by the dominant
/// index of the corresponding column of `vectors`. Returns a permutation.
fn ordering(values: &[f64], vectors: &ComplexMatrix, order: Order) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| match order {
        Order::Decreasing => values[b].total_cmp(&values[a]),
        Order::Increasing => values[a].total_cmp(&values[b]),
    });
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TIE_TOL * scale;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && (values[idx[end]] - values[idx[end - 1]]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            idx[start..end].sort_by_key(|&j| dominant_index(&column(vectors, j)));
        }
        start = end;
    }
    idx
}

/// Completes a set of orthonormal columns to a square unitary by greedily
/// adding the standard basis vector with the largest residual.
fn complete_unitary(q: &ComplexMatrix) -> ComplexMatrix {
    let m = q.nrows();
    let mut cols: Vec<DVector<Complex64>> = q.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < m {
        let project_out = |mut r: DVector<Complex64>, cols: &[DVector<Complex64>]| {
            for _ in 0..2 {
                for c in cols {
                    let coeff = c.dotc(&r);
                    r -= c * coeff;
                }
            }
            r
        };
        let mut best: Option<DVector<Complex64>> = None;
        for i in 0..m {
            let mut e = DVector::zeros(m);
            e[i] = real(1.0);
            let r = project_out(e, &cols);
            if best.as_ref().is_none_or(|b| r.norm() > b.norm() * (1.0 + 1e-9)) {
                best = Some(r);
            }
        }
        let mut r = best.expect("m > 0");
        let n = r.norm();
        r /= real(n);
        let fix = phase_fix(r.as_slice());
        cols.push(r * fix);
    }
    ComplexMatrix::from_columns(&cols)
}

/// Eigendecomposition of a Hermitian matrix with the requested ordering.
pub fn ordered_evd(a: &HermitianMatrix, order: Order) -> Result<OrderedEvd> {
    ensure_finite(a.as_matrix(), "matrix")?;
    let n = a.dim();
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigenvalue solver diverged".into()));
    }
    let mut vectors = eig.eigenvectors;
    for j in 0..n {
        let fix = phase_fix(&column(&vectors, j));
        for i in 0..n {
            vectors[(i, j)] *= fix;
        }
    }
    let perm = ordering(&values, &vectors, order);
    let sorted_vectors = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, perm[j])]);
    Ok(OrderedEvd {
        vectors: sorted_vectors,
        eigenvalues: perm.iter().map(|&j| values[j]).collect(),
    })
}

/// Full SVD with nonincreasing singular values.
pub fn ordered_svd(a: &ComplexMatrix) -> Result<OrderedSvd> {
    ensure_finite(a, "matrix")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    let (u_thin, values, v_thin) = raw_svd(a)?;
    let k = values.len();
    let perm = ordering(&values, &v_thin, Order::Decreasing);

    let mut u_cols = ComplexMatrix::zeros(m, k);
    let mut v_cols = ComplexMatrix::zeros(n, k);
    for (dst, &src) in perm.iter().enumerate() {
        let fix = phase_fix(&column(&v_thin, src));
        for i in 0..m {
            u_cols[(i, dst)] = u_thin[(i, src)] * fix;
        }
        for i in 0..n {
            v_cols[(i, dst)] = v_thin[(i, src)] * fix;
        }
    }
    Ok(OrderedSvd {
        u: complete_unitary(&u_cols),
        singular_values: perm.iter().map(|&j| values[j]).collect(),
        v: complete_unitary(&v_cols),
    })
}

/// Thin SVD from the bidiagonal solver, checked against the input. A
/// convergence tolerance of exactly one ulp is known to yield wrong
/// factors, so `5ε` is used, and a failed residual check falls back to the
/// eigendecomposition of `A^H A`.
fn raw_svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if let Some(svd) = SVD::try_new(a.clone(), true, true, 5.0 * f64::EPSILON, 10_000) {
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^H").adjoint();
        let values: Vec<f64> = svd.singular_values.iter().copied().collect();
        let sigma = ComplexMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&s| real(s))));
        let unitary_u = (u.adjoint() * &u - ComplexMatrix::identity(u.ncols(), u.ncols())).norm();
        let unitary_v = (v.adjoint() * &v - ComplexMatrix::identity(v.ncols(), v.ncols())).norm();
        if (&u * sigma * v.adjoint() - a).norm() <= 1e-12 * scale && unitary_u < 1e-10 && unitary_v < 1e-10 {
            return Ok((u, values, v));
        }
    }
    gram_svd(a)
}

/// `A = U Σ V^H` from `A^H A = V Σ² V^H`, `σ_j = ||A v_j||`, `u_j = A v_j / σ_j`. Columns of
/// `U` for negligible `σ_j` are left to the unitary completion.
fn gram_svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let gram = HermitianMatrix::from_hermitian_part(&(a.adjoint() * a))?;
    let evd = ordered_evd(&gram, Order::Decreasing)?;
    let k = a.nrows().min(a.ncols());
    let v = evd.vectors.columns(0, k).into_owned();
    let av = a * &v;
    let values: Vec<f64> = av.column_iter().map(|c| c.norm()).collect();
    let top = values.first().copied().unwrap_or(0.0);
    let kept = values.iter().take_while(|&&s| s > 1e-10 * top && s > 0.0).count();
    let mut u_cols = Vec::with_capacity(a.nrows());
    for j in 0..kept {
        let mut c = av.column(j) / real(values[j]);
        for _ in 0..2 {
            for prev in &u_cols {
                let prev: &DVector<Complex64> = prev;
                let coeff = prev.dotc(&c);
                c -= prev * coeff;
            }
        }
        let n = c.norm();
        u_cols.push(c / real(n));
    }
    let thin = if u_cols.is_empty() {
        ComplexMatrix::zeros(a.nrows(), 0)
    } else {
        ComplexMatrix::from_columns(&u_cols)
    };
    let u = complete_unitary(&thin);
    Ok((u.columns(0, k).into_owned(), values, v))
}

/// Largest eigenvalue magnitude (spectral norm for Hermitian input).
pub fn spectral_norm(a: &HermitianMatrix) -> Result<f64> {
    let evd = ordered_evd(a, Order::Decreasing)?;
    Ok(evd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> Result<f64> {
    let evd = ordered_evd(a, Order::Increasing)?;
    Ok(evd.eigenvalues[0])
}

/// `λ_min(A) ≥ -rel_tol · ||A||_2`.
pub fn is_psd(a: &HermitianMatrix, rel_tol: f64) -> Result<bool> {
    let evd = ordered_evd(a, Order::Increasing)?;
    let norm = evd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(evd.eigenvalues[0] >= -rel_tol * norm)
}

/// Hermitian square root of a PSD matrix. Eigenvalues down to
/// `-PSD_TOL·||A||` are clipped to zero.
pub fn hermitian_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let evd = ordered_evd(a, Order::Decreasing)?;
    let norm = evd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = *evd.eigenvalues.last().expect("non-empty");
    if min < -PSD_TOL * norm {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots: Vec<f64> = evd.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    HermitianMatrix::from_eigen(&evd.vectors, &roots)
}

/// `A^{-1/2}` of a strictly positive definite matrix.
pub fn hermitian_inv_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let evd = ordered_evd(a, Order::Decreasing)?;
    let max = evd.eigenvalues[0];
    let min = *evd.eigenvalues.last().expect("non-empty");
    if !(min > 0.0) || min <= 1e-15 * max {
        return Err(Error::NotPd(format!("min eigenvalue {min:e}")));
    }
    let roots: Vec<f64> = evd.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()).collect();
    HermitianMatrix::from_eigen(&evd.vectors, &roots)
}

fn cholesky(a: &HermitianMatrix) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(a.as_matrix().clone())
        .ok_or_else(|| Error::NotPd("Cholesky factorization failed".into()))
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn hermitian_solve(a: &HermitianMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if b.nrows() != a.dim() {
        return Err(Error::Shape(format!(
            "right-hand side has {} rows, system is {}x{}",
            b.nrows(),
            a.dim(),
            a.dim()
        )));
    }
    Ok(cholesky(a)?.solve(b))
}

/// Inverse of a Hermitian positive definite matrix via a solve against `I`.
pub fn hermitian_inverse(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = a.dim();
    let inv = hermitian_solve(a, &ComplexMatrix::identity(n, n))?;
    HermitianMatrix::from_hermitian_part(&inv)
}

/// `log det A` for Hermitian positive definite `A`.
pub fn log_det_pd(a: &HermitianMatrix) -> Result<f64> {
    let l = cholesky(a)?.unpack();
    Ok(2.0 * l.diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

/// Principal complex logarithm of `det A` for a general square matrix.
pub fn log_det(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Shape("determinant of a non-square matrix".into()));
    }
    let det = a.clone().lu().determinant();
    if det.norm() == 0.0 || !det.re.is_finite() || !det.im.is_finite() {
        return Err(Error::Numerical(format!("determinant is {det}")));
    }
    Ok(det.ln())
}

/// Loewner comparison `A ⪯ B`: `λ_min(B - A) ≥ -tol · max(1, ||B - A||_2)`.
pub fn loewner_leq(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<bool> {
    let diff = b.sub(a)?;
    let evd = ordered_evd(&diff, Order::Increasing)?;
    let norm = evd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(evd.eigenvalues[0] >= -tol * norm.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, data: &[(f64, f64)]) -> ComplexMatrix {
        ComplexMatrix::from_row_iterator(rows, cols, data.iter().map(|&(r, i)| Complex64::new(r, i)))
    }

    fn sample() -> ComplexMatrix {
        cm(
            3,
            2,
            &[(0.3, -1.2), (0.7, 0.1), (-0.4, 0.9), (1.1, 0.5), (0.2, 0.2), (-0.6, -0.8)],
        )
    }

    fn is_unitary(u: &ComplexMatrix) -> bool {
        let n = u.ncols();
        (u.adjoint() * u - ComplexMatrix::identity(n, n)).norm() < 1e-10
    }

    #[test]
    fn svd_identity() {
        let s = ordered_svd(&ComplexMatrix::identity(2, 2)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0]);
        assert!((s.u.clone() - ComplexMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((s.v.clone() - ComplexMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn svd_orders_diagonal() {
        let d = HermitianMatrix::from_real_diagonal(&[1.0, 3.0]).into_matrix();
        let s = ordered_svd(&d).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 1.0]);
        let swap = cm(2, 2, &[(0., 0.), (1., 0.), (1., 0.), (0., 0.)]);
        assert!((s.u.clone() - &swap).norm() < 1e-14);
        assert!((s.v.clone() - &swap).norm() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        for a in [sample(), sample().adjoint()] {
            let s = ordered_svd(&a).unwrap();
            assert!(is_unitary(&s.u) && is_unitary(&s.v));
            assert!(rel_frobenius_diff(&s.reconstruct(), &a) < 1e-10);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_rank_deficient_factors_stay_unitary() {
        let a = sample() * sample().adjoint(); // 3x3, rank 2
        let s = ordered_svd(&a).unwrap();
        assert!(is_unitary(&s.u) && is_unitary(&s.v));
        assert!(s.singular_values[2] < 1e-12 * s.singular_values[0]);
        assert!(rel_frobenius_diff(&s.reconstruct(), &a) < 1e-10);
    }

    #[test]
    fn gram_fallback_reconstructs() {
        for a in [sample(), sample().adjoint(), sample() * sample().adjoint(), ComplexMatrix::zeros(2, 3)] {
            let (u, values, v) = gram_svd(&a).unwrap();
            let sigma = ComplexMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&s| real(s))));
            assert!((&u * sigma * v.adjoint() - &a).norm() < 1e-10 * (1.0 + a.norm()));
            assert!(is_unitary(&u) && is_unitary(&v));
        }
    }

    #[test]
    fn svd_phase_convention() {
        let s = ordered_svd(&sample()).unwrap();
        for j in 0..2 {
            let col = column(&s.v, j);
            let z = col[dominant_index(&col)];
            assert!(z.im.abs() < 1e-14 && z.re > 0.0);
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = sample();
        a[(1, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(ordered_svd(&a), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn evd_examples() {
        let e = ordered_evd(&HermitianMatrix::identity(2), Order::Decreasing).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        let e = ordered_evd(&HermitianMatrix::from_real_diagonal(&[5.0, 2.0]), Order::Increasing)
            .unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 5.0]);
        let e = ordered_evd(&HermitianMatrix::from_real_diagonal(&[2.0, 5.0]), Order::Decreasing)
            .unwrap();
        assert_eq!(e.eigenvalues, vec![5.0, 2.0]);
    }

    #[test]
    fn evd_trace_identity() {
        let h = HermitianMatrix::from_hermitian_part(&(sample() * sample().adjoint())).unwrap();
        let e = ordered_evd(&h, Order::Decreasing).unwrap();
        let sum: f64 = e.eigenvalues.iter().sum();
        assert!((sum - h.trace()).abs() < 1e-10 * h.trace().abs());
        assert!(rel_frobenius_diff(&e.reconstruct(), h.as_matrix()) < 1e-10);
    }

    #[test]
    fn hermitian_new_rejects_asymmetric() {
        let a = cm(2, 2, &[(1., 0.), (1., 0.), (0., 0.), (1., 0.)]);
        assert!(matches!(HermitianMatrix::new(a), Err(Error::InvalidMatrix(_))));
        let r = cm(2, 3, &[(0., 0.); 6]);
        assert!(matches!(HermitianMatrix::new(r), Err(Error::Shape(_))));
    }

    #[test]
    fn sqrt_examples() {
        let s = hermitian_sqrt(&HermitianMatrix::identity(3)).unwrap();
        assert!((s.as_matrix() - ComplexMatrix::identity(3, 3)).norm() < 1e-14);
        let s = hermitian_sqrt(&HermitianMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        let want = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        assert!((s.as_matrix() - want.as_matrix()).norm() < 1e-14);
        let bad = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(hermitian_sqrt(&bad), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sqrt_tolerates_rounding_noise() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, -1e-13]);
        let s = hermitian_sqrt(&a).unwrap();
        assert_eq!(s.as_matrix()[(1, 1)].re, 0.0);
    }

    #[test]
    fn inverse_and_logdet() {
        let a = HermitianMatrix::from_hermitian_part(
            &(sample().adjoint() * sample() + ComplexMatrix::identity(2, 2)),
        )
        .unwrap();
        let inv = hermitian_inverse(&a).unwrap();
        let prod = a.as_matrix() * inv.as_matrix();
        assert!((prod - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
        let ld = log_det_pd(&a).unwrap();
        let general = log_det(a.as_matrix()).unwrap();
        assert!((ld - general.re).abs() < 1e-12 && general.im.abs() < 1e-12);
        assert!(matches!(
            hermitian_inverse(&HermitianMatrix::zeros(2)),
            Err(Error::NotPd(_))
        ));
    }

    #[test]
    fn loewner_examples() {
        let i = HermitianMatrix::identity(2);
        let two = i.scale(2.0);
        assert!(loewner_leq(&i, &two, 1e-12).unwrap());
        assert!(!loewner_leq(&two, &i, 1e-12).unwrap());
        assert!(matches!(
            loewner_leq(&i, &HermitianMatrix::identity(3), 1e-12),
            Err(Error::Shape(_))
        ));
    }
}
