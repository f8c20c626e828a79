//! The matrix-field weighting operator `Ψ(Φ) = Σ_k W_k^H Φ W_k + Π`.
//!
//! Each `W_k` is `N_Dat × M`; `M` may differ from `N_Dat`. `Π` is an
//! `M × M` PSD offset. The classical diagonal weighting `Σ_j w_j Φ_jj` is
//! the trace of the operator with `K = 1`, `W = diag(√w)`, `Π = 0`.

use crate::error::{Error, Result};
use crate::model::{check_weights, mse_lmmse, Precoder, SystemModel};
use crate::spectral::{
    ensure_finite, is_psd, loewner_leq, real, ComplexMatrix, HermitianMatrix, PSD_TOL,
};

/// Tolerance used by [`WeightingOperator::monotonicity_check`].
pub const MONOTONICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct WeightingOperator {
    weights: Vec<ComplexMatrix>,
    offset: HermitianMatrix,
}

impl WeightingOperator {
    pub fn new(weights: Vec<ComplexMatrix>, offset: HermitianMatrix) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one weight matrix is required".into()))?;
        let shape = first.shape();
        for (k, w) in weights.iter().enumerate() {
            ensure_finite(w, "weight matrix")?;
            if w.shape() != shape {
                return Err(Error::Shape(format!(
                    "W_{} is {}x{}, W_1 is {}x{}",
                    k + 1,
                    w.nrows(),
                    w.ncols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        if offset.dim() != shape.1 {
            return Err(Error::Shape(format!(
                "Π is {0}x{0}, weights have {1} columns",
                offset.dim(),
                shape.1
            )));
        }
        if !is_psd(&offset, PSD_TOL)? {
            return Err(Error::NotPsd {
                min_eigenvalue: crate::spectral::min_eigenvalue(&offset)?,
            });
        }
        Ok(Self { weights, offset })
    }

    /// `K = 1`, `W = I_n`, `Π = 0`.
    pub fn identity(n: usize) -> Self {
        Self {
            weights: vec![ComplexMatrix::identity(n, n)],
            offset: HermitianMatrix::zeros(n),
        }
    }

    /// Embeds the classical weights: `W = diag(√w_j)`, `Π = 0`.
    pub fn from_classical_weights(w: &[f64]) -> Result<Self> {
        check_weights(w)?;
        if w.is_empty() {
            return Err(Error::InvalidWeight("empty weight vector".into()));
        }
        let roots: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        Ok(Self {
            weights: vec![HermitianMatrix::from_real_diagonal(&roots).into_matrix()],
            offset: HermitianMatrix::zeros(w.len()),
        })
    }

    pub fn weights(&self) -> &[ComplexMatrix] {
        &self.weights
    }

    pub fn offset(&self) -> &HermitianMatrix {
        &self.offset
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Rows of each `W_k` (must equal the number of data streams).
    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    /// Dimension `M` of the weighted MSE matrix.
    pub fn output_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Same weights with `Π` replaced.
    pub fn with_offset(&self, offset: HermitianMatrix) -> Result<Self> {
        Self::new(self.weights.clone(), offset)
    }

    pub fn apply(&self, phi: &HermitianMatrix) -> Result<HermitianMatrix> {
        if phi.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "Φ is {0}x{0}, operator expects {1}x{1}",
                phi.dim(),
                self.input_dim()
            )));
        }
        let mut acc = self.offset.as_matrix().clone();
        for w in &self.weights {
            acc += w.adjoint() * phi.as_matrix() * w;
        }
        HermitianMatrix::from_hermitian_part(&acc)
    }

    /// `Ψ(F) = Σ_k W_k^H (F^H H^H R_n^{-1} H F + I)^{-1} W_k + Π`.
    pub fn weighted_mse_of_precoder(
        &self,
        model: &SystemModel,
        f: &Precoder,
    ) -> Result<HermitianMatrix> {
        if model.n_streams() != self.input_dim() {
            return Err(Error::Shape(format!(
                "operator expects {} streams, model has {}",
                self.input_dim(),
                model.n_streams()
            )));
        }
        self.apply(&mse_lmmse(model, f)?)
    }

    /// Checks that `A ⪯ B` implies `Ψ(A) ⪯ Ψ(B)` for the given pair.
    pub fn monotonicity_check(&self, a: &HermitianMatrix, b: &HermitianMatrix) -> Result<bool> {
        if !loewner_leq(a, b, MONOTONICITY_TOL)? {
            return Err(Error::Precondition("A ⪯ B does not hold".into()));
        }
        loewner_leq(&self.apply(a)?, &self.apply(b)?, MONOTONICITY_TOL)
    }

    /// `Σ_k W_k^H W_k + Π`, the value of `Ψ` at `Φ = I`.
    pub fn at_identity(&self) -> Result<HermitianMatrix> {
        self.apply(&HermitianMatrix::identity(self.input_dim()))
    }

    /// `Π + ε I` with `ε = 1e-10·Tr(Π)/M`.
    pub fn jittered(&self) -> Result<Self> {
        let m = self.output_dim();
        let eps = 1e-10 * self.offset.trace() / m as f64;
        let mut pi = self.offset.as_matrix().clone();
        for i in 0..m {
            pi[(i, i)] += real(eps);
        }
        self.with_offset(HermitianMatrix::from_hermitian_part(&pi)?)
    }
}
