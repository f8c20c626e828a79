//! Point-to-point linear MIMO model `y = H F s + n` with `E{ss^H} = I`.

use crate::error::{Error, Result};
use crate::spectral::{
    ensure_finite, ensure_shape, hermitian_inverse, hermitian_solve, min_eigenvalue, real,
    ComplexMatrix, HermitianMatrix,
};

/// Slack on `Tr(FF^H) ≤ P` when deciding feasibility.
pub const POWER_SLACK: f64 = 1e-9;

/// Channel, noise covariance, stream count and power budget.
#[derive(Debug, Clone)]
pub struct SystemModel {
    channel: ComplexMatrix,
    noise_cov: HermitianMatrix,
    n_streams: usize,
    power: f64,
}

impl SystemModel {
    pub fn new(
        channel: ComplexMatrix,
        noise_cov: HermitianMatrix,
        n_streams: usize,
        power: f64,
    ) -> Result<Self> {
        ensure_finite(&channel, "channel")?;
        if noise_cov.dim() != channel.nrows() {
            return Err(Error::Shape(format!(
                "noise covariance is {0}x{0} but the channel has {1} receive antennas",
                noise_cov.dim(),
                channel.nrows()
            )));
        }
        if n_streams == 0 || channel.ncols() == 0 || channel.nrows() == 0 {
            return Err(Error::Shape("dimensions must be at least 1".into()));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!("power budget {power} must be > 0")));
        }
        let min = min_eigenvalue(&noise_cov)?;
        if !(min > 0.0) {
            return Err(Error::NotPd(format!(
                "noise covariance min eigenvalue {min:e}"
            )));
        }
        Ok(Self { channel, noise_cov, n_streams, power })
    }

    pub fn channel(&self) -> &ComplexMatrix {
        &self.channel
    }

    pub fn noise_cov(&self) -> &HermitianMatrix {
        &self.noise_cov
    }

    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn n_tx(&self) -> usize {
        self.channel.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.channel.nrows()
    }

    /// `H^H R_n^{-1} H`, the whitened channel Gram matrix.
    pub fn whitened_gram(&self) -> Result<HermitianMatrix> {
        let rn_inv_h = hermitian_solve(&self.noise_cov, &self.channel)?;
        HermitianMatrix::from_hermitian_part(&(self.channel.adjoint() * rn_inv_h))
    }

    fn check_precoder(&self, f: &Precoder) -> Result<()> {
        ensure_shape(f.matrix(), self.n_tx(), self.n_streams, "precoder")
    }

    fn check_equalizer(&self, g: &Equalizer) -> Result<()> {
        ensure_shape(g.matrix(), self.n_streams, self.n_rx(), "equalizer")
    }
}

/// Transmit precoder `F` (`N_Tx × N_Dat`).
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(ComplexMatrix);

impl Precoder {
    pub fn new(f: ComplexMatrix) -> Result<Self> {
        ensure_finite(&f, "precoder")?;
        Ok(Self(f))
    }

    pub fn zeros(n_tx: usize, n_streams: usize) -> Self {
        Self(ComplexMatrix::zeros(n_tx, n_streams))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `Tr(F F^H)`.
    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_feasible(&self, budget: f64) -> bool {
        self.power() <= budget * (1.0 + POWER_SLACK)
    }
}

/// Linear receiver `G` (`N_Dat × N_Rx`).
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer(ComplexMatrix);

impl Equalizer {
    pub fn new(g: ComplexMatrix) -> Result<Self> {
        ensure_finite(&g, "equalizer")?;
        Ok(Self(g))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// `Φ(G,F) = (GHF − I)(GHF − I)^H + G R_n G^H`.
pub fn mse_matrix(model: &SystemModel, g: &Equalizer, f: &Precoder) -> Result<HermitianMatrix> {
    model.check_precoder(f)?;
    model.check_equalizer(g)?;
    let n = model.n_streams();
    let e = g.matrix() * model.channel() * f.matrix() - ComplexMatrix::identity(n, n);
    let noise = g.matrix() * model.noise_cov().as_matrix() * g.matrix().adjoint();
    HermitianMatrix::from_hermitian_part(&(&e * e.adjoint() + noise))
}

/// `G_LM = (HF)^H (H F F^H H^H + R_n)^{-1}`.
pub fn lmmse_equalizer(model: &SystemModel, f: &Precoder) -> Result<Equalizer> {
    model.check_precoder(f)?;
    let hf = model.channel() * f.matrix();
    let inner = HermitianMatrix::from_hermitian_part(
        &(&hf * hf.adjoint() + model.noise_cov().as_matrix()),
    )?;
    // G^H = inner^{-1} HF since inner is Hermitian.
    let g_h = hermitian_solve(&inner, &hf)
        .map_err(|e| Error::Numerical(format!("LMMSE inner matrix: {e}")))?;
    Equalizer::new(g_h.adjoint())
}

/// `Φ(G_LM, F) = (F^H H^H R_n^{-1} H F + I)^{-1}`.
pub fn mse_lmmse(model: &SystemModel, f: &Precoder) -> Result<HermitianMatrix> {
    model.check_precoder(f)?;
    let rn_inv_hf = hermitian_solve(model.noise_cov(), &(model.channel() * f.matrix()))?;
    let hf = model.channel() * f.matrix();
    let n = model.n_streams();
    let inner = hf.adjoint() * rn_inv_hf + ComplexMatrix::identity(n, n);
    hermitian_inverse(&HermitianMatrix::from_hermitian_part(&inner)?)
}

pub(crate) fn check_weights(w: &[f64]) -> Result<()> {
    match w.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
        Some(j) => Err(Error::InvalidWeight(format!("weight {j} is {}", w[j]))),
        None => Ok(()),
    }
}

/// `Σ_j w_j [Φ(G,F)]_{jj}`.
pub fn classical_weighted_mse(
    model: &SystemModel,
    g: &Equalizer,
    f: &Precoder,
    w: &[f64],
) -> Result<f64> {
    check_weights(w)?;
    if w.len() != model.n_streams() {
        return Err(Error::Shape(format!(
            "{} weights for {} streams",
            w.len(),
            model.n_streams()
        )));
    }
    let phi = mse_matrix(model, g, f)?;
    Ok(w.iter()
        .enumerate()
        .map(|(j, wj)| wj * phi.as_matrix()[(j, j)].re)
        .sum())
}

/// Scales `f` so that `Tr(FF^H) = budget`. Zero stays zero.
pub fn scale_to_power(f: &ComplexMatrix, budget: f64) -> ComplexMatrix {
    let p = f.norm_squared();
    if p == 0.0 {
        f.clone()
    } else {
        f * real((budget / p).sqrt())
    }
}
