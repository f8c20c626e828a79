//! Seeded random problem instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::rng::Rng;
use crate::model::SystemModel;
use crate::relay::RelayModel;
use crate::spectral::{real, ComplexMatrix, HermitianMatrix};
use crate::weighting::WeightingOperator;

/// `(N_Tx, N_Rx, N_Dat, M)`.
///
/// For relay instances the same tuple reads as relay-tx, destination,
/// relay-rx and source antennas, which is exactly the shape of the
/// equivalent point-to-point problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_dat: usize,
    pub m: usize,
}

impl Dims {
    pub const fn new(n_tx: usize, n_rx: usize, n_dat: usize, m: usize) -> Self {
        Self { n_tx, n_rx, n_dat, m }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_tx", self.n_tx), ("n_rx", self.n_rx), ("n_dat", self.n_dat), ("m", self.m)] {
            if v == 0 {
                return Err(Error::Config(format!("field `dims.{name}`: must be >= 1")));
            }
        }
        Ok(())
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::new(2, 2, 2, 2)
    }
}

/// `B^H B + 0.1 I` with `B` square complex Gaussian.
pub fn random_pd(rng: &mut Rng, n: usize) -> HermitianMatrix {
    let b = rng.complex_matrix(n, n);
    let m = b.adjoint() * &b + ComplexMatrix::identity(n, n) * real(0.1);
    HermitianMatrix::from_hermitian_part(&m).expect("square")
}

/// `B^H B` with `B` a `rank × n` complex Gaussian.
pub fn random_psd(rng: &mut Rng, n: usize, rank: usize) -> HermitianMatrix {
    let b = rng.complex_matrix(rank, n);
    HermitianMatrix::from_hermitian_part(&(b.adjoint() * b)).expect("square")
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix,
/// with the phases of `diag(R)` folded back into `Q`.
pub fn random_unitary(rng: &mut Rng, n: usize) -> ComplexMatrix {
    let qr = rng.complex_matrix(n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { real(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A point-to-point instance with a random `K = 1` weighting operator.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub model: SystemModel,
    pub operator: WeightingOperator,
}

/// Channel and `W` with unit-variance complex Gaussian entries; `R_n` and
/// `Π` drawn with [`random_pd`].
pub fn generate_system(rng: &mut Rng, dims: Dims, power: f64) -> Result<SystemInstance> {
    dims.validate()?;
    let h = rng.complex_matrix(dims.n_rx, dims.n_tx);
    let rn = random_pd(rng, dims.n_rx);
    let w = rng.complex_matrix(dims.n_dat, dims.m);
    let pi = random_pd(rng, dims.m);
    Ok(SystemInstance {
        model: SystemModel::new(h, rn, dims.n_dat, power)?,
        operator: WeightingOperator::new(vec![w], pi)?,
    })
}

/// Relay chain with `H1: n_dat × m`, `H2: n_rx × n_tx` and all covariances
/// drawn with [`random_pd`].
pub fn generate_relay(rng: &mut Rng, dims: Dims, power: f64) -> Result<RelayModel> {
    dims.validate()?;
    let h1 = rng.complex_matrix(dims.n_dat, dims.m);
    let h2 = rng.complex_matrix(dims.n_rx, dims.n_tx);
    let rs = random_pd(rng, dims.m);
    let rn1 = random_pd(rng, dims.n_dat);
    let rn2 = random_pd(rng, dims.n_rx);
    RelayModel::new(h1, h2, rs, rn1, rn2, power)
}

/// PSD pair with a shared Haar eigenbasis: `A = U diag(a) U^H` with `a`
/// decreasing and `B = U diag(b) U^H` with `b` decreasing, or increasing
/// when `b_reversed`. Eigenvalues are uniform on `(0, 2)`.
pub fn commuting_psd_pair(rng: &mut Rng, n: usize, b_reversed: bool) -> (HermitianMatrix, HermitianMatrix) {
    let u = random_unitary(rng, n);
    let mut sorted = |reverse: bool| {
        let mut v: Vec<f64> = (0..n).map(|_| 2.0 * rng.uniform()).collect();
        v.sort_by(|x, y| y.total_cmp(x));
        if reverse {
            v.reverse();
        }
        v
    };
    let a = sorted(false);
    let b = sorted(b_reversed);
    let build = |d: &[f64]| HermitianMatrix::from_eigen(&u, d).expect("unitary basis");
    (build(&a), build(&b))
}
