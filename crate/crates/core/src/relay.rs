//! Dual-hop amplify-and-forward relaying as a weighting operation.
//!
//! Source `s` (covariance `R_s`) reaches the relay through `H1` with noise
//! `n1`; the relay forwards `Pm (H1 s + n1)` through `H2` with noise `n2`.
//! Writing `C = H1 R_s H1^H + R_n1` (the relay input covariance), the chain
//! is the point-to-point model with
//!
//! ```text
//! H = H2, R_n = R_n2, K = 1,
//! W = C^{-1/2} H1 R_s,  Π = R_s − W^H W,  F = Pm C^{1/2}.
//! ```
//!
//! `Π` is the first-hop LMMSE error covariance, so the relay's weighted MSE
//! matrix is the end-to-end MSE of detecting `s` at the destination.

use crate::design::{design_det_min, design_trace_min, PiRegularization, PrecoderDesign};
use crate::error::{Error, Result};
use crate::model::{Precoder, SystemModel, POWER_SLACK};
use crate::spectral::{
    ensure_finite, ensure_shape, hermitian_inv_sqrt, hermitian_solve, hermitian_sqrt, log_det,
    log_det_pd, min_eigenvalue, ordered_evd, ComplexMatrix, HermitianMatrix, Order,
};
use crate::weighting::WeightingOperator;

#[derive(Debug, Clone)]
pub struct RelayModel {
    h1: ComplexMatrix,
    h2: ComplexMatrix,
    source_cov: HermitianMatrix,
    relay_noise_cov: HermitianMatrix,
    dest_noise_cov: HermitianMatrix,
    power: f64,
}

fn require_pd(m: &HermitianMatrix, what: &str) -> Result<()> {
    let min = min_eigenvalue(m)?;
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::NotPd(format!("{what} min eigenvalue {min:e}")))
    }
}

impl RelayModel {
    /// `h1`: relay × source, `h2`: destination × relay.
    pub fn new(
        h1: ComplexMatrix,
        h2: ComplexMatrix,
        source_cov: HermitianMatrix,
        relay_noise_cov: HermitianMatrix,
        dest_noise_cov: HermitianMatrix,
        power: f64,
    ) -> Result<Self> {
        ensure_finite(&h1, "H1")?;
        ensure_finite(&h2, "H2")?;
        let (n_relay, n_source) = h1.shape();
        let n_dest = h2.nrows();
        if n_relay == 0 || n_source == 0 || n_dest == 0 || h2.ncols() == 0 {
            return Err(Error::Shape("dimensions must be at least 1".into()));
        }
        let dims = [
            (source_cov.dim(), n_source, "R_s"),
            (relay_noise_cov.dim(), n_relay, "R_n1"),
            (dest_noise_cov.dim(), n_dest, "R_n2"),
        ];
        for (got, want, what) in dims {
            if got != want {
                return Err(Error::Shape(format!("{what} is {got}x{got}, expected {want}x{want}")));
            }
        }
        require_pd(&source_cov, "R_s")?;
        require_pd(&relay_noise_cov, "R_n1")?;
        require_pd(&dest_noise_cov, "R_n2")?;
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!("power budget {power} must be > 0")));
        }
        Ok(Self { h1, h2, source_cov, relay_noise_cov, dest_noise_cov, power })
    }

    pub fn h1(&self) -> &ComplexMatrix {
        &self.h1
    }

    pub fn h2(&self) -> &ComplexMatrix {
        &self.h2
    }

    pub fn source_cov(&self) -> &HermitianMatrix {
        &self.source_cov
    }

    pub fn relay_noise_cov(&self) -> &HermitianMatrix {
        &self.relay_noise_cov
    }

    pub fn dest_noise_cov(&self) -> &HermitianMatrix {
        &self.dest_noise_cov
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn n_source(&self) -> usize {
        self.h1.ncols()
    }

    /// Receive antennas at the relay (rows of `H1`).
    pub fn n_relay_rx(&self) -> usize {
        self.h1.nrows()
    }

    /// Transmit antennas at the relay (columns of `H2`).
    pub fn n_relay_tx(&self) -> usize {
        self.h2.ncols()
    }

    pub fn n_dest(&self) -> usize {
        self.h2.nrows()
    }

    /// `C = H1 R_s H1^H + R_n1`.
    pub fn relay_input_cov(&self) -> Result<HermitianMatrix> {
        HermitianMatrix::from_hermitian_part(
            &(&self.h1 * self.source_cov.as_matrix() * self.h1.adjoint()
                + self.relay_noise_cov.as_matrix()),
        )
    }

    fn check_forwarding(&self, pm: &ForwardingMatrix) -> Result<()> {
        ensure_shape(pm.matrix(), self.n_relay_tx(), self.n_relay_rx(), "forwarding matrix")
    }
}

/// Relay forwarding matrix `Pm` (`relay tx × relay rx`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardingMatrix(ComplexMatrix);

impl ForwardingMatrix {
    pub fn new(pm: ComplexMatrix) -> Result<Self> {
        ensure_finite(&pm, "forwarding matrix")?;
        Ok(Self(pm))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Relay transmit power `Tr(Pm C Pm^H)`.
pub fn relay_power(model: &RelayModel, pm: &ForwardingMatrix) -> Result<f64> {
    model.check_forwarding(pm)?;
    let c = model.relay_input_cov()?;
    Ok((pm.matrix() * c.as_matrix() * pm.matrix().adjoint())
        .trace()
        .re)
}

pub fn is_feasible(model: &RelayModel, pm: &ForwardingMatrix) -> Result<bool> {
    Ok(relay_power(model, pm)? <= model.power() * (1.0 + POWER_SLACK))
}

/// The point-to-point model and operator equivalent to a relay chain.
#[derive(Debug, Clone)]
pub struct RelayMapping {
    pub system: SystemModel,
    pub operator: WeightingOperator,
    input_cov_sqrt: HermitianMatrix,
    input_cov_inv_sqrt: HermitianMatrix,
}

impl RelayMapping {
    pub fn into_parts(self) -> (SystemModel, WeightingOperator) {
        (self.system, self.operator)
    }

    /// `Pm = F C^{-1/2}`.
    pub fn forwarding(&self, f: &Precoder) -> Result<ForwardingMatrix> {
        ensure_shape(
            f.matrix(),
            self.system.n_tx(),
            self.system.n_streams(),
            "precoder",
        )?;
        ForwardingMatrix::new(f.matrix() * self.input_cov_inv_sqrt.as_matrix())
    }

    /// `F = Pm C^{1/2}`.
    pub fn precoder(&self, pm: &ForwardingMatrix) -> Result<Precoder> {
        ensure_shape(
            pm.matrix(),
            self.system.n_tx(),
            self.system.n_streams(),
            "forwarding matrix",
        )?;
        Precoder::new(pm.matrix() * self.input_cov_sqrt.as_matrix())
    }
}

/// Builds the equivalent `(SystemModel, WeightingOperator)`.
pub fn relay_to_weighted(model: &RelayModel) -> Result<RelayMapping> {
    let c = model.relay_input_cov()?;
    let c_inv_sqrt = hermitian_inv_sqrt(&c)?;
    let c_sqrt = hermitian_sqrt(&c)?;
    let rs = model.source_cov().as_matrix();
    let w = c_inv_sqrt.as_matrix() * model.h1() * rs;

    // Π = R_s − R_s H1^H C^{-1} H1 R_s, computed in LMMSE-error form and
    // projected back onto the PSD cone.
    let gain = hermitian_solve(&c, &(model.h1() * rs))?;
    let raw = HermitianMatrix::from_hermitian_part(&(rs - rs * model.h1().adjoint() * gain))?;
    let pi = clip_negative_eigenvalues(raw)?;

    let system = SystemModel::new(
        model.h2().clone(),
        model.dest_noise_cov().clone(),
        model.n_relay_rx(),
        model.power(),
    )?;
    let operator = WeightingOperator::new(vec![w], pi)?;
    Ok(RelayMapping { system, operator, input_cov_sqrt: c_sqrt, input_cov_inv_sqrt: c_inv_sqrt })
}

fn clip_negative_eigenvalues(m: HermitianMatrix) -> Result<HermitianMatrix> {
    let evd = ordered_evd(&m, Order::Decreasing)?;
    if evd.eigenvalues.iter().all(|&l| l >= 0.0) {
        return Ok(m);
    }
    let floor = -1e-12 * m.trace().abs().max(f64::MIN_POSITIVE);
    if let Some(&bad) = evd.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(Error::NotPsd { min_eigenvalue: bad });
    }
    let clipped: Vec<f64> = evd.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    HermitianMatrix::from_eigen(&evd.vectors, &clipped)
}

/// `Pm = F (H1 R_s H1^H + R_n1)^{-1/2}`.
pub fn precoder_to_forwarding(model: &RelayModel, f: &Precoder) -> Result<ForwardingMatrix> {
    ensure_shape(f.matrix(), model.n_relay_tx(), model.n_relay_rx(), "precoder")?;
    let c_inv_sqrt = hermitian_inv_sqrt(&model.relay_input_cov()?)?;
    ForwardingMatrix::new(f.matrix() * c_inv_sqrt.as_matrix())
}

/// Weighted MSE matrix of the relay chain computed directly:
/// `R_s − R_s H1^H Pm^H H2^H [H2 Pm C Pm^H H2^H + R_n2]^{-1} H2 Pm H1 R_s`.
pub fn relay_weighted_mse(model: &RelayModel, pm: &ForwardingMatrix) -> Result<HermitianMatrix> {
    model.check_forwarding(pm)?;
    let c = model.relay_input_cov()?;
    let h2p = model.h2() * pm.matrix();
    let bracket = HermitianMatrix::from_hermitian_part(
        &(&h2p * c.as_matrix() * h2p.adjoint() + model.dest_noise_cov().as_matrix()),
    )?;
    let rs = model.source_cov().as_matrix();
    let cross = &h2p * model.h1() * rs;
    let solved = hermitian_solve(&bracket, &cross)
        .map_err(|e| Error::Numerical(format!("relay MSE bracket: {e}")))?;
    HermitianMatrix::from_hermitian_part(&(rs - cross.adjoint() * solved))
}

/// Relay capacity by two routes that must agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayCapacity {
    /// `log|R_s| − log|Ψ(Pm)|`.
    pub via_mse: f64,
    /// `log|H2 Pm H1 R_s H1^H Pm^H H2^H (H2 Pm R_n1 Pm^H H2^H + R_n2)^{-1} + I|`.
    pub direct: f64,
}

impl RelayCapacity {
    pub fn value(&self) -> f64 {
        self.via_mse
    }

    pub fn discrepancy(&self) -> f64 {
        (self.via_mse - self.direct).abs() / self.via_mse.abs().max(self.direct.abs()).max(1.0)
    }
}

pub fn relay_capacity(model: &RelayModel, pm: &ForwardingMatrix) -> Result<RelayCapacity> {
    let psi = relay_weighted_mse(model, pm)?;
    let via_mse = log_det_pd(model.source_cov())? - log_det_pd(&psi)?;

    let h2p = model.h2() * pm.matrix();
    let a = &h2p * model.h1();
    let signal = &a * model.source_cov().as_matrix() * a.adjoint();
    let noise = HermitianMatrix::from_hermitian_part(
        &(&h2p * model.relay_noise_cov().as_matrix() * h2p.adjoint()
            + model.dest_noise_cov().as_matrix()),
    )?;
    // X Q^{-1} = (Q^{-1} X^H)^H, and X is Hermitian.
    let x_qinv = hermitian_solve(&noise, &signal.adjoint())?.adjoint();
    let n = model.n_dest();
    let direct = log_det(&(x_qinv + ComplexMatrix::identity(n, n)))?.re;
    Ok(RelayCapacity { via_mse, direct })
}

/// A relay design: forwarding matrix, objective and the point-to-point
/// design it came from.
#[derive(Debug, Clone)]
pub struct RelayDesign {
    pub forwarding: ForwardingMatrix,
    /// `Tr Ψ(Pm)` for sum-MSE, capacity for the capacity design.
    pub objective: f64,
    pub design: PrecoderDesign,
}

/// Minimizes the end-to-end sum MSE `Tr Ψ(Pm)` under the relay power budget.
pub fn design_relay_sum_mse(model: &RelayModel) -> Result<RelayDesign> {
    let mapping = relay_to_weighted(model)?;
    let design = design_trace_min(&mapping.system, &mapping.operator)?;
    let forwarding = mapping.forwarding(&design.precoder)?;
    let objective = relay_weighted_mse(model, &forwarding)?.trace();
    Ok(RelayDesign { forwarding, objective, design })
}

/// Maximizes the relay capacity by minimizing `log|Ψ(Pm)|`.
pub fn design_relay_capacity(
    model: &RelayModel,
    regularization: PiRegularization,
) -> Result<RelayDesign> {
    let mapping = relay_to_weighted(model)?;
    let design = design_det_min(&mapping.system, &mapping.operator, regularization)?;
    let forwarding = mapping.forwarding(&design.precoder)?;
    let objective = relay_capacity(model, &forwarding)?.value();
    Ok(RelayDesign { forwarding, objective, design })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rel_frobenius_diff;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_chain(h1: f64, h2: f64, power: f64) -> RelayModel {
        let one = HermitianMatrix::identity(1);
        RelayModel::new(
            ComplexMatrix::from_element(1, 1, c(h1, 0.0)),
            ComplexMatrix::from_element(1, 1, c(h2, 0.0)),
            one.clone(),
            one.clone(),
            one,
            power,
        )
        .unwrap()
    }

    fn chain_2x2() -> RelayModel {
        let h1 = ComplexMatrix::from_row_slice(2, 2, &[c(0.8, -0.2), c(0.3, 0.5), c(-0.4, 0.1), c(1.0, 0.3)]);
        let h2 = ComplexMatrix::from_row_slice(2, 2, &[c(0.2, 0.9), c(-0.6, 0.0), c(0.5, 0.5), c(0.7, -0.3)]);
        let rs = HermitianMatrix::from_hermitian_part(&ComplexMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.2, 0.3), c(0.2, -0.3), c(0.8, 0.0)])).unwrap();
        RelayModel::new(h1, h2, rs, HermitianMatrix::identity(2).scale(0.5), HermitianMatrix::identity(2), 2.0).unwrap()
    }

    #[test]
    fn mapping_examples() {
        let zero_h1 = RelayModel::new(
            ComplexMatrix::zeros(2, 2),
            ComplexMatrix::identity(2, 2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            1.0,
        )
        .unwrap();
        let (_, op) = relay_to_weighted(&zero_h1).unwrap().into_parts();
        assert_eq!(op.weights()[0].norm(), 0.0);
        assert!((op.offset().as_matrix() - ComplexMatrix::identity(2, 2)).norm() < 1e-15);

        let unit = RelayModel::new(
            ComplexMatrix::identity(2, 2),
            ComplexMatrix::identity(2, 2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            1.0,
        )
        .unwrap();
        let (_, op) = relay_to_weighted(&unit).unwrap().into_parts();
        let half = ComplexMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!((&op.weights()[0] - ComplexMatrix::identity(2, 2) * c(0.5f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!((op.offset().as_matrix() - half).norm() < 1e-14);
    }

    #[test]
    fn offset_completes_source_covariance() {
        let m = chain_2x2();
        let (_, op) = relay_to_weighted(&m).unwrap().into_parts();
        let w = &op.weights()[0];
        let sum = op.offset().as_matrix() + w.adjoint() * w;
        assert!(rel_frobenius_diff(&sum, m.source_cov().as_matrix()) < 1e-10);
    }

    #[test]
    fn forwarding_examples() {
        let m = chain_2x2();
        let zero = precoder_to_forwarding(&m, &Precoder::zeros(2, 2)).unwrap();
        assert_eq!(zero.matrix().norm(), 0.0);

        let no_h1 = RelayModel::new(
            ComplexMatrix::zeros(2, 2),
            ComplexMatrix::identity(2, 2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            HermitianMatrix::identity(2),
            1.0,
        )
        .unwrap();
        let f = Precoder::new(ComplexMatrix::from_row_slice(2, 2, &[c(0.1, 0.2), c(0.3, 0.0), c(0.0, -0.4), c(0.5, 0.5)])).unwrap();
        let pm = precoder_to_forwarding(&no_h1, &f).unwrap();
        assert!((pm.matrix() - f.matrix()).norm() < 1e-15);

        let pm = precoder_to_forwarding(&m, &f).unwrap();
        assert!((relay_power(&m, &pm).unwrap() - f.power()).abs() < 1e-9 * f.power());
    }

    #[test]
    fn zero_forwarding() {
        let m = chain_2x2();
        let pm = ForwardingMatrix::new(ComplexMatrix::zeros(2, 2)).unwrap();
        let psi = relay_weighted_mse(&m, &pm).unwrap();
        assert!((psi.as_matrix() - m.source_cov().as_matrix()).norm() < 1e-15);
        let cap = relay_capacity(&m, &pm).unwrap();
        assert!(cap.via_mse.abs() < 1e-14 && cap.direct.abs() < 1e-14);
    }

    #[test]
    fn scalar_chain_two_routes() {
        let p = 0.7f64;
        let m = scalar_chain(1.0, 1.0, 1.0);
        let pm = ForwardingMatrix::new(ComplexMatrix::from_element(1, 1, c(p, 0.0))).unwrap();
        let direct = relay_weighted_mse(&m, &pm).unwrap().as_matrix()[(0, 0)].re;
        // 1 − p² / (2p² + 1)
        assert!((direct - (1.0 - p * p / (2.0 * p * p + 1.0))).abs() < 1e-15);
        let mapping = relay_to_weighted(&m).unwrap();
        let f = mapping.precoder(&pm).unwrap();
        let via = mapping.operator.weighted_mse_of_precoder(&mapping.system, &f).unwrap();
        assert!((via.as_matrix()[(0, 0)].re - direct).abs() < 1e-12);
    }

    #[test]
    fn scalar_chain_capacity_saturates_at_first_hop() {
        let m = scalar_chain(1.0, 1.0, 1.0);
        let bottleneck = 2.0f64.ln(); // log(1 + |h1|² R_s / R_n1)
        let mut prev = 0.0;
        for p2 in [0.1, 1.0, 10.0, 1e3, 1e6] {
            let pm = ForwardingMatrix::new(ComplexMatrix::from_element(1, 1, c(f64::sqrt(p2), 0.0))).unwrap();
            let cap = relay_capacity(&m, &pm).unwrap();
            assert!(cap.value() > prev && cap.value() < bottleneck);
            assert!(cap.discrepancy() < 1e-12);
            prev = cap.value();
        }
        assert!((bottleneck - prev) / bottleneck < 0.01);
    }

    #[test]
    fn designs_on_degenerate_chains() {
        let mut m = chain_2x2();
        m.h2 = ComplexMatrix::zeros(2, 2);
        let d = design_relay_sum_mse(&m).unwrap();
        assert_eq!(d.forwarding.matrix().norm(), 0.0);
        assert!((d.objective - m.source_cov().trace()).abs() < 1e-12);

        let mut m = chain_2x2();
        m.h1 = ComplexMatrix::zeros(2, 2);
        let d = design_relay_capacity(&m, PiRegularization::Strict).unwrap();
        assert_eq!(d.forwarding.matrix().norm(), 0.0);
        assert!(d.objective.abs() < 1e-12);
    }

    #[test]
    fn designs_use_the_full_relay_budget() {
        let m = chain_2x2();
        for d in [
            design_relay_sum_mse(&m).unwrap(),
            design_relay_capacity(&m, PiRegularization::Strict).unwrap(),
        ] {
            let p = relay_power(&m, &d.forwarding).unwrap();
            assert!((p - m.power()).abs() < 1e-9 * m.power());
        }
    }

    #[test]
    fn validation() {
        let one = HermitianMatrix::identity(1);
        assert!(matches!(
            RelayModel::new(
                ComplexMatrix::identity(2, 2),
                ComplexMatrix::identity(2, 2),
                one.clone(),
                HermitianMatrix::identity(2),
                HermitianMatrix::identity(2),
                1.0
            ),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            RelayModel::new(
                ComplexMatrix::identity(1, 1),
                ComplexMatrix::identity(1, 1),
                one.clone(),
                HermitianMatrix::zeros(1),
                one,
                1.0
            ),
            Err(Error::NotPd(_))
        ));
    }
}
