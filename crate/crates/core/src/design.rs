//! Structured optimal precoders for the trace and log-determinant of the
//! weighted MSE matrix (single weight term, `K = 1`).
//!
//! Every optimal precoder has the form `F = V_H Λ_F U_F^H`, where `V_H` holds
//! the right singular vectors of the whitened channel `R_n^{-1/2} H`. The
//! rotation `U_F` depends on the objective:
//!
//! * trace: `U_F = U_W`, the left singular vectors of `W`;
//! * log-det: `U_F = U_Θ`, the eigenvectors of `Θ = W Π^{-1} W^H`.
//!
//! In both cases the weight and channel eigenvalues are paired in decreasing
//! order. The gains then come from a scalar water-filling problem whose
//! multiplier is found by bisection.

use crate::error::{Error, Result};
use crate::model::{Precoder, SystemModel};
use crate::spectral::{
    ensure_finite, hermitian_inv_sqrt, hermitian_solve, is_psd, log_det_pd, ordered_evd,
    ordered_svd, real, trace_product, ComplexMatrix, HermitianMatrix, Order, PSD_TOL,
};
use crate::weighting::WeightingOperator;

/// Channel eigenvalues below this fraction of the largest are treated as 0.
pub const RANK_TOL: f64 = 1e-12;
/// Iteration cap for the multiplier bisection.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Relative tolerance on `Σ x_j = P` accepted from the bisection.
pub const POWER_TOL: f64 = 1e-10;

/// Spectrum of the whitened channel `R_n^{-1/2} H = U_H Λ_H V_H^H`.
#[derive(Debug, Clone)]
pub struct WhitenedChannelSpectrum {
    /// Squared singular values, decreasing, padded with zeros to `N_Tx`.
    pub lambda_h: Vec<f64>,
    /// `N_Tx × N_Tx` right singular vectors.
    pub v_h: ComplexMatrix,
}

pub fn whiten_channel(model: &SystemModel) -> Result<WhitenedChannelSpectrum> {
    let rn_inv_sqrt = hermitian_inv_sqrt(model.noise_cov())?;
    let svd = ordered_svd(&(rn_inv_sqrt.as_matrix() * model.channel()))?;
    let mut lambda_h = vec![0.0; model.n_tx()];
    for (dst, s) in lambda_h.iter_mut().zip(&svd.singular_values) {
        *dst = s * s;
    }
    Ok(WhitenedChannelSpectrum { lambda_h, v_h: svd.v })
}

/// Result of checking one of the two eigenvalue inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    /// Eigenvalue-only side of the inequality.
    pub bound: f64,
    /// `Tr(AB)` or `det(A + B)`.
    pub value: f64,
    pub holds: bool,
}

fn psd_pair_eigenvalues(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimension mismatch {} vs {}", a.dim(), b.dim())));
    }
    for m in [a, b] {
        if !is_psd(m, PSD_TOL)? {
            return Err(Error::NotPsd {
                min_eigenvalue: crate::spectral::min_eigenvalue(m)?,
            });
        }
    }
    let la = ordered_evd(a, Order::Decreasing)?.eigenvalues;
    let lb = ordered_evd(b, Order::Decreasing)?.eigenvalues;
    Ok((la, lb))
}

/// `Σ_i λ_i(A) λ_{N-i+1}(B) ≤ Tr(AB)` for PSD `A`, `B`.
pub fn inequ1_lower_bound(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<InequalityCheck> {
    let (la, lb) = psd_pair_eigenvalues(a, b)?;
    let bound: f64 = la.iter().zip(lb.iter().rev()).map(|(x, y)| x * y).sum();
    let value = trace_product(a.as_matrix(), b.as_matrix());
    let scale = a.as_matrix().norm() * b.as_matrix().norm();
    Ok(InequalityCheck { bound, value, holds: bound <= value + 1e-9 * scale })
}

/// `Π_i (λ_i(A) + λ_i(B)) ≤ det(A + B)` for PSD `A`, `B`.
pub fn inequ2_lower_bound(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<InequalityCheck> {
    let (la, lb) = psd_pair_eigenvalues(a, b)?;
    let bound: f64 = la.iter().zip(&lb).map(|(x, y)| x + y).product();
    let sum = ordered_evd(&a.add(b)?, Order::Decreasing)?.eigenvalues;
    let value: f64 = sum.iter().product();
    let floor = 1e-12 * sum[0].abs().max(1e-300).powi(sum.len() as i32);
    let holds = bound <= value + 1e-9 * bound.max(value.abs()) + floor;
    Ok(InequalityCheck { bound, value, holds })
}

/// Optimal per-mode powers `x_j = f_j²` and the water level multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    pub powers: Vec<f64>,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalarization {
    /// `Σ a_j / (1 + b_j x_j)`
    Trace,
    /// `Σ log(a_j / (1 + b_j x_j) + 1)`
    LogDet,
}

impl Scalarization {
    /// Power of one mode at multiplier `mu` from the KKT stationarity
    /// condition, clipped at zero.
    fn mode_power(self, a: f64, b: f64, mu: f64) -> f64 {
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        let t = match self {
            // a b / (1 + b x)^2 = mu
            Scalarization::Trace => (a * b / mu).sqrt(),
            // a b / (t (t + a)) = mu with t = b x + 1; positive root of
            // t^2 + a t - ab/mu = 0, written without cancellation.
            Scalarization::LogDet => {
                let c = a * b / mu;
                2.0 * c / (a + (a * a + 4.0 * c).sqrt())
            }
        };
        ((t - 1.0) / b).max(0.0)
    }

    /// Marginal gain `-∂/∂x` at `x = 0`; modes are active iff it exceeds mu.
    fn threshold(self, a: f64, b: f64) -> f64 {
        match self {
            Scalarization::Trace => a * b,
            Scalarization::LogDet => a * b / (1.0 + a),
        }
    }
}

/// Zeros entries below `RANK_TOL` times the largest entry.
pub fn rank_truncate(lambda: &[f64]) -> Vec<f64> {
    let max = lambda.iter().fold(0.0f64, |m, &v| m.max(v));
    lambda
        .iter()
        .map(|&v| if v < RANK_TOL * max { 0.0 } else { v })
        .collect()
}

fn validate_spectra(weight: &[f64], channel: &[f64], power: f64) -> Result<()> {
    if weight.len() != channel.len() {
        return Err(Error::Shape(format!(
            "{} weight eigenvalues vs {} channel eigenvalues",
            weight.len(),
            channel.len()
        )));
    }
    if let Some(v) = weight.iter().chain(channel).find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("eigenvalue {v} must be finite and >= 0")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidArgument(format!("power budget {power} must be > 0")));
    }
    Ok(())
}

fn waterfill(kind: Scalarization, weight: &[f64], channel: &[f64], power: f64) -> Result<WaterFilling> {
    validate_spectra(weight, channel, power)?;
    let channel = rank_truncate(channel);
    let n = weight.len();
    let total = |mu: f64| -> f64 {
        (0..n).map(|j| kind.mode_power(weight[j], channel[j], mu)).sum()
    };
    let mut hi = (0..n)
        .map(|j| kind.threshold(weight[j], channel[j]))
        .fold(0.0f64, f64::max);
    if hi <= 0.0 {
        return Ok(WaterFilling { powers: vec![0.0; n], multiplier: 0.0 });
    }
    // total(hi) = 0 < P; walk down until the bracket holds.
    let mut lo = hi;
    let mut steps = 0;
    while total(lo) < power {
        lo *= 1e-4;
        steps += 1;
        if lo <= f64::MIN_POSITIVE || steps > MAX_BISECTION_ITERS {
            return Err(Error::Numerical("water level bracket not found".into()));
        }
    }
    // Geometric bisection keeps relative precision across many decades.
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if total(mid) >= power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut mu = if (total(lo) - power).abs() <= (total(hi) - power).abs() { lo } else { hi };
    if kind == Scalarization::Trace {
        if let Some(exact) = trace_level_on_active_set(weight, &channel, power, mu) {
            mu = exact;
        }
    }
    let powers: Vec<f64> = (0..n).map(|j| kind.mode_power(weight[j], channel[j], mu)).collect();
    let used: f64 = powers.iter().sum();
    if (used - power).abs() > POWER_TOL * power {
        return Err(Error::Numerical(format!(
            "water-filling missed the budget: {used} vs {power}"
        )));
    }
    Ok(WaterFilling { powers, multiplier: mu })
}

/// Closed-form multiplier once the active set is known:
/// `μ^{-1/2} = (P + Σ_S 1/b_j) / Σ_S √(a_j/b_j)`. Returns `None` if the
/// active set implied by the new level differs.
fn trace_level_on_active_set(a: &[f64], b: &[f64], power: f64, mu: f64) -> Option<f64> {
    let active: Vec<usize> = (0..a.len()).filter(|&j| a[j] * b[j] > mu && b[j] > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let num: f64 = power + active.iter().map(|&j| 1.0 / b[j]).sum::<f64>();
    let den: f64 = active.iter().map(|&j| (a[j] / b[j]).sqrt()).sum();
    let exact = (den / num).powi(2);
    let consistent = (0..a.len()).all(|j| {
        let on = active.contains(&j);
        let x = Scalarization::Trace.mode_power(a[j], b[j], exact);
        if on { a[j] * b[j] >= exact } else { x == 0.0 }
    });
    consistent.then_some(exact)
}

/// Minimizes `Σ_j λ_w,j / (1 + λ_h,j x_j)` subject to `Σ_j x_j ≤ P`.
///
/// Inputs are paired index-to-index; any order is accepted, the designs
/// pass both sorted decreasing.
pub fn waterfill_trace(lambda_w: &[f64], lambda_h: &[f64], power: f64) -> Result<WaterFilling> {
    waterfill(Scalarization::Trace, lambda_w, lambda_h, power)
}

/// Minimizes `Σ_j log(λ_Θ,j / (λ_h,j x_j + 1) + 1)` subject to `Σ_j x_j ≤ P`.
pub fn waterfill_logdet(lambda_theta: &[f64], lambda_h: &[f64], power: f64) -> Result<WaterFilling> {
    waterfill(Scalarization::LogDet, lambda_theta, lambda_h, power)
}

/// `Σ_j a_j/(1 + b_j x_j)` over the paired modes plus `Σ a_j` for the
/// remaining weight eigenvalues (modes with no transmit dimension).
pub fn trace_scalar_objective(lambda_w: &[f64], lambda_h: &[f64], powers: &[f64]) -> f64 {
    lambda_w
        .iter()
        .enumerate()
        .map(|(j, &a)| match (lambda_h.get(j), powers.get(j)) {
            (Some(&b), Some(&x)) => a / (1.0 + b * x),
            _ => a,
        })
        .sum()
}

/// `Σ_j log(a_j/(b_j x_j + 1) + 1)`, unpaired modes contribute `log(a_j + 1)`.
pub fn logdet_scalar_objective(lambda_theta: &[f64], lambda_h: &[f64], powers: &[f64]) -> f64 {
    lambda_theta
        .iter()
        .enumerate()
        .map(|(j, &a)| match (lambda_h.get(j), powers.get(j)) {
            (Some(&b), Some(&x)) => (a / (b * x + 1.0)).ln_1p(),
            _ => a.ln_1p(),
        })
        .sum()
}

/// `F = V_H Λ_F U_F^H` with `Λ_F` the `N_Tx × N_Dat` rectangular diagonal
/// carrying `gains`.
pub fn assemble_precoder(
    spectrum: &WhitenedChannelSpectrum,
    gains: &[f64],
    u_f: &ComplexMatrix,
) -> Result<Precoder> {
    ensure_finite(u_f, "rotation")?;
    let n_tx = spectrum.v_h.nrows();
    if !u_f.is_square() {
        return Err(Error::Shape("U_F must be square".into()));
    }
    let n_dat = u_f.nrows();
    if gains.len() > n_tx.min(n_dat) {
        return Err(Error::Shape(format!(
            "{} gains for a {n_tx}x{n_dat} precoder",
            gains.len()
        )));
    }
    if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument("gains must be finite and >= 0".into()));
    }
    let deviation = (u_f.adjoint() * u_f - ComplexMatrix::identity(n_dat, n_dat)).norm();
    if deviation > 1e-8 {
        return Err(Error::InvalidArgument(format!("U_F is not unitary ({deviation:e})")));
    }
    let mut lambda_f = ComplexMatrix::zeros(n_tx, n_dat);
    for (j, &g) in gains.iter().enumerate() {
        lambda_f[(j, j)] = real(g);
    }
    Precoder::new(&spectrum.v_h * lambda_f * u_f.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Trace,
    LogDet,
}

/// How to treat a singular `Π` in the log-det design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PiRegularization {
    /// Refuse with `NotPd`.
    #[default]
    Strict,
    /// Replace `Π` by `Π + εI`, `ε = 1e-10·Tr(Π)/M`.
    Jitter,
}

/// A structured optimal precoder and its bookkeeping.
#[derive(Debug, Clone)]
pub struct PrecoderDesign {
    pub objective: Objective,
    pub v_h: ComplexMatrix,
    /// Amplitudes `f_j`, one per paired mode (`min(N_Tx, N_Dat)`).
    pub gains: Vec<f64>,
    pub u_f: ComplexMatrix,
    pub precoder: Precoder,
    /// `Tr Ψ(F)` or `log det Ψ(F)` evaluated from the assembled `F`.
    pub objective_value: f64,
    /// The same objective from the scalar water-filling form.
    pub scalar_objective: f64,
    pub multiplier: f64,
    /// Channel eigenvalues paired with the gains (after rank truncation).
    pub lambda_h: Vec<f64>,
    /// `λ_w` (trace) or `λ_Θ` (log-det), decreasing, length `N_Dat`.
    pub lambda_weight: Vec<f64>,
    /// The operator actually used (differs from the input only under jitter).
    pub operator: WeightingOperator,
    pub pi_jitter: f64,
}

impl PrecoderDesign {
    pub fn powers(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g * g).collect()
    }

    pub fn power_used(&self) -> f64 {
        self.gains.iter().map(|g| g * g).sum()
    }
}

pub fn trace_objective(op: &WeightingOperator, model: &SystemModel, f: &Precoder) -> Result<f64> {
    Ok(op.weighted_mse_of_precoder(model, f)?.trace())
}

pub fn logdet_objective(op: &WeightingOperator, model: &SystemModel, f: &Precoder) -> Result<f64> {
    log_det_pd(&op.weighted_mse_of_precoder(model, f)?)
}

fn check_single_term(model: &SystemModel, op: &WeightingOperator) -> Result<()> {
    if op.k() != 1 {
        return Err(Error::Unsupported(format!(
            "closed-form design needs K = 1, operator has K = {}",
            op.k()
        )));
    }
    if op.input_dim() != model.n_streams() {
        return Err(Error::Shape(format!(
            "W has {} rows, model has {} streams",
            op.input_dim(),
            model.n_streams()
        )));
    }
    Ok(())
}

/// Minimizes `Tr Ψ(F)` subject to `Tr(FF^H) ≤ P`.
pub fn design_trace_min(model: &SystemModel, op: &WeightingOperator) -> Result<PrecoderDesign> {
    check_single_term(model, op)?;
    let spectrum = whiten_channel(model)?;
    let w_svd = ordered_svd(&op.weights()[0])?;
    let n_dat = model.n_streams();
    let n_modes = model.n_tx().min(n_dat);
    let lambda_w: Vec<f64> = (0..n_dat)
        .map(|j| w_svd.singular_values.get(j).map_or(0.0, |s| s * s))
        .collect();
    let lambda_h = rank_truncate(&spectrum.lambda_h[..n_modes]);
    let wf = waterfill_trace(&lambda_w[..n_modes], &lambda_h, model.power())?;
    let gains: Vec<f64> = wf.powers.iter().map(|x| x.sqrt()).collect();
    let precoder = assemble_precoder(&spectrum, &gains, &w_svd.u)?;
    let objective_value = trace_objective(op, model, &precoder)?;
    let scalar_objective =
        trace_scalar_objective(&lambda_w, &lambda_h, &wf.powers) + op.offset().trace();
    Ok(PrecoderDesign {
        objective: Objective::Trace,
        v_h: spectrum.v_h,
        gains,
        u_f: w_svd.u,
        precoder,
        objective_value,
        scalar_objective,
        multiplier: wf.multiplier,
        lambda_h,
        lambda_weight: lambda_w,
        operator: op.clone(),
        pi_jitter: 0.0,
    })
}

/// Minimizes `log det Ψ(F)` subject to `Tr(FF^H) ≤ P`. Needs `Π ≻ 0`.
pub fn design_det_min(
    model: &SystemModel,
    op: &WeightingOperator,
    regularization: PiRegularization,
) -> Result<PrecoderDesign> {
    check_single_term(model, op)?;
    let (op, pi_jitter) = match log_det_pd(op.offset()) {
        Ok(_) => (op.clone(), 0.0),
        Err(_) if regularization == PiRegularization::Jitter => {
            let jittered = op.jittered()?;
            let eps = 1e-10 * op.offset().trace() / op.output_dim() as f64;
            log_det_pd(jittered.offset())
                .map_err(|_| Error::NotPd("Π is singular even after jitter".into()))?;
            (jittered, eps)
        }
        Err(_) => {
            return Err(Error::NotPd(
                "Π must be positive definite for the log-det design".into(),
            ))
        }
    };
    let w = &op.weights()[0];
    let theta = HermitianMatrix::from_hermitian_part(&(w * hermitian_solve(op.offset(), &w.adjoint())?))?;
    let theta_evd = ordered_evd(&theta, Order::Decreasing)?;
    let lambda_theta: Vec<f64> = theta_evd.eigenvalues.iter().map(|l| l.max(0.0)).collect();

    let spectrum = whiten_channel(model)?;
    let n_modes = model.n_tx().min(model.n_streams());
    let lambda_h = rank_truncate(&spectrum.lambda_h[..n_modes]);
    let wf = waterfill_logdet(&lambda_theta[..n_modes], &lambda_h, model.power())?;
    let gains: Vec<f64> = wf.powers.iter().map(|x| x.sqrt()).collect();
    let precoder = assemble_precoder(&spectrum, &gains, &theta_evd.vectors)?;
    let objective_value = logdet_objective(&op, model, &precoder)?;
    let scalar_objective = log_det_pd(op.offset())?
        + logdet_scalar_objective(&lambda_theta, &lambda_h, &wf.powers);
    Ok(PrecoderDesign {
        objective: Objective::LogDet,
        v_h: spectrum.v_h,
        gains,
        u_f: theta_evd.vectors,
        precoder,
        objective_value,
        scalar_objective,
        multiplier: wf.multiplier,
        lambda_h,
        lambda_weight: lambda_theta,
        operator: op,
        pi_jitter,
    })
}

/// Runs the design for `objective`; the log-det branch uses `regularization`.
pub fn design(
    objective: Objective,
    model: &SystemModel,
    op: &WeightingOperator,
    regularization: PiRegularization,
) -> Result<PrecoderDesign> {
    match objective {
        Objective::Trace => design_trace_min(model, op),
        Objective::LogDet => design_det_min(model, op, regularization),
    }
}

/// Objective of an arbitrary precoder under `objective`.
pub fn evaluate(
    objective: Objective,
    op: &WeightingOperator,
    model: &SystemModel,
    f: &Precoder,
) -> Result<f64> {
    match objective {
        Objective::Trace => trace_objective(op, model, f),
        Objective::LogDet => logdet_objective(op, model, f),
    }
}

/// Relative KKT stationarity residual of each active mode,
/// `|g_j(x_j) - μ| / μ` where `g_j` is the marginal objective decrease.
pub fn kkt_residuals(objective: Objective, weight: &[f64], channel: &[f64], wf: &WaterFilling) -> Vec<f64> {
    let mu = wf.multiplier;
    wf.powers
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(j, &x)| {
            let (a, b) = (weight[j], channel[j]);
            let t = b * x + 1.0;
            let g = match objective {
                Objective::Trace => a * b / (t * t),
                Objective::LogDet => a * b / (t * (t + a)),
            };
            (g - mu).abs() / mu
        })
        .collect()
}
