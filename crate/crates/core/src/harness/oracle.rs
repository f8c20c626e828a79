//! Independent checks for the structured designs: random search with
//! projected-gradient refinement, 1-D grid search, the textbook sum-MSE
//! water-filler and the stacked-model LMMSE error of a relay chain.
//!
//! None of these use the closed-form rotations or the water-filling solver.

use crate::design::Objective;
use crate::error::{Error, Result};
use crate::harness::rng::Rng;
use crate::model::{Precoder, SystemModel};
use crate::relay::{relay_power, relay_to_weighted, relay_weighted_mse, ForwardingMatrix, RelayMapping, RelayModel};
use crate::spectral::{hermitian_inverse, hermitian_solve, log_det_pd, real, ComplexMatrix, HermitianMatrix};
use crate::weighting::WeightingOperator;

/// A power-constrained matrix minimization.
pub trait SearchProblem: Sync {
    fn shape(&self) -> (usize, usize);
    fn budget(&self) -> f64;
    /// Quadratic power functional of the variable.
    fn power(&self, x: &ComplexMatrix) -> Result<f64>;
    fn objective(&self, x: &ComplexMatrix) -> Result<f64>;
    /// `∂f/∂conj(X)` up to a positive factor.
    fn gradient(&self, x: &ComplexMatrix) -> Result<ComplexMatrix>;

    /// Search direction used by [`refine`]. Must be the gradient in the
    /// metric of the power functional, otherwise rescaling back onto the
    /// boundary can stall away from stationary points.
    fn descent_direction(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.gradient(x)
    }

    /// Rescales onto the power boundary. Zero stays zero.
    fn project(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let p = self.power(x)?;
        Ok(if p > 0.0 { x * real((self.budget() / p).sqrt()) } else { x.clone() })
    }
}

/// `Σ_k Y W_k M W_k^H Y`, the matrix `Z` in `∇_F f = −A F Z`.
fn weighted_sandwich(
    op: &WeightingOperator,
    y: &ComplexMatrix,
    middle: Option<&ComplexMatrix>,
) -> ComplexMatrix {
    let n = y.nrows();
    let mut z = ComplexMatrix::zeros(n, n);
    for w in op.weights() {
        let yw = y * w;
        z += match middle {
            Some(m) => &yw * m * yw.adjoint(),
            None => &yw * yw.adjoint(),
        };
    }
    z
}

/// Point-to-point precoder search over `Tr(FF^H) = P`.
pub struct PrecoderProblem<'a> {
    model: &'a SystemModel,
    op: &'a WeightingOperator,
    objective: Objective,
    gram: HermitianMatrix,
}

impl<'a> PrecoderProblem<'a> {
    pub fn new(model: &'a SystemModel, op: &'a WeightingOperator, objective: Objective) -> Result<Self> {
        Ok(Self { model, op, objective, gram: model.whitened_gram()? })
    }

    fn gradient_at(&self, f: &ComplexMatrix) -> Result<ComplexMatrix> {
        let a = self.gram.as_matrix();
        let n = f.ncols();
        let x = HermitianMatrix::from_hermitian_part(&(f.adjoint() * a * f + ComplexMatrix::identity(n, n)))?;
        let y = hermitian_inverse(&x)?;
        let z = match self.objective {
            Objective::Trace => weighted_sandwich(self.op, y.as_matrix(), None),
            Objective::LogDet => {
                let psi = self.op.apply(&y)?;
                let psi_inv = hermitian_inverse(&psi)?;
                weighted_sandwich(self.op, y.as_matrix(), Some(psi_inv.as_matrix()))
            }
        };
        Ok(-(a * f * z))
    }
}

impl SearchProblem for PrecoderProblem<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.model.n_tx(), self.model.n_streams())
    }

    fn budget(&self) -> f64 {
        self.model.power()
    }

    fn power(&self, x: &ComplexMatrix) -> Result<f64> {
        Ok(x.norm_squared())
    }

    fn objective(&self, x: &ComplexMatrix) -> Result<f64> {
        let psi = self.op.weighted_mse_of_precoder(self.model, &Precoder::new(x.clone())?)?;
        match self.objective {
            Objective::Trace => Ok(psi.trace()),
            Objective::LogDet => log_det_pd(&psi),
        }
    }

    fn gradient(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.gradient_at(x)
    }
}

/// Relay forwarding-matrix search over `Tr(Pm C Pm^H) = P`, minimizing
/// `Tr Ψ(Pm)` or `log|Ψ(Pm)|` evaluated with the direct relay formula.
pub struct RelayProblem<'a> {
    model: &'a RelayModel,
    mapping: RelayMapping,
    objective: Objective,
    input_cov: HermitianMatrix,
    input_cov_sqrt: ComplexMatrix,
}

impl<'a> RelayProblem<'a> {
    pub fn new(model: &'a RelayModel, objective: Objective) -> Result<Self> {
        let mapping = relay_to_weighted(model)?;
        let input_cov = model.relay_input_cov()?;
        let input_cov_sqrt = crate::spectral::hermitian_sqrt(&input_cov)?.into_matrix();
        Ok(Self { model, mapping, objective, input_cov, input_cov_sqrt })
    }
}

impl SearchProblem for RelayProblem<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.model.n_relay_tx(), self.model.n_relay_rx())
    }

    fn budget(&self) -> f64 {
        self.model.power()
    }

    fn power(&self, x: &ComplexMatrix) -> Result<f64> {
        relay_power(self.model, &ForwardingMatrix::new(x.clone())?)
    }

    fn objective(&self, x: &ComplexMatrix) -> Result<f64> {
        let psi = relay_weighted_mse(self.model, &ForwardingMatrix::new(x.clone())?)?;
        match self.objective {
            Objective::Trace => Ok(psi.trace()),
            Objective::LogDet => log_det_pd(&psi),
        }
    }

    /// Chain rule through `F = Pm C^{1/2}`: `∇_Pm = ∇_F C^{1/2}`.
    fn gradient(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let f = self.mapping.precoder(&ForwardingMatrix::new(x.clone())?)?;
        let inner = PrecoderProblem::new(&self.mapping.system, &self.mapping.operator, self.objective)?;
        Ok(inner.gradient_at(f.matrix())? * &self.input_cov_sqrt)
    }

    /// `∇_Pm · C^{-1}`, the gradient in the metric `<X, Y> = Re Tr(X C Y^H)`.
    fn descent_direction(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let g = self.gradient(x)?;
        Ok(hermitian_solve(&self.input_cov, &g.adjoint())?.adjoint())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSettings {
    /// Random feasible samples on the power boundary.
    pub budget: usize,
    /// Projected-gradient restarts.
    pub refinements: usize,
    pub max_iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { budget: 10_000, refinements: 100, max_iterations: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best objective over samples and refinements.
    pub best: f64,
    pub best_sample: f64,
    pub best_refined: f64,
    pub argmin: ComplexMatrix,
}

/// Projected gradient descent with step halving. The step is relative:
/// `x ← proj(x − s·||x||·D/||D||)` with `D` the descent direction, `s` doubles after a success (capped at 1)
/// and halves after a failure.
pub fn refine<P: SearchProblem + ?Sized>(
    problem: &P,
    start: &ComplexMatrix,
    max_iterations: usize,
) -> Result<(ComplexMatrix, f64)> {
    let mut x = problem.project(start)?;
    let mut fx = problem.objective(&x)?;
    let mut step = 0.25;
    for _ in 0..max_iterations {
        let g = problem.descent_direction(&x)?;
        let gn = g.norm();
        let xn = x.norm();
        if gn == 0.0 || xn == 0.0 {
            break;
        }
        let direction = g * real(xn / gn);
        loop {
            let candidate = problem.project(&(&x - &direction * real(step)))?;
            let fc = problem.objective(&candidate)?;
            if fc < fx {
                x = candidate;
                fx = fc;
                step = (step * 2.0).min(1.0);
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return Ok((x, fx));
            }
        }
    }
    Ok((x, fx))
}

/// Best objective found by `settings.budget` random feasible points (plus
/// any `extra_starts`) and `settings.refinements` projected-gradient runs:
/// one from the best sample, the rest from fresh random points.
pub fn random_search_oracle<P: SearchProblem + ?Sized>(
    problem: &P,
    settings: OracleSettings,
    seed: u64,
    extra_starts: &[ComplexMatrix],
) -> Result<OracleResult> {
    if settings.budget == 0 && extra_starts.is_empty() {
        return Err(Error::InvalidArgument("oracle budget must be >= 1".into()));
    }
    let (rows, cols) = problem.shape();
    let mut rng = Rng::new(seed);
    let mut best_sample = f64::INFINITY;
    let mut argmin = ComplexMatrix::zeros(rows, cols);
    let consider = |x: ComplexMatrix, best: &mut f64, arg: &mut ComplexMatrix| -> Result<()> {
        let f = problem.objective(&x)?;
        if f < *best {
            *best = f;
            *arg = x;
        }
        Ok(())
    };
    for start in extra_starts {
        consider(problem.project(start)?, &mut best_sample, &mut argmin)?;
    }
    for _ in 0..settings.budget {
        let x = problem.project(&rng.complex_matrix(rows, cols))?;
        consider(x, &mut best_sample, &mut argmin)?;
    }
    let mut best_refined = f64::INFINITY;
    let mut best_refined_arg = argmin.clone();
    for r in 0..settings.refinements {
        let start = if r == 0 { argmin.clone() } else { rng.complex_matrix(rows, cols) };
        let (x, f) = refine(problem, &start, settings.max_iterations)?;
        if f < best_refined {
            best_refined = f;
            best_refined_arg = x;
        }
    }
    let (best, argmin) = if best_refined < best_sample {
        (best_refined, best_refined_arg)
    } else {
        (best_sample, argmin)
    };
    Ok(OracleResult { best, best_sample, best_refined, argmin })
}

/// Minimum of `f` over `lo, lo + step, …, hi` (endpoint included).
pub fn grid_search_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n)
        .map(|i| (lo + i as f64 * step).min(hi))
        .map(|x| (x, f(x)))
        .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Classical sum-MSE water-filling (`W = I`, `Π = 0`) by active-set
/// reduction: with `L` active modes, `x_j = λ_j^{-1/2} ν − λ_j^{-1}` where
/// `ν = (P + Σ 1/λ_j) / Σ λ_j^{-1/2}`; drop the weakest mode while any
/// `x_j < 0`. Returns `Σ_j 1/(1 + λ_j x_j)` over `n_streams` streams.
pub fn textbook_sum_mse(lambda_h: &[f64], n_streams: usize, power: f64) -> f64 {
    let mut lambda: Vec<f64> = lambda_h.iter().copied().take(n_streams).collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    let max = lambda.first().copied().unwrap_or(0.0);
    let mut active = lambda.iter().filter(|&&l| l > 1e-12 * max && l > 0.0).count();
    while active > 0 {
        let nu = (power + lambda[..active].iter().map(|l| 1.0 / l).sum::<f64>())
            / lambda[..active].iter().map(|l| 1.0 / l.sqrt()).sum::<f64>();
        let x: Vec<f64> = lambda[..active].iter().map(|l| nu / l.sqrt() - 1.0 / l).collect();
        if x.iter().all(|&v| v >= 0.0) {
            let served: f64 = lambda[..active].iter().zip(&x).map(|(l, x)| 1.0 / (1.0 + l * x)).sum();
            return served + (n_streams - active) as f64;
        }
        active -= 1;
    }
    n_streams as f64
}

/// End-to-end LMMSE error covariance of `s` from
/// `y = H2 Pm H1 s + H2 Pm n1 + n2`, built from the stacked model
/// `y = B z`, `z = [s; n1; n2]`, `Σ_z = blkdiag(R_s, R_n1, R_n2)`:
/// `E = R_s − Σ_sy Σ_yy^{-1} Σ_ys`.
pub fn stacked_lmmse_error(model: &RelayModel, pm: &ForwardingMatrix) -> Result<HermitianMatrix> {
    let (ns, nr, nd) = (model.n_source(), model.n_relay_rx(), model.n_dest());
    let total = ns + nr + nd;
    let h2p = model.h2() * pm.matrix();
    let mut b = ComplexMatrix::zeros(nd, total);
    b.view_mut((0, 0), (nd, ns)).copy_from(&(&h2p * model.h1()));
    b.view_mut((0, ns), (nd, nr)).copy_from(&h2p);
    b.view_mut((0, ns + nr), (nd, nd)).copy_from(&ComplexMatrix::identity(nd, nd));

    let mut sigma = ComplexMatrix::zeros(total, total);
    sigma.view_mut((0, 0), (ns, ns)).copy_from(model.source_cov().as_matrix());
    sigma.view_mut((ns, ns), (nr, nr)).copy_from(model.relay_noise_cov().as_matrix());
    sigma.view_mut((ns + nr, ns + nr), (nd, nd)).copy_from(model.dest_noise_cov().as_matrix());

    let mut select = ComplexMatrix::zeros(ns, total);
    select.view_mut((0, 0), (ns, ns)).copy_from(&ComplexMatrix::identity(ns, ns));

    let cov_yy = &b * &sigma * b.adjoint();
    let cov_sy = &select * &sigma * b.adjoint();
    let solved = cov_yy
        .clone()
        .lu()
        .solve(&cov_sy.adjoint())
        .ok_or_else(|| Error::Numerical("singular observation covariance".into()))?;
    HermitianMatrix::from_hermitian_part(&(model.source_cov().as_matrix() - &cov_sy * solved))
}

/// Relay capacity via `log|R_s| − log|E|` with `E` from
/// [`stacked_lmmse_error`]; independent of the mapping.
pub fn stacked_capacity(model: &RelayModel, pm: &ForwardingMatrix) -> Result<f64> {
    Ok(log_det_pd(model.source_cov())? - log_det_pd(&stacked_lmmse_error(model, pm)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{design_det_min, design_trace_min, PiRegularization};
    use crate::harness::instance::{generate_relay, generate_system, Dims};
    use crate::spectral::rel_frobenius_diff;

    fn fd_directional(problem: &dyn SearchProblem, x: &ComplexMatrix, d: &ComplexMatrix) -> f64 {
        let h = 1e-6;
        let xp = x + d * real(h);
        let xm = x - d * real(h);
        (problem.objective(&xp).unwrap() - problem.objective(&xm).unwrap()) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(21);
        let inst = generate_system(&mut rng, Dims::new(3, 2, 2, 3), 1.3).unwrap();
        let relay = generate_relay(&mut rng, Dims::new(2, 3, 2, 2), 1.3).unwrap();
        for objective in [Objective::Trace, Objective::LogDet] {
            let pp = PrecoderProblem::new(&inst.model, &inst.operator, objective).unwrap();
            let rp = RelayProblem::new(&relay, objective).unwrap();
            for problem in [&pp as &dyn SearchProblem, &rp] {
                let (r, c) = problem.shape();
                let x = rng.complex_matrix(r, c);
                let d = rng.complex_matrix(r, c);
                let g = problem.gradient(&x).unwrap();
                // df = 2 Re Tr(G^H dX)
                let analytic = 2.0 * (g.adjoint() * &d).trace().re;
                let numeric = fd_directional(problem, &x, &d);
                assert!(
                    (analytic - numeric).abs() < 1e-6 * (1.0 + numeric.abs()),
                    "{analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn forced_start_gives_zero_gap() {
        let mut rng = Rng::new(4);
        let inst = generate_system(&mut rng, Dims::new(2, 2, 2, 2), 1.0).unwrap();
        let d = design_trace_min(&inst.model, &inst.operator).unwrap();
        let problem = PrecoderProblem::new(&inst.model, &inst.operator, Objective::Trace).unwrap();
        let settings = OracleSettings { budget: 0, refinements: 0, max_iterations: 0 };
        let res = random_search_oracle(&problem, settings, 0, &[d.precoder.matrix().clone()]).unwrap();
        assert!((res.best - d.objective_value).abs() < 1e-12);
    }

    #[test]
    fn scalar_oracle_matches_closed_form() {
        let model = SystemModel::new(
            ComplexMatrix::from_element(1, 1, real(0.8)),
            HermitianMatrix::identity(1),
            1,
            2.0,
        )
        .unwrap();
        let op = WeightingOperator::new(vec![ComplexMatrix::from_element(1, 1, real(1.5))], HermitianMatrix::identity(1)).unwrap();
        for objective in [Objective::Trace, Objective::LogDet] {
            let problem = PrecoderProblem::new(&model, &op, objective).unwrap();
            let settings = OracleSettings { budget: 50, refinements: 2, max_iterations: 50 };
            let res = random_search_oracle(&problem, settings, 1, &[]).unwrap();
            let closed = match objective {
                Objective::Trace => design_trace_min(&model, &op).unwrap().objective_value,
                Objective::LogDet => design_det_min(&model, &op, PiRegularization::Strict).unwrap().objective_value,
            };
            // Every point on the power boundary of a scalar problem is optimal up to phase.
            assert!((res.best - closed).abs() < 1e-6);
            let grid = grid_search_1d(
                |p2| {
                    let f = Precoder::new(ComplexMatrix::from_element(1, 1, real(p2.sqrt()))).unwrap();
                    crate::design::evaluate(objective, &op, &model, &f).unwrap()
                },
                0.0,
                2.0,
                1e-4,
            );
            assert!((grid.1 - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn relay_refinement_reaches_the_structured_optimum() {
        use crate::relay::{design_relay_capacity, design_relay_sum_mse};
        let mut rng = Rng::new(17);
        let relay = generate_relay(&mut rng, Dims::new(2, 2, 2, 2), 1.0).unwrap();
        let settings = OracleSettings { budget: 100, refinements: 3, max_iterations: 500 };
        let mse = RelayProblem::new(&relay, Objective::Trace).unwrap();
        let best = random_search_oracle(&mse, settings, 2, &[]).unwrap().best;
        assert!((best - design_relay_sum_mse(&relay).unwrap().objective).abs() < 1e-9);
        let cap = RelayProblem::new(&relay, Objective::LogDet).unwrap();
        let best = random_search_oracle(&cap, settings, 2, &[]).unwrap().best;
        let capacity = design_relay_capacity(&relay, PiRegularization::Strict).unwrap().objective;
        assert!((log_det_pd(relay.source_cov()).unwrap() - best - capacity).abs() < 1e-9);
    }

    #[test]
    fn grid_includes_both_endpoints() {
        let (x, v) = grid_search_1d(|x| -x, 0.0, 0.73456, 1e-4);
        assert_eq!(x, 0.73456);
        assert_eq!(v, -0.73456);
        assert_eq!(grid_search_1d(|x| x, 0.1, 0.5, 0.3).0, 0.1);
    }

    #[test]
    fn textbook_waterfill_basic() {
        // symmetric: two unit modes, P = 2 → each x = 1, MSE 1/2 each
        assert!((textbook_sum_mse(&[1.0, 1.0], 2, 2.0) - 1.0).abs() < 1e-14);
        // very weak second mode stays off
        let v = textbook_sum_mse(&[10.0, 1e-3], 2, 0.1);
        assert!((v - (1.0 / (1.0 + 10.0 * 0.1) + 1.0)).abs() < 1e-12);
        assert_eq!(textbook_sum_mse(&[0.0, 0.0], 2, 1.0), 2.0);
    }

    #[test]
    fn stacked_oracle_matches_direct_formula() {
        let mut rng = Rng::new(8);
        let relay = generate_relay(&mut rng, Dims::new(2, 3, 2, 3), 1.0).unwrap();
        let pm = ForwardingMatrix::new(rng.complex_matrix(2, 2)).unwrap();
        let a = stacked_lmmse_error(&relay, &pm).unwrap();
        let b = relay_weighted_mse(&relay, &pm).unwrap();
        assert!(rel_frobenius_diff(a.as_matrix(), b.as_matrix()) < 1e-9);
    }
}
