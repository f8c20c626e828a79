//! Executes an [`ExperimentConfig`].
//!
//! Trial `i` draws everything from `Rng::stream(seed, i)` and trials run in
//! parallel, so results do not depend on scheduling.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::design::{design, evaluate, kkt_residuals, Objective, PiRegularization, PrecoderDesign, WaterFilling};
use crate::design::{inequ1_lower_bound, inequ2_lower_bound};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, Mode, Tolerances};
use crate::harness::instance::{commuting_psd_pair, generate_relay, generate_system, random_pd, random_psd, SystemInstance};
use crate::harness::oracle::{random_search_oracle, stacked_lmmse_error, OracleSettings, PrecoderProblem, RelayProblem};
use crate::harness::report::{ExperimentReport, TrialRecord};
use crate::harness::rng::Rng;
use crate::model::{mse_lmmse, scale_to_power, Precoder, SystemModel};
use crate::relay::{
    design_relay_capacity, design_relay_sum_mse, relay_capacity, relay_power, relay_to_weighted, relay_weighted_mse,
    RelayModel,
};
use crate::spectral::{log_det_pd, rel_frobenius_diff, ComplexMatrix};
use crate::weighting::WeightingOperator;

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;
    let records = per_trial.into_iter().flatten().collect();
    Ok(ExperimentReport::assemble(config.clone(), records, start.elapsed().as_secs_f64()))
}

fn run_trial(config: &ExperimentConfig, index: usize) -> Result<Vec<TrialRecord>> {
    let mut rng = Rng::stream(config.seed, index as u64);
    match config.mode {
        Mode::DesignTrace => {
            let inst = system_instance(config, &mut rng)?;
            Ok(vec![design_trial(config, index, &inst, Objective::Trace, &mut rng)?])
        }
        Mode::DesignDet => {
            let inst = system_instance(config, &mut rng)?;
            Ok(vec![design_trial(config, index, &inst, Objective::LogDet, &mut rng)?])
        }
        Mode::OracleCompare => {
            let inst = system_instance(config, &mut rng)?;
            let trace = design_trial(config, index, &inst, Objective::Trace, &mut rng)?;
            let det = design_trial(config, index, &inst, Objective::LogDet, &mut rng)?;
            Ok(vec![trace, det])
        }
        Mode::RelayMse => {
            let model = relay_instance(config, &mut rng)?;
            Ok(vec![relay_trial(config, index, &model, Objective::Trace, &mut rng)?])
        }
        Mode::RelayCapacity => {
            let model = relay_instance(config, &mut rng)?;
            Ok(vec![relay_trial(config, index, &model, Objective::LogDet, &mut rng)?])
        }
        Mode::VerifyInequalities => inequality_trial(config, index, &mut rng),
        Mode::VerifyEquivalence => {
            let model = relay_instance(config, &mut rng)?;
            Ok(vec![equivalence_trial(config, index, &model, &mut rng)?])
        }
        Mode::DemoSchur => Ok(vec![schur_demo_trial(config, index, &mut rng)?]),
    }
}

fn system_instance(config: &ExperimentConfig, rng: &mut Rng) -> Result<SystemInstance> {
    match &config.instance {
        Some(spec) => spec.to_system(config.power),
        None => generate_system(rng, config.dims, config.power),
    }
}

fn relay_instance(config: &ExperimentConfig, rng: &mut Rng) -> Result<RelayModel> {
    match &config.instance {
        Some(spec) => spec.to_relay(config.power),
        None => generate_relay(rng, config.dims, config.power),
    }
}

fn regularization(config: &ExperimentConfig) -> PiRegularization {
    if config.jitter_pi {
        PiRegularization::Jitter
    } else {
        PiRegularization::Strict
    }
}

fn oracle_settings(config: &ExperimentConfig) -> OracleSettings {
    OracleSettings {
        budget: config.budget,
        refinements: config.refinements,
        max_iterations: config.max_iterations,
    }
}

fn label(objective: Objective) -> &'static str {
    match objective {
        Objective::Trace => "trace",
        Objective::LogDet => "log-det",
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Power, scalar-form consistency and KKT checks shared by every design.
fn design_checks(r: &mut TrialRecord, d: &PrecoderDesign, budget: f64, tol: &Tolerances) {
    let used = d.power_used();
    let active = d.gains.iter().any(|&g| g > 0.0);
    let within = used <= budget * (1.0 + tol.power);
    let tight = !active || (used - budget).abs() <= tol.power * budget;
    r.check("power", within && tight);

    let consistency = relative(d.objective_value, d.scalar_objective);
    r.metric("consistency_discrepancy", consistency);
    r.check("scalar_consistency", consistency <= tol.consistency);

    let n = d.gains.len();
    let wf = WaterFilling { powers: d.powers(), multiplier: d.multiplier };
    let kkt = kkt_residuals(d.objective, &d.lambda_weight[..n], &d.lambda_h, &wf)
        .into_iter()
        .fold(0.0f64, f64::max);
    r.metric("kkt_max", kkt);
    r.check("kkt", kkt <= tol.kkt);
    r.metric("multiplier", d.multiplier);
    r.metric("pi_jitter", d.pi_jitter);
}

fn design_trial(
    config: &ExperimentConfig,
    index: usize,
    inst: &SystemInstance,
    objective: Objective,
    rng: &mut Rng,
) -> Result<TrialRecord> {
    let d = design(objective, &inst.model, &inst.operator, regularization(config))?;
    let mut r = TrialRecord::new(index, label(objective));
    r.objective_structured = Some(d.objective_value);
    r.power_used = Some(d.power_used());
    design_checks(&mut r, &d, inst.model.power(), &config.tolerances);
    let oracle_seed = rng.next_u64();
    if config.budget > 0 {
        // The design's own operator: identical to the input unless Π was jittered.
        let problem = PrecoderProblem::new(&inst.model, &d.operator, objective)?;
        let best = random_search_oracle(&problem, oracle_settings(config), oracle_seed, &[])?.best;
        let gap = best - d.objective_value;
        r.objective_oracle_best = Some(best);
        r.gap = Some(gap);
        r.check("oracle_gap", gap >= -config.tolerances.gap);
    }
    Ok(r)
}

fn relay_trial(
    config: &ExperimentConfig,
    index: usize,
    model: &RelayModel,
    objective: Objective,
    rng: &mut Rng,
) -> Result<TrialRecord> {
    let tol = &config.tolerances;
    let relay = match objective {
        Objective::Trace => design_relay_sum_mse(model)?,
        Objective::LogDet => design_relay_capacity(model, regularization(config))?,
    };
    let mut r = TrialRecord::new(index, if objective == Objective::Trace { "sum-mse" } else { "capacity" });
    r.objective_structured = Some(relay.objective);
    let used = relay_power(model, &relay.forwarding)?;
    r.power_used = Some(used);
    design_checks(&mut r, &relay.design, model.power(), tol);
    r.metric("power_mapping_discrepancy", (used - relay.design.power_used()).abs() / model.power());
    r.check("power_mapping", (used - relay.design.power_used()).abs() <= tol.equivalence * model.power());

    let log_det_rs = log_det_pd(model.source_cov())?;
    let mapped = match objective {
        Objective::Trace => relay.design.objective_value,
        Objective::LogDet => {
            let cap = relay_capacity(model, &relay.forwarding)?;
            r.metric("capacity_discrepancy", cap.discrepancy());
            r.check("capacity_routes", cap.discrepancy() <= tol.equivalence);
            log_det_rs - relay.design.objective_value
        }
    };
    // Under Π jitter the mapped objective is that of the perturbed problem.
    if relay.design.pi_jitter == 0.0 {
        let d = relative(mapped, relay.objective);
        r.metric("objective_route_discrepancy", d);
        r.check("objective_routes", d <= tol.equivalence);
    }

    let oracle_seed = rng.next_u64();
    if config.budget > 0 {
        let problem = RelayProblem::new(model, objective)?;
        let best = random_search_oracle(&problem, oracle_settings(config), oracle_seed, &[])?.best;
        let (oracle, gap) = match objective {
            Objective::Trace => (best, best - relay.objective),
            Objective::LogDet => (log_det_rs - best, relay.objective - (log_det_rs - best)),
        };
        r.objective_oracle_best = Some(oracle);
        r.gap = Some(gap);
        r.check("oracle_gap", gap >= -tol.gap);
    }
    Ok(r)
}

/// One random PSD pair with random ranks plus one commuting pair per
/// inequality arranged for equality.
fn inequality_trial(config: &ExperimentConfig, index: usize, rng: &mut Rng) -> Result<Vec<TrialRecord>> {
    let n = config.dims.n_tx;
    let tol = config.tolerances.inequality;
    let mut rank = || 1 + (rng.next_u64() % n as u64) as usize;
    let (ra, rb) = (rank(), rank());
    let a = random_psd(rng, n, ra);
    let b = random_psd(rng, n, rb);

    let mut random = TrialRecord::new(index, "random-pair");
    let i1 = inequ1_lower_bound(&a, &b)?;
    let i2 = inequ2_lower_bound(&a, &b)?;
    random.check("inequ1_bound", i1.holds);
    random.check("inequ2_bound", i2.holds);
    random.metric("inequ1_slack", i1.value - i1.bound);
    random.metric("inequ2_slack", i2.value - i2.bound);

    let mut aligned = TrialRecord::new(index, "aligned-pair");
    let (a1, b1) = commuting_psd_pair(rng, n, true);
    let e1 = inequ1_lower_bound(&a1, &b1)?;
    let d1 = (e1.value - e1.bound).abs() / e1.value.abs().max(e1.bound.abs()).max(f64::MIN_POSITIVE);
    aligned.metric("inequ1_equality_discrepancy", d1);
    aligned.check("inequ1_equality", e1.holds && d1 <= tol);
    let (a2, b2) = commuting_psd_pair(rng, n, false);
    let e2 = inequ2_lower_bound(&a2, &b2)?;
    let d2 = (e2.value - e2.bound).abs() / e2.value.abs().max(e2.bound.abs()).max(f64::MIN_POSITIVE);
    aligned.metric("inequ2_equality_discrepancy", d2);
    aligned.check("inequ2_equality", e2.holds && d2 <= tol);
    Ok(vec![random, aligned])
}

/// A random precoder at full power is pushed through every route that
/// should give the same relay quantities.
fn equivalence_trial(config: &ExperimentConfig, index: usize, model: &RelayModel, rng: &mut Rng) -> Result<TrialRecord> {
    let tol = config.tolerances.equivalence;
    let mapping = relay_to_weighted(model)?;
    let f = Precoder::new(scale_to_power(
        &rng.complex_matrix(model.n_relay_tx(), model.n_relay_rx()),
        model.power(),
    ))?;
    let pm = mapping.forwarding(&f)?;
    let mut r = TrialRecord::new(index, "relay-routes");
    r.power_used = Some(f.power());

    let direct = relay_weighted_mse(model, &pm)?;
    let mapped = mapping.operator.weighted_mse_of_precoder(&mapping.system, &f)?;
    let stacked = stacked_lmmse_error(model, &pm)?;
    let psi = rel_frobenius_diff(direct.as_matrix(), mapped.as_matrix());
    let stack = rel_frobenius_diff(stacked.as_matrix(), direct.as_matrix());
    let cap = relay_capacity(model, &pm)?;
    let power = (f.power() - relay_power(model, &pm)?).abs() / f.power().max(f64::MIN_POSITIVE);

    for (name, value) in [
        ("psi_route_discrepancy", psi),
        ("stacked_lmmse_discrepancy", stack),
        ("capacity_discrepancy", cap.discrepancy()),
        ("power_bijection_discrepancy", power),
    ] {
        r.metric(name, value);
        r.check(name.trim_end_matches("_discrepancy"), value <= tol);
    }
    r.objective_structured = Some(direct.trace());
    Ok(r)
}

/// `N × N` unitary DFT matrix.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |i, j| Complex64::from_polar(scale, -2.0 * PI * (i * j) as f64 / n as f64))
}

/// Trace design with `W = U_DFT · diag(√λ_w)` and `λ_w` within 1% of each
/// other: reports how evenly the per-stream MSEs come out. No assertion.
fn schur_demo_trial(config: &ExperimentConfig, index: usize, rng: &mut Rng) -> Result<TrialRecord> {
    let dims = config.dims;
    let n = dims.n_dat;
    let lambda_w: Vec<f64> = (0..n).map(|_| 1.0 + 0.01 * rng.uniform()).collect();
    let mut w = ComplexMatrix::zeros(n, dims.m);
    let dft = dft_matrix(n);
    for j in 0..n.min(dims.m) {
        w.set_column(j, &(dft.column(j) * Complex64::new(lambda_w[j].sqrt(), 0.0)));
    }
    let h = rng.complex_matrix(dims.n_rx, dims.n_tx);
    let model = SystemModel::new(h, random_pd(rng, dims.n_rx), n, config.power)?;
    let op = WeightingOperator::new(vec![w], random_pd(rng, dims.m))?;
    let d = design(Objective::Trace, &model, &op, PiRegularization::Strict)?;
    let phi = mse_lmmse(&model, &d.precoder)?;
    let diag: Vec<f64> = (0..n).map(|i| phi.as_matrix()[(i, i)].re).collect();
    let max = diag.iter().copied().fold(f64::MIN, f64::max);
    let min = diag.iter().copied().fold(f64::MAX, f64::min);
    let mean = diag.iter().sum::<f64>() / n as f64;
    let lw_max = lambda_w.iter().copied().fold(f64::MIN, f64::max);
    let lw_min = lambda_w.iter().copied().fold(f64::MAX, f64::min);

    let mut r = TrialRecord::new(index, "informational");
    r.objective_structured = Some(d.objective_value);
    r.power_used = Some(d.power_used());
    r.metric("weight_spread", (lw_max - lw_min) / lw_min);
    r.metric("mse_diagonal_spread", (max - min) / mean);
    r.metric("mse_diagonal_mean", mean);
    r.metric("trace_objective_check", evaluate(Objective::Trace, &op, &model, &d.precoder)?);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mode: Mode) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(mode);
        c.seed = 3;
        c.trials = 4;
        c.budget = c.budget.min(200);
        c.refinements = 3;
        c.max_iterations = 100;
        c
    }

    #[test]
    fn every_mode_passes_on_a_small_run() {
        for mode in Mode::ALL {
            let mut c = quick(mode);
            if matches!(mode, Mode::DesignTrace | Mode::DesignDet | Mode::RelayMse | Mode::RelayCapacity) {
                c.budget = 200;
            }
            let report = run(&c).unwrap();
            assert!(report.passed, "{mode}:\n{}", report.text_table());
            assert!(!report.trials.is_empty());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let c = quick(Mode::OracleCompare);
        let a = run(&c).unwrap().without_timing();
        let b = run(&c).unwrap().without_timing();
        assert_eq!(a, b);
    }

    #[test]
    fn trial_results_do_not_depend_on_trial_count() {
        let mut c = quick(Mode::VerifyEquivalence);
        let few = run(&c).unwrap();
        c.trials = 8;
        let many = run(&c).unwrap();
        assert_eq!(few.trials[..], many.trials[..few.trials.len()]);
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_matrix(3);
        assert!((f.adjoint() * &f - ComplexMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn demo_spreads_are_small() {
        let report = run(&quick(Mode::DemoSchur)).unwrap();
        for t in &report.trials {
            assert!(t.metrics["weight_spread"] <= 0.01 + 1e-12);
            assert!(t.metrics["mse_diagonal_spread"] < 1e-9);
        }
    }
}
