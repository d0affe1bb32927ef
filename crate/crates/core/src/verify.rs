//! Residual verifiers for the pathwise integral identities, the
//! stochastic transport theorem, the expectation-derivative formula and
//! the continuity system.
//!
//! Each pathwise verifier assembles the left side t -> integral over the
//! advected simplex and the right side from ds-integrals (trapezoid) and
//! discrete stochastic integrals on the same grid, then reports the
//! residual over the whole grid. Ensemble checks fan out over paths with
//! per-path derived seeds and reduce in a fixed order.

use rayon::prelude::*;

use crate::brownian::{derive_seed, sample_brownian, BrownianPath};
use crate::error::{Error, Result};
use crate::flow::{FlowEnsemble, SdeSystem};
use crate::forms::{
    divergence, lie_derivative, lie_derivative_squared, scalar_times_field, Point, ScalarField,
    TimeForm, VolumeForm,
};
use crate::quadrature::{frame_states, integrate_form, integrate_pulled_form, QuadratureRule, Simplex};
use crate::stochastic::{
    ito_integral, quadratic_covariation, stratonovich_integral, time_integral, RealPath,
};

/// One named right-hand-side term evaluated at the horizon.
#[derive(Clone, Debug)]
pub struct TermValue {
    pub name: String,
    pub value: f64,
}

/// Residual of one pathwise identity over the full grid.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub identity: String,
    pub horizon: f64,
    pub steps: usize,
    pub max_abs_residual: f64,
    pub terminal_residual: f64,
    pub terms: Vec<TermValue>,
    pub residuals: RealPath,
}

impl ResidualReport {
    fn from_paths(
        identity: &str,
        lhs: &RealPath,
        rhs: Vec<f64>,
        terms: Vec<TermValue>,
    ) -> ResidualReport {
        let residual_values: Vec<f64> = lhs
            .values()
            .iter()
            .zip(&rhs)
            .map(|(l, r)| l - r)
            .collect();
        let max_abs = residual_values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let terminal = *residual_values.last().unwrap();
        ResidualReport {
            identity: identity.to_string(),
            horizon: *lhs.times().last().unwrap(),
            steps: lhs.steps(),
            max_abs_residual: max_abs,
            terminal_residual: terminal,
            terms,
            residuals: RealPath::new(lhs.times().to_vec(), residual_values).unwrap(),
        }
    }
}

/// The path j -> integral of the pulled-back form over the simplex at
/// grid index j.
pub fn integrand_path(
    form: &TimeForm,
    simplex: &Simplex,
    ensemble: &FlowEnsemble,
    rule: &QuadratureRule,
) -> Result<RealPath> {
    let steps = ensemble.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let t = ensemble.time(j);
        let states = frame_states(ensemble, j);
        values.push(integrate_pulled_form(form, t, simplex, &states, rule)?);
        times.push(t);
    }
    RealPath::new(times, values)
}

fn integrand_value_at(
    form: &TimeForm,
    simplex: &Simplex,
    ensemble: &FlowEnsemble,
    rule: &QuadratureRule,
    j: usize,
) -> Result<f64> {
    let states = frame_states(ensemble, j);
    integrate_pulled_form(form, ensemble.time(j), simplex, &states, rule)
}

fn check_identity_inputs(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
) -> Result<()> {
    if theta.degree() != simplex.degree() {
        return Err(Error::argument(
            "form degree must match the simplex dimension",
        ));
    }
    if theta.dim() != system.dim() || simplex.ambient_dim() != system.dim() {
        return Err(Error::argument("system/form/simplex dimension mismatch"));
    }
    if rule.degree() != simplex.degree() {
        return Err(Error::argument("rule degree must match the simplex"));
    }
    if path.drivers() != system.drivers() {
        return Err(Error::argument("driver count mismatch"));
    }
    Ok(())
}

fn advect(
    system: &SdeSystem,
    simplex: &Simplex,
    rule: &QuadratureRule,
    path: &BrownianPath,
) -> Result<FlowEnsemble> {
    let nodes = simplex.quadrature_nodes(rule)?;
    FlowEnsemble::integrate(system, &nodes, path)
}

/// Pathwise identity in Stratonovich shape: the advected-integral path
/// against the initial value plus the ds-term of the explicit time
/// derivative, the ds-term of the drift Lie derivative, and one
/// Stratonovich integral per driver.
pub fn verify_ito_identity_stratonovich(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
) -> Result<ResidualReport> {
    check_identity_inputs(theta, system, simplex, path, rule)?;
    let ensemble = advect(system, simplex, rule, path)?;
    let lhs = integrand_path(theta, simplex, &ensemble, rule)?;
    let baseline = lhs.value(0);

    let dt_path = time_integral(&integrand_path(
        &theta.time_derivative(),
        simplex,
        &ensemble,
        rule,
    )?);
    let drift_lie = lie_derivative(system.drift(), theta)?;
    let drift_path = time_integral(&integrand_path(&drift_lie, simplex, &ensemble, rule)?);

    let mut noise_paths = Vec::new();
    for (k, field) in system.diffusions().iter().enumerate() {
        let lk = lie_derivative(field, theta)?;
        let yk = integrand_path(&lk, simplex, &ensemble, rule)?;
        let b = RealPath::driver(path, k);
        noise_paths.push(stratonovich_integral(&yk, &b)?);
    }

    let steps = lhs.steps();
    let mut rhs = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let mut v = baseline + dt_path.value(j) + drift_path.value(j);
        for np in &noise_paths {
            v += np.value(j);
        }
        rhs.push(v);
    }

    let mut terms = vec![
        TermValue {
            name: "initial".into(),
            value: baseline,
        },
        TermValue {
            name: "ds_time_derivative".into(),
            value: dt_path.terminal(),
        },
        TermValue {
            name: "ds_lie_drift".into(),
            value: drift_path.terminal(),
        },
    ];
    for (k, np) in noise_paths.iter().enumerate() {
        terms.push(TermValue {
            name: format!("stratonovich_lie_driver_{}", k + 1),
            value: np.terminal(),
        });
    }
    Ok(ResidualReport::from_paths(
        "ito_form_identity_stratonovich",
        &lhs,
        rhs,
        terms,
    ))
}

/// Pathwise identity in Ito shape: left-point stochastic terms plus a
/// ds-term whose integrand is the explicit time derivative plus the drift
/// Lie derivative plus half the summed squared Lie derivatives.
pub fn verify_ito_identity_ito(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
) -> Result<ResidualReport> {
    check_identity_inputs(theta, system, simplex, path, rule)?;
    let ensemble = advect(system, simplex, rule, path)?;
    let lhs = integrand_path(theta, simplex, &ensemble, rule)?;
    let baseline = lhs.value(0);

    let mut ds_form = theta
        .time_derivative()
        .add(&lie_derivative(system.drift(), theta)?)?;
    for field in system.diffusions() {
        ds_form = ds_form.add(&lie_derivative_squared(field, theta)?.scale(0.5))?;
    }
    let ds_path = time_integral(&integrand_path(&ds_form, simplex, &ensemble, rule)?);

    let mut noise_paths = Vec::new();
    for (k, field) in system.diffusions().iter().enumerate() {
        let lk = lie_derivative(field, theta)?;
        let yk = integrand_path(&lk, simplex, &ensemble, rule)?;
        let b = RealPath::driver(path, k);
        noise_paths.push(ito_integral(&yk, &b)?);
    }

    let steps = lhs.steps();
    let mut rhs = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let mut v = baseline + ds_path.value(j);
        for np in &noise_paths {
            v += np.value(j);
        }
        rhs.push(v);
    }

    let mut terms = vec![
        TermValue {
            name: "initial".into(),
            value: baseline,
        },
        TermValue {
            name: "ds_generator".into(),
            value: ds_path.terminal(),
        },
    ];
    for (k, np) in noise_paths.iter().enumerate() {
        terms.push(TermValue {
            name: format!("ito_lie_driver_{}", k + 1),
            value: np.terminal(),
        });
    }
    Ok(ResidualReport::from_paths(
        "ito_form_identity_ito",
        &lhs,
        rhs,
        terms,
    ))
}

/// The two shapes of the identity agree per path up to discretization;
/// returns the largest gap between their right-hand sides over the grid.
pub fn identity_shapes_rhs_gap(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
) -> Result<f64> {
    let strat = verify_ito_identity_stratonovich(theta, system, simplex, path, rule)?;
    let ito = verify_ito_identity_ito(theta, system, simplex, path, rule)?;
    // both residuals subtract the same left side, so the RHS gap is the
    // residual gap
    let gap = strat
        .residuals
        .values()
        .iter()
        .zip(ito.residuals.values())
        .fold(0.0f64, |a, (s, i)| a.max((s - i).abs()));
    Ok(gap)
}

/// Ensemble sizes and seeding for the statistical checks.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleParams {
    pub n_paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub master_seed: u64,
    /// Bridge-refinement passes applied to every member path.
    pub refine_levels: u32,
}

impl EnsembleParams {
    /// Member path i of the ensemble, refined to the requested level.
    fn member_path(&self, drivers: usize, index: usize) -> Result<BrownianPath> {
        let mut path = sample_brownian(
            drivers,
            self.horizon,
            self.steps,
            derive_seed(self.master_seed, index as u64),
        )?;
        for _ in 0..self.refine_levels {
            path = crate::brownian::refine_brownian(&path);
        }
        Ok(path)
    }

    /// Step count of the refined grid.
    fn effective_steps(&self) -> usize {
        self.steps << self.refine_levels
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::InsufficientEnsemble {
                got: self.n_paths,
                need: 100,
            });
        }
        if self.steps < 4 || self.steps % 4 != 0 {
            return Err(Error::argument(
                "steps must be a positive multiple of 4 for quarter checkpoints",
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::argument("horizon must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MartingaleCheckpoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// |mean - baseline| in units of the standard error (0 when the mean
    /// matches exactly).
    pub deviation_se: f64,
}

#[derive(Clone, Debug)]
pub struct MartingaleReport {
    pub baseline: f64,
    pub n_paths: usize,
    pub checkpoints: Vec<MartingaleCheckpoint>,
}

/// Ensemble mean of the advected integral at the quarter checkpoints,
/// compared against the initial integral. Under the backward equation
/// d(theta)/dt = -(L_drift + 1/2 sum L^2) theta the advected integral is
/// a martingale, so the mean must sit on the baseline.
pub fn martingale_check(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    rule: &QuadratureRule,
    params: &EnsembleParams,
) -> Result<MartingaleReport> {
    params.validate()?;
    let baseline = integrate_form(theta, 0.0, simplex, rule)?;
    let steps = params.effective_steps();
    let checkpoints = [steps / 4, steps / 2, steps];

    let samples: Vec<[f64; 3]> = (0..params.n_paths)
        .into_par_iter()
        .map(|i| -> Result<[f64; 3]> {
            let path = params.member_path(system.drivers(), i)?;
            let ensemble = advect(system, simplex, rule, &path)?;
            let mut out = [0.0; 3];
            for (slot, &j) in checkpoints.iter().enumerate() {
                out[slot] = integrand_value_at(theta, simplex, &ensemble, rule, j)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = params.n_paths as f64;
    let mut report = Vec::with_capacity(3);
    for (slot, &j) in checkpoints.iter().enumerate() {
        let t = params.horizon * (j as f64 / steps as f64);
        let mean = samples.iter().map(|s| s[slot]).sum::<f64>() / n;
        let var = samples
            .iter()
            .map(|s| (s[slot] - mean) * (s[slot] - mean))
            .sum::<f64>()
            / (n - 1.0);
        let se = (var / n).sqrt();
        let diff = mean - baseline;
        let deviation_se = if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            diff.abs() / se
        };
        report.push(MartingaleCheckpoint {
            t,
            mean,
            std_error: se,
            deviation_se,
        });
    }
    Ok(MartingaleReport {
        baseline,
        n_paths: params.n_paths,
        checkpoints: report,
    })
}

/// The top-degree form div_mu(f X) mu used by the transport identity.
pub fn divergence_density_form(
    mu: &VolumeForm,
    f: &ScalarField,
    field: &crate::forms::TimeVectorField,
) -> TimeForm {
    let n = mu.dim();
    let fx = scalar_times_field(f, field);
    let mu_inner = mu.clone();
    TimeForm::new(n, n, move |t, x, _| {
        match divergence(&mu_inner, &fx, t, x) {
            Ok(d) => d * mu_inner.coefficient(t, x),
            Err(_) => f64::NAN,
        }
    })
    .expect("top-degree form")
}

/// Stochastic transport residual: d integral f_t mu over the advected
/// top-degree simplex against the ds-term of df/dt and one divergence
/// term per field.
pub fn transport_residual(
    f: &ScalarField,
    mu: &VolumeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
) -> Result<ResidualReport> {
    let n = system.dim();
    if simplex.degree() != n {
        return Err(Error::argument("transport needs a top-degree simplex"));
    }
    if mu.dim() != n || f.dim() != n {
        return Err(Error::argument("density/volume dimension mismatch"));
    }
    let lhs_form = mu.density_form(f);
    check_identity_inputs(&lhs_form, system, simplex, path, rule)?;
    let ensemble = advect(system, simplex, rule, path)?;
    let lhs = integrand_path(&lhs_form, simplex, &ensemble, rule)?;
    let baseline = lhs.value(0);

    let dt_form = mu.density_form(&f.time_derivative());
    let dt_path = time_integral(&integrand_path(&dt_form, simplex, &ensemble, rule)?);

    let drift_form = divergence_density_form(mu, f, system.drift());
    let drift_path = time_integral(&integrand_path(&drift_form, simplex, &ensemble, rule)?);

    let mut noise_paths = Vec::new();
    for (k, field) in system.diffusions().iter().enumerate() {
        let form_k = divergence_density_form(mu, f, field);
        let yk = integrand_path(&form_k, simplex, &ensemble, rule)?;
        let b = RealPath::driver(path, k);
        noise_paths.push(stratonovich_integral(&yk, &b)?);
    }

    let steps = lhs.steps();
    let mut rhs = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        let mut v = baseline + dt_path.value(j) + drift_path.value(j);
        for np in &noise_paths {
            v += np.value(j);
        }
        rhs.push(v);
    }

    let mut terms = vec![
        TermValue {
            name: "initial".into(),
            value: baseline,
        },
        TermValue {
            name: "ds_time_derivative".into(),
            value: dt_path.terminal(),
        },
        TermValue {
            name: "ds_div_drift".into(),
            value: drift_path.terminal(),
        },
    ];
    for (k, np) in noise_paths.iter().enumerate() {
        terms.push(TermValue {
            name: format!("stratonovich_div_driver_{}", k + 1),
            value: np.terminal(),
        });
    }
    Ok(ResidualReport::from_paths(
        "stochastic_transport",
        &lhs,
        rhs,
        terms,
    ))
}

#[derive(Clone, Debug)]
pub struct ExpectationCheckpoint {
    pub t: f64,
    /// Windowed central difference of the ensemble-mean advected integral.
    pub lhs_derivative: f64,
    /// Ensemble mean of the generator-side integral at the checkpoint.
    pub rhs_mean: f64,
    pub diff_mean: f64,
    pub diff_std_error: f64,
    pub deviation_se: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug)]
pub struct ExpectationReport {
    pub n_paths: usize,
    pub checkpoints: Vec<ExpectationCheckpoint>,
}

/// Time derivative of the expected advected mass against the expectation
/// of the generator-side integrand
///
///   df/dt + div_mu(f X^0) + 1/2 sum_k div_mu(div_mu(f X^k) X^k),
///
/// which reduces to df/dt + X^0(f) + 1/2 sum_k X^k(X^k(f)) when every
/// field is divergence free. Checkpoints sit at T/4, T/2, 3T/4 so the
/// centered window stays inside the grid.
pub fn expectation_derivative_check(
    f: &ScalarField,
    mu: &VolumeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    rule: &QuadratureRule,
    params: &EnsembleParams,
    window: usize,
) -> Result<ExpectationReport> {
    let n = system.dim();
    if simplex.degree() != n || mu.dim() != n || f.dim() != n {
        return Err(Error::argument(
            "expectation check needs top-degree data of one dimension",
        ));
    }
    if params.n_paths < 100 {
        return Err(Error::InsufficientEnsemble {
            got: params.n_paths,
            need: 100,
        });
    }
    if params.steps < 4 || params.steps % 4 != 0 {
        return Err(Error::argument("steps must be a multiple of 4"));
    }
    let steps = params.effective_steps();
    if window == 0 || window > steps / 4 {
        return Err(Error::argument(
            "window must be positive and at most steps/4",
        ));
    }

    // generator-side integrand as a scalar field
    let df_dt = f.time_derivative();
    let drift_div = {
        let fx0 = scalar_times_field(f, system.drift());
        let mu_c = mu.clone();
        ScalarField::new(n, move |t, x| {
            divergence(&mu_c, &fx0, t, x).unwrap_or(f64::NAN)
        })
    };
    let mut noise_terms: Vec<ScalarField> = Vec::new();
    for field in system.diffusions() {
        let inner = {
            let fxk = scalar_times_field(f, field);
            let mu_c = mu.clone();
            ScalarField::new(n, move |t, x| {
                divergence(&mu_c, &fxk, t, x).unwrap_or(f64::NAN)
            })
        };
        let outer_field = scalar_times_field(&inner, field);
        let mu_c = mu.clone();
        noise_terms.push(ScalarField::new(n, move |t, x| {
            divergence(&mu_c, &outer_field, t, x).unwrap_or(f64::NAN)
        }));
    }
    let generator = {
        let terms = noise_terms;
        ScalarField::new(n, move |t, x| {
            let mut total = df_dt.value(t, x) + drift_div.value(t, x);
            for term in &terms {
                total += 0.5 * term.value(t, x);
            }
            total
        })
    };
    let lhs_form = mu.density_form(f);
    let rhs_form = mu.density_form(&generator);

    let checkpoints = [steps / 4, steps / 2, 3 * steps / 4];

    struct PathSample {
        derivative: [f64; 3],
        rhs: [f64; 3],
    }

    let samples: Vec<PathSample> = (0..params.n_paths)
        .into_par_iter()
        .map(|i| -> Result<PathSample> {
            let path = params.member_path(system.drivers(), i)?;
            let ensemble = advect(system, simplex, rule, &path)?;
            let mut derivative = [0.0; 3];
            let mut rhs = [0.0; 3];
            for (slot, &j) in checkpoints.iter().enumerate() {
                let lo = j - window;
                let hi = j + window;
                let v_lo = integrand_value_at(&lhs_form, simplex, &ensemble, rule, lo)?;
                let v_hi = integrand_value_at(&lhs_form, simplex, &ensemble, rule, hi)?;
                derivative[slot] = (v_hi - v_lo) / (ensemble.time(hi) - ensemble.time(lo));
                rhs[slot] = integrand_value_at(&rhs_form, simplex, &ensemble, rule, j)?;
            }
            Ok(PathSample { derivative, rhs })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_f = params.n_paths as f64;
    let mut out = Vec::with_capacity(3);
    for (slot, &j) in checkpoints.iter().enumerate() {
        let mean_d = samples.iter().map(|s| s.derivative[slot]).sum::<f64>() / n_f;
        let mean_r = samples.iter().map(|s| s.rhs[slot]).sum::<f64>() / n_f;
        let diffs: Vec<f64> = samples
            .iter()
            .map(|s| s.derivative[slot] - s.rhs[slot])
            .collect();
        let mean_diff = diffs.iter().sum::<f64>() / n_f;
        let var = diffs
            .iter()
            .map(|d| (d - mean_diff) * (d - mean_diff))
            .sum::<f64>()
            / (n_f - 1.0).max(1.0);
        let se = (var / n_f).sqrt();
        let deviation_se = if mean_diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            mean_diff.abs() / se
        };
        let relative_error = (mean_d - mean_r).abs() / mean_r.abs().max(f64::MIN_POSITIVE);
        out.push(ExpectationCheckpoint {
            t: params.horizon * (j as f64 / steps as f64),
            lhs_derivative: mean_d,
            rhs_mean: mean_r,
            diff_mean: mean_diff,
            diff_std_error: se,
            deviation_se,
            relative_error,
        });
    }
    Ok(ExpectationReport {
        n_paths: params.n_paths,
        checkpoints: out,
    })
}

/// Pointwise residuals of the continuity system over a space-time grid:
/// max |d(rho)/dt + div_mu(rho X^0)| and, per driver, max |div_mu(rho X^k)|.
#[derive(Clone, Debug)]
pub struct ContinuityReport {
    pub drift_residual: f64,
    pub noise_residuals: Vec<f64>,
}

impl ContinuityReport {
    pub fn max_residual(&self) -> f64 {
        self.noise_residuals
            .iter()
            .fold(self.drift_residual, |a, &v| a.max(v))
    }
}

pub fn continuity_residual(
    rho: &ScalarField,
    system: &SdeSystem,
    mu: &VolumeForm,
    grid: &[Point],
    times: &[f64],
) -> Result<ContinuityReport> {
    let n = system.dim();
    if rho.dim() != n || mu.dim() != n {
        return Err(Error::argument("density/system dimension mismatch"));
    }
    let drho_dt = rho.time_derivative();
    let rho_drift = scalar_times_field(rho, system.drift());
    let mut drift_residual = 0.0f64;
    let mut noise_residuals = vec![0.0f64; system.drivers()];
    let rho_noise: Vec<_> = system
        .diffusions()
        .iter()
        .map(|x| scalar_times_field(rho, x))
        .collect();
    for point in grid {
        let x = point.coords();
        if x.len() != n {
            return Err(Error::argument("grid point dimension mismatch"));
        }
        for &t in times {
            let r0 = drho_dt.value(t, x) + divergence(mu, &rho_drift, t, x)?;
            drift_residual = drift_residual.max(r0.abs());
            for (k, field) in rho_noise.iter().enumerate() {
                let rk = divergence(mu, field, t, x)?;
                noise_residuals[k] = noise_residuals[k].max(rk.abs());
            }
        }
    }
    Ok(ContinuityReport {
        drift_residual,
        noise_residuals,
    })
}

/// Largest gap over the grid between "integrate the node paths, then sum
/// with quadrature weights" and "sum with quadrature weights, then
/// integrate", for one driver column. Both sides are finite sums, so the
/// gap sits at rounding level.
pub fn fubini_commutation_gap(
    theta: &TimeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
    driver: usize,
) -> Result<f64> {
    check_identity_inputs(theta, system, simplex, path, rule)?;
    if driver >= path.drivers() {
        return Err(Error::argument("driver index out of range"));
    }
    let ensemble = advect(system, simplex, rule, path)?;
    let b = RealPath::driver(path, driver);
    let edges = simplex.edges();
    let edge_refs: Vec<&[f64]> = edges.iter().map(|e| e.as_slice()).collect();

    // per-node pullback value paths
    let steps = ensemble.steps();
    let mut node_integrals = Vec::with_capacity(rule.len());
    for q in 0..rule.len() {
        let tr = ensemble.node(q);
        let mut values = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            values.push(crate::forms::pullback_value(
                tr.position(j),
                tr.jacobian(j),
                theta,
                tr.time(j),
                &edge_refs,
            )?);
        }
        let y = RealPath::new(tr.times().to_vec(), values)?;
        node_integrals.push(stratonovich_integral(&y, &b)?);
    }
    // weighted sum of per-node integrals
    let mut weighted: Vec<f64> = vec![0.0; steps + 1];
    for (q, w) in rule.weights().iter().enumerate() {
        for j in 0..=steps {
            weighted[j] += w * node_integrals[q].value(j);
        }
    }
    // integral of the weighted path
    let lhs_path = integrand_path(theta, simplex, &ensemble, rule)?;
    let swapped = stratonovich_integral(&lhs_path, &b)?;
    let gap = weighted
        .iter()
        .zip(swapped.values())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok(gap)
}

/// Covariation-based extraction of a noise coefficient: quadratic
/// covariation of the advected-mass path against one driver, which tends
/// to zero under refinement when the matching field is divergence free
/// and the density is constant.
pub fn mass_covariation_with_driver(
    f: &ScalarField,
    mu: &VolumeForm,
    system: &SdeSystem,
    simplex: &Simplex,
    path: &BrownianPath,
    rule: &QuadratureRule,
    driver: usize,
) -> Result<f64> {
    let lhs_form = mu.density_form(f);
    check_identity_inputs(&lhs_form, system, simplex, path, rule)?;
    let ensemble = advect(system, simplex, rule, path)?;
    let lhs = integrand_path(&lhs_form, simplex, &ensemble, rule)?;
    let b = RealPath::driver(path, driver);
    Ok(quadratic_covariation(&lhs, &b)?.terminal())
}
