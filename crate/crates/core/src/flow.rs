//! Stratonovich flow integration with tangent (Jacobian) propagation.
//!
//! The stepping scheme is Stratonovich-Heun: an Euler predictor followed
//! by a trapezoidal corrector, applied jointly to the drift increment dt
//! and the noise increments dB^k. The Jacobian rides the variational
//! equation dJ = DX^0 J dt + DX^k J o dB^k with the same increments and
//! the same predictor/corrector stages, so pathwise pullbacks stay smooth
//! in the quadrature-node index.

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::forms::TimeVectorField;
use crate::la;

/// Drift plus diffusion fields of a Stratonovich system.
#[derive(Clone)]
pub struct SdeSystem {
    drift: TimeVectorField,
    diffusions: Vec<TimeVectorField>,
}

impl SdeSystem {
    pub fn new(drift: TimeVectorField, diffusions: Vec<TimeVectorField>) -> Result<Self> {
        let n = drift.dim();
        if diffusions.iter().any(|d| d.dim() != n) {
            return Err(Error::argument("all fields must share one dimension"));
        }
        Ok(SdeSystem { drift, diffusions })
    }

    pub fn deterministic(drift: TimeVectorField) -> Self {
        SdeSystem {
            drift,
            diffusions: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Number of independent Brownian drivers.
    pub fn drivers(&self) -> usize {
        self.diffusions.len()
    }

    pub fn drift(&self) -> &TimeVectorField {
        &self.drift
    }

    pub fn diffusions(&self) -> &[TimeVectorField] {
        &self.diffusions
    }
}

/// One solution path: positions and Jacobians on the driving grid.
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    dim: usize,
    times: Vec<f64>,
    positions: Vec<f64>,
    jacobians: Vec<f64>,
}

impl FlowTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, j: usize) -> f64 {
        self.times[j]
    }

    pub fn position(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn jacobian(&self, j: usize) -> &[f64] {
        let nn = self.dim * self.dim;
        &self.jacobians[j * nn..(j + 1) * nn]
    }

    pub fn jacobian_det(&self, j: usize) -> f64 {
        la::det(self.jacobian(j), self.dim)
    }
}

struct StageBuffers {
    field_value: Vec<f64>,
    field_jac: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    x_pred: Vec<f64>,
    j_pred: Vec<f64>,
    tmp1: Vec<f64>,
    tmp2: Vec<f64>,
}

impl StageBuffers {
    fn new(n: usize) -> Self {
        StageBuffers {
            field_value: vec![0.0; n],
            field_jac: vec![0.0; n * n],
            f1: vec![0.0; n],
            f2: vec![0.0; n],
            a1: vec![0.0; n * n],
            a2: vec![0.0; n * n],
            x_pred: vec![0.0; n],
            j_pred: vec![0.0; n * n],
            tmp1: vec![0.0; n * n],
            tmp2: vec![0.0; n * n],
        }
    }
}

/// F(t,x) = X^0 dt + sum_k X^k dB^k and its spatial derivative, evaluated
/// into `f_out` / `a_out`.
fn stage_increment(
    system: &SdeSystem,
    t: f64,
    x: &[f64],
    dt: f64,
    db: &[f64],
    f_out: &mut [f64],
    a_out: &mut [f64],
    value_buf: &mut [f64],
    jac_buf: &mut [f64],
) {
    let n = system.dim();
    system.drift.value_into(t, x, value_buf);
    for i in 0..n {
        f_out[i] = value_buf[i] * dt;
    }
    system.drift.jacobian_into(t, x, jac_buf);
    for i in 0..n * n {
        a_out[i] = jac_buf[i] * dt;
    }
    for (k, field) in system.diffusions.iter().enumerate() {
        let w = db[k];
        field.value_into(t, x, value_buf);
        for i in 0..n {
            f_out[i] += value_buf[i] * w;
        }
        field.jacobian_into(t, x, jac_buf);
        for i in 0..n * n {
            a_out[i] += jac_buf[i] * w;
        }
    }
}

/// Integrate the flow from one initial point along one noise path.
pub fn integrate_flow(
    system: &SdeSystem,
    x0: &[f64],
    path: &BrownianPath,
) -> Result<FlowTrajectory> {
    let n = system.dim();
    if x0.len() != n {
        return Err(Error::argument("initial point dimension mismatch"));
    }
    if path.drivers() != system.drivers() {
        return Err(Error::argument(format!(
            "system has {} diffusion fields but the path carries {} drivers",
            system.drivers(),
            path.drivers()
        )));
    }
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("initial point".into()));
    }

    let steps = path.steps();
    let m = path.drivers();
    let times = path.times();
    let mut positions = vec![0.0; (steps + 1) * n];
    let mut jacobians = vec![0.0; (steps + 1) * n * n];
    positions[..n].copy_from_slice(x0);
    jacobians[..n * n].copy_from_slice(&la::identity(n));

    let mut buf = StageBuffers::new(n);
    let mut db = vec![0.0; m];
    let dt = path.dt();

    for j in 0..steps {
        let (t0, t1) = (times[j], times[j + 1]);
        for k in 0..m {
            db[k] = path.increment(j, k);
        }
        let (x, jac) = {
            let x = positions[j * n..(j + 1) * n].to_vec();
            let jac = jacobians[j * n * n..(j + 1) * n * n].to_vec();
            (x, jac)
        };
        stage_increment(
            system,
            t0,
            &x,
            dt,
            &db,
            &mut buf.f1,
            &mut buf.a1,
            &mut buf.field_value,
            &mut buf.field_jac,
        );
        for i in 0..n {
            buf.x_pred[i] = x[i] + buf.f1[i];
        }
        la::mat_mul(&buf.a1, &jac, &mut buf.tmp1, n);
        for i in 0..n * n {
            buf.j_pred[i] = jac[i] + buf.tmp1[i];
        }
        stage_increment(
            system,
            t1,
            &buf.x_pred,
            dt,
            &db,
            &mut buf.f2,
            &mut buf.a2,
            &mut buf.field_value,
            &mut buf.field_jac,
        );
        la::mat_mul(&buf.a2, &buf.j_pred, &mut buf.tmp2, n);

        let next_x = &mut positions[(j + 1) * n..(j + 2) * n];
        for i in 0..n {
            next_x[i] = x[i] + 0.5 * (buf.f1[i] + buf.f2[i]);
        }
        let next_j = &mut jacobians[(j + 1) * n * n..(j + 2) * n * n];
        for i in 0..n * n {
            next_j[i] = jac[i] + 0.5 * (buf.tmp1[i] + buf.tmp2[i]);
        }
        if next_x.iter().any(|c| !c.is_finite()) || next_j.iter().any(|c| !c.is_finite()) {
            return Err(Error::BlowUp {
                time: times[j],
                node: None,
            });
        }
    }

    Ok(FlowTrajectory {
        dim: n,
        times,
        positions,
        jacobians,
    })
}

/// Integrate one noise path from many initial points (e.g. quadrature
/// nodes). Trajectories keep the input order; blow-ups are tagged with
/// the offending node index.
pub fn integrate_ensemble(
    system: &SdeSystem,
    points: &[Vec<f64>],
    path: &BrownianPath,
) -> Result<Vec<FlowTrajectory>> {
    if points.is_empty() {
        return Err(Error::argument("ensemble needs at least one point"));
    }
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        match integrate_flow(system, p, path) {
            Ok(tr) => out.push(tr),
            Err(Error::BlowUp { time, .. }) => {
                return Err(Error::BlowUp {
                    time,
                    node: Some(i),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Per-node flow states along one noise path.
#[derive(Clone)]
pub struct FlowEnsemble {
    trajectories: Vec<FlowTrajectory>,
}

impl FlowEnsemble {
    pub fn new(trajectories: Vec<FlowTrajectory>) -> Self {
        FlowEnsemble { trajectories }
    }

    pub fn integrate(system: &SdeSystem, points: &[Vec<f64>], path: &BrownianPath) -> Result<Self> {
        Ok(FlowEnsemble::new(integrate_ensemble(system, points, path)?))
    }

    /// A static ensemble frozen at the initial points (the identity flow).
    pub fn identity(points: &[Vec<f64>], times: Vec<f64>) -> Self {
        let trajectories = points
            .iter()
            .map(|p| {
                let n = p.len();
                let steps = times.len() - 1;
                let mut positions = Vec::with_capacity((steps + 1) * n);
                let mut jacobians = Vec::with_capacity((steps + 1) * n * n);
                let eye = la::identity(n);
                for _ in 0..=steps {
                    positions.extend_from_slice(p);
                    jacobians.extend_from_slice(&eye);
                }
                FlowTrajectory {
                    dim: n,
                    times: times.clone(),
                    positions,
                    jacobians,
                }
            })
            .collect();
        FlowEnsemble { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.trajectories[0].steps()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.trajectories[0].time(j)
    }

    pub fn trajectories(&self) -> &[FlowTrajectory] {
        &self.trajectories
    }

    pub fn node(&self, q: usize) -> &FlowTrajectory {
        &self.trajectories[q]
    }
}
