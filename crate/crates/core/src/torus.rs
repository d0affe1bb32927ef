//! The flat 2-torus application: Fourier vector fields, divergence-free
//! checks and the density constancy experiment.
//!
//! Fields are evaluated on unwrapped angle coordinates (they are
//! 2pi-periodic anyway), so flow Jacobians stay smooth; angles are
//! canonicalized only when a caller asks for chart coordinates.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::forms::{divergence, Point, ScalarField, TimeVectorField, VolumeForm};

/// A nonzero integer frequency pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierMode {
    k1: i64,
    k2: i64,
}

impl FourierMode {
    pub fn new(k1: i64, k2: i64) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            return Err(Error::argument("the zero mode is not allowed"));
        }
        Ok(FourierMode { k1, k2 })
    }

    pub fn k(&self) -> (i64, i64) {
        (self.k1, self.k2)
    }

    fn phase(&self, x: &[f64]) -> f64 {
        self.k1 as f64 * x[0] + self.k2 as f64 * x[1]
    }
}

/// A_k = k2 cos(k . theta) d1 - k1 cos(k . theta) d2, divergence free.
pub fn fourier_field_a(mode: FourierMode) -> TimeVectorField {
    let (k1, k2) = (mode.k1 as f64, mode.k2 as f64);
    let m = mode;
    TimeVectorField::new(2, move |_, x, out| {
        let c = m.phase(x).cos();
        out[0] = k2 * c;
        out[1] = -k1 * c;
    })
    .with_jacobian(move |_, x, out| {
        let s = m.phase(x).sin();
        out[0] = -k2 * k1 * s;
        out[1] = -k2 * k2 * s;
        out[2] = k1 * k1 * s;
        out[3] = k1 * k2 * s;
    })
}

/// B_k = k2 sin(k . theta) d1 - k1 sin(k . theta) d2, divergence free.
pub fn fourier_field_b(mode: FourierMode) -> TimeVectorField {
    let (k1, k2) = (mode.k1 as f64, mode.k2 as f64);
    let m = mode;
    TimeVectorField::new(2, move |_, x, out| {
        let s = m.phase(x).sin();
        out[0] = k2 * s;
        out[1] = -k1 * s;
    })
    .with_jacobian(move |_, x, out| {
        let c = m.phase(x).cos();
        out[0] = k2 * k1 * c;
        out[1] = k2 * k2 * c;
        out[2] = -k1 * k1 * c;
        out[3] = -k1 * k2 * c;
    })
}

/// Wrap angles into [0, 2pi).
pub fn canonicalize_angles(x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| a.rem_euclid(TAU)).collect()
}

/// A uniform size x size grid of torus points in [0, 2pi)^2.
pub fn angle_grid(size: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let a = TAU * i as f64 / size as f64;
            let b = TAU * j as f64 / size as f64;
            out.push(Point::new(vec![a, b]).expect("finite angles"));
        }
    }
    out
}

/// Largest |div(X)| over a grid, with the coordinate volume.
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    pub max_abs: f64,
}

pub fn check_divergence_free(
    field: &TimeVectorField,
    grid: &[Point],
) -> Result<DivergenceReport> {
    let mu = VolumeForm::standard(field.dim());
    let mut max_abs = 0.0f64;
    for p in grid {
        let d = divergence(&mu, field, 0.0, p.coords())?;
        max_abs = max_abs.max(d.abs());
    }
    Ok(DivergenceReport { max_abs })
}

/// What the constancy experiment concluded about a density.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstancyOutcome {
    /// Gradient vanishes on the grid; the density equals its value at the
    /// origin for all time, with the reported maximal deviation.
    Certified { max_deviation: f64 },
    /// A mode constraint is violated; the named constraint attains the
    /// reported maximum.
    Rejected {
        constraint: String,
        max_violation: f64,
    },
    /// Both mode constraints hold on the grid yet the gradient does not
    /// vanish: the mode only pins the density along the direction
    /// (k2, -k1), so constancy cannot be certified from this mode alone.
    DirectionallyConstantOnly { gradient_max: f64 },
}

#[derive(Clone, Debug)]
pub struct ConstancyReport {
    pub outcome: ConstancyOutcome,
    /// min over the grid of cos^2 + sin^2 of the mode phase; the two
    /// constraint multipliers never vanish together.
    pub pythagorean_min: f64,
    pub constraint_a_max: f64,
    pub constraint_b_max: f64,
    pub gradient_max: f64,
}

const CONSTRAINT_TOL: f64 = 1e-8;

/// The density constancy experiment for one mode.
///
/// Checks the two constraints <grad rho, A_k> and <grad rho, B_k> on the
/// grid, certifies rho_t(theta) = rho_0(0, 0) when the gradient vanishes
/// (evaluating the time integral of u(rho), which is then identically
/// zero), and otherwise reports the largest violated constraint.
pub fn density_constancy_experiment(
    mode: FourierMode,
    rho0: &ScalarField,
    u: &TimeVectorField,
    grid: &[Point],
    horizon: f64,
    steps: usize,
) -> Result<ConstancyReport> {
    if rho0.dim() != 2 || u.dim() != 2 {
        return Err(Error::argument("the torus experiment is two-dimensional"));
    }
    if grid.is_empty() || steps == 0 || !(horizon > 0.0) {
        return Err(Error::argument("need a grid, steps >= 1 and a positive horizon"));
    }
    let div_u = check_divergence_free(u, grid)?;
    if div_u.max_abs > CONSTRAINT_TOL {
        return Err(Error::Precondition(format!(
            "u must be divergence free (max |div u| = {})",
            div_u.max_abs
        )));
    }

    let a_field = fourier_field_a(mode);
    let b_field = fourier_field_b(mode);
    let mut pythagorean_min = f64::INFINITY;
    let mut a_max = 0.0f64;
    let mut b_max = 0.0f64;
    let mut grad_max = 0.0f64;
    let mut grad = [0.0; 2];
    let mut av = [0.0; 2];
    let mut bv = [0.0; 2];
    for p in grid {
        let x = p.coords();
        let phase = mode.phase(x);
        let pyth = phase.cos().powi(2) + phase.sin().powi(2);
        pythagorean_min = pythagorean_min.min(pyth);
        rho0.gradient_into(0.0, x, &mut grad);
        a_field.value_into(0.0, x, &mut av);
        b_field.value_into(0.0, x, &mut bv);
        a_max = a_max.max((grad[0] * av[0] + grad[1] * av[1]).abs());
        b_max = b_max.max((grad[0] * bv[0] + grad[1] * bv[1]).abs());
        grad_max = grad_max.max(grad[0].abs()).max(grad[1].abs());
    }

    let outcome = if a_max > CONSTRAINT_TOL || b_max > CONSTRAINT_TOL {
        let (constraint, max_violation) = if a_max >= b_max {
            ("grad_dot_A".to_string(), a_max)
        } else {
            ("grad_dot_B".to_string(), b_max)
        };
        ConstancyOutcome::Rejected {
            constraint,
            max_violation,
        }
    } else if grad_max > CONSTRAINT_TOL {
        ConstancyOutcome::DirectionallyConstantOnly {
            gradient_max: grad_max,
        }
    } else {
        // grad rho = 0 on the grid: rho_t = rho_0 + int u(rho) ds with
        // u(rho) = <u, grad rho> identically zero; evaluate the integral
        // anyway and track the deviation from rho_0 at the origin.
        let origin = [0.0, 0.0];
        let reference = rho0.value(0.0, &origin);
        let u_rho = rho0.directional(u);
        let dt = horizon / steps as f64;
        let mut max_deviation = 0.0f64;
        for p in grid {
            let x = p.coords();
            let mut transported = rho0.value(0.0, x);
            let mut prev = u_rho.value(0.0, x);
            max_deviation = max_deviation.max((transported - reference).abs());
            for j in 0..steps {
                let t1 = horizon * ((j + 1) as f64 / steps as f64);
                let next = u_rho.value(t1, x);
                transported += 0.5 * (prev + next) * dt;
                prev = next;
                max_deviation = max_deviation.max((transported - reference).abs());
            }
        }
        ConstancyOutcome::Certified { max_deviation }
    };

    Ok(ConstancyReport {
        outcome,
        pythagorean_min,
        constraint_a_max: a_max,
        constraint_b_max: b_max,
        gradient_max: grad_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_values_from_the_definition() {
        // A_(0,1) at the origin: cos(0) = 1, components (k2, -k1) = (1, 0)
        let a = fourier_field_a(FourierMode::new(0, 1).unwrap());
        assert_eq!(a.value(0.0, &[0.0, 0.0]), vec![1.0, 0.0]);
        // A_(1,0) at (0, pi/2): phase 0, components (0, -1)
        let a10 = fourier_field_a(FourierMode::new(1, 0).unwrap());
        assert_eq!(a10.value(0.0, &[0.0, std::f64::consts::FRAC_PI_2]), vec![0.0, -1.0]);
        // B_(0,1) at (0, pi/2): sin(pi/2) = 1, components (1, 0)
        let b = fourier_field_b(FourierMode::new(0, 1).unwrap());
        assert_eq!(b.value(0.0, &[0.0, std::f64::consts::FRAC_PI_2]), vec![1.0, 0.0]);
        // B vanishes where the phase vanishes
        let b21 = fourier_field_b(FourierMode::new(2, 1).unwrap());
        assert_eq!(b21.value(0.0, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_mode_is_rejected() {
        assert!(FourierMode::new(0, 0).is_err());
    }

    #[test]
    fn fields_are_periodic() {
        let a = fourier_field_a(FourierMode::new(3, -2).unwrap());
        let p = [0.7, 1.9];
        let shifted = [p[0] + TAU, p[1]];
        let v1 = a.value(0.0, &p);
        let v2 = a.value(0.0, &shifted);
        assert!((v1[0] - v2[0]).abs() < 1e-12);
        assert!((v1[1] - v2[1]).abs() < 1e-12);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for field in [
            fourier_field_a(FourierMode::new(3, 2).unwrap()),
            fourier_field_b(FourierMode::new(-1, 2).unwrap()),
        ] {
            let p = [0.9, -0.4];
            let jac = field.jacobian(0.0, &p);
            let h = 1e-6;
            for j in 0..2 {
                let mut pp = p;
                pp[j] += h;
                let mut pm = p;
                pm[j] -= h;
                let vp = field.value(0.0, &pp);
                let vm = field.value(0.0, &pm);
                for i in 0..2 {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((jac[i * 2 + j] - fd).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn fourier_fields_are_divergence_free_on_the_grid() {
        let grid = angle_grid(64);
        for k1 in -5..=5i64 {
            for k2 in -5..=5i64 {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let mode = FourierMode::new(k1, k2).unwrap();
                let a = check_divergence_free(&fourier_field_a(mode), &grid).unwrap();
                let b = check_divergence_free(&fourier_field_b(mode), &grid).unwrap();
                assert!(a.max_abs <= 1e-10, "A_({k1},{k2}): {}", a.max_abs);
                assert!(b.max_abs <= 1e-10, "B_({k1},{k2}): {}", b.max_abs);
            }
        }
    }

    #[test]
    fn compressible_control_field_is_flagged() {
        let field = TimeVectorField::new(2, |_, x, out| {
            out[0] = x[0].cos();
            out[1] = 0.0;
        })
        .with_jacobian(|_, x, out| {
            out.fill(0.0);
            out[0] = -x[0].sin();
        });
        let report = check_divergence_free(&field, &angle_grid(64)).unwrap();
        assert!(report.max_abs >= 0.9, "max |div| = {}", report.max_abs);
    }

    #[test]
    fn canonicalization_wraps_into_the_fundamental_cell() {
        let wrapped = canonicalize_angles(&[TAU + 0.25, -0.25]);
        assert!((wrapped[0] - 0.25).abs() < 1e-12);
        assert!((wrapped[1] - (TAU - 0.25)).abs() < 1e-12);
        assert!(wrapped.iter().all(|&a| (0.0..TAU).contains(&a)));
    }

    fn constant_density(c: f64) -> ScalarField {
        ScalarField::constant(2, c)
    }

    fn cos_theta1() -> ScalarField {
        ScalarField::new(2, |_, x| x[0].cos()).with_gradient(|_, x, out| {
            out[0] = -x[0].sin();
            out[1] = 0.0;
        })
    }

    fn cos_theta2() -> ScalarField {
        ScalarField::new(2, |_, x| x[1].cos()).with_gradient(|_, x, out| {
            out[0] = 0.0;
            out[1] = -x[1].sin();
        })
    }

    #[test]
    fn constant_density_is_certified_with_zero_deviation() {
        let grid = angle_grid(32);
        let u = fourier_field_a(FourierMode::new(1, 1).unwrap());
        let report = density_constancy_experiment(
            FourierMode::new(1, 0).unwrap(),
            &constant_density(7.0),
            &u,
            &grid,
            1.0,
            64,
        )
        .unwrap();
        assert_eq!(
            report.outcome,
            ConstancyOutcome::Certified { max_deviation: 0.0 }
        );
        assert!((report.pythagorean_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transverse_density_is_rejected_with_a_named_constraint() {
        let grid = angle_grid(32);
        let u = TimeVectorField::zero(2);
        let report = density_constancy_experiment(
            FourierMode::new(1, 0).unwrap(),
            &cos_theta2(),
            &u,
            &grid,
            1.0,
            16,
        )
        .unwrap();
        match report.outcome {
            ConstancyOutcome::Rejected {
                ref constraint,
                max_violation,
            } => {
                assert!(max_violation > 0.1, "violation {max_violation}");
                assert!(constraint == "grad_dot_A" || constraint == "grad_dot_B");
            }
            ref other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn along_mode_density_shows_the_single_mode_gap() {
        // rho = cos(theta_1) with k = (1, 0): A_k and B_k both point along
        // (0, -1), so <grad rho, A_k> = <grad rho, B_k> = 0 identically
        // even though grad rho does not vanish. The experiment must not
        // certify constancy here.
        let grid = angle_grid(32);
        let u = TimeVectorField::zero(2);
        let report = density_constancy_experiment(
            FourierMode::new(1, 0).unwrap(),
            &cos_theta1(),
            &u,
            &grid,
            1.0,
            16,
        )
        .unwrap();
        assert!(report.constraint_a_max <= 1e-12);
        assert!(report.constraint_b_max <= 1e-12);
        match report.outcome {
            ConstancyOutcome::DirectionallyConstantOnly { gradient_max } => {
                assert!(gradient_max > 0.9);
            }
            ref other => panic!("expected the directional-only outcome, got {other:?}"),
        }
    }

    #[test]
    fn oblique_mode_rejects_axis_densities() {
        let grid = angle_grid(32);
        let u = TimeVectorField::zero(2);
        for rho in [cos_theta1(), cos_theta2()] {
            let report = density_constancy_experiment(
                FourierMode::new(2, 3).unwrap(),
                &rho,
                &u,
                &grid,
                1.0,
                16,
            )
            .unwrap();
            assert!(matches!(report.outcome, ConstancyOutcome::Rejected { .. }));
        }
    }

    #[test]
    fn compressible_u_violates_the_precondition() {
        let grid = angle_grid(16);
        let u = TimeVectorField::new(2, |_, x, out| {
            out[0] = x[0].cos();
            out[1] = 0.0;
        })
        .with_jacobian(|_, x, out| {
            out.fill(0.0);
            out[0] = -x[0].sin();
        });
        assert!(matches!(
            density_constancy_experiment(
                FourierMode::new(1, 0).unwrap(),
                &constant_density(1.0),
                &u,
                &grid,
                1.0,
                16,
            ),
            Err(Error::Precondition(_))
        ));
    }
}
