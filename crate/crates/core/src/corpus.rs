//! Named constructors for the experiment corpus.
//!
//! Fields, forms and densities used by the experiments are resolvable
//! from plain strings like `torus.A(0,1)` or `rho.const(7)`, so runner
//! configurations stay pure data.

use crate::error::{Error, Result};
use crate::forms::{ScalarField, TimeForm, TimeVectorField};
use crate::la::MAX_DIM;
use crate::torus::{fourier_field_a, fourier_field_b, FourierMode};

/// One registry row for listings.
#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub signature: &'static str,
    pub summary: &'static str,
}

pub fn field_entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry { name: "zero", signature: "zero(n)", summary: "zero field on R^n" },
        CorpusEntry { name: "r1.linear", signature: "r1.linear", summary: "x d/dx on R (flow e^t x)" },
        CorpusEntry { name: "r1.const", signature: "r1.const(c)", summary: "constant field c d/dx on R" },
        CorpusEntry { name: "r1.square", signature: "r1.square", summary: "x^2 d/dx on R (finite-time blow-up)" },
        CorpusEntry { name: "torus.A", signature: "torus.A(k1,k2)", summary: "k2 cos(k.theta) d1 - k1 cos(k.theta) d2" },
        CorpusEntry { name: "torus.B", signature: "torus.B(k1,k2)", summary: "k2 sin(k.theta) d1 - k1 sin(k.theta) d2" },
        CorpusEntry { name: "torus.const", signature: "torus.const(c1,c2)", summary: "constant field on the torus" },
        CorpusEntry { name: "torus.cos1", signature: "torus.cos1", summary: "cos(theta1) d1, compressible control" },
    ]
}

pub fn form_entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry { name: "form.dx1", signature: "form.dx1(n)", summary: "the covector dx^1 on R^n" },
        CorpusEntry { name: "form.volume", signature: "form.volume(n)", summary: "coordinate volume form on R^n" },
        CorpusEntry { name: "form.x1_dx1", signature: "form.x1_dx1", summary: "x dx on R" },
        CorpusEntry { name: "form.sin_d1", signature: "form.sin_d1", summary: "sin(theta1) dtheta1 on the torus" },
        CorpusEntry { name: "form.heat_sine", signature: "form.heat_sine(c)", summary: "e^{c^2 t/2} sin(x) dx, martingale family for noise c d/dx" },
    ]
}

pub fn density_entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry { name: "rho.one", signature: "rho.one(n)", summary: "constant density 1 on R^n" },
        CorpusEntry { name: "rho.const", signature: "rho.const(c)", summary: "constant density c on the torus" },
        CorpusEntry { name: "rho.cos1", signature: "rho.cos1", summary: "cos(theta1) on the torus" },
        CorpusEntry { name: "rho.cos2", signature: "rho.cos2", summary: "cos(theta2) on the torus" },
        CorpusEntry { name: "rho.sin12", signature: "rho.sin12", summary: "sin(theta1 + theta2) on the torus" },
        CorpusEntry { name: "rho.exp_decay", signature: "rho.exp_decay", summary: "e^{-t} on R, solves the continuity drift equation for r1.linear" },
    ]
}

/// Split `name(a,b,...)` into the name and its numeric arguments.
pub fn parse_spec(spec: &str) -> Result<(String, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        if spec.is_empty() {
            return Err(Error::argument("empty corpus spec"));
        }
        return Ok((spec.to_string(), Vec::new()));
    };
    if !spec.ends_with(')') {
        return Err(Error::argument(format!("malformed corpus spec `{spec}`")));
    }
    let name = spec[..open].trim().to_string();
    let inner = &spec[open + 1..spec.len() - 1];
    let mut args = Vec::new();
    if !inner.trim().is_empty() {
        for part in inner.split(',') {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|_| Error::argument(format!("bad numeric argument in `{spec}`")))?;
            args.push(v);
        }
    }
    Ok((name, args))
}

fn expect_args(spec: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::argument(format!(
            "`{spec}` expects {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

fn as_dim(spec: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > MAX_DIM as f64 {
        return Err(Error::argument(format!(
            "`{spec}` needs an integer dimension in 1..={MAX_DIM}"
        )));
    }
    Ok(v as usize)
}

fn as_int(spec: &str, v: f64) -> Result<i64> {
    if v.fract() != 0.0 || v.abs() > 1e6 {
        return Err(Error::argument(format!("`{spec}` needs integer mode entries")));
    }
    Ok(v as i64)
}

/// Resolve a vector field by name.
pub fn field(spec: &str) -> Result<TimeVectorField> {
    let (name, args) = parse_spec(spec)?;
    match name.as_str() {
        "zero" => {
            expect_args(spec, &args, 1)?;
            Ok(TimeVectorField::zero(as_dim(spec, args[0])?))
        }
        "r1.linear" => {
            expect_args(spec, &args, 0)?;
            Ok(TimeVectorField::new(1, |_, x, out| out[0] = x[0])
                .with_jacobian(|_, _, out| out[0] = 1.0))
        }
        "r1.const" => {
            expect_args(spec, &args, 1)?;
            Ok(TimeVectorField::constant(vec![args[0]]))
        }
        "r1.square" => {
            expect_args(spec, &args, 0)?;
            Ok(TimeVectorField::new(1, |_, x, out| out[0] = x[0] * x[0])
                .with_jacobian(|_, x, out| out[0] = 2.0 * x[0]))
        }
        "torus.A" => {
            expect_args(spec, &args, 2)?;
            let mode = FourierMode::new(as_int(spec, args[0])?, as_int(spec, args[1])?)?;
            Ok(fourier_field_a(mode))
        }
        "torus.B" => {
            expect_args(spec, &args, 2)?;
            let mode = FourierMode::new(as_int(spec, args[0])?, as_int(spec, args[1])?)?;
            Ok(fourier_field_b(mode))
        }
        "torus.const" => {
            expect_args(spec, &args, 2)?;
            Ok(TimeVectorField::constant(vec![args[0], args[1]]))
        }
        "torus.cos1" => {
            expect_args(spec, &args, 0)?;
            Ok(TimeVectorField::new(2, |_, x, out| {
                out[0] = x[0].cos();
                out[1] = 0.0;
            })
            .with_jacobian(|_, x, out| {
                out.fill(0.0);
                out[0] = -x[0].sin();
            }))
        }
        _ => Err(Error::UnknownName(spec.to_string())),
    }
}

/// Resolve a time-dependent form by name.
pub fn form(spec: &str) -> Result<TimeForm> {
    let (name, args) = parse_spec(spec)?;
    match name.as_str() {
        "form.dx1" => {
            expect_args(spec, &args, 1)?;
            let n = as_dim(spec, args[0])?;
            let mut table = vec![0.0; n];
            table[0] = 1.0;
            TimeForm::constant(n, 1, table)
        }
        "form.volume" => {
            expect_args(spec, &args, 1)?;
            let n = as_dim(spec, args[0])?;
            TimeForm::constant(n, n, vec![1.0])
        }
        "form.x1_dx1" => {
            expect_args(spec, &args, 0)?;
            Ok(TimeForm::new(1, 1, |_, x, _| x[0])?
                .with_coefficient_gradient(|_, _, _, out| out[0] = 1.0))
        }
        "form.sin_d1" => {
            expect_args(spec, &args, 0)?;
            Ok(TimeForm::new(2, 1, |_, x, idx| {
                if idx[0] == 0 {
                    x[0].sin()
                } else {
                    0.0
                }
            })?
            .with_coefficient_gradient(|_, x, idx, out| {
                out.fill(0.0);
                if idx[0] == 0 {
                    out[0] = x[0].cos();
                }
            }))
        }
        "form.heat_sine" => {
            expect_args(spec, &args, 1)?;
            heat_sine(args[0])
        }
        _ => Err(Error::UnknownName(spec.to_string())),
    }
}

/// The family theta_t = e^{c^2 t / 2} sin(x) dx together with its exact
/// time derivative; it solves the backward equation
/// d(theta)/dt = -(1/2) L^2 theta for the constant noise field c d/dx,
/// so the advected integral is a martingale.
fn heat_sine(c: f64) -> Result<TimeForm> {
    let rate = 0.5 * c * c;
    let dt = TimeForm::new(1, 1, move |t, x, _| rate * (rate * t).exp() * x[0].sin())?
        .with_coefficient_gradient(move |t, x, _, out| {
            out[0] = rate * (rate * t).exp() * x[0].cos()
        });
    Ok(
        TimeForm::new(1, 1, move |t, x, _| (rate * t).exp() * x[0].sin())?
            .with_coefficient_gradient(move |t, x, _, out| {
                out[0] = (rate * t).exp() * x[0].cos()
            })
            .with_time_derivative(dt),
    )
}

/// Resolve a scalar density by name.
pub fn density(spec: &str) -> Result<ScalarField> {
    let (name, args) = parse_spec(spec)?;
    match name.as_str() {
        "rho.one" => {
            expect_args(spec, &args, 1)?;
            Ok(ScalarField::constant(as_dim(spec, args[0])?, 1.0))
        }
        "rho.const" => {
            expect_args(spec, &args, 1)?;
            Ok(ScalarField::constant(2, args[0]))
        }
        "rho.cos1" => {
            expect_args(spec, &args, 0)?;
            Ok(ScalarField::new(2, |_, x| x[0].cos()).with_gradient(|_, x, out| {
                out[0] = -x[0].sin();
                out[1] = 0.0;
            }))
        }
        "rho.cos2" => {
            expect_args(spec, &args, 0)?;
            Ok(ScalarField::new(2, |_, x| x[1].cos()).with_gradient(|_, x, out| {
                out[0] = 0.0;
                out[1] = -x[1].sin();
            }))
        }
        "rho.sin12" => {
            expect_args(spec, &args, 0)?;
            Ok(
                ScalarField::new(2, |_, x| (x[0] + x[1]).sin()).with_gradient(|_, x, out| {
                    let c = (x[0] + x[1]).cos();
                    out[0] = c;
                    out[1] = c;
                }),
            )
        }
        "rho.exp_decay" => {
            expect_args(spec, &args, 0)?;
            Ok(ScalarField::new(1, |t, _| (-t).exp())
                .with_gradient(|_, _, out| out.fill(0.0))
                .with_time_derivative(
                    ScalarField::new(1, |t, _| -(-t).exp())
                        .with_gradient(|_, _, out| out.fill(0.0)),
                ))
        }
        _ => Err(Error::UnknownName(spec.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{evaluate_form, lie_derivative_squared};

    #[test]
    fn parses_specs() {
        assert_eq!(parse_spec("zero(2)").unwrap(), ("zero".into(), vec![2.0]));
        assert_eq!(
            parse_spec("torus.A(0, 1)").unwrap(),
            ("torus.A".into(), vec![0.0, 1.0])
        );
        assert_eq!(parse_spec("rho.cos1").unwrap(), ("rho.cos1".into(), vec![]));
        assert!(parse_spec("torus.A(0,").is_err());
        assert!(parse_spec("torus.A(x)").is_err());
    }

    #[test]
    fn every_listed_entry_resolves() {
        let field_specs = [
            "zero(2)",
            "r1.linear",
            "r1.const(0.7)",
            "r1.square",
            "torus.A(1,1)",
            "torus.B(2,-3)",
            "torus.const(0.5,0.5)",
            "torus.cos1",
        ];
        assert_eq!(field_specs.len(), field_entries().len());
        for spec in field_specs {
            field(spec).unwrap_or_else(|e| panic!("{spec}: {e}"));
        }
        let form_specs = [
            "form.dx1(2)",
            "form.volume(2)",
            "form.x1_dx1",
            "form.sin_d1",
            "form.heat_sine(1)",
        ];
        assert_eq!(form_specs.len(), form_entries().len());
        for spec in form_specs {
            form(spec).unwrap_or_else(|e| panic!("{spec}: {e}"));
        }
        let density_specs = [
            "rho.one(1)",
            "rho.const(7)",
            "rho.cos1",
            "rho.cos2",
            "rho.sin12",
            "rho.exp_decay",
        ];
        assert_eq!(density_specs.len(), density_entries().len());
        for spec in density_specs {
            density(spec).unwrap_or_else(|e| panic!("{spec}: {e}"));
        }
    }

    #[test]
    fn unknown_names_are_reported() {
        assert!(matches!(field("nope(1)"), Err(Error::UnknownName(_))));
        assert!(matches!(form("form.nope"), Err(Error::UnknownName(_))));
        assert!(matches!(density("rho.nope"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn arity_mismatches_are_argument_errors() {
        assert!(matches!(field("zero"), Err(Error::Argument(_))));
        assert!(matches!(field("torus.A(1)"), Err(Error::Argument(_))));
        assert!(matches!(field("torus.A(0.5,1)"), Err(Error::Argument(_))));
    }

    #[test]
    fn torus_densities_are_periodic() {
        use std::f64::consts::TAU;
        for name in ["rho.cos1", "rho.cos2", "rho.sin12"] {
            let rho = density(name).unwrap();
            for &(a, b) in &[(0.3, 1.9), (4.4, 0.1)] {
                let v = rho.value(0.0, &[a, b]);
                let w = rho.value(0.0, &[a + TAU, b - TAU]);
                assert!((v - w).abs() < 1e-12, "{name} not periodic");
            }
        }
    }

    #[test]
    fn heat_sine_family_solves_its_backward_equation() {
        // d(theta)/dt + (1/2) L^2_{c d/dx} theta = 0
        let c = 1.3;
        let theta = form(&format!("form.heat_sine({c})")).unwrap();
        let noise = field(&format!("r1.const({c})")).unwrap();
        let l2 = lie_derivative_squared(&noise, &theta).unwrap();
        let dt = theta.time_derivative();
        let v = [1.0];
        for &(t, x) in &[(0.0, 0.4), (0.5, 1.2), (1.0, -0.8)] {
            let a = evaluate_form(&dt, t, &[x], &[&v]).unwrap();
            let b = evaluate_form(&l2, t, &[x], &[&v]).unwrap();
            assert!(
                (a + 0.5 * b).abs() < 1e-5,
                "backward equation residual {} at ({t}, {x})",
                a + 0.5 * b
            );
        }
    }

    #[test]
    fn exp_decay_density_solves_the_drift_continuity_equation() {
        use crate::forms::{divergence, scalar_times_field, VolumeForm};
        let rho = density("rho.exp_decay").unwrap();
        let x_field = field("r1.linear").unwrap();
        let mu = VolumeForm::standard(1);
        let rx = scalar_times_field(&rho, &x_field);
        for &(t, x) in &[(0.0, 0.5), (0.7, 1.1), (1.5, -0.3)] {
            let r = rho.time_derivative().value(t, &[x]) + divergence(&mu, &rx, t, &[x]).unwrap();
            assert_eq!(r, 0.0);
        }
    }
}
