//! Affine simplices and quadrature of pulled-back forms.
//!
//! Rules live on the standard simplex {u_i >= 0, sum u_i <= 1}. For p = 1
//! they are Gauss-Legendre points mapped to [0, 1]; for p = 2, 3 they are
//! collapsed Gauss tensor rules: a Gauss-Legendre grid on the unit cube
//! pushed through u_1 = t_1, u_2 = t_2 (1 - t_1), ... with the map's
//! Jacobian absorbed into the weights. All weights are strictly positive
//! and sum to the simplex volume 1/p!.

use crate::error::{Error, Result};
use crate::flow::FlowEnsemble;
use crate::forms::{pullback_value, TimeForm};
use crate::la;

/// Gauss-Legendre abscissas/weights on [-1, 1] in closed form.
fn gauss_legendre(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w): (Vec<f64>, Vec<f64>) = match q {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let s = (10.0f64 / 7.0).sqrt();
            let a = (5.0 - 2.0 * s).sqrt() / 3.0;
            let b = (5.0 + 2.0 * s).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        _ => {
            return Err(Error::Capability(format!(
                "Gauss-Legendre with {q} points is not shipped"
            )))
        }
    };
    Ok((x, w))
}

/// Gauss-Legendre on [0, 1].
fn gauss_legendre_unit(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre(q)?;
    Ok((
        x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    ))
}

/// Positive-weight quadrature rule on the standard p-simplex.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    degree: usize,
    order: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Polynomial exactness degree.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Build the rule for simplex dimension `p` exact on polynomials of total
/// degree `order`.
pub fn standard_rule(p: usize, order: usize) -> Result<QuadratureRule> {
    if !(1..=3).contains(&p) || !(1..=7).contains(&order) {
        return Err(Error::Capability(format!(
            "no rule for simplex dimension {p} at exactness degree {order}"
        )));
    }
    let q = (order + p).div_ceil(2);
    let (t, w) = gauss_legendre_unit(q)?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match p {
        1 => {
            for i in 0..q {
                nodes.push(vec![t[i]]);
                weights.push(w[i]);
            }
        }
        2 => {
            for i in 0..q {
                for j in 0..q {
                    let u1 = t[i];
                    let u2 = t[j] * (1.0 - t[i]);
                    nodes.push(vec![u1, u2]);
                    weights.push(w[i] * w[j] * (1.0 - t[i]));
                }
            }
        }
        3 => {
            for i in 0..q {
                for j in 0..q {
                    for k in 0..q {
                        let u1 = t[i];
                        let u2 = t[j] * (1.0 - t[i]);
                        let u3 = t[k] * (1.0 - t[i]) * (1.0 - t[j]);
                        nodes.push(vec![u1, u2, u3]);
                        weights.push(
                            w[i] * w[j] * w[k]
                                * (1.0 - t[i])
                                * (1.0 - t[i])
                                * (1.0 - t[j]),
                        );
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(QuadratureRule {
        degree: p,
        order,
        nodes,
        weights,
    })
}

/// An affine p-simplex in R^n given by its p + 1 vertices.
#[derive(Clone, Debug)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::argument("a simplex needs at least two vertices"));
        }
        let n = vertices[0].len();
        if n == 0 || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::argument("simplex vertices must share a dimension"));
        }
        let p = vertices.len() - 1;
        if p > n {
            return Err(Error::argument(format!(
                "a {p}-simplex does not fit in dimension {n}"
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("simplex vertices".into()));
        }
        let s = Simplex { vertices };
        if !s.edges_have_full_rank() {
            return Err(Error::argument("degenerate simplex: edge matrix is rank deficient"));
        }
        Ok(s)
    }

    fn edges_have_full_rank(&self) -> bool {
        // modified Gram-Schmidt on the edge vectors
        let mut edges = self.edges();
        let scale = edges
            .iter()
            .flatten()
            .fold(0.0f64, |a, &c| a.max(c.abs()))
            .max(1e-300);
        for i in 0..edges.len() {
            for j in 0..i {
                let d = la::dot(&edges[i], &edges[j]);
                let (head, tail) = edges.split_at_mut(i);
                for (c, &b) in tail[0].iter_mut().zip(&head[j]) {
                    *c -= d * b;
                }
            }
            let norm = la::dot(&edges[i], &edges[i]).sqrt();
            if norm <= 1e-12 * scale {
                return false;
            }
            for c in edges[i].iter_mut() {
                *c /= norm;
            }
        }
        true
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn degree(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Edge vectors v_i - v_0, the images of the standard basis under the
    /// parametrization.
    pub fn edges(&self) -> Vec<Vec<f64>> {
        let v0 = &self.vertices[0];
        self.vertices[1..]
            .iter()
            .map(|v| v.iter().zip(v0).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// Affine parametrization of the standard simplex.
    pub fn map(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.degree());
        let mut x = self.vertices[0].clone();
        for (ui, v) in u.iter().zip(&self.vertices[1..]) {
            for (c, (a, b)) in x.iter_mut().zip(v.iter().zip(&self.vertices[0])) {
                *c += ui * (a - b);
            }
        }
        x
    }

    /// The rule's nodes mapped onto this simplex (the points advected by
    /// the flow).
    pub fn quadrature_nodes(&self, rule: &QuadratureRule) -> Result<Vec<Vec<f64>>> {
        if rule.degree() != self.degree() {
            return Err(Error::argument("rule dimension does not match the simplex"));
        }
        Ok(rule.nodes().iter().map(|u| self.map(u)).collect())
    }
}

/// Position and Jacobian of the flow at one quadrature node.
#[derive(Clone, Copy)]
pub struct NodeState<'a> {
    pub position: &'a [f64],
    pub jacobian: &'a [f64],
}

/// The flow states of an advected node ensemble at grid index `j`.
pub fn frame_states(ensemble: &FlowEnsemble, j: usize) -> Vec<NodeState<'_>> {
    ensemble
        .trajectories()
        .iter()
        .map(|tr| NodeState {
            position: tr.position(j),
            jacobian: tr.jacobian(j),
        })
        .collect()
}

/// Quadrature of the pulled-back form over a simplex:
/// sum_q w_q theta(t, phi(x_q))(J_q e_1, ..., J_q e_p) with e_i the edge
/// vectors of the simplex.
pub fn integrate_pulled_form(
    theta: &TimeForm,
    t: f64,
    simplex: &Simplex,
    states: &[NodeState<'_>],
    rule: &QuadratureRule,
) -> Result<f64> {
    if theta.degree() != simplex.degree() || rule.degree() != simplex.degree() {
        return Err(Error::argument(
            "form, simplex and rule must share one degree",
        ));
    }
    if theta.dim() != simplex.ambient_dim() {
        return Err(Error::argument("form/simplex dimension mismatch"));
    }
    if states.len() != rule.len() {
        return Err(Error::argument(format!(
            "rule has {} nodes but {} flow states were supplied",
            rule.len(),
            states.len()
        )));
    }
    let edges = simplex.edges();
    let edge_refs: Vec<&[f64]> = edges.iter().map(|e| e.as_slice()).collect();
    let mut total = 0.0;
    for (state, w) in states.iter().zip(rule.weights()) {
        let v = pullback_value(state.position, state.jacobian, theta, t, &edge_refs)?;
        total += w * v;
    }
    Ok(total)
}

/// Direct quadrature of a form over a simplex (identity flow).
pub fn integrate_form(
    theta: &TimeForm,
    t: f64,
    simplex: &Simplex,
    rule: &QuadratureRule,
) -> Result<f64> {
    let nodes = simplex.quadrature_nodes(rule)?;
    let eye = la::identity(simplex.ambient_dim());
    let states: Vec<NodeState> = nodes
        .iter()
        .map(|p| NodeState {
            position: p,
            jacobian: &eye,
        })
        .collect();
    integrate_pulled_form(theta, t, simplex, &states, rule)
}

/// A signed simplex together with the flow states at its nodes.
pub struct ChainEntry<'a> {
    pub simplex: &'a Simplex,
    pub sign: f64,
    pub states: Vec<NodeState<'a>>,
}

/// Signed sum of pulled-form integrals over a simplicial chain.
pub fn chain_integrate(
    theta: &TimeForm,
    t: f64,
    entries: &[ChainEntry<'_>],
    rule: &QuadratureRule,
) -> Result<f64> {
    let mut total = 0.0;
    for entry in entries {
        total += entry.sign * integrate_pulled_form(theta, t, entry.simplex, &entry.states, rule)?;
    }
    Ok(total)
}
