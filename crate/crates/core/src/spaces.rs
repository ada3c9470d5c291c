//! One-dimensional fractional domains.
//!
//! Every coordinate lives on `(0, L)` with the singular end of the conformable
//! weight `x^(1-α)` at the origin. Dirichlet conditions are imposed at both
//! ends, so the unknowns of a mesh with `n` elements are its `n - 1` interior
//! nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `α ∈ (0, 1]` of a conformable derivative. `α = 1` is the classical
/// first derivative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub const CLASSICAL: FractionalOrder = FractionalOrder(1.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::Domain(format!(
                "fractional order must lie in (0, 1], got {alpha}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    /// Exponent `1 - α` of the conformable weight.
    pub fn weight_exponent(self) -> f64 {
        1.0 - self.0
    }

    /// Node weight `x^(1-α)`; exactly 1 for the classical order.
    pub fn weight(self, x: f64) -> f64 {
        if self.is_classical() {
            1.0
        } else {
            x.powf(self.weight_exponent())
        }
    }

    /// Default grading exponent: graded toward the origin for fractional
    /// orders, uniform for the classical one.
    pub fn default_grading(self) -> f64 {
        if self.is_classical() {
            1.0
        } else {
            2.0
        }
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        FractionalOrder::new(alpha)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(order: FractionalOrder) -> f64 {
        order.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    grading_exponent: f64,
    dirichlet: bool,
}

impl Mesh1D {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading_exponent(&self) -> f64 {
        self.grading_exponent
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn is_uniform(&self) -> bool {
        self.grading_exponent == 1.0
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Length of element `i` (1-based, element `i` spans `[x_{i-1}, x_i]`).
    pub fn element_length(&self, i: usize) -> f64 {
        self.nodes[i] - self.nodes[i - 1]
    }

    pub fn interior_dofs(&self) -> usize {
        self.elements() - 1
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

/// Equispaced mesh with `n` elements on `[0, L]`.
pub fn make_uniform_mesh(length: f64, n: usize) -> Result<Mesh1D> {
    make_graded_mesh(length, n, 1.0)
}

/// Mesh with nodes `x_i = L (i/n)^γ`, refined toward the origin for `γ > 1`.
pub fn make_graded_mesh(length: f64, n: usize, gamma: f64) -> Result<Mesh1D> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Domain(format!("length must be positive, got {length}")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 elements, got {n}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("grading exponent must be >= 1, got {gamma}")));
    }
    let nodes = (0..=n)
        .map(|i| {
            if i == n {
                length
            } else if gamma == 1.0 {
                length * i as f64 / n as f64
            } else {
                length * (i as f64 / n as f64).powf(gamma)
            }
        })
        .collect();
    Ok(Mesh1D {
        nodes,
        grading_exponent: gamma,
        dirichlet: true,
    })
}

/// `D^α f(x) = x^(1-α) f'(x)` for differentiable `f`, evaluated at `x > 0`.
pub fn conformable_derivative_pointwise(f_prime: f64, x: f64, order: FractionalOrder) -> Result<f64> {
    if x > 0.0 {
        Ok(order.weight(x) * f_prime)
    } else {
        Err(Error::Domain(format!(
            "conformable weight is only sampled at x > 0, got {x}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    T,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::T => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalInterval {
    pub order: FractionalOrder,
    pub mesh: Mesh1D,
    pub label: Axis,
}

impl FractionalInterval {
    pub fn new(order: FractionalOrder, mesh: Mesh1D, label: Axis) -> Self {
        FractionalInterval { order, mesh, label }
    }

    pub fn dofs(&self) -> usize {
        self.mesh.interior_dofs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_mesh_nodes() {
        assert_eq!(make_uniform_mesh(1.0, 2).unwrap().nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(
            make_uniform_mesh(2.0, 4).unwrap().nodes(),
            &[0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert!(matches!(make_uniform_mesh(1.0, 1), Err(Error::Domain(_))));
        assert!(make_uniform_mesh(0.0, 4).is_err());
        assert!(make_uniform_mesh(-1.0, 4).is_err());
    }

    #[test]
    fn graded_mesh_nodes() {
        assert_eq!(make_graded_mesh(1.0, 2, 2.0).unwrap().nodes(), &[0.0, 0.25, 1.0]);
        let cubic = make_graded_mesh(1.0, 3, 3.0).unwrap();
        for (a, b) in cubic.nodes().iter().zip([0.0, 1.0 / 27.0, 8.0 / 27.0, 1.0]) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert!(make_graded_mesh(1.0, 4, 0.5).is_err());
    }

    #[test]
    fn unit_grading_is_uniform() {
        for n in [2, 4, 7, 64] {
            let g = make_graded_mesh(1.3, n, 1.0).unwrap();
            let u = make_uniform_mesh(1.3, n).unwrap();
            for (a, b) in g.nodes().iter().zip(u.nodes()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn graded_mesh_invariants() {
        let mesh = make_graded_mesh(2.5, 17, 2.0).unwrap();
        assert_eq!(mesh.nodes()[0], 0.0);
        assert_eq!(mesh.length(), 2.5);
        for i in 1..=mesh.elements() {
            assert!(mesh.element_length(i) > 0.0);
            let expected = 2.5 * (i as f64 / 17.0).powi(2);
            assert_relative_eq!(mesh.nodes()[i], expected, max_relative = 1e-12);
        }
        assert_eq!(mesh.interior_dofs(), 16);
    }

    #[test]
    fn pointwise_derivative() {
        let half = FractionalOrder::new(0.5).unwrap();
        assert_eq!(conformable_derivative_pointwise(3.0, 1.0, half).unwrap(), 3.0);
        assert_eq!(conformable_derivative_pointwise(2.0, 4.0, half).unwrap(), 4.0);
        let value =
            conformable_derivative_pointwise(1.0, 0.25, FractionalOrder::new(0.75).unwrap()).unwrap();
        assert_relative_eq!(value, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        // limit quotient with f(x) = x at h = 1e-6
        let (x, h): (f64, f64) = (0.25, 1e-6);
        let quotient = ((x + h * x.powf(0.25)) - x) / h;
        assert_relative_eq!(value, quotient, max_relative = 1e-8);
        assert!(conformable_derivative_pointwise(1.0, 0.0, half).is_err());
    }

    #[test]
    fn classical_order_is_identity() {
        for x in [1e-6, 0.3, 1.0, 17.0] {
            assert_eq!(
                conformable_derivative_pointwise(2.5, x, FractionalOrder::CLASSICAL).unwrap(),
                2.5
            );
        }
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.1).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(FractionalOrder::new(1.0).unwrap().is_classical());
    }

    #[test]
    fn limit_quotient_converges_at_first_order() {
        // f(x) = x^2 at x = 0.7
        let x: f64 = 0.7;
        for alpha in [0.3, 0.5, 0.9] {
            let order = FractionalOrder::new(alpha).unwrap();
            let exact = conformable_derivative_pointwise(2.0 * x, x, order).unwrap();
            let errors: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&h| {
                    let shifted = x + h * x.powf(1.0 - alpha);
                    ((shifted * shifted - x * x) / h - exact).abs()
                })
                .collect();
            for pair in errors.windows(2) {
                let slope = (pair[0] / pair[1]).log10();
                assert!((slope - 1.0).abs() < 0.05, "slope {slope} for alpha {alpha}");
            }
        }
    }
}
