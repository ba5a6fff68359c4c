//! Declarative steady linear problems: operator, source, constraints, domain.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{SdfField, SdfWeightParams};
use crate::kernel::{axis_factor, gaussian_envelope, MultiIndex, MAX_ORDER};
use crate::sampling::{Dimension, DomainBounds, SampledBasis};

/// A named, thread-safe scalar function of position.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::new(format!("constant({value})"), move |_| value)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        (self.f)(p)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub enum Coefficient {
    Constant(f64),
    Field(ScalarField),
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f.eval(p),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OperatorTerm {
    pub derivative: MultiIndex,
    pub coefficient: Coefficient,
}

impl OperatorTerm {
    pub fn constant(derivative: MultiIndex, coefficient: f64) -> Self {
        OperatorTerm { derivative, coefficient: Coefficient::Constant(coefficient) }
    }
}

/// `L u = Σ coeff · ∂^α u + constant_offset`.
///
/// The offset is moved to the source side during assembly, so the system
/// solved is `Σ coeff · ∂^α u = R - constant_offset`.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    terms: Vec<OperatorTerm>,
    pub constant_offset: f64,
}

impl LinearOperator {
    pub fn new(terms: Vec<OperatorTerm>) -> Result<Self> {
        Self::with_offset(terms, 0.0)
    }

    pub fn with_offset(terms: Vec<OperatorTerm>, constant_offset: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("operator needs at least one term"));
        }
        if let Some(t) = terms.iter().find(|t| t.derivative.order() > MAX_ORDER) {
            return Err(Error::invalid(format!("operator term of order {} exceeds {MAX_ORDER}", t.derivative.order())));
        }
        Ok(LinearOperator { terms, constant_offset })
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn max_order(&self) -> u8 {
        self.terms.iter().map(|t| t.derivative.order()).max().unwrap_or(0)
    }

    /// `-Δ` in two dimensions.
    pub fn neg_laplacian() -> Self {
        LinearOperator {
            terms: vec![
                OperatorTerm::constant(MultiIndex { dx: 2, dy: 0 }, -1.0),
                OperatorTerm::constant(MultiIndex { dx: 0, dy: 2 }, -1.0),
            ],
            constant_offset: 0.0,
        }
    }

    /// `Δ²` in two dimensions.
    pub fn biharmonic() -> Self {
        LinearOperator {
            terms: vec![
                OperatorTerm::constant(MultiIndex { dx: 4, dy: 0 }, 1.0),
                OperatorTerm::constant(MultiIndex { dx: 2, dy: 2 }, 2.0),
                OperatorTerm::constant(MultiIndex { dx: 0, dy: 4 }, 1.0),
            ],
            constant_offset: 0.0,
        }
    }
}

/// Applies a sum of `(coefficient, derivative)` pairs to basis function
/// `index` at `p`, sharing one exponential between the terms.
pub(crate) fn apply_terms(
    terms: impl IntoIterator<Item = (f64, MultiIndex)>,
    basis: &SampledBasis,
    index: usize,
    p: [f64; 2],
) -> f64 {
    let c = basis.centers[index];
    let sigma = basis.widths[index];
    let rx = p[0] - c[0];
    let ry = match basis.dim {
        Dimension::One => 0.0,
        Dimension::Two => p[1] - c[1],
    };
    let env = gaussian_envelope(-(rx * rx + ry * ry) / (2.0 * sigma * sigma));
    if env == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (coeff, alpha) in terms {
        if coeff != 0.0 {
            acc += coeff * axis_factor(alpha.dx, rx, sigma) * axis_factor(alpha.dy, ry, sigma);
        }
    }
    acc * env
}

/// One entry of the collocation matrix: the operator applied to basis
/// function `index`, evaluated at `p`.
pub fn apply_operator(op: &LinearOperator, basis: &SampledBasis, index: usize, p: [f64; 2]) -> f64 {
    apply_terms(op.terms.iter().map(|t| (t.coefficient.eval(p), t.derivative)), basis, index, p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    Value,
    Derivative(MultiIndex),
    /// Uses the outward normal of the problem's SDF at the constraint point.
    NormalDerivative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryConstraint {
    pub point: [f64; 2],
    pub kind: ConstraintKind,
    pub target: f64,
    pub weight: f64,
}

impl BoundaryConstraint {
    pub fn value(point: [f64; 2], target: f64, weight: f64) -> Self {
        BoundaryConstraint { point, kind: ConstraintKind::Value, target, weight }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dimension: Dimension,
    pub bounds: DomainBounds,
    pub operator: LinearOperator,
    pub source: ScalarField,
    pub constraints: Vec<BoundaryConstraint>,
    pub geometry: Option<Arc<SdfField>>,
    pub sdf_weighting: Option<SdfWeightParams>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::invalid("problem needs at least one constraint"));
        }
        if self.dimension == Dimension::One && self.operator.terms().iter().any(|t| t.derivative.dy != 0) {
            return Err(Error::invalid("y-derivative in a one-dimensional operator"));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid(format!("constraint {k} has non-positive weight {}", c.weight)));
            }
            if !self.bounds.contains(self.dimension, c.point) {
                return Err(Error::invalid(format!("constraint {k} at {:?} lies outside the domain", c.point)));
            }
            if c.kind == ConstraintKind::NormalDerivative && self.geometry.is_none() {
                return Err(Error::invalid(format!(
                    "constraint {k} is a normal derivative but the problem has no SDF"
                )));
            }
        }
        if let Some(w) = &self.sdf_weighting {
            w.validate()?;
            if self.geometry.is_none() {
                return Err(Error::invalid("SDF weighting requires an SDF"));
            }
        }
        Ok(())
    }

    /// Source with the operator's constant offset folded in.
    pub fn rhs(&self, p: [f64; 2]) -> f64 {
        self.source.eval(p) - self.operator.constant_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gauss_deriv_1d, gauss_partial_2d};
    use proptest::prelude::*;

    fn one(center: f64, sigma: f64) -> SampledBasis {
        SampledBasis {
            dim: Dimension::One,
            centers: vec![[center, 0.0]],
            widths: vec![sigma],
            tags: vec![crate::sampling::CenterTag::Global],
        }
    }

    #[test]
    fn identity_at_center() {
        let op = LinearOperator::new(vec![OperatorTerm::constant(MultiIndex::ZERO, 1.0)]).unwrap();
        assert_eq!(apply_operator(&op, &one(0.3, 0.1), 0, [0.3, 0.0]), 1.0);
    }

    #[test]
    fn convection_diffusion_is_linear_combination() {
        let nu = 1e-2;
        let op = LinearOperator::new(vec![
            OperatorTerm::constant(MultiIndex::d1(1).unwrap(), 1.0),
            OperatorTerm::constant(MultiIndex::d1(2).unwrap(), -nu),
        ])
        .unwrap();
        let b = one(0.5, 0.05);
        for x in [0.41, 0.5, 0.53, 0.7] {
            let expect = gauss_deriv_1d(x, 0.5, 0.05, 1).unwrap() - nu * gauss_deriv_1d(x, 0.5, 0.05, 2).unwrap();
            assert!((apply_operator(&op, &b, 0, [x, 0.0]) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn biharmonic_at_center_matches_finite_differences() {
        let sigma = 1.0;
        let basis = SampledBasis {
            dim: Dimension::Two,
            centers: vec![[0.0, 0.0]],
            widths: vec![sigma],
            tags: vec![crate::sampling::CenterTag::Global],
        };
        let value = apply_operator(&LinearOperator::biharmonic(), &basis, 0, [0.0, 0.0]);
        // u_xxxx = 3, u_xxyy = 1, u_yyyy = 3 at the peak of a unit Gaussian
        assert!((value - 8.0).abs() < 1e-12);

        // 13-point biharmonic stencil on the kernel itself
        let h = 0.02;
        let f = |i: i32, j: i32| {
            gauss_partial_2d([i as f64 * h, j as f64 * h], [0.0, 0.0], sigma, MultiIndex::ZERO).unwrap()
        };
        let stencil = 20.0 * f(0, 0) - 8.0 * (f(1, 0) + f(-1, 0) + f(0, 1) + f(0, -1))
            + 2.0 * (f(1, 1) + f(1, -1) + f(-1, 1) + f(-1, -1))
            + (f(2, 0) + f(-2, 0) + f(0, 2) + f(0, -2));
        let fd = stencil / h.powi(4);
        assert!((fd - value).abs() < 1e-2, "fd {fd} vs {value}");
    }

    #[test]
    fn validation_rejects_bad_constraints() {
        let op = LinearOperator::new(vec![OperatorTerm::constant(MultiIndex::ZERO, 1.0)]).unwrap();
        let mut spec = ProblemSpec {
            dimension: Dimension::One,
            bounds: DomainBounds::interval(0.0, 1.0).unwrap(),
            operator: op,
            source: ScalarField::constant(0.0),
            constraints: vec![],
            geometry: None,
            sdf_weighting: None,
        };
        assert!(spec.validate().is_err());
        spec.constraints.push(BoundaryConstraint::value([2.0, 0.0], 0.0, 1.0));
        assert!(spec.validate().is_err());
        spec.constraints[0].point = [0.5, 0.0];
        assert!(spec.validate().is_ok());
        spec.constraints[0].kind = ConstraintKind::NormalDerivative;
        assert!(spec.validate().is_err());
        assert!(LinearOperator::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn operator_is_linear(
            coeffs in proptest::collection::vec(-3.0..3.0f64, 3),
            scale in -2.0..2.0f64,
            px in 0.0..1.0f64, py in 0.0..1.0f64,
            cx in 0.0..1.0f64, cy in 0.0..1.0f64,
            sigma in 0.05..0.5f64,
        ) {
            let alphas = [MultiIndex::new(1, 0).unwrap(), MultiIndex::new(0, 2).unwrap(), MultiIndex::new(2, 2).unwrap()];
            let basis = SampledBasis { dim: Dimension::Two, centers: vec![[cx, cy]], widths: vec![sigma], tags: vec![crate::sampling::CenterTag::Global] };
            let terms: Vec<OperatorTerm> = alphas.iter().zip(&coeffs).map(|(a, c)| OperatorTerm::constant(*a, *c)).collect();
            let whole = apply_operator(&LinearOperator::new(terms.clone()).unwrap(), &basis, 0, [px, py]);
            let parts: f64 = terms.iter().map(|t| apply_operator(&LinearOperator::new(vec![t.clone()]).unwrap(), &basis, 0, [px, py])).sum();
            prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + parts.abs()));
            let scaled: Vec<OperatorTerm> = terms.iter().map(|t| OperatorTerm::constant(t.derivative, scale * t.coefficient.eval([0.0, 0.0]))).collect();
            let s = apply_operator(&LinearOperator::new(scaled).unwrap(), &basis, 0, [px, py]);
            prop_assert!((s - scale * whole).abs() <= 1e-9 * (1.0 + whole.abs()));
        }
    }
}
