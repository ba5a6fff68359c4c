//! Built-in benchmark problems with manufactured or closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_centers, extract_boundary, flower_sdf, Boundary, FlowerParams, SdfField, SdfWeightParams};
use crate::kernel::MultiIndex;
use crate::problem::{BoundaryConstraint, ConstraintKind, LinearOperator, OperatorTerm, ProblemSpec, ScalarField};
use crate::sampling::{sample_1d, sample_2d, Dimension, DomainBounds, PartitionSpec1D, PartitionSpec2D, SampledBasis};
use crate::solver::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseId {
    Tc1,
    Tc2,
    Tc3,
    Tc4,
    Tc5,
    Tc6,
    Tc7a,
    Tc7b,
}

impl CaseId {
    pub const ALL: [CaseId; 8] =
        [CaseId::Tc1, CaseId::Tc2, CaseId::Tc3, CaseId::Tc4, CaseId::Tc5, CaseId::Tc6, CaseId::Tc7a, CaseId::Tc7b];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Tc1 => "tc1",
            CaseId::Tc2 => "tc2",
            CaseId::Tc3 => "tc3",
            CaseId::Tc4 => "tc4",
            CaseId::Tc5 => "tc5",
            CaseId::Tc6 => "tc6",
            CaseId::Tc7a => "tc7a",
            CaseId::Tc7b => "tc7b",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            CaseId::Tc4 | CaseId::Tc5 | CaseId::Tc6 => Dimension::Two,
            _ => Dimension::One,
        }
    }

    pub fn bounds(self) -> DomainBounds {
        match self {
            CaseId::Tc1 | CaseId::Tc2 | CaseId::Tc3 => DomainBounds::interval(-2.0 * PI, 2.0 * PI).unwrap(),
            CaseId::Tc4 | CaseId::Tc5 | CaseId::Tc6 => DomainBounds::unit_square(),
            CaseId::Tc7a | CaseId::Tc7b => DomainBounds::interval(0.0, 1.0).unwrap(),
        }
    }

    /// Location of the boundary layer for the singularly perturbed cases.
    pub fn layer_at(self) -> Option<f64> {
        match self {
            CaseId::Tc7a => Some(1.0),
            CaseId::Tc7b => Some(0.0),
            _ => None,
        }
    }

    pub fn has_flower(self) -> bool {
        matches!(self, CaseId::Tc5 | CaseId::Tc6)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown case id `{s}` (expected one of tc1..tc6, tc7a, tc7b)")))
    }
}

/// Tunable settings of a built-in case. Serialized as the config echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSettings {
    /// Partition lengths (the `x` axis in 2D).
    pub lengths: Vec<f64>,
    /// `y` partition lengths in 2D; defaults to `lengths`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths_y: Option<Vec<f64>>,
    pub points_per_partition: usize,
    pub width_scale: f64,
    pub w_bc: f64,
    /// Boundary constraint points in 2D.
    #[serde(default)]
    pub boundary_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flower: Option<FlowerParams>,
    #[serde(default)]
    pub sdf_resolution: usize,
    /// `None` leaves all PDE rows at unit weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdf_weighting: Option<SdfWeightParams>,
    #[serde(default)]
    pub solver: SolveOptions,
}

impl CaseSettings {
    pub fn defaults(id: CaseId) -> Self {
        let base = CaseSettings {
            lengths: vec![0.5, 0.5],
            lengths_y: None,
            points_per_partition: 400,
            width_scale: 2.0,
            w_bc: 50.0,
            boundary_points: 0,
            flower: None,
            sdf_resolution: 0,
            sdf_weighting: None,
            solver: SolveOptions::default(),
        };
        match id {
            CaseId::Tc1 | CaseId::Tc2 | CaseId::Tc3 => base,
            CaseId::Tc4 => CaseSettings { points_per_partition: 20, width_scale: 2.0, boundary_points: 1000, ..base },
            CaseId::Tc5 | CaseId::Tc6 => CaseSettings {
                points_per_partition: 23,
                width_scale: if id == CaseId::Tc5 { 2.0 } else { 3.0 },
                boundary_points: if id == CaseId::Tc5 { 2000 } else { 2500 },
                flower: Some(FlowerParams::default()),
                sdf_resolution: 400,
                sdf_weighting: Some(SdfWeightParams::for_diameter(2f64.sqrt())),
                ..base
            },
            CaseId::Tc7a => {
                CaseSettings { lengths: vec![0.95, 0.05], points_per_partition: 1000, width_scale: 5.0, ..base }
            }
            CaseId::Tc7b => {
                CaseSettings { lengths: vec![0.05, 0.95], points_per_partition: 1000, width_scale: 5.0, ..base }
            }
        }
    }

    /// Samples the basis for this case (before any geometry clipping).
    pub fn sample(&self, id: CaseId) -> Result<SampledBasis> {
        self.sample_in(id.dimension(), &id.bounds())
    }

    pub fn sample_in(&self, dim: Dimension, bounds: &DomainBounds) -> Result<SampledBasis> {
        Ok(match dim {
            Dimension::One => {
                let spec = PartitionSpec1D::new(self.lengths.clone(), self.points_per_partition, self.width_scale)?;
                sample_1d(&spec, bounds)
            }
            Dimension::Two => {
                let ly = self.lengths_y.clone().unwrap_or_else(|| self.lengths.clone());
                let spec = PartitionSpec2D::new(
                    self.lengths.clone(),
                    ly,
                    self.points_per_partition,
                    self.points_per_partition,
                    self.width_scale,
                )?;
                sample_2d(&spec, bounds)
            }
        })
    }
}

type DerivFn = dyn Fn([f64; 2], MultiIndex) -> f64 + Send + Sync;

/// Closed-form solution with partial derivatives up to order 4.
#[derive(Clone)]
pub struct ExactSolution {
    f: Arc<DerivFn>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    fn new(f: impl Fn([f64; 2], MultiIndex) -> f64 + Send + Sync + 'static) -> Self {
        ExactSolution { f: Arc::new(f) }
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        (self.f)(p, MultiIndex::ZERO)
    }

    pub fn derivative(&self, p: [f64; 2], alpha: MultiIndex) -> f64 {
        (self.f)(p, alpha)
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        [(self.f)(p, MultiIndex { dx: 1, dy: 0 }), (self.f)(p, MultiIndex { dx: 0, dy: 1 })]
    }
}

/// `dⁿ/dxⁿ sin(kx)` and `dⁿ/dxⁿ cos(kx)`.
fn dsin(k: f64, x: f64, n: u8) -> f64 {
    k.powi(n as i32) * (k * x + n as f64 * PI / 2.0).sin()
}

fn dcos(k: f64, x: f64, n: u8) -> f64 {
    k.powi(n as i32) * (k * x + n as f64 * PI / 2.0).cos()
}

/// `sin(kx) cos(ky)` and its partials.
fn trig_product(k: f64) -> ExactSolution {
    ExactSolution::new(move |p, a| dsin(k, p[0], a.dx) * dcos(k, p[1], a.dy))
}

/// A fully built case: problem, basis, collocation and oracle.
#[derive(Clone, Debug)]
pub struct BuiltinCase {
    pub id: CaseId,
    pub settings: CaseSettings,
    pub problem: ProblemSpec,
    pub basis: SampledBasis,
    pub collocation: Vec<[f64; 2]>,
    pub exact: ExactSolution,
    /// Resampled boundary for the flower cases.
    pub boundary: Option<Boundary>,
}

pub const TC7_NU: f64 = 1e-4;

/// `n` points equally spaced in arclength around the unit square,
/// starting at the origin.
fn square_perimeter(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|q| {
            let s = 4.0 * q as f64 / n as f64;
            let (side, t) = ((s.floor() as usize).min(3), s - s.floor().min(3.0));
            match side {
                0 => [t, 0.0],
                1 => [1.0, t],
                2 => [1.0 - t, 1.0],
                _ => [0.0, 1.0 - t],
            }
        })
        .collect()
}

fn constant_operator(terms: &[(MultiIndex, f64)]) -> LinearOperator {
    LinearOperator::new(terms.iter().map(|&(d, c)| OperatorTerm::constant(d, c)).collect()).unwrap()
}

fn d1(n: u8) -> MultiIndex {
    MultiIndex { dx: n, dy: 0 }
}

/// Builds a case with its default settings.
pub fn builtin_problem(id: CaseId) -> Result<BuiltinCase> {
    builtin_case(id, &CaseSettings::defaults(id))
}

pub fn builtin_case(id: CaseId, settings: &CaseSettings) -> Result<BuiltinCase> {
    if !(settings.w_bc > 0.0 && settings.w_bc.is_finite()) {
        return Err(Error::config(format!("w_bc must be positive, got {}", settings.w_bc)));
    }
    let bounds = id.bounds();
    let w = settings.w_bc;
    let omega = 15.0;
    let mut geometry: Option<Arc<SdfField>> = None;
    let mut boundary = None;

    let (operator, source, exact, constraints) = match id {
        CaseId::Tc1 => (
            constant_operator(&[(d1(1), 1.0)]),
            ScalarField::new("cos(15x)", move |p| (omega * p[0]).cos()),
            ExactSolution::new(move |p, a| dsin(omega, p[0], a.dx) / omega),
            vec![BoundaryConstraint::value([0.0, 0.0], 0.0, w)],
        ),
        CaseId::Tc2 => (
            constant_operator(&[(d1(2), 1.0)]),
            ScalarField::new("sin(15x)", move |p| (omega * p[0]).sin()),
            ExactSolution::new(move |p, a| -dsin(omega, p[0], a.dx) / (omega * omega)),
            vec![
                BoundaryConstraint::value([0.0, 0.0], 0.0, w),
                BoundaryConstraint {
                    point: [0.0, 0.0],
                    kind: ConstraintKind::Derivative(d1(1)),
                    target: -1.0 / omega,
                    weight: w,
                },
            ],
        ),
        CaseId::Tc3 => (
            constant_operator(&[(d1(1), 1.0)]),
            ScalarField::new("cos(x) + 15 cos(15x)", move |p| p[0].cos() + omega * (omega * p[0]).cos()),
            ExactSolution::new(move |p, a| dsin(1.0, p[0], a.dx) + dsin(omega, p[0], a.dx)),
            vec![BoundaryConstraint::value([0.0, 0.0], 0.0, w)],
        ),
        CaseId::Tc4 => {
            let k = 6.0 * PI;
            let exact = trig_product(k);
            let e = exact.clone();
            let constraints = square_perimeter(settings.boundary_points.max(1))
                .into_iter()
                .map(|p| BoundaryConstraint::value(p, e.value(p), w))
                .collect();
            let e = exact.clone();
            (
                LinearOperator::neg_laplacian(),
                ScalarField::new("72π² sin(6πx)cos(6πy)", move |p| 2.0 * k * k * e.value(p)),
                exact,
                constraints,
            )
        }
        CaseId::Tc5 | CaseId::Tc6 => {
            let flower = settings.flower.unwrap_or_default();
            let sdf = Arc::new(flower_sdf(&flower, settings.sdf_resolution.max(64))?);
            let b = extract_boundary(&sdf, settings.boundary_points.max(3))?;
            let (k, operator, name) = if id == CaseId::Tc5 {
                (4.0 * PI, LinearOperator::neg_laplacian(), "32π² sin(4πx)cos(4πy)")
            } else {
                (5.0 * PI, LinearOperator::biharmonic(), "(50π²)² sin(5πx)cos(5πy)")
            };
            let exact = trig_product(k);
            let mut constraints: Vec<BoundaryConstraint> =
                b.points.iter().map(|&p| BoundaryConstraint::value(p, exact.value(p), w)).collect();
            if id == CaseId::Tc6 {
                for (p, n) in b.points.iter().zip(&b.normals) {
                    let g = exact.gradient(*p);
                    constraints.push(BoundaryConstraint {
                        point: *p,
                        kind: ConstraintKind::NormalDerivative,
                        target: g[0] * n[0] + g[1] * n[1],
                        weight: w,
                    });
                }
            }
            let factor = if id == CaseId::Tc5 { 2.0 * k * k } else { (2.0 * k * k).powi(2) };
            let e = exact.clone();
            geometry = Some(sdf);
            boundary = Some(b);
            (operator, ScalarField::new(name, move |p| factor * e.value(p)), exact, constraints)
        }
        CaseId::Tc7a => {
            let nu = TC7_NU;
            let denom = -(-1.0 / nu).exp_m1();
            let tail = (-1.0 / nu).exp();
            (
                constant_operator(&[(d1(1), 1.0), (d1(2), -nu)]),
                ScalarField::constant(0.0),
                ExactSolution::new(move |p, a| {
                    let e = ((p[0] - 1.0) / nu).exp();
                    match a.dx {
                        0 => (e - tail) / denom,
                        n => e / denom / nu.powi(n as i32),
                    }
                }),
                vec![BoundaryConstraint::value([0.0, 0.0], 0.0, w), BoundaryConstraint::value([1.0, 0.0], 1.0, w)],
            )
        }
        CaseId::Tc7b => {
            let eps = TC7_NU;
            let denom = -(-1.0 / eps).exp_m1();
            (
                LinearOperator::with_offset(
                    vec![OperatorTerm::constant(d1(1), 1.0), OperatorTerm::constant(d1(2), eps)],
                    1.0,
                )?,
                ScalarField::constant(0.0),
                ExactSolution::new(move |p, a| {
                    let x = p[0];
                    let e = (-x / eps).exp();
                    match a.dx {
                        0 => -x + (1.0 - e) / denom,
                        1 => -1.0 + e / eps / denom,
                        n => -(-1.0 / eps).powi(n as i32) * e / denom,
                    }
                }),
                vec![BoundaryConstraint::value([0.0, 0.0], 0.0, w), BoundaryConstraint::value([1.0, 0.0], 0.0, w)],
            )
        }
    };

    let problem = ProblemSpec {
        dimension: id.dimension(),
        bounds,
        operator,
        source,
        constraints,
        sdf_weighting: if geometry.is_some() { settings.sdf_weighting } else { None },
        geometry,
    };
    problem.validate()?;

    let mut basis = settings.sample(id)?;
    if let Some(sdf) = &problem.geometry {
        basis = clip_centers(&basis, sdf)?;
    }
    let collocation = basis.centers.clone();
    Ok(BuiltinCase { id, settings: settings.clone(), problem, basis, collocation, exact, boundary })
}

impl BuiltinCase {
    /// Operator applied to the exact solution, for transcription checks.
    pub fn exact_operator(&self, p: [f64; 2]) -> f64 {
        self.problem
            .operator
            .terms()
            .iter()
            .map(|t| t.coefficient.eval(p) * self.exact.derivative(p, t.derivative))
            .sum()
    }
}
