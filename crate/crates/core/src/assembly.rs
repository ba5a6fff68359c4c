//! Weighted overdetermined collocation systems `H c = r`.

use std::io::Write;
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::pde_weight;
use crate::kernel::MultiIndex;
use crate::problem::{apply_terms, ConstraintKind, ProblemSpec};
use crate::sampling::SampledBasis;

/// Provenance of one row. The stored weight is already multiplied into the
/// row of `H` and the matching entry of `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowTag {
    Pde { point: [f64; 2], weight: f64 },
    Constraint { index: usize, weight: f64 },
}

impl RowTag {
    pub fn weight(&self) -> f64 {
        match *self {
            RowTag::Pde { weight, .. } | RowTag::Constraint { weight, .. } => weight,
        }
    }

    pub fn is_pde(&self) -> bool {
        matches!(self, RowTag::Pde { .. })
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquaresSystem {
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
    pub rows: Vec<RowTag>,
}

impl LeastSquaresSystem {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `‖H c - r‖_∞`.
    pub fn residual_inf(&self, coefficients: &[f64]) -> f64 {
        let c = Mat::from_fn(coefficients.len(), 1, |i, _| coefficients[i]);
        let hc = &self.matrix * &c;
        (0..self.nrows()).map(|i| (hc[(i, 0)] - self.rhs[i]).abs()).fold(0.0, f64::max)
    }

    /// Matrix Market coordinate dump of `[H | r]`, skipping exact zeros.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let (m, n) = (self.nrows(), self.ncols());
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..m {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        for (i, v) in self.rhs.iter().enumerate() {
            if *v != 0.0 {
                entries.push((i, n, *v));
            }
        }
        writeln!(f, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
        writeln!(f, "% columns 1..{n} hold H, column {} holds r", n + 1).map_err(io)?;
        writeln!(f, "{m} {} {}", n + 1, entries.len()).map_err(io)?;
        for (i, j, v) in entries {
            writeln!(f, "{} {} {v:.17e}", i + 1, j + 1).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Row terms of a constraint, as `(coefficient, derivative)` pairs.
fn constraint_terms(problem: &ProblemSpec, index: usize) -> Result<Vec<(f64, MultiIndex)>> {
    let c = &problem.constraints[index];
    Ok(match c.kind {
        ConstraintKind::Value => vec![(1.0, MultiIndex::ZERO)],
        ConstraintKind::Derivative(alpha) => vec![(1.0, alpha)],
        ConstraintKind::NormalDerivative => {
            let sdf = problem
                .geometry
                .as_ref()
                .ok_or_else(|| Error::invalid("normal-derivative constraint without an SDF"))?;
            let n = sdf.normal_at(c.point)?;
            vec![(n[0], MultiIndex { dx: 1, dy: 0 }), (n[1], MultiIndex { dx: 0, dy: 1 })]
        }
    })
}

/// Builds the weighted collocation system.
///
/// PDE rows come first in collocation order, then one row per constraint in
/// declaration order.
pub fn assemble(problem: &ProblemSpec, basis: &SampledBasis, collocation: &[[f64; 2]]) -> Result<LeastSquaresSystem> {
    if basis.is_empty() {
        return Err(Error::invalid("cannot assemble with an empty basis"));
    }
    if basis.dim != problem.dimension {
        return Err(Error::invalid("basis and problem dimensions differ"));
    }
    problem.validate()?;

    // per-row (coefficient, derivative) lists and weights
    let mut row_terms: Vec<Vec<(f64, MultiIndex)>> = Vec::with_capacity(collocation.len() + problem.constraints.len());
    let mut rows = Vec::with_capacity(row_terms.capacity());
    let mut rhs = Vec::with_capacity(row_terms.capacity());
    let mut points = Vec::with_capacity(row_terms.capacity());

    for &p in collocation {
        let weight = match (&problem.sdf_weighting, &problem.geometry) {
            (Some(params), Some(sdf)) => pde_weight(sdf.value_at(p).max(0.0), params),
            _ => 1.0,
        };
        row_terms
            .push(problem.operator.terms().iter().map(|t| (weight * t.coefficient.eval(p), t.derivative)).collect());
        rows.push(RowTag::Pde { point: p, weight });
        rhs.push(weight * problem.rhs(p));
        points.push(p);
    }
    for (k, c) in problem.constraints.iter().enumerate() {
        let terms = constraint_terms(problem, k)?;
        row_terms.push(terms.into_iter().map(|(coef, a)| (c.weight * coef, a)).collect());
        rows.push(RowTag::Constraint { index: k, weight: c.weight });
        rhs.push(c.weight * c.target);
        points.push(c.point);
    }

    let (m, n) = (rows.len(), basis.len());
    let mut matrix = Mat::<f64>::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            matrix[(i, j)] = apply_terms(row_terms[i].iter().copied(), basis, j, points[i]);
        }
    }

    for i in 0..m {
        if !rhs[i].is_finite() {
            return Err(Error::Assembly { row: i, message: format!("non-finite right-hand side {}", rhs[i]) });
        }
    }
    for j in 0..n {
        for i in 0..m {
            if !matrix[(i, j)].is_finite() {
                return Err(Error::Assembly { row: i, message: format!("non-finite entry in column {j}") });
            }
        }
    }
    Ok(LeastSquaresSystem { matrix, rhs, rows })
}

/// Weighted residuals `(H c - r)` at `points` (PDE rows) followed by the
/// constraint rows, computed without materializing `H`.
pub fn residual_rows(
    problem: &ProblemSpec,
    basis: &SampledBasis,
    coefficients: &[f64],
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    if coefficients.len() != basis.len() {
        return Err(Error::invalid(format!("{} coefficients for {} basis functions", coefficients.len(), basis.len())));
    }
    let active: Vec<usize> = (0..basis.len()).filter(|&i| coefficients[i] != 0.0).collect();
    let eval = |terms: &[(f64, MultiIndex)], p: [f64; 2]| -> f64 {
        active.iter().map(|&i| coefficients[i] * apply_terms(terms.iter().copied(), basis, i, p)).sum()
    };
    let mut out = Vec::with_capacity(points.len() + problem.constraints.len());
    for &p in points {
        let weight = match (&problem.sdf_weighting, &problem.geometry) {
            (Some(params), Some(sdf)) => pde_weight(sdf.value_at(p).max(0.0), params),
            _ => 1.0,
        };
        let terms: Vec<(f64, MultiIndex)> =
            problem.operator.terms().iter().map(|t| (t.coefficient.eval(p), t.derivative)).collect();
        out.push(weight * (eval(&terms, p) - problem.rhs(p)));
    }
    for (k, c) in problem.constraints.iter().enumerate() {
        let terms = constraint_terms(problem, k)?;
        out.push(c.weight * (eval(&terms, c.point) - c.target));
    }
    Ok(out)
}
