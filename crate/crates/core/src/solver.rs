//! Dense least-squares solves, solution evaluation and error metrics.

use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::LeastSquaresSystem;
use crate::error::{Error, Result};
use crate::kernel::MultiIndex;
use crate::pivoted_qr::SketchPivotedQr;
use crate::problem::apply_terms;
use crate::sampling::SampledBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Qr,
    SvdPinv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative singular-value cutoff for `svd_pinv`.
    pub svd_tol: f64,
    /// Relative cutoff on the diagonal of `R` for `qr`.
    pub qr_rank_tol: f64,
    /// Retry with `svd_pinv` when the `qr` residual exceeds this.
    pub fallback_residual: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { method: SolveMethod::Qr, svd_tol: 1e-10, qr_rank_tol: 1e-15, fallback_residual: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub residual_inf: f64,
    pub solve_seconds: f64,
    pub method: SolveMethod,
    /// Numerical rank used by the truncated solve.
    pub rank_estimate: Option<usize>,
}

fn solve_qr(system: &LeastSquaresSystem, tol: f64) -> Result<(Vec<f64>, usize)> {
    let f = SketchPivotedQr::factor(system.matrix.clone());
    let rank = f.rank(tol);
    if rank == 0 {
        return Err(Error::numerical("system is numerically rank zero"));
    }
    Ok((f.solve(&system.rhs, rank), rank))
}

fn solve_svd(system: &LeastSquaresSystem, tol: f64) -> Result<(Vec<f64>, usize)> {
    let svd = system.matrix.thin_svd().map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return Err(Error::numerical("system is numerically rank zero"));
    }
    let r = Mat::from_fn(system.nrows(), 1, |i, _| system.rhs[i]);
    let utr = u.transpose() * &r;
    let mut scaled = Mat::<f64>::zeros(s.nrows(), 1);
    let mut rank = 0;
    for i in 0..s.nrows() {
        if s[i] > tol * smax {
            scaled[(i, 0)] = utr[(i, 0)] / s[i];
            rank += 1;
        }
    }
    let c = v * &scaled;
    Ok(((0..c.nrows()).map(|i| c[(i, 0)]).collect(), rank))
}

/// Solves `min ‖H c - r‖₂`. Timing covers factorization and solve only.
pub fn solve(system: &LeastSquaresSystem, options: &SolveOptions) -> Result<SolveReport> {
    if system.nrows() == 0 || system.ncols() == 0 {
        return Err(Error::invalid("empty least-squares system"));
    }
    let start = Instant::now();
    let (mut coefficients, mut rank) = match options.method {
        SolveMethod::Qr => solve_qr(system, options.qr_rank_tol)?,
        SolveMethod::SvdPinv => solve_svd(system, options.svd_tol)?,
    };
    let mut method = options.method;
    let mut residual_inf = system.residual_inf(&coefficients);
    if method == SolveMethod::Qr {
        let bad = !residual_inf.is_finite() || options.fallback_residual.is_some_and(|t| residual_inf > t);
        if bad {
            (coefficients, rank) = solve_svd(system, options.svd_tol)?;
            method = SolveMethod::SvdPinv;
            residual_inf = system.residual_inf(&coefficients);
        }
    }
    let solve_seconds = start.elapsed().as_secs_f64();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical("non-finite coefficients"));
    }
    Ok(SolveReport { coefficients, residual_inf, solve_seconds, method, rank_estimate: Some(rank) })
}

/// `Σ c_i ∂^α φ_i(p)` at every point.
pub fn evaluate_solution(
    basis: &SampledBasis,
    coefficients: &[f64],
    points: &[[f64; 2]],
    derivative: MultiIndex,
) -> Result<Vec<f64>> {
    if coefficients.len() != basis.len() {
        return Err(Error::invalid(format!("{} coefficients for {} basis functions", coefficients.len(), basis.len())));
    }
    Ok(points
        .iter()
        .map(|&p| {
            coefficients
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| c * apply_terms([(1.0, derivative)], basis, i, p))
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub max_abs: f64,
    /// `‖pred - exact‖₂ / ‖exact‖₂`, or the absolute norm when `exact = 0`.
    pub rel_l2: f64,
}

pub fn error_metrics(predicted: &[f64], exact: &[f64]) -> Result<ErrorMetrics> {
    if predicted.is_empty() {
        return Err(Error::invalid("error metrics of an empty sample"));
    }
    if predicted.len() != exact.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", predicted.len(), exact.len())));
    }
    let mut sq = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut norm = 0.0;
    for (p, e) in predicted.iter().zip(exact) {
        let d = p - e;
        sq += d * d;
        max_abs = max_abs.max(d.abs());
        norm += e * e;
    }
    let rel_l2 = if norm > 0.0 { (sq / norm).sqrt() } else { sq.sqrt() };
    Ok(ErrorMetrics { mse: sq / predicted.len() as f64, max_abs, rel_l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::RowTag;
    use crate::sampling::{CenterTag, Dimension};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn system(h: Mat<f64>, r: Vec<f64>) -> LeastSquaresSystem {
        let rows = (0..h.nrows()).map(|i| RowTag::Constraint { index: i, weight: 1.0 }).collect();
        LeastSquaresSystem { matrix: h, rhs: r, rows }
    }

    fn svd_opts() -> SolveOptions {
        SolveOptions { method: SolveMethod::SvdPinv, ..Default::default() }
    }

    #[test]
    fn identity_system() {
        for opts in [SolveOptions::default(), svd_opts()] {
            let rep = solve(&system(Mat::identity(3, 3), vec![1.0, 2.0, 3.0]), &opts).unwrap();
            for (c, e) in rep.coefficients.iter().zip([1.0, 2.0, 3.0]) {
                assert_relative_eq!(*c, e, epsilon = 1e-14);
            }
            assert!(rep.residual_inf < 1e-14);
            assert_eq!(rep.rank_estimate, Some(3));
        }
    }

    #[test]
    fn zero_matrix_is_rank_zero() {
        for opts in [SolveOptions::default(), svd_opts()] {
            assert!(matches!(solve(&system(Mat::zeros(4, 2), vec![1.0; 4]), &opts), Err(Error::Numerical(_))));
        }
    }

    #[test]
    fn blocked_path_matches_svd() {
        // wider than one panel so several sketch/pivot rounds run
        let (m, n) = (400, 300);
        let h = Mat::from_fn(m, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 + if i == j { 3.0 } else { 0.0 });
        let r: Vec<f64> = (0..m).map(|i| (i as f64 * 0.1).sin()).collect();
        let sys = system(h, r);
        let a = solve(&sys, &SolveOptions::default()).unwrap();
        let b = solve(&sys, &svd_opts()).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn residual_matches_recomputation() {
        let h = Mat::from_fn(6, 3, |i, j| ((i + 1) * (j + 2)) as f64 + (i as f64).sin());
        let sys = system(h.clone(), vec![1.0, -1.0, 2.0, 0.5, 0.0, 3.0]);
        let rep = solve(&sys, &SolveOptions::default()).unwrap();
        let c = Mat::from_fn(3, 1, |i, _| rep.coefficients[i]);
        let hc = &h * &c;
        let res = (0..6).map(|i| (hc[(i, 0)] - sys.rhs[i]).abs()).fold(0.0, f64::max);
        assert_eq!(rep.residual_inf, res);
    }

    #[test]
    fn svd_is_minimum_norm_on_rank_deficient() {
        // third column duplicates the first
        let h = Mat::from_fn(5, 3, |i, j| match j {
            0 | 2 => i as f64 + 1.0,
            _ => ((i * i) as f64).cos(),
        });
        let sys = system(h, vec![1.0, 2.0, 0.0, -1.0, 0.5]);
        let rep = solve(&sys, &svd_opts()).unwrap();
        assert_eq!(rep.rank_estimate, Some(2));
        let c = &rep.coefficients;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for t in [-1.0, -0.1, 0.05, 0.7] {
            let moved = [c[0] + t, c[1], c[2] - t];
            assert!(norm(&moved) > norm(c));
            assert!((sys.residual_inf(&moved) - rep.residual_inf).abs() < 1e-12);
        }
        assert_relative_eq!(c[0], c[2], epsilon = 1e-12);
    }

    #[test]
    fn evaluate_simple_cases() {
        let basis = SampledBasis {
            dim: Dimension::One,
            centers: vec![[0.3, 0.0]],
            widths: vec![0.2],
            tags: vec![CenterTag::Global],
        };
        let v = evaluate_solution(&basis, &[2.0], &[[0.3, 0.0]], MultiIndex::ZERO).unwrap();
        assert_eq!(v, vec![2.0]);
        let z = evaluate_solution(&basis, &[0.0], &[[0.1, 0.0], [0.9, 0.0]], MultiIndex::ZERO).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        assert!(evaluate_solution(&basis, &[1.0, 2.0], &[[0.1, 0.0]], MultiIndex::ZERO).is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = error_metrics(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(m.mse, 12.5);
        assert_eq!(m.max_abs, 4.0);
        assert_eq!(m.rel_l2, 1.0);
        let z = error_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((z.mse, z.max_abs, z.rel_l2), (0.0, 0.0, 0.0));
        let o = error_metrics(&[1.25, 2.25, -0.75], &[1.0, 2.0, -1.0]).unwrap();
        assert_eq!(o.max_abs, 0.25);
        assert!(error_metrics(&[], &[]).is_err());
        assert!(error_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn qr_agrees_with_svd_when_well_conditioned(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let h = Mat::from_fn(30, 12, |i, j| rng.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
            let r: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sys = system(h, r);
            let a = solve(&sys, &SolveOptions::default()).unwrap();
            let b = solve(&sys, &svd_opts()).unwrap();
            let scale = b.coefficients.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((x - y).abs() <= 1e-8 * scale);
            }
        }
    }
}
