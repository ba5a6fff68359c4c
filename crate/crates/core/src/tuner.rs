//! Bayesian optimization of partition logits against a validation residual.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::assembly::{assemble, residual_rows};
use crate::cases::{BuiltinCase, CaseSettings};
use crate::error::{Error, Result};
use crate::geometry::clip_centers;
use crate::sampling::{softmax_lengths, Dimension, SampledBasis};
use crate::solver::solve;

/// Box over free logits. The last logit of each axis is pinned to 0, which
/// removes the softmax shift invariance; `k` partitions give `k - 1` free
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Partitions along `x`; the remaining coordinates (if any) belong to `y`.
    pub partitions_x: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions_y: Option<usize>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl SearchSpace {
    /// Default box `[-4, 4]` per free coordinate.
    pub fn logit_box(partitions_x: usize, partitions_y: Option<usize>) -> Result<Self> {
        if partitions_x == 0 || partitions_y == Some(0) {
            return Err(Error::invalid("need at least one partition per axis"));
        }
        let d = partitions_x - 1 + partitions_y.map_or(0, |k| k - 1);
        if d == 0 {
            return Err(Error::invalid("a single partition has nothing to tune"));
        }
        Ok(SearchSpace { lower: vec![-4.0; d], upper: vec![4.0; d], partitions_x, partitions_y })
    }

    /// Two 1D partitions with the first length `w ∈ [lo, hi]`.
    pub fn first_fraction(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::invalid(format!("need 0 < lo < hi < 1, got [{lo}, {hi}]")));
        }
        Ok(SearchSpace { lower: vec![logit(lo)], upper: vec![logit(hi)], partitions_x: 2, partitions_y: None })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, t)| self.lower[i] + t * (self.upper[i] - self.lower[i])).collect()
    }

    #[cfg(test)]
    fn to_unit(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i])).collect()
    }

    /// Partition lengths for each axis from free logits.
    pub fn lengths(&self, z: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        if z.len() != self.dim() {
            return Err(Error::invalid(format!("expected {} logits, got {}", self.dim(), z.len())));
        }
        let kx = self.partitions_x - 1;
        let axis = |free: &[f64]| {
            let mut full = free.to_vec();
            full.push(0.0);
            softmax_lengths(&full)
        };
        let lx = axis(&z[..kx])?;
        let ly = match self.partitions_y {
            Some(_) => Some(axis(&z[kx..])?),
            None => None,
        };
        Ok((lx, ly))
    }
}

/// `J(ℓ) = ‖H_val c*(ℓ) - r_val‖_∞` for a built-in case.
#[derive(Clone, Debug)]
pub struct ValidationObjective {
    pub case: BuiltinCase,
    pub validation: Vec<[f64; 2]>,
    pub space: SearchSpace,
}

impl ValidationObjective {
    /// Uses a validation grid of `factor` times the collocation count,
    /// cell-centred so that it never shares coordinates with the centers.
    pub fn new(case: BuiltinCase, space: SearchSpace, factor: usize) -> Result<Self> {
        let validation = default_validation_points(&case, factor)?;
        Ok(ValidationObjective { case, validation, space })
    }

    pub fn settings_for(&self, z: &[f64]) -> Result<CaseSettings> {
        let (lx, ly) = self.space.lengths(z)?;
        let mut s = self.case.settings.clone();
        s.lengths = lx;
        if ly.is_some() {
            s.lengths_y = ly;
        }
        Ok(s)
    }

    pub fn basis_for(&self, z: &[f64]) -> Result<SampledBasis> {
        let s = self.settings_for(z)?;
        let basis = s.sample(self.case.id)?;
        match &self.case.problem.geometry {
            Some(sdf) => clip_centers(&basis, sdf),
            None => Ok(basis),
        }
    }

    /// Evaluates `J`; any failure maps to `+∞`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.try_eval(z).unwrap_or(f64::INFINITY)
    }

    pub fn try_eval(&self, z: &[f64]) -> Result<f64> {
        let basis = self.basis_for(z)?;
        let system = assemble(&self.case.problem, &basis, &basis.centers)?;
        let report = solve(&system, &self.case.settings.solver)?;
        drop(system);
        let rows = residual_rows(&self.case.problem, &basis, &report.coefficients, &self.validation)?;
        let j = rows.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        if j.is_finite() {
            Ok(j)
        } else {
            Err(Error::numerical("non-finite validation residual"))
        }
    }
}

/// Cell-centred grid with `factor · |collocation|` points (per-axis
/// `factor^{1/2}` refinement in 2D), masked to the domain interior.
pub fn default_validation_points(case: &BuiltinCase, factor: usize) -> Result<Vec<[f64; 2]>> {
    if factor == 0 {
        return Err(Error::invalid("validation factor must be positive"));
    }
    let b = &case.problem.bounds;
    let n = case.collocation.len() * factor;
    let pts: Vec<[f64; 2]> = match case.problem.dimension {
        Dimension::One => (0..n).map(|i| [b.map(0, (i as f64 + 0.5) / n as f64), 0.0]).collect(),
        Dimension::Two => {
            let side = ((case.settings.sample(case.id)?.len() * factor) as f64).sqrt().ceil() as usize;
            let mut v = Vec::with_capacity(side * side);
            for i in 0..side {
                for j in 0..side {
                    v.push([b.map(0, (i as f64 + 0.5) / side as f64), b.map(1, (j as f64 + 0.5) / side as f64)]);
                }
            }
            match &case.problem.geometry {
                Some(sdf) => v.into_iter().filter(|&p| sdf.value_at(p) > 0.0).collect(),
                None => v,
            }
        }
    };
    Ok(pts)
}

/// Exact GP regression with a squared-exponential kernel on standardized
/// outputs.
#[derive(Clone, Debug)]
pub struct GpSurrogate {
    inputs: Vec<Vec<f64>>,
    mean: f64,
    scale: f64,
    length_scale: f64,
    signal_var: f64,
    noise_var: f64,
    chol: Mat<f64>,
    alpha: Vec<f64>,
}

const MAX_JITTER: f64 = 1e-4;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn forward(l: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..y.len() {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

fn backward_t(l: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in (0..y.len()).rev() {
        for k in i + 1..y.len() {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

impl GpSurrogate {
    /// Fits with fixed hyperparameters (in standardized output units).
    pub fn with_hyperparameters(
        inputs: Vec<Vec<f64>>,
        outputs: &[f64],
        length_scale: f64,
        signal_var: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::invalid("GP needs matching, nonempty inputs and outputs"));
        }
        let n = outputs.len();
        let mean = outputs.iter().sum::<f64>() / n as f64;
        let var = outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y: Vec<f64> = outputs.iter().map(|v| (v - mean) / scale).collect();

        let kernel = Mat::from_fn(n, n, |i, j| {
            signal_var * (-sq_dist(&inputs[i], &inputs[j]) / (2.0 * length_scale * length_scale)).exp()
        });
        let mut jitter = 0.0;
        let chol = loop {
            let k = Mat::from_fn(n, n, |i, j| kernel[(i, j)] + if i == j { noise_var + jitter } else { 0.0 });
            match k.llt(Side::Lower) {
                Ok(f) => break f.L().to_owned(),
                Err(_) if jitter < MAX_JITTER => jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 },
                Err(_) => return Err(Error::numerical("GP kernel matrix not positive definite after jitter")),
            }
        };
        let alpha = backward_t(&chol, &forward(&chol, &y));
        Ok(GpSurrogate { inputs, mean, scale, length_scale, signal_var, noise_var, chol, alpha })
    }

    /// Maximizes the marginal likelihood over a log-spaced grid of length
    /// scales and signal variances.
    pub fn fit(inputs: Vec<Vec<f64>>, outputs: &[f64], noise_var: f64) -> Result<Self> {
        let mut best: Option<(f64, GpSurrogate)> = None;
        for a in 0..13 {
            let ls = 10f64.powf(-2.0 + 0.25 * a as f64);
            for b in 0..9 {
                let sv = 10f64.powf(-1.0 + 0.25 * b as f64);
                let Ok(gp) = GpSurrogate::with_hyperparameters(inputs.clone(), outputs, ls, sv, noise_var) else {
                    continue;
                };
                let lml = gp.log_marginal_likelihood();
                if lml.is_finite() && best.as_ref().is_none_or(|(v, _)| lml > *v) {
                    best = Some((lml, gp));
                }
            }
        }
        best.map(|(_, gp)| gp).ok_or_else(|| Error::numerical("no GP hyperparameters gave a usable fit"))
    }

    fn log_marginal_likelihood(&self) -> f64 {
        let n = self.alpha.len();
        let y: Vec<f64> = {
            // K alpha = y, recovered as L Lᵀ alpha
            let mut lt_a = vec![0.0; n];
            for i in 0..n {
                for k in i..n {
                    lt_a[i] += self.chol[(k, i)] * self.alpha[k];
                }
            }
            (0..n).map(|i| (0..=i).map(|k| self.chol[(i, k)] * lt_a[k]).sum()).collect()
        };
        let fit: f64 = y.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum::<f64>() * 2.0;
        -0.5 * fit - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Posterior `(mean, variance)` in output units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| self.signal_var * (-sq_dist(xi, x) / (2.0 * self.length_scale * self.length_scale)).exp())
            .collect();
        let mu: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward(&self.chol, &k);
        let var = (self.signal_var - v.iter().map(|t| t * t).sum::<f64>()).max(0.0);
        (self.mean + self.scale * mu, self.scale * self.scale * var)
    }
}

/// Expected improvement of a minimization step.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let s = variance.max(0.0).sqrt();
    let gain = best - mean;
    if s == 0.0 {
        return gain.max(0.0);
    }
    let z = gain / s;
    let n = Normal::standard();
    (gain * n.cdf(z) + s * n.pdf(z)).max(0.0)
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Randomly shifted Halton points in the unit cube, indices `start..start+n`.
fn halton(start: u64, n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "search dimension too large for the quasi-random design");
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..n as u64)
        .map(|i| (0..dim).map(|d| (radical_inverse(start + i + 1, PRIMES[d]) + shift[d]).fract()).collect())
        .collect()
}

pub const INITIAL_DESIGN: usize = 5;
pub const EI_CANDIDATES: usize = 2048;
const GP_NOISE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub iteration: usize,
    pub logits: Vec<f64>,
    pub lengths: Vec<f64>,
    pub j: f64,
    pub best_j: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub records: Vec<BoRecord>,
    pub incumbent: usize,
}

impl BoTrace {
    pub fn best(&self) -> &BoRecord {
        &self.records[self.incumbent]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let k = self.records.first().map_or(0, |r| r.lengths.len());
        let cols: Vec<String> = (0..k).map(|i| format!("l{i}")).collect();
        writeln!(f, "iteration,{},j,best_j,seconds", cols.join(",")).map_err(io)?;
        for r in &self.records {
            let ls: Vec<String> = r.lengths.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(f, "{},{},{:.17e},{:.17e},{:.6}", r.iteration, ls.join(","), r.j, r.best_j, r.seconds)
                .map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

#[derive(Clone, Debug)]
pub struct BoOutcome {
    pub best_logits: Vec<f64>,
    pub best_j: f64,
    pub trace: BoTrace,
}

/// Minimizes `objective` over `space`: a quasi-random initial design, then
/// one expected-improvement maximizer per iteration. Deterministic in `seed`.
pub fn optimize(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    mut objective: impl FnMut(&[f64]) -> f64,
) -> Result<BoOutcome> {
    if budget < INITIAL_DESIGN {
        return Err(Error::invalid(format!("budget must be at least {INITIAL_DESIGN}, got {budget}")));
    }
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut values: Vec<f64> = Vec::with_capacity(budget);
    let mut records = Vec::with_capacity(budget);
    let mut incumbent = 0;

    let mut record = |it: usize,
                      u: Vec<f64>,
                      units: &mut Vec<Vec<f64>>,
                      values: &mut Vec<f64>,
                      incumbent: &mut usize|
     -> Result<()> {
        let z = space.from_unit(&u);
        let (lx, ly) = space.lengths(&z)?;
        let t = Instant::now();
        let j = objective(&z);
        let seconds = t.elapsed().as_secs_f64();
        let j = if j.is_nan() { f64::INFINITY } else { j };
        if it > 0 && j < values[*incumbent] {
            *incumbent = it;
        }
        values.push(j);
        units.push(u);
        let mut lengths = lx;
        lengths.extend(ly.unwrap_or_default());
        records.push(BoRecord { iteration: it, logits: z, lengths, j, best_j: values[*incumbent], seconds });
        Ok(())
    };

    for (it, u) in halton(0, INITIAL_DESIGN, dim, &mut rng).into_iter().enumerate() {
        record(it, u, &mut units, &mut values, &mut incumbent)?;
    }
    for it in INITIAL_DESIGN..budget {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite() && *v > 0.0).collect();
        let candidates = halton((it * EI_CANDIDATES) as u64, EI_CANDIDATES, dim, &mut rng);
        let next = if finite.is_empty() {
            candidates[0].clone()
        } else {
            let worst = finite.iter().map(|v| v.ln()).fold(f64::NEG_INFINITY, f64::max);
            let logs: Vec<f64> = values
                .iter()
                .map(|v| {
                    if v.is_finite() && *v > 0.0 {
                        v.ln()
                    } else if *v == 0.0 {
                        f64::MIN_POSITIVE.ln()
                    } else {
                        worst + 1.0
                    }
                })
                .collect();
            let best = logs.iter().copied().fold(f64::INFINITY, f64::min);
            let gp = GpSurrogate::fit(units.clone(), &logs, GP_NOISE)?;
            let mut top = (f64::NEG_INFINITY, 0);
            for (c, u) in candidates.iter().enumerate() {
                let (m, v) = gp.posterior(u);
                let ei = expected_improvement(m, v, best);
                if ei > top.0 {
                    top = (ei, c);
                }
            }
            candidates[top.1].clone()
        };
        record(it, next, &mut units, &mut values, &mut incumbent)?;
    }

    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::numerical("every objective evaluation failed"));
    }
    let trace = BoTrace { records, incumbent };
    let best = trace.best();
    Ok(BoOutcome { best_logits: best.logits.clone(), best_j: best.j, trace })
}

/// Runs [`optimize`] on a validation objective.
pub fn optimize_case(obj: &ValidationObjective, budget: usize, seed: u64) -> Result<BoOutcome> {
    optimize(&obj.space, budget, seed, |z| obj.eval(z))
}
