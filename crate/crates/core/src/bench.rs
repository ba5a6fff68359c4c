//! End-to-end benchmark runs, acceptance checks and CSV artifacts.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::assemble;
use crate::cases::{builtin_case, BuiltinCase, CaseId, CaseSettings, TC7_NU};
use crate::error::{Error, Result};
use crate::geometry::{write_boundary_csv, FlowerParams};
use crate::kernel::{fourier_magnitude, MultiIndex};
use crate::sampling::{CenterTag, Dimension, SampledBasis};
use crate::solver::{error_metrics, evaluate_solution, solve, ErrorMetrics, SolveMethod};

/// Everything needed to re-run a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub case: CaseId,
    pub settings: CaseSettings,
}

/// `SolveReport` without the coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub residual_inf: f64,
    pub solve_seconds: f64,
    pub method: SolveMethod,
    pub rank_estimate: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, passed: value <= threshold }
    }

    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, passed: value < threshold }
    }
}

/// Direction-consistency of the prediction across the boundary layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub window: [f64; 2],
    /// Largest step against the exact solution's direction of change.
    pub max_violation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseReport {
    pub config: CaseConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<FlowerParams>,
    pub basis_size: usize,
    pub partition_centers: usize,
    pub global_centers: usize,
    pub rows: usize,
    pub solve: SolveSummary,
    pub metrics: ErrorMetrics,
    /// Flower cases: errors at the resampled boundary points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_metrics: Option<ErrorMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<LayerCheck>,
    /// tc3: error amplitude at the two forcing frequencies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_spectrum: Option<[f64; 2]>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub points: Vec<[f64; 2]>,
    #[serde(skip)]
    pub predicted: Vec<f64>,
    #[serde(skip)]
    pub exact: Vec<f64>,
    #[serde(skip)]
    pub case_data: Option<Box<BuiltinCase>>,
    #[serde(skip)]
    pub coefficients: Vec<f64>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// Evaluation points of a case.
pub fn evaluation_grid(case: &BuiltinCase) -> Vec<[f64; 2]> {
    let b = &case.problem.bounds;
    match case.id {
        CaseId::Tc1 | CaseId::Tc2 | CaseId::Tc3 => {
            linspace(b.lower[0], b.upper[0], 2000).into_iter().map(|x| [x, 0.0]).collect()
        }
        CaseId::Tc4 | CaseId::Tc5 | CaseId::Tc6 => {
            let n = if case.id == CaseId::Tc4 { 150 } else { 220 };
            let xs = linspace(0.0, 1.0, n);
            let mut pts = Vec::with_capacity(n * n);
            for &y in &xs {
                for &x in &xs {
                    pts.push([x, y]);
                }
            }
            match &case.problem.geometry {
                Some(sdf) => pts.into_iter().filter(|&p| sdf.value_at(p) > 0.0).collect(),
                None => pts,
            }
        }
        CaseId::Tc7a | CaseId::Tc7b => {
            let layer = case.id.layer_at().unwrap();
            let mut xs = linspace(0.0, 1.0, 4000);
            // 1000 offsets geometrically spaced from 10ν down to 0.01ν
            for k in 0..1000 {
                let s = 10.0 * TC7_NU * 1e-3f64.powf(k as f64 / 999.0);
                xs.push(if layer == 1.0 { 1.0 - s } else { s });
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs.into_iter().map(|x| [x, 0.0]).collect()
        }
    }
}

/// Amplitude of the `ω` component of samples on a periodic uniform grid.
pub fn spectral_amplitude(xs: &[f64], values: &[f64], omega: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, v) in xs.iter().zip(values) {
        re += v * (omega * x).cos();
        im -= v * (omega * x).sin();
    }
    2.0 * re.hypot(im) / xs.len() as f64
}

fn layer_check(id: CaseId, points: &[[f64; 2]], predicted: &[f64], exact: &[f64]) -> Option<LayerCheck> {
    let window = match id {
        CaseId::Tc7a => [0.99, 1.0],
        CaseId::Tc7b => [0.0, 0.01],
        _ => return None,
    };
    let idx: Vec<usize> =
        (0..points.len()).filter(|&i| points[i][0] >= window[0] && points[i][0] <= window[1]).collect();
    let mut worst: f64 = 0.0;
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dir = (exact[b] - exact[a]).signum();
        worst = worst.max(-dir * (predicted[b] - predicted[a]));
    }
    Some(LayerCheck { window, max_violation: worst })
}

fn acceptance_checks(r: &CaseReport) -> Vec<Check> {
    let res = r.solve.residual_inf;
    let m = &r.metrics;
    let mut c = Vec::new();
    match r.config.case {
        CaseId::Tc1 => {
            c.push(Check::at_most("residual_inf", res, 1e-5));
            c.push(Check::at_most("max_error", m.max_abs, 1e-5));
            c.push(Check::below("solve_seconds", r.solve.solve_seconds, 5.0));
        }
        CaseId::Tc2 => {
            c.push(Check::at_most("residual_inf", res, 1e-4));
            c.push(Check::at_most("max_error", m.max_abs, 1e-4));
        }
        CaseId::Tc3 => {
            c.push(Check::at_most("residual_inf", res, 1e-4));
            let [a1, a15] = r.error_spectrum.unwrap_or([f64::INFINITY; 2]);
            c.push(Check::at_most("error_amplitude_omega_1", a1, 1e-4));
            c.push(Check::at_most("error_amplitude_omega_15", a15, 1e-4));
        }
        CaseId::Tc4 => {
            c.push(Check::at_most("mse", m.mse, 1e-9));
            c.push(Check::below("solve_seconds", r.solve.solve_seconds, 30.0));
        }
        CaseId::Tc5 => {
            c.push(Check::at_most("mse", m.mse, 1e-7));
            let b = r.boundary_metrics.map_or(f64::INFINITY, |b| b.max_abs);
            c.push(Check::at_most("boundary_over_interior_max_error", b / m.max_abs, 10.0));
        }
        CaseId::Tc6 => c.push(Check::at_most("mse", m.mse, 1e-4)),
        CaseId::Tc7a | CaseId::Tc7b => {
            c.push(Check::at_most("max_error", m.max_abs, 5e-3));
            let v = r.layer.as_ref().map_or(f64::INFINITY, |l| l.max_violation);
            c.push(Check::at_most("layer_monotonicity_violation", v, 1e-4));
        }
    }
    c
}

/// Builds, solves and evaluates one case.
pub fn run_case(id: CaseId, settings: &CaseSettings) -> Result<CaseReport> {
    let case = builtin_case(id, settings).map_err(|e| context(id, e))?;
    let system = assemble(&case.problem, &case.basis, &case.collocation).map_err(|e| context(id, e))?;
    let rows = system.nrows();
    let report = solve(&system, &settings.solver).map_err(|e| context(id, e))?;
    drop(system);

    let points = evaluation_grid(&case);
    let predicted = evaluate_solution(&case.basis, &report.coefficients, &points, MultiIndex::ZERO)?;
    let exact: Vec<f64> = points.iter().map(|&p| case.exact.value(p)).collect();
    let metrics = error_metrics(&predicted, &exact)?;
    if predicted.iter().any(|v| !v.is_finite()) {
        return Err(context(id, Error::numerical("non-finite prediction on the evaluation grid")));
    }

    let boundary_metrics = match &case.boundary {
        Some(b) => {
            let p = evaluate_solution(&case.basis, &report.coefficients, &b.points, MultiIndex::ZERO)?;
            let e: Vec<f64> = b.points.iter().map(|&q| case.exact.value(q)).collect();
            Some(error_metrics(&p, &e)?)
        }
        None => None,
    };
    let error_spectrum = (id == CaseId::Tc3).then(|| {
        // periodic grid: drop the duplicated right endpoint
        let n = points.len() - 1;
        let xs: Vec<f64> = points[..n].iter().map(|p| p[0]).collect();
        let err: Vec<f64> = (0..n).map(|i| predicted[i] - exact[i]).collect();
        [spectral_amplitude(&xs, &err, 1.0), spectral_amplitude(&xs, &err, 15.0)]
    });
    let layer = layer_check(id, &points, &predicted, &exact);

    let mut out = CaseReport {
        config: CaseConfig { case: id, settings: settings.clone() },
        geometry: case.settings.flower.filter(|_| id.has_flower()),
        basis_size: case.basis.len(),
        partition_centers: case.basis.partition_count(),
        global_centers: case.basis.global_count(),
        rows,
        solve: SolveSummary {
            residual_inf: report.residual_inf,
            solve_seconds: report.solve_seconds,
            method: report.method,
            rank_estimate: report.rank_estimate,
        },
        metrics,
        boundary_metrics,
        layer,
        error_spectrum,
        checks: Vec::new(),
        points,
        predicted,
        exact,
        case_data: Some(Box::new(case)),
        coefficients: report.coefficients,
    };
    out.checks = acceptance_checks(&out);
    Ok(out)
}

fn context(id: CaseId, e: Error) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{id}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{id}: {m}")),
        Error::Geometry(m) => Error::Geometry(format!("{id}: {m}")),
        Error::Assembly { row, message } => Error::Assembly { row, message: format!("{id}: {message}") },
        other => other,
    }
}

/// Width histogram plus Fourier magnitude curves for representative widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectraReport {
    /// `(lower edge, upper edge, count)` on log-spaced bins.
    pub histogram: Vec<(f64, f64, usize)>,
    /// `[min, median, max]` widths.
    pub sigmas: [f64; 3],
    pub omegas: Vec<f64>,
    /// One magnitude curve per entry of `sigmas`.
    pub curves: [Vec<f64>; 3],
}

pub const SPECTRA_BINS: usize = 40;

pub fn spectra_report(basis: &SampledBasis, omegas: &[f64]) -> Result<SpectraReport> {
    if basis.is_empty() {
        return Err(Error::invalid("spectra of an empty basis"));
    }
    let mut w = basis.widths.clone();
    w.sort_by(f64::total_cmp);
    let (lo, hi) = (w[0], w[w.len() - 1]);
    let median = w[w.len() / 2];
    let histogram = if hi / lo < 1.0 + 1e-9 {
        vec![(lo, hi, w.len())]
    } else {
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / SPECTRA_BINS as f64;
        let mut counts = vec![0usize; SPECTRA_BINS];
        for s in &w {
            let k = (((s.ln() - a) / step) as usize).min(SPECTRA_BINS - 1);
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, n)| ((a + step * k as f64).exp(), (a + step * (k + 1) as f64).exp(), n))
            .collect()
    };
    let sigmas = [lo, median, hi];
    let curves = sigmas.map(|s| omegas.iter().map(|&o| fourier_magnitude(s, o)).collect());
    Ok(SpectraReport { histogram, sigmas, omegas: omegas.to_vec(), curves })
}

/// Log-spaced `ω` grid reaching well past the narrowest kernel's bandwidth.
pub fn default_omegas(basis: &SampledBasis) -> Vec<f64> {
    let smin = basis.widths.iter().copied().fold(f64::INFINITY, f64::min);
    let top = (10.0 / smin).log10();
    (0..=400).map(|i| 10f64.powf(-1.0 + (top + 1.0) * i as f64 / 400.0)).collect()
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_spectra(report: &SpectraReport, dir: &Path) -> Result<()> {
    let path = dir.join("spectra.csv");
    let io = |e| Error::io(&path, e);
    let mut f = csv_writer(&path)?;
    let [a, b, c] = report.sigmas;
    writeln!(f, "omega,sigma_min={a:.6e},sigma_median={b:.6e},sigma_max={c:.6e}").map_err(io)?;
    for (i, o) in report.omegas.iter().enumerate() {
        writeln!(f, "{o:.17e},{:.17e},{:.17e},{:.17e}", report.curves[0][i], report.curves[1][i], report.curves[2][i])
            .map_err(io)?;
    }
    f.flush().map_err(io)?;

    let path = dir.join("sigma_histogram.csv");
    let io = |e| Error::io(&path, e);
    let mut f = csv_writer(&path)?;
    writeln!(f, "sigma_lo,sigma_hi,count").map_err(io)?;
    for (lo, hi, n) in &report.histogram {
        writeln!(f, "{lo:.17e},{hi:.17e},{n}").map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Writes `solution.csv`, `report.json`, `config.json` and, where it
/// applies, `boundary.csv` and the spectra files into `dir`.
pub fn write_case_artifacts(report: &CaseReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("solution.csv");
    let io = |e| Error::io(&path, e);
    let mut f = csv_writer(&path)?;
    let two_d = report.config.case.dimension() == Dimension::Two;
    writeln!(f, "{}", if two_d { "x,y,predicted,exact,abs_error" } else { "x,predicted,exact,abs_error" })
        .map_err(io)?;
    for (i, p) in report.points.iter().enumerate() {
        let (u, e) = (report.predicted[i], report.exact[i]);
        if two_d {
            writeln!(f, "{:.17e},{:.17e},{u:.17e},{e:.17e},{:.17e}", p[0], p[1], (u - e).abs()).map_err(io)?;
        } else {
            writeln!(f, "{:.17e},{u:.17e},{e:.17e},{:.17e}", p[0], (u - e).abs()).map_err(io)?;
        }
    }
    f.flush().map_err(io)?;

    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("config.json"), &report.config)?;

    if let Some(case) = &report.case_data {
        if let Some(b) = &case.boundary {
            write_boundary_csv(b, &dir.join("boundary.csv"))?;
        }
        let spectra = spectra_report(&case.basis, &default_omegas(&case.basis))?;
        write_spectra(&spectra, dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: CaseId,
    pub basis_size: usize,
    pub residual_inf: f64,
    pub mse: f64,
    pub max_error: f64,
    pub solve_seconds: f64,
    pub passed: bool,
}

/// Runs every case with its defaults and writes the artifact tree.
pub fn run_all(output_dir: &Path) -> Result<Vec<SummaryRow>> {
    run_cases(output_dir, &CaseId::ALL, |id| CaseSettings::defaults(id))
}

pub fn run_cases(
    output_dir: &Path,
    ids: &[CaseId],
    settings: impl Fn(CaseId) -> CaseSettings,
) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        let report = run_case(id, &settings(id))?;
        write_case_artifacts(&report, &output_dir.join(id.as_str()))?;
        rows.push(SummaryRow {
            case: id,
            basis_size: report.basis_size,
            residual_inf: report.solve.residual_inf,
            mse: report.metrics.mse,
            max_error: report.metrics.max_abs,
            solve_seconds: report.solve.solve_seconds,
            passed: report.passed(),
        });
    }
    write_summary(&rows, &output_dir.join("summary.csv"))?;
    Ok(rows)
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = csv_writer(path)?;
    writeln!(f, "case,basis_size,residual_inf,mse,max_error,passed,solve_seconds").map_err(io)?;
    for r in rows {
        writeln!(
            f,
            "{},{},{:.6e},{:.6e},{:.6e},{},{:.3}",
            r.case, r.basis_size, r.residual_inf, r.mse, r.max_error, r.passed, r.solve_seconds
        )
        .map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Count of partition-tagged centers per partition index.
pub fn centers_per_partition(basis: &SampledBasis) -> Vec<usize> {
    let mut counts = Vec::new();
    for t in &basis.tags {
        if let CenterTag::Partition(j) = *t {
            if counts.len() <= j {
                counts.resize(j + 1, 0);
            }
            counts[j] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_1d, DomainBounds, PartitionSpec1D};

    #[test]
    fn spectral_amplitude_recovers_a_sinusoid() {
        let n = 2000;
        let xs: Vec<f64> =
            (0..n).map(|i| -2.0 * std::f64::consts::PI + 4.0 * std::f64::consts::PI * i as f64 / n as f64).collect();
        let v: Vec<f64> = xs.iter().map(|x| 0.3 * (15.0 * x).sin() + 0.01 * x.cos()).collect();
        assert!((spectral_amplitude(&xs, &v, 15.0) - 0.3).abs() < 1e-12);
        assert!((spectral_amplitude(&xs, &v, 1.0) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn tc7_grids_sample_the_layer() {
        for id in [CaseId::Tc7a, CaseId::Tc7b] {
            let case =
                builtin_case(id, &CaseSettings { points_per_partition: 10, ..CaseSettings::defaults(id) }).unwrap();
            let g = evaluation_grid(&case);
            let layer = id.layer_at().unwrap();
            let near = g.iter().filter(|p| (p[0] - layer).abs() <= 10.0 * TC7_NU).count();
            assert!(near >= 1000, "{id}: {near}");
            assert!(g.windows(2).all(|w| w[0][0] < w[1][0]));
        }
    }

    #[test]
    fn layer_check_flags_reversals() {
        let pts: Vec<[f64; 2]> = [0.991, 0.995, 0.999].iter().map(|&x| [x, 0.0]).collect();
        let exact = [0.0, 0.1, 0.9];
        let good = layer_check(CaseId::Tc7a, &pts, &[0.0, 0.2, 0.8], &exact).unwrap();
        assert_eq!(good.max_violation, 0.0);
        let bad = layer_check(CaseId::Tc7a, &pts, &[0.0, 0.2, 0.15], &exact).unwrap();
        assert!((bad.max_violation - 0.05).abs() < 1e-12);
    }

    #[test]
    fn spectra_modes() {
        let spec = PartitionSpec1D::new(vec![0.95, 0.05], 1000, 5.0).unwrap();
        let basis = sample_1d(&spec, &DomainBounds::interval(0.0, 1.0).unwrap());
        let r = spectra_report(&basis, &default_omegas(&basis)).unwrap();
        let occupied: Vec<&(f64, f64, usize)> = r.histogram.iter().filter(|b| b.2 > 0).collect();
        // fine partition, global grid (σ = 2.5e-3) and coarse partition
        assert_eq!(occupied.len(), 3);
        assert!(occupied[0].0 <= 2.5e-4 && 2.5e-4 <= occupied[0].1);
        assert!(occupied[2].0 <= 4.75e-3 && 4.75e-3 <= occupied[2].1 * (1.0 + 1e-12));
        for i in 1..r.omegas.len() {
            assert!(r.curves[2][i] <= r.curves[0][i]);
        }

        let single = PartitionSpec1D::new(vec![1.0], 50, 1.0).unwrap();
        let b = sample_1d(&single, &DomainBounds::interval(0.0, 1.0).unwrap());
        let r = spectra_report(&b, &[0.0, 1.0]).unwrap();
        assert_eq!(r.histogram.iter().filter(|b| b.2 > 0).count(), 1);
    }
}
