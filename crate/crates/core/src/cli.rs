//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::assembly::assemble;
use crate::bench::{
    default_omegas, run_case, run_cases, spectra_report, write_case_artifacts, write_json, write_spectra,
};
use crate::cases::{builtin_case, CaseId, CaseSettings};
use crate::config::{ConfigFile, SettingsPatch};
use crate::error::{Error, Result};
use crate::kernel::MultiIndex;
use crate::solver::{error_metrics, evaluate_solution, solve, ErrorMetrics, SolveMethod};
use crate::tuner::{optimize_case, SearchSpace, ValidationObjective};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ACCEPTANCE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Soft-partition Gaussian RBF collocation solver.
///
/// Environment variables are not consulted; all computation is
/// single-threaded and deterministic.
#[derive(Debug, Parser)]
#[command(name = "softrbf", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one built-in case or a problem from --config.
    Solve(SolveArgs),
    /// Run all built-in cases and write summary.csv.
    Bench(BenchArgs),
    /// Bayesian optimization of the partition lengths.
    Bo(BoArgs),
    /// Width histogram and Fourier magnitude curves of a case's basis.
    Spectra(SpectraArgs),
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Centers per partition (N).
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Width scale k_σ.
    #[arg(long)]
    pub ksigma: Option<f64>,
    /// Boundary row weight.
    #[arg(long)]
    pub wbc: Option<f64>,
    /// Partition lengths, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "logits", allow_hyphen_values = true)]
    pub lengths: Option<Vec<f64>>,
    /// Partition logits, comma separated (softmax-mapped).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub logits: Option<Vec<f64>>,
    /// y-axis partition lengths for 2D cases.
    #[arg(long, value_delimiter = ',')]
    pub lengths_y: Option<Vec<f64>>,
    /// Boundary points for 2D cases.
    #[arg(long)]
    pub boundary_points: Option<usize>,
    /// SDF grid resolution for the flower cases.
    #[arg(long)]
    pub sdf_resolution: Option<usize>,
    /// Disable SDF weighting of PDE rows.
    #[arg(long)]
    pub uniform_weights: bool,
    /// Least-squares method.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<SolveMethod>,
}

fn parse_method(s: &str) -> std::result::Result<SolveMethod, String> {
    match s {
        "qr" => Ok(SolveMethod::Qr),
        "svd_pinv" | "svd" => Ok(SolveMethod::SvdPinv),
        _ => Err(format!("unknown method `{s}` (qr or svd_pinv)")),
    }
}

impl Overrides {
    fn patch(&self) -> SettingsPatch {
        SettingsPatch {
            lengths: self.lengths.clone(),
            logits: self.logits.clone(),
            lengths_y: self.lengths_y.clone(),
            points_per_partition: self.n,
            width_scale: self.ksigma,
            w_bc: self.wbc,
            boundary_points: self.boundary_points,
            sdf_resolution: self.sdf_resolution,
            uniform_weights: self.uniform_weights.then_some(true),
            ..Default::default()
        }
    }

    fn apply_method(&self, s: &mut CaseSettings) {
        if let Some(m) = self.method {
            s.solver.method = m;
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub case: Option<CaseId>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the assembled [H | r] in Matrix Market format.
    #[arg(long)]
    pub dump_system: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Subset of cases, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cases: Option<Vec<CaseId>>,
}

#[derive(Debug, Args)]
pub struct BoArgs {
    #[arg(long)]
    pub case: Option<CaseId>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Search the first of two lengths inside `lo,hi` instead of a logit box.
    #[arg(long, value_delimiter = ',')]
    pub w_range: Option<Vec<f64>>,
    /// Validation points per collocation point.
    #[arg(long)]
    pub validation_factor: Option<usize>,
    /// Exit with status 1 when the best J exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub target_j: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub case: Option<CaseId>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
        Error::Assembly { .. } | Error::Numerical(_) | Error::Geometry(_) => EXIT_NUMERICAL,
    }
}

fn load(config: &Option<PathBuf>) -> Result<ConfigFile> {
    match config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn resolve_case(flag: Option<CaseId>, file: &ConfigFile) -> Result<CaseId> {
    flag.or(file.case).ok_or_else(|| Error::config("no case given (use --case or a config with `case`)"))
}

fn out_dir(flag: &Option<PathBuf>, file: &ConfigFile) -> Option<PathBuf> {
    flag.clone().or_else(|| file.out.clone())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Bo(a) => cmd_bo(a),
        Command::Spectra(a) => cmd_spectra(a),
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let file = load(&a.config)?;
    if a.case.is_none() {
        if let Some(p) = &file.problem {
            return solve_custom(p, &file, &a);
        }
    }
    let id = resolve_case(a.case, &file)?;
    let mut settings = file.case_settings(id, &a.overrides.patch())?;
    a.overrides.apply_method(&mut settings);
    if let Some(path) = &a.dump_system {
        let case = builtin_case(id, &settings)?;
        assemble(&case.problem, &case.basis, &case.collocation)?.write_matrix_market(path)?;
    }
    let report = run_case(id, &settings)?;
    if let Some(dir) = out_dir(&a.out, &file) {
        write_case_artifacts(&report, &dir)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::numerical(e.to_string()))?);
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("acceptance: {id} {} = {:.3e} exceeds {:.1e}", c.name, c.value, c.threshold);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_ACCEPTANCE })
}

#[derive(Serialize)]
struct CustomReport<'a> {
    settings: &'a CaseSettings,
    basis_size: usize,
    residual_inf: f64,
    solve_seconds: f64,
    method: SolveMethod,
    metrics: Option<ErrorMetrics>,
}

fn solve_custom(p: &crate::config::CustomProblem, file: &ConfigFile, a: &SolveArgs) -> Result<u8> {
    // a custom problem starts from the one-dimensional defaults
    let mut settings = CaseSettings::defaults(CaseId::Tc1);
    file.settings.clone().merge(&a.overrides.patch()).apply(&mut settings)?;
    a.overrides.apply_method(&mut settings);
    let problem = p.to_spec(settings.w_bc)?;
    let basis = settings.sample_in(problem.dimension, &problem.bounds)?;
    let system = assemble(&problem, &basis, &basis.centers)?;
    if let Some(path) = &a.dump_system {
        system.write_matrix_market(path)?;
    }
    let rep = solve(&system, &settings.solver)?;
    let b = &problem.bounds;
    let points: Vec<[f64; 2]> = match problem.dimension {
        crate::sampling::Dimension::One => (0..2000).map(|i| [b.map(0, i as f64 / 1999.0), 0.0]).collect(),
        crate::sampling::Dimension::Two => {
            (0..150 * 150).map(|k| [b.map(0, (k % 150) as f64 / 149.0), b.map(1, (k / 150) as f64 / 149.0)]).collect()
        }
    };
    let predicted = evaluate_solution(&basis, &rep.coefficients, &points, MultiIndex::ZERO)?;
    let metrics = match &p.exact {
        Some(ex) => Some(error_metrics(&predicted, &points.iter().map(|&q| ex.eval(q)).collect::<Vec<_>>())?),
        None => None,
    };
    let report = CustomReport {
        settings: &settings,
        basis_size: basis.len(),
        residual_inf: rep.residual_inf,
        solve_seconds: rep.solve_seconds,
        method: rep.method,
        metrics,
    };
    if let Some(dir) = out_dir(&a.out, file) {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(&dir.join("report.json"), &report)?;
        write_points(&dir.join("solution.csv"), &points, &predicted)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::numerical(e.to_string()))?);
    Ok(EXIT_OK)
}

fn write_points(path: &Path, points: &[[f64; 2]], values: &[f64]) -> Result<()> {
    let mut text = String::from("x,y,predicted\n");
    for (p, v) in points.iter().zip(values) {
        text.push_str(&format!("{:.17e},{:.17e},{v:.17e}\n", p[0], p[1]));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let ids = a.cases.unwrap_or_else(|| CaseId::ALL.to_vec());
    let rows = run_cases(&a.out, &ids, CaseSettings::defaults)?;
    for r in &rows {
        println!(
            "{:<5} basis={:<5} residual={:.3e} mse={:.3e} max_err={:.3e} {:.2}s {}",
            r.case,
            r.basis_size,
            r.residual_inf,
            r.mse,
            r.max_error,
            r.solve_seconds,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_ACCEPTANCE })
}

#[derive(Serialize)]
struct BoSummary<'a> {
    case: CaseId,
    settings: &'a CaseSettings,
    space: &'a SearchSpace,
    budget: usize,
    seed: u64,
    validation_factor: usize,
    validation_points: usize,
    includes_constraint_rows: bool,
    best_lengths: Vec<f64>,
    best_j: f64,
    total_seconds: f64,
}

pub const DEFAULT_VALIDATION_FACTOR: usize = 2;

fn cmd_bo(a: BoArgs) -> Result<u8> {
    let file = load(&a.config)?;
    let id = resolve_case(a.case, &file)?;
    let mut settings = file.case_settings(id, &a.overrides.patch())?;
    a.overrides.apply_method(&mut settings);
    let budget = a.budget.or(file.budget).unwrap_or(40);
    let seed = a.seed.or(file.seed).unwrap_or(7);
    let factor = a.validation_factor.or(file.validation_factor).unwrap_or(DEFAULT_VALIDATION_FACTOR);
    let range = match a.w_range.as_deref() {
        Some([lo, hi]) => Some([*lo, *hi]),
        Some(_) => return Err(Error::config("`--w-range` takes two values: lo,hi")),
        None => file.w_range,
    };
    let space = match range {
        Some([lo, hi]) => {
            if settings.lengths.len() != 2 || id.dimension() != crate::sampling::Dimension::One {
                return Err(Error::config("`w_range` needs a one-dimensional case with two partitions"));
            }
            SearchSpace::first_fraction(lo, hi).map_err(|e| Error::config(e.to_string()))?
        }
        None => {
            let ky = (id.dimension() == crate::sampling::Dimension::Two)
                .then(|| settings.lengths_y.as_ref().map_or(settings.lengths.len(), Vec::len));
            SearchSpace::logit_box(settings.lengths.len(), ky).map_err(|e| Error::config(e.to_string()))?
        }
    };
    let case = builtin_case(id, &settings)?;
    let obj = ValidationObjective::new(case, space.clone(), factor)?;
    let start = Instant::now();
    let outcome = optimize_case(&obj, budget, seed)?;
    let total_seconds = start.elapsed().as_secs_f64();
    for r in &outcome.trace.records {
        eprintln!(
            "iter {:>2}  l = {:?}  J = {:.4e}  best = {:.4e}  ({:.1}s)",
            r.iteration, r.lengths, r.j, r.best_j, r.seconds
        );
    }
    let summary = BoSummary {
        case: id,
        settings: &settings,
        space: &space,
        budget,
        seed,
        validation_factor: factor,
        validation_points: obj.validation.len(),
        includes_constraint_rows: true,
        best_lengths: outcome.trace.best().lengths.clone(),
        best_j: outcome.best_j,
        total_seconds,
    };
    if let Some(dir) = out_dir(&a.out, &file) {
        let dir = dir.join(id.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        outcome.trace.write_csv(&dir.join("bo_trace.csv"))?;
        write_json(&dir.join("bo_summary.json"), &summary)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| Error::numerical(e.to_string()))?);
    Ok(if outcome.best_j <= a.target_j { EXIT_OK } else { EXIT_ACCEPTANCE })
}

fn cmd_spectra(a: SpectraArgs) -> Result<u8> {
    let file = load(&a.config)?;
    let id = resolve_case(a.case, &file)?;
    let settings = file.case_settings(id, &a.overrides.patch())?;
    let case = builtin_case(id, &settings)?;
    let report = spectra_report(&case.basis, &default_omegas(&case.basis))?;
    if let Some(dir) = out_dir(&a.out, &file) {
        let dir = dir.join(id.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_spectra(&report, &dir)?;
    }
    for (lo, hi, n) in report.histogram.iter().filter(|b| b.2 > 0) {
        println!("sigma in [{lo:.3e}, {hi:.3e}): {n}");
    }
    Ok(EXIT_OK)
}
