// Acceptance run: one line per criterion, nonzero exit if any fails.
// Property suites (criterion 10) run first, then the benchmark cases.

use std::process::ExitCode;
use std::time::Instant;

use faer::prelude::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use softrbf::assembly::{LeastSquaresSystem, RowTag};
use softrbf::tuner::{expected_improvement, optimize_case, SearchSpace, ValidationObjective};
use softrbf::{
    extract_boundary, flower_sdf, gauss_deriv_1d, pde_weight, run_case, softmax_lengths, solve, CaseId, CaseReport,
    CaseSettings, FlowerParams, SdfWeightParams, SolveOptions,
};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Outcome { passed: false, detail: format!("error: {e}") }
    }
}

fn report_checks(r: &CaseReport, extra: &[(&str, f64)]) -> Outcome {
    let mut parts: Vec<String> =
        r.checks.iter().map(|c| format!("{}={:.3e} (<= {:.0e})", c.name, c.value, c.threshold)).collect();
    parts.extend(extra.iter().map(|(k, v)| format!("{k}={v:.3e}")));
    Outcome::new(r.passed(), parts.join(", "))
}

fn case(id: CaseId) -> Outcome {
    match run_case(id, &CaseSettings::defaults(id)) {
        Ok(r) => report_checks(&r, &[]),
        Err(e) => Outcome::error(e),
    }
}

// Normal directions of the extracted circle boundary against the radial ray.
fn circle_normal_error_deg() -> softrbf::Result<f64> {
    let p = FlowerParams { center: [0.5, 0.5], base_radius: 0.3, amplitude: 0.0, petals: 5 };
    let sdf = flower_sdf(&p, 201)?;
    let b = extract_boundary(&sdf, 720)?;
    let mut worst = 0.0f64;
    for (q, n) in b.points.iter().zip(&b.normals) {
        let radial = [q[0] - 0.5, q[1] - 0.5];
        let cos = (radial[0] * n[0] + radial[1] * n[1]) / (radial[0].hypot(radial[1]) * n[0].hypot(n[1]));
        worst = worst.max(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    Ok(worst)
}

fn criterion6() -> Outcome {
    let normals = match circle_normal_error_deg() {
        Ok(v) => v,
        Err(e) => return Outcome::error(e),
    };
    match run_case(CaseId::Tc6, &CaseSettings::defaults(CaseId::Tc6)) {
        Ok(r) => {
            let mut o = report_checks(&r, &[("circle_normal_error_deg", normals)]);
            o.passed &= normals <= 1.0;
            o
        }
        Err(e) => Outcome::error(e),
    }
}

fn criterion9() -> Outcome {
    let t = Instant::now();
    let run = || -> softrbf::Result<_> {
        let built = softrbf::builtin_case(CaseId::Tc7a, &CaseSettings::defaults(CaseId::Tc7a))?;
        let space = SearchSpace::first_fraction(0.9, 0.99)?;
        let obj = ValidationObjective::new(built, space, 2)?;
        optimize_case(&obj, 40, 7)
    };
    let out = match run() {
        Ok(o) => o,
        Err(e) => return Outcome::error(e),
    };
    let secs = t.elapsed().as_secs_f64();
    let monotone = out.trace.records.windows(2).all(|w| w[1].best_j <= w[0].best_j);
    let w = out.trace.best().lengths[0];
    Outcome::new(
        out.best_j <= 1e-4 && monotone && secs < 600.0,
        format!(
            "J={:.3e} (<= 1e-4) at w={w:.4}, incumbent nonincreasing={monotone}, wall={secs:.0}s (< 600)",
            out.best_j
        ),
    )
}

fn kernel_fd(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let sigma = rng.random_range(0.01..0.5);
        let c = rng.random_range(0.0..1.0);
        let x = c + sigma * rng.random_range(-4.0..4.0);
        let n: u8 = rng.random_range(1..=4);
        let h = 1e-4 * sigma;
        let f = |y: f64| gauss_deriv_1d(y, c, sigma, n - 1).unwrap();
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let exact = gauss_deriv_1d(x, c, sigma, n).unwrap();
        // derivatives of order n scale like sigma^-n; that is the floor near zero crossings
        let scale = exact.abs().max(sigma.powi(-i32::from(n)));
        worst = worst.max((fd - exact).abs() / scale);
    }
    (worst <= 1e-6, format!("kernel_fd_rel={worst:.2e}"))
}

fn softmax_sum(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..12);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-30.0..30.0)).collect();
        let l = softmax_lengths(&logits).unwrap();
        worst = worst.max((l.iter().sum::<f64>() - 1.0).abs());
    }
    (worst <= 1e-12, format!("softmax_sum_dev={worst:.1e}"))
}

fn weight_ends() -> (bool, String) {
    let p = SdfWeightParams::for_diameter(2f64.sqrt());
    let ok = pde_weight(0.0, &p) == p.w_near
        && pde_weight(p.delta, &p) == p.w_far
        && pde_weight(3.0 * p.delta, &p) == p.w_far;
    (ok, format!("pde_weight_ends={ok}"))
}

fn system(a: Mat<f64>, rhs: Vec<f64>) -> LeastSquaresSystem {
    let rows = (0..a.nrows()).map(|i| RowTag::Pde { point: [i as f64, 0.0], weight: 1.0 }).collect();
    LeastSquaresSystem { matrix: a, rhs, rows }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn solver_oracle(rng: &mut ChaCha8Rng) -> (bool, String) {
    let g = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = Mat::from_fn(50, 20, |_, _| g.sample(rng));
        let b: Vec<f64> = (0..50).map(|_| g.sample(rng)).collect();
        let ata = a.transpose() * &a;
        let atb = a.transpose() * Mat::from_fn(50, 1, |i, _| b[i]);
        let x = ata.llt(Side::Lower).unwrap().solve(&atb);
        let oracle: Vec<f64> = (0..20).map(|i| x[(i, 0)]).collect();
        let got = solve(&system(a, b), &SolveOptions::default()).unwrap().coefficients;
        worst = worst.max(rel_diff(&got, &oracle));
    }
    (worst <= 1e-8, format!("solver_vs_normal_eq_rel={worst:.1e}"))
}

fn row_scaling(rng: &mut ChaCha8Rng) -> (bool, String) {
    let g = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = Mat::from_fn(50, 20, |_, _| g.sample(rng));
        let truth: Vec<f64> = (0..20).map(|_| g.sample(rng)).collect();
        let b: Vec<f64> = (0..50).map(|i| (0..20).map(|j| a[(i, j)] * truth[j]).sum()).collect();
        let w: Vec<f64> = (0..50).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let aw = Mat::from_fn(50, 20, |i, j| w[i] * a[(i, j)]);
        let bw: Vec<f64> = b.iter().zip(&w).map(|(x, s)| x * s).collect();
        let plain = solve(&system(a, b), &SolveOptions::default()).unwrap().coefficients;
        let scaled = solve(&system(aw, bw), &SolveOptions::default()).unwrap().coefficients;
        worst = worst.max(rel_diff(&scaled, &plain));
    }
    (worst <= 1e-8, format!("row_scaling_rel={worst:.1e}"))
}

fn circle_sdf() -> (bool, String) {
    let p = FlowerParams { center: [0.5, 0.5], base_radius: 0.3, amplitude: 0.0, petals: 5 };
    let sdf = flower_sdf(&p, 129).unwrap();
    let h = sdf.spacing()[0];
    let (nx, ny) = sdf.shape();
    let mut worst = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let q = sdf.node(i, j);
            let exact = 0.3 - (q[0] - 0.5).hypot(q[1] - 0.5);
            worst = worst.max((sdf.node_value(i, j) - exact).abs());
        }
    }
    (worst <= 2.0 * h, format!("circle_sdf_err/h={:.2e}", worst / h))
}

fn ei_monte_carlo(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for (m, v, best) in [(0.0, 1.0, 0.0), (0.3, 0.25, 0.1), (-0.2, 2.0, 0.5), (1.0, 0.04, 0.9)] {
        let d = Normal::new(m, f64::sqrt(v)).unwrap();
        // 4e6 draws keep the standard error near 5e-4 for the widest posterior
        let mc = (0..4_000_000).map(|_| (best - d.sample(rng)).max(0.0)).sum::<f64>() / 4e6;
        worst = worst.max((mc - expected_improvement(m, v, best)).abs());
    }
    (worst <= 1e-3, format!("ei_mc_abs={worst:.1e}"))
}

fn criterion10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let parts = [
        kernel_fd(&mut rng),
        softmax_sum(&mut rng),
        weight_ends(),
        solver_oracle(&mut rng),
        row_scaling(&mut rng),
        circle_sdf(),
        ei_monte_carlo(&mut rng),
    ];
    let passed = parts.iter().all(|p| p.0);
    Outcome::new(passed, parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join(", "))
}

fn criterion11() -> Outcome {
    let mut sdf = CaseSettings::defaults(CaseId::Tc5);
    sdf.w_bc = 5.0;
    let mut uniform = sdf.clone();
    uniform.sdf_weighting = None;
    match (run_case(CaseId::Tc5, &sdf), run_case(CaseId::Tc5, &uniform)) {
        (Ok(a), Ok(b)) => Outcome::new(
            a.metrics.mse <= b.metrics.mse,
            format!("mse_sdf={:.3e} <= mse_uniform={:.3e}", a.metrics.mse, b.metrics.mse),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::error(e),
    }
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Outcome); 11] = [
        (10, "property suites", criterion10),
        (1, "tc1 first-order ODE", || case(CaseId::Tc1)),
        (2, "tc2 second-order ODE", || case(CaseId::Tc2)),
        (3, "tc3 multiscale", || case(CaseId::Tc3)),
        (4, "tc4 2D Poisson", || case(CaseId::Tc4)),
        (5, "tc5 petal Poisson", || case(CaseId::Tc5)),
        (6, "tc6 petal biharmonic + circle normals", criterion6),
        (7, "tc7a advection-diffusion layer", || case(CaseId::Tc7a)),
        (8, "tc7b forced layer", || case(CaseId::Tc7b)),
        (11, "SDF weighting ablation", criterion11),
        (9, "BO on tc7a", criterion9),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let t = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {n:>2} {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!o.passed);
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
