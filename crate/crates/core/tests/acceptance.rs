//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 5`.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use php_coverage::coverage_analytic::{CoverageEvaluator, EvalConfig, Method, SirThreshold};
use php_coverage::coverage_sim::{
    coverage_from_run, ks_statistic, simulate, simulate_with_threads, sorted, Estimate, HoleMode, SimConfig, SimRun,
    Tier,
};
use php_coverage::geometry::{lens_area, lens_area_dr_total, LensQuery};
use php_coverage::params::{NetworkParams, M2_PER_KM2};
use php_coverage::pointprocess::RngStream;
use php_coverage::quadrature::{integrate_tail, integrate_with_breaks, QuadConfig};
use php_coverage::serving_distance::{marginal_cdf_z2hat, ConditionalDistanceDist};
use rand::Rng;
use rayon::prelude::*;
use serde_json::Value;

type Check = fn() -> Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget_s: Option<f64>,
    check: Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "lens area vs darts, derivative vs finite differences",
        budget_s: Some(30.0),
        check: lens_area_checks,
    },
    Criterion {
        id: 2,
        name: "conditional serving-distance law integrates to one",
        budget_s: Some(60.0),
        check: conditional_normalization,
    },
    Criterion { id: 3, name: "serving-distance CDF vs simulation (KS)", budget_s: Some(300.0), check: distance_ks },
    Criterion {
        id: 4,
        name: "no-hole limit: evaluators, closed form and simulation agree",
        budget_s: Some(120.0),
        check: no_hole_limit,
    },
    Criterion { id: 5, name: "macro bounds sandwich the simulation", budget_s: Some(600.0), check: macro_sandwich },
    Criterion {
        id: 6,
        name: "small-cell approximations track the simulation",
        budget_s: Some(900.0),
        check: small_cell_accuracy,
    },
    Criterion { id: 7, name: "small cells out-cover macros in setup 1", budget_s: None, check: small_beats_macro },
    Criterion {
        id: 8,
        name: "seeded CLI runs are byte-identical across repeats and thread counts",
        budget_s: None,
        check: cli_determinism,
    },
];

const SEED: u64 = 20_240_601;

fn gamma_grid() -> Vec<f64> {
    (-10..=20).map(f64::from).collect()
}

fn setups() -> [(&'static str, NetworkParams); 2] {
    [("setup1", NetworkParams::setup1()), ("setup2", NetworkParams::setup2())]
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 -------------------------------------------------------------------------

const LENS_CONFIGS: u64 = 50;
const DARTS: u64 = 10_000_000;

/// Fraction of uniform darts in the smaller disc that also land in the larger
/// one, i.e. an estimate of `lens_area / (π min(r)²)`.
fn dart_fraction(r: f64, rh: f64, d: f64, stream: u64) -> f64 {
    let mut rng = RngStream::new(SEED, stream).rng();
    let (small, big, offset) = if r <= rh { (r, rh, d) } else { (rh, r, -d) };
    let big2 = big * big;
    let mut hits = 0u64;
    let mut n = 0u64;
    while n < DARTS {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        if x * x + y * y > 1.0 {
            continue;
        }
        n += 1;
        let (px, py) = (x * small - offset, y * small);
        if px * px + py * py <= big2 {
            hits += 1;
        }
    }
    hits as f64 / DARTS as f64
}

fn lens_area_checks() -> Result<String, String> {
    let mut rng = RngStream::new(SEED, 1).rng();
    let configs: Vec<(f64, f64, f64)> = (0..LENS_CONFIGS)
        .map(|_| {
            let r = rng.gen_range(0.1..2.0);
            let rh = rng.gen_range(0.1..2.0);
            let d = rng.gen_range(0.0..(r + rh) * 1.2);
            (r, rh, d)
        })
        .collect();

    let worst_area = configs
        .par_iter()
        .enumerate()
        .map(|(i, &(r, rh, d))| {
            let exact = lens_area(LensQuery::new(r, rh, d)) / (PI * r.min(rh).powi(2));
            (exact - dart_fraction(r, rh, d, 100 + i as u64)).abs()
        })
        .reduce(|| 0.0, f64::max);
    ensure(worst_area <= 1e-3, || format!("normalized area error {worst_area:.2e} > 1e-3"))?;

    // The finite-difference oracle is only meaningful away from the tangency
    // radii, where the area has a square-root kink.
    let mut worst_dr = 0.0f64;
    let mut compared = 0;
    for &(r, rh, d) in &configs {
        let kinks = [(d - rh).abs(), d + rh];
        if kinks.iter().any(|k| (r - k).abs() < 0.02) {
            continue;
        }
        let h = 1e-5 * r;
        let fd = (lens_area(LensQuery::new(r + h, rh, d)) - lens_area(LensQuery::new(r - h, rh, d))) / (2.0 * h);
        let exact = lens_area_dr_total(LensQuery::new(r, rh, d));
        let e = if exact == 0.0 { fd.abs() } else { ((fd - exact) / exact).abs() };
        worst_dr = worst_dr.max(e);
        compared += 1;
    }
    ensure(worst_dr <= 1e-6, || format!("derivative relative error {worst_dr:.2e} > 1e-6"))?;
    ensure(compared >= 40, || format!("only {compared} configurations away from tangency"))?;
    Ok(format!(
        "max area error {worst_area:.1e} over {LENS_CONFIGS} configs; max derivative rel error {worst_dr:.1e} over {compared}"
    ))
}

// 2 -------------------------------------------------------------------------

fn conditional_normalization() -> Result<String, String> {
    let mut rng = RngStream::new(SEED, 2).rng();
    let cfg = QuadConfig::default().with_rel_tol(1e-10).with_abs_tol(1e-13);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = NetworkParams {
            lambda1: rng.gen_range(0.2..5.0) / M2_PER_KM2,
            lambda2: rng.gen_range(5.0..200.0) / M2_PER_KM2,
            hole_radius: rng.gen_range(10.0..300.0),
            ..NetworkParams::setup1()
        };
        let z1 = rng.gen_range(1.0..3.0 * params.hole_radius);
        let cond = ConditionalDistanceDist::new(params, z1).map_err(err)?;
        let d = params.hole_radius;
        let lo = cond.support_start();
        let breaks = [lo, (z1 - d).abs().max(lo), z1 + d];
        let head = integrate_with_breaks(|z| cond.pdf(z), &breaks, &cfg).map_err(err)?.value;
        let scale = 1.0 / params.lambda2.sqrt();
        let tail = integrate_tail(|z| cond.pdf(z), z1 + d, scale, &cfg).map_err(err)?.value;
        worst = worst.max((head + tail - 1.0).abs());
    }
    ensure(worst <= 1e-6, || format!("worst |mass - 1| = {worst:.2e} > 1e-6"))?;
    Ok(format!("worst |mass - 1| = {worst:.1e} over 100 pairs"))
}

// 3 -------------------------------------------------------------------------

const KS_TRIALS: u64 = 100_000;
const CDF_GRID: usize = 4096;

/// The analytic CDF tabulated on a uniform grid and linearly interpolated.
/// The interpolation error is measured at grid midpoints.
fn tabulated_cdf(params: &NetworkParams, hi: f64) -> Result<(impl Fn(f64) -> f64, f64), String> {
    let cfg = QuadConfig::default();
    let step = hi / CDF_GRID as f64;
    let values: Vec<f64> = (0..=CDF_GRID)
        .into_par_iter()
        .map(|i| marginal_cdf_z2hat(i as f64 * step, params, &cfg))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let interp = move |x: f64| {
        if x >= hi {
            return values[CDF_GRID];
        }
        let t = (x / step).max(0.0);
        let i = (t as usize).min(CDF_GRID - 1);
        let w = t - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    };
    let mut interp_err = 0.0f64;
    for k in 0..128 {
        let x = (k as f64 * 32.0 + 0.5) * step;
        interp_err = interp_err.max((interp(x) - marginal_cdf_z2hat(x, params, &cfg).map_err(err)?).abs());
    }
    Ok((interp, interp_err))
}

fn distance_ks() -> Result<String, String> {
    let mut report = Vec::new();
    for (name, params) in setups() {
        let hi = CoverageEvaluator::new(params, EvalConfig::default()).map_err(err)?.z2_truncation();
        let (cdf, interp_err) = tabulated_cdf(&params, hi)?;
        ensure(interp_err < 1e-5, || format!("{name}: CDF interpolation error {interp_err:.1e}"))?;
        let base = SimConfig::new(&params, KS_TRIALS, SEED);
        let mut ks = [0.0; 2];
        for (slot, mode) in [HoleMode::ClosestHoleOnly, HoleMode::AllHoles].into_iter().enumerate() {
            let run = simulate(&params, &base.with_hole_mode(mode)).map_err(err)?;
            let samples = sorted(&run.distances(Tier::Small).collect::<Vec<_>>());
            ks[slot] = ks_statistic(&samples, &cdf);
        }
        ensure(ks[0] <= 0.01, || format!("{name}: KS vs closest-hole simulation {:.4} > 0.01", ks[0]))?;
        ensure(ks[1] <= 0.02, || format!("{name}: KS vs full simulation {:.4} > 0.02", ks[1]))?;
        report.push(format!("{name} KS {:.4} / {:.4}", ks[0], ks[1]));
    }
    Ok(report.join("; "))
}

// 4 -------------------------------------------------------------------------

/// Two independent PPP tiers at α = 4: coverage of the tier with density
/// `own`, power `p_own` against the other tier.
fn two_ppp_coverage(gamma: f64, own: (f64, f64), other: (f64, f64)) -> f64 {
    let rho = gamma.sqrt() * (PI / 2.0 - (1.0 / gamma.sqrt()).atan());
    let cross = other.0 / own.0 * (gamma * other.1 / own.1).sqrt() * PI / 2.0;
    1.0 / (1.0 + rho + cross)
}

fn no_hole_limit() -> Result<String, String> {
    let params = NetworkParams::setup1().with_hole_radius(0.0);
    let ev = CoverageEvaluator::new(params, EvalConfig::default()).map_err(err)?;
    let gammas = [-10.0, 0.0, 10.0, 20.0];
    let run = simulate(&params, &SimConfig::new(&params, 100_000, SEED)).map_err(err)?;
    let mc_macro = coverage_from_run(&run, Tier::Macro, &gammas);
    let mc_small = coverage_from_run(&run, Tier::Small, &gammas);

    let (m, s) = ((params.lambda1, params.p1), (params.lambda2, params.p2));
    let mut worst_analytic = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for (i, &g) in gammas.iter().enumerate() {
        let gamma = SirThreshold::from_db(g);
        let exact_macro = two_ppp_coverage(gamma.linear(), m, s);
        let exact_small = two_ppp_coverage(gamma.linear(), s, m);
        for (method, exact, mc) in [
            (Method::MacroLower, exact_macro, mc_macro[i]),
            (Method::MacroUpper, exact_macro, mc_macro[i]),
            (Method::SmallClosestHole, exact_small, mc_small[i]),
            (Method::SmallAllHoles, exact_small, mc_small[i]),
        ] {
            let v = ev.evaluate(method, gamma).map_err(err)?.value;
            let diff = (v - exact).abs();
            worst_analytic = worst_analytic.max(diff);
            ensure(diff <= 1e-5, || format!("{method} at {g} dB: {v:.7} vs closed form {exact:.7}"))?;
            let gap = (mc.mean - v).abs();
            worst_sigma = worst_sigma.max(gap / mc.ci_halfwidth);
            ensure(gap <= 3.0 * mc.ci_halfwidth, || {
                format!("{method} at {g} dB: {v:.4} vs simulation {:.4} ± {:.4}", mc.mean, mc.ci_halfwidth)
            })?;
        }
    }

    let single = NetworkParams { lambda2: 1e-15, ..params };
    let ev = CoverageEvaluator::new(single, EvalConfig::default()).map_err(err)?;
    let one = SirThreshold::new(1.0).map_err(err)?;
    for method in [Method::MacroLower, Method::MacroUpper] {
        let v = ev.evaluate(method, one).map_err(err)?.value;
        ensure((v - 0.56010).abs() <= 1e-4, || format!("{method} single-tier value {v:.6} vs 0.56010"))?;
    }
    Ok(format!(
        "max analytic deviation {worst_analytic:.1e}; worst simulation gap {worst_sigma:.2} CI; single-tier value within 1e-4"
    ))
}

// 5, 6, 7 -------------------------------------------------------------------

const GRID_TRIALS: u64 = 10_000;

fn grid_run(params: &NetworkParams) -> Result<SimRun, String> {
    simulate(params, &SimConfig::new(params, GRID_TRIALS, SEED)).map_err(err)
}

fn macro_sandwich() -> Result<String, String> {
    let grid = gamma_grid();
    let mut report = Vec::new();
    for (name, params) in setups() {
        let ev = CoverageEvaluator::new(params, EvalConfig::default()).map_err(err)?;
        let lower = ev.curve(Method::MacroLower, &grid).map_err(err)?;
        let upper = ev.curve(Method::MacroUpper, &grid).map_err(err)?;
        let mc = coverage_from_run(&grid_run(&params)?, Tier::Macro, &grid);
        let mut max_gap = 0.0f64;
        for (i, g) in grid.iter().enumerate() {
            let (lo, hi, e) = (lower.values[i], upper.values[i], mc[i]);
            ensure(lo - 3.0 * e.ci_halfwidth <= e.mean && e.mean <= hi + 3.0 * e.ci_halfwidth, || {
                format!("{name} {g} dB: simulation {:.4} ± {:.4} outside [{lo:.4}, {hi:.4}]", e.mean, e.ci_halfwidth)
            })?;
            max_gap = max_gap.max(hi - lo);
        }
        ensure(max_gap <= 0.05, || format!("{name}: bound gap {max_gap:.4} > 0.05"))?;
        report.push(format!("{name} max bound gap {max_gap:.1e}"));
    }
    Ok(report.join("; "))
}

fn small_cell_accuracy() -> Result<String, String> {
    let grid = gamma_grid();
    let mut report = Vec::new();
    for (name, params) in setups() {
        let ev = CoverageEvaluator::new(params, EvalConfig::default()).map_err(err)?;
        let t3 = ev.curve(Method::SmallClosestHole, &grid).map_err(err)?;
        let t4 = ev.curve(Method::SmallAllHoles, &grid).map_err(err)?;
        let mc = coverage_from_run(&grid_run(&params)?, Tier::Small, &grid);
        let mut worst = 0.0f64;
        for (i, g) in grid.iter().enumerate() {
            let (a, b, e) = (t3.values[i], t4.values[i], mc[i].mean);
            ensure(a <= b, || format!("{name} {g} dB: closest-hole value {a:.8} exceeds all-holes value {b:.8}"))?;
            worst = worst.max((a - e).abs()).max((b - e).abs());
            ensure((a - e).abs() <= 0.03 && (b - e).abs() <= 0.03, || {
                format!("{name} {g} dB: {a:.4} / {b:.4} vs simulation {e:.4}")
            })?;
        }
        report.push(format!("{name} max deviation {worst:.4}"));
    }
    Ok(report.join("; "))
}

fn small_beats_macro() -> Result<String, String> {
    let grid = gamma_grid();
    let run = grid_run(&NetworkParams::setup1())?;
    let small = coverage_from_run(&run, Tier::Small, &grid);
    let macro_ = coverage_from_run(&run, Tier::Macro, &grid);
    let mut tightest = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let (s, m): (Estimate, Estimate) = (small[i], macro_[i]);
        let margin = (s.mean - s.ci_halfwidth) - (m.mean + m.ci_halfwidth);
        tightest = tightest.min(margin);
        ensure(margin > 0.0, || {
            format!(
                "{g} dB: small {:.4} ± {:.4} vs macro {:.4} ± {:.4}",
                s.mean, s.ci_halfwidth, m.mean, m.ci_halfwidth
            )
        })?;
    }
    Ok(format!("smallest CI separation {tightest:.4}"))
}

// 8 -------------------------------------------------------------------------

fn run_cli(config: &Path, out: &Path, threads: usize) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_php-coverage"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(err)?;
    ensure(o.status.success(), || format!("CLI failed: {}", String::from_utf8_lossy(&o.stderr)))
}

/// Every output file keyed by name; `summary.json` without wall-clock timings.
fn artifacts(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).map_err(err)?;
        if name == "summary.json" {
            let mut v: Value = serde_json::from_slice(&bytes).map_err(err)?;
            v.as_object_mut().ok_or("summary is not an object")?.remove("timings_s");
            bytes = serde_json::to_vec_pretty(&v).map_err(err)?;
        }
        files.push((name, bytes));
    }
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(err)?;
    let config = tmp.path().join("run.json");
    fs::write(&config, r#"{"preset":"setup1","gammas_db":[-5,0,5,10],"n_trials":4000,"seed":7}"#).map_err(err)?;
    // Same output directory each time, since the summary records it.
    let out = tmp.path().join("out");
    let mut outputs = Vec::new();
    for threads in [1, 1, 8] {
        run_cli(&config, &out, threads)?;
        outputs.push(artifacts(&out)?);
        fs::remove_dir_all(&out).map_err(err)?;
    }
    ensure(outputs[0].len() == 6, || format!("expected 6 artifacts, found {}", outputs[0].len()))?;
    for (other, what) in [(&outputs[1], "repeat"), (&outputs[2], "8 threads")] {
        for ((name, a), (name_b, b)) in outputs[0].iter().zip(other.iter()) {
            ensure(name == name_b && a == b, || format!("{name} differs on {what}"))?;
        }
    }

    let params = NetworkParams::setup2();
    let cfg = SimConfig::new(&params, 3000, SEED);
    let one = simulate_with_threads(&params, &cfg, 1).map_err(err)?;
    let eight = simulate_with_threads(&params, &cfg, 8).map_err(err)?;
    let bits = |r: &SimRun| -> Vec<u64> {
        r.records.iter().flat_map(|t| [t.z1, t.z2, t.sir_macro, t.sir_small].map(f64::to_bits)).collect()
    };
    ensure(bits(&one) == bits(&eight), || "trial records differ between 1 and 8 threads".into())?;
    Ok("6 artifacts identical over 3 runs; trial records bitwise equal for 1 and 8 threads".into())
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed().as_secs_f64();
        let outcome = match (outcome, c.budget_s) {
            (Ok(_), Some(budget)) if elapsed > budget => Err(format!("took {elapsed:.1} s, budget {budget:.0} s")),
            (o, _) => o,
        };
        let budget = c.budget_s.map_or(String::new(), |b| format!(" / {b:.0} s"));
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({}): {detail} [{elapsed:.1} s{budget}]", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({}): {why} [{elapsed:.1} s{budget}]", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
