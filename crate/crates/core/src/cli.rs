//! Command-line harness: resolves a run configuration, runs the analytic and
//! simulated sweeps and writes CSV tables plus `summary.json`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error,
//! 3 invalid network parameters, 4 I/O error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coverage_analytic::{CoverageCurve, CoverageEvaluator, EvalConfig, Method, CURVE_CSV_HEADER};
use crate::coverage_sim::{
    coverage_from_run, curve_from_estimates, dkw_halfwidth, ks_statistic, simulate, sorted, EmpiricalCdf, HoleMode,
    SimConfig, SimRun, Tier,
};
use crate::params::{NetworkParams, M2_PER_KM2};
use crate::quadrature::QuadConfig;
use crate::serving_distance::{marginal_cdf_z2hat, tabulate_marginal, write_distance_csv};

pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARAMS: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Points in the analytic `Ẑ2` table.
const DISTANCE_TABLE_POINTS: usize = 512;
/// Grid used to interpolate the analytic `Ẑ2` CDF for KS distances.
const KS_GRID_POINTS: usize = 4096;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Params(_) => EXIT_PARAMS,
            CliError::Io { .. } => EXIT_IO,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DistZ2,
    CovMacro,
    CovSmall,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::DistZ2 => "dist_z2",
            Task::CovMacro => "cov_macro",
            Task::CovSmall => "cov_small",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "dist_z2" => Ok(Task::DistZ2),
            "cov_macro" => Ok(Task::CovMacro),
            "cov_small" => Ok(Task::CovSmall),
            other => Err(format!("unknown task `{other}` (expected dist_z2, cov_macro or cov_small)")),
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "php-coverage", version, about = "Coverage of a two-tier network with Poisson hole exclusion zones")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in parameter set.
    #[arg(long, value_parser = ["setup1", "setup2"])]
    pub preset: Option<String>,
    /// Comma-separated subset of dist_z2, cov_macro, cov_small.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<Task>>,
    /// Monte Carlo trials; 0 runs the analytic part only.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Configuration file layout. Every key is optional; missing keys come from
/// the preset (default `setup1`) and the built-in defaults. Densities are in
/// BS per km².
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub lambda1_per_km2: Option<f64>,
    pub lambda2_per_km2: Option<f64>,
    pub hole_radius_m: Option<f64>,
    pub alpha: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub gammas_db: Option<Vec<f64>>,
    pub n_trials: Option<u64>,
    pub seed: Option<u64>,
    pub window_radius_m: Option<f64>,
    pub hole_mode: Option<HoleMode>,
    pub tasks: Option<Vec<Task>>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 1;

pub fn default_gammas_db() -> Vec<f64> {
    (-10..=20).map(f64::from).collect()
}

/// Fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub params: NetworkParams,
    pub gammas_db: Vec<f64>,
    pub sim: SimConfig,
    pub tasks: Vec<Task>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Merges, lowest priority first: preset, config file, command line.
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                ConfigFile::from_json(&text)?
            }
            None => ConfigFile::default(),
        };
        Self::merge(file, cli)
    }

    pub fn merge(file: ConfigFile, cli: &Cli) -> Result<Self, CliError> {
        let preset = cli.preset.clone().or(file.preset).unwrap_or_else(|| "setup1".to_string());
        let base =
            NetworkParams::preset(&preset).ok_or_else(|| CliError::Config(format!("unknown preset `{preset}`")))?;
        let params = NetworkParams {
            lambda1: file.lambda1_per_km2.map_or(base.lambda1, |v| v / M2_PER_KM2),
            lambda2: file.lambda2_per_km2.map_or(base.lambda2, |v| v / M2_PER_KM2),
            hole_radius: file.hole_radius_m.unwrap_or(base.hole_radius),
            alpha: file.alpha.unwrap_or(base.alpha),
            p1: file.p1.unwrap_or(base.p1),
            p2: file.p2.unwrap_or(base.p2),
        };
        params.validate().map_err(|e| CliError::Params(e.to_string()))?;

        let gammas_db = file.gammas_db.unwrap_or_else(default_gammas_db);
        if gammas_db.is_empty() {
            return Err(CliError::Config("gammas_db is empty".into()));
        }
        if gammas_db.iter().any(|g| !g.is_finite()) || gammas_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("gammas_db must be finite and strictly increasing".into()));
        }

        let mut tasks =
            cli.tasks.clone().or(file.tasks).unwrap_or_else(|| vec![Task::DistZ2, Task::CovMacro, Task::CovSmall]);
        tasks.sort();
        tasks.dedup();
        if tasks.is_empty() {
            return Err(CliError::Config("no tasks selected".into()));
        }

        let sim = SimConfig {
            window_radius: file.window_radius_m.unwrap_or_else(|| SimConfig::default_window(&params)),
            n_trials: cli.trials.or(file.n_trials).unwrap_or(DEFAULT_TRIALS),
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            hole_mode: file.hole_mode.unwrap_or(HoleMode::AllHoles),
        };
        if !(sim.window_radius > 0.0 && sim.window_radius.is_finite()) {
            return Err(CliError::Config("window_radius_m must be positive".into()));
        }

        let output_dir = cli.out.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self { preset, params, gammas_db, sim, tasks, output_dir })
    }

    pub fn has_simulation(&self) -> bool {
        self.sim.n_trials > 0
    }

    /// The configuration in file form, so it can be fed back as `--config`.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            preset: Some(self.preset.clone()),
            lambda1_per_km2: Some(self.params.lambda1 * M2_PER_KM2),
            lambda2_per_km2: Some(self.params.lambda2 * M2_PER_KM2),
            hole_radius_m: Some(self.params.hole_radius),
            alpha: Some(self.params.alpha),
            p1: Some(self.params.p1),
            p2: Some(self.params.p2),
            gammas_db: Some(self.gammas_db.clone()),
            n_trials: Some(self.sim.n_trials),
            seed: Some(self.sim.seed),
            window_radius_m: Some(self.sim.window_radius),
            hole_mode: Some(self.sim.hole_mode),
            tasks: Some(self.tasks.clone()),
            output_dir: Some(self.output_dir.clone()),
        }
    }
}

/// JSON value kinds used by the summary schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Number,
    NumberOrNull,
    Integer,
    String,
    Object,
    ObjectOrNull,
    Array,
}

/// Required members of `summary.json`, as JSON pointers. Entries under
/// `/curves/*` apply to every element of the `curves` array.
pub const SUMMARY_SCHEMA: &[(&str, Kind)] = &[
    ("/schema_version", Kind::Integer),
    ("/config", Kind::Object),
    ("/config/lambda1_per_km2", Kind::Number),
    ("/config/lambda2_per_km2", Kind::Number),
    ("/config/hole_radius_m", Kind::Number),
    ("/config/alpha", Kind::Number),
    ("/config/p1", Kind::Number),
    ("/config/p2", Kind::Number),
    ("/config/gammas_db", Kind::Array),
    ("/config/n_trials", Kind::Integer),
    ("/config/seed", Kind::Integer),
    ("/config/window_radius_m", Kind::Number),
    ("/config/hole_mode", Kind::String),
    ("/config/tasks", Kind::Array),
    ("/truncation", Kind::Object),
    ("/truncation/z1_m", Kind::Number),
    ("/truncation/z2_m", Kind::Number),
    ("/curves", Kind::Array),
    ("/curves/*/task", Kind::String),
    ("/curves/*/method", Kind::String),
    ("/curves/*/file", Kind::String),
    ("/curves/*/max_abs_diff_vs_mc", Kind::NumberOrNull),
    ("/curves/*/max_ci_halfwidth", Kind::NumberOrNull),
    ("/monte_carlo", Kind::ObjectOrNull),
    ("/distance", Kind::ObjectOrNull),
    ("/timings_s", Kind::Object),
];

pub const SUMMARY_SCHEMA_VERSION: u64 = 1;

fn kind_matches(v: &Value, kind: Kind) -> bool {
    match kind {
        Kind::Number => v.is_number(),
        Kind::NumberOrNull => v.is_number() || v.is_null(),
        Kind::Integer => v.is_u64() || v.is_i64(),
        Kind::String => v.is_string(),
        Kind::Object => v.is_object(),
        Kind::ObjectOrNull => v.is_object() || v.is_null(),
        Kind::Array => v.is_array(),
    }
}

/// Checks `summary` against [`SUMMARY_SCHEMA`].
pub fn validate_summary(summary: &Value) -> Result<(), String> {
    for &(pointer, kind) in SUMMARY_SCHEMA {
        if let Some((array, member)) = pointer.split_once("/*") {
            let items = summary
                .pointer(array)
                .and_then(Value::as_array)
                .ok_or_else(|| format!("{array} is missing or not an array"))?;
            for (i, item) in items.iter().enumerate() {
                match item.pointer(member) {
                    Some(v) if kind_matches(v, kind) => {}
                    _ => return Err(format!("{array}/{i}{member} is missing or not {kind:?}")),
                }
            }
        } else {
            match summary.pointer(pointer) {
                Some(v) if kind_matches(v, kind) => {}
                _ => return Err(format!("{pointer} is missing or not {kind:?}")),
            }
        }
    }
    if summary["schema_version"] != json!(SUMMARY_SCHEMA_VERSION) {
        return Err("unsupported schema_version".into());
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_curves(path: &Path, curves: &[&CoverageCurve]) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "{CURVE_CSV_HEADER}").map_err(|e| CliError::io(path, e))?;
    for c in curves {
        c.write_rows(&mut w).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

/// Linear interpolation of a CDF tabulated on a uniform grid.
struct GridCdf {
    hi: f64,
    values: Vec<f64>,
}

impl GridCdf {
    fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= self.hi {
            return *self.values.last().expect("non-empty grid");
        }
        let n = self.values.len() - 1;
        let t = x / self.hi * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Outcome of [`run`]: the summary that was written.
pub struct RunOutput {
    pub summary: Value,
}

/// Executes a resolved configuration and writes every artifact.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let params = cfg.params;
    let evaluator =
        CoverageEvaluator::new(params, EvalConfig::default()).map_err(|e| CliError::Params(e.to_string()))?;
    let mut timings = BTreeMap::new();
    let mut curves_meta = Vec::new();

    let main_run: Option<SimRun> = if cfg.has_simulation() {
        let t = Instant::now();
        let r = simulate(&params, &cfg.sim).map_err(compute)?;
        timings.insert("simulation".to_string(), t.elapsed().as_secs_f64());
        Some(r)
    } else {
        None
    };

    for &task in &cfg.tasks {
        let (tier, methods) = match task {
            Task::CovMacro => (Tier::Macro, [Method::MacroLower, Method::MacroUpper]),
            Task::CovSmall => (Tier::Small, [Method::SmallClosestHole, Method::SmallAllHoles]),
            Task::DistZ2 => continue,
        };
        let t = Instant::now();
        let analytic: Vec<CoverageCurve> =
            methods.iter().map(|&m| evaluator.curve(m, &cfg.gammas_db).map_err(compute)).collect::<Result<_, _>>()?;
        timings.insert(format!("{}_analytic", task.as_str()), t.elapsed().as_secs_f64());
        let mc = main_run
            .as_ref()
            .map(|run| curve_from_estimates(&cfg.gammas_db, &coverage_from_run(run, tier, &cfg.gammas_db)));
        let file = format!("{}.csv", task.as_str());
        let mut all: Vec<&CoverageCurve> = analytic.iter().collect();
        if let Some(m) = &mc {
            all.push(m);
        }
        write_curves(&out.join(&file), &all)?;
        for c in &analytic {
            curves_meta.push(json!({
                "task": task.as_str(),
                "method": c.method.as_str(),
                "file": file,
                "max_abs_diff_vs_mc": mc.as_ref().and_then(|m| c.max_abs_diff(m)),
                "max_ci_halfwidth": Value::Null,
            }));
        }
        if let Some(m) = &mc {
            let max_ci = m.ci_halfwidths.as_ref().map(|ci| ci.iter().copied().fold(0.0, f64::max));
            curves_meta.push(json!({
                "task": task.as_str(),
                "method": Method::MonteCarlo.as_str(),
                "file": file,
                "max_abs_diff_vs_mc": Value::Null,
                "max_ci_halfwidth": max_ci,
            }));
        }
    }

    let mut distance = Value::Null;
    if cfg.tasks.contains(&Task::DistZ2) {
        let t = Instant::now();
        let quad = QuadConfig::default();
        let z_hi = distance_table_extent(&params, evaluator.z2_truncation(), &quad)?;
        let rows = tabulate_marginal(&params, z_hi, DISTANCE_TABLE_POINTS, &quad).map_err(compute)?;
        let path = out.join("dist_z2_analytic.csv");
        let mut w = create(&path)?;
        write_distance_csv(&rows, &mut w).map_err(|e| CliError::io(&path, e))?;
        finish(w, &path)?;
        timings.insert("dist_z2_analytic".to_string(), t.elapsed().as_secs_f64());

        if let Some(main) = &main_run {
            let t = Instant::now();
            // Both hole modes are compared; the configured one reuses the main run.
            let other_mode = match cfg.sim.hole_mode {
                HoleMode::AllHoles => HoleMode::ClosestHoleOnly,
                HoleMode::ClosestHoleOnly => HoleMode::AllHoles,
            };
            let other = simulate(&params, &cfg.sim.with_hole_mode(other_mode)).map_err(compute)?;
            let (one_hole, full) = match cfg.sim.hole_mode {
                HoleMode::AllHoles => (&other, main),
                HoleMode::ClosestHoleOnly => (main, &other),
            };
            let analytic_cdf = analytic_grid_cdf(&params, evaluator.z2_truncation(), &quad)?;
            let mut ks = BTreeMap::new();
            for (name, run) in [("closest_hole_only", one_hole), ("all_holes", full)] {
                let samples: Vec<f64> = run.distances(Tier::Small).collect();
                let path = out.join(format!("dist_z2_mc_{name}.csv"));
                let mut w = create(&path)?;
                EmpiricalCdf::from_samples(&samples).write_csv(&mut w).map_err(|e| CliError::io(&path, e))?;
                finish(w, &path)?;
                ks.insert(name, ks_statistic(&sorted(&samples), |x| analytic_cdf.eval(x)));
            }
            distance = json!({
                "ks_vs_analytic": ks,
                "dkw_95": dkw_halfwidth(one_hole.records.len(), 0.05),
            });
            timings.insert("dist_z2_simulation".to_string(), t.elapsed().as_secs_f64());
        }
    }

    let monte_carlo = match &main_run {
        Some(r) => json!({ "n_trials": r.records.len(), "redraws": r.redraws }),
        None => Value::Null,
    };
    let summary = json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config": cfg.to_file(),
        "truncation": { "z1_m": evaluator.z1_truncation(), "z2_m": evaluator.z2_truncation() },
        "curves": curves_meta,
        "monte_carlo": monte_carlo,
        "distance": distance,
        "timings_s": timings,
    });
    validate_summary(&summary).map_err(|e| CliError::Compute(format!("summary does not match schema: {e}")))?;
    let path = out.join("summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| CliError::io(&path, e.into()))?;
    writeln!(w).map_err(|e| CliError::io(&path, e))?;
    finish(w, &path)?;
    Ok(RunOutput { summary })
}

/// Upper end of the analytic `Ẑ2` table: the 99.9% quantile.
fn distance_table_extent(params: &NetworkParams, z_max: f64, quad: &QuadConfig) -> Result<f64, CliError> {
    let (mut lo, mut hi) = (0.0, z_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if marginal_cdf_z2hat(mid, params, quad).map_err(compute)? < 0.999 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn analytic_grid_cdf(params: &NetworkParams, z_max: f64, quad: &QuadConfig) -> Result<GridCdf, CliError> {
    let values = (0..=KS_GRID_POINTS)
        .map(|i| marginal_cdf_z2hat(z_max * i as f64 / KS_GRID_POINTS as f64, params, quad).map_err(compute))
        .collect::<Result<_, _>>()?;
    Ok(GridCdf { hi: z_max, values })
}

/// Entry point used by the binary.
pub fn main_with(cli: Cli) -> Result<RunOutput, CliError> {
    let cfg = RunConfig::resolve(&cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| run(&cfg)),
        None => run(&cfg),
    }
}
