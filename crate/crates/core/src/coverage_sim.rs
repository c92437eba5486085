//! Monte Carlo reference for the two-tier network: exact Poisson Hole
//! Process realizations around a typical user at the origin, Rayleigh-faded
//! SIR for both serving tiers, coverage estimates and empirical distance
//! laws.
//!
//! Trial `i` draws everything from its own ChaCha streams, so results do not
//! depend on how trials are spread over threads. Point processes are sampled
//! outward from the origin, so enlarging the window keeps every point (and
//! fade) of the smaller window unchanged.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage_analytic::{pow_alpha, CoverageCurve, Method, SirThreshold};
use crate::params::{NetworkParams, ParamError};
use crate::pointprocess::{carve_php_iter, nearest, sample_ppp_radial, Point, PointProcessError, RngStream};

/// Redraw budget per trial when a tier comes out empty.
pub const MAX_REDRAWS: u64 = 64;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

const STREAM_MACRO: u64 = 0;
const STREAM_SMALL: u64 = 1;
const STREAM_MACRO_FADE: u64 = 2;
const STREAM_SMALL_FADE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    PointProcess(#[from] PointProcessError),
    #[error("trial {trial_id} had an empty tier in all {MAX_REDRAWS} draws")]
    EmptyTier { trial_id: u64 },
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

/// Which macros carve holes in the small-cell tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleMode {
    AllHoles,
    /// Only the macro nearest to the user carves its hole.
    ClosestHoleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Macro,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Radius of the small-cell window; macros are drawn out to
    /// `window_radius + D` so holes near the edge still carve.
    pub window_radius: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub hole_mode: HoleMode,
}

impl SimConfig {
    /// `max(5 / √(πλ1), 10 D, 2000 m)`.
    pub fn default_window(params: &NetworkParams) -> f64 {
        let by_density = 5.0 / (std::f64::consts::PI * params.lambda1).sqrt();
        by_density.max(10.0 * params.hole_radius).max(2000.0)
    }

    pub fn new(params: &NetworkParams, n_trials: u64, seed: u64) -> Self {
        Self { window_radius: Self::default_window(params), n_trials, seed, hole_mode: HoleMode::AllHoles }
    }

    pub fn with_hole_mode(self, hole_mode: HoleMode) -> Self {
        Self { hole_mode, ..self }
    }

    pub fn with_window(self, window_radius: f64) -> Self {
        Self { window_radius, ..self }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_trials == 0 {
            return Err(SimError::InvalidConfig("n_trials must be at least 1"));
        }
        if !(self.window_radius > 0.0 && self.window_radius.is_finite()) {
            return Err(SimError::InvalidConfig("window_radius must be positive and finite"));
        }
        if self.n_trials > u64::MAX / (4 * MAX_REDRAWS) {
            return Err(SimError::InvalidConfig("n_trials too large"));
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub z1: f64,
    pub z2: f64,
    pub sir_macro: f64,
    pub sir_small: f64,
    /// Number of discarded draws with an empty tier.
    pub redraws: u32,
}

/// Supplies per-link power fades in the order of a point list.
pub trait FadeSource {
    fn next_fade(&mut self) -> f64;
}

/// Unit-mean exponential fades (Rayleigh fading).
pub struct RayleighFades<R>(pub R);

impl<R: Rng> FadeSource for RayleighFades<R> {
    fn next_fade(&mut self) -> f64 {
        Exp1.sample(&mut self.0)
    }
}

/// Deterministic fades, cycled if there are more links than values.
pub struct FixedFades {
    values: Vec<f64>,
    next: usize,
}

impl FixedFades {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "at least one fade value is required");
        Self { values, next: 0 }
    }
}

impl FadeSource for FixedFades {
    fn next_fade(&mut self) -> f64 {
        let v = self.values[self.next % self.values.len()];
        self.next += 1;
        v
    }
}

/// Serving distances and SIRs at the origin for given BS positions, with
/// one fade source per tier. Returns `None` if either tier is empty.
pub fn evaluate_sir<F: FadeSource + ?Sized, G: FadeSource + ?Sized>(
    macros: &[Point],
    smalls: &[Point],
    params: &NetworkParams,
    macro_fades: &mut F,
    small_fades: &mut G,
) -> Option<TrialRecord> {
    if macros.is_empty() || smalls.is_empty() {
        return None;
    }
    let gain = |p: &Point, power: f64, h: f64| power * h / pow_alpha(p.norm(), params.alpha);
    let macro_rx: Vec<f64> = macros.iter().map(|p| gain(p, params.p1, macro_fades.next_fade())).collect();
    let small_rx: Vec<f64> = smalls.iter().map(|p| gain(p, params.p2, small_fades.next_fade())).collect();

    let (i1, z1) = nearest_index(macros);
    let (i2, z2) = nearest_index(smalls);
    let macro_total: f64 = macro_rx.iter().sum();
    let small_total: f64 = small_rx.iter().sum();
    // Summing the others directly avoids cancellation when the serving
    // signal dominates.
    let macro_others: f64 = sum_except(&macro_rx, i1);
    let small_others: f64 = sum_except(&small_rx, i2);
    Some(TrialRecord {
        z1,
        z2,
        sir_macro: macro_rx[i1] / (macro_others + small_total),
        sir_small: small_rx[i2] / (small_others + macro_total),
        redraws: 0,
    })
}

fn nearest_index(points: &[Point]) -> (usize, f64) {
    points.iter().enumerate().map(|(i, p)| (i, p.norm())).fold((0, f64::INFINITY), |best, cur| {
        if cur.1 < best.1 {
            cur
        } else {
            best
        }
    })
}

fn sum_except(values: &[f64], skip: usize) -> f64 {
    values.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v).sum()
}

fn stream(cfg: &SimConfig, trial_id: u64, attempt: u64, kind: u64) -> RngStream {
    RngStream::new(cfg.seed, ((trial_id * MAX_REDRAWS + attempt) << 2) | kind)
}

/// One realization seen from the origin. Deterministic in
/// `(cfg.seed, trial_id)`.
pub fn run_trial(params: &NetworkParams, cfg: &SimConfig, trial_id: u64) -> Result<TrialRecord, SimError> {
    let d = params.hole_radius;
    for attempt in 0..MAX_REDRAWS {
        let macros = sample_ppp_radial(
            params.lambda1,
            cfg.window_radius + d,
            &mut stream(cfg, trial_id, attempt, STREAM_MACRO).rng(),
        )?;
        let baseline = sample_ppp_radial(
            params.lambda2,
            cfg.window_radius,
            &mut stream(cfg, trial_id, attempt, STREAM_SMALL).rng(),
        )?;
        let holes: &[Point] = match cfg.hole_mode {
            HoleMode::AllHoles => macros.points(),
            HoleMode::ClosestHoleOnly => match nearest(&Point::ORIGIN, &macros) {
                Ok((i, _)) => &macros.points()[i..=i],
                Err(_) => &[],
            },
        };
        let smalls = carve_php_iter(&baseline, holes, d);
        let mut macro_fades = RayleighFades(stream(cfg, trial_id, attempt, STREAM_MACRO_FADE).rng());
        let mut small_fades = RayleighFades(stream(cfg, trial_id, attempt, STREAM_SMALL_FADE).rng());
        let rec = evaluate_sir(macros.points(), smalls.points(), params, &mut macro_fades, &mut small_fades);
        if let Some(mut rec) = rec {
            rec.redraws = attempt as u32;
            return Ok(rec);
        }
    }
    Err(SimError::EmptyTier { trial_id })
}

/// All trial records, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub records: Vec<TrialRecord>,
    /// Total discarded draws with an empty tier.
    pub redraws: u64,
}

impl SimRun {
    pub fn sirs(&self, tier: Tier) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(move |r| match tier {
            Tier::Macro => r.sir_macro,
            Tier::Small => r.sir_small,
        })
    }

    pub fn distances(&self, tier: Tier) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(move |r| match tier {
            Tier::Macro => r.z1,
            Tier::Small => r.z2,
        })
    }
}

/// Runs all trials on the current rayon pool.
pub fn simulate(params: &NetworkParams, cfg: &SimConfig) -> Result<SimRun, SimError> {
    params.validate()?;
    cfg.validate()?;
    let records: Vec<TrialRecord> =
        (0..cfg.n_trials).into_par_iter().map(|i| run_trial(params, cfg, i)).collect::<Result<_, _>>()?;
    let redraws = records.iter().map(|r| u64::from(r.redraws)).sum();
    if redraws > 0 {
        log::info!("{redraws} trial draws had an empty tier and were redrawn");
    }
    Ok(SimRun { records, redraws })
}

/// [`simulate`] on a dedicated pool of `threads` workers.
pub fn simulate_with_threads(params: &NetworkParams, cfg: &SimConfig, threads: usize) -> Result<SimRun, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SimError::ThreadPool(e.to_string()))?;
    pool.install(|| simulate(params, cfg))
}

/// Binomial proportion with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub n: u64,
}

impl Estimate {
    /// Normal approximation, or the Wilson half-width when the proportion is
    /// within `5/n` of 0 or 1.
    pub fn from_counts(successes: u64, n: u64) -> Self {
        assert!(n > 0 && successes <= n);
        let nf = n as f64;
        let p = successes as f64 / nf;
        let edge = 5.0 / nf;
        let ci_halfwidth = if p <= edge || p >= 1.0 - edge {
            let z2 = Z95 * Z95;
            Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
        } else {
            Z95 * (p * (1.0 - p) / nf).sqrt()
        };
        Self { mean: p, ci_halfwidth, n }
    }
}

/// Coverage estimates at each threshold from a single set of trials.
pub fn coverage_from_run(run: &SimRun, tier: Tier, gammas_db: &[f64]) -> Vec<Estimate> {
    let n = run.records.len() as u64;
    gammas_db
        .iter()
        .map(|&g| {
            let gamma = SirThreshold::from_db(g).linear();
            let hits = run.sirs(tier).filter(|&sir| sir >= gamma).count() as u64;
            Estimate::from_counts(hits, n)
        })
        .collect()
}

pub fn curve_from_estimates(gammas_db: &[f64], estimates: &[Estimate]) -> CoverageCurve {
    CoverageCurve {
        gammas_db: gammas_db.to_vec(),
        values: estimates.iter().map(|e| e.mean).collect(),
        method: Method::MonteCarlo,
        ci_halfwidths: Some(estimates.iter().map(|e| e.ci_halfwidth).collect()),
    }
}

/// Simulated coverage curve of `tier`.
pub fn estimate_coverage(
    tier: Tier,
    gammas_db: &[f64],
    params: &NetworkParams,
    cfg: &SimConfig,
) -> Result<CoverageCurve, SimError> {
    let run = simulate(params, cfg)?;
    Ok(curve_from_estimates(gammas_db, &coverage_from_run(&run, tier, gammas_db)))
}

/// Number of grid points of a tabulated empirical CDF.
pub const CDF_GRID_POINTS: usize = 512;

/// Empirical CDF tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub r_m: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl EmpiricalCdf {
    /// Tabulates on `[0, q_0.999]` from unsorted samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let sorted = sorted(samples);
        let n = sorted.len();
        let q_index = ((0.999 * n as f64).ceil() as usize).clamp(1, n) - 1;
        let top = sorted[q_index];
        let r_m: Vec<f64> = (0..CDF_GRID_POINTS).map(|i| top * i as f64 / (CDF_GRID_POINTS - 1) as f64).collect();
        let cdf = r_m.iter().map(|&r| sorted.partition_point(|&x| x <= r) as f64 / n as f64).collect();
        Self { r_m, cdf }
    }

    /// CSV with header `r_m,cdf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r_m,cdf")?;
        for (r, c) in self.r_m.iter().zip(&self.cdf) {
            writeln!(out, "{},{}", r, c)?;
        }
        Ok(())
    }
}

/// Empirical CDF of the serving distance of `tier`.
pub fn empirical_distance_cdf(tier: Tier, params: &NetworkParams, cfg: &SimConfig) -> Result<EmpiricalCdf, SimError> {
    let run = simulate(params, cfg)?;
    let samples: Vec<f64> = run.distances(tier).collect();
    Ok(EmpiricalCdf::from_samples(&samples))
}

pub fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov-Smirnov distance between a sorted sample and a continuous CDF.
pub fn ks_statistic<F: FnMut(f64) -> f64>(sorted_samples: &[f64], mut cdf: F) -> f64 {
    let n = sorted_samples.len() as f64;
    sorted_samples.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// DKW band half-width: the empirical CDF of `n` samples is within this of
/// the true CDF everywhere with probability `1 - alpha`.
pub fn dkw_halfwidth(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
