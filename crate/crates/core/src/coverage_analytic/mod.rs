//! Analytic coverage probability of the typical user under closed access.
//!
//! Four expressions are provided:
//!
//! * macro-served, lower bound: only the hole of the serving macro is carved
//!   out of the small-cell interference field;
//! * macro-served, upper bound: additionally every interfering macro carves
//!   its own hole, ignoring overlaps between holes;
//! * small-cell-served with only the closest hole carved out;
//! * small-cell-served with every macro carving its own hole.
//!
//! The two small-cell expressions average over the one-hole serving-distance
//! law `Ẑ2`, which understates the true `Z2`, so neither is a strict bound.
//!
//! The hole correction for small-cell-served users is `G2 = exp(g)` with `g`
//! the plain integral returned by [`g_removed`]. A literal transcription that
//! wraps `g` in a second exponential would make `G2 = exp(exp(∫))`, which is
//! not even 1 when the hole is out of reach; that reading is rejected.

mod kernels;
mod memo;

pub use kernels::{
    f_removed, g1_beyond, g1_hat, g1_inside, g3_macro, g_removed, shot_noise_tail, sinc, zeta, LaplaceArg,
};

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{NetworkParams, ParamError};
use crate::quadrature::{integrate, integrate_tail, integrate_with_breaks, QuadConfig, QuadError, QuadResult};
use crate::serving_distance::{pdf_z1, pdf_z2hat, ConditionalDistanceDist};
pub(crate) use kernels::pow_alpha;
use kernels::zeta_complement;
use memo::TailMemo;

/// Values above 1 by more than this are reported before clamping.
const OVERSHOOT_WARN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("z1 = {z1} is outside (0, D) for hole radius {hole_radius}")]
    Domain { z1: f64, hole_radius: f64 },
    #[error("SIR threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("Laplace argument must be non-negative and finite, got {0}")]
    InvalidLaplaceArg(f64),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("Monte Carlo curves have no analytic evaluator")]
    NotAnalytic,
    #[error("malformed coverage curve: {0}")]
    MalformedCurve(&'static str),
}

/// SIR threshold γ as a linear power ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SirThreshold(f64);

impl SirThreshold {
    pub fn new(linear: f64) -> Result<Self, AnalyticError> {
        if linear > 0.0 && linear.is_finite() {
            Ok(Self(linear))
        } else {
            Err(AnalyticError::InvalidThreshold(linear))
        }
    }

    pub fn from_db(db: f64) -> Self {
        Self(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }

    fn validate(self) -> Result<Self, AnalyticError> {
        Self::new(self.0)
    }
}

/// Which curve a set of coverage values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "T1_lower")]
    MacroLower,
    #[serde(rename = "T2_upper")]
    MacroUpper,
    #[serde(rename = "T3_approx")]
    SmallClosestHole,
    #[serde(rename = "T4_approx")]
    SmallAllHoles,
    #[serde(rename = "MC")]
    MonteCarlo,
}

impl Method {
    pub const ANALYTIC: [Method; 4] =
        [Method::MacroLower, Method::MacroUpper, Method::SmallClosestHole, Method::SmallAllHoles];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MacroLower => "T1_lower",
            Method::MacroUpper => "T2_upper",
            Method::SmallClosestHole => "T3_approx",
            Method::SmallAllHoles => "T4_approx",
            Method::MonteCarlo => "MC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coverage probability against a list of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub gammas_db: Vec<f64>,
    pub values: Vec<f64>,
    pub method: Method,
    pub ci_halfwidths: Option<Vec<f64>>,
}

impl CoverageCurve {
    pub fn new(
        gammas_db: Vec<f64>,
        values: Vec<f64>,
        method: Method,
        ci_halfwidths: Option<Vec<f64>>,
    ) -> Result<Self, AnalyticError> {
        if gammas_db.len() != values.len() {
            return Err(AnalyticError::MalformedCurve("gamma and value lists differ in length"));
        }
        if let Some(ci) = &ci_halfwidths {
            if ci.len() != values.len() {
                return Err(AnalyticError::MalformedCurve("CI list differs in length"));
            }
            if ci.iter().any(|c| c.is_nan() || *c < 0.0) {
                return Err(AnalyticError::MalformedCurve("negative CI half-width"));
            }
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(AnalyticError::MalformedCurve("value outside [0, 1]"));
        }
        Ok(Self { gammas_db, values, method, ci_halfwidths })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest pointwise `|self - other|`, or `None` if the grids differ.
    pub fn max_abs_diff(&self, other: &CoverageCurve) -> Option<f64> {
        if self.gammas_db != other.gammas_db {
            return None;
        }
        Some(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Rows under the header `gamma_dB,value,method,ci_halfwidth`; the CI
    /// column is empty for analytic curves.
    pub fn write_rows<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (i, (g, v)) in self.gammas_db.iter().zip(&self.values).enumerate() {
            match &self.ci_halfwidths {
                Some(ci) => writeln!(out, "{},{},{},{}", g, v, self.method, ci[i])?,
                None => writeln!(out, "{},{},{},", g, v, self.method)?,
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", CURVE_CSV_HEADER)?;
        self.write_rows(&mut out)
    }
}

pub const CURVE_CSV_HEADER: &str = "gamma_dB,value,method,ci_halfwidth";

/// Quadrature settings for the three nesting levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Innermost integrals: hole corrections and shot-noise tails.
    pub leaf: QuadConfig,
    /// Integrals over interfering-macro distance.
    pub middle: QuadConfig,
    /// Integrals over the serving distances.
    pub outer: QuadConfig,
    /// Tail-integral requests served directly before the memo tabulates;
    /// the inner integrals nearly always need more than a handful, so the
    /// default tabulates on first use.
    pub memo_threshold: usize,
    /// Density level below which the serving-distance laws are truncated.
    pub density_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            leaf: QuadConfig::default().with_rel_tol(1e-9).with_abs_tol(1e-14),
            middle: QuadConfig::default().with_rel_tol(1e-8).with_abs_tol(1e-12),
            outer: QuadConfig::default().with_rel_tol(1e-7).with_abs_tol(1e-10),
            memo_threshold: 0,
            density_floor: 1e-16,
        }
    }
}

/// One analytic coverage value with its numerical metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageResult {
    /// Value clamped into `[0, 1]`.
    pub value: f64,
    pub raw_value: f64,
    pub abs_error: f64,
    pub z1_truncation_m: f64,
    pub z2_truncation_m: Option<f64>,
    pub clamped: bool,
}

/// Keeps the first error raised inside an integrand; the integrand itself
/// returns 0 so the enclosing quadrature can finish.
struct FirstError(Cell<Option<AnalyticError>>);

impl FirstError {
    fn new() -> Self {
        Self(Cell::new(None))
    }

    fn value(&self, r: Result<f64, AnalyticError>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                if self.0.get().is_none() {
                    self.0.set(Some(e));
                }
                0.0
            }
        }
    }

    fn finish(&self, r: Result<QuadResult, QuadError>) -> Result<QuadResult, AnalyticError> {
        if let Some(e) = self.0.take() {
            return Err(e);
        }
        Ok(r?)
    }
}

/// Accepts the partial value of an inner integral that ran out of
/// subdivisions; the error estimate of an inner integral is not propagated.
pub(crate) fn settle(r: Result<QuadResult, QuadError>) -> Result<f64, QuadError> {
    match r {
        Ok(q) => Ok(q.value),
        Err(QuadError::MaxSubdivisionsExceeded { value, abs_error }) => {
            log::debug!("inner integral stopped at subdivision limit: {value} ± {abs_error}");
            Ok(value)
        }
        Err(e) => Err(e),
    }
}

fn settle_analytic(r: Result<f64, AnalyticError>) -> Result<f64, AnalyticError> {
    match r {
        Err(AnalyticError::Quadrature(QuadError::MaxSubdivisionsExceeded { value, .. })) => Ok(value),
        other => other,
    }
}

fn sorted_breaks(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    pts.extend(interior.iter().copied().filter(|x| *x > lo && *x < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Evaluates the four coverage expressions for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEvaluator {
    params: NetworkParams,
    cfg: EvalConfig,
    z1_max: f64,
    z2_max: f64,
}

impl CoverageEvaluator {
    pub fn new(params: NetworkParams, cfg: EvalConfig) -> Result<Self, AnalyticError> {
        params.validate()?;
        let z1_max = NetworkParams::rayleigh_truncation(params.lambda1, cfg.density_floor);
        let r2 = NetworkParams::rayleigh_truncation(params.lambda2, cfg.density_floor);
        let z2_max = r2.hypot(params.hole_radius);
        Ok(Self { params, cfg, z1_max, z2_max })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    /// Truncation radius of the macro serving distance.
    pub fn z1_truncation(&self) -> f64 {
        self.z1_max
    }

    /// Truncation radius of the small-cell serving distance.
    pub fn z2_truncation(&self) -> f64 {
        self.z2_max
    }

    pub fn evaluate(&self, method: Method, gamma: SirThreshold) -> Result<CoverageResult, AnalyticError> {
        match method {
            Method::MacroLower => self.macro_lower(gamma),
            Method::MacroUpper => self.macro_upper(gamma),
            Method::SmallClosestHole => self.small_closest_hole(gamma),
            Method::SmallAllHoles => self.small_all_holes(gamma),
            Method::MonteCarlo => Err(AnalyticError::NotAnalytic),
        }
    }

    /// Evaluates `method` at every threshold, in parallel over thresholds.
    pub fn curve(&self, method: Method, gammas_db: &[f64]) -> Result<CoverageCurve, AnalyticError> {
        let results: Result<Vec<CoverageResult>, AnalyticError> =
            gammas_db.par_iter().map(|&g| self.evaluate(method, SirThreshold::from_db(g))).collect();
        let values = results?.into_iter().map(|r| r.value).collect();
        CoverageCurve::new(gammas_db.to_vec(), values, method, None)
    }

    pub fn macro_lower(&self, gamma: SirThreshold) -> Result<CoverageResult, AnalyticError> {
        self.macro_coverage(gamma.validate()?, false)
    }

    pub fn macro_upper(&self, gamma: SirThreshold) -> Result<CoverageResult, AnalyticError> {
        self.macro_coverage(gamma.validate()?, true)
    }

    pub fn small_closest_hole(&self, gamma: SirThreshold) -> Result<CoverageResult, AnalyticError> {
        self.small_coverage(gamma.validate()?, false)
    }

    pub fn small_all_holes(&self, gamma: SirThreshold) -> Result<CoverageResult, AnalyticError> {
        self.small_coverage(gamma.validate()?, true)
    }

    fn finish(&self, raw: f64, abs_error: f64, z2: Option<f64>) -> CoverageResult {
        if raw > 1.0 + OVERSHOOT_WARN {
            log::warn!("coverage evaluated to {raw}, above 1; clamping");
        }
        let value = raw.clamp(0.0, 1.0);
        CoverageResult {
            value,
            raw_value: raw,
            abs_error,
            z1_truncation_m: self.z1_max,
            z2_truncation_m: z2,
            clamped: value != raw,
        }
    }

    fn macro_coverage(&self, gamma: SirThreshold, upper: bool) -> Result<CoverageResult, AnalyticError> {
        let d = self.params.hole_radius;
        let errs = FirstError::new();
        let integrand = |z1: f64| {
            if z1 <= 0.0 {
                return 0.0;
            }
            errs.value(self.macro_integrand(gamma, z1, upper, &errs))
        };
        let breaks = sorted_breaks(0.0, self.z1_max, &[d]);
        let r = errs.finish(integrate_with_breaks(integrand, &breaks, &self.cfg.outer))?;
        Ok(self.finish(r.value, r.abs_error, None))
    }

    fn macro_integrand(
        &self,
        gamma: SirThreshold,
        z1: f64,
        upper: bool,
        errs: &FirstError,
    ) -> Result<f64, AnalyticError> {
        let p = &self.params;
        let weight = pdf_z1(z1, p.lambda1);
        if weight == 0.0 {
            return Ok(0.0);
        }
        let s = LaplaceArg::for_macro(gamma, z1, p);
        let small =
            if z1 < p.hole_radius { g1_inside(s, z1, p, &self.cfg.leaf)? } else { g1_hat(s, p.lambda2, p.p2, p.alpha) };
        let hole = settle_analytic(f_removed(s, z1, p, &self.cfg.leaf))?;
        let macros =
            if upper { self.macro_factor_all_holes(s, z1, errs)? } else { g3_macro(s, z1, p, &self.cfg.leaf)? };
        Ok(weight * small * hole.exp() * macros)
    }

    /// `exp(-2πλ1 ∫_{z1}^∞ (1 - exp(f(s, v)) ζ(s, v)) v dv)`.
    fn macro_factor_all_holes(&self, s: LaplaceArg, z1: f64, errs: &FirstError) -> Result<f64, AnalyticError> {
        let p = &self.params;
        let sp1 = s.value() * p.p1;
        if sp1 == 0.0 {
            return Ok(1.0);
        }
        let d = p.hole_radius;
        let h = |v: f64| {
            let zc = zeta_complement(sp1, v, p.alpha);
            let f = errs.value(settle_analytic(f_removed(s, v, p, &self.cfg.leaf)));
            // 1 - e^f ζ without cancellation.
            (zc - f.exp_m1() * (1.0 - zc)) * v
        };
        let scale = (sp1.powf(1.0 / p.alpha)).max(d).max(z1);
        let mut total = 0.0;
        let mut start = z1;
        if z1 < d {
            total += settle(integrate(h, z1, d, &self.cfg.middle))?;
            start = d;
        }
        total += settle(integrate_tail(h, start, scale, &self.cfg.middle))?;
        Ok((-2.0 * PI * p.lambda1 * total).exp())
    }

    /// Small-cell coverage with the integration order swapped: outer over
    /// `ẑ2`, inner over `z1`. For fixed `ẑ2` the Laplace argument does not
    /// depend on `z1`, which lets the all-holes macro factor be memoized.
    fn small_coverage(&self, gamma: SirThreshold, all_holes: bool) -> Result<CoverageResult, AnalyticError> {
        let d = self.params.hole_radius;
        let errs = FirstError::new();
        let integrand = |z2: f64| {
            if z2 <= 0.0 {
                return 0.0;
            }
            errs.value(self.small_outer_integrand(gamma, z2, all_holes))
        };
        let breaks = sorted_breaks(0.0, self.z2_max, &[d]);
        let r = errs.finish(integrate_with_breaks(integrand, &breaks, &self.cfg.outer))?;
        Ok(self.finish(r.value, r.abs_error, Some(self.z2_max)))
    }

    fn small_outer_integrand(&self, gamma: SirThreshold, z2: f64, all_holes: bool) -> Result<f64, AnalyticError> {
        let p = &self.params;
        let s = LaplaceArg::for_small(gamma, z2, p);
        let small = g1_beyond(s, z2, p, &self.cfg.leaf)?;
        if small == 0.0 {
            return Ok(0.0);
        }
        Ok(small * self.small_inner(s, z2, all_holes)?)
    }

    /// `∫ f_Z1(z1) f(ẑ2 | z1) exp(g(s, z1, ẑ2)) ζ(s, z1) M(z1) dz1`, where `M`
    /// is the Laplace factor of the macros beyond `z1`.
    fn small_inner(&self, s: LaplaceArg, z2: f64, all_holes: bool) -> Result<f64, AnalyticError> {
        let p = *self.params();
        let d = p.hole_radius;
        let sp1 = s.value() * p.p1;
        let lo = (d - z2).max(0.0);
        let hi = self.z1_max;
        if lo >= hi {
            return Ok(0.0);
        }
        let kinks = [z2 - d, d - z2, z2 + d, d];
        let breaks = sorted_breaks(lo, hi, &kinks);
        let errs = FirstError::new();
        let leaf = self.cfg.leaf;

        let serving = |z1: f64| -> Result<f64, AnalyticError> {
            let weight = pdf_z1(z1, p.lambda1);
            if weight == 0.0 {
                return Ok(0.0);
            }
            let cond = ConditionalDistanceDist { params: p, z1 };
            let density = pdf_z2hat(z2, &cond);
            if density == 0.0 {
                return Ok(0.0);
            }
            let hole = settle_analytic(g_removed(s, z1, z2, &p, &leaf))?;
            let closest = 1.0 - zeta_complement(sp1, z1, p.alpha);
            Ok(weight * density * hole.exp() * closest)
        };

        let r = if all_holes {
            let h = |v: f64| {
                let zc = zeta_complement(sp1, v, p.alpha);
                let g = errs.value(settle_analytic(g_removed(s, v, z2, &p, &leaf)));
                (zc - g.exp_m1() * (1.0 - zc)) * v
            };
            let scale = sp1.powf(1.0 / p.alpha).max(d).max(z2).max(1.0);
            let mut memo = TailMemo::new(h, lo, hi, &kinks, scale, self.cfg.middle, self.cfg.memo_threshold);
            integrate_with_breaks(
                |z1: f64| {
                    if z1 <= 0.0 {
                        return 0.0;
                    }
                    let base = errs.value(serving(z1));
                    if base == 0.0 {
                        return 0.0;
                    }
                    let tail = errs.value(memo.at(z1).map_err(AnalyticError::from));
                    base * (-2.0 * PI * p.lambda1 * tail).exp()
                },
                &breaks,
                &self.cfg.middle,
            )
        } else {
            integrate_with_breaks(
                |z1: f64| {
                    if z1 <= 0.0 {
                        return 0.0;
                    }
                    let base = errs.value(serving(z1));
                    if base == 0.0 {
                        return 0.0;
                    }
                    let tail = errs.value(shot_noise_tail(sp1, z1, p.alpha, &leaf).map_err(AnalyticError::from));
                    base * (-2.0 * PI * p.lambda1 * tail).exp()
                },
                &breaks,
                &self.cfg.middle,
            )
        };
        settle_analytic(errs.finish(r).map(|q| q.value))
    }
}

pub fn macro_coverage_lower(gamma: SirThreshold, params: NetworkParams) -> Result<f64, AnalyticError> {
    Ok(CoverageEvaluator::new(params, EvalConfig::default())?.macro_lower(gamma)?.value)
}

pub fn macro_coverage_upper(gamma: SirThreshold, params: NetworkParams) -> Result<f64, AnalyticError> {
    Ok(CoverageEvaluator::new(params, EvalConfig::default())?.macro_upper(gamma)?.value)
}

pub fn small_coverage_closest_hole(gamma: SirThreshold, params: NetworkParams) -> Result<f64, AnalyticError> {
    Ok(CoverageEvaluator::new(params, EvalConfig::default())?.small_closest_hole(gamma)?.value)
}

pub fn small_coverage_all_holes(gamma: SirThreshold, params: NetworkParams) -> Result<f64, AnalyticError> {
    Ok(CoverageEvaluator::new(params, EvalConfig::default())?.small_all_holes(gamma)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Two independent PPPs at α = 4, closed access: coverage of the tier
    /// with density `own`, power `p_own`, against the other tier.
    fn two_ppp_alpha4(gamma: f64, own: f64, p_own: f64, other: f64, p_other: f64) -> f64 {
        let rho = gamma.sqrt() * (PI / 2.0 - (1.0 / gamma.sqrt()).atan());
        1.0 / (1.0 + rho + other / own * (gamma * p_other / p_own).sqrt() * PI / 2.0)
    }

    fn eval(params: NetworkParams) -> CoverageEvaluator {
        CoverageEvaluator::new(params, EvalConfig::default()).unwrap()
    }

    #[test]
    fn threshold_conversions() {
        assert_relative_eq!(SirThreshold::from_db(10.0).linear(), 10.0, max_relative = 1e-15);
        assert_relative_eq!(SirThreshold::from_db(-3.0).db(), -3.0, max_relative = 1e-12);
        assert!(SirThreshold::new(0.0).is_err());
        assert!(SirThreshold::new(f64::NAN).is_err());
    }

    #[test]
    fn zero_threshold_limit() {
        for params in [NetworkParams::setup1(), NetworkParams::setup2()] {
            let e = eval(params);
            // Coverage approaches 1 like √γ at α = 4.
            let g = SirThreshold::new(1e-16).unwrap();
            assert!((e.macro_lower(g).unwrap().value - 1.0).abs() < 1e-6);
            assert!((e.macro_upper(g).unwrap().value - 1.0).abs() < 1e-6);
            assert!((e.small_closest_hole(g).unwrap().value - 1.0).abs() < 1e-5);
            assert!((e.small_all_holes(g).unwrap().value - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn huge_threshold_limit() {
        let e = eval(NetworkParams::setup1());
        let g = SirThreshold::from_db(80.0);
        for m in Method::ANALYTIC {
            assert!(e.evaluate(m, g).unwrap().value < 1e-3, "{m}");
        }
    }

    #[test]
    fn no_holes_matches_two_ppp_closed_form() {
        let p = NetworkParams::setup1().with_hole_radius(0.0);
        let e = eval(p);
        for gdb in [-10.0, 0.0, 12.0] {
            let g = SirThreshold::from_db(gdb);
            let macro_exact = two_ppp_alpha4(g.linear(), p.lambda1, p.p1, p.lambda2, p.p2);
            let small_exact = two_ppp_alpha4(g.linear(), p.lambda2, p.p2, p.lambda1, p.p1);
            for (m, exact) in [
                (Method::MacroLower, macro_exact),
                (Method::MacroUpper, macro_exact),
                (Method::SmallClosestHole, small_exact),
                (Method::SmallAllHoles, small_exact),
            ] {
                let v = e.evaluate(m, g).unwrap().value;
                assert!((v - exact).abs() < 1e-6, "{m} at {gdb} dB: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn single_tier_classical_value() {
        let p = NetworkParams::setup1().with_hole_radius(0.0).with_lambda2(1e-15);
        let e = eval(p);
        let g = SirThreshold::new(1.0).unwrap();
        let exact = 1.0 / (1.0 + PI / 4.0);
        assert_relative_eq!(exact, 0.56010, epsilon = 1e-5);
        assert!((e.macro_lower(g).unwrap().value - exact).abs() < 1e-4);
        assert!((e.macro_upper(g).unwrap().value - exact).abs() < 1e-4);
        let p = NetworkParams::setup1().with_hole_radius(0.0).with_lambda1(1e-15);
        let e = eval(p);
        assert!((e.small_closest_hole(g).unwrap().value - exact).abs() < 1e-4);
    }

    #[test]
    fn outer_integrand_is_continuous_at_hole_edge() {
        let p = NetworkParams::setup1();
        let e = eval(p);
        let g = SirThreshold::from_db(0.0);
        let errs = FirstError::new();
        let d = p.hole_radius;
        for upper in [false, true] {
            let below = e.macro_integrand(g, d * (1.0 - 1e-12), upper, &errs).unwrap();
            let at = e.macro_integrand(g, d, upper, &errs).unwrap();
            assert!((below - at).abs() < 1e-6 * at.max(1e-300) + 1e-15, "{below} vs {at}");
        }
    }

    #[test]
    fn bounds_and_ordering_on_grid() {
        for params in [NetworkParams::setup1(), NetworkParams::setup2()] {
            let e = eval(params);
            let grid: Vec<f64> = (-10..=20).step_by(5).map(f64::from).collect();
            let t1 = e.curve(Method::MacroLower, &grid).unwrap();
            let t2 = e.curve(Method::MacroUpper, &grid).unwrap();
            let t3 = e.curve(Method::SmallClosestHole, &grid).unwrap();
            let t4 = e.curve(Method::SmallAllHoles, &grid).unwrap();
            for (i, g) in grid.iter().enumerate() {
                assert!(t1.values[i] <= t2.values[i] + 1e-9, "T1 > T2 at {g}");
                assert!(t3.values[i] <= t4.values[i] + 1e-9, "T3 > T4 at {g}");
            }
            for c in [&t1, &t2, &t3, &t4] {
                assert!(c.values.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{} not monotone", c.method);
            }
        }
    }

    #[test]
    fn tabulated_tail_matches_direct_evaluation() {
        for params in [NetworkParams::setup1(), NetworkParams::setup2()] {
            let tab = eval(params);
            let direct =
                CoverageEvaluator::new(params, EvalConfig { memo_threshold: usize::MAX, ..EvalConfig::default() })
                    .unwrap();
            for gdb in [-5.0, 10.0] {
                let g = SirThreshold::from_db(gdb);
                let a = tab.small_all_holes(g).unwrap().value;
                let b = direct.small_all_holes(g).unwrap().value;
                assert!((a - b).abs() < 1e-7, "{gdb} dB: {a} vs {b}");
            }
        }
    }

    #[test]
    fn curve_csv_layout() {
        let c = CoverageCurve::new(vec![-1.0, 0.5], vec![0.75, 0.5], Method::MacroUpper, None).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "gamma_dB,value,method,ci_halfwidth\n-1,0.75,T2_upper,\n0.5,0.5,T2_upper,\n"
        );
        let mc = CoverageCurve::new(vec![0.0], vec![0.25], Method::MonteCarlo, Some(vec![0.01])).unwrap();
        let mut buf = Vec::new();
        mc.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("0,0.25,MC,0.01\n"));
        assert!(CoverageCurve::new(vec![0.0], vec![1.5], Method::MacroLower, None).is_err());
        assert!(CoverageCurve::new(vec![0.0, 1.0], vec![0.5], Method::MacroLower, None).is_err());
    }

    #[test]
    fn method_tags() {
        assert_eq!(serde_json::to_string(&Method::SmallAllHoles).unwrap(), "\"T4_approx\"");
        assert_eq!(Method::MonteCarlo.to_string(), "MC");
        let e = eval(NetworkParams::setup1());
        assert_eq!(e.evaluate(Method::MonteCarlo, SirThreshold::from_db(0.0)), Err(AnalyticError::NotAnalytic));
    }
}
