//! Distance from the typical user to its nearest macro BS (`Z1`) and the
//! one-hole approximation `Ẑ2` of the distance to its nearest small cell.
//!
//! `Ẑ2` treats the small-cell tier as the baseline PPP with only the hole of
//! the nearest macro carved out, so conditioned on `Z1 = z1` the void
//! probability of `b(0, z)` is `exp(-λ2 (π z² - A_ins(z, z1)))`, where
//! `A_ins` is the lens area shared with `b(z1, D)`. Because the other holes
//! are ignored, `Ẑ2` is stochastically smaller than the true `Z2`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::geometry::{lens_area, lens_area_dr_total, LensQuery, Overlap};
use crate::quadrature::{integrate_with_breaks, QuadConfig, QuadError};

pub use crate::params::NetworkParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("conditioning distance must be positive, got {0}")]
    InvalidConditioning(f64),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("survival inversion failed: target {target} not bracketed")]
    RootNotBracketed { target: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Density of the distance to the nearest point of a PPP of density `lambda1`.
pub fn pdf_z1(z1: f64, lambda1: f64) -> f64 {
    if z1 <= 0.0 {
        return 0.0;
    }
    2.0 * PI * lambda1 * z1 * (-PI * lambda1 * z1 * z1).exp()
}

pub fn cdf_z1(z1: f64, lambda1: f64) -> f64 {
    if z1 <= 0.0 {
        return 0.0;
    }
    -(-PI * lambda1 * z1 * z1).exp_m1()
}

/// Law of `Ẑ2` given the nearest-macro distance `z1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalDistanceDist {
    pub params: NetworkParams,
    pub z1: f64,
}

impl ConditionalDistanceDist {
    pub fn new(params: NetworkParams, z1: f64) -> Result<Self, DistanceError> {
        if !(z1 > 0.0 && z1.is_finite()) {
            return Err(DistanceError::InvalidConditioning(z1));
        }
        Ok(Self { params, z1 })
    }

    /// Smallest possible value: a user inside the hole is at least `D - z1`
    /// from every small cell.
    pub fn support_start(&self) -> f64 {
        (self.params.hole_radius - self.z1).max(0.0)
    }

    fn lens(&self, z: f64) -> LensQuery {
        LensQuery::new(z, self.params.hole_radius, self.z1)
    }

    pub fn survival(&self, z: f64) -> f64 {
        survival_z2hat(z, self)
    }

    pub fn pdf(&self, z: f64) -> f64 {
        pdf_z2hat(z, self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, DistanceError> {
        sample_z2hat(self, rng)
    }
}

/// `P(Ẑ2 > z | Z1 = z1)`.
pub fn survival_z2hat(z: f64, cond: &ConditionalDistanceDist) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let lambda2 = cond.params.lambda2;
    let shadow = lens_area(cond.lens(z));
    (-lambda2 * (PI * z * z - shadow).max(0.0)).exp()
}

/// Density of `Ẑ2` given `Z1 = z1`; zero outside the support.
pub fn pdf_z2hat(z: f64, cond: &ConditionalDistanceDist) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let lambda2 = cond.params.lambda2;
    let d = cond.params.hole_radius;
    let q = cond.lens(z);
    match q.overlap() {
        Overlap::CenteredInside => 0.0,
        Overlap::Disjoint => 2.0 * PI * lambda2 * z * (-PI * lambda2 * z * z).exp(),
        Overlap::HoleInside => 2.0 * PI * lambda2 * z * (-PI * lambda2 * (z * z - d * d)).exp(),
        Overlap::Partial => {
            let shadow = lens_area(q);
            let arc = lens_area_dr_total(q);
            let rate = (2.0 * PI * lambda2 * z - lambda2 * arc).max(0.0);
            rate * (-lambda2 * (PI * z * z - shadow).max(0.0)).exp()
        }
    }
}

/// Draws `Ẑ2 | Z1` by inverting the survival function.
pub fn sample_z2hat<R: Rng + ?Sized>(cond: &ConditionalDistanceDist, rng: &mut R) -> Result<f64, DistanceError> {
    // 1 - U keeps the target in (0, 1].
    let u = 1.0 - rng.gen::<f64>();
    invert_survival(cond, u)
}

/// Smallest `z` with `P(Ẑ2 > z | z1) <= target`.
pub fn invert_survival(cond: &ConditionalDistanceDist, target: f64) -> Result<f64, DistanceError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(DistanceError::RootNotBracketed { target });
    }
    let lambda2 = cond.params.lambda2;
    let d = cond.params.hole_radius;
    let z1 = cond.z1;
    let log_target = -target.ln();

    // Pure-PPP region before the hole is reached.
    let near = (log_target / (PI * lambda2)).sqrt();
    if z1 > d && near <= z1 - d {
        return Ok(near);
    }
    // Region past the hole: the whole disc of area πD² is shadowed.
    let far = (d * d + log_target / (PI * lambda2)).sqrt();
    if far >= z1 + d {
        return Ok(far);
    }

    let mut lo = (z1 - d).abs();
    let mut hi = z1 + d;
    let f = |z: f64| survival_z2hat(z, cond) - target;
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(DistanceError::RootNotBracketed { target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sorted, de-duplicated quadrature breakpoints in `z1` for a fixed `z` on
/// `[0, z + D]`: the places where the conditional law changes branch.
fn z1_breaks(z: f64, d: f64) -> Vec<f64> {
    let end = z + d;
    let mut pts = vec![0.0, (d - z).abs(), d, end];
    pts.retain(|p| *p >= 0.0 && *p <= end);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Marginal density of `Ẑ2` after averaging over `Z1`.
///
/// For `z1 >= z + D` the hole cannot touch `b(0, z)`, so the conditional law
/// is the pure-PPP one and that part of the `z1` integral is closed form.
pub fn marginal_pdf_z2hat(z: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, DistanceError> {
    if z < 0.0 {
        return Err(DistanceError::NegativeDistance(z));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let d = params.hole_radius;
    let rayleigh = 2.0 * PI * params.lambda2 * z * (-PI * params.lambda2 * z * z).exp();
    let far_mass = 1.0 - cdf_z1(z + d, params.lambda1);
    if d == 0.0 {
        return Ok(rayleigh);
    }
    let near = integrate_with_breaks(
        |z1| {
            if z1 <= 0.0 {
                return 0.0;
            }
            let cond = ConditionalDistanceDist { params: *params, z1 };
            pdf_z2hat(z, &cond) * pdf_z1(z1, params.lambda1)
        },
        &z1_breaks(z, d),
        cfg,
    )?;
    Ok(near.value + rayleigh * far_mass)
}

/// Marginal `P(Ẑ2 > z)`.
pub fn marginal_survival_z2hat(z: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, DistanceError> {
    if z < 0.0 {
        return Err(DistanceError::NegativeDistance(z));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let d = params.hole_radius;
    let pure = (-PI * params.lambda2 * z * z).exp();
    if d == 0.0 {
        return Ok(pure);
    }
    let far_mass = 1.0 - cdf_z1(z + d, params.lambda1);
    let near = integrate_with_breaks(
        |z1| {
            if z1 <= 0.0 {
                return 0.0;
            }
            let cond = ConditionalDistanceDist { params: *params, z1 };
            survival_z2hat(z, &cond) * pdf_z1(z1, params.lambda1)
        },
        &z1_breaks(z, d),
        cfg,
    )?;
    Ok((near.value + pure * far_mass).clamp(0.0, 1.0))
}

pub fn marginal_cdf_z2hat(z: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, DistanceError> {
    marginal_survival_z2hat(z, params, cfg).map(|s| 1.0 - s)
}

/// One row of a tabulated marginal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub z_m: f64,
    pub pdf_per_m: f64,
    pub survival: f64,
}

/// Tabulates the marginal law of `Ẑ2` at `points` evenly spaced values on
/// `[0, z_max]`.
pub fn tabulate_marginal(
    params: &NetworkParams,
    z_max: f64,
    points: usize,
    cfg: &QuadConfig,
) -> Result<Vec<DistanceRow>, DistanceError> {
    let n = points.max(2);
    (0..n)
        .map(|i| {
            let z = z_max * i as f64 / (n - 1) as f64;
            Ok(DistanceRow {
                z_m: z,
                pdf_per_m: marginal_pdf_z2hat(z, params, cfg)?,
                survival: marginal_survival_z2hat(z, params, cfg)?,
            })
        })
        .collect()
}

/// CSV with header `z_m,pdf_per_m,survival`.
pub fn write_distance_csv<W: Write>(rows: &[DistanceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "z_m,pdf_per_m,survival")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.z_m, r.pdf_per_m, r.survival)?;
    }
    Ok(())
}
