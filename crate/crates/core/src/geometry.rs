//! Circle-circle intersection quantities.
//!
//! Everything here is phrased for one circle centered at the origin (radius
//! `r_centered`) and one "hole" circle of radius `r_hole` whose center sits at
//! distance `d` from the origin. The lens area is the mass of a baseline PPP
//! shadowed by the hole; its radial derivative is the arc of the centered
//! circle that lies inside the hole.

use std::f64::consts::PI;

use thiserror::Error;

/// Slack allowed on `acos` arguments before they are treated as invalid.
pub const ACOS_CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("negative radicand {0} in lens triangle term")]
    NegativeRadicand(f64),
    #[error("arccos argument {0} outside [-1, 1]")]
    ArgumentOutOfRange(f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("query is not in the partial-overlap regime")]
    OutsideOverlapRegime,
}

/// Arguments of a two-circle intersection query. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensQuery {
    pub r_centered: f64,
    pub r_hole: f64,
    pub d: f64,
}

/// How two circles sit relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Disjoint,
    /// The centered circle lies entirely inside the hole.
    CenteredInside,
    /// The hole lies entirely inside the centered circle.
    HoleInside,
    Partial,
}

impl LensQuery {
    pub fn new(r_centered: f64, r_hole: f64, d: f64) -> Self {
        Self { r_centered, r_hole, d }
    }

    pub fn overlap(&self) -> Overlap {
        let (r, rh, d) = (self.r_centered, self.r_hole, self.d);
        if d >= r + rh {
            Overlap::Disjoint
        } else if d + r <= rh {
            Overlap::CenteredInside
        } else if d + rh <= r {
            Overlap::HoleInside
        } else {
            Overlap::Partial
        }
    }
}

fn clamped_acos(arg: f64) -> Result<f64, GeometryError> {
    if !arg.is_finite() || arg.abs() > 1.0 + ACOS_CLAMP_TOL {
        return Err(GeometryError::ArgumentOutOfRange(arg));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// Four times the area of the triangle with sides `kappa`, `zeta`, `eta`
/// (Heron's form).
pub fn fn_a(kappa: f64, zeta: f64, eta: f64) -> Result<f64, GeometryError> {
    let first = kappa * kappa - (eta - zeta).powi(2);
    let second = (zeta + eta).powi(2) - kappa * kappa;
    let product = first * second;
    if product >= 0.0 {
        return Ok(product.sqrt());
    }
    // Rounding at tangency can leave a tiny negative product.
    let scale = (kappa * kappa + (zeta + eta).powi(2)).powi(2);
    if product >= -1e-12 * scale {
        Ok(0.0)
    } else {
        Err(GeometryError::NegativeRadicand(product))
    }
}

/// Circular-sector area `kappa^2 * acos((kappa^2 - zeta^2 + eta^2) / (2 kappa eta))`.
pub fn fn_b(kappa: f64, zeta: f64, eta: f64) -> Result<f64, GeometryError> {
    if kappa <= 0.0 {
        return Err(GeometryError::NonPositiveRadius(kappa));
    }
    if eta <= 0.0 {
        return Err(GeometryError::NonPositiveRadius(eta));
    }
    let arg = (kappa * kappa - zeta * zeta + eta * eta) / (2.0 * kappa * eta);
    Ok(kappa * kappa * clamped_acos(arg)?)
}

/// Area of `b(0, r_centered) ∩ b(c, r_hole)` with `|c| = d`, in every regime.
pub fn lens_area(q: LensQuery) -> f64 {
    let LensQuery { r_centered: r, r_hole: rh, d } = q;
    match q.overlap() {
        Overlap::Disjoint => 0.0,
        Overlap::CenteredInside | Overlap::HoleInside => PI * r.min(rh).powi(2),
        Overlap::Partial => {
            // Partial overlap implies r, rh, d > 0 and a valid triangle, so
            // these only fail through rounding right at a regime boundary.
            let area =
                fn_b(rh, r, d).unwrap_or(0.0) + fn_b(r, rh, d).unwrap_or(0.0) - 0.5 * fn_a(rh, r, d).unwrap_or(0.0);
            area.clamp(0.0, PI * r.min(rh).powi(2))
        }
    }
}

/// `d lens_area / d r_centered` in the partial-overlap regime: the length of
/// the arc of the centered circle lying inside the hole.
pub fn lens_area_dr(q: LensQuery) -> Result<f64, GeometryError> {
    if q.overlap() != Overlap::Partial {
        return Err(GeometryError::OutsideOverlapRegime);
    }
    let LensQuery { r_centered: r, r_hole: rh, d } = q;
    Ok(2.0 * r * arc_half_angle(r, rh, d))
}

/// [`lens_area_dr`] extended to all regimes: 0 when disjoint or when the hole
/// is swallowed, the full circumference when the centered circle is inside.
pub fn lens_area_dr_total(q: LensQuery) -> f64 {
    match q.overlap() {
        Overlap::Disjoint | Overlap::HoleInside => 0.0,
        Overlap::CenteredInside => 2.0 * PI * q.r_centered,
        Overlap::Partial => lens_area_dr(q).unwrap_or(0.0),
    }
}

/// Half-angle `acos((r^2 + d^2 - rh^2) / (2 r d))` of the arc of radius `r`
/// (about the origin) inside a hole of radius `rh` centered at distance `d`.
/// Returns 0 outside the hole and π when the whole circle is inside.
pub fn arc_half_angle(r: f64, r_hole: f64, d: f64) -> f64 {
    if r <= 0.0 || d <= 0.0 {
        return if d < r_hole { PI } else { 0.0 };
    }
    // 1 - cos φ = (rh² - (r - d)²) / (2 r d), factored so that nothing
    // cancels when r and d are both much larger than rh.
    let gap = r - d;
    let versine = (r_hole - gap) * (r_hole + gap) / (2.0 * r * d);
    if versine <= 0.0 {
        0.0
    } else if versine >= 2.0 {
        PI
    } else {
        2.0 * (0.5 * versine).sqrt().asin()
    }
}
