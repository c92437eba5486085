//! Laplace-transform building blocks shared by the four coverage evaluators.
//!
//! With Rayleigh fading, an interferer at distance `r` transmitting with
//! power `P` contributes the factor `1 / (1 + s P r^-α)` to the conditional
//! coverage probability. Integrating its complement over a region of a PPP
//! of density λ gives the exponent of the corresponding Laplace factor.

use std::f64::consts::PI;

use crate::geometry::arc_half_angle;
use crate::params::NetworkParams;
use crate::quadrature::{integrate, integrate_tail, QuadConfig, QuadError};

use super::{AnalyticError, SirThreshold};

/// Argument `s` of the interference Laplace transform. For a macro-served
/// user `s = γ z1^α / P1`; for a small-cell-served user `s = γ ẑ2^α / P2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LaplaceArg(f64);

impl LaplaceArg {
    pub fn new(s: f64) -> Result<Self, AnalyticError> {
        if s >= 0.0 && s.is_finite() {
            Ok(Self(s))
        } else {
            Err(AnalyticError::InvalidLaplaceArg(s))
        }
    }

    pub fn for_macro(gamma: SirThreshold, z1: f64, params: &NetworkParams) -> Self {
        Self(gamma.linear() * pow_alpha(z1, params.alpha) / params.p1)
    }

    pub fn for_small(gamma: SirThreshold, z2: f64, params: &NetworkParams) -> Self {
        Self(gamma.linear() * pow_alpha(z2, params.alpha) / params.p2)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `x^α` with the common integer exponents kept off the `powf` path.
#[inline]
pub(crate) fn pow_alpha(x: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        let x2 = x * x;
        x2 * x2
    } else if alpha == 3.0 {
        x * x * x
    } else {
        x.powf(alpha)
    }
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Per-interferer factor `1 / (1 + s P1 v^-α)` of a macro BS at distance `v`.
pub fn zeta(s: LaplaceArg, v: f64, p1: f64, alpha: f64) -> f64 {
    let sp = s.0 * p1;
    if sp == 0.0 {
        return 1.0;
    }
    if v <= 0.0 {
        return 0.0;
    }
    let va = pow_alpha(v, alpha);
    va / (va + sp)
}

/// `1 - zeta`, computed without cancellation.
pub(crate) fn zeta_complement(sp: f64, v: f64, alpha: f64) -> f64 {
    if sp == 0.0 {
        return 0.0;
    }
    sp / (sp + pow_alpha(v, alpha))
}

/// `∫_x^∞ u / (1 + u^α) du`.
pub(crate) fn unit_tail(x: f64, alpha: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    if alpha == 4.0 {
        // atan(1/x²) rather than π/2 - atan(x²) keeps full precision for large x.
        let x2 = x * x;
        return Ok(0.5 * if x2 == 0.0 { PI / 2.0 } else { (1.0 / x2).atan() });
    }
    unit_tail_quad(x, alpha, cfg)
}

fn unit_tail_quad(x: f64, alpha: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    let r = integrate_tail(|u| u / (1.0 + pow_alpha(u, alpha)), x, x.max(1.0), cfg)?;
    Ok(r.value)
}

/// `∫_lower^∞ r / (1 + r^α / c) dr` for `c = s P`, by rescaling onto the
/// unit kernel.
pub fn shot_noise_tail(c: f64, lower: f64, alpha: f64, cfg: &QuadConfig) -> Result<f64, QuadError> {
    if c == 0.0 {
        return Ok(0.0);
    }
    let scale = c.powf(1.0 / alpha);
    Ok(scale * scale * unit_tail(lower.max(0.0) / scale, alpha, cfg)?)
}

/// Small-cell interference Laplace factor over the whole plane.
pub fn g1_hat(s: LaplaceArg, lambda2: f64, p2: f64, alpha: f64) -> f64 {
    let sp = s.0 * p2;
    if sp == 0.0 {
        return 1.0;
    }
    (-PI * lambda2 * sp.powf(2.0 / alpha) / sinc(2.0 / alpha)).exp()
}

/// Small-cell interference Laplace factor for a user inside its serving
/// macro's hole: no small cell is closer than `D - z1`.
pub fn g1_inside(s: LaplaceArg, z1: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, AnalyticError> {
    let d = params.hole_radius;
    if !(z1 > 0.0 && z1 < d) {
        return Err(AnalyticError::Domain { z1, hole_radius: d });
    }
    let tail = shot_noise_tail(s.0 * params.p2, d - z1, params.alpha, cfg)?;
    Ok((-2.0 * PI * params.lambda2 * tail).exp())
}

/// Small-cell interference Laplace factor with every small cell beyond the
/// serving distance `z2` counted.
pub fn g1_beyond(s: LaplaceArg, z2: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, AnalyticError> {
    let tail = shot_noise_tail(s.0 * params.p2, z2, params.alpha, cfg)?;
    Ok((-2.0 * PI * params.lambda2 * tail).exp())
}

/// Macro interference Laplace factor from macros beyond `z1`.
pub fn g3_macro(s: LaplaceArg, z1: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, AnalyticError> {
    let tail = shot_noise_tail(s.0 * params.p1, z1, params.alpha, cfg)?;
    Ok((-2.0 * PI * params.lambda1 * tail).exp())
}

/// Interference "removed" by a hole of radius D centered at distance
/// `center`, restricted to radii in `[lo, hi]`:
/// `2 λ2 ∫ acos((r² + c² - D²) / (2 c r)) r / (1 + r^α / (s P2)) dr`.
///
/// The substitution `r = lo + (hi - lo)(1 - cos θ)/2` absorbs the square-root
/// behavior of `acos` at the tangent radii.
fn hole_integral(
    s: LaplaceArg,
    center: f64,
    lo: f64,
    hi: f64,
    params: &NetworkParams,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError> {
    let d = params.hole_radius;
    let c = s.0 * params.p2;
    if hi <= lo || d == 0.0 || c == 0.0 || center <= 0.0 {
        return Ok(0.0);
    }
    let alpha = params.alpha;
    let half = 0.5 * (hi - lo);
    let r = integrate(
        |theta: f64| {
            let (sin_t, cos_t) = theta.sin_cos();
            let r = lo + half * (1.0 - cos_t);
            let weight = r * c / (c + pow_alpha(r, alpha));
            arc_half_angle(r, d, center) * weight * half * sin_t
        },
        0.0,
        PI,
        cfg,
    )?;
    Ok(2.0 * params.lambda2 * r.value)
}

/// Hole correction `f(s, z1)` for the hole around a macro at distance `z1`.
pub fn f_removed(s: LaplaceArg, z1: f64, params: &NetworkParams, cfg: &QuadConfig) -> Result<f64, AnalyticError> {
    let d = params.hole_radius;
    hole_integral(s, z1, (z1 - d).abs(), z1 + d, params, cfg)
}

/// Hole correction `g(s, z1, ẑ2)`: like [`f_removed`] but only over radii
/// beyond the serving small-cell distance `z2`.
pub fn g_removed(
    s: LaplaceArg,
    z1: f64,
    z2: f64,
    params: &NetworkParams,
    cfg: &QuadConfig,
) -> Result<f64, AnalyticError> {
    let d = params.hole_radius;
    let lo = z2.max((z1 - d).abs());
    let hi = z2.max(z1 + d);
    hole_integral(s, z1, lo, hi, params, cfg)
}
