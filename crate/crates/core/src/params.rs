use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Square meters per square kilometer.
pub const M2_PER_KM2: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("hole radius must be non-negative and finite, got {0}")]
    NegativeHoleRadius(f64),
    #[error("path-loss exponent must exceed 2, got {0}")]
    PathLossTooSmall(f64),
}

/// Two-tier network: macro BSs form a PPP of density `lambda1`; small cells
/// are a baseline PPP of density `lambda2` with radius-`hole_radius` discs
/// around every macro removed. Densities are per m², lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub hole_radius: f64,
    pub alpha: f64,
    pub p1: f64,
    pub p2: f64,
}

impl NetworkParams {
    /// λ2 = 50 λ1, P1 = 10³ P2, D = 50 m.
    pub fn setup1() -> Self {
        Self {
            lambda1: 1.0 / M2_PER_KM2,
            lambda2: 50.0 / M2_PER_KM2,
            hole_radius: 50.0,
            alpha: 4.0,
            p1: 1000.0,
            p2: 1.0,
        }
    }

    /// λ2 = 25 λ1, P1 = 10² P2, D = 200 m.
    pub fn setup2() -> Self {
        Self {
            lambda1: 1.0 / M2_PER_KM2,
            lambda2: 25.0 / M2_PER_KM2,
            hole_radius: 200.0,
            alpha: 4.0,
            p1: 100.0,
            p2: 1.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "setup1" => Some(Self::setup1()),
            "setup2" => Some(Self::setup2()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::NotPositive { name, value })
            }
        };
        positive("lambda1", self.lambda1)?;
        positive("lambda2", self.lambda2)?;
        positive("p1", self.p1)?;
        positive("p2", self.p2)?;
        if !(self.hole_radius >= 0.0 && self.hole_radius.is_finite()) {
            return Err(ParamError::NegativeHoleRadius(self.hole_radius));
        }
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(ParamError::PathLossTooSmall(self.alpha));
        }
        Ok(())
    }

    pub fn with_hole_radius(self, hole_radius: f64) -> Self {
        Self { hole_radius, ..self }
    }

    pub fn with_lambda2(self, lambda2: f64) -> Self {
        Self { lambda2, ..self }
    }

    pub fn with_lambda1(self, lambda1: f64) -> Self {
        Self { lambda1, ..self }
    }

    /// Distance beyond which `2πλ r exp(-πλ r²)` drops below `floor`.
    pub fn rayleigh_truncation(lambda: f64, floor: f64) -> f64 {
        // The density bound 2πλ r exp(-πλ r²) ≤ floor is solved by iteration
        // on r² = ln(2πλ r / floor) / (πλ); three rounds are plenty.
        let mut r = ((1.0 / floor).ln() / (std::f64::consts::PI * lambda)).sqrt();
        for _ in 0..3 {
            let arg = (2.0 * std::f64::consts::PI * lambda * r / floor).max(std::f64::consts::E);
            r = (arg.ln() / (std::f64::consts::PI * lambda)).sqrt();
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s1 = NetworkParams::preset("setup1").unwrap();
        assert_eq!(s1.lambda1, 1e-6);
        assert_eq!(s1.lambda2, 5e-5);
        assert_eq!(s1.p1 / s1.p2, 1000.0);
        assert_eq!(s1.hole_radius, 50.0);
        assert_eq!(s1.alpha, 4.0);
        let s2 = NetworkParams::preset("setup2").unwrap();
        assert_eq!(s2.lambda2, 2.5e-5);
        assert_eq!(s2.p1 / s2.p2, 100.0);
        assert_eq!(s2.hole_radius, 200.0);
        assert!(NetworkParams::preset("setup3").is_none());
    }

    #[test]
    fn validation() {
        assert!(NetworkParams::setup1().validate().is_ok());
        assert!(NetworkParams { alpha: 2.0, ..NetworkParams::setup1() }.validate().is_err());
        assert!(NetworkParams { lambda1: 0.0, ..NetworkParams::setup1() }.validate().is_err());
        assert!(NetworkParams::setup1().with_hole_radius(-1.0).validate().is_err());
        assert!(NetworkParams::setup1().with_hole_radius(0.0).validate().is_ok());
    }

    #[test]
    fn truncation_radius_bounds_density() {
        let lambda = 1e-6;
        let r = NetworkParams::rayleigh_truncation(lambda, 1e-16);
        let pi = std::f64::consts::PI;
        let density = 2.0 * pi * lambda * r * (-pi * lambda * r * r).exp();
        assert!(density <= 1.01e-16, "{density}");
        assert!(r > 3000.0 && r < 4000.0, "{r}");
    }
}
