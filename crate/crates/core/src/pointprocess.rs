//! Planar point-process sampling on a disc window around the origin, hole
//! carving for the Poisson Hole Process, and nearest-point queries.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointProcessError {
    #[error("density must be non-negative and finite, got {0}")]
    InvalidDensity(f64),
    #[error("window radius must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("point set is empty")]
    EmptySet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A finite realization inside the disc of `window_radius` about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
    window_radius: f64,
}

impl PointSet {
    pub fn empty(window_radius: f64) -> Self {
        Self { points: Vec::new(), window_radius }
    }

    /// Builds a set from explicit points; points outside the window are
    /// dropped.
    pub fn from_points(points: Vec<Point>, window_radius: f64) -> Self {
        let r2 = window_radius * window_radius;
        let points = points.into_iter().filter(|p| p.norm().powi(2) <= r2).collect();
        Self { points, window_radius }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the set as CSV with header `x_m,y_m`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_m,y_m")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

/// Identifies an independent random stream. The same `(seed, stream_id)`
/// always yields the same draws, whichever thread consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Homogeneous PPP of `density` (per m²) on the disc of `window_radius`.
pub fn sample_ppp<R: Rng + ?Sized>(
    density: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointSet, PointProcessError> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(PointProcessError::InvalidDensity(density));
    }
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(PointProcessError::InvalidWindow(window_radius));
    }
    let mean = density * PI * window_radius * window_radius;
    let count =
        if mean > 0.0 { Poisson::new(mean).expect("mean is positive and finite").sample(rng) as usize } else { 0 };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let r = window_radius * rng.gen::<f64>().sqrt();
        let theta = 2.0 * PI * rng.gen::<f64>();
        let (s, c) = theta.sin_cos();
        points.push(Point::new(r * c, r * s));
    }
    Ok(PointSet { points, window_radius })
}

/// Homogeneous PPP on the disc of `window_radius`, generated outward from
/// the origin: the enclosed areas of successive points are the arrival times
/// of a unit-rate Poisson process scaled by `1 / density`. Points come out
/// sorted by distance, and with the same generator a larger window returns a
/// superset of the points of a smaller one.
pub fn sample_ppp_radial<R: Rng + ?Sized>(
    density: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointSet, PointProcessError> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(PointProcessError::InvalidDensity(density));
    }
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(PointProcessError::InvalidWindow(window_radius));
    }
    let mut points = Vec::new();
    if density == 0.0 {
        return Ok(PointSet { points, window_radius });
    }
    let max_area = PI * window_radius * window_radius;
    let mut area = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        area += gap / density;
        if area > max_area {
            break;
        }
        let r = (area / PI).sqrt();
        let theta = 2.0 * PI * rng.gen::<f64>();
        let (s, c) = theta.sin_cos();
        points.push(Point::new(r * c, r * s));
    }
    Ok(PointSet { points, window_radius })
}

/// [`sample_ppp`] driven by a fresh generator for `stream`.
pub fn sample_ppp_stream(density: f64, window_radius: f64, stream: RngStream) -> Result<PointSet, PointProcessError> {
    sample_ppp(density, window_radius, &mut stream.rng())
}

/// Keeps the baseline points at distance `>= hole_radius` from every hole
/// center.
pub fn carve_php(baseline: &PointSet, hole_centers: &PointSet, hole_radius: f64) -> PointSet {
    carve_php_iter(baseline, hole_centers.points(), hole_radius)
}

pub(crate) fn carve_php_iter(baseline: &PointSet, centers: &[Point], hole_radius: f64) -> PointSet {
    if hole_radius <= 0.0 || centers.is_empty() {
        return baseline.clone();
    }
    let d2 = hole_radius * hole_radius;
    let points = baseline.points.iter().filter(|p| centers.iter().all(|c| p.dist2(c) >= d2)).copied().collect();
    PointSet { points, window_radius: baseline.window_radius }
}

/// Index and distance of the point of `set` closest to `origin`.
pub fn nearest(origin: &Point, set: &PointSet) -> Result<(usize, f64), PointProcessError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in set.points.iter().enumerate() {
        let d2 = origin.dist2(p);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| (i, d2.sqrt())).ok_or(PointProcessError::EmptySet)
}

pub fn nearest_distance(origin: &Point, set: &PointSet) -> Result<f64, PointProcessError> {
    nearest(origin, set).map(|(_, d)| d)
}
