pub mod cli;
pub mod coverage_analytic;
pub mod coverage_sim;
pub mod geometry;
pub mod params;
pub mod pointprocess;
pub mod quadrature;
pub mod serving_distance;
