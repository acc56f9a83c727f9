//! Benchmark fixtures shared by the criterion targets in `benches/`.

use std::sync::Arc;

use diraclab_core::assembly::{assemble_dirac, assemble_mass, OperatorMatrix};
use diraclab_core::domain::{build_grid, Geometry, Grid, SpinTwist};
use diraclab_core::weights::WeightField;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

pub fn circle(n: usize) -> Geometry {
    Geometry::CircleS1 { length: TAU, twist: SpinTwist::Antiperiodic, resolution: n }
}

pub fn torus(n: usize) -> Geometry {
    Geometry::Torus2 {
        lengths: [TAU, TAU],
        twists: [SpinTwist::Antiperiodic, SpinTwist::Periodic],
        resolution: n,
    }
}

pub struct Problem {
    pub grid: Grid,
    pub dirac: Arc<OperatorMatrix>,
    pub mass: Arc<OperatorMatrix>,
}

pub fn weighted_problem(geometry: &Geometry) -> Problem {
    let grid = build_grid(geometry).unwrap();
    let dirac = Arc::new(assemble_dirac(geometry, &grid).unwrap());
    let w = WeightField::scalar(&grid, |p| (0.4 * p[0].sin()).exp());
    let mass = Arc::new(assemble_mass(&w, &grid, &dirac.basis).unwrap());
    Problem { grid, dirac, mass }
}
