//! Flat spin model geometries, their grids, quadrature and discrete inner
//! products on spinor fields.
//!
//! Three model domains are supported: the spin circle (periodic or
//! antiperiodic spinors), the chiral interval, and the flat 2-torus with a
//! spin twist per period. Complex fibers are used throughout: `C` on the
//! circle, `C^2` on the interval and the torus. Multiplicity statements are
//! complex counts.

use crate::error::{Error, Result};
use crate::linalg::{cplx, C64, ZERO};

/// Spin-structure twist along one period: `0` (periodic spinors) or `1/2`
/// (antiperiodic spinors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinTwist {
    Periodic,
    Antiperiodic,
}

impl SpinTwist {
    /// The twist as the lattice shift delta in `(Z + delta) * 2 pi / L`.
    pub fn delta(self) -> f64 {
        match self {
            SpinTwist::Periodic => 0.0,
            SpinTwist::Antiperiodic => 0.5,
        }
    }

    pub fn from_delta(d: f64) -> Result<Self> {
        if d == 0.0 {
            Ok(SpinTwist::Periodic)
        } else if d == 0.5 {
            Ok(SpinTwist::Antiperiodic)
        } else {
            Err(Error::Config(format!("spin twist must be 0 or 0.5, got {d}")))
        }
    }
}

/// A flat spin model domain together with its discretization resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Circle of circumference `length` with one spin twist.
    CircleS1 { length: f64, twist: SpinTwist, resolution: usize },
    /// Interval `[0, length]` with the chiral boundary condition; the sign
    /// selects `G = +sigma_3` or `G = -sigma_3`.
    IntervalChiral { length: f64, chirality_sign: i8, resolution: usize },
    /// Flat torus with side lengths `lengths` and one twist per period.
    Torus2 { lengths: [f64; 2], twists: [SpinTwist; 2], resolution: usize },
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let res = self.resolution();
        if res < 8 || res % 2 != 0 {
            return Err(Error::Config(format!(
                "resolution must be even and >= 8, got {res}"
            )));
        }
        match self {
            Geometry::CircleS1 { length, .. } => {
                if *length <= 0.0 {
                    return Err(Error::Config("circle length must be positive".into()));
                }
            }
            Geometry::IntervalChiral { length, chirality_sign, .. } => {
                if *length <= 0.0 {
                    return Err(Error::Config("interval length must be positive".into()));
                }
                if chirality_sign.abs() != 1 {
                    return Err(Error::Config("chirality sign must be +1 or -1".into()));
                }
            }
            Geometry::Torus2 { lengths, .. } => {
                if lengths.iter().any(|&l| l <= 0.0) {
                    return Err(Error::Config("torus lengths must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn resolution(&self) -> usize {
        match self {
            Geometry::CircleS1 { resolution, .. }
            | Geometry::IntervalChiral { resolution, .. }
            | Geometry::Torus2 { resolution, .. } => *resolution,
        }
    }

    /// Manifold dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Torus2 { .. } => 2,
            _ => 1,
        }
    }

    /// Complex fiber dimension of the spinor bundle model.
    pub fn fiber_dim(&self) -> usize {
        match self {
            Geometry::CircleS1 { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Geometry::CircleS1 { length, .. } | Geometry::IntervalChiral { length, .. } => *length,
            Geometry::Torus2 { lengths, .. } => lengths[0] * lengths[1],
        }
    }

    /// Analytic complex dimension of `ker D` for this geometry.
    pub fn kernel_dim(&self) -> usize {
        match self {
            Geometry::CircleS1 { twist: SpinTwist::Periodic, .. } => 1,
            Geometry::CircleS1 { twist: SpinTwist::Antiperiodic, .. } => 0,
            Geometry::IntervalChiral { .. } => 0,
            Geometry::Torus2 { twists, .. } => {
                if twists[0] == SpinTwist::Periodic && twists[1] == SpinTwist::Periodic {
                    2
                } else {
                    0
                }
            }
        }
    }

    /// FNV-1a hash of the geometry data; used to key eigenvector dumps.
    pub fn hash64(&self) -> u64 {
        let mut h = crate::io::Fnv::new();
        match self {
            Geometry::CircleS1 { length, twist, resolution } => {
                h.write(b"circle");
                h.write_f64(*length);
                h.write_f64(twist.delta());
                h.write_u64(*resolution as u64);
            }
            Geometry::IntervalChiral { length, chirality_sign, resolution } => {
                h.write(b"interval");
                h.write_f64(*length);
                h.write_u64(*chirality_sign as i64 as u64);
                h.write_u64(*resolution as u64);
            }
            Geometry::Torus2 { lengths, twists, resolution } => {
                h.write(b"torus");
                h.write_f64(lengths[0]);
                h.write_f64(lengths[1]);
                h.write_f64(twists[0].delta());
                h.write_f64(twists[1].delta());
                h.write_u64(*resolution as u64);
            }
        }
        h.finish()
    }
}

/// Discrete grid: ordered points, quadrature weights and a geodesic distance.
#[derive(Debug, Clone)]
pub struct Grid {
    pub geometry: Geometry,
    /// Point coordinates; 1-D geometries use the first component only.
    pub points: Vec<[f64; 2]>,
    /// Positive quadrature weights summing to the domain volume.
    pub quad_weights: Vec<f64>,
    pub fiber_dim: usize,
}

/// Uniform grid with periodic-trapezoid quadrature; exact for trigonometric
/// polynomials below the Nyquist limit on the periodic geometries.
pub fn build_grid(geometry: &Geometry) -> Result<Grid> {
    geometry.validate()?;
    let n = geometry.resolution();
    match geometry {
        Geometry::CircleS1 { length, .. } => {
            let h = length / n as f64;
            Ok(Grid {
                geometry: geometry.clone(),
                points: (0..n).map(|j| [j as f64 * h, 0.0]).collect(),
                quad_weights: vec![h; n],
                fiber_dim: 1,
            })
        }
        Geometry::IntervalChiral { length, .. } => {
            // n + 1 nodes including both endpoints; trapezoid weights.
            let h = length / n as f64;
            let mut w = vec![h; n + 1];
            w[0] = 0.5 * h;
            w[n] = 0.5 * h;
            Ok(Grid {
                geometry: geometry.clone(),
                points: (0..=n).map(|j| [j as f64 * h, 0.0]).collect(),
                quad_weights: w,
                fiber_dim: 2,
            })
        }
        Geometry::Torus2 { lengths, .. } => {
            let h1 = lengths[0] / n as f64;
            let h2 = lengths[1] / n as f64;
            let mut points = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    points.push([a as f64 * h1, b as f64 * h2]);
                }
            }
            Ok(Grid {
                geometry: geometry.clone(),
                points,
                quad_weights: vec![h1 * h2; n * n],
                fiber_dim: 2,
            })
        }
    }
}

impl Grid {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Number of scalar degrees of freedom before boundary elimination.
    pub fn n_dofs(&self) -> usize {
        self.n_points() * self.fiber_dim
    }

    pub fn volume(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    /// Geodesic distance between grid points `i` and `j` (periodic where
    /// applicable). Symmetric, nonnegative, zero only on the diagonal.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let p = self.points[i];
        let q = self.points[j];
        match &self.geometry {
            Geometry::CircleS1 { length, .. } => {
                let d = (p[0] - q[0]).abs();
                d.min(length - d)
            }
            Geometry::IntervalChiral { .. } => (p[0] - q[0]).abs(),
            Geometry::Torus2 { lengths, .. } => {
                let d1 = (p[0] - q[0]).abs();
                let d1 = d1.min(lengths[0] - d1);
                let d2 = (p[1] - q[1]).abs();
                let d2 = d2.min(lengths[1] - d2);
                (d1 * d1 + d2 * d2).sqrt()
            }
        }
    }
}

/// A spinor field sampled on a grid: one complex fiber vector per point,
/// stored point-major (`values[pt * fiber_dim + component]`).
#[derive(Debug, Clone)]
pub struct SpinorField {
    pub values: Vec<C64>,
    pub fiber_dim: usize,
}

impl SpinorField {
    pub fn zeros(grid: &Grid) -> Self {
        SpinorField { values: vec![ZERO; grid.n_dofs()], fiber_dim: grid.fiber_dim }
    }

    /// Build from a function of (point coordinates, fiber component).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 2], usize) -> C64) -> Self {
        let d = grid.fiber_dim;
        let mut values = Vec::with_capacity(grid.n_dofs());
        for p in &grid.points {
            for s in 0..d {
                values.push(f(p, s));
            }
        }
        SpinorField { values, fiber_dim: d }
    }

    /// Constant fiber vector at every point.
    pub fn constant(grid: &Grid, fiber: &[C64]) -> Self {
        assert_eq!(fiber.len(), grid.fiber_dim);
        Self::from_fn(grid, |_, s| fiber[s])
    }

    /// Plane-wave test field `e^{i k . x} e_s` for mode indices `k` (integer
    /// or half-integer per-period indices are passed as already-scaled
    /// angular frequencies).
    pub fn plane_wave(grid: &Grid, freq: [f64; 2], component: usize) -> Self {
        Self::from_fn(grid, |p, s| {
            if s == component {
                let phase = freq[0] * p[0] + freq[1] * p[1];
                cplx(phase.cos(), phase.sin())
            } else {
                ZERO
            }
        })
    }

    pub fn n_points(&self) -> usize {
        self.values.len() / self.fiber_dim
    }

    pub fn fiber(&self, pt: usize) -> &[C64] {
        &self.values[pt * self.fiber_dim..(pt + 1) * self.fiber_dim]
    }

    /// Pointwise fiber norm `|psi(x)|`.
    pub fn fiber_norm(&self, pt: usize) -> f64 {
        self.fiber(pt).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn axpy(&mut self, c: C64, other: &SpinorField) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }
}

fn check_same_shape(f: &SpinorField, g: &SpinorField, grid: &Grid) -> Result<()> {
    if f.values.len() != grid.n_dofs() || g.values.len() != grid.n_dofs() {
        return Err(Error::Shape(format!(
            "field length {} / {} does not match grid with {} dofs",
            f.values.len(),
            g.values.len(),
            grid.n_dofs()
        )));
    }
    if f.fiber_dim != grid.fiber_dim || g.fiber_dim != grid.fiber_dim {
        return Err(Error::Shape("fiber dimension mismatch".into()));
    }
    Ok(())
}

/// Discrete `L^2` inner product; conjugate-linear in the first slot.
pub fn inner_l2(f: &SpinorField, g: &SpinorField, grid: &Grid) -> Result<C64> {
    check_same_shape(f, g, grid)?;
    let d = grid.fiber_dim;
    let mut acc = ZERO;
    for (pt, &w) in grid.quad_weights.iter().enumerate() {
        let mut fiber = ZERO;
        for s in 0..d {
            fiber += f.values[pt * d + s].conj() * g.values[pt * d + s];
        }
        acc += fiber * w;
    }
    Ok(acc)
}

/// Weighted inner product `sum_x w_x <W(x) f(x), g(x)>`; conjugate-linear in
/// the first slot. `W` must be a validated Hermitian weight on the same grid.
pub fn inner_a(
    f: &SpinorField,
    g: &SpinorField,
    weight: &crate::weights::WeightField,
    grid: &Grid,
) -> Result<C64> {
    check_same_shape(f, g, grid)?;
    if weight.fiber_dim() != grid.fiber_dim || weight.n_points() != grid.n_points() {
        return Err(Error::Shape("weight field does not match grid".into()));
    }
    if !weight.is_hermitian(1e-12) {
        return Err(Error::Domain("weight field is not Hermitian; validate it first".into()));
    }
    let d = grid.fiber_dim;
    let mut acc = ZERO;
    for (pt, &w) in grid.quad_weights.iter().enumerate() {
        let block = weight.block(pt);
        let mut fiber = ZERO;
        for s in 0..d {
            // (W f)(x)_s
            let mut wf = ZERO;
            for r in 0..d {
                wf += block[s * d + r] * f.values[pt * d + r];
            }
            fiber += wf.conj() * g.values[pt * d + s];
        }
        acc += fiber * w;
    }
    Ok(acc)
}

/// `sqrt(<f,f> + <Df,Df>)`: the discrete `H^1` norm used for all
/// projector-gap and eigenspace-distance measurements.
pub fn norm_h1_discrete(
    f: &SpinorField,
    dirac: &crate::assembly::OperatorMatrix,
    grid: &Grid,
) -> Result<f64> {
    let df = dirac.apply_field(f, grid)?;
    let a = inner_l2(f, f, grid)?.re;
    let b = inner_l2(&df, &df, grid)?.re;
    Ok((a + b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn circle(n: usize) -> Geometry {
        Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: n }
    }

    #[test]
    fn circle_grid_is_uniform() {
        let grid = build_grid(&circle(16)).unwrap();
        assert_eq!(grid.points.len(), 16);
        assert!(grid.quad_weights.iter().all(|&w| (w - TAU / 16.0).abs() < 1e-15));
        assert!((grid.volume() - TAU).abs() < 1e-12 * TAU);
    }

    #[test]
    fn torus_grid_is_a_product_rule() {
        let g = Geometry::Torus2 {
            lengths: [TAU, TAU],
            twists: [SpinTwist::Periodic, SpinTwist::Periodic],
            resolution: 8,
        };
        let grid = build_grid(&g).unwrap();
        assert_eq!(grid.points.len(), 64);
        let w = (TAU / 8.0) * (TAU / 8.0);
        assert!(grid.quad_weights.iter().all(|&q| (q - w).abs() < 1e-14));
        assert!((grid.volume() - TAU * TAU).abs() < 1e-10);
    }

    #[test]
    fn odd_resolution_is_a_configuration_error() {
        let g = Geometry::IntervalChiral {
            length: std::f64::consts::PI,
            chirality_sign: 1,
            resolution: 17,
        };
        assert!(matches!(build_grid(&g), Err(Error::Config(_))));
    }

    #[test]
    fn inner_l2_constant_field_gives_volume() {
        let grid = build_grid(&circle(16)).unwrap();
        let f = SpinorField::constant(&grid, &[cplx(1.0, 0.0)]);
        let v = inner_l2(&f, &f, &grid).unwrap();
        assert!((v.re - TAU).abs() < 1e-12 && v.im.abs() < 1e-14);
    }

    #[test]
    fn inner_l2_low_modes_are_orthogonal() {
        let grid = build_grid(&circle(16)).unwrap();
        let f = SpinorField::plane_wave(&grid, [1.0, 0.0], 0);
        let g = SpinorField::plane_wave(&grid, [2.0, 0.0], 0);
        assert!(inner_l2(&f, &g, &grid).unwrap().norm() < 1e-12);
    }

    #[test]
    fn quadrature_exact_below_nyquist() {
        // Trigonometric monomials of degree < N/2 integrate to zero.
        let grid = build_grid(&circle(16)).unwrap();
        let one = SpinorField::constant(&grid, &[cplx(1.0, 0.0)]);
        for k in 1..8 {
            let f = SpinorField::plane_wave(&grid, [k as f64, 0.0], 0);
            assert!(
                inner_l2(&one, &f, &grid).unwrap().norm() < 1e-12 * TAU,
                "mode {k} must integrate to zero"
            );
        }
    }

    #[test]
    fn inner_a_with_identity_matches_l2_and_scales() {
        use crate::weights::WeightField;
        let grid = build_grid(&circle(16)).unwrap();
        let f = SpinorField::plane_wave(&grid, [3.0, 0.0], 0);
        let id = WeightField::identity(&grid);
        let l2 = inner_l2(&f, &f, &grid).unwrap();
        let a = inner_a(&f, &f, &id, &grid).unwrap();
        assert!((l2 - a).norm() < 1e-12);
        let two = WeightField::scalar(&grid, |_| 2.0);
        let a2 = inner_a(&f, &f, &two, &grid).unwrap();
        assert!((a2 - l2 * 2.0).norm() < 1e-12);
    }

    #[test]
    fn inner_a_block_diagonal_weight() {
        use crate::weights::WeightField;
        let g = Geometry::Torus2 {
            lengths: [TAU, TAU],
            twists: [SpinTwist::Periodic, SpinTwist::Periodic],
            resolution: 8,
        };
        let grid = build_grid(&g).unwrap();
        let w = WeightField::from_matrix_fn(&grid, |_, s, r| {
            if s == r {
                cplx(if s == 0 { 1.0 } else { 2.0 }, 0.0)
            } else {
                ZERO
            }
        });
        // (1,0)-constant field with unit L2 norm: inner_a picks up the (0,0)
        // weight entry only.
        let scale = 1.0 / grid.volume().sqrt();
        let f = SpinorField::constant(&grid, &[cplx(scale, 0.0), ZERO]);
        let v = inner_a(&f, &f, &w, &grid).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_shape_errors() {
        let g16 = build_grid(&circle(16)).unwrap();
        let g32 = build_grid(&circle(32)).unwrap();
        let f = SpinorField::constant(&g16, &[cplx(1.0, 0.0)]);
        let g = SpinorField::constant(&g32, &[cplx(1.0, 0.0)]);
        assert!(matches!(inner_l2(&f, &g, &g32), Err(Error::Shape(_))));
    }

    #[test]
    fn distance_is_periodic_on_the_circle() {
        let grid = build_grid(&circle(16)).unwrap();
        let d = grid.distance(0, 15);
        assert!((d - TAU / 16.0).abs() < 1e-12, "wraparound distance");
        assert_eq!(grid.distance(3, 3), 0.0);
        assert!((grid.distance(2, 9) - grid.distance(9, 2)).abs() < 1e-15);
    }
}

#[cfg(test)]
mod interval_tests {
    use super::*;

    #[test]
    fn interval_grid_uses_trapezoid_quadrature() {
        let g = Geometry::IntervalChiral { length: 2.0, chirality_sign: 1, resolution: 10 };
        let grid = build_grid(&g).unwrap();
        assert_eq!(grid.points.len(), 11);
        let h = 0.2;
        assert!((grid.quad_weights[0] - 0.5 * h).abs() < 1e-15);
        assert!((grid.quad_weights[10] - 0.5 * h).abs() < 1e-15);
        assert!((grid.quad_weights[5] - h).abs() < 1e-15);
        assert!((grid.volume() - 2.0).abs() < 1e-12 * 2.0);
        // Distance is the flat metric, no wraparound.
        assert!((grid.distance(0, 10) - 2.0).abs() < 1e-15);
    }
}
