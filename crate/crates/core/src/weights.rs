//! Weight endomorphisms `A`: fiberwise Hermitian positive-definite fields,
//! their pointwise functional calculus, `L^p` norms, Loewner comparison, and
//! the built-in weakly convergent weight families.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Geometry, Grid, SpinorField};
use crate::error::{Error, Result};
use crate::linalg::{cplx, C64, ONE, ZERO};

/// Grid-sampled fiberwise Hermitian endomorphism. Blocks are stored
/// point-major, row-major within the `d x d` block; scalar weights are stored
/// as `rho(x) * Id`.
#[derive(Debug, Clone)]
pub struct WeightField {
    fiber_dim: usize,
    data: Vec<C64>,
    /// Cached minimum pointwise eigenvalue.
    spd_certificate: f64,
}

/// Report of [`validate_spd`].
#[derive(Debug, Clone, Copy)]
pub struct SpdReport {
    pub min_eig: f64,
    pub ok: bool,
}

/// Result of a pointwise Loewner comparison of two weight fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoewnerOrdering {
    Ge,
    Le,
    Eq,
    Incomparable,
}

/// Eigenvalues of a Hermitian `d x d` block (`d` is 1 or 2), ascending.
fn block_eigs(block: &[C64], d: usize) -> [f64; 2] {
    match d {
        1 => [block[0].re, block[0].re],
        2 => {
            let a = block[0].re;
            let b = block[3].re;
            let c = block[1]; // off-diagonal (0,1)
            let mean = 0.5 * (a + b);
            let disc = (0.25 * (a - b) * (a - b) + c.norm_sqr()).sqrt();
            [mean - disc, mean + disc]
        }
        _ => unreachable!("fiber dimension is 1 or 2"),
    }
}

/// Spectral decomposition of a Hermitian 2x2 block: (eigs ascending, unitary
/// eigenvector columns `[v0 | v1]` stored row-major).
pub(crate) fn hermitian2_eigendecomp(block: &[C64]) -> ([f64; 2], [C64; 4]) {
    block_eigendecomp2(block)
}

fn block_eigendecomp2(block: &[C64]) -> ([f64; 2], [C64; 4]) {
    let eigs = block_eigs(block, 2);
    let a = block[0].re;
    let c = block[1];
    if c.norm() < 1e-300 {
        // Diagonal block: order the standard basis by the eigenvalue order.
        return if a <= block[3].re {
            (eigs, [ONE, ZERO, ZERO, ONE])
        } else {
            (eigs, [ZERO, ONE, ONE, ZERO])
        };
    }
    // Eigenvector for eigs[0]: (c, eigs[0] - a) normalized, columns stored
    // column-major as [v0_0, v0_1, v1_0, v1_1] row-major trick below.
    let v0 = [c, cplx(eigs[0] - a, 0.0)];
    let n0 = (v0[0].norm_sqr() + v0[1].norm_sqr()).sqrt();
    let v0 = [v0[0] / n0, v0[1] / n0];
    // Orthogonal complement in C^2.
    let v1 = [-v0[1].conj(), v0[0].conj()];
    // Row-major matrix with columns v0, v1.
    (eigs, [v0[0], v1[0], v0[1], v1[1]])
}

impl WeightField {
    fn from_blocks(fiber_dim: usize, data: Vec<C64>) -> Self {
        let mut wf = WeightField { fiber_dim, data, spd_certificate: f64::NAN };
        wf.spd_certificate = wf.min_pointwise_eig();
        wf
    }

    /// Identity weight on a grid.
    pub fn identity(grid: &Grid) -> Self {
        Self::scalar(grid, |_| 1.0)
    }

    /// Scalar weight `rho(x) * Id`.
    pub fn scalar(grid: &Grid, rho: impl Fn(&[f64; 2]) -> f64) -> Self {
        let d = grid.fiber_dim;
        let mut data = vec![ZERO; grid.n_points() * d * d];
        for (pt, p) in grid.points.iter().enumerate() {
            let r = rho(p);
            for s in 0..d {
                data[pt * d * d + s * d + s] = cplx(r, 0.0);
            }
        }
        Self::from_blocks(d, data)
    }

    /// General Hermitian blocks from a function of (point, row, col). The
    /// input is Hermitian-symmetrized.
    pub fn from_matrix_fn(grid: &Grid, f: impl Fn(&[f64; 2], usize, usize) -> C64) -> Self {
        let d = grid.fiber_dim;
        let mut data = vec![ZERO; grid.n_points() * d * d];
        for (pt, p) in grid.points.iter().enumerate() {
            for s in 0..d {
                for r in 0..d {
                    let v = (f(p, s, r) + f(p, r, s).conj()) * 0.5;
                    data[pt * d * d + s * d + r] = v;
                }
            }
        }
        Self::from_blocks(d, data)
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn n_points(&self) -> usize {
        self.data.len() / (self.fiber_dim * self.fiber_dim)
    }

    /// Row-major `d x d` block at a grid point.
    pub fn block(&self, pt: usize) -> &[C64] {
        let dd = self.fiber_dim * self.fiber_dim;
        &self.data[pt * dd..(pt + 1) * dd]
    }

    pub fn spd_certificate(&self) -> f64 {
        self.spd_certificate
    }

    fn min_pointwise_eig(&self) -> f64 {
        let d = self.fiber_dim;
        (0..self.n_points())
            .map(|pt| block_eigs(self.block(pt), d)[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest pointwise operator norm over the grid.
    pub fn max_op_norm(&self) -> f64 {
        let d = self.fiber_dim;
        (0..self.n_points())
            .map(|pt| {
                let e = block_eigs(self.block(pt), d);
                e[0].abs().max(e[1].abs())
            })
            .fold(0.0, f64::max)
    }

    /// Hermitian check: `||W(x) - W(x)^H|| <= tol * ||W(x)||` at every point.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.fiber_dim;
        if d == 1 {
            return self.data.iter().all(|z| z.im.abs() <= tol * z.norm().max(1e-300));
        }
        (0..self.n_points()).all(|pt| {
            let b = self.block(pt);
            let norm: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let mut dev: f64 = 0.0;
            for s in 0..d {
                for r in 0..d {
                    dev += (b[s * d + r] - b[r * d + s].conj()).norm_sqr();
                }
            }
            dev.sqrt() <= tol * norm
        })
    }

    /// Apply a real function to the pointwise eigenvalues (functional
    /// calculus through the pointwise spectral decomposition).
    fn map_eigs(&self, f: impl Fn(f64) -> f64) -> Self {
        let d = self.fiber_dim;
        let mut data = vec![ZERO; self.data.len()];
        for pt in 0..self.n_points() {
            let b = self.block(pt);
            match d {
                1 => data[pt] = cplx(f(b[0].re), 0.0),
                2 => {
                    let (eigs, u) = block_eigendecomp2(b);
                    let (f0, f1) = (f(eigs[0]), f(eigs[1]));
                    // U diag(f) U^H, with U row-major columns (v0 | v1).
                    for s in 0..2 {
                        for r in 0..2 {
                            let v =
                                u[s * 2] * u[r * 2].conj() * f0 + u[s * 2 + 1] * u[r * 2 + 1].conj() * f1;
                            data[pt * 4 + s * 2 + r] = v;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        Self::from_blocks(d, data)
    }

    /// Pointwise inverse; requires SPD.
    pub fn inverse(&self) -> Result<Self> {
        if self.spd_certificate <= 0.0 {
            return Err(Error::Domain(format!(
                "cannot invert a non-SPD weight (min eig {})",
                self.spd_certificate
            )));
        }
        Ok(self.map_eigs(|x| 1.0 / x))
    }

    /// Pointwise linear combination `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &WeightField) -> Result<Self> {
        if self.fiber_dim != other.fiber_dim || self.data.len() != other.data.len() {
            return Err(Error::Shape("weight fields of different shape".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + cplx(c, 0.0) * b)
            .collect();
        Ok(Self::from_blocks(self.fiber_dim, data))
    }

    /// FNV-1a hash of the raw block data; used to key eigenvector dumps.
    pub fn hash64(&self) -> u64 {
        let mut h = crate::io::Fnv::new();
        h.write_u64(self.fiber_dim as u64);
        for z in &self.data {
            h.write_f64(z.re);
            h.write_f64(z.im);
        }
        h.finish()
    }
}

/// Minimum pointwise eigenvalue report; `ok` iff `min_eig > tol`.
pub fn validate_spd(w: &WeightField, tol: f64) -> SpdReport {
    let min_eig = w.spd_certificate();
    SpdReport { min_eig, ok: min_eig > tol }
}

/// Default SPD tolerance: `1e-10 * max pointwise operator norm`.
pub fn default_spd_tol(w: &WeightField) -> f64 {
    1e-10 * w.max_op_norm()
}

/// Pointwise symmetric square root and inverse square root `(W^1/2, W^-1/2)`.
pub fn sqrt_pair(w: &WeightField) -> Result<(WeightField, WeightField)> {
    if !validate_spd(w, 0.0).ok {
        return Err(Error::Domain(format!(
            "sqrt_pair requires an SPD weight (min eig {})",
            w.spd_certificate()
        )));
    }
    Ok((w.map_eigs(f64::sqrt), w.map_eigs(|x| 1.0 / x.sqrt())))
}

/// `( sum_x w_x ||W(x)||_op^p )^(1/p)` with the largest-singular-value norm.
pub fn lp_norm(w: &WeightField, p: f64, grid: &Grid) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Config(format!("lp_norm requires p >= 1, got {p}")));
    }
    if w.n_points() != grid.n_points() || w.fiber_dim() != grid.fiber_dim {
        return Err(Error::Shape("weight field does not match grid".into()));
    }
    let d = w.fiber_dim();
    let mut acc = 0.0;
    for (pt, &qw) in grid.quad_weights.iter().enumerate() {
        let e = block_eigs(w.block(pt), d);
        let op = e[0].abs().max(e[1].abs());
        acc += qw * op.powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

/// Pointwise Loewner comparison with slack `tol`.
pub fn loewner_compare(w1: &WeightField, w2: &WeightField, tol: f64) -> Result<LoewnerOrdering> {
    let diff = w1.add_scaled(-1.0, w2)?;
    let d = diff.fiber_dim();
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for pt in 0..diff.n_points() {
        let e = block_eigs(diff.block(pt), d);
        min_eig = min_eig.min(e[0]);
        max_eig = max_eig.max(e[1]);
    }
    let ge = min_eig >= -tol;
    let le = max_eig <= tol;
    Ok(match (ge, le) {
        (true, true) => LoewnerOrdering::Eq,
        (true, false) => LoewnerOrdering::Ge,
        (false, true) => LoewnerOrdering::Le,
        (false, false) => LoewnerOrdering::Incomparable,
    })
}

/// Built-in weakly convergent family kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `rho_m = 1 + a sin(m theta)`, weak limit `1`; requires `|a| < 1`.
    OscillatorySine,
    /// `rho_m = 1 + a sin^2(m theta)`, weak limit `1 + a/2`.
    OscillatorySquared,
    /// `A_m = e^{u_m} Id` with `u_m = a sin(m theta) / m`, limit `Id`.
    ConformalExp,
    /// `A_m = Id + S / m` for a seeded bounded random Hermitian field `S`
    /// with low frequency content; limit `Id`.
    RandomSpdPerturbation,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::OscillatorySine => "oscillatory-sine",
            FamilyKind::OscillatorySquared => "oscillatory-squared",
            FamilyKind::ConformalExp => "conformal-exp",
            FamilyKind::RandomSpdPerturbation => "random-spd-perturbation",
        }
    }
}

/// Parameters for the built-in families.
#[derive(Debug, Clone, Copy)]
pub struct FamilyParams {
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams { amplitude: 0.5, seed: 0 }
    }
}

/// A generator of weight fields indexed by `m = 1, 2, ...` with a declared
/// weak limit. Members are deterministic in `(kind, params, m, seed)`.
#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub kind: FamilyKind,
    pub params: FamilyParams,
    pub geometry: Geometry,
    grid: Grid,
    /// Frequency multiplier of the fixed random perturbation field, if any.
    random_field: Option<WeightField>,
}

/// The angular coordinate used by the oscillatory built-ins: one full period
/// over each circle/torus period, a half period over the interval.
fn theta(geometry: &Geometry, p: &[f64; 2]) -> f64 {
    match geometry {
        Geometry::CircleS1 { length, .. } => 2.0 * std::f64::consts::PI * p[0] / length,
        Geometry::IntervalChiral { length, .. } => std::f64::consts::PI * p[0] / length,
        Geometry::Torus2 { lengths, .. } => 2.0 * std::f64::consts::PI * p[0] / lengths[0],
    }
}

fn random_hermitian_low_freq(grid: &Grid, seed: u64) -> WeightField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.fiber_dim;
    // Hermitian coefficient matrices for 1, cos(j theta), sin(j theta), j = 1, 2.
    let mut coeffs: Vec<Vec<C64>> = Vec::new();
    for _ in 0..5 {
        let mut m = vec![ZERO; d * d];
        for s in 0..d {
            for r in s..d {
                let re = rng.random_range(-1.0..1.0);
                let im = if r == s { 0.0 } else { rng.random_range(-1.0..1.0) };
                m[s * d + r] = cplx(re, im);
                m[r * d + s] = cplx(re, -im);
            }
        }
        coeffs.push(m);
    }
    let geometry = grid.geometry.clone();
    WeightField::from_matrix_fn(grid, |p, s, r| {
        let th = theta(&geometry, p);
        let mut v = coeffs[0][s * d + r];
        for j in 1..=2 {
            let (sin, cos) = (j as f64 * th).sin_cos();
            v += coeffs[2 * j - 1][s * d + r] * cos + coeffs[2 * j][s * d + r] * sin;
        }
        v
    })
}

/// Construct a built-in weakly convergent family on a geometry.
///
/// The oscillation frequency of member `m` must stay below `resolution / 4`;
/// violating members are rejected when generated.
pub fn make_family(
    kind: FamilyKind,
    params: FamilyParams,
    geometry: &Geometry,
) -> Result<WeightFamily> {
    geometry.validate()?;
    if let FamilyKind::OscillatorySine = kind {
        if params.amplitude.abs() >= 1.0 {
            return Err(Error::Config(format!(
                "oscillatory-sine requires |amplitude| < 1, got {}",
                params.amplitude
            )));
        }
    }
    let grid = crate::domain::build_grid(geometry)?;
    let random_field = match kind {
        FamilyKind::RandomSpdPerturbation => {
            let raw = random_hermitian_low_freq(&grid, params.seed);
            // Scale so that Id + S/m stays SPD for every m >= 1:
            // bring ||S||_op below amplitude/2 (< 1/2 of the base min eig).
            let op = raw.max_op_norm().max(1e-300);
            let scale = 0.5 * params.amplitude.abs().min(1.0) / op;
            let zero = WeightField::scalar(&grid, |_| 0.0);
            Some(zero.add_scaled(scale, &raw)?)
        }
        _ => None,
    };
    Ok(WeightFamily { kind, params, geometry: geometry.clone(), grid, random_field })
}

impl WeightFamily {
    /// Highest oscillation frequency (per-period index) of member `m`.
    fn frequency(&self, m: usize) -> usize {
        match self.kind {
            FamilyKind::OscillatorySine | FamilyKind::ConformalExp => m,
            // sin^2(m theta) oscillates at index 2m.
            FamilyKind::OscillatorySquared => 2 * m,
            FamilyKind::RandomSpdPerturbation => 2,
        }
    }

    /// Nyquist guard: member frequencies must stay below `resolution / 4`.
    pub fn check_guard(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::Config("family members are indexed from m = 1".into()));
        }
        let res = self.geometry.resolution();
        if 4 * self.frequency(m) >= res {
            return Err(Error::Config(format!(
                "family member m = {m} oscillates at frequency {} >= resolution/4 = {}",
                self.frequency(m),
                res as f64 / 4.0
            )));
        }
        Ok(())
    }

    /// Member `m in {1, 2, ...}` of the family.
    pub fn member(&self, m: usize) -> Result<WeightField> {
        self.check_guard(m)?;
        let a = self.params.amplitude;
        let geometry = self.geometry.clone();
        let w = match self.kind {
            FamilyKind::OscillatorySine => WeightField::scalar(&self.grid, |p| {
                1.0 + a * (m as f64 * theta(&geometry, p)).sin()
            }),
            FamilyKind::OscillatorySquared => WeightField::scalar(&self.grid, |p| {
                let s = (m as f64 * theta(&geometry, p)).sin();
                1.0 + a * s * s
            }),
            FamilyKind::ConformalExp => WeightField::scalar(&self.grid, |p| {
                (a * (m as f64 * theta(&geometry, p)).sin() / m as f64).exp()
            }),
            FamilyKind::RandomSpdPerturbation => {
                let id = WeightField::identity(&self.grid);
                id.add_scaled(1.0 / m as f64, self.random_field.as_ref().unwrap())?
            }
        };
        let report = validate_spd(&w, 0.0);
        if !report.ok {
            return Err(Error::Domain(format!(
                "family member m = {m} is not SPD (min eig {})",
                report.min_eig
            )));
        }
        Ok(w)
    }

    /// The declared weak limit of the family.
    pub fn declared_limit(&self) -> WeightField {
        match self.kind {
            FamilyKind::OscillatorySine | FamilyKind::ConformalExp | FamilyKind::RandomSpdPerturbation => {
                WeightField::identity(&self.grid)
            }
            FamilyKind::OscillatorySquared => {
                let c = 1.0 + 0.5 * self.params.amplitude;
                WeightField::scalar(&self.grid, move |_| c)
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Max over a fixed dictionary of low-frequency trigonometric test fields of
/// `| integral <(W_m - W_limit) phi, eta> |`. The dictionary consists of all
/// Fourier modes with per-dimension index magnitude `<= dictionary_size`,
/// tensored over the fiber basis vectors. This is the machine-checkable
/// surrogate for weak `L^p` convergence.
pub fn weak_convergence_residual(
    w_m: &WeightField,
    w_limit: &WeightField,
    dictionary_size: usize,
    grid: &Grid,
) -> Result<f64> {
    if dictionary_size == 0 {
        return Err(Error::Config("dictionary_size must be >= 1".into()));
    }
    let diff = w_m.add_scaled(-1.0, w_limit)?;
    if diff.n_points() != grid.n_points() || diff.fiber_dim() != grid.fiber_dim {
        return Err(Error::Shape("weight fields do not match grid".into()));
    }
    let modes = dictionary_modes(grid, dictionary_size);
    let d = grid.fiber_dim;
    let mut max_resid: f64 = 0.0;
    let fields: Vec<SpinorField> = modes
        .iter()
        .flat_map(|&freq| (0..d).map(move |s| (freq, s)))
        .map(|(freq, s)| SpinorField::plane_wave(grid, freq, s))
        .collect();
    for phi in &fields {
        // w = diff * phi, computed pointwise.
        let mut wphi = SpinorField::zeros(grid);
        for pt in 0..grid.n_points() {
            let b = diff.block(pt);
            for s in 0..d {
                let mut acc = ZERO;
                for r in 0..d {
                    acc += b[s * d + r] * phi.values[pt * d + r];
                }
                wphi.values[pt * d + s] = acc;
            }
        }
        for eta in &fields {
            // <eta, wphi> = integral <(W_m - W) phi, eta> conj; same modulus.
            let v = crate::domain::inner_l2(eta, &wphi, grid)?;
            max_resid = max_resid.max(v.norm());
        }
    }
    Ok(max_resid)
}

/// Angular frequencies of the trigonometric dictionary on a grid.
pub(crate) fn dictionary_modes(grid: &Grid, dictionary_size: usize) -> Vec<[f64; 2]> {
    let ds = dictionary_size as i64;
    match &grid.geometry {
        Geometry::CircleS1 { length, .. } => (-ds..=ds)
            .map(|j| [2.0 * std::f64::consts::PI * j as f64 / length, 0.0])
            .collect(),
        Geometry::IntervalChiral { length, .. } => (-ds..=ds)
            .map(|j| [std::f64::consts::PI * j as f64 / length, 0.0])
            .collect(),
        Geometry::Torus2 { lengths, .. } => {
            let mut v = Vec::new();
            for j1 in -ds..=ds {
                for j2 in -ds..=ds {
                    v.push([
                        2.0 * std::f64::consts::PI * j1 as f64 / lengths[0],
                        2.0 * std::f64::consts::PI * j2 as f64 / lengths[1],
                    ]);
                }
            }
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, Geometry, SpinTwist};

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn circle_grid(n: usize) -> Grid {
        build_grid(&Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: n })
            .unwrap()
    }

    fn torus_grid(n: usize) -> Grid {
        build_grid(&Geometry::Torus2 {
            lengths: [TAU, TAU],
            twists: [SpinTwist::Periodic, SpinTwist::Periodic],
            resolution: n,
        })
        .unwrap()
    }

    #[test]
    fn identity_is_spd() {
        let grid = circle_grid(8);
        let report = validate_spd(&WeightField::identity(&grid), 0.0);
        assert!(report.ok);
        assert!((report.min_eig - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_block_fails_validation() {
        let grid = torus_grid(8);
        let w = WeightField::from_matrix_fn(&grid, |p, s, r| {
            if s == r {
                // diag(1, -1) at the first point only.
                let v = if p[0] == 0.0 && p[1] == 0.0 && s == 1 { -1.0 } else { 1.0 };
                cplx(v, 0.0)
            } else {
                ZERO
            }
        });
        assert!(!validate_spd(&w, 0.0).ok);
    }

    #[test]
    fn exp_sin_minimum_is_inverse_e() {
        let grid = circle_grid(64);
        let w = WeightField::scalar(&grid, |p| p[0].sin().exp());
        let report = validate_spd(&w, 0.0);
        // theta = 3 pi / 2 is a grid point at resolution 64.
        assert!((report.min_eig - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn sqrt_pair_on_constants_and_diagonals() {
        let grid = circle_grid(8);
        let four = WeightField::scalar(&grid, |_| 4.0);
        let (half, neg_half) = sqrt_pair(&four).unwrap();
        assert!((half.block(0)[0].re - 2.0).abs() < 1e-14);
        assert!((neg_half.block(0)[0].re - 0.5).abs() < 1e-14);

        let tg = torus_grid(8);
        let diag = WeightField::from_matrix_fn(&tg, |_, s, r| {
            if s == r {
                cplx(if s == 0 { 1.0 } else { 9.0 }, 0.0)
            } else {
                ZERO
            }
        });
        let (h, nh) = sqrt_pair(&diag).unwrap();
        assert!((h.block(3)[3].re - 3.0).abs() < 1e-14);
        assert!((nh.block(3)[3].re - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_pair_rejects_indefinite() {
        let grid = circle_grid(8);
        let bad = WeightField::scalar(&grid, |p| if p[0] < 1.0 { -1.0 } else { 1.0 });
        assert!(matches!(sqrt_pair(&bad), Err(crate::error::Error::Domain(_))));
    }

    /// Modified Bessel function of the first kind, order zero (power series).
    fn bessel_i0(x: f64) -> f64 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for m in 1..60 {
            term *= (x / 2.0) * (x / 2.0) / ((m * m) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn lp_norm_constants_and_bessel_cross_check() {
        let grid = circle_grid(64);
        let id = WeightField::identity(&grid);
        for p in [1.0, 2.0, 4.0] {
            assert!((lp_norm(&id, p, &grid).unwrap() - TAU.powf(1.0 / p)).abs() < 1e-12);
        }
        let c = WeightField::scalar(&grid, |_| 3.0);
        assert!((lp_norm(&c, 2.0, &grid).unwrap() - 3.0 * TAU.sqrt()).abs() < 1e-12);
        // integral of e^{4 sin} over the period equals 2 pi I_0(4).
        let w = WeightField::scalar(&grid, |p| p[0].sin().exp());
        let got = lp_norm(&w, 4.0, &grid).unwrap();
        let expect = (TAU * bessel_i0(4.0)).powf(0.25);
        assert!((got - expect).abs() < 1e-9 * expect, "got {got}, expect {expect}");
    }

    #[test]
    fn lp_norm_rejects_p_below_one() {
        let grid = circle_grid(8);
        let id = WeightField::identity(&grid);
        assert!(matches!(
            lp_norm(&id, 0.5, &grid),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn loewner_constants_and_crossing() {
        let grid = circle_grid(8);
        let one = WeightField::identity(&grid);
        let two = WeightField::scalar(&grid, |_| 2.0);
        assert_eq!(loewner_compare(&two, &one, 1e-12).unwrap(), LoewnerOrdering::Ge);
        assert_eq!(loewner_compare(&one, &two, 1e-12).unwrap(), LoewnerOrdering::Le);
        assert_eq!(loewner_compare(&one, &one, 1e-12).unwrap(), LoewnerOrdering::Eq);

        let tg = torus_grid(8);
        let d12 = WeightField::from_matrix_fn(&tg, |_, s, r| {
            if s == r { cplx(if s == 0 { 2.0 } else { 1.0 }, 0.0) } else { ZERO }
        });
        let d21 = WeightField::from_matrix_fn(&tg, |_, s, r| {
            if s == r { cplx(if s == 0 { 1.0 } else { 2.0 }, 0.0) } else { ZERO }
        });
        assert_eq!(loewner_compare(&d12, &d21, 1e-12).unwrap(), LoewnerOrdering::Incomparable);
    }

    #[test]
    fn rank_one_perturbation_is_loewner_ge() {
        let tg = torus_grid(8);
        let base = WeightField::identity(&tg);
        // v(x) v(x)^H with v = (cos x1, i sin x2).
        let pert = WeightField::from_matrix_fn(&tg, |p, s, r| {
            let v = [cplx(p[0].cos(), 0.0), cplx(0.0, p[1].sin())];
            v[s] * v[r].conj()
        });
        let sum = base.add_scaled(1.0, &pert).unwrap();
        assert_eq!(loewner_compare(&sum, &base, 1e-12).unwrap(), LoewnerOrdering::Ge);
    }

    #[test]
    fn family_members_match_their_formulas() {
        let geo = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: 64 };
        let fam = make_family(
            FamilyKind::OscillatorySine,
            FamilyParams { amplitude: 0.5, seed: 0 },
            &geo,
        )
        .unwrap();
        let m3 = fam.member(3).unwrap();
        let grid = fam.grid();
        for (pt, p) in grid.points.iter().enumerate() {
            let expect = 1.0 + 0.5 * (3.0 * p[0]).sin();
            assert!((m3.block(pt)[0].re - expect).abs() < 1e-14);
        }
        let sq = make_family(
            FamilyKind::OscillatorySquared,
            FamilyParams { amplitude: 1.0, seed: 0 },
            &geo,
        )
        .unwrap();
        assert!((sq.declared_limit().block(0)[0].re - 1.5).abs() < 1e-14);
        let conf = make_family(
            FamilyKind::ConformalExp,
            FamilyParams { amplitude: 1.0, seed: 0 },
            &geo,
        )
        .unwrap();
        assert!((conf.declared_limit().block(0)[0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nyquist_guard_rejects_fast_members() {
        let geo = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: 16 };
        let fam = make_family(
            FamilyKind::OscillatorySine,
            FamilyParams { amplitude: 0.5, seed: 0 },
            &geo,
        )
        .unwrap();
        assert!(fam.member(3).is_ok());
        assert!(matches!(fam.member(4), Err(crate::error::Error::Config(_))));
    }

    #[test]
    fn weak_residual_examples() {
        let grid = circle_grid(96);
        let one = WeightField::identity(&grid);
        assert_eq!(weak_convergence_residual(&one, &one, 2, &grid).unwrap(), 0.0);
        // 1 + sin(8 theta)/2 against 1: orthogonal to every mode of index <= 2.
        let m8 = WeightField::scalar(&grid, |p| 1.0 + 0.5 * (8.0 * p[0]).sin());
        let r = weak_convergence_residual(&m8, &one, 2, &grid).unwrap();
        assert!(r < 1e-12, "got {r}");
        // With the dictionary reaching the oscillation, the residual is pi/2.
        let r8 = weak_convergence_residual(&m8, &one, 8, &grid).unwrap();
        assert!((r8 - std::f64::consts::PI / 2.0).abs() < 1e-10, "got {r8}");
    }

    #[test]
    fn family_residuals_shrink_along_members() {
        // Resolution 192 admits member m = 16 for every kind (the squared
        // family oscillates at index 2m = 32 < 192/4).
        let geo = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: 192 };
        for kind in [
            FamilyKind::OscillatorySine,
            FamilyKind::OscillatorySquared,
            FamilyKind::ConformalExp,
            FamilyKind::RandomSpdPerturbation,
        ] {
            let fam = make_family(kind, FamilyParams { amplitude: 0.5, seed: 7 }, &geo).unwrap();
            let grid = fam.grid();
            let limit = fam.declared_limit();
            let mut last = f64::INFINITY;
            for m in [1usize, 2, 4, 8, 16] {
                let w = fam.member(m).unwrap();
                let r = weak_convergence_residual(&w, &limit, 4, grid).unwrap();
                // 10% slack plus an absolute floor for fully converged noise.
                assert!(
                    r <= last * 1.10 + 1e-12,
                    "{}: residual not monotone within 10% slack at m={m}: {r} vs {last}",
                    kind.name()
                );
                last = r;
            }
            assert!(last < 0.35, "{}: residual should be small by m=16, got {last}", kind.name());
        }
    }

    #[test]
    fn random_family_is_deterministic_in_seed() {
        let geo = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: 16 };
        let f1 = make_family(
            FamilyKind::RandomSpdPerturbation,
            FamilyParams { amplitude: 0.5, seed: 42 },
            &geo,
        )
        .unwrap();
        let f2 = make_family(
            FamilyKind::RandomSpdPerturbation,
            FamilyParams { amplitude: 0.5, seed: 42 },
            &geo,
        )
        .unwrap();
        assert_eq!(f1.member(3).unwrap().hash64(), f2.member(3).unwrap().hash64());
    }
}
