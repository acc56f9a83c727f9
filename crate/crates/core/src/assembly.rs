//! Assembly of the discrete Dirac operator `D` and the weighted mass matrix
//! `M_A` on each geometry, including the chiral boundary condition by
//! constraint elimination.
//!
//! Operator convention: an [`OperatorMatrix`] stores the *pointwise action*
//! on the active degrees of freedom (`(D psi)(x_j)` for the Dirac operator,
//! `W(x_j) psi(x_j)` for a mass operator). The bilinear-form ("weak") matrix
//! is the action scaled by the quadrature weights, `B = Q * action`; it is the
//! Hermitian object entering the generalized eigensolve `B v = lambda M v`.
//!
//! Clifford convention: the geometric generators `gamma(e_j)` with
//! `gamma(e_j)^2 = -Id` are realized as `gamma(e_j) = -i sigma_j` with the
//! Hermitian unitary Pauli matrices `sigma_j`, so `D = sum gamma(e_j) d_j`
//! equals `-i sum sigma_j d_j` and is self-adjoint.

use std::sync::Arc;

use crate::domain::{Geometry, Grid, SpinorField};
use crate::error::{Error, Result};
use crate::linalg::{cplx, hermitian_residual, C64, Mat, ONE, ZERO};
use crate::weights::{validate_spd, WeightField};

/// One active scalar degree of freedom: a fiber component at a grid point.
/// The component indexes the *local frame*: the standard fiber basis on the
/// circle and torus, the `sigma_2` eigenbasis `(v_plus, v_minus)` on the
/// chiral interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dof {
    pub point: usize,
    pub component: usize,
}

/// Local fiber frame used by the active-DOF coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberFrame {
    Standard,
    /// `sigma_2` eigenbasis columns `v_plus = (1, i)/sqrt2`,
    /// `v_minus = (1, -i)/sqrt2`; component 0 is the `v_plus` coefficient.
    ChiralRotated { sign: i8 },
}

/// Active degree-of-freedom list: all grid fiber components, minus the
/// eliminated boundary constraints on the chiral interval.
#[derive(Debug)]
pub struct BasisMap {
    pub grid: Grid,
    pub frame: FiberFrame,
    pub active: Vec<Dof>,
    /// `index[point * fiber_dim + component] -> active index`.
    index: Vec<Option<usize>>,
}

impl BasisMap {
    fn new(grid: Grid, frame: FiberFrame, constrained: &[(usize, usize)]) -> Self {
        let d = grid.fiber_dim;
        let mut active = Vec::with_capacity(grid.n_dofs());
        let mut index = vec![None; grid.n_dofs()];
        for pt in 0..grid.n_points() {
            for c in 0..d {
                if constrained.contains(&(pt, c)) {
                    continue;
                }
                index[pt * d + c] = Some(active.len());
                active.push(Dof { point: pt, component: c });
            }
        }
        BasisMap { grid, frame, active, index }
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.grid.geometry
    }

    pub fn active_index(&self, point: usize, component: usize) -> Option<usize> {
        self.index[point * self.grid.fiber_dim + component]
    }

    /// Quadrature weight attached to each active DOF (its point's weight).
    pub fn dof_weights(&self) -> Vec<f64> {
        self.active.iter().map(|d| self.grid.quad_weights[d.point]).collect()
    }

    /// Project a grid spinor field onto active-DOF coordinates (rotating into
    /// the local frame where applicable; constrained components are dropped).
    pub fn to_active(&self, field: &SpinorField) -> Result<Vec<C64>> {
        if field.values.len() != self.grid.n_dofs() || field.fiber_dim != self.grid.fiber_dim {
            return Err(Error::Shape("field does not match basis grid".into()));
        }
        let d = self.grid.fiber_dim;
        let mut out = vec![ZERO; self.n_active()];
        match self.frame {
            FiberFrame::Standard => {
                for (i, dof) in self.active.iter().enumerate() {
                    out[i] = field.values[dof.point * d + dof.component];
                }
            }
            FiberFrame::ChiralRotated { .. } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for (i, dof) in self.active.iter().enumerate() {
                    let p1 = field.values[dof.point * 2];
                    let p2 = field.values[dof.point * 2 + 1];
                    // a = v_plus^H psi, b = v_minus^H psi.
                    out[i] = if dof.component == 0 {
                        (p1 - cplx(0.0, 1.0) * p2) * s
                    } else {
                        (p1 + cplx(0.0, 1.0) * p2) * s
                    };
                }
            }
        }
        Ok(out)
    }

    /// Reconstruct a grid spinor field from active-DOF coordinates;
    /// constrained components are zero by definition.
    pub fn from_active(&self, coeffs: &[C64]) -> Result<SpinorField> {
        if coeffs.len() != self.n_active() {
            return Err(Error::Shape("coefficient vector does not match basis".into()));
        }
        let d = self.grid.fiber_dim;
        let mut field = SpinorField { values: vec![ZERO; self.grid.n_dofs()], fiber_dim: d };
        match self.frame {
            FiberFrame::Standard => {
                for (i, dof) in self.active.iter().enumerate() {
                    field.values[dof.point * d + dof.component] = coeffs[i];
                }
            }
            FiberFrame::ChiralRotated { .. } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for (i, dof) in self.active.iter().enumerate() {
                    let c = coeffs[i];
                    if dof.component == 0 {
                        // psi += a * v_plus
                        field.values[dof.point * 2] += c * s;
                        field.values[dof.point * 2 + 1] += cplx(0.0, 1.0) * c * s;
                    } else {
                        field.values[dof.point * 2] += c * s;
                        field.values[dof.point * 2 + 1] -= cplx(0.0, 1.0) * c * s;
                    }
                }
            }
        }
        Ok(field)
    }

    /// Structural compatibility (same geometry and active list).
    pub fn same_space(&self, other: &BasisMap) -> bool {
        self.grid.geometry == other.grid.geometry
            && self.frame == other.frame
            && self.active == other.active
    }
}

/// Per-point Hermitian blocks of a mass operator (quadrature weight included),
/// kept for fast symmetric-root whitening.
#[derive(Debug, Clone)]
pub struct MassBlock {
    /// First active index of the block (the block occupies `start..start+dim`).
    pub start: usize,
    pub dim: usize,
    /// Row-major `dim x dim` entries of `w_x * W(x)` in the local frame.
    pub entries: [C64; 4],
}

/// Dense operator on the active-DOF space.
#[derive(Debug)]
pub struct OperatorMatrix {
    /// Pointwise action on active coordinates.
    pub matrix: Mat<C64>,
    pub basis: Arc<BasisMap>,
    /// Quadrature weight per active DOF.
    pub dof_weights: Vec<f64>,
    /// `||B - B^H|| / ||B||` of the weak matrix `B = Q * action`.
    pub hermitian_residual: f64,
    /// Present on mass operators: the per-point weak blocks and the weight.
    pub mass_blocks: Option<Vec<MassBlock>>,
    pub weight: Option<WeightField>,
}

/// Block-diagonal Hermitian matrix aligned with the per-point mass blocks;
/// the result of functional calculus on a mass operator.
#[derive(Debug, Clone)]
pub struct BlockDiag {
    pub n: usize,
    pub blocks: Vec<MassBlock>,
}

impl BlockDiag {
    pub fn dense(&self) -> Mat<C64> {
        let mut out = Mat::zeros(self.n, self.n);
        for b in &self.blocks {
            for s in 0..b.dim {
                for r in 0..b.dim {
                    out[(b.start + s, b.start + r)] = b.entries[s * b.dim + r];
                }
            }
        }
        out
    }

    /// `self * m`.
    pub fn mul_left(&self, m: &Mat<C64>) -> Mat<C64> {
        let cols = m.ncols();
        let mut out = Mat::zeros(self.n, cols);
        for b in &self.blocks {
            for c in 0..cols {
                for s in 0..b.dim {
                    let mut acc = ZERO;
                    for r in 0..b.dim {
                        acc += b.entries[s * b.dim + r] * m[(b.start + r, c)];
                    }
                    out[(b.start + s, c)] = acc;
                }
            }
        }
        out
    }

    /// `m * self`.
    pub fn mul_right(&self, m: &Mat<C64>) -> Mat<C64> {
        let rows = m.nrows();
        let mut out = Mat::zeros(rows, self.n);
        for b in &self.blocks {
            for row in 0..rows {
                for s in 0..b.dim {
                    let mut acc = ZERO;
                    for r in 0..b.dim {
                        acc += m[(row, b.start + r)] * b.entries[r * b.dim + s];
                    }
                    out[(row, b.start + s)] = acc;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.n];
        for b in &self.blocks {
            for s in 0..b.dim {
                let mut acc = ZERO;
                for r in 0..b.dim {
                    acc += b.entries[s * b.dim + r] * v[b.start + r];
                }
                out[b.start + s] = acc;
            }
        }
        out
    }
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// The bilinear-form matrix `Q * action`.
    pub fn weak_matrix(&self) -> Mat<C64> {
        let n = self.n();
        Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * self.dof_weights[i])
    }

    /// Apply the pointwise action to active coordinates.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n();
        if let Some(blocks) = &self.mass_blocks {
            // Mass action: pointwise W, i.e. weak block / quadrature weight.
            let mut out = vec![ZERO; n];
            for b in blocks {
                for s in 0..b.dim {
                    let w = self.dof_weights[b.start + s];
                    let mut acc = ZERO;
                    for r in 0..b.dim {
                        acc += b.entries[s * b.dim + r] * v[b.start + r];
                    }
                    out[b.start + s] = acc * (1.0 / w);
                }
            }
            return out;
        }
        let mut out = vec![ZERO; n];
        for i in 0..n {
            let mut acc = ZERO;
            for j in 0..n {
                acc += self.matrix[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn apply_mat(&self, v: &Mat<C64>) -> Mat<C64> {
        &self.matrix * v
    }

    /// Apply the weak form `Q * action` to a coordinate vector.
    pub fn weak_apply(&self, v: &[C64]) -> Vec<C64> {
        if let Some(blocks) = &self.mass_blocks {
            return BlockDiag { n: self.n(), blocks: blocks.clone() }.apply(v);
        }
        let mut out = self.apply(v);
        for (o, &w) in out.iter_mut().zip(&self.dof_weights) {
            *o *= w;
        }
        out
    }

    /// Apply the weak form to a block of columns.
    pub fn weak_apply_mat(&self, m: &Mat<C64>) -> Mat<C64> {
        if let Some(blocks) = &self.mass_blocks {
            let bd = BlockDiag { n: self.n(), blocks: blocks.clone() };
            return bd.mul_left(m);
        }
        let am = self.apply_mat(m);
        Mat::from_fn(am.nrows(), am.ncols(), |i, j| am[(i, j)] * self.dof_weights[i])
    }

    /// Apply to a grid spinor field (project to active coordinates, act,
    /// reconstruct). On the chiral interval the result is the compression of
    /// `D psi` to the constrained subspace.
    pub fn apply_field(&self, field: &SpinorField, grid: &Grid) -> Result<SpinorField> {
        if grid.geometry != self.basis.grid.geometry {
            return Err(Error::Shape("field grid does not match operator".into()));
        }
        let v = self.basis.to_active(field)?;
        let out = self.apply(&v);
        self.basis.from_active(&out)
    }

    /// For mass operators: `blockdiag(w_x W(x))^p`, the symmetric functional
    /// calculus power of the weak mass, block by block.
    pub fn mass_power(&self, p: f64) -> Result<BlockDiag> {
        let blocks = self
            .mass_blocks
            .as_ref()
            .ok_or_else(|| Error::Numeric("operator carries no mass blocks".into()))?;
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            let mut nb = b.clone();
            match b.dim {
                1 => {
                    let x = b.entries[0].re;
                    if x <= 0.0 {
                        return Err(Error::Numeric("mass block not positive definite".into()));
                    }
                    nb.entries[0] = cplx(x.powf(p), 0.0);
                }
                2 => {
                    let (eigs, u) = crate::weights::hermitian2_eigendecomp(&b.entries);
                    if eigs[0] <= 0.0 {
                        return Err(Error::Numeric("mass block not positive definite".into()));
                    }
                    let (f0, f1) = (eigs[0].powf(p), eigs[1].powf(p));
                    for s in 0..2 {
                        for r in 0..2 {
                            nb.entries[s * 2 + r] = u[s * 2] * u[r * 2].conj() * f0
                                + u[s * 2 + 1] * u[r * 2 + 1].conj() * f1;
                        }
                    }
                }
                _ => unreachable!(),
            }
            out.push(nb);
        }
        Ok(BlockDiag { n: self.n(), blocks: out })
    }
}

/// The 2x2 Clifford generators used on two-dimensional fibers.
pub fn pauli(k: usize) -> [C64; 4] {
    match k {
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, cplx(0.0, -1.0), cplx(0.0, 1.0), ZERO],
        3 => [ONE, ZERO, ZERO, cplx(-1.0, 0.0)],
        _ => panic!("pauli index must be 1, 2 or 3"),
    }
}

/// Exact spectral differentiation matrix for `-i d/dx` on `n` uniform points
/// of a circle of circumference `length`, with Fourier modes shifted by the
/// spin twist: frequencies `(2 pi / L) (m + delta)`, `m = -n/2 .. n/2 - 1`.
fn spectral_diff_1d(n: usize, length: f64, delta: f64) -> Mat<C64> {
    let h = length / n as f64;
    let scale = 2.0 * std::f64::consts::PI / length;
    let freqs: Vec<f64> =
        (0..n).map(|m| scale * (m as i64 - (n / 2) as i64) as f64 + scale * delta).collect();
    let root = 1.0 / (n as f64).sqrt();
    let v = Mat::from_fn(n, n, |j, m| {
        let phase = freqs[m] * (j as f64 * h);
        cplx(phase.cos(), phase.sin()) * root
    });
    let vk = Mat::from_fn(n, n, |j, m| v[(j, m)] * freqs[m]);
    &vk * v.adjoint()
}

/// Assemble the discrete Dirac operator for a geometry.
///
/// - `CircleS1`: `D = -i d/dtheta` by spectral differentiation with the
///   periodic (twist 0) or antiperiodic (twist 1/2) phase convention.
/// - `Torus2`: `D = -i (sigma_1 d_1 + sigma_2 d_2)` on the Fourier lattice
///   shifted by the twist pair.
/// - `IntervalChiral`: `D = -i sigma_1 d/dx` with the chirality operator
///   `G = chirality_sign * sigma_3`; the boundary constraint `B+ psi = 0`
///   eliminates one fiber component at each endpoint (exactly, in the
///   `sigma_2` eigenbasis where `B+` is diagonal), and the derivative is the
///   exact half-integer Fourier collocation obtained by unfolding onto the
///   antiperiodic double cover. The compressed operator is Hermitian with
///   respect to the trapezoid quadrature by construction.
pub fn assemble_dirac(geometry: &Geometry, grid: &Grid) -> Result<OperatorMatrix> {
    geometry.validate()?;
    if grid.geometry != *geometry {
        return Err(Error::Shape("grid was not built from this geometry".into()));
    }
    match geometry {
        Geometry::CircleS1 { length, twist, resolution } => {
            let action = spectral_diff_1d(*resolution, *length, twist.delta());
            finish_dirac(grid.clone(), FiberFrame::Standard, &[], action)
        }
        Geometry::Torus2 { lengths, twists, resolution } => {
            let n = *resolution;
            let d1 = spectral_diff_1d(n, lengths[0], twists[0].delta());
            let d2 = spectral_diff_1d(n, lengths[1], twists[1].delta());
            let s1 = pauli(1);
            let s2 = pauli(2);
            let dim = 2 * n * n;
            let mut action = Mat::zeros(dim, dim);
            // Point index pt = a * n + b, matching build_grid's ordering.
            for a in 0..n {
                for b in 0..n {
                    let p = a * n + b;
                    for s in 0..2 {
                        for r in 0..2 {
                            let cs1 = s1[s * 2 + r];
                            if cs1 != ZERO {
                                for a2 in 0..n {
                                    let q = a2 * n + b;
                                    action[(2 * p + s, 2 * q + r)] += cs1 * d1[(a, a2)];
                                }
                            }
                            let cs2 = s2[s * 2 + r];
                            if cs2 != ZERO {
                                for b2 in 0..n {
                                    let q = a * n + b2;
                                    action[(2 * p + s, 2 * q + r)] += cs2 * d2[(b, b2)];
                                }
                            }
                        }
                    }
                }
            }
            finish_dirac(grid.clone(), FiberFrame::Standard, &[], action)
        }
        Geometry::IntervalChiral { length, chirality_sign, resolution } => {
            let n = *resolution;
            let sigma = *chirality_sign as f64; // reflection sign of the unfolding
            // Antiperiodic double cover with 2n points and circumference 2L.
            let danti = spectral_diff_1d(2 * n, 2.0 * length, 0.5);
            // Constraints: sign +1 eliminates a(0) and b(L);
            //              sign -1 eliminates b(0) and a(L).
            let constrained: [(usize, usize); 2] = if *chirality_sign == 1 {
                [(0, 0), (n, 1)]
            } else {
                [(0, 1), (n, 0)]
            };
            let basis = BasisMap::new(
                grid.clone(),
                FiberFrame::ChiralRotated { sign: *chirality_sign },
                &constrained,
            );
            let na = basis.n_active();
            debug_assert_eq!(na, 2 * n);
            // Unfold: w_j = a_j + i b_j (j = 0..n), w_{2n-j} = sigma (a_j - i b_j).
            // Columns of Phi indexed by active DOFs.
            let i_unit = cplx(0.0, 1.0);
            let mut phi = Mat::zeros(2 * n, na);
            for (idx, dof) in basis.active.iter().enumerate() {
                let j = dof.point;
                let coef = if dof.component == 0 { ONE } else { i_unit };
                phi[(j, idx)] = coef;
                if j >= 1 && j <= n - 1 {
                    let refl = if dof.component == 0 { ONE } else { -i_unit };
                    phi[(2 * n - j, idx)] = refl * sigma;
                }
            }
            // Fold back: rows of PhiInv over doubled-grid coordinates.
            let mut phi_inv = Mat::zeros(na, 2 * n);
            for (idx, dof) in basis.active.iter().enumerate() {
                let j = dof.point;
                if j >= 1 && j <= n - 1 {
                    if dof.component == 0 {
                        phi_inv[(idx, j)] = cplx(0.5, 0.0);
                        phi_inv[(idx, 2 * n - j)] = cplx(0.5 * sigma, 0.0);
                    } else {
                        phi_inv[(idx, j)] = cplx(0.0, -0.5);
                        phi_inv[(idx, 2 * n - j)] = cplx(0.0, 0.5 * sigma);
                    }
                } else {
                    // Single surviving component at each endpoint.
                    phi_inv[(idx, j)] = if dof.component == 0 { ONE } else { -i_unit };
                }
            }
            // D_int = -PhiInv * D_anti * Phi  (the unfolding reverses the sign).
            let prod = &phi_inv * &danti * &phi;
            let action = Mat::from_fn(na, na, |i, j| -prod[(i, j)]);
            finish_interval(basis, action)
        }
    }
}

fn finish_dirac(
    grid: Grid,
    frame: FiberFrame,
    constrained: &[(usize, usize)],
    action: Mat<C64>,
) -> Result<OperatorMatrix> {
    let basis = BasisMap::new(grid, frame, constrained);
    finish_with_basis(Arc::new(basis), action)
}

fn finish_interval(basis: BasisMap, action: Mat<C64>) -> Result<OperatorMatrix> {
    finish_with_basis(Arc::new(basis), action)
}

fn finish_with_basis(basis: Arc<BasisMap>, action: Mat<C64>) -> Result<OperatorMatrix> {
    let dof_weights = basis.dof_weights();
    let n = basis.n_active();
    let weak = Mat::from_fn(n, n, |i, j| action[(i, j)] * dof_weights[i]);
    let residual = hermitian_residual(&weak);
    // Polish rounding: store the exactly Hermitian weak form.
    let weak = Mat::from_fn(n, n, |i, j| (weak[(i, j)] + weak[(j, i)].conj()) * 0.5);
    let polished = Mat::from_fn(n, n, |i, j| weak[(i, j)] / dof_weights[i]);
    Ok(OperatorMatrix {
        matrix: polished,
        basis,
        dof_weights,
        hermitian_residual: residual,
        mass_blocks: None,
        weight: None,
    })
}

/// Assemble the weighted mass operator: block-diagonal with block
/// `quad_weight(x) * W(x)` per active grid point (in the local frame, trimmed
/// to the active components on the chiral interval). SPD by construction for
/// validated weights.
pub fn assemble_mass(
    weight: &WeightField,
    grid: &Grid,
    basis: &Arc<BasisMap>,
) -> Result<OperatorMatrix> {
    if weight.n_points() != grid.n_points() || weight.fiber_dim() != grid.fiber_dim {
        return Err(Error::Shape("weight field does not match grid".into()));
    }
    if grid.geometry != basis.grid.geometry {
        return Err(Error::Shape("basis does not match grid".into()));
    }
    let report = validate_spd(weight, 0.0);
    if !report.ok {
        return Err(Error::Domain(format!(
            "mass assembly requires an SPD weight (min eig {})",
            report.min_eig
        )));
    }
    let d = grid.fiber_dim;
    let na = basis.n_active();
    let mut action = Mat::zeros(na, na);
    let mut blocks = Vec::with_capacity(grid.n_points());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i_unit = cplx(0.0, 1.0);
    for pt in 0..grid.n_points() {
        let raw = weight.block(pt);
        // Local-frame block.
        let local: Vec<C64> = match basis.frame {
            FiberFrame::Standard => raw.to_vec(),
            FiberFrame::ChiralRotated { .. } => {
                // T^H W T with T = [v_plus | v_minus].
                let t = [s * ONE, s * ONE, s * i_unit, -s * i_unit];
                let mut out = vec![ZERO; 4];
                for a in 0..2 {
                    for b in 0..2 {
                        let mut acc = ZERO;
                        for p in 0..2 {
                            for q in 0..2 {
                                acc += t[p * 2 + a].conj() * raw[p * 2 + q] * t[q * 2 + b];
                            }
                        }
                        out[a * 2 + b] = acc;
                    }
                }
                out
            }
        };
        // Gather active components at this point.
        let comps: Vec<usize> =
            (0..d).filter(|&c| basis.active_index(pt, c).is_some()).collect();
        if comps.is_empty() {
            continue;
        }
        let start = basis.active_index(pt, comps[0]).unwrap();
        let dim = comps.len();
        let w = grid.quad_weights[pt];
        let mut entries = [ZERO; 4];
        for (bi, &ci) in comps.iter().enumerate() {
            for (bj, &cj) in comps.iter().enumerate() {
                let v = local[ci * d + cj];
                entries[bi * dim + bj] = v * w;
                action[(start + bi, start + bj)] = v;
            }
        }
        blocks.push(MassBlock { start, dim, entries });
    }
    let dof_weights = basis.dof_weights();
    let n = na;
    let weak = Mat::from_fn(n, n, |i, j| action[(i, j)] * dof_weights[i]);
    let residual = hermitian_residual(&weak);
    Ok(OperatorMatrix {
        matrix: action,
        basis: Arc::clone(basis),
        dof_weights,
        hermitian_residual: residual,
        mass_blocks: Some(blocks),
        weight: Some(weight.clone()),
    })
}
