//! Weighted spectral wave propagator `U(t) = sum_l e^{i t mu_l} P_l` (plus
//! the kernel projector at unit phase) and the associated integral kernel,
//! restricted to the retained span.
//!
//! Matrix elements between limit eigenvectors are taken in the member's
//! weighted inner product, `<psi_q, U_m(t) psi_p>_{A_m}`; for the limit
//! propagator itself this reduces to `e^{i t lambda_p} delta_pq`, which is
//! the quantity whose convergence certifies weak-operator convergence of the
//! kernels along a family.

use std::sync::Arc;

use crate::domain::SpinorField;
use crate::error::{Error, Result};
use crate::linalg::{cplx, Mat, C64, ZERO};
use crate::spectral::WeightedSpectrum;

/// Projection residual above which [`evolve`] attaches a truncation warning.
pub const TRUNCATION_WARN: f64 = 1e-8;

/// The propagator at time `t`, truncated to clusters `|l| <= ell_max`
/// (the kernel cluster, when present, evolves with unit phase).
pub struct Propagator {
    pub spectrum: Arc<WeightedSpectrum>,
    pub t: f64,
    pub ell_max: usize,
    /// Dense matrix on the active-DOF space, acting as `U(t)` on the
    /// retained span and as 0 on its A-orthogonal complement.
    pub matrix: Mat<C64>,
}

impl Propagator {
    pub fn new(spectrum: &Arc<WeightedSpectrum>, t: f64, ell_max: usize) -> Result<Self> {
        let n = spectrum.n_active();
        // Gather the retained range and dual factors with per-column phases:
        // U = (Phi diag(phase)) (M Phi)^H, one thin product.
        let mut cols: Vec<(i32, f64)> = Vec::new(); // (signed index, cluster mu)
        for ell in spectrum.cluster_labels() {
            if ell.unsigned_abs() as usize > ell_max {
                continue;
            }
            let c = spectrum.cluster(ell)?;
            for k in c.indices() {
                cols.push((k, c.mu));
            }
        }
        let h0 = spectrum.kernel_dim();
        if cols.is_empty() && h0 == 0 {
            return Err(Error::Range("propagator truncation retains no cluster".into()));
        }
        let r = cols.len() + h0;
        let mut range = Mat::<C64>::zeros(n, r);
        let mut phases = vec![ZERO; r];
        for (c, &(k, mu)) in cols.iter().enumerate() {
            let v = spectrum.eigvec(k)?;
            for i in 0..n {
                range[(i, c)] = v[i];
            }
            phases[c] = cplx(0.0, t * mu).exp();
        }
        for j in 0..h0 {
            let v = spectrum.kernel_vec(j)?;
            for i in 0..n {
                range[(i, cols.len() + j)] = v[i];
            }
            phases[cols.len() + j] = cplx(1.0, 0.0); // kernel evolves with unit phase
        }
        let dual = spectrum.mass.weak_apply_mat(&range);
        let phased = Mat::from_fn(n, r, |i, j| range[(i, j)] * phases[j]);
        let matrix = &phased * dual.adjoint();
        Ok(Propagator { spectrum: Arc::clone(spectrum), t, ell_max, matrix })
    }

    pub fn apply_active(&self, v: &[C64]) -> Vec<C64> {
        let n = v.len();
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

    /// Matrix element `<psi_q, U(t) psi_p>` in this propagator's weighted
    /// inner product, between eigenvectors of `limit_spectrum`.
    pub fn matrix_element(&self, limit_spectrum: &WeightedSpectrum, p: i32, q: i32) -> Result<C64> {
        let psi_p = limit_spectrum.eigvec(p)?;
        let psi_q = limit_spectrum.eigvec(q)?;
        if psi_p.len() != self.spectrum.n_active() {
            return Err(Error::Shape("spectra act on different DOF spaces".into()));
        }
        let u_psi_p = self.apply_active(&psi_p);
        Ok(self.spectrum.inner_a_active(&psi_q, &u_psi_p))
    }
}

/// Result of [`evolve`]: the evolved field, the A-norm of the component of
/// the initial state outside the retained span (relative to its A-norm),
/// and a warning when that residual exceeds [`TRUNCATION_WARN`].
pub struct EvolveOutput {
    pub field: SpinorField,
    pub truncation_residual: f64,
    pub warning: Option<String>,
}

/// Evolve `psi0` by `sum_{|l| <= ell_max} e^{i t mu_l} P_l psi0` (kernel
/// cluster at unit phase). The initial state is first projected onto the
/// retained span; the projection residual is reported.
pub fn evolve(
    spectrum: &Arc<WeightedSpectrum>,
    t: f64,
    psi0: &SpinorField,
    ell_max: usize,
) -> Result<EvolveOutput> {
    let prop = Propagator::new(spectrum, t, ell_max)?;
    let v = spectrum.dirac.basis.to_active(psi0)?;
    // Projection onto the retained span (all clusters within the truncation
    // plus the kernel): assemble sum P_l v by applying U(0)-like projector.
    let proj = Propagator::new(spectrum, 0.0, ell_max)?;
    let pv = proj.apply_active(&v);
    let norm_a = spectrum.inner_a_active(&v, &v).re.max(0.0).sqrt();
    let diff: Vec<C64> = v.iter().zip(&pv).map(|(a, b)| a - b).collect();
    let resid_abs = spectrum.inner_a_active(&diff, &diff).re.max(0.0).sqrt();
    let truncation_residual = if norm_a > 0.0 { resid_abs / norm_a } else { 0.0 };
    let out = prop.apply_active(&v);
    let field = spectrum.dirac.basis.from_active(&out)?;
    let warning = (truncation_residual > TRUNCATION_WARN).then(|| {
        format!(
            "initial state has relative A-norm residual {truncation_residual:.3e} outside the retained span"
        )
    });
    Ok(EvolveOutput { field, truncation_residual, warning })
}

/// Matrix element `<psi_q, U_m(t) psi_p>_{A_m}` of the member-`m` propagator
/// between the limit spectrum's eigenvectors at signed indices `p` and `q`.
/// When `spectrum_m` is the limit itself this equals
/// `e^{i t lambda_p} delta_pq` to rounding.
pub fn kernel_matrix_element(
    spectrum_m: &Arc<WeightedSpectrum>,
    t: f64,
    p: i32,
    q: i32,
    limit_spectrum: &WeightedSpectrum,
    ell_max: usize,
) -> Result<C64> {
    let prop = Propagator::new(spectrum_m, t, ell_max)?;
    prop.matrix_element(limit_spectrum, p, q)
}

/// The raw weighted kernel matrix `K(t) = W U(t) W`-style dyad sum
/// `sum_l e^{i t mu_l} (W Phi_l)(W Phi_l)^H` (plus the kernel cluster at
/// unit phase): the discrete analogue of the weighted dyadic kernel. Applying
/// it through the A-weighted quadrature, `W^-1 K Q psi0`, reproduces
/// [`evolve`] on the retained span.
pub fn kernel_assemble(
    spectrum: &Arc<WeightedSpectrum>,
    t: f64,
    ell_max: usize,
) -> Result<Mat<C64>> {
    let n = spectrum.n_active();
    let mut out = Mat::<C64>::zeros(n, n);
    let mut labels: Vec<i32> = spectrum
        .cluster_labels()
        .into_iter()
        .filter(|l| l.unsigned_abs() as usize <= ell_max)
        .collect();
    if spectrum.kernel_dim() > 0 {
        labels.push(0);
    }
    if labels.is_empty() {
        return Err(Error::Range("kernel truncation retains no cluster".into()));
    }
    for ell in labels {
        let p = spectrum.projector(ell)?;
        let mu = if ell == 0 { 0.0 } else { spectrum.cluster(ell)?.mu };
        let phase = cplx(0.0, t * mu).exp();
        // (W Phi)(W Phi)^H with W the pointwise mass action.
        let w_phi = {
            let r = p.range.ncols();
            let mut m = Mat::zeros(n, r);
            for c in 0..r {
                let col: Vec<C64> = (0..n).map(|i| p.range[(i, c)]).collect();
                let wc = spectrum.mass.apply(&col);
                for i in 0..n {
                    m[(i, c)] = wc[i];
                }
            }
            m
        };
        let dyad = &w_phi * w_phi.adjoint();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += phase * dyad[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Apply an assembled kernel through the A-weighted quadrature:
/// `W^-1 K Q psi0`, the discrete form of integrating the kernel against the
/// initial state.
pub fn kernel_apply(
    spectrum: &WeightedSpectrum,
    kernel: &Mat<C64>,
    psi0: &SpinorField,
) -> Result<SpinorField> {
    let basis = &spectrum.dirac.basis;
    let v = basis.to_active(psi0)?;
    let n = v.len();
    let qv: Vec<C64> =
        v.iter().enumerate().map(|(i, z)| z * spectrum.dirac.dof_weights[i]).collect();
    let mut kv = vec![ZERO; n];
    for i in 0..n {
        let mut acc = ZERO;
        for j in 0..n {
            acc += kernel[(i, j)] * qv[j];
        }
        kv[i] = acc;
    }
    // W^-1 through the mass blocks: (w W)^-1 scaled back by w.
    let minv = spectrum.mass.mass_power(-1.0)?;
    let mut scaled = minv.apply(&kv);
    for (i, z) in scaled.iter_mut().enumerate() {
        *z *= spectrum.dirac.dof_weights[i];
    }
    basis.from_active(&scaled)
}

/// Compose two assembled kernels through the A-weighted quadrature:
/// `K_t o K_s = K_t Q W^-1 K_s`; equals `K_{t+s}` on the retained span.
pub fn kernel_compose(
    spectrum: &WeightedSpectrum,
    k1: &Mat<C64>,
    k2: &Mat<C64>,
) -> Result<Mat<C64>> {
    let n = k1.nrows();
    // Q W^-1 = w^2 (w W)^-1 blockwise.
    let mut qwinv = spectrum.mass.mass_power(-1.0)?;
    for b in &mut qwinv.blocks {
        let w = spectrum.dirac.dof_weights[b.start];
        for e in b.entries.iter_mut() {
            *e *= w * w;
        }
    }
    let middle = qwinv.mul_left(k2);
    let _ = n;
    Ok(k1 * &middle)
}
