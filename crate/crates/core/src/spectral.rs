//! Generalized symmetric-indefinite eigensolve `D phi = lambda M_A phi`,
//! signed indexing with kernel split, clustering into distinct eigenvalues,
//! A-orthonormal bases and spectral projectors.
//!
//! Indexing convention: the nonzero eigenvalues are listed with signed
//! indices `k in Z \ {0}`, positive eigenvalues ascending
//! (`0 < lambda_1 <= lambda_2 <= ...`) and negative descending
//! (`... <= lambda_{-2} <= lambda_{-1} < 0`).

use std::sync::Arc;

use crate::assembly::OperatorMatrix;
use crate::domain::{Geometry, Grid, SpinorField};
use crate::error::{Error, Result};
use crate::linalg::{cplx, hermitian_eigen, Mat, C64, ZERO};

/// Default kernel threshold, relative to the largest computed `|lambda|`.
pub const KERNEL_TOL_DEFAULT: f64 = 1e-8;
/// Default relative clustering tolerance.
pub const CLUSTER_TOL_REL_DEFAULT: f64 = 1e-6;
/// Default absolute clustering tolerance, relative to the spectrum scale.
pub const CLUSTER_TOL_ABS_DEFAULT: f64 = 1e-9;
/// Fraction of the discrete spectrum treated as reliable.
pub const RELIABLE_FRACTION: f64 = 0.6;

/// One cluster of equal (within tolerance) eigenvalues of one sign.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Signed cluster label `ell` (positive clusters 1, 2, ...; negative -1, -2, ...).
    pub ell: i32,
    /// Multiplicity-weighted mean of the member eigenvalues.
    pub mu: f64,
    /// Multiplicity `h_ell` (complex count).
    pub h: usize,
    /// Member indices `sigma_{ell-1} < |k| <= sigma_ell` (1-based magnitudes).
    pub first: usize,
}

impl Cluster {
    pub fn last(&self) -> usize {
        self.first + self.h - 1
    }

    /// Signed indices of the cluster members.
    pub fn indices(&self) -> Vec<i32> {
        let sign = if self.ell > 0 { 1 } else { -1 };
        (self.first..=self.last()).map(|j| sign * j as i32).collect()
    }
}

/// A-orthogonal projector onto one distinct-eigenvalue eigenspace.
#[derive(Debug, Clone)]
pub struct SpectralProjector {
    /// `P = Phi (M Phi)^H` acting on active-DOF coordinates.
    pub matrix: Mat<C64>,
    /// Cluster label; 0 denotes the kernel projector.
    pub ell: i32,
    pub rank: usize,
    /// The A-orthonormal eigenvector block spanning the range.
    pub range: Mat<C64>,
    /// `M * range`, so that `P = range * dual^H`.
    pub dual: Mat<C64>,
}

/// Solved weighted spectrum: signed-indexed eigenvalues, kernel basis,
/// A-orthonormal eigenvectors and the cluster structure.
#[derive(Debug)]
pub struct WeightedSpectrum {
    pub dirac: Arc<OperatorMatrix>,
    pub mass: Arc<OperatorMatrix>,
    /// `lambda_k` for `k = 1..=k_pos` (ascending).
    pos: Vec<f64>,
    /// `lambda_{-k}` for `k = 1..=k_neg` (descending values).
    neg: Vec<f64>,
    /// Columns are the A-orthonormal eigenvectors (active coordinates).
    pos_vecs: Mat<C64>,
    neg_vecs: Mat<C64>,
    kernel_vecs: Mat<C64>,
    pos_residuals: Vec<f64>,
    neg_residuals: Vec<f64>,
    pub pos_clusters: Vec<Cluster>,
    pub neg_clusters: Vec<Cluster>,
    pub cluster_tol_rel: f64,
    pub cluster_tol_abs: f64,
    /// Largest reliable eigenvalue magnitude of this discretization.
    pub reliable_cap: f64,
    pub k_max: usize,
}

impl WeightedSpectrum {
    pub fn geometry(&self) -> &Geometry {
        self.dirac.basis.geometry()
    }

    pub fn grid(&self) -> &Grid {
        &self.dirac.basis.grid
    }

    pub fn n_active(&self) -> usize {
        self.dirac.n()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_vecs.ncols()
    }

    pub fn retained_pos(&self) -> usize {
        self.pos.len()
    }

    pub fn retained_neg(&self) -> usize {
        self.neg.len()
    }

    /// Eigenvalue at signed index `k`.
    pub fn lambda(&self, k: i32) -> Result<f64> {
        match self.slot(k) {
            Some((list, idx)) => Ok(if list { self.pos[idx] } else { self.neg[idx] }),
            None => Err(Error::Range(format!("eigenvalue index {k} not retained"))),
        }
    }

    pub fn residual(&self, k: i32) -> Result<f64> {
        match self.slot(k) {
            Some((true, idx)) => Ok(self.pos_residuals[idx]),
            Some((false, idx)) => Ok(self.neg_residuals[idx]),
            None => Err(Error::Range(format!("eigenvalue index {k} not retained"))),
        }
    }

    fn slot(&self, k: i32) -> Option<(bool, usize)> {
        if k > 0 && (k as usize) <= self.pos.len() {
            Some((true, k as usize - 1))
        } else if k < 0 && ((-k) as usize) <= self.neg.len() {
            Some((false, (-k) as usize - 1))
        } else {
            None
        }
    }

    /// A-orthonormal eigenvector at signed index `k`, in active coordinates.
    pub fn eigvec(&self, k: i32) -> Result<Vec<C64>> {
        let (pos, idx) = self
            .slot(k)
            .ok_or_else(|| Error::Range(format!("eigenvector index {k} not retained")))?;
        let m = if pos { &self.pos_vecs } else { &self.neg_vecs };
        Ok((0..m.nrows()).map(|i| m[(i, idx)]).collect())
    }

    pub fn eigvec_field(&self, k: i32) -> Result<SpinorField> {
        self.dirac.basis.from_active(&self.eigvec(k)?)
    }

    /// A-orthonormal kernel basis vector `j` (0-based), active coordinates.
    pub fn kernel_vec(&self, j: usize) -> Result<Vec<C64>> {
        if j >= self.kernel_dim() {
            return Err(Error::Range(format!("kernel index {j} out of range")));
        }
        Ok((0..self.kernel_vecs.nrows()).map(|i| self.kernel_vecs[(i, j)]).collect())
    }

    pub fn kernel_field(&self, j: usize) -> Result<SpinorField> {
        self.dirac.basis.from_active(&self.kernel_vec(j)?)
    }

    /// All retained signed indices, positives ascending then negatives.
    pub fn retained_indices(&self) -> Vec<i32> {
        let mut v: Vec<i32> = (1..=self.pos.len() as i32).collect();
        v.extend((1..=self.neg.len() as i32).map(|k| -k));
        v
    }

    /// Matrix whose columns are the eigenvectors at the given signed indices.
    pub fn basis_matrix(&self, indices: &[i32]) -> Result<Mat<C64>> {
        let n = self.n_active();
        let mut m = Mat::zeros(n, indices.len());
        for (c, &k) in indices.iter().enumerate() {
            let v = self.eigvec(k)?;
            for i in 0..n {
                m[(i, c)] = v[i];
            }
        }
        Ok(m)
    }

    /// A-inner product of active coordinate vectors (conjugate-linear first).
    pub fn inner_a_active(&self, f: &[C64], g: &[C64]) -> C64 {
        let mg = self.mass.weak_apply(g);
        let mut acc = ZERO;
        for i in 0..f.len() {
            acc += f[i].conj() * mg[i];
        }
        acc
    }

    /// Cluster with signed label `ell`.
    pub fn cluster(&self, ell: i32) -> Result<&Cluster> {
        let list = if ell > 0 { &self.pos_clusters } else { &self.neg_clusters };
        list.iter()
            .find(|c| c.ell == ell)
            .ok_or_else(|| Error::Range(format!("cluster {ell} not present")))
    }

    /// A-orthogonal projector onto the eigenspace of cluster `ell`
    /// (`ell = 0` gives the kernel projector).
    pub fn projector(&self, ell: i32) -> Result<SpectralProjector> {
        let (range, rank) = if ell == 0 {
            let r = self.kernel_vecs.to_owned();
            let rank = r.ncols();
            if rank == 0 {
                return Err(Error::Range("kernel projector of a kernel-free spectrum".into()));
            }
            (r, rank)
        } else {
            let c = self.cluster(ell)?;
            (self.basis_matrix(&c.indices())?, c.h)
        };
        Ok(self.projector_from_range(range, ell, rank))
    }

    /// Projector built from member eigenvectors at explicit index positions;
    /// used when the limit spectrum's cluster ranges are imposed on a family
    /// member (the eigenspaces are collected by index range, not by
    /// eigenvalue proximity).
    pub fn projector_by_index_range(&self, ell: i32, first: usize, h: usize) -> Result<SpectralProjector> {
        let sign = if ell > 0 { 1 } else { -1 };
        let indices: Vec<i32> = (first..first + h).map(|j| sign * j as i32).collect();
        let range = self.basis_matrix(&indices)?;
        Ok(self.projector_from_range(range, ell, h))
    }

    fn projector_from_range(&self, range: Mat<C64>, ell: i32, rank: usize) -> SpectralProjector {
        let dual = self.mass.weak_apply_mat(&range);
        let matrix = &range * dual.adjoint();
        SpectralProjector { matrix, ell, rank, range, dual }
    }

    /// Labels of the retained clusters, negatives then positives.
    pub fn cluster_labels(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.neg_clusters.iter().map(|c| c.ell).collect();
        v.extend(self.pos_clusters.iter().map(|c| c.ell));
        v
    }
}

/// Outcome of [`index_eigenvalues`]: positions of kernel, positive and
/// negative eigenvalues in the raw ascending list.
#[derive(Debug, Clone)]
pub struct IndexedEigs {
    pub kernel: Vec<usize>,
    /// Ascending positives.
    pub pos: Vec<usize>,
    /// Negatives ordered by descending value (`lambda_{-1}` first).
    pub neg: Vec<usize>,
    pub kernel_threshold: f64,
}

/// Split a raw real spectrum into kernel / positive / negative parts and
/// assign the signed indices.
///
/// Eigenvalues with `|lambda| <= kernel_tol * scale` are assigned to the
/// kernel, with `scale` the largest computed magnitude. An eigenvalue within
/// a factor 10 of the threshold on either side is ambiguous and produces a
/// diagnostic error demanding a resolution increase, as does a kernel
/// dimension contradicting `kernel_dim_hint`.
pub fn index_eigenvalues(
    raw: &[f64],
    kernel_tol: f64,
    kernel_dim_hint: Option<usize>,
) -> Result<IndexedEigs> {
    if raw.is_empty() {
        return Err(Error::Range("empty spectrum".into()));
    }
    let scale = raw.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let thr = kernel_tol * scale;
    for &v in raw {
        let a = v.abs();
        if a > thr / 10.0 && a < thr * 10.0 {
            return Err(Error::Diagnostic(format!(
                "eigenvalue {v} sits within a factor 10 of the kernel threshold {thr}; \
                 increase the resolution to separate kernel from near-kernel modes"
            )));
        }
    }
    let mut kernel = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &v) in raw.iter().enumerate() {
        if v.abs() <= thr {
            kernel.push(i);
        } else if v > 0.0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    pos.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
    neg.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap());
    if let Some(hint) = kernel_dim_hint {
        if kernel.len() != hint {
            return Err(Error::Diagnostic(format!(
                "kernel dimension {} contradicts the analytic hint {}",
                kernel.len(),
                hint
            )));
        }
    }
    Ok(IndexedEigs { kernel, pos, neg, kernel_threshold: thr })
}

/// Cluster a monotone list of same-sign eigenvalues into distinct values.
/// Consecutive entries merge when
/// `|l_i - l_j| <= cluster_tol_abs + cluster_tol_rel * max(|l_i|, |l_j|)`.
/// Returns `(mu, h, first_index)` triples with 1-based member indices.
pub fn cluster_distinct(
    values: &[f64],
    cluster_tol_rel: f64,
    cluster_tol_abs: f64,
) -> Vec<(f64, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() {
            let a = values[end - 1];
            let b = values[end];
            if (a - b).abs() <= cluster_tol_abs + cluster_tol_rel * a.abs().max(b.abs()) {
                end += 1;
            } else {
                break;
            }
        }
        let h = end - start;
        let mu = values[start..end].iter().sum::<f64>() / h as f64;
        out.push((mu, h, start + 1));
        start = end;
    }
    out
}

/// Modified Gram-Schmidt in the A-inner product defined by the mass
/// operator's weak form. Columns are orthonormalized in place.
pub fn orthonormalize_a(vectors: &mut Mat<C64>, mass: &OperatorMatrix) -> Result<()> {
    let n = vectors.nrows();
    let k = vectors.ncols();
    let col = |m: &Mat<C64>, j: usize| -> Vec<C64> { (0..n).map(|i| m[(i, j)]).collect() };
    let a_inner = |m: &Mat<C64>, i: usize, j: usize| -> C64 {
        let mg = mass.weak_apply(&col(m, j));
        let mut acc = ZERO;
        for r in 0..n {
            acc += m[(r, i)].conj() * mg[r];
        }
        acc
    };
    for i in 0..k {
        let norm0 = a_inner(vectors, i, i).re.max(0.0).sqrt();
        for j in 0..i {
            let coef = a_inner(vectors, j, i);
            for r in 0..n {
                let vj = vectors[(r, j)];
                vectors[(r, i)] -= coef * vj;
            }
        }
        let norm = a_inner(vectors, i, i).re.max(0.0).sqrt();
        if norm <= 1e-10 * norm0.max(1e-300) || norm == 0.0 {
            return Err(Error::Numeric(format!(
                "rank deficiency while A-orthonormalizing column {i}"
            )));
        }
        let inv = cplx(1.0 / norm, 0.0);
        for r in 0..n {
            vectors[(r, i)] *= inv;
        }
    }
    Ok(())
}

/// Solve the generalized problem `D phi = lambda M_A phi` by whitening with
/// the symmetric root of the mass: `H = M^-1/2 B M^-1/2` with `B` the weak
/// Dirac matrix, dense Hermitian eigendecomposition of `H`, and mapping the
/// eigenvectors back by `M^-1/2`. Eigenvalues are then signed-indexed,
/// clustered, and the eigenvectors A-orthonormalized.
///
/// Only indices `|k| <= k_max` are retained, with the guarantee that retained
/// magnitudes stay below 60% of the largest computed magnitude; a `k_max`
/// beyond that window produces a truncation error reporting the reliable
/// maximum.
pub fn solve_weighted(
    dirac: &Arc<OperatorMatrix>,
    mass: &Arc<OperatorMatrix>,
    k_max: usize,
    kernel_dim_hint: Option<usize>,
) -> Result<WeightedSpectrum> {
    if !dirac.basis.same_space(&mass.basis) {
        return Err(Error::Shape("Dirac and mass operators live on different DOF spaces".into()));
    }
    let n = dirac.n();
    let hint = kernel_dim_hint;
    if 2 * k_max + hint.unwrap_or(0) > n {
        return Err(Error::Range(format!(
            "k_max = {k_max} does not fit a matrix of order {n}"
        )));
    }
    // Symmetric-root whitening. Mass operators assembled by this crate carry
    // their pointwise blocks; a dense Hermitian root is the fallback.
    let b = dirac.weak_matrix();
    enum Root {
        Blocks(crate::assembly::BlockDiag),
        Dense(Mat<C64>),
    }
    let root = if mass.mass_blocks.is_some() {
        Root::Blocks(mass.mass_power(-0.5)?)
    } else {
        Root::Dense(dense_inv_sqrt(&mass.weak_matrix())?)
    };
    let h = match &root {
        Root::Blocks(s) => s.mul_left(&s.mul_right(&b)),
        Root::Dense(s) => s * &b * s,
    };
    let eig = hermitian_eigen(&h)?;
    let raw = &eig.values;
    let scale = raw.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let reliable_cap = RELIABLE_FRACTION * scale;

    let indexed = index_eigenvalues(raw, KERNEL_TOL_DEFAULT, hint)?;
    let reliable_k = |list: &[usize]| -> usize {
        list.iter().take_while(|&&i| raw[i].abs() <= reliable_cap).count()
    };
    let reliable_k_max = reliable_k(&indexed.pos).min(reliable_k(&indexed.neg));
    if k_max > reliable_k_max {
        return Err(Error::Truncation { reliable_k_max });
    }

    // Map back the retained eigenvectors: v = M^-1/2 u.
    let gather = |positions: &[usize]| -> Mat<C64> {
        let cols = positions.len();
        let u = Mat::from_fn(n, cols, |i, c| eig.vectors[(i, positions[c])]);
        match &root {
            Root::Blocks(s) => s.mul_left(&u),
            Root::Dense(s) => s * &u,
        }
    };
    let pos_idx: Vec<usize> = indexed.pos[..k_max].to_vec();
    let neg_idx: Vec<usize> = indexed.neg[..k_max].to_vec();
    let mut pos_vecs = gather(&pos_idx);
    let mut neg_vecs = gather(&neg_idx);
    let mut kernel_vecs = gather(&indexed.kernel);

    let pos: Vec<f64> = pos_idx.iter().map(|&i| raw[i]).collect();
    let neg: Vec<f64> = neg_idx.iter().map(|&i| raw[i]).collect();

    let cluster_tol_abs = CLUSTER_TOL_ABS_DEFAULT * scale;
    let pos_clusters: Vec<Cluster> = cluster_distinct(&pos, CLUSTER_TOL_REL_DEFAULT, cluster_tol_abs)
        .into_iter()
        .enumerate()
        .map(|(i, (mu, h, first))| Cluster { ell: (i + 1) as i32, mu, h, first })
        .collect();
    let neg_clusters: Vec<Cluster> = cluster_distinct(&neg, CLUSTER_TOL_REL_DEFAULT, cluster_tol_abs)
        .into_iter()
        .enumerate()
        .map(|(i, (mu, h, first))| Cluster { ell: -((i + 1) as i32), mu, h, first })
        .collect();

    // A-orthonormalize within clusters and the kernel (the whitened vectors
    // are already A-orthonormal to rounding; this polishes degenerate blocks).
    for c in &pos_clusters {
        polish_cluster(&mut pos_vecs, c.first - 1, c.h, mass)?;
    }
    for c in &neg_clusters {
        polish_cluster(&mut neg_vecs, c.first - 1, c.h, mass)?;
    }
    if kernel_vecs.ncols() > 0 {
        orthonormalize_a(&mut kernel_vecs, mass)?;
    }

    // Residuals ||B v - lambda M v|| / ||v||.
    let residuals = |vals: &[f64], vecs: &Mat<C64>| -> Vec<f64> {
        let bv = &b * vecs;
        let mv = mass.weak_apply_mat(vecs);
        vals.iter()
            .enumerate()
            .map(|(c, &l)| {
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for i in 0..n {
                    num += (bv[(i, c)] - mv[(i, c)] * l).norm_sqr();
                    den += vecs[(i, c)].norm_sqr();
                }
                (num / den.max(1e-300)).sqrt()
            })
            .collect()
    };
    let pos_residuals = residuals(&pos, &pos_vecs);
    let neg_residuals = residuals(&neg, &neg_vecs);

    Ok(WeightedSpectrum {
        dirac: Arc::clone(dirac),
        mass: Arc::clone(mass),
        pos,
        neg,
        pos_vecs,
        neg_vecs,
        kernel_vecs,
        pos_residuals,
        neg_residuals,
        pos_clusters,
        neg_clusters,
        cluster_tol_rel: CLUSTER_TOL_REL_DEFAULT,
        cluster_tol_abs,
        reliable_cap,
        k_max,
    })
}

fn polish_cluster(vecs: &mut Mat<C64>, start: usize, h: usize, mass: &OperatorMatrix) -> Result<()> {
    if h <= 1 {
        // Normalize only.
        let n = vecs.nrows();
        let mut block = Mat::from_fn(n, 1, |i, _| vecs[(i, start)]);
        orthonormalize_a(&mut block, mass)?;
        for i in 0..n {
            vecs[(i, start)] = block[(i, 0)];
        }
        return Ok(());
    }
    let n = vecs.nrows();
    let mut block = Mat::from_fn(n, h, |i, c| vecs[(i, start + c)]);
    orthonormalize_a(&mut block, mass)?;
    for c in 0..h {
        for i in 0..n {
            vecs[(i, start + c)] = block[(i, c)];
        }
    }
    Ok(())
}

/// Dense Hermitian inverse square root (fallback whitening path, and the
/// second route of the whitening cross-check).
pub fn dense_inv_sqrt(m: &Mat<C64>) -> Result<Mat<C64>> {
    let eig = hermitian_eigen(m)?;
    let n = m.nrows();
    let floor = eig.values.last().copied().unwrap_or(0.0) * 1e-14;
    for &v in &eig.values {
        if v <= floor.max(0.0) {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (eigenvalue {v})"
            )));
        }
    }
    let u = &eig.vectors;
    let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * (1.0 / eig.values[j].sqrt()));
    Ok(&scaled * u.adjoint())
}
