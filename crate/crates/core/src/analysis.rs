//! Continuity experiments across weight families: eigenvalue convergence,
//! eigenspace distances in the discrete `H^1` norm and a Hoelder surrogate,
//! projector gaps, and a priori norm diagnostics.
//!
//! Cluster matching convention: the limit weight's cluster structure defines
//! the index ranges; a family member's `ell`-th eigenspace is spanned by its
//! eigenvectors at those index positions (not by eigenvalue proximity).

use std::sync::Arc;

use crate::assembly::{assemble_dirac, assemble_mass, OperatorMatrix};
use crate::domain::{build_grid, norm_h1_discrete, Grid, SpinorField};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CholeskyFactor, Mat, C64, ZERO};
use crate::spectral::{solve_weighted, SpectralProjector, WeightedSpectrum};
use crate::weights::{lp_norm, weak_convergence_residual, WeightFamily, WeightField};

/// Discrete `H^1` metric `<f, g> + <Df, Dg>` on active coordinates, with a
/// cached Cholesky factorization for gaps and least-squares projections.
pub struct H1Metric {
    pub gram: Mat<C64>,
    chol: CholeskyFactor,
}

impl H1Metric {
    pub fn new(dirac: &OperatorMatrix) -> Result<Self> {
        let n = dirac.n();
        let d = &dirac.matrix;
        let qd = Mat::from_fn(n, n, |i, j| d[(i, j)] * dirac.dof_weights[i]);
        let mut gram = d.adjoint() * &qd;
        for i in 0..n {
            gram[(i, i)] += dirac.dof_weights[i];
        }
        // Exact Hermitian polish against rounding.
        let gram = Mat::from_fn(n, n, |i, j| (gram[(i, j)] + gram[(j, i)].conj()) * 0.5);
        let chol = CholeskyFactor::new(&gram)?;
        Ok(H1Metric { gram, chol })
    }

    pub fn norm(&self, v: &[C64]) -> f64 {
        let n = v.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += self.gram[(i, j)] * v[j];
            }
            acc += (v[i].conj() * row).re;
        }
        acc.max(0.0).sqrt()
    }
}

/// Operator norm of `P1 - P2` with respect to the discrete `H^1` inner
/// product, computed through the low-rank factors of the projectors
/// (largest singular value of the metric-symmetrized difference).
pub fn subspace_gap(p1: &SpectralProjector, p2: &SpectralProjector, metric: &H1Metric) -> Result<f64> {
    let n = p1.range.nrows();
    if p2.range.nrows() != n {
        return Err(Error::Shape("projectors act on different DOF spaces".into()));
    }
    let r1 = p1.range.ncols();
    let r2 = p2.range.ncols();
    let r = r1 + r2;
    if r == 0 {
        return Ok(0.0);
    }
    // T = P1 - P2 = F E^H with F = [range1 | range2], E = [dual1 | -dual2].
    let f = Mat::from_fn(n, r, |i, j| if j < r1 { p1.range[(i, j)] } else { p2.range[(i, j - r1)] });
    let e = Mat::from_fn(n, r, |i, j| if j < r1 { p1.dual[(i, j)] } else { -p2.dual[(i, j - r1)] });
    // ||T||_G^2 = lambda_max(K1 K2), K1 = E^H G^-1 E, K2 = F^H G F.
    let ginv_e = metric.chol.solve(&e);
    let k1 = e.adjoint() * &ginv_e;
    let gf = &metric.gram * &f;
    let k2 = f.adjoint() * &gf;
    // lambda_max(K1 K2) via the Hermitian product K2^1/2 K1 K2^1/2.
    let eig2 = hermitian_eigen(&k2)?;
    let mut k2_half: Mat<C64> = Mat::zeros(r, r);
    for a in 0..r {
        let s = eig2.values[a].max(0.0).sqrt();
        for i in 0..r {
            for j in 0..r {
                k2_half[(i, j)] += eig2.vectors[(i, a)] * eig2.vectors[(j, a)].conj() * s;
            }
        }
    }
    let sym = &k2_half * &k1 * &k2_half;
    let eig = hermitian_eigen(&sym)?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Convenience wrapper building the `H^1` metric from the Dirac operator.
pub fn subspace_gap_h1(
    p1: &SpectralProjector,
    p2: &SpectralProjector,
    dirac: &OperatorMatrix,
) -> Result<f64> {
    let metric = H1Metric::new(dirac)?;
    subspace_gap(p1, p2, &metric)
}

/// Norm used by [`eigenspace_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceNorm {
    H1,
    /// The `H^1`-minimizing difference evaluated in the Hoelder surrogate
    /// norm; an upper bound for the true Hoelder infimum.
    Holder,
}

/// Distance from `psi` to the span of an A-orthonormal `basis`:
/// the exact infimum in the discrete `H^1` metric (least squares onto the
/// span), or that minimizer's difference measured in the Hoelder surrogate.
pub fn eigenspace_distance(
    psi: &SpinorField,
    basis: &[SpinorField],
    norm_kind: DistanceNorm,
    dirac: &OperatorMatrix,
    grid: &Grid,
    alpha: f64,
) -> Result<f64> {
    let metric = H1Metric::new(dirac)?;
    eigenspace_distance_with_metric(psi, basis, norm_kind, dirac, grid, alpha, &metric)
}

pub fn eigenspace_distance_with_metric(
    psi: &SpinorField,
    basis: &[SpinorField],
    norm_kind: DistanceNorm,
    dirac: &OperatorMatrix,
    grid: &Grid,
    alpha: f64,
    metric: &H1Metric,
) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::Range("eigenspace distance against an empty basis".into()));
    }
    let n = dirac.n();
    let v = dirac.basis.to_active(psi)?;
    let h = basis.len();
    let mut b = Mat::zeros(n, h);
    for (c, f) in basis.iter().enumerate() {
        let col = dirac.basis.to_active(f)?;
        for i in 0..n {
            b[(i, c)] = col[i];
        }
    }
    // Least squares in the G-metric: (B^H G B) c = B^H G psi.
    let gb = &metric.gram * &b;
    let a_small = b.adjoint() * &gb;
    let vm = Mat::from_fn(n, 1, |i, _| v[i]);
    let gv = &metric.gram * &vm;
    let rhs = b.adjoint() * &gv;
    let chol = CholeskyFactor::new(&a_small)
        .map_err(|_| Error::Numeric("eigenspace basis is numerically dependent".into()))?;
    let c = chol.solve(&rhs);
    let mut diff = v.clone();
    for i in 0..n {
        let mut acc = ZERO;
        for j in 0..h {
            acc += b[(i, j)] * c[(j, 0)];
        }
        diff[i] -= acc;
    }
    match norm_kind {
        DistanceNorm::H1 => Ok(metric.norm(&diff)),
        DistanceNorm::Holder => {
            let field = dirac.basis.from_active(&diff)?;
            holder_norm(&field, alpha, grid)
        }
    }
}

/// Hoelder surrogate norm: `max_x |psi(x)| + max_{x != y} |psi(x) - psi(y)| /
/// d(x, y)^alpha` over all grid pairs.
pub fn holder_norm(psi: &SpinorField, alpha: f64, grid: &Grid) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Config(format!("Hoelder exponent must lie in (0,1), got {alpha}")));
    }
    if psi.values.len() != grid.n_dofs() {
        return Err(Error::Shape("field does not match grid".into()));
    }
    let pts = grid.n_points();
    let d = grid.fiber_dim;
    let mut sup = 0.0f64;
    for pt in 0..pts {
        sup = sup.max(psi.fiber_norm(pt));
    }
    let mut quot = 0.0f64;
    for i in 0..pts {
        for j in (i + 1)..pts {
            let mut diff = 0.0f64;
            for s in 0..d {
                diff += (psi.values[i * d + s] - psi.values[j * d + s]).norm_sqr();
            }
            let dist = grid.distance(i, j);
            quot = quot.max(diff.sqrt() / dist.powf(alpha));
        }
    }
    Ok(sup + quot)
}

/// A priori regularity exponents `T1 = floor((n/2) / (p - n))` and
/// `T2 = floor(n (p - 1) / (2 (p - n)))`.
pub fn regularity_exponents(n: usize, p: f64) -> Result<(i64, i64)> {
    if p <= n as f64 {
        return Err(Error::Config(format!(
            "a priori estimates require p > n (got p = {p}, n = {n})"
        )));
    }
    let nf = n as f64;
    let t1 = ((nf / 2.0) / (p - nf)).floor() as i64;
    let t2 = (nf * (p - 1.0) / (2.0 * (p - nf))).floor() as i64;
    Ok((t1, t2))
}

/// Per-eigenpair norm diagnostics against the a priori bounds (with the
/// unknown constant set to 1, so the ratios are diagnostic only).
#[derive(Debug, Clone)]
pub struct NormDiagnostics {
    pub k: i32,
    pub lambda: f64,
    pub h1_norm: f64,
    pub holder_norm: f64,
    /// `(1 + |lambda| ||A||_p)^T1 (||A^-1||_p^1/2 + |lambda| ||A||_p^1/2)`.
    pub w12_bound: f64,
    /// Same with exponent `T2`.
    pub calpha_bound: f64,
    pub t1: i64,
    pub t2: i64,
    pub p: f64,
    pub n: usize,
    pub alpha: f64,
    pub ratio_h1: f64,
    pub ratio_holder: f64,
}

/// Compute norm diagnostics for every retained eigenpair of a spectrum.
pub fn apriori_diagnostics(
    spectrum: &WeightedSpectrum,
    weight: &WeightField,
    p: f64,
    n_dim: usize,
    alpha: f64,
) -> Result<Vec<NormDiagnostics>> {
    let (t1, t2) = regularity_exponents(n_dim, p)?;
    let grid = spectrum.grid().clone();
    let a_norm = lp_norm(weight, p, &grid)?;
    let a_inv_norm = lp_norm(&weight.inverse()?, p, &grid)?;
    let mut out = Vec::new();
    for k in spectrum.retained_indices() {
        let lambda = spectrum.lambda(k)?;
        let la = lambda.abs();
        let field = spectrum.eigvec_field(k)?;
        let h1 = norm_h1_discrete(&field, &spectrum.dirac, &grid)?;
        let hol = holder_norm(&field, alpha, &grid)?;
        let base = a_inv_norm.sqrt() + la * a_norm.sqrt();
        let w12_bound = (1.0 + la * a_norm).powi(t1 as i32) * base;
        let calpha_bound = (1.0 + la * a_norm).powi(t2 as i32) * base;
        out.push(NormDiagnostics {
            k,
            lambda,
            h1_norm: h1,
            holder_norm: hol,
            w12_bound,
            calpha_bound,
            t1,
            t2,
            p,
            n: n_dim,
            alpha,
            ratio_h1: h1 / w12_bound,
            ratio_holder: hol / calpha_bound,
        });
    }
    Ok(out)
}

/// Options for a continuity experiment.
#[derive(Debug, Clone)]
pub struct ContinuityOptions {
    pub k_max: usize,
    pub ell_max: usize,
    pub alpha: f64,
    pub p: f64,
    pub dictionary_size: usize,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        ContinuityOptions { k_max: 4, ell_max: 3, alpha: 0.5, p: 4.0, dictionary_size: 4 }
    }
}

/// Per-member tables of a continuity experiment.
#[derive(Debug, Clone)]
pub struct MemberReport {
    pub m: usize,
    /// Set when the member was skipped (cluster mismatch diagnostic).
    pub skipped: Option<String>,
    /// `(k, |lambda_k(A_m) - lambda_k(A)|)` for `|k| <= k_max`.
    pub lambda_errors: Vec<(i32, f64)>,
    /// `lambda_k(A_m) - lambda_k(A)` for `k > 0` (the one-sided trend).
    pub one_sided_margins: Vec<(i32, f64)>,
    /// `(ell, H^1 gap of the index-range projectors)`.
    pub projector_gaps: Vec<(i32, f64)>,
    /// `(k, H^1 distance of phi_k(A_m) to the limit eigenspace)`.
    pub h1_distances: Vec<(i32, f64)>,
    /// `(k, Hoelder-surrogate distance)`.
    pub holder_distances: Vec<(i32, f64)>,
    pub weak_residual: f64,
    pub weak_residual_inverse: f64,
    /// `(k, max_{i,j <= k} |integral <(A_m^-1 - A^-1) A phi_i, A phi_j>|)`,
    /// the quantity controlling the one-sided eigenvalue bound. The range is
    /// `1..=k` (the bound's displayed range runs over the ambient family
    /// index; the eigenvalue argument only needs `i, j <= k`).
    pub bk_diagnostic: Vec<(i32, f64)>,
    pub norm_diagnostics: Vec<NormDiagnostics>,
}

/// Full continuity report over a family run.
#[derive(Debug)]
pub struct ContinuityReport {
    pub family_kind: &'static str,
    pub amplitude: f64,
    pub seed: u64,
    pub alpha: f64,
    pub p: f64,
    pub members: Vec<MemberReport>,
    /// Retained limit eigenvalues `(k, lambda_k(A))`.
    pub limit_lambdas: Vec<(i32, f64)>,
    /// Limit cluster structure `(ell, mu_ell, h_ell)`.
    pub limit_clusters: Vec<(i32, f64, usize)>,
    pub notes: Vec<String>,
}

/// Solve the weighted problem for each family member and for the declared
/// limit, and produce all continuity tables. The limit's cluster structure
/// defines the projector index ranges used for the members.
pub fn run_continuity_experiment(
    family: &WeightFamily,
    member_indices: &[usize],
    opts: &ContinuityOptions,
) -> Result<ContinuityReport> {
    for w in member_indices.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("member indices must be strictly ascending".into()));
        }
    }
    for &m in member_indices {
        family.check_guard(m)?;
    }
    let geometry = family.geometry.clone();
    let grid = build_grid(&geometry)?;
    let dirac = Arc::new(assemble_dirac(&geometry, &grid)?);
    let hint = Some(geometry.kernel_dim());

    let w_limit = family.declared_limit();
    let w_limit_inv = w_limit.inverse()?;
    let mass_limit = Arc::new(assemble_mass(&w_limit, &grid, &dirac.basis)?);
    // Solve past k_max so cluster ranges around the boundary stay complete.
    let solve_k = opts.k_max + 4;
    let limit = solve_weighted(&dirac, &mass_limit, solve_k, hint)?;
    let metric = H1Metric::new(&dirac)?;

    let mut notes = Vec::new();
    let limit_lambdas: Vec<(i32, f64)> = signed_range(opts.k_max)
        .into_iter()
        .map(|k| (k, limit.lambda(k).unwrap()))
        .collect();
    let limit_clusters: Vec<(i32, f64, usize)> = limit
        .neg_clusters
        .iter()
        .chain(limit.pos_clusters.iter())
        .filter(|c| c.ell.unsigned_abs() as usize <= opts.ell_max)
        .map(|c| (c.ell, c.mu, c.h))
        .collect();

    // Limit eigenspace fields per retained index (the cluster containing k).
    let limit_cluster_fields = |k: i32| -> Result<Vec<SpinorField>> {
        let mag = k.unsigned_abs() as usize;
        let list = if k > 0 { &limit.pos_clusters } else { &limit.neg_clusters };
        let c = list
            .iter()
            .find(|c| c.first <= mag && mag <= c.last())
            .ok_or_else(|| Error::Range(format!("no limit cluster contains index {k}")))?;
        c.indices().iter().map(|&j| limit.eigvec_field(j)).collect()
    };

    let mut members = Vec::new();
    for &m in member_indices {
        let w_m = family.member(m)?;
        let mass_m = Arc::new(assemble_mass(&w_m, &grid, &dirac.basis)?);
        let spec_m = solve_weighted(&dirac, &mass_m, solve_k, hint)?;

        // Cluster-mismatch guard: member eigenvalues at each limit cluster's
        // index range must fall inside the midpoint fences of the limit's
        // distinct values; straddling members are skipped with a diagnostic.
        if let Some(msg) = cluster_mismatch(&limit, &spec_m, opts.ell_max) {
            notes.push(format!("member m = {m} skipped: {msg}"));
            members.push(MemberReport {
                m,
                skipped: Some(msg),
                lambda_errors: Vec::new(),
                one_sided_margins: Vec::new(),
                projector_gaps: Vec::new(),
                h1_distances: Vec::new(),
                holder_distances: Vec::new(),
                weak_residual: f64::NAN,
                weak_residual_inverse: f64::NAN,
                bk_diagnostic: Vec::new(),
                norm_diagnostics: Vec::new(),
            });
            continue;
        }

        let mut lambda_errors = Vec::new();
        let mut one_sided = Vec::new();
        let mut h1_distances = Vec::new();
        let mut holder_distances = Vec::new();
        for k in signed_range(opts.k_max) {
            let lm = spec_m.lambda(k)?;
            let ll = limit.lambda(k)?;
            lambda_errors.push((k, (lm - ll).abs()));
            if k > 0 {
                one_sided.push((k, lm - ll));
            }
            let basis = limit_cluster_fields(k)?;
            let psi = spec_m.eigvec_field(k)?;
            let dh1 = eigenspace_distance_with_metric(
                &psi,
                &basis,
                DistanceNorm::H1,
                &dirac,
                &grid,
                opts.alpha,
                &metric,
            )?;
            let dhol = eigenspace_distance_with_metric(
                &psi,
                &basis,
                DistanceNorm::Holder,
                &dirac,
                &grid,
                opts.alpha,
                &metric,
            )?;
            h1_distances.push((k, dh1));
            holder_distances.push((k, dhol));
        }

        // Projector gaps: the limit cluster ranges imposed on the member.
        let mut projector_gaps = Vec::new();
        for &(ell, _, _) in &limit_clusters {
            let c = limit.cluster(ell)?;
            let p_limit = limit.projector(ell)?;
            let p_member = spec_m.projector_by_index_range(ell, c.first, c.h)?;
            projector_gaps.push((ell, subspace_gap(&p_member, &p_limit, &metric)?));
        }

        let weak_residual =
            weak_convergence_residual(&w_m, &w_limit, opts.dictionary_size, &grid)?;
        let weak_residual_inverse = weak_convergence_residual(
            &w_m.inverse()?,
            &w_limit_inv,
            opts.dictionary_size,
            &grid,
        )?;

        let bk_diagnostic = bk_values(&limit, &w_m, &w_limit, opts.k_max, &grid)?;
        let norm_diagnostics =
            apriori_diagnostics(&spec_m, &w_m, opts.p, geometry.dim(), opts.alpha)?;

        members.push(MemberReport {
            m,
            skipped: None,
            lambda_errors,
            one_sided_margins: one_sided,
            projector_gaps,
            h1_distances,
            holder_distances,
            weak_residual,
            weak_residual_inverse,
            bk_diagnostic,
            norm_diagnostics,
        });
    }

    Ok(ContinuityReport {
        family_kind: family.kind.name(),
        amplitude: family.params.amplitude,
        seed: family.params.seed,
        alpha: opts.alpha,
        p: opts.p,
        members,
        limit_lambdas,
        limit_clusters,
        notes,
    })
}

fn signed_range(k_max: usize) -> Vec<i32> {
    let mut v: Vec<i32> = (1..=k_max as i32).collect();
    v.extend((1..=k_max as i32).map(|k| -k));
    v
}

/// Check that member eigenvalues respect the limit's cluster fences.
fn cluster_mismatch(
    limit: &WeightedSpectrum,
    member: &WeightedSpectrum,
    ell_max: usize,
) -> Option<String> {
    for (clusters, sign) in [(&limit.pos_clusters, 1i32), (&limit.neg_clusters, -1i32)] {
        for (i, c) in clusters.iter().enumerate() {
            if c.ell.unsigned_abs() as usize > ell_max {
                continue;
            }
            // Fences: midpoints to the neighboring distinct values (kernel
            // side bounded by 0).
            let lo = if i == 0 { 0.0 } else { 0.5 * (clusters[i - 1].mu + c.mu) };
            let hi = if i + 1 < clusters.len() {
                0.5 * (clusters[i + 1].mu + c.mu)
            } else {
                f64::INFINITY
            };
            for j in c.first..=c.last() {
                let lam = match member.lambda(sign * j as i32) {
                    Ok(l) => l.abs(),
                    Err(_) => return Some(format!("member retains no index {}", sign * j as i32)),
                };
                let (lo, hi) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
                if lam < lo || lam > hi {
                    return Some(format!(
                        "member eigenvalue at index {} ({lam}) straddles the limit cluster {} fences [{lo}, {hi}]",
                        sign * j as i32,
                        c.ell
                    ));
                }
            }
        }
    }
    None
}

/// `B_k = max_{1 <= i, j <= k} | integral <(A_m^-1 - A^-1) A phi_i, A phi_j> |`
/// over the limit eigenspinors.
fn bk_values(
    limit: &WeightedSpectrum,
    w_m: &WeightField,
    w_limit: &WeightField,
    k_max: usize,
    grid: &Grid,
) -> Result<Vec<(i32, f64)>> {
    let delta = w_m.inverse()?.add_scaled(-1.0, &w_limit.inverse()?)?;
    let d = grid.fiber_dim;
    let apply = |w: &WeightField, f: &SpinorField| -> SpinorField {
        let mut out = SpinorField::zeros(grid);
        for pt in 0..grid.n_points() {
            let b = w.block(pt);
            for s in 0..d {
                let mut acc = ZERO;
                for r in 0..d {
                    acc += b[s * d + r] * f.values[pt * d + r];
                }
                out.values[pt * d + s] = acc;
            }
        }
        out
    };
    let kk = k_max.min(limit.retained_pos());
    let a_phis: Vec<SpinorField> =
        (1..=kk as i32).map(|k| Ok(apply(w_limit, &limit.eigvec_field(k)?))).collect::<Result<_>>()?;
    let delta_a_phis: Vec<SpinorField> = a_phis.iter().map(|f| apply(&delta, f)).collect();
    let mut out = Vec::with_capacity(kk);
    let mut running: f64 = 0.0;
    for k in 1..=kk {
        for i in 0..k {
            for j in 0..k {
                if i == k - 1 || j == k - 1 {
                    let v = crate::domain::inner_l2(&delta_a_phis[i], &a_phis[j], grid)?;
                    running = running.max(v.norm());
                }
            }
        }
        out.push((k as i32, running));
    }
    Ok(out)
}

/// The elementary inequality `a / (b a + c) < 1 / b` for positive reals,
/// the guard behind the projector-convergence argument.
pub fn elementary_inequality_holds(a: f64, b: f64, c: f64) -> bool {
    assert!(a > 0.0 && b > 0.0 && c > 0.0);
    a / (b * a + c) < 1.0 / b
}
