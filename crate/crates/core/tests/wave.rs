//! Wave-propagator checks: phases on eigenmodes, the group law, A-norm
//! conservation, matrix elements, and the assembled kernel's algebra.

use std::sync::Arc;

use diraclab_core::assembly::{assemble_dirac, assemble_mass};
use diraclab_core::domain::{build_grid, Geometry, SpinTwist, SpinorField};
use diraclab_core::linalg::{cplx, Mat, C64, ZERO};
use diraclab_core::spectral::{solve_weighted, WeightedSpectrum};
use diraclab_core::wavekernel::{
    evolve, kernel_apply, kernel_assemble, kernel_compose, kernel_matrix_element, Propagator,
};
use diraclab_core::weights::WeightField;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn antiperiodic_spectrum(n: usize, k_max: usize) -> Arc<WeightedSpectrum> {
    let geometry = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Antiperiodic, resolution: n };
    let grid = build_grid(&geometry).unwrap();
    let dirac = Arc::new(assemble_dirac(&geometry, &grid).unwrap());
    let w = WeightField::scalar(&grid, |p| 1.0 + 0.2 * p[0].sin());
    let mass = Arc::new(assemble_mass(&w, &grid, &dirac.basis).unwrap());
    Arc::new(solve_weighted(&dirac, &mass, k_max, Some(0)).unwrap())
}

fn field_dist(a: &SpinorField, b: &SpinorField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn time_zero_is_the_identity_on_the_retained_span() {
    let spec = antiperiodic_spectrum(32, 4);
    let psi0 = spec.eigvec_field(2).unwrap();
    let out = evolve(&spec, 0.0, &psi0, 4).unwrap();
    assert!(out.truncation_residual < 1e-10);
    assert!(out.warning.is_none());
    assert!(field_dist(&out.field, &psi0) < 1e-8);
}

#[test]
fn single_mode_picks_up_its_phase() {
    let spec = antiperiodic_spectrum(32, 4);
    let t = 0.7;
    for k in [1i32, -2] {
        let phi = spec.eigvec_field(k).unwrap();
        let out = evolve(&spec, t, &phi, 4).unwrap();
        let lambda = spec.lambda(k).unwrap();
        let mut expect = phi.clone();
        expect.scale(cplx(0.0, t * lambda).exp());
        assert!(field_dist(&out.field, &expect) < 1e-8, "mode {k}");
    }
}

#[test]
fn two_mode_state_recurs_after_a_full_period() {
    // On the antiperiodic circle with identity weight, psi = phi_1 + phi_-1
    // has lambda = +-1/2; at t = 2 pi / lambda_1 = 4 pi both phases are 1.
    let geometry = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Antiperiodic, resolution: 32 };
    let grid = build_grid(&geometry).unwrap();
    let dirac = Arc::new(assemble_dirac(&geometry, &grid).unwrap());
    let mass = Arc::new(assemble_mass(&WeightField::identity(&grid), &grid, &dirac.basis).unwrap());
    let spec = Arc::new(solve_weighted(&dirac, &mass, 4, Some(0)).unwrap());
    let mut psi0 = spec.eigvec_field(1).unwrap();
    psi0.axpy(cplx(1.0, 0.0), &spec.eigvec_field(-1).unwrap());
    let t = TAU / spec.lambda(1).unwrap();
    let out = evolve(&spec, t, &psi0, 4).unwrap();
    assert!(field_dist(&out.field, &psi0) < 1e-8);
}

#[test]
fn propagator_group_law_and_a_norm_conservation() {
    let spec = antiperiodic_spectrum(32, 4);
    let n = spec.n_active();
    let seeds = [(0.37f64, -1.9f64), (2.4, 5.5), (-7.3, 3.1)];
    for (t, s) in seeds {
        let ut = Propagator::new(&spec, t, 3).unwrap();
        let us = Propagator::new(&spec, s, 3).unwrap();
        let uts = Propagator::new(&spec, t + s, 3).unwrap();
        // Compare on the retained span: apply to every retained eigenvector.
        for k in spec.retained_indices() {
            let v = spec.eigvec(k).unwrap();
            let ab = ut.apply_active(&us.apply_active(&v));
            let direct = uts.apply_active(&v);
            let dev: f64 = ab
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(dev < 1e-7, "group law at (t,s) = ({t},{s}), k = {k}: {dev}");
        }
        // A-norm conservation on a random-ish span vector.
        let mut v = vec![ZERO; n];
        for (k, c) in spec.retained_indices().into_iter().zip(1..) {
            if k.unsigned_abs() as usize <= 3 {
                let e = spec.eigvec(k).unwrap();
                let w = cplx(0.3 * c as f64, (c as f64 * 1.7).sin());
                for i in 0..n {
                    v[i] += w * e[i];
                }
            }
        }
        let uv = ut.apply_active(&v);
        let before = spec.inner_a_active(&v, &v).re.sqrt();
        let after = spec.inner_a_active(&uv, &uv).re.sqrt();
        assert!((before - after).abs() < 1e-8 * before, "A-unitarity");
    }
}

#[test]
fn matrix_elements_of_the_limit_propagator_are_diagonal_phases() {
    let spec = antiperiodic_spectrum(32, 4);
    for t in [0.5, 1.0, 2.0] {
        for p in [-2i32, 1, 3] {
            for q in [-2i32, 1, 3] {
                let e = kernel_matrix_element(&spec, t, p, q, &spec, 4).unwrap();
                let expect = if p == q {
                    cplx(0.0, t * spec.lambda(p).unwrap()).exp()
                } else {
                    ZERO
                };
                assert!(
                    (e - expect).norm() < 1e-10,
                    "element({p},{q}) at t={t}: {e:?} vs {expect:?}"
                );
            }
        }
    }
}

#[test]
fn assembled_kernel_reproduces_evolve_and_composes() {
    let spec = antiperiodic_spectrum(32, 4);
    let t = 0.9;
    let s = -1.4;
    let kt = kernel_assemble(&spec, t, 3).unwrap();
    let ks = kernel_assemble(&spec, s, 3).unwrap();
    // Applying through the A-weighted quadrature reproduces evolve.
    let mut psi0 = spec.eigvec_field(1).unwrap();
    psi0.axpy(cplx(0.4, 0.1), &spec.eigvec_field(-2).unwrap());
    let via_kernel = kernel_apply(&spec, &kt, &psi0).unwrap();
    let via_evolve = evolve(&spec, t, &psi0, 3).unwrap();
    assert!(field_dist(&via_kernel, &via_evolve.field) < 1e-8);
    // K(t) o K(s) = K(t+s) on the retained span.
    let comp = kernel_compose(&spec, &kt, &ks).unwrap();
    let direct = kernel_assemble(&spec, t + s, 3).unwrap();
    let n = comp.nrows();
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((comp[(i, j)] - direct[(i, j)]).norm());
            scale = scale.max(direct[(i, j)].norm());
        }
    }
    assert!(dev < 1e-7 * scale.max(1.0), "kernel composition: {dev}");
    // t = 0 reproduces the projection onto the retained span.
    let k0 = kernel_assemble(&spec, 0.0, 3).unwrap();
    let proj = kernel_apply(&spec, &k0, &psi0).unwrap();
    let id = evolve(&spec, 0.0, &psi0, 3).unwrap();
    assert!(field_dist(&proj, &id.field) < 1e-8);
}

#[test]
fn single_cluster_truncation_keeps_one_phase_per_side() {
    let spec = antiperiodic_spectrum(32, 4);
    let t = 1.3;
    let u = Propagator::new(&spec, t, 1).unwrap();
    // On phi_1 the truncated propagator is e^{i t mu_1} P_1.
    let phi1 = spec.eigvec(1).unwrap();
    let mu1 = spec.cluster(1).unwrap().mu;
    let got = u.apply_active(&phi1);
    let phase = cplx(0.0, t * mu1).exp();
    let n = got.len();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        dev = dev.max((got[i] - phase * phi1[i]).norm());
    }
    assert!(dev < 1e-8);
    // A cluster outside the truncation is annihilated.
    let phi3 = spec.eigvec(3).unwrap();
    let killed = u.apply_active(&phi3);
    let kn: f64 = killed.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(kn < 1e-8, "out-of-window cluster must be annihilated: {kn}");
}

#[test]
fn evolve_warns_about_unrepresentable_states() {
    let spec = antiperiodic_spectrum(32, 3);
    let grid = build_grid(spec.geometry()).unwrap();
    // A high mode far outside the retained window.
    let psi0 = SpinorField::plane_wave(&grid, [9.5, 0.0], 0);
    let out = evolve(&spec, 1.0, &psi0, 3).unwrap();
    assert!(out.truncation_residual > 0.5);
    assert!(out.warning.is_some());
}

#[test]
fn kernel_matrix_element_range_errors() {
    let spec = antiperiodic_spectrum(32, 3);
    assert!(kernel_matrix_element(&spec, 1.0, 9, 1, &spec, 3).is_err());
}

#[test]
fn propagator_is_a_matrix_on_the_active_space() {
    let spec = antiperiodic_spectrum(16, 3);
    let u = Propagator::new(&spec, 0.4, 2).unwrap();
    let n = spec.n_active();
    assert_eq!((u.matrix.nrows(), u.matrix.ncols()), (n, n));
    let _: &Mat<C64> = &u.matrix;
}

/// The kernel cluster evolves with unit phase: harmonic spinors are fixed
/// points of the propagator at every time.
#[test]
fn kernel_vectors_are_fixed_points() {
    let geometry = Geometry::CircleS1 { length: TAU, twist: SpinTwist::Periodic, resolution: 32 };
    let grid = build_grid(&geometry).unwrap();
    let dirac = Arc::new(assemble_dirac(&geometry, &grid).unwrap());
    let w = WeightField::scalar(&grid, |p| (0.3 * p[0].sin()).exp());
    let mass = Arc::new(assemble_mass(&w, &grid, &dirac.basis).unwrap());
    let spec = Arc::new(solve_weighted(&dirac, &mass, 4, Some(1)).unwrap());
    assert_eq!(spec.kernel_dim(), 1);
    let theta = spec.kernel_field(0).unwrap();
    for t in [0.3, 2.7, -5.1] {
        let out = evolve(&spec, t, &theta, 3).unwrap();
        assert!(out.truncation_residual < 1e-10);
        assert!(field_dist(&out.field, &theta) < 1e-8, "kernel drifts at t={t}");
    }
}
