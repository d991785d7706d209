//! Lindbladian dynamics on dense density matrices.
//!
//! The generator is applied directly in matrix form; the `d² x d²` Liouvillian
//! is only built on request. Constant specs propagate by Taylor actions of the
//! generator on segments with `h·α ≤ 1`. Time-dependent specs use midpoint
//! exponentials with automatic step halving.

mod cptp;
mod propagate;
mod sde;
mod spec;

pub use cptp::{check_channel, check_state, CptpReport, CHANNEL_TOL, TRACE_TOL};
pub use propagate::{
    propagate, propagate_interval, propagate_many, propagate_with_stats, propagator_channel, Propagation,
    PropagationStats, HALVING_TOL,
};
pub use sde::{default_dt, sde_ensemble, SdeEnsemble, DEFAULT_TRAJECTORIES};
pub use spec::{
    apply_generator, liouvillian_matrix, DensityMatrix, Generator, LindbladSpec, SuperoperatorKind,
    SuperoperatorMatrix,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{expm, herm_eig, pauli_z, sigma_minus, trace_norm, unvec, vec, ComplexMatrix};
    use crate::odecore::TimeDependentMatrix;
    use crate::suite::{random_density, random_hermitian, random_matrix, rng, SuiteRng};
    use crate::C64;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn plus() -> Vec<C64> {
        vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]
    }

    fn damping(gamma: f64) -> LindbladSpec {
        LindbladSpec::constant(ComplexMatrix::zeros(2, 2), vec![sigma_minus().scale_re(gamma.sqrt())]).unwrap()
    }

    fn random_spec(r: &mut SuiteRng, d: usize, jumps: usize) -> LindbladSpec {
        let h = random_hermitian(r, d, 1.0);
        let fs = (0..jumps).map(|_| random_matrix(r, d, d).scale_re(0.5)).collect();
        LindbladSpec::constant(h, fs).unwrap()
    }

    fn knot_spec(r: &mut SuiteRng, d: usize, t_end: f64) -> LindbladSpec {
        let hk = (0..3)
            .map(|k| (t_end * k as f64 / 2.0, random_hermitian(r, d, 1.0)))
            .collect();
        let fk = (0..3)
            .map(|k| (t_end * k as f64 / 2.0, random_matrix(r, d, d).scale_re(0.4)))
            .collect();
        LindbladSpec::new(
            TimeDependentMatrix::knots(hk).unwrap(),
            vec![TimeDependentMatrix::knots(fk).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn generator_of_z_on_plus_state() {
        let spec = LindbladSpec::constant(pauli_z(), vec![]).unwrap();
        let rho = ComplexMatrix::outer(&plus(), &plus());
        let out = apply_generator(&spec, &rho, 0.0);
        let i = C64::new(0.0, 1.0);
        let expected = ComplexMatrix::from_rows(&[vec![c(0.0), -i], vec![i, c(0.0)]]);
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn generator_of_amplitude_damping_on_excited_state() {
        let rho = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let out = apply_generator(&damping(1.0), &rho, 0.0);
        assert!(out.max_abs_diff(&ComplexMatrix::from_real_diag(&[1.0, -1.0])) < 1e-15);
    }

    #[test]
    fn generator_output_is_traceless() {
        let mut r = rng(11);
        for d in [2, 3, 5] {
            let spec = random_spec(&mut r, d, 2);
            let rho = random_density(&mut r, d);
            assert!(apply_generator(&spec, &rho, 0.0).trace().norm() < 1e-12);
        }
    }

    #[test]
    fn liouvillian_matches_generator() {
        let mut r = rng(12);
        for d in [1, 2, 3, 4] {
            let spec = random_spec(&mut r, d, 3);
            let l = liouvillian_matrix(&spec, 0.0);
            let rho = random_matrix(&mut r, d, d);
            let via_l = unvec(&l.matrix.mat_vec(&vec(&rho))).unwrap();
            let direct = apply_generator(&spec, &rho, 0.0);
            assert!(via_l.max_abs_diff(&direct) < 1e-12, "d = {d}");
            assert!(l.trace_residual() < 1e-10);
        }
    }

    #[test]
    fn liouvillian_of_zero_and_of_z() {
        let zero = LindbladSpec::constant(ComplexMatrix::zeros(2, 2), vec![]).unwrap();
        assert_eq!(liouvillian_matrix(&zero, 0.0).matrix.max_abs(), 0.0);

        let l = liouvillian_matrix(&LindbladSpec::constant(pauli_z(), vec![]).unwrap(), 0.0).matrix;
        // Diagonal for a diagonal Hamiltonian, so the diagonal is the spectrum.
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| l[(i, j)].norm())
            .fold(0.0, f64::max);
        assert_eq!(off, 0.0);
        let mut spectrum: Vec<f64> = (0..4).map(|k| l[(k, k)].im).collect();
        spectrum.sort_by(f64::total_cmp);
        assert_eq!(spectrum, vec![-2.0, 0.0, 0.0, 2.0]);
        assert!((0..4).all(|k| l[(k, k)].re == 0.0));
    }

    #[test]
    fn propagate_with_zero_generator_is_identity() {
        let spec = LindbladSpec::constant(ComplexMatrix::zeros(3, 3), vec![]).unwrap();
        let rho = DensityMatrix::new(random_density(&mut rng(1), 3)).unwrap();
        let out = propagate(&spec, &rho, 2.5, 1).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn amplitude_damping_closed_form() {
        let (gamma, t) = (0.7, 1.3);
        let rho0 = ComplexMatrix::from_rows(&[vec![c(0.4), c(0.3)], vec![c(0.3), c(0.6)]]);
        let out = propagate(&damping(gamma), &DensityMatrix::new(rho0).unwrap(), t, 1).unwrap();
        let m = out.matrix();
        assert!((m[(1, 1)].re - 0.6 * (-gamma * t).exp()).abs() < 1e-13);
        assert!((m[(0, 1)].re - 0.3 * (-gamma * t / 2.0).exp()).abs() < 1e-13);
    }

    #[test]
    fn constant_propagation_matches_expm() {
        let mut r = rng(13);
        for (d, t) in [(2, 0.5), (3, 2.0), (4, 4.0)] {
            let spec = random_spec(&mut r, d, 2);
            let rho = random_density(&mut r, d);
            let (out, stats) = propagate_interval(&spec, &rho, 0.0, t, 1).unwrap();
            let phi = expm(&liouvillian_matrix(&spec, 0.0).matrix.scale_re(t)).unwrap();
            let expected = unvec(&phi.mat_vec(&vec(&rho))).unwrap();
            assert!(out.max_abs_diff(&expected) < 1e-12, "d = {d}");
            assert!(stats.substeps as f64 >= t * spec.alpha(t));
        }
    }

    #[test]
    fn commuting_family_uses_integrated_angle() {
        let h = TimeDependentMatrix::generator("cos(t) Z", 2, 2, vec![], |t| pauli_z().scale_re(t.cos()));
        let spec = LindbladSpec::new(h, vec![]).unwrap();
        let t = 1.7;
        let rho = DensityMatrix::pure(&plus()).unwrap();
        let (out, stats) = propagate_with_stats(&spec, &rho, t, 1).unwrap();
        let u = expm(&pauli_z().scale(C64::new(0.0, -t.sin()))).unwrap();
        let expected = &(&u * rho.matrix()) * &u.adjoint();
        assert!(out.matrix().max_abs_diff(&expected) < 1e-9);
        assert!(stats.final_change < HALVING_TOL);
    }

    #[test]
    fn semigroup_split_constant_and_knots() {
        let mut r = rng(14);
        let t = 1.0;
        for spec in [random_spec(&mut r, 3, 2), knot_spec(&mut r, 2, t)] {
            let rho = random_density(&mut r, spec.dim());
            let (whole, _) = propagate_interval(&spec, &rho, 0.0, t, 1).unwrap();
            let (half, _) = propagate_interval(&spec, &rho, 0.0, t / 2.0, 1).unwrap();
            let (split, _) = propagate_interval(&spec, &half, t / 2.0, t, 1).unwrap();
            assert!(trace_norm(&(&whole - &split)) < 1e-9);
        }
    }

    #[test]
    fn propagation_preserves_trace_and_passes_cptp() {
        let mut r = rng(15);
        for k in 0..6 {
            let d = 2 + k % 3;
            let spec = if k % 2 == 0 { random_spec(&mut r, d, 2) } else { knot_spec(&mut r, d, 0.8) };
            let rho = DensityMatrix::new(random_density(&mut r, d)).unwrap();
            let out = propagate(&spec, &rho, 0.8, 1).unwrap();
            assert!((out.matrix().trace() - 1.0).norm() < 1e-10);
            assert!(out.report().pass);
        }
    }

    #[test]
    fn channel_at_time_zero_is_identity() {
        let phi = propagator_channel(&damping(1.0), 0.0).unwrap();
        assert_eq!(phi.matrix.max_abs_diff(&ComplexMatrix::identity(4)), 0.0);
        assert_eq!(phi.kind, SuperoperatorKind::Propagator);
    }

    #[test]
    fn half_damping_channel_choi_spectrum() {
        let phi = propagator_channel(&damping(1.0), LN_2).unwrap();
        let choi = crate::numkernel::choi_matrix(&phi.matrix).unwrap();
        let eig = herm_eig(&choi.hermitian_part()).unwrap().eigenvalues;
        for (got, want) in eig.iter().zip([0.0, 0.0, 0.5, 1.5]) {
            assert!((got - want).abs() < 1e-12, "{eig:?}");
        }
    }

    #[test]
    fn random_channel_is_trace_preserving_and_consistent() {
        let mut r = rng(16);
        for spec in [random_spec(&mut r, 3, 2), knot_spec(&mut r, 2, 0.6)] {
            let t = 0.6;
            let phi = propagator_channel(&spec, t).unwrap();
            assert!(phi.trace_residual() < 1e-9);
            assert!(check_channel(&phi.matrix).pass);
            let rho = DensityMatrix::new(random_density(&mut r, spec.dim())).unwrap();
            let direct = propagate(&spec, &rho, t, 1).unwrap();
            assert!(phi.apply(rho.matrix()).unwrap().max_abs_diff(direct.matrix()) < 1e-9);
            let kraus = phi.kraus().unwrap();
            assert!(kraus.completeness_residual() < 1e-8);
        }
    }

    #[test]
    fn cptp_examples() {
        assert!(check_state(&ComplexMatrix::identity(4).scale_re(0.25)).pass);
        let report = check_state(&ComplexMatrix::from_real_diag(&[0.51, 0.5]));
        assert!(!report.pass);
        assert!((report.trace - 0.01).abs() < 1e-12);
        let bad = check_state(&ComplexMatrix::from_real_diag(&[1.1, -0.1]));
        assert!(!bad.pass && (bad.min_eigenvalue + 0.1).abs() < 1e-12);
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diag(&[1.0, 0.5])).is_err());
    }

    fn h_eff(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = h.clone();
        for g in jumps {
            out += &(&g.adjoint() * g).scale(C64::new(0.0, -0.5));
        }
        out
    }

    #[test]
    fn sde_without_jumps_is_unitary() {
        let h = pauli_z();
        let ens = sde_ensemble(&h, &[], &plus(), 1.0, 0.001, 4, 3).unwrap();
        let u = expm(&h.scale(C64::new(0.0, -1.0))).unwrap();
        let psi = u.mat_vec(&plus());
        let exact = ComplexMatrix::outer(&psi, &psi);
        // Euler drift error only; no noise.
        assert!(ens.max_stderr() < 1e-12);
        assert!(ens.mean.max_abs_diff(&exact) < 5.0 * ens.dt * 1.0);
    }

    #[test]
    fn sde_with_identity_jump_keeps_mean() {
        let g = ComplexMatrix::identity(2);
        let heff = h_eff(&ComplexMatrix::zeros(2, 2), std::slice::from_ref(&g));
        let t = 1.0;
        let dt = default_dt(&heff);
        let ens = sde_ensemble(&heff, &[g], &plus(), t, dt, DEFAULT_TRAJECTORIES, 5).unwrap();
        let rho0 = ComplexMatrix::outer(&plus(), &plus());
        for i in 0..2 {
            for j in 0..2 {
                let tol = 3.0 * ens.stderr_at(i, j) + 5.0 * dt;
                assert!((ens.mean[(i, j)] - rho0[(i, j)]).norm() < tol);
            }
        }
    }

    fn damping_case() -> (ComplexMatrix, ComplexMatrix, LindbladSpec) {
        let h = pauli_z().scale_re(0.5);
        let g = sigma_minus().scale_re(0.8);
        let spec = LindbladSpec::constant(h.clone(), vec![g.clone()]).unwrap();
        (h_eff(&h, std::slice::from_ref(&g)), g, spec)
    }

    #[test]
    fn sde_mean_matches_amplitude_damping() {
        let (heff, g, spec) = damping_case();
        let t = 1.0;
        let dt = default_dt(&heff);
        let ens = sde_ensemble(&heff, &[g], &plus(), t, dt, DEFAULT_TRAJECTORIES, 7).unwrap();
        let exact = propagate(&spec, &DensityMatrix::pure(&plus()).unwrap(), t, 1).unwrap();
        let scale = (t * crate::numkernel::spectral_norm(&heff).powi(2)).max(1.0);
        for i in 0..2 {
            for j in 0..2 {
                let tol = 3.0 * ens.stderr_at(i, j) + 5.0 * dt * scale;
                assert!((ens.mean[(i, j)] - exact.matrix()[(i, j)]).norm() < tol);
            }
        }
    }

    #[test]
    fn sde_error_shrinks_with_refinement() {
        let (heff, g, spec) = damping_case();
        let t = 1.0;
        let exact = propagate(&spec, &DensityMatrix::pure(&plus()).unwrap(), t, 1).unwrap();
        let err = |dt: f64, n: usize| {
            let ens = sde_ensemble(&heff, std::slice::from_ref(&g), &plus(), t, dt, n, 9).unwrap();
            ens.mean.max_abs_diff(exact.matrix())
        };
        let coarse = err(0.04, 2_500);
        let fine = err(0.02, 10_000);
        assert!(fine < coarse, "coarse {coarse:.3e}, fine {fine:.3e}");
    }

    #[test]
    fn sde_is_deterministic_and_checks_dt() {
        let (heff, g, _) = damping_case();
        let a = sde_ensemble(&heff, std::slice::from_ref(&g), &plus(), 0.5, 0.01, 200, 1).unwrap();
        let b = sde_ensemble(&heff, std::slice::from_ref(&g), &plus(), 0.5, 0.01, 200, 1).unwrap();
        assert_eq!(a.mean.as_slice(), b.mean.as_slice());
        assert!(sde_ensemble(&heff, &[g], &plus(), 0.5, 1.0, 10, 1).is_err());
    }
}
