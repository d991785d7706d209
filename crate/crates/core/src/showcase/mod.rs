//! Applications: Gibbs-state preparation by imaginary-time evolution of the
//! maximally entangled state, partition-function estimates from the solution
//! norm, and the comparison between effective non-Hermitian dynamics and the
//! full Lindbladian.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extractor::{shots_emulate, Purification};
use crate::lindblad::{propagate, sde_ensemble, DensityMatrix, LindbladSpec, SdeEnsemble};
use crate::ndme::solve_homogeneous;
use crate::numkernel::{
    expm, fidelity, herm_eig, kron, spectral_norm, trace_norm, vec_sub, vnorm, ComplexMatrix, PSD_TOL,
};
use crate::odecore::{propagate_vector, OdeProblem, TimeDependentMatrix};

/// Largest register size accepted by [`gibbs_prepare`].
pub const MAX_GIBBS_QUBITS: usize = 3;
pub const Z_RTOL: f64 = 1e-6;
pub const GIBBS_FIDELITY_TOL: f64 = 1e-8;
/// NDME versus direct integration of the `H_eff` flow.
pub const HEFF_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct GibbsResult {
    /// `|ρ_β⟩` on two `n`-qubit registers; the second is the environment.
    pub purification: Purification,
    pub z_estimate: f64,
    pub z_exact: f64,
    pub fidelity: f64,
    pub eta: f64,
}

/// `Σ_i |i⟩|i⟩ / √d`.
pub fn maximally_entangled(d: usize) -> Vec<C64> {
    let s = 1.0 / (d as f64).sqrt();
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = C64::new(s, 0.0);
    }
    v
}

fn check_gibbs_input(b: &ComplexMatrix, beta: f64, n: usize) -> Result<(usize, f64)> {
    if n == 0 || n > MAX_GIBBS_QUBITS {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={MAX_GIBBS_QUBITS}")));
    }
    let d = 1usize << n;
    if b.rows() != d || b.cols() != d {
        return Err(Error::ShapeMismatch(format!("B is {}x{}, expected {d}x{d}", b.rows(), b.cols())));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be finite and >= 0")));
    }
    let eig = herm_eig(b)?;
    if eig.min() < -PSD_TOL * eig.max().abs().max(1.0) {
        return Err(Error::NotPsd { eigenvalue: eig.min() });
    }
    let z = eig.eigenvalues.iter().map(|&x| (-beta * x).exp()).sum();
    Ok((d, z))
}

/// Solves `dμ/dt = -(B⊗I)μ` from `|Ω⟩` for `T = β/2`. The reduced first
/// register is `e^{-βB}/Z` and `Z = 2ⁿη²`.
pub fn gibbs_prepare(b: &ComplexMatrix, beta: f64, n: usize) -> Result<GibbsResult> {
    let (d, z_exact) = check_gibbs_input(b, beta, n)?;
    let v = kron(&b.hermitian_part(), &ComplexMatrix::identity(d));
    let p = OdeProblem::homogeneous(2 * n, TimeDependentMatrix::Constant(v), maximally_entangled(d), beta / 2.0)?;
    let sol = solve_homogeneous(&p)?;
    let z_estimate = d as f64 * sol.eta * sol.eta;
    let purification = Purification::new(sol.mu_t.clone(), d, d)?;
    let gibbs = expm(&b.scale_re(-beta))?.scale_re(1.0 / z_exact).hermitian_part();
    let fid = fidelity(&gibbs, &purification.reduced().hermitian_part())?.min(1.0);
    let rel = (z_estimate - z_exact).abs() / z_exact;
    if rel > Z_RTOL {
        return Err(Error::ReferenceMismatch {
            error: rel,
            tolerance: Z_RTOL,
        });
    }
    if fid < 1.0 - GIBBS_FIDELITY_TOL {
        return Err(Error::ReferenceMismatch {
            error: 1.0 - fid,
            tolerance: GIBBS_FIDELITY_TOL,
        });
    }
    Ok(GibbsResult {
        purification,
        z_estimate,
        z_exact,
        fidelity: fid,
        eta: sol.eta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionEstimate {
    pub z: f64,
    pub z_exact: f64,
    /// Binomial standard error of `z`; zero without shots.
    pub stderr: f64,
    pub shots: Option<u64>,
    pub notes: String,
}

/// `Z = 2ⁿη²`. With shots, the success indicator of the block-norm
/// measurement (probability `η²/2`) is sampled and rescaled.
pub fn partition_estimate(b: &ComplexMatrix, beta: f64, n: usize, shots: Option<(u64, u64)>) -> Result<PartitionEstimate> {
    let g = gibbs_prepare(b, beta, n)?;
    let d = (1usize << n) as f64;
    let Some((shots, seed)) = shots else {
        return Ok(PartitionEstimate {
            z: g.z_estimate,
            z_exact: g.z_exact,
            stderr: 0.0,
            shots: None,
            notes: "exact block norm".into(),
        });
    };
    let p = (0.5 * g.eta * g.eta).min(1.0);
    let mean = shots_emulate(2.0 * p - 1.0, shots, seed)?;
    let p_hat = 0.5 * (mean + 1.0);
    let stderr = 2.0 * d * (p * (1.0 - p) / shots as f64).sqrt();
    Ok(PartitionEstimate {
        z: 2.0 * d * p_hat,
        z_exact: g.z_exact,
        stderr,
        shots: Some(shots),
        notes: "Z = 2^n * 2 * (success fraction); success probability eta^2/2".into(),
    })
}

/// `H - (i/2)ΣG†G`.
pub fn effective_hamiltonian(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> ComplexMatrix {
    let mut out = h.clone();
    for g in jumps {
        out += &(&g.adjoint() * g).scale(C64::new(0.0, -0.5));
    }
    out
}

/// Sample times and measured quantities of [`nonhermitian_compare`].
#[derive(Clone, Debug)]
pub struct NonHermitianReport {
    pub times: Vec<f64>,
    /// NDME norm `η(t)` of the `H_eff` flow.
    pub eta: Vec<f64>,
    /// `‖η μ̂(t) - μ_ref(t)‖₂` per sample.
    pub ndme_error: Vec<f64>,
    pub ndme_tolerance: f64,
    /// `½‖ρ_L(t) - |μ̂(t)⟩⟨μ̂(t)|‖₁`.
    pub trace_distance: Vec<f64>,
    /// Largest `|mean - ρ_L(T)|` entry and the matching tolerance.
    pub sde_error: f64,
    pub sde_tolerance: f64,
    pub sde_pass: bool,
    pub ensemble: SdeEnsemble,
    pub pass: bool,
}

/// Compares three descriptions of the same open dynamics on `[0, T]`:
/// the NDME solve of `dμ/dt = -iH_eff μ`, a direct integration of it, and
/// the SDE ensemble mean against the full Lindbladian.
#[allow(clippy::too_many_arguments)]
pub fn nonhermitian_compare(
    h: &ComplexMatrix,
    jumps: &[ComplexMatrix],
    psi0: &[C64],
    t_end: f64,
    dt: f64,
    trajectories: usize,
    seed: u64,
    samples: usize,
) -> Result<NonHermitianReport> {
    let d = h.ensure_square()?;
    let n = d.trailing_zeros() as usize;
    if 1usize << n != d {
        return Err(Error::ShapeMismatch(format!("dimension {d} is not a power of two")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample time".into()));
    }
    let heff = effective_hamiltonian(h, jumps);
    let v = TimeDependentMatrix::Constant(heff.scale(C64::new(0.0, 1.0)));
    let spec = LindbladSpec::constant(h.clone(), jumps.to_vec())?;
    let rho0 = DensityMatrix::pure(psi0)?;
    let times: Vec<f64> = (1..=samples).map(|k| t_end * k as f64 / samples as f64).collect();

    let rows: Vec<(f64, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let p = OdeProblem::homogeneous(n, v.clone(), psi0.to_vec(), t)?;
            let sol = solve_homogeneous(&p)?;
            let direct = propagate_vector(&v, psi0, 0.0, t, 1e-12)?;
            let err = vnorm(&vec_sub(&sol.unnormalized(), &direct));
            let lindblad = propagate(&spec, &rho0, t, 1)?;
            let pure = ComplexMatrix::outer(&sol.mu_t, &sol.mu_t);
            let td = 0.5 * trace_norm(&(lindblad.matrix() - &pure));
            Ok((sol.eta, err, td))
        })
        .collect::<Result<_>>()?;

    let ensemble = sde_ensemble(&heff, jumps, psi0, t_end, dt, trajectories, seed)?;
    let exact = propagate(&spec, &rho0, t_end, 1)?;
    let scale = (t_end * spectral_norm(&heff).powi(2)).max(1.0);
    let slack = 5.0 * ensemble.dt * scale;
    let mut sde_error = 0.0f64;
    let mut sde_tolerance = f64::INFINITY;
    let mut sde_pass = true;
    for i in 0..d {
        for j in 0..d {
            let e = (ensemble.mean[(i, j)] - exact.matrix()[(i, j)]).norm();
            let tol = 3.0 * ensemble.stderr_at(i, j) + slack;
            if e > sde_error {
                sde_error = e;
                sde_tolerance = tol;
            }
            sde_pass &= e <= tol;
        }
    }
    let ndme_error: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let pass = sde_pass && ndme_error.iter().all(|&e| e <= HEFF_TOL);
    Ok(NonHermitianReport {
        times,
        eta: rows.iter().map(|r| r.0).collect(),
        ndme_error,
        ndme_tolerance: HEFF_TOL,
        trace_distance: rows.iter().map(|r| r.2).collect(),
        sde_error,
        sde_tolerance: if sde_tolerance.is_finite() { sde_tolerance } else { slack },
        sde_pass,
        ensemble,
        pass,
    })
}

/// Rotating, amplitude-damped qubit started in `|+⟩`: `H = Z/2`, `G = 0.8σ₋`.
pub fn damping_fixture() -> (ComplexMatrix, Vec<ComplexMatrix>, Vec<C64>, f64) {
    let h = crate::numkernel::pauli_z().scale_re(0.5);
    let g = crate::numkernel::sigma_minus().scale_re(0.8);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (h, vec![g], vec![C64::new(s, 0.0), C64::new(s, 0.0)], 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{psd_with_spectrum, random_psd, rng};

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let b = ComplexMatrix::from_real_diag(&[0.3, 1.0]);
        let g = gibbs_prepare(&b, 0.0, 1).unwrap();
        assert!((g.z_estimate - 2.0).abs() < 1e-9);
        assert!(g.purification.residual(&ComplexMatrix::identity(2).scale_re(0.5)) < 1e-9);
    }

    #[test]
    fn diagonal_gibbs_closed_form() {
        let b = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let g = gibbs_prepare(&b, 1.0, 1).unwrap();
        let e = (-1f64).exp();
        assert!((g.z_estimate - (1.0 + e)).abs() <= 1e-6 * (1.0 + e));
        let rho = ComplexMatrix::from_real_diag(&[1.0 / (1.0 + e), e / (1.0 + e)]);
        assert!(g.purification.residual(&rho) < 1e-8);
        assert!(g.fidelity >= 1.0 - 1e-8);
    }

    #[test]
    fn random_two_qubit_gibbs() {
        let mut r = rng(71);
        let b = random_psd(&mut r, 4, 1);
        let g = gibbs_prepare(&b, 0.7, 2).unwrap();
        assert!(g.fidelity >= 1.0 - 1e-8);
        assert!((g.z_estimate - g.z_exact).abs() <= 1e-6 * g.z_exact);
    }

    #[test]
    fn gibbs_rejects_bad_input() {
        let neg = ComplexMatrix::from_real_diag(&[-1.0, 1.0]);
        assert!(matches!(gibbs_prepare(&neg, 1.0, 1), Err(Error::NotPsd { .. })));
        assert!(gibbs_prepare(&ComplexMatrix::identity(2), 1.0, 2).is_err());
    }

    #[test]
    fn partition_examples() {
        let z = partition_estimate(&ComplexMatrix::zeros(4, 4), 1.3, 2, None).unwrap();
        assert!((z.z - 4.0).abs() < 1e-9);
        let b = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let z = partition_estimate(&b, 1.0, 1, None).unwrap();
        assert!((z.z - (1.0 + (-1f64).exp())).abs() < 1e-6);
        let mut r = rng(73);
        let b = psd_with_spectrum(&mut r, &[0.1, 0.9]);
        let noisy = partition_estimate(&b, 1.0, 1, Some((10_000, 5))).unwrap();
        assert!((noisy.z - noisy.z_exact).abs() <= 3.0 * noisy.stderr);
    }

    #[test]
    fn without_jumps_all_descriptions_agree() {
        let h = crate::numkernel::pauli_x().scale_re(0.7);
        let psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let rep = nonhermitian_compare(&h, &[], &psi, 1.0, 0.01, 64, 1, 4).unwrap();
        assert!(rep.pass);
        assert!(rep.eta.iter().all(|&e| (e - 1.0).abs() < 1e-9));
        assert!(rep.trace_distance.iter().all(|&x| x < 1e-7));
    }

    #[test]
    fn scalar_decay_on_excited_component() {
        let kappa: f64 = 0.6;
        let g = ComplexMatrix::from_real_diag(&[0.0, (2.0 * kappa).sqrt()]);
        let psi = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let rep = nonhermitian_compare(&ComplexMatrix::zeros(2, 2), &[g], &psi, 1.5, 0.01, 2_000, 3, 3).unwrap();
        for (t, eta) in rep.times.iter().zip(&rep.eta) {
            assert!((eta - (-kappa * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn damping_trace_distance_grows_monotonically() {
        let (h, jumps, psi, _) = damping_fixture();
        let rep = nonhermitian_compare(&h, &jumps, &psi, 0.5, 0.01, 2_000, 11, 6).unwrap();
        assert!(rep.ndme_error.iter().all(|&e| e <= HEFF_TOL));
        assert!(rep.trace_distance[0] > 0.0);
        for w in rep.trace_distance.windows(2) {
            assert!(w[1] > w[0], "{:?}", rep.trace_distance);
        }
    }
}
