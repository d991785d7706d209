//! Purification of pipeline states, the environment marker, amplitude
//! amplification onto `|0⟩|μ_T⟩|E⟩`, and the two block-measurement estimators.
//!
//! Registers are ordered system-major: index `(m·d + x)·env + k` for marker
//! `m`, system basis state `x` and environment state `k`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::lindblad::{DensityMatrix, SuperoperatorMatrix};
use crate::ndme::{extract_block, ETA_FLOOR};
use crate::numkernel::{inner, kron, normalized, pauli_x, pauli_y, vnorm, ComplexMatrix, KrausSet, HERMITIAN_TOL};
use crate::odecore::UNIT_TOL;

/// Residual allowed in the marker-block identity check.
pub const MARKER_TOL: f64 = 1e-9;
/// Plans below this success probability report repeat-until-success rounds.
pub const SUCCESS_TARGET: f64 = 0.999;

/// Pure state on system ⊗ environment.
#[derive(Clone, Debug)]
pub struct Purification {
    pub state: Vec<C64>,
    pub sys_dim: usize,
    pub env_dim: usize,
}

impl Purification {
    pub fn new(state: Vec<C64>, sys_dim: usize, env_dim: usize) -> Result<Self> {
        if state.len() != sys_dim * env_dim {
            return Err(Error::ShapeMismatch(format!(
                "state of length {} is not {sys_dim} x {env_dim}",
                state.len()
            )));
        }
        let norm = vnorm(&state);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { state, sys_dim, env_dim })
    }

    /// `Tr_env |S⟩⟨S|`.
    pub fn reduced(&self) -> ComplexMatrix {
        let e = self.env_dim;
        ComplexMatrix::from_fn(self.sys_dim, self.sys_dim, |i, j| {
            (0..e).map(|k| self.state[i * e + k] * self.state[j * e + k].conj()).sum()
        })
    }

    /// `max|Tr_env|S⟩⟨S| - ρ|`.
    pub fn residual(&self, rho: &ComplexMatrix) -> f64 {
        self.reduced().max_abs_diff(rho)
    }
}

/// `Σ_k (K_k ψ₀) ⊗ |k⟩`.
pub fn purify(kraus: &KrausSet, psi0: &[C64]) -> Result<Purification> {
    let d = kraus.operators.first().map(|k| k.rows()).unwrap_or(0);
    if psi0.len() != d {
        return Err(Error::ShapeMismatch(format!("psi0 has length {}, Kraus operators act on {d}", psi0.len())));
    }
    let e = kraus.len();
    let mut state = vec![C64::new(0.0, 0.0); d * e];
    for (k, op) in kraus.operators.iter().enumerate() {
        for (x, z) in op.mat_vec(psi0).into_iter().enumerate() {
            state[x * e + k] = z;
        }
    }
    // Kraus truncation leaves the norm within rounding of one.
    let norm = vnorm(&state);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm });
    }
    let state = state.into_iter().map(|z| z / norm).collect();
    Purification::new(state, d, e)
}

/// Purification of `Φ(|ψ₀⟩⟨ψ₀|)` through the Kraus operators of `Φ`.
pub fn purify_via_kraus(phi: &SuperoperatorMatrix, psi0: &[C64]) -> Result<(Purification, KrausSet)> {
    let norm = vnorm(psi0);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let kraus = phi.kraus()?;
    let s = purify(&kraus, psi0)?;
    Ok((s, kraus))
}

fn marker_probe(d: usize, k: usize, second: bool) -> Vec<C64> {
    // |1⟩ ⊗ ψ with ψ either |0⟩ or a spread vector with distinct phases.
    let mut v = vec![C64::new(0.0, 0.0); 2 * d];
    if second {
        for j in 0..d {
            v[d + j] = C64::from_polar(1.0, 0.7 * (j + k) as f64) / (d as f64).sqrt();
        }
    } else {
        v[d] = C64::new(1.0, 0.0);
    }
    v
}

/// Environment state `Σ_k c_k|k⟩` with `K_k|1⟩|ψ⟩ = c_k|1⟩|ψ⟩`.
///
/// The identity on the `|1⟩` block is checked on every basis vector.
pub fn environment_marker(kraus: &KrausSet, n: usize) -> Result<Vec<C64>> {
    let d = 1usize << n;
    if kraus.operators.iter().any(|k| k.rows() != 2 * d || k.cols() != 2 * d) {
        return Err(Error::ShapeMismatch(format!("Kraus operators must act on dimension {}", 2 * d)));
    }
    let mut coeffs = Vec::with_capacity(kraus.len());
    let mut residual = 0.0f64;
    for op in &kraus.operators {
        let probe = marker_probe(d, 0, false);
        let c = inner(&probe, &op.mat_vec(&probe));
        let second = marker_probe(d, 1, true);
        let c2 = inner(&second, &op.mat_vec(&second));
        residual = residual.max((c - c2).norm());
        for j in 0..d {
            let col: Vec<C64> = (0..2 * d).map(|i| op[(i, d + j)]).collect();
            for (i, z) in col.iter().enumerate() {
                let expect = if i == d + j { c } else { C64::new(0.0, 0.0) };
                residual = residual.max((z - expect).norm());
            }
        }
        coeffs.push(c);
    }
    let norm = vnorm(&coeffs);
    residual = residual.max((norm - 1.0).abs());
    if residual > MARKER_TOL {
        return Err(Error::MarkerBlock { residual });
    }
    Ok(coeffs)
}

/// Amplitude-amplification schedule for amplitude `η/√2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroverPlan {
    pub theta: f64,
    pub k_star: usize,
    pub predicted_success: f64,
    /// `1/p` when `p < 0.999`, otherwise 1.
    pub expected_repetitions: f64,
    /// Preparation-oracle queries per round, `2k + 1`.
    pub queries: usize,
}

pub fn success_after(theta: f64, k: usize) -> f64 {
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}

impl GroverPlan {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= ETA_FLOOR) {
            return Err(Error::VanishingNorm { eta });
        }
        let a = (eta * std::f64::consts::FRAC_1_SQRT_2).min(1.0);
        let theta = a.asin();
        let centre = (std::f64::consts::PI / (4.0 * theta) - 0.5).round() as i64;
        let mut best = (0usize, -1.0f64);
        for k in [centre - 1, centre, centre + 1] {
            if k < 0 {
                continue;
            }
            let p = success_after(theta, k as usize);
            // Strict comparison keeps the smaller k on ties.
            if p > best.1 + 1e-15 {
                best = (k as usize, p);
            }
        }
        let (k_star, p) = best;
        Ok(Self {
            theta,
            k_star,
            predicted_success: p,
            expected_repetitions: if p < SUCCESS_TARGET { 1.0 / p } else { 1.0 },
            queries: 2 * k_star + 1,
        })
    }
}

/// Output of [`grover_extract`].
#[derive(Clone, Debug)]
pub struct Extraction {
    /// Normalized system part of the good component, `≈ μ_T` up to phase.
    pub state: Vec<C64>,
    pub success_prob: f64,
    pub fidelity: f64,
    pub iterations: usize,
    /// Norm of the component outside the good subspace.
    pub junk_norm: f64,
    /// `|⟨junk|good-subspace⟩|`, zero by construction.
    pub junk_overlap: f64,
}

/// Good-subspace projector `|0⟩⟨0| ⊗ I ⊗ |E⟩⟨E|` on a system-major vector.
pub fn project_good(v: &[C64], marker: &[C64], d: usize) -> Vec<C64> {
    let e = marker.len();
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for x in 0..d {
        let c: C64 = (0..e).map(|k| marker[k].conj() * v[x * e + k]).sum();
        for k in 0..e {
            out[x * e + k] = c * marker[k];
        }
    }
    out
}

/// `(⟨0| ⊗ I ⊗ ⟨E|) v`.
pub fn good_amplitudes(v: &[C64], marker: &[C64], d: usize) -> Vec<C64> {
    let e = marker.len();
    (0..d)
        .map(|x| (0..e).map(|k| marker[k].conj() * v[x * e + k]).sum())
        .collect()
}

/// `v ← (I - 2|S⟩⟨S|)(I - 2Π) v`.
pub fn grover_step(v: &mut [C64], s: &[C64], marker: &[C64], d: usize) {
    let p = project_good(v, marker, d);
    for (a, b) in v.iter_mut().zip(&p) {
        *a -= b * 2.0;
    }
    let ov = inner(s, v);
    for (a, b) in v.iter_mut().zip(s) {
        *a -= b * ov * 2.0;
    }
}

/// Applies `k` rounds of `U₂U₁` to `|S⟩` and measures the good subspace.
pub fn amplify(s: &Purification, marker: &[C64], k: usize) -> Result<(Vec<C64>, f64)> {
    if s.env_dim != marker.len() || !s.sys_dim.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!(
            "purification is {} x {}, marker has length {}",
            s.sys_dim,
            s.env_dim,
            marker.len()
        )));
    }
    let d = s.sys_dim / 2;
    let mut v = s.state.clone();
    for _ in 0..k {
        grover_step(&mut v, &s.state, marker, d);
    }
    let good = project_good(&v, marker, d);
    let p = vnorm(&good).powi(2);
    Ok((v, p))
}

/// `(U₂U₁)^{k*}|S⟩` followed by projection onto the good subspace.
/// Asserts the two-dimensional rotation law and the fidelity with `μ_T`.
pub fn grover_extract(s: &Purification, marker: &[C64], mu_t: &[C64], plan: &GroverPlan) -> Result<Extraction> {
    let d = s.sys_dim / 2;
    if mu_t.len() != d {
        return Err(Error::ShapeMismatch(format!("mu_T has length {}, expected {d}", mu_t.len())));
    }
    let (v, success_prob) = amplify(s, marker, plan.k_star)?;
    let expected = success_after(plan.theta, plan.k_star);
    if (success_prob - expected).abs() > 1e-8 {
        return Err(Error::ReferenceMismatch {
            error: (success_prob - expected).abs(),
            tolerance: 1e-8,
        });
    }
    let amplitudes = good_amplitudes(&v, marker, d);
    let state = normalized(&amplitudes);
    let fidelity = inner(&normalized(mu_t), &state).norm_sqr();
    if fidelity < 1.0 - 1e-9 {
        return Err(Error::ReferenceMismatch {
            error: 1.0 - fidelity,
            tolerance: 1e-9,
        });
    }
    let good = project_good(&v, marker, d);
    let junk: Vec<C64> = v.iter().zip(&good).map(|(a, b)| a - b).collect();
    let junk_overlap = inner(&junk, &good).norm();
    Ok(Extraction {
        state,
        success_prob,
        fidelity,
        iterations: plan.k_star,
        junk_norm: vnorm(&junk),
        junk_overlap,
    })
}

fn ensure_marker_state(rho: &DensityMatrix) -> Result<usize> {
    let dim = rho.dim();
    if !dim.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!("state dimension {dim} has no marker qubit")));
    }
    Ok(dim / 2)
}

/// `⟨X⊗I⟩ - i⟨Y⊗I⟩ = η⟨φ₀|μ_T⟩` on the first-stage state.
///
/// With `Y = [[0, -i], [i, 0]]`, `⟨Y⊗I⟩ = -η·Im⟨φ₀|μ_T⟩`.
pub fn echo_estimate(rho_t1: &DensityMatrix) -> Result<C64> {
    let d = ensure_marker_state(rho_t1)?;
    let id = ComplexMatrix::identity(d);
    let x = (&kron(&pauli_x(), &id) * rho_t1.matrix()).trace().re;
    let y = (&kron(&pauli_y(), &id) * rho_t1.matrix()).trace().re;
    Ok(C64::new(x, -y))
}

/// `Tr((X⊗O)ρ_T2) = η²⟨μ_T|O|μ_T⟩` on the second-stage state.
pub fn expval_estimate(rho_t2: &DensityMatrix, o: &ComplexMatrix) -> Result<f64> {
    let d = ensure_marker_state(rho_t2)?;
    if o.rows() != d || o.cols() != d {
        return Err(Error::ShapeMismatch(format!("observable is {}x{}, expected {d}x{d}", o.rows(), o.cols())));
    }
    let residual = o.hermitian_residual();
    if residual > HERMITIAN_TOL * o.max_abs().max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    // Equal to Tr((X⊗O)ρ); only the off-diagonal blocks contribute.
    let upper = extract_block(rho_t2.matrix(), 0, 1);
    Ok(2.0 * (o * &upper).trace().re)
}

/// Mean of `shots` ±1 outcomes with expectation `true_value`.
pub fn shots_emulate(true_value: f64, shots: u64, seed: u64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&true_value) || shots == 0 {
        return Err(Error::InvalidArgument(format!(
            "need true_value in [-1, 1] and shots > 0 (got {true_value}, {shots})"
        )));
    }
    let p = 0.5 * (1.0 + true_value);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let plus = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(&mut r);
    Ok((2.0 * plus as f64 - shots as f64) / shots as f64)
}

/// Order-of-magnitude query counts with unit constants.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationBudget {
    /// `η⁻¹ε⁻¹ln(1/δ)`.
    pub echo: f64,
    /// `η⁻²ε⁻¹ln(1/δ)`.
    pub expval: f64,
    /// `ε⁻¹ln(1/δ)`.
    pub amplitude_estimation: f64,
    pub notes: String,
}

pub fn estimation_budget(eta: f64, eps: f64, delta: f64) -> Result<EstimationBudget> {
    if !(eta > 0.0 && eps > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need eta > 0, eps > 0, 0 < delta < 1 (got {eta}, {eps}, {delta})"
        )));
    }
    let ae = (1.0 / delta).ln() / eps;
    Ok(EstimationBudget {
        echo: ae / eta,
        expval: ae / (eta * eta),
        amplitude_estimation: ae,
        notes: crate::budget::UNIT_CONSTANTS.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{propagator_channel, LindbladSpec};
    use crate::ndme::{dilate, dissipative_parts, initial_state, second_stage_for, solve_with_jumps};
    use crate::numkernel::{expm, pauli_z, sigma_minus};
    use crate::odecore::{reference_solve, OdeProblem, TimeDependentMatrix};
    use crate::suite::{random_semi_dissipative, random_unit_vector, rng};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn s2() -> f64 {
        std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn identity_channel_purification_and_marker() {
        let id = ComplexMatrix::identity(4);
        let kraus = KrausSet { operators: vec![id] };
        let psi = normalized(&[c(1.0), c(0.0), c(1.0), c(0.0)]);
        let s = purify(&kraus, &psi).unwrap();
        assert_eq!(s.env_dim, 1);
        assert!(vnorm(&crate::numkernel::vec_sub(&s.state, &psi)) < 1e-15);
        let e = environment_marker(&kraus, 1).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn amplitude_damping_purification_matches_closed_form() {
        let spec = LindbladSpec::constant(ComplexMatrix::zeros(2, 2), vec![sigma_minus()]).unwrap();
        let t = 0.8;
        let phi = propagator_channel(&spec, t).unwrap();
        let (s, kraus) = purify_via_kraus(&phi, &[c(0.0), c(1.0)]).unwrap();
        assert_eq!(kraus.len(), 2);
        let p = (-t).exp();
        let exact = ComplexMatrix::from_real_diag(&[1.0 - p, p]);
        assert!(s.residual(&exact) < 1e-9);
    }

    fn pipeline(v: ComplexMatrix, mu0: Vec<C64>, t: f64) -> (OdeProblem, Purification, KrausSet, DensityMatrix) {
        let n = (v.rows() as f64).log2() as usize;
        let p = OdeProblem::homogeneous(n, v.into(), mu0.clone(), t).unwrap();
        let (a, g) = dissipative_parts(&p.v);
        let spec = dilate(&a, &[g]).unwrap();
        let phi = propagator_channel(&spec, t).unwrap();
        let psi0: Vec<C64> = mu0.iter().chain(&mu0).map(|z| z * s2()).collect();
        let (s, kraus) = purify_via_kraus(&phi, &psi0).unwrap();
        let rho = DensityMatrix::new(phi.apply(initial_state(&mu0, &mu0).unwrap().matrix()).unwrap().hermitian_part())
            .unwrap();
        (p, s, kraus, rho)
    }

    #[test]
    fn random_pipeline_purification_and_overlap_identity() {
        let mut r = rng(61);
        for k in 0..3 {
            let d = 2 << (k % 2);
            let v = random_semi_dissipative(&mut r, d, k % 2, 1.0);
            let mu0 = random_unit_vector(&mut r, d);
            let (p, s, kraus, rho) = pipeline(v, mu0, 0.9);
            assert!(s.residual(rho.matrix()) <= 1e-9);
            let e = environment_marker(&kraus, p.n).unwrap();
            assert!((vnorm(&e) - 1.0).abs() < 1e-9);
            let reference = reference_solve(&p, 1e-11).unwrap();
            let lhs = good_amplitudes(&s.state, &e, d);
            let rhs: Vec<C64> = reference.final_state().iter().map(|z| z * s2()).collect();
            assert!(vnorm(&crate::numkernel::vec_sub(&lhs, &rhs)) < 1e-8);
        }
    }

    #[test]
    fn marker_rejects_non_block_preserving_channel() {
        let x = kron(&pauli_x(), &ComplexMatrix::identity(2));
        let kraus = KrausSet { operators: vec![x] };
        assert!(matches!(environment_marker(&kraus, 1), Err(Error::MarkerBlock { .. })));
    }

    #[test]
    fn plan_examples() {
        let unit = GroverPlan::new(1.0).unwrap();
        assert!((unit.theta - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((unit.predicted_success - 0.5).abs() < 1e-12);
        assert_eq!(unit.k_star, 0);
        assert!((unit.expected_repetitions - 2.0).abs() < 1e-9);
        let small = GroverPlan::new(0.2).unwrap();
        assert_eq!(small.k_star, 5);
        assert!(small.predicted_success >= 0.999);
        assert_eq!(small.queries, 11);
        assert!(GroverPlan::new(0.0).is_err());
    }

    #[test]
    fn grover_follows_rotation_law_and_extracts_solution() {
        // V = ln(5)·I + iZ/2 gives η = 0.2.
        let v = &ComplexMatrix::identity(2).scale_re(5f64.ln()) + &pauli_z().scale(C64::new(0.0, 0.5));
        let mu0 = vec![c(0.6), c(0.8)];
        let (p, s, kraus, _) = pipeline(v.clone(), mu0.clone(), 1.0);
        let e = environment_marker(&kraus, 1).unwrap();
        let mu_ref = expm(&v.scale_re(-1.0)).unwrap().mat_vec(&mu0);
        let eta = vnorm(&mu_ref);
        assert!((eta - 0.2).abs() < 1e-12);
        let plan = GroverPlan::new(eta).unwrap();
        for k in 0..=3 * plan.k_star {
            let (_, prob) = amplify(&s, &e, k).unwrap();
            assert!((prob - success_after(plan.theta, k)).abs() < 1e-8);
        }
        let out = grover_extract(&s, &e, &normalized(&mu_ref), &plan).unwrap();
        assert!(out.success_prob >= 0.999);
        assert!(out.fidelity >= 1.0 - 1e-9);
        assert!(out.junk_overlap < 1e-12);
        assert_eq!(p.n, 1);
    }

    #[test]
    fn unitary_case_caps_at_one_half() {
        let v = pauli_x().scale(C64::new(0.0, 1.0));
        let (_, s, kraus, _) = pipeline(v, vec![c(1.0), c(0.0)], 0.4);
        let e = environment_marker(&kraus, 1).unwrap();
        for k in 0..4 {
            let (_, prob) = amplify(&s, &e, k).unwrap();
            assert!((prob - 0.5).abs() < 1e-8);
        }
    }

    fn echo_of(v: ComplexMatrix, mu0: Vec<C64>, phi0: Vec<C64>, t: f64) -> (C64, C64) {
        let n = (v.rows() as f64).log2() as usize;
        let p = OdeProblem::homogeneous(n, v.into(), mu0, t).unwrap();
        let (a, g) = dissipative_parts(&p.v);
        let sol = solve_with_jumps(&p, &a, &[g], Some(&phi0), None).unwrap();
        let reference = reference_solve(&p, 1e-11).unwrap();
        (echo_estimate(&sol.rho_t).unwrap(), inner(&phi0, reference.final_state()))
    }

    #[test]
    fn echo_examples() {
        let (e, _) = echo_of(ComplexMatrix::zeros(2, 2), vec![c(0.6), c(0.8)], vec![c(0.6), c(0.8)], 1.0);
        assert!((e - c(1.0)).norm() < 1e-10);
        let (e, _) = echo_of(
            ComplexMatrix::from_real_diag(&[1.0, 2.0]),
            vec![c(s2()), c(s2())],
            vec![c(s2()), c(s2())],
            1.0,
        );
        assert!((e - c(0.5 * ((-1f64).exp() + (-2f64).exp()))).norm() < 1e-8);
        let (e, _) = echo_of(
            pauli_x().scale(C64::new(0.0, 1.0)),
            vec![c(1.0), c(0.0)],
            vec![c(1.0), c(0.0)],
            std::f64::consts::FRAC_PI_2,
        );
        assert!(e.norm() < 1e-8);
    }

    #[test]
    fn echo_matches_reference_with_complex_overlap() {
        let mut r = rng(67);
        let v = random_semi_dissipative(&mut r, 4, 1, 1.0);
        let mu0 = random_unit_vector(&mut r, 4);
        let phi0 = random_unit_vector(&mut r, 4);
        let (e, exact) = echo_of(v, mu0, phi0, 0.8);
        assert!(exact.im.abs() > 1e-3);
        assert!((e - exact).norm() < 1e-8);
    }

    fn expval_of(v: ComplexMatrix, mu0: Vec<C64>, o: &ComplexMatrix, t: f64) -> f64 {
        let n = (v.rows() as f64).log2() as usize;
        let p = OdeProblem::homogeneous(n, TimeDependentMatrix::Constant(v), mu0, t).unwrap();
        let sol = crate::ndme::solve_homogeneous(&p).unwrap();
        let rho2 = second_stage_for(&p, &sol.rho_t).unwrap();
        expval_estimate(&rho2, o).unwrap()
    }

    #[test]
    fn expval_examples() {
        let z = pauli_z();
        assert!((expval_of(ComplexMatrix::zeros(2, 2), vec![c(1.0), c(0.0)], &z, 1.0) - 1.0).abs() < 1e-10);
        assert!(expval_of(ComplexMatrix::zeros(2, 2), vec![c(1.0), c(0.0)], &pauli_x(), 1.0).abs() < 1e-10);
        let got = expval_of(ComplexMatrix::from_real_diag(&[1.0, 2.0]), vec![c(s2()), c(s2())], &z, 1.0);
        let expect = 0.5 * ((-2f64).exp() - (-4f64).exp());
        assert!((got - expect).abs() < 1e-8);
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(matches!(
            expval_estimate(&rho, &sigma_minus()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn shots_examples() {
        assert_eq!(shots_emulate(1.0, 123, 4).unwrap(), 1.0);
        assert_eq!(shots_emulate(-1.0, 17, 4).unwrap(), -1.0);
        assert!(shots_emulate(0.0, 10_000, 9).unwrap().abs() <= 3e-2);
        assert_eq!(shots_emulate(0.3, 500, 2).unwrap(), shots_emulate(0.3, 500, 2).unwrap());
        assert!(shots_emulate(1.5, 10, 1).is_err());
    }

    #[test]
    fn shot_noise_follows_inverse_square_root() {
        let rms = |shots: u64| {
            let sq: f64 = (0..400)
                .map(|s| (shots_emulate(0.2, shots, s).unwrap() - 0.2).powi(2))
                .sum();
            (sq / 400.0).sqrt()
        };
        let ratio = rms(1_000) / rms(4_000);
        assert!((1.6..2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn estimation_budget_examples() {
        let b = estimation_budget(1.0, 0.01, 0.05).unwrap();
        let l = 20f64.ln();
        assert!((b.echo - 100.0 * l).abs() < 1e-9);
        assert!((b.expval - 100.0 * l).abs() < 1e-9);
        let h = estimation_budget(0.5, 0.01, 0.05).unwrap();
        assert!((h.echo - 2.0 * b.echo).abs() < 1e-9);
        assert!((h.expval - 4.0 * b.expval).abs() < 1e-9);
        let t = estimation_budget(1.0, 0.001, 0.05).unwrap();
        assert!((t.amplitude_estimation - 10.0 * b.amplitude_estimation).abs() < 1e-9);
        assert!(b.notes.contains("constants set to 1"));
    }
}
