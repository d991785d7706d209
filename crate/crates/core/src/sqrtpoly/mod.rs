//! Direct-access machinery: an odd polynomial `P ≈ ½√x` on `[Δ, 1]`, its
//! spectral application to scaled Hermitian matrices, the approximate jump
//! operator `G̃ = 2√(2α)·P(B/α)`, and the end-to-end solver built on it.

mod poly;

pub use poly::*;

use num_complex::Complex64 as C64;

use crate::budget::{predict_direct_access, CostParams};
use crate::error::{Error, Result};
use crate::lindblad::LindbladSpec;
use crate::ndme::{solve_with_jumps, ETA_FLOOR};
use crate::numkernel::{herm_eig, normalized, spectral_norm, vec_sub, vnorm, ComplexMatrix, HERMITIAN_TOL, PSD_TOL};
use crate::odecore::{
    check_semi_dissipative, hermitian_split, reference_solve, spectral_gap_over, OdeProblem, TimeDependentMatrix,
    DEFAULT_GRID,
};

/// Eigenvalues of `M/α` at or below this magnitude are treated as kernel.
pub const KERNEL_TOL: f64 = 1e-12;
/// Tolerance split `ε′ = ε·η/(SPLIT·max(T, 1))`.
pub const SPLIT: f64 = 10.0;
/// Applied to the sampled gap of a time-dependent `B(t)`; the grid can miss the minimum.
const TIME_DEPENDENT_GAP_SAFETY: f64 = 0.9;
const ETA_ESTIMATE_RTOL: f64 = 1e-6;
const REFERENCE_RTOL: f64 = 1e-10;

/// Hermitian matrix with a normalization `alpha ≥ ‖matrix‖`.
#[derive(Clone, Debug)]
pub struct ScaledHermitian {
    pub matrix: ComplexMatrix,
    pub alpha: f64,
}

impl ScaledHermitian {
    pub fn new(matrix: ComplexMatrix, alpha: f64) -> Result<Self> {
        matrix.ensure_square()?;
        let residual = matrix.hermitian_residual();
        if residual > HERMITIAN_TOL * matrix.max_abs().max(1.0) {
            return Err(Error::NotHermitian { residual });
        }
        let norm = spectral_norm(&matrix);
        if !(alpha > 0.0) || alpha < norm - 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} below the spectral norm {norm}"
            )));
        }
        Ok(Self { matrix, alpha })
    }
}

fn snapped_map(s: &ScaledHermitian, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(&s.matrix)?;
    Ok(eig.map(|lam| {
        let x = (lam / s.alpha).clamp(-1.0, 1.0);
        if x.abs() <= KERNEL_TOL {
            0.0
        } else {
            f(x)
        }
    }))
}

/// `Q·P(Λ/α)·Q†`. Kernel eigenvalues map to exactly zero.
pub fn apply_poly(p: &OddChebyPoly, s: &ScaledHermitian) -> Result<ComplexMatrix> {
    snapped_map(s, |x| p.eval_unchecked(x))
}

/// `2√(2α)·P(B/α)` for a fixed polynomial, checking that `B ⪰ 0` and that
/// no eigenvalue of `B/α` falls in `(0, P.delta)`.
pub fn approx_jump_operator_with(p: &OddChebyPoly, b: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix> {
    let s = ScaledHermitian::new(b.clone(), alpha)?;
    let eig = herm_eig(b)?;
    if eig.min() < -PSD_TOL * eig.max().abs().max(1.0) {
        return Err(Error::NotPsd { eigenvalue: eig.min() });
    }
    if let Some(&lam) = eig
        .eigenvalues
        .iter()
        .find(|&&lam| lam / alpha > KERNEL_TOL && lam / alpha < p.delta * (1.0 - 1e-12))
    {
        return Err(Error::SpectrumInGap {
            eigenvalue: lam / alpha,
            delta: p.delta,
        });
    }
    let scale = 2.0 * (2.0 * alpha).sqrt();
    Ok(apply_poly(p, &s)?.scale_re(scale))
}

/// [`approx_jump_operator_with`] on a freshly fitted `P` for `(delta, eps)`.
pub fn approx_jump_operator(b: &ComplexMatrix, alpha: f64, delta: f64, eps: f64) -> Result<ComplexMatrix> {
    let p = fit_odd_sqrt(delta, eps)?;
    approx_jump_operator_with(&p, b, alpha)
}

/// Quantities fixed and measured by [`direct_access_pipeline`].
#[derive(Clone, Debug)]
pub struct DirectAccessReport {
    /// `None` when `B ≡ 0` and no polynomial is needed.
    pub degree: Option<usize>,
    pub delta: Option<f64>,
    pub eps_prime: Option<f64>,
    pub poly_eps: Option<f64>,
    pub alpha: f64,
    pub eta_estimate: f64,
    /// `‖|μ̃_T⟩ - |μ_T⟩‖₂` against the reference solver.
    pub error: f64,
    pub eps_target: f64,
    /// Direct-access time-independent or time-dependent count, unit constants.
    pub predicted_queries: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DirectAccessSolution {
    pub mu_t: Vec<C64>,
    pub eta: f64,
    pub report: DirectAccessReport,
    /// Dilated Lindbladian actually propagated.
    pub spec: LindbladSpec,
}

/// Homogeneous solve with the jump replaced by its polynomial approximation.
///
/// `α = max_t ‖V(t)‖`, `δ = min(½, Δ/α)`, `ε′ = ε·η_est/(10·max(T, 1))`. The
/// normalized output is checked against the reference solver at `eps_target`.
pub fn direct_access_pipeline(p: &OdeProblem, eps_target: f64) -> Result<DirectAccessSolution> {
    direct_access_pipeline_with_gap(p, eps_target, None)
}

/// [`direct_access_pipeline`] with a caller-supplied gap `Δ` for `B(t)`.
/// An override above the true gap is rejected as spectrum inside `(0, δ)`.
pub fn direct_access_pipeline_with_gap(
    p: &OdeProblem,
    eps_target: f64,
    gap_override: Option<f64>,
) -> Result<DirectAccessSolution> {
    if let Some(g) = gap_override {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidArgument(format!("gap override {g} must be positive")));
        }
    }
    if !(eps_target > 0.0 && eps_target < 1.0) {
        return Err(Error::InvalidArgument(format!("eps_target = {eps_target} outside (0, 1)")));
    }
    if p.b.is_some() {
        return Err(Error::InvalidArgument(
            "direct-access pipeline handles homogeneous problems only".into(),
        ));
    }
    check_semi_dissipative(&p.v, p.t_end, DEFAULT_GRID)?.into_result()?;
    let alpha = p.v.max_norm(p.t_end);
    let d = p.dim();
    let b_of = p.v.derive("B", d, d, |m| hermitian_split(&m).1);
    let a_of = p.v.derive("A", d, d, |m| hermitian_split(&m).0);
    let dissipative = b_of.max_norm(p.t_end) > 0.0;

    let reference = reference_solve(p, ETA_ESTIMATE_RTOL)?;
    let eta_estimate = reference.eta;
    if eta_estimate < ETA_FLOOR {
        return Err(Error::VanishingNorm { eta: eta_estimate });
    }

    let mut report = DirectAccessReport {
        degree: None,
        delta: None,
        eps_prime: None,
        poly_eps: None,
        alpha,
        eta_estimate,
        error: f64::NAN,
        eps_target,
        predicted_queries: None,
    };

    let jumps: Vec<TimeDependentMatrix> = if dissipative {
        let gap = match gap_override {
            Some(g) => g,
            None => spectral_gap_over(&p.v, p.t_end, DEFAULT_GRID)?,
        };
        let safety = if p.v.is_constant() { 1.0 } else { TIME_DEPENDENT_GAP_SAFETY };
        let delta = (safety * gap / alpha).min(0.5);
        let eps_prime = (eps_target * eta_estimate / (SPLIT * p.t_end.max(1.0))).min(0.5);
        let poly = fit_odd_sqrt(delta, eps_prime)?;
        if p.v.is_constant() {
            approx_jump_operator_with(&poly, &b_of.at(0.0), alpha)?;
        }
        let params = CostParams {
            delta: Some(gap),
            ..CostParams::new(alpha, p.t_end, eps_target, eta_estimate)
        };
        let predicted = predict_direct_access(&params)?;
        report.predicted_queries = if p.v.is_constant() {
            predicted.time_independent.queries_v_or_sqrt
        } else {
            predicted.time_dependent.queries_v_or_sqrt
        };
        report.degree = Some(poly.degree);
        report.delta = Some(delta);
        report.eps_prime = Some(eps_prime);
        report.poly_eps = Some(poly.eps);
        let scale = 2.0 * (2.0 * alpha).sqrt();
        let g = b_of.derive("G~", d, d, move |b| {
            let s = ScaledHermitian { matrix: b, alpha };
            snapped_map(&s, |x| poly.eval_unchecked(x))
                .expect("B(t) is Hermitian")
                .scale_re(scale)
        });
        vec![g]
    } else {
        Vec::new()
    };

    let sol = solve_with_jumps(p, &a_of, &jumps, None, None)?;
    let exact = reference_solve(p, REFERENCE_RTOL)?;
    let target = normalized(exact.final_state());
    report.error = vnorm(&vec_sub(&sol.mu_t, &target));
    if report.error > eps_target {
        return Err(Error::ReferenceMismatch {
            error: report.error,
            tolerance: eps_target,
        });
    }
    Ok(DirectAccessSolution {
        mu_t: sol.mu_t,
        eta: sol.eta,
        report,
        spec: sol.spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::psd_sqrt;
    use crate::suite::{random_psd, rng};
    use rand::Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn oddness_is_structural() {
        let p = fit_odd_sqrt(0.25, 1e-3).unwrap();
        let a = p.chebyshev_coefficients();
        assert_eq!(a.len(), p.degree + 1);
        assert!(a.iter().step_by(2).all(|&x| x == 0.0));
        assert_eq!(eval_poly(&p, 0.0).unwrap(), 0.0);
        for x in [0.1, 0.37, 0.9] {
            assert_eq!(p.eval_unchecked(-x), -p.eval_unchecked(x));
        }
        assert!(eval_poly(&p, 1.5).is_err());
    }

    #[test]
    fn certification_survives_fresh_dense_grid() {
        let p = fit_odd_sqrt(0.25, 1e-4).unwrap();
        assert!(p.eps <= 1e-4 && p.bound_ok && p.max_abs <= 1.0);
        let mut r = rng(41);
        let worst = (0..100_000)
            .map(|_| {
                let x: f64 = r.random_range(0.25..=1.0);
                (p.eval_unchecked(x) - 0.5 * x.sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4 + 1e-12, "{worst:.3e}");
        assert!(worst <= p.eps + 1e-12);
    }

    #[test]
    fn degree_scaling_constant_is_stable() {
        let mut ratios = Vec::new();
        for delta in [0.5, 0.25, 0.125, 0.0625] {
            for eps in [1e-2, 1e-4, 1e-6] {
                let p = fit_odd_sqrt(delta, eps).unwrap();
                ratios.push(p.degree as f64 * delta / (1.0 / eps).ln());
            }
        }
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        assert!(hi / lo <= 4.0, "{ratios:?}");
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(fit_odd_sqrt(0.0, 1e-3).is_err());
        assert!(fit_odd_sqrt(0.6, 1e-3).is_err());
        assert!(fit_odd_sqrt(0.25, 0.0).is_err());
    }

    #[test]
    fn apply_poly_examples() {
        let p = fit_odd_sqrt(0.25, 1e-6).unwrap();
        let id = ScaledHermitian::new(ComplexMatrix::identity(2), 1.0).unwrap();
        let out = apply_poly(&p, &id).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::identity(2).scale_re(0.5)) <= 1e-6);
        let s = ScaledHermitian::new(ComplexMatrix::from_real_diag(&[0.0, 1.0]), 1.0).unwrap();
        let out = apply_poly(&p, &s).unwrap();
        assert_eq!(out[(0, 0)], c(0.0));
        assert!((out[(1, 1)] - c(0.5)).norm() <= 1e-6);
        assert!(ScaledHermitian::new(ComplexMatrix::identity(2), 0.5).is_err());
    }

    #[test]
    fn approx_jump_examples() {
        let eps = 1e-5;
        let g = approx_jump_operator(&ComplexMatrix::identity(2), 1.0, 0.25, eps).unwrap();
        let sqrt2 = 2f64.sqrt();
        assert!(g.max_abs_diff(&ComplexMatrix::identity(2).scale_re(sqrt2)) <= 2.0 * sqrt2 * eps);

        let b = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let g = approx_jump_operator(&b, 1.0, 0.25, eps).unwrap();
        assert_eq!(g[(0, 0)], c(0.0));
        assert_eq!(g[(0, 1)], c(0.0));
        assert!((g[(1, 1)] - c(sqrt2)).norm() <= 2.0 * sqrt2 * eps);
    }

    #[test]
    fn approx_jump_perturbation_bound() {
        let mut r = rng(43);
        for k in 0..6 {
            let d = 2 + k % 3;
            let b = random_psd(&mut r, d, k % 2);
            let alpha = spectral_norm(&b) * 1.5;
            let delta = 0.2 / alpha;
            let eps = [1e-3, 1e-5][k % 2];
            let g = approx_jump_operator(&b, alpha, delta.min(0.5), eps).unwrap();
            let exact = psd_sqrt(&b.scale_re(2.0)).unwrap();
            assert!(spectral_norm(&(&g - &exact)) <= 2.0 * (2.0 * alpha).sqrt() * eps * (1.0 + 1e-9));
            let gg = &g.adjoint() * &g;
            let lhs = spectral_norm(&(&gg - &b.scale_re(2.0)));
            let rhs = 8.0 * alpha.sqrt() * eps * spectral_norm(&b.scale_re(2.0)).sqrt();
            assert!(lhs <= 10.0 * rhs, "{lhs:.3e} vs {rhs:.3e}");
        }
    }

    #[test]
    fn approx_jump_rejects_spectrum_in_gap() {
        let b = ComplexMatrix::from_real_diag(&[0.05, 1.0]);
        match approx_jump_operator(&b, 1.0, 0.25, 1e-3) {
            Err(Error::SpectrumInGap { eigenvalue, .. }) => assert!((eigenvalue - 0.05).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let neg = ComplexMatrix::from_real_diag(&[-0.5, 1.0]);
        assert!(matches!(approx_jump_operator(&neg, 1.0, 0.25, 1e-3), Err(Error::NotPsd { .. })));
    }

    fn diag12() -> OdeProblem {
        let v = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        OdeProblem::homogeneous(1, v.into(), vec![c(s), c(s)], 1.0).unwrap()
    }

    #[test]
    fn pipeline_without_dissipation_needs_no_polynomial() {
        let v = crate::numkernel::pauli_x().scale(C64::new(0.0, 1.0));
        let p = OdeProblem::homogeneous(1, v.into(), vec![c(1.0), c(0.0)], 0.7).unwrap();
        let out = direct_access_pipeline(&p, 1e-6).unwrap();
        assert!(out.report.degree.is_none());
        assert!((out.eta - 1.0).abs() < 1e-9);
        assert!(out.report.error < 1e-8);
    }

    #[test]
    fn pipeline_on_diagonal_closed_form() {
        let out = direct_access_pipeline(&diag12(), 1e-4).unwrap();
        let (a, b) = ((-1f64).exp(), (-2f64).exp());
        let exact = normalized(&[c(a), c(b)]);
        assert!(vnorm(&vec_sub(&out.mu_t, &exact)) <= 1e-4);
        assert!(out.report.degree.unwrap() % 2 == 1);
        assert!(out.report.predicted_queries.unwrap() > 0.0);
    }

    #[test]
    fn pipeline_degree_grows_additively_when_halving_eps() {
        let degrees: Vec<usize> = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
            .iter()
            .map(|&e| direct_access_pipeline(&diag12(), e).unwrap().report.degree.unwrap())
            .collect();
        let delta = 0.5;
        for w in degrees.windows(2) {
            assert!(w[1] >= w[0], "{degrees:?}");
            assert!((w[1] - w[0]) as f64 <= 4.0 / delta + 2.0, "{degrees:?}");
        }
    }

    #[test]
    fn pipeline_requires_a_gap() {
        let v = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let p = OdeProblem::homogeneous(1, v.into(), vec![c(0.6), c(0.8)], 1.0).unwrap();
        assert!(direct_access_pipeline(&p, 1e-4).is_ok());
        let v = TimeDependentMatrix::generator("t·diag(1,1)", 2, 2, vec![], |t| {
            ComplexMatrix::from_real_diag(&[t, t])
        });
        let p = OdeProblem::homogeneous(1, v, vec![c(1.0), c(0.0)], 1.0).unwrap();
        assert!(matches!(direct_access_pipeline(&p, 1e-4), Err(Error::GapUndefined)));
    }
}
