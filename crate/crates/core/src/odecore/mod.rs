//! ODE instances `dμ/dt = -V(t) μ + b(t)`, the Hermitian split of `V`, the
//! semi-dissipativity and gap checks, and the adaptive reference integrator
//! that every other pipeline is checked against.

mod integrate;
mod timedep;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{expm, herm_eig, vec_sub, vnorm, ComplexMatrix};

pub use integrate::integrate_linear;
pub use timedep::{evaluation_grid, segments, NamedGenerator, TimeDependentMatrix};

/// Normalization tolerance on `μ₀`.
pub const UNIT_TOL: f64 = 1e-12;
/// Default local relative tolerance of the reference integrator.
pub const DEFAULT_RTOL: f64 = 1e-10;
/// Eigenvalues of `B(t)` below `-SEMI_DISSIPATIVE_TOL` violate semi-dissipativity.
pub const SEMI_DISSIPATIVE_TOL: f64 = 1e-8;
/// Default number of uniform grid points for time-dependent checks.
pub const DEFAULT_GRID: usize = 64;

/// A linear ODE instance on `n` qubits.
#[derive(Clone, Debug)]
pub struct OdeProblem {
    pub n: usize,
    pub v: TimeDependentMatrix,
    pub mu0: Vec<C64>,
    pub b: Option<TimeDependentMatrix>,
    pub t_end: f64,
}

impl OdeProblem {
    pub fn new(
        n: usize,
        v: TimeDependentMatrix,
        mu0: Vec<C64>,
        b: Option<TimeDependentMatrix>,
        t_end: f64,
    ) -> Result<Self> {
        let d = 1usize << n;
        if v.rows() != d || v.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "V is {}x{}, expected {d}x{d} for n = {n}",
                v.rows(),
                v.cols()
            )));
        }
        if mu0.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "mu0 has length {}, expected {d}",
                mu0.len()
            )));
        }
        let norm = vnorm(&mu0);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotNormalized { norm });
        }
        if let Some(b) = &b {
            if b.rows() != d || b.cols() != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "b is {}x{}, expected {d}x1",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon T = {t_end} must be finite and >= 0")));
        }
        Ok(Self { n, v, mu0, b, t_end })
    }

    pub fn homogeneous(n: usize, v: TimeDependentMatrix, mu0: Vec<C64>, t_end: f64) -> Result<Self> {
        Self::new(n, v, mu0, None, t_end)
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `b(t)` as a vector.
    pub fn source_at(&self, t: f64) -> Option<Vec<C64>> {
        self.b.as_ref().map(|b| b.at(t).into_vec())
    }
}

/// Sampled solution of an ODE.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    /// `‖μ(T)‖₂`.
    pub eta: f64,
    /// Distance to `expm(-VT) μ₀` when that cross-check applies.
    pub crosscheck: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[C64] {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// `V = B + iA` with `A = (V - V†)/2i` and `B = (V + V†)/2`, both Hermitian.
pub fn hermitian_split(v: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let adj = v.adjoint();
    let a = (v - &adj).scale(C64::new(0.0, -0.5));
    let b = (v + &adj).scale_re(0.5);
    (a, b)
}

/// Outcome of [`check_semi_dissipative`] with the worst sampled eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiDissipativeVerdict {
    pub ok: bool,
    pub worst_t: f64,
    pub worst_eigenvalue: f64,
}

impl SemiDissipativeVerdict {
    pub fn into_result(self) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::NotSemiDissipative {
                t: self.worst_t,
                eigenvalue: self.worst_eigenvalue,
            })
        }
    }
}

/// Checks `λ_min(B(t)) ≥ -1e-8` on `grid` uniform points of `[0, t_end]` plus
/// the knots.
pub fn check_semi_dissipative(
    v: &TimeDependentMatrix,
    t_end: f64,
    grid: usize,
) -> Result<SemiDissipativeVerdict> {
    let mut verdict = SemiDissipativeVerdict {
        ok: true,
        worst_t: 0.0,
        worst_eigenvalue: f64::INFINITY,
    };
    for t in evaluation_grid(v, t_end, grid) {
        let (_, b) = hermitian_split(&v.at(t));
        let lowest = herm_eig(&b)?.min();
        if lowest < verdict.worst_eigenvalue {
            verdict.worst_eigenvalue = lowest;
            verdict.worst_t = t;
        }
    }
    verdict.ok = verdict.worst_eigenvalue >= -SEMI_DISSIPATIVE_TOL;
    Ok(verdict)
}

/// Smallest eigenvalue of `B` above `1e-12 ‖B‖`.
pub fn spectral_gap(b: &ComplexMatrix) -> Result<f64> {
    let eig = herm_eig(b)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let threshold = 1e-12 * scale;
    eig.eigenvalues
        .iter()
        .copied()
        .find(|&x| x > threshold && scale > 0.0)
        .ok_or(Error::GapUndefined)
}

/// Minimum of [`spectral_gap`] of `B(t)` over the evaluation grid.
pub fn spectral_gap_over(v: &TimeDependentMatrix, t_end: f64, grid: usize) -> Result<f64> {
    evaluation_grid(v, t_end, grid)
        .into_iter()
        .map(|t| spectral_gap(&hermitian_split(&v.at(t)).1))
        .try_fold(f64::INFINITY, |acc, g| g.map(|g| acc.min(g)))
}

/// Adaptive Dormand–Prince solution of `dμ/dt = -V(t)μ + b(t)` on `[0, T]`.
///
/// For constant `V` without a source the result is cross-checked against
/// `expm(-VT) μ₀` and rejected if they disagree by more than `10·rtol`.
pub fn reference_solve(p: &OdeProblem, rtol: f64) -> Result<Trajectory> {
    let (times, states) = integrate_linear(&p.v, p.b.as_ref(), &p.mu0, 0.0, p.t_end, rtol)?;
    let eta = vnorm(states.last().expect("non-empty"));
    let mut crosscheck = None;
    if p.v.is_constant() && p.b.is_none() {
        let prop = expm(&p.v.at(0.0).scale_re(-p.t_end))?;
        let exact = prop.mat_vec(&p.mu0);
        let gap = vnorm(&vec_sub(&exact, states.last().expect("non-empty")));
        if gap > 10.0 * rtol {
            return Err(Error::InvalidArgument(format!(
                "reference integrator disagrees with the matrix exponential by {gap:.3e}"
            )));
        }
        crosscheck = Some(gap);
    }
    Ok(Trajectory {
        times,
        states,
        eta,
        crosscheck,
    })
}

/// Final state of the homogeneous flow from `t0` to `t1` starting at `y0`.
pub fn propagate_vector(
    v: &TimeDependentMatrix,
    y0: &[C64],
    t0: f64,
    t1: f64,
    rtol: f64,
) -> Result<Vec<C64>> {
    let (_, mut states) = integrate_linear(v, None, y0, t0, t1, rtol)?;
    Ok(states.pop().expect("non-empty"))
}

/// Midpoint quadrature nodes `t_j = (j + 1/2) T / m`.
pub fn midpoint_nodes(t_end: f64, m: usize) -> Vec<f64> {
    (0..m).map(|j| (j as f64 + 0.5) * t_end / m as f64).collect()
}

/// Duhamel representation with an `m`-slice midpoint rule:
/// `𝒯e^{-∫V} μ₀ + (T/m) Σ_j 𝒯e^{-∫_{t_j}^T V} b(t_j)`.
pub fn duhamel_compose(p: &OdeProblem, m: usize) -> Result<Vec<C64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let rtol = 1e-12;
    let mut total = propagate_vector(&p.v, &p.mu0, 0.0, p.t_end, rtol)?;
    let Some(_) = &p.b else {
        return Ok(total);
    };
    let weight = p.t_end / m as f64;
    let branches: Vec<Vec<C64>> = midpoint_nodes(p.t_end, m)
        .into_par_iter()
        .map(|tj| {
            let bj = p.source_at(tj).expect("source present");
            propagate_vector(&p.v, &bj, tj, p.t_end, rtol)
        })
        .collect::<Result<_>>()?;
    for branch in &branches {
        for (acc, x) in total.iter_mut().zip(branch) {
            *acc += x * weight;
        }
    }
    Ok(total)
}

/// Both sides of `‖ψ-φ‖₂ ≤ ‖(ψ-φ)μ†‖₁ / ‖μ‖₂`.
pub fn norm_propagation_sides(psi: &[C64], phi: &[C64], mu: &[C64]) -> (f64, f64) {
    let diff = vec_sub(psi, phi);
    let lhs = vnorm(&diff);
    // (ψ-φ)μ† is rank one, so its trace norm is the product of the 2-norms.
    let outer = ComplexMatrix::outer(&diff, mu);
    let rhs = crate::numkernel::trace_norm(&outer) / vnorm(mu);
    (lhs, rhs)
}
