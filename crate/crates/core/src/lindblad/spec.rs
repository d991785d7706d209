use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkernel::{herm_eig, kron, spectral_norm, unvec, vec, ComplexMatrix, KrausSet, HERMITIAN_TOL};
use crate::odecore::{evaluation_grid, TimeDependentMatrix};

use super::cptp::{check_state, CptpReport};

/// Hamiltonian plus jump operators of a Lindbladian
/// `L[ρ] = -i[H, ρ] + Σ (F ρ F† - ½{ρ, F†F})`.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    pub h: TimeDependentMatrix,
    pub jumps: Vec<TimeDependentMatrix>,
}

impl LindbladSpec {
    pub fn new(h: TimeDependentMatrix, jumps: Vec<TimeDependentMatrix>) -> Result<Self> {
        let d = h.rows();
        if h.cols() != d {
            return Err(Error::NotSquare { rows: d, cols: h.cols() });
        }
        if let Some(f) = jumps.iter().find(|f| f.rows() != d || f.cols() != d) {
            return Err(Error::ShapeMismatch(format!(
                "jump operator is {}x{}, Hamiltonian is {d}x{d}",
                f.rows(),
                f.cols()
            )));
        }
        for t in evaluation_grid(&h, 1.0, 8) {
            let residual = h.at(t).hermitian_residual();
            if residual > HERMITIAN_TOL * h.at(t).max_abs().max(1.0) {
                return Err(Error::NotHermitian { residual });
            }
        }
        Ok(Self { h, jumps })
    }

    /// Constant Hamiltonian and jumps.
    pub fn constant(h: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self> {
        Self::new(h.into(), jumps.into_iter().map(Into::into).collect())
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn is_time_independent(&self) -> bool {
        self.h.is_constant() && self.jumps.iter().all(TimeDependentMatrix::is_constant)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.h.breakpoints();
        for f in &self.jumps {
            b.extend(f.breakpoints());
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn generator_at(&self, t: f64) -> Generator {
        Generator::new(self.h.at(t), self.jumps.iter().map(|f| f.at(t)).collect())
    }

    /// Lindbladian normalization `‖H‖ + ½ Σ ‖F‖²`, maximized over `[0, t_end]`.
    pub fn alpha(&self, t_end: f64) -> f64 {
        self.alpha_over(0.0, t_end)
    }

    /// As [`alpha`](Self::alpha) over `[t0, t1]`: sampled on a uniform grid plus
    /// the breakpoints inside the interval.
    pub fn alpha_over(&self, t0: f64, t1: f64) -> f64 {
        if self.is_time_independent() {
            return self.generator_at(t0).alpha();
        }
        let mut times: Vec<f64> = (0..=16).map(|k| t0 + (t1 - t0) * k as f64 / 16.0).collect();
        times.extend(self.breakpoints().into_iter().filter(|b| (t0..=t1).contains(b)));
        times
            .into_iter()
            .map(|t| self.generator_at(t).alpha())
            .fold(0.0, f64::max)
    }
}

/// The generator frozen at one instant, with `Σ F†F` precomputed.
#[derive(Clone, Debug)]
pub struct Generator {
    h: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    jumps_adj: Vec<ComplexMatrix>,
    damping: ComplexMatrix,
    /// `-iH - ½Σ F†F` and its adjoint.
    left: ComplexMatrix,
    left_adj: ComplexMatrix,
}

impl Generator {
    pub fn new(h: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Self {
        let d = h.rows();
        let jumps_adj: Vec<ComplexMatrix> = jumps.iter().map(ComplexMatrix::adjoint).collect();
        let mut damping = ComplexMatrix::zeros(d, d);
        for (f, fa) in jumps.iter().zip(&jumps_adj) {
            damping += &(fa * f);
        }
        let left = &h.scale(C64::new(0.0, -1.0)) - &damping.scale_re(0.5);
        let left_adj = left.adjoint();
        Self {
            h,
            jumps,
            jumps_adj,
            damping,
            left,
            left_adj,
        }
    }

    /// `L[ρ]` for any square matrix `ρ`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &self.left * rho;
        out += &(rho * &self.left_adj);
        for (f, fa) in self.jumps.iter().zip(&self.jumps_adj) {
            out += &(&(f * rho) * fa);
        }
        out
    }

    pub fn alpha(&self) -> f64 {
        spectral_norm(&self.h) + 0.5 * self.jumps.iter().map(|f| spectral_norm(f).powi(2)).sum::<f64>()
    }

    /// Liouvillian in the row-major vec convention:
    /// `-i(H⊗I - I⊗Hᵀ) + Σ (F⊗F̄ - ½F†F⊗I - ½I⊗FᵀF̄)`.
    pub fn liouvillian(&self) -> ComplexMatrix {
        let d = self.h.rows();
        let id = ComplexMatrix::identity(d);
        let i = C64::new(0.0, 1.0);
        let mut l = (&kron(&self.h, &id) - &kron(&id, &self.h.transpose())).scale(-i);
        for f in &self.jumps {
            l += &kron(f, &f.conj());
        }
        l += &kron(&self.damping, &id).scale_re(-0.5);
        l += &kron(&id, &self.damping.transpose()).scale_re(-0.5);
        l
    }
}

/// A density matrix that passed [`check_state`].
#[derive(Clone, Debug)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let report = check_state(&m);
        if !report.pass {
            return Err(Error::Cptp(report.summary()));
        }
        Ok(Self(m))
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        Self::new(ComplexMatrix::outer(psi, psi))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(ComplexMatrix::identity(d).scale_re(1.0 / d as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn report(&self) -> CptpReport {
        check_state(&self.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        herm_eig(&self.0).map(|e| e.min()).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuperoperatorKind {
    Generator,
    Propagator,
}

/// `d² x d²` matrix acting on row-major `vec(ρ)`.
#[derive(Clone, Debug)]
pub struct SuperoperatorMatrix {
    pub matrix: ComplexMatrix,
    pub kind: SuperoperatorKind,
}

impl SuperoperatorMatrix {
    pub fn dim(&self) -> usize {
        (self.matrix.rows() as f64).sqrt().round() as usize
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        unvec(&self.matrix.mat_vec(&vec(rho)))
    }

    /// `max|vec(I)† S - target|` where `target` is `0` for generators and
    /// `vec(I)†` for propagators.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim();
        let dd = d * d;
        let mut worst: f64 = 0.0;
        for col in 0..dd {
            let s: C64 = (0..d).map(|k| self.matrix[(k * d + k, col)]).sum();
            let target = match self.kind {
                SuperoperatorKind::Generator => 0.0,
                SuperoperatorKind::Propagator if col % (d + 1) == 0 => 1.0,
                SuperoperatorKind::Propagator => 0.0,
            };
            worst = worst.max((s - target).norm());
        }
        worst
    }

    pub fn kraus(&self) -> Result<KrausSet> {
        crate::numkernel::choi_kraus(&self.matrix)
    }
}

/// `L[ρ]` at time `t`.
pub fn apply_generator(spec: &LindbladSpec, rho: &ComplexMatrix, t: f64) -> ComplexMatrix {
    spec.generator_at(t).apply(rho)
}

/// Matrix of the Lindbladian at time `t`.
pub fn liouvillian_matrix(spec: &LindbladSpec, t: f64) -> SuperoperatorMatrix {
    SuperoperatorMatrix {
        matrix: spec.generator_at(t).liouvillian(),
        kind: SuperoperatorKind::Generator,
    }
}
