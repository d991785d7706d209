//! Non-diagonal density-matrix encoding of a linear ODE.
//!
//! For `V = B + iA` with `B ⪰ 0`, the Lindbladian with `H = diag(A, 0)` and
//! the single jump `F = diag(√(2B), 0)` maps the upper-right block `X` of a
//! two-block state to `e^{-VT} X`. Starting from
//! `ρ₀ = ½(|0⟩|μ₀⟩ + |1⟩|φ₀⟩)(h.c.)` the block at time `T` is `½ μ(T) ⟨φ₀|`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{propagate_interval, propagate_with_stats, DensityMatrix, LindbladSpec, PropagationStats};
use crate::numkernel::{herm_eig, inner, normalized, vnorm, ComplexMatrix};
use crate::odecore::{
    check_semi_dissipative, hermitian_split, midpoint_nodes, reference_solve, OdeProblem, TimeDependentMatrix,
    DEFAULT_GRID, UNIT_TOL,
};

/// Extraction is refused below this solution norm.
pub const ETA_FLOOR: f64 = 1e-8;
/// Allowed `‖η μ_T - μ_ref(T)‖₂` for the exact-jump pipeline.
pub const REFERENCE_TOL: f64 = 1e-7;
const REFERENCE_RTOL: f64 = 1e-10;

/// Single-ancilla encoding with markers `|0⟩`, `|1⟩` and factor `½`.
#[derive(Clone, Debug)]
pub struct NdmeEncoding {
    pub ancillas: usize,
    pub s1: usize,
    pub s2: usize,
    pub gamma: f64,
    pub rho: DensityMatrix,
}

impl NdmeEncoding {
    pub fn new(rho: DensityMatrix) -> Self {
        Self {
            ancillas: 1,
            s1: 0,
            s2: 1,
            gamma: 0.5,
            rho,
        }
    }

    pub fn block(&self) -> ComplexMatrix {
        extract_block(self.rho.matrix(), self.s1, self.s2)
    }
}

/// Upper-right block and the norm `‖2·block·φ₀‖` it encodes.
#[derive(Clone, Debug)]
pub struct BlockReadout {
    pub block: ComplexMatrix,
    pub eta: f64,
}

impl BlockReadout {
    /// `2·block·φ₀`, the unnormalized solution.
    pub fn from_state(rho: &ComplexMatrix, phi0: &[C64]) -> Self {
        let block = extract_block(rho, 0, 1);
        let eta = vnorm(&block.mat_vec(phi0)) * 2.0;
        Self { block, eta }
    }

    pub fn solution(&self, phi0: &[C64]) -> Vec<C64> {
        self.block.mat_vec(phi0).into_iter().map(|z| z * 2.0).collect()
    }
}

fn zero_pad(m: &ComplexMatrix, lower: bool) -> ComplexMatrix {
    let z = ComplexMatrix::zeros(m.rows(), m.cols());
    if lower {
        ComplexMatrix::direct_sum(&z, m)
    } else {
        ComplexMatrix::direct_sum(m, &z)
    }
}

fn embed(m: &TimeDependentMatrix, lower: bool, name: &str) -> TimeDependentMatrix {
    let d = m.rows();
    m.derive(name, 2 * d, 2 * d, move |x| zero_pad(&x, lower))
}

fn build(a: &TimeDependentMatrix, jumps: &[TimeDependentMatrix], lower: bool) -> Result<LindbladSpec> {
    let d = a.rows();
    if let Some(g) = jumps.iter().find(|g| g.rows() != d || g.cols() != d) {
        return Err(Error::ShapeMismatch(format!(
            "jump is {}x{}, A is {d}x{d}",
            g.rows(),
            g.cols()
        )));
    }
    LindbladSpec::new(
        embed(a, lower, "diag(A, 0)"),
        jumps.iter().map(|g| embed(g, lower, "diag(G, 0)")).collect(),
    )
}

/// `H = diag(A, 0)`, `F_i = diag(G_i, 0)` on one extra qubit.
pub fn dilate(a: &TimeDependentMatrix, jumps: &[TimeDependentMatrix]) -> Result<LindbladSpec> {
    build(a, jumps, false)
}

/// `H' = diag(0, A)`, `F'_i = diag(0, G_i)`, the spec of the second stage.
pub fn dilate_lower(a: &TimeDependentMatrix, jumps: &[TimeDependentMatrix]) -> Result<LindbladSpec> {
    build(a, jumps, true)
}

/// `A(t)` and the single jump `G(t) = √(2B(t))`.
pub fn dissipative_parts(v: &TimeDependentMatrix) -> (TimeDependentMatrix, TimeDependentMatrix) {
    let d = v.rows();
    let a = v.derive("A", d, d, |m| hermitian_split(&m).0);
    let g = v.derive("sqrt(2B)", d, d, |m| {
        let b = hermitian_split(&m).1;
        // Clipping only touches rounding-level negatives; semi-dissipativity is
        // checked before any propagation.
        herm_eig(&b.scale_re(2.0))
            .expect("Hermitian part is Hermitian")
            .map(|x| x.max(0.0).sqrt())
    });
    (a, g)
}

/// `½(|0⟩|μ₀⟩ + |1⟩|φ₀⟩)(⟨0|⟨μ₀| + ⟨1|⟨φ₀|)`.
pub fn initial_state(mu0: &[C64], phi0: &[C64]) -> Result<DensityMatrix> {
    if mu0.len() != phi0.len() {
        return Err(Error::ShapeMismatch(format!(
            "mu0 has length {}, phi0 has length {}",
            mu0.len(),
            phi0.len()
        )));
    }
    for v in [mu0, phi0] {
        let norm = vnorm(v);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotNormalized { norm });
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi: Vec<C64> = mu0.iter().chain(phi0).map(|z| z * s).collect();
    DensityMatrix::new(ComplexMatrix::outer(&psi, &psi).hermitian_part())
}

/// `(⟨s1| ⊗ I) ρ (|s2⟩ ⊗ I)` for a single marker qubit, without rescaling.
/// `s1 == s2` returns a diagonal block.
pub fn extract_block(rho: &ComplexMatrix, s1: usize, s2: usize) -> ComplexMatrix {
    let d = rho.rows() / 2;
    rho.block(s1 * d, s2 * d, d, d)
}

/// Output of the homogeneous pipeline.
#[derive(Clone, Debug)]
pub struct HomogeneousSolution {
    /// Normalized `μ(T)`.
    pub mu_t: Vec<C64>,
    pub eta: f64,
    pub rho_t: DensityMatrix,
    pub spec: LindbladSpec,
    pub stats: PropagationStats,
    /// `‖η μ_T - μ_ref(T)‖₂`, when checked.
    pub reference_error: Option<f64>,
}

impl HomogeneousSolution {
    /// `η μ_T`.
    pub fn unnormalized(&self) -> Vec<C64> {
        self.mu_t.iter().map(|z| z * self.eta).collect()
    }
}

fn ensure_homogeneous(p: &OdeProblem) -> Result<()> {
    if p.b.is_some() {
        return Err(Error::InvalidArgument(
            "problem has a source term; use inhomogeneous_solve".into(),
        ));
    }
    check_semi_dissipative(&p.v, p.t_end, DEFAULT_GRID)?.into_result()
}

/// Dilates `V`, evolves `ρ₀` with `φ₀ = μ₀`, and reads `μ(T)` off the block.
/// The result is checked against the adaptive reference solver.
pub fn solve_homogeneous(p: &OdeProblem) -> Result<HomogeneousSolution> {
    ensure_homogeneous(p)?;
    let (a, g) = dissipative_parts(&p.v);
    solve_with_jumps(p, &a, &[g], None, Some(REFERENCE_TOL))
}

/// As [`solve_homogeneous`] with caller-supplied `A(t)` and jumps, an
/// optional `φ₀` (default `μ₀`) and an optional reference tolerance.
pub fn solve_with_jumps(
    p: &OdeProblem,
    a: &TimeDependentMatrix,
    jumps: &[TimeDependentMatrix],
    phi0: Option<&[C64]>,
    reference_tol: Option<f64>,
) -> Result<HomogeneousSolution> {
    let spec = dilate(a, jumps)?;
    let phi0 = phi0.unwrap_or(&p.mu0);
    let rho0 = initial_state(&p.mu0, phi0)?;
    let (rho_t, stats) = propagate_with_stats(&spec, &rho0, p.t_end, 1)?;
    let readout = BlockReadout::from_state(rho_t.matrix(), phi0);
    if readout.eta < ETA_FLOOR {
        return Err(Error::VanishingNorm { eta: readout.eta });
    }
    let unnormalized = readout.solution(phi0);
    let mu_t = normalized(&unnormalized);
    let reference_error = match reference_tol {
        Some(tol) => {
            let reference = reference_solve(p, REFERENCE_RTOL)?;
            let err = vnorm(&crate::numkernel::vec_sub(&unnormalized, reference.final_state()));
            if err > tol {
                return Err(Error::ReferenceMismatch { error: err, tolerance: tol });
            }
            Some(err)
        }
        None => None,
    };
    Ok(HomogeneousSolution {
        mu_t,
        eta: readout.eta,
        rho_t,
        spec,
        stats,
        reference_error,
    })
}

/// Evolves `ρ_T` for a further `T` under `H' = diag(0, A)`, `F' = diag(0, G)`.
/// The upper-right block becomes `½η²|μ_T⟩⟨μ_T|`.
pub fn second_stage(
    rho_t: &DensityMatrix,
    a: &TimeDependentMatrix,
    jumps: &[TimeDependentMatrix],
    t_end: f64,
) -> Result<DensityMatrix> {
    let spec = dilate_lower(a, jumps)?;
    Ok(propagate_with_stats(&spec, rho_t, t_end, 1)?.0)
}

/// [`second_stage`] with the jump `√(2B)` derived from `V`.
pub fn second_stage_for(p: &OdeProblem, rho_t: &DensityMatrix) -> Result<DensityMatrix> {
    let (a, g) = dissipative_parts(&p.v);
    second_stage(rho_t, &a, &[g], p.t_end)
}

/// Inhomogeneous solution as the homogeneous block plus `m` midpoint branches,
/// each an encoding started at `t_j` from `b(t_j)/‖b(t_j)‖`. Returns the
/// normalized solution and its norm.
pub fn inhomogeneous_solve(p: &OdeProblem, m: usize) -> Result<(Vec<C64>, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    check_semi_dissipative(&p.v, p.t_end, DEFAULT_GRID)?.into_result()?;
    let (a, g) = dissipative_parts(&p.v);
    let spec = dilate(&a, &[g])?;
    let d = p.dim();

    let branch = |mu: &[C64], t0: f64| -> Result<Vec<C64>> {
        let rho0 = initial_state(mu, mu)?;
        let (rho, _) = propagate_interval(&spec, rho0.matrix(), t0, p.t_end, 1)?;
        Ok(BlockReadout::from_state(&rho.hermitian_part(), mu).solution(mu))
    };

    let mut total = branch(&p.mu0, 0.0)?;
    if p.b.is_some() {
        let weight = p.t_end / m as f64;
        let parts: Vec<Vec<C64>> = midpoint_nodes(p.t_end, m)
            .into_par_iter()
            .map(|tj| {
                let bj = p.source_at(tj).expect("source present");
                let norm = vnorm(&bj);
                if norm == 0.0 {
                    return Ok(vec![C64::new(0.0, 0.0); d]);
                }
                let out = branch(&normalized(&bj), tj)?;
                Ok(out.into_iter().map(|z| z * (norm * weight)).collect())
            })
            .collect::<Result<_>>()?;
        for part in &parts {
            for (acc, x) in total.iter_mut().zip(part) {
                *acc += x;
            }
        }
    }
    let eta = vnorm(&total);
    if eta < ETA_FLOOR {
        return Err(Error::VanishingNorm { eta });
    }
    Ok((normalized(&total), eta))
}

/// `|⟨a|b⟩|`, the phase-insensitive overlap of two unit vectors.
pub fn overlap(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm()
}
