use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{trace_norm, vec, ComplexMatrix};
use crate::odecore::segments;

use super::cptp::{check_channel, check_state};
use super::spec::{DensityMatrix, Generator, LindbladSpec, SuperoperatorKind, SuperoperatorMatrix};

/// Step-halving stops once successive results differ by less than this in
/// trace norm.
pub const HALVING_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 18;
const TAYLOR_CUTOFF: f64 = 1e-17;
const MAX_TAYLOR_TERMS: usize = 80;
const PARALLEL_MIN: usize = 4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropagationStats {
    /// Exponential substeps in the returned result.
    pub substeps: usize,
    /// Number of step halvings performed (zero for constant specs).
    pub refinements: usize,
    /// Trace-norm change at the last halving (zero for constant specs).
    pub final_change: f64,
    /// Generator applications across all attempts.
    pub generator_calls: usize,
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub states: Vec<ComplexMatrix>,
    pub stats: PropagationStats,
}

/// `exp(hL) ρ` by a truncated Taylor series; `h·α ≤ 1` keeps it short.
fn taylor_action(gen: &Generator, rho: &ComplexMatrix, h: f64) -> (ComplexMatrix, usize) {
    let mut sum = rho.clone();
    let mut term = rho.clone();
    let mut calls = 0;
    for k in 1..=MAX_TAYLOR_TERMS {
        term = gen.apply(&term).scale_re(h / k as f64);
        calls += 1;
        sum += &term;
        if term.max_abs() <= TAYLOR_CUTOFF * sum.max_abs().max(1e-300) {
            break;
        }
    }
    (sum, calls)
}

fn constant_action(spec: &LindbladSpec, ms: &[ComplexMatrix], t0: f64, t1: f64, steps: usize) -> Propagation {
    let dt = t1 - t0;
    let gen = spec.generator_at(t0);
    let s = steps.max((dt * gen.alpha()).ceil() as usize).max(1);
    let h = dt / s as f64;
    let results: Vec<(ComplexMatrix, usize)> = ms
        .par_iter()
        .map(|m| {
            let mut cur = m.clone();
            let mut calls = 0;
            for _ in 0..s {
                let (next, c) = taylor_action(&gen, &cur, h);
                cur = next;
                calls += c;
            }
            (cur, calls)
        })
        .collect();
    let generator_calls = results.iter().map(|r| r.1).sum();
    Propagation {
        states: results.into_iter().map(|r| r.0).collect(),
        stats: PropagationStats {
            substeps: s,
            refinements: 0,
            final_change: 0.0,
            generator_calls,
        },
    }
}

/// Substep grid with about `n` steps overall, aligned to the breakpoints; each
/// level halves every substep of the level below.
fn substep_grid(spec: &LindbladSpec, t0: f64, t1: f64, n: usize, level: u32) -> Vec<(f64, f64)> {
    let total = t1 - t0;
    let mut out = Vec::new();
    for (a, b) in segments(&spec.breakpoints(), t0, t1) {
        let k = (((n as f64) * (b - a) / total).ceil().max(1.0) as usize) << level;
        let h = (b - a) / k as f64;
        for j in 0..k {
            let lo = a + j as f64 * h;
            let hi = if j + 1 == k { b } else { lo + h };
            out.push((lo, hi));
        }
    }
    out
}

fn midpoint_product(
    spec: &LindbladSpec,
    ms: &[ComplexMatrix],
    grid: &[(f64, f64)],
    calls: &mut usize,
) -> Vec<ComplexMatrix> {
    let mut cur = ms.to_vec();
    for &(a, b) in grid {
        let gen = spec.generator_at(0.5 * (a + b));
        let stepped: Vec<(ComplexMatrix, usize)> = if cur.len() < PARALLEL_MIN {
            cur.iter().map(|m| taylor_action(&gen, m, b - a)).collect()
        } else {
            cur.par_iter().map(|m| taylor_action(&gen, m, b - a)).collect()
        };
        *calls += stepped.iter().map(|s| s.1).sum::<usize>();
        cur = stepped.into_iter().map(|s| s.0).collect();
    }
    cur
}

/// Evolves every matrix in `ms` from `t0` to `t1` under the same generator.
/// Constant specs use one Taylor action per segment with `h·α ≤ 1`; time-dependent
/// specs use midpoint exponentials with step halving until the worst trace-norm
/// change drops below [`HALVING_TOL`].
pub fn propagate_many(
    spec: &LindbladSpec,
    ms: &[ComplexMatrix],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Propagation> {
    let d = spec.dim();
    if let Some(m) = ms.iter().find(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::ShapeMismatch(format!(
            "state is {}x{}, spec acts on dimension {d}",
            m.rows(),
            m.cols()
        )));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid interval [{t0}, {t1}]")));
    }
    if t1 == t0 {
        return Ok(Propagation {
            states: ms.to_vec(),
            stats: PropagationStats::default(),
        });
    }
    if spec.is_time_independent() {
        return Ok(constant_action(spec, ms, t0, t1, steps));
    }
    let total = t1 - t0;
    let alpha = spec.alpha_over(t0, t1);
    let n = steps.max((total * alpha).ceil() as usize).max(1);
    let mut calls = 0;
    let mut prev = midpoint_product(spec, ms, &substep_grid(spec, t0, t1, n, 0), &mut calls);
    let mut change = f64::INFINITY;
    let mut refinements = 0;
    while refinements < MAX_REFINEMENTS {
        refinements += 1;
        let grid = substep_grid(spec, t0, t1, n, refinements as u32);
        let next = midpoint_product(spec, ms, &grid, &mut calls);
        change = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| trace_norm(&(b - a)))
            .fold(0.0, f64::max);
        prev = next;
        if change < HALVING_TOL {
            return Ok(Propagation {
                states: prev,
                stats: PropagationStats {
                    substeps: grid.len(),
                    refinements,
                    final_change: change,
                    generator_calls: calls,
                },
            });
        }
    }
    Err(Error::InvalidArgument(format!(
        "step halving did not reach {HALVING_TOL:e} after {refinements} refinements (last change {change:.3e})"
    )))
}

/// Propagates a single matrix, which need not be a state, over `[t0, t1]`.
pub fn propagate_interval(
    spec: &LindbladSpec,
    m: &ComplexMatrix,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(ComplexMatrix, PropagationStats)> {
    let mut p = propagate_many(spec, std::slice::from_ref(m), t0, t1, steps)?;
    Ok((p.states.pop().expect("one input"), p.stats))
}

/// `ρ(T)` from `ρ(0) = ρ0`, validated as a state.
pub fn propagate(spec: &LindbladSpec, rho0: &DensityMatrix, t: f64, steps: usize) -> Result<DensityMatrix> {
    propagate_with_stats(spec, rho0, t, steps).map(|(rho, _)| rho)
}

pub fn propagate_with_stats(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    t: f64,
    steps: usize,
) -> Result<(DensityMatrix, PropagationStats)> {
    let (rho, stats) = propagate_interval(spec, rho0.matrix(), 0.0, t, steps)?;
    // Removes rounding asymmetry so that off-diagonal blocks are exact adjoints.
    let rho = rho.hermitian_part();
    let report = check_state(&rho);
    if !report.pass {
        return Err(Error::Cptp(report.summary()));
    }
    Ok((DensityMatrix::new(rho)?, stats))
}

/// The propagator `Φ` over `[0, T]`, assembled column by column from the
/// evolution of the matrix units `E_ij`.
pub fn propagator_channel(spec: &LindbladSpec, t: f64) -> Result<SuperoperatorMatrix> {
    let d = spec.dim();
    let units: Vec<ComplexMatrix> = (0..d * d)
        .map(|k| {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(k / d, k % d)] = 1.0.into();
            e
        })
        .collect();
    let evolved = propagate_many(spec, &units, 0.0, t, 1)?.states;
    let dd = d * d;
    let mut phi = ComplexMatrix::zeros(dd, dd);
    for (col, m) in evolved.iter().enumerate() {
        for (row, z) in vec(m).into_iter().enumerate() {
            phi[(row, col)] = z;
        }
    }
    let report = check_channel(&phi);
    if !report.pass {
        return Err(Error::NotCompletelyPositive {
            eigenvalue: report.min_eigenvalue,
        });
    }
    Ok(SuperoperatorMatrix {
        matrix: phi,
        kind: SuperoperatorKind::Propagator,
    })
}
