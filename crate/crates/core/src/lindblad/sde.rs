use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{spectral_norm, ComplexMatrix};

pub const DEFAULT_TRAJECTORIES: usize = 10_000;

/// `(1/N) Σ ψψ†` over trajectories, with a componentwise standard error.
#[derive(Clone, Debug)]
pub struct SdeEnsemble {
    pub mean: ComplexMatrix,
    /// Row-major `d x d`; entry `(i, j)` is `sqrt((Var Re + Var Im) / N)`.
    pub stderr: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub trajectories: usize,
}

impl SdeEnsemble {
    pub fn stderr_at(&self, i: usize, j: usize) -> f64 {
        self.stderr[i * self.mean.cols() + j]
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }
}

/// `min(0.01, 0.1/‖H_eff‖)`.
pub fn default_dt(h_eff: &ComplexMatrix) -> f64 {
    let n = spectral_norm(h_eff);
    if n == 0.0 {
        0.01
    } else {
        (0.1 / n).min(0.01)
    }
}

/// Euler–Maruyama for `dψ = -i H_eff ψ dt + Σ G_k ψ dW_k` with real Wiener
/// increments. Trajectory `k` draws from ChaCha8 stream `k` of `seed`, so the
/// result does not depend on thread scheduling.
pub fn sde_ensemble(
    h_eff: &ComplexMatrix,
    jumps: &[ComplexMatrix],
    psi0: &[C64],
    t: f64,
    dt: f64,
    trajectories: usize,
    seed: u64,
) -> Result<SdeEnsemble> {
    let d = h_eff.ensure_square()?;
    if psi0.len() != d || jumps.iter().any(|g| g.rows() != d || g.cols() != d) {
        return Err(Error::ShapeMismatch(format!("SDE operators must act on dimension {d}")));
    }
    if !(dt > 0.0) || !(t >= 0.0) || trajectories == 0 {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0, T >= 0 and at least one trajectory (dt = {dt}, T = {t}, N = {trajectories})"
        )));
    }
    if dt * spectral_norm(h_eff) > 0.1 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "dt·‖H_eff‖ = {:.3e} exceeds 0.1",
            dt * spectral_norm(h_eff)
        )));
    }
    let steps = (t / dt).ceil().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let sqrt_h = h.sqrt();
    // ψ ← (I - i H_eff h) ψ + Σ G_k ψ ΔW_k
    let mut drift = ComplexMatrix::identity(d);
    drift += &h_eff.scale(C64::new(0.0, -h));

    let outers: Vec<ComplexMatrix> = (0..trajectories)
        .into_par_iter()
        .map(|k| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k as u64);
            let mut psi = psi0.to_vec();
            for _ in 0..steps {
                let mut next = drift.mat_vec(&psi);
                for g in jumps {
                    let w: f64 = r.sample::<f64, _>(StandardNormal) * sqrt_h;
                    for (n, z) in next.iter_mut().zip(g.mat_vec(&psi)) {
                        *n += z * w;
                    }
                }
                psi = next;
            }
            ComplexMatrix::outer(&psi, &psi)
        })
        .collect();

    let n = trajectories as f64;
    let mut mean = ComplexMatrix::zeros(d, d);
    for o in &outers {
        mean += o;
    }
    let mean = mean.scale_re(1.0 / n);
    let mut var = vec![0.0; d * d];
    for o in &outers {
        for (v, (x, m)) in var.iter_mut().zip(o.as_slice().iter().zip(mean.as_slice())) {
            *v += (x - m).norm_sqr();
        }
    }
    let denom = if trajectories > 1 { n - 1.0 } else { 1.0 };
    let stderr = var.into_iter().map(|v| (v / denom / n).sqrt()).collect();
    Ok(SdeEnsemble {
        mean,
        stderr,
        dt: h,
        steps,
        trajectories,
    })
}
