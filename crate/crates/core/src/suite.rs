//! Seeded random instances shared by the unit tests, the acceptance suite and
//! the scaling harness.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkernel::{herm_eig, normalized, ComplexMatrix};
use crate::odecore::{OdeProblem, TimeDependentMatrix};

pub type SuiteRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut SuiteRng) -> C64 {
    let re: f64 = r.sample(StandardNormal);
    let im: f64 = r.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn random_matrix(r: &mut SuiteRng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(r))
}

/// Random Hermitian matrix rescaled to spectral norm `scale`.
pub fn random_hermitian(r: &mut SuiteRng, d: usize, scale: f64) -> ComplexMatrix {
    let h = random_matrix(r, d, d).hermitian_part();
    let eig = herm_eig(&h).expect("hermitian by construction");
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if top == 0.0 {
        return h;
    }
    h.scale_re(scale / top)
}

pub fn random_unitary(r: &mut SuiteRng, d: usize) -> ComplexMatrix {
    let h = random_matrix(r, d, d).hermitian_part();
    herm_eig(&h).expect("hermitian by construction").eigenvectors
}

pub fn random_unit_vector(r: &mut SuiteRng, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| gaussian(r)).collect();
    normalized(&v)
}

/// PSD matrix with `kernel_dim` exact zero eigenvalues and the rest drawn from
/// `[0.2, 1]`.
pub fn random_psd(r: &mut SuiteRng, d: usize, kernel_dim: usize) -> ComplexMatrix {
    let spectrum: Vec<f64> = (0..d)
        .map(|k| if k < kernel_dim { 0.0 } else { r.random_range(0.2..1.0) })
        .collect();
    psd_with_spectrum(r, &spectrum)
}

pub fn psd_with_spectrum(r: &mut SuiteRng, spectrum: &[f64]) -> ComplexMatrix {
    let q = random_unitary(r, spectrum.len());
    let lam = ComplexMatrix::from_real_diag(spectrum);
    (&(&q * &lam) * &q.adjoint()).hermitian_part()
}

/// Random density matrix of full rank.
pub fn random_density(r: &mut SuiteRng, d: usize) -> ComplexMatrix {
    let g = random_matrix(r, d, d);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    m.scale_re(1.0 / tr).hermitian_part()
}

/// Semi-dissipative `V = B + iA` with `B ⪰ 0` (kernel of dimension
/// `kernel_dim`, nonzero spectrum in `[0.2, 1]`) and `‖A‖ = a_scale`.
pub fn random_semi_dissipative(
    r: &mut SuiteRng,
    d: usize,
    kernel_dim: usize,
    a_scale: f64,
) -> ComplexMatrix {
    let b = random_psd(r, d, kernel_dim);
    let a = random_hermitian(r, d, a_scale);
    &b + &a.scale(C64::new(0.0, 1.0))
}

/// Constant-coefficient homogeneous problems: `count` instances cycling
/// through `n ∈ {1,2,3}` and `T ∈ {0.1, 1, 2}`.
pub fn constant_suite(seed: u64, count: usize) -> Vec<OdeProblem> {
    let mut r = rng(seed);
    let ns = [1usize, 2, 3];
    let ts = [0.1, 1.0, 2.0];
    (0..count)
        .map(|k| {
            let n = ns[k % 3];
            let t = ts[(k / 3) % 3];
            let d = 1 << n;
            let kernel = k % d.min(2);
            let v = random_semi_dissipative(&mut r, d, kernel, 1.0);
            let mu0 = random_unit_vector(&mut r, d);
            OdeProblem::homogeneous(n, TimeDependentMatrix::Constant(v), mu0, t)
                .expect("suite problem is valid")
        })
        .collect()
}

/// Knot-interpolated problems with four knots on `[0, T]`, `n ∈ {1, 2}`.
pub fn knot_suite(seed: u64, count: usize) -> Vec<OdeProblem> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let n = 1 + k % 2;
            let d = 1 << n;
            let t_end = [0.5, 1.0][(k / 2) % 2];
            let knots = (0..4)
                .map(|j| {
                    let t = t_end * j as f64 / 3.0;
                    (t, random_semi_dissipative(&mut r, d, 0, 1.0))
                })
                .collect();
            let v = TimeDependentMatrix::knots(knots).expect("sorted knots");
            let mu0 = random_unit_vector(&mut r, d);
            OdeProblem::homogeneous(n, v, mu0, t_end).expect("suite problem is valid")
        })
        .collect()
}
