//! Dense complex linear algebra used by every other module.
//!
//! Vectorization is row-major throughout: `vec(rho)[i * d + j] = rho[i][j]`,
//! so that `vec(A rho B) = (A ⊗ Bᵀ) vec(rho)`.

mod matrix;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use matrix::{
    inner, kron_vec, normalized, phase_aligned_distance, vec_scale, vec_sub, vnorm, ComplexMatrix,
};

/// Tolerance on `max|M - M†|` (relative to `max(1, max|M|)`) for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL` mark an input as not positive semi-definite.
pub const PSD_TOL: f64 = 1e-8;

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Unitary whose columns are the eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// `Q f(Λ) Q†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        self.map_complex(|x| C64::new(f(x), 0.0))
    }

    pub fn map_complex(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let q = &self.eigenvectors;
        let d = self.eigenvalues.len();
        let fl: Vec<C64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|k| q[(i, k)] * fl[k] * q[(j, k)].conj()).sum()
        })
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let q = &self.eigenvectors;
        (0..q.rows()).map(|i| q[(i, k)]).collect()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn scale_of(m: &ComplexMatrix) -> f64 {
    m.max_abs().max(1.0)
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first.
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    m.ensure_square()?;
    if !m.is_finite() {
        return Err(Error::NonFinite("herm_eig"));
    }
    let residual = m.hermitian_residual();
    if residual > HERMITIAN_TOL * scale_of(m) {
        return Err(Error::NotHermitian { residual });
    }
    let sym = m.hermitian_part();
    let eig = nalgebra::SymmetricEigen::new(sym.to_nalgebra());
    let d = m.rows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Unique positive semi-definite square root. Eigenvalues in `[-1e-8, 0)` are
/// treated as round-off and clipped.
pub fn psd_sqrt(b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(b)?;
    let lowest = eig.min();
    if lowest < -PSD_TOL * eig.max().abs().max(1.0) {
        return Err(Error::NotPsd { eigenvalue: lowest });
    }
    Ok(eig.map(|x| x.max(0.0).sqrt()))
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a truncated Taylor core.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = m.ensure_square()?;
    if !m.is_finite() {
        return Err(Error::NonFinite("expm"));
    }
    let norm = one_norm(m);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.scale_re(0.5f64.powi(squarings));

    let mut sum = ComplexMatrix::identity(d);
    let mut term = ComplexMatrix::identity(d);
    for k in 1..=40 {
        term = (&term * &scaled).scale_re(1.0 / k as f64);
        sum += &term;
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("expm result"));
    }
    Ok(sum)
}

/// Row-major vectorization.
pub fn vec(rho: &ComplexMatrix) -> Vec<C64> {
    rho.as_slice().to_vec()
}

/// Inverse of [`vec`] for a square `d x d` matrix.
pub fn unvec(v: &[C64]) -> Result<ComplexMatrix> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} is not a square matrix",
            v.len()
        )));
    }
    ComplexMatrix::from_vec(d, d, v.to_vec())
}

/// Kronecker (tensor) product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Kraus representation `rho -> Σ K rho K†`.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
        for k in &self.operators {
            out += &(&(k * rho) * &k.adjoint());
        }
        out
    }

    /// `max|Σ K†K - I|`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.operators[0].cols();
        let mut acc = ComplexMatrix::zeros(d, d);
        for k in &self.operators {
            acc += &(&k.adjoint() * k);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(d))
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }
}

/// Choi matrix `C[(a,i),(b,j)] = Φ[(a,b),(i,j)]` of a superoperator in the
/// row-major vec convention.
pub fn choi_matrix(phi: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dd = phi.ensure_square()?;
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd {
        return Err(Error::ShapeMismatch(format!(
            "superoperator of size {dd} is not d^2 x d^2"
        )));
    }
    Ok(ComplexMatrix::from_fn(dd, dd, |r, c| {
        let (a, i) = (r / d, r % d);
        let (b, j) = (c / d, c % d);
        phi[(a * d + b, i * d + j)]
    }))
}

/// Kraus operators from the eigendecomposition of the Choi matrix. Eigenvalues
/// below `1e-12` of the largest are dropped.
pub fn choi_kraus(phi: &ComplexMatrix) -> Result<KrausSet> {
    let choi = choi_matrix(phi)?;
    let d = (phi.rows() as f64).sqrt().round() as usize;
    let eig = herm_eig(&choi)?;
    let top = eig.max();
    if eig.min() < -1e-9 * top.max(1.0) {
        return Err(Error::NotCompletelyPositive {
            eigenvalue: eig.min(),
        });
    }
    let mut operators = Vec::new();
    for k in (0..eig.eigenvalues.len()).rev() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 1e-12 * top {
            continue;
        }
        let v = eig.eigenvector(k);
        let s = lambda.sqrt();
        operators.push(ComplexMatrix::from_fn(d, d, |a, i| v[a * d + i] * s));
    }
    Ok(KrausSet { operators })
}

/// Spectral, trace and Frobenius norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixNorms {
    pub spectral: f64,
    pub trace: f64,
    pub frobenius: f64,
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let svd = m.to_nalgebra().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn norms(m: &ComplexMatrix) -> MatrixNorms {
    let s = singular_values(m);
    MatrixNorms {
        spectral: s.first().copied().unwrap_or(0.0),
        trace: s.iter().sum(),
        frobenius: m.frobenius_norm(),
    }
}

pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` of two states.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let s = psd_sqrt(rho)?;
    let inner = (&(&s * sigma) * &s).hermitian_part();
    let eig = herm_eig(&inner)?;
    let root: f64 = eig.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok(root * root)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::from_rows(&[vec![C64::new(0.0, 0.0), -i], vec![i, C64::new(0.0, 0.0)]])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

/// `|0><1|` on one qubit, the lowering operator.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])
}
