use crate::numkernel::{choi_matrix, herm_eig, ComplexMatrix, HERMITIAN_TOL, PSD_TOL};

pub const TRACE_TOL: f64 = 1e-10;
pub const CHANNEL_TOL: f64 = 1e-9;

/// Worst violations found by [`check_state`] or [`check_channel`].
#[derive(Clone, Debug, PartialEq)]
pub struct CptpReport {
    pub hermiticity: f64,
    /// `|Tr ρ - 1|` for states; `max|vec(I)†Φ - vec(I)†|` for channels.
    pub trace: f64,
    /// Smallest eigenvalue of the state or of the Choi matrix.
    pub min_eigenvalue: f64,
    pub pass: bool,
}

impl CptpReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: hermiticity {:.3e}, trace {:.3e}, min eigenvalue {:.3e}",
            if self.pass { "pass" } else { "fail" },
            self.hermiticity,
            self.trace,
            self.min_eigenvalue
        )
    }
}

pub fn check_state(rho: &ComplexMatrix) -> CptpReport {
    if !rho.is_square() || !rho.is_finite() {
        return CptpReport {
            hermiticity: f64::INFINITY,
            trace: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            pass: false,
        };
    }
    let hermiticity = rho.hermitian_residual();
    let trace = (rho.trace() - 1.0).norm();
    let min_eigenvalue = herm_eig(&rho.hermitian_part())
        .map(|e| e.min())
        .unwrap_or(f64::NEG_INFINITY);
    let pass = hermiticity <= HERMITIAN_TOL && trace <= TRACE_TOL && min_eigenvalue >= -PSD_TOL;
    CptpReport {
        hermiticity,
        trace,
        min_eigenvalue,
        pass,
    }
}

/// Checks a propagator `Φ` acting on row-major `vec(ρ)`.
pub fn check_channel(phi: &ComplexMatrix) -> CptpReport {
    let dd = phi.rows();
    let d = (dd as f64).sqrt().round() as usize;
    if !phi.is_square() || d * d != dd || !phi.is_finite() {
        return CptpReport {
            hermiticity: f64::INFINITY,
            trace: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            pass: false,
        };
    }
    let choi = choi_matrix(phi).expect("shape checked");
    let hermiticity = choi.hermitian_residual();
    let mut trace: f64 = 0.0;
    for col in 0..dd {
        let s: num_complex::Complex64 = (0..d).map(|k| phi[(k * d + k, col)]).sum();
        let target = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
        trace = trace.max((s - target).norm());
    }
    let min_eigenvalue = herm_eig(&choi.hermitian_part())
        .map(|e| e.min())
        .unwrap_or(f64::NEG_INFINITY);
    let pass = hermiticity <= CHANNEL_TOL && trace <= CHANNEL_TOL && min_eigenvalue >= -CHANNEL_TOL;
    CptpReport {
        hermiticity,
        trace,
        min_eigenvalue,
        pass,
    }
}
