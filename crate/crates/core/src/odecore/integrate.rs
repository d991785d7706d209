use num_complex::Complex64 as C64;

use super::timedep::{segments, TimeDependentMatrix};
use crate::error::{Error, Result};
use crate::numkernel::ComplexMatrix;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Rhs<'a> {
    v: &'a TimeDependentMatrix,
    b: Option<&'a TimeDependentMatrix>,
    constant_v: Option<ComplexMatrix>,
}

impl Rhs<'_> {
    fn eval(&self, t: f64, y: &[C64]) -> Vec<C64> {
        let mut out = match &self.constant_v {
            Some(v) => v.mat_vec(y),
            None => self.v.at(t).mat_vec(y),
        };
        for z in out.iter_mut() {
            *z = -*z;
        }
        if let Some(b) = self.b {
            for (o, s) in out.iter_mut().zip(b.at(t).as_slice()) {
                *o += s;
            }
        }
        out
    }
}

/// Integrates `dy/dt = -V(t) y + b(t)` from `t0` to `t1` with an adaptive
/// Dormand–Prince 5(4) pair. Breakpoints of `V` and `b` are hit exactly.
/// Returns the accepted step times and states, including both endpoints.
pub fn integrate_linear(
    v: &TimeDependentMatrix,
    b: Option<&TimeDependentMatrix>,
    y0: &[C64],
    t0: f64,
    t1: f64,
    rtol: f64,
) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    if !(rtol > 0.0) {
        return Err(Error::InvalidArgument(format!("rtol must be positive, got {rtol}")));
    }
    let rhs = Rhs {
        v,
        b,
        constant_v: v.is_constant().then(|| v.at(t0)),
    };
    let mut breaks = v.breakpoints();
    if let Some(b) = b {
        breaks.extend(b.breakpoints());
    }
    let atol = rtol * 1e-3;
    let scale_v = v.max_norm(t1.max(t0)).max(1e-3);

    let mut times = vec![t0];
    let mut states = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    let mut h = (0.05 / scale_v).min((t1 - t0).abs().max(1e-300));

    for (a, z) in segments(&breaks, t0, t1) {
        let mut t = a;
        if z <= a {
            continue;
        }
        let mut k1 = rhs.eval(t, &y);
        while t < z {
            if z - t <= h * (1.0 + 1e-12) {
                h = z - t;
            }
            let mut ks: Vec<Vec<C64>> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for s in 1..7 {
                let stage: Vec<C64> = (0..y.len())
                    .map(|i| {
                        let mut acc = y[i];
                        for (j, k) in ks.iter().enumerate().take(s) {
                            if A[s][j] != 0.0 {
                                acc += k[i] * (h * A[s][j]);
                            }
                        }
                        acc
                    })
                    .collect();
                ks.push(rhs.eval(t + C[s] * h, &stage));
            }
            let y5: Vec<C64> = (0..y.len())
                .map(|i| {
                    let mut acc = y[i];
                    for (j, k) in ks.iter().enumerate() {
                        acc += k[i] * (h * B5[j]);
                    }
                    acc
                })
                .collect();
            let err = (0..y.len())
                .map(|i| {
                    let e: C64 = ks.iter().enumerate().map(|(j, k)| k[i] * (h * (B5[j] - B4[j]))).sum();
                    let sc = atol + rtol * y[i].norm().max(y5[i].norm());
                    (e.norm() / sc).powi(2)
                })
                .sum::<f64>()
                / y.len() as f64;
            let err = err.sqrt();
            if err <= 1.0 {
                t = if (z - t - h).abs() <= 1e-14 * z.abs().max(1.0) { z } else { t + h };
                y = y5;
                // FSAL: the last stage is the derivative at the new point.
                k1 = ks.pop().expect("seven stages");
                times.push(t);
                states.push(y.clone());
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
            if y.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite("reference integrator state"));
            }
        }
    }
    Ok((times, states))
}
