use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Degree search gives up beyond this.
pub const DEGREE_CAP: usize = 5000;
const CERT_GRID: usize = 10_000;
const GOLDEN_ITERS: usize = 80;

/// Weight of the regularizing nodes inside `(0, Δ)`; small enough not to
/// disturb the fit on `[Δ, 1]`, large enough to keep `|P|` bounded in the gap.
fn gap_weight(eps: f64) -> f64 {
    (10.0 * eps).min(1e-2)
}

/// Odd polynomial `P(x) = Σ_k c_k T_{2k+1}(x)` approximating `½√x` on `[Δ, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OddChebyPoly {
    /// `coefficients[k]` multiplies `T_{2k+1}`.
    pub coefficients: Vec<f64>,
    pub degree: usize,
    pub delta: f64,
    /// Certified `sup_{[Δ,1]} |P(x) - ½√x|`.
    pub eps: f64,
    /// `max_{[-1,1]} |P| ≤ 1`.
    pub bound_ok: bool,
    pub max_abs: f64,
}

impl OddChebyPoly {
    /// Clenshaw evaluation; `|x| ≤ 1` is the caller's responsibility.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        clenshaw_odd(&self.coefficients, x)
    }

    /// Full Chebyshev coefficient vector `a_0..a_degree`; even entries are zero.
    pub fn chebyshev_coefficients(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.degree + 1];
        for (k, c) in self.coefficients.iter().enumerate() {
            a[2 * k + 1] = *c;
        }
        a
    }
}

/// Clenshaw recurrence over the full Chebyshev series with even coefficients
/// fixed at zero, so `P(0) = 0` and `P(-x) = -P(x)` hold exactly.
fn clenshaw_odd(c: &[f64], x: f64) -> f64 {
    let n = 2 * c.len();
    let two_x = 2.0 * x;
    let (mut b1, mut b2) = (0.0f64, 0.0f64);
    for k in (1..n).rev() {
        let a = if k % 2 == 1 { c[k / 2] } else { 0.0 };
        let b0 = two_x * b1 - b2 + a;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2
}

pub fn eval_poly(p: &OddChebyPoly, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("polynomial argument {x} outside [-1, 1]")));
    }
    Ok(p.eval_unchecked(x))
}

fn target(x: f64) -> f64 {
    0.5 * x.sqrt()
}

/// C¹ odd continuation of `½√x` into the gap, used only to regularize the fit.
fn gap_target(x: f64, delta: f64) -> f64 {
    let t = x / delta;
    0.5 * delta.sqrt() * (1.25 * t - 0.25 * t * t * t)
}

fn cheb_nodes(a: f64, b: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| {
        let th = std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
        0.5 * (a + b) + 0.5 * (b - a) * th.cos()
    })
}

fn odd_row(x: f64, k: usize) -> impl Iterator<Item = f64> {
    let th = x.clamp(-1.0, 1.0).acos();
    (0..k).map(move |j| ((2 * j + 1) as f64 * th).cos())
}

/// Least squares on `T_1, T_3, …, T_degree` over Chebyshev nodes in `[Δ, 1]`
/// (mirrored implicitly by oddness) plus lightly weighted nodes in `(0, Δ)`.
fn least_squares(delta: f64, degree: usize, eps: f64) -> Vec<f64> {
    let w = gap_weight(eps);
    let k = degree.div_ceil(2);
    // 10 positive nodes per degree, i.e. 20 per degree on the symmetric set;
    // thinned above degree 1024 to bound memory.
    let m_main = if degree <= 1024 { 10 * degree } else { 4 * degree };
    let m_main = m_main.max(2 * k + 8);
    let m_gap = (2 * k).max(32);
    let rows = m_main + m_gap;
    let mut a = DMatrix::<f64>::zeros(rows, k);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, x) in cheb_nodes(delta, 1.0, m_main).enumerate() {
        for (j, v) in odd_row(x, k).enumerate() {
            a[(i, j)] = v;
        }
        rhs[i] = target(x);
    }
    for (i, x) in cheb_nodes(0.0, delta, m_gap).enumerate() {
        let r = m_main + i;
        for (j, v) in odd_row(x, k).enumerate() {
            a[(r, j)] = w * v;
        }
        rhs[r] = w * gap_target(x, delta);
    }
    let qr = a.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let top = rhs.rows(0, k).into_owned();
    match r.solve_upper_triangular(&top) {
        Some(c) => c.iter().copied().collect(),
        None => vec![0.0; k],
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    fc.max(fd).max(f(0.5 * (a + b)))
}

/// `max_{[a,b]} f` from a mixed Chebyshev/uniform grid of `CERT_GRID` points,
/// refined by golden-section search around every near-maximal local peak.
fn grid_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = CERT_GRID / 2;
    let mut xs: Vec<f64> = cheb_nodes(a, b, half)
        .chain((0..half).map(|j| a + (b - a) * j as f64 / (half - 1) as f64))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let top = ys.iter().copied().fold(0.0, f64::max);
    let mut best = top;
    for i in 0..xs.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { ys[i - 1] };
        let right = if i + 1 == xs.len() { f64::NEG_INFINITY } else { ys[i + 1] };
        if ys[i] >= left && ys[i] >= right && ys[i] >= 0.5 * top {
            let lo = xs[i.saturating_sub(1)];
            let hi = xs[(i + 1).min(xs.len() - 1)];
            if hi > lo {
                best = best.max(golden_max(f, lo, hi));
            }
        }
    }
    best
}

/// Certified `sup_{[Δ,1]} |P(x) - ½√x|`.
pub fn certify(coefficients: &[f64], delta: f64) -> f64 {
    grid_max(&|x| (clenshaw_odd(coefficients, x) - target(x)).abs(), delta, 1.0)
}

/// `max_{[-1,1]} |P|`, using oddness to search `[0, 1]` only.
pub fn sup_norm(coefficients: &[f64]) -> f64 {
    grid_max(&|x| clenshaw_odd(coefficients, x).abs(), 0.0, 1.0)
}

fn candidate(delta: f64, degree: usize, eps: f64) -> (OddChebyPoly, bool) {
    let mut c = least_squares(delta, degree, eps);
    let mut max_abs = sup_norm(&c);
    if max_abs > 1.0 {
        let s = 1.0 / (1.0 + eps);
        c.iter_mut().for_each(|x| *x *= s);
        max_abs = sup_norm(&c);
    }
    let err = certify(&c, delta);
    let bound_ok = max_abs <= 1.0;
    let poly = OddChebyPoly {
        degree: 2 * c.len() - 1,
        coefficients: c,
        delta,
        eps: err,
        bound_ok,
        max_abs,
    };
    let ok = err <= eps && bound_ok;
    (poly, ok)
}

/// Smallest odd degree (doubling, then bisection) whose least-squares fit
/// certifies `sup_{[Δ,1]} |P - ½√x| ≤ eps` with `|P| ≤ 1` on `[-1, 1]`.
pub fn fit_odd_sqrt(delta: f64, eps: f64) -> Result<OddChebyPoly> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1/2]")));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1/2]")));
    }
    let mut lo = 1usize;
    let mut hi = 3usize;
    let mut best_err = f64::INFINITY;
    let mut passing = loop {
        let (p, ok) = candidate(delta, hi, eps);
        best_err = best_err.min(p.eps);
        if ok {
            break p;
        }
        lo = hi;
        hi = 2 * hi + 1;
        if hi > DEGREE_CAP {
            return Err(Error::DegreeCap {
                cap: DEGREE_CAP,
                achieved: best_err,
            });
        }
    };
    // Odd degrees strictly between lo and hi.
    while hi - lo > 2 {
        let mid = {
            let m = (lo + hi) / 2;
            if m.is_multiple_of(2) {
                m + 1
            } else {
                m
            }
        };
        if mid >= hi {
            break;
        }
        let (p, ok) = candidate(delta, mid, eps);
        if ok {
            hi = mid;
            passing = p;
        } else {
            lo = mid;
        }
    }
    Ok(passing)
}
