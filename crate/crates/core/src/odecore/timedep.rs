use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkernel::{spectral_norm, ComplexMatrix};

type MatrixFn = dyn Fn(f64) -> ComplexMatrix + Send + Sync;

/// A matrix-valued function of time.
#[derive(Clone)]
pub enum TimeDependentMatrix {
    Constant(ComplexMatrix),
    /// Piecewise-linear interpolation between `(time, matrix)` knots; constant
    /// extrapolation outside the knot range.
    Knots(Vec<(f64, ComplexMatrix)>),
    /// Closed-form or derived time dependence.
    Generator(NamedGenerator),
}

/// A named closure `t -> M(t)` with the times at which it may fail to be smooth.
#[derive(Clone)]
pub struct NamedGenerator {
    pub name: String,
    rows: usize,
    cols: usize,
    breakpoints: Vec<f64>,
    f: Arc<MatrixFn>,
}

impl fmt::Debug for TimeDependentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(m) => write!(f, "Constant({}x{})", m.rows(), m.cols()),
            Self::Knots(k) => write!(f, "Knots({} knots)", k.len()),
            Self::Generator(g) => write!(f, "Generator({})", g.name),
        }
    }
}

impl From<ComplexMatrix> for TimeDependentMatrix {
    fn from(m: ComplexMatrix) -> Self {
        Self::Constant(m)
    }
}

impl TimeDependentMatrix {
    /// Knot list; times must be strictly increasing and shapes equal.
    pub fn knots(knots: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        let Some(first) = knots.first() else {
            return Err(Error::InvalidArgument("empty knot list".into()));
        };
        let shape = (first.1.rows(), first.1.cols());
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument(format!(
                    "knot times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((t, m)) = knots.iter().find(|(_, m)| (m.rows(), m.cols()) != shape) {
            return Err(Error::ShapeMismatch(format!(
                "knot at t = {t} is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                shape.0,
                shape.1
            )));
        }
        if knots.iter().any(|(t, m)| !t.is_finite() || !m.is_finite()) {
            return Err(Error::NonFinite("knot list"));
        }
        Ok(Self::Knots(knots))
    }

    pub fn generator(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        breakpoints: Vec<f64>,
        f: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Self {
        Self::Generator(NamedGenerator {
            name: name.into(),
            rows,
            cols,
            breakpoints,
            f: Arc::new(f),
        })
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Knots(knots) => interpolate(knots, t),
            Self::Generator(g) => (g.f)(t),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Self::Constant(m) => m.rows(),
            Self::Knots(k) => k[0].1.rows(),
            Self::Generator(g) => g.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Constant(m) => m.cols(),
            Self::Knots(k) => k[0].1.cols(),
            Self::Generator(g) => g.cols,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Knots(k) => k.len() == 1,
            Self::Generator(_) => false,
        }
    }

    /// Times where the function may have a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Constant(_) => Vec::new(),
            Self::Knots(k) => k.iter().map(|(t, _)| *t).collect(),
            Self::Generator(g) => g.breakpoints.clone(),
        }
    }

    /// Derived time dependence `t -> f(self(t))`, keeping the breakpoints.
    pub fn derive(
        &self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        f: impl Fn(ComplexMatrix) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Self {
        match self {
            Self::Constant(m) => Self::Constant(f(m.clone())),
            _ => {
                let src = self.clone();
                Self::generator(name, rows, cols, self.breakpoints(), move |t| f(src.at(t)))
            }
        }
    }

    /// Same function on a shifted clock: `t -> self(t + offset)`.
    pub fn shifted(&self, offset: f64) -> Self {
        if self.is_constant() || offset == 0.0 {
            return self.clone();
        }
        let src = self.clone();
        let breaks = self.breakpoints().iter().map(|b| b - offset).collect();
        Self::generator("shifted", self.rows(), self.cols(), breaks, move |t| src.at(t + offset))
    }

    /// Upper bound on `‖dM/dt‖` from knot differences; zero for constants and
    /// estimated by central differences for generators.
    pub fn derivative_bound(&self, t_end: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Knots(k) => k
                .windows(2)
                .map(|w| spectral_norm(&(&w[1].1 - &w[0].1)) / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
            Self::Generator(_) => {
                let n = 64;
                let h = (t_end / n as f64).max(1e-6);
                (0..n)
                    .map(|k| {
                        let t = (k as f64 + 0.5) * h;
                        spectral_norm(&(&self.at(t + 0.5 * h) - &self.at(t - 0.5 * h))) / h
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// `max_t ‖M(t)‖` over the standard evaluation grid.
    pub fn max_norm(&self, t_end: f64) -> f64 {
        if self.is_constant() {
            return spectral_norm(&self.at(0.0));
        }
        evaluation_grid(self, t_end, 64)
            .into_iter()
            .map(|t| spectral_norm(&self.at(t)))
            .fold(0.0, f64::max)
    }
}

fn interpolate(knots: &[(f64, ComplexMatrix)], t: f64) -> ComplexMatrix {
    if t <= knots[0].0 {
        return knots[0].1.clone();
    }
    let last = knots.len() - 1;
    if t >= knots[last].0 {
        return knots[last].1.clone();
    }
    let k = knots.partition_point(|(tk, _)| *tk <= t) - 1;
    let (t0, m0) = &knots[k];
    let (t1, m1) = &knots[k + 1];
    let w = (t - t0) / (t1 - t0);
    ComplexMatrix::from_fn(m0.rows(), m0.cols(), |i, j| {
        m0[(i, j)] * (1.0 - w) + m1[(i, j)] * C64::new(w, 0.0)
    })
}

/// `grid` uniform points on `[0, t_end]` plus every breakpoint inside it.
pub fn evaluation_grid(m: &TimeDependentMatrix, t_end: f64, grid: usize) -> Vec<f64> {
    if m.is_constant() {
        return vec![0.0];
    }
    let grid = grid.max(2);
    let mut ts: Vec<f64> = (0..grid)
        .map(|k| t_end * k as f64 / (grid - 1) as f64)
        .collect();
    ts.extend(m.breakpoints().into_iter().filter(|&b| (0.0..=t_end).contains(&b)));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Split `[t0, t1]` at the breakpoints strictly inside it.
pub fn segments(breakpoints: &[f64], t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t1)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut a = t0;
    for c in cuts {
        out.push((a, c));
        a = c;
    }
    out.push((a, t1));
    out
}
