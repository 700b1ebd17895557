//! Adaptive composite Gauss–Legendre quadrature for vector-valued integrands.
//!
//! Panels are bisected until the panel estimate and the sum over its two halves
//! agree; the integrand decides how a difference vector is measured, so one
//! adaptive pass can serve many outputs that share the same node evaluations.

use crate::cx::Cx;
use crate::error::{Error, Result};
use crate::real::Real;

pub const GL_POINTS: usize = 15;
const MAX_DEPTH: u32 = 40;
const MAX_PANELS: usize = 1 << 16;

/// Gauss–Legendre rule on `[0, 1]` (nodes and weights at the working precision).
#[derive(Clone, Debug)]
pub struct GlRule<R> {
    pub nodes: Vec<R>,
    pub weights: Vec<R>,
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre<R: Real>(n: usize, x: &R) -> (R, R) {
    let one = x.lit(1.0);
    let mut p0 = one.clone();
    let mut p1 = x.clone();
    for k in 2..=n {
        let kf = k as f64;
        let p2 = x.mul(&p1).mul_f64(2.0 * kf - 1.0).sub(&p0.mul_f64(kf - 1.0)).div(&x.lit(kf));
        p0 = p1;
        p1 = p2;
    }
    // P_n' = n (x P_n − P_{n−1}) / (x² − 1)
    let dp = x.mul(&p1).sub(&p0).mul_f64(n as f64).div(&x.mul(x).sub(&one));
    (p1, dp)
}

/// `n`-point rule at `bits` of precision, by Newton iteration from the
/// Chebyshev-like initial guesses.
pub fn gauss_legendre<R: Real>(n: usize, bits: usize) -> GlRule<R> {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let iters = 6 + (bits as f64 / 53.0).log2().ceil().max(0.0) as usize;
    for i in 0..n {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = R::from_f64_prec(-guess, bits);
        for _ in 0..iters {
            let (p, dp) = legendre(n, &x);
            x = x.sub(&p.div(&dp));
        }
        let (_, dp) = legendre(n, &x);
        let one = x.lit(1.0);
        // weight on [-1,1] is 2/((1-x²)P'(x)²); on [0,1] it is half that.
        let w = one.div(&one.sub(&x.mul(&x)).mul(&dp).mul(&dp));
        nodes.push(x.add(&one).mul_f64(0.5));
        weights.push(w);
    }
    GlRule { nodes, weights }
}

/// A panel `[a, b]` with dyadic endpoints (exactly representable).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
}

impl Panel {
    pub fn new(a: f64, b: f64) -> Self {
        Panel { a, b }
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn split(&self) -> (Panel, Panel) {
        let m = 0.5 * (self.a + self.b);
        (Panel::new(self.a, m), Panel::new(m, self.b))
    }

    pub fn key(&self) -> (u64, u64) {
        (self.a.to_bits(), self.b.to_bits())
    }
}

/// Panels `[δ,2δ], [2δ,4δ], …, [lo_top/2, lo_top]`: geometric grading toward 0.
pub fn graded_panels(delta: f64, top: f64) -> Vec<Panel> {
    let mut out = Vec::new();
    let mut a = delta;
    while a < top {
        let b = (2.0 * a).min(top);
        out.push(Panel::new(a, b));
        a = b;
    }
    out
}

/// An integrand returning, per panel, the vector of weighted node sums.
pub trait PanelIntegrand<R: Real>: Sync {
    fn panel(&self, p: Panel) -> Result<Vec<Cx<R>>>;
    /// Per-output absolute size of a difference of panel estimates.
    fn measure(&self, diff: &[Cx<R>]) -> Vec<f64>;
    fn outputs(&self) -> usize;
    /// Per-output rounding noise per unit width; refinement cannot go below it.
    fn noise_floor(&self) -> Vec<f64> {
        vec![0.0; self.outputs()]
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<R> {
    pub values: Vec<Cx<R>>,
    /// Per-output sum of accepted panel differences.
    pub errors: Vec<f64>,
    pub panels: usize,
    pub converged: bool,
}

/// Integrates over the union of `initial` panels. A panel is accepted when
/// every output changes by at most `tol · width / total_width` on refinement,
/// beyond the integrand's own noise floor.
pub fn integrate<R: Real, F: PanelIntegrand<R>>(f: &F, initial: &[Panel], tol: f64) -> Result<QuadResult<R>> {
    let total: f64 = initial.iter().map(|p| p.width()).sum();
    let k = f.outputs();
    let mut values: Option<Vec<Cx<R>>> = None;
    let mut errors = vec![0.0; k];
    let mut panels = 0;
    let mut converged = true;
    let floor = f.noise_floor();
    let mut evals = 0usize;
    let mut stack: Vec<(Panel, Vec<Cx<R>>, u32)> = Vec::new();
    for p in initial.iter().rev() {
        stack.push((*p, f.panel(*p)?, 0));
    }
    while let Some((p, est, depth)) = stack.pop() {
        let (l, r) = p.split();
        let el = f.panel(l)?;
        let er = f.panel(r)?;
        evals += 2;
        let sum: Vec<Cx<R>> = el.iter().zip(&er).map(|(a, b)| a.add(b)).collect();
        let diff: Vec<Cx<R>> = sum.iter().zip(&est).map(|(a, b)| a.sub(b)).collect();
        let errs = f.measure(&diff);
        let local_tol = tol * p.width() / total;
        let excess = errs.iter().zip(&floor).map(|(e, fl)| e - fl * p.width()).fold(0.0, f64::max);
        let exhausted = depth >= MAX_DEPTH || evals >= MAX_PANELS || !excess.is_finite();
        if excess <= local_tol || exhausted {
            if excess > local_tol {
                converged = false;
            }
            for (e, d) in errors.iter_mut().zip(&errs) {
                *e += d;
            }
            values = Some(match values {
                None => sum,
                Some(v) => v.iter().zip(&sum).map(|(a, b)| a.add(b)).collect(),
            });
            panels += 2;
        } else {
            stack.push((r, er, depth + 1));
            stack.push((l, el, depth + 1));
        }
    }
    let values = values.ok_or(Error::QuadratureNonConvergence { best: f64::NAN, err_est: f64::INFINITY })?;
    Ok(QuadResult { values, errors, panels, converged })
}
