//! The interpolation basis: `b_n^ε(x) = ½∫_{-1}^{1} g_n^ε(z)e^{iπx²z}dz` and
//! `d_n^ε(x) = ½∫_{-1}^{1} h_n^ε(z)·x·e^{iπx²z}dz`, with `a_n = (b_n⁺ + b_n⁻)/2`,
//! `â_n = (b_n⁺ − b_n⁻)/2`.
//!
//! The contour is the upper unit semicircle `z(t) = e^{iπ(1−t)}`. One pass over
//! the contour produces every index up to `n_max` for all four families: since
//! each form is `base·P(J⁻¹)`, the quadrature accumulates the moments
//! `∫ base·J^{-j}·e^{iπx²z}dz` and the polynomials are applied afterwards.
//! The integrand is about `e^{π(n−x²)}` times larger than the result, so indices
//! above 2 run in extended precision, sized from the largest term met on the arc.
//!
//! For `x² > n + 2` the Laplace form `sin(πx²)∫_0^∞ g(1+it)e^{-πx²t}dt` is used
//! instead; on `Re z = 1` everything is real and sign-coherent, so `f64` suffices.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cx::{minus_iz_pow_half_c64, Cx};
use crate::error::{Error, Result};
use crate::forms::{base_value, form, FormSpec, Parity, Sign};
use crate::modular::modular_r;
use crate::quad::{gauss_legendre, graded_panels, integrate, GlRule, Panel, PanelIntegrand, GL_POINTS};
use crate::real::{precision_for_index, Mp, Real};

/// Agreement required between refinement levels, summed over the contour.
pub const QUAD_TOL: f64 = 1e-12;

/// Integrand magnitude below which the ends of the path are dropped.
const CLIP_THRESHOLD: f64 = 1e-18;

/// Results whose error estimate exceeds this are reported as failures.
const ACCEPT_ERROR: f64 = 1e-6;

/// Heuristic constant in `|b_n^ε(x)|, |d_n^ε(x)| ≲ C·(1+n²)`, used only for tail
/// estimates of truncated sums. Calibrated from indices up to 8 (the growth
/// check re-derives it and tests the bound up to index 32).
pub const GROWTH_CONSTANT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Contour,
    Laplace,
    ClosedForm,
    SeriesTail,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Contour => "contour",
            Method::Laplace => "laplace",
            Method::ClosedForm => "closed_form",
            Method::SeriesTail => "series_tail",
        })
    }
}

/// Which representation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodChoice {
    /// Laplace where it is safe (`x² > n + 2`), contour otherwise.
    Auto,
    Contour,
    Laplace,
}

/// A real value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: Method,
    /// Magnitude of the discarded imaginary part.
    pub imag_residual: f64,
}

impl EvalReport {
    pub fn exact(value: f64, method: Method) -> Self {
        EvalReport { value, abs_error_estimate: 0.0, method, imag_residual: 0.0 }
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &EvalReport, beta: f64) -> EvalReport {
        let method = if self.method == Method::Contour || other.method == Method::Contour {
            Method::Contour
        } else {
            self.method
        };
        EvalReport {
            value: alpha * self.value + beta * other.value,
            abs_error_estimate: alpha.abs() * self.abs_error_estimate + beta.abs() * other.abs_error_estimate,
            method,
            imag_residual: alpha.abs() * self.imag_residual + beta.abs() * other.imag_residual,
        }
    }

    fn negate(&self) -> EvalReport {
        EvalReport { value: -self.value, ..*self }
    }
}

/// The four form families, in moment-layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    GPlus,
    GMinus,
    HPlus,
    HMinus,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::GPlus, Family::GMinus, Family::HPlus, Family::HMinus];

    pub fn new(parity: Parity, eps: Sign) -> Family {
        match (parity, eps) {
            (Parity::Even, Sign::Plus) => Family::GPlus,
            (Parity::Even, Sign::Minus) => Family::GMinus,
            (Parity::Odd, Sign::Plus) => Family::HPlus,
            (Parity::Odd, Sign::Minus) => Family::HMinus,
        }
    }

    pub fn parity(self) -> Parity {
        match self {
            Family::GPlus | Family::GMinus => Parity::Even,
            _ => Parity::Odd,
        }
    }

    pub fn eps(self) -> Sign {
        match self {
            Family::GPlus | Family::HPlus => Sign::Plus,
            _ => Sign::Minus,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn first_index(self) -> usize {
        match self.eps() {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

/// Which families a batch covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Families(pub [bool; 4]);

impl Families {
    pub const ALL: Families = Families([true; 4]);
    pub const EVEN: Families = Families([true, true, false, false]);
    pub const ODD: Families = Families([false, false, true, true]);

    pub fn of(parity: Parity) -> Families {
        match parity {
            Parity::Even => Families::EVEN,
            Parity::Odd => Families::ODD,
        }
    }

    fn contains(&self, other: &Families) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a || !*b)
    }

    fn has(&self, f: Family) -> bool {
        self.0[f.index()]
    }
}

/// Every basis value at one `x ≥ 0` for indices `0..=n_max`.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub x: f64,
    pub n_max: usize,
    families: Families,
    reports: [Vec<EvalReport>; 4],
}

impl BasisValues {
    fn get(&self, f: Family, n: usize) -> &EvalReport {
        assert!(self.families.has(f) && n <= self.n_max, "value not in this batch");
        &self.reports[f.index()][n]
    }

    pub fn b(&self, eps: Sign, n: usize) -> EvalReport {
        *self.get(Family::new(Parity::Even, eps), n)
    }

    pub fn d(&self, eps: Sign, n: usize) -> EvalReport {
        *self.get(Family::new(Parity::Odd, eps), n)
    }

    /// `(a_n, â_n)`.
    pub fn a(&self, n: usize) -> (EvalReport, EvalReport) {
        let p = self.b(Sign::Plus, n);
        let m = self.b(Sign::Minus, n);
        (p.combine(0.5, &m, 0.5), p.combine(0.5, &m, -0.5))
    }

    /// `c_n = (d_n⁺ + d_n⁻)/2` and the real factor `(d_n⁺ − d_n⁻)/2` of `ĉ_n = −i(d_n⁺ − d_n⁻)/2`.
    pub fn c(&self, n: usize) -> (EvalReport, EvalReport) {
        let p = self.d(Sign::Plus, n);
        let m = self.d(Sign::Minus, n);
        (p.combine(0.5, &m, 0.5), p.combine(0.5, &m, -0.5))
    }

    fn mirrored(&self, x: f64) -> BasisValues {
        let mut out = self.clone();
        out.x = x;
        for f in [Family::HPlus, Family::HMinus] {
            for r in out.reports[f.index()].iter_mut() {
                *r = r.negate();
            }
        }
        out
    }
}

/// Index tiers: batches are computed for the smallest tier covering the request.
pub fn tier(n: usize) -> usize {
    [2usize, 8, 16, 24, 32, 40, 48, 64, 80].into_iter().find(|&t| t >= n).unwrap_or(n.div_ceil(16) * 16)
}

/// Whether the Laplace form is used for index `n` at `x` under [`MethodChoice::Auto`].
/// Beyond `x² > n + 2`, the ratio `n/(x² − n)` is capped so the `f64` integrand
/// neither overflows nor underflows on the truncated range.
pub fn laplace_preferred(n: usize, x: f64) -> bool {
    let gap = x * x - n as f64;
    gap > 2.0 && (n as f64) < 15.0 * gap
}

// ---------------------------------------------------------------------------
// closed forms

/// `sin(πx²)` with `x²` carried in two parts, so it vanishes accurately at `√n`.
pub fn sin_pi_x2(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    let k = (hi / 2.0).round();
    // exact for |hi| < 2^53
    sin_pi(hi - 2.0 * k, lo)
}

/// `sin(π(r + e))` for `|r| ≤ 1` and a tiny correction `e`.
fn sin_pi(r: f64, e: f64) -> f64 {
    let (s, r, e) = if r < 0.0 { (-1.0, -r, -e) } else { (1.0, r, e) };
    let (r, e) = if r > 0.5 { (1.0 - r, -e) } else { (r, e) };
    let p = mul_pi(r);
    let lo = p.lo + PI_HI * e;
    s * (p.hi.sin() + p.hi.cos() * lo)
}

/// `π·r` as an unevaluated sum `hi + lo`.
struct TwoSum {
    hi: f64,
    lo: f64,
}

const PI_HI: f64 = std::f64::consts::PI;
const PI_LO: f64 = 1.2246467991473532e-16;

fn mul_pi(r: f64) -> TwoSum {
    let hi = PI_HI * r;
    let lo = PI_HI.mul_add(r, -hi) + PI_LO * r;
    TwoSum { hi, lo }
}

/// `d₀⁺(x) = sin(πx²)/sinh(πx)`, with the removable singularity at 0 filled.
pub fn d0_closed_form(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -d0_closed_form(-x);
    }
    let s = sin_pi_x2(x);
    let p = mul_pi(x);
    if p.hi < 1e-4 {
        // sinh(y) = y(1 + y²/6 + y⁴/120)
        let y = p.hi + p.lo;
        let y2 = y * y;
        return s / (y * (1.0 + y2 / 6.0 + y2 * y2 / 120.0));
    }
    if p.hi > 20.0 {
        // 1/sinh(y) = 2e^{-y}/(1 − e^{-2y})
        let e = (-p.hi).exp() * (1.0 - p.lo);
        return 2.0 * s * e / (1.0 - e * e);
    }
    let sh = p.hi.sinh() + p.hi.cosh() * p.lo;
    s / sh
}

// ---------------------------------------------------------------------------
// contour quadrature

struct Node<R> {
    wdz: Cx<R>,
    z: Cx<R>,
    base: [Cx<R>; 4],
    j_inv: R,
}

type NodeMap<R> = Mutex<HashMap<(usize, u64, u64), Arc<Vec<Node<R>>>>>;

/// Backends whose contour nodes are cached process-wide.
trait Backend: Real {
    fn node_map() -> &'static NodeMap<Self>;
}

impl Backend for f64 {
    fn node_map() -> &'static NodeMap<f64> {
        static M: OnceLock<NodeMap<f64>> = OnceLock::new();
        M.get_or_init(Default::default)
    }
}

impl Backend for Mp {
    fn node_map() -> &'static NodeMap<Mp> {
        static M: OnceLock<NodeMap<Mp>> = OnceLock::new();
        M.get_or_init(Default::default)
    }
}

fn arc_point<R: Real>(t: &R) -> Cx<R> {
    let ang = R::pi(t.prec()).mul(&t.lit(1.0).sub(t));
    let (s, c) = ang.sin_cos();
    Cx::new(c, s)
}

fn contour_nodes<R: Backend>(rule: &GlRule<R>, bits: usize, p: Panel) -> Result<Arc<Vec<Node<R>>>> {
    let key = (bits, p.key().0, p.key().1);
    if let Some(v) = R::node_map().lock().expect("node cache poisoned").get(&key) {
        return Ok(v.clone());
    }
    let a = R::from_f64_prec(p.a, bits);
    let h = R::from_f64_prec(p.width(), bits);
    // ½·dz/dt = −(iπ/2)·z
    let half_pi = R::pi(bits).mul_f64(0.5);
    let mut nodes = Vec::with_capacity(rule.nodes.len());
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let t = a.add(&h.mul(u));
        let z = arc_point(&t);
        let m = modular_r(&z)?;
        let scale = w.mul(&h).mul(&half_pi);
        let wdz = Cx::new(z.im.clone(), z.re.neg()).scale(&scale);
        let base = [
            base_value(&m, Parity::Even, Sign::Plus),
            base_value(&m, Parity::Even, Sign::Minus),
            base_value(&m, Parity::Odd, Sign::Plus),
            base_value(&m, Parity::Odd, Sign::Minus),
        ];
        nodes.push(Node { wdz, z, base, j_inv: m.j_inv.re });
    }
    let nodes = Arc::new(nodes);
    let mut map = R::node_map().lock().expect("node cache poisoned");
    Ok(map.entry(key).or_insert(nodes).clone())
}

/// One output of a batch: family, index, and its polynomial.
struct Component {
    family: Family,
    n: usize,
    poly: Vec<f64>,
    spec: Arc<FormSpec>,
}

impl Component {
    fn new(family: Family, n: usize) -> Result<Component> {
        let spec = form(family.parity(), family.eps(), n)?;
        Ok(Component { family, n, poly: spec.poly_f64(), spec })
    }

    fn x_factor(&self, x: f64) -> f64 {
        match self.family.parity() {
            Parity::Even => 1.0,
            Parity::Odd => x,
        }
    }
}

struct ContourJob<'a, R> {
    x: f64,
    scales: Vec<f64>,
    pi_x2: R,
    bits: usize,
    rule: GlRule<R>,
    comps: &'a [Component],
    /// Families with at least one component, in moment order.
    fams: Vec<Family>,
    jmax: usize,
}

impl<'a, R: Backend> ContourJob<'a, R> {
    fn slot(&self, f: Family) -> usize {
        self.fams.iter().position(|g| *g == f).expect("family present")
    }
}

impl<'a, R: Backend> PanelIntegrand<R> for ContourJob<'a, R> {
    fn panel(&self, p: Panel) -> Result<Vec<Cx<R>>> {
        let nodes = contour_nodes(&self.rule, self.bits, p)?;
        let stride = self.jmax + 1;
        let zero = Cx::from_f64(0.0, 0.0, self.bits);
        let mut acc = vec![zero; self.fams.len() * stride];
        for node in nodes.iter() {
            // e^{iπx²z} = e^{−πx² Im z}·e^{iπx² Re z}
            let mag = self.pi_x2.mul(&node.z.im).neg().exp();
            let (s, c) = self.pi_x2.mul(&node.z.re).sin_cos();
            let e = Cx::new(c.mul(&mag), s.mul(&mag));
            let ew = node.wdz.mul(&e);
            let vs: Vec<Cx<R>> = self.fams.iter().map(|f| ew.mul(&node.base[f.index()])).collect();
            let mut pw = node.j_inv.lit(1.0);
            for j in 0..=self.jmax {
                for (k, v) in vs.iter().enumerate() {
                    let slot = &mut acc[k * stride + j];
                    *slot = slot.add(&v.scale(&pw));
                }
                if j < self.jmax {
                    pw = pw.mul(&node.j_inv);
                }
            }
        }
        Ok(acc)
    }

    fn measure(&self, diff: &[Cx<R>]) -> Vec<f64> {
        let stride = self.jmax + 1;
        let d: Vec<Complex64> = diff.iter().map(|c| c.to_c64()).collect();
        self.comps
            .iter()
            .map(|c| {
                let off = self.slot(c.family) * stride;
                let s: Complex64 = c.poly.iter().enumerate().map(|(j, pj)| d[off + j] * pj).sum();
                s.norm() * c.x_factor(self.x)
            })
            .collect()
    }

    fn outputs(&self) -> usize {
        self.comps.len()
    }

    fn noise_floor(&self) -> Vec<f64> {
        self.scales.iter().map(|s| rounding(*s, self.bits)).collect()
    }
}

fn rounding(scale: f64, bits: usize) -> f64 {
    scale * 2f64.powi(8 - bits.min(1000) as i32)
}

/// Per component, the largest term `|base·P_j·J^{-j}·e^{iπx²z}|` met on the arc.
/// Its ratio to the result is the cancellation the working precision must absorb.
fn term_scales(x: f64, comps: &[Component]) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; comps.len()];
    for k in 0..256 {
        let t = (k as f64 + 0.5) / 512.0;
        for (o, m) in out.iter_mut().zip(contour_magnitude(x, comps, t)?) {
            *o = o.max(m);
        }
    }
    Ok(out)
}

/// Bits needed to evaluate `comps` at `x` to about `2^-64` absolute; `None` for `f64`.
fn contour_bits(top: usize, scales: &[f64]) -> Option<usize> {
    precision_for_index(top)?;
    let worst = scales.iter().cloned().fold(1.0, f64::max);
    let need = 64 + worst.log2().ceil().max(0.0) as usize;
    Some(need.div_ceil(64) * 64)
}

/// `max_c |integrand_c(z(t))|` in `f64`, taking the larger of `t` and `1 − t`.
fn contour_magnitude(x: f64, comps: &[Component], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; comps.len()];
    for tt in [t, 1.0 - t] {
        let z = arc_point(&tt);
        let m = modular_r(&z)?;
        let e = (-std::f64::consts::PI * x * x * z.im).exp();
        let u = m.j_inv.abs_f64();
        for (o, c) in out.iter_mut().zip(comps) {
            let base = base_value(&m, c.family.parity(), c.family.eps()).abs_f64();
            let p: f64 = c.poly.iter().rev().fold(0.0, |acc, pj| acc * u + pj.abs());
            let v = base * p * e * std::f64::consts::FRAC_PI_2 * c.x_factor(x);
            *o = o.max(if v.is_nan() { 0.0 } else { v });
        }
    }
    Ok(out)
}

/// Smallest dyadic `δ` whose end pieces are negligible, with the bound on what was dropped.
fn clip<F: Fn(f64) -> Result<Vec<f64>>>(mag: F, kmin: i32, kmax: i32) -> Result<(f64, Vec<f64>)> {
    // The integrand decays monotonically toward the cusp, so 2δ·|f(δ)| bounds both ends.
    let dropped = |t: f64, m: &[f64]| m.iter().map(|v| 2.0 * v * t).collect::<Vec<_>>();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    for k in kmin..=kmax {
        let t = 2f64.powi(-k);
        let here = mag(t)?;
        let half = mag(t / 2.0)?;
        if here.iter().chain(&half).any(|v| !v.is_finite()) {
            // Values underflowed before the threshold was met; stop one step earlier.
            return prev.ok_or(Error::QuadratureNonConvergence { best: f64::NAN, err_est: f64::INFINITY });
        }
        let worst = here.iter().chain(&half).cloned().fold(0.0, f64::max);
        if worst < CLIP_THRESHOLD || k == kmax {
            return Ok((t, dropped(t, &here)));
        }
        prev = Some((t, dropped(t, &here)));
    }
    prev.ok_or(Error::QuadratureNonConvergence { best: f64::NAN, err_est: f64::INFINITY })
}

fn contour_batch<R: Backend>(x: f64, comps: &[Component], bits: usize, scales: Vec<f64>) -> Result<Vec<EvalReport>> {
    let (delta, dropped) = clip(|t| contour_magnitude(x, comps, t), 3, 60)?;
    let mut panels = graded_panels(delta, 0.5);
    let mirrored: Vec<Panel> = panels.iter().rev().map(|p| Panel::new(1.0 - p.b, 1.0 - p.a)).collect();
    panels.extend(mirrored);
    let mut fams: Vec<Family> = Vec::new();
    for c in comps {
        if !fams.contains(&c.family) {
            fams.push(c.family);
        }
    }
    fams.sort_by_key(|f| f.index());
    let jmax = comps.iter().map(|c| c.n).max().unwrap_or(0);
    let pi = R::pi(bits);
    let xr = R::from_f64_prec(x, bits);
    let job = ContourJob { x, scales, pi_x2: pi.mul(&xr).mul(&xr), bits, rule: gauss_legendre(GL_POINTS, bits), comps, fams, jmax };
    let res = integrate(&job, &panels, QUAD_TOL)?;
    let stride = jmax + 1;
    let mut out = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        let off = job.slot(c.family) * stride;
        let mut acc = Cx::<R>::from_f64(0.0, 0.0, bits);
        for (j, pj) in c.spec.poly.iter().enumerate() {
            if !num_traits::Zero::is_zero(pj) {
                acc = acc.add(&res.values[off + j].scale(&R::from_rational(pj, bits)));
            }
        }
        let v = acc.to_c64() * c.x_factor(x);
        let err = res.errors[i] + dropped[i] + rounding(job.scales[i], bits);
        out.push(finish(v.re, err, Method::Contour, v.im.abs(), res.converged)?);
    }
    Ok(out)
}

fn finish(value: f64, err: f64, method: Method, imag: f64, converged: bool) -> Result<EvalReport> {
    if !converged && err > ACCEPT_ERROR || !err.is_finite() || !value.is_finite() {
        return Err(Error::QuadratureNonConvergence { best: value, err_est: err });
    }
    Ok(EvalReport { value, abs_error_estimate: err, method, imag_residual: imag })
}

// ---------------------------------------------------------------------------
// Laplace form

struct LaplaceJob<'a> {
    x2: f64,
    rule: GlRule<f64>,
    comps: &'a [Component],
}

impl<'a> LaplaceJob<'a> {
    fn values_at(&self, t: f64) -> Result<Vec<Complex64>> {
        let m = modular_r(&Cx::<f64>::new(1.0, t))?;
        let u = m.j_inv.to_c64();
        let decay = -std::f64::consts::PI * self.x2 * t;
        Ok(self
            .comps
            .iter()
            .map(|c| {
                let base = base_value(&m, c.family.parity(), c.family.eps()).to_c64();
                // P(u)·e^{decay} = Σ P_j (u·s)^j s^{deg−j} with s = e^{decay/deg}, so
                // neither u^deg nor the exponential overflows on its own.
                let deg = c.poly.len() - 1;
                if deg == 0 {
                    return base * c.poly[0] * decay.exp();
                }
                let s = (decay / deg as f64).exp();
                let v = u * s;
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, pj) in c.poly.iter().enumerate().rev() {
                    acc = acc * v + pj * s.powi((deg - j) as i32);
                }
                base * acc
            })
            .collect())
    }
}

impl<'a> PanelIntegrand<f64> for LaplaceJob<'a> {
    fn panel(&self, p: Panel) -> Result<Vec<Cx<f64>>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.comps.len()];
        for (u, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let t = p.a + p.width() * u;
            for (a, v) in acc.iter_mut().zip(self.values_at(t)?) {
                *a += v * (w * p.width());
            }
        }
        Ok(acc.into_iter().map(|c| Cx::new(c.re, c.im)).collect())
    }

    fn measure(&self, diff: &[Cx<f64>]) -> Vec<f64> {
        diff.iter().map(|d| d.abs_f64()).collect()
    }

    fn outputs(&self) -> usize {
        self.comps.len()
    }
}

fn laplace_batch(x: f64, comps: &[Component]) -> Result<Vec<EvalReport>> {
    let x2 = x * x;
    let nmax = comps.iter().map(|c| c.n).max().unwrap_or(0);
    let gap = x2 - nmax as f64;
    let job = LaplaceJob { x2, rule: gauss_legendre(GL_POINTS, 53), comps };
    // Beyond T the integrand is below e^{-42} relative to its growth e^{πnt}.
    let t_end = 42.0 / (std::f64::consts::PI * gap);
    let top = 2f64.powi(t_end.log2().ceil() as i32);
    let (delta, dropped) = clip(
        |t| Ok(job.values_at(t)?.iter().zip(comps).map(|(v, c)| v.norm() * c.x_factor(x)).collect()),
        (-top.log2()) as i32 + 2,
        60,
    )?;
    let panels = graded_panels(delta, top);
    let res = integrate(&job, &panels, QUAD_TOL)?;
    let s = sin_pi_x2(x);
    // Tail past `top`: |integrand| ≤ |f(top)|/(π·gap) by exponential decay.
    let tail = job.values_at(top)?;
    let mut out = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        let xf = c.x_factor(x);
        let v = res.values[i].to_c64() * s * xf;
        let tail_bound = tail[i].norm() / (std::f64::consts::PI * gap) * xf;
        let err = (res.errors[i] + dropped[i]) * s.abs() * xf + tail_bound * s.abs();
        out.push(finish(v.re, err, Method::Laplace, v.im.abs(), res.converged)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// batches and caching

fn compute(x: f64, n_max: usize, families: Families, choice: MethodChoice) -> Result<BasisValues> {
    let mut reports: [Vec<EvalReport>; 4] = Default::default();
    let mut contour: Vec<Component> = Vec::new();
    let mut laplace: Vec<Component> = Vec::new();
    for f in Family::ALL {
        if !families.has(f) {
            continue;
        }
        reports[f.index()] = vec![EvalReport::exact(0.0, Method::ClosedForm); n_max + 1];
        for n in f.first_index()..=n_max {
            if f.parity() == Parity::Odd && x == 0.0 {
                reports[f.index()][n] = EvalReport::exact(0.0, Method::ClosedForm);
                continue;
            }
            let use_laplace = match choice {
                MethodChoice::Auto => laplace_preferred(n, x),
                MethodChoice::Contour => false,
                // Indices the Laplace form cannot reach fall back to the contour.
                MethodChoice::Laplace => x * x > n as f64,
            };
            let c = Component::new(f, n)?;
            if use_laplace {
                laplace.push(c);
            } else {
                contour.push(c);
            }
        }
    }
    if !laplace.is_empty() {
        for (c, r) in laplace.iter().zip(laplace_batch(x, &laplace)?) {
            reports[c.family.index()][c.n] = r;
        }
    }
    if !contour.is_empty() {
        let top = contour.iter().map(|c| c.n).max().unwrap_or(0);
        let scales = term_scales(x, &contour)?;
        let rs = match contour_bits(top, &scales) {
            None => contour_batch::<f64>(x, &contour, 53, scales)?,
            Some(bits) => contour_batch::<Mp>(x, &contour, bits, scales)?,
        };
        for (c, r) in contour.iter().zip(rs) {
            reports[c.family.index()][c.n] = r;
        }
    }
    Ok(BasisValues { x, n_max, families, reports })
}

type BatchMap = Mutex<HashMap<(u64, MethodChoice), Vec<Arc<BasisValues>>>>;

fn batch_cache() -> &'static BatchMap {
    static M: OnceLock<BatchMap> = OnceLock::new();
    M.get_or_init(Default::default)
}

/// All basis values at `x` for indices up to at least `n_max` in the requested
/// families. Results are cached per `|x|`; negative `x` reuses them by symmetry.
pub fn basis_values(x: f64, n_max: usize, families: Families, choice: MethodChoice) -> Result<Arc<BasisValues>> {
    if !x.is_finite() {
        return Err(Error::QuadratureNonConvergence { best: f64::NAN, err_est: f64::INFINITY });
    }
    let ax = x.abs();
    let key = (ax.to_bits(), choice);
    let found = batch_cache()
        .lock()
        .expect("batch cache poisoned")
        .get(&key)
        .and_then(|v| v.iter().find(|b| b.n_max >= n_max && b.families.contains(&families)).cloned());
    let b = match found {
        Some(b) => b,
        None => {
            let b = Arc::new(compute(ax, tier(n_max), families, choice)?);
            batch_cache().lock().expect("batch cache poisoned").entry(key).or_default().push(b.clone());
            b
        }
    };
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        Ok(Arc::new(b.mirrored(x)))
    } else {
        Ok(b)
    }
}

fn check_index(eps: Sign, n: usize) -> Result<()> {
    if eps == Sign::Minus && n == 0 {
        return Err(Error::NoSuchForm);
    }
    Ok(())
}

fn check_choice(n: usize, x: f64, choice: MethodChoice) -> Result<()> {
    if choice == MethodChoice::Laplace && x * x <= n as f64 {
        return Err(Error::LaplaceOutOfRange { n, x });
    }
    Ok(())
}

/// `b_n^ε(x)`; `b_0^-` is identically zero.
pub fn eval_b(eps: Sign, n: usize, x: f64) -> Result<EvalReport> {
    eval_b_with(eps, n, x, MethodChoice::Auto)
}

pub fn eval_b_with(eps: Sign, n: usize, x: f64, choice: MethodChoice) -> Result<EvalReport> {
    if eps == Sign::Minus && n == 0 {
        return Ok(EvalReport::exact(0.0, Method::ClosedForm));
    }
    check_choice(n, x, choice)?;
    Ok(basis_values(x, n, Families::EVEN, choice)?.b(eps, n))
}

/// `d_n^ε(x)`; exactly zero at `x = 0`.
pub fn eval_d(eps: Sign, n: usize, x: f64) -> Result<EvalReport> {
    eval_d_with(eps, n, x, MethodChoice::Auto)
}

pub fn eval_d_with(eps: Sign, n: usize, x: f64, choice: MethodChoice) -> Result<EvalReport> {
    check_index(eps, n)?;
    check_choice(n, x, choice)?;
    Ok(basis_values(x, n, Families::ODD, choice)?.d(eps, n))
}

/// `(a_n(x), â_n(x))`.
pub fn eval_a(n: usize, x: f64) -> Result<(EvalReport, EvalReport)> {
    Ok(basis_values(x, n, Families::EVEN, MethodChoice::Auto)?.a(n))
}

/// A truncated generating series with a bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Quadrature error of the included terms.
    pub abs_error_estimate: f64,
    /// Heuristic bound on every omitted term, from the growth envelope.
    pub tail_bound: f64,
    /// Highest index actually summed.
    pub terms: usize,
}

/// Terms whose envelope bound falls below this are not evaluated.
pub const NEGLIGIBLE_TERM: f64 = 1e-18;

/// Heuristic bound `C(1+n²)` (even) or `C(1+n^{5/2})` (odd) on `sup_x |b_n^ε(x)|`, `sup_x |d_n^ε(x)|`.
pub fn growth_envelope(parity: Parity, n: usize) -> f64 {
    let n = n as f64;
    GROWTH_CONSTANT
        * match parity {
            Parity::Even => 1.0 + n * n,
            Parity::Odd => 1.0 + n * n * n.sqrt(),
        }
}

/// `F_ε(τ, x) = Σ_{n≤N} b_n^ε(x)e^{iπnτ}` (even) or the odd analogue `G_ε` with `d_n^ε`.
/// The series converges for every `Im τ > 0` because the basis grows polynomially.
/// Terms whose envelope bound is below [`NEGLIGIBLE_TERM`] are skipped and
/// accounted for in the tail bound.
pub fn generating_f(parity: Parity, eps: Sign, tau: Complex64, x: f64, n_terms: usize) -> Result<SeriesValue> {
    if !(tau.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane { re: tau.re, im: tau.im });
    }
    let r = (-std::f64::consts::PI * tau.im).exp();
    let kept = (0..=n_terms)
        .rev()
        .find(|&n| growth_envelope(parity, n) * r.powi(n as i32) >= NEGLIGIBLE_TERM)
        .unwrap_or(0);
    let bv = basis_values(x, kept, Families::of(parity), MethodChoice::Auto)?;
    let f = Family::new(parity, eps);
    let q = (Complex64::i() * std::f64::consts::PI * tau).exp();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut qn = Complex64::new(1.0, 0.0);
    for n in 0..=kept {
        if n >= f.first_index() {
            let rep = bv.get(f, n);
            value += rep.value * qn;
            err += rep.abs_error_estimate * qn.norm();
        }
        qn *= q;
    }
    Ok(SeriesValue { value, abs_error_estimate: err, tail_bound: envelope_tail(parity, kept, r), terms: kept })
}

/// `Σ_{n>N} envelope(n)·r^n`.
pub fn envelope_tail(parity: Parity, n_last: usize, r: f64) -> f64 {
    if r >= 1.0 {
        return f64::INFINITY;
    }
    let mut s = 0.0f64;
    let mut n = n_last + 1;
    let mut rn = r.powi(n as i32);
    loop {
        let t = growth_envelope(parity, n) * rn;
        s += t;
        if t <= 1e-30 * s || t == 0.0 {
            return s;
        }
        rn *= r;
        n += 1;
    }
}

/// The right side of the functional equation for `F_ε`:
/// `e^{iπτx²} + ε(−iτ)^{-1/2}e^{iπ(−1/τ)x²}` (even) or with weight `−3/2` and the factor `x` (odd).
pub fn functional_equation_rhs(parity: Parity, eps: Sign, tau: Complex64, x: f64) -> Complex64 {
    let (k, xf) = match parity {
        Parity::Even => (-1, 1.0),
        Parity::Odd => (-3, x),
    };
    let e = |t: Complex64| (Complex64::i() * std::f64::consts::PI * t * x * x).exp() * xf;
    e(tau) + eps.value() * minus_iz_pow_half_c64(tau, k) * e(-1.0 / tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(d0_closed_form(0.0), 0.0);
        assert!(d0_closed_form(1.0).abs() < 1e-16);
        let want = (std::f64::consts::PI / 4.0).sin() / (std::f64::consts::PI / 2.0).sinh();
        assert!((d0_closed_form(0.5) - want).abs() < 1e-16);
        assert!((d0_closed_form(0.5) - 0.3072642065216293).abs() < 1e-15);
        assert!((d0_closed_form(1e-3) / 1e-3 - 1.0).abs() < 1e-5);
        assert_eq!(d0_closed_form(-0.7), -d0_closed_form(0.7));
        assert!(d0_closed_form(300.0).abs() < 1e-300);
    }

    #[test]
    fn closed_form_ulps() {
        use crate::real::Mp;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let x: f64 = rng.gen_range(0.0..12.0);
            let xm = Mp::new(x, 256);
            let pi = Mp::pi(256);
            let want = pi.mul(&xm).mul(&xm).sin().div(&{
                let e = pi.mul(&xm).exp();
                e.sub(&e.lit(1.0).div(&e)).mul_f64(0.5)
            });
            let w = want.to_f64();
            let ulp = f64::EPSILON * w.abs().max(f64::MIN_POSITIVE);
            assert!((d0_closed_form(x) - w).abs() <= 4.0 * ulp, "x = {x}: {} vs {w}", d0_closed_form(x));
        }
    }

    #[test]
    fn sin_pi_x2_vanishes_at_nodes() {
        for n in 0..200 {
            let x = (n as f64).sqrt();
            assert!(sin_pi_x2(x).abs() < 1e-13 * (1.0 + x), "{n}");
        }
    }

    #[test]
    fn tiers() {
        assert_eq!(tier(0), 2);
        assert_eq!(tier(3), 8);
        assert_eq!(tier(10), 16);
        assert_eq!(tier(32), 32);
        assert_eq!(tier(33), 40);
        assert_eq!(tier(81), 96);
        assert_eq!(tier(80), 80);
    }

    #[test]
    fn low_index_values() {
        let r = eval_b(Sign::Plus, 0, 0.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
        assert_eq!(r.method, Method::Contour);
        assert!(r.imag_residual < 1e-8);
        assert_eq!(eval_b(Sign::Minus, 0, 1.3).unwrap().value, 0.0);
        let d = eval_d(Sign::Plus, 0, 0.5).unwrap();
        assert!((d.value - d0_closed_form(0.5)).abs() < 1e-10, "{d:?}");
        assert_eq!(eval_d(Sign::Plus, 1, 0.0).unwrap().value, 0.0);
        assert!(eval_d(Sign::Minus, 0, 1.0).is_err());
    }

    #[test]
    fn parity_in_x() {
        for x in [0.4, 1.1, 2.3] {
            let a = eval_b(Sign::Minus, 2, x).unwrap().value;
            let b = eval_b(Sign::Minus, 2, -x).unwrap().value;
            assert_eq!(a, b);
            let a = eval_d(Sign::Plus, 1, x).unwrap().value;
            let b = eval_d(Sign::Plus, 1, -x).unwrap().value;
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn contour_and_laplace_agree() {
        for n in 0..=2usize {
            for x2 in [n as f64 + 2.5, n as f64 + 4.0, n as f64 + 5.5] {
                let x = x2.sqrt();
                for eps in [Sign::Plus, Sign::Minus] {
                    if eps == Sign::Minus && n == 0 {
                        continue;
                    }
                    let c = eval_b_with(eps, n, x, MethodChoice::Contour).unwrap();
                    let l = eval_b_with(eps, n, x, MethodChoice::Laplace).unwrap();
                    assert_eq!(l.method, Method::Laplace);
                    assert!((c.value - l.value).abs() < 1e-9, "b {eps} {n} at {x}: {} vs {}", c.value, l.value);
                    let c = eval_d_with(eps, n, x, MethodChoice::Contour).unwrap();
                    let l = eval_d_with(eps, n, x, MethodChoice::Laplace).unwrap();
                    assert!((c.value - l.value).abs() < 1e-9, "d {eps} {n} at {x}");
                }
            }
        }
        assert!(matches!(eval_b_with(Sign::Plus, 3, 1.0, MethodChoice::Laplace), Err(Error::LaplaceOutOfRange { .. })));
    }

    #[test]
    fn functional_equation_rhs_at_fixed_point() {
        // At τ = i the two Gaussians coincide.
        let v = functional_equation_rhs(Parity::Even, Sign::Minus, Complex64::i(), 0.7);
        assert!(v.norm() < 1e-15);
    }
}
