//! The weakly holomorphic forms `g_n^ε` (weight 3/2) and `h_n^ε` (weight 1/2).
//!
//! Each form is `base·P(J⁻¹)` with `base ∈ {θ³, θ³(1−2λ), θ, θ(1−2λ)}` and a monic
//! polynomial `P` of degree `n`, fixed by requiring the expansion to be
//! `p^{-n} + O(p)` (ε = +) or `p^{-n} + O(1)` (ε = −). The leading coefficients
//! of `base·J^{-k}` form a unitriangular system, solved exactly.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cx::Cx;
use crate::error::{Error, Result};
use crate::modular::{eval_modular, modular_r, ModularR};
use crate::qseries::{modular_series, parse_rational, rational_string, PuiseuxSeries, Rational, SeriesName};
use crate::real::{precision_for_index, Mp, Real};

/// Extra series order carried beyond what the triangular solve reads.
const GUARD_ORDER: i64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            _ => Err(format!("parity must be `even` or `odd`, got `{s}`")),
        }
    }
}

/// The eigenvalue sign ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            _ => Err(format!("eps must be `+` or `-`, got `{s}`")),
        }
    }
}

/// One form: `θ³·P(J⁻¹)` etc., with `poly[k]` the coefficient of `J^{-k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FormJson", into = "FormJson")]
pub struct FormSpec {
    pub parity: Parity,
    pub eps: Sign,
    pub n: usize,
    pub poly: Vec<Rational>,
}

impl FormSpec {
    /// Polynomial coefficients as `f64` (exact for every tabulated index).
    pub fn poly_f64(&self) -> Vec<f64> {
        self.poly.iter().map(|c| f64::from_rational(c, 53)).collect()
    }

    /// `Σ |P_k|·64^k`: the size of `P(J⁻¹)` on the unit arc, where `J⁻¹ ∈ [0, 64]`.
    pub fn arc_scale(&self) -> f64 {
        self.poly_f64().iter().enumerate().map(|(k, c)| c.abs() * 64f64.powi(k as i32)).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct FormJson {
    parity: Parity,
    eps: Sign,
    n: usize,
    poly: Vec<String>,
}

impl From<FormSpec> for FormJson {
    fn from(f: FormSpec) -> Self {
        FormJson { parity: f.parity, eps: f.eps, n: f.n, poly: f.poly.iter().map(rational_string).collect() }
    }
}

impl TryFrom<FormJson> for FormSpec {
    type Error = String;
    fn try_from(j: FormJson) -> std::result::Result<Self, String> {
        let poly = j.poly.iter().map(|s| parse_rational(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        if poly.len() != j.n + 1 || !poly[j.n].is_one() {
            return Err(format!("poly must be monic of degree {}", j.n));
        }
        if j.eps == Sign::Minus && (j.n == 0 || !poly[0].is_zero()) {
            return Err("eps = - requires n >= 1 and a zero constant term".into());
        }
        Ok(FormSpec { parity: j.parity, eps: j.eps, n: j.n, poly })
    }
}

/// The series multiplying `P(J⁻¹)`.
pub fn base_series(parity: Parity, eps: Sign, order: i64) -> PuiseuxSeries {
    let theta = match parity {
        Parity::Even => SeriesName::Theta3Cubed,
        Parity::Odd => SeriesName::Theta3,
    };
    let t = modular_series(theta, order);
    match eps {
        Sign::Plus => t,
        Sign::Minus => t.mul(&modular_series(SeriesName::OneMinus2Lambda, order)),
    }
}

type FormKey = (Parity, Sign, usize);

fn cache() -> &'static RwLock<HashMap<FormKey, Arc<FormSpec>>> {
    static CACHE: OnceLock<RwLock<HashMap<FormKey, Arc<FormSpec>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn solve(parity: Parity, eps: Sign, n: usize) -> FormSpec {
    let n_i = n as i64;
    let jinv = modular_series(SeriesName::JInv, n_i + GUARD_ORDER);
    let base = base_series(parity, eps, n_i + GUARD_ORDER + 1);
    // cols[j] = coefficients of base·J^{-j} at p^{-n..=0}
    let mut power = PuiseuxSeries::one(jinv.order() + 1);
    let mut cols: Vec<Vec<Rational>> = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j > 0 {
            power = power.mul(&jinv);
        }
        let s = base.mul(&power);
        cols.push((-n_i..=0).map(|e| s.coefficient(e).expect("guard band covers p^0")).collect());
    }
    let at = |e: i64, j: usize| &cols[j][(e + n_i) as usize];
    let mut poly = vec![Rational::zero(); n + 1];
    poly[n] = Rational::one();
    let lo = match eps {
        Sign::Plus => 0,
        Sign::Minus => 1,
    };
    for k in (lo..n).rev() {
        debug_assert!(at(-(k as i64), k).is_one());
        let mut s = Rational::zero();
        for (j, pj) in poly.iter().enumerate().skip(k + 1) {
            s += pj * at(-(k as i64), j);
        }
        poly[k] = -s;
    }
    FormSpec { parity, eps, n, poly }
}

/// The form `g_n^ε` (even) or `h_n^ε` (odd). Memoized; every caller sees the
/// same table regardless of order or thread.
pub fn form(parity: Parity, eps: Sign, n: usize) -> Result<Arc<FormSpec>> {
    if eps == Sign::Minus && n == 0 {
        return Err(Error::NoSuchForm);
    }
    let key = (parity, eps, n);
    if let Some(f) = cache().read().expect("form cache poisoned").get(&key) {
        return Ok(f.clone());
    }
    let built = Arc::new(solve(parity, eps, n));
    let mut w = cache().write().expect("form cache poisoned");
    Ok(w.entry(key).or_insert(built).clone())
}

pub fn build_form(parity: Parity, eps: Sign, n: usize) -> Result<FormSpec> {
    form(parity, eps, n).map(|f| (*f).clone())
}

/// The `p`-expansion of the form, exact below `p^order`.
pub fn form_q_expansion(spec: &FormSpec, order: i64) -> PuiseuxSeries {
    let n = spec.n as i64;
    let work = order.max(1) + n + 2;
    let jinv = modular_series(SeriesName::JInv, work);
    let base = base_series(spec.parity, spec.eps, work + n);
    base.mul(&jinv.compose_poly(&spec.poly)).truncate(order)
}

pub(crate) fn base_value<R: Real>(m: &ModularR<R>, parity: Parity, eps: Sign) -> Cx<R> {
    let t = match parity {
        Parity::Even => &m.theta3,
        Parity::Odd => &m.theta,
    };
    match eps {
        Sign::Plus => t.clone(),
        Sign::Minus => t.mul(&m.one_minus_2lambda),
    }
}

fn eval_form_r<R: Real>(spec: &FormSpec, z: &Cx<R>) -> Result<Cx<R>> {
    let bits = z.prec();
    let m = modular_r(z)?;
    let mut acc = z.lit(0.0, 0.0);
    for c in spec.poly.iter().rev() {
        acc = acc.mul(&m.j_inv).add(&Cx::real(R::from_rational(c, bits)));
    }
    Ok(acc.mul(&base_value(&m, spec.parity, spec.eps)))
}

/// Value of the form at `z`. Indices above 2 are evaluated in extended
/// precision, since `P(J⁻¹)` cancels heavily where `|J⁻¹|` is moderate.
pub fn eval_form(spec: &FormSpec, z: Complex64) -> Result<Complex64> {
    match precision_for_index(spec.n) {
        None => Ok(eval_form_r(spec, &Cx::<f64>::from_c64(z, 53))?.to_c64()),
        Some(bits) => Ok(eval_form_r(spec, &Cx::<Mp>::from_c64(z, bits))?.to_c64()),
    }
}

/// The generating kernels: for even parity `K_ε(τ, z) = Σ_n g_n^ε(z)e^{iπnτ}`,
/// for odd parity the `τ ↔ z` switched kernels `Σ_n h_n^ε(z)e^{iπnτ}`.
pub fn eval_kernel(parity: Parity, eps: Sign, tau: Complex64, z: Complex64) -> Result<Complex64> {
    let mt = eval_modular(tau)?;
    let mz = eval_modular(z)?;
    let gap = (mz.j - mt.j).norm();
    if gap < 1e-10 * (mz.j.norm() + mt.j.norm()) {
        return Err(Error::PoleProximity { gap });
    }
    let denom = mz.j - mt.j;
    let (wt, wz) = match parity {
        Parity::Even => (mt.theta, mz.theta_cubed),
        Parity::Odd => (mt.theta_cubed, mz.theta),
    };
    let num = match eps {
        Sign::Plus => wt * mt.one_minus_2lambda * wz * mz.j,
        Sign::Minus => wt * mt.j * wz * mz.one_minus_2lambda,
    };
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::minus_iz_pow_half_c64;
    use crate::qseries::int;

    fn ints(f: &FormSpec) -> Vec<i64> {
        f.poly
            .iter()
            .map(|c| {
                assert!(c.is_integer());
                i64::try_from(c.to_integer()).unwrap()
            })
            .collect()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn listed_polynomials() {
        use Parity::*;
        use Sign::*;
        let cases: &[(Parity, Sign, usize, &[i64])] = &[
            (Even, Plus, 0, &[1]),
            (Even, Plus, 1, &[-30, 1]),
            (Even, Plus, 2, &[192, -54, 1]),
            (Even, Minus, 1, &[0, 1]),
            (Even, Minus, 2, &[0, -22, 1]),
            (Even, Minus, 3, &[0, 252, -46, 1]),
            (Odd, Plus, 0, &[1]),
            (Odd, Plus, 1, &[-26, 1]),
            (Odd, Plus, 2, &[76, -50, 1]),
            (Odd, Minus, 1, &[0, 1]),
            (Odd, Minus, 2, &[0, -18, 1]),
            (Odd, Minus, 3, &[0, 168, -42, 1]),
        ];
        for &(p, e, n, want) in cases {
            assert_eq!(ints(&build_form(p, e, n).unwrap()), want, "{p} {e} {n}");
        }
        assert_eq!(build_form(Even, Minus, 0), Err(Error::NoSuchForm));
    }

    #[test]
    fn defining_conditions_hold_exactly() {
        for parity in [Parity::Even, Parity::Odd] {
            for eps in [Sign::Plus, Sign::Minus] {
                for n in 0..=24usize {
                    if eps == Sign::Minus && n == 0 {
                        continue;
                    }
                    let f = form(parity, eps, n).unwrap();
                    assert!(f.poly[n].is_one());
                    if eps == Sign::Minus {
                        assert!(f.poly[0].is_zero());
                    }
                    let s = form_q_expansion(&f, 2);
                    assert_eq!(s.min_exp(), -(n as i64));
                    assert_eq!(s.coefficient(-(n as i64)).unwrap(), int(1));
                    let top = if eps == Sign::Plus { 0 } else { -1 };
                    for e in (-(n as i64) + 1)..=top {
                        assert!(s.coefficient(e).unwrap().is_zero(), "{parity} {eps} {n} at p^{e}");
                    }
                }
            }
        }
    }

    #[test]
    fn delta_structure_even_plus() {
        for n in 0..=10usize {
            let s = form_q_expansion(&form(Parity::Even, Sign::Plus, n).unwrap(), 1);
            for m in 0..=10i64 {
                let want = if m as usize == n { int(1) } else { int(0) };
                assert_eq!(s.coefficient(-m).unwrap(), want);
            }
        }
    }

    #[test]
    fn constant_terms() {
        let g1 = form_q_expansion(&form(Parity::Even, Sign::Minus, 1).unwrap(), 3);
        assert_eq!(g1.coefficient(0).unwrap(), int(-2));
        let h3 = form_q_expansion(&form(Parity::Odd, Sign::Minus, 3).unwrap(), 2);
        assert_eq!(h3.coefficient(-3).unwrap(), int(1));
        assert!(h3.coefficient(-2).unwrap().is_zero() && h3.coefficient(-1).unwrap().is_zero());
    }

    #[test]
    fn json_schema() {
        let f = build_form(Parity::Even, Sign::Minus, 3).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        assert_eq!(v, serde_json::json!({"parity": "even", "eps": "-", "n": 3, "poly": ["0/1", "252/1", "-46/1", "1/1"]}));
        let back: FormSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);
        let bad = serde_json::json!({"parity": "even", "eps": "-", "n": 1, "poly": ["3/1", "1/1"]});
        assert!(serde_json::from_value::<FormSpec>(bad).is_err());
    }

    #[test]
    fn concurrent_memoization_is_idempotent() {
        let handles: Vec<_> = (0..4)
            .map(|_| std::thread::spawn(|| (1..=12).map(|n| form(Parity::Odd, Sign::Minus, n).unwrap()).collect::<Vec<_>>()))
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for r in &results[1..] {
            for (a, b) in r.iter().zip(&results[0]) {
                assert!(Arc::ptr_eq(a, b));
            }
        }
    }

    #[test]
    fn form_values() {
        let g0 = form(Parity::Even, Sign::Plus, 0).unwrap();
        let th = eval_modular(c(0.0, 1.0)).unwrap().theta;
        assert!((eval_form(&g0, c(0.0, 1.0)).unwrap() - th.powi(3)).norm() < 1e-14);
        let g2 = form(Parity::Even, Sign::Plus, 2).unwrap();
        let z = c(0.4, 0.9);
        assert!((eval_form(&g2, z).unwrap() - eval_form(&g2, z + 2.0).unwrap()).norm() < 1e-9);
        let g2m = form(Parity::Even, Sign::Minus, 2).unwrap();
        let z = c(0.0, 1.3);
        let lhs = minus_iz_pow_half_c64(z, -3) * eval_form(&g2m, -1.0 / z).unwrap();
        assert!((lhs + eval_form(&g2m, z).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn transformation_under_s_all_forms() {
        for (parity, k) in [(Parity::Even, -3), (Parity::Odd, -1)] {
            for eps in [Sign::Plus, Sign::Minus] {
                for n in 1..=6 {
                    let f = form(parity, eps, n).unwrap();
                    let z = c(0.3, 1.1);
                    let lhs = minus_iz_pow_half_c64(z, k) * eval_form(&f, -1.0 / z).unwrap();
                    let rhs = eps.value() * eval_form(&f, z).unwrap();
                    assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()), "{parity} {eps} {n}");
                }
            }
        }
    }

    #[test]
    fn vanishing_at_cusp_one() {
        // Weight 1/2 decays more slowly, so the odd forms are probed closer to the cusp.
        for (parity, t) in [(Parity::Even, 20.0), (Parity::Odd, 40.0)] {
            for eps in [Sign::Plus, Sign::Minus] {
                for n in 0..=6 {
                    if let Ok(f) = form(parity, eps, n) {
                        let v = eval_form(&f, c(1.0, 1.0 / t)).unwrap();
                        assert!(v.norm() < 1e-3, "{parity} {eps} {n}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_residue() {
        let tau = c(0.0, 1.7);
        let h = 1e-4;
        let k = eval_kernel(Parity::Even, Sign::Plus, tau, tau + c(0.0, h)).unwrap();
        let want = 1.0 / (Complex64::i() * std::f64::consts::PI);
        assert!((k * c(0.0, h) - want).norm() < 1e-3 * want.norm());
        assert!(matches!(eval_kernel(Parity::Even, Sign::Plus, tau, tau), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn kernel_transformation() {
        let (tau, z) = (c(0.0, 1.5), c(0.0, 2.5));
        let lhs = eval_kernel(Parity::Even, Sign::Plus, -1.0 / tau, z).unwrap();
        let rhs = -minus_iz_pow_half_c64(tau, 1) * eval_kernel(Parity::Even, Sign::Plus, tau, z).unwrap();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn kernel_matches_generating_series() {
        let (tau, z) = (c(0.0, 4.0), c(0.0, 1.2));
        for (parity, eps) in [(Parity::Even, Sign::Plus), (Parity::Even, Sign::Minus), (Parity::Odd, Sign::Plus), (Parity::Odd, Sign::Minus)] {
            let k = eval_kernel(parity, eps, tau, z).unwrap();
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..=8 {
                if let Ok(f) = form(parity, eps, n) {
                    s += eval_form(&f, z).unwrap() * (Complex64::i() * std::f64::consts::PI * n as f64 * tau).exp();
                }
            }
            assert!((s - k).norm() < 1e-6, "{parity} {eps}: {s} vs {k}");
        }
    }
}
