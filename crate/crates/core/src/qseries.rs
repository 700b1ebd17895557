//! Truncated Laurent series in `p = e^{iπz}` with exact rational coefficients.
//!
//! A [`PuiseuxSeries`] stores the coefficients of `p^min_exp, …, p^(order-1)` and
//! is exact for every exponent below `order`. Arithmetic tracks the largest order
//! that the operands determine and never claims more.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Laurent series in `p`, exact below `order`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SeriesJson", into = "SeriesJson")]
pub struct PuiseuxSeries {
    min_exp: i64,
    coeffs: Vec<Rational>,
    order: i64,
}

impl PuiseuxSeries {
    /// Builds a series from the coefficients of `p^min_exp, p^(min_exp+1), …`.
    /// Coefficients at or beyond `order` are dropped; missing ones are zero.
    pub fn new(min_exp: i64, mut coeffs: Vec<Rational>, order: i64) -> Self {
        let keep = (order - min_exp).max(0) as usize;
        coeffs.truncate(keep);
        coeffs.resize(keep, Rational::zero());
        let mut s = PuiseuxSeries { min_exp: min_exp.min(order), coeffs, order };
        s.normalize();
        s
    }

    pub fn from_ints(min_exp: i64, coeffs: &[i64], order: i64) -> Self {
        Self::new(min_exp, coeffs.iter().map(|&c| int(c)).collect(), order)
    }

    /// `0 + O(p^order)`.
    pub fn zero(order: i64) -> Self {
        PuiseuxSeries { min_exp: order, coeffs: Vec::new(), order }
    }

    pub fn one(order: i64) -> Self {
        Self::monomial(Rational::one(), 0, order)
    }

    /// `c·p^e + O(p^order)`.
    pub fn monomial(c: Rational, e: i64, order: i64) -> Self {
        Self::new(e, vec![c], order)
    }

    pub fn min_exp(&self) -> i64 {
        self.min_exp
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `p^e`; an error if `e` is not below the order.
    pub fn coefficient(&self, e: i64) -> Result<Rational> {
        if e >= self.order {
            return Err(Error::BeyondOrder { exp: e, order: self.order });
        }
        Ok(self.coeff_or_zero(e))
    }

    fn coeff_or_zero(&self, e: i64) -> Rational {
        if e < self.min_exp || e >= self.order {
            Rational::zero()
        } else {
            self.coeffs[(e - self.min_exp) as usize].clone()
        }
    }

    fn coeff_ref(&self, e: i64) -> Option<&Rational> {
        if e < self.min_exp {
            None
        } else {
            self.coeffs.get((e - self.min_exp) as usize)
        }
    }

    /// Drops all terms at or above `order` (no-op if already shorter).
    pub fn truncate(&self, order: i64) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Self::new(self.min_exp, self.coeffs.clone(), order)
    }

    fn normalize(&mut self) {
        let lead = self.coeffs.iter().position(|c| !c.is_zero());
        match lead {
            Some(0) => {}
            Some(k) => {
                self.coeffs.drain(..k);
                self.min_exp += k as i64;
            }
            None => {
                self.coeffs.clear();
                self.min_exp = self.order;
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let lo = self.min_exp.min(other.min_exp).min(order);
        let coeffs = (lo..order)
            .map(|e| match (self.coeff_ref(e), other.coeff_ref(e)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => Rational::zero(),
            })
            .collect();
        Self::new(lo, coeffs, order)
    }

    pub fn neg(&self) -> Self {
        PuiseuxSeries {
            min_exp: self.min_exp,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            order: self.order,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.order);
        }
        PuiseuxSeries {
            min_exp: self.min_exp,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
            order: self.order,
        }
    }

    /// Multiplies by `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        PuiseuxSeries {
            min_exp: self.min_exp + k,
            coeffs: self.coeffs.clone(),
            order: self.order + k,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = (self.order + other.min_exp).min(other.order + self.min_exp);
        let lo = self.min_exp + other.min_exp;
        if self.is_zero() || other.is_zero() || lo >= order {
            return Self::zero(order);
        }
        let len = (order - lo) as usize;
        let mut out = vec![Rational::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(len - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Self::new(lo, out, order)
    }

    /// `self^k`; `self^0` is 1 to the relative precision of `self`.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc: Option<Self> = None;
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc.unwrap_or_else(|| Self::one(self.order - self.min_exp))
    }

    /// Adds a constant to the `p^0` coefficient.
    pub fn add_scalar(&self, c: &Rational) -> Self {
        if self.order <= 0 {
            return self.clone();
        }
        self.add(&Self::monomial(c.clone(), 0, self.order))
    }

    /// Multiplicative inverse. For `a = c·p^m(1 + …)` known below `p^N`, the
    /// inverse is known below `p^(N - 2m)`.
    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NotInvertible);
        }
        let m = self.min_exp;
        let rel = (self.order - m) as usize;
        let lead_inv = self.coeffs[0].recip();
        let mut inv: Vec<Rational> = Vec::with_capacity(rel);
        inv.push(lead_inv.clone());
        for k in 1..rel {
            let mut s = Rational::zero();
            for j in 1..=k {
                if let Some(a) = self.coeffs.get(j) {
                    if !a.is_zero() {
                        s += a * &inv[k - j];
                    }
                }
            }
            inv.push(-(s * &lead_inv));
        }
        Ok(Self::new(-m, inv, self.order - 2 * m))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.invert()?))
    }

    /// Evaluates a polynomial with the given coefficients (constant first) at this series.
    pub fn compose_poly(&self, poly: &[Rational]) -> Self {
        let Some((top, rest)) = poly.split_last() else {
            return Self::zero(self.order - self.min_exp);
        };
        let mut acc = Self::one(self.order - self.min_exp).scale(top);
        for c in rest.iter().rev() {
            acc = acc.mul(self).add_scalar(c);
        }
        acc
    }
}

impl fmt::Debug for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = self.min_exp + k as i64;
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let unit = mag.is_one();
            match e {
                0 => write!(f, "{mag}")?,
                1 if unit => write!(f, "p")?,
                1 => write!(f, "{mag}p")?,
                _ if unit => write!(f, "p^{e}")?,
                _ => write!(f, "{mag}p^{e}")?,
            }
        }
        if first {
            write!(f, "O(p^{})", self.order)
        } else {
            write!(f, " + O(p^{})", self.order)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    min_exp: i64,
    order: i64,
    coeffs: Vec<String>,
}

impl From<PuiseuxSeries> for SeriesJson {
    fn from(s: PuiseuxSeries) -> Self {
        SeriesJson {
            min_exp: s.min_exp,
            order: s.order,
            coeffs: s.coeffs.iter().map(rational_string).collect(),
        }
    }
}

impl TryFrom<SeriesJson> for PuiseuxSeries {
    type Error = String;

    fn try_from(j: SeriesJson) -> std::result::Result<Self, String> {
        if j.min_exp > j.order || j.coeffs.len() as i64 != j.order - j.min_exp {
            return Err("coefficient count must equal order - min_exp".into());
        }
        let coeffs = j
            .coeffs
            .iter()
            .map(|s| parse_rational(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(PuiseuxSeries::new(j.min_exp, coeffs, j.order))
    }
}

/// `num/den` in lowest terms, denominator always present.
pub fn rational_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> std::result::Result<Rational, String> {
    Rational::from_str(s.trim()).map_err(|e| format!("bad rational `{s}`: {e}"))
}

pub fn int(c: i64) -> Rational {
    Rational::from_integer(BigInt::from(c))
}

/// The expansions that the construction needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesName {
    Theta3,
    Theta3Cubed,
    Theta2_4,
    Theta4_4,
    Lambda,
    OneMinus2Lambda,
    J,
    JInv,
}

impl SeriesName {
    pub const ALL: [SeriesName; 8] = [
        SeriesName::Theta3,
        SeriesName::Theta3Cubed,
        SeriesName::Theta2_4,
        SeriesName::Theta4_4,
        SeriesName::Lambda,
        SeriesName::OneMinus2Lambda,
        SeriesName::J,
        SeriesName::JInv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SeriesName::Theta3 => "theta3",
            SeriesName::Theta3Cubed => "theta3_cubed",
            SeriesName::Theta2_4 => "theta2_4",
            SeriesName::Theta4_4 => "theta4_4",
            SeriesName::Lambda => "lambda",
            SeriesName::OneMinus2Lambda => "one_minus_2lambda",
            SeriesName::J => "J",
            SeriesName::JInv => "J_inv",
        }
    }
}

impl FromStr for SeriesName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownSeries(s.to_string()))
    }
}

/// `Σ_{k≥0} c(k)·p^{e(k)}` over the exponents `e(k) < order`.
fn lacunary(order: i64, mut term: impl FnMut(i64) -> (i64, i64)) -> PuiseuxSeries {
    let mut coeffs = vec![Rational::zero(); order.max(0) as usize];
    let mut k = 0;
    loop {
        let (e, c) = term(k);
        if e >= order {
            break;
        }
        coeffs[e as usize] += int(c);
        k += 1;
    }
    PuiseuxSeries::new(0, coeffs, order)
}

fn theta3_raw(order: i64) -> PuiseuxSeries {
    lacunary(order, |k| (k * k, if k == 0 { 1 } else { 2 }))
}

fn theta4_raw(order: i64) -> PuiseuxSeries {
    lacunary(order, |k| (k * k, if k == 0 { 1 } else if k % 2 == 1 { -2 } else { 2 }))
}

/// The named expansion, exact below `p^order`.
pub fn modular_series(name: SeriesName, order: i64) -> PuiseuxSeries {
    assert!(order >= 1, "order must be at least 1");
    // J has a simple zero, so J_inv loses two orders; everything else is exact.
    let m = order + 2;
    let t3_4 = || theta3_raw(m).pow(4);
    let t2_4 = || lacunary(m - 1, |k| (k * (k + 1), 2)).pow(4).shift(1);
    let lambda = || t2_4().div(&t3_4()).expect("theta3 is a unit");
    let j = || {
        let l = lambda();
        l.mul(&PuiseuxSeries::one(m).sub(&l)).scale(&Rational::new(1.into(), 16.into()))
    };
    let s = match name {
        SeriesName::Theta3 => theta3_raw(m),
        SeriesName::Theta3Cubed => theta3_raw(m).pow(3),
        SeriesName::Theta2_4 => t2_4(),
        SeriesName::Theta4_4 => theta4_raw(m).pow(4),
        SeriesName::Lambda => lambda(),
        SeriesName::OneMinus2Lambda => theta4_raw(m).pow(4).sub(&t2_4()).div(&t3_4()).expect("theta3 is a unit"),
        SeriesName::J => j(),
        SeriesName::JInv => j().invert().expect("J is nonzero"),
    };
    debug_assert!(s.order() >= order);
    s.truncate(order)
}
