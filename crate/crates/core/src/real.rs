//! Scalar backends for the numerical kernels: `f64`, and [`Mp`], a binary
//! floating-point type with a per-value precision backed by `astro-float`.
//!
//! The basis functions are contour integrals whose integrands are far larger
//! than the result (roughly `e^{π(n - x²)}` times the size of the polynomial
//! coefficients), so large indices need more than 53 bits.

use std::cell::RefCell;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_traits::ToPrimitive;

use crate::qseries::Rational;

const RM: RoundingMode = RoundingMode::ToEven;

/// The operations the kernels need from a real scalar type.
pub trait Real: Clone + Send + Sync + fmt::Debug + 'static {
    /// `v` at the given working precision (ignored by `f64`).
    fn from_f64_prec(v: f64, bits: usize) -> Self;
    fn from_rational(r: &Rational, bits: usize) -> Self;
    fn pi(bits: usize) -> Self;
    fn prec(&self) -> usize;
    fn to_f64(&self) -> f64;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn atan(&self) -> Self;
    fn is_negative(&self) -> bool;
    fn is_zero(&self) -> bool;

    fn lit(&self, v: f64) -> Self {
        Self::from_f64_prec(v, self.prec())
    }

    fn mul_f64(&self, v: f64) -> Self {
        self.mul(&self.lit(v))
    }

    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    /// Two-argument arctangent.
    fn atan2(y: &Self, x: &Self) -> Self {
        let pi = Self::pi(y.prec());
        if x.is_zero() {
            if y.is_zero() {
                return y.lit(0.0);
            }
            let h = pi.mul_f64(0.5);
            return if y.is_negative() { h.neg() } else { h };
        }
        let base = y.div(x).atan();
        if !x.is_negative() {
            base
        } else if y.is_negative() {
            base.sub(&pi)
        } else {
            base.add(&pi)
        }
    }
}

impl Real for f64 {
    fn from_f64_prec(v: f64, _: usize) -> Self {
        v
    }
    fn from_rational(r: &Rational, _: usize) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn pi(_: usize) -> Self {
        std::f64::consts::PI
    }
    fn prec(&self) -> usize {
        53
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
    fn atan2(y: &Self, x: &Self) -> Self {
        f64::atan2(*y, *x)
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Extended-precision real. The precision travels with the value; binary
/// operations use the larger of the two.
#[derive(Clone)]
pub struct Mp {
    v: BigFloat,
    bits: usize,
}

impl Mp {
    pub fn new(v: f64, bits: usize) -> Self {
        Mp { v: BigFloat::from_f64(v, bits), bits }
    }

    fn wrap(v: BigFloat, bits: usize) -> Self {
        Mp { v, bits }
    }

    fn p2(&self, o: &Self) -> usize {
        self.bits.max(o.bits)
    }
}

impl fmt::Debug for Mp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mp({:e}; {} bits)", self.to_f64(), self.bits)
    }
}

/// Round-to-nearest conversion of a big float to `f64` (subnormals flush to zero).
// Words are u32 on 32-bit targets.
#[allow(clippy::useless_conversion)]
fn bigfloat_to_f64(v: &BigFloat) -> f64 {
    if v.is_nan() {
        return f64::NAN;
    }
    if v.is_inf_pos() {
        return f64::INFINITY;
    }
    if v.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let Some((words, _, sign, exp, _)) = v.as_raw_parts() else {
        return f64::NAN;
    };
    let n = words.len();
    if n == 0 || words[n - 1] == 0 {
        return 0.0;
    }
    // value = 0.m × 2^exp with the leading bit at the top of the last word.
    // Gather the top 64 mantissa bits whatever the word size.
    let per = 64 / astro_float::WORD_BIT_SIZE;
    let mut hi = 0u64;
    for k in 0..per {
        hi <<= astro_float::WORD_BIT_SIZE % 64;
        hi |= if k < n { u64::from(words[n - 1 - k]) } else { 0 };
    }
    // Keep 64 bits of hi plus a sticky bit from lower words for correct rounding.
    let sticky = (n > per && words[..n - per].iter().any(|&w| w != 0)) as u64;
    let top = (hi >> 11) as f64; // 53 bits, exact
    let rest = ((hi & 0x7ff) << 1 | sticky) as f64; // bits below, exact
    let m = top * 2048.0 + rest * 0.5;
    let mag = ldexp(m, exp - 64);
    if sign == Sign::Neg {
        -mag
    } else {
        mag
    }
}

fn ldexp(m: f64, e: i32) -> f64 {
    // Split to avoid overflow of 2^e in intermediate steps.
    let mut x = m;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

impl Real for Mp {
    fn from_f64_prec(v: f64, bits: usize) -> Self {
        Mp::new(v, bits)
    }
    fn from_rational(r: &Rational, bits: usize) -> Self {
        let parse = |s: String| with_consts(|c| BigFloat::parse(&s, astro_float::Radix::Dec, bits + 64, RM, c));
        let n = parse(r.numer().to_string());
        let d = parse(r.denom().to_string());
        Mp::wrap(n.div(&d, bits, RM), bits)
    }
    fn pi(bits: usize) -> Self {
        Mp::wrap(with_consts(|c| c.pi(bits, RM)), bits)
    }
    fn prec(&self) -> usize {
        self.bits
    }
    fn to_f64(&self) -> f64 {
        bigfloat_to_f64(&self.v)
    }
    fn add(&self, o: &Self) -> Self {
        let p = self.p2(o);
        Mp::wrap(self.v.add(&o.v, p, RM), p)
    }
    fn sub(&self, o: &Self) -> Self {
        let p = self.p2(o);
        Mp::wrap(self.v.sub(&o.v, p, RM), p)
    }
    fn mul(&self, o: &Self) -> Self {
        let p = self.p2(o);
        Mp::wrap(self.v.mul(&o.v, p, RM), p)
    }
    fn div(&self, o: &Self) -> Self {
        let p = self.p2(o);
        Mp::wrap(self.v.div(&o.v, p, RM), p)
    }
    fn neg(&self) -> Self {
        Mp::wrap(self.v.neg(), self.bits)
    }
    fn abs(&self) -> Self {
        Mp::wrap(self.v.abs(), self.bits)
    }
    fn sqrt(&self) -> Self {
        Mp::wrap(self.v.sqrt(self.bits, RM), self.bits)
    }
    fn exp(&self) -> Self {
        Mp::wrap(with_consts(|c| self.v.exp(self.bits, RM, c)), self.bits)
    }
    fn ln(&self) -> Self {
        Mp::wrap(with_consts(|c| self.v.ln(self.bits, RM, c)), self.bits)
    }
    fn sin(&self) -> Self {
        Mp::wrap(with_consts(|c| self.v.sin(self.bits, RM, c)), self.bits)
    }
    fn cos(&self) -> Self {
        Mp::wrap(with_consts(|c| self.v.cos(self.bits, RM, c)), self.bits)
    }
    fn atan(&self) -> Self {
        Mp::wrap(with_consts(|c| self.v.atan(self.bits, RM, c)), self.bits)
    }
    fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }
    fn is_zero(&self) -> bool {
        self.v.is_zero()
    }
}

/// Working precision (in bits) used for basis functions up to index `n_max`;
/// `None` means `f64` suffices.
pub fn precision_for_index(n_max: usize) -> Option<usize> {
    if n_max <= 2 {
        None
    } else {
        let need = 64 + 7 * n_max;
        Some(need.div_ceil(64) * 64)
    }
}
