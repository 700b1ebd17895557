//! Minimal complex arithmetic over any [`Real`] backend.

use num_complex::Complex64;

use crate::real::Real;

#[derive(Clone, Debug)]
pub struct Cx<R> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cx<R> {
    pub fn new(re: R, im: R) -> Self {
        Cx { re, im }
    }

    pub fn from_f64(re: f64, im: f64, bits: usize) -> Self {
        Cx { re: R::from_f64_prec(re, bits), im: R::from_f64_prec(im, bits) }
    }

    pub fn from_c64(z: Complex64, bits: usize) -> Self {
        Self::from_f64(z.re, z.im, bits)
    }

    pub fn real(re: R) -> Self {
        let im = re.lit(0.0);
        Cx { re, im }
    }

    pub fn prec(&self) -> usize {
        self.re.prec()
    }

    pub fn lit(&self, re: f64, im: f64) -> Self {
        Self::from_f64(re, im, self.prec())
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(&self, o: &Self) -> Self {
        Cx { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Cx { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn neg(&self) -> Self {
        Cx { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn conj(&self) -> Self {
        Cx { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Cx {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn sqr(&self) -> Self {
        let two_re = self.re.add(&self.re);
        Cx { re: self.re.mul(&self.re).sub(&self.im.mul(&self.im)), im: two_re.mul(&self.im) }
    }

    pub fn scale(&self, s: &R) -> Self {
        Cx { re: self.re.mul(s), im: self.im.mul(s) }
    }

    /// Multiplies by `i`.
    pub fn mul_i(&self) -> Self {
        Cx { re: self.im.neg(), im: self.re.clone() }
    }

    pub fn norm_sqr(&self) -> R {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn abs(&self) -> R {
        self.norm_sqr().sqrt()
    }

    pub fn abs_f64(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    pub fn inv(&self) -> Self {
        self.lit(1.0, 0.0).div(self)
    }

    /// Smith's division, which avoids forming `|o|²` (it under- or overflows
    /// in `f64` for the tiny theta values met near the cusps).
    pub fn div(&self, o: &Self) -> Self {
        if o.im.abs().sub(&o.re.abs()).is_negative() || o.im.is_zero() {
            let r = o.im.div(&o.re);
            let d = o.re.add(&o.im.mul(&r));
            Cx { re: self.re.add(&self.im.mul(&r)).div(&d), im: self.im.sub(&self.re.mul(&r)).div(&d) }
        } else {
            let r = o.re.div(&o.im);
            let d = o.re.mul(&r).add(&o.im);
            Cx { re: self.re.mul(&r).add(&self.im).div(&d), im: self.im.mul(&r).sub(&self.re).div(&d) }
        }
    }

    pub fn exp(&self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Cx { re: m.mul(&c), im: m.mul(&s) }
    }

    /// Principal square root (branch cut on the negative real axis).
    pub fn sqrt(&self) -> Self {
        let r = self.abs();
        if r.is_zero() {
            return self.clone();
        }
        let half = r.lit(0.5);
        if !self.re.is_negative() {
            let t = r.add(&self.re).mul(&half).sqrt();
            let im = self.im.div(&t.add(&t));
            Cx { re: t, im }
        } else {
            let t = r.sub(&self.re).mul(&half).sqrt();
            let re = self.im.abs().div(&t.add(&t));
            let im = if self.im.is_negative() { t.neg() } else { t };
            Cx { re, im }
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = self.lit(1.0, 0.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }
}

/// `(-iz)^{k/2}` on the principal branch, for `z` in the upper half-plane
/// (so `-iz` lies in the right half-plane and the branch is unambiguous).
pub fn minus_iz_pow_half<R: Real>(z: &Cx<R>, k: i32) -> Cx<R> {
    let w = Cx { re: z.im.clone(), im: z.re.neg() };
    let s = w.sqrt();
    let p = s.powi(k.unsigned_abs());
    if k < 0 {
        p.inv()
    } else {
        p
    }
}

/// `(-iz)^{k/2}` in `f64`.
pub fn minus_iz_pow_half_c64(z: Complex64, k: i32) -> Complex64 {
    minus_iz_pow_half(&Cx::<f64>::from_c64(z, 53), k).to_c64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Mp;

    #[test]
    fn sqrt_principal() {
        for (re, im) in [(4.0, 0.0), (-4.0, 0.0), (0.0, 2.0), (-3.0, -4.0), (-1e-20, 1.0), (3.0, 4.0)] {
            let z = Complex64::new(re, im);
            let s = Cx::<f64>::from_c64(z, 53).sqrt().to_c64();
            let want = z.sqrt();
            assert!((s - want).norm() < 1e-15 * (1.0 + want.norm()), "{z}: {s} vs {want}");
            let m = Cx::<Mp>::from_c64(z, 128).sqrt().to_c64();
            assert!((m - want).norm() < 1e-15 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn field_ops() {
        let a = Complex64::new(0.3, -1.2);
        let b = Complex64::new(-2.0, 0.7);
        let ca = Cx::<Mp>::from_c64(a, 128);
        let cb = Cx::<Mp>::from_c64(b, 128);
        assert!((ca.mul(&cb).to_c64() - a * b).norm() < 1e-15);
        assert!((ca.div(&cb).to_c64() - a / b).norm() < 1e-15);
        assert!((ca.exp().to_c64() - a.exp()).norm() < 1e-15);
        assert!((ca.sqr().to_c64() - a * a).norm() < 1e-15);
        assert!((ca.mul_i().to_c64() - a * Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn half_powers() {
        let z = Complex64::new(0.0, 4.0);
        assert!((minus_iz_pow_half_c64(z, 1) - 2.0).norm() < 1e-15);
        assert!((minus_iz_pow_half_c64(z, -3) - 0.125).norm() < 1e-15);
        let z = Complex64::new(-0.9, 0.2);
        let w = (-Complex64::i() * z).powf(1.5);
        assert!((minus_iz_pow_half_c64(z, 3) - w).norm() < 1e-14);
    }
}
