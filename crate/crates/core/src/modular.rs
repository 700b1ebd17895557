//! Theta constants, the Hauptmodul `J`, and automorphy factors at points of the
//! upper half-plane.
//!
//! Every evaluation first reduces the point into the `SL₂(ℤ)` fundamental domain,
//! where `|e^{iπz}| ≤ e^{-π√3/2}`, sums the theta series there, and transports
//! the values back with the `S` and `T` transformation laws.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cx::{minus_iz_pow_half, Cx};
use crate::error::{Error, Result};
use crate::real::{Mp, Real};

/// Maximum number of reduction steps before giving up.
pub const MAX_REDUCTION_STEPS: usize = 10_000;

/// Largest translation a single reduction step will perform.
const MAX_TRANSLATION: f64 = 1e7;

/// Sign in `Θ(-1/z) = s·√(-iz)·Θ(·)`. Fixed by comparing against direct sums at
/// `z = 2i` (see the `s_law_calibration` test).
const S_LAW_SIGN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    S,
    T,
    TInv,
    T2,
    T2Inv,
}

type Mat = [[i128; 2]; 2];

impl Letter {
    pub fn matrix(self) -> Mat {
        match self {
            Letter::S => [[0, -1], [1, 0]],
            Letter::T => [[1, 1], [0, 1]],
            Letter::TInv => [[1, -1], [0, 1]],
            Letter::T2 => [[1, 2], [0, 1]],
            Letter::T2Inv => [[1, -2], [0, 1]],
        }
    }

    /// The letter acting as the inverse Möbius map (`S` is an involution on ℍ).
    pub fn inverse(self) -> Letter {
        match self {
            Letter::S => Letter::S,
            Letter::T => Letter::TInv,
            Letter::TInv => Letter::T,
            Letter::T2 => Letter::T2Inv,
            Letter::T2Inv => Letter::T2,
        }
    }

    pub fn in_theta_group(self) -> bool {
        !matches!(self, Letter::T | Letter::TInv)
    }

    fn shift(self) -> i64 {
        match self {
            Letter::S => 0,
            Letter::T => 1,
            Letter::TInv => -1,
            Letter::T2 => 2,
            Letter::T2Inv => -2,
        }
    }

    pub fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Letter::S => -1.0 / z,
            l => z + l.shift() as f64,
        }
    }

    fn apply_r<R: Real>(self, z: &Cx<R>) -> Cx<R> {
        match self {
            Letter::S => z.inv().neg(),
            l => Cx::new(z.re.add(&z.re.lit(l.shift() as f64)), z.im.clone()),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Letter::S => "S",
            Letter::T => "T",
            Letter::TInv => "T^-1",
            Letter::T2 => "T^2",
            Letter::T2Inv => "T^-2",
        }
    }
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut r = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// A word in the generators together with the product of their matrices.
/// As a map, `w(z) = L₁(L₂(⋯L_k(z)))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoebiusWord {
    letters: Vec<Letter>,
    matrix: Mat,
}

impl Default for MoebiusWord {
    fn default() -> Self {
        MoebiusWord { letters: Vec::new(), matrix: [[1, 0], [0, 1]] }
    }
}

impl MoebiusWord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut w = Self::new();
        for &l in letters {
            w.push(l);
        }
        w
    }

    /// Appends a letter on the right.
    pub fn push(&mut self, l: Letter) {
        self.letters.push(l);
        self.matrix = mat_mul(&self.matrix, &l.matrix());
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn matrix(&self) -> Mat {
        self.matrix
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn det(&self) -> i128 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn is_theta_word(&self) -> bool {
        self.letters.iter().all(|l| l.in_theta_group())
    }

    /// The word of the inverse map.
    pub fn inverse(&self) -> Self {
        let letters: Vec<Letter> = self.letters.iter().rev().map(|l| l.inverse()).collect();
        Self::from_letters(&letters)
    }

    /// Applies the map letter by letter, rightmost first.
    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.letters.iter().rev().fold(z, |z, l| l.apply(z))
    }
}

impl fmt::Display for MoebiusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<&str> = self.letters.iter().map(|l| l.as_str()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn check_point(z: Complex64) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() && z.im > 0.0 {
        Ok(())
    } else {
        Err(Error::NotInUpperHalfPlane { re: z.re, im: z.im })
    }
}

fn reduce(z: Complex64, period: f64, up: Letter, down: Letter) -> Result<(Complex64, MoebiusWord)> {
    check_point(z)?;
    let mut zc = z;
    let mut w = MoebiusWord::new();
    for _ in 0..MAX_REDUCTION_STEPS {
        let k = (zc.re / period).round();
        if k.abs() > MAX_TRANSLATION {
            return Err(Error::ReductionNonConvergence(MAX_REDUCTION_STEPS));
        }
        if k != 0.0 {
            zc.re -= k * period;
            let l = if k > 0.0 { up } else { down };
            for _ in 0..k.abs() as u64 {
                w.push(l);
            }
        }
        if zc.norm_sqr() < 1.0 - 1e-13 {
            zc = -1.0 / zc;
            w.push(Letter::S);
            if zc.im <= 0.0 || !zc.im.is_finite() {
                return Err(Error::NotInUpperHalfPlane { re: z.re, im: z.im });
            }
        } else {
            return Ok((zc, w));
        }
    }
    Err(Error::ReductionNonConvergence(MAX_REDUCTION_STEPS))
}

/// Moves `z` into `{|z| ≥ 1, |Re z| ≤ 1/2}`. Returns `(z′, w)` with `w(z′) = z`.
pub fn reduce_sl2(z: Complex64) -> Result<(Complex64, MoebiusWord)> {
    reduce(z, 1.0, Letter::T, Letter::TInv)
}

/// Moves `τ` into the theta-group domain `{|τ| ≥ 1, |Re τ| ≤ 1}` using only
/// `S` and `T^{±2}`. Returns `(τ′, w)` with `w(τ′) = τ`.
pub fn reduce_gamma_theta(tau: Complex64) -> Result<(Complex64, MoebiusWord)> {
    reduce(tau, 2.0, Letter::T2, Letter::T2Inv)
}

/// Values of `Θ₂, Θ₃, Θ₄` at `z`, with the Jacobi-identity residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaTriple {
    pub z: Complex64,
    pub t2: Complex64,
    pub t3: Complex64,
    pub t4: Complex64,
    /// `|Θ₃⁴ − Θ₂⁴ − Θ₄⁴| / |Θ₃|⁴`.
    pub residual: f64,
}

pub(crate) struct ThetaR<R> {
    pub t2: Cx<R>,
    pub t3: Cx<R>,
    pub t4: Cx<R>,
}

/// Theta sums at a point of the fundamental domain.
fn theta_sums<R: Real>(z: &Cx<R>) -> ThetaR<R> {
    let bits = z.prec();
    let pi = R::pi(bits);
    // r = e^{iπz/4}, p = r⁴ = e^{iπz}.
    let quarter = z.mul_i().scale(&pi.mul_f64(0.25));
    let r = quarter.exp();
    let p = r.sqr().sqr();
    let p2 = p.sqr();
    let abs_p = (-std::f64::consts::PI * z.im.to_f64()).exp();
    let tol_log2 = -(bits.max(60) as f64) - 8.0;
    let small = |e: u64| (e as f64) * abs_p.log2() < tol_log2;

    let one = z.lit(1.0, 0.0);
    // p^{n²} via odd steps p^{2n+1}; p^{n(n+1)} via even steps p^{2n}.
    let mut s3 = z.lit(0.0, 0.0);
    let mut s4 = z.lit(0.0, 0.0);
    let mut sq = one.clone();
    let mut step = p.clone();
    let mut n: u64 = 1;
    loop {
        sq = sq.mul(&step);
        if n % 2 == 1 {
            s4 = s4.sub(&sq);
        } else {
            s4 = s4.add(&sq);
        }
        s3 = s3.add(&sq);
        if small(n * n) {
            break;
        }
        step = step.mul(&p2);
        n += 1;
    }
    let mut s2 = one.clone();
    let mut tri = one.clone();
    let mut step = p2.clone();
    let mut n: u64 = 1;
    loop {
        tri = tri.mul(&step);
        s2 = s2.add(&tri);
        if small(n * (n + 1)) {
            break;
        }
        step = step.mul(&p2);
        n += 1;
    }
    let two = z.re.lit(2.0);
    ThetaR {
        t2: r.mul(&s2).scale(&two),
        t3: one.add(&s3.scale(&two)),
        t4: one.add(&s4.scale(&two)),
    }
}

/// `Θ₂, Θ₃, Θ₄` at `z` in the backend `R`.
pub(crate) fn theta_r<R: Real>(z: &Cx<R>) -> Result<ThetaR<R>> {
    let (_, w) = reduce_sl2(z.to_c64())?;
    // Replay the reduction exactly: pts[i] = L_i^{-1}(pts[i-1]).
    let letters = w.letters();
    let mut pts = Vec::with_capacity(letters.len() + 1);
    pts.push(z.clone());
    for l in letters {
        let next = l.inverse().apply_r(pts.last().expect("nonempty"));
        pts.push(next);
    }
    let mut th = theta_sums(pts.last().expect("nonempty"));
    let bits = z.prec();
    let eighth = |k: i64| {
        let ang = R::pi(bits).mul_f64(k.rem_euclid(8) as f64 / 4.0);
        let (s, c) = ang.sin_cos();
        Cx::new(c, s)
    };
    let mut i = letters.len();
    while i > 0 {
        match letters[i - 1] {
            Letter::S => {
                // pts[i-1] = -1/pts[i]
                let r = minus_iz_pow_half(&pts[i], 1).scale(&R::from_f64_prec(S_LAW_SIGN, bits));
                th = ThetaR { t2: r.mul(&th.t4), t3: r.mul(&th.t3), t4: r.mul(&th.t2) };
                i -= 1;
            }
            _ => {
                // Collapse a run of translations.
                let mut shift = 0i64;
                while i > 0 && letters[i - 1] != Letter::S {
                    shift += letters[i - 1].shift();
                    i -= 1;
                }
                let t2 = th.t2.mul(&eighth(shift));
                th = if shift.rem_euclid(2) == 1 {
                    ThetaR { t2, t3: th.t4, t4: th.t3 }
                } else {
                    ThetaR { t2, t3: th.t3, t4: th.t4 }
                };
            }
        }
    }
    Ok(th)
}

/// Theta constants at `z`, accurate to about `1e-14·max(1, |Θ₃|)`.
///
/// Near the cusp at 1, `Θ₃` is tiny while `Θ₂⁴ ≈ -Θ₄⁴` are large, so the residual
/// is ill-conditioned; there the triple is recomputed with enough extra bits
/// that the residual measures the evaluation rather than double rounding.
pub fn theta_constants(z: Complex64) -> Result<ThetaTriple> {
    let th = theta_r(&Cx::<f64>::from_c64(z, 53))?;
    let (t2, t3, t4) = (th.t2.to_c64(), th.t3.to_c64(), th.t4.to_c64());
    let kappa = (t2.norm().max(t4.norm()) / t3.norm()).powi(4);
    let residual = if kappa < 1e3 {
        (t3.powi(4) - t2.powi(4) - t4.powi(4)).norm() / t3.norm().powi(4)
    } else {
        let bits = (128 + kappa.log2().ceil() as usize).div_ceil(64) * 64;
        let m = theta_r(&Cx::<Mp>::from_c64(z, bits))?;
        let q = |t: &Cx<Mp>| t.sqr().sqr();
        let num = q(&m.t3).sub(&q(&m.t2)).sub(&q(&m.t4));
        num.abs().div(&q(&m.t3).abs()).to_f64()
    };
    Ok(ThetaTriple { z, t2, t3, t4, residual })
}

/// Modular quantities used by the forms: `θ = Θ₃`, `θ³`, `1 − 2λ` and `J⁻¹`.
#[derive(Clone, Debug)]
pub(crate) struct ModularR<R> {
    pub theta: Cx<R>,
    pub theta3: Cx<R>,
    pub one_minus_2lambda: Cx<R>,
    pub j_inv: Cx<R>,
}

pub(crate) fn modular_r<R: Real>(z: &Cx<R>) -> Result<ModularR<R>> {
    let th = theta_r(z)?;
    let a = th.t2.sqr().sqr();
    let b = th.t4.sqr().sqr();
    let t3sq = th.t3.sqr();
    let c = t3sq.sqr();
    let one_minus_2lambda = b.sub(&a).div(&c);
    // J = λ(1-λ)/16 = Θ₂⁴Θ₄⁴/(16Θ₃⁸)
    let j_inv = c.sqr().scale(&z.re.lit(16.0)).div(&a.mul(&b));
    let theta3 = t3sq.mul(&th.t3);
    Ok(ModularR { theta: th.t3, theta3, one_minus_2lambda, j_inv })
}

/// `θ, θ³, λ, 1 − 2λ, J, J⁻¹` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularValues {
    pub theta: Complex64,
    pub theta_cubed: Complex64,
    pub lambda: Complex64,
    pub one_minus_2lambda: Complex64,
    pub j: Complex64,
    pub j_inv: Complex64,
}

pub fn eval_modular(z: Complex64) -> Result<ModularValues> {
    let th = theta_constants(z)?;
    let a = th.t2.powi(4);
    let b = th.t4.powi(4);
    let c = th.t3.powi(4);
    let lambda = a / c;
    let j = a * b / (16.0 * c * c);
    Ok(ModularValues {
        theta: th.t3,
        theta_cubed: th.t3.powi(3),
        lambda,
        one_minus_2lambda: (b - a) / c,
        j,
        j_inv: 1.0 / j,
    })
}

/// `j_θ(z, w)` via `j(z, γ₁γ₂) = j(z, γ₂)·j(γ₂z, γ₁)`, with
/// `j(z, S) = (-iz)^{-1/2}` and `j(z, T^{±2}) = 1`.
pub fn automorphy_jtheta(z: Complex64, w: &MoebiusWord) -> Result<Complex64> {
    check_point(z)?;
    if let Some(&bad) = w.letters().iter().find(|l| !l.in_theta_group()) {
        return Err(Error::NotThetaWord(bad.as_str()));
    }
    let mut factor = Complex64::new(1.0, 0.0);
    let mut zc = z;
    for l in w.letters().iter().rev() {
        if *l == Letter::S {
            factor *= crate::cx::minus_iz_pow_half_c64(zc, -1);
        }
        zc = l.apply(zc);
    }
    Ok(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn in_sl2_domain(z: Complex64) -> bool {
        z.norm() >= 1.0 - 1e-12 && z.re.abs() <= 0.5 + 1e-12
    }

    #[test]
    fn reduce_examples() {
        let (z, w) = reduce_sl2(c(0.0, 2.0)).unwrap();
        assert_eq!(z, c(0.0, 2.0));
        assert!(w.is_empty());
        let (z, w) = reduce_sl2(c(0.0, 0.5)).unwrap();
        assert!((z - c(0.0, 2.0)).norm() < 1e-15);
        assert!((w.apply(z) - c(0.0, 0.5)).norm() < 1e-15);
        let z0 = c(1.0, 0.1);
        let (z, w) = reduce_sl2(z0).unwrap();
        assert!(z.im >= 3f64.sqrt() / 2.0 - 1e-12 && in_sl2_domain(z));
        assert!((w.apply(z) - z0).norm() < 1e-12);
        assert_eq!(w.det(), 1);
        assert!(reduce_sl2(c(0.3, 0.0)).is_err());
        assert!(reduce_sl2(c(0.3, -1.0)).is_err());
    }

    #[test]
    fn theta_reduction_examples() {
        let (t, w) = reduce_gamma_theta(c(0.0, 3.0)).unwrap();
        assert_eq!(t, c(0.0, 3.0));
        assert!(w.is_empty());
        let w0 = MoebiusWord::from_letters(&[Letter::T2, Letter::S]);
        let tau = w0.apply(c(0.0, 2.0));
        let (t, w) = reduce_gamma_theta(tau).unwrap();
        assert!((t - c(0.0, 2.0)).norm() < 1e-14);
        assert_eq!(w.letters(), w0.letters());
        assert_eq!(w.matrix(), w0.matrix());
        assert!(w.is_theta_word());
    }

    #[test]
    fn word_matrix_and_inverse() {
        let w = MoebiusWord::from_letters(&[Letter::T, Letter::S, Letter::T2Inv, Letter::S]);
        let m = w.matrix();
        let z = c(0.21, 0.77);
        let via_matrix = (z * m[0][0] as f64 + m[0][1] as f64) / (z * m[1][0] as f64 + m[1][1] as f64);
        assert!((w.apply(z) - via_matrix).norm() < 1e-14);
        assert!((w.inverse().apply(w.apply(z)) - z).norm() < 1e-14);
        assert_eq!(w.to_string(), "T S T^-2 S");
    }

    #[test]
    fn s_law_calibration() {
        // Direct sums at 2i and i/2 fix the sign of Θ₃(-1/z) = ±√(-iz)Θ₃(z).
        let sum = |z: Complex64| (-40..=40).map(|n: i32| (Complex64::i() * std::f64::consts::PI * (n * n) as f64 * z).exp()).sum::<Complex64>();
        let z = c(0.0, 2.0);
        let lhs = sum(-1.0 / z);
        let rhs = crate::cx::minus_iz_pow_half_c64(z, 1) * sum(z);
        assert!((lhs - rhs).norm() < 1e-14, "{lhs} vs {rhs}");
        assert!((lhs + rhs).norm() > 1.0);
        let t = theta_constants(c(0.0, 0.5)).unwrap();
        assert!((t.t3 - sum(c(0.0, 0.5))).norm() < 1e-14);
    }

    #[test]
    fn fixed_point_values() {
        let m = eval_modular(c(0.0, 1.0)).unwrap();
        assert!((m.lambda - 0.5).norm() < 1e-12);
        assert!((m.j - 1.0 / 64.0).norm() < 1e-12);
        let m = eval_modular(c(0.0, 10.0)).unwrap();
        let lead = 16.0 * (-10.0 * std::f64::consts::PI).exp();
        assert!(((m.lambda.re - lead) / lead).abs() < 1e-6);
        let a = eval_modular(c(0.3, 0.8)).unwrap().j;
        let b = eval_modular(c(2.3, 0.8)).unwrap().j;
        assert!((a - b).norm() < 1e-11);
    }

    #[test]
    fn jacobi_identity_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let z = c(rng.gen_range(-3.0..3.0), 10f64.powf(rng.gen_range(-2.0..1.0)));
            let t = theta_constants(z).unwrap();
            assert!(t.residual < 1e-10, "{z}: {}", t.residual);
            assert!(t.t2.norm() > 0.0 && t.t3.norm() > 0.0 && t.t4.norm() > 0.0);
        }
    }

    #[test]
    fn transformation_laws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.05..3.0));
            let m = eval_modular(z).unwrap();
            let ms = eval_modular(-1.0 / z).unwrap();
            let mt = eval_modular(z + 1.0).unwrap();
            let mt2 = eval_modular(z + 2.0).unwrap();
            let scale = m.theta.norm();
            assert!((ms.theta - crate::cx::minus_iz_pow_half_c64(z, 1) * m.theta).norm() < 1e-10 * ms.theta.norm().max(scale));
            assert!((ms.lambda - (1.0 - m.lambda)).norm() < 1e-10 * (1.0 + m.lambda.norm()));
            assert!((mt.lambda - m.lambda / (m.lambda - 1.0)).norm() < 1e-10 * (1.0 + mt.lambda.norm()));
            assert!((ms.j - m.j).norm() < 1e-10 * (1.0 + m.j.norm()));
            assert!((mt2.j - m.j).norm() < 1e-10 * (1.0 + m.j.norm()));
        }
    }

    #[test]
    fn sign_of_im_j_on_domain_halves() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut n = 0;
        while n < 200 {
            let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.5));
            if z.norm() < 1.0 || z.re == 0.0 {
                continue;
            }
            n += 1;
            let j = eval_modular(z).unwrap().j;
            if z.re < 0.0 {
                assert!(j.im < 0.0, "{z}: {j}");
            } else {
                assert!(j.im >= 0.0, "{z}: {j}");
            }
        }
    }

    #[test]
    fn automorphy_factor() {
        let one = Complex64::new(1.0, 0.0);
        let z = c(0.4, 0.9);
        assert!((automorphy_jtheta(z, &MoebiusWord::from_letters(&[Letter::T2])).unwrap() - one).norm() < 1e-15);
        assert!((automorphy_jtheta(c(0.0, 1.0), &MoebiusWord::from_letters(&[Letter::S])).unwrap() - one).norm() < 1e-15);
        assert!((automorphy_jtheta(z, &MoebiusWord::from_letters(&[Letter::S, Letter::S])).unwrap() - one).norm() < 1e-12);
        assert!(automorphy_jtheta(z, &MoebiusWord::from_letters(&[Letter::T])).is_err());
        // j(z, γ) = θ(z)/θ(γz)
        let w = MoebiusWord::from_letters(&[Letter::S, Letter::T2, Letter::S, Letter::T2Inv, Letter::S]);
        let lhs = automorphy_jtheta(z, &w).unwrap();
        let rhs = eval_modular(z).unwrap().theta / eval_modular(w.apply(z)).unwrap().theta;
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn extended_precision_agrees() {
        for z in [c(0.0, 1.0), c(0.37, 0.02), c(-0.999, 0.03), c(0.5, 0.5)] {
            let f = modular_r(&Cx::<f64>::from_c64(z, 53)).unwrap();
            let m = modular_r(&Cx::<Mp>::from_c64(z, 256)).unwrap();
            let rel = |a: &Cx<f64>, b: &Cx<Mp>| (a.to_c64() - b.to_c64()).norm() / b.to_c64().norm().max(1e-300);
            assert!(rel(&f.theta, &m.theta) < 1e-12);
            assert!(rel(&f.j_inv, &m.j_inv) < 1e-11);
        }
        // At z = i the 256-bit J⁻¹ equals 64 far beyond double precision.
        let m = modular_r(&Cx::<Mp>::from_c64(c(0.0, 1.0), 256)).unwrap();
        let err = m.j_inv.re.sub(&Mp::new(64.0, 256)).abs();
        assert!(err.to_f64() < 1e-60, "{err:?}");
    }
}
