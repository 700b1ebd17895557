//! Reconstruction of a function from samples of itself and its Fourier
//! transform at the nodes `√n`.
//!
//! Even: `f(x) = Σ a_n(x)f(√n) + Σ â_n(x)f̂(√n)`.
//! Odd: `f(x) = d₀⁺(x)(f′(0) + i f̂′(0))/2 + Σ_{n≥1} c_n(x)f(√n)/√n − Σ_{n≥1} ĉ_n(x)f̂(√n)/√n`
//! with `c_n = (d_n⁺ + d_n⁻)/2` and `ĉ_n = −i(d_n⁺ − d_n⁻)/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_values, growth_envelope, Families, MethodChoice, NEGLIGIBLE_TERM};
use crate::cx::minus_iz_pow_half_c64;
use crate::error::{Error, Result};
use crate::forms::{Parity, Sign};
use crate::oracle::r3;

/// Samples of `f` and `f̂` at the nodes. For odd sets the entries are divided
/// by `√n` and start at `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleJson", into = "SampleJson")]
pub struct SampleSet {
    pub parity: Parity,
    pub n: usize,
    pub f: Vec<Complex64>,
    pub fhat: Vec<Complex64>,
    /// `(f′(0), f̂′(0))`, odd sets only.
    pub deriv_pair: Option<(Complex64, Complex64)>,
}

#[derive(Serialize, Deserialize)]
struct SampleJson {
    parity: Parity,
    #[serde(rename = "N")]
    n: usize,
    f: Vec<[f64; 2]>,
    fhat: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deriv_pair: Option<[f64; 4]>,
}

impl TryFrom<SampleJson> for SampleSet {
    type Error = Error;

    fn try_from(j: SampleJson) -> Result<Self> {
        let c = |v: Vec<[f64; 2]>| v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        let s = SampleSet {
            parity: j.parity,
            n: j.n,
            f: c(j.f),
            fhat: c(j.fhat),
            deriv_pair: j.deriv_pair.map(|d| (Complex64::new(d[0], d[1]), Complex64::new(d[2], d[3]))),
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<SampleSet> for SampleJson {
    fn from(s: SampleSet) -> Self {
        let c = |v: Vec<Complex64>| v.into_iter().map(|z| [z.re, z.im]).collect();
        SampleJson {
            parity: s.parity,
            n: s.n,
            f: c(s.f),
            fhat: c(s.fhat),
            deriv_pair: s.deriv_pair.map(|(a, b)| [a.re, a.im, b.re, b.im]),
        }
    }
}

impl SampleSet {
    pub fn validate(&self) -> Result<()> {
        let want = match self.parity {
            Parity::Even => self.n + 1,
            Parity::Odd => self.n,
        };
        if self.f.len() != want || self.fhat.len() != want {
            return Err(Error::InvalidSampleSet(format!(
                "expected {want} samples of f and f̂, got {} and {}",
                self.f.len(),
                self.fhat.len()
            )));
        }
        if (self.parity == Parity::Odd) != self.deriv_pair.is_some() {
            return Err(Error::InvalidSampleSet("deriv_pair is required for odd sets and only for them".into()));
        }
        Ok(())
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: Complex64, other: &SampleSet, beta: Complex64) -> Result<SampleSet> {
        if self.parity != other.parity || self.n != other.n {
            return Err(Error::InvalidSampleSet("sample sets differ in shape".into()));
        }
        let mix = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect();
        Ok(SampleSet {
            parity: self.parity,
            n: self.n,
            f: mix(&self.f, &other.f),
            fhat: mix(&self.fhat, &other.fhat),
            deriv_pair: match (self.deriv_pair, other.deriv_pair) {
                (Some((a, b)), Some((c, d))) => Some((alpha * a + beta * c, alpha * b + beta * d)),
                _ => None,
            },
        })
    }

    /// `(index, f, f̂)` per node.
    fn nodes(&self) -> impl Iterator<Item = (usize, Complex64, Complex64)> + '_ {
        let first = match self.parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        self.f.iter().zip(&self.fhat).enumerate().map(move |(i, (a, b))| (i + first, *a, *b))
    }

    /// Largest index whose term can matter: beyond it `C(1+n²)·max(|f|, |f̂|)` stays
    /// below [`NEGLIGIBLE_TERM`].
    fn effective_n(&self) -> usize {
        self.nodes()
            .filter(|(n, a, b)| growth_envelope(self.parity, *n) * a.norm().max(b.norm()) >= NEGLIGIBLE_TERM)
            .map(|(n, _, _)| n)
            .max()
            .unwrap_or(0)
    }

    /// Heuristic bound on the terms skipped by [`Self::effective_n`] and on
    /// those past `N`, extrapolating the decay of the last two samples.
    fn tail_bound(&self, kept: usize) -> f64 {
        let skipped: f64 = self
            .nodes()
            .filter(|(n, _, _)| *n > kept)
            .map(|(n, a, b)| growth_envelope(self.parity, n) * a.norm().max(b.norm()))
            .sum();
        let mag = |i: usize| self.f[i].norm().max(self.fhat[i].norm());
        let len = self.f.len();
        let beyond = if len >= 2 {
            let (last, before) = (mag(len - 1), mag(len - 2));
            if last == 0.0 {
                0.0
            } else if before > 0.0 && last < before {
                let r = last / before;
                let mut s = 0.0;
                let mut term = last;
                for k in 1..10_000 {
                    term *= r;
                    let t = growth_envelope(self.parity, self.n + k) * term;
                    s += t;
                    if t < 1e-30 {
                        break;
                    }
                }
                s
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        skipped + beyond
    }
}

/// A reconstructed value with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub value: Complex64,
    /// Propagated quadrature error of the basis values.
    pub abs_error_estimate: f64,
    /// Heuristic bound on omitted terms (growth envelope times sample decay).
    pub tail_bound: f64,
    /// Highest index actually summed.
    pub terms: usize,
}

/// Samples of `e_τ(x) = e^{iπτx²}` (even) or `o_τ(x) = x·e^{iπτx²}` (odd), using
/// `ê_τ = (−iτ)^{-1/2}e_{−1/τ}` and `ô_τ = −i(−iτ)^{-3/2}o_{−1/τ}`.
pub fn gaussian_samples(parity: Parity, tau: Complex64, n: usize) -> Result<SampleSet> {
    if !(tau.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane { re: tau.re, im: tau.im });
    }
    let e = |t: Complex64, k: usize| (Complex64::i() * std::f64::consts::PI * t * k as f64).exp();
    let dual = -1.0 / tau;
    match parity {
        Parity::Even => {
            let c = minus_iz_pow_half_c64(tau, -1);
            Ok(SampleSet {
                parity,
                n,
                f: (0..=n).map(|k| e(tau, k)).collect(),
                fhat: (0..=n).map(|k| c * e(dual, k)).collect(),
                deriv_pair: None,
            })
        }
        Parity::Odd => {
            let c = -Complex64::i() * minus_iz_pow_half_c64(tau, -3);
            Ok(SampleSet {
                parity,
                n,
                f: (1..=n).map(|k| e(tau, k)).collect(),
                fhat: (1..=n).map(|k| c * e(dual, k)).collect(),
                deriv_pair: Some((Complex64::new(1.0, 0.0), c)),
            })
        }
    }
}

/// The even interpolation formula at `x`.
pub fn reconstruct_even(s: &SampleSet, x: f64) -> Result<Reconstruction> {
    if s.parity != Parity::Even {
        return Err(Error::ParityMismatch { expected: "even" });
    }
    s.validate()?;
    let kept = s.effective_n();
    let bv = basis_values(x, kept, Families::EVEN, MethodChoice::Auto)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for (n, f, fh) in s.nodes().take_while(|(n, _, _)| *n <= kept) {
        let (a, ah) = bv.a(n);
        value += a.value * f + ah.value * fh;
        err += a.abs_error_estimate * f.norm() + ah.abs_error_estimate * fh.norm();
    }
    Ok(Reconstruction { value, abs_error_estimate: err, tail_bound: s.tail_bound(kept), terms: kept })
}

/// The odd interpolation formula at `x`.
pub fn reconstruct_odd(s: &SampleSet, x: f64) -> Result<Reconstruction> {
    if s.parity != Parity::Odd {
        return Err(Error::ParityMismatch { expected: "odd" });
    }
    s.validate()?;
    let (df, dfh) = s.deriv_pair.expect("validated");
    let kept = s.effective_n().max(1);
    let bv = basis_values(x, kept, Families::ODD, MethodChoice::Auto)?;
    let d0 = bv.d(Sign::Plus, 0);
    let mut value = d0.value * (df + Complex64::i() * dfh) / 2.0;
    let mut err = d0.abs_error_estimate * (df + Complex64::i() * dfh).norm() / 2.0;
    for (n, f, fh) in s.nodes().take_while(|(n, _, _)| *n <= kept) {
        let (c, half_diff) = bv.c(n);
        let chat = -Complex64::i() * half_diff.value;
        value += c.value * f - chat * fh;
        err += c.abs_error_estimate * f.norm() + half_diff.abs_error_estimate * fh.norm();
    }
    Ok(Reconstruction { value, abs_error_estimate: err, tail_bound: s.tail_bound(kept), terms: kept })
}

/// Either formula, chosen by the set's parity.
pub fn reconstruct(s: &SampleSet, x: f64) -> Result<Reconstruction> {
    match s.parity {
        Parity::Even => reconstruct_even(s, x),
        Parity::Odd => reconstruct_odd(s, x),
    }
}

/// `|f′(0) + Σ r₃(n)f(√n)/√n − i f̂′(0) − i Σ r₃(n)f̂(√n)/√n|` over `n ≤ N`,
/// with `f(√n)/√n` and `f̂(√n)/√n` supplied by the evaluators.
pub fn r3_identity_check<F, G>(f_over_root: F, fhat_over_root: G, f_prime0: Complex64, fhat_prime0: Complex64, n: usize) -> f64
where
    F: Fn(usize) -> Complex64,
    G: Fn(usize) -> Complex64,
{
    let mut lhs = f_prime0;
    let mut rhs = Complex64::i() * fhat_prime0;
    for k in 1..=n {
        let r = r3(k as u64) as f64;
        if r == 0.0 {
            continue;
        }
        lhs += r * f_over_root(k);
        rhs += Complex64::i() * r * fhat_over_root(k);
    }
    (lhs - rhs).norm()
}

/// [`r3_identity_check`] on an odd sample set.
pub fn r3_identity_residual(s: &SampleSet) -> Result<f64> {
    if s.parity != Parity::Odd {
        return Err(Error::ParityMismatch { expected: "odd" });
    }
    s.validate()?;
    let (df, dfh) = s.deriv_pair.expect("validated");
    Ok(r3_identity_check(|k| s.f[k - 1], |k| s.fhat[k - 1], df, dfh, s.n))
}
