//! Independent checks that share no code path with the contour evaluation:
//! real-axis Fourier transforms, three-square counts, Poisson sums, finite
//! differences and direct theta sums.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::Parity;

/// Absolute accuracy targeted by [`fourier_numeric`].
pub const FOURIER_TOL: f64 = 1e-9;

/// Largest `|f(X)|` accepted at the cutoff.
pub const CUTOFF_TOL: f64 = 1e-12;

/// Default cutoff for transforms of basis functions.
pub const DEFAULT_CUTOFF: f64 = 10.0;

/// A transform of a real function known on `[0, X]`, extended evenly or oddly.
pub struct TransformRequest<F> {
    pub parity: Parity,
    pub integrand: F,
    pub cutoff: f64,
    pub xi: f64,
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod estimate and |Kronrod − Gauss| on `[a, b]`.
fn gk15<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let fx = f(c - h * XGK[j])? + f(c + h * XGK[j])?;
        k += WGK[j] * fx;
        if j % 2 == 1 {
            g += WG[j / 2] * fx;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute `tol`.
pub fn integrate_gk<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let pieces = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let mut stack: Vec<(f64, f64, u32)> = (0..pieces)
        .rev()
        .map(|i| (a + (b - a) * i as f64 / pieces as f64, a + (b - a) * (i + 1) as f64 / pieces as f64, 0))
        .collect();
    let (mut total, mut err) = (0.0, 0.0);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi)?;
        if e <= tol * (hi - lo) / (b - a) || e < 1e-15 * v.abs() {
            total += v;
            err += e;
        } else if depth >= 30 {
            return Err(Error::QuadratureNonConvergence { best: total + v, err_est: err + e });
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((m, hi, depth + 1));
            stack.push((lo, m, depth + 1));
        }
    }
    Ok((total, err))
}

/// `f̂(ξ) = ∫ f(x)e^{-2πiξx}dx` for a real even (`2∫₀^X f cos`) or odd
/// (`−2i∫₀^X f sin`) function, to absolute [`FOURIER_TOL`].
pub fn fourier_numeric<F: Fn(f64) -> Result<f64>>(req: &TransformRequest<F>) -> Result<Complex64> {
    let x_end = req.cutoff;
    let tail = (req.integrand)(x_end)?;
    if !(tail.abs() < CUTOFF_TOL) {
        return Err(Error::CutoffViolation { cutoff: x_end, value: tail });
    }
    let w = 2.0 * std::f64::consts::PI * req.xi;
    let half = 0.5 * FOURIER_TOL;
    match req.parity {
        Parity::Even => {
            let g = |x: f64| Ok((req.integrand)(x)? * (w * x).cos());
            let (v, _) = integrate_gk(&g, 0.0, x_end, half)?;
            Ok(Complex64::new(2.0 * v, 0.0))
        }
        Parity::Odd => {
            let g = |x: f64| Ok((req.integrand)(x)? * (w * x).sin());
            let (v, _) = integrate_gk(&g, 0.0, x_end, half)?;
            Ok(Complex64::new(0.0, -2.0 * v))
        }
    }
}

/// Number of `(a, b, c) ∈ ℤ³` with `a² + b² + c² = m`, by exhaustive search.
pub fn r3(m: u64) -> u64 {
    let r = (m as f64).sqrt().ceil() as i64 + 1;
    let m = m as i64;
    let mut count = 0;
    for a in -r..=r {
        for b in -r..=r {
            let rest = m - a * a - b * b;
            if rest < 0 {
                continue;
            }
            for c in -r..=r {
                if c * c == rest {
                    count += 1;
                }
            }
        }
    }
    count
}

/// `|Σ_{|n|≤N} f(n) − Σ_{|n|≤N} f̂(n)|`.
pub fn poisson_residual<F, G>(f: F, fhat: G, n: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex64>,
    G: Fn(f64) -> Result<Complex64>,
{
    let mut s = Complex64::new(0.0, 0.0);
    for k in -(n as i64)..=(n as i64) {
        s += f(k as f64)? - fhat(k as f64)?;
    }
    Ok(s.norm())
}

/// A derivative estimate with the size of its last correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub err_est: f64,
}

/// `f′(0)` for an odd `f`: central differences at `h` and `h/2`, one Richardson step.
pub fn numeric_derivative_at_zero<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Result<Derivative> {
    let central = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let d1 = central(h)?;
    let d2 = central(h / 2.0)?;
    let value = (4.0 * d2 - d1) / 3.0;
    Ok(Derivative { value, err_est: (value - d2).abs() })
}

/// `Θ₃(τ) = Σ_{k∈ℤ} e^{iπk²τ}` summed directly (slow for small `Im τ`).
pub fn theta3_direct(tau: Complex64) -> Complex64 {
    let mut s = Complex64::new(1.0, 0.0);
    let mut k = 1u64;
    loop {
        let t = (Complex64::i() * std::f64::consts::PI * tau * (k * k) as f64).exp() * 2.0;
        s += t;
        if t.norm() < 1e-18 * s.norm().max(1.0) || k > 1_000_000 {
            return s;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn transforms_of_gaussians() {
        let req = TransformRequest { parity: Parity::Even, integrand: |x: f64| Ok((-PI * x * x).exp()), cutoff: 6.0, xi: 1.0 };
        let v = fourier_numeric(&req).unwrap();
        assert!((v.re - (-PI).exp()).abs() < 1e-10);
        let req = TransformRequest { parity: Parity::Even, integrand: |x: f64| Ok((-2.0 * PI * x * x).exp()), cutoff: 6.0, xi: 0.0 };
        assert!((fourier_numeric(&req).unwrap().re - 0.5f64.sqrt()).abs() < 1e-10);
        // x e^{-πx²} ↦ −i ξ e^{-πξ²}
        let req = TransformRequest { parity: Parity::Odd, integrand: |x: f64| Ok(x * (-PI * x * x).exp()), cutoff: 6.0, xi: 0.7 };
        let v = fourier_numeric(&req).unwrap();
        assert!(v.re == 0.0 && (v.im + 0.7 * (-PI * 0.49).exp()).abs() < 1e-10);
    }

    #[test]
    fn transform_twice() {
        // even: f̂̂ = f; odd: the second transform of −i·g returns −f.
        let f = |x: f64| (-2.0 * PI * x * x).exp() * (1.0 + x * x);
        let fh = |xi: f64| {
            fourier_numeric(&TransformRequest { parity: Parity::Even, integrand: |x: f64| Ok(f(x)), cutoff: 6.0, xi }).map(|v| v.re)
        };
        for x in [0.0, 0.5, 1.3] {
            let back = fourier_numeric(&TransformRequest { parity: Parity::Even, integrand: &fh, cutoff: 7.0, xi: x }).unwrap();
            assert!((back.re - f(x)).abs() < 1e-8, "{x}");
        }
        let g = |x: f64| x * (-1.5 * PI * x * x).exp();
        let gh = |xi: f64| {
            fourier_numeric(&TransformRequest { parity: Parity::Odd, integrand: |x: f64| Ok(g(x)), cutoff: 6.0, xi }).map(|v| v.im)
        };
        for x in [0.3, 1.1] {
            // ĝ = i·gh is odd with imaginary values; transforming gh gives −i·ĝ̂/i.
            let back = fourier_numeric(&TransformRequest { parity: Parity::Odd, integrand: &gh, cutoff: 7.0, xi: x }).unwrap();
            let twice = Complex64::i() * back;
            assert!((twice.re + g(x)).abs() < 1e-8, "{x}: {twice} vs {}", -g(x));
        }
    }

    #[test]
    fn cutoff_is_enforced() {
        let req = TransformRequest { parity: Parity::Even, integrand: |x: f64| Ok((-x).exp()), cutoff: 5.0, xi: 0.0 };
        assert!(matches!(fourier_numeric(&req), Err(Error::CutoffViolation { .. })));
    }

    #[test]
    fn three_squares() {
        assert_eq!(r3(0), 1);
        assert_eq!(r3(1), 6);
        assert_eq!(r3(2), 12);
        assert_eq!(r3(3), 8);
        assert_eq!(r3(4), 6);
        assert_eq!(r3(7), 0);
        // Σ_{m≤M} r3(m) equals the lattice points in the ball, counted in a single loop.
        for big_m in [0u64, 5, 17, 50] {
            let total: u64 = (0..=big_m).map(r3).sum();
            let r = (big_m as f64).sqrt() as i64 + 1;
            let side = (2 * r + 1) as usize;
            let ball = (0..side * side * side)
                .filter(|i| {
                    let a = (i % side) as i64 - r;
                    let b = ((i / side) % side) as i64 - r;
                    let c = (i / side / side) as i64 - r;
                    (a * a + b * b + c * c) as u64 <= big_m
                })
                .count() as u64;
            assert_eq!(total, ball, "M = {big_m}");
        }
    }

    #[test]
    fn poisson_on_gaussians() {
        let g = |x: f64| Ok(Complex64::new((-PI * x * x).exp(), 0.0));
        assert!(poisson_residual(g, g, 10).unwrap() < 1e-12);
        let f = |x: f64| Ok(Complex64::new((-2.0 * PI * x * x).exp(), 0.0));
        let fh = |x: f64| Ok(Complex64::new(0.5f64.sqrt() * (-PI * x * x / 2.0).exp(), 0.0));
        assert!(poisson_residual(f, fh, 12).unwrap() < 1e-10);
    }

    #[test]
    fn derivatives() {
        let d = numeric_derivative_at_zero(|x| Ok(crate::basis::d0_closed_form(x)), 1e-2).unwrap();
        assert!((d.value - 1.0).abs() < 1e-6, "{d:?}");
        let d = numeric_derivative_at_zero(|x| Ok(x * x * x), 1e-2).unwrap();
        assert!(d.value.abs() < 1e-15);
    }

    #[test]
    fn direct_theta() {
        let t = theta3_direct(Complex64::new(0.0, 2.0));
        let want: f64 = 1.0 + 2.0 * (1..10).map(|k| (-2.0 * PI * (k * k) as f64).exp()).sum::<f64>();
        assert!((t.re - want).abs() < 1e-15 && t.im == 0.0);
    }
}
