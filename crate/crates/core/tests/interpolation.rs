use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use theta_interp::forms::Parity;
use theta_interp::interp::{gaussian_samples, reconstruct, reconstruct_even, reconstruct_odd, SampleSet};

fn gauss(parity: Parity, tau: Complex64, x: f64) -> Complex64 {
    let e = (Complex64::i() * PI * tau * x * x).exp();
    match parity {
        Parity::Even => e,
        Parity::Odd => e * x,
    }
}

#[test]
fn gaussians_including_narrow_ones() {
    let taus = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(0.6, 1.0), Complex64::new(0.0, 0.5)];
    for tau in taus {
        for parity in [Parity::Even, Parity::Odd] {
            let s = gaussian_samples(parity, tau, 40).unwrap();
            for x in [0.3, 1.7, 2.5] {
                let r = reconstruct(&s, x).unwrap();
                let err = (r.value - gauss(parity, tau, x)).norm();
                assert!(err < 1e-6, "{parity} tau = {tau} x = {x}: err {err:e}");
            }
        }
    }
}

#[test]
fn worked_examples() {
    let e = gaussian_samples(Parity::Even, Complex64::i(), 40).unwrap();
    let r = reconstruct_even(&e, 0.5).unwrap();
    assert!((r.value.re - 0.45593812776599624).abs() < 1e-8);
    let o = gaussian_samples(Parity::Odd, Complex64::i(), 40).unwrap();
    let r = reconstruct_odd(&o, 0.5).unwrap();
    assert!((r.value.re - 0.5 * 0.45593812776599624).abs() < 1e-7);
    let r = reconstruct_odd(&o, 2f64.sqrt()).unwrap();
    assert!((r.value - 2f64.sqrt() * o.f[1]).norm() < 1e-7);
    assert_eq!(reconstruct_odd(&o, 0.0).unwrap().value, Complex64::new(0.0, 0.0));
}

/// At x = 0 the even formula is Poisson summation: f(0) = ½f(0) + ½f̂(0) + Σ_{k≥1} (f̂(k) − f(k)).
#[test]
fn poisson_at_zero() {
    let s = gaussian_samples(Parity::Even, Complex64::new(0.0, 2.0), 40).unwrap();
    let r = reconstruct_even(&s, 0.0).unwrap();
    let poisson = 0.5 * (s.f[0] + s.fhat[0]) + (1..=6).map(|k| s.fhat[k * k] - s.f[k * k]).sum::<Complex64>();
    assert!((poisson - s.f[0]).norm() < 1e-12, "{poisson}");
    assert!((r.value - poisson).norm() < 1e-8, "{} vs {poisson}", r.value);
}

fn random_set(parity: Parity, n: usize, seed: u64) -> SampleSet {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c = || Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    let len = match parity {
        Parity::Even => n + 1,
        Parity::Odd => n,
    };
    let f = (0..len).map(|_| c()).collect();
    let fhat = (0..len).map(|_| c()).collect();
    let deriv_pair = (parity == Parity::Odd).then(|| (c(), c()));
    SampleSet { parity, n, f, fhat, deriv_pair }
}

#[test]
fn node_exactness() {
    for parity in [Parity::Even, Parity::Odd] {
        let s = random_set(parity, 8, 5);
        for m in 1..=8usize {
            let x = (m as f64).sqrt();
            let r = reconstruct(&s, x).unwrap();
            let want = match parity {
                Parity::Even => s.f[m],
                Parity::Odd => s.f[m - 1] * x,
            };
            assert!((r.value - want).norm() < 1e-7, "{parity} node {m}: {} vs {want}", r.value);
        }
    }
    let s = random_set(Parity::Even, 8, 6);
    let r = reconstruct(&s, 0.0).unwrap();
    assert!((r.value - 0.5 * (s.f[0] + s.fhat[0]) - (1..=2).map(|k| s.fhat[k * k] - s.f[k * k]).sum::<Complex64>()).norm() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linearity(seed in 0u64..1000, ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0,
                 x in 0.0f64..3.0, odd in any::<bool>()) {
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let s1 = random_set(parity, 8, seed);
        let s2 = random_set(parity, 8, seed + 1);
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, 0.25));
        let lhs = reconstruct(&s1.combine(a, &s2, b).unwrap(), x).unwrap().value;
        let rhs = a * reconstruct(&s1, x).unwrap().value + b * reconstruct(&s2, x).unwrap().value;
        prop_assert!((lhs - rhs).norm() < 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn real_even_gaussians_have_real_samples(t in 0.3f64..3.0, n in 1usize..20) {
        let s = gaussian_samples(Parity::Even, Complex64::new(0.0, t), n).unwrap();
        prop_assert!(s.f.iter().chain(&s.fhat).all(|z| z.im == 0.0));
        let o = gaussian_samples(Parity::Odd, Complex64::new(0.0, t), n).unwrap();
        prop_assert!(o.fhat.iter().all(|z| z.re.abs() <= 1e-15 * z.im.abs()));
    }

    #[test]
    fn json_round_trip(t in 0.3f64..3.0, re in -1.0f64..1.0, n in 0usize..12, odd in any::<bool>()) {
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let s = gaussian_samples(parity, Complex64::new(re, t), n).unwrap();
        let back: SampleSet = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}
