//! Log-gamma, digamma and trigamma for positive arguments.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// B_{2j} for j = 1..=8.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const ASYMPTOTIC_FROM: f64 = 6.0;

/// ln Γ(x) via the Lanczos approximation (g = 7, 9 terms), with reflection below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln B(α) = Σ ln Γ(α_k) − ln Γ(Σ α_k), the log normalizer of a Dirichlet.
pub fn ln_multivariate_beta(alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(total)
}

/// ψ(x) = d/dx ln Γ(x), for x > 0.
///
/// Shifts the argument above 6 with ψ(x) = ψ(x+1) − 1/x, then applies
/// ψ(x) ≈ ln x − 1/(2x) − Σ B_{2j} / (2j x^{2j}).
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma defined here for x > 0, got {x}");
    let mut shift = 0.0;
    let mut x = x;
    while x < ASYMPTOTIC_FROM {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut pow = inv2;
    let mut series = 0.0;
    for (j, &b) in BERNOULLI.iter().enumerate() {
        series += b / (2.0 * (j + 1) as f64) * pow;
        pow *= inv2;
    }
    shift + x.ln() - 0.5 / x - series
}

/// ψ′(x), for x > 0.
///
/// Shifts the argument above 6 with ψ′(x) = ψ′(x+1) + 1/x², then applies
/// ψ′(x) ≈ 1/x + 1/(2x²) + Σ B_{2j} / x^{2j+1}.
pub fn trigamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "trigamma defined here for x > 0, got {x}");
    let mut shift = 0.0;
    let mut x = x;
    while x < ASYMPTOTIC_FROM {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut pow = inv2 * inv;
    let mut series = 0.0;
    for &b in &BERNOULLI {
        series += b * pow;
        pow *= inv2;
    }
    shift + inv + 0.5 * inv2 + series
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

    /// Slow oracle: ψ(x) = −γ + Σ_{n≥0} (1/(n+1) − 1/(n+x)), summed to N
    /// terms plus the Euler–Maclaurin tail of the remainder.
    fn digamma_series(x: f64) -> f64 {
        let n = 200_000usize;
        let mut s = -EULER_MASCHERONI;
        for i in 0..n {
            let i = i as f64;
            s += 1.0 / (i + 1.0) - 1.0 / (i + x);
        }
        // tail Σ_{i≥N} (1/(i+1) − 1/(i+x)) ≈ ln((N+x)/(N+1)) + corrections
        let nf = n as f64;
        let a = nf + 1.0;
        let b = nf + x;
        s + (b / a).ln() + 0.5 * (1.0 / a - 1.0 / b) + (1.0 / (a * a) - 1.0 / (b * b)) / 12.0
    }

    /// Slow oracle: ψ′(x) = Σ_{n≥0} 1/(n+x)² with Euler–Maclaurin tail.
    fn trigamma_series(x: f64) -> f64 {
        let n = 100_000usize;
        let mut s = 0.0;
        for i in (0..n).rev() {
            let t = i as f64 + x;
            s += 1.0 / (t * t);
        }
        let t = n as f64 + x;
        s + 1.0 / t + 0.5 / (t * t) + 1.0 / (6.0 * t * t * t)
    }

    #[test]
    fn known_values() {
        assert!((digamma(1.0) + EULER_MASCHERONI).abs() < 1e-12);
        assert!((trigamma(1.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((digamma(0.5) - (-EULER_MASCHERONI - 2.0 * 2f64.ln())).abs() < 1e-12);
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-11);
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        // ln(9!) = ln 362880
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn matches_series_oracles() {
        for &x in &[0.1, 0.7, 1.0, 1.5, 2.3, 5.9, 6.0, 7.25, 13.0, 57.5, 400.0] {
            let d = digamma(x);
            let d_ref = digamma_series(x);
            assert!((d - d_ref).abs() < 1e-9 * d_ref.abs().max(1.0), "digamma({x}) {d} vs {d_ref}");
            let t = trigamma(x);
            let t_ref = trigamma_series(x);
            assert!((t - t_ref).abs() < 1e-10 * t_ref.abs().max(1.0), "trigamma({x}) {t} vs {t_ref}");
        }
    }

    #[test]
    fn agrees_with_statrs() {
        for i in 1..200 {
            let x = 0.05 * i as f64 + 0.01 * (i % 7) as f64;
            let lg = statrs::function::gamma::ln_gamma(x);
            assert!((ln_gamma(x) - lg).abs() < 1e-12 * lg.abs().max(1.0), "ln_gamma({x})");
            let dg = statrs::function::gamma::digamma(x);
            assert!((digamma(x) - dg).abs() < 1e-11 * dg.abs().max(1.0), "digamma({x})");
        }
    }

    #[test]
    fn derivatives_are_consistent() {
        // ψ is the derivative of ln Γ and ψ′ the derivative of ψ
        let h = 1e-5;
        for &x in &[1.0, 1.7, 3.2, 8.0, 25.0] {
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-8, "x = {x}");
            let fd2 = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd2 - trigamma(x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn beta_of_ones() {
        // B(1,…,1) = 1/Γ(K) = 1/(K−1)!
        assert!((ln_multivariate_beta(&[1.0, 1.0]) - 0.0).abs() < 1e-14);
        assert!((ln_multivariate_beta(&[1.0; 4]) + 6f64.ln()).abs() < 1e-13);
    }
}
