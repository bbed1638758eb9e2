//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the series evaluation under test: densities are
//! built from the generative model (a scaled chi variable plus a Gaussian)
//! and integrated with double-exponential quadrature.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Integral of `f` over `[a, b]` split into `panels` equal pieces.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            quadrature::integrate(&f, lo, lo + h, tol).integral
        })
        .sum()
}

/// Density of `g`, where `g² / (λ1/2) ~ χ²_{2M}`.
pub fn chi_density(g: f64, m: usize, l1: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    (std::f64::consts::LN_2 + (2.0 * mf - 1.0) * g.ln() - g * g / l1 - ln_gamma(mf) - mf * l1.ln())
        .exp()
}

/// Density of a real Gaussian with variance `l2 / 2`.
pub fn half_gauss_density(x: f64, l2: f64) -> f64 {
    (-x * x / l2).exp() / (std::f64::consts::PI * l2).sqrt()
}

/// Range of `g` outside which its density is negligible.
pub fn chi_support(m: usize, l1: f64) -> (f64, f64) {
    let mf = m as f64;
    let lo = (mf - 14.0 * mf.sqrt()).max(0.0);
    let hi = mf + 14.0 * mf.sqrt() + 60.0;
    ((l1 * lo).sqrt(), (l1 * hi).sqrt())
}

/// Range of `g + Re ν` carrying all but a negligible mass.
pub fn z_support(m: usize, l1: f64, l2: f64) -> (f64, f64) {
    let (glo, ghi) = chi_support(m, l1);
    let pad = 14.0 * l2.sqrt();
    (glo - pad, ghi + pad)
}

/// Density of `g + Re ν` at `z` by direct convolution.
pub fn convolution_density(z: f64, m: usize, l1: f64, l2: f64) -> f64 {
    let (glo, ghi) = chi_support(m, l1);
    // only g within a few noise widths of z contributes
    let pad = 14.0 * l2.sqrt();
    let a = glo.max(z - pad);
    let b = ghi.min(z + pad);
    if a >= b {
        return 0.0;
    }
    integrate(
        |g| chi_density(g, m, l1) * half_gauss_density(z - g, l2),
        a,
        b,
        32,
        1e-15,
    )
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let n = xs.len() as f64;
    let cov = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
    cov / (vx * vy).sqrt()
}
