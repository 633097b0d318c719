//! Monte Carlo estimates, effective sample sizes, and the classical tests
//! (z, Kolmogorov–Smirnov, chi-square) used by the verification checks.

use crate::error::Error;
use crate::special::{chi_square_sf, kolmogorov_sf};
use crate::Result;
use serde::Serialize;

/// A Monte Carlo estimate: sample mean with its standard error.
///
/// `n_effective` accounts for autocorrelation when the samples come from a
/// Markov chain; for i.i.d. input it equals `raw_n`.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_effective: f64,
    pub raw_n: usize,
}

impl Estimate {
    /// Estimate from i.i.d. samples.
    pub fn from_samples(samples: &[f64]) -> Result<Estimate> {
        if samples.len() < 2 {
            return Err(Error::invalid("need at least 2 samples for an estimate"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(Estimate { mean, stderr: (var / n).sqrt(), n_effective: n, raw_n: samples.len() })
    }

    /// Estimate from an autocorrelated series (e.g. thinned MCMC output),
    /// with the standard error inflated by the integrated autocorrelation
    /// time from Geyer's initial-positive-sequence estimator.
    pub fn from_series(series: &[f64]) -> Result<Estimate> {
        if series.len() < 4 {
            return Err(Error::invalid("need at least 4 points for a series estimate"));
        }
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        if var == 0.0 {
            return Ok(Estimate { mean, stderr: 0.0, n_effective: n, raw_n: series.len() });
        }
        let tau = integrated_autocorrelation_time(series, mean, var);
        let n_eff = (n / tau).max(2.0);
        Ok(Estimate {
            mean,
            stderr: (var / n_eff).sqrt(),
            n_effective: n_eff,
            raw_n: series.len(),
        })
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        z_score(self.mean - other.mean, combined_se(self.stderr, other.stderr))
    }

    /// z-score of the difference from a known constant.
    pub fn z_against_value(&self, value: f64) -> f64 {
        z_score(self.mean - value, self.stderr)
    }
}

pub fn combined_se(se1: f64, se2: f64) -> f64 {
    (se1 * se1 + se2 * se2).sqrt()
}

/// Signed difference over standard error; ±∞ when the SE vanishes but the
/// difference does not, 0 when both vanish.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY * diff.signum()
    }
}

/// Integrated autocorrelation time τ = 1 + 2 Σ ρ_k, truncated where the
/// pairwise sums Γ_m = ρ_{2m} + ρ_{2m+1} first turn nonpositive (Geyer).
fn integrated_autocorrelation_time(series: &[f64], mean: f64, var: f64) -> f64 {
    let n = series.len();
    let max_lag = (n / 3).min(2000);
    let rho = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += (series[i] - mean) * (series[i + lag] - mean);
        }
        acc / ((n - lag) as f64) / var
    };
    let mut tau = 1.0;
    let mut m = 0;
    loop {
        let l1 = 2 * m + 1;
        let l2 = 2 * m + 2;
        if l2 > max_lag {
            break;
        }
        let gamma = rho(l1) + rho(l2);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        m += 1;
    }
    tau.max(1.0)
}

/// Effective sample size of a series.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    match Estimate::from_series(series) {
        Ok(e) => e.n_effective,
        Err(_) => series.len() as f64,
    }
}

/// Covariance estimate between paired samples, with the asymptotic standard
/// error of the sample covariance (delta method on the moment vector).
pub fn covariance_estimate(f: &[f64], g: &[f64]) -> Result<Estimate> {
    if f.len() != g.len() || f.len() < 8 {
        return Err(Error::invalid("covariance needs equally sized, reasonably long samples"));
    }
    let n = f.len() as f64;
    let mf = f.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let prods: Vec<f64> = f.iter().zip(g).map(|(a, b)| (a - mf) * (b - mg)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    // SE of the covariance ≈ sd of the centered products / √n.
    let mp = prods.iter().sum::<f64>() / n;
    let var_p = prods.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (n - 1.0);
    Ok(Estimate { mean: cov, stderr: (var_p / n).sqrt(), n_effective: n, raw_n: f.len() })
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Serialize)]
pub struct GofTest {
    pub statistic: f64,
    pub p_value: f64,
    pub detail: String,
}

/// One-sample Kolmogorov–Smirnov test of `samples` against the continuous
/// CDF `cdf`; asymptotic p-value with the Stephens small-sample refinement.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> Result<GofTest> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::invalid("KS test needs at least 10 samples"));
    }
    samples.sort_unstable_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        if !(0.0..=1.0 + 1e-12).contains(&c) {
            return Err(Error::numerical(format!("CDF returned {c} outside [0,1] at x={x}")));
        }
        let upper = (i as f64 + 1.0) / nf - c;
        let lower = c - i as f64 / nf;
        d = d.max(upper).max(lower);
    }
    let scaled = d * (nf.sqrt() + 0.12 + 0.11 / nf.sqrt());
    Ok(GofTest {
        statistic: d,
        p_value: kolmogorov_sf(scaled),
        detail: format!("KS D = {d:.6}, n = {n}"),
    })
}

/// Chi-square test of observed nonnegative-integer counts against a Poisson(ν)
/// law with ν known.  Bins with expected count < 5 are pooled from both tails.
pub fn chi_square_poisson_test(counts: &[usize], nu: f64) -> Result<GofTest> {
    if counts.len() < 50 {
        return Err(Error::invalid("chi-square test needs at least 50 observations"));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::invalid(format!("Poisson rate must be positive, got {nu}")));
    }
    let n = counts.len() as f64;
    let max_k = *counts.iter().max().unwrap();
    // Poisson pmf by upward recurrence, capped well beyond both the data and ν.
    let k_cap = max_k.max((nu + 10.0 * nu.sqrt()) as usize) + 10;
    let mut pmf = Vec::with_capacity(k_cap + 1);
    let mut logp = -nu;
    pmf.push(logp.exp());
    for k in 1..=k_cap {
        logp += nu.ln() - (k as f64).ln();
        pmf.push(logp.exp());
    }
    let mut observed = vec![0.0f64; k_cap + 1];
    for &c in counts {
        observed[c.min(k_cap)] += 1.0;
    }
    // Pool adjacent bins until each expected count is at least 5.
    let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for k in 0..=k_cap {
        acc_o += observed[k];
        acc_e += pmf[k] * n;
        if acc_e >= 5.0 {
            bins.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    // Remaining tail mass (including beyond k_cap) goes into the last bin.
    let tail_e = (1.0 - pmf.iter().sum::<f64>()).max(0.0) * n;
    if let Some(last) = bins.last_mut() {
        last.0 += acc_o;
        last.1 += acc_e + tail_e;
    } else {
        return Err(Error::numerical("chi-square pooling produced no bins"));
    }
    if bins.len() < 2 {
        return Err(Error::invalid("chi-square test degenerate: all mass in one bin"));
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    Ok(GofTest {
        statistic: stat,
        p_value: chi_square_sf(stat, dof),
        detail: format!("chi2 = {stat:.3}, dof = {dof}, bins = {}", bins.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn iid_estimate_matches_formulas() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = Estimate::from_samples(&xs).unwrap();
        assert_relative_eq!(e.mean, 2.5);
        // sample var = 5/3, se = sqrt(5/12)
        assert_relative_eq!(e.stderr, (5.0f64 / 12.0).sqrt(), max_relative = 1e-12);
        assert_eq!(e.raw_n, 4);
    }

    #[test]
    fn series_estimate_detects_autocorrelation() {
        // AR(1) with strong positive correlation: ESS must be well below n.
        let mut rng = crate::rng_stream(11, 0);
        let mut x = 0.0;
        let series: Vec<f64> = (0..20_000)
            .map(|_| {
                let eps: f64 = rng.gen_range(-1.0..1.0);
                x = 0.9 * x + eps;
                x
            })
            .collect();
        let e = Estimate::from_series(&series).unwrap();
        assert!(e.n_effective < series.len() as f64 / 5.0, "ESS = {}", e.n_effective);
        // And the inflated SE should cover the true mean 0 comfortably.
        assert!(e.mean.abs() <= 5.0 * e.stderr);

        // White noise: ESS close to n.
        let iid: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e2 = Estimate::from_series(&iid).unwrap();
        assert!(e2.n_effective > iid.len() as f64 * 0.8, "ESS = {}", e2.n_effective);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shifted() {
        let mut rng = crate::rng_stream(5, 1);
        let mut u: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ok = ks_test(&mut u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(ok.p_value > 0.01, "{:?}", ok);
        let mut v: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0f64..1.0).powf(1.2)).collect();
        let bad = ks_test(&mut v, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(bad.p_value < 1e-6, "{:?}", bad);
    }

    #[test]
    fn chi_square_accepts_poisson_and_rejects_wrong_rate() {
        let mut rng = crate::rng_stream(7, 2);
        let nu = 6.5;
        let sample_poisson = |rng: &mut rand_chacha::ChaCha12Rng| -> usize {
            // inverse-CDF sampling, adequate for moderate ν
            let u: f64 = rng.gen_range(0.0..1.0);
            let mut k = 0usize;
            let mut p = (-nu as f64).exp();
            let mut cdf = p;
            while cdf < u && k < 200 {
                k += 1;
                p *= nu / k as f64;
                cdf += p;
            }
            k
        };
        let counts: Vec<usize> = (0..20_000).map(|_| sample_poisson(&mut rng)).collect();
        let ok = chi_square_poisson_test(&counts, nu).unwrap();
        assert!(ok.p_value > 0.01, "{:?}", ok);
        let bad = chi_square_poisson_test(&counts, nu * 1.15).unwrap();
        assert!(bad.p_value < 1e-6, "{:?}", bad);
    }

    #[test]
    fn covariance_of_independent_streams_is_small() {
        let mut rng = crate::rng_stream(9, 3);
        let f: Vec<f64> = (0..50_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g: Vec<f64> = (0..50_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let c = covariance_estimate(&f, &g).unwrap();
        assert!(c.mean.abs() <= 4.0 * c.stderr, "cov = {} ± {}", c.mean, c.stderr);
        let c2 = covariance_estimate(&f, &f).unwrap();
        assert_relative_eq!(c2.mean, 1.0 / 12.0, max_relative = 0.05);
    }

    #[test]
    fn stderr_scales_like_inverse_sqrt_n() {
        let mut rng = crate::rng_stream(13, 4);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let half = Estimate::from_samples(&xs[..20_000]).unwrap();
        let full = Estimate::from_samples(&xs).unwrap();
        let ratio = half.stderr / full.stderr;
        assert!((ratio - 2f64.sqrt()).abs() < 0.2 * 2f64.sqrt(), "ratio = {ratio}");
    }
}
