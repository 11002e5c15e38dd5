//! Chain diagnostics: autocorrelation, effective sample size, and a
//! Kolmogorov-Smirnov check against a target normal law.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Mean, autocorrelation time and effective sample size of one scalar series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObservableSummary {
    pub mean: f64,
    pub variance: f64,
    /// Integrated autocorrelation time tau >= 1 (tau = 1 for iid samples).
    pub tau: f64,
    /// n / tau.
    pub ess: f64,
    /// Monte Carlo standard error of the mean, sqrt(variance * tau / n).
    pub stderr: f64,
    /// Set when the series has (numerically) zero variance; tau and ess are
    /// then nominal.
    pub degenerate: bool,
    /// Set when the series is shorter than 10 autocorrelation times (or
    /// degenerate): the error bar is not trustworthy.
    pub low_confidence: bool,
}

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// sum successive pairs of empirical autocovariances while the pair sums stay
/// positive,
///
///   tau = -1 + 2 sum_m (gamma_{2m} + gamma_{2m+1}) / gamma_0.
pub fn integrated_autocorrelation_time(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(Error::usage(format!(
            "autocorrelation needs at least 10 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let gamma = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for t in 0..n - lag {
            acc += (series[t] - mean) * (series[t + lag] - mean);
        }
        acc / nf
    };
    let g0 = gamma(0);
    if !(g0 > 0.0) || !g0.is_finite() {
        return Err(Error::Numerical("series has zero variance".into()));
    }
    let mut total = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = gamma(2 * m) + gamma(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        total += pair;
        m += 1;
    }
    Ok((2.0 * total / g0 - 1.0).max(1.0))
}

pub fn effective_sample_size(series: &[f64]) -> Result<f64> {
    let tau = integrated_autocorrelation_time(series)?;
    Ok(series.len() as f64 / tau)
}

pub fn summarize(series: &[f64]) -> Result<ObservableSummary> {
    let n = series.len();
    if n < 10 {
        return Err(Error::usage(format!(
            "summary needs at least 10 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let variance = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    match integrated_autocorrelation_time(series) {
        Ok(tau) => Ok(ObservableSummary {
            mean,
            variance,
            tau,
            ess: nf / tau,
            stderr: (variance * tau / nf).sqrt(),
            degenerate: false,
            low_confidence: nf < 10.0 * tau,
        }),
        Err(Error::Numerical(_)) => Ok(ObservableSummary {
            mean,
            variance,
            tau: 1.0,
            ess: nf,
            stderr: 0.0,
            degenerate: true,
            low_confidence: true,
        }),
        Err(e) => Err(e),
    }
}

/// Everything worth reporting about one finished trace: summaries of the
/// recorded observables plus whole-run acceptance rates per move type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub energy: ObservableSummary,
    pub radius: ObservableSummary,
    pub accept_site: f64,
    pub accept_pcn: f64,
    pub accept_scale: f64,
    /// Any summary flagged low-confidence, or the run was aborted early.
    pub low_confidence: bool,
}

pub fn trace_diagnostics(trace: &super::Trace) -> Result<TraceDiagnostics> {
    let energies: Vec<f64> = trace.records.iter().map(|r| r.energy).collect();
    let radii: Vec<f64> = trace.records.iter().map(|r| r.radius).collect();
    let energy = summarize(&energies)?;
    let radius = summarize(&radii)?;
    let c = &trace.counters;
    let rate = |acc: u64, prop: u64| acc as f64 / prop.max(1) as f64;
    Ok(TraceDiagnostics {
        energy,
        radius,
        accept_site: rate(c.site_accepts, c.site_proposals),
        accept_pcn: rate(c.pcn_accepts, c.pcn_proposals),
        accept_scale: rate(c.scale_accepts, c.scale_proposals),
        low_confidence: energy.low_confidence
            || radius.low_confidence
            || trace.aborted.is_some(),
    })
}

/// Two-sided asymptotic p-value of the Kolmogorov statistic, with the
/// finite-n correction t = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D:
/// p = 2 sum_k (-1)^{k-1} exp(-2 k^2 t^2).
fn ks_pvalue(stat: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * stat;
    if t < 0.2 {
        // the alternating series is useless here and the true tail is 1
        // to well below double precision
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against N(0, sd^2). Returns the statistic
/// and its asymptotic p-value.
pub fn ks_test_normal(samples: &[f64], sd: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::usage(format!("KS test needs at least 10 samples, got {n}")));
    }
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::usage("KS reference sd must be positive"));
    }
    let normal = Normal::new(0.0, sd).expect("valid normal");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let nf = n as f64;
    let mut stat = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        let hi = (i as f64 + 1.0) / nf - cdf;
        let lo = cdf - i as f64 / nf;
        stat = stat.max(hi).max(lo);
    }
    Ok((stat, ks_pvalue(stat, n)))
}
