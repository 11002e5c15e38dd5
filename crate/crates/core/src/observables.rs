//! Observables of a configuration and the scaling analysis applied to them.

use crate::error::{Error, Result};
use crate::gff::FieldConfiguration;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Size summaries of the range of u. `diameter` is the effective radius used
/// in scaling fits: the spread max - min for D = 1, the exact maximum
/// pairwise distance for D >= 2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadiusReport<F> {
    pub diameter: F,
    pub bbox_diagonal: F,
    pub gyration: F,
}

pub fn effective_radius<F: Scalar>(field: &FieldConfiguration<F>) -> RadiusReport<F> {
    let d = field.range_dim();
    let m = field.total_sites();
    // bounding box and gyration are cheap in any dimension
    let mut bbox_sq = F::zero();
    let mut max_extent = F::zero();
    for comp in field.components() {
        let mut lo = comp[0];
        let mut hi = comp[0];
        for &v in comp {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let e = hi - lo;
        bbox_sq = bbox_sq + e * e;
        max_extent = max_extent.max(e);
    }
    let mut gyr = F::zero();
    for comp in field.components() {
        let mean = comp.iter().copied().sum::<F>() / F::from_usize_(m);
        for &v in comp {
            let dv = v - mean;
            gyr = gyr + dv * dv;
        }
    }
    let gyration = (gyr / F::from_usize_(m)).sqrt();
    let diameter = if d == 1 {
        max_extent
    } else {
        // exact diameter; quadratic scan is fine at these sizes
        let mut best = F::zero();
        for s in 0..m {
            for t in (s + 1)..m {
                let mut acc = F::zero();
                for comp in field.components() {
                    let dv = comp[s] - comp[t];
                    acc = acc + dv * dv;
                }
                best = best.max(acc);
            }
        }
        best.sqrt()
    };
    RadiusReport {
        diameter,
        bbox_diagonal: bbox_sq.sqrt(),
        gyration,
    }
}

/// One point of a scaling fit: lattice size, mean observable, and its
/// standard error across replicas.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Weighted least-squares fit of log value = intercept + exponent log N +
/// rho log log N, with rho held fixed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rho: f64,
}

pub fn fit_scaling_exponent(points: &[FitPoint], rho: f64) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::usage(format!(
            "scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !rho.is_finite() {
        return Err(Error::usage("rho must be finite"));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut ws = Vec::with_capacity(points.len());
    for p in points {
        if !(p.n >= 2.0) {
            return Err(Error::usage(format!("lattice size {} must be >= 2", p.n)));
        }
        if !(p.value > 0.0) || !p.value.is_finite() {
            return Err(Error::usage(format!("fit value {} must be positive", p.value)));
        }
        if !(p.stderr >= 0.0) || !p.stderr.is_finite() {
            return Err(Error::usage(format!("stderr {} must be >= 0", p.stderr)));
        }
        xs.push(p.n.ln());
        ys.push(p.value.ln() - rho * p.n.ln().ln());
        // delta method: sd of log value; floor keeps exact points usable
        let sigma = (p.stderr / p.value).max(1e-12);
        ws.push(1.0 / (sigma * sigma));
    }
    let distinct: std::collections::HashSet<u64> =
        points.iter().map(|p| p.n.to_bits()).collect();
    if distinct.len() < 2 {
        return Err(Error::usage("fit needs at least two distinct lattice sizes"));
    }
    let sw: f64 = ws.iter().sum();
    let xbar: f64 = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ybar: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        sxx += ws[i] * (xs[i] - xbar) * (xs[i] - xbar);
        sxy += ws[i] * (xs[i] - xbar) * (ys[i] - ybar);
    }
    if sxx <= 0.0 {
        return Err(Error::usage("fit needs at least two distinct lattice sizes"));
    }
    let exponent = sxy / sxx;
    let intercept = ybar - exponent * xbar;
    let exponent_stderr = (1.0 / sxx).sqrt();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..xs.len() {
        let fit = intercept + exponent * xs[i];
        ss_res += ws[i] * (ys[i] - fit) * (ys[i] - fit);
        ss_tot += ws[i] * (ys[i] - ybar) * (ys[i] - ybar);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(ScalingFit {
        exponent,
        exponent_stderr,
        intercept,
        r_squared,
        rho,
    })
}

/// Predicted growth exponents (lower, upper) for the effective radius of the
/// repelling field:
///
///   lower = (d - 2 (d - D) / (D + 2)) / D,
///   upper = d / 2 + (d - D) / (D + 2),
///
/// valid for d >= 2 and 1 <= D <= d. For d = 2, D = 1 both equal 4/3 and the
/// radius carries an extra (log N)^{2/3}; for D = d both reduce to (1, d/2).
pub fn theoretical_exponents(dim: usize, range_dim: usize) -> Result<(f64, f64)> {
    if dim < 2 {
        return Err(Error::usage(format!(
            "scaling predictions need dim >= 2, got {dim}"
        )));
    }
    if range_dim < 1 || range_dim > dim {
        return Err(Error::usage(format!(
            "scaling predictions need 1 <= range_dim <= dim, got D={range_dim} d={dim}"
        )));
    }
    let d = dim as f64;
    let dd = range_dim as f64;
    let gap = (d - dd) / (dd + 2.0);
    Ok(((d - 2.0 * gap) / dd, d / 2.0 + gap))
}
