//! The discrete Gaussian free field on the box, its tilts and exact
//! second-order statistics.
//!
//! The field u: [-N,N]^d -> R^D has Hamiltonian H(u) = sum_{x~y} |u(x)-u(y)|^2
//! and density exp(-beta H) restricted to zero site-mean per component, so in
//! the Laplacian eigenbasis the coefficients are independent centered
//! Gaussians with variance (2 beta lambda_k)^{-1}, k != 0.

use crate::error::{Error, Result};
use crate::lattice::LatticeShape;
use crate::scalar::Scalar;
use crate::spectral::{synthesize, Spectrum1D};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Model parameters: lattice shape, range dimension D, inverse temperature
/// beta, repulsion strength gamma, and the tilt slope a.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams<F> {
    pub shape: LatticeShape,
    pub range_dim: usize,
    pub beta: F,
    pub gamma: F,
    pub drift_a: F,
}

impl<F: Scalar> ModelParams<F> {
    pub fn new(shape: LatticeShape, range_dim: usize, beta: F, gamma: F) -> Result<Self> {
        let p = ModelParams {
            shape,
            range_dim,
            beta,
            gamma,
            drift_a: F::zero(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.range_dim == 0 {
            return Err(Error::usage("range_dim must be >= 1"));
        }
        if !(self.beta > F::zero()) || !self.beta.is_finite() {
            return Err(Error::usage("beta must be positive and finite"));
        }
        if !(self.gamma >= F::zero()) || !self.gamma.is_finite() {
            return Err(Error::usage("gamma must be >= 0 and finite"));
        }
        if !self.drift_a.is_finite() {
            return Err(Error::usage("drift_a must be finite"));
        }
        Ok(())
    }
}

/// Eigenbasis coefficients of a field: one block of length n^d - 1 per
/// component, indexed by flat mode index minus one (the constant mode has no
/// slot).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients<F> {
    blocks: Vec<Vec<F>>,
}

impl<F: Scalar> SpectralCoefficients<F> {
    pub fn zeros(shape: &LatticeShape, range_dim: usize) -> Self {
        SpectralCoefficients {
            blocks: vec![vec![F::zero(); shape.basis_size()]; range_dim],
        }
    }

    pub fn from_blocks(blocks: Vec<Vec<F>>, shape: &LatticeShape) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::usage("need at least one component block"));
        }
        for b in &blocks {
            if b.len() != shape.basis_size() {
                return Err(Error::usage(format!(
                    "coefficient block has length {}, expected {}",
                    b.len(),
                    shape.basis_size()
                )));
            }
        }
        Ok(SpectralCoefficients { blocks })
    }

    pub fn range_dim(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, component: usize) -> &[F] {
        &self.blocks[component]
    }

    pub fn block_mut(&mut self, component: usize) -> &mut [F] {
        &mut self.blocks[component]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[F]> {
        self.blocks.iter().map(|b| b.as_slice())
    }

    pub fn check_shape(&self, shape: &LatticeShape) -> Result<()> {
        for b in &self.blocks {
            if b.len() != shape.basis_size() {
                return Err(Error::usage(format!(
                    "coefficient block length {} does not match basis size {}",
                    b.len(),
                    shape.basis_size()
                )));
            }
        }
        Ok(())
    }
}

/// Real-space field values, stored component-major: components[i][site].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfiguration<F> {
    components: Vec<Vec<F>>,
}

impl<F: Scalar> FieldConfiguration<F> {
    pub fn zeros(shape: &LatticeShape, range_dim: usize) -> Self {
        Self::constant(shape, range_dim, F::zero())
    }

    pub fn constant(shape: &LatticeShape, range_dim: usize, value: F) -> Self {
        FieldConfiguration {
            components: vec![vec![value; shape.total_sites()]; range_dim],
        }
    }

    pub fn from_components(components: Vec<Vec<F>>) -> Self {
        debug_assert!(!components.is_empty());
        FieldConfiguration { components }
    }

    pub fn range_dim(&self) -> usize {
        self.components.len()
    }

    pub fn total_sites(&self) -> usize {
        self.components[0].len()
    }

    #[inline]
    pub fn value(&self, component: usize, site: usize) -> F {
        self.components[component][site]
    }

    #[inline]
    pub fn set_value(&mut self, component: usize, site: usize, v: F) {
        self.components[component][site] = v;
    }

    pub fn component(&self, component: usize) -> &[F] {
        &self.components[component]
    }

    pub fn component_mut(&mut self, component: usize) -> &mut [F] {
        &mut self.components[component]
    }

    pub fn components(&self) -> impl Iterator<Item = &[F]> {
        self.components.iter().map(|c| c.as_slice())
    }

    /// Copy the D values at `site` into `out`.
    pub fn site_values(&self, site: usize, out: &mut [F]) {
        for (i, comp) in self.components.iter().enumerate() {
            out[i] = comp[site];
        }
    }

    pub fn check_shape(&self, shape: &LatticeShape) -> Result<()> {
        for c in &self.components {
            if c.len() != shape.total_sites() {
                return Err(Error::usage(format!(
                    "component length {} does not match {} sites",
                    c.len(),
                    shape.total_sites()
                )));
            }
        }
        Ok(())
    }
}

/// Eigenvalue of every flat mode index, lambda[m] = sum_i lambda_{k_i};
/// lambda[0] = 0 is the excluded constant mode.
pub fn eigenvalue_grid<F: Scalar>(spec: &Spectrum1D<F>, shape: &LatticeShape) -> Vec<F> {
    let total = shape.total_sites();
    let n = shape.sites_per_axis();
    let mut grid = vec![F::zero(); total];
    for m in 1..total {
        let mut rest = m;
        let mut sum = F::zero();
        for _ in 0..shape.dim {
            sum = sum + spec.eigenvalues[rest % n];
            rest /= n;
        }
        grid[m] = sum;
    }
    grid
}

/// Draw the free field: independent coefficients X_k ~ N(0, (2 beta
/// lambda_k)^{-1}) in mode-enumeration order per component, then synthesize.
pub fn sample_prior<F: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    spec: &Spectrum1D<F>,
    rng: &mut R,
) -> Result<(SpectralCoefficients<F>, FieldConfiguration<F>)> {
    params.validate()?;
    let shape = &params.shape;
    let lambda = eigenvalue_grid(spec, shape);
    let two_beta = F::from_f64_(2.0) * params.beta;
    let mut coeffs = SpectralCoefficients::zeros(shape, params.range_dim);
    for c in 0..params.range_dim {
        let block = coeffs.block_mut(c);
        for (m, slot) in block.iter_mut().enumerate() {
            let sd = (two_beta * lambda[m + 1]).sqrt().recip();
            *slot = F::standard_normal(rng) * sd;
        }
    }
    let field = synthesize(&coeffs, spec, shape)?;
    Ok((coeffs, field))
}

/// Expansion coefficients of the tilt profile: the coordinate function
/// f(x) = x_i written in the tensor basis has coefficient alpha_j on the mode
/// j along axis i (zero elsewhere), the same vector for every axis:
///
///   alpha_j = phi_0^{1-d} * sum_{x=-N..N} x phi_j(x),   alpha_0 = 0,
///
/// and alpha_j = 0 for even j since those modes are even in x.
#[derive(Debug, Clone)]
pub struct DriftCoefficients<F> {
    pub alpha: Vec<F>,
}

pub fn drift_coefficients<F: Scalar>(
    spec: &Spectrum1D<F>,
    dim: usize,
) -> Result<DriftCoefficients<F>> {
    if dim == 0 {
        return Err(Error::usage("dim must be >= 1"));
    }
    let n = spec.sites_per_axis();
    let half = spec.half_width as i64;
    // phi_0^{1-d} = (2N+1)^{(d-1)/2}
    let scale = F::from_usize_(n).powf(F::from_f64_((dim as f64 - 1.0) / 2.0));
    let mut alpha = Vec::with_capacity(n);
    alpha.push(F::zero()); // the coordinate function has zero mean
    for j in 1..n {
        if j % 2 == 0 {
            // even modes are even in x, the ramp is odd: exactly zero
            alpha.push(F::zero());
            continue;
        }
        let mut s = F::zero();
        for x in -half..=half {
            s = s + F::from_f64_(x as f64) * spec.phi_at(j, x);
        }
        alpha.push(scale * s);
    }
    Ok(DriftCoefficients { alpha })
}

/// Tilt the field in place: u^{(i)}(x) += a * x_i for each component i.
/// Needs D <= d so every component has a coordinate to follow.
pub fn apply_drift<F: Scalar>(
    field: &mut FieldConfiguration<F>,
    shape: &LatticeShape,
    a: F,
) -> Result<()> {
    field.check_shape(shape)?;
    if field.range_dim() > shape.dim {
        return Err(Error::usage(format!(
            "drift needs range_dim <= dim, got D={} d={}",
            field.range_dim(),
            shape.dim
        )));
    }
    if a == F::zero() {
        return Ok(());
    }
    for i in 0..field.range_dim() {
        let comp = field.component_mut(i);
        for site in 0..comp.len() {
            let x = shape.axis_coord(site, i);
            comp[site] = comp[site] + a * F::from_f64_(x as f64);
        }
    }
    Ok(())
}

/// Shift coefficients so that a prior draw becomes a draw from the tilted
/// measure: X_{j e_i} -> X_{j e_i} - a alpha_j for every component i and odd
/// mode j along axis i.
pub fn apply_drift_shift<F: Scalar>(
    coeffs: &mut SpectralCoefficients<F>,
    drift: &DriftCoefficients<F>,
    shape: &LatticeShape,
    a: F,
) -> Result<()> {
    coeffs.check_shape(shape)?;
    if coeffs.range_dim() > shape.dim {
        return Err(Error::usage(format!(
            "drift needs range_dim <= dim, got D={} d={}",
            coeffs.range_dim(),
            shape.dim
        )));
    }
    let n = shape.sites_per_axis();
    let mut tuple = vec![0usize; shape.dim];
    for i in 0..coeffs.range_dim() {
        for j in 1..n {
            tuple.iter_mut().for_each(|t| *t = 0);
            tuple[i] = j;
            let m = shape.mode_index(&tuple)?;
            let block = coeffs.block_mut(i);
            block[m - 1] = block[m - 1] - a * drift.alpha[j];
        }
    }
    Ok(())
}

/// Log density of the tilted measure against the free field at the
/// configuration with coefficients X:
///
///   log (dPhat/dP)(u) = - sum_i sum_j [ 2 a alpha_j X_{j e_i} + (a
///   alpha_j)^2 ] beta lambda_j.
///
/// Under the tilted measure the axis modes are shifted by -a alpha_j, so this
/// integrates to one under P.
pub fn log_rn_derivative<F: Scalar>(
    coeffs: &SpectralCoefficients<F>,
    drift: &DriftCoefficients<F>,
    params: &ModelParams<F>,
    spec: &Spectrum1D<F>,
) -> Result<F> {
    params.validate()?;
    coeffs.check_shape(&params.shape)?;
    if params.range_dim > params.shape.dim {
        return Err(Error::usage(format!(
            "drift needs range_dim <= dim, got D={} d={}",
            params.range_dim, params.shape.dim
        )));
    }
    let a = params.drift_a;
    if a == F::zero() {
        return Ok(F::zero());
    }
    let n = params.shape.sites_per_axis();
    let two = F::from_f64_(2.0);
    let mut tuple = vec![0usize; params.shape.dim];
    let mut total = F::zero();
    for i in 0..params.range_dim {
        for j in 1..n {
            let aa = a * drift.alpha[j];
            if aa == F::zero() {
                continue;
            }
            tuple.iter_mut().for_each(|t| *t = 0);
            tuple[i] = j;
            let m = params.shape.mode_index(&tuple)?;
            let x = coeffs.block(i)[m - 1];
            total = total - (two * aa * x + aa * aa) * params.beta * spec.eigenvalues[j];
        }
    }
    Ok(total)
}

/// Exact variance of u^{(i)}(z) - u^{(i)}(w) under the free field (any
/// component):
///
///   Var = (2 beta)^{-1} sum_{k != 0} lambda_k^{-1} (Phi_k(z) - Phi_k(w))^2.
pub fn pair_difference_variance<F: Scalar>(
    z: &[i64],
    w: &[i64],
    params: &ModelParams<F>,
    spec: &Spectrum1D<F>,
) -> Result<F> {
    params.validate()?;
    let shape = &params.shape;
    shape.site_index(z)?;
    shape.site_index(w)?;
    let n = shape.sites_per_axis();
    let lambda = eigenvalue_grid(spec, shape);
    let mut tuple = vec![0usize; shape.dim];
    let mut sum = F::zero();
    for m in 1..shape.total_sites() {
        shape.mode_tuple(m, &mut tuple);
        let mut pz = F::one();
        let mut pw = F::one();
        for (i, &k) in tuple.iter().enumerate() {
            debug_assert!(k < n);
            pz = pz * spec.phi_at(k, z[i]);
            pw = pw * spec.phi_at(k, w[i]);
        }
        let d = pz - pw;
        sum = sum + d * d / lambda[m];
    }
    Ok(sum / (F::from_f64_(2.0) * params.beta))
}

/// Elastic energy H(u) = sum_{x~y} |u(x) - u(y)|^2 (each edge once).
pub fn elastic_energy<F: Scalar>(field: &FieldConfiguration<F>, shape: &LatticeShape) -> F {
    let n = shape.sites_per_axis();
    let total = shape.total_sites();
    let mut h = F::zero();
    for axis in 0..shape.dim {
        let stride = shape.stride(axis);
        for flat in 0..total {
            let p = (flat / stride) % n;
            if p + 1 < n {
                let other = flat + stride;
                for comp in field.components() {
                    let d = comp[flat] - comp[other];
                    h = h + d * d;
                }
            }
        }
    }
    h
}
