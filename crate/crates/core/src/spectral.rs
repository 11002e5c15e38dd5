//! Eigenbasis of the graph Laplacian on the box with free boundary.
//!
//! On the path with n = 2N + 1 vertices the Laplacian L = D - A has
//! eigenvalues lambda_k = 2 - 2 cos(pi k / n) and orthonormal eigenvectors
//!
//!   phi_k(x) = c_k cos(pi k (x + N + 1/2) / n),   x in {-N..N},
//!
//! with c_0 = n^{-1/2} and c_k = (2/n)^{1/2} for k >= 1. In d dimensions the
//! basis is the tensor product Phi_k(x) = prod_i phi_{k_i}(x_i) and the
//! eigenvalue is the sum of the per-axis ones. The constant mode k = 0 is
//! excluded from field representations throughout.

use crate::error::{Error, Result};
use crate::gff::{FieldConfiguration, SpectralCoefficients};
use crate::lattice::LatticeShape;
use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Eigenvalues and sampled eigenfunctions of the 1D free-boundary Laplacian.
#[derive(Debug, Clone)]
pub struct Spectrum1D<F> {
    pub half_width: usize,
    /// lambda_0 = 0 <= lambda_1 < ... < lambda_{2N}.
    pub eigenvalues: Vec<F>,
    /// Row-major n x n table, phi[k * n + p] with p = x + N.
    phi: Vec<F>,
}

impl<F: Scalar> Spectrum1D<F> {
    pub fn sites_per_axis(&self) -> usize {
        2 * self.half_width + 1
    }

    /// phi_k at grid position p = x + N.
    #[inline]
    pub fn phi(&self, k: usize, p: usize) -> F {
        self.phi[k * self.sites_per_axis() + p]
    }

    /// phi_k at lattice coordinate x in [-N, N].
    pub fn phi_at(&self, k: usize, x: i64) -> F {
        self.phi(k, (x + self.half_width as i64) as usize)
    }

    /// Value of the constant eigenfunction, (2N+1)^{-1/2}.
    pub fn phi0(&self) -> F {
        self.phi(0, 0)
    }
}

pub fn build_spectrum_1d<F: Scalar>(half_width: usize) -> Result<Spectrum1D<F>> {
    if half_width == 0 {
        return Err(Error::usage("half_width must be >= 1"));
    }
    let n = 2 * half_width + 1;
    let nf = F::from_usize_(n);
    let two = F::from_f64_(2.0);
    let pi = F::from_f64_(std::f64::consts::PI);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut phi = vec![F::zero(); n * n];
    let c0 = nf.sqrt().recip();
    let ck = (two / nf).sqrt();
    for k in 0..n {
        let kf = F::from_usize_(k);
        eigenvalues.push(two - two * (pi * kf / nf).cos());
        let c = if k == 0 { c0 } else { ck };
        for p in 0..n {
            // x + N + 1/2 = p + 1/2
            let arg = pi * kf * (F::from_usize_(p) + F::from_f64_(0.5)) / nf;
            phi[k * n + p] = c * arg.cos();
        }
    }
    Ok(Spectrum1D {
        half_width,
        eigenvalues,
        phi,
    })
}

/// d-dimensional eigenvalue for the mode tuple k: sum of the per-axis ones.
/// (The eigenfunctions multiply; the eigenvalues add.)
pub fn eigenvalue_product<F: Scalar>(modes: &[usize], spec: &Spectrum1D<F>) -> Result<F> {
    if modes.is_empty() {
        return Err(Error::usage("mode tuple must have at least one entry"));
    }
    let n = spec.sites_per_axis();
    let mut sum = F::zero();
    for &k in modes {
        if k >= n {
            return Err(Error::usage(format!("mode {k} outside 0..{n}")));
        }
        sum = sum + spec.eigenvalues[k];
    }
    Ok(sum)
}

/// Apply the n x n matrix `phi` (analyze) or its transpose (synthesize) along
/// every axis of the grid `data` of shape n^d, in place.
fn tensor_apply<F: Scalar>(
    data: &mut [F],
    spec: &Spectrum1D<F>,
    shape: &LatticeShape,
    transpose: bool,
) {
    let n = shape.sites_per_axis();
    let total = shape.total_sites();
    debug_assert_eq!(data.len(), total);
    let mut line = vec![F::zero(); n];
    for axis in 0..shape.dim {
        let stride = shape.stride(axis);
        let block = stride * n;
        let mut base = 0;
        while base < total {
            for inner in 0..stride {
                let start = base + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                for i in 0..n {
                    let mut acc = F::zero();
                    for (j, &v) in line.iter().enumerate() {
                        // analyze: out[k] = sum_x phi[k][x] in[x]
                        // synthesize: out[x] = sum_k phi[k][x] in[k]
                        let m = if transpose {
                            spec.phi(j, i)
                        } else {
                            spec.phi(i, j)
                        };
                        acc = acc + m * v;
                    }
                    data[start + i * stride] = acc;
                }
            }
            base += block;
        }
    }
}

fn check_spec_shape<F: Scalar>(spec: &Spectrum1D<F>, shape: &LatticeShape) -> Result<()> {
    if spec.half_width != shape.half_width {
        return Err(Error::usage(format!(
            "spectrum half_width {} does not match lattice half_width {}",
            spec.half_width, shape.half_width
        )));
    }
    Ok(())
}

/// Field from coefficients: u^{(i)}(x) = sum_{k != 0} X_k^{(i)} Phi_k(x).
pub fn synthesize<F: Scalar>(
    coeffs: &SpectralCoefficients<F>,
    spec: &Spectrum1D<F>,
    shape: &LatticeShape,
) -> Result<FieldConfiguration<F>> {
    check_spec_shape(spec, shape)?;
    coeffs.check_shape(shape)?;
    let total = shape.total_sites();
    let mut components = Vec::with_capacity(coeffs.range_dim());
    for block in coeffs.blocks() {
        let mut grid = vec![F::zero(); total];
        grid[1..].copy_from_slice(block); // slot 0 is the excluded constant mode
        tensor_apply(&mut grid, spec, shape, true);
        components.push(grid);
    }
    Ok(FieldConfiguration::from_components(components))
}

/// Coefficients from a field: X_k^{(i)} = <Phi_k, u^{(i)}>. The constant mode
/// is projected out (its coefficient is dropped).
pub fn analyze<F: Scalar>(
    field: &FieldConfiguration<F>,
    spec: &Spectrum1D<F>,
    shape: &LatticeShape,
) -> Result<SpectralCoefficients<F>> {
    check_spec_shape(spec, shape)?;
    field.check_shape(shape)?;
    let mut blocks = Vec::with_capacity(field.range_dim());
    for comp in field.components() {
        let mut grid = comp.to_vec();
        tensor_apply(&mut grid, spec, shape, false);
        blocks.push(grid[1..].to_vec());
    }
    SpectralCoefficients::from_blocks(blocks, shape)
}

/// Dense graph Laplacian of the box, for cross-checking the closed-form
/// spectrum. Refuses lattices with more than 10^4 sites.
pub fn dense_laplacian(shape: &LatticeShape) -> Result<DMatrix<f64>> {
    let total = shape.total_sites();
    if total > 10_000 {
        return Err(Error::ResourceLimit(format!(
            "dense Laplacian limited to 10^4 sites, got {total}"
        )));
    }
    let mut l = DMatrix::<f64>::zeros(total, total);
    let mut nbrs = Vec::new();
    for x in 0..total {
        shape.neighbors(x, &mut nbrs);
        l[(x, x)] = nbrs.len() as f64;
        for &y in &nbrs {
            l[(x, y)] = -1.0;
        }
    }
    Ok(l)
}
