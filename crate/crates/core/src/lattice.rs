//! Geometry of the box [-N, N]^d in Z^d with free boundary.
//!
//! Sites are enumerated lexicographically with the *last* coordinate varying
//! fastest: flat = ((p_1 n + p_2) n + p_3) ... where p_i = x_i + N and
//! n = 2N + 1. Eigenmode tuples k in {0..2N}^d use the same flattening, so a
//! coefficient vector lines up with the tensor-product basis order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeShape {
    /// N: the box is [-N, N]^d.
    pub half_width: usize,
    /// d: number of lattice dimensions.
    pub dim: usize,
}

impl LatticeShape {
    pub fn new(half_width: usize, dim: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::usage("half_width must be >= 1"));
        }
        if dim == 0 {
            return Err(Error::usage("dim must be >= 1"));
        }
        let n = 2 * half_width + 1;
        let mut total: usize = 1;
        for _ in 0..dim {
            total = total
                .checked_mul(n)
                .ok_or_else(|| Error::ResourceLimit(format!("(2*{half_width}+1)^{dim} overflows")))?;
        }
        Ok(LatticeShape { half_width, dim })
    }

    /// Sites per axis, n = 2N + 1.
    pub fn sites_per_axis(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Total number of sites, n^d.
    pub fn total_sites(&self) -> usize {
        self.sites_per_axis().pow(self.dim as u32)
    }

    /// Dimension of the zero-mean field space per component: n^d - 1
    /// (the constant mode is excluded).
    pub fn basis_size(&self) -> usize {
        self.total_sites() - 1
    }

    /// Stride of `axis` in the flat enumeration (last axis has stride 1).
    pub fn stride(&self, axis: usize) -> usize {
        self.sites_per_axis().pow((self.dim - 1 - axis) as u32)
    }

    /// Flat index of a site given its coordinates in [-N, N]^d.
    pub fn site_index(&self, coords: &[i64]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::usage(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let half = self.half_width as i64;
        let n = self.sites_per_axis();
        let mut flat = 0usize;
        for &x in coords {
            if x < -half || x > half {
                return Err(Error::usage(format!(
                    "coordinate {x} outside [-{half}, {half}]"
                )));
            }
            flat = flat * n + (x + half) as usize;
        }
        Ok(flat)
    }

    /// Coordinates of a flat site index, written into `out`.
    pub fn site_coords(&self, mut flat: usize, out: &mut Vec<i64>) {
        debug_assert!(flat < self.total_sites());
        let half = self.half_width as i64;
        let n = self.sites_per_axis();
        out.clear();
        out.resize(self.dim, 0);
        for i in (0..self.dim).rev() {
            out[i] = (flat % n) as i64 - half;
            flat /= n;
        }
    }

    pub fn site_coords_vec(&self, flat: usize) -> Vec<i64> {
        let mut out = Vec::new();
        self.site_coords(flat, &mut out);
        out
    }

    /// Coordinate of site `flat` along `axis`, in [-N, N].
    pub fn axis_coord(&self, flat: usize, axis: usize) -> i64 {
        let n = self.sites_per_axis();
        ((flat / self.stride(axis)) % n) as i64 - self.half_width as i64
    }

    /// Push the flat indices of the nearest neighbors of `flat` onto `out`
    /// (free boundary: between d and 2d of them).
    pub fn neighbors(&self, flat: usize, out: &mut Vec<usize>) {
        out.clear();
        let n = self.sites_per_axis();
        for axis in 0..self.dim {
            let stride = self.stride(axis);
            let p = (flat / stride) % n;
            if p > 0 {
                out.push(flat - stride);
            }
            if p + 1 < n {
                out.push(flat + stride);
            }
        }
    }

    /// Validate a mode tuple k in {0..2N}^d; returns its flat index under the
    /// same enumeration as sites.
    pub fn mode_index(&self, modes: &[usize]) -> Result<usize> {
        if modes.len() != self.dim {
            return Err(Error::usage(format!(
                "expected {} mode numbers, got {}",
                self.dim,
                modes.len()
            )));
        }
        let n = self.sites_per_axis();
        let mut flat = 0usize;
        for &k in modes {
            if k >= n {
                return Err(Error::usage(format!("mode {k} outside 0..{n}")));
            }
            flat = flat * n + k;
        }
        Ok(flat)
    }

    /// Mode tuple of a flat mode index.
    pub fn mode_tuple(&self, mut flat: usize, out: &mut Vec<usize>) {
        let n = self.sites_per_axis();
        out.clear();
        out.resize(self.dim, 0);
        for i in (0..self.dim).rev() {
            out[i] = flat % n;
            flat /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_lexicographic_last_fastest() {
        let shape = LatticeShape::new(1, 2).unwrap();
        // (-1,-1) -> 0, (-1,0) -> 1, ..., (1,1) -> 8
        assert_eq!(shape.site_index(&[-1, -1]).unwrap(), 0);
        assert_eq!(shape.site_index(&[-1, 0]).unwrap(), 1);
        assert_eq!(shape.site_index(&[0, -1]).unwrap(), 3);
        assert_eq!(shape.site_index(&[1, 1]).unwrap(), 8);
        for flat in 0..shape.total_sites() {
            let coords = shape.site_coords_vec(flat);
            assert_eq!(shape.site_index(&coords).unwrap(), flat);
            for axis in 0..2 {
                assert_eq!(shape.axis_coord(flat, axis), coords[axis]);
            }
        }
    }

    #[test]
    fn counts() {
        let shape = LatticeShape::new(3, 2).unwrap();
        assert_eq!(shape.sites_per_axis(), 7);
        assert_eq!(shape.total_sites(), 49);
        assert_eq!(shape.basis_size(), 48);
        let shape = LatticeShape::new(2, 3).unwrap();
        assert_eq!(shape.total_sites(), 125);
    }

    #[test]
    fn neighbor_counts_free_boundary() {
        let shape = LatticeShape::new(2, 2).unwrap();
        let mut buf = Vec::new();
        let corner = shape.site_index(&[-2, -2]).unwrap();
        shape.neighbors(corner, &mut buf);
        assert_eq!(buf.len(), 2);
        let center = shape.site_index(&[0, 0]).unwrap();
        shape.neighbors(center, &mut buf);
        assert_eq!(buf.len(), 4);
        let edge = shape.site_index(&[-2, 0]).unwrap();
        shape.neighbors(edge, &mut buf);
        assert_eq!(buf.len(), 3);
        // neighbors differ by exactly one unit step
        for flat in 0..shape.total_sites() {
            shape.neighbors(flat, &mut buf);
            let c = shape.site_coords_vec(flat);
            for &nb in buf.iter() {
                let cn = shape.site_coords_vec(nb);
                let dist: i64 = c.iter().zip(&cn).map(|(a, b)| (a - b).abs()).sum();
                assert_eq!(dist, 1);
            }
        }
    }

    #[test]
    fn invalid_inputs_are_usage_errors() {
        assert!(matches!(LatticeShape::new(0, 2), Err(Error::Usage(_))));
        assert!(matches!(LatticeShape::new(2, 0), Err(Error::Usage(_))));
        let shape = LatticeShape::new(1, 2).unwrap();
        assert!(shape.site_index(&[2, 0]).is_err());
        assert!(shape.site_index(&[0]).is_err());
        assert!(shape.mode_index(&[3, 0]).is_err());
        assert!(shape.mode_index(&[0, 0, 0]).is_err());
    }

    #[test]
    fn mode_and_site_enumerations_agree() {
        let shape = LatticeShape::new(2, 3).unwrap();
        let mut tuple = Vec::new();
        for flat in 0..shape.total_sites() {
            shape.mode_tuple(flat, &mut tuple);
            assert_eq!(shape.mode_index(&tuple).unwrap(), flat);
        }
    }
}
