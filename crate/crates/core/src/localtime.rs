//! Local time and self-intersection energy of a field configuration.
//!
//! The field occupies the unit boxes u(x) + [-1/2, 1/2]^D; the local time at
//! z in R^D counts the boxes containing z. The self-intersection energy is
//! Phi = integral of the squared local time, which collapses to the exact
//! pair form
//!
//!   Phi(u) = sum_{x, x'} prod_i max(0, 1 - |u_i(x) - u_i(x')|)
//!
//! over ordered pairs (the diagonal contributes one per site). Pairs farther
//! than 1 apart in any component do not interact, so a unit-cell spatial hash
//! finds all interacting pairs.

use crate::error::{Error, Result};
use crate::gff::FieldConfiguration;
use crate::scalar::Scalar;
use std::collections::HashMap;

/// Spatial hash keys support up to this many range dimensions.
pub const MAX_CELL_DIM: usize = 8;

/// Unit-cell key: floor(u_i) per component, unused axes zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellKey([i32; MAX_CELL_DIM]);

/// Spatial hash of sites into unit cells. Two sites can only have nonzero
/// overlap if their cells differ by at most one along every axis.
#[derive(Debug, Clone)]
pub struct CellIndex {
    range_dim: usize,
    cells: HashMap<CellKey, Vec<u32>>,
    site_cell: Vec<CellKey>,
}

fn cell_key<F: Scalar>(field: &FieldConfiguration<F>, site: usize) -> Result<CellKey> {
    let mut key = [0i32; MAX_CELL_DIM];
    for c in 0..field.range_dim() {
        let v = field.value(c, site).to_f64();
        let v = v.ok_or_else(|| {
            Error::Numerical(format!("non-finite field value at site {site}"))
        })?;
        if !v.is_finite() || v.abs() >= i32::MAX as f64 - 2.0 {
            return Err(Error::Numerical(format!(
                "field value {v} at site {site} outside cell range"
            )));
        }
        key[c] = v.floor() as i32;
    }
    Ok(CellKey(key))
}

fn key_of_values<F: Scalar>(values: &[F]) -> Result<CellKey> {
    let mut key = [0i32; MAX_CELL_DIM];
    for (c, &v) in values.iter().enumerate() {
        let v = v
            .to_f64()
            .filter(|x| x.is_finite() && x.abs() < i32::MAX as f64 - 2.0)
            .ok_or_else(|| Error::Numerical(format!("value {v} outside cell range")))?;
        key[c] = v.floor() as i32;
    }
    Ok(CellKey(key))
}

impl CellIndex {
    pub fn build<F: Scalar>(field: &FieldConfiguration<F>) -> Result<Self> {
        let d = field.range_dim();
        if d > MAX_CELL_DIM {
            return Err(Error::ResourceLimit(format!(
                "cell index supports range_dim <= {MAX_CELL_DIM}, got {d}"
            )));
        }
        let total = field.total_sites();
        if total >= u32::MAX as usize {
            return Err(Error::ResourceLimit("too many sites for cell index".into()));
        }
        let mut cells: HashMap<CellKey, Vec<u32>> = HashMap::new();
        let mut site_cell = Vec::with_capacity(total);
        for site in 0..total {
            let key = cell_key(field, site)?;
            cells.entry(key).or_default().push(site as u32);
            site_cell.push(key);
        }
        Ok(CellIndex {
            range_dim: d,
            cells,
            site_cell,
        })
    }

    pub fn range_dim(&self) -> usize {
        self.range_dim
    }

    /// Re-hash one site after its value changed.
    pub fn move_site<F: Scalar>(&mut self, site: usize, new_values: &[F]) -> Result<()> {
        let new_key = key_of_values(new_values)?;
        let old_key = self.site_cell[site];
        if new_key == old_key {
            return Ok(());
        }
        let bucket = self.cells.get_mut(&old_key).ok_or_else(|| {
            Error::InconsistentState(format!("site {site} missing from its cell"))
        })?;
        let pos = bucket
            .iter()
            .position(|&s| s as usize == site)
            .ok_or_else(|| {
                Error::InconsistentState(format!("site {site} missing from its cell"))
            })?;
        bucket.swap_remove(pos);
        if bucket.is_empty() {
            self.cells.remove(&old_key);
        }
        self.cells.entry(new_key).or_default().push(site as u32);
        self.site_cell[site] = new_key;
        Ok(())
    }

    /// Check that the stored key for `site` matches the field.
    fn check_site<F: Scalar>(&self, field: &FieldConfiguration<F>, site: usize) -> Result<()> {
        let key = cell_key(field, site)?;
        if key != self.site_cell[site] {
            return Err(Error::InconsistentState(format!(
                "cell index is stale at site {site}"
            )));
        }
        Ok(())
    }

    /// Visit every site whose cell neighbors `key` (the 3^D surrounding
    /// cells, including `key` itself).
    fn for_each_nearby(&self, key: &CellKey, mut f: impl FnMut(u32)) {
        let d = self.range_dim;
        let mut offs = [-1i32; MAX_CELL_DIM];
        loop {
            let mut probe = *key;
            for i in 0..d {
                probe.0[i] += offs[i];
            }
            if let Some(bucket) = self.cells.get(&probe) {
                for &s in bucket {
                    f(s);
                }
            }
            // advance the offset counter in base 3
            let mut axis = 0;
            loop {
                if axis == d {
                    return;
                }
                offs[axis] += 1;
                if offs[axis] <= 1 {
                    break;
                }
                offs[axis] = -1;
                axis += 1;
            }
        }
    }
}

/// Overlap weight of two value vectors: prod_i max(0, 1 - |a_i - b_i|).
#[inline]
fn overlap<F: Scalar>(field: &FieldConfiguration<F>, s: usize, t: usize) -> F {
    let mut acc = F::one();
    for comp in field.components() {
        let d = (comp[s] - comp[t]).abs();
        if d >= F::one() {
            return F::zero();
        }
        acc = acc * (F::one() - d);
    }
    acc
}

#[inline]
fn overlap_values<F: Scalar>(field: &FieldConfiguration<F>, values: &[F], t: usize) -> F {
    let mut acc = F::one();
    for (c, comp) in field.components().enumerate() {
        let d = (values[c] - comp[t]).abs();
        if d >= F::one() {
            return F::zero();
        }
        acc = acc * (F::one() - d);
    }
    acc
}

/// Self-intersection energy split into the site-count diagonal and the pair
/// part: total = diagonal + offdiag, diagonal = number of sites exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<F> {
    pub total: F,
    pub diagonal: F,
    pub offdiag: F,
}

/// Phi via the cell index; O(sites * occupancy) instead of O(sites^2).
pub fn energy_with_cells<F: Scalar>(
    cells: &CellIndex,
    field: &FieldConfiguration<F>,
) -> EnergyBreakdown<F> {
    let total_sites = field.total_sites();
    let mut off = F::zero();
    for s in 0..total_sites {
        let key = cells.site_cell[s];
        let mut acc = F::zero();
        cells.for_each_nearby(&key, |t| {
            if (t as usize) > s {
                acc = acc + overlap(field, s, t as usize);
            }
        });
        off = off + acc;
    }
    let diagonal = F::from_usize_(total_sites);
    let offdiag = F::from_f64_(2.0) * off;
    EnergyBreakdown {
        total: diagonal + offdiag,
        diagonal,
        offdiag,
    }
}

pub fn self_intersection_energy<F: Scalar>(
    field: &FieldConfiguration<F>,
) -> Result<EnergyBreakdown<F>> {
    let cells = CellIndex::build(field)?;
    Ok(energy_with_cells(&cells, field))
}

/// Phi by the quadratic-cost double loop; the oracle the cell-index version
/// is checked against.
pub fn self_intersection_energy_brute<F: Scalar>(
    field: &FieldConfiguration<F>,
) -> EnergyBreakdown<F> {
    let total_sites = field.total_sites();
    let mut off = F::zero();
    for s in 0..total_sites {
        for t in (s + 1)..total_sites {
            off = off + overlap(field, s, t);
        }
    }
    let diagonal = F::from_usize_(total_sites);
    let offdiag = F::from_f64_(2.0) * off;
    EnergyBreakdown {
        total: diagonal + offdiag,
        diagonal,
        offdiag,
    }
}

/// Total overlap of `values` placed at `site` with every other site, found
/// through the cell index.
pub fn site_interaction<F: Scalar>(
    cells: &CellIndex,
    field: &FieldConfiguration<F>,
    site: usize,
    values: &[F],
) -> Result<F> {
    let key = key_of_values(values)?;
    let mut acc = F::zero();
    cells.for_each_nearby(&key, |t| {
        if t as usize != site {
            acc = acc + overlap_values(field, values, t as usize);
        }
    });
    Ok(acc)
}

/// Change in Phi if `site` moved to `new_values`, with everything else fixed:
/// twice the difference of its interactions (each cross pair appears in both
/// orders). Errors if the cell index is stale at `site`.
pub fn energy_delta_single_site<F: Scalar>(
    cells: &CellIndex,
    field: &FieldConfiguration<F>,
    site: usize,
    new_values: &[F],
) -> Result<F> {
    cells.check_site(field, site)?;
    let mut old_values = vec![F::zero(); field.range_dim()];
    field.site_values(site, &mut old_values);
    let new_i = site_interaction(cells, field, site, new_values)?;
    let old_i = site_interaction(cells, field, site, &old_values)?;
    Ok(F::from_f64_(2.0) * (new_i - old_i))
}

/// Integer-grid local time over the window [lo, hi] (inclusive): count(z) is
/// the number of sites with u(x) in z + [-1/2, 1/2)^D, i.e. z_i =
/// floor(u_i + 1/2) with half-integer values rounding up.
#[derive(Debug, Clone)]
pub struct LocalTimeHistogram {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    /// Row-major over the window, last axis fastest.
    pub counts: Vec<u64>,
    /// Sites that fell inside / outside the window.
    pub inside: u64,
    pub outside: u64,
}

impl LocalTimeHistogram {
    pub fn complete(&self) -> bool {
        self.outside == 0
    }

    pub fn count(&self, z: &[i64]) -> Result<u64> {
        if z.len() != self.lo.len() {
            return Err(Error::usage(format!(
                "expected {} window coordinates",
                self.lo.len()
            )));
        }
        let mut flat = 0usize;
        for i in 0..z.len() {
            if z[i] < self.lo[i] || z[i] > self.hi[i] {
                return Err(Error::usage(format!(
                    "z[{i}] = {} outside window [{}, {}]",
                    z[i], self.lo[i], self.hi[i]
                )));
            }
            let extent = (self.hi[i] - self.lo[i] + 1) as usize;
            flat = flat * extent + (z[i] - self.lo[i]) as usize;
        }
        Ok(self.counts[flat])
    }

    /// Sum of squared counts over the window.
    pub fn sum_squares(&self) -> f64 {
        self.counts.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }
}

pub fn local_time_histogram<F: Scalar>(
    field: &FieldConfiguration<F>,
    lo: &[i64],
    hi: &[i64],
) -> Result<LocalTimeHistogram> {
    let d = field.range_dim();
    if lo.len() != d || hi.len() != d {
        return Err(Error::usage(format!(
            "window must have {d} coordinates per corner"
        )));
    }
    let mut volume = 1usize;
    for i in 0..d {
        if lo[i] > hi[i] {
            return Err(Error::usage(format!("window corner {i} inverted")));
        }
        let extent = (hi[i] - lo[i] + 1) as usize;
        volume = volume
            .checked_mul(extent)
            .filter(|&v| v <= 100_000_000)
            .ok_or_else(|| Error::ResourceLimit("histogram window too large".into()))?;
    }
    let mut counts = vec![0u64; volume];
    let mut inside = 0u64;
    let mut outside = 0u64;
    let mut z = vec![0i64; d];
    'sites: for site in 0..field.total_sites() {
        for (c, comp) in field.components().enumerate() {
            let v = comp[site].to_f64().ok_or_else(|| {
                Error::Numerical(format!("non-finite field value at site {site}"))
            })?;
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite field value at site {site}"
                )));
            }
            z[c] = (v + 0.5).floor() as i64;
        }
        let mut flat = 0usize;
        for i in 0..d {
            if z[i] < lo[i] || z[i] > hi[i] {
                outside += 1;
                continue 'sites;
            }
            let extent = (hi[i] - lo[i] + 1) as usize;
            flat = flat * extent + (z[i] - lo[i]) as usize;
        }
        counts[flat] += 1;
        inside += 1;
    }
    Ok(LocalTimeHistogram {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        counts,
        inside,
        outside,
    })
}

/// Count with a sorted sweep how many of the intervals [c - 1/2, c + 1/2]
/// (closed) contain each grid point, and accumulate the squared count.
fn sweep_squared_counts(starts: &[f64], ends: &[f64], z0: f64, z1: f64, step: f64) -> f64 {
    let mut acc = 0.0;
    let mut si = 0;
    let mut ei = 0;
    let mut z = z0;
    while z <= z1 {
        while si < starts.len() && starts[si] <= z {
            si += 1;
        }
        while ei < ends.len() && ends[ei] < z {
            ei += 1;
        }
        let count = (si - ei) as f64;
        acc += count * count;
        z += step;
    }
    acc
}

/// Midpoint-rule quadrature of the integral of the squared local time, an
/// independent check on the pair formula. Deliberately limited: at most 100
/// sites, D <= 2, step in (0, 0.5).
pub fn energy_by_quadrature<F: Scalar>(field: &FieldConfiguration<F>, step: f64) -> Result<F> {
    let d = field.range_dim();
    let m = field.total_sites();
    if d > 2 {
        return Err(Error::ResourceLimit(format!(
            "quadrature supports range_dim <= 2, got {d}"
        )));
    }
    if m > 100 {
        return Err(Error::ResourceLimit(format!(
            "quadrature supports at most 100 sites, got {m}"
        )));
    }
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::usage("step must lie in (0, 0.5)"));
    }
    let mut values = vec![vec![0.0f64; m]; d];
    for (c, comp) in field.components().enumerate() {
        for (s, &v) in comp.iter().enumerate() {
            let v = v
                .to_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Numerical("non-finite field value".into()))?;
            values[c][s] = v;
        }
    }
    let sorted =
        |v: &mut Vec<f64>| v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    if d == 1 {
        let mut starts: Vec<f64> = values[0].iter().map(|u| u - 0.5).collect();
        let mut ends: Vec<f64> = values[0].iter().map(|u| u + 0.5).collect();
        sorted(&mut starts);
        sorted(&mut ends);
        let z0 = starts[0] - 0.25 + step / 2.0;
        let z1 = ends[ends.len() - 1] + 0.25;
        let points = ((z1 - z0) / step) as usize + 1;
        if points > 500_000_000 {
            return Err(Error::ResourceLimit("quadrature grid too large".into()));
        }
        return Ok(F::from_f64_(step * sweep_squared_counts(&starts, &ends, z0, z1, step)));
    }
    // D = 2: sweep columns along axis 0, with the active site set maintained
    // by entry/exit events; each column is a 1D sweep over axis 1.
    let u0 = &values[0];
    let u1 = &values[1];
    let mut entry: Vec<(f64, usize)> = u0.iter().enumerate().map(|(s, u)| (u - 0.5, s)).collect();
    let mut exit: Vec<(f64, usize)> = u0.iter().enumerate().map(|(s, u)| (u + 0.5, s)).collect();
    entry.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    exit.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let min0 = entry[0].0;
    let max0 = exit[exit.len() - 1].0;
    let min1 = u1.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5;
    let max1 = u1.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5;
    let z0 = min0 - 0.25 + step / 2.0;
    let z1 = max0 + 0.25;
    let w0 = min1 - 0.25 + step / 2.0;
    let w1 = max1 + 0.25;
    let p0 = ((z1 - z0) / step) as usize + 1;
    let p1 = ((w1 - w0) / step) as usize + 1;
    if p0.saturating_mul(p1) > 500_000_000 {
        return Err(Error::ResourceLimit("quadrature grid too large".into()));
    }
    let mut active = vec![false; m];
    let mut starts: Vec<f64> = Vec::with_capacity(m);
    let mut ends: Vec<f64> = Vec::with_capacity(m);
    let mut dirty = true;
    let mut acc = 0.0;
    let (mut si, mut ei) = (0, 0);
    let mut z = z0;
    while z <= z1 {
        while si < entry.len() && entry[si].0 <= z {
            active[entry[si].1] = true;
            si += 1;
            dirty = true;
        }
        while ei < exit.len() && exit[ei].0 < z {
            active[exit[ei].1] = false;
            ei += 1;
            dirty = true;
        }
        if dirty {
            starts.clear();
            ends.clear();
            for (s, &a) in active.iter().enumerate() {
                if a {
                    starts.push(u1[s] - 0.5);
                    ends.push(u1[s] + 0.5);
                }
            }
            sorted(&mut starts);
            sorted(&mut ends);
            dirty = false;
        }
        if !starts.is_empty() {
            acc += sweep_squared_counts(&starts, &ends, w0, w1, step);
        }
        z += step;
    }
    Ok(F::from_f64_(step * step * acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::FieldConfiguration;
    use crate::lattice::LatticeShape;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field_1d(values: &[f64]) -> FieldConfiguration<f64> {
        FieldConfiguration::from_components(vec![values.to_vec()])
    }

    fn random_field(m: usize, d: usize, spread: f64, seed: u64) -> FieldConfiguration<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..d)
            .map(|_| (0..m).map(|_| (rng.random::<f64>() - 0.5) * spread).collect())
            .collect();
        FieldConfiguration::from_components(comps)
    }

    #[test]
    fn energy_of_coincident_sites_is_m_squared() {
        for m in [1usize, 2, 7] {
            let field = field_1d(&vec![0.25; m]);
            let e = self_intersection_energy(&field).unwrap();
            assert_eq!(e.total, (m * m) as f64);
            assert_eq!(e.diagonal, m as f64);
        }
    }

    #[test]
    fn energy_pinned_examples() {
        // overlap(0, 0.5) = 1/2, so Phi = 2 + 2 * 1/2 = 3
        let e = self_intersection_energy(&field_1d(&[0.0, 0.5])).unwrap();
        assert!((e.total - 3.0).abs() < 1e-12);
        // disjoint boxes: diagonal only
        let e = self_intersection_energy(&field_1d(&[0.0, 2.0])).unwrap();
        assert!((e.total - 2.0).abs() < 1e-12);
        assert_eq!(e.offdiag, 0.0);
        // D = 2 product of tents: (1 - .3)(1 - .4) = .42
        let field = FieldConfiguration::from_components(vec![vec![0.0f64, 0.3], vec![0.0, 0.4]]);
        let e = self_intersection_energy(&field).unwrap();
        assert!((e.total - (2.0 + 2.0 * 0.42)).abs() < 1e-12);
    }

    #[test]
    fn energy_decreases_as_sites_spread() {
        let mut last = f64::INFINITY;
        for spread in [0.0, 0.2, 0.5, 0.9] {
            let e = self_intersection_energy(&field_1d(&[0.0, spread, 2.0 * spread]))
                .unwrap()
                .total;
            assert!(e <= last + 1e-12, "spread {spread}: {e} > {last}");
            last = e;
        }
    }

    #[test]
    fn cell_index_matches_brute_force() {
        for trial in 0..100 {
            let m = 2 + (trial * 7) % 199;
            let d = 1 + trial % 2;
            let spread = 1.0 + (trial % 13) as f64;
            let field = random_field(m, d, spread, trial as u64);
            let fast = self_intersection_energy(&field).unwrap();
            let brute = self_intersection_energy_brute(&field);
            assert!(
                (fast.total - brute.total).abs() < 1e-9,
                "trial {trial}: {} vs {}",
                fast.total,
                brute.total
            );
            assert_eq!(fast.diagonal, brute.diagonal);
        }
    }

    #[test]
    fn move_site_keeps_index_consistent() {
        let mut field = random_field(60, 2, 4.0, 99);
        let mut cells = CellIndex::build(&field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..200 {
            let site = rng.random_range(0..60);
            let new = [
                (rng.random::<f64>() - 0.5) * 6.0,
                (rng.random::<f64>() - 0.5) * 6.0,
            ];
            cells.move_site(site, &new).unwrap();
            field.set_value(0, site, new[0]);
            field.set_value(1, site, new[1]);
        }
        let fresh = CellIndex::build(&field).unwrap();
        assert_eq!(cells.site_cell, fresh.site_cell);
        let a = energy_with_cells(&cells, &field);
        let b = energy_with_cells(&fresh, &field);
        assert!((a.total - b.total).abs() < 1e-12);
    }

    #[test]
    fn delta_matches_full_recompute() {
        let mut field = random_field(80, 1, 5.0, 7);
        let mut cells = CellIndex::build(&field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut energy = self_intersection_energy(&field).unwrap().total;
        for step in 0..200 {
            let site = rng.random_range(0..80);
            let new = [(rng.random::<f64>() - 0.5) * 7.0];
            let delta = energy_delta_single_site(&cells, &field, site, &new).unwrap();
            cells.move_site(site, &new).unwrap();
            field.set_value(0, site, new[0]);
            energy += delta;
            let fresh = self_intersection_energy(&field).unwrap().total;
            assert!(
                (energy - fresh).abs() < 1e-9,
                "step {step}: tracked {energy} vs fresh {fresh}"
            );
        }
    }

    #[test]
    fn delta_edge_cases() {
        let field = field_1d(&[0.0, 0.4, 10.0]);
        let cells = CellIndex::build(&field).unwrap();
        // proposing the current value changes nothing
        let d = energy_delta_single_site(&cells, &field, 1, &[0.4]).unwrap();
        assert_eq!(d, 0.0);
        // moving the isolated site around in isolation changes nothing
        let d = energy_delta_single_site(&cells, &field, 2, &[20.0]).unwrap();
        assert_eq!(d, 0.0);
        // bringing it into contact pays 2 * overlap
        let d = energy_delta_single_site(&cells, &field, 2, &[0.0]).unwrap();
        assert!((d - 2.0 * (1.0 + 0.6)).abs() < 1e-12);
    }

    #[test]
    fn stale_cell_index_is_detected() {
        let mut field = field_1d(&[0.0, 0.4, 10.0]);
        let cells = CellIndex::build(&field).unwrap();
        field.set_value(0, 1, 55.0); // bypass the index
        let err = energy_delta_single_site(&cells, &field, 1, &[0.2]);
        assert!(matches!(err, Err(Error::InconsistentState(_))));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let field = field_1d(&[0.0, f64::NAN]);
        assert!(matches!(
            CellIndex::build(&field),
            Err(Error::Numerical(_))
        ));
        let field = field_1d(&[0.0, 1e200]);
        assert!(matches!(
            CellIndex::build(&field),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn histogram_counts_and_boundaries() {
        let field = field_1d(&[0.0, 0.49, 0.5, -0.5, -0.51, 3.2]);
        let h = local_time_histogram(&field, &[-2], &[4]).unwrap();
        // floor(u + 1/2): 0, 0, 1, 0, -1, 3
        assert_eq!(h.count(&[0]).unwrap(), 3);
        assert_eq!(h.count(&[1]).unwrap(), 1);
        assert_eq!(h.count(&[-1]).unwrap(), 1);
        assert_eq!(h.count(&[3]).unwrap(), 1);
        assert_eq!(h.count(&[2]).unwrap(), 0);
        assert!(h.complete());
        assert_eq!(h.inside, 6);
    }

    #[test]
    fn histogram_window_clipping() {
        let field = field_1d(&[0.0, 5.0, -5.0]);
        let h = local_time_histogram(&field, &[-1], &[1]).unwrap();
        assert!(!h.complete());
        assert_eq!(h.inside, 1);
        assert_eq!(h.outside, 2);
        assert!(h.count(&[3]).is_err());
        assert!(local_time_histogram(&field, &[1], &[-1]).is_err());
        assert!(local_time_histogram(&field, &[-1, -1], &[1, 1]).is_err());
    }

    #[test]
    fn histogram_total_is_site_count() {
        let shape = LatticeShape::new(2, 2).unwrap();
        let field = random_field(shape.total_sites(), 2, 6.0, 17);
        let h = local_time_histogram(&field, &[-8, -8], &[8, 8]).unwrap();
        assert!(h.complete());
        let total: u64 = h.counts.iter().sum();
        assert_eq!(total, 25);
        // constant field piles everything into one bin
        let field = FieldConfiguration::constant(&shape, 2, 0.0);
        let h = local_time_histogram(&field, &[-1, -1], &[1, 1]).unwrap();
        assert_eq!(h.count(&[0, 0]).unwrap(), 25);
        assert_eq!(h.sum_squares(), 625.0);
    }

    #[test]
    fn quadrature_matches_exact_energy() {
        // two-site pinned value
        let q: f64 = energy_by_quadrature(&field_1d(&[0.0, 0.5]), 1e-3).unwrap();
        assert!((q - 3.0).abs() < 0.01, "{q}");
        // single site: integral of 1 over a unit box
        let q: f64 = energy_by_quadrature(&field_1d(&[0.7]), 1e-3).unwrap();
        assert!((q - 1.0).abs() < 0.005, "{q}");
        // random 1D and 2D instances against the pair formula
        for trial in 0..6 {
            let d = 1 + trial % 2;
            let field = random_field(12, d, 3.0, 1000 + trial as u64);
            let exact = self_intersection_energy(&field).unwrap().total;
            let q: f64 = energy_by_quadrature(&field, 2e-3).unwrap();
            assert!(
                (q - exact).abs() / exact < 1e-2,
                "trial {trial}: quadrature {q} vs exact {exact}"
            );
        }
    }

    #[test]
    fn quadrature_guards() {
        let field = random_field(200, 1, 3.0, 1);
        assert!(matches!(
            energy_by_quadrature::<f64>(&field, 1e-3),
            Err(Error::ResourceLimit(_))
        ));
        let field = random_field(10, 3, 3.0, 1);
        assert!(matches!(
            energy_by_quadrature::<f64>(&field, 1e-3),
            Err(Error::ResourceLimit(_))
        ));
        let field = random_field(10, 1, 3.0, 1);
        assert!(energy_by_quadrature::<f64>(&field, 0.0).is_err());
        assert!(energy_by_quadrature::<f64>(&field, 0.7).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_is_translation_invariant(
            shift in -50.0f64..50.0,
            seed in 0u64..500,
        ) {
            let field = random_field(40, 2, 4.0, seed);
            let base = self_intersection_energy(&field).unwrap().total;
            let mut shifted = field.clone();
            for c in 0..2 {
                for v in shifted.component_mut(c) {
                    *v += shift;
                }
            }
            let moved = self_intersection_energy(&shifted).unwrap().total;
            prop_assert!((base - moved).abs() < 1e-6 * base.max(1.0));
        }

        #[test]
        fn energy_is_permutation_invariant(seed in 0u64..500) {
            let field = random_field(30, 1, 4.0, seed);
            let mut perm: Vec<f64> = field.component(0).to_vec();
            perm.reverse();
            perm.rotate_left(7);
            let base = self_intersection_energy(&field).unwrap().total;
            let swapped = self_intersection_energy(&field_1d(&perm)).unwrap().total;
            prop_assert!((base - swapped).abs() < 1e-9);
        }

        #[test]
        fn energy_at_least_diagonal(seed in 0u64..500) {
            let field = random_field(25, 2, 10.0, seed);
            let e = self_intersection_energy(&field).unwrap();
            prop_assert!(e.total >= e.diagonal - 1e-12);
            prop_assert!(e.offdiag >= 0.0);
        }
    }
}
