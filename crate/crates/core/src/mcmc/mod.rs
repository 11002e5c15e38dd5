//! Markov chain Monte Carlo for the repelling field: the target density is
//! exp(-beta H(u) - gamma Phi(u)) over zero-mean fields.
//!
//! Three reversible kernels are mixed:
//! - single-site Gaussian random-walk Metropolis (local, cheap, the
//!   workhorse);
//! - a preconditioned Crank-Nicolson refresh of all coefficients, exact for
//!   the gamma = 0 prior so its acceptance only sees Phi;
//! - a global scale move u -> mean + lambda (u - mean) with log-normal
//!   lambda, which equilibrates the overall extent of the configuration far
//!   faster than diffusive site moves (the repulsion inflates the field by a
//!   large factor from a prior draw).

pub mod diagnostics;

use crate::error::{Error, Result};
use crate::gff::{
    eigenvalue_grid, elastic_energy, sample_prior, FieldConfiguration, ModelParams,
    SpectralCoefficients,
};
use crate::localtime::{energy_delta_single_site, energy_with_cells, CellIndex};
use crate::observables::effective_radius;
use crate::scalar::Scalar;
use crate::spectral::{analyze, build_spectrum_1d, synthesize, Spectrum1D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Site moves are tuned toward this acceptance rate during burn-in.
pub const SITE_TARGET_ACCEPTANCE: f64 = 0.35;
/// Tolerated relative drift between the cached and recomputed energy.
pub const ENERGY_DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McmcSchedule {
    /// Total sweeps; one sweep visits every site once in random order.
    pub n_sweeps: u64,
    /// Sweeps discarded before recording; step size is tuned only here.
    pub burn_in: u64,
    /// Record every this many post-burn-in sweeps.
    pub thinning: u64,
    /// Initial site proposal standard deviation.
    pub sigma_site: f64,
    /// pCN mixing parameter in (0, 1]; 0 disables pCN moves.
    pub pcn_s: f64,
    /// Attempt global moves every this many sweeps; 0 disables them.
    pub global_every: u64,
    /// Standard deviation of log lambda for scale moves; 0 disables them.
    pub scale_step: f64,
    /// Recompute energy and cells from scratch at this cadence; 0 disables.
    pub resync_every: u64,
}

impl Default for McmcSchedule {
    fn default() -> Self {
        McmcSchedule {
            n_sweeps: 20_000,
            burn_in: 5_000,
            thinning: 10,
            sigma_site: 0.5,
            pcn_s: 0.1,
            global_every: 5,
            scale_step: 0.05,
            resync_every: 100,
        }
    }
}

impl McmcSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::usage("n_sweeps must be >= 1"));
        }
        if self.burn_in >= self.n_sweeps {
            return Err(Error::usage("burn_in must be smaller than n_sweeps"));
        }
        if self.thinning == 0 {
            return Err(Error::usage("thinning must be >= 1"));
        }
        if !(self.sigma_site > 0.0) || !self.sigma_site.is_finite() {
            return Err(Error::usage("sigma_site must be positive"));
        }
        if !(0.0..=1.0).contains(&self.pcn_s) {
            return Err(Error::usage("pcn_s must lie in [0, 1]"));
        }
        if !(self.scale_step >= 0.0) || !self.scale_step.is_finite() {
            return Err(Error::usage("scale_step must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MoveCounters {
    pub site_proposals: u64,
    pub site_accepts: u64,
    pub pcn_proposals: u64,
    pub pcn_accepts: u64,
    pub scale_proposals: u64,
    pub scale_accepts: u64,
}

/// A chain at some point of its run: field, cached derived data, RNG.
/// The spectral coefficients are kept lazily; any real-space move drops them
/// and the next pCN move re-analyzes the field.
pub struct ChainState<F: Scalar> {
    pub params: ModelParams<F>,
    spec: Spectrum1D<F>,
    lambda: Vec<F>,
    field: FieldConfiguration<F>,
    coeffs: Option<SpectralCoefficients<F>>,
    cells: CellIndex,
    energy: F,
    pub rng: ChaCha8Rng,
    pub counters: MoveCounters,
    sigma_site: F,
    // scratch buffers for the site sweep
    perm: Vec<u32>,
    nbrs: Vec<usize>,
}

/// Draw the initial state from the free-field prior.
pub fn init_chain<F: Scalar>(
    params: &ModelParams<F>,
    schedule: &McmcSchedule,
    seed: u64,
) -> Result<ChainState<F>> {
    params.validate()?;
    schedule.validate()?;
    let spec = build_spectrum_1d(params.shape.half_width)?;
    let lambda = eigenvalue_grid(&spec, &params.shape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (coeffs, field) = sample_prior(params, &spec, &mut rng)?;
    let cells = CellIndex::build(&field)?;
    let energy = energy_with_cells(&cells, &field).total;
    let total = params.shape.total_sites();
    Ok(ChainState {
        params: *params,
        spec,
        lambda,
        field,
        coeffs: Some(coeffs),
        cells,
        energy,
        rng,
        counters: MoveCounters::default(),
        sigma_site: F::from_f64_(schedule.sigma_site),
        perm: (0..total as u32).collect(),
        nbrs: Vec::with_capacity(2 * params.shape.dim),
    })
}

impl<F: Scalar> ChainState<F> {
    pub fn field(&self) -> &FieldConfiguration<F> {
        &self.field
    }

    pub fn energy(&self) -> F {
        self.energy
    }

    pub fn spectrum(&self) -> &Spectrum1D<F> {
        &self.spec
    }

    pub fn sigma_site(&self) -> F {
        self.sigma_site
    }

    /// Coefficients of the current field, re-analyzed if a real-space move
    /// invalidated them.
    pub fn coefficients(&mut self) -> Result<&SpectralCoefficients<F>> {
        if self.coeffs.is_none() {
            self.coeffs = Some(analyze(&self.field, &self.spec, &self.params.shape)?);
        }
        Ok(self.coeffs.as_ref().expect("just filled"))
    }

    /// Log Metropolis ratio for moving `site` to `values`: -beta dH - gamma
    /// dPhi. Exposed for reversibility checks.
    pub fn site_log_ratio(&self, site: usize, values: &[F]) -> Result<F> {
        let shape = &self.params.shape;
        let mut nbrs = Vec::with_capacity(2 * shape.dim);
        shape.neighbors(site, &mut nbrs);
        let mut dh = F::zero();
        for (c, comp) in self.field.components().enumerate() {
            let old = comp[site];
            let new = values[c];
            for &y in &nbrs {
                let dn = new - comp[y];
                let dold = old - comp[y];
                dh = dh + dn * dn - dold * dold;
            }
        }
        let dphi = energy_delta_single_site(&self.cells, &self.field, site, values)?;
        Ok(-(self.params.beta * dh) - self.params.gamma * dphi)
    }

    /// One pass of random-order single-site Metropolis proposals. Returns the
    /// acceptance fraction of the pass.
    pub fn metropolis_site_sweep(&mut self) -> Result<f64> {
        let shape = self.params.shape;
        let d_range = self.params.range_dim;
        let total = shape.total_sites();
        let beta = self.params.beta;
        let gamma = self.params.gamma;
        let sigma = self.sigma_site;
        // Fisher-Yates with the chain RNG
        for i in (1..total).rev() {
            let j = self.rng.random_range(0..=i);
            self.perm.swap(i, j);
        }
        let mut old = vec![F::zero(); d_range];
        let mut prop = vec![F::zero(); d_range];
        let mut accepts = 0u64;
        for idx in 0..total {
            let site = self.perm[idx] as usize;
            self.counters.site_proposals += 1;
            self.field.site_values(site, &mut old);
            for c in 0..d_range {
                prop[c] = old[c] + sigma * F::standard_normal(&mut self.rng);
            }
            let u = F::standard_uniform(&mut self.rng);
            shape.neighbors(site, &mut self.nbrs);
            let mut dh = F::zero();
            for (c, comp) in self.field.components().enumerate() {
                for &y in &self.nbrs {
                    let dn = prop[c] - comp[y];
                    let dold = old[c] - comp[y];
                    dh = dh + dn * dn - dold * dold;
                }
            }
            let dphi = energy_delta_single_site(&self.cells, &self.field, site, &prop)?;
            let log_acc = -(beta * dh) - gamma * dphi;
            if u.ln() < log_acc {
                for c in 0..d_range {
                    self.field.set_value(c, site, prop[c]);
                }
                self.cells.move_site(site, &prop)?;
                self.energy = self.energy + dphi;
                self.coeffs = None;
                accepts += 1;
            }
        }
        self.counters.site_accepts += accepts;
        Ok(accepts as f64 / total as f64)
    }

    /// Preconditioned Crank-Nicolson refresh: X' = sqrt(1 - s^2) X + s xi
    /// with xi a fresh prior draw. The proposal preserves the gamma = 0
    /// measure exactly, so acceptance is min(1, exp(-gamma dPhi)).
    pub fn pcn_global_move(&mut self, s: F) -> Result<bool> {
        if !(s > F::zero() && s <= F::one()) {
            return Err(Error::usage("pCN mixing parameter must lie in (0, 1]"));
        }
        self.counters.pcn_proposals += 1;
        self.coefficients()?;
        let contraction = (F::one() - s * s).sqrt();
        let two_beta = F::from_f64_(2.0) * self.params.beta;
        let mut prop = self.coeffs.clone().expect("coefficients synced");
        for c in 0..self.params.range_dim {
            let block = prop.block_mut(c);
            for (m, slot) in block.iter_mut().enumerate() {
                let sd = (two_beta * self.lambda[m + 1]).sqrt().recip();
                let xi = F::standard_normal(&mut self.rng) * sd;
                *slot = contraction * *slot + s * xi;
            }
        }
        let u = F::standard_uniform(&mut self.rng);
        let prop_field = synthesize(&prop, &self.spec, &self.params.shape)?;
        let prop_cells = CellIndex::build(&prop_field)?;
        let prop_energy = energy_with_cells(&prop_cells, &prop_field).total;
        let log_acc = -self.params.gamma * (prop_energy - self.energy);
        if u.ln() < log_acc {
            self.field = prop_field;
            self.cells = prop_cells;
            self.energy = prop_energy;
            self.coeffs = Some(prop);
            self.counters.pcn_accepts += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Global scale move about the site mean: u' = mean + lambda (u - mean),
    /// lambda = exp(eps), eps ~ N(0, step^2). Acting on the (M - 1)-
    /// dimensional zero-mean part of each component, the Jacobian contributes
    /// (M - 1) D eps, the elastic part -beta (lambda^2 - 1) H(u).
    pub fn scale_global_move(&mut self, step: F) -> Result<bool> {
        if !(step > F::zero()) || !step.is_finite() {
            return Err(Error::usage("scale step must be positive"));
        }
        self.counters.scale_proposals += 1;
        let eps = F::standard_normal(&mut self.rng) * step;
        let u = F::standard_uniform(&mut self.rng);
        let lambda = eps.exp();
        let shape = self.params.shape;
        let total = shape.total_sites();
        let h = elastic_energy(&self.field, &shape);
        let mut prop_field = self.field.clone();
        for c in 0..self.params.range_dim {
            let comp = prop_field.component_mut(c);
            let mean = comp.iter().copied().sum::<F>() / F::from_usize_(total);
            for v in comp.iter_mut() {
                *v = mean + lambda * (*v - mean);
            }
        }
        let prop_cells = CellIndex::build(&prop_field)?;
        let prop_energy = energy_with_cells(&prop_cells, &prop_field).total;
        let jacobian = F::from_usize_((total - 1) * self.params.range_dim) * eps;
        let log_acc = -(self.params.beta * (lambda * lambda - F::one()) * h)
            - self.params.gamma * (prop_energy - self.energy)
            + jacobian;
        if u.ln() < log_acc {
            self.field = prop_field;
            self.cells = prop_cells;
            self.energy = prop_energy;
            self.coeffs = None;
            self.counters.scale_accepts += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Rebuild cells and energy from the field; errors if the cached energy
    /// drifted beyond tolerance (an incremental-update bug, not roundoff).
    pub fn resync(&mut self) -> Result<()> {
        let cells = CellIndex::build(&self.field)?;
        let fresh = energy_with_cells(&cells, &self.field).total;
        let drift = (self.energy - fresh).abs().to_f64_();
        let scale = fresh.abs().to_f64_().max(1.0);
        if drift > ENERGY_DRIFT_TOLERANCE * scale {
            return Err(Error::InconsistentState(format!(
                "cached energy {} drifted from recomputed {} (relative {})",
                self.energy,
                fresh,
                drift / scale
            )));
        }
        self.cells = cells;
        self.energy = fresh;
        Ok(())
    }

    fn tune_sigma(&mut self, acceptance: f64) {
        let rate = F::from_f64_(0.1) * F::from_f64_(acceptance - SITE_TARGET_ACCEPTANCE);
        let next = self.sigma_site * rate.exp();
        self.sigma_site = next
            .max(F::from_f64_(1e-4))
            .min(F::from_f64_(10.0));
    }
}

/// One recorded point of a chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sweep: u64,
    /// Cached self-intersection energy Phi.
    pub energy: f64,
    /// Effective radius of the configuration.
    pub radius: f64,
    /// Site acceptance fraction since the previous record.
    pub accept_site: f64,
    /// Global (pCN + scale) acceptance fraction since the previous record.
    pub accept_global: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// Step size after burn-in tuning froze.
    pub final_sigma_site: f64,
    pub counters: MoveCounters,
    /// Set if an observer hook failed; the records up to that sweep are kept.
    pub aborted: Option<String>,
}

/// Run a chain and call `hook` at every recorded sweep (after the record is
/// taken). The hook gets mutable access so it can ask for coefficients.
pub fn run_chain_with<F: Scalar, H>(
    params: &ModelParams<F>,
    schedule: &McmcSchedule,
    seed: u64,
    mut hook: H,
) -> Result<(Trace, ChainState<F>)>
where
    H: FnMut(&mut ChainState<F>, u64) -> Result<()>,
{
    schedule.validate()?;
    let mut state = init_chain(params, schedule, seed)?;
    let mut records = Vec::new();
    let mut aborted = None;
    let mut last = state.counters;
    for sweep in 1..=schedule.n_sweeps {
        let acc = state.metropolis_site_sweep()?;
        if schedule.global_every > 0 && sweep % schedule.global_every == 0 {
            if schedule.pcn_s > 0.0 {
                state.pcn_global_move(F::from_f64_(schedule.pcn_s))?;
            }
            if schedule.scale_step > 0.0 {
                state.scale_global_move(F::from_f64_(schedule.scale_step))?;
            }
        }
        if sweep <= schedule.burn_in {
            state.tune_sigma(acc);
        }
        if schedule.resync_every > 0 && sweep % schedule.resync_every == 0 {
            state.resync()?;
        }
        if sweep > schedule.burn_in && (sweep - schedule.burn_in) % schedule.thinning == 0 {
            let now = state.counters;
            let site_prop = now.site_proposals - last.site_proposals;
            let site_acc = now.site_accepts - last.site_accepts;
            let glob_prop =
                now.pcn_proposals - last.pcn_proposals + now.scale_proposals - last.scale_proposals;
            let glob_acc =
                now.pcn_accepts - last.pcn_accepts + now.scale_accepts - last.scale_accepts;
            last = now;
            let radius = effective_radius(&state.field).diameter.to_f64_();
            records.push(TraceRecord {
                sweep,
                energy: state.energy.to_f64_(),
                radius,
                accept_site: site_acc as f64 / site_prop.max(1) as f64,
                accept_global: glob_acc as f64 / glob_prop.max(1) as f64,
            });
            // An observer failure flags the run but keeps the partial trace.
            if let Err(e) = hook(&mut state, sweep) {
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    let trace = Trace {
        seed,
        records,
        final_sigma_site: state.sigma_site.to_f64_(),
        counters: state.counters,
        aborted,
    };
    Ok((trace, state))
}

pub fn run_chain<F: Scalar>(
    params: &ModelParams<F>,
    schedule: &McmcSchedule,
    seed: u64,
) -> Result<(Trace, ChainState<F>)> {
    run_chain_with(params, schedule, seed, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::pair_difference_variance;
    use crate::lattice::LatticeShape;
    use crate::localtime::self_intersection_energy;
    use crate::mcmc::diagnostics::{ks_test_normal, summarize};

    fn params(
        half_width: usize,
        dim: usize,
        range_dim: usize,
        beta: f64,
        gamma: f64,
    ) -> ModelParams<f64> {
        let shape = LatticeShape::new(half_width, dim).unwrap();
        ModelParams::new(shape, range_dim, beta, gamma).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_energy_cached_correctly() {
        let p = params(2, 2, 1, 1.0, 1.0);
        let sched = McmcSchedule::default();
        let a = init_chain(&p, &sched, 11).unwrap();
        let b = init_chain(&p, &sched, 11).unwrap();
        assert_eq!(a.field, b.field);
        let fresh = self_intersection_energy(a.field()).unwrap().total;
        assert!((a.energy() - fresh).abs() < 1e-10);
        let c = init_chain(&p, &sched, 12).unwrap();
        assert_ne!(a.field, c.field);
    }

    #[test]
    fn schedule_validation() {
        let mut s = McmcSchedule::default();
        s.burn_in = s.n_sweeps;
        assert!(s.validate().is_err());
        let mut s = McmcSchedule::default();
        s.thinning = 0;
        assert!(s.validate().is_err());
        let mut s = McmcSchedule::default();
        s.pcn_s = 1.5;
        assert!(s.validate().is_err());
        let mut s = McmcSchedule::default();
        s.sigma_site = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn tiny_steps_are_almost_always_accepted() {
        let p = params(2, 2, 1, 1.0, 1.0);
        let mut sched = McmcSchedule::default();
        sched.sigma_site = 1e-9;
        let mut state = init_chain(&p, &sched, 5).unwrap();
        for _ in 0..5 {
            let acc = state.metropolis_site_sweep().unwrap();
            assert!(acc > 0.999, "acceptance {acc}");
        }
    }

    #[test]
    fn site_move_log_ratio_is_antisymmetric() {
        // log r(u -> u') = -log r(u' -> u) along accepted single-site moves
        let p = params(2, 2, 2, 1.3, 0.7);
        let sched = McmcSchedule::default();
        let mut state = init_chain(&p, &sched, 21).unwrap();
        for site in [0usize, 7, 12, 24] {
            let mut old = vec![0.0; 2];
            state.field.site_values(site, &mut old);
            let new = [old[0] + 0.4, old[1] - 0.3];
            let fwd = state.site_log_ratio(site, &new).unwrap();
            // apply the move by hand
            let dphi = energy_delta_single_site(&state.cells, &state.field, site, &new).unwrap();
            state.field.set_value(0, site, new[0]);
            state.field.set_value(1, site, new[1]);
            state.cells.move_site(site, &new).unwrap();
            state.energy += dphi;
            let back = state.site_log_ratio(site, &old).unwrap();
            assert!((fwd + back).abs() < 1e-10, "site {site}: {fwd} vs {back}");
        }
    }

    #[test]
    fn scale_move_log_terms_are_antisymmetric() {
        // The deterministic parts of the scale-move log ratio at lambda and
        // 1/lambda (from the moved state) must cancel.
        let p = params(2, 2, 1, 1.0, 0.8);
        let sched = McmcSchedule::default();
        let state = init_chain(&p, &sched, 3).unwrap();
        let shape = state.params.shape;
        let total = shape.total_sites();
        let lambda: f64 = 1.17;
        let h = elastic_energy(&state.field, &shape);
        let phi = state.energy();
        let mut moved = state.field.clone();
        let comp = moved.component_mut(0);
        let mean = comp.iter().sum::<f64>() / total as f64;
        for v in comp.iter_mut() {
            *v = mean + lambda * (*v - mean);
        }
        let h2 = elastic_energy(&moved, &shape);
        let phi2 = self_intersection_energy(&moved).unwrap().total;
        let jac = (total - 1) as f64;
        let fwd = -(p.beta * (lambda * lambda - 1.0) * h) - p.gamma * (phi2 - phi)
            + jac * lambda.ln();
        let inv = 1.0 / lambda;
        let back = -(p.beta * (inv * inv - 1.0) * h2) - p.gamma * (phi - phi2)
            + jac * inv.ln();
        assert!((fwd + back).abs() < 1e-9, "{fwd} vs {back}");
    }

    #[test]
    fn chains_are_reproducible() {
        let p = params(2, 2, 1, 1.0, 1.0);
        let mut sched = McmcSchedule::default();
        sched.n_sweeps = 300;
        sched.burn_in = 100;
        sched.thinning = 5;
        let (t1, s1) = run_chain(&p, &sched, 77).unwrap();
        let (t2, s2) = run_chain(&p, &sched, 77).unwrap();
        assert_eq!(t1.records.len(), t2.records.len());
        for (a, b) in t1.records.iter().zip(&t2.records) {
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.radius, b.radius);
        }
        assert_eq!(s1.field, s2.field);
        let (t3, _) = run_chain(&p, &sched, 78).unwrap();
        assert_ne!(t1.records[0].energy, t3.records[0].energy);
    }

    #[test]
    fn cached_energy_stays_valid_through_all_move_types() {
        let p = params(2, 2, 2, 1.0, 0.5);
        let mut sched = McmcSchedule::default();
        sched.n_sweeps = 500;
        sched.burn_in = 200;
        sched.global_every = 3;
        sched.resync_every = 0; // no resyncs: the cache must hold on its own
        let (_, state) = run_chain(&p, &sched, 9).unwrap();
        let fresh = self_intersection_energy(state.field()).unwrap().total;
        assert!(
            (state.energy() - fresh).abs() < 1e-6 * fresh.max(1.0),
            "cached {} vs fresh {}",
            state.energy(),
            fresh
        );
        assert!(state.counters.pcn_proposals > 0);
        assert!(state.counters.scale_proposals > 0);
    }

    #[test]
    fn resync_detects_corrupted_cache() {
        let p = params(2, 2, 1, 1.0, 1.0);
        let sched = McmcSchedule::default();
        let mut state = init_chain(&p, &sched, 4).unwrap();
        state.resync().unwrap(); // fine when consistent
        state.energy += 1.0;
        assert!(matches!(
            state.resync(),
            Err(Error::InconsistentState(_))
        ));
    }

    #[test]
    fn pcn_always_accepts_without_repulsion() {
        let p = params(2, 2, 1, 1.0, 0.0);
        let sched = McmcSchedule::default();
        let mut state = init_chain(&p, &sched, 6).unwrap();
        for _ in 0..50 {
            assert!(state.pcn_global_move(0.4).unwrap());
        }
        assert_eq!(state.counters.pcn_accepts, 50);
    }

    #[test]
    fn gamma_zero_chain_reproduces_free_field_statistics() {
        // With gamma = 0 the chain must sample the exact Gaussian prior:
        // check Var(u(z) - u(w)) and the law of one coefficient.
        let p = params(2, 2, 1, 1.0, 0.0);
        let mut sched = McmcSchedule::default();
        sched.n_sweeps = 24_000;
        sched.burn_in = 2_000;
        sched.thinning = 10;
        sched.global_every = 4;
        let shape = p.shape;
        let zi = shape.site_index(&[-2, -2]).unwrap();
        let wi = shape.site_index(&[2, 2]).unwrap();
        let mode = shape.mode_index(&[1, 0]).unwrap();
        let mut diffs = Vec::new();
        let mut coeff_samples = Vec::new();
        let (_, _) = run_chain_with(&p, &sched, 123, |state, _| {
            diffs.push(state.field().value(0, zi) - state.field().value(0, wi));
            coeff_samples.push(state.coefficients()?.block(0)[mode - 1]);
            Ok(())
        })
        .unwrap();
        let spec = build_spectrum_1d::<f64>(2).unwrap();
        let exact = pair_difference_variance(&[-2, -2], &[2, 2], &p, &spec).unwrap();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sq: Vec<f64> = diffs.iter().map(|d| (d - mean) * (d - mean)).collect();
        let sq_summary = summarize(&sq).unwrap();
        let var = sq_summary.mean;
        let tol = 3.0 * sq_summary.stderr;
        assert!(
            (var - exact).abs() < tol,
            "var {var} vs exact {exact} (tol {tol}, ess {})",
            sq_summary.ess
        );
        // coefficient distribution: KS against N(0, (2 beta lambda)^{-1})
        let lambda = spec.eigenvalues[1];
        let sd = (2.0 * p.beta * lambda).sqrt().recip();
        // thin by the coefficient's autocorrelation time before the KS test
        let tau = summarize(&coeff_samples).unwrap().tau.ceil() as usize;
        let thinned: Vec<f64> = coeff_samples.iter().step_by(tau.max(1)).copied().collect();
        let (stat, pval) = ks_test_normal(&thinned, sd).unwrap();
        assert!(
            pval > 0.01,
            "KS stat {stat}, p = {pval}, {} samples",
            thinned.len()
        );
    }

    #[test]
    fn observer_failure_keeps_partial_trace_flagged() {
        let p = params(1, 2, 1, 1.0, 0.5);
        let mut sched = McmcSchedule::default();
        sched.n_sweeps = 200;
        sched.burn_in = 50;
        sched.thinning = 10;
        let mut calls = 0;
        let (trace, _) = run_chain_with(&p, &sched, 11, |_, _| {
            calls += 1;
            if calls == 3 {
                Err(Error::Numerical("observer exploded".into()))
            } else {
                Ok(())
            }
        })
        .unwrap();
        // the record is taken before the hook runs, so three records survive
        assert_eq!(trace.records.len(), 3);
        assert!(trace.aborted.as_deref().unwrap().contains("observer exploded"));
        let (clean, _) = run_chain(&p, &sched, 11).unwrap();
        assert!(clean.aborted.is_none());
        assert_eq!(clean.records.len(), 15);
    }

    #[test]
    fn site_and_pcn_kernels_agree_on_free_field_energy() {
        // gamma = 0: both kernels target the same Gaussian, so the mean
        // self-intersection energy from a site-move-only run must agree with
        // a pCN-only run.
        let p = params(2, 2, 1, 1.0, 0.0);
        let mut sched = McmcSchedule::default();
        sched.n_sweeps = 12_000;
        sched.burn_in = 1_000;
        sched.thinning = 5;
        sched.global_every = 0; // site moves only
        let (trace, _) = run_chain(&p, &sched, 21).unwrap();
        let site_energy: Vec<f64> = trace.records.iter().map(|r| r.energy).collect();
        let site = summarize(&site_energy).unwrap();

        let mut state = init_chain(&p, &sched, 22).unwrap();
        let mut pcn_energy = Vec::new();
        for step in 1..=6_000u64 {
            state.pcn_global_move(0.7).unwrap();
            if step > 500 && step % 2 == 0 {
                pcn_energy.push(state.energy());
            }
        }
        let pcn = summarize(&pcn_energy).unwrap();
        let tol = 3.0 * (site.stderr * site.stderr + pcn.stderr * pcn.stderr).sqrt();
        assert!(
            (site.mean - pcn.mean).abs() < tol,
            "site {} vs pcn {} (tol {tol})",
            site.mean,
            pcn.mean
        );
    }
}
