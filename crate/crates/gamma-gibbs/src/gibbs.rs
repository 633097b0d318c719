//! Metropolis–Hastings sampling of finite-volume Gibbs perturbations
//! μ_Δ(dη|ξ) ∝ e^{−H_Δ(η|ξ)} dG_{θ,Δ}(η) of the truncated Gamma measure.
//!
//! Moves: Birth (uniform position, mark from the normalized truncated
//! intensity), Death (uniform atom), Resize (uniform atom, independent mark
//! redraw).  Proposal marks come from the reference mark law, so the
//! acceptance ratio needs only the energy increment and atom counts:
//!
//!   Birth:  min(1, (p_d/p_b)·ν(Δ)/(n+1)·e^{−ΔH})
//!   Death:  min(1, (p_b/p_d)·n/ν(Δ)·e^{−ΔH})
//!   Resize: min(1, e^{−ΔH})
//!
//! with ν(Δ) = truncated mass × volume.  The stationary law is μ_Δ with
//! marks ≥ the truncation level, which converges to μ_Δ as the truncation
//! goes to 0 (same bias budget as the direct sampler).

use crate::energy::EnergyState;
use crate::lattice::{index_hull, CubeGrid, CubeIndex, Window};
use crate::levy::LevySpec;
use crate::measure::DiscreteMeasure;
use crate::potential::PotentialSpec;
use crate::stats::{combined_se, z_score, Estimate};
use crate::{rng_stream, Error, Result};
use rand::Rng;
use std::collections::BTreeMap;

const AUDIT_PERIOD: u64 = 10_000;
const AUDIT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub n_steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// (p_birth, p_death, p_resize); must sum to 1 within 1e-12.
    pub move_mix: (f64, f64, f64),
    pub seed: u64,
    pub levy: LevySpec,
    pub potential: PotentialSpec,
    pub window: Window,
    /// Boundary condition ξ; only its atoms outside the window couple, and
    /// by finite range only those within R of it.
    pub boundary: DiscreteMeasure,
    /// Temper exponent for the output-norm diagnostic.
    pub temper_alpha: f64,
    /// Threshold slope for the support diagnostic: fraction of window cubes
    /// with η(Q_k)² > b_log·ln(1+|k|).
    pub support_b_log: f64,
}

impl ChainConfig {
    pub fn new(levy: LevySpec, potential: PotentialSpec, window: Window, boundary: DiscreteMeasure) -> Self {
        let n_steps = 200_000;
        ChainConfig {
            n_steps,
            burn_in: n_steps / 5,
            thinning: 10,
            move_mix: (0.4, 0.4, 0.2),
            seed: 0,
            levy,
            potential,
            window,
            boundary,
            temper_alpha: 0.5,
            support_b_log: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (pb, pd, pr) = self.move_mix;
        for (name, p) in [("birth", pb), ("death", pd), ("resize", pr)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("move_mix {name} probability {p} outside [0,1]")));
            }
        }
        if ((pb + pd + pr) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("move_mix must sum to 1, got {}", pb + pd + pr)));
        }
        if pb == 0.0 || pd == 0.0 {
            return Err(Error::invalid("birth and death probabilities must be positive for ergodicity"));
        }
        if self.n_steps == 0 || self.thinning == 0 {
            return Err(Error::invalid("n_steps and thinning must be positive"));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::invalid(format!(
                "burn_in {} must be smaller than n_steps {}",
                self.burn_in, self.n_steps
            )));
        }
        if self.levy.trunc() <= 0.0 {
            return Err(Error::invalid("chain sampling requires a positive mark truncation"));
        }
        if self.window.dim() != self.potential.dim() || self.boundary.dim() != self.potential.dim() {
            return Err(Error::invalid("window, boundary, and potential dimensions must agree"));
        }
        if !(self.temper_alpha > 0.0) || !(self.support_b_log > 0.0) {
            return Err(Error::invalid("temper_alpha and support_b_log must be positive"));
        }
        Ok(())
    }

    /// The lattice matched to the potential: cube diameter δ, reach R.
    pub fn grid(&self) -> Result<CubeGrid> {
        CubeGrid::new(self.potential.dim(), self.potential.delta(), self.potential.range())
    }

    /// Reference atom intensity ν(Δ) = truncated mass × |Δ|.
    pub fn reference_intensity(&self) -> Result<f64> {
        Ok(self.levy.truncated_mass()? * self.window.volume())
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct MoveStats {
    pub birth_proposed: u64,
    pub birth_accepted: u64,
    pub death_proposed: u64,
    pub death_accepted: u64,
    pub resize_proposed: u64,
    pub resize_accepted: u64,
}

impl MoveStats {
    pub fn birth_rate(&self) -> f64 {
        rate(self.birth_accepted, self.birth_proposed)
    }
    pub fn death_rate(&self) -> f64 {
        rate(self.death_accepted, self.death_proposed)
    }
    pub fn resize_rate(&self) -> f64 {
        rate(self.resize_accepted, self.resize_proposed)
    }
}

fn rate(accepted: u64, proposed: u64) -> f64 {
    if proposed == 0 {
        0.0
    } else {
        accepted as f64 / proposed as f64
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ChainDiagnostics {
    pub acceptance: MoveStats,
    /// Window-mass estimate with autocorrelation-corrected standard error.
    pub mass: Estimate,
    /// Effective sample size of the thinned η(Δ) series.
    pub ess_mass: f64,
    /// Worst relative cache error seen across energy audits.
    pub energy_audit_max_rel: f64,
    pub energy_audit_count: u64,
    /// Max |z| over atom-count levels comparing first-half up-flux against
    /// second-half down-flux (a stationarity/balance diagnostic; levels with
    /// fewer than 25 crossings are skipped).
    pub flux_max_z: f64,
    /// Fraction of (sample, window-cube) pairs with η(Q_k)² above
    /// b_log·ln(1+|k|).
    pub support_fraction: f64,
    /// Largest tempered norm M_α among the emitted samples (always finite
    /// for finite configurations; reported for the record).
    pub max_tempered_norm: f64,
    pub n_samples: usize,
}

/// One MH chain: owns its state, RNG, and counters.
pub struct Chain {
    config: ChainConfig,
    grid: CubeGrid,
    state: EnergyState,
    nu: f64,
    rng: rand_chacha::ChaCha12Rng,
    step: u64,
    stats: MoveStats,
    /// Accepted up/down crossings per atom-count level, split into run
    /// halves: (up_first, down_first, up_second, down_second).
    flux: BTreeMap<usize, (u64, u64, u64, u64)>,
    audit_max_rel: f64,
    audit_count: u64,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let nu = config.reference_intensity()?;
        let empty = DiscreteMeasure::empty(config.window.clone());
        let state = EnergyState::new(
            config.window.clone(),
            config.potential.clone(),
            grid.clone(),
            &empty,
            config.boundary.atoms(),
        )?;
        let rng = rng_stream(config.seed, 0xC4A1);
        Ok(Chain {
            config,
            grid,
            state,
            nu,
            rng,
            step: 0,
            stats: MoveStats::default(),
            flux: BTreeMap::new(),
            audit_max_rel: 0.0,
            audit_count: 0,
        })
    }

    pub fn state(&self) -> &EnergyState {
        &self.state
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn stats(&self) -> &MoveStats {
        &self.stats
    }

    pub fn snapshot(&self) -> Result<DiscreteMeasure> {
        self.state.snapshot()
    }

    /// One MH transition.  Every step consumes the same RNG draws for a
    /// given proposal outcome pattern, so runs differing only in quantities
    /// that cannot change any ΔH bit (e.g. boundary atoms beyond R) replay
    /// identically.
    pub fn mh_step(&mut self) -> Result<()> {
        self.step += 1;
        let (pb, pd, _) = self.config.move_mix;
        let u: f64 = self.rng.gen();
        if u < pb {
            self.try_birth()?;
        } else if u < pb + pd {
            self.try_death()?;
        } else {
            self.try_resize()?;
        }
        if self.step % AUDIT_PERIOD == 0 {
            self.audit()?;
        }
        Ok(())
    }

    fn second_half(&self) -> bool {
        self.step > self.config.n_steps / 2
    }

    fn try_birth(&mut self) -> Result<()> {
        self.stats.birth_proposed += 1;
        let position = self.config.window.sample_uniform(&mut self.rng);
        let mark = self.config.levy.sampler()?.sample(&mut self.rng);
        let accept_draw: f64 = self.rng.gen();
        if self.state.has_atom_at(&position) {
            return Ok(()); // zero-probability collision: reject outright
        }
        let inc = self.state.birth_increment(&position, mark)?;
        let n = self.state.len() as f64;
        let (pb, pd, _) = self.config.move_mix;
        let log_ratio = (pd / pb * self.nu / (n + 1.0)).ln() - inc;
        if accept_draw.ln() < log_ratio {
            let level = self.state.len();
            let half = self.second_half();
            let entry = self.flux.entry(level).or_default();
            if half {
                entry.2 += 1;
            } else {
                entry.0 += 1;
            }
            self.state.apply_birth(position, mark, inc);
            self.stats.birth_accepted += 1;
        }
        Ok(())
    }

    fn try_death(&mut self) -> Result<()> {
        self.stats.death_proposed += 1;
        if self.state.is_empty() {
            return Ok(());
        }
        let pick = self.rng.gen_range(0..self.state.len());
        let accept_draw: f64 = self.rng.gen();
        let slot = self.state.nth_alive(pick);
        let inc = self.state.death_increment(slot)?;
        let n = self.state.len() as f64;
        let (pb, pd, _) = self.config.move_mix;
        let log_ratio = (pb / pd * n / self.nu).ln() - inc;
        if accept_draw.ln() < log_ratio {
            let level = self.state.len() - 1;
            let half = self.second_half();
            let entry = self.flux.entry(level).or_default();
            if half {
                entry.3 += 1;
            } else {
                entry.1 += 1;
            }
            self.state.apply_death(slot, inc);
            self.stats.death_accepted += 1;
        }
        Ok(())
    }

    fn try_resize(&mut self) -> Result<()> {
        self.stats.resize_proposed += 1;
        if self.state.is_empty() {
            return Ok(());
        }
        let pick = self.rng.gen_range(0..self.state.len());
        let mark = self.config.levy.sampler()?.sample(&mut self.rng);
        let accept_draw: f64 = self.rng.gen();
        let slot = self.state.nth_alive(pick);
        let inc = self.state.resize_increment(slot, mark)?;
        if accept_draw.ln() < -inc {
            self.state.apply_resize(slot, mark, inc);
            self.stats.resize_accepted += 1;
        }
        Ok(())
    }

    fn audit(&mut self) -> Result<()> {
        let recomputed = self.state.recompute_energy();
        let rel = (self.state.energy() - recomputed).abs() / recomputed.abs().max(1.0);
        self.audit_max_rel = self.audit_max_rel.max(rel);
        self.audit_count += 1;
        if rel > AUDIT_REL_TOL {
            return Err(Error::numerical(format!(
                "energy cache drifted: cached {} vs recomputed {recomputed} at step {}",
                self.state.energy(),
                self.step
            )));
        }
        Ok(())
    }

    /// First-half up-flux vs second-half down-flux per atom-count level.
    /// Up/down crossing counts over a whole trajectory agree to within one
    /// deterministically, so the halves are compared instead — matched
    /// expected rates in stationarity, nondegenerate noise.
    fn flux_max_z(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (up1, _down1, _up2, down2) in self.flux.values() {
            let total = up1 + down2;
            if total < 25 {
                continue;
            }
            let z = (*up1 as f64 - *down2 as f64) / (total as f64).sqrt();
            worst = worst.max(z.abs());
        }
        worst
    }
}

/// Run the configured chain: burn in, then record every `thinning`-th state.
/// Returns the thinned samples and the run diagnostics.
pub fn run_specification(config: &ChainConfig) -> Result<(Vec<DiscreteMeasure>, ChainDiagnostics)> {
    if (config.n_steps - config.burn_in) / config.thinning < 4 {
        return Err(Error::invalid("run would record fewer than 4 samples; lower thinning or raise n_steps"));
    }
    let mut chain = Chain::new(config.clone())?;
    let mut samples = Vec::new();
    let mut mass_series = Vec::new();
    for step in 1..=config.n_steps {
        chain.mh_step()?;
        if step > config.burn_in && (step - config.burn_in) % config.thinning == 0 {
            mass_series.push(chain.state.total_mass());
            samples.push(chain.snapshot()?);
        }
    }

    let hull = index_hull(&config.window, &chain.grid)?;
    let mut exceed = 0usize;
    let mut cube_checks = 0usize;
    let mut max_norm: f64 = 0.0;
    for sample in &samples {
        max_norm = max_norm.max(sample.tempered_norm(&chain.grid, config.temper_alpha));
        let masses = sample.cube_masses(&chain.grid);
        for k in &hull.window_cubes {
            cube_checks += 1;
            let mass = masses.get(k).copied().unwrap_or(0.0);
            if mass * mass > config.support_b_log * (1.0 + k.norm()).ln() {
                exceed += 1;
            }
        }
    }

    let mass = Estimate::from_series(&mass_series)?;
    let diagnostics = ChainDiagnostics {
        acceptance: chain.stats,
        ess_mass: mass.n_effective,
        mass,
        energy_audit_max_rel: chain.audit_max_rel,
        energy_audit_count: chain.audit_count,
        flux_max_z: chain.flux_max_z(),
        support_fraction: exceed as f64 / cube_checks.max(1) as f64,
        max_tempered_norm: max_norm,
        n_samples: samples.len(),
    };
    Ok((samples, diagnostics))
}

/// Plain Monte Carlo estimate of Z_Δ(ξ) = E_G[e^{−H_Δ(η|ξ)}] over the
/// truncated reference measure.
pub fn estimate_partition_function<R: Rng>(
    window: &Window,
    xi: &DiscreteMeasure,
    spec: &PotentialSpec,
    levy: &LevySpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if n_samples < 2 {
        return Err(Error::invalid("partition estimation needs at least 2 samples"));
    }
    let grid = CubeGrid::new(spec.dim(), spec.delta(), spec.range())?;
    let base = EnergyState::new(window.clone(), spec.clone(), grid, &DiscreteMeasure::empty(window.clone()), xi.atoms())?;
    let mut weights = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = levy.sample_measure(window, rng)?;
        let mut state = base.clone_empty();
        for atom in eta.atoms() {
            let inc = state.birth_increment(&atom.position, atom.mark)?;
            state.apply_birth(atom.position.clone(), atom.mark, inc);
        }
        weights.push((-state.energy()).exp());
    }
    let estimate = Estimate::from_samples(&weights)?;
    if !(estimate.mean > 0.0) {
        return Err(Error::numerical(format!("partition estimate {} is not positive", estimate.mean)));
    }
    // For φ ≥ 0 the weight e^{−H} never exceeds 1, so neither may the mean.
    if spec.lower_bound_b() == 0.0 && estimate.mean > 1.0 + 3.0 * estimate.stderr {
        return Err(Error::numerical(format!(
            "partition estimate {} exceeds 1 for a nonnegative potential",
            estimate.mean
        )));
    }
    Ok(estimate)
}

/// E[exp(λ·η(Q_k)²)] over a sample batch.
pub fn exp_moment(samples: &[DiscreteMeasure], lambda: f64, cube: &CubeIndex, grid: &CubeGrid) -> Result<Estimate> {
    let series: Vec<f64> = samples
        .iter()
        .map(|s| {
            let mass = s.mass_in_cube(grid, cube);
            (lambda * mass * mass).exp()
        })
        .collect();
    Estimate::from_series(&series)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FunctionalComparison {
    pub name: String,
    pub direct: Estimate,
    pub resampled: Estimate,
    pub z: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConsistencyReport {
    pub functionals: Vec<FunctionalComparison>,
    pub pass: bool,
}

/// Markov-consistency check: sampling the big window directly must match
/// resampling the small window with the outer configuration as boundary.
/// `inner_energy_scale` ≠ 1 deliberately misspecifies the inner kernel
/// (negative control).
pub fn consistency_check(
    window_small: &Window,
    window_big: &Window,
    xi: &DiscreteMeasure,
    config: &ChainConfig,
    inner_steps: u64,
    inner_energy_scale: f64,
) -> Result<ConsistencyReport> {
    require_nested_cube_windows(window_small, window_big, &config.grid()?)?;

    let mut outer_config = config.clone();
    outer_config.window = window_big.clone();
    outer_config.boundary = xi.clone();
    let (outer_samples, _) = run_specification(&outer_config)?;

    let inner_spec = if inner_energy_scale == 1.0 {
        config.potential.clone()
    } else {
        config.potential.scaled(inner_energy_scale)?
    };

    let mass_target = config.levy.first_moment() * window_small.volume();
    let clip = 10.0;
    let functional_names = ["mass_at_most_mean", "exp_neg_mass", "clipped_mass"];
    let evaluate = |mass: f64| -> [f64; 3] {
        [
            if mass <= mass_target { 1.0 } else { 0.0 },
            (-mass).exp(),
            mass.min(clip),
        ]
    };

    let mut direct: [Vec<f64>; 3] = Default::default();
    let mut resampled: [Vec<f64>; 3] = Default::default();
    for (i, outer) in outer_samples.iter().enumerate() {
        let direct_vals = evaluate(outer.mass_in(window_small));
        for (acc, v) in direct.iter_mut().zip(direct_vals) {
            acc.push(v);
        }

        // Inner boundary: outer atoms outside the small window, plus the
        // original ξ (already outside the big window).
        let mut boundary_atoms = outer.outside(window_small);
        boundary_atoms.extend_from_slice(xi.atoms());
        let boundary = DiscreteMeasure::with_bounding_window(config.potential.dim(), boundary_atoms)?;

        let mut inner_config = config.clone();
        inner_config.window = window_small.clone();
        inner_config.boundary = boundary;
        inner_config.potential = inner_spec.clone();
        inner_config.n_steps = inner_steps;
        inner_config.burn_in = 0;
        inner_config.thinning = 1;
        inner_config.seed = config.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1);
        // One conditional draw per outer sample: run the inner kernel and
        // keep its final state.
        let mut inner_chain = Chain::new(inner_config)?;
        for _ in 0..inner_steps {
            inner_chain.mh_step()?;
        }
        let inner_vals = evaluate(inner_chain.state().total_mass());
        for (acc, v) in resampled.iter_mut().zip(inner_vals) {
            acc.push(v);
        }
    }

    let mut comparisons = Vec::new();
    let mut pass = true;
    for ((name, d), r) in functional_names.iter().zip(&direct).zip(&resampled) {
        let d_est = Estimate::from_series(d)?;
        let r_est = Estimate::from_series(r)?;
        let z = z_score(d_est.mean - r_est.mean, combined_se(d_est.stderr, r_est.stderr));
        pass &= z.abs() <= 4.0;
        comparisons.push(FunctionalComparison { name: name.to_string(), direct: d_est, resampled: r_est, z });
    }
    Ok(ConsistencyReport { functionals: comparisons, pass })
}

fn cube_indices(window: &Window) -> Result<&[CubeIndex]> {
    match window {
        Window::Cubes { indices, .. } => Ok(indices),
        Window::Box { .. } => Err(Error::invalid("window must be cube-aligned (built from cube indices)")),
    }
}

fn require_nested_cube_windows(small: &Window, big: &Window, grid: &CubeGrid) -> Result<()> {
    let edge_ok = |w: &Window| match w {
        Window::Cubes { edge, .. } => (edge - grid.edge()).abs() <= 1e-9 * grid.edge(),
        Window::Box { .. } => false,
    };
    if !edge_ok(small) || !edge_ok(big) {
        return Err(Error::invalid("windows must be cube-aligned to the potential's lattice"));
    }
    let small_idx = cube_indices(small)?;
    let big_idx = cube_indices(big)?;
    for k in small_idx {
        if big_idx.binary_search(k).is_err() {
            return Err(Error::invalid("small window is not contained in the big window"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepEntry {
    pub window_cubes: usize,
    pub mass_obs: Estimate,
    pub exp_neg_mass_obs: Estimate,
    pub exp_moment_origin: Estimate,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// z-scores of successive differences, one `[mass, exp_neg, exp_moment]`
    /// row per consecutive window pair.
    pub successive_z: Vec<[f64; 3]>,
    /// True when the last two windows agree on all tracked statistics
    /// within 4 combined SE.
    pub stabilized: bool,
}

/// Track fixed observables over a growing nested window sequence; flags
/// failure to stabilize.  Observables live on the smallest window and the
/// origin cube; `lambda` is the exponential-moment rate.
pub fn thermodynamic_sweep(
    windows: &[Window],
    xi: &DiscreteMeasure,
    config: &ChainConfig,
    lambda: f64,
) -> Result<SweepReport> {
    if windows.len() < 2 {
        return Err(Error::invalid("sweep needs at least two windows"));
    }
    let grid = config.grid()?;
    for pair in windows.windows(2) {
        require_nested_cube_windows(&pair[0], &pair[1], &grid)?;
    }
    let observe = &windows[0];
    let origin = CubeIndex(vec![0; config.potential.dim()]);

    let mut entries = Vec::new();
    for window in windows {
        let mut cfg = config.clone();
        cfg.window = window.clone();
        cfg.boundary = xi.clone();
        let (samples, _) = run_specification(&cfg)?;
        let mass: Vec<f64> = samples.iter().map(|s| s.mass_in(observe)).collect();
        let expneg: Vec<f64> = mass.iter().map(|m| (-m).exp()).collect();
        entries.push(SweepEntry {
            window_cubes: cube_indices(window)?.len(),
            mass_obs: Estimate::from_series(&mass)?,
            exp_neg_mass_obs: Estimate::from_series(&expneg)?,
            exp_moment_origin: exp_moment(&samples, lambda, &origin, &grid)?,
        });
    }

    let mut successive_z = Vec::new();
    for pair in entries.windows(2) {
        let z = |a: &Estimate, b: &Estimate| z_score(a.mean - b.mean, combined_se(a.stderr, b.stderr));
        successive_z.push([
            z(&pair[0].mass_obs, &pair[1].mass_obs),
            z(&pair[0].exp_neg_mass_obs, &pair[1].exp_neg_mass_obs),
            z(&pair[0].exp_moment_origin, &pair[1].exp_moment_origin),
        ]);
    }
    let stabilized = successive_z.last().map(|zs| zs.iter().all(|z| z.abs() <= 4.0)).unwrap_or(false);
    Ok(SweepReport { entries, successive_z, stabilized })
}
