//! Statistical verification suites.
//!
//! Every identity the library claims about Gamma measures and their Gibbs
//! perturbations is restated here as a hypothesis test with an explicit
//! estimator, threshold, and truncation bias budget: Laplace transform,
//! moments, independence of increments, the Mecke identity, the
//! Georgii–Nguyen–Zessin identity, FKG positivity, Markov consistency, and
//! the quantitative stability/moment bounds.  Negative controls deliberately
//! misspecify one ingredient and must fail, demonstrating test power.
//!
//! Conventions: single-estimate checks use |z| ≤ 3, multi-functional panels
//! |z| ≤ 4, negative controls must exceed their threshold.  Paired
//! estimators evaluate both sides on the same draws where possible; the
//! reported z uses the paired-difference standard error.

use crate::constants::{bound_constants, one_point_second_moment_bound, BoundConstants, BoundParams};
use crate::energy::EnergyState;
use crate::gibbs::{
    consistency_check, estimate_partition_function, exp_moment, run_specification, ChainConfig,
};
use crate::lattice::{CubeGrid, CubeIndex, Window};
use crate::levy::{gamma_laplace_exact, LevyKind, LevySpec};
use crate::measure::DiscreteMeasure;
use crate::potential::{DiagonalMode, PotentialSpec};
use crate::special::{gauss_legendre, reg_lower_gamma};
use crate::stats::{chi_square_poisson_test, covariance_estimate, ks_test, z_score, Estimate};
use crate::{rng_stream, Error, Result};
use rand::Rng;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, serde::Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RhsValue {
    /// Estimated right-hand side.
    Estimate(Estimate),
    /// Exact (closed-form) right-hand side.
    Exact(f64),
}

impl RhsValue {
    pub fn mean(&self) -> f64 {
        match self {
            RhsValue::Estimate(e) => e.mean,
            RhsValue::Exact(v) => *v,
        }
    }
}

/// Outcome of one verification check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: RhsValue,
    /// Signed discrepancy in standard-error units (paired where possible).
    pub z_score: f64,
    /// |z| threshold the check was judged against.
    pub threshold: f64,
    /// Systematic allowance added to the threshold band (mark truncation).
    pub bias_budget: f64,
    pub pass: bool,
    pub detail: String,
}

impl CheckReport {
    /// Two-sided check of lhs against rhs: pass ⇔ |Δ| ≤ threshold·SE + bias.
    fn two_sided(
        name: impl Into<String>,
        lhs: Estimate,
        rhs: RhsValue,
        se: f64,
        threshold: f64,
        bias_budget: f64,
        detail: impl Into<String>,
    ) -> CheckReport {
        let diff = lhs.mean - rhs.mean();
        let z = z_score(diff, se);
        let pass = diff.abs() <= threshold * se + bias_budget;
        CheckReport {
            name: name.into(),
            lhs,
            rhs,
            z_score: z,
            threshold,
            bias_budget,
            pass,
            detail: detail.into(),
        }
    }
}

/// A check plus its role: honest checks must pass, negative controls must
/// fail.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub report: CheckReport,
    pub expected_fail: bool,
    /// report.pass for honest checks, !report.pass for controls.
    pub ok: bool,
}

impl CheckOutcome {
    fn honest(report: CheckReport) -> CheckOutcome {
        let ok = report.pass;
        CheckOutcome { report, expected_fail: false, ok }
    }

    fn control(report: CheckReport) -> CheckOutcome {
        let ok = !report.pass;
        CheckOutcome { report, expected_fail: true, ok }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub outcomes: Vec<CheckOutcome>,
    pub pass: bool,
}

impl SuiteReport {
    fn from_outcomes(suite: impl Into<String>, outcomes: Vec<CheckOutcome>) -> SuiteReport {
        let pass = outcomes.iter().all(|o| o.ok);
        SuiteReport { suite: suite.into(), outcomes, pass }
    }

    /// Fixed-width table, one row per check.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("suite: {}\n", self.suite));
        out.push_str(&format!(
            "{:<38} {:>12} {:>12} {:>8} {:>7} {}\n",
            "check", "lhs", "rhs", "z", "ok", "note"
        ));
        for o in &self.outcomes {
            let r = &o.report;
            let note = if o.expected_fail { "negative control" } else { "" };
            out.push_str(&format!(
                "{:<38} {:>12.5} {:>12.5} {:>8.2} {:>7} {}\n",
                r.name,
                r.lhs.mean,
                r.rhs.mean(),
                r.z_score,
                if o.ok { "ok" } else { "FAIL" },
                note
            ));
        }
        out.push_str(&format!("suite result: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        out
    }
}

/// Test functional F(x, η) with a boundedness certificate.
#[derive(Clone)]
pub struct MarkedFunctional {
    pub name: String,
    f: Arc<dyn Fn(&[f64], &DiscreteMeasure) -> f64 + Send + Sync>,
    pub sup_bound: f64,
}

impl MarkedFunctional {
    pub fn new(
        name: impl Into<String>,
        sup_bound: f64,
        f: Arc<dyn Fn(&[f64], &DiscreteMeasure) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if !(sup_bound.is_finite() && sup_bound >= 0.0) {
            return Err(Error::invalid("functional certificate must be a finite nonnegative bound"));
        }
        Ok(MarkedFunctional { name: name.into(), f, sup_bound })
    }

    /// F(x, η) = 1_Δ(x).
    pub fn indicator(window: &Window) -> Self {
        let w = window.clone();
        MarkedFunctional {
            name: "indicator".into(),
            f: Arc::new(move |x, _| if w.contains(x) { 1.0 } else { 0.0 }),
            sup_bound: 1.0,
        }
    }

    /// F(x, η) = 1_Δ(x)·e^{−η(Δ)}.
    pub fn indicator_exp_neg_mass(window: &Window) -> Self {
        let w = window.clone();
        MarkedFunctional {
            name: "indicator_exp_neg_mass".into(),
            f: Arc::new(move |x, eta| {
                if w.contains(x) {
                    (-eta.mass_in(&w)).exp()
                } else {
                    0.0
                }
            }),
            sup_bound: 1.0,
        }
    }

    /// F ≡ 0.
    pub fn zero() -> Self {
        MarkedFunctional { name: "zero".into(), f: Arc::new(|_, _| 0.0), sup_bound: 0.0 }
    }

    fn eval(&self, x: &[f64], eta: &DiscreteMeasure) -> Result<f64> {
        let v = (self.f)(x, eta);
        if !v.is_finite() || v.abs() > self.sup_bound * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "functional {} violated its certificate: |{v}| > {}",
                self.name, self.sup_bound
            )));
        }
        Ok(v)
    }
}

/// Bounded increasing functional of η, monotone by construction.
#[derive(Debug, Clone)]
pub struct MonotoneFunctional {
    pub name: String,
    kind: MonotoneKind,
}

#[derive(Debug, Clone)]
enum MonotoneKind {
    /// min(η(region), cap)
    ClippedMass { region: Window, cap: f64 },
    /// 1{η(region) > level}
    IndicatorAbove { region: Window, level: f64 },
}

impl MonotoneFunctional {
    pub fn clipped_mass(name: impl Into<String>, region: Window, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::invalid("clipped-mass cap must be positive"));
        }
        Ok(MonotoneFunctional { name: name.into(), kind: MonotoneKind::ClippedMass { region, cap } })
    }

    pub fn indicator_above(name: impl Into<String>, region: Window, level: f64) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::invalid("indicator level must be finite"));
        }
        Ok(MonotoneFunctional { name: name.into(), kind: MonotoneKind::IndicatorAbove { region, level } })
    }

    pub fn eval(&self, eta: &DiscreteMeasure) -> f64 {
        match &self.kind {
            MonotoneKind::ClippedMass { region, cap } => eta.mass_in(region).min(*cap),
            MonotoneKind::IndicatorAbove { region, level } => {
                if eta.mass_in(region) > *level {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Free-measure checks
// ---------------------------------------------------------------------------

/// E[e^{−t·η(Δ)}] against the closed form (1+t)^{−θ·m(Δ)}.
pub fn laplace_check<R: Rng>(
    levy: &LevySpec,
    window: &Window,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let theta = levy
        .theta()
        .ok_or_else(|| Error::invalid("Laplace check needs the Gamma intensity (closed-form target)"))?;
    let mut vals = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = levy.sample_measure(window, rng)?;
        vals.push((-t * eta.total_mass()).exp());
    }
    let lhs = Estimate::from_samples(&vals)?;
    let exact = gamma_laplace_exact(theta, window.volume(), t);
    let (mean_loss, _) = levy.truncation_bias(window)?;
    // |e^{−tX} − e^{−t(X+δ)}| ≤ t·δ: truncation shifts the mass down by at
    // most mean_loss on average.
    let bias = t * mean_loss;
    let se = lhs.stderr;
    Ok(CheckReport::two_sided(
        format!("laplace_t{t}_theta{theta}_vol{}", window.volume()),
        lhs,
        RhsValue::Exact(exact),
        se,
        3.0,
        bias,
        format!("n = {n_samples}"),
    ))
}

/// Kolmogorov–Smirnov test of η(Δ) against Gamma(θ·m(Δ), 1).
pub fn marginal_ks_check<R: Rng>(
    levy: &LevySpec,
    window: &Window,
    n_samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let theta = levy
        .theta()
        .ok_or_else(|| Error::invalid("marginal KS check needs the Gamma closed-form law"))?;
    let shape = theta * window.volume();
    let mut masses = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        masses.push(levy.sample_measure(window, rng)?.total_mass());
    }
    let test = ks_test(&mut masses, |x| if x <= 0.0 { 0.0 } else { reg_lower_gamma(shape, x) })?;
    let pass = test.p_value > 0.01;
    Ok(CheckReport {
        name: format!("marginal_ks_shape{shape}"),
        lhs: Estimate { mean: test.p_value, stderr: 0.0, n_effective: n_samples as f64, raw_n: n_samples },
        rhs: RhsValue::Exact(0.01),
        z_score: test.statistic,
        threshold: 0.01,
        bias_budget: 0.0,
        pass,
        detail: format!("KS statistic {:.4}, p = {:.4}; pass iff p > 0.01 ({})", test.statistic, test.p_value, test.detail),
    })
}

/// E[η(Δ)^order] for order 1 or 2 against the Campbell closed forms.
pub fn moment_check<R: Rng>(
    levy: &LevySpec,
    window: &Window,
    order: u32,
    n_samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let vol = window.volume();
    let m1 = levy.first_moment() * vol;
    let target = match order {
        1 => m1,
        2 => levy.second_moment() * vol + m1 * m1,
        _ => return Err(Error::invalid("moment check supports orders 1 and 2")),
    };
    let mut vals = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mass = levy.sample_measure(window, rng)?.total_mass();
        vals.push(if order == 1 { mass } else { mass * mass });
    }
    let lhs = Estimate::from_samples(&vals)?;
    let (mean_loss, var_loss) = levy.truncation_bias(window)?;
    let bias = match order {
        1 => mean_loss,
        _ => var_loss + 2.0 * m1 * mean_loss + mean_loss * mean_loss,
    };
    let se = lhs.stderr;
    Ok(CheckReport::two_sided(
        format!("moment_order{order}"),
        lhs,
        RhsValue::Exact(target),
        se,
        3.0,
        bias,
        format!("n = {n_samples}"),
    ))
}

/// Masses of disjoint regions are uncorrelated (independent increments).
pub fn independence_check<R: Rng>(
    levy: &LevySpec,
    sample_window: &Window,
    region_a: &Window,
    region_b: &Window,
    n_samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let mut fa = Vec::with_capacity(n_samples);
    let mut fb = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = levy.sample_measure(sample_window, rng)?;
        fa.push(eta.mass_in(region_a));
        fb.push(eta.mass_in(region_b));
    }
    let cov = covariance_estimate(&fa, &fb)?;
    let se = cov.stderr;
    Ok(CheckReport::two_sided(
        "independence_disjoint_cov",
        cov,
        RhsValue::Exact(0.0),
        se,
        3.0,
        0.0,
        format!("n = {n_samples}"),
    ))
}

/// Mecke identity: E[Σ_i s_i F(x_i, η)] = E[ν(Δ)·s*·F(x*, η + s*δ_{x*})]
/// with (x*, s*) an independent uniform-position, reference-mark draw.
/// `rhs_levy` substitutes a (deliberately wrong) intensity on the right-hand
/// side for the characterization negative control.
pub fn mecke_check<R: Rng>(
    levy: &LevySpec,
    window: &Window,
    functional: &MarkedFunctional,
    n_samples: usize,
    threshold: f64,
    rng: &mut R,
    rhs_levy: Option<&LevySpec>,
    oracle: Option<f64>,
) -> Result<CheckReport> {
    let rhs_spec = rhs_levy.unwrap_or(levy);
    let nu_rhs = rhs_spec.truncated_mass()? * window.volume();
    let mut lhs_vals = Vec::with_capacity(n_samples);
    let mut rhs_vals = Vec::with_capacity(n_samples);
    let mut diffs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = levy.sample_measure(window, rng)?;
        let mut lhs = 0.0;
        for atom in eta.atoms() {
            lhs += atom.mark * functional.eval(&atom.position, &eta)?;
        }
        let x_star = window.sample_uniform(rng);
        let s_star = rhs_spec.sampler()?.sample(rng);
        let augmented = augment(&eta, &x_star, s_star)?;
        let rhs = nu_rhs * s_star * functional.eval(&x_star, &augmented)?;
        lhs_vals.push(lhs);
        rhs_vals.push(rhs);
        diffs.push(lhs - rhs);
    }
    let lhs = Estimate::from_samples(&lhs_vals)?;
    let rhs = Estimate::from_samples(&rhs_vals)?;
    let diff = Estimate::from_samples(&diffs)?;
    let (mean_loss, _) = levy.truncation_bias(window)?;
    // Both sides miss sub-truncation atoms; each side's error is at most
    // sup|F|·mean_loss.
    let bias = 2.0 * functional.sup_bound * mean_loss;
    let mut report = CheckReport::two_sided(
        format!("mecke_{}", functional.name),
        lhs,
        RhsValue::Estimate(rhs),
        diff.stderr,
        threshold,
        bias,
        format!("paired difference over n = {n_samples}"),
    );
    if let Some(exact) = oracle {
        // Cross-check the LHS against a closed form as well.
        let z_oracle = z_score(report.lhs.mean - exact, report.lhs.stderr);
        let oracle_pass = (report.lhs.mean - exact).abs()
            <= threshold * report.lhs.stderr + functional.sup_bound * mean_loss;
        report.pass &= oracle_pass;
        report.detail = format!("{}; oracle {exact:.6}, z = {z_oracle:.2}", report.detail);
    }
    Ok(report)
}

fn augment(eta: &DiscreteMeasure, position: &[f64], mark: f64) -> Result<DiscreteMeasure> {
    let mut atoms = eta.atoms().to_vec();
    atoms.push(crate::measure::Atom::new(position.to_vec(), mark));
    DiscreteMeasure::new(eta.window().clone(), atoms)
}

/// How the GNZ right-hand side weighs the inserted atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnzWeightMode {
    /// e^{−ΔH} with the literal birth increment (exact for the sampled
    /// finite-volume density in either diagonal convention).
    LiteralIncrement,
    /// e^{−Φ} with the bare pair sum Φ = 2sΣφs (no self-term); exact only
    /// under the diagonal-excluded convention.
    PairSumOnly,
    /// No weight at all — negative control.
    Unweighted,
}

/// Georgii–Nguyen–Zessin identity on Gibbs samples:
/// E_μ[Σ_i s_i F(x_i,η)] = E_μ[ν(Δ)·s*·F(x*, η+s*δ_{x*})·e^{−W}].
pub fn gnz_check<R: Rng>(
    samples: &[DiscreteMeasure],
    config: &ChainConfig,
    functional: &MarkedFunctional,
    mode: GnzWeightMode,
    threshold: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    if mode == GnzWeightMode::PairSumOnly && config.potential.diagonal() == DiagonalMode::Include {
        return Err(Error::invalid(
            "pair-sum GNZ weight is exact only for diagonal-excluded sampling; \
             these samples were drawn with the diagonal included",
        ));
    }
    let grid = config.grid()?;
    let nu = config.reference_intensity()?;
    let base = EnergyState::new(
        config.window.clone(),
        config.potential.clone(),
        grid,
        &DiscreteMeasure::empty(config.window.clone()),
        config.boundary.atoms(),
    )?;
    let mut lhs_vals = Vec::with_capacity(samples.len());
    let mut rhs_vals = Vec::with_capacity(samples.len());
    let mut diffs = Vec::with_capacity(samples.len());
    for eta in samples {
        let mut lhs = 0.0;
        for atom in eta.atoms() {
            lhs += atom.mark * functional.eval(&atom.position, eta)?;
        }
        let x_star = config.window.sample_uniform(rng);
        let s_star = config.levy.sampler()?.sample(rng);
        let weight = match mode {
            GnzWeightMode::Unweighted => 1.0,
            // Under the excluded-diagonal convention (enforced above for
            // PairSumOnly) the literal increment *is* the bare pair sum, so
            // both remaining modes use the birth increment.
            _ => {
                let mut state = base.clone_empty();
                for atom in eta.atoms() {
                    let inc = state.birth_increment(&atom.position, atom.mark)?;
                    state.apply_birth(atom.position.clone(), atom.mark, inc);
                }
                (-state.birth_increment(&x_star, s_star)?).exp()
            }
        };
        let augmented = augment(eta, &x_star, s_star)?;
        let rhs = nu * s_star * functional.eval(&x_star, &augmented)? * weight;
        lhs_vals.push(lhs);
        rhs_vals.push(rhs);
        diffs.push(lhs - rhs);
    }
    let lhs = Estimate::from_series(&lhs_vals)?;
    let rhs = Estimate::from_series(&rhs_vals)?;
    let diff = Estimate::from_series(&diffs)?;
    let mode_name = match mode {
        GnzWeightMode::LiteralIncrement => "literal",
        GnzWeightMode::PairSumOnly => "pair_sum",
        GnzWeightMode::Unweighted => "unweighted",
    };
    Ok(CheckReport::two_sided(
        format!("gnz_{}_{}", mode_name, functional.name),
        lhs,
        RhsValue::Estimate(rhs),
        diff.stderr,
        threshold,
        0.0, // exact identity for the truncated finite-volume density
        format!("paired difference over {} samples", samples.len()),
    ))
}

/// FKG positivity: Cov(F, G) ≥ 0 for bounded increasing F, G under the free
/// Gamma measure.  One-sided: pass ⇔ Cov ≥ −threshold·SE.
pub fn fkg_check<R: Rng>(
    levy: &LevySpec,
    sample_window: &Window,
    f: &MonotoneFunctional,
    g: &MonotoneFunctional,
    n_samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let mut fv = Vec::with_capacity(n_samples);
    let mut gv = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let eta = levy.sample_measure(sample_window, rng)?;
        fv.push(f.eval(&eta));
        gv.push(g.eval(&eta));
    }
    let cov = covariance_estimate(&fv, &gv)?;
    let z = z_score(cov.mean, cov.stderr);
    let pass = cov.mean >= -3.0 * cov.stderr;
    Ok(CheckReport {
        name: format!("fkg_{}_{}", f.name, g.name),
        lhs: cov,
        rhs: RhsValue::Exact(0.0),
        z_score: z,
        threshold: 3.0,
        bias_budget: 0.0,
        pass,
        detail: format!("one-sided: covariance must exceed −3·SE; n = {n_samples}"),
    })
}

// ---------------------------------------------------------------------------
// Gibbs-side checks
// ---------------------------------------------------------------------------

/// Ratio estimator mean(num)/mean(den) with a delta-method standard error.
fn ratio_estimate(num: &[f64], den: &[f64]) -> Result<Estimate> {
    if num.len() != den.len() || num.len() < 2 {
        return Err(Error::invalid("ratio estimator needs two equally sized blocks"));
    }
    let n = num.len() as f64;
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    if md == 0.0 {
        return Err(Error::numerical("ratio estimator denominator vanished"));
    }
    let r = mn / md;
    let mut ss = 0.0;
    for (a, b) in num.iter().zip(den) {
        let e = (a - r * b) / md;
        ss += e * e;
    }
    let se = (ss / (n - 1.0) / n).sqrt();
    Ok(Estimate { mean: r, stderr: se, n_effective: n, raw_n: num.len() })
}

/// The ten free-case functionals used for chain-vs-direct equivalence.
fn equivalence_functionals(grid: &CubeGrid, mass_clip: f64) -> Vec<(String, Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>)> {
    let g = grid.clone();
    let fns: Vec<(&str, Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>)> = vec![
        ("mass", Arc::new(|m: &DiscreteMeasure| m.total_mass())),
        ("mass_sq", Arc::new(|m: &DiscreteMeasure| m.total_mass().powi(2))),
        ("exp_neg_mass", Arc::new(|m: &DiscreteMeasure| (-m.total_mass()).exp())),
        ("exp_neg_2mass", Arc::new(|m: &DiscreteMeasure| (-2.0 * m.total_mass()).exp())),
        ("clipped_mass", Arc::new(move |m: &DiscreteMeasure| m.total_mass().min(mass_clip))),
        ("count", Arc::new(|m: &DiscreteMeasure| m.len() as f64)),
        ("count_sq", Arc::new(|m: &DiscreteMeasure| (m.len() as f64).powi(2))),
        ("exp_neg_count", Arc::new(|m: &DiscreteMeasure| (-(m.len() as f64)).exp())),
        ("cube_square_mass", Arc::new(move |m: &DiscreteMeasure| m.cube_masses(&g).values().map(|s| s * s).sum())),
        ("max_mark", Arc::new(|m: &DiscreteMeasure| m.max_mark())),
    ];
    fns.into_iter().map(|(n, f)| (n.to_string(), f)).collect()
}

/// φ ≡ 0 oracle equivalence: the chain must reproduce direct-sampler
/// statistics (10 functionals, |z| ≤ 3) and the stationary atom count must
/// pass a chi-square test against Poisson(ν(Δ)).
pub fn free_equivalence_checks(config: &ChainConfig, n_direct: usize) -> Result<Vec<CheckReport>> {
    if !config.potential.is_free() {
        return Err(Error::invalid("equivalence oracle requires the zero potential"));
    }
    let grid = config.grid()?;
    let (samples, _) = run_specification(config)?;
    let mut rng = rng_stream(config.seed, 0xD12EC7);
    let direct: Vec<DiscreteMeasure> = (0..n_direct)
        .map(|_| config.levy.sample_measure(&config.window, &mut rng))
        .collect::<Result<_>>()?;

    let clip = config.levy.first_moment() * config.window.volume();
    let mut reports = Vec::new();
    for (name, f) in equivalence_functionals(&grid, clip) {
        let chain_vals: Vec<f64> = samples.iter().map(|s| f(s)).collect();
        let direct_vals: Vec<f64> = direct.iter().map(|s| f(s)).collect();
        let lhs = Estimate::from_series(&chain_vals)?;
        let rhs = Estimate::from_samples(&direct_vals)?;
        let se = crate::stats::combined_se(lhs.stderr, rhs.stderr);
        reports.push(CheckReport::two_sided(
            format!("free_equivalence_{name}"),
            lhs,
            RhsValue::Estimate(rhs),
            se,
            3.0,
            0.0,
            format!("chain {} thinned vs {} direct draws", samples.len(), n_direct),
        ));
    }

    let nu = config.reference_intensity()?;
    let counts: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    let test = chi_square_poisson_test(&counts, nu)?;
    reports.push(CheckReport {
        name: "free_count_chi_square".into(),
        lhs: Estimate {
            mean: test.p_value,
            stderr: 0.0,
            n_effective: counts.len() as f64,
            raw_n: counts.len(),
        },
        rhs: RhsValue::Exact(0.01),
        z_score: test.statistic,
        threshold: 0.01,
        bias_budget: 0.0,
        pass: test.p_value > 0.01,
        detail: format!("chi-square {:.2}, p = {:.4} vs Poisson({nu:.4}); {}", test.statistic, test.p_value, test.detail),
    });
    Ok(reports)
}

/// Importance-sampling oracle on a small window: the chain estimate of
/// E_μ[f] must match E_G[f·e^{−H}]/E_G[e^{−H}] from direct reference draws.
pub fn importance_sampling_checks(config: &ChainConfig, n_direct: usize) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let (samples, _) = run_specification(config)?;
    let mut rng = rng_stream(config.seed, 0x1A4B0);
    let base = EnergyState::new(
        config.window.clone(),
        config.potential.clone(),
        grid,
        &DiscreteMeasure::empty(config.window.clone()),
        config.boundary.atoms(),
    )?;

    let clip = config.levy.first_moment() * config.window.volume();
    let fns: Vec<(&str, Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>)> = vec![
        ("exp_neg_mass", Arc::new(|m: &DiscreteMeasure| (-m.total_mass()).exp())),
        ("clipped_mass", Arc::new(move |m: &DiscreteMeasure| m.total_mass().min(clip))),
        ("mass_below_mean", Arc::new(move |m: &DiscreteMeasure| if m.total_mass() <= clip { 1.0 } else { 0.0 })),
        ("exp_neg_count", Arc::new(|m: &DiscreteMeasure| (-(m.len() as f64)).exp())),
        ("count_clip5", Arc::new(|m: &DiscreteMeasure| (m.len() as f64).min(5.0))),
    ];

    // Direct reference draws with weights e^{−H}.
    let mut weights = Vec::with_capacity(n_direct);
    let mut f_vals: Vec<Vec<f64>> = vec![Vec::with_capacity(n_direct); fns.len()];
    for _ in 0..n_direct {
        let eta = config.levy.sample_measure(&config.window, &mut rng)?;
        let mut state = base.clone_empty();
        for atom in eta.atoms() {
            let inc = state.birth_increment(&atom.position, atom.mark)?;
            state.apply_birth(atom.position.clone(), atom.mark, inc);
        }
        let w = (-state.energy()).exp();
        weights.push(w);
        for ((_, f), acc) in fns.iter().zip(f_vals.iter_mut()) {
            acc.push(f(&eta) * w);
        }
    }

    let mut reports = Vec::new();
    for ((name, f), num) in fns.iter().zip(&f_vals) {
        let chain_vals: Vec<f64> = samples.iter().map(|s| f(s)).collect();
        let lhs = Estimate::from_series(&chain_vals)?;
        let rhs = ratio_estimate(num, &weights)?;
        let se = crate::stats::combined_se(lhs.stderr, rhs.stderr);
        reports.push(CheckReport::two_sided(
            format!("importance_{name}"),
            lhs,
            RhsValue::Estimate(rhs),
            se,
            3.0,
            0.0,
            format!("chain vs self-normalized reference weighting, {} direct draws", n_direct),
        ));
    }
    Ok(reports)
}

/// Truncated-series oracle for the partition function of the step potential
/// on a window so small that every pair interacts: H = A·(Σ s_i)², so
/// Z = e^{−ν} Σ_n ν^n/n!·E[e^{−A·S_n²}] with S_n a sum of n reference marks.
/// Terms n ≤ 4 are integrated by tensor Gauss–Legendre; the remainder is
/// bounded by the neglected Poisson mass.
pub fn partition_series_oracle(levy: &LevySpec, window: &Window, repulsion: f64) -> Result<(f64, f64)> {
    let LevyKind::Gamma { .. } = levy.kind() else {
        return Err(Error::invalid("series oracle implemented for the Gamma intensity"));
    };
    let eps = levy.trunc();
    if eps <= 0.0 {
        return Err(Error::invalid("series oracle needs a positive truncation"));
    }
    let nu = levy.truncated_mass()? * window.volume();
    // Reference-mark quadrature: s = ε·e^v turns ∫ e^{−s}/s·f ds into
    // ∫ e^{−s(v)}·f(s(v)) dv — smooth, no endpoint singularity.
    let n_nodes = 48;
    let s_max: f64 = 60.0;
    let (v_nodes, v_weights) = gauss_legendre(n_nodes, 0.0, (s_max / eps).ln());
    let e1 = crate::special::exp_integral_e1(eps);
    let nodes: Vec<f64> = v_nodes.iter().map(|v| eps * v.exp()).collect();
    let weights: Vec<f64> = nodes.iter().zip(&v_weights).map(|(s, w)| w * (-s).exp() / e1).collect();

    let phi = |s: f64| (-repulsion * s * s).exp();
    let mut e_terms = [1.0f64; 5];
    e_terms[1] = nodes.iter().zip(&weights).map(|(s, w)| w * phi(*s)).sum();
    let mut e2 = 0.0;
    for (s1, w1) in nodes.iter().zip(&weights) {
        for (s2, w2) in nodes.iter().zip(&weights) {
            e2 += w1 * w2 * phi(s1 + s2);
        }
    }
    e_terms[2] = e2;
    let mut e3 = 0.0;
    for (s1, w1) in nodes.iter().zip(&weights) {
        for (s2, w2) in nodes.iter().zip(&weights) {
            let p = s1 + s2;
            let w12 = w1 * w2;
            for (s3, w3) in nodes.iter().zip(&weights) {
                e3 += w12 * w3 * phi(p + s3);
            }
        }
    }
    e_terms[3] = e3;
    let mut e4 = 0.0;
    for (s1, w1) in nodes.iter().zip(&weights) {
        for (s2, w2) in nodes.iter().zip(&weights) {
            let p2 = s1 + s2;
            let w12 = w1 * w2;
            for (s3, w3) in nodes.iter().zip(&weights) {
                let p3 = p2 + s3;
                let w123 = w12 * w3;
                for (s4, w4) in nodes.iter().zip(&weights) {
                    e4 += w123 * w4 * phi(p3 + s4);
                }
            }
        }
    }
    e_terms[4] = e4;

    let mut z = 0.0;
    let mut poisson = (-nu).exp();
    let mut retained = 0.0;
    for (n, e_term) in e_terms.iter().enumerate() {
        z += poisson * e_term;
        retained += poisson;
        poisson *= nu / (n as f64 + 1.0);
    }
    // Every neglected term is between 0 and its Poisson probability.
    let tail = 1.0 - retained;
    Ok((z, tail))
}

// ---------------------------------------------------------------------------
// Bound-compliance checks
// ---------------------------------------------------------------------------

/// Deterministic stability sweep: H ≥ quadratic cube-mass bound on random
/// free-field states; any violation fails.
pub fn stability_sweep_check(
    spec: &PotentialSpec,
    levy: &LevySpec,
    window: &Window,
    n_states: usize,
    seed: u64,
) -> Result<CheckReport> {
    let grid = CubeGrid::new(spec.dim(), spec.delta(), spec.range())?;
    let (lo, hi) = window.bounding_box();
    let pad = spec.range().max(grid.edge());
    let outer = Window::new_box(
        lo.iter().map(|c| c - pad).collect(),
        hi.iter().map(|c| c + pad).collect(),
    )?;
    let mut rng = rng_stream(seed, 0x57AB);
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    for _ in 0..n_states {
        let eta = levy.sample_measure(window, &mut rng)?;
        let xi_full = levy.sample_measure(&outer, &mut rng)?;
        let xi = DiscreteMeasure::new(outer.clone(), xi_full.outside(window))?;
        let h = crate::energy::hamiltonian(&eta, &xi, window, spec, &grid)?;
        let bound = crate::energy::stability_lower_bound(&eta, &xi, window, spec, &grid)?;
        let slack = h - bound;
        min_margin = min_margin.min(slack);
        if slack < -1e-9 * bound.abs().max(1.0) {
            violations += 1;
        }
    }
    Ok(CheckReport {
        name: "stability_lower_bound_sweep".into(),
        lhs: Estimate { mean: violations as f64, stderr: 0.0, n_effective: n_states as f64, raw_n: n_states },
        rhs: RhsValue::Exact(0.0),
        z_score: 0.0,
        threshold: 0.0,
        bias_budget: 0.0,
        pass: violations == 0,
        detail: format!("{n_states} random states, min margin {min_margin:.4}"),
    })
}

/// Pick a Young parameter making the exponential-moment constant finite at
/// rate `lambda` when possible, falling back to the top admissible rate.
pub fn constants_for_lambda(
    spec: &PotentialSpec,
    grid: &CubeGrid,
    window: &Window,
    theta: f64,
    lambda: f64,
) -> Result<BoundConstants> {
    let m = spec.interaction_parameter();
    let mb = m * spec.lower_bound_b();
    let lambda0 = spec.repulsion_a() - mb;
    let pick = |rate: f64| -> BoundParams {
        // B_ε = mb + ε·C_φ·m < rate whenever ε < (rate − mb)/(C_φ·m).
        let c_phi = theta * grid.edge().powi(spec.dim() as i32) * spec.sup_norm();
        let eps = if c_phi > 0.0 { (0.5 * (rate - mb) / (c_phi * m)).min(1.0) } else { 1.0 };
        let mut p = BoundParams::new(theta, eps.max(1e-12));
        p.lambda = Some(rate);
        p
    };
    let rate = if lambda > mb { lambda } else { lambda0 };
    bound_constants(spec, grid, window, &pick(rate))
}

/// E[exp(λ·η(Q_k)²)] from chain samples must respect the computed constant:
/// pass ⇔ ln(mean) + 3·SE/mean ≤ ln C_λ (log domain).  When λ itself sits
/// below the admissible interval the constant at the top rate λ₀ bounds the
/// (monotone in λ) moment instead.
pub fn exp_moment_check(
    samples: &[DiscreteMeasure],
    config: &ChainConfig,
    lambda: f64,
    cube: &CubeIndex,
) -> Result<CheckReport> {
    let grid = config.grid()?;
    let theta = config
        .levy
        .theta()
        .ok_or_else(|| Error::invalid("exponential-moment constants are derived for the Gamma intensity"))?;
    let constants = constants_for_lambda(&config.potential, &grid, &config.window, theta, lambda)?;
    let log_c = constants
        .log_c_lambda
        .ok_or_else(|| Error::numerical("contraction condition failed; no finite moment constant"))?;
    let est = exp_moment(samples, lambda, cube, &grid)?;
    let log_mean = est.mean.ln();
    let log_upper = (est.mean + 3.0 * est.stderr).ln();
    let pass = est.mean.is_finite() && log_upper <= log_c;
    let z = z_score(log_mean - log_c, est.stderr / est.mean);
    Ok(CheckReport {
        name: format!("exp_moment_lambda{lambda:.3}"),
        lhs: est,
        rhs: RhsValue::Exact(log_c),
        z_score: z,
        threshold: 3.0,
        bias_budget: 0.0,
        pass,
        detail: format!(
            "ln E = {log_mean:.3} (+3SE → {log_upper:.3}) vs ln C = {log_c:.3} at effective rate {:.3}",
            constants.lambda
        ),
    })
}

/// One-point second-moment bound: chain E[η(Q_k)²] against the computed
/// (Υ_ε + coupling·Σ ξ(Q_j)²)/λ within 3 SE.
pub fn one_point_moment_check(
    samples: &[DiscreteMeasure],
    config: &ChainConfig,
    lambda: f64,
    cube: &CubeIndex,
    eps_h: f64,
) -> Result<CheckReport> {
    let grid = config.grid()?;
    let theta = config
        .levy
        .theta()
        .ok_or_else(|| Error::invalid("moment constants are derived for the Gamma intensity"))?;
    let mut params = BoundParams::new(theta, eps_h);
    params.lambda = Some(lambda);
    let constants = bound_constants(&config.potential, &grid, &config.window, &params)?;
    if !constants.lambda_admissible {
        return Err(Error::invalid(format!(
            "lambda {lambda} outside the admissible interval ({}, {}]",
            constants.admissible_lo, constants.admissible_hi
        )));
    }
    let bound = one_point_second_moment_bound(&constants, &config.boundary, cube, &grid);
    let series: Vec<f64> = samples
        .iter()
        .map(|s| {
            let m = s.mass_in_cube(&grid, cube);
            m * m
        })
        .collect();
    let est = Estimate::from_series(&series)?;
    let pass = est.mean - 3.0 * est.stderr <= bound;
    let z = z_score(est.mean - bound, est.stderr);
    Ok(CheckReport {
        name: format!("one_point_second_moment_lambda{lambda:.3}"),
        lhs: est,
        rhs: RhsValue::Exact(bound),
        z_score: z,
        threshold: 3.0,
        bias_budget: 0.0,
        pass,
        detail: format!("one-sided: estimate − 3·SE must not exceed the bound; eps_h = {eps_h}"),
    })
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    FreeMeasure,
    Gibbs,
    Bounds,
    All,
    NegativeControls,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free-measure" => Ok(Suite::FreeMeasure),
            "gibbs" => Ok(Suite::Gibbs),
            "bounds" => Ok(Suite::Bounds),
            "all" => Ok(Suite::All),
            "negative-controls" => Ok(Suite::NegativeControls),
            other => Err(Error::invalid(format!(
                "unknown suite '{other}' (expected free-measure, gibbs, bounds, all, or negative-controls)"
            ))),
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Suite::FreeMeasure => "free-measure",
            Suite::Gibbs => "gibbs",
            Suite::Bounds => "bounds",
            Suite::All => "all",
            Suite::NegativeControls => "negative-controls",
        };
        write!(f, "{name}")
    }
}

/// Scale knobs for the built-in suites.
#[derive(Debug, Clone)]
pub struct SuiteParams {
    pub seed: u64,
    pub theta: f64,
    /// Mark truncation for free-measure sampling checks.
    pub trunc: f64,
    /// Direct-sampler draws per check.
    pub n_samples: usize,
    /// MCMC steps per chain-based check.
    pub chain_steps: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { seed: 1, theta: 1.0, trunc: 1e-6, n_samples: 100_000, chain_steps: 200_000 }
    }
}

impl SuiteParams {
    fn levy(&self) -> Result<LevySpec> {
        LevySpec::gamma(self.theta, self.trunc)
    }

    /// Chain-side truncation: coarser than the free-measure one so the
    /// reference intensity ν(Δ) stays desk-sized.
    fn chain_levy(&self) -> Result<LevySpec> {
        LevySpec::gamma(self.theta, self.trunc.max(1e-4))
    }
}

pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<SuiteReport> {
    let outcomes = match suite {
        Suite::FreeMeasure => free_measure_outcomes(params)?,
        Suite::Gibbs => gibbs_outcomes(params)?,
        Suite::Bounds => bounds_outcomes(params)?,
        Suite::NegativeControls => negative_control_outcomes(params)?,
        Suite::All => {
            let mut all = free_measure_outcomes(params)?;
            all.extend(gibbs_outcomes(params)?);
            all.extend(bounds_outcomes(params)?);
            all
        }
    };
    Ok(SuiteReport::from_outcomes(suite.to_string(), outcomes))
}

fn free_measure_outcomes(params: &SuiteParams) -> Result<Vec<CheckOutcome>> {
    let levy = params.levy()?;
    let n = params.n_samples;
    let mut outcomes = Vec::new();

    let unit = Window::new_box(vec![0.0], vec![1.0])?;
    let mut rng = rng_stream(params.seed, 10);
    for t in [0.5, 1.0, 2.0] {
        outcomes.push(CheckOutcome::honest(laplace_check(&levy, &unit, t, n, &mut rng)?));
    }

    let mut rng = rng_stream(params.seed, 11);
    outcomes.push(CheckOutcome::honest(marginal_ks_check(&levy, &unit, (n / 10).max(1000), &mut rng)?));

    let mut rng = rng_stream(params.seed, 12);
    outcomes.push(CheckOutcome::honest(moment_check(&levy, &unit, 1, n, &mut rng)?));
    outcomes.push(CheckOutcome::honest(moment_check(&levy, &unit, 2, n, &mut rng)?));

    let wide = Window::new_box(vec![0.0], vec![2.0])?;
    let left = Window::new_box(vec![0.0], vec![1.0])?;
    let right = Window::new_box(vec![1.0], vec![2.0])?;
    let mut rng = rng_stream(params.seed, 13);
    outcomes.push(CheckOutcome::honest(independence_check(&levy, &wide, &left, &right, n, &mut rng)?));

    let mut rng = rng_stream(params.seed, 14);
    outcomes.push(CheckOutcome::honest(mecke_check(
        &levy,
        &unit,
        &MarkedFunctional::indicator(&unit),
        n,
        3.0,
        &mut rng,
        None,
        Some(params.theta * unit.volume()),
    )?));
    let theta_m = params.theta * unit.volume();
    let oracle = theta_m * 2f64.powf(-theta_m - 1.0);
    outcomes.push(CheckOutcome::honest(mecke_check(
        &levy,
        &unit,
        &MarkedFunctional::indicator_exp_neg_mass(&unit),
        n,
        3.0,
        &mut rng,
        None,
        Some(oracle),
    )?));

    // FKG panel: self pair, disjoint pair, overlapping pair.
    let mut rng = rng_stream(params.seed, 15);
    let n_fkg = n / 2;
    let f_left = MonotoneFunctional::clipped_mass("clip_left", left.clone(), 5.0)?;
    let f_right = MonotoneFunctional::clipped_mass("clip_right", right.clone(), 5.0)?;
    let f_all = MonotoneFunctional::clipped_mass("clip_all", wide.clone(), 5.0)?;
    outcomes.push(CheckOutcome::honest(fkg_check(&levy, &wide, &f_left, &f_left, n_fkg, &mut rng)?));
    outcomes.push(CheckOutcome::honest(fkg_check(&levy, &wide, &f_left, &f_right, n_fkg, &mut rng)?));
    outcomes.push(CheckOutcome::honest(fkg_check(&levy, &wide, &f_left, &f_all, n_fkg, &mut rng)?));

    Ok(outcomes)
}

/// Base single-cube Gibbs configuration used by several checks.
fn single_cube_config(params: &SuiteParams, potential: PotentialSpec) -> Result<ChainConfig> {
    let grid = CubeGrid::new(1, potential.delta(), potential.range())?;
    let window = Window::centered_block(&grid, 1)?;
    let boundary = DiscreteMeasure::empty(window.clone());
    let mut cfg = ChainConfig::new(params.chain_levy()?, potential, window, boundary);
    cfg.seed = params.seed;
    cfg.n_steps = params.chain_steps;
    cfg.burn_in = params.chain_steps / 5;
    cfg.thinning = 10;
    Ok(cfg)
}

fn gibbs_outcomes(params: &SuiteParams) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();

    // Partition function: φ ≡ 0 gives Z = 1 with zero variance.
    let free = PotentialSpec::free(1, 1.0)?;
    let grid = CubeGrid::new(1, 1.0, 0.0)?;
    let window = Window::centered_block(&grid, 1)?;
    let xi = DiscreteMeasure::empty(window.clone());
    let levy = params.chain_levy()?;
    let mut rng = rng_stream(params.seed, 20);
    let z_free = estimate_partition_function(&window, &xi, &free, &levy, 2_000, &mut rng)?;
    outcomes.push(CheckOutcome::honest(CheckReport {
        name: "partition_free_exact_one".into(),
        lhs: z_free.clone(),
        rhs: RhsValue::Exact(1.0),
        z_score: 0.0,
        threshold: 0.0,
        bias_budget: 0.0,
        pass: z_free.mean == 1.0 && z_free.stderr == 0.0,
        detail: "zero potential: every weight is exactly e^0".into(),
    }));

    // Repulsive potential: Z ≤ 1 within 3 SE.
    let step = PotentialSpec::step(1, 1.0, 1.0)?;
    let sgrid = CubeGrid::new(1, 1.0, 1.0)?;
    let swindow = Window::centered_block(&sgrid, 1)?;
    let sxi = DiscreteMeasure::empty(swindow.clone());
    let mut rng = rng_stream(params.seed, 21);
    let z_rep = estimate_partition_function(&swindow, &sxi, &step, &levy, params.n_samples / 5, &mut rng)?;
    outcomes.push(CheckOutcome::honest(CheckReport {
        name: "partition_repulsive_at_most_one".into(),
        lhs: z_rep.clone(),
        rhs: RhsValue::Exact(1.0),
        z_score: z_score(z_rep.mean - 1.0, z_rep.stderr),
        threshold: 3.0,
        bias_budget: 0.0,
        pass: z_rep.mean <= 1.0 + 3.0 * z_rep.stderr && z_rep.mean > 0.0,
        detail: "one-sided: nonnegative potential forces Z ≤ 1".into(),
    }));

    // Series oracle on a tiny window (ν ≈ 0.1).
    let oracle_levy = LevySpec::gamma(params.theta, 1e-3)?;
    let vol = 0.1 / oracle_levy.truncated_mass()?;
    let tiny = Window::new_box(vec![0.0], vec![vol])?;
    let (z_oracle, tail) = partition_series_oracle(&oracle_levy, &tiny, 1.0)?;
    let mut rng = rng_stream(params.seed, 22);
    let z_mc = estimate_partition_function(&tiny, &DiscreteMeasure::empty(tiny.clone()), &step, &oracle_levy, params.n_samples / 2, &mut rng)?;
    let se = z_mc.stderr;
    outcomes.push(CheckOutcome::honest(CheckReport::two_sided(
        "partition_series_oracle",
        z_mc,
        RhsValue::Exact(z_oracle),
        se,
        3.0,
        tail + 1e-3,
        format!("truncated series over ≤4 atoms, tail ≤ {tail:.2e}"),
    )));

    // Free-case equivalence panel + count law.
    let mut eq_cfg = single_cube_config(params, PotentialSpec::free(1, 1.0)?)?;
    eq_cfg.window = Window::centered_block(&CubeGrid::new(1, 1.0, 0.0)?, 2)?;
    eq_cfg.boundary = DiscreteMeasure::empty(eq_cfg.window.clone());
    eq_cfg.n_steps = params.chain_steps * 2;
    eq_cfg.burn_in = eq_cfg.n_steps / 5;
    eq_cfg.thinning = 25;
    for report in free_equivalence_checks(&eq_cfg, params.n_samples / 2)? {
        outcomes.push(CheckOutcome::honest(report));
    }

    // Importance-sampling agreement on a single cube with a step potential.
    let mut is_cfg = single_cube_config(params, PotentialSpec::step(1, 1.0, 1.0)?)?;
    is_cfg.thinning = 20;
    for report in importance_sampling_checks(&is_cfg, params.n_samples / 2)? {
        outcomes.push(CheckOutcome::honest(report));
    }

    // Markov consistency: 4-cube window against 1-cube resampling.
    let cons_grid = CubeGrid::new(1, 1.0, 1.0)?;
    let small = Window::from_cubes(&cons_grid, [CubeIndex(vec![0])])?;
    let big = Window::from_cubes(
        &cons_grid,
        [CubeIndex(vec![-1]), CubeIndex(vec![0]), CubeIndex(vec![1]), CubeIndex(vec![2])],
    )?;
    let mut cons_cfg = single_cube_config(params, PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0)?)?;
    cons_cfg.n_steps = (params.chain_steps / 2).max(20_000);
    cons_cfg.burn_in = cons_cfg.n_steps / 5;
    cons_cfg.thinning = ((cons_cfg.n_steps - cons_cfg.burn_in) / 400).max(1);
    let cons_xi = DiscreteMeasure::empty(big.clone());
    let report = consistency_check(&small, &big, &cons_xi, &cons_cfg, 4_000, 1.0)?;
    for f in &report.functionals {
        outcomes.push(CheckOutcome::honest(CheckReport {
            name: format!("consistency_{}", f.name),
            lhs: f.direct.clone(),
            rhs: RhsValue::Estimate(f.resampled.clone()),
            z_score: f.z,
            threshold: 4.0,
            bias_budget: 0.0,
            pass: f.z.abs() <= 4.0,
            detail: "direct big-window sampling vs inner-window resampling".into(),
        }));
    }

    // GNZ with the literal-increment weight on a single cube.
    let gnz_cfg = single_cube_config(params, PotentialSpec::step(1, 1.0, 1.0)?)?;
    let (gnz_samples, _) = run_specification(&gnz_cfg)?;
    let mut rng = rng_stream(params.seed, 23);
    outcomes.push(CheckOutcome::honest(gnz_check(
        &gnz_samples,
        &gnz_cfg,
        &MarkedFunctional::indicator(&gnz_cfg.window.clone()),
        GnzWeightMode::LiteralIncrement,
        4.0,
        &mut rng,
    )?));

    Ok(outcomes)
}

fn bounds_outcomes(params: &SuiteParams) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    let spec = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0)?;
    let grid = CubeGrid::new(1, 1.0, 1.0)?;
    let window = Window::centered_block(&grid, 4)?;
    let levy = params.chain_levy()?;

    outcomes.push(CheckOutcome::honest(stability_sweep_check(
        &spec,
        &levy,
        &window,
        10_000,
        params.seed,
    )?));

    // Single-cube chain with a mild boundary for the moment bounds.
    let cube = CubeIndex(vec![0]);
    let cube_window = Window::from_cubes(&grid, [cube.clone()])?;
    let boundary = DiscreteMeasure::with_bounding_window(
        1,
        vec![crate::measure::Atom::new(vec![1.2], 0.5)],
    )?;
    let mut cfg = ChainConfig::new(levy, spec, cube_window, boundary);
    cfg.seed = params.seed;
    cfg.n_steps = params.chain_steps;
    cfg.burn_in = params.chain_steps / 5;
    cfg.thinning = 10;
    let (samples, _) = run_specification(&cfg)?;

    let lambda0 = cfg.potential.repulsion_a() - cfg.potential.interaction_parameter() * cfg.potential.lower_bound_b();
    for frac in [0.25, 0.5, 1.0] {
        outcomes.push(CheckOutcome::honest(exp_moment_check(&samples, &cfg, frac * lambda0, &cube)?));
    }
    outcomes.push(CheckOutcome::honest(one_point_moment_check(&samples, &cfg, lambda0, &cube, 1.0)?));

    Ok(outcomes)
}

fn negative_control_outcomes(params: &SuiteParams) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    let levy = params.levy()?;
    let unit = Window::new_box(vec![0.0], vec![1.0])?;

    // Wrong intensity on the Mecke right-hand side: θ/2 must be detected.
    let wrong = LevySpec::gamma(params.theta / 2.0, params.trunc)?;
    let mut rng = rng_stream(params.seed, 30);
    let mut report = mecke_check(
        &levy,
        &unit,
        &MarkedFunctional::indicator(&unit),
        params.n_samples,
        4.0,
        &mut rng,
        Some(&wrong),
        None,
    )?;
    report.name = "control_mecke_wrong_intensity".into();
    outcomes.push(CheckOutcome::control(report));

    // Unweighted GNZ under a strong repulsive potential.
    let gnz_cfg = single_cube_config(params, PotentialSpec::step(1, 3.0, 1.0)?)?;
    let (samples, _) = run_specification(&gnz_cfg)?;
    let mut rng = rng_stream(params.seed, 31);
    let mut report = gnz_check(
        &samples,
        &gnz_cfg,
        &MarkedFunctional::indicator(&gnz_cfg.window.clone()),
        GnzWeightMode::Unweighted,
        4.0,
        &mut rng,
    )?;
    report.name = "control_gnz_unweighted".into();
    outcomes.push(CheckOutcome::control(report));

    // Inner kernel with doubled energy must break consistency.
    let cons_grid = CubeGrid::new(1, 1.0, 1.0)?;
    let small = Window::from_cubes(&cons_grid, [CubeIndex(vec![0])])?;
    let big = Window::from_cubes(
        &cons_grid,
        [CubeIndex(vec![-1]), CubeIndex(vec![0]), CubeIndex(vec![1]), CubeIndex(vec![2])],
    )?;
    let mut cons_cfg = single_cube_config(params, PotentialSpec::step(1, 4.0, 1.0)?)?;
    cons_cfg.n_steps = (params.chain_steps / 2).max(20_000);
    cons_cfg.burn_in = cons_cfg.n_steps / 5;
    cons_cfg.thinning = ((cons_cfg.n_steps - cons_cfg.burn_in) / 400).max(1);
    let cons_xi = DiscreteMeasure::empty(big.clone());
    let cons = consistency_check(&small, &big, &cons_xi, &cons_cfg, 4_000, 2.0)?;
    let worst = cons
        .functionals
        .iter()
        .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
        .expect("panel is nonempty");
    outcomes.push(CheckOutcome::control(CheckReport {
        name: "control_consistency_scaled_energy".into(),
        lhs: worst.direct.clone(),
        rhs: RhsValue::Estimate(worst.resampled.clone()),
        z_score: worst.z,
        threshold: 4.0,
        bias_budget: 0.0,
        pass: cons.pass,
        detail: format!("inner Hamiltonian doubled; worst functional {}", worst.name),
    }));

    Ok(outcomes)
}
