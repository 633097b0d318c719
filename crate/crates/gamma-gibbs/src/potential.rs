//! Pair potentials and their certification.
//!
//! A usable potential must be symmetric, bounded, vanish beyond a finite
//! range R, have a finite attraction depth b = -inf(φ ∧ 0), and dominate that
//! attraction by short-range repulsion: A_δ := inf_{|x-y| ≤ δ} φ > 2 m b,
//! where m is the lattice interaction parameter for (d, R, δ).  Built-in
//! parametric families certify with exact analytic constants; user callables
//! get a heuristic numeric certificate from a deterministic quasi-random
//! sample of pairs.

use crate::error::{CertifyRejection, Error, PotentialClause};
use crate::lattice::interaction_parameter;
use crate::Result;
use std::sync::Arc;

/// Whether the energy's double integral over η ⊗ η keeps the diagonal,
/// i.e. whether each atom contributes a self-term φ(x,x)·s².
///
/// `Include` matches the quadratic cube-mass structure the stability bounds
/// rely on; `Exclude` makes the birth increment coincide with the bare
/// pair-sum weight used in the Georgii–Nguyen–Zessin identity.  The sampler
/// and every identity check must use the same convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    Include,
    Exclude,
}

#[derive(Clone)]
pub enum PotentialKind {
    /// A·1_{|x-y| ≤ radius}; purely repulsive, range = radius.
    Step { height: f64, radius: f64 },
    /// A on [0, δ], -b on (δ, R], 0 beyond.
    CoreShell { repulsion: f64, attraction: f64, delta: f64, range: f64 },
    /// User-supplied symmetric callable; constants certified numerically.
    Callable { f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync> },
    /// φ ≡ 0: the non-interacting reference.  Not certifiable (the repulsion
    /// condition is strict); carried separately so free-field chains can use
    /// the same machinery.
    Free,
}

impl std::fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::Step { height, radius } => {
                write!(f, "Step {{ height: {height}, radius: {radius} }}")
            }
            PotentialKind::CoreShell { repulsion, attraction, delta, range } => write!(
                f,
                "CoreShell {{ repulsion: {repulsion}, attraction: {attraction}, delta: {delta}, range: {range} }}"
            ),
            PotentialKind::Callable { .. } => write!(f, "Callable"),
            PotentialKind::Free => write!(f, "Free"),
        }
    }
}

/// A certified pair potential with its assumption constants.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    kind: PotentialKind,
    dim: usize,
    /// Interaction range R: φ(x,y) = 0 enforced whenever |x-y| > R.
    range: f64,
    /// Repulsion radius δ (also the cube diameter of the matched grid).
    delta: f64,
    sup_norm: f64,
    /// b = -inf(φ ∧ 0) ≥ 0 (or a certified upper bound for it).
    lower_bound_b: f64,
    /// A_δ = inf_{|x-y| ≤ δ} φ (or a certified lower bound for it).
    repulsion_a: f64,
    diagonal: DiagonalMode,
    /// True for certified potentials; false only for `Free`.
    certified: bool,
}

impl PotentialSpec {
    /// Step potential A·1_{|x-y| ≤ radius} with radius serving as both δ and R.
    pub fn step(dim: usize, height: f64, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("potential dimension must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("step radius must be positive, got {radius}")));
        }
        if !height.is_finite() {
            return Err(Error::certification_bounded(format!("step height {height} is not finite")));
        }
        let b = (-height).max(0.0);
        let a = height;
        let m = interaction_parameter(dim, radius, radius);
        check_repulsion(a, b, m)?;
        Ok(PotentialSpec {
            kind: PotentialKind::Step { height, radius },
            dim,
            range: radius,
            delta: radius,
            sup_norm: height.abs(),
            lower_bound_b: b,
            repulsion_a: a,
            diagonal: DiagonalMode::Include,
            certified: true,
        })
    }

    /// Core-shell potential: A on [0, δ], -b on (δ, R].  The declared
    /// attraction b certifies as the depth bound even when the shell is empty
    /// (δ = R), which only loosens the derived constants.
    pub fn core_shell(dim: usize, repulsion: f64, attraction: f64, delta: f64, range: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("potential dimension must be at least 1"));
        }
        if !(delta.is_finite() && delta > 0.0 && range.is_finite() && range >= delta) {
            return Err(Error::invalid(format!(
                "core-shell needs 0 < delta <= range, got delta = {delta}, range = {range}"
            )));
        }
        if !repulsion.is_finite() || !attraction.is_finite() {
            return Err(Error::certification_bounded("core-shell parameters must be finite".into()));
        }
        if attraction < 0.0 {
            return Err(Error::invalid(format!(
                "core-shell attraction depth must be >= 0 (it enters as -b), got {attraction}"
            )));
        }
        let m = interaction_parameter(dim, range, delta);
        check_repulsion(repulsion, attraction, m)?;
        Ok(PotentialSpec {
            kind: PotentialKind::CoreShell { repulsion, attraction, delta, range },
            dim,
            range,
            delta,
            sup_norm: repulsion.abs().max(attraction),
            lower_bound_b: attraction,
            repulsion_a: repulsion,
            diagonal: DiagonalMode::Include,
            certified: true,
        })
    }

    /// The non-interacting reference φ ≡ 0 (not certifiable; bypasses the
    /// repulsion condition by construction).
    pub fn free(dim: usize, delta: f64) -> Result<Self> {
        if dim == 0 || !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("free potential needs dim >= 1 and delta > 0"));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Free,
            dim,
            range: 0.0,
            delta,
            sup_norm: 0.0,
            lower_bound_b: 0.0,
            repulsion_a: 0.0,
            diagonal: DiagonalMode::Include,
            certified: false,
        })
    }

    /// Certify a user callable over a deterministic quasi-random pair grid:
    /// 10^5 pairs per clause (symmetry, finite range, boundedness, depth,
    /// short-range repulsion).  A heuristic certificate, not a proof — the
    /// sampled infima/suprema stand in for the true ones.
    ///
    /// Pairs are drawn with base points in `domain` (default: the centered
    /// box of side 4(R+δ)) and offsets spanning each clause's distance band.
    pub fn certify_callable(
        f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
        dim: usize,
        delta: f64,
        range: f64,
        domain: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("potential dimension must be at least 1"));
        }
        if !(delta.is_finite() && delta > 0.0 && range.is_finite() && range >= delta) {
            return Err(Error::invalid(format!(
                "certification needs 0 < delta <= range, got delta = {delta}, range = {range}"
            )));
        }
        let (lo, hi) = match domain {
            Some((lo, hi)) => {
                if lo.len() != dim || hi.len() != dim || lo.iter().zip(&hi).any(|(l, h)| l >= h) {
                    return Err(Error::invalid("certification domain must be a nonempty box of the right dimension"));
                }
                (lo, hi)
            }
            None => {
                let half = 2.0 * (range + delta);
                (vec![-half; dim], vec![half; dim])
            }
        };
        const PAIRS: usize = 100_000;
        let mut seq = KroneckerSequence::new(2 * dim + 1);
        let mut sup: f64 = 0.0;
        let mut inf_all = f64::INFINITY; // over |x-y| <= R
        let mut inf_core = f64::INFINITY; // over |x-y| <= δ
        let mut witness_core: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut witness_depth: Option<(Vec<f64>, Vec<f64>)> = None;

        // Clause bands as fractions of the pair distance: [0,δ], (δ,R], (R,2R].
        for clause in 0..3 {
            let (r_lo, r_hi) = match clause {
                0 => (0.0, delta),
                1 => (delta, range),
                _ => (range * (1.0 + 1e-9), 2.0 * range),
            };
            if r_hi <= r_lo {
                continue; // empty band (e.g. δ = R)
            }
            for _ in 0..PAIRS {
                let u = seq.next_point();
                let x: Vec<f64> = (0..dim).map(|i| lo[i] + (hi[i] - lo[i]) * u[i]).collect();
                // Offset: direction from the next d coordinates, length from the band.
                let mut dir: Vec<f64> = (0..dim).map(|i| 2.0 * u[dim + i] - 1.0).collect();
                let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    dir = vec![1.0; dim];
                }
                let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
                let r = r_lo + (r_hi - r_lo) * u[2 * dim];
                let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + di / norm * r).collect();

                let v = f(&x, &y);
                let w = f(&y, &x);
                if !v.is_finite() || !w.is_finite() {
                    return Err(Error::Certification(CertifyRejection {
                        clause: PotentialClause::Bounded,
                        witness: Some((x, y)),
                        detail: format!("φ evaluated to non-finite value {v}"),
                    }));
                }
                if (v - w).abs() > 1e-9 * v.abs().max(1.0) {
                    return Err(Error::Certification(CertifyRejection {
                        clause: PotentialClause::Symmetry,
                        witness: Some((x, y)),
                        detail: format!("φ(x,y) = {v} but φ(y,x) = {w}"),
                    }));
                }
                match clause {
                    2 => {
                        // Beyond the declared range φ must vanish.
                        if v.abs() > 1e-12 {
                            return Err(Error::Certification(CertifyRejection {
                                clause: PotentialClause::FiniteRange,
                                witness: Some((x, y)),
                                detail: format!("φ = {v} at distance {r} > declared range {range}"),
                            }));
                        }
                    }
                    _ => {
                        sup = sup.max(v.abs());
                        if v < inf_all {
                            inf_all = v;
                            witness_depth = Some((x.clone(), y.clone()));
                        }
                        if clause == 0 && v < inf_core {
                            inf_core = v;
                            witness_core = Some((x, y));
                        }
                    }
                }
            }
        }
        let b = (-inf_all.min(0.0)).max(0.0);
        let a = inf_core;
        if !b.is_finite() {
            return Err(Error::Certification(CertifyRejection {
                clause: PotentialClause::LowerBound,
                witness: witness_depth,
                detail: format!("estimated depth b = {b} is not finite"),
            }));
        }
        let m = interaction_parameter(dim, range, delta);
        if !(a > 2.0 * m * b) {
            return Err(Error::Certification(CertifyRejection {
                clause: PotentialClause::Repulsion,
                witness: witness_core,
                detail: format!("A_δ = {a} must exceed 2·m·b = {}", 2.0 * m * b),
            }));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Callable { f },
            dim,
            range,
            delta,
            sup_norm: sup,
            lower_bound_b: b,
            repulsion_a: a,
            diagonal: DiagonalMode::Include,
            certified: true,
        })
    }

    pub fn with_diagonal(mut self, mode: DiagonalMode) -> Self {
        self.diagonal = mode;
        self
    }

    /// The potential factor·φ, re-certified.  Scaling by a positive factor
    /// preserves the repulsion condition (both sides scale alike), so this
    /// succeeds for every certified spec; useful for misspecification
    /// controls that need a deliberately wrong energy.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!("scale factor must be positive, got {factor}")));
        }
        let scaled = match &self.kind {
            PotentialKind::Step { height, radius } => Self::step(self.dim, height * factor, *radius)?,
            PotentialKind::CoreShell { repulsion, attraction, delta, range } => {
                Self::core_shell(self.dim, repulsion * factor, attraction * factor, *delta, *range)?
            }
            PotentialKind::Callable { f } => {
                let inner = f.clone();
                Self::certify_callable(
                    Arc::new(move |x: &[f64], y: &[f64]| factor * inner(x, y)),
                    self.dim,
                    self.delta,
                    self.range,
                    None,
                )?
            }
            PotentialKind::Free => Self::free(self.dim, self.delta)?,
        };
        Ok(scaled.with_diagonal(self.diagonal))
    }

    /// Evaluate φ(x,y).  The finite-range clause is enforced here: beyond R
    /// the value is exactly 0.0, so energy locality is bit-exact for every
    /// kind, including callables.
    pub fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist_sq > self.range * self.range {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Step { height, .. } => *height,
            PotentialKind::CoreShell { repulsion, attraction, delta, .. } => {
                if dist_sq <= delta * delta {
                    *repulsion
                } else {
                    -*attraction
                }
            }
            PotentialKind::Callable { f } => f(x, y),
            PotentialKind::Free => 0.0,
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Attraction depth bound b.
    pub fn lower_bound_b(&self) -> f64 {
        self.lower_bound_b
    }

    /// Short-range repulsion level A_δ.
    pub fn repulsion_a(&self) -> f64 {
        self.repulsion_a
    }

    pub fn diagonal(&self) -> DiagonalMode {
        self.diagonal
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, PotentialKind::Free)
    }

    /// Interaction parameter m for this potential's (d, R, δ).
    pub fn interaction_parameter(&self) -> f64 {
        interaction_parameter(self.dim, self.range, self.delta)
    }
}

fn check_repulsion(a: f64, b: f64, m: f64) -> Result<()> {
    if !(a > 2.0 * m * b) {
        return Err(Error::Certification(CertifyRejection {
            clause: PotentialClause::Repulsion,
            witness: None,
            detail: format!("A_δ = {a} must exceed 2·m·b = {}", 2.0 * m * b),
        }));
    }
    Ok(())
}

impl Error {
    fn certification_bounded(detail: String) -> Self {
        Error::Certification(CertifyRejection { clause: PotentialClause::Bounded, witness: None, detail })
    }
}

/// Kronecker (R_k) low-discrepancy sequence on [0,1)^k based on the
/// generalized golden ratio; deterministic and well spread.
struct KroneckerSequence {
    alphas: Vec<f64>,
    state: Vec<f64>,
}

impl KroneckerSequence {
    fn new(k: usize) -> Self {
        // φ_k is the unique positive root of x^{k+1} = x + 1.
        let mut phi = 1.5f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (k as f64 + 1.0));
        }
        let alphas: Vec<f64> = (1..=k).map(|i| (1.0 / phi.powi(i as i32)) % 1.0).collect();
        KroneckerSequence { alphas, state: vec![0.5; k] }
    }

    fn next_point(&mut self) -> Vec<f64> {
        for (s, a) in self.state.iter_mut().zip(&self.alphas) {
            *s = (*s + a) % 1.0;
        }
        self.state.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_family_certifies_analytically() {
        let spec = PotentialSpec::step(1, 10.0, 1.0).unwrap();
        assert_relative_eq!(spec.repulsion_a(), 10.0);
        assert_eq!(spec.lower_bound_b(), 0.0);
        assert_relative_eq!(spec.sup_norm(), 10.0);
        assert!(spec.is_certified());
        assert_relative_eq!(spec.phi(&[0.0], &[0.7]), 10.0);
        assert_eq!(spec.phi(&[0.0], &[1.2]), 0.0);
    }

    #[test]
    fn zero_potential_fails_strict_repulsion() {
        // A_δ = 0, b = 0: the strict inequality 0 > 0 fails.
        let err = PotentialSpec::certify_callable(
            Arc::new(|_: &[f64], _: &[f64]| 0.0),
            1,
            1.0,
            1.0,
            None,
        )
        .unwrap_err();
        match err {
            Error::Certification(rej) => assert_eq!(rej.clause, PotentialClause::Repulsion),
            other => panic!("expected certification rejection, got {other}"),
        }
    }

    #[test]
    fn core_shell_certification_margins() {
        // d=1, δ=R=1 → m = 4: A = 10 > 2·4·1 = 8 certifies.
        let ok = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(ok.repulsion_a(), 10.0);
        assert_relative_eq!(ok.lower_bound_b(), 1.0);
        // d=1, δ=1, R=2 → m = 6: A = 10 ≤ 2·6·1 = 12 rejected.
        let err = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 2.0).unwrap_err();
        match err {
            Error::Certification(rej) => assert_eq!(rej.clause, PotentialClause::Repulsion),
            other => panic!("expected certification rejection, got {other}"),
        }
        // Same range with shallower attraction passes: 10 > 2·6·0.5 = 6.
        let ok2 = PotentialSpec::core_shell(1, 10.0, 0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(ok2.phi(&[0.0], &[0.5]), 10.0);
        assert_relative_eq!(ok2.phi(&[0.0], &[1.5]), -0.5);
        assert_eq!(ok2.phi(&[0.0], &[2.5]), 0.0);
    }

    #[test]
    fn callable_certificate_close_to_analytic() {
        // Callable clone of core-shell A=10, b=0.5, δ=1, R=2 in d=1.
        let f = Arc::new(|x: &[f64], y: &[f64]| {
            let d = (x[0] - y[0]).abs();
            if d <= 1.0 {
                10.0
            } else if d <= 2.0 {
                -0.5
            } else {
                0.0
            }
        });
        let spec = PotentialSpec::certify_callable(f, 1, 1.0, 2.0, None).unwrap();
        assert_relative_eq!(spec.repulsion_a(), 10.0, max_relative = 1e-9);
        assert_relative_eq!(spec.lower_bound_b(), 0.5, max_relative = 1e-9);
        assert_relative_eq!(spec.sup_norm(), 10.0, max_relative = 1e-9);
    }

    #[test]
    fn callable_range_violation_names_clause_and_witness() {
        let f = Arc::new(|x: &[f64], y: &[f64]| {
            let d = (x[0] - y[0]).abs();
            if d <= 3.0 {
                5.0
            } else {
                0.0
            }
        });
        // Declared range 2 but φ is nonzero out to 3.
        let err = PotentialSpec::certify_callable(f, 1, 1.0, 2.0, None).unwrap_err();
        match err {
            Error::Certification(rej) => {
                assert_eq!(rej.clause, PotentialClause::FiniteRange);
                assert!(rej.witness.is_some());
            }
            other => panic!("expected certification rejection, got {other}"),
        }
    }

    #[test]
    fn asymmetric_callable_rejected() {
        let f = Arc::new(|x: &[f64], y: &[f64]| if x[0] < y[0] { 5.0 } else { 4.0 });
        let err = PotentialSpec::certify_callable(f, 1, 1.0, 1.0, None).unwrap_err();
        match err {
            Error::Certification(rej) => assert_eq!(rej.clause, PotentialClause::Symmetry),
            other => panic!("expected certification rejection, got {other}"),
        }
    }

    #[test]
    fn range_enforcement_is_exact_for_callables() {
        // Callable that misbehaves beyond R would break locality; evaluation
        // clamps it to zero exactly at distance > R.
        let f = Arc::new(|x: &[f64], y: &[f64]| {
            let d = (x[0] - y[0]).abs();
            if d <= 1.0 {
                10.0
            } else {
                0.0
            }
        });
        let spec = PotentialSpec::certify_callable(f, 1, 1.0, 1.0, None).unwrap();
        assert_eq!(spec.phi(&[0.0], &[5.0]), 0.0);
    }

    #[test]
    fn free_potential_is_uncertified_zero() {
        let free = PotentialSpec::free(2, 1.0).unwrap();
        assert!(!free.is_certified());
        assert!(free.is_free());
        assert_eq!(free.phi(&[0.0, 0.0], &[0.1, 0.1]), 0.0);
        assert_eq!(free.sup_norm(), 0.0);
    }

    #[test]
    fn kronecker_sequence_spreads_evenly() {
        let mut seq = KroneckerSequence::new(3);
        let n = 10_000;
        let mut mins = vec![1.0f64; 3];
        let mut maxs = vec![0.0f64; 3];
        let mut means = vec![0.0f64; 3];
        for _ in 0..n {
            let p = seq.next_point();
            for i in 0..3 {
                mins[i] = mins[i].min(p[i]);
                maxs[i] = maxs[i].max(p[i]);
                means[i] += p[i] / n as f64;
            }
        }
        for i in 0..3 {
            assert!(mins[i] < 0.01 && maxs[i] > 0.99, "axis {i} not covered");
            assert!((means[i] - 0.5).abs() < 0.01, "axis {i} mean {}", means[i]);
        }
    }
}
