//! Discrete measures η = Σ_i s_i δ_{x_i} with positive marks and distinct
//! positions, and their marked-configuration representation.
//!
//! Measures are kept in a canonical form (atoms sorted lexicographically by
//! position), so equality is bit-exact and dumps round-trip identically.

use crate::error::Error;
use crate::lattice::{CubeGrid, CubeIndex, Window};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One weighted atom s δ_x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: Vec<f64>,
    pub mark: f64,
}

impl Atom {
    pub fn new(position: Vec<f64>, mark: f64) -> Self {
        Atom { position, mark }
    }
}

/// A marked point (s, x) of the underlying Poisson configuration on
/// (0,∞) × R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub mark: f64,
    pub position: Vec<f64>,
}

/// Finite discrete measure on a window, in canonical atom order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    window: Window,
    atoms: Vec<Atom>,
}

fn position_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

impl DiscreteMeasure {
    /// Validate and canonicalize: marks finite and > 0, positions finite,
    /// inside the window, pairwise distinct.
    pub fn new(window: Window, mut atoms: Vec<Atom>) -> Result<Self> {
        let dim = window.dim();
        for a in &atoms {
            if a.position.len() != dim {
                return Err(Error::invalid(format!(
                    "atom dimension {} does not match window dimension {dim}",
                    a.position.len()
                )));
            }
            if !a.position.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid("atom position must be finite"));
            }
            if !(a.mark.is_finite() && a.mark > 0.0) {
                return Err(Error::invalid(format!("atom mark must be finite and positive, got {}", a.mark)));
            }
            if !window.contains(&a.position) {
                return Err(Error::invalid(format!("atom position {:?} lies outside the window", a.position)));
            }
        }
        atoms.sort_unstable_by(|a, b| position_cmp(&a.position, &b.position));
        for pair in atoms.windows(2) {
            if position_cmp(&pair[0].position, &pair[1].position) == std::cmp::Ordering::Equal {
                return Err(Error::invalid(format!(
                    "duplicate atom position {:?}: discrete measures need distinct locations",
                    pair[0].position
                )));
            }
        }
        Ok(DiscreteMeasure { window, atoms })
    }

    pub fn empty(window: Window) -> Self {
        DiscreteMeasure { window, atoms: Vec::new() }
    }

    /// Wrap loose atoms (e.g. boundary data) in a bounding-box window.
    pub fn with_bounding_window(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            let window = Window::new_box(vec![0.0; dim], vec![1.0; dim])?;
            return Ok(DiscreteMeasure::empty(window));
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for a in &atoms {
            if a.position.len() != dim {
                return Err(Error::invalid("atom dimension mismatch"));
            }
            for (i, &c) in a.position.iter().enumerate() {
                if !c.is_finite() {
                    return Err(Error::invalid("atom position must be finite"));
                }
                lo[i] = lo[i].min(c);
                hi[i] = hi[i].max(c);
            }
        }
        // Half-open box: nudge the upper face so max-coordinate atoms stay inside.
        let hi: Vec<f64> = hi
            .iter()
            .map(|&h| {
                let bumped = h + 1e-9 * h.abs().max(1.0);
                if bumped > h {
                    bumped
                } else {
                    h + f64::MIN_POSITIVE
                }
            })
            .collect();
        let window = Window::new_box(lo, hi)?;
        DiscreteMeasure::new(window, atoms)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Total mass η(Δ) of the measure on its own window.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mark).sum()
    }

    /// Mass carried inside an arbitrary region η(B).
    pub fn mass_in(&self, region: &Window) -> f64 {
        self.atoms.iter().filter(|a| region.contains(&a.position)).map(|a| a.mark).sum()
    }

    /// Number of atoms inside a region.
    pub fn count_in(&self, region: &Window) -> usize {
        self.atoms.iter().filter(|a| region.contains(&a.position)).count()
    }

    /// Mass η(Q_k) in a single cube.
    pub fn mass_in_cube(&self, grid: &CubeGrid, k: &CubeIndex) -> f64 {
        self.atoms.iter().filter(|a| grid.cube_index(&a.position) == *k).map(|a| a.mark).sum()
    }

    /// Masses per occupied cube.
    pub fn cube_masses(&self, grid: &CubeGrid) -> HashMap<CubeIndex, f64> {
        let mut out: HashMap<CubeIndex, f64> = HashMap::new();
        for a in &self.atoms {
            *out.entry(grid.cube_index(&a.position)).or_insert(0.0) += a.mark;
        }
        out
    }

    pub fn max_mark(&self) -> f64 {
        self.atoms.iter().map(|a| a.mark).fold(0.0, f64::max)
    }

    /// Exponentially weighted tail norm M_α(η) = (Σ_k η(Q_k)² e^{-α|k|})^{1/2},
    /// |k| the Euclidean length of the cube label.
    pub fn tempered_norm(&self, grid: &CubeGrid, alpha: f64) -> f64 {
        assert!(alpha > 0.0, "tempered norm needs α > 0");
        self.cube_masses(grid)
            .iter()
            .map(|(k, &m)| m * m * (-alpha * k.norm()).exp())
            .sum::<f64>()
            .sqrt()
    }

    /// Restriction η_B: atoms inside `region`, re-windowed to it.
    pub fn restricted_to(&self, region: &Window) -> DiscreteMeasure {
        let atoms: Vec<Atom> =
            self.atoms.iter().filter(|a| region.contains(&a.position)).cloned().collect();
        DiscreteMeasure { window: region.clone(), atoms }
    }

    /// Atoms outside `region`, keeping the original window for bookkeeping.
    pub fn outside(&self, region: &Window) -> Vec<Atom> {
        self.atoms.iter().filter(|a| !region.contains(&a.position)).cloned().collect()
    }

    /// Marked-configuration image {(s_x, x)} of the measure.
    pub fn to_marked(&self) -> Vec<MarkedPoint> {
        self.atoms.iter().map(|a| MarkedPoint { mark: a.mark, position: a.position.clone() }).collect()
    }

    /// Inverse of `to_marked`: rebuilds the measure Σ s δ_x from marked points.
    pub fn from_marked(window: Window, points: Vec<MarkedPoint>) -> Result<Self> {
        let mut sorted: Vec<&MarkedPoint> = points.iter().collect();
        sorted.sort_unstable_by(|a, b| position_cmp(&a.position, &b.position));
        for pair in sorted.windows(2) {
            if position_cmp(&pair[0].position, &pair[1].position) == std::cmp::Ordering::Equal
                && pair[0].mark != pair[1].mark
            {
                return Err(Error::invalid(format!(
                    "pinpointing violation: position {:?} carries marks {} and {}",
                    pair[0].position, pair[0].mark, pair[1].mark
                )));
            }
        }
        let atoms = points.into_iter().map(|p| Atom { position: p.position, mark: p.mark }).collect();
        DiscreteMeasure::new(window, atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_window() -> Window {
        Window::new_box(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_atoms() {
        let w = unit_window();
        assert!(DiscreteMeasure::new(w.clone(), vec![Atom::new(vec![0.5], 0.0)]).is_err());
        assert!(DiscreteMeasure::new(w.clone(), vec![Atom::new(vec![0.5], -1.0)]).is_err());
        assert!(DiscreteMeasure::new(w.clone(), vec![Atom::new(vec![0.5], f64::NAN)]).is_err());
        assert!(DiscreteMeasure::new(w.clone(), vec![Atom::new(vec![1.5], 1.0)]).is_err());
        assert!(DiscreteMeasure::new(
            w,
            vec![Atom::new(vec![0.5], 1.0), Atom::new(vec![0.5], 2.0)]
        )
        .is_err());
    }

    #[test]
    fn canonical_order_is_position_lexicographic() {
        let w = Window::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let m = DiscreteMeasure::new(
            w,
            vec![
                Atom::new(vec![0.7, 0.1], 1.0),
                Atom::new(vec![0.2, 0.9], 2.0),
                Atom::new(vec![0.2, 0.3], 3.0),
            ],
        )
        .unwrap();
        let xs: Vec<&[f64]> = m.atoms().iter().map(|a| a.position.as_slice()).collect();
        assert_eq!(xs, vec![&[0.2, 0.3][..], &[0.2, 0.9][..], &[0.7, 0.1][..]]);
    }

    #[test]
    fn masses_and_counts() {
        let w = Window::new_box(vec![0.0], vec![2.0]).unwrap();
        let m = DiscreteMeasure::new(
            w,
            vec![Atom::new(vec![0.25], 1.5), Atom::new(vec![1.25], 0.5)],
        )
        .unwrap();
        assert_relative_eq!(m.total_mass(), 2.0);
        let left = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        assert_relative_eq!(m.mass_in(&left), 1.5);
        assert_eq!(m.count_in(&left), 1);
        let r = m.restricted_to(&left);
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r.total_mass(), 1.5);
    }

    #[test]
    fn tempered_norm_examples() {
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let w = Window::new_box(vec![-0.5], vec![1.5]).unwrap();
        let empty = DiscreteMeasure::empty(w.clone());
        assert_eq!(empty.tempered_norm(&grid, 1.0), 0.0);

        let single = DiscreteMeasure::new(w.clone(), vec![Atom::new(vec![0.0], 0.7)]).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            assert_relative_eq!(single.tempered_norm(&grid, alpha), 0.7, max_relative = 1e-12);
        }

        // mass 1 in Q_0, mass 2 in Q_1 (|k| = 1), α = 1 → sqrt(1 + 4 e^{-1})
        let two = DiscreteMeasure::new(
            w,
            vec![Atom::new(vec![0.0], 1.0), Atom::new(vec![1.0], 2.0)],
        )
        .unwrap();
        let expect = (1.0 + 4.0 * (-1.0f64).exp()).sqrt();
        assert_relative_eq!(two.tempered_norm(&grid, 1.0), expect, max_relative = 1e-12);
        assert!((expect - 1.5721).abs() < 1e-4);
    }

    #[test]
    fn bounding_window_keeps_extreme_atoms() {
        let atoms = vec![Atom::new(vec![-3.0], 1.0), Atom::new(vec![7.5], 2.0)];
        let m = DiscreteMeasure::with_bounding_window(1, atoms).unwrap();
        assert_eq!(m.len(), 2);
        assert_relative_eq!(m.total_mass(), 3.0);
    }

    proptest! {
        #[test]
        fn marked_representation_round_trips(
            positions in proptest::collection::btree_set(0u32..10_000, 0..30),
            seed in 0u64..1_000,
        ) {
            let w = Window::new_box(vec![0.0], vec![1.0]).unwrap();
            let mut rng = crate::rng_stream(seed, 7);
            let atoms: Vec<Atom> = positions
                .iter()
                .map(|&p| Atom::new(vec![p as f64 / 10_000.0], rand::Rng::gen_range(&mut rng, 1e-9..5.0)))
                .collect();
            let m = DiscreteMeasure::new(w.clone(), atoms).unwrap();
            let marked = m.to_marked();
            let back = DiscreteMeasure::from_marked(w, marked).unwrap();
            prop_assert_eq!(m, back); // bit-exact round trip
        }

        #[test]
        fn tempered_norm_monotone_in_alpha(
            marks in proptest::collection::vec(0.01f64..3.0, 1..20),
            seed in 0u64..1_000,
        ) {
            let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
            let w = Window::new_box(vec![-10.0], vec![10.0]).unwrap();
            let mut rng = crate::rng_stream(seed, 8);
            let atoms: Vec<Atom> = marks
                .iter()
                .map(|&s| Atom::new(vec![rand::Rng::gen_range(&mut rng, -10.0..10.0)], s))
                .collect();
            match DiscreteMeasure::new(w, atoms) {
                Ok(m) => {
                    let (a, b, c) = (
                        m.tempered_norm(&grid, 0.5),
                        m.tempered_norm(&grid, 1.0),
                        m.tempered_norm(&grid, 2.0),
                    );
                    prop_assert!(a >= b && b >= c, "M_α must decrease in α: {a} {b} {c}");
                    prop_assert!(c > 0.0);
                }
                Err(_) => {} // duplicate random positions: fine to skip
            }
        }
    }
}
