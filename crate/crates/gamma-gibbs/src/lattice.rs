//! Cube partition of R^d subordinate to an interaction range.
//!
//! R^d is tiled by half-open cubes Q_k = Π_i [g k_i - g/2, g k_i + g/2),
//! k ∈ Z^d, with edge g = δ/√d so that diam Q_k = δ.  Two cubes interact
//! when their minimal (box) distance is at most the interaction range R;
//! the number of such neighbors of any fixed cube is bounded by the
//! interaction parameter m = ν_d d^{d/2} (R/δ + 1)^d, ν_d the volume of the
//! d-dimensional unit ball.

use crate::error::Error;
use crate::special::ln_gamma;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Integer label of a cube in the partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CubeIndex(pub Vec<i64>);

impl CubeIndex {
    /// Euclidean length |k| of the label.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
    }
}

/// Volume ν_d of the unit ball in R^d.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        d => {
            let d = d as f64;
            ((d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0)).exp()
        }
    }
}

/// Cube partition with diameter `delta`, tuned to interaction range `range`.
#[derive(Debug, Clone)]
pub struct CubeGrid {
    dim: usize,
    delta: f64,
    range: f64,
    edge: f64,
    /// Nonzero offsets j with min-distance(Q_0, Q_j) ≤ range, sorted.
    neighbor_offsets: Vec<Vec<i64>>,
}

impl CubeGrid {
    pub fn new(dim: usize, delta: f64, range: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("grid dimension must be at least 1"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!("cube diameter must be finite and positive, got {delta}")));
        }
        if !(range.is_finite() && range >= 0.0) {
            return Err(Error::invalid(format!("interaction range must be finite and nonnegative, got {range}")));
        }
        let edge = delta / (dim as f64).sqrt();
        let per_axis = (range / edge * (1.0 + 1e-9)).floor() as i64 + 1;
        let width = 2 * per_axis + 1;
        if (width as f64).powi(dim as i32) > 2e7 {
            return Err(Error::invalid(format!(
                "neighbor enumeration too large: ({width})^{dim} offsets; increase delta or reduce range"
            )));
        }
        let mut grid = CubeGrid { dim, delta, range, edge, neighbor_offsets: Vec::new() };
        let mut offsets = Vec::new();
        let mut current = vec![-per_axis; dim];
        loop {
            if current.iter().any(|&c| c != 0) && grid.offset_gap_sq(&current) <= range * range * (1.0 + 1e-9) {
                offsets.push(current.clone());
            }
            // Odometer increment over the box [-per_axis, per_axis]^d.
            let mut axis = 0;
            loop {
                if axis == dim {
                    offsets.sort_unstable();
                    grid.neighbor_offsets = offsets;
                    return Ok(grid);
                }
                current[axis] += 1;
                if current[axis] <= per_axis {
                    break;
                }
                current[axis] = -per_axis;
                axis += 1;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cube diameter δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Interaction range R the neighbor structure is built for.
    pub fn range(&self) -> f64 {
        self.range
    }

    /// Cube edge g = δ/√d.
    pub fn edge(&self) -> f64 {
        self.edge
    }

    /// Volume g^d of one cube.
    pub fn cube_volume(&self) -> f64 {
        self.edge.powi(self.dim as i32)
    }

    /// Label of the cube containing `x`: k_i = ⌊(x_i + g/2)/g⌋.
    pub fn cube_index(&self, x: &[f64]) -> CubeIndex {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        CubeIndex(x.iter().map(|&xi| ((xi + self.edge / 2.0) / self.edge).floor() as i64).collect())
    }

    /// Center g·k of cube `k`.
    pub fn cube_center(&self, k: &CubeIndex) -> Vec<f64> {
        k.0.iter().map(|&c| c as f64 * self.edge).collect()
    }

    /// Half-open bounds [lo_i, hi_i) of cube `k`.
    pub fn cube_bounds(&self, k: &CubeIndex) -> (Vec<f64>, Vec<f64>) {
        let lo: Vec<f64> = k.0.iter().map(|&c| c as f64 * self.edge - self.edge / 2.0).collect();
        let hi: Vec<f64> = k.0.iter().map(|&c| c as f64 * self.edge + self.edge / 2.0).collect();
        (lo, hi)
    }

    /// Squared minimal distance between Q_0 and Q_j for offset j:
    /// each axis contributes g·max(0, |j_i| - 1).
    fn offset_gap_sq(&self, offset: &[i64]) -> f64 {
        offset
            .iter()
            .map(|&j| {
                let gap = self.edge * ((j.abs() - 1).max(0) as f64);
                gap * gap
            })
            .sum()
    }

    /// Minimal distance between the closures of Q_k and Q_l.
    pub fn cube_distance(&self, k: &CubeIndex, l: &CubeIndex) -> f64 {
        let diff: Vec<i64> = k.0.iter().zip(&l.0).map(|(a, b)| a - b).collect();
        self.offset_gap_sq(&diff).sqrt()
    }

    /// Offsets of the cubes within interaction range of any fixed cube
    /// (the cube itself excluded).
    pub fn neighbor_offsets(&self) -> &[Vec<i64>] {
        &self.neighbor_offsets
    }

    /// Labels of the cubes within interaction range of Q_k, excluding k.
    pub fn neighbor_indices(&self, k: &CubeIndex) -> Vec<CubeIndex> {
        assert_eq!(k.0.len(), self.dim);
        self.neighbor_offsets
            .iter()
            .map(|off| CubeIndex(off.iter().zip(&k.0).map(|(o, c)| o + c).collect()))
            .collect()
    }

    /// Interaction parameter m = ν_d d^{d/2} (R/δ + 1)^d, an upper bound for
    /// the neighbor count |∂k| that depends only on (d, R, δ).
    pub fn interaction_parameter(&self) -> f64 {
        interaction_parameter(self.dim, self.range, self.delta)
    }
}

/// m = ν_d d^{d/2} (R/δ + 1)^d.
pub fn interaction_parameter(dim: usize, range: f64, delta: f64) -> f64 {
    let d = dim as f64;
    unit_ball_volume(dim) * d.powf(d / 2.0) * (range / delta + 1.0).powi(dim as i32)
}

/// Bounded observation window: either an axis-aligned half-open box or a
/// finite union of grid cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Window {
    /// Π_i [lo_i, hi_i)
    #[serde(rename = "box")]
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Union of cubes of a grid with the given edge; indices sorted, distinct.
    #[serde(rename = "cubes")]
    Cubes { edge: f64, indices: Vec<CubeIndex> },
}

impl Window {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("window box needs matching nonempty lo/hi"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid(format!("window box needs lo < hi per axis, got [{l}, {h})")));
            }
        }
        Ok(Window::Box { lo, hi })
    }

    pub fn from_cubes(grid: &CubeGrid, indices: impl IntoIterator<Item = CubeIndex>) -> Result<Self> {
        let mut v: Vec<CubeIndex> = indices.into_iter().collect();
        if v.is_empty() {
            return Err(Error::invalid("cube window needs at least one cube"));
        }
        for k in &v {
            if k.0.len() != grid.dim() {
                return Err(Error::invalid("cube index dimension mismatch"));
            }
        }
        v.sort_unstable();
        v.dedup();
        Ok(Window::Cubes { edge: grid.edge(), indices: v })
    }

    /// Block of `per_axis`^d cubes centered at the origin
    /// (labels -⌊n/2⌋ … ⌊(n-1)/2⌋ per axis).
    pub fn centered_block(grid: &CubeGrid, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::invalid("centered block needs per_axis >= 1"));
        }
        let n = per_axis as i64;
        let lo = -(n / 2);
        let hi = (n - 1) / 2;
        let dim = grid.dim();
        let mut indices = Vec::new();
        let mut current = vec![lo; dim];
        'outer: loop {
            indices.push(CubeIndex(current.clone()));
            let mut axis = 0;
            loop {
                if axis == dim {
                    break 'outer;
                }
                current[axis] += 1;
                if current[axis] <= hi {
                    break;
                }
                current[axis] = lo;
                axis += 1;
            }
        }
        Window::from_cubes(grid, indices)
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Box { lo, .. } => lo.len(),
            Window::Cubes { indices, .. } => indices[0].0.len(),
        }
    }

    /// Lebesgue volume m(Δ).
    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Window::Cubes { edge, indices } => {
                edge.powi(indices[0].0.len() as i32) * indices.len() as f64
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Window::Box { lo, hi } => {
                x.len() == lo.len()
                    && x.iter().zip(lo.iter().zip(hi)).all(|(xi, (l, h))| *l <= *xi && *xi < *h)
            }
            Window::Cubes { edge, indices } => {
                if x.len() != indices[0].0.len() {
                    return false;
                }
                let k = CubeIndex(
                    x.iter().map(|&xi| ((xi + edge / 2.0) / edge).floor() as i64).collect(),
                );
                indices.binary_search(&k).is_ok()
            }
        }
    }

    /// Smallest closed box containing the window.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Window::Box { lo, hi } => (lo.clone(), hi.clone()),
            Window::Cubes { edge, indices } => {
                let dim = indices[0].0.len();
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for k in indices {
                    for (i, &c) in k.0.iter().enumerate() {
                        lo[i] = lo[i].min(c as f64 * edge - edge / 2.0);
                        hi[i] = hi[i].max(c as f64 * edge + edge / 2.0);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Uniform sample from the window.
    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Window::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(&l, &h)| rng.gen_range(l..h)).collect()
            }
            Window::Cubes { edge, indices } => {
                let k = &indices[rng.gen_range(0..indices.len())];
                k.0.iter()
                    .map(|&c| {
                        let lo = c as f64 * edge - edge / 2.0;
                        rng.gen_range(lo..lo + edge)
                    })
                    .collect()
            }
        }
    }

    /// Distance from `x` to the closure of the window.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Window::Box { lo, hi } => box_distance(x, lo, hi),
            Window::Cubes { edge, indices } => {
                let mut best = f64::INFINITY;
                for k in indices {
                    let lo: Vec<f64> = k.0.iter().map(|&c| c as f64 * edge - edge / 2.0).collect();
                    let hi: Vec<f64> = k.0.iter().map(|&c| c as f64 * edge + edge / 2.0).collect();
                    best = best.min(box_distance(x, &lo, &hi));
                    if best == 0.0 {
                        break;
                    }
                }
                best
            }
        }
    }
}

fn box_distance(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(xi, (l, h))| {
            let d = (l - xi).max(xi - h).max(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Cube-index bookkeeping for a window: the cubes meeting it, and the halo of
/// cubes whose region can carry boundary atoms within interaction range.
#[derive(Debug, Clone)]
pub struct IndexHull {
    /// Sorted labels of cubes with Q_k ∩ Δ ≠ ∅.
    pub window_cubes: Vec<CubeIndex>,
    /// Sorted labels of window cubes together with all their neighbors.
    /// A point x belongs to the boundary halo iff its cube is listed here
    /// and x ∉ Δ; every point of Δ^c within distance R of Δ is covered.
    pub halo_cubes: Vec<CubeIndex>,
}

impl IndexHull {
    pub fn contains_window_cube(&self, k: &CubeIndex) -> bool {
        self.window_cubes.binary_search(k).is_ok()
    }

    pub fn contains_halo_cube(&self, k: &CubeIndex) -> bool {
        self.halo_cubes.binary_search(k).is_ok()
    }
}

/// Compute the window-cube list K_Δ and its interaction halo for `window`.
///
/// For a cube-union window the edge must match the grid; for a box window the
/// cube list consists of every cube whose interior meets the half-open box.
pub fn index_hull(window: &Window, grid: &CubeGrid) -> Result<IndexHull> {
    if window.dim() != grid.dim() {
        return Err(Error::invalid("window and grid dimension mismatch"));
    }
    let window_cubes: Vec<CubeIndex> = match window {
        Window::Cubes { edge, indices } => {
            if (edge - grid.edge()).abs() > 1e-12 * grid.edge() {
                return Err(Error::invalid(format!(
                    "cube window edge {edge} does not match grid edge {}",
                    grid.edge()
                )));
            }
            indices.clone()
        }
        Window::Box { lo, hi } => {
            let g = grid.edge();
            let dim = grid.dim();
            // Per-axis label range of cubes meeting [lo, hi).
            let mut lo_k = Vec::with_capacity(dim);
            let mut hi_k = Vec::with_capacity(dim);
            for i in 0..dim {
                let a = ((lo[i] + g / 2.0) / g).floor() as i64;
                let mut b = ((hi[i] + g / 2.0) / g).floor() as i64;
                // If hi sits exactly on a cube's lower face, that cube is disjoint
                // from the half-open box.
                if b as f64 * g - g / 2.0 >= hi[i] {
                    b -= 1;
                }
                if b < a {
                    return Err(Error::invalid("window box thinner than the grid resolution produced an empty cube range"));
                }
                lo_k.push(a);
                hi_k.push(b);
            }
            let count: f64 = lo_k
                .iter()
                .zip(&hi_k)
                .map(|(a, b)| (b - a + 1) as f64)
                .product();
            if count > 2e7 {
                return Err(Error::invalid("window spans too many cubes to enumerate"));
            }
            let mut indices = Vec::new();
            let mut current = lo_k.clone();
            'outer: loop {
                indices.push(CubeIndex(current.clone()));
                let mut axis = 0;
                loop {
                    if axis == dim {
                        break 'outer;
                    }
                    current[axis] += 1;
                    if current[axis] <= hi_k[axis] {
                        break;
                    }
                    current[axis] = lo_k[axis];
                    axis += 1;
                }
            }
            indices
        }
    };
    let mut halo: Vec<CubeIndex> = window_cubes.clone();
    for k in &window_cubes {
        halo.extend(grid.neighbor_indices(k));
    }
    halo.sort_unstable();
    halo.dedup();
    Ok(IndexHull { window_cubes, halo_cubes: halo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn interaction_parameter_reference_values() {
        // d = 1: ν_1 = 2, so m = 2 (R/δ + 1)
        assert_relative_eq!(interaction_parameter(1, 1.0, 1.0), 4.0, max_relative = 1e-12);
        assert_relative_eq!(interaction_parameter(1, 2.0, 1.0), 6.0, max_relative = 1e-12);
        // d = 2: ν_2 = π, so m = π · 2 · (R/δ + 1)²
        assert_relative_eq!(
            interaction_parameter(2, 0.5, 0.5),
            8.0 * std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-12);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 / 3.0 * std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cube_index_examples() {
        // d = 2, δ = 1 → g = 1/√2 ≈ 0.7071; here use δ = √2/2·√2 = 1 trick:
        // pick δ so that g = 0.5 in d = 2, i.e. δ = 0.5·√2.
        let grid = CubeGrid::new(2, 0.5 * 2f64.sqrt(), 1.0).unwrap();
        assert_relative_eq!(grid.edge(), 0.5, max_relative = 1e-12);
        assert_eq!(grid.cube_index(&[0.74, -0.26]), CubeIndex(vec![1, -1]));
        assert_eq!(grid.cube_index(&[0.0, 0.0]), CubeIndex(vec![0, 0]));
        // Half-open faces: the upper face belongs to the next cube.
        let grid1 = CubeGrid::new(1, 1.0, 1.0).unwrap();
        assert_eq!(grid1.cube_index(&[0.5]), CubeIndex(vec![1]));
        assert_eq!(grid1.cube_index(&[-0.5]), CubeIndex(vec![0]));
    }

    #[test]
    fn neighbor_set_example_d1() {
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let n = grid.neighbor_indices(&CubeIndex(vec![0]));
        let got: Vec<i64> = n.iter().map(|k| k.0[0]).collect();
        assert_eq!(got, vec![-2, -1, 1, 2]);
        // Count attains the interaction parameter here.
        assert_eq!(n.len(), 4);
    }

    #[test]
    fn neighbor_count_bounded_by_interaction_parameter() {
        for dim in 1..=3usize {
            for ratio in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
                let grid = CubeGrid::new(dim, 1.0, ratio).unwrap();
                let count = grid.neighbor_offsets().len() as f64;
                let m = grid.interaction_parameter();
                assert!(
                    count <= m,
                    "d={dim} R/δ={ratio}: neighbor count {count} exceeds parameter {m}"
                );
            }
        }
    }

    #[test]
    fn neighbor_inclusion_at_exact_range_boundary() {
        // d = 2, R = δ: the diagonal offset (±2, ±2) has gap distance g√2 = δ = R
        // and must be included despite rounding in g = δ/√2.
        let grid = CubeGrid::new(2, 1.0, 1.0).unwrap();
        let offs = grid.neighbor_offsets();
        assert!(offs.iter().any(|o| o == &vec![2, 2]));
        assert!(!offs.iter().any(|o| o == &vec![3, 0]));
        assert_eq!(offs.len(), 24);
    }

    #[test]
    fn zero_range_still_touches_adjacent_cubes() {
        let grid = CubeGrid::new(1, 1.0, 0.0).unwrap();
        let got: Vec<i64> = grid.neighbor_offsets().iter().map(|o| o[0]).collect();
        assert_eq!(got, vec![-1, 1]);
    }

    #[test]
    fn centered_block_labels() {
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let w = Window::centered_block(&grid, 3).unwrap();
        match &w {
            Window::Cubes { indices, .. } => {
                let got: Vec<i64> = indices.iter().map(|k| k.0[0]).collect();
                assert_eq!(got, vec![-1, 0, 1]);
            }
            _ => panic!("expected cube window"),
        }
        assert_relative_eq!(w.volume(), 3.0, max_relative = 1e-12);
        let w2 = Window::centered_block(&grid, 2).unwrap();
        match &w2 {
            Window::Cubes { indices, .. } => {
                let got: Vec<i64> = indices.iter().map(|k| k.0[0]).collect();
                assert_eq!(got, vec![-1, 0]);
            }
            _ => panic!("expected cube window"),
        }
    }

    #[test]
    fn window_membership_is_half_open() {
        let w = Window::new_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!(w.contains(&[0.0, 0.0]));
        assert!(w.contains(&[0.999, 1.999]));
        assert!(!w.contains(&[1.0, 0.5]));
        assert!(!w.contains(&[0.5, 2.0]));
        assert_relative_eq!(w.volume(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn hull_of_cube_block() {
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let w = Window::centered_block(&grid, 3).unwrap();
        let hull = index_hull(&w, &grid).unwrap();
        let kd: Vec<i64> = hull.window_cubes.iter().map(|k| k.0[0]).collect();
        assert_eq!(kd, vec![-1, 0, 1]);
        let halo: Vec<i64> = hull.halo_cubes.iter().map(|k| k.0[0]).collect();
        assert_eq!(halo, vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn hull_of_box_window() {
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        // [0, 2) meets cubes 0, 1, 2; [0.5, 1.5) is exactly cube 1.
        let hull = index_hull(&Window::new_box(vec![0.0], vec![2.0]).unwrap(), &grid).unwrap();
        let kd: Vec<i64> = hull.window_cubes.iter().map(|k| k.0[0]).collect();
        assert_eq!(kd, vec![0, 1, 2]);
        let hull2 = index_hull(&Window::new_box(vec![0.5], vec![1.5]).unwrap(), &grid).unwrap();
        let kd2: Vec<i64> = hull2.window_cubes.iter().map(|k| k.0[0]).collect();
        assert_eq!(kd2, vec![1]);
    }

    proptest! {
        #[test]
        fn cube_index_inverts_bounds(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..=3),
            delta in 0.05f64..5.0,
        ) {
            let dim = xs.len();
            let grid = CubeGrid::new(dim, delta, delta).unwrap();
            let k = grid.cube_index(&xs);
            let (lo, hi) = grid.cube_bounds(&k);
            let tol = 1e-9 * delta;
            for i in 0..dim {
                prop_assert!(lo[i] - tol <= xs[i] && xs[i] < hi[i] + tol,
                    "axis {i}: {} not in [{}, {})", xs[i], lo[i], hi[i]);
            }
            // Diameter constraint: any point is within δ/2 of its cube center.
            let c = grid.cube_center(&k);
            let dist: f64 = xs.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            prop_assert!(dist <= delta / 2.0 * (1.0 + 1e-9));
        }

        #[test]
        fn neighbor_relation_is_symmetric(
            k in proptest::collection::vec(-20i64..20, 2),
            l in proptest::collection::vec(-20i64..20, 2),
            ratio in 0.3f64..3.0,
        ) {
            let grid = CubeGrid::new(2, 1.0, ratio).unwrap();
            let ki = CubeIndex(k);
            let li = CubeIndex(l);
            let k_in_l = grid.neighbor_indices(&li).contains(&ki);
            let l_in_k = grid.neighbor_indices(&ki).contains(&li);
            prop_assert_eq!(k_in_l, l_in_k);
            prop_assert!((grid.cube_distance(&ki, &li) - grid.cube_distance(&li, &ki)).abs() < 1e-12);
        }

        #[test]
        fn halo_covers_range_neighborhood(
            lo in -5.0f64..0.0,
            len in 0.3f64..4.0,
            x in -9.0f64..9.0,
            delta in 0.3f64..1.5,
        ) {
            let grid = CubeGrid::new(1, delta, 1.0).unwrap();
            let w = Window::new_box(vec![lo], vec![lo + len]).unwrap();
            let hull = index_hull(&w, &grid).unwrap();
            let inside = w.contains(&[x]);
            if !inside && w.distance(&[x]) <= 1.0 {
                prop_assert!(
                    hull.contains_halo_cube(&grid.cube_index(&[x])),
                    "point {x} within range of [{lo}, {}) not covered by halo", lo + len
                );
            }
        }

        #[test]
        fn uniform_samples_land_in_window(seed in 0u64..1000) {
            let mut rng = crate::rng_stream(seed, 0);
            let grid = CubeGrid::new(2, 1.0, 1.0).unwrap();
            let w1 = Window::centered_block(&grid, 3).unwrap();
            let w2 = Window::new_box(vec![-1.0, 0.5], vec![2.0, 0.75]).unwrap();
            for _ in 0..50 {
                prop_assert!(w1.contains(&w1.sample_uniform(&mut rng)));
                prop_assert!(w2.contains(&w2.sample_uniform(&mut rng)));
            }
        }
    }
}
