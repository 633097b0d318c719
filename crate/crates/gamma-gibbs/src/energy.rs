//! Finite-volume interaction energy and its local increments.
//!
//! H_Δ(η|ξ) = ∫∫ φ dη_Δ dη_Δ + 2 ∫∫ φ dη_Δ dξ_{Δ^c}, with the diagonal of
//! the first integral (the self-pairs φ(x,x)·s²) kept or dropped according to
//! the potential's `DiagonalMode`.  All sums are pruned through the cube
//! lattice: φ vanishes beyond R, and any pair within R lands in neighboring
//! (or equal) cubes, so only bucket lookups are ever evaluated.

use crate::lattice::{index_hull, CubeGrid, CubeIndex, Window};
use crate::measure::{Atom, DiscreteMeasure};
use crate::potential::{DiagonalMode, PotentialSpec};
use crate::{Error, Result};
use std::collections::HashMap;

/// Elementary Monte Carlo move on the window configuration.  Atom ids are
/// indices into the canonical atom order of the measure being modified.
#[derive(Debug, Clone, PartialEq)]
pub enum MoveProposal {
    Birth { position: Vec<f64>, mark: f64 },
    Death { atom_id: usize },
    Resize { atom_id: usize, mark: f64 },
}

fn check_grid(spec: &PotentialSpec, grid: &CubeGrid) -> Result<()> {
    if spec.dim() != grid.dim() {
        return Err(Error::invalid(format!(
            "potential dimension {} does not match grid dimension {}",
            spec.dim(),
            grid.dim()
        )));
    }
    if (grid.delta() - spec.delta()).abs() > 1e-9 * spec.delta() {
        return Err(Error::invalid(format!(
            "grid cube diameter {} does not match potential delta {}",
            grid.delta(),
            spec.delta()
        )));
    }
    if grid.range() < spec.range() * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "grid neighbor range {} cannot cover potential range {}",
            grid.range(),
            spec.range()
        )));
    }
    Ok(())
}

/// Mutable energy bookkeeping for one window configuration against a fixed
/// boundary condition.  Supports O(local) birth/death/resize increments and
/// a full recomputation for cache audits.
pub struct EnergyState {
    spec: PotentialSpec,
    grid: CubeGrid,
    window: Window,
    slots: Vec<Option<Atom>>,
    free_slots: Vec<usize>,
    /// Alive slot ids, dense, for O(1) uniform selection.
    alive: Vec<usize>,
    /// slot -> position in `alive` (usize::MAX when dead).
    dense_pos: Vec<usize>,
    buckets: HashMap<CubeIndex, Vec<usize>>,
    /// Boundary atoms outside the window, bucketed once at construction.
    xi_buckets: HashMap<CubeIndex, Vec<(Vec<f64>, f64)>>,
    energy: f64,
}

impl EnergyState {
    /// Build from an initial window configuration (must be supported in
    /// `window`) and a boundary condition (atoms inside `window` ignored).
    pub fn new(
        window: Window,
        spec: PotentialSpec,
        grid: CubeGrid,
        eta: &DiscreteMeasure,
        xi: &[Atom],
    ) -> Result<Self> {
        check_grid(&spec, &grid)?;
        if window.dim() != grid.dim() {
            return Err(Error::invalid("window dimension does not match grid"));
        }
        let mut xi_buckets: HashMap<CubeIndex, Vec<(Vec<f64>, f64)>> = HashMap::new();
        for atom in xi {
            if atom.position.len() != grid.dim() {
                return Err(Error::invalid("boundary atom dimension mismatch"));
            }
            if window.contains(&atom.position) {
                continue;
            }
            xi_buckets
                .entry(grid.cube_index(&atom.position))
                .or_default()
                .push((atom.position.clone(), atom.mark));
        }
        let mut state = EnergyState {
            spec,
            grid,
            window,
            slots: Vec::new(),
            free_slots: Vec::new(),
            alive: Vec::new(),
            dense_pos: Vec::new(),
            buckets: HashMap::new(),
            xi_buckets,
            energy: 0.0,
        };
        for atom in eta.atoms() {
            if !state.window.contains(&atom.position) {
                return Err(Error::invalid("initial configuration has an atom outside the window"));
            }
            state.insert_slot(atom.position.clone(), atom.mark);
        }
        state.energy = state.recompute_energy();
        Ok(state)
    }

    fn insert_slot(&mut self, position: Vec<f64>, mark: f64) -> usize {
        let slot = match self.free_slots.pop() {
            Some(s) => {
                self.slots[s] = Some(Atom { position, mark });
                s
            }
            None => {
                self.slots.push(Some(Atom { position, mark }));
                self.dense_pos.push(usize::MAX);
                self.slots.len() - 1
            }
        };
        let atom = self.slots[slot].as_ref().unwrap();
        self.buckets.entry(self.grid.cube_index(&atom.position)).or_default().push(slot);
        self.dense_pos[slot] = self.alive.len();
        self.alive.push(slot);
        slot
    }

    fn remove_slot(&mut self, slot: usize) -> Atom {
        let atom = self.slots[slot].take().expect("slot must be alive");
        let key = self.grid.cube_index(&atom.position);
        let bucket = self.buckets.get_mut(&key).expect("bucket must exist");
        bucket.retain(|&s| s != slot);
        if bucket.is_empty() {
            self.buckets.remove(&key);
        }
        let dense = self.dense_pos[slot];
        self.alive.swap_remove(dense);
        if dense < self.alive.len() {
            self.dense_pos[self.alive[dense]] = dense;
        }
        self.dense_pos[slot] = usize::MAX;
        self.free_slots.push(slot);
        atom
    }

    /// A copy with the same window, potential, and boundary but no atoms.
    pub fn clone_empty(&self) -> EnergyState {
        EnergyState {
            spec: self.spec.clone(),
            grid: self.grid.clone(),
            window: self.window.clone(),
            slots: Vec::new(),
            free_slots: Vec::new(),
            alive: Vec::new(),
            dense_pos: Vec::new(),
            buckets: HashMap::new(),
            xi_buckets: self.xi_buckets.clone(),
            energy: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    /// Slot id of the i-th alive atom (arbitrary but stable between moves).
    pub fn nth_alive(&self, i: usize) -> usize {
        self.alive[i]
    }

    pub fn atom(&self, slot: usize) -> Option<&Atom> {
        self.slots.get(slot).and_then(|s| s.as_ref())
    }

    /// Whether some alive atom sits exactly at `position` (same cube scan;
    /// exact coordinate equality).
    pub fn has_atom_at(&self, position: &[f64]) -> bool {
        self.buckets
            .get(&self.grid.cube_index(position))
            .is_some_and(|bucket| {
                bucket.iter().any(|&s| self.slots[s].as_ref().unwrap().position == position)
            })
    }

    pub fn total_mass(&self) -> f64 {
        self.alive.iter().map(|&s| self.slots[s].as_ref().unwrap().mark).sum()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn snapshot(&self) -> Result<DiscreteMeasure> {
        let atoms: Vec<Atom> = self.alive.iter().map(|&s| self.slots[s].clone().unwrap()).collect();
        DiscreteMeasure::new(self.window.clone(), atoms)
    }

    fn diag(&self, position: &[f64], mark: f64) -> f64 {
        match self.spec.diagonal() {
            DiagonalMode::Include => self.spec.phi(position, position) * mark * mark,
            DiagonalMode::Exclude => 0.0,
        }
    }

    /// Σ φ(pos, y)·s_y over alive atoms in the cube neighborhood of pos,
    /// skipping `exclude`.
    fn neighbor_sum(&self, position: &[f64], exclude: Option<usize>) -> f64 {
        let center = self.grid.cube_index(position);
        let mut total = 0.0;
        let mut visit = |key: &CubeIndex| {
            if let Some(bucket) = self.buckets.get(key) {
                for &slot in bucket {
                    if Some(slot) == exclude {
                        continue;
                    }
                    let atom = self.slots[slot].as_ref().unwrap();
                    total += self.spec.phi(position, &atom.position) * atom.mark;
                }
            }
        };
        visit(&center);
        for offset in self.grid.neighbor_offsets() {
            let key = CubeIndex(center.0.iter().zip(offset).map(|(c, o)| c + o).collect());
            visit(&key);
        }
        total
    }

    /// Σ φ(pos, y)·s_y over boundary atoms in the cube neighborhood of pos.
    fn boundary_sum(&self, position: &[f64]) -> f64 {
        if self.xi_buckets.is_empty() {
            return 0.0;
        }
        let center = self.grid.cube_index(position);
        let mut total = 0.0;
        let mut visit = |key: &CubeIndex| {
            if let Some(bucket) = self.xi_buckets.get(key) {
                for (pos, mark) in bucket {
                    total += self.spec.phi(position, pos) * mark;
                }
            }
        };
        visit(&center);
        for offset in self.grid.neighbor_offsets() {
            let key = CubeIndex(center.0.iter().zip(offset).map(|(c, o)| c + o).collect());
            visit(&key);
        }
        total
    }

    /// Energy change of adding an atom (s, x); the configuration itself is
    /// untouched.
    pub fn birth_increment(&self, position: &[f64], mark: f64) -> Result<f64> {
        if position.len() != self.grid.dim() {
            return Err(Error::invalid("birth position dimension mismatch"));
        }
        if !position.iter().all(|c| c.is_finite()) || !(mark.is_finite() && mark > 0.0) {
            return Err(Error::invalid("birth proposal must have finite position and positive mark"));
        }
        if !self.window.contains(position) {
            return Err(Error::invalid("birth position lies outside the window"));
        }
        Ok(self.diag(position, mark) + 2.0 * mark * (self.neighbor_sum(position, None) + self.boundary_sum(position)))
    }

    pub fn death_increment(&self, slot: usize) -> Result<f64> {
        let atom = self
            .atom(slot)
            .ok_or_else(|| Error::invalid(format!("unknown atom id {slot}")))?;
        Ok(-(self.diag(&atom.position, atom.mark)
            + 2.0 * atom.mark * (self.neighbor_sum(&atom.position, Some(slot)) + self.boundary_sum(&atom.position))))
    }

    pub fn resize_increment(&self, slot: usize, new_mark: f64) -> Result<f64> {
        if !(new_mark.is_finite() && new_mark > 0.0) {
            return Err(Error::invalid("resize proposal must have a positive finite mark"));
        }
        let atom = self
            .atom(slot)
            .ok_or_else(|| Error::invalid(format!("unknown atom id {slot}")))?;
        let diag_change = match self.spec.diagonal() {
            DiagonalMode::Include => {
                self.spec.phi(&atom.position, &atom.position) * (new_mark * new_mark - atom.mark * atom.mark)
            }
            DiagonalMode::Exclude => 0.0,
        };
        Ok(diag_change
            + 2.0
                * (new_mark - atom.mark)
                * (self.neighbor_sum(&atom.position, Some(slot)) + self.boundary_sum(&atom.position)))
    }

    /// Commit a birth whose increment was already computed; returns the slot.
    pub fn apply_birth(&mut self, position: Vec<f64>, mark: f64, increment: f64) -> usize {
        self.energy += increment;
        self.insert_slot(position, mark)
    }

    pub fn apply_death(&mut self, slot: usize, increment: f64) -> Atom {
        self.energy += increment;
        self.remove_slot(slot)
    }

    pub fn apply_resize(&mut self, slot: usize, new_mark: f64, increment: f64) {
        self.energy += increment;
        self.slots[slot].as_mut().expect("slot must be alive").mark = new_mark;
    }

    /// Full O(n·local) energy recomputation, used to audit the running cache.
    pub fn recompute_energy(&self) -> f64 {
        let mut diag_total = 0.0;
        let mut pair_total = 0.0;
        let mut cross_total = 0.0;
        for (i, slot) in self.slots.iter().enumerate() {
            let Some(atom) = slot else { continue };
            diag_total += self.diag(&atom.position, atom.mark);
            cross_total += atom.mark * self.boundary_sum(&atom.position);
            let center = self.grid.cube_index(&atom.position);
            let visit = |key: &CubeIndex, pair_total: &mut f64| {
                if let Some(bucket) = self.buckets.get(key) {
                    for &j in bucket {
                        if j <= i {
                            continue;
                        }
                        let other = self.slots[j].as_ref().unwrap();
                        *pair_total += self.spec.phi(&atom.position, &other.position) * atom.mark * other.mark;
                    }
                }
            };
            visit(&center, &mut pair_total);
            for offset in self.grid.neighbor_offsets() {
                let key = CubeIndex(center.0.iter().zip(offset).map(|(c, o)| c + o).collect());
                visit(&key, &mut pair_total);
            }
        }
        diag_total + 2.0 * pair_total + 2.0 * cross_total
    }
}

/// Interaction energy of `eta` in `window` against boundary condition `xi`.
/// Atoms of `eta` outside the window and atoms of `xi` inside it are ignored.
pub fn hamiltonian(
    eta: &DiscreteMeasure,
    xi: &DiscreteMeasure,
    window: &Window,
    spec: &PotentialSpec,
    grid: &CubeGrid,
) -> Result<f64> {
    let restricted = eta.restricted_to(window);
    let state = EnergyState::new(window.clone(), spec.clone(), grid.clone(), &restricted, xi.atoms())?;
    Ok(state.energy())
}

/// Energy change H(η'|ξ) − H(η|ξ) of one elementary move.  `eta` must be
/// supported in the window (atom ids index its canonical atom order).
pub fn energy_increment(
    eta: &DiscreteMeasure,
    xi: &DiscreteMeasure,
    window: &Window,
    spec: &PotentialSpec,
    grid: &CubeGrid,
    proposal: &MoveProposal,
) -> Result<f64> {
    let state = EnergyState::new(window.clone(), spec.clone(), grid.clone(), eta, xi.atoms())?;
    match proposal {
        MoveProposal::Birth { position, mark } => state.birth_increment(position, *mark),
        MoveProposal::Death { atom_id } => {
            if *atom_id >= eta.len() {
                return Err(Error::invalid(format!("unknown atom id {atom_id}")));
            }
            state.death_increment(*atom_id)
        }
        MoveProposal::Resize { atom_id, mark } => {
            if *atom_id >= eta.len() {
                return Err(Error::invalid(format!("unknown atom id {atom_id}")));
            }
            state.resize_increment(*atom_id, *mark)
        }
    }
}

/// Quadratic cube-mass lower bound on the energy:
///
///   H_Δ(η|ξ) ≥ (A − 2·m·b) Σ_{j ∈ K_Δ} η(Q_j)² − m·b Σ_{l ∈ hull} ξ(Q_l)²,
///
/// with η restricted to the window, ξ to its complement, and the hull sum
/// over every cube the window's cubes touch.  Requires the diagonal-included
/// energy convention.
pub fn stability_lower_bound(
    eta: &DiscreteMeasure,
    xi: &DiscreteMeasure,
    window: &Window,
    spec: &PotentialSpec,
    grid: &CubeGrid,
) -> Result<f64> {
    check_grid(spec, grid)?;
    let hull = index_hull(window, grid)?;
    let m = spec.interaction_parameter();
    let a = spec.repulsion_a();
    let b = spec.lower_bound_b();

    let mut eta_masses: HashMap<CubeIndex, f64> = HashMap::new();
    for atom in eta.atoms() {
        if window.contains(&atom.position) {
            *eta_masses.entry(grid.cube_index(&atom.position)).or_default() += atom.mark;
        }
    }
    let sum_eta: f64 = eta_masses.values().map(|s| s * s).sum();

    let mut xi_masses: HashMap<CubeIndex, f64> = HashMap::new();
    for atom in xi.atoms() {
        if window.contains(&atom.position) {
            continue;
        }
        let k = grid.cube_index(&atom.position);
        if hull.contains_halo_cube(&k) {
            *xi_masses.entry(k).or_default() += atom.mark;
        }
    }
    let sum_xi: f64 = xi_masses.values().map(|s| s * s).sum();

    Ok((a - 2.0 * m * b) * sum_eta - m * b * sum_xi)
}

/// Single-cube refinement: for window Q_k,
///
///   H_{Q_k}(η|ξ) ≥ (A − m·b) η(Q_k)² − b Σ_{j ∈ ∂k} ξ(Q_j)².
pub fn single_cube_stability_bound(
    eta: &DiscreteMeasure,
    xi: &DiscreteMeasure,
    cube: &CubeIndex,
    spec: &PotentialSpec,
    grid: &CubeGrid,
) -> Result<f64> {
    check_grid(spec, grid)?;
    let m = spec.interaction_parameter();
    let eta_mass = eta.mass_in_cube(grid, cube);
    let xi_sum: f64 = grid
        .neighbor_indices(cube)
        .iter()
        .map(|j| {
            let mass = xi.mass_in_cube(grid, j);
            mass * mass
        })
        .sum();
    Ok((spec.repulsion_a() - m * spec.lower_bound_b()) * eta_mass * eta_mass - spec.lower_bound_b() * xi_sum)
}

/// Zero-boundary single-cube bound: H_{Q_k}(η|0) ≥ (A − 2·m·b) η(Q_k)².
pub fn free_stability_bound(eta: &DiscreteMeasure, cube: &CubeIndex, spec: &PotentialSpec, grid: &CubeGrid) -> Result<f64> {
    check_grid(spec, grid)?;
    let mass = eta.mass_in_cube(grid, cube);
    Ok((spec.repulsion_a() - 2.0 * spec.interaction_parameter() * spec.lower_bound_b()) * mass * mass)
}

/// Pair-sum weight Φ((s,x); η) = 2s Σ_y φ(x, y)·s_y over all atoms of η —
/// the energy cost of inserting (s,x) excluding any self-term.
pub fn gnz_weight(position: &[f64], mark: f64, eta: &DiscreteMeasure, spec: &PotentialSpec) -> f64 {
    2.0 * mark
        * eta
            .atoms()
            .iter()
            .map(|a| spec.phi(position, &a.position) * a.mark)
            .sum::<f64>()
}

/// Literal insertion cost Φ((s,x); η) + φ(x,x)·s²: equals the birth energy
/// increment under the diagonal-included convention.
pub fn gnz_weight_literal(position: &[f64], mark: f64, eta: &DiscreteMeasure, spec: &PotentialSpec) -> f64 {
    gnz_weight(position, mark, eta, spec) + spec.phi(position, position) * mark * mark
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::rng_stream;
    use rand::Rng;

    fn step_setup() -> (PotentialSpec, CubeGrid) {
        let spec = PotentialSpec::step(1, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        (spec, grid)
    }

    fn measure(window: &Window, atoms: Vec<(f64, f64)>) -> DiscreteMeasure {
        DiscreteMeasure::new(
            window.clone(),
            atoms.into_iter().map(|(x, s)| Atom::new(vec![x], s)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_hand_examples() {
        let (spec, grid) = step_setup();
        let window = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        let empty = DiscreteMeasure::empty(window.clone());

        assert_eq!(hamiltonian(&empty, &empty, &window, &spec, &grid).unwrap(), 0.0);

        // Single atom of mass 2: H = φ(x,x)·4 = 4.
        let one = measure(&window, vec![(0.2, 2.0)]);
        assert_eq!(hamiltonian(&one, &empty, &window, &spec, &grid).unwrap(), 4.0);

        // Two unit atoms at distance 0.5 ≤ R: H = 1 + 1 + 2 = 4.
        let two = measure(&window, vec![(0.0, 1.0), (0.5, 1.0)]);
        assert_eq!(hamiltonian(&two, &empty, &window, &spec, &grid).unwrap(), 4.0);

        // Dropping the diagonal removes the self-terms.
        let spec_x = PotentialSpec::step(1, 1.0, 1.0).unwrap().with_diagonal(DiagonalMode::Exclude);
        assert_eq!(hamiltonian(&one, &empty, &window, &spec_x, &grid).unwrap(), 0.0);
        assert_eq!(hamiltonian(&two, &empty, &window, &spec_x, &grid).unwrap(), 2.0);
    }

    #[test]
    fn boundary_atoms_couple_only_within_range() {
        let (spec, grid) = step_setup();
        let window = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        let eta = measure(&window, vec![(0.5, 1.0)]);

        let near_window = Window::new_box(vec![-10.0], vec![10.0]).unwrap();
        let xi_near = measure(&near_window, vec![(1.2, 3.0)]);
        // H = 1 (diag) + 2·1·3·φ = 7.
        let h = hamiltonian(&eta, &xi_near, &window, &spec, &grid).unwrap();
        assert_eq!(h, 7.0);

        // An extra boundary atom beyond R changes nothing, bit for bit.
        let xi_far = measure(&near_window, vec![(1.2, 3.0), (5.0, 100.0)]);
        let h_far = hamiltonian(&eta, &xi_far, &window, &spec, &grid).unwrap();
        assert_eq!(h.to_bits(), h_far.to_bits());

        // Boundary atoms inside the window are ignored.
        let xi_inside = measure(&near_window, vec![(0.4, 50.0), (1.2, 3.0)]);
        assert_eq!(hamiltonian(&eta, &xi_inside, &window, &spec, &grid).unwrap(), 7.0);
    }

    #[test]
    fn doubling_marks_quadruples_energy_exactly() {
        let spec = PotentialSpec::core_shell(2, 10.0, 0.1, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(2, 1.0, 1.0).unwrap();
        let window = Window::new_box(vec![0.0, 0.0], vec![3.0, 3.0]).unwrap();
        let mut rng = rng_stream(7, 0);
        let atoms: Vec<Atom> = (0..40)
            .map(|_| Atom::new(window.sample_uniform(&mut rng), rng.gen_range(0.1..2.0)))
            .collect();
        let eta = DiscreteMeasure::new(window.clone(), atoms.clone()).unwrap();
        let doubled = DiscreteMeasure::new(
            window.clone(),
            atoms.iter().map(|a| Atom::new(a.position.clone(), 2.0 * a.mark)).collect(),
        )
        .unwrap();
        let empty = DiscreteMeasure::empty(window.clone());
        let h = hamiltonian(&eta, &empty, &window, &spec, &grid).unwrap();
        let h4 = hamiltonian(&doubled, &empty, &window, &spec, &grid).unwrap();
        assert_eq!((4.0 * h).to_bits(), h4.to_bits());
    }

    #[test]
    fn increments_match_full_recomputation() {
        let spec = PotentialSpec::core_shell(2, 10.0, 0.05, 1.0, 1.5).unwrap();
        let grid = CubeGrid::new(2, 1.0, 1.5).unwrap();
        let window = Window::new_box(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
        let bbox = Window::new_box(vec![-2.0, -2.0], vec![6.0, 6.0]).unwrap();
        let mut rng = rng_stream(11, 0);

        let mut atoms: Vec<Atom> = (0..200)
            .map(|_| Atom::new(window.sample_uniform(&mut rng), rng.gen_range(0.05..1.5)))
            .collect();
        let xi = DiscreteMeasure::new(
            bbox.clone(),
            (0..60)
                .map(|_| Atom::new(bbox.sample_uniform(&mut rng), rng.gen_range(0.05..1.5)))
                .collect::<Vec<_>>()
                .into_iter()
                .filter(|a| !window.contains(&a.position))
                .collect(),
        )
        .unwrap();

        for step in 0..1000 {
            let eta = DiscreteMeasure::new(window.clone(), atoms.clone()).unwrap();
            let h_before = hamiltonian(&eta, &xi, &window, &spec, &grid).unwrap();
            let proposal = match step % 3 {
                0 => MoveProposal::Birth {
                    position: window.sample_uniform(&mut rng),
                    mark: rng.gen_range(0.05..1.5),
                },
                1 => MoveProposal::Death { atom_id: rng.gen_range(0..eta.len()) },
                _ => MoveProposal::Resize {
                    atom_id: rng.gen_range(0..eta.len()),
                    mark: rng.gen_range(0.05..1.5),
                },
            };
            let inc = energy_increment(&eta, &xi, &window, &spec, &grid, &proposal).unwrap();

            // Apply the move to the canonical atom list.
            let mut next: Vec<Atom> = eta.atoms().to_vec();
            match &proposal {
                MoveProposal::Birth { position, mark } => next.push(Atom::new(position.clone(), *mark)),
                MoveProposal::Death { atom_id } => {
                    next.remove(*atom_id);
                }
                MoveProposal::Resize { atom_id, mark } => next[*atom_id].mark = *mark,
            }
            let eta_next = DiscreteMeasure::new(window.clone(), next.clone()).unwrap();
            let h_after = hamiltonian(&eta_next, &xi, &window, &spec, &grid).unwrap();
            let tol = 1e-9 * h_before.abs().max(h_after.abs()).max(1.0);
            assert!(
                (h_after - h_before - inc).abs() <= tol,
                "step {step}: increment {inc} vs recomputed {} (tol {tol})",
                h_after - h_before
            );
            atoms = next;
        }
    }

    #[test]
    fn death_undoes_birth_bit_exactly() {
        let (spec, grid) = step_setup();
        let window = Window::new_box(vec![0.0], vec![4.0]).unwrap();
        let mut rng = rng_stream(13, 0);
        let atoms: Vec<Atom> = (0..30)
            .map(|_| Atom::new(window.sample_uniform(&mut rng), rng.gen_range(0.1..2.0)))
            .collect();
        let eta = DiscreteMeasure::new(window.clone(), atoms).unwrap();
        let empty = DiscreteMeasure::empty(window.clone());

        let id = 12;
        let victim = eta.atoms()[id].clone();
        let death =
            energy_increment(&eta, &empty, &window, &spec, &grid, &MoveProposal::Death { atom_id: id }).unwrap();

        let mut remaining: Vec<Atom> = eta.atoms().to_vec();
        remaining.remove(id);
        let eta_minus = DiscreteMeasure::new(window.clone(), remaining).unwrap();
        let birth = energy_increment(
            &eta_minus,
            &empty,
            &window,
            &spec,
            &grid,
            &MoveProposal::Birth { position: victim.position, mark: victim.mark },
        )
        .unwrap();
        assert_eq!(death.to_bits(), (-birth).to_bits());
    }

    #[test]
    fn unknown_atom_id_is_an_error() {
        let (spec, grid) = step_setup();
        let window = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        let eta = measure(&window, vec![(0.5, 1.0)]);
        let empty = DiscreteMeasure::empty(window.clone());
        for proposal in [MoveProposal::Death { atom_id: 5 }, MoveProposal::Resize { atom_id: 5, mark: 1.0 }] {
            let err = energy_increment(&eta, &empty, &window, &spec, &grid, &proposal).unwrap_err();
            assert!(err.to_string().contains("unknown atom id"), "{err}");
        }
        let err = energy_increment(
            &eta,
            &empty,
            &window,
            &spec,
            &grid,
            &MoveProposal::Birth { position: vec![7.0], mark: 1.0 },
        )
        .unwrap_err();
        assert!(err.to_string().contains("outside the window"), "{err}");
    }

    #[test]
    fn energy_state_cache_tracks_applied_moves() {
        let spec = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let window = Window::new_box(vec![0.0], vec![5.0]).unwrap();
        let xi_atoms = vec![Atom::new(vec![-0.3], 0.8), Atom::new(vec![5.4], 1.1)];
        let start = DiscreteMeasure::empty(window.clone());
        let mut state = EnergyState::new(window.clone(), spec.clone(), grid.clone(), &start, &xi_atoms).unwrap();
        let mut rng = rng_stream(17, 0);

        for _ in 0..500 {
            let roll: f64 = rng.gen();
            if state.is_empty() || roll < 0.45 {
                let pos = window.sample_uniform(&mut rng);
                let mark = rng.gen_range(0.05..1.2);
                let inc = state.birth_increment(&pos, mark).unwrap();
                state.apply_birth(pos, mark, inc);
            } else if roll < 0.8 {
                let slot = state.nth_alive(rng.gen_range(0..state.len()));
                let inc = state.death_increment(slot).unwrap();
                state.apply_death(slot, inc);
            } else {
                let slot = state.nth_alive(rng.gen_range(0..state.len()));
                let mark = rng.gen_range(0.05..1.2);
                let inc = state.resize_increment(slot, mark).unwrap();
                state.apply_resize(slot, mark, inc);
            }
        }
        let audited = state.recompute_energy();
        assert!(
            (state.energy() - audited).abs() <= 1e-8 * audited.abs().max(1.0),
            "cache {} vs recomputed {audited}",
            state.energy()
        );

        // Snapshot agrees with the public hamiltonian on the same data.
        let snap = state.snapshot().unwrap();
        let xi = DiscreteMeasure::with_bounding_window(1, xi_atoms).unwrap();
        let h = hamiltonian(&snap, &xi, &window, &spec, &grid).unwrap();
        assert!((h - audited).abs() <= 1e-9 * audited.abs().max(1.0));
    }

    #[test]
    fn stability_bound_holds_on_random_states() {
        // d=1 core-shell: A=10, b=1, δ=R=1, m=4 → A−2mb = 2, A certified.
        let spec = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let window = Window::centered_block(&grid, 4).unwrap();
        let (lo, hi) = window.bounding_box();
        let pad_lo = vec![lo[0] - 1.5];
        let pad_hi = vec![hi[0] + 1.5];
        let outer = Window::new_box(pad_lo, pad_hi).unwrap();
        let mut rng = rng_stream(23, 0);

        for trial in 0..10_000 {
            let n_eta = rng.gen_range(0..8);
            let eta_atoms: Vec<Atom> = (0..n_eta)
                .map(|_| Atom::new(window.sample_uniform(&mut rng), -rng.gen::<f64>().max(1e-12).ln()))
                .collect();
            let eta = DiscreteMeasure::new(window.clone(), eta_atoms).unwrap();
            let n_xi = rng.gen_range(0..6);
            let xi_atoms: Vec<Atom> = (0..n_xi)
                .map(|_| Atom::new(outer.sample_uniform(&mut rng), -rng.gen::<f64>().max(1e-12).ln()))
                .filter(|a| !window.contains(&a.position))
                .collect();
            let xi = DiscreteMeasure::new(outer.clone(), xi_atoms).unwrap();

            let h = hamiltonian(&eta, &xi, &window, &spec, &grid).unwrap();
            let bound = stability_lower_bound(&eta, &xi, &window, &spec, &grid).unwrap();
            assert!(
                h >= bound - 1e-9 * bound.abs().max(1.0),
                "trial {trial}: H = {h} < bound = {bound}"
            );
        }
    }

    #[test]
    fn single_cube_bounds_hold() {
        let spec = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let k = CubeIndex(vec![0]);
        let cube_window = Window::from_cubes(&grid, [k.clone()]).unwrap();
        let outer = Window::new_box(vec![-3.0], vec![3.0]).unwrap();
        let mut rng = rng_stream(29, 0);

        for _ in 0..5_000 {
            let n_eta = rng.gen_range(0..6);
            let eta_atoms: Vec<Atom> = (0..n_eta)
                .map(|_| Atom::new(cube_window.sample_uniform(&mut rng), rng.gen_range(0.01..2.0)))
                .collect();
            let eta = DiscreteMeasure::new(cube_window.clone(), eta_atoms).unwrap();
            let n_xi = rng.gen_range(0..5);
            let xi_atoms: Vec<Atom> = (0..n_xi)
                .map(|_| Atom::new(outer.sample_uniform(&mut rng), rng.gen_range(0.01..2.0)))
                .filter(|a| !cube_window.contains(&a.position))
                .collect();
            let xi = DiscreteMeasure::new(outer.clone(), xi_atoms).unwrap();

            let h = hamiltonian(&eta, &xi, &cube_window, &spec, &grid).unwrap();
            let refined = single_cube_stability_bound(&eta, &xi, &k, &spec, &grid).unwrap();
            assert!(h >= refined - 1e-9 * refined.abs().max(1.0), "H = {h} < refined bound {refined}");

            let empty = DiscreteMeasure::empty(outer.clone());
            let h_free = hamiltonian(&eta, &empty, &cube_window, &spec, &grid).unwrap();
            let free_bound = free_stability_bound(&eta, &k, &spec, &grid).unwrap();
            assert!(h_free >= free_bound - 1e-9 * free_bound.abs().max(1.0));
        }
    }

    #[test]
    fn step_potential_saturates_free_bound_in_one_cube() {
        // All pairs within one cube are within R, so H = A·η(Q)² exactly.
        let (spec, grid) = step_setup();
        let k = CubeIndex(vec![0]);
        let window = Window::from_cubes(&grid, [k.clone()]).unwrap();
        let eta = measure(&window, vec![(-0.4, 0.3), (0.1, 1.2), (0.4, 0.5)]);
        let empty = DiscreteMeasure::empty(window.clone());
        let h = hamiltonian(&eta, &empty, &window, &spec, &grid).unwrap();
        let mass = 0.3 + 1.2 + 0.5;
        approx::assert_relative_eq!(h, mass * mass, max_relative = 1e-12);
        approx::assert_relative_eq!(
            free_stability_bound(&eta, &k, &spec, &grid).unwrap(),
            mass * mass,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gnz_weights_match_hand_values_and_birth_increment() {
        let (spec, grid) = step_setup();
        let window = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        let eta = measure(&window, vec![(0.0, 1.0)]);

        // Φ((2, 0.5); η) = 2·2·(1·1) = 4; literal adds φ(x,x)·4 = 4.
        assert_eq!(gnz_weight(&[0.5], 2.0, &eta, &spec), 4.0);
        assert_eq!(gnz_weight_literal(&[0.5], 2.0, &eta, &spec), 8.0);

        // Literal variant = birth increment (diagonal included, no boundary).
        let empty = DiscreteMeasure::empty(window.clone());
        let inc = energy_increment(
            &eta,
            &empty,
            &window,
            &spec,
            &grid,
            &MoveProposal::Birth { position: vec![0.5], mark: 2.0 },
        )
        .unwrap();
        assert_eq!(inc.to_bits(), gnz_weight_literal(&[0.5], 2.0, &eta, &spec).to_bits());

        // Plain weight = birth increment when the diagonal is excluded.
        let spec_x = PotentialSpec::step(1, 1.0, 1.0).unwrap().with_diagonal(DiagonalMode::Exclude);
        let inc_x = energy_increment(
            &eta,
            &empty,
            &window,
            &spec_x,
            &grid,
            &MoveProposal::Birth { position: vec![0.5], mark: 2.0 },
        )
        .unwrap();
        assert_eq!(inc_x.to_bits(), gnz_weight(&[0.5], 2.0, &eta, &spec_x).to_bits());
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let spec = PotentialSpec::core_shell(1, 10.0, 0.5, 1.0, 1.5).unwrap();
        // Cube diameter differs from the potential's delta.
        let wrong_delta = CubeGrid::new(1, 0.5, 1.5).unwrap();
        let window = Window::new_box(vec![0.0], vec![1.0]).unwrap();
        let empty = DiscreteMeasure::empty(window.clone());
        assert!(hamiltonian(&empty, &empty, &window, &spec, &wrong_delta).is_err());
        // Neighbor range shorter than the potential's range.
        let short_range = CubeGrid::new(1, 1.0, 1.0).unwrap();
        assert!(hamiltonian(&empty, &empty, &window, &spec, &short_range).is_err());
    }
}
