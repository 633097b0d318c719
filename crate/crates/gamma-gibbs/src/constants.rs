//! Constants entering the moment and exponential-moment bounds for Gibbs
//! perturbations of the Gamma measure.
//!
//! Everything is derived from the certified potential constants (A, b, ‖φ‖,
//! R, δ), the lattice geometry (g, m), the Gamma intensity θ, and a Young
//! parameter ε_h > 0 used to split the attraction.  The exponential-moment
//! constant C_λ is astronomically large for realistic parameters, so it is
//! only ever reported and compared in log domain.

use crate::lattice::{index_hull, CubeGrid, CubeIndex, Window};
use crate::measure::DiscreteMeasure;
use crate::potential::PotentialSpec;
use crate::{Error, Result};

/// Tunable inputs for the bound constants.
#[derive(Debug, Clone)]
pub struct BoundParams {
    /// Gamma intensity parameter θ.
    pub theta: f64,
    /// Young-splitting parameter ε_h > 0.
    pub eps_h: f64,
    /// Quadratic-decay rate λ; defaults to the largest admissible value λ₀.
    pub lambda: Option<f64>,
    /// Geometric split δ̃ ∈ (B_ε/λ, 1); defaults to the interval midpoint.
    pub delta_fraction: Option<f64>,
    /// Temper exponent α > 0 for the tempered-norm constants.
    pub alpha: Option<f64>,
}

impl BoundParams {
    pub fn new(theta: f64, eps_h: f64) -> Self {
        BoundParams { theta, eps_h, lambda: None, delta_fraction: None, alpha: None }
    }
}

/// Derived constants; see the field comments for the defining formulas.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundConstants {
    pub dim: usize,
    pub theta: f64,
    pub eps_h: f64,
    /// Lattice interaction parameter m for (d, R, δ).
    pub m_phi: f64,
    pub cube_edge: f64,
    /// Number of cubes covering the window, |K_Δ|.
    pub window_cube_count: usize,
    /// C_Δ = 2·θ·|K_Δ|·g^d: linear-term constant for the window energy.
    pub c_window: f64,
    /// C_φ = θ·g^d·‖φ‖_∞.
    pub c_phi: f64,
    /// Υ_ε = C_φ·(4·θ·g^d + m/ε_h): per-cube offset in the one-point bound.
    pub upsilon: f64,
    /// B_ε = (b + ε_h·C_φ)·m: neighbor-coupling coefficient.
    pub b_eps: f64,
    /// λ₀ = A − m·b: largest admissible quadratic-decay rate.
    pub lambda0: f64,
    /// A − 2·m·b: decay rate valid with zero boundary condition.
    pub lambda0_zero_bc: f64,
    /// Admissible λ interval is (admissible_lo, admissible_hi].
    pub admissible_lo: f64,
    pub admissible_hi: f64,
    /// The λ actually used below.
    pub lambda: f64,
    pub lambda_admissible: bool,
    /// δ̃; present when resolvable (requires B_ε < λ, or given explicitly).
    pub delta_fraction: Option<f64>,
    /// Whether 0 < B_ε < δ̃·λ with δ̃ < 1 — the contraction condition the
    /// exponential-moment bound needs.
    pub contraction_ok: bool,
    /// ln C_λ = Υ_ε/(1 − δ̃) when the contraction condition holds.
    pub log_c_lambda: Option<f64>,
    /// ϑ = R/g + √d: lattice reach of the interaction in index units.
    pub vartheta: f64,
    pub alpha: Option<f64>,
    /// ln C_α = Υ_ε/(1 − δ̃·e^{αϑ}) when δ̃·e^{αϑ} < 1.
    pub log_c_alpha: Option<f64>,
    /// ν_α = λ / Σ_k e^{−α|k|}: tempered-norm exponential-moment rate.
    pub nu_alpha: Option<f64>,
}

/// Assemble every bound constant for a certified potential on a grid-matched
/// window.  Fails on uncertified potentials and on non-positive θ or ε_h;
/// an inadmissible λ or a failed contraction condition is reported in the
/// output rather than treated as an error.
pub fn bound_constants(
    spec: &PotentialSpec,
    grid: &CubeGrid,
    window: &Window,
    params: &BoundParams,
) -> Result<BoundConstants> {
    if !spec.is_certified() {
        return Err(Error::invalid("bound constants require a certified potential"));
    }
    if !(params.theta.is_finite() && params.theta > 0.0) {
        return Err(Error::invalid(format!("theta must be positive, got {}", params.theta)));
    }
    if !(params.eps_h.is_finite() && params.eps_h > 0.0) {
        return Err(Error::invalid(format!("eps_h must be positive, got {}", params.eps_h)));
    }
    let dim = spec.dim();
    let m = spec.interaction_parameter();
    let a = spec.repulsion_a();
    let b = spec.lower_bound_b();
    let lambda0 = a - m * b;
    let lambda0_zero = a - 2.0 * m * b;
    if !(lambda0 > m * b) {
        // Cannot happen for a certified potential (A > 2mb), but guard the
        // arithmetic: an empty interval means no admissible λ at all.
        return Err(Error::invalid(format!(
            "admissible decay interval ({}, {lambda0}] is empty; repulsion margin too small",
            m * b
        )));
    }

    let hull = index_hull(window, grid)?;
    let g = grid.edge();
    let gd = g.powi(dim as i32);
    let theta = params.theta;
    let c_window = 2.0 * theta * hull.window_cubes.len() as f64 * gd;
    let c_phi = theta * gd * spec.sup_norm();
    let upsilon = c_phi * (4.0 * theta * gd + m / params.eps_h);
    let b_eps = (b + params.eps_h * c_phi) * m;

    let lambda = params.lambda.unwrap_or(lambda0);
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let lambda_admissible = lambda > m * b && lambda <= lambda0;

    let delta_fraction = match params.delta_fraction {
        Some(df) => {
            if !(df > 0.0 && df < 1.0) {
                return Err(Error::invalid(format!("delta_fraction must lie in (0,1), got {df}")));
            }
            Some(df)
        }
        // Midpoint of the admissible (B_ε/λ, 1), when that interval exists.
        None if b_eps < lambda => Some(0.5 * (b_eps / lambda + 1.0)),
        None => None,
    };
    let contraction_ok = matches!(delta_fraction, Some(df) if b_eps < df * lambda);
    let log_c_lambda = if contraction_ok {
        delta_fraction.map(|df| upsilon / (1.0 - df))
    } else {
        None
    };

    let vartheta = spec.range() / g + (dim as f64).sqrt();
    let (log_c_alpha, nu_alpha) = match params.alpha {
        Some(alpha) => {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
            }
            let lc = match delta_fraction {
                Some(df) if contraction_ok && df * (alpha * vartheta).exp() < 1.0 => {
                    Some(upsilon / (1.0 - df * (alpha * vartheta).exp()))
                }
                _ => None,
            };
            let nu = lambda / lattice_exp_sum(dim, alpha)?;
            (lc, Some(nu))
        }
        None => (None, None),
    };

    Ok(BoundConstants {
        dim,
        theta,
        eps_h: params.eps_h,
        m_phi: m,
        cube_edge: g,
        window_cube_count: hull.window_cubes.len(),
        c_window,
        c_phi,
        upsilon,
        b_eps,
        lambda0,
        lambda0_zero_bc: lambda0_zero,
        admissible_lo: m * b,
        admissible_hi: lambda0,
        lambda,
        lambda_admissible,
        delta_fraction,
        contraction_ok,
        log_c_lambda,
        vartheta,
        alpha: params.alpha,
        log_c_alpha,
        nu_alpha,
    })
}

impl BoundConstants {
    /// One-point second-moment bound:
    ///
    ///   E[η(Q_k)²] ≤ (1/λ)·[Υ_ε + (b + ε_h·C_φ)·Σ_{j∈∂k} ξ(Q_j)²].
    pub fn one_point_second_moment(&self, xi_neighbor_square_sum: f64) -> f64 {
        (self.upsilon + (self.b_eps / self.m_phi) * xi_neighbor_square_sum) / self.lambda
    }
}

/// E[η(Q_k)²] bound for a concrete cube and boundary condition.
pub fn one_point_second_moment_bound(
    constants: &BoundConstants,
    xi: &DiscreteMeasure,
    cube: &CubeIndex,
    grid: &CubeGrid,
) -> f64 {
    let xi_sum: f64 = grid
        .neighbor_indices(cube)
        .iter()
        .map(|j| {
            let mass = xi.mass_in_cube(grid, j);
            mass * mass
        })
        .sum();
    constants.one_point_second_moment(xi_sum)
}

/// Σ_{k ∈ Z^d} e^{−α|k|} by direct lattice enumeration with a rigorous
/// truncation margin.
fn lattice_exp_sum(dim: usize, alpha: f64) -> Result<f64> {
    // Per-axis cutoff K: the discarded shells satisfy ‖k‖₂ ≥ ‖k‖∞ > K, and
    // shell j has fewer than 2d(2j+1)^{d−1} points, so α·K ≥ 50 + d·ln(2K+3)
    // pushes the tail below ~1e−18 of the retained sum (which is ≥ 1).
    let mut k = 1.0f64;
    for _ in 0..64 {
        k = (50.0 + dim as f64 * (2.0 * k + 3.0).ln()) / alpha;
    }
    let k = k.ceil() as i64;
    let width = 2 * k + 1;
    let count = (width as f64).powi(dim as i32);
    if count > 2e8 {
        return Err(Error::invalid(format!(
            "alpha = {alpha} too small for direct lattice summation in dimension {dim}"
        )));
    }
    let mut total = 0.0;
    let mut idx = vec![-k; dim];
    'outer: loop {
        let norm_sq: i64 = idx.iter().map(|c| c * c).sum();
        total += (-alpha * (norm_sq as f64).sqrt()).exp();
        for axis in 0..dim {
            idx[axis] += 1;
            if idx[axis] <= k {
                continue 'outer;
            }
            idx[axis] = -k;
        }
        break;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_setup() -> (PotentialSpec, CubeGrid, Window) {
        // d=1, core-shell A=10, b=1, δ=R=1 → m=4, g=1.
        let spec = PotentialSpec::core_shell(1, 10.0, 1.0, 1.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let window = Window::centered_block(&grid, 4).unwrap();
        (spec, grid, window)
    }

    #[test]
    fn reference_values() {
        let (spec, grid, window) = reference_setup();
        let c = bound_constants(&spec, &grid, &window, &BoundParams::new(1.0, 1.0)).unwrap();
        assert_relative_eq!(c.m_phi, 4.0);
        assert_relative_eq!(c.lambda0, 6.0);
        assert_relative_eq!(c.lambda0_zero_bc, 2.0);
        assert_relative_eq!(c.c_phi, 10.0);
        // Υ = C_φ(4θg + m/ε_h) = 10·(4 + 4) = 80.
        assert_relative_eq!(c.upsilon, 80.0);
        // B_ε = (b + ε_h C_φ)·m = (1 + 10)·4 = 44.
        assert_relative_eq!(c.b_eps, 44.0);
        // C_Δ = 2θ|K|g = 2·1·4·1 = 8.
        assert_relative_eq!(c.c_window, 8.0);
        assert_eq!(c.window_cube_count, 4);
        assert_relative_eq!(c.vartheta, 2.0);
        // Default λ = λ₀ = 6 < B_ε = 44: no contraction, log C_λ undefined.
        assert!(c.lambda_admissible);
        assert!(!c.contraction_ok);
        assert!(c.log_c_lambda.is_none());
    }

    #[test]
    fn contraction_with_small_eps_h() {
        let (spec, grid, window) = reference_setup();
        let mut params = BoundParams::new(1.0, 0.01);
        params.alpha = Some(0.05);
        let c = bound_constants(&spec, &grid, &window, &params).unwrap();
        // B_ε = (1 + 0.1)·4 = 4.4 < λ = 6; δ̃ defaults to midpoint ≈ 0.8667.
        assert_relative_eq!(c.b_eps, 4.4);
        let df = c.delta_fraction.unwrap();
        assert_relative_eq!(df, (4.4 / 6.0 + 1.0) / 2.0, max_relative = 1e-12);
        assert!(c.contraction_ok);
        // Υ = 10·(4 + 400) = 4040; ln C_λ = Υ/(1−δ̃) is ~3e4 — the plain
        // constant would overflow, hence log domain.
        assert_relative_eq!(c.upsilon, 4040.0);
        assert_relative_eq!(c.log_c_lambda.unwrap(), 4040.0 / (1.0 - df), max_relative = 1e-12);
        // δ̃·e^{αϑ} = 0.8667·e^{0.1} < 1 so the tempered constant exists too.
        let lca = c.log_c_alpha.unwrap();
        assert_relative_eq!(lca, 4040.0 / (1.0 - df * 0.1f64.exp()), max_relative = 1e-12);
    }

    #[test]
    fn tempered_constant_vanishes_when_temper_rate_too_large() {
        let (spec, grid, window) = reference_setup();
        let mut params = BoundParams::new(1.0, 0.01);
        params.alpha = Some(0.2);
        let c = bound_constants(&spec, &grid, &window, &params).unwrap();
        // δ̃·e^{0.4} ≈ 1.29 > 1: no tempered exponential-moment constant,
        // but ν_α is still defined.
        assert!(c.log_c_alpha.is_none());
        assert!(c.nu_alpha.is_some());
    }

    #[test]
    fn admissible_interval_endpoints() {
        let (spec, grid, window) = reference_setup();
        // Interval is (mb, λ₀] = (4, 6].
        for (lambda, ok) in [(4.0, false), (4.0001, true), (5.0, true), (6.0, true), (6.1, false)] {
            let mut params = BoundParams::new(1.0, 1.0);
            params.lambda = Some(lambda);
            let c = bound_constants(&spec, &grid, &window, &params).unwrap();
            assert_eq!(c.lambda_admissible, ok, "lambda = {lambda}");
            assert_relative_eq!(c.admissible_lo, 4.0);
            assert_relative_eq!(c.admissible_hi, 6.0);
        }
    }

    #[test]
    fn purely_repulsive_interval_starts_at_zero() {
        let spec = PotentialSpec::step(1, 10.0, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 1.0).unwrap();
        let window = Window::centered_block(&grid, 2).unwrap();
        let c = bound_constants(&spec, &grid, &window, &BoundParams::new(2.0, 0.5)).unwrap();
        assert_eq!(c.admissible_lo, 0.0);
        assert_relative_eq!(c.admissible_hi, 10.0);
        // b = 0 → B_ε = ε_h·C_φ·m = 0.5·(2·10)·4 = 40.
        assert_relative_eq!(c.b_eps, 40.0);
    }

    #[test]
    fn one_point_bound_formula() {
        let (spec, grid, window) = reference_setup();
        let mut params = BoundParams::new(1.0, 0.01);
        params.lambda = Some(5.0);
        let c = bound_constants(&spec, &grid, &window, &params).unwrap();
        // (Υ + (b + ε_h C_φ)·S)/λ with S = 9: (4040 + 1.1·9)/5.
        assert_relative_eq!(c.one_point_second_moment(9.0), (4040.0 + 1.1 * 9.0) / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn lattice_sum_matches_closed_form_in_one_dimension() {
        // Σ_k e^{−α|k|} = (1+e^{−α})/(1−e^{−α}).
        for alpha in [0.5, 1.0, 2.0] {
            let direct = lattice_exp_sum(1, alpha).unwrap();
            let closed = (1.0 + (-alpha).exp()) / (1.0 - (-alpha).exp());
            assert_relative_eq!(direct, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn uncertified_potential_rejected() {
        let spec = PotentialSpec::free(1, 1.0).unwrap();
        let grid = CubeGrid::new(1, 1.0, 0.0).unwrap();
        let window = Window::centered_block(&grid, 2).unwrap();
        assert!(bound_constants(&spec, &grid, &window, &BoundParams::new(1.0, 1.0)).is_err());
    }
}
