//! Thin JSON façade over gamma-gibbs for the browser playground.
//! Every entry point returns a JSON string: either the payload or
//! `{"error": "..."}` so the page can surface bad inputs without panics.

use gamma_gibbs::gibbs::{run_specification, ChainConfig};
use gamma_gibbs::lattice::{CubeGrid, Window};
use gamma_gibbs::levy::{gamma_laplace_exact, LevySpec};
use gamma_gibbs::measure::DiscreteMeasure;
use gamma_gibbs::potential::PotentialSpec;
use gamma_gibbs::rng_stream;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!(r#"{{"error":"{e}"}}"#))
}

fn err_json(msg: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": msg.to_string() }))
}

#[derive(Serialize)]
struct MeasureOut {
    atoms: Vec<[f64; 2]>,
    total_mass: f64,
    count: usize,
}

impl MeasureOut {
    fn from_measure(m: &DiscreteMeasure) -> Self {
        MeasureOut {
            atoms: m.atoms().iter().map(|a| [a.position[0], a.mark]).collect(),
            total_mass: m.total_mass(),
            count: m.len(),
        }
    }
}

/// One Gamma random measure on [0, width): atom positions and marks.
#[wasm_bindgen]
pub fn sample_gamma(theta: f64, trunc: f64, width: f64, seed: u32) -> String {
    let levy = match LevySpec::gamma(theta, trunc) {
        Ok(l) => l,
        Err(e) => return err_json(e),
    };
    let window = match Window::new_box(vec![0.0], vec![width]) {
        Ok(w) => w,
        Err(e) => return err_json(e),
    };
    let mut rng = rng_stream(seed as u64, 0x6A77);
    match levy.sample_measure(&window, &mut rng) {
        Ok(m) => to_json(&MeasureOut::from_measure(&m)),
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct ChainOut {
    trace: Vec<f64>,
    final_sample: MeasureOut,
    mean_mass: f64,
    mass_se: f64,
    birth_rate: f64,
    death_rate: f64,
    resize_rate: f64,
    n_samples: usize,
}

/// Short birth/death/resize chain for the Gibbs perturbation on a 3-cube
/// window (d = 1).  attraction = 0 gives the pure step potential.
#[wasm_bindgen]
pub fn sample_gibbs(theta: f64, repulsion: f64, attraction: f64, n_steps: u32, seed: u32) -> String {
    let n_steps = (n_steps as u64).clamp(2_000, 2_000_000);
    let levy = match LevySpec::gamma(theta, 1e-4) {
        Ok(l) => l,
        Err(e) => return err_json(e),
    };
    let potential = if attraction == 0.0 {
        PotentialSpec::step(1, repulsion, 1.0)
    } else {
        PotentialSpec::core_shell(1, repulsion, attraction, 1.0, 1.0)
    };
    let potential = match potential {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let grid = match CubeGrid::new(1, 1.0, 1.0) {
        Ok(g) => g,
        Err(e) => return err_json(e),
    };
    let window = match Window::centered_block(&grid, 3) {
        Ok(w) => w,
        Err(e) => return err_json(e),
    };
    let mut config = ChainConfig::new(levy, potential, window.clone(), DiscreteMeasure::empty(window));
    config.seed = seed as u64;
    config.n_steps = n_steps;
    config.burn_in = n_steps / 5;
    // Aim for a few hundred trace points regardless of chain length.
    config.thinning = ((n_steps - config.burn_in) / 400).max(1);
    let (samples, diag) = match run_specification(&config) {
        Ok(out) => out,
        Err(e) => return err_json(e),
    };
    let trace: Vec<f64> = samples.iter().map(|s| s.total_mass()).collect();
    let last = samples.last().cloned().unwrap_or_else(|| DiscreteMeasure::empty(config.window.clone()));
    to_json(&ChainOut {
        trace,
        final_sample: MeasureOut::from_measure(&last),
        mean_mass: diag.mass.mean,
        mass_se: diag.mass.stderr,
        birth_rate: diag.acceptance.birth_rate(),
        death_rate: diag.acceptance.death_rate(),
        resize_rate: diag.acceptance.resize_rate(),
        n_samples: diag.n_samples,
    })
}

#[derive(Serialize)]
struct LaplaceOut {
    t: Vec<f64>,
    empirical: Vec<f64>,
    exact: Vec<f64>,
    se: Vec<f64>,
}

/// Empirical Laplace transform E[e^{−t·η(Δ)}] on a grid of t against the
/// closed form (1 + t)^{−θ|Δ|}.
#[wasm_bindgen]
pub fn laplace_curve(theta: f64, volume: f64, n_samples: u32, seed: u32) -> String {
    let n = (n_samples as usize).clamp(100, 200_000);
    let levy = match LevySpec::gamma(theta, 1e-6) {
        Ok(l) => l,
        Err(e) => return err_json(e),
    };
    let window = match Window::new_box(vec![0.0], vec![volume]) {
        Ok(w) => w,
        Err(e) => return err_json(e),
    };
    let mut rng = rng_stream(seed as u64, 0x1AC3);
    let mut masses = Vec::with_capacity(n);
    for _ in 0..n {
        match levy.sample_measure(&window, &mut rng) {
            Ok(m) => masses.push(m.total_mass()),
            Err(e) => return err_json(e),
        }
    }
    let ts: Vec<f64> = (0..=24).map(|i| i as f64 * 0.125).collect();
    let mut empirical = Vec::with_capacity(ts.len());
    let mut exact = Vec::with_capacity(ts.len());
    let mut se = Vec::with_capacity(ts.len());
    for &t in &ts {
        let vals: Vec<f64> = masses.iter().map(|m| (-t * m).exp()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        empirical.push(mean);
        se.push((var / n as f64).sqrt());
        exact.push(gamma_laplace_exact(theta, volume, t));
    }
    to_json(&LaplaceOut { t: ts, empirical, exact, se })
}
