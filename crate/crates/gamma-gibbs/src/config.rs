//! Run configuration: a single JSON file describing intensity, grid,
//! potential, window, chain, and output settings.
//!
//! Parsing is strict: unknown keys are rejected, duplicate keys are an error
//! naming the key, and every nested invariant (including pair-potential
//! certification) runs at parse time so a config that loads is a config that
//! runs.  Diagnostics carry the key path of the offending field.

use crate::gibbs::ChainConfig;
use crate::lattice::{CubeGrid, CubeIndex, Window};
use crate::levy::LevySpec;
use crate::measure::{Atom, DiscreteMeasure};
use crate::potential::{DiagonalMode, PotentialSpec};
use crate::verify::{Suite, SuiteParams};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable consulted when the config omits `out_dir`.
pub const OUT_DIR_ENV: &str = "GAMMA_GIBBS_OUT_DIR";

// ---------------------------------------------------------------------------
// Raw file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchema {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out_dir: Option<String>,
    levy: LevyFile,
    grid: GridFile,
    potential: PotentialFile,
    window: WindowFile,
    #[serde(default)]
    chain: ChainFile,
    #[serde(default)]
    boundary: Vec<AtomFile>,
    #[serde(default)]
    suites: Option<Vec<String>>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    verify: VerifyFile,
    #[serde(default)]
    sweep: SweepFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevyFile {
    theta: f64,
    #[serde(default)]
    trunc: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    dimension: usize,
    delta: f64,
    range: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialFile {
    family: String,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    repulsion: Option<f64>,
    #[serde(default)]
    attraction: Option<f64>,
    #[serde(default)]
    diagonal: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    #[serde(default)]
    cubes_per_axis: Option<usize>,
    #[serde(default)]
    cube_indices: Option<Vec<Vec<i64>>>,
    #[serde(default, rename = "box")]
    box_bounds: Option<BoxFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainFile {
    #[serde(default)]
    n_steps: Option<u64>,
    #[serde(default)]
    burn_in: Option<u64>,
    #[serde(default)]
    thinning: Option<u64>,
    #[serde(default)]
    move_mix: Option<[f64; 3]>,
    #[serde(default)]
    temper_alpha: Option<f64>,
    #[serde(default)]
    support_b_log: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomFile {
    position: Vec<f64>,
    mark: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyFile {
    #[serde(default)]
    n_samples: Option<usize>,
    #[serde(default)]
    chain_steps: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    #[serde(default)]
    cubes: Option<Vec<usize>>,
    #[serde(default)]
    lambda: Option<f64>,
}

// ---------------------------------------------------------------------------
// Duplicate-key-rejecting JSON value
// ---------------------------------------------------------------------------

/// `serde_json::Value` silently keeps the last duplicate; this wrapper walks
/// the document through the map visitor, where every key is observed, and
/// errors on the first repeat.
struct CheckedValue(serde_json::Value);

impl<'de> Deserialize<'de> for CheckedValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = CheckedValue;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("any JSON value")
            }

            fn visit_bool<E>(self, v: bool) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::Bool(v)))
            }

            fn visit_i64<E>(self, v: i64) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::from(v)))
            }

            fn visit_u64<E>(self, v: u64) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::from(v)))
            }

            fn visit_f64<E>(self, v: f64) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::from(v)))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::String(v.to_owned())))
            }

            fn visit_string<E>(self, v: String) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::String(v)))
            }

            fn visit_unit<E>(self) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::Null))
            }

            fn visit_none<E>(self) -> std::result::Result<CheckedValue, E> {
                Ok(CheckedValue(serde_json::Value::Null))
            }

            fn visit_seq<A: serde::de::SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<CheckedValue, A::Error> {
                let mut items = Vec::new();
                while let Some(CheckedValue(v)) = seq.next_element()? {
                    items.push(v);
                }
                Ok(CheckedValue(serde_json::Value::Array(items)))
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<CheckedValue, A::Error> {
                let mut obj = serde_json::Map::new();
                while let Some(key) = map.next_key::<String>()? {
                    let CheckedValue(value) = map.next_value()?;
                    if obj.insert(key.clone(), value).is_some() {
                        return Err(serde::de::Error::custom(format!("duplicate key `{key}`")));
                    }
                }
                Ok(CheckedValue(serde_json::Value::Object(obj)))
            }
        }
        d.deserialize_any(V)
    }
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

/// Fully validated run configuration; constructing one certifies the
/// potential and checks every chain invariant.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub levy: LevySpec,
    pub potential: PotentialSpec,
    pub grid: CubeGrid,
    pub window: Window,
    pub boundary: DiscreteMeasure,
    pub chain: ChainConfig,
    pub suites: Vec<Suite>,
    /// Draw count for `sample-gamma`.
    pub n_samples: usize,
    pub verify_params: SuiteParams,
    pub sweep_cubes: Vec<usize>,
    pub sweep_lambda: Option<f64>,
}

fn cfg_err(path: &str, message: impl std::fmt::Display) -> Error {
    Error::Config { path: path.to_string(), message: message.to_string() }
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path.as_ref())?;
        RunConfig::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<RunConfig> {
        // Pass 1: structural parse with duplicate-key detection.
        let mut de = serde_json::Deserializer::from_str(text);
        let CheckedValue(value) =
            serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        // Pass 2: schema with key-path diagnostics.
        let schema: FileSchema = serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        RunConfig::from_schema(schema)
    }

    fn from_schema(file: FileSchema) -> Result<RunConfig> {
        let seed = file.seed.unwrap_or(0);
        let out_dir = file
            .out_dir
            .or_else(|| std::env::var(OUT_DIR_ENV).ok())
            .unwrap_or_else(|| "runs".to_string());

        let trunc = file.levy.trunc.unwrap_or(1e-6);
        let levy = LevySpec::gamma(file.levy.theta, trunc).map_err(|e| cfg_err("levy", e))?;

        let grid = CubeGrid::new(file.grid.dimension, file.grid.delta, file.grid.range)
            .map_err(|e| cfg_err("grid", e))?;

        let potential = build_potential(&file.potential, &file.grid)?;

        let window = build_window(&file.window, &grid)?;

        let boundary_atoms: Vec<Atom> = file
            .boundary
            .iter()
            .map(|a| Atom::new(a.position.clone(), a.mark))
            .collect();
        let boundary = if boundary_atoms.is_empty() {
            DiscreteMeasure::empty(window.clone())
        } else {
            DiscreteMeasure::with_bounding_window(file.grid.dimension, boundary_atoms)
                .map_err(|e| cfg_err("boundary", e))?
        };
        for (i, atom) in boundary.atoms().iter().enumerate() {
            if window.contains(&atom.position) {
                return Err(cfg_err(
                    &format!("boundary[{i}]"),
                    "boundary atoms must lie outside the window",
                ));
            }
        }

        let mut chain = ChainConfig::new(levy.clone(), potential.clone(), window.clone(), boundary.clone());
        chain.seed = seed;
        if let Some(v) = file.chain.n_steps {
            chain.n_steps = v;
        }
        if let Some(v) = file.chain.burn_in {
            chain.burn_in = v;
        } else if file.chain.n_steps.is_some() {
            chain.burn_in = chain.n_steps / 5;
        }
        if let Some(v) = file.chain.thinning {
            chain.thinning = v;
        }
        if let Some([b, d, r]) = file.chain.move_mix {
            chain.move_mix = (b, d, r);
        }
        if let Some(v) = file.chain.temper_alpha {
            chain.temper_alpha = v;
        }
        if let Some(v) = file.chain.support_b_log {
            chain.support_b_log = v;
        }
        chain.validate().map_err(|e| cfg_err("chain", e))?;

        let suites = file
            .suites
            .unwrap_or_else(|| vec!["all".to_string()])
            .iter()
            .map(|s| Suite::from_str(s).map_err(|e| cfg_err("suites", e)))
            .collect::<Result<Vec<_>>>()?;

        let mut verify_params = SuiteParams {
            seed,
            theta: file.levy.theta,
            trunc,
            ..SuiteParams::default()
        };
        if let Some(v) = file.verify.n_samples {
            if v < 100 {
                return Err(cfg_err("verify.n_samples", "need at least 100 samples"));
            }
            verify_params.n_samples = v;
        }
        if let Some(v) = file.verify.chain_steps {
            if v < 1000 {
                return Err(cfg_err("verify.chain_steps", "need at least 1000 steps"));
            }
            verify_params.chain_steps = v;
        }

        let sweep_cubes = file.sweep.cubes.unwrap_or_else(|| vec![1, 3, 5]);
        if sweep_cubes.len() < 2 {
            return Err(cfg_err("sweep.cubes", "need at least two window sizes"));
        }
        if sweep_cubes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("sweep.cubes", "window sizes must be strictly increasing"));
        }
        if let Some(l) = file.sweep.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(cfg_err("sweep.lambda", "must be a positive real"));
            }
        }

        Ok(RunConfig {
            seed,
            out_dir: PathBuf::from(out_dir),
            levy,
            potential,
            grid,
            window,
            boundary,
            chain,
            suites,
            n_samples: file.samples.unwrap_or(100),
            verify_params,
            sweep_cubes,
            sweep_lambda: file.sweep.lambda,
        })
    }
}

fn build_potential(file: &PotentialFile, grid: &GridFile) -> Result<PotentialSpec> {
    let reject = |key: &str, msg: &str| Err(cfg_err(&format!("potential.{key}"), msg));
    let spec = match file.family.as_str() {
        "step" => {
            let Some(height) = file.height else {
                return reject("height", "step potential requires `height`");
            };
            if file.repulsion.is_some() || file.attraction.is_some() {
                return reject("family", "step potential takes only `height`");
            }
            PotentialSpec::step(grid.dimension, height, grid.range)
        }
        "core_shell" => {
            let Some(repulsion) = file.repulsion else {
                return reject("repulsion", "core-shell potential requires `repulsion`");
            };
            let Some(attraction) = file.attraction else {
                return reject("attraction", "core-shell potential requires `attraction`");
            };
            if file.height.is_some() {
                return reject("height", "core-shell potential does not take `height`");
            }
            PotentialSpec::core_shell(grid.dimension, repulsion, attraction, grid.delta, grid.range)
        }
        "free" => {
            if file.height.is_some() || file.repulsion.is_some() || file.attraction.is_some() {
                return reject("family", "free potential takes no parameters");
            }
            PotentialSpec::free(grid.dimension, grid.delta)
        }
        other => {
            return reject(
                "family",
                &format!("unknown family `{other}` (expected step, core_shell, or free)"),
            )
        }
    };
    let spec = spec.map_err(|e| match e {
        Error::Certification(rej) if rej.clause == crate::error::PotentialClause::Repulsion => {
            cfg_err("potential.repulsion_condition", rej)
        }
        other => cfg_err("potential", other),
    })?;
    match file.diagonal.as_deref() {
        None => Ok(spec),
        Some("include") => Ok(spec.with_diagonal(DiagonalMode::Include)),
        Some("exclude") => Ok(spec.with_diagonal(DiagonalMode::Exclude)),
        Some(other) => Err(cfg_err(
            "potential.diagonal",
            format!("unknown mode `{other}` (expected include or exclude)"),
        )),
    }
}

fn build_window(file: &WindowFile, grid: &CubeGrid) -> Result<Window> {
    let given = [
        file.cubes_per_axis.is_some(),
        file.cube_indices.is_some(),
        file.box_bounds.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if given != 1 {
        return Err(cfg_err(
            "window",
            "specify exactly one of `cubes_per_axis`, `cube_indices`, `box`",
        ));
    }
    if let Some(n) = file.cubes_per_axis {
        return Window::centered_block(grid, n).map_err(|e| cfg_err("window.cubes_per_axis", e));
    }
    if let Some(indices) = &file.cube_indices {
        let cubes: Vec<CubeIndex> = indices.iter().map(|k| CubeIndex(k.clone())).collect();
        return Window::from_cubes(grid, cubes).map_err(|e| cfg_err("window.cube_indices", e));
    }
    let b = file.box_bounds.as_ref().expect("exactly one branch");
    Window::new_box(b.lo.clone(), b.hi.clone()).map_err(|e| cfg_err("window.box", e))
}
