use clap::{Parser, Subcommand};
use gamma_gibbs::config::RunConfig;
use gamma_gibbs::constants::{bound_constants, BoundParams};
use gamma_gibbs::gibbs::{run_specification, thermodynamic_sweep};
use gamma_gibbs::io::{sweep_to_csv, write_dump, write_json, DumpMetadata};
use gamma_gibbs::lattice::Window;
use gamma_gibbs::verify::{run_suite, Suite};
use gamma_gibbs::{rng_stream, Error};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "gamma-gibbs",
    version,
    about = "Sample Gamma random measures and their Gibbs perturbations; verify the identities they must satisfy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw free Gamma-measure samples and write a CSV dump.
    SampleGamma {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run the Gibbs chain; write samples, diagnostics, and constants.
    SampleGibbs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites; exit 1 if any check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// free-measure, gibbs, bounds, all, or negative-controls
        /// (default: the config's `suites` list).
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Growing-window sweep; exit 1 if the tracked statistics have not
    /// stabilized between the last two windows.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exponential-moment rate for the origin cube.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Print the derived interaction constants table.
    Constants {
        #[arg(long)]
        config: PathBuf,
        /// Young-inequality parameter ε_h of the moment bounds.
        #[arg(long, default_value_t = 1.0)]
        eps_h: f64,
        /// Rate λ; defaults to the top of the admissible interval.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                // A numerical guard tripping mid-run is a failed check, not a
                // bad config.
                Error::Numerical(_) => 1,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}

fn load(config: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.chain.seed = s;
        cfg.verify_params.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::SampleGamma { config, seed, out, samples } => {
            let mut cfg = load(&config, seed, out)?;
            if let Some(n) = samples {
                cfg.n_samples = n;
            }
            let mut rng = rng_stream(cfg.seed, 0x6A77A);
            let draws: Result<Vec<_>, _> =
                (0..cfg.n_samples).map(|_| cfg.levy.sample_measure(&cfg.window, &mut rng)).collect();
            let draws = draws?;
            let meta = DumpMetadata::new(&cfg.levy, &cfg.window, cfg.seed, draws.len());
            let (csv, meta_path) = write_dump(&cfg.out_dir.join("gamma_samples"), &draws, &meta)?;
            let mean_atoms =
                draws.iter().map(|s| s.len() as f64).sum::<f64>() / draws.len().max(1) as f64;
            println!("wrote {} samples (mean {:.1} atoms) to {}", draws.len(), mean_atoms, csv.display());
            println!("metadata: {}", meta_path.display());
            Ok(0)
        }

        Command::SampleGibbs { config, seed, out } => {
            let cfg = load(&config, seed, out)?;
            let (samples, diagnostics) = run_specification(&cfg.chain)?;
            let meta = DumpMetadata::new(&cfg.levy, &cfg.window, cfg.seed, samples.len());
            let (csv, _) = write_dump(&cfg.out_dir.join("gibbs_samples"), &samples, &meta)?;
            write_json(&cfg.out_dir.join("gibbs_diagnostics.json"), &diagnostics)?;
            println!("wrote {} thinned states to {}", samples.len(), csv.display());
            println!(
                "acceptance: birth {:.3} death {:.3} resize {:.3}; mass {:.4} ± {:.4} (ESS {:.0})",
                diagnostics.acceptance.birth_rate(),
                diagnostics.acceptance.death_rate(),
                diagnostics.acceptance.resize_rate(),
                diagnostics.mass.mean,
                diagnostics.mass.stderr,
                diagnostics.ess_mass,
            );
            println!(
                "energy audit: {} recomputations, max rel deviation {:.2e}; flux max |z| {:.2}",
                diagnostics.energy_audit_count,
                diagnostics.energy_audit_max_rel,
                diagnostics.flux_max_z,
            );
            if cfg.potential.is_certified() && !cfg.potential.is_free() {
                if let Some(theta) = cfg.levy.theta() {
                    let params = BoundParams::new(theta, 1.0);
                    let constants = bound_constants(&cfg.potential, &cfg.grid, &cfg.window, &params)?;
                    write_json(&cfg.out_dir.join("constants.json"), &constants)?;
                    println!("constants: {}", cfg.out_dir.join("constants.json").display());
                }
            }
            Ok(0)
        }

        Command::Verify { config, suite, seed, out } => {
            let cfg = load(&config, seed, out)?;
            let suites: Vec<Suite> = match suite {
                Some(name) => vec![Suite::from_str(&name)?],
                None => cfg.suites.clone(),
            };
            let mut all_pass = true;
            for s in suites {
                let report = run_suite(s, &cfg.verify_params)?;
                print!("{}", report.render_table());
                write_json(&cfg.out_dir.join(format!("verify_{s}.json")), &report)?;
                all_pass &= report.pass;
            }
            Ok(if all_pass { 0 } else { 1 })
        }

        Command::Sweep { config, seed, out, lambda } => {
            let cfg = load(&config, seed, out)?;
            let windows: Result<Vec<Window>, Error> = cfg
                .sweep_cubes
                .iter()
                .map(|n| Window::centered_block(&cfg.grid, *n))
                .collect();
            let windows = windows?;
            let lambda = lambda.or(cfg.sweep_lambda).unwrap_or_else(|| {
                if cfg.potential.is_certified() && !cfg.potential.is_free() {
                    0.25 * (cfg.potential.repulsion_a()
                        - cfg.potential.interaction_parameter() * cfg.potential.lower_bound_b())
                } else {
                    0.5
                }
            });
            let report = thermodynamic_sweep(&windows, &cfg.boundary, &cfg.chain, lambda)?;
            write_json(&cfg.out_dir.join("sweep.json"), &report)?;
            std::fs::write(cfg.out_dir.join("sweep.csv"), sweep_to_csv(&report))?;
            println!("window_cpa  mass                exp(-mass)          exp-moment(origin)");
            for e in &report.entries {
                println!(
                    "{:>10}  {:>8.4} ± {:<7.4} {:>8.4} ± {:<7.4} {:>8.4} ± {:<7.4}",
                    e.window_cubes,
                    e.mass_obs.mean,
                    e.mass_obs.stderr,
                    e.exp_neg_mass_obs.mean,
                    e.exp_neg_mass_obs.stderr,
                    e.exp_moment_origin.mean,
                    e.exp_moment_origin.stderr,
                );
            }
            for (pair, z) in report.successive_z.iter().enumerate() {
                println!(
                    "windows {} -> {}: z = [{:.2}, {:.2}, {:.2}]",
                    report.entries[pair].window_cubes,
                    report.entries[pair + 1].window_cubes,
                    z[0],
                    z[1],
                    z[2]
                );
            }
            if report.stabilized {
                println!("stabilized: successive differences within 4 combined SE");
                Ok(0)
            } else {
                println!("NOT stabilized: last two windows differ by more than 4 combined SE");
                Ok(1)
            }
        }

        Command::Constants { config, eps_h, lambda } => {
            let cfg = load(&config, None, None)?;
            let theta = cfg.levy.theta().ok_or_else(|| {
                Error::invalid("constants are derived for the Gamma intensity (set levy.theta)")
            })?;
            let mut params = BoundParams::new(theta, eps_h);
            params.lambda = lambda;
            let c = bound_constants(&cfg.potential, &cfg.grid, &cfg.window, &params)?;
            let row = |k: &str, v: String| println!("{k:<28} {v}");
            row("dimension", format!("{}", c.dim));
            row("theta", format!("{}", c.theta));
            row("eps_h", format!("{}", c.eps_h));
            row("cube_edge g", format!("{}", c.cube_edge));
            row("window cubes |K|", format!("{}", c.window_cube_count));
            row("m_phi", format!("{}", c.m_phi));
            row("C_Delta", format!("{}", c.c_window));
            row("C_phi", format!("{}", c.c_phi));
            row("Upsilon_eps", format!("{}", c.upsilon));
            row("B_eps", format!("{}", c.b_eps));
            row("lambda0", format!("{}", c.lambda0));
            row("lambda0 (zero boundary)", format!("{}", c.lambda0_zero_bc));
            row(
                "admissible lambda",
                format!("({}, {}]", c.admissible_lo, c.admissible_hi),
            );
            row(
                "lambda",
                format!("{}{}", c.lambda, if c.lambda_admissible { "" } else { "  (inadmissible)" }),
            );
            if let Some(d) = c.delta_fraction {
                row("delta_tilde", format!("{d}"));
            }
            row("contraction (B < d*lambda)", format!("{}", c.contraction_ok));
            match c.log_c_lambda {
                Some(l) => row("ln C_lambda", format!("{l}")),
                None => row("ln C_lambda", "unbounded (contraction fails)".into()),
            }
            row("vartheta", format!("{}", c.vartheta));
            if let Some(a) = c.alpha {
                row("alpha", format!("{a}"));
                match c.log_c_alpha {
                    Some(l) => row("ln C_alpha", format!("{l}")),
                    None => row("ln C_alpha", "unbounded at this alpha".into()),
                }
                if let Some(n) = c.nu_alpha {
                    row("nu_alpha", format!("{n}"));
                }
            }
            Ok(0)
        }
    }
}
