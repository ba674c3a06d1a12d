use chanwave::config::{RunConfig, OUTPUT_DIR_ENV};
use chanwave::error::Result;
use chanwave::pipeline;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "chanwave",
    version,
    about = "Traveling-wave fronts on channel domains: construction and certification"
)]
struct Cli {
    /// JSON configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for output files; overrides the config and the
    /// environment variable.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Wave speed, overriding the config.
    #[arg(long, global = true)]
    speed: Option<f64>,
    /// Seed for the randomized checks, overriding the config.
    #[arg(long, global = true)]
    random_seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-section Dirichlet eigenvalues: eigs.csv and a regime report
    Eigs {
        /// How many eigenvalues to list (default 8, capped by the grid)
        #[arg(long)]
        count: Option<usize>,
    },
    /// Cross-section ground state and critical set: report.json
    Ground,
    /// Full traveling-wave construction: wave.csv and report.json
    Wave {
        /// Write the negated wave (the equation is odd)
        #[arg(long)]
        negate: bool,
        /// Attempt the construction even above the speed threshold
        #[arg(long)]
        force: bool,
    },
    /// Check a persisted wave file against the configuration: verify.json
    Verify {
        /// Path to a wave.csv produced by the wave subcommand
        solution: PathBuf,
    },
    /// Independent wave runs over a list of speeds: sweep.csv
    Sweep {
        /// Comma-separated speeds, overriding the config's sweep list
        #[arg(long, value_delimiter = ',')]
        speeds: Vec<f64>,
    },
    /// Integrate the wave in the lab frame and measure the front speed
    Simulate {
        /// Final time, overriding the config
        #[arg(long)]
        t_end: Option<f64>,
        /// Time step, overriding the config
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<u8> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        // Route through the environment override so the config hash in the
        // report stays independent of where the artifacts land.
        std::env::set_var(OUTPUT_DIR_ENV, dir);
    }
    if let Some(speed) = cli.speed {
        config.speed = speed;
    }
    if let Some(seed) = cli.random_seed {
        config.random_seed = seed;
    }
    config.validate()?;
    let out = config.resolved_output_dir();

    match cli.command {
        Command::Eigs { count } => {
            let interior = config.cross_grid()?.interior_nodes();
            let count = count.unwrap_or(pipeline::DEFAULT_EIG_COUNT.min(interior));
            let report = pipeline::cmd_eigs(&config, count)?;
            let regime = report.regime.as_ref().expect("eigs report carries a regime");
            println!(
                "{} eigenvalue(s), {} below one (case {}); threshold {:.6}",
                count, regime.below_one, regime.case_label, regime.threshold
            );
            println!("wrote {} and {}", out.join("eigs.csv").display(), out.join("report.json").display());
        }
        Command::Ground => {
            let report = pipeline::cmd_ground(&config)?;
            let ground = report.ground.as_ref().expect("ground report carries the state");
            println!(
                "ground state: J = {:.6e}, residual {:.3e}",
                ground.j_value, ground.residual
            );
            if let Some(points) = &report.cross_critical_points {
                println!("section critical points found: {}", points.len());
            }
            println!("wrote {}", out.join("report.json").display());
        }
        Command::Wave { negate, force } => {
            let report = pipeline::cmd_wave(&config, negate, force)?;
            let wave = report.wave.as_ref().expect("wave report carries the solve");
            println!(
                "wave at c = {}: residual {:.3e}, {} Newton step(s), energy gap {:.6e}",
                config.speed,
                wave.residual,
                wave.newton_iterations,
                wave.j_right - wave.j_left
            );
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} and {}", out.join("wave.csv").display(), out.join("report.json").display());
        }
        Command::Verify { solution } => {
            let report = pipeline::cmd_verify(&config, &solution)?;
            for check in &report.checks {
                println!(
                    "{:<26} {}  observed {:.3e}  bound {:.3e}",
                    check.name,
                    if check.passed { "pass" } else { "FAIL" },
                    check.observed,
                    check.bound
                );
            }
            println!("wrote {}", out.join("verify.json").display());
            if !report.all_passed {
                eprintln!("verification failed");
                return Ok(4);
            }
            println!("all checks passed");
        }
        Command::Sweep { speeds } => {
            if !speeds.is_empty() {
                config.sweep = speeds;
            }
            let report = pipeline::cmd_sweep(&config)?;
            let rows = report.sweep.as_ref().expect("sweep report carries the rows");
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} speed(s) processed, {} failed", rows.len(), failures);
            for row in rows {
                if let Some(err) = &row.error {
                    eprintln!("c = {}: {err}", row.c);
                }
            }
            println!("wrote {} and {}", out.join("sweep.csv").display(), out.join("report.json").display());
        }
        Command::Simulate { t_end, dt } => {
            if let Some(t_end) = t_end {
                config.evolution.t_end = t_end;
            }
            if let Some(dt) = dt {
                config.evolution.dt = dt;
            }
            config.validate()?;
            let report = pipeline::cmd_simulate(&config)?;
            let evolution = report.evolution.as_ref().expect("simulate report carries the run");
            match evolution.speed_measured {
                Some(v) => println!(
                    "front speed {:.6} over t in [{}, {}] (expected {})",
                    v,
                    0.5 * evolution.t_end,
                    evolution.t_end,
                    evolution.expected_speed
                ),
                None => println!("front level set lost; no speed measured"),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", out.join("report.json").display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
