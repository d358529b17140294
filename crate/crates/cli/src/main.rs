use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use mnpcomm_cli::{
    run_impulse_response, run_magnetization_curve, run_ser_sweep, run_validate, ExperimentConfig, ImpulseSweep,
    MagnetizationSweep, ResultTable, SerSweep,
};

/// Log filter variable, e.g. `MNPCOMM_LOG=info`.
const LOG_ENV: &str = "MNPCOMM_LOG";

#[derive(Parser)]
#[command(name = "mnpcomm", version, about = "Magnetic nanoparticle link experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides a config key, e.g. `--set field_gradient=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Magnetization M(B) for several core radii.
    Magnetization {
        /// Core radii in nm; default mean_radius ∓ sd_radius and the mean.
        #[arg(long, value_delimiter = ',')]
        radii_nm: Vec<f64>,
        /// Largest flux density in mT.
        #[arg(long, default_value_t = 2.0)]
        b_max_mt: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Expected receiver count after a single release.
    Impulse {
        /// |∂B/∂z| values in T/m.
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0])]
        gradients: Vec<f64>,
        #[arg(long, default_value_t = 1.8)]
        t_start: f64,
        #[arg(long, default_value_t = 2.2)]
        t_end: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Also run the particle simulation.
        #[arg(long)]
        simulate: bool,
        /// Omit the equilibrium-approximation columns.
        #[arg(long)]
        no_equilibrium: bool,
    },
    /// Symbol error rate against particles per pulse.
    Ser {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 5, 10, 20, 50, 100, 200, 500, 1000])]
        n_tx: Vec<usize>,
        /// Flow velocities as multiples of `flow_velocity`.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.8, 1.2])]
        flow_scales: Vec<f64>,
        /// Also estimate the SER by Monte Carlo over `n_realizations` sequences.
        #[arg(long)]
        simulate: bool,
    },
    /// Run the invariant and oracle checks; exit code 2 if any fails.
    Validate,
}

fn emit(table: &ResultTable, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(&mut w)?;
            w.flush()
        }
        None => table.write_csv(io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let mut cfg = match ExperimentConfig::resolve(cli.common.config.as_deref(), &cli.common.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }

    let mut status = ExitCode::SUCCESS;
    let result = match cli.command {
        Command::Magnetization {
            radii_nm,
            b_max_mt,
            points,
        } => run_magnetization_curve(
            &cfg,
            &MagnetizationSweep {
                radii: radii_nm.iter().map(|r| r * 1e-9).collect(),
                b_max: b_max_mt * 1e-3,
                points,
            },
        ),
        Command::Impulse {
            gradients,
            t_start,
            t_end,
            points,
            simulate,
            no_equilibrium,
        } => run_impulse_response(
            &cfg,
            &ImpulseSweep {
                gradients,
                t_start,
                t_end,
                points,
                simulate,
                equilibrium: !no_equilibrium,
            },
        ),
        Command::Ser {
            n_tx,
            flow_scales,
            simulate,
        } => run_ser_sweep(
            &cfg,
            &SerSweep {
                n_tx,
                flow_scales,
                simulate,
            },
        ),
        Command::Validate => run_validate(&cfg).map(|(table, all_passed)| {
            if !all_passed {
                status = ExitCode::from(2);
            }
            table
        }),
    };

    let table = match result {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = emit(&table, cli.common.out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    status
}
