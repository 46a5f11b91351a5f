use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uir_cli::bench::run_benchmark;
use uir_cli::config::{ExperimentConfig, NoiseSpec};
use uir_cli::data::generate_dataset;
use uir_cli::diagnose::{diagnose, DiagnoseOptions, Perturbation};
use uir_cli::emit::{write_csv_file, write_svg_file};
use uir_cli::{CliError, CliResult};
use uir_core::deconv::{estimate, EstimatorConfig};
use uir_core::isotonic::DesignPoints;

#[derive(Parser)]
#[command(name = "uir", version, about = "Uncoupled isotonic regression by minimum Wasserstein deconvolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one synthetic dataset and write it as a CSV with columns x, y.
    ///
    /// The y column is shuffled: rows do not pair responses with design points.
    Simulate {
        /// Experiment configuration (JSON); its regression, V and noise are used.
        #[arg(long)]
        config: PathBuf,
        /// Sample size; defaults to the first entry of `sizes`.
        #[arg(long)]
        n: Option<usize>,
        /// Seed; defaults to the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the estimator to a CSV with columns x and y.
    ///
    /// Row pairing is ignored: only the set of x values and the multiset of
    /// y values are used, as in the uncoupled model. Writes x, fitted value.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// gaussian, laplace, uniform or point-mass.
        #[arg(long)]
        noise_family: String,
        /// sd (gaussian), scale (laplace) or half-width (uniform).
        #[arg(long)]
        noise_param: Option<f64>,
        /// Bound V on |f|.
        #[arg(long = "V", value_name = "V")]
        v: f64,
        #[arg(long, default_value_t = EstimatorConfig::default().max_iterations)]
        max_iter: usize,
        /// Frank–Wolfe gap tolerance; defaults to 1e-6 (V + sigma)^2.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed for shuffling the responses before fitting; the fit does not depend on it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all methods over the configured sizes and replications.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Rows as CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional log-log plot of median error against n.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Exponent plotted in the SVG; defaults to the smallest in the p-list.
        #[arg(long)]
        plot_p: Option<f64>,
    },
    /// Run the numerical verification sweeps; exits with status 2 on any failure.
    Diagnose {
        /// Write the key/value report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DiagnoseOptions::default().seed)]
        seed: u64,
        /// Shift the moment-matched measures by this amount (negative test).
        #[arg(long, hide = true)]
        perturb_moments: Option<f64>,
    },
}

fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
}

fn read_xy(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("input has no '{name}' column")))
    };
    let (ix, iy) = (column("x")?, column("y")?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("unparsable number in row {:?}", record.position())))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

fn write_xy(path: &Path, header: [&str; 2], xs: &[f64], ys: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (x, y) in xs.iter().zip(ys) {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Success, or the run completed with failed diagnostics.
enum Outcome {
    Done,
    DiagnosticsFailed,
}

fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Simulate { config, n, seed, out } => {
            let config = read_config(&config)?;
            let n = n.unwrap_or(config.sizes[0]);
            let noise = config.noise.build()?;
            let data = generate_dataset(&config.regression, config.v, n, &noise, seed.unwrap_or(config.seed))?;
            write_xy(&out, ["x", "y"], data.x.as_slice(), &data.y)?;
        }
        Command::Estimate {
            input,
            noise_family,
            noise_param,
            v,
            max_iter,
            tol,
            seed,
            out,
        } => {
            let noise = NoiseSpec::from_name(&noise_family, noise_param)?.build()?;
            let (xs, mut ys) = read_xy(&input)?;
            ys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let design = DesignPoints::from_unordered(xs)?;
            let config = EstimatorConfig {
                max_iterations: max_iter,
                fw_gap_tolerance: tol,
                ..EstimatorConfig::default()
            };
            let fit = estimate(&design, &ys, &noise, v, &config)?;
            log::info!(
                "stopped by {:?} after {} iterations, gap {:e}",
                fit.terminated_by,
                fit.trace.len(),
                fit.trace.last().map_or(f64::NAN, |t| t.fw_gap)
            );
            write_xy(&out, ["x", "fitted"], design.as_slice(), fit.g_hat.values())?;
        }
        Command::Bench {
            config,
            out,
            svg,
            plot_p,
        } => {
            let config = read_config(&config)?;
            let rows = run_benchmark(&config)?;
            write_csv_file(&rows, &out)?;
            if let Some(path) = svg {
                write_svg_file(&rows, plot_p, &path)?;
            }
        }
        Command::Diagnose {
            out,
            seed,
            perturb_moments,
        } => {
            let options = DiagnoseOptions {
                seed,
                perturbation: perturb_moments.map(Perturbation::MomentGap),
            };
            let report = diagnose(&options)?;
            let table = report.to_table();
            match out {
                Some(path) => std::fs::write(path, &table)?,
                None => print!("{table}"),
            }
            if !report.all_passed() {
                return Ok(Outcome::DiagnosticsFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::DiagnosticsFailed) => {
            eprintln!("diagnostics failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
