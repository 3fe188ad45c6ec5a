use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tvflow_cli::color::Colorspace;
use tvflow_cli::{cmd_approx_domain, cmd_denoise, cmd_run, cmd_verify, summary_table, Brightness, DenoiseOptions, Overrides};

/// Total variation flow of manifold-valued maps.
#[derive(Parser, Debug)]
#[command(name = "tvflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a flow described by a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Denoise a PNG or PPM image through a colour map
    Denoise {
        image: PathBuf,
        #[arg(long, value_enum, default_value = "chromaticity_sphere")]
        colorspace: Colorspace,
        /// Brightness handling in chromaticity mode
        #[arg(long, value_enum, default_value = "flow")]
        brightness: Brightness,
        #[arg(long, default_value = "denoised")]
        out: PathBuf,
        #[arg(long, default_value_t = tvflow_cli::commands::DENOISE_EPS)]
        eps: f64,
        #[arg(long, default_value_t = tvflow_cli::commands::DENOISE_T_END)]
        t_end: f64,
    },
    /// Run a verification suite; exits nonzero if any check fails
    Verify {
        /// energy, gradient, blowup, extinction-1d, ball, contraction, forms,
        /// convexdom, torus or all
        #[arg(long)]
        suite: String,
        /// JSON-lines report file (stdout if absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rasterize the inner smooth approximant of a convex body
    ApproxDomain {
        /// Halfspace file, one `n_1 .. n_m c` line per facet
        body: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Cells per axis, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Cell size (default: longest side of length one)
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "domain")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            eps,
            t_end,
            seed,
        } => {
            let s = cmd_run(&config, &Overrides { out, eps, t_end, seed })?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(true)
        }
        Command::Denoise {
            image,
            colorspace,
            brightness,
            out,
            eps,
            t_end,
        } => {
            let mut opts = DenoiseOptions::new(colorspace, out);
            opts.brightness = brightness;
            opts.flow.epsilon = eps;
            opts.flow.t_end = t_end;
            let s = cmd_denoise(&image, &opts)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(true)
        }
        Command::Verify { suite, out, seed } => {
            let mut sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(
                    File::create(p).with_context(|| format!("creating {}", p.display()))?,
                )),
                None => Box::new(io::stdout().lock()),
            };
            let reports = cmd_verify(&suite, seed, &mut sink)?;
            eprint!("{}", summary_table(&reports));
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::ApproxDomain { body, eps, dims, h, out } => {
            let r = cmd_approx_domain(&body, eps, &dims, h, &out)?;
            println!("{}", r.to_json_line());
            Ok(r.passed)
        }
    }
}
