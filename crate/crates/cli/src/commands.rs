//! The work behind each subcommand. Every function writes into an output
//! directory and returns a short summary for the terminal.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;

use tvflow::convexdom::{hausdorff_audit, inner_domain, ConvexBody};
use tvflow::diagnostics::{write_diagnostics_csv, AuditReport};
use tvflow::flow::{run, FlowConfig, Trajectory};
use tvflow::grid::io::{write_field, write_mask};
use tvflow::{Boundary, GridDomain};

use crate::color::{Colorspace, RgbImage};
use crate::config::RunConfig;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub eps: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, flow: &mut FlowConfig) {
        if let Some(e) = self.eps {
            flow.epsilon = e;
            flow.eps_schedule = None;
        }
        if let Some(t) = self.t_end {
            flow.t_end = t;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub manifold: String,
    pub cells: usize,
    pub snapshots: usize,
    pub t_final: f64,
    pub steps: u64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub extinction_time: Option<f64>,
    pub horizon: Option<f64>,
    pub horizon_reached: Option<f64>,
}

impl RunSummary {
    fn of(traj: &Trajectory) -> Self {
        let last = traj.rows.last().expect("trajectory has a row");
        RunSummary {
            manifold: traj.manifold().to_string(),
            cells: traj.domain().inside_cells().len(),
            snapshots: traj.len(),
            t_final: last.t,
            steps: last.step,
            energy_initial: traj.rows[0].energy,
            energy_final: last.energy,
            extinction_time: traj.extinction_time,
            horizon: traj.horizon,
            horizon_reached: traj.horizon_reached,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

/// Snapshots as field files plus the per-snapshot diagnostics.
fn write_trajectory(dir: &Path, traj: &Trajectory, p0: &[f64]) -> Result<()> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps).with_context(|| format!("creating {}", snaps.display()))?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        write_field(&snaps.join(format!("snap_{k:05}.tvf")), &s.field)?;
    }
    let mut w = create(&dir.join("diagnostics.csv"))?;
    write_diagnostics_csv(&mut w, traj, p0)?;
    w.flush()?;
    let mut w = create(&dir.join("trajectory.csv"))?;
    traj.write_rows_csv(&mut w)?;
    Ok(w.flush()?)
}

/// Runs the flow described by a config file. Outputs: `snapshots/`,
/// `diagnostics.csv`, `trajectory.csv`, `summary.json`.
pub fn cmd_run(config: &Path, ov: &Overrides) -> Result<RunSummary> {
    let mut cfg = RunConfig::load(config)?;
    ov.apply(&mut cfg.flow);
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out = ov
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let (u0, p0) = cfg.initial_field()?;
    let traj = run(&u0, &cfg.flow)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_trajectory(&out, &traj, &p0)?;
    let summary = RunSummary::of(&traj);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// What happens to the brightness channel in chromaticity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Brightness {
    /// Scalar TV flow with the same parameters.
    #[default]
    Flow,
    /// Kept as in the input.
    Freeze,
}

#[derive(Debug, Clone)]
pub struct DenoiseOptions {
    pub colorspace: Colorspace,
    pub brightness: Brightness,
    pub flow: FlowConfig,
    pub out: PathBuf,
}

pub const DENOISE_EPS: f64 = 0.05;
pub const DENOISE_T_END: f64 = 0.02;

impl DenoiseOptions {
    pub fn new(colorspace: Colorspace, out: PathBuf) -> Self {
        let mut flow = FlowConfig::new(DENOISE_EPS, DENOISE_T_END);
        flow.snapshot_stride = 200;
        DenoiseOptions {
            colorspace,
            brightness: Brightness::default(),
            flow,
            out,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DenoiseSummary {
    pub output: PathBuf,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub extinction_time: Option<f64>,
}

/// Denoises an image as a manifold-valued field. Writes `denoised.<ext>`
/// in the input's format, `energy.csv` and, when brightness is flowed,
/// `brightness_energy.csv`.
pub fn cmd_denoise(image: &Path, opts: &DenoiseOptions) -> Result<DenoiseSummary> {
    let img = RgbImage::read(image)?;
    let longest = img.width.max(img.height);
    let domain = Arc::new(GridDomain::new(&img.dims(), 1.0 / longest as f64, Boundary::NeumannReflect)?);
    let (u0, b0) = opts.colorspace.encode(&img, domain)?;
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;

    let mut flow = opts.flow.clone();
    // The horizon guard would stop a curved-target run before any smoothing
    // on noisy input.
    flow.horizon = tvflow::flow::HorizonPolicy::Warn;
    let traj = run(&u0, &flow)?;
    let mut w = create(&opts.out.join("energy.csv"))?;
    traj.write_rows_csv(&mut w)?;
    w.flush()?;

    let brightness = match (b0, opts.brightness) {
        (Some(b), Brightness::Flow) => {
            let bt = run(&b, &flow)?;
            let mut w = create(&opts.out.join("brightness_energy.csv"))?;
            bt.write_rows_csv(&mut w)?;
            w.flush()?;
            Some(bt.last().clone())
        }
        (b, _) => b,
    };
    let result = opts.colorspace.decode(traj.last(), brightness.as_ref(), &img);
    let ext = if img.format == image::ImageFormat::Png { "png" } else { "ppm" };
    let output = opts.out.join(format!("denoised.{ext}"));
    result.write(&output)?;
    Ok(DenoiseSummary {
        output,
        energy_initial: traj.rows[0].energy,
        energy_final: traj.rows.last().unwrap().energy,
        extinction_time: traj.extinction_time,
    })
}

/// Rasterizes the inner approximant of a convex body on the grid
/// `dims × h` (cell `i` centred at `(i + ½)h`). Writes `mask.txt` and
/// `report.jsonl`.
pub fn cmd_approx_domain(body: &Path, eps: f64, dims: &[usize], h: Option<f64>, out: &Path) -> Result<AuditReport> {
    let body = ConvexBody::read(body)?;
    let h = h.unwrap_or(1.0 / *dims.iter().max().unwrap_or(&1) as f64);
    let grid = GridDomain::new(dims, h, Boundary::NeumannReflect)?;
    let mask = inner_domain(&body, eps, &grid)?;
    let report = hausdorff_audit(&body, eps, &mask, &grid)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_mask(&out.join("mask.txt"), dims, h, &mask)?;
    let mut w = create(&out.join("report.jsonl"))?;
    writeln!(w, "{}", report.to_json_line())?;
    w.flush()?;
    Ok(report)
}
