//! Command-line front end for the `qpi` binary.

pub mod commands;
pub mod manifest;
pub mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qpi_core::{KMode, QpiError};

use settings::Settings;

/// Exit status for each error class.
pub fn exit_code(e: &QpiError) -> i32 {
    match e {
        QpiError::Config(_)
        | QpiError::InvalidInput(_)
        | QpiError::Sizing(_)
        | QpiError::InvalidGrid(_) => 2,
        QpiError::Io(_) | QpiError::Format(_) => 3,
        QpiError::Numerical(_) | QpiError::GridMismatch(_) => 4,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qpi",
    version,
    about = "Twin-beam quantitative phase imaging simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Settings file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub frames: Option<usize>,
    /// Comma-separated defocus distances in millimeters.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dz: Option<Vec<f64>>,
    /// Comma-separated integration sizes in camera pixels.
    #[arg(long, global = true, value_delimiter = ',')]
    pub bin: Option<Vec<usize>>,
    /// classical, tau, tie or a number.
    #[arg(long = "k-mode", global = true)]
    pub k_mode: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "qpi_out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the π/∅ test object.
    Target,
    /// Simulate calibration, in-focus and defocused twin-beam frames.
    Simulate {
        #[arg(long = "calib-frames")]
        calib_frames: Option<usize>,
        #[arg(long = "focus-frames")]
        focus_frames: Option<usize>,
    },
    /// Retrieve phase and transmittance from a `simulate` output directory.
    Retrieve {
        #[arg(long)]
        input: PathBuf,
    },
    /// Parameter scans.
    Scan {
        #[command(subcommand)]
        kind: ScanKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScanKind {
    /// Noise reduction factor and Fano factors against D, with the efficiency fit.
    Nrf,
    /// Pearson quantum advantage over (dz, D, k mode).
    Advantage {
        #[arg(long = "ref-frames")]
        ref_frames: Option<u64>,
    },
    /// Edge-spread resolution over (dz, D).
    Resolution {
        #[arg(long = "ref-frames")]
        ref_frames: Option<u64>,
    },
    /// Phase-noise suppression against correlation length.
    Noise {
        /// Comma-separated correlation lengths in micrometers.
        #[arg(long = "l-cff", value_delimiter = ',')]
        l_cff: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Defaults, then the settings file, then flags.
pub fn resolve_settings(cli: &Cli) -> Result<Settings, QpiError> {
    let c = &cli.common;
    let mut s = match &c.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    if let Some(v) = c.seed {
        s.seed = v;
    }
    if let Some(v) = c.frames {
        s.frames = v;
    }
    if let Some(v) = &c.dz {
        s.dz_mm = v.clone();
    }
    if let Some(v) = &c.bin {
        s.bins = Some(v.clone());
    }
    if let Some(v) = &c.k_mode {
        s.k_mode = Some(v.parse::<KMode>()?);
    }
    match &cli.command {
        Command::Scan {
            kind: ScanKind::Advantage {
                ref_frames: Some(n),
            },
        }
        | Command::Scan {
            kind: ScanKind::Resolution {
                ref_frames: Some(n),
            },
        } => s.ref_frames = *n,
        Command::Scan {
            kind: ScanKind::Noise { l_cff, trials },
        } => {
            if let Some(l) = l_cff {
                s.noise_l_um = l.clone();
            }
            if let Some(t) = trials {
                s.noise_trials = *t;
            }
        }
        _ => {}
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<(), QpiError> {
    let s = resolve_settings(cli)?;
    let out = &cli.common.out;
    match &cli.command {
        Command::Target => commands::run_target(&s, out),
        Command::Simulate {
            calib_frames,
            focus_frames,
        } => commands::run_simulate(
            &s,
            commands::SimulateCounts {
                calib: calib_frames.unwrap_or(s.frames),
                focus: focus_frames.unwrap_or(s.frames),
            },
            out,
        ),
        Command::Retrieve { input } => commands::run_retrieve(&s, input, out),
        Command::Scan { kind } => match kind {
            ScanKind::Nrf => commands::run_scan_nrf(&s, out),
            ScanKind::Advantage { .. } => commands::run_scan_advantage(&s, out),
            ScanKind::Resolution { .. } => commands::run_scan_resolution(&s, out),
            ScanKind::Noise { .. } => commands::run_scan_noise(&s, out),
        },
    }
}

/// Worker count from `QPI_THREADS`, else the `threads` key of the settings file.
pub fn thread_count(cli: &Cli) -> Option<usize> {
    if let Some(n) = std::env::var("QPI_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return Some(n);
    }
    let text = std::fs::read_to_string(cli.common.config.as_ref()?).ok()?;
    settings::parse_pairs(&text)
        .ok()?
        .get("threads")?
        .parse()
        .ok()
}
