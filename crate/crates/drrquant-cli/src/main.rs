//! Command-line front end: phantom generation, DRR synthesis, mask
//! projection, cutoff calibration, severity quantification and the
//! manifest-driven evaluation harness.
//!
//! Exit codes: 0 success, 2 validation error (bad arguments, malformed
//! manifest/config), 3 runtime case error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use drrquant::drr::{generate_drr, DrrConfig};
use drrquant::io;
use drrquant::maskproj::{
    binarize_map, calibrate_cutoff, intensity_projection, thickness_projection, CalibrationCase,
    CutoffConfig, CutoffGrid, CutoffMode, DEFAULT_LUNG_CUTOFF_MM, LEGACY_INTENSITY_CUTOFF,
};
use drrquant::phantom::{generate_phantom, PhantomSpec};
use drrquant::quant;
use drrquant::report::{
    render_report, run_evaluate, validate_manifest, EvalOptions, ReportError, ReportFormat,
};
use drrquant::types::AxisPerm;

#[derive(Parser)]
#[command(name = "drrquant", version, about = "CT projection and airspace-disease quantification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic phantom tools
    Phantom {
        #[command(subcommand)]
        command: PhantomCommand,
    },
    /// DRR synthesis
    Drr {
        #[command(subcommand)]
        command: DrrCommand,
    },
    /// 3D mask projection and binarization
    Mask {
        #[command(subcommand)]
        command: MaskCommand,
    },
    /// Swipe-search cutoff calibration against POv ground truth
    Calibrate(CalibrateArgs),
    /// Severity measures
    Quant {
        #[command(subcommand)]
        command: QuantCommand,
    },
    /// Manifest-driven evaluation with bootstrap statistics
    Evaluate(EvaluateArgs),
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Generate a phantom volume, masks and truth.json from a spec
    Gen {
        /// Phantom spec JSON
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (volume.mha, lung.mha, lesion.mha, truth.json)
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DrrCommand {
    /// Project a CT volume to a normalized DRR image
    Generate {
        /// Input CT volume (.mha/.mhd)
        #[arg(long)]
        ct: PathBuf,
        /// DRR config JSON (defaults apply when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output PNG (a .json sidecar and a .config.json echo are written next to it)
        #[arg(long)]
        out: PathBuf,
        /// Axis permutation applied on load, e.g. zyx
        #[arg(long, default_value = "xyz")]
        axes: AxisPerm,
    },
}

#[derive(Subcommand)]
enum MaskCommand {
    /// Project a 3D mask to a 2D map, optionally binarized at a cutoff
    Project(MaskProjectArgs),
}

#[derive(Args)]
struct MaskProjectArgs {
    /// thickness | intensity
    #[arg(long)]
    mode: CliCutoffMode,
    /// CT volume (required for intensity mode)
    #[arg(long)]
    ct: Option<PathBuf>,
    /// 3D mask (.mha/.mhd)
    #[arg(long)]
    mask: PathBuf,
    /// Binarization cutoff (number, or "legacy-intensity" for raw-unit
    /// integrals); omit to write the scalar map instead of a mask
    #[arg(long)]
    cutoff: Option<String>,
    /// Output PNG
    #[arg(long)]
    out: PathBuf,
    /// DRR config JSON for the attenuation mapping (intensity mode)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Axis permutation applied on load, e.g. zyx
    #[arg(long, default_value = "xyz")]
    axes: AxisPerm,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliCutoffMode {
    Thickness,
    Intensity,
}

impl From<CliCutoffMode> for CutoffMode {
    fn from(m: CliCutoffMode) -> Self {
        match m {
            CliCutoffMode::Thickness => CutoffMode::Thickness,
            CliCutoffMode::Intensity => CutoffMode::Intensity,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Training manifest (same schema as evaluate)
    #[arg(long)]
    manifest: PathBuf,
    /// thickness | intensity
    #[arg(long)]
    mode: CliCutoffMode,
    /// Search grid lo:hi:step
    #[arg(long)]
    grid: String,
    /// Output JSON (best cutoff + full curve)
    #[arg(long)]
    out: PathBuf,
    /// Lung thickness cutoff held fixed during the search
    #[arg(long, default_value_t = DEFAULT_LUNG_CUTOFF_MM)]
    lung_cutoff: f64,
}

#[derive(Subcommand)]
enum QuantCommand {
    /// Volume opacity percentage from 3D masks
    Pov {
        #[arg(long)]
        lung: PathBuf,
        #[arg(long)]
        lesion: PathBuf,
        /// Axis permutation applied on load, e.g. zyx
        #[arg(long, default_value = "xyz")]
        axes: AxisPerm,
    },
    /// Area opacity percentage from 2D masks
    Poa {
        #[arg(long)]
        lung: PathBuf,
        #[arg(long)]
        lesion: PathBuf,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's stats seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated list: json, csv, md
    #[arg(long, default_value = "json,md")]
    format: String,
    /// Skip failing cases instead of aborting (skips are listed in the report)
    #[arg(long)]
    skip_bad_cases: bool,
    /// Also write per-case DRR and mask images under <out>/images
    #[arg(long)]
    artifacts: bool,
}

/// Failures that mean the input was invalid (exit 2) vs. failures of the
/// pipeline itself (exit 3).
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Validation(e) | CliError::Runtime(e) => e,
        }
    }
}

fn validation<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Validation(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

fn load_drr_config(path: Option<&Path>) -> Result<DrrConfig, CliError> {
    let Some(path) = path else {
        return Ok(DrrConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(validation)?;
    let cfg: DrrConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(validation)?;
    cfg.validate().map_err(validation)?;
    Ok(cfg)
}

fn parse_cutoff(raw: &str, mode: CutoffMode) -> Result<f64, CliError> {
    if raw == "legacy-intensity" {
        if mode != CutoffMode::Intensity {
            return Err(validation(anyhow!(
                "the legacy-intensity cutoff only applies to intensity mode"
            )));
        }
        return Ok(LEGACY_INTENSITY_CUTOFF);
    }
    raw.parse::<f64>()
        .map_err(|_| validation(anyhow!("cutoff must be a number or \"legacy-intensity\"")))
}

fn parse_grid(raw: &str) -> Result<CutoffGrid, CliError> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(validation(anyhow!("grid must be lo:hi:step, got `{raw}`")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| validation(anyhow!("grid values must be numbers, got `{raw}`")))?;
    Ok(CutoffGrid { lo: nums[0], hi: nums[1], step: nums[2] })
}

fn report_exit(e: ReportError) -> CliError {
    match e {
        ReportError::Case { .. } | ReportError::Stats { .. } | ReportError::Io { .. } => {
            runtime(e)
        }
        _ => validation(e),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Phantom { command: PhantomCommand::Gen { spec, out } } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))
                .map_err(validation)?;
            let spec: PhantomSpec = serde_json::from_str(&text)
                .context("parsing phantom spec")
                .map_err(validation)?;
            let phantom = generate_phantom(&spec).map_err(validation)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))
                .map_err(runtime)?;
            io::save_volume(&phantom.volume, &out.join("volume.mha")).map_err(runtime)?;
            io::save_mask3d(&phantom.lung, &out.join("lung.mha")).map_err(runtime)?;
            io::save_mask3d(&phantom.lesion, &out.join("lesion.mha")).map_err(runtime)?;
            let truth = serde_json::to_string_pretty(&phantom.truth).expect("truth serializes");
            std::fs::write(out.join("truth.json"), truth + "\n")
                .context("writing truth.json")
                .map_err(runtime)?;
            println!(
                "phantom written to {} (POv voxelized {:.4}%)",
                out.display(),
                phantom.truth.pov_voxelized
            );
            Ok(())
        }

        Command::Drr { command: DrrCommand::Generate { ct, config, out, axes } } => {
            let cfg = load_drr_config(config.as_deref())?;
            let volume = io::load_volume(&ct).map_err(runtime)?.permuted(axes);
            let image = generate_drr(&volume, &cfg).map_err(runtime)?;
            io::save_image2d(&image, &out).map_err(runtime)?;
            let echo = out.with_extension("config.json");
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            std::fs::write(&echo, text + "\n")
                .with_context(|| format!("writing {}", echo.display()))
                .map_err(runtime)?;
            println!("drr written to {}", out.display());
            Ok(())
        }

        Command::Mask { command: MaskCommand::Project(args) } => {
            let mode: CutoffMode = args.mode.into();
            let mask = io::load_mask3d(&args.mask).map_err(runtime)?.permuted(args.axes);
            let map = match mode {
                CutoffMode::Thickness => thickness_projection(&mask),
                CutoffMode::Intensity => {
                    let ct = args.ct.ok_or_else(|| {
                        validation(anyhow!("--ct is required for intensity mode"))
                    })?;
                    let cfg = load_drr_config(args.config.as_deref())?;
                    let volume = io::load_volume(&ct).map_err(runtime)?.permuted(args.axes);
                    intensity_projection(&volume, &mask, &cfg).map_err(runtime)?
                }
            };
            match args.cutoff.as_deref() {
                Some(raw) => {
                    let cutoff = parse_cutoff(raw, mode)?;
                    let cfg = CutoffConfig::new(mode, cutoff).map_err(validation)?;
                    let binary = binarize_map(&map, &cfg).map_err(runtime)?;
                    io::save_mask2d(&binary, &args.out).map_err(runtime)?;
                }
                None => io::save_image2d(&map, &args.out).map_err(runtime)?,
            }
            println!("projection written to {}", args.out.display());
            Ok(())
        }

        Command::Calibrate(args) => {
            let manifest = validate_manifest(&args.manifest).map_err(report_exit)?;
            let grid = parse_grid(&args.grid)?;
            let mut volumes = Vec::new();
            for case in &manifest.cases {
                let volume = io::load_volume(&case.ct_path).map_err(runtime)?;
                let lung = io::load_mask3d(&case.lung3d_path).map_err(runtime)?;
                let lesion = io::load_mask3d(&case.lesion3d_path).map_err(runtime)?;
                volumes.push((volume, lung, lesion));
            }
            let cases: Vec<CalibrationCase> = volumes
                .iter()
                .map(|(v, lung, lesion)| CalibrationCase { volume: v, lung, lesion })
                .collect();
            let result = calibrate_cutoff(
                &cases,
                args.mode.into(),
                &grid,
                &manifest.config.drr,
                args.lung_cutoff,
            )
            .map_err(runtime)?;
            let text = serde_json::to_string_pretty(&result).expect("result serializes");
            std::fs::write(&args.out, text + "\n")
                .with_context(|| format!("writing {}", args.out.display()))
                .map_err(runtime)?;
            println!(
                "best cutoff {} (mean MAE {:.4}%) over {} grid points -> {}",
                result.best_cutoff,
                result.best_mae,
                result.curve.len(),
                args.out.display()
            );
            Ok(())
        }

        Command::Quant { command } => {
            let value = match command {
                QuantCommand::Pov { lung, lesion, axes } => {
                    let lung = io::load_mask3d(&lung).map_err(runtime)?.permuted(axes);
                    let lesion = io::load_mask3d(&lesion).map_err(runtime)?.permuted(axes);
                    let (pov, stray) = quant::pov_with_stray(&lung, &lesion).map_err(runtime)?;
                    serde_json::json!({ "pov_percent": pov, "stray_voxels": stray })
                }
                QuantCommand::Poa { lung, lesion } => {
                    let (lung, _) = io::load_mask2d(&lung).map_err(runtime)?;
                    let (lesion, _) = io::load_mask2d(&lesion).map_err(runtime)?;
                    let (poa, stray) = quant::poa_with_stray(&lung, &lesion).map_err(runtime)?;
                    serde_json::json!({ "poa_percent": poa, "stray_pixels": stray })
                }
            };
            println!("{}", serde_json::to_string_pretty(&value).expect("value serializes"));
            Ok(())
        }

        Command::Evaluate(args) => {
            let mut manifest = validate_manifest(&args.manifest).map_err(report_exit)?;
            if let Some(seed) = args.seed {
                manifest.config.seed = seed;
            }
            let formats: Vec<ReportFormat> = args
                .format
                .split(',')
                .map(|f| f.parse::<ReportFormat>())
                .collect::<Result<_, _>>()
                .map_err(|e| validation(anyhow!(e)))?;
            let options = EvalOptions {
                skip_bad_cases: args.skip_bad_cases,
                artifact_dir: args.artifacts.then(|| args.out.join("images")),
            };
            let report = run_evaluate(&manifest, &options).map_err(report_exit)?;
            let files = render_report(&report, &args.out, &formats).map_err(report_exit)?;
            for file in &files {
                println!("wrote {}", file.display());
            }
            if !report.skipped_cases.is_empty() {
                eprintln!("skipped {} case(s), see the report", report.skipped_cases.len());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.code())
        }
    }
}
