use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "restorekit", version, about = "Degradation synthesis, restoration cues and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize degraded copies of every input image.
    Degrade(CommonArgs),
    /// Extract per-task cue bundles.
    Cues(CommonArgs),
    /// Run the classical restorers (contrast, deconvolution, dehazing, diffusion).
    Restore(CommonArgs),
    /// Toy control-network forward pass; writes per-level tensor statistics.
    ControlForward(ControlArgs),
    /// Order a task graph into a training curriculum.
    Schedule(CommonArgs),
    /// PSNR/SSIM of restored images against ground truth.
    Evaluate(CommonArgs),
    /// Side-by-side comparison grid.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Input image file or directory (task graph JSON for `schedule`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory (schedule JSON path for `schedule`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Never changes output bytes.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated tasks: haze, blur, dark, noise, all or none.
    #[arg(long)]
    pub tasks: Option<String>,
    /// Gaussian noise level, or `random` for a per-image draw.
    #[arg(long)]
    pub sigma: Option<String>,
    /// `gaussian:<sigma>`, `motion:<len>:<deg>`, `random`, or a degrade manifest.
    #[arg(long)]
    pub psf: Option<PathBuf>,
    /// Degradation recipe file (`.json` or key=value text).
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    /// Directory of clean reference images.
    #[arg(long = "ground-truth")]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ControlArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Load weights from an archive directory instead of initializing.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Write the weights used to an archive directory.
    #[arg(long = "save-weights")]
    pub save_weights: Option<PathBuf>,
    #[arg(long)]
    pub timestep: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// A method column as `LABEL=DIR`; repeat for more columns.
    #[arg(long = "method", value_name = "LABEL=DIR")]
    pub methods: Vec<String>,
}
