use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    BackboneKind, EncodingKind, ModelPatch, RunConfig, TableInitChoice, TrainPatch,
};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage or configuration error
  3  I/O error: unreadable or malformed input, unwritable output, checkpoint format or version
  4  numerical failure: divergence or non-finite values
  5  tolerance check failed";

/// Coordinate-table implicit neural representations.
#[derive(Debug, Parser)]
#[command(name = "diner", version, after_help = EXIT_CODES)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an image (PGM/PPM/PFM) or a frame stack (JSON manifest).
    #[command(after_help = EXIT_CODES)]
    Fit(FitArgs),
    /// Train once per data arrangement and compare the results.
    #[command(after_help = EXIT_CODES)]
    Invariance(InvarianceArgs),
    /// Radial frequency band ratios of an image and, optionally, of a
    /// trained table's learned representation.
    #[command(after_help = EXIT_CODES)]
    Spectrum(SpectrumArgs),
    /// Lensless holography: simulate measurements or reconstruct an object.
    #[command(subcommand)]
    Lensless(LenslessCommand),
}

#[derive(Debug, Subcommand)]
pub enum LenslessCommand {
    /// Propagate an object to each sensor height and record intensities.
    #[command(after_help = EXIT_CODES)]
    Simulate(SimulateArgs),
    /// Recover amplitude and phase from multi-height intensities.
    #[command(after_help = EXIT_CODES)]
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub backbone: Option<BackboneKind>,
    /// Hidden layer width.
    #[arg(long)]
    pub width: Option<usize>,
    /// Number of hidden layers.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub encoding: Option<EncodingKind>,
    /// Frequency octaves for `--encoding pe`.
    #[arg(long)]
    pub octaves: Option<usize>,
    /// Sine frequency for `--backbone siren`.
    #[arg(long)]
    pub omega0: Option<f64>,
}

impl ModelArgs {
    pub fn patch(&self) -> ModelPatch {
        ModelPatch {
            backbone: self.backbone,
            width: self.width,
            depth: self.depth,
            encoding: self.encoding,
            octaves: self.octaves,
            omega0: self.omega0,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Feed the network from a learnable per-element coordinate table.
    #[arg(long)]
    pub diner: bool,
    #[arg(long, value_enum)]
    pub table_init: Option<TableInitChoice>,
    /// Keep the table at its initial values.
    #[arg(long)]
    pub freeze_table: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Network learning rate (default 1e-3 for mlp, 1e-4 for siren).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Table learning rate (default: the network rate).
    #[arg(long)]
    pub lr_table: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mini-batch size; 0 trains on every element each epoch.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub log_every: Option<usize>,
}

impl TrainArgs {
    pub fn patch(&self) -> TrainPatch {
        TrainPatch {
            epochs: self.epochs,
            batch_size: self.batch,
            lr_net: self.lr,
            lr_table: self.lr_table,
            seed: self.seed,
            use_table: self.diner.then_some(true),
            table_init: self.table_init.map(Into::into),
            freeze_table: self.freeze_table.then_some(true),
            log_every: self.log_every,
            adam: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags given explicitly take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

impl RunArgs {
    /// Config file (if any) overlaid with explicit flags.
    pub fn merged(
        &self,
        input: &Option<PathBuf>,
        out: &Option<PathBuf>,
    ) -> crate::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.overlay(&RunConfig {
            input: input.clone(),
            out: out.clone(),
            model: self.model.patch(),
            train: self.train.patch(),
        });
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory for model.dinr, metrics.csv and the reconstruction.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct InvarianceArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated arrangements: identity, sorted, random.
    #[arg(long, default_value = "identity,sorted,random")]
    pub orders: String,
    /// Largest accepted PSNR gap between arrangements; the check is strict.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance_db: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Trained table-backed checkpoint whose learned representation is
    /// analysed alongside the input.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = diner_core::spectral::DEFAULT_BANDS)]
    pub bands: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    /// Wavelength in meters (default 532e-9).
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Sensor pixel pitch in meters (default 5e-6).
    #[arg(long)]
    pub pitch: Option<f64>,
    /// Comma-separated sensor distances in meters (default 1e-3,1.5e-3,2e-3).
    #[arg(long, value_delimiter = ',')]
    pub heights: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Size of the built-in phantom when no amplitude file is given.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Object amplitude image (single channel).
    #[arg(long)]
    pub amplitude: Option<PathBuf>,
    /// Object phase in radians (single channel PFM); zero when omitted.
    #[arg(long, requires = "amplitude")]
    pub phase: Option<PathBuf>,
    #[command(flatten)]
    pub optics: OpticsArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Manifest written by `lensless simulate`.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth amplitude for reporting a correlation.
    #[arg(long)]
    pub truth_amplitude: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}
