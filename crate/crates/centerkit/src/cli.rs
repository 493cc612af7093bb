//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use centerkit_core::loss::LossKernel;

use crate::commands;
use crate::config::ConfigArgs;
use crate::error::{CliError, Result};
use crate::selftest;

#[derive(Debug, Parser)]
#[command(name = "centerkit", version, about = "Center-point heatmaps, losses and center-aware scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Fl,
    Qfl,
    Bcfl,
    Wbce,
    Wmse,
}

impl From<KernelArg> for LossKernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Fl => LossKernel::Fl,
            KernelArg::Qfl => LossKernel::Qfl,
            KernelArg::Bcfl => LossKernel::Bcfl,
            KernelArg::Wbce => LossKernel::Wbce,
            KernelArg::Wmse => LossKernel::Wmse,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render target heatmaps for every image of a COCO annotation file.
    Gen {
        coco: PathBuf,
        out_dir: PathBuf,
    },
    /// Extract center points from a directory of heatmaps as JSONL.
    Peaks { heatmaps: PathBuf },
    /// Score predicted center points against COCO ground truth.
    Eval { coco: PathBuf, preds: PathBuf },
    /// Estimate the balancing alpha from a COCO file or a heatmap directory.
    Alpha { input: PathBuf },
    /// Evaluate a loss between predicted and target heatmap directories.
    Loss {
        pred_dir: PathBuf,
        target_dir: PathBuf,
        #[arg(long, value_enum, default_value = "bcfl")]
        kernel: KernelArg,
        /// Also compare the analytic gradient with finite differences.
        #[arg(long)]
        gradcheck: bool,
    },
    /// Export one heatmap channel as a binary PGM image.
    Viz {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle equivalence suites.
    Selftest,
}

/// Executes a parsed command, writing its primary output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Command::Selftest = cli.command {
        let outcomes = selftest::run_all();
        let failed =
            selftest::report(&outcomes, out).map_err(|e| CliError::io("<stdout>", e))?;
        return if failed == 0 {
            Ok(())
        } else {
            Err(CliError::SelftestFailed(failed))
        };
    }
    let cfg = cli.config.resolve()?;
    match &cli.command {
        Command::Gen { coco, out_dir } => {
            let summary = commands::gen(coco, out_dir, &cfg)?;
            writeln!(
                out,
                "wrote {} rasters with {} channels to {}",
                summary.files.len(),
                summary.channels,
                out_dir.display()
            )
            .map_err(|e| CliError::io("<stdout>", e))
        }
        Command::Peaks { heatmaps } => commands::peaks(heatmaps, &cfg, out),
        Command::Eval { coco, preds } => commands::eval(coco, preds, &cfg, out),
        Command::Alpha { input } => commands::alpha(input, &cfg, out),
        Command::Loss {
            pred_dir,
            target_dir,
            kernel,
            gradcheck,
        } => commands::loss(pred_dir, target_dir, (*kernel).into(), *gradcheck, &cfg, out),
        Command::Viz {
            file,
            channel,
            out: Some(path),
        } => {
            let mut bytes = Vec::new();
            commands::viz(file, *channel, &mut bytes)?;
            fs::write(path, bytes).map_err(|e| CliError::io(path, e))
        }
        Command::Viz {
            file,
            channel,
            out: None,
        } => commands::viz(file, *channel, out),
        Command::Selftest => unreachable!("handled above"),
    }
}

/// Parses `args` and runs the command; clap errors map to exit code 2.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    run(&cli, out)
}
