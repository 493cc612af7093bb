//! Run configuration: built-in defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use centerkit_core::heatmap::GcParams;
use centerkit_core::loss::{BcflParams, LossParams};
use centerkit_core::metrics::Aggregation;
use centerkit_core::{MatchCostParams, PeakParams, SizeBand};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GtKind {
    #[default]
    Gc,
    Gaussian,
    Ellipse,
}

impl GtKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GtKind::Gc => "gc",
            GtKind::Gaussian => "gaussian",
            GtKind::Ellipse => "ellipse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    #[default]
    Pooled,
    Macro,
}

impl From<AggregationKind> for Aggregation {
    fn from(a: AggregationKind) -> Self {
        match a {
            AggregationKind::Pooled => Aggregation::Pooled,
            AggregationKind::Macro => Aggregation::Macro,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BandFilter {
    Small,
    Medium,
    Large,
    #[default]
    All,
}

impl BandFilter {
    pub fn band(self) -> Option<SizeBand> {
        match self {
            BandFilter::Small => Some(SizeBand::Small),
            BandFilter::Medium => Some(SizeBand::Medium),
            BandFilter::Large => Some(SizeBand::Large),
            BandFilter::All => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stride: f32,
    pub eta: f64,
    pub phi: f64,
    pub gt_kind: GtKind,
    pub sigma: f64,
    pub prob_threshold: f64,
    pub min_distance: f64,
    pub window_radius: usize,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub pos_weight: f64,
    pub alpha_threshold: f64,
    pub aggregation: AggregationKind,
    pub band: BandFilter,
    /// Worker threads; 0 uses the machine's parallelism.
    pub threads: usize,
    /// Channel scope; `None` renders every dataset category.
    pub categories: Option<Vec<i64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stride: 4.0,
            eta: 0.5,
            phi: 0.5,
            gt_kind: GtKind::Gc,
            sigma: 2.0,
            prob_threshold: 0.5,
            min_distance: 3.0,
            window_radius: 1,
            lambda: 1.0,
            mu: 1.0,
            alpha: 0.984,
            gamma: 2.0,
            pos_weight: 1.0,
            alpha_threshold: 0.6,
            aggregation: AggregationKind::Pooled,
            band: BandFilter::All,
            threads: 0,
            categories: None,
        }
    }
}

fn invalid(e: centerkit_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn gc_params(&self) -> Result<GcParams> {
        GcParams::new(self.eta, self.phi).map_err(invalid)
    }

    pub fn peak_params(&self) -> Result<PeakParams> {
        PeakParams::new(self.prob_threshold, self.min_distance, self.window_radius).map_err(invalid)
    }

    pub fn match_params(&self) -> Result<MatchCostParams> {
        MatchCostParams::new(self.lambda, self.mu).map_err(invalid)
    }

    pub fn loss_params(&self) -> Result<LossParams> {
        Ok(LossParams {
            bcfl: BcflParams::new(self.alpha, self.gamma).map_err(invalid)?,
            pos_weight: self.pos_weight,
        })
    }

    pub fn check(&self) -> Result<()> {
        if !(self.stride.is_finite() && self.stride > 0.0) {
            return Err(CliError::Config(format!("stride must be positive, got {}", self.stride)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CliError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.alpha_threshold) {
            return Err(CliError::Config(format!(
                "alpha threshold must lie in [0, 1], got {}",
                self.alpha_threshold
            )));
        }
        self.gc_params()?;
        self.peak_params()?;
        self.match_params()?;
        self.loss_params()?;
        Ok(())
    }

    /// Runs `f` on a pool of `threads` workers (machine parallelism for 0).
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(pool.install(f))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the run configuration fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Image pixels per heatmap cell.
    #[arg(long, global = true)]
    pub stride: Option<f32>,
    /// Horizontal shape exponent of generalized centerness.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Vertical shape exponent of generalized centerness.
    #[arg(long, global = true)]
    pub phi: Option<f64>,
    /// Ground-truth renderer.
    #[arg(long = "gt", value_enum, global = true)]
    pub gt_kind: Option<GtKind>,
    /// Gaussian sigma in heatmap cells.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Minimum peak probability.
    #[arg(long = "threshold", global = true)]
    pub prob_threshold: Option<f64>,
    /// Minimum distance between peaks, in heatmap cells.
    #[arg(long, global = true)]
    pub min_distance: Option<f64>,
    /// Local-maximum window half-size.
    #[arg(long, global = true)]
    pub window_radius: Option<usize>,
    /// Distance weight of the match cost.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Probability weight of the match cost.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Balanced loss alpha.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Focusing exponent.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Positive weight of the weighted BCE/MSE baselines.
    #[arg(long, global = true)]
    pub pos_weight: Option<f64>,
    /// Probability threshold separating positives from negatives when estimating alpha.
    #[arg(long, global = true)]
    pub alpha_threshold: Option<f64>,
    /// How unit scores are combined.
    #[arg(long, value_enum, global = true)]
    pub aggregation: Option<AggregationKind>,
    /// Restrict the headline score to one size band.
    #[arg(long, value_enum, global = true)]
    pub band: Option<BandFilter>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Comma-separated category ids to render.
    #[arg(long, value_delimiter = ',', global = true)]
    pub categories: Option<Vec<i64>>,
}

pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| crate::coco::json_error(path, &bytes, e))
}

impl ConfigArgs {
    /// Resolves defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        apply!(
            stride, eta, phi, gt_kind, sigma, prob_threshold, min_distance, window_radius,
            lambda, mu, alpha, gamma, pos_weight, alpha_threshold, aggregation, band, threads
        );
        if let Some(c) = &self.categories {
            cfg.categories = Some(c.clone());
        }
        cfg.check()?;
        Ok(cfg)
    }
}
