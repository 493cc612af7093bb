//! Implementations of the subcommands. Each writes its primary output to the
//! supplied writer so the binary and the tests share one code path.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use centerkit_core::heatmap::{render_ellipse, render_gaussian, render_gc};
use centerkit_core::loss::{bcfl, bcfl_grad_p, reduce_loss_batch, AlphaCount, LossKernel, LossReport};
use centerkit_core::metrics::{evaluate_unit, CasReport, UnitEvaluation};
use centerkit_core::oracle::finite_diff;
use centerkit_core::peaks::peaks_per_class;
use centerkit_core::{CenterPoint, Dataset, GroundTruthCenter, Heatmap, ImageInfo};
use rayon::prelude::*;
use serde::Serialize;

use crate::coco::load_coco;
use crate::config::{GtKind, RunConfig};
use crate::error::{CliError, Result};
use crate::ochm::{list_rasters, load_raster, load_sidecar, save_with_sidecar, Sidecar};
use crate::records::{read_jsonl, write_jsonl, PointRecord};

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

/// Category ids rendered as channels, in channel order.
pub fn channel_categories(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<i64>> {
    match &cfg.categories {
        None => Ok(ds.category_ids()),
        Some(ids) => {
            let missing: Vec<String> = ids
                .iter()
                .filter(|id| !ds.categories().contains_key(id))
                .map(|id| format!("category_id {id}"))
                .collect();
            if missing.is_empty() {
                Ok(ids.clone())
            } else {
                Err(CliError::Reference(missing))
            }
        }
    }
}

/// Renders the target raster of one image, one channel per category.
pub fn render_image(
    ds: &Dataset,
    image: &ImageInfo,
    categories: &[i64],
    cfg: &RunConfig,
) -> Result<Heatmap> {
    let gc = cfg.gc_params()?;
    let mut channels = Vec::with_capacity(categories.len());
    for &cat in categories {
        let boxes = ds.boxes_for(image.id, Some(cat));
        let map = match cfg.gt_kind {
            GtKind::Gc => render_gc(&boxes, image, cfg.stride, gc)?,
            GtKind::Gaussian => {
                let centers: Vec<(f64, f64)> = boxes.iter().map(|b| b.center()).collect();
                render_gaussian(&centers, image, cfg.stride, cfg.sigma)?
            }
            GtKind::Ellipse => render_ellipse(&boxes, image, cfg.stride)?,
        };
        channels.push(map);
    }
    if channels.is_empty() {
        return Ok(Heatmap::for_image(image, 0, cfg.stride)?);
    }
    Ok(Heatmap::stack(&channels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenSummary {
    pub images: usize,
    pub channels: usize,
    pub files: Vec<PathBuf>,
}

/// Writes `<image_id>.ochm` plus sidecar for every image of the dataset.
pub fn gen(coco: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<GenSummary> {
    let ds = load_coco(coco)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let categories = channel_categories(&ds, cfg)?;
    let files = cfg.install(|| {
        ds.images()
            .par_iter()
            .map(|image| {
                let map = render_image(&ds, image, &categories, cfg)?;
                let sidecar = Sidecar {
                    image_id: image.id,
                    categories: categories.clone(),
                    width: Some(image.width),
                    height: Some(image.height),
                    gt_kind: Some(cfg.gt_kind.as_str().to_string()),
                };
                save_with_sidecar(out_dir, &map, &sidecar)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(GenSummary {
        images: ds.images().len(),
        channels: categories.len(),
        files,
    })
}

/// Extracts peaks from every raster in `dir`, sorted by image, category, descending score.
pub fn extract_points(dir: &Path, cfg: &RunConfig) -> Result<Vec<PointRecord>> {
    let params = cfg.peak_params()?;
    let files = list_rasters(dir)?;
    let per_file = cfg.install(|| {
        files
            .par_iter()
            .map(|path| {
                let map = load_raster(path)?;
                let side = load_sidecar(path)?;
                let points = peaks_per_class(&map, &side.categories, side.image_id, &params)
                    .map_err(|e| CliError::Format {
                        path: path.clone(),
                        message: e.to_string(),
                    })?;
                Ok(points.iter().map(PointRecord::from).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut records: Vec<PointRecord> = per_file.into_iter().flatten().collect();
    // stable: keeps the per-channel descending-score, row-major order
    records.sort_by(|a, b| {
        (a.image_id, a.category_id)
            .cmp(&(b.image_id, b.category_id))
            .then(b.score.total_cmp(&a.score))
    });
    Ok(records)
}

pub fn peaks(dir: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let records = extract_points(dir, cfg)?;
    write_jsonl(out, &records).map_err(|e| CliError::io("<stdout>", e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryLine {
    pub category_id: i64,
    pub name: String,
    pub cas: f64,
    pub cp: f64,
    pub md: f64,
    pub units: usize,
}

/// JSON shape of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportJson {
    pub cas: f64,
    pub cp: f64,
    pub md: f64,
    pub cas_s: Option<f64>,
    pub cas_m: Option<f64>,
    pub cas_l: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub units: usize,
    pub aggregation: &'static str,
    pub band: &'static str,
    pub per_category: Vec<CategoryLine>,
}

fn check_references(ds: &Dataset, preds: &[PointRecord]) -> Result<()> {
    let images = ds.image_ids();
    let mut offenders = BTreeSet::new();
    for p in preds {
        if !images.contains(&p.image_id) {
            offenders.insert(format!("image_id {}", p.image_id));
        }
        if !ds.categories().contains_key(&p.category_id) {
            offenders.insert(format!("category_id {}", p.category_id));
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(CliError::Reference(offenders.into_iter().collect()))
    }
}

/// Matches predictions to ground truth per (image, category) and aggregates.
pub fn evaluate(ds: &Dataset, preds: &[PointRecord], cfg: &RunConfig) -> Result<CasReport> {
    check_references(ds, preds)?;
    let params = cfg.match_params()?;
    let mut grouped: BTreeMap<(i64, i64), (Vec<GroundTruthCenter>, Vec<CenterPoint>)> =
        BTreeMap::new();
    for b in ds.boxes() {
        grouped
            .entry((b.image_id, b.category_id))
            .or_default()
            .0
            .push(GroundTruthCenter::from_box(b));
    }
    for p in preds {
        grouped
            .entry((p.image_id, p.category_id))
            .or_default()
            .1
            .push(CenterPoint::from(p));
    }
    let images: BTreeMap<i64, &ImageInfo> = ds.images().iter().map(|im| (im.id, im)).collect();
    let units: Vec<_> = grouped.into_iter().collect();
    let evaluations = cfg.install(|| {
        units
            .par_iter()
            .map(|((image_id, category_id), (gts, points))| {
                evaluate_unit(images[image_id], *category_id, gts, points, &params)
            })
            .collect::<std::result::Result<Vec<UnitEvaluation>, _>>()
    })??;
    Ok(CasReport::from_evaluations(
        &evaluations,
        cfg.aggregation.into(),
        cfg.band.band(),
    )?)
}

pub fn report_json(report: &CasReport, ds: &Dataset, cfg: &RunConfig) -> ReportJson {
    ReportJson {
        cas: report.cas,
        cp: report.cp_term,
        md: report.md_term,
        cas_s: report.cas_s,
        cas_m: report.cas_m,
        cas_l: report.cas_l,
        precision: report.precision,
        recall: report.recall,
        f1: report.f1,
        units: report.units,
        aggregation: match cfg.aggregation {
            crate::config::AggregationKind::Pooled => "pooled",
            crate::config::AggregationKind::Macro => "macro",
        },
        band: cfg.band.band().map_or("all", |b| b.as_str()),
        per_category: report
            .per_category
            .iter()
            .map(|c| CategoryLine {
                category_id: c.category_id,
                name: ds.categories().get(&c.category_id).cloned().unwrap_or_default(),
                cas: c.terms.cas,
                cp: c.terms.cp,
                md: c.terms.md,
                units: c.terms.units,
            })
            .collect(),
    }
}

pub fn load_points(path: &Path) -> Result<Vec<PointRecord>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_jsonl(BufReader::new(file), path)
}

pub fn eval(coco: &Path, preds: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let ds = load_coco(coco)?;
    let points = load_points(preds)?;
    let report = evaluate(&ds, &points, cfg)?;
    write_json(out, &report_json(&report, &ds, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaJson {
    pub alpha: f64,
    pub threshold: f64,
    pub negatives: u64,
    pub cells: u64,
}

/// Estimates alpha from a COCO file (rendered with the configured renderer)
/// or from a directory of OCHM rasters.
pub fn estimate_alpha_from(input: &Path, cfg: &RunConfig) -> Result<AlphaJson> {
    let threshold = cfg.alpha_threshold;
    let counts: Vec<AlphaCount> = if input.is_dir() {
        let files = list_rasters(input)?;
        cfg.install(|| {
            files
                .par_iter()
                .map(|p| {
                    let mut c = AlphaCount::default();
                    c.add(&load_raster(p)?, threshold);
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()
        })??
    } else {
        let ds = load_coco(input)?;
        let categories = channel_categories(&ds, cfg)?;
        cfg.install(|| {
            ds.images()
                .par_iter()
                .map(|image| {
                    let mut c = AlphaCount::default();
                    c.add(&render_image(&ds, image, &categories, cfg)?, threshold);
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()
        })??
    };
    let total = counts.into_iter().fold(AlphaCount::default(), AlphaCount::merge);
    Ok(AlphaJson {
        alpha: total.alpha()?,
        threshold,
        negatives: total.negatives,
        cells: total.cells,
    })
}

pub fn alpha(input: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    write_json(out, &estimate_alpha_from(input, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckJson {
    pub max_rel_err: f64,
    pub checked: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossJson {
    pub kernel: &'static str,
    pub total: f64,
    pub per_channel: Vec<f64>,
    pub cell_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckJson>,
}

const GRADCHECK_STEP: f64 = 1e-5;

/// Central-difference check of the balanced loss gradient on the cells of `pairs`.
///
/// Cells within 1e-3 of their target, or within 1e-4 of the clamp range,
/// are skipped.
pub fn gradcheck(pairs: &[(Heatmap, Heatmap)], cfg: &RunConfig) -> Result<GradcheckJson> {
    let params = cfg.loss_params()?.bcfl;
    let mut seen = BTreeSet::new();
    let mut max_rel_err = 0.0f64;
    for (pred, target) in pairs {
        for (&p, &y) in pred.data().iter().zip(target.data()) {
            let (p, y) = (p as f64, y as f64);
            if (p - y).abs() < 1e-3 || !(1e-4..=1.0 - 1e-4).contains(&p) {
                continue;
            }
            if !seen.insert((p.to_bits(), y.to_bits())) {
                continue;
            }
            let analytic = bcfl_grad_p(p, y, &params)?;
            let numeric = finite_diff(|q| bcfl(q, y, &params), p, GRADCHECK_STEP);
            let scale = analytic.abs().max(numeric.abs());
            if scale > 0.0 {
                max_rel_err = max_rel_err.max((analytic - numeric).abs() / scale);
            }
        }
    }
    Ok(GradcheckJson {
        max_rel_err,
        checked: seen.len(),
        step: GRADCHECK_STEP,
    })
}

pub fn parse_kernel(name: &str) -> Option<LossKernel> {
    Some(match name {
        "fl" => LossKernel::Fl,
        "qfl" => LossKernel::Qfl,
        "bcfl" => LossKernel::Bcfl,
        "wbce" => LossKernel::Wbce,
        "wmse" => LossKernel::Wmse,
        _ => return None,
    })
}

/// Loads `(pred, target)` rasters paired by file name from two directories.
pub fn load_pairs(pred_dir: &Path, target_dir: &Path) -> Result<Vec<(Heatmap, Heatmap)>> {
    list_rasters(target_dir)?
        .into_iter()
        .map(|target_path| {
            let name = target_path.file_name().expect("listed file has a name");
            let pred = load_raster(&pred_dir.join(name))?;
            let target = load_raster(&target_path)?;
            if pred.shape() != target.shape() {
                return Err(CliError::Format {
                    path: pred_dir.join(name),
                    message: format!(
                        "shape {:?} does not match target {:?}",
                        pred.shape(),
                        target.shape()
                    ),
                });
            }
            Ok((pred, target))
        })
        .collect()
}

pub fn loss_report(
    pairs: &[(Heatmap, Heatmap)],
    kernel: LossKernel,
    cfg: &RunConfig,
) -> Result<LossReport> {
    let refs: Vec<(&Heatmap, &Heatmap)> = pairs.iter().map(|(p, t)| (p, t)).collect();
    Ok(reduce_loss_batch(&refs, kernel, &cfg.loss_params()?)?)
}

pub fn loss(
    pred_dir: &Path,
    target_dir: &Path,
    kernel: LossKernel,
    with_gradcheck: bool,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let pairs = load_pairs(pred_dir, target_dir)?;
    let report = loss_report(&pairs, kernel, cfg)?;
    let gradcheck = if with_gradcheck {
        Some(gradcheck(&pairs, cfg)?)
    } else {
        None
    };
    write_json(
        out,
        &LossJson {
            kernel: kernel.as_str(),
            total: report.total,
            per_channel: report.per_channel,
            cell_count: report.cell_count,
            gradcheck,
        },
    )
}

/// 8-bit grey level of a probability, rounding half up.
pub fn grey_level(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM (P5) of one channel.
pub fn pgm_bytes(map: &Heatmap, channel: usize) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.channel(channel).iter().map(|&v| grey_level(v)));
    out
}

pub fn viz(file: &Path, channel: usize, out: &mut dyn Write) -> Result<()> {
    let map = load_raster(file)?;
    if channel >= map.channels() {
        return Err(CliError::Format {
            path: file.to_path_buf(),
            message: format!("channel {channel} out of range ({} channels)", map.channels()),
        });
    }
    out.write_all(&pgm_bytes(&map, channel))
        .map_err(|e| CliError::io("<output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grey_levels() {
        assert_eq!(grey_level(0.0), 0);
        assert_eq!(grey_level(1.0), 255);
        assert_eq!(grey_level(0.5), 128);
        assert_eq!(grey_level(0.25), 64);
    }

    #[test]
    fn pgm_header() {
        let map = Heatmap::from_data(1, 2, 3, 4.0, vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0]).unwrap();
        let bytes = pgm_bytes(&map, 0);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 128, 255, 255, 128, 0]);
    }

    #[test]
    fn kernels_by_name() {
        for name in ["fl", "qfl", "bcfl", "wbce", "wmse"] {
            assert_eq!(parse_kernel(name).unwrap().as_str(), name);
        }
        assert!(parse_kernel("mse").is_none());
    }
}
