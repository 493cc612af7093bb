//! Center alignment score and its companions.
//!
//! Scoring happens per evaluation unit, one (image, category) pair. A unit
//! with `n = max(#gt, #pred)` contributes the penalty `(cp + md_sum) / n`,
//! where `cp` is the larger of the unmatched counts and `md_sum` adds up the
//! matched distances divided by each ground truth's threshold. CAS is one
//! minus the mean penalty.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::annotations::{ImageInfo, SizeBand};
use crate::error::{Error, Result};
use crate::matching::{match_and_refine, GroundTruthCenter, MatchCostParams, MatchSet};
use crate::numeric::pairwise_mean;
use crate::peaks::CenterPoint;

/// Per-unit counts and sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitScore {
    /// Image of the unit.
    pub image_id: i64,
    /// Category of the unit.
    pub category_id: i64,
    /// Sum of threshold-normalized matched distances.
    pub md_sum: f64,
    /// Cardinality penalty.
    pub cp: usize,
    /// Normalizer.
    pub n: usize,
    /// Matched pairs.
    pub matched: usize,
    /// Matched predictions inside their ground-truth box.
    pub tp: usize,
    /// Ground truths in the unit.
    pub gt_count: usize,
    /// Predictions in the unit.
    pub pred_count: usize,
}

impl UnitScore {
    /// `cp / n`.
    pub fn cp_ratio(&self) -> f64 {
        self.cp as f64 / self.n as f64
    }

    /// `md_sum / n`.
    pub fn md_ratio(&self) -> f64 {
        self.md_sum / self.n as f64
    }

    /// `(cp + md_sum) / n`, in [0, 1].
    pub fn penalty(&self) -> f64 {
        (self.cp as f64 + self.md_sum) / self.n as f64
    }
}

fn normalized_distance(distance: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        distance / d
    }
}

/// Scores one refined unit; `None` when it has neither ground truths nor predictions.
pub fn score_unit(
    image_id: i64,
    category_id: i64,
    matches: &MatchSet,
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
) -> Option<UnitScore> {
    let n = gts.len().max(preds.len());
    if n == 0 {
        return None;
    }
    let md_sum = matches
        .pairs
        .iter()
        .map(|p| normalized_distance(p.distance, gts[p.gt].d))
        .sum();
    let tp = matches
        .pairs
        .iter()
        .filter(|p| gts[p.gt].bbox.contains(preds[p.pred].x, preds[p.pred].y))
        .count();
    Some(UnitScore {
        image_id,
        category_id,
        md_sum,
        cp: matches.unmatched_gt.len().max(matches.unmatched_pred.len()),
        n,
        matched: matches.pairs.len(),
        tp,
        gt_count: gts.len(),
        pred_count: preds.len(),
    })
}

/// Restricts a unit to the ground truths of one size band.
///
/// Pairs whose ground truth is out of band are ignored, predictions never
/// count towards the banded cardinality penalty, and `n` is the number of
/// in-band ground truths. `None` when the band has no ground truth here.
pub fn score_unit_band(
    image_id: i64,
    category_id: i64,
    matches: &MatchSet,
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
    band: SizeBand,
) -> Option<UnitScore> {
    let in_band = gts.iter().filter(|g| g.band == band).count();
    if in_band == 0 {
        return None;
    }
    let pairs: Vec<_> = matches
        .pairs
        .iter()
        .filter(|p| gts[p.gt].band == band)
        .collect();
    let md_sum = pairs
        .iter()
        .map(|p| normalized_distance(p.distance, gts[p.gt].d))
        .sum();
    let tp = pairs
        .iter()
        .filter(|p| gts[p.gt].bbox.contains(preds[p.pred].x, preds[p.pred].y))
        .count();
    let unmatched = matches
        .unmatched_gt
        .iter()
        .filter(|&&g| gts[g].band == band)
        .count();
    Some(UnitScore {
        image_id,
        category_id,
        md_sum,
        cp: unmatched,
        n: in_band,
        matched: pairs.len(),
        tp,
        gt_count: in_band,
        pred_count: pairs.len(),
    })
}

/// Overall and per-band scores of one (image, category) unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitEvaluation {
    /// Unbanded score, `None` for an empty unit.
    pub overall: Option<UnitScore>,
    /// Scores for small, medium and large ground truths.
    pub bands: [Option<UnitScore>; 3],
}

/// Matches, refines and scores one unit.
pub fn evaluate_unit(
    image: &ImageInfo,
    category_id: i64,
    gts: &[GroundTruthCenter],
    preds: &[CenterPoint],
    params: &MatchCostParams,
) -> Result<UnitEvaluation> {
    let matches = match_and_refine(gts, preds, params, image)?;
    let overall = score_unit(image.id, category_id, &matches, gts, preds);
    let bands = SizeBand::ALL
        .map(|band| score_unit_band(image.id, category_id, &matches, gts, preds, band));
    Ok(UnitEvaluation { overall, bands })
}

/// CAS with its two penalty terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasTerms {
    /// `1 - cp - md`.
    pub cas: f64,
    /// Mean of `cp / n`.
    pub cp: f64,
    /// Mean of `md_sum / n`.
    pub md: f64,
    /// Units averaged.
    pub units: usize,
}

fn sorted_units(units: &[UnitScore]) -> Vec<UnitScore> {
    let mut sorted = units.to_vec();
    sorted.sort_by_key(|u| (u.image_id, u.category_id));
    sorted
}

/// Averages unit penalties in (image, category) order.
pub fn cas(units: &[UnitScore]) -> Result<CasTerms> {
    if units.is_empty() {
        return Err(Error::Empty("no evaluation units"));
    }
    let sorted = sorted_units(units);
    let cp_ratios: Vec<f64> = sorted.iter().map(UnitScore::cp_ratio).collect();
    let md_ratios: Vec<f64> = sorted.iter().map(UnitScore::md_ratio).collect();
    let cp = pairwise_mean(&cp_ratios).unwrap_or(0.0);
    let md = pairwise_mean(&md_ratios).unwrap_or(0.0);
    Ok(CasTerms {
        cas: 1.0 - cp - md,
        cp,
        md,
        units: units.len(),
    })
}

/// Macro average: CAS per category, then the mean over categories.
pub fn cas_macro(units: &[UnitScore]) -> Result<CasTerms> {
    let per_cat = cas_per_category(units)?;
    let cps: Vec<f64> = per_cat.values().map(|t| t.cp).collect();
    let mds: Vec<f64> = per_cat.values().map(|t| t.md).collect();
    let cp = pairwise_mean(&cps).unwrap_or(0.0);
    let md = pairwise_mean(&mds).unwrap_or(0.0);
    Ok(CasTerms {
        cas: 1.0 - cp - md,
        cp,
        md,
        units: units.len(),
    })
}

/// CAS of each category's units, keyed by category id.
pub fn cas_per_category(units: &[UnitScore]) -> Result<BTreeMap<i64, CasTerms>> {
    if units.is_empty() {
        return Err(Error::Empty("no evaluation units"));
    }
    let mut groups: BTreeMap<i64, Vec<UnitScore>> = BTreeMap::new();
    for u in units {
        groups.entry(u.category_id).or_default().push(*u);
    }
    groups
        .into_iter()
        .map(|(cat, us)| cas(&us).map(|t| (cat, t)))
        .collect()
}

/// Precision, recall and F1 from true-positive counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    /// `Σtp / Σ#pred`, 0 without predictions.
    pub precision: f64,
    /// `Σtp / Σ#gt`, 0 without ground truths.
    pub recall: f64,
    /// Harmonic mean, 0 when both are 0.
    pub f1: f64,
}

/// Pools true positives over units.
pub fn precision_recall_f1(units: &[UnitScore]) -> PrecisionRecall {
    let tp: usize = units.iter().map(|u| u.tp).sum();
    let preds: usize = units.iter().map(|u| u.pred_count).sum();
    let gts: usize = units.iter().map(|u| u.gt_count).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, preds);
    let recall = ratio(tp, gts);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecall {
        precision,
        recall,
        f1,
    }
}

/// How unit scores are combined into one CAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean over all units.
    #[default]
    Pooled,
    /// Mean over categories of per-category CAS.
    Macro,
}

impl Aggregation {
    /// Aggregates `units` with this rule.
    pub fn apply(self, units: &[UnitScore]) -> Result<CasTerms> {
        match self {
            Aggregation::Pooled => cas(units),
            Aggregation::Macro => cas_macro(units),
        }
    }
}

/// Per-category line of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryScore {
    /// Category id.
    pub category_id: i64,
    /// Category CAS and terms.
    pub terms: CasTerms,
}

/// Dataset-level summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CasReport {
    /// Center alignment score.
    pub cas: f64,
    /// Cardinality penalty term.
    pub cp_term: f64,
    /// Matched discrepancy term.
    pub md_term: f64,
    /// CAS over small ground truths, `None` if there are none.
    pub cas_s: Option<f64>,
    /// CAS over medium ground truths.
    pub cas_m: Option<f64>,
    /// CAS over large ground truths.
    pub cas_l: Option<f64>,
    /// Pooled precision.
    pub precision: f64,
    /// Pooled recall.
    pub recall: f64,
    /// Pooled F1.
    pub f1: f64,
    /// Number of scored units.
    pub units: usize,
    /// Per-category CAS, ascending category id.
    pub per_category: Vec<CategoryScore>,
}

impl CasReport {
    /// Builds a report from unit evaluations.
    ///
    /// With `headline_band` set, the headline CAS, terms, unit count and
    /// per-category lines are computed on that band's units; P/R/F1 always
    /// use the unbanded units.
    pub fn from_evaluations(
        evaluations: &[UnitEvaluation],
        aggregation: Aggregation,
        headline_band: Option<SizeBand>,
    ) -> Result<Self> {
        let overall: Vec<UnitScore> = evaluations.iter().filter_map(|e| e.overall).collect();
        let banded = |idx: usize| -> Vec<UnitScore> {
            evaluations.iter().filter_map(|e| e.bands[idx]).collect()
        };
        let band_cas = |idx: usize| -> Result<Option<f64>> {
            let units = banded(idx);
            if units.is_empty() {
                Ok(None)
            } else {
                aggregation.apply(&units).map(|t| Some(t.cas))
            }
        };
        let headline_units = match headline_band {
            None => overall.clone(),
            Some(band) => banded(band as usize),
        };
        let terms = aggregation.apply(&headline_units)?;
        let per_category = cas_per_category(&headline_units)?
            .into_iter()
            .map(|(category_id, terms)| CategoryScore { category_id, terms })
            .collect();
        let pr = precision_recall_f1(&overall);
        Ok(Self {
            cas: terms.cas,
            cp_term: terms.cp,
            md_term: terms.md,
            cas_s: band_cas(0)?,
            cas_m: band_cas(1)?,
            cas_l: band_cas(2)?,
            precision: pr.precision,
            recall: pr.recall,
            f1: pr.f1,
            units: terms.units,
            per_category,
        })
    }
}
