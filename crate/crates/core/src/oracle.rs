//! Brute-force reference implementations.
//!
//! These deliberately avoid the fast paths of the other modules so the test
//! suite and the `selftest` command can compare the two.

use alloc::vec;
use alloc::vec::Vec;

use crate::annotations::{BoundingBox, ImageInfo};
use crate::error::{Error, Result};
use crate::matching::{Assignment, CostMatrix, GroundTruthCenter, MatchCostParams};
use crate::numeric::{exp, ln, sqrt};
use crate::peaks::CenterPoint;

/// Largest `min(rows, cols)` accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_LIMIT: usize = 8;
/// Largest side accepted by [`exhaustive_cas`].
pub const EXHAUSTIVE_CAS_LIMIT: usize = 7;

fn ratio_power(a: f64, b: f64, exponent: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if exponent == 0.0 {
        return 1.0;
    }
    if lo == 0.0 {
        return 0.0;
    }
    exp(exponent * (ln(lo) - ln(hi)))
}

/// Generalized centerness of an image point w.r.t. a box; 0 outside or on the edge.
pub fn gc_reference(x: f64, y: f64, bbox: &BoundingBox, eta: f64, phi: f64) -> f64 {
    let (x0, y0) = (bbox.x, bbox.y);
    let (x1, y1) = (bbox.x + bbox.w, bbox.y + bbox.h);
    if !(x > x0 && x < x1 && y > y0 && y < y1) {
        return 0.0;
    }
    ratio_power(x - x0, x1 - x, eta) * ratio_power(y - y0, y1 - y, phi)
}

/// Centerness in its square-root form.
pub fn centerness_reference(l: f64, r: f64, t: f64, b: f64) -> f64 {
    sqrt((l.min(r) / l.max(r)) * (t.min(b) / t.max(b)))
}

/// Central difference `(f(p + h) - f(p - h)) / 2h`.
pub fn finite_diff(f: impl Fn(f64) -> f64, p: f64, h: f64) -> f64 {
    (f(p + h) - f(p - h)) / (2.0 * h)
}

/// Calls `visit` with every injective map from `0..k` into `0..n`, in lexicographic order.
fn for_each_injection(k: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(
        depth: usize,
        k: usize,
        n: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == k {
            visit(current);
            return;
        }
        for j in 0..n {
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push(j);
            rec(depth + 1, k, n, used, current, visit);
            current.pop();
            used[j] = false;
        }
    }
    let mut used = vec![false; n];
    let mut current = Vec::with_capacity(k);
    rec(0, k, n, &mut used, &mut current, &mut visit);
}

/// Enumerates every injective assignment of `min(rows, cols)` pairs.
///
/// The first minimum in lexicographic order of the pair list wins ties.
pub fn brute_force_assignment(cost: &CostMatrix) -> Result<Assignment> {
    let (g, m) = (cost.rows(), cost.cols());
    let k = g.min(m);
    if k > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            size: k,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let transpose = g > m;
    let (small, large) = if transpose { (m, g) } else { (g, m) };
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for_each_injection(small, large, |map| {
        let mut pairs: Vec<(usize, usize)> = map
            .iter()
            .enumerate()
            .map(|(a, &b)| if transpose { (b, a) } else { (a, b) })
            .collect();
        pairs.sort_unstable();
        let total: f64 = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
        let better = match &best {
            None => true,
            Some((t, p)) => total < *t || (total == *t && pairs < *p),
        };
        if better {
            best = Some((total, pairs));
        }
    });
    let (total, pairs) = best.unwrap_or((0.0, Vec::new()));
    Ok(Assignment { pairs, total })
}

/// One (image, category) instance for [`exhaustive_cas`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleUnit {
    /// Image providing the coordinate normalization.
    pub image: ImageInfo,
    /// Ground-truth centers.
    pub gts: Vec<GroundTruthCenter>,
    /// Predicted centers.
    pub preds: Vec<CenterPoint>,
}

/// Unit penalty `(cp + md) / n` by full enumeration; `None` for an empty unit.
pub fn exhaustive_unit_penalty(unit: &OracleUnit, params: &MatchCostParams) -> Result<Option<f64>> {
    let (g, m) = (unit.gts.len(), unit.preds.len());
    if g.max(m) > EXHAUSTIVE_CAS_LIMIT {
        return Err(Error::TooLarge {
            size: g.max(m),
            limit: EXHAUSTIVE_CAS_LIMIT,
        });
    }
    let n = g.max(m);
    if n == 0 {
        return Ok(None);
    }
    let (w, h) = (unit.image.width, unit.image.height);
    let pair_cost = |gi: usize, pi: usize| {
        let gt = &unit.gts[gi];
        let p = &unit.preds[pi];
        let dx = (gt.x - p.x) / w;
        let dy = (gt.y - p.y) / h;
        params.lambda * sqrt(dx * dx + dy * dy) + params.mu * (gt.gc - p.score).abs()
    };
    let transpose = g > m;
    let (small, large) = if transpose { (m, g) } else { (g, m) };
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for_each_injection(small, large, |map| {
        let mut pairs: Vec<(usize, usize)> = map
            .iter()
            .enumerate()
            .map(|(a, &b)| if transpose { (b, a) } else { (a, b) })
            .collect();
        pairs.sort_unstable();
        let total: f64 = pairs.iter().map(|&(gi, pi)| pair_cost(gi, pi)).sum();
        if best.as_ref().is_none_or(|(t, _)| total < *t) {
            best = Some((total, pairs));
        }
    });
    let pairs = best.map(|(_, p)| p).unwrap_or_default();

    let mut md = 0.0;
    let mut kept = 0usize;
    for (gi, pi) in pairs {
        let gt = &unit.gts[gi];
        let p = &unit.preds[pi];
        let dist = sqrt((gt.x - p.x) * (gt.x - p.x) + (gt.y - p.y) * (gt.y - p.y));
        if dist <= gt.d {
            kept += 1;
            if gt.d > 0.0 {
                md += dist / gt.d;
            }
        }
    }
    let cp = (g - kept).max(m - kept);
    Ok(Some((cp as f64 + md) / n as f64))
}

/// CAS of a set of units computed by enumeration: one minus the mean unit penalty.
pub fn exhaustive_cas(units: &[OracleUnit], params: &MatchCostParams) -> Result<f64> {
    let mut penalties = Vec::new();
    for u in units {
        if let Some(p) = exhaustive_unit_penalty(u, params)? {
            penalties.push(p);
        }
    }
    if penalties.is_empty() {
        return Err(Error::Empty("no evaluation units"));
    }
    let total: f64 = penalties.iter().sum();
    Ok(1.0 - total / penalties.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gc_reference_examples() {
        let b = BoundingBox::new(0.0, 0.0, 4.0, 4.0, 1, 1);
        assert_eq!(gc_reference(2.0, 2.0, &b, 0.5, 0.5), 1.0);
        assert!((gc_reference(1.0, 1.0, &b, 0.5, 0.5) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(gc_reference(0.0, 2.0, &b, 0.5, 0.5), 0.0);
        assert_eq!(gc_reference(5.0, 2.0, &b, 0.5, 0.5), 0.0);
    }

    #[test]
    fn finite_diff_examples() {
        assert!((finite_diff(|p| p * p, 3.0, 1e-5) - 6.0).abs() < 1e-8);
        assert_eq!(finite_diff(|_| 4.2, 0.3, 1e-5), 0.0);
        let params = crate::loss::BcflParams::new(0.75, 2.0).unwrap();
        let fd = finite_diff(|p| crate::loss::bcfl(p, 0.8, &params), 0.6, 1e-5);
        let analytic = crate::loss::bcfl_grad_p(0.6, 0.8, &params).unwrap();
        assert!(((fd - analytic) / analytic).abs() < 1e-5);
    }

    #[test]
    fn brute_force_examples() {
        let m = CostMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]).unwrap();
        let a = brute_force_assignment(&m).unwrap();
        assert_eq!(a.pairs, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(a.total, 5.0);
        let m = CostMatrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(brute_force_assignment(&m).unwrap().total, 4.0);
        let m = CostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(brute_force_assignment(&m).unwrap().pairs, vec![(0, 0), (1, 1)]);
        let big = CostMatrix::from_vec(9, 9, vec![0.0; 81]).unwrap();
        assert!(brute_force_assignment(&big).is_err());
    }

    #[test]
    fn brute_force_ties_lexicographic() {
        let m = CostMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(brute_force_assignment(&m).unwrap().pairs, vec![(0, 0), (1, 1)]);
    }
}
