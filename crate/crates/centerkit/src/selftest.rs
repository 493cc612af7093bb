//! Oracle-equivalence suites shared by the `selftest` command and the
//! acceptance tests.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use centerkit_core::heatmap::gc_value;
use centerkit_core::loss::{alpha_c, bcfl, bcfl_grad_p, estimate_alpha, qfl};
use centerkit_core::matching::{hungarian, CostMatrix};
use centerkit_core::metrics::{evaluate_unit, Aggregation, CasReport};
use centerkit_core::oracle::{
    brute_force_assignment, centerness_reference, exhaustive_cas, finite_diff, OracleUnit,
};
use centerkit_core::{
    BcflParams, BoundingBox, CenterPoint, GcParams, GroundTruthCenter, Heatmap, ImageInfo,
    MatchCostParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ochm::{decode, encode};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({}; {:.3}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> SuiteOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    SuiteOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// gc_value with η = φ = 0.5 against the square-root centerness form.
pub fn gc_identity(samples: usize, seed: u64) -> SuiteOutcome {
    timed("gc-centerness identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GcParams::default();
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let w = rng.random_range(1.0..500.0);
            let h = rng.random_range(1.0..500.0);
            let l = rng.random_range(0.0..w);
            let t = rng.random_range(0.0..h);
            let (r, b) = (w - l, h - t);
            if l <= 0.0 || r <= 0.0 || t <= 0.0 || b <= 0.0 {
                continue;
            }
            let fast = gc_value(l, r, t, b, params).unwrap_or(f64::NAN);
            let diff = (fast - centerness_reference(l, r, t, b)).abs();
            worst = if diff.is_nan() { f64::INFINITY } else { worst.max(diff) };
        }
        (worst <= 1e-12, format!("max abs err {worst:.3e} over {samples} points"))
    })
}

/// bcfl = α_c·qfl, non-negativity, and bcfl(α=0.75) ≤ qfl for y ≤ 0.5.
pub fn bcfl_decomposition() -> SuiteOutcome {
    timed("bcfl decomposition", || {
        let gammas = [0.0, 1.0, 2.0, 3.0];
        let alphas = [0.25, 0.5, 0.75];
        let mut worst = 0.0f64;
        let mut negative = 0usize;
        let mut above_qfl = 0usize;
        for i in 0..50 {
            let p = (i as f64 + 0.5) / 50.0;
            for j in 0..50 {
                let y = j as f64 / 49.0;
                for &gamma in &gammas {
                    let q = qfl(p, y, gamma);
                    for &alpha in &alphas {
                        let params = BcflParams { alpha, gamma };
                        let v = bcfl(p, y, &params);
                        worst = worst.max((v - alpha_c(y, alpha) * q).abs());
                        if v < 0.0 || q < 0.0 {
                            negative += 1;
                        }
                        if alpha == 0.75 && y <= 0.5 && v > q {
                            above_qfl += 1;
                        }
                    }
                }
            }
        }
        (
            worst <= 1e-12 && negative == 0 && above_qfl == 0,
            format!("max abs err {worst:.3e}, {negative} negative, {above_qfl} above qfl"),
        )
    })
}

/// Analytic gradient against central differences with h = 1e-5.
pub fn gradient_check() -> SuiteOutcome {
    timed("bcfl gradient check", || {
        let grid: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        for &gamma in &[1.0, 2.0, 3.0, 4.0] {
            for &alpha in &[0.5, 0.75, 0.964] {
                let params = BcflParams { alpha, gamma };
                for &p in &grid {
                    for &y in &grid {
                        if (p - y).abs() < 1e-3 {
                            continue;
                        }
                        let analytic = match bcfl_grad_p(p, y, &params) {
                            Ok(g) => g,
                            Err(_) => return (false, format!("gradient failed at p={p}, y={y}")),
                        };
                        let numeric = finite_diff(|q| bcfl(q, y, &params), p, 1e-5);
                        let scale = analytic.abs().max(numeric.abs());
                        if scale > 0.0 {
                            worst = worst.max((analytic - numeric).abs() / scale);
                        }
                        checked += 1;
                    }
                }
            }
        }
        (worst < 1e-5, format!("max rel err {worst:.3e} over {checked} points"))
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CostMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(0.0..10.0)).collect();
    CostMatrix::from_vec(rows, cols, data).expect("finite entries")
}

/// Hungarian totals against enumeration on random matrices.
pub fn assignment_optimality(count: usize, seed: u64) -> SuiteOutcome {
    timed("assignment optimality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for k in 0..count {
            let (rows, cols) = match k % 10 {
                0 => (3, 6),
                1 => (6, 3),
                _ => (rng.random_range(1..=7), rng.random_range(1..=7)),
            };
            let m = random_matrix(&mut rng, rows, cols);
            let fast = hungarian(&m);
            let slow = match brute_force_assignment(&m) {
                Ok(a) => a,
                Err(e) => return (false, e.to_string()),
            };
            let expected_pairs = rows.min(cols);
            if fast.pairs.len() != expected_pairs {
                return (false, format!("matrix {k}: {} pairs", fast.pairs.len()));
            }
            worst = worst.max((fast.total - slow.total).abs());
        }
        (worst <= 1e-9, format!("max total diff {worst:.3e} over {count} matrices"))
    })
}

/// A random image with up to five boxes of one category and up to five
/// predictions, some near the box centers and some anywhere.
pub fn random_unit(rng: &mut ChaCha8Rng, image_id: i64) -> OracleUnit {
    let width = rng.random_range(64.0..640.0_f64).round();
    let height = rng.random_range(64.0..640.0_f64).round();
    let image = ImageInfo::new(image_id, width, height, "").expect("positive size");
    let gts: Vec<GroundTruthCenter> = (0..rng.random_range(0..=5))
        .map(|_| {
            let w = rng.random_range(2.0..width / 2.0);
            let h = rng.random_range(2.0..height / 2.0);
            let x = rng.random_range(0.0..width - w);
            let y = rng.random_range(0.0..height - h);
            GroundTruthCenter::from_box(&BoundingBox::new(x, y, w, h, 1, image_id))
        })
        .collect();
    let preds = (0..rng.random_range(0..=5))
        .map(|k| {
            let (x, y) = match gts.get(k) {
                Some(gt) if rng.random_bool(0.7) => {
                    let spread = gt.d * 1.5;
                    (
                        gt.x + rng.random_range(-spread..=spread),
                        gt.y + rng.random_range(-spread..=spread),
                    )
                }
                _ => (rng.random_range(0.0..width), rng.random_range(0.0..height)),
            };
            CenterPoint {
                x,
                y,
                score: rng.random_range(0.0..=1.0),
                category_id: 1,
                image_id,
            }
        })
        .collect();
    OracleUnit { image, gts, preds }
}

/// Pooled CAS through the evaluation pipeline.
pub fn pipeline_cas(units: &[OracleUnit], params: &MatchCostParams) -> centerkit_core::Result<f64> {
    let evaluations = units
        .iter()
        .map(|u| evaluate_unit(&u.image, 1, &u.gts, &u.preds, params))
        .collect::<centerkit_core::Result<Vec<_>>>()?;
    Ok(CasReport::from_evaluations(&evaluations, Aggregation::Pooled, None)?.cas)
}

/// Pipeline CAS against exhaustive enumeration on random small instances.
pub fn cas_oracle(instances: usize, seed: u64) -> SuiteOutcome {
    timed("cas oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = MatchCostParams::default();
        let mut worst = 0.0f64;
        let mut compared = 0usize;
        // instances where every unit is empty have no score and are redrawn
        while compared < instances {
            let units: Vec<OracleUnit> = (0..rng.random_range(1..=3))
                .map(|i| random_unit(&mut rng, i))
                .collect();
            match (pipeline_cas(&units, &params), exhaustive_cas(&units, &params)) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max((a - b).abs());
                    compared += 1;
                }
                (Err(_), Err(_)) => {}
                (a, b) => return (false, format!("pipeline {a:?} vs oracle {b:?}")),
            }
        }
        (
            worst <= 1e-9,
            format!("max diff {worst:.3e} over {compared} scored instances"),
        )
    })
}

/// Perfect and empty predictions, and a radial displacement sweep.
pub fn cas_boundaries() -> SuiteOutcome {
    timed("cas boundaries", || {
        let params = MatchCostParams::default();
        let image = ImageInfo::new(1, 640.0, 480.0, "").expect("positive size");
        let gts: Vec<GroundTruthCenter> = [
            BoundingBox::new(10.0, 20.0, 50.0, 40.0, 1, 1),
            BoundingBox::new(200.0, 100.0, 80.0, 120.0, 1, 1),
            BoundingBox::new(400.0, 300.0, 30.0, 30.0, 1, 1),
        ]
        .iter()
        .map(GroundTruthCenter::from_box)
        .collect();
        let perfect: Vec<CenterPoint> = gts
            .iter()
            .map(|g| CenterPoint {
                x: g.x,
                y: g.y,
                score: 1.0,
                category_id: 1,
                image_id: 1,
            })
            .collect();
        let unit = |preds: Vec<CenterPoint>| OracleUnit {
            image: image.clone(),
            gts: gts.clone(),
            preds,
        };
        let perfect_cas = pipeline_cas(&[unit(perfect)], &params);
        let empty_cas = pipeline_cas(&[unit(Vec::new())], &params);

        let gt = gts[1];
        let mut last = f64::NEG_INFINITY;
        let mut monotone = true;
        let mut flat_after = true;
        for step in 0..100 {
            let r = 2.0 * gt.d * step as f64 / 99.0;
            let pred = CenterPoint {
                x: gt.x + r * 0.6,
                y: gt.y + r * 0.8,
                score: gt.gc,
                category_id: 1,
                image_id: 1,
            };
            let penalty = match pipeline_cas(
                &[OracleUnit {
                    image: image.clone(),
                    gts: vec![gt],
                    preds: vec![pred],
                }],
                &params,
            ) {
                Ok(cas) => 1.0 - cas,
                Err(_) => return (false, "sweep failed".into()),
            };
            if penalty < last {
                monotone = false;
            }
            if r > gt.d && penalty != 1.0 {
                flat_after = false;
            }
            last = penalty;
        }
        let passed = perfect_cas == Ok(1.0) && empty_cas == Ok(0.0) && monotone && flat_after;
        (
            passed,
            format!(
                "perfect {perfect_cas:?}, empty {empty_cas:?}, monotone {monotone}, flat beyond D {flat_after}"
            ),
        )
    })
}

/// estimate_alpha on rasters with a known fraction of positive cells.
pub fn alpha_exactness() -> SuiteOutcome {
    timed("alpha estimation", || {
        let mut maps = Vec::new();
        for k in 0..4 {
            let mut data = vec![0.0f32; 2500];
            for (i, v) in data.iter_mut().enumerate() {
                *v = if i % 25 == k { 0.6 + 0.1 * k as f32 } else { 0.599 * (i % 7) as f32 / 6.0 };
            }
            maps.push(Heatmap::from_data(1, 50, 50, 4.0, data).expect("valid raster"));
        }
        match estimate_alpha(&maps, 0.6) {
            Ok(a) => (a == 0.96, format!("alpha {a}")),
            Err(e) => (false, e.to_string()),
        }
    })
}

/// Random rasters survive encode/decode bit for bit.
pub fn ochm_roundtrip(count: usize, seed: u64) -> SuiteOutcome {
    timed("ochm roundtrip", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..count {
            let (c, h, w) = if k == 0 {
                (1, 1, 1)
            } else {
                (
                    rng.random_range(1..=4),
                    rng.random_range(1..=40),
                    rng.random_range(1..=40),
                )
            };
            let data = (0..c * h * w).map(|_| rng.random::<f32>()).collect();
            let stride = rng.random_range(1..=16) as f32 * 0.5;
            let map = Heatmap::from_data(c, h, w, stride, data).expect("valid raster");
            let back = match encode(&map).and_then(|b| decode(&b)) {
                Ok(m) => m,
                Err(e) => return (false, format!("raster {k}: {e}")),
            };
            let same = back.shape() == map.shape()
                && back.stride().to_bits() == map.stride().to_bits()
                && back
                    .data()
                    .iter()
                    .zip(map.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return (false, format!("raster {k} differs"));
            }
        }
        (true, format!("{count} rasters"))
    })
}

/// Runs every suite at full size.
pub fn run_all() -> Vec<SuiteOutcome> {
    vec![
        gc_identity(100_000, 1),
        bcfl_decomposition(),
        gradient_check(),
        assignment_optimality(1000, 2),
        cas_oracle(200, 3),
        cas_boundaries(),
        alpha_exactness(),
        ochm_roundtrip(100, 4),
    ]
}

/// Prints one line per suite and returns the number of failures.
pub fn report(outcomes: &[SuiteOutcome], out: &mut dyn Write) -> std::io::Result<usize> {
    for o in outcomes {
        writeln!(out, "{o}")?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    writeln!(out, "{} passed, {} failed", outcomes.len() - failed, failed)?;
    Ok(failed)
}
