//! Cross-checks: backend equality, binned coverage of the naive grid, and
//! the near predicates against exact distances.

use std::collections::HashSet;
use std::io::Write;

use nearwall_core::distance::{
    check_near_edge, check_near_triangle, exact_point_triangle_distance, point_segment_distance_sq,
};
use nearwall_core::{
    Backend, BinGrid, BinnedFaces, CoordListGeometry, Forest, NearWallRadius, Point, Strategy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{refine, with_backend, with_density};

pub const ORACLE_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Whether every leaf of `coarse` is a block of `fine`, i.e. `fine` is at
/// least as refined everywhere.
pub fn covers(fine: &Forest, coarse: &Forest) -> bool {
    let blocks: HashSet<_> = fine.blocks().iter().map(|b| (b.level, b.coords)).collect();
    coarse.leaf_keys().iter().all(|k| blocks.contains(k))
}

fn backend_check(cfg: &RunConfig, g: &CoordListGeometry) -> Result<Check, CliError> {
    let serial = with_backend(cfg, Backend::Serial);
    let parallel = with_backend(cfg, Backend::Parallel);
    let (fa, oa) = refine(&serial, g, &serial.refine_params(), None)?;
    let (fb, ob) = refine(&parallel, g, &parallel.refine_params(), None)?;
    let passed = fa == fb && oa.levels == ob.levels && oa.bins == ob.bins;
    Ok(Check {
        name: "serial-parallel",
        passed,
        detail: format!("{} vs {} blocks", fa.n_blocks(), fb.n_blocks()),
    })
}

fn coverage_check(cfg: &RunConfig, g: &CoordListGeometry) -> Result<Check, CliError> {
    let naive = with_density(cfg, 1);
    let (fa, _) = refine(&naive, g, &naive.refine_params(), None)?;
    let mut binned = cfg.clone();
    binned.strategy = Strategy::Binned;
    let params = binned.refine_params();
    let replacement = cfg.corrupt_binned.then(|| -> Result<_, CliError> {
        let grid = BinGrid::new(cfg.domain, cfg.dim, params.bin_density)?;
        let empty = BinnedFaces {
            ids: Vec::new(),
            counts: vec![0; grid.n_bins()],
            offsets: vec![0; grid.n_bins()],
        };
        Ok((grid, empty))
    });
    let (fb, _) = refine(&binned, g, &params, replacement.transpose()?)?;
    Ok(Check {
        name: "binned-covers-naive",
        passed: covers(&fb, &fa),
        detail: format!(
            "B={}: {} binned vs {} naive blocks",
            params.bin_density,
            fb.n_blocks(),
            fa.n_blocks()
        ),
    })
}

/// Counts predicate answers that contradict the exact distance outside the
/// tolerance band `1e-4 * max(1, scale)`. Returns `(checked, disagreements)`.
pub fn sample_predicates(seed: u64, n: usize, triangles: bool) -> Result<(usize, usize), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pt = |rng: &mut ChaCha8Rng| {
        Point::new3(
            rng.random_range(-2.0..=2.0),
            rng.random_range(-2.0..=2.0),
            if triangles {
                rng.random_range(-2.0..=2.0)
            } else {
                0.0
            },
        )
    };
    let (mut checked, mut bad) = (0, 0);
    while checked < n {
        let v = [pt(&mut rng), pt(&mut rng), pt(&mut rng)];
        let x = pt(&mut rng);
        let d: f32 = rng.random_range(1e-3..=1.0);
        let r = NearWallRadius::new(d)?;
        let scale = v
            .iter()
            .flat_map(|p| v.iter().map(move |q| (*p - *q).norm_sq().sqrt()))
            .fold(0.0f32, f32::max) as f64;
        let (exact, near) = if triangles {
            match check_near_triangle(x, v[0], v[1], v[2], r) {
                Ok(near) => (exact_point_triangle_distance(x, v[0], v[1], v[2])?, near),
                Err(_) => continue,
            }
        } else {
            match check_near_edge(x, v[0], v[1], r) {
                Ok(near) => (point_segment_distance_sq(x, v[0], v[1])?.sqrt(), near),
                Err(_) => continue,
            }
        };
        if (exact - d as f64).abs() <= 1e-4 * scale.max(1.0) {
            continue;
        }
        checked += 1;
        if near != (exact <= d as f64) {
            bad += 1;
        }
    }
    Ok((checked, bad))
}

fn oracle_check(cfg: &RunConfig) -> Result<Check, CliError> {
    let (nt, bt) = sample_predicates(cfg.seed, ORACLE_SAMPLES, true)?;
    let (ne, be) = sample_predicates(cfg.seed.wrapping_add(1), ORACLE_SAMPLES, false)?;
    Ok(Check {
        name: "predicate-oracle",
        passed: bt == 0 && be == 0,
        detail: format!("{bt} of {nt} triangle and {be} of {ne} edge samples disagree"),
    })
}

pub fn validate(cfg: &RunConfig, g: &CoordListGeometry) -> Result<Vec<Check>, CliError> {
    Ok(vec![
        backend_check(cfg, g)?,
        coverage_check(cfg, g)?,
        oracle_check(cfg)?,
    ])
}

pub fn write_checks(checks: &[Check], mut w: impl Write) -> std::io::Result<()> {
    for c in checks {
        writeln!(
            w,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    Ok(())
}
