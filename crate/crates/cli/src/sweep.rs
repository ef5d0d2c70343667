//! Timing and block counts against bin density.

use std::io::Write;

use nearwall_core::nearwall::Stage;
use nearwall_core::CoordListGeometry;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{refine, with_density};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub b: usize,
    pub bin_setup_ms: f64,
    pub face_detect_ms: f64,
    pub total_ms: f64,
    pub blocks_marked: usize,
    pub blocks_final: usize,
}

pub fn sweep_one(cfg: &RunConfig, g: &CoordListGeometry, b: usize) -> Result<SweepRow, CliError> {
    let c = with_density(cfg, b);
    let (forest, outcome) = refine(&c, g, &c.refine_params(), None)?;
    Ok(SweepRow {
        b,
        bin_setup_ms: outcome.timings.total_ms(Stage::BinSetup),
        face_detect_ms: outcome.timings.total_ms(Stage::FaceDetection),
        total_ms: outcome.timings.overall_ms(),
        blocks_marked: outcome.blocks_marked(),
        blocks_final: forest.n_blocks(),
    })
}

/// Runs every density in `list` after one untimed warm-up run. A failed run
/// yields an `Err` entry and the sweep moves on.
pub fn sweep(
    cfg: &RunConfig,
    g: &CoordListGeometry,
    list: &[usize],
) -> Vec<(usize, Result<SweepRow, CliError>)> {
    if let Some(&first) = list.first() {
        let _ = sweep_one(cfg, g, first);
    }
    list.iter().map(|&b| (b, sweep_one(cfg, g, b))).collect()
}

pub fn write_sweep_csv(
    rows: &[(usize, Result<SweepRow, CliError>)],
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(
        w,
        "B,bin_setup_ms,face_detect_ms,total_ms,blocks_marked,blocks_final"
    )?;
    for (b, row) in rows {
        match row {
            Ok(r) => writeln!(
                w,
                "{},{:.3},{:.3},{:.3},{},{}",
                r.b, r.bin_setup_ms, r.face_detect_ms, r.total_ms, r.blocks_marked, r.blocks_final
            )?,
            Err(_) => writeln!(w, "{b},,,,,")?,
        }
    }
    Ok(())
}
