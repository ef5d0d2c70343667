use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nearwall_core::binning::fill_bins;
use nearwall_core::geometry::{
    generate_circle, generate_sphere, import_stl, import_text_primitives, index_to_coords,
};
use nearwall_core::nearwall::{
    mark_near_wall_binned, mark_near_wall_naive, refine_near_wall, refine_with_bins,
};
use nearwall_core::{
    Backend, BinGrid, BinnedFaces, CoordListGeometry, Dim, Forest, Point, RefineOutcome,
    RefineParams, Strategy,
};

use crate::config::{GeometrySource, RunConfig, DEFAULT_CIRCLE_EDGES, DEFAULT_SPHERE_RINGS};
use crate::error::CliError;
use crate::vtk::export_vtk;

pub fn load_geometry(cfg: &RunConfig) -> Result<CoordListGeometry, CliError> {
    let g = match &cfg.source {
        GeometrySource::Stl(path) => import_stl(path)?,
        GeometrySource::Primitives(path) => {
            index_to_coords(&import_text_primitives(path, cfg.dim)?)?
        }
        GeometrySource::Default => {
            let d = &cfg.domain;
            let n = cfg.dim.n();
            let mut c = Point::default();
            for a in 0..n {
                c.0[a] = 0.5 * (d.min[a] + d.max[a]);
            }
            let extent = (0..n).map(|a| d.extent(a)).fold(f32::INFINITY, f32::min);
            let indexed = match cfg.dim {
                Dim::Two => generate_circle(c, 0.25 * extent, DEFAULT_CIRCLE_EDGES)?,
                Dim::Three => generate_sphere(
                    c,
                    0.3 * extent,
                    DEFAULT_SPHERE_RINGS.0,
                    DEFAULT_SPHERE_RINGS.1,
                )?,
            };
            index_to_coords(&indexed)?
        }
    };
    if g.dim() != cfg.dim {
        return Err(CliError::Config(format!(
            "geometry is {}D but the run is {}D",
            g.dim().n(),
            cfg.dim.n()
        )));
    }
    Ok(g)
}

pub fn root_forest(cfg: &RunConfig) -> Result<Forest, CliError> {
    Ok(Forest::init_root_grid(cfg.domain, cfg.dim, &cfg.root_dims)?)
}

/// One refinement run with `params`, optionally on replacement bins.
pub fn refine(
    cfg: &RunConfig,
    g: &CoordListGeometry,
    params: &RefineParams,
    bins: Option<(BinGrid, BinnedFaces)>,
) -> Result<(Forest, RefineOutcome), CliError> {
    let mut forest = root_forest(cfg)?;
    let outcome = match bins {
        None => refine_near_wall(&mut forest, g, params)?,
        Some((grid, bins)) => refine_with_bins(&mut forest, g, params, grid, bins)?,
    };
    Ok((forest, outcome))
}

/// Marks the deepest leaves that lie near the geometry, without refining them.
fn mark_finest(
    forest: &mut Forest,
    g: &CoordListGeometry,
    cfg: &RunConfig,
    outcome: &RefineOutcome,
) -> Result<(), CliError> {
    let level = (forest.n_levels() - 1) as u8;
    match &outcome.bins {
        Some((grid, bins)) => {
            mark_near_wall_binned(forest, level, g, bins, grid, cfg.d_spec, cfg.backend)?
        }
        None => mark_near_wall_naive(forest, level, g, cfg.d_spec, cfg.backend)?,
    };
    Ok(())
}

pub fn write_summary(
    cfg: &RunConfig,
    g: &CoordListGeometry,
    forest: &Forest,
    outcome: &RefineOutcome,
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "dimension: {}", cfg.dim.n())?;
    writeln!(w, "faces: {}", g.n_faces())?;
    writeln!(w, "strategy: {}", cfg.strategy.as_str())?;
    writeln!(w, "bin density: {}", cfg.effective_density())?;
    writeln!(w, "bin fraction: {}", cfg.bin_fraction.get())?;
    writeln!(w, "d_spec: {}", cfg.d_spec.get())?;
    writeln!(w, "levels: {}", forest.n_levels())?;
    for s in &outcome.levels {
        writeln!(
            w,
            "level {}: leaves {}, near wall {}, marked {}, balance splits {}",
            s.level, s.leaves, s.detected, s.marked, s.balance_refined
        )?;
    }
    let per_level: Vec<String> = forest
        .blocks_per_level()
        .iter()
        .map(|n| n.to_string())
        .collect();
    writeln!(w, "blocks per level: {}", per_level.join(" "))?;
    writeln!(w, "blocks marked: {}", outcome.blocks_marked())?;
    writeln!(w, "total blocks: {}", forest.n_blocks())?;
    writeln!(w, "leaf blocks: {}", forest.leaves().count())?;
    if let Some((grid, bins)) = &outcome.bins {
        let max = (0..bins.n_bins())
            .map(|b| bins.faces_in(b).len())
            .max()
            .unwrap_or(0);
        writeln!(
            w,
            "bins: {} of {} occupied, {} face entries, at most {} per bin",
            bins.occupied_bins(),
            grid.n_bins(),
            bins.total(),
            max
        )?;
    }
    Ok(())
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Runs the pipeline, prints the summary, and writes the requested artifacts.
/// Nothing is written unless the run itself succeeds.
pub fn run(cfg: &RunConfig, out: impl Write) -> Result<(), CliError> {
    let g = load_geometry(cfg)?;
    let params = cfg.refine_params();
    let (mut forest, outcome) = refine(cfg, &g, &params, None)?;
    let dumped_bins = match (&cfg.dump_bins, &outcome.bins) {
        (None, _) => None,
        (Some(_), Some((_, bins))) => Some(bins.clone()),
        (Some(_), None) => {
            let grid = BinGrid::new(cfg.domain, cfg.dim, cfg.bin_density)?;
            Some(fill_bins(
                &g,
                &grid,
                params.bin_fraction,
                &params.binning,
                cfg.backend,
            )?)
        }
    };

    if cfg.out_vtk.is_some() {
        mark_finest(&mut forest, &g, cfg, &outcome)?;
    }

    write_summary(cfg, &g, &forest, &outcome, out).map_err(|e| CliError::io("<stdout>", e))?;

    if let Some(path) = &cfg.out_csv {
        write_file(path, |w| {
            outcome.timings.write_csv(
                w,
                cfg.strategy,
                cfg.effective_density(),
                cfg.bin_fraction.get(),
            )
        })?;
    }
    if let (Some(path), Some(bins)) = (&cfg.dump_bins, &dumped_bins) {
        write_file(path, |w| bins.write_csv(w))?;
    }
    if let Some(path) = &cfg.out_vtk {
        export_vtk(&forest, path)?;
    }
    Ok(())
}

/// Same configuration with another bin density; a density of 1 runs the naive strategy.
pub fn with_density(cfg: &RunConfig, b: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.bin_density = b;
    c.strategy = if b == 1 {
        Strategy::Naive
    } else {
        Strategy::Binned
    };
    c
}

pub fn with_backend(cfg: &RunConfig, backend: Backend) -> RunConfig {
    let mut c = cfg.clone();
    c.backend = backend;
    c
}
