//! Near-wall refinement.
//!
//! Each level is processed in turn: leaf blocks whose cells have a center
//! within `d_spec` of some face are marked, marks are dilated across face
//! neighbors when faces were looked up through bins, and the marked blocks
//! are split.
//!
//! Marking kernels work per block. The cells of a block share one pass over
//! the candidate faces; a face is only tested against the cell centers when
//! its bounding box, inflated by `d_spec` plus a rounding margin, reaches the
//! cells. The margin keeps the cull strictly looser than the predicate, so
//! the result equals testing every cell against every candidate.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::binning::{fill_bins, BinFraction, BinGrid, BinnedFaces, BinningOptions};
use crate::distance::{near_edge, near_triangle, NearWallRadius};
use crate::error::{Error, Result};
use crate::exec::Backend;
use crate::forest::{BlockId, Forest, RefineMark};
use crate::geometry::{bounding_box, CoordListGeometry, Dim, Point};

/// Default per-cell capacity of [`CellFaceLinks`].
pub const DEFAULT_LINK_CAPACITY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every cell checks every face.
    Naive,
    /// Cells check the faces of the bin holding their center; marks are then propagated.
    Binned,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Binned => "binned",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "binned" => Ok(Strategy::Binned),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

/// Number of propagation rounds, `1 + floor(d_spec / block_length)`.
pub fn n_prop(d_spec: f64, block_length: f64) -> usize {
    1 + (d_spec / block_length).floor() as usize
}

/// Per-face bounding boxes, one array per axis bound.
struct FaceBoxes {
    min: [Vec<f32>; 3],
    max: [Vec<f32>; 3],
    dim: Dim,
}

impl FaceBoxes {
    fn new(g: &CoordListGeometry) -> Self {
        let n = g.dim().n();
        let mut min: [Vec<f32>; 3] = Default::default();
        let mut max: [Vec<f32>; 3] = Default::default();
        for a in 0..n {
            min[a] = g.component(0, a).to_vec();
            max[a] = g.component(0, a).to_vec();
            for j in 1..n {
                for (f, &v) in g.component(j, a).iter().enumerate() {
                    min[a][f] = min[a][f].min(v);
                    max[a][f] = max[a][f].max(v);
                }
            }
        }
        FaceBoxes {
            min,
            max,
            dim: g.dim(),
        }
    }

    #[inline]
    fn reaches(&self, f: usize, lo: &[f32; 3], hi: &[f32; 3]) -> bool {
        (0..self.dim.n()).all(|a| self.max[a][f] >= lo[a] && self.min[a][f] <= hi[a])
    }
}

/// Shared state for the marking and linking kernels.
struct Detector<'a> {
    g: &'a CoordListGeometry,
    boxes: FaceBoxes,
    d: f32,
    reach: f32,
}

impl<'a> Detector<'a> {
    fn new(g: &'a CoordListGeometry, forest: &Forest, d: NearWallRadius) -> Self {
        let dom = forest.domain();
        let scale = (0..3)
            .map(|a| dom.min[a].abs().max(dom.max[a].abs()))
            .fold(1.0f32, f32::max);
        let d = d.get();
        Detector {
            g,
            boxes: FaceBoxes::new(g),
            d,
            reach: d * 1.001 + 1e-5 * scale,
        }
    }

    #[inline]
    fn near(&self, x: Point, face: &[Point; 3]) -> bool {
        match self.g.dim() {
            Dim::Two => near_edge(x, face[0], face[1], self.d),
            Dim::Three => near_triangle(x, *face, self.d),
        }
    }

    /// Whether any of `cells` is near any of `candidates`.
    fn any_near(&self, cells: &[Point], candidates: impl Iterator<Item = usize>) -> bool {
        let (lo, hi) = self.cell_reach(cells);
        for f in candidates {
            if !self.boxes.reaches(f, &lo, &hi) {
                continue;
            }
            let face = self.g.face(f);
            if cells.iter().any(|&c| self.near(c, &face)) {
                return true;
            }
        }
        false
    }

    fn cell_reach(&self, cells: &[Point]) -> ([f32; 3], [f32; 3]) {
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        for c in cells {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a] - self.reach);
                hi[a] = hi[a].max(c[a] + self.reach);
            }
        }
        (lo, hi)
    }
}

/// Cell centers of a block grouped by the bin that holds them.
fn cells_by_bin(forest: &Forest, id: BlockId, grid: &BinGrid) -> Result<Vec<(usize, Vec<Point>)>> {
    let mut tagged = Vec::with_capacity(forest.dim().cells_per_block());
    for c in forest.cell_centers(id) {
        tagged.push((grid.bin_of_point(c)?.linear, c));
    }
    tagged.sort_by_key(|&(b, _)| b);
    let mut groups: Vec<(usize, Vec<Point>)> = Vec::new();
    for (b, c) in tagged {
        match groups.last_mut() {
            Some((last, cells)) if *last == b => cells.push(c),
            _ => groups.push((b, vec![c])),
        }
    }
    Ok(groups)
}

fn check_inputs(forest: &Forest, g: &CoordListGeometry) -> Result<()> {
    if g.dim() != forest.dim() {
        return Err(Error::WrongDimension {
            expected: forest.dim().n(),
            found: g.dim().n(),
        });
    }
    if g.is_empty() {
        return Err(Error::EmptyGeometry);
    }
    Ok(())
}

fn apply_marks(forest: &mut Forest, leaves: &[BlockId], hits: &[bool]) -> usize {
    let mut n = 0;
    for (&id, &hit) in leaves.iter().zip(hits) {
        if hit {
            forest.set_mark(id, RefineMark::Marked);
            n += 1;
        }
    }
    n
}

/// Marks every leaf at `level` with a cell center within `d_spec` of any face.
/// Returns the number of blocks found near the geometry.
pub fn mark_near_wall_naive(
    forest: &mut Forest,
    level: u8,
    g: &CoordListGeometry,
    d_spec: NearWallRadius,
    backend: Backend,
) -> Result<usize> {
    check_inputs(forest, g)?;
    let det = Detector::new(g, forest, d_spec);
    let leaves = forest.leaf_blocks_at(level);
    let hits = {
        let forest = &*forest;
        backend.map_slice(&leaves, |&id| {
            det.any_near(&forest.cell_centers(id), 0..g.n_faces())
        })
    };
    Ok(apply_marks(forest, &leaves, &hits))
}

/// Like [`mark_near_wall_naive`], but each cell only tests the faces of the
/// bin holding its center.
pub fn mark_near_wall_binned(
    forest: &mut Forest,
    level: u8,
    g: &CoordListGeometry,
    bins: &BinnedFaces,
    grid: &BinGrid,
    d_spec: NearWallRadius,
    backend: Backend,
) -> Result<usize> {
    check_inputs(forest, g)?;
    if bins.n_bins() != grid.n_bins() {
        return Err(Error::InvalidParameter(format!(
            "bins hold {} entries but the grid has {}",
            bins.n_bins(),
            grid.n_bins()
        )));
    }
    let det = Detector::new(g, forest, d_spec);
    let leaves = forest.leaf_blocks_at(level);
    let hits = {
        let forest = &*forest;
        backend.map_slice(&leaves, |&id| -> Result<bool> {
            for (bin, cells) in cells_by_bin(forest, id, grid)? {
                let faces = bins.faces_in(bin).iter().map(|&f| f as usize);
                if det.any_near(&cells, faces) {
                    return Ok(true);
                }
            }
            Ok(false)
        })
    };
    let hits = hits.into_iter().collect::<Result<Vec<bool>>>()?;
    Ok(apply_marks(forest, &leaves, &hits))
}

/// Dilates the marks of `level` by `rounds` face-neighbor hops.
///
/// Each round first flags unmarked leaves next to a marked leaf as
/// intermediate, reading neighbors and writing only the block itself, then
/// promotes every intermediate mark. Only leaves of `level` take part.
pub fn propagate_rounds(
    forest: &mut Forest,
    level: u8,
    rounds: usize,
    backend: Backend,
) -> Result<usize> {
    let leaves = forest.leaf_blocks_at(level);
    if leaves
        .iter()
        .any(|&id| forest.mark(id) == RefineMark::Intermediate)
    {
        return Err(Error::InvalidParameter(format!(
            "level {level} already holds intermediate marks"
        )));
    }
    let mut added = 0;
    for _ in 0..rounds {
        let flagged = {
            let forest = &*forest;
            backend.map_slice(&leaves, |&id| {
                if forest.mark(id) != RefineMark::None {
                    return false;
                }
                let mut hit = false;
                forest.for_each_leaf_neighbor(id, |n| {
                    hit |= forest.block(n).level == level && forest.mark(n) == RefineMark::Marked;
                });
                hit
            })
        };
        for (&id, &f) in leaves.iter().zip(&flagged) {
            if f {
                forest.set_mark(id, RefineMark::Intermediate);
            }
        }
        for &id in &leaves {
            if forest.mark(id) == RefineMark::Intermediate {
                forest.set_mark(id, RefineMark::Marked);
                added += 1;
            }
        }
    }
    Ok(added)
}

/// Propagates marks of `level` over `1 + floor(d_spec / block_length)` rounds,
/// where `block_length` is the shortest block edge at `level`.
pub fn propagate_marks(
    forest: &mut Forest,
    level: u8,
    d_spec: NearWallRadius,
    backend: Backend,
) -> Result<usize> {
    let rounds = n_prop(d_spec.get() as f64, forest.min_block_length(level));
    propagate_rounds(forest, level, rounds, backend)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineParams {
    pub d_spec: NearWallRadius,
    pub strategy: Strategy,
    /// Bins per axis.
    pub bin_density: usize,
    pub bin_fraction: BinFraction,
    pub binning: BinningOptions,
    /// Total grid levels after refinement (root level included).
    pub n_levels: usize,
    pub backend: Backend,
}

impl RefineParams {
    pub fn new(d_spec: NearWallRadius, n_levels: usize) -> Self {
        RefineParams {
            d_spec,
            strategy: Strategy::Binned,
            bin_density: 8,
            bin_fraction: BinFraction::default(),
            binning: BinningOptions::default(),
            n_levels,
            backend: Backend::Serial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BinSetup,
    FaceDetection,
    Propagation,
    Refinement,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::BinSetup => "bin_setup",
            Stage::FaceDetection => "face_detection",
            Stage::Propagation => "propagation",
            Stage::Refinement => "refinement",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingEntry {
    pub stage: Stage,
    pub level: u8,
    pub milliseconds: f64,
}

/// Wall-clock time per pipeline stage and level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timings {
    pub entries: Vec<TimingEntry>,
}

impl Timings {
    fn time<T>(&mut self, stage: Stage, level: u8, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push(TimingEntry {
            stage,
            level,
            milliseconds: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn total_ms(&self, stage: Stage) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.stage == stage)
            .fold(0.0, |acc, e| acc + e.milliseconds)
    }

    pub fn overall_ms(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc + e.milliseconds)
    }

    /// Writes `stage,level,strategy,B,B_f,milliseconds` rows.
    pub fn write_csv(
        &self,
        mut w: impl Write,
        strategy: Strategy,
        density: usize,
        fraction: usize,
    ) -> std::io::Result<()> {
        writeln!(w, "stage,level,strategy,B,B_f,milliseconds")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{:.3}",
                e.stage,
                e.level,
                strategy.as_str(),
                density,
                fraction,
                e.milliseconds
            )?;
        }
        Ok(())
    }
}

/// What happened at one level of [`refine_near_wall`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    pub level: u8,
    pub leaves: usize,
    /// Blocks found near the geometry by face detection.
    pub detected: usize,
    /// Blocks marked once propagation is done.
    pub marked: usize,
    pub balance_refined: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub timings: Timings,
    pub levels: Vec<LevelStats>,
    pub bins: Option<(BinGrid, BinnedFaces)>,
}

impl RefineOutcome {
    pub fn blocks_marked(&self) -> usize {
        self.levels.iter().map(|l| l.marked).sum()
    }
}

/// Runs face detection, propagation (binned strategy only), and refinement
/// for levels `0 .. n_levels - 1`. Bins are built once, before the first level.
pub fn refine_near_wall(
    forest: &mut Forest,
    g: &CoordListGeometry,
    params: &RefineParams,
) -> Result<RefineOutcome> {
    check_refine_inputs(forest, g, params)?;
    let mut timings = Timings::default();
    if params.n_levels <= 1 {
        return Ok(RefineOutcome {
            timings,
            levels: Vec::new(),
            bins: None,
        });
    }
    let bins = match params.strategy {
        Strategy::Naive => None,
        Strategy::Binned => {
            let grid = BinGrid::new(*forest.domain(), forest.dim(), params.bin_density)?;
            let bins = timings.time(Stage::BinSetup, 0, || {
                fill_bins(
                    g,
                    &grid,
                    params.bin_fraction,
                    &params.binning,
                    params.backend,
                )
            })?;
            Some((grid, bins))
        }
    };
    refine_levels(forest, g, params, bins, timings)
}

/// [`refine_near_wall`] with caller-supplied bins, used by the binned strategy
/// in place of building them from `g`.
pub fn refine_with_bins(
    forest: &mut Forest,
    g: &CoordListGeometry,
    params: &RefineParams,
    grid: BinGrid,
    bins: BinnedFaces,
) -> Result<RefineOutcome> {
    check_refine_inputs(forest, g, params)?;
    let bins = (params.strategy == Strategy::Binned).then_some((grid, bins));
    refine_levels(forest, g, params, bins, Timings::default())
}

fn check_refine_inputs(
    forest: &Forest,
    g: &CoordListGeometry,
    params: &RefineParams,
) -> Result<()> {
    check_inputs(forest, g)?;
    g.check_faces()?;
    let bb = bounding_box(g)?;
    if !forest.domain().contains(bb.min, g.dim()) || !forest.domain().contains(bb.max, g.dim()) {
        return Err(Error::InvalidParameter(format!(
            "geometry bounds {:?}..{:?} exceed the domain",
            bb.min.0, bb.max.0
        )));
    }
    if params.n_levels > forest.max_level() as usize + 1 {
        return Err(Error::MaxLevelExceeded {
            max_level: forest.max_level(),
        });
    }
    Ok(())
}

fn refine_levels(
    forest: &mut Forest,
    g: &CoordListGeometry,
    params: &RefineParams,
    bins: Option<(BinGrid, BinnedFaces)>,
    mut timings: Timings,
) -> Result<RefineOutcome> {
    let backend = params.backend;
    let mut levels = Vec::new();
    for level in 0..params.n_levels.saturating_sub(1) as u8 {
        let leaves = forest.leaf_blocks_at(level).len();
        let detected = timings.time(Stage::FaceDetection, level, || match &bins {
            None => mark_near_wall_naive(forest, level, g, params.d_spec, backend),
            Some((grid, b)) => {
                mark_near_wall_binned(forest, level, g, b, grid, params.d_spec, backend)
            }
        })?;
        if bins.is_some() {
            timings.time(Stage::Propagation, level, || {
                propagate_marks(forest, level, params.d_spec, backend)
            })?;
        }
        let marked = forest.marked_at(level).len();
        let report = timings.time(Stage::Refinement, level, || forest.refine_marked(level))?;
        levels.push(LevelStats {
            level,
            leaves,
            detected,
            marked,
            balance_refined: report.balance_refined,
        });
    }
    Ok(RefineOutcome {
        timings,
        levels,
        bins,
    })
}

/// Face IDs linked to cells of the finest leaves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellFaceLinks {
    /// `(block, local cell)` per linked cell, ascending.
    pub cells: Vec<(BlockId, u16)>,
    pub offsets: Vec<u32>,
    pub face_ids: Vec<u32>,
    pub capacity: usize,
}

impl CellFaceLinks {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn faces(&self, i: usize) -> &[u32] {
        let end = self
            .offsets
            .get(i + 1)
            .map_or(self.face_ids.len(), |&o| o as usize);
        &self.face_ids[self.offsets[i] as usize..end]
    }

    pub fn get(&self, block: BlockId, cell: u16) -> Option<&[u32]> {
        self.cells
            .binary_search(&(block, cell))
            .ok()
            .map(|i| self.faces(i))
    }
}

/// `sqrt(D)` times the cell diagonal at the deepest populated level.
pub fn default_link_distance(forest: &Forest) -> f32 {
    let level = (forest.n_levels() - 1) as u8;
    let len = forest.block_length(level);
    let n = forest.dim().n();
    let diag = (0..n)
        .map(|a| (len[a] / crate::forest::CELLS_PER_AXIS as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    ((n as f64).sqrt() * diag) as f32
}

/// Links every cell of the deepest leaves to the faces of its bin that lie
/// within `d_link` of its center.
pub fn build_cell_face_links(
    forest: &Forest,
    g: &CoordListGeometry,
    bins: &BinnedFaces,
    grid: &BinGrid,
    d_link: NearWallRadius,
    capacity: usize,
    backend: Backend,
) -> Result<CellFaceLinks> {
    check_inputs(forest, g)?;
    let det = Detector::new(g, forest, d_link);
    let level = (0..forest.n_levels() as u8)
        .rev()
        .find(|&l| !forest.leaf_blocks_at(l).is_empty())
        .unwrap_or(0);
    let leaves = forest.leaf_blocks_at(level);
    let per_block = backend.map_slice(&leaves, |&id| -> Result<Vec<(u16, Vec<u32>)>> {
        let mut out = Vec::new();
        for cell in 0..forest.dim().cells_per_block() {
            let x = forest.cell_center(id, cell);
            let (lo, hi) = det.cell_reach(&[x]);
            let bin = grid.bin_of_point(x)?.linear;
            let hits: Vec<u32> = bins
                .faces_in(bin)
                .iter()
                .copied()
                .filter(|&f| {
                    det.boxes.reaches(f as usize, &lo, &hi) && det.near(x, &g.face(f as usize))
                })
                .collect();
            if !hits.is_empty() {
                out.push((cell as u16, hits));
            }
        }
        Ok(out)
    });

    let mut links = CellFaceLinks {
        capacity,
        ..Default::default()
    };
    let mut worst: Option<(BlockId, u16, usize)> = None;
    for (&id, cells) in leaves.iter().zip(per_block) {
        for (cell, faces) in cells? {
            if faces.len() > capacity && worst.is_none_or(|w| faces.len() > w.2) {
                worst = Some((id, cell, faces.len()));
            }
            links.cells.push((id, cell));
            links.offsets.push(links.face_ids.len() as u32);
            links.face_ids.extend(faces);
        }
    }
    if let Some((block, cell, count)) = worst {
        return Err(Error::LinkCapacityExceeded {
            block: block.0,
            cell: cell as usize,
            count,
            capacity,
        });
    }
    Ok(links)
}
