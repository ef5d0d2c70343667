//! Spatial binning of faces.
//!
//! The domain is split into `B` bins per axis. Each face is sampled at a
//! spacing proportional to the bin length and registered in every bin that
//! holds at least one of its samples. The result is a compact three-array
//! layout: face IDs grouped by bin, per-bin counts, and per-bin start offsets.
//!
//! Bins are filled in `B_f` batches to bound the size of the per-face
//! indicator rows. Batching never changes the output.

use std::io::Write;
use std::ops::Range;
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::Backend;
use crate::geometry::{Aabb, CoordListGeometry, Dim, Point};

/// Marks an unused indicator slot.
pub const EMPTY: u32 = u32::MAX;

/// Default number of indicator slots per face and per batch, and the default
/// bound on `sum(counts) / n_faces`.
pub const DEFAULT_OVERLAP_FACTOR: usize = 10;

/// A regular grid of `density^D` bins over the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    domain: Aabb,
    dim: Dim,
    density: usize,
    bin_length: [f32; 3],
}

/// Bin address: per-axis coordinates and the row-major (x fastest) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinIndex {
    pub coords: [usize; 3],
    pub linear: usize,
}

impl BinGrid {
    pub fn new(domain: Aabb, dim: Dim, density: usize) -> Result<Self> {
        if density == 0 {
            return Err(Error::InvalidParameter(
                "bin density must be at least 1".into(),
            ));
        }
        let mut bin_length = [0.0f32; 3];
        for (a, len) in bin_length.iter_mut().enumerate().take(dim.n()) {
            *len = domain.extent(a) / density as f32;
            if len.is_nan() || *len <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "domain has zero extent along axis {a}"
                )));
            }
        }
        Ok(BinGrid {
            domain,
            dim,
            density,
            bin_length,
        })
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn density(&self) -> usize {
        self.density
    }

    pub fn bin_length(&self, axis: usize) -> f32 {
        self.bin_length[axis]
    }

    pub fn n_bins(&self) -> usize {
        self.density.pow(self.dim.n() as u32)
    }

    /// Half the shortest bin edge.
    pub fn default_spacing(&self) -> f32 {
        0.5 * self.bin_length[..self.dim.n()]
            .iter()
            .copied()
            .fold(f32::INFINITY, f32::min)
    }

    /// Locates the bin holding `p`. Points up to `1e-6 * extent` outside the
    /// domain clamp to the nearest boundary bin.
    pub fn bin_of_point(&self, p: Point) -> Result<BinIndex> {
        let mut coords = [0usize; 3];
        let mut linear = 0;
        let mut stride = 1;
        for (a, slot) in coords.iter_mut().enumerate().take(self.dim.n()) {
            let (lo, hi) = (self.domain.min[a] as f64, self.domain.max[a] as f64);
            let tol = 1e-6 * (hi - lo);
            let x = p[a] as f64;
            if !(x >= lo - tol && x <= hi + tol) {
                return Err(Error::PointOutsideDomain { point: p.0 });
            }
            let rel = ((x - lo) / self.bin_length[a] as f64).floor();
            *slot = rel.clamp(0.0, (self.density - 1) as f64) as usize;
            linear += *slot * stride;
            stride *= self.density;
        }
        Ok(BinIndex { coords, linear })
    }
}

/// Number of batches the bin range is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinFraction(usize);

impl BinFraction {
    pub fn new(batches: usize) -> Result<Self> {
        if batches == 0 {
            return Err(Error::InvalidParameter(
                "bin fraction must be at least 1".into(),
            ));
        }
        Ok(BinFraction(batches))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Bins per batch, rounded up so the batches cover every bin.
    pub fn bins_per_batch(self, n_bins: usize) -> usize {
        n_bins.div_ceil(self.0).max(1)
    }

    /// Global bin ranges of the batches; trailing batches may be short or empty.
    pub fn batches(self, n_bins: usize) -> Vec<Range<usize>> {
        let per = self.bins_per_batch(n_bins);
        (0..self.0)
            .map(|b| (b * per).min(n_bins)..((b + 1) * per).min(n_bins))
            .collect()
    }
}

impl Default for BinFraction {
    fn default() -> Self {
        BinFraction(1)
    }
}

/// How densely faces are sampled during binning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpacingRule {
    /// Half the shortest bin edge.
    HalfBin,
    Fixed(f32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningOptions {
    pub spacing: SpacingRule,
    pub overlap_factor: usize,
}

impl Default for BinningOptions {
    fn default() -> Self {
        BinningOptions {
            spacing: SpacingRule::HalfBin,
            overlap_factor: DEFAULT_OVERLAP_FACTOR,
        }
    }
}

/// Per-face occupancy slots for one batch of bins.
///
/// Slot `s` of face `f` sits at index `s * n_faces + f`. An occupied slot holds
/// the face ID in `face_ids` and the batch-local bin in `bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBinIndicator {
    n_faces: usize,
    row_capacity: usize,
    batch: Range<usize>,
    face_ids: Vec<u32>,
    bins: Vec<u32>,
}

impl FaceBinIndicator {
    pub fn new(n_faces: usize, row_capacity: usize, batch: Range<usize>) -> Self {
        FaceBinIndicator {
            n_faces,
            row_capacity,
            batch,
            face_ids: vec![EMPTY; n_faces * row_capacity],
            bins: vec![0; n_faces * row_capacity],
        }
    }

    pub fn batch(&self) -> Range<usize> {
        self.batch.clone()
    }

    pub fn row_capacity(&self) -> usize {
        self.row_capacity
    }

    /// Records that `face` occupies batch-local bin `local_bin` in `slot`.
    pub fn set(&mut self, face: usize, slot: usize, local_bin: usize) {
        assert!(slot < self.row_capacity && local_bin < self.batch.len());
        let i = slot * self.n_faces + face;
        self.face_ids[i] = face as u32;
        self.bins[i] = local_bin as u32;
    }

    pub fn slot(&self, face: usize, slot: usize) -> Option<usize> {
        let i = slot * self.n_faces + face;
        (self.face_ids[i] != EMPTY).then_some(self.bins[i] as usize)
    }
}

/// Face IDs grouped by bin.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinnedFaces {
    pub ids: Vec<u32>,
    pub counts: Vec<u32>,
    pub offsets: Vec<u32>,
}

impl BinnedFaces {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Faces registered in bin `b`, ascending.
    pub fn faces_in(&self, b: usize) -> &[u32] {
        let start = self.offsets[b] as usize;
        &self.ids[start..start + self.counts[b] as usize]
    }

    pub fn total(&self) -> usize {
        self.ids.len()
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Writes `bin_id,count,offset` rows.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "bin_id,count,offset")?;
        for (b, (c, o)) in self.counts.iter().zip(&self.offsets).enumerate() {
            writeln!(w, "{b},{c},{o}")?;
        }
        Ok(())
    }
}

/// Calls `emit` for every sample point of a face.
///
/// Edges get `ceil(len / spacing) + 1` evenly spaced points including both
/// ends. Triangles sample edge `v1 v2` that way, then sample each segment from
/// those points to `v3` by the same rule; `v3` is emitted once, last.
pub(crate) fn for_each_sample(face: &[Point], spacing: f32, mut emit: impl FnMut(Point)) {
    let segment = |a: Point, b: Point, emit: &mut dyn FnMut(Point), include_end: bool| {
        let len = (b - a).norm_sq().sqrt();
        let n = (len / spacing).ceil().max(1.0) as usize + 1;
        let step = b - a;
        for i in 0..n - 1 {
            emit(a + step.scale(i as f32 / (n - 1) as f32));
        }
        if include_end {
            emit(b);
        }
    };
    match face.len() {
        2 => segment(face[0], face[1], &mut emit, true),
        _ => {
            let apex = face[2];
            segment(
                face[0],
                face[1],
                &mut |p| segment(p, apex, &mut emit, false),
                true,
            );
            emit(apex);
        }
    }
}

/// Sample points of an edge (2 points) or triangle (3 points).
pub fn discretize_face(face: &[Point], spacing: f32) -> Result<Vec<Point>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample spacing must be positive, got {spacing}"
        )));
    }
    let valid = match face.len() {
        2 => crate::distance::edge_is_valid(face[0], face[1]),
        3 => crate::distance::triangle_is_valid(face[0], face[1], face[2]),
        n => {
            return Err(Error::InvalidParameter(format!(
                "faces have 2 or 3 vertices, got {n}"
            )))
        }
    };
    if !valid {
        return Err(Error::DegenerateFace { face: 0 });
    }
    let mut out = Vec::new();
    for_each_sample(face, spacing, |p| out.push(p));
    Ok(out)
}

/// Batch-local output of [`compact_indicators`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchBins {
    pub counts: Vec<u32>,
    pub offsets: Vec<u32>,
    pub ids: Vec<u32>,
}

/// Count-then-copy stream compaction of one batch of indicators, followed by
/// an ascending sort within each bin.
pub fn compact_indicators(ind: &FaceBinIndicator, backend: Backend) -> BatchBins {
    let n_local = ind.batch.len();
    let (counts, offsets, mut ids) = match backend {
        Backend::Serial => {
            let mut counts = vec![0u32; n_local];
            for (&f, &b) in ind.face_ids.iter().zip(&ind.bins) {
                if f != EMPTY {
                    counts[b as usize] += 1;
                }
            }
            let offsets = exclusive_scan(&counts);
            let mut cursor = offsets.clone();
            let mut ids = vec![0u32; counts.iter().sum::<u32>() as usize];
            for (&f, &b) in ind.face_ids.iter().zip(&ind.bins) {
                if f != EMPTY {
                    ids[cursor[b as usize] as usize] = f;
                    cursor[b as usize] += 1;
                }
            }
            (counts, offsets, ids)
        }
        Backend::Parallel => {
            let counts: Vec<AtomicU32> = (0..n_local).map(|_| AtomicU32::new(0)).collect();
            ind.face_ids
                .par_iter()
                .zip(&ind.bins)
                .filter(|(&f, _)| f != EMPTY)
                .for_each(|(_, &b)| {
                    counts[b as usize].fetch_add(1, Ordering::Relaxed);
                });
            let counts: Vec<u32> = counts.into_iter().map(AtomicU32::into_inner).collect();
            let offsets = exclusive_scan(&counts);
            let cursor: Vec<AtomicU32> = offsets.iter().map(|&o| AtomicU32::new(o)).collect();
            let slots: Vec<AtomicU32> = (0..counts.iter().sum::<u32>())
                .map(|_| AtomicU32::new(0))
                .collect();
            ind.face_ids
                .par_iter()
                .zip(&ind.bins)
                .filter(|(&f, _)| f != EMPTY)
                .for_each(|(&f, &b)| {
                    let at = cursor[b as usize].fetch_add(1, Ordering::Relaxed);
                    slots[at as usize].store(f, Ordering::Relaxed);
                });
            let ids = slots.into_iter().map(AtomicU32::into_inner).collect();
            (counts, offsets, ids)
        }
    };
    // copy order depends on scheduling; sorting restores a canonical layout
    let mut rest = ids.as_mut_slice();
    let mut groups = Vec::with_capacity(n_local);
    for &c in &counts {
        let (head, tail) = rest.split_at_mut(c as usize);
        groups.push(head);
        rest = tail;
    }
    match backend {
        Backend::Serial => groups.iter_mut().for_each(|g| g.sort_unstable()),
        Backend::Parallel => groups.par_iter_mut().for_each(|g| g.sort_unstable()),
    }
    BatchBins {
        counts,
        offsets,
        ids,
    }
}

fn exclusive_scan(counts: &[u32]) -> Vec<u32> {
    counts
        .iter()
        .scan(0u32, |acc, &c| {
            let start = *acc;
            *acc += c;
            Some(start)
        })
        .collect()
}

/// Assigns every face to every bin holding at least one of its samples.
pub fn fill_bins(
    g: &CoordListGeometry,
    grid: &BinGrid,
    frac: BinFraction,
    opts: &BinningOptions,
    backend: Backend,
) -> Result<BinnedFaces> {
    if g.dim() != grid.dim() {
        return Err(Error::WrongDimension {
            expected: grid.dim().n(),
            found: g.dim().n(),
        });
    }
    if opts.overlap_factor == 0 {
        return Err(Error::InvalidParameter(
            "overlap factor must be at least 1".into(),
        ));
    }
    let spacing = match opts.spacing {
        SpacingRule::HalfBin => grid.default_spacing(),
        SpacingRule::Fixed(s) if s > 0.0 && s.is_finite() => s,
        SpacingRule::Fixed(s) => {
            return Err(Error::InvalidParameter(format!(
                "sample spacing must be positive, got {s}"
            )))
        }
    };
    let n_faces = g.n_faces();
    let n_verts = g.dim().n();
    let row_capacity = opts.overlap_factor;
    let total_capacity = opts.overlap_factor * n_faces;

    let mut out = BinnedFaces {
        ids: Vec::new(),
        counts: Vec::with_capacity(grid.n_bins()),
        offsets: Vec::with_capacity(grid.n_bins()),
    };
    for batch in frac.batches(grid.n_bins()) {
        if batch.is_empty() {
            continue;
        }
        let rows = backend.map(n_faces, |f| {
            let face = g.face(f);
            let mut row: Vec<u32> = Vec::with_capacity(row_capacity);
            let mut needed = 0usize;
            let mut outside = false;
            for_each_sample(&face[..n_verts], spacing, |p| match grid.bin_of_point(p) {
                Ok(b) if batch.contains(&b.linear) => {
                    let local = (b.linear - batch.start) as u32;
                    if !row.contains(&local) {
                        needed += 1;
                        if row.len() < row_capacity {
                            row.push(local);
                        }
                    }
                }
                Ok(_) => {}
                Err(_) => outside = true,
            });
            if outside {
                return Err(Error::FaceOutsideDomain { face: f });
            }
            if needed > row_capacity {
                return Err(Error::CapacityExceeded {
                    needed,
                    capacity: row_capacity,
                });
            }
            Ok(row)
        });
        let mut ind = FaceBinIndicator::new(n_faces, row_capacity, batch.clone());
        for (f, row) in rows.into_iter().enumerate() {
            for (slot, local) in row?.into_iter().enumerate() {
                ind.set(f, slot, local as usize);
            }
        }
        let part = compact_indicators(&ind, backend);
        let base = out.ids.len() as u32;
        if out.ids.len() + part.ids.len() > total_capacity {
            return Err(Error::CapacityExceeded {
                needed: out.ids.len() + part.ids.len(),
                capacity: total_capacity,
            });
        }
        out.counts.extend(part.counts);
        out.offsets.extend(part.offsets.iter().map(|o| o + base));
        out.ids.extend(part.ids);
    }
    Ok(out)
}
