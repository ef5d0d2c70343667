//! Forest-of-octrees grid.
//!
//! The root grid is a structured array of level-0 blocks. Each block holds
//! 4 cells per axis and may be split into `2^D` children one level down.
//! Blocks are addressed by dense IDs allocated in creation order and are
//! enumerated per level through ID sets. Cells have no storage of their own;
//! they are addressed as `(block, local index)`.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Dim, Point};

/// Default cap on refinement depth.
pub const DEFAULT_MAX_LEVEL: u8 = 10;

/// Cells per block along each axis.
pub const CELLS_PER_AXIS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineMark {
    #[default]
    None,
    Marked,
    /// Only present between the two passes of mark propagation.
    Intermediate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub level: u8,
    /// Integer position among the blocks of this level.
    pub coords: [u32; 3],
    pub origin: Point,
    pub parent: Option<BlockId>,
    /// Children occupy `first_child .. first_child + 2^D`.
    pub first_child: Option<BlockId>,
}

/// What lies across one face of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    /// The face is on the domain boundary.
    Boundary,
    /// A leaf at the same or a coarser level covers the face.
    Leaf(BlockId),
    /// A same-level block that has been split; its children touch the face.
    Refined(BlockId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    domain: Aabb,
    dim: Dim,
    root_dims: [u32; 3],
    max_level: u8,
    blocks: Vec<Block>,
    marks: Vec<RefineMark>,
    id_sets: Vec<Vec<BlockId>>,
    lookup: HashMap<(u8, [u32; 3]), BlockId>,
}

/// Counts from one call to [`Forest::refine_marked`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefineReport {
    /// Marked blocks that were split.
    pub refined: usize,
    /// Extra blocks split to restore 2:1 balance.
    pub balance_refined: usize,
}

impl Forest {
    /// Builds the level-0 root grid tiling `domain`.
    pub fn init_root_grid(domain: Aabb, dim: Dim, root_dims: &[usize]) -> Result<Self> {
        Self::with_max_level(domain, dim, root_dims, DEFAULT_MAX_LEVEL)
    }

    pub fn with_max_level(
        domain: Aabb,
        dim: Dim,
        root_dims: &[usize],
        max_level: u8,
    ) -> Result<Self> {
        let n = dim.n();
        if root_dims.len() != n
            || root_dims
                .iter()
                .any(|&r| r == 0 || r > u32::MAX as usize >> 12)
        {
            return Err(Error::InvalidDims(root_dims.to_vec()));
        }
        if (0..n).any(|a| {
            let e = domain.extent(a);
            e.is_nan() || e <= 0.0
        }) {
            return Err(Error::InvalidParameter(format!(
                "domain {:?}..{:?} has zero extent",
                domain.min.0, domain.max.0
            )));
        }
        let mut dims = [1u32; 3];
        for a in 0..n {
            dims[a] = root_dims[a] as u32;
        }
        let mut forest = Forest {
            domain,
            dim,
            root_dims: dims,
            max_level,
            blocks: Vec::new(),
            marks: Vec::new(),
            id_sets: vec![Vec::new()],
            lookup: HashMap::new(),
        };
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    forest.push_block(0, [i, j, k], None);
                }
            }
        }
        Ok(forest)
    }

    fn push_block(&mut self, level: u8, coords: [u32; 3], parent: Option<BlockId>) -> BlockId {
        let id = BlockId(self.blocks.len() as u32);
        let len = self.block_length(level);
        let mut origin = Point::default();
        for a in 0..self.dim.n() {
            origin.0[a] = (self.domain.min[a] as f64 + coords[a] as f64 * len[a]) as f32;
        }
        self.blocks.push(Block {
            id,
            level,
            coords,
            origin,
            parent,
            first_child: None,
        });
        self.marks.push(RefineMark::None);
        if self.id_sets.len() <= level as usize {
            self.id_sets.resize(level as usize + 1, Vec::new());
        }
        self.id_sets[level as usize].push(id);
        self.lookup.insert((level, coords), id);
        id
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn root_dims(&self) -> &[u32] {
        &self.root_dims[..self.dim.n()]
    }

    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.index()]
    }

    /// Number of populated levels.
    pub fn n_levels(&self) -> usize {
        self.id_sets.len()
    }

    /// IDs of every block at `level`, ascending. Empty past the deepest level.
    pub fn id_set(&self, level: u8) -> &[BlockId] {
        self.id_sets.get(level as usize).map_or(&[], Vec::as_slice)
    }

    /// Per-axis block edge length at `level`.
    pub fn block_length(&self, level: u8) -> [f64; 3] {
        let mut len = [0.0; 3];
        for a in 0..self.dim.n() {
            len[a] =
                self.domain.extent(a) as f64 / self.root_dims[a] as f64 / (1u64 << level) as f64;
        }
        len
    }

    /// Shortest block edge at `level`.
    pub fn min_block_length(&self, level: u8) -> f64 {
        self.block_length(level)[..self.dim.n()]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn block_bounds(&self, id: BlockId) -> Aabb {
        let b = self.block(id);
        let len = self.block_length(b.level);
        let mut min = Point::default();
        let mut max = Point::default();
        for a in 0..self.dim.n() {
            let lo = self.domain.min[a] as f64;
            min.0[a] = (lo + b.coords[a] as f64 * len[a]) as f32;
            max.0[a] = (lo + (b.coords[a] + 1) as f64 * len[a]) as f32;
        }
        Aabb { min, max }
    }

    pub fn is_leaf(&self, id: BlockId) -> bool {
        self.block(id).first_child.is_none()
    }

    pub fn children(&self, id: BlockId) -> Option<Range<u32>> {
        self.block(id)
            .first_child
            .map(|c| c.0..c.0 + self.dim.n_children() as u32)
    }

    pub fn mark(&self, id: BlockId) -> RefineMark {
        self.marks[id.index()]
    }

    pub fn set_mark(&mut self, id: BlockId, mark: RefineMark) {
        self.marks[id.index()] = mark;
    }

    pub fn marks(&self) -> &[RefineMark] {
        &self.marks
    }

    /// Childless blocks of `level`, ascending.
    pub fn leaf_blocks_at(&self, level: u8) -> Vec<BlockId> {
        self.id_set(level)
            .iter()
            .copied()
            .filter(|&id| self.is_leaf(id))
            .collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks
            .iter()
            .filter(|b| b.first_child.is_none())
            .map(|b| b.id)
    }

    /// Leaves at `level` currently marked for refinement, ascending.
    pub fn marked_at(&self, level: u8) -> Vec<BlockId> {
        self.id_set(level)
            .iter()
            .copied()
            .filter(|&id| self.is_leaf(id) && self.mark(id) == RefineMark::Marked)
            .collect()
    }

    /// Center of cell `local` (x fastest) of block `id`.
    pub fn cell_center(&self, id: BlockId, local: usize) -> Point {
        let b = self.block(id);
        let len = self.block_length(b.level);
        let mut p = Point::default();
        let mut rest = local;
        for a in 0..self.dim.n() {
            let i = rest % CELLS_PER_AXIS;
            rest /= CELLS_PER_AXIS;
            let cell = len[a] / CELLS_PER_AXIS as f64;
            let global = b.coords[a] as f64 * CELLS_PER_AXIS as f64 + i as f64 + 0.5;
            p.0[a] = (self.domain.min[a] as f64 + global * cell) as f32;
        }
        p
    }

    /// All `4^D` cell centers of a block, x fastest.
    pub fn cell_centers(&self, id: BlockId) -> Vec<Point> {
        (0..self.dim.cells_per_block())
            .map(|c| self.cell_center(id, c))
            .collect()
    }

    /// Neighbors across each face, ordered `-x, +x, -y, +y[, -z, +z]`.
    pub fn face_neighbors(&self, id: BlockId) -> Vec<Neighbor> {
        let n = self.dim.n();
        (0..2 * n)
            .map(|side| self.neighbor(id, side / 2, side % 2 == 1))
            .collect()
    }

    fn neighbor(&self, id: BlockId, axis: usize, plus: bool) -> Neighbor {
        let b = self.block(id);
        let extent = self.root_dims[axis] << b.level;
        let mut c = b.coords;
        if plus {
            if c[axis] + 1 >= extent {
                return Neighbor::Boundary;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return Neighbor::Boundary;
            }
            c[axis] -= 1;
        }
        for up in 0..=b.level {
            let level = b.level - up;
            let key = (level, c.map(|v| v >> up));
            if let Some(&n) = self.lookup.get(&key) {
                return if up == 0 && !self.is_leaf(n) {
                    Neighbor::Refined(n)
                } else {
                    Neighbor::Leaf(n)
                };
            }
        }
        unreachable!("root grid covers the domain")
    }

    /// Leaves sharing a face with `id`, at any level, in side order.
    pub fn leaf_face_neighbors(&self, id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::with_capacity(2 * self.dim.n());
        self.for_each_leaf_neighbor(id, |n| out.push(n));
        out
    }

    pub(crate) fn for_each_leaf_neighbor(&self, id: BlockId, mut f: impl FnMut(BlockId)) {
        for side in 0..2 * self.dim.n() {
            let (axis, plus) = (side / 2, side % 2 == 1);
            match self.neighbor(id, axis, plus) {
                Neighbor::Boundary => {}
                Neighbor::Leaf(n) => f(n),
                // descend into the children that face back toward `id`
                Neighbor::Refined(n) => self.leaves_on_side(n, axis, !plus, &mut f),
            }
        }
    }

    fn leaves_on_side(&self, id: BlockId, axis: usize, plus: bool, f: &mut impl FnMut(BlockId)) {
        match self.children(id) {
            None => f(id),
            Some(range) => {
                for (c, child) in range.enumerate() {
                    if ((c >> axis) & 1 == 1) == plus {
                        self.leaves_on_side(BlockId(child), axis, plus, f);
                    }
                }
            }
        }
    }

    fn split(&mut self, id: BlockId) -> Range<u32> {
        debug_assert!(self.is_leaf(id));
        let (level, coords) = {
            let b = self.block(id);
            (b.level + 1, b.coords)
        };
        let first = self.blocks.len() as u32;
        for c in 0..self.dim.n_children() {
            let mut cc = [0u32; 3];
            for a in 0..3 {
                cc[a] = if a < self.dim.n() {
                    2 * coords[a] + ((c >> a) & 1) as u32
                } else {
                    0
                };
            }
            self.push_block(level, cc, Some(id));
        }
        self.blocks[id.index()].first_child = Some(BlockId(first));
        self.marks[id.index()] = RefineMark::None;
        first..first + self.dim.n_children() as u32
    }

    /// Splits every marked leaf at `level`, in ascending ID order, then splits
    /// further leaves until face-adjacent leaves differ by at most one level.
    pub fn refine_marked(&mut self, level: u8) -> Result<RefineReport> {
        let ids = self.id_set(level).to_vec();
        if ids
            .iter()
            .any(|&id| self.mark(id) == RefineMark::Intermediate)
        {
            return Err(Error::InvalidParameter(format!(
                "level {level} still holds intermediate marks"
            )));
        }
        let marked: Vec<BlockId> = ids
            .iter()
            .copied()
            .filter(|&id| self.mark(id) == RefineMark::Marked)
            .collect();
        let to_split: Vec<BlockId> = marked
            .iter()
            .copied()
            .filter(|&id| self.is_leaf(id))
            .collect();
        if !to_split.is_empty() && level >= self.max_level {
            return Err(Error::MaxLevelExceeded {
                max_level: self.max_level,
            });
        }
        for &id in &marked {
            self.marks[id.index()] = RefineMark::None;
        }
        let mut report = RefineReport::default();
        let mut fresh = Vec::new();
        for id in to_split {
            fresh.extend(self.split(id).map(BlockId));
            report.refined += 1;
        }
        while !fresh.is_empty() {
            let mut coarse = Vec::new();
            for &b in &fresh {
                let level = self.block(b).level;
                for side in 0..2 * self.dim.n() {
                    if let Neighbor::Leaf(n) = self.neighbor(b, side / 2, side % 2 == 1) {
                        if self.block(n).level + 1 < level {
                            coarse.push(n);
                        }
                    }
                }
            }
            coarse.sort_unstable();
            coarse.dedup();
            fresh.clear();
            for id in coarse {
                fresh.extend(self.split(id).map(BlockId));
                report.balance_refined += 1;
            }
        }
        Ok(report)
    }

    /// Whether every pair of face-adjacent leaves differs by at most one level.
    pub fn is_balanced(&self) -> bool {
        self.leaves().all(|id| {
            let level = self.block(id).level as i32;
            self.leaf_face_neighbors(id)
                .iter()
                .all(|&n| (self.block(n).level as i32 - level).abs() <= 1)
        })
    }

    /// Leaf blocks as `(level, coords)`, sorted; equal across forests that
    /// cover the domain identically.
    pub fn leaf_keys(&self) -> Vec<(u8, [u32; 3])> {
        let mut keys: Vec<_> = self
            .leaves()
            .map(|id| (self.block(id).level, self.block(id).coords))
            .collect();
        keys.sort_unstable();
        keys
    }

    /// Blocks per level, including interior (split) blocks.
    pub fn blocks_per_level(&self) -> Vec<usize> {
        self.id_sets.iter().map(Vec::len).collect()
    }
}
