//! Boundary geometry: points, index lists, and the per-face coordinate list
//! consumed by the binning and marking kernels.

mod primitives;
mod stl;

use std::ops::{Add, Index, Sub};

use crate::error::{Error, Result};

pub use primitives::{generate_circle, generate_sphere, import_text_primitives};
pub use stl::{import_stl, parse_stl};

/// Spatial dimension of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub const fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_n(n: usize) -> Option<Dim> {
        match n {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }

    /// Children per block when it is subdivided.
    pub const fn n_children(self) -> usize {
        1 << self.n()
    }

    /// Cells per block (4 per axis).
    pub const fn cells_per_block(self) -> usize {
        match self {
            Dim::Two => 16,
            Dim::Three => 64,
        }
    }
}

/// A point in single precision. 2D points keep `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point(pub [f32; 3]);

impl Point {
    pub const fn new2(x: f32, y: f32) -> Self {
        Point([x, y, 0.0])
    }

    pub const fn new3(x: f32, y: f32, z: f32) -> Self {
        Point([x, y, z])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(self, o: Point) -> f32 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Point) -> Point {
        let [ax, ay, az] = self.0;
        let [bx, by, bz] = o.0;
        Point([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])
    }

    pub fn norm_sq(self) -> f32 {
        self.dot(self)
    }

    pub fn scale(self, s: f32) -> Point {
        Point(self.0.map(|c| c * s))
    }

    pub fn to_f64(self) -> [f64; 3] {
        self.0.map(f64::from)
    }
}

impl Index<usize> for Point {
    type Output = f32;

    fn index(&self, axis: usize) -> &f32 {
        &self.0[axis]
    }
}

impl Add for Point {
    type Output = Point;

    fn add(self, o: Point) -> Point {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Point {
    type Output = Point;

    fn sub(self, o: Point) -> Point {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

/// Axis-aligned box. Unused axes in 2D stay at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter("box corners must be finite".into()));
        }
        if (0..3).any(|a| min[a] > max[a]) {
            return Err(Error::InvalidParameter(format!(
                "box min {:?} exceeds max {:?}",
                min.0, max.0
            )));
        }
        Ok(Aabb { min, max })
    }

    pub fn unit(dim: Dim) -> Self {
        let max = match dim {
            Dim::Two => Point::new2(1.0, 1.0),
            Dim::Three => Point::new3(1.0, 1.0, 1.0),
        };
        Aabb {
            min: Point::default(),
            max,
        }
    }

    pub fn extent(&self, axis: usize) -> f32 {
        self.max[axis] - self.min[axis]
    }

    pub fn contains(&self, p: Point, dim: Dim) -> bool {
        (0..dim.n()).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// Shared vertices plus per-face vertex index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedGeometry {
    pub dim: Dim,
    pub vertices: Vec<Point>,
    /// One `[usize; 3]` per face; 2D edges use only the first two entries.
    pub face_indices: Vec<[usize; 3]>,
}

impl IndexedGeometry {
    pub fn empty(dim: Dim) -> Self {
        IndexedGeometry {
            dim,
            vertices: Vec::new(),
            face_indices: Vec::new(),
        }
    }

    pub fn n_faces(&self) -> usize {
        self.face_indices.len()
    }

    pub fn face(&self, f: usize) -> &[usize] {
        &self.face_indices[f][..self.dim.n()]
    }

    /// Appends `other`, offsetting its vertex indices past the current ones.
    pub fn append(&mut self, other: IndexedGeometry) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::WrongDimension {
                expected: self.dim.n(),
                found: other.dim.n(),
            });
        }
        let base = self.vertices.len();
        self.vertices.extend(other.vertices);
        self.face_indices
            .extend(other.face_indices.into_iter().map(|f| f.map(|i| i + base)));
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim.n();
        if let Some(p) = self.vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite vertex {:?}",
                p.0
            )));
        }
        for (f, idx) in self.face_indices.iter().enumerate() {
            let idx = &idx[..n];
            if idx.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::InvalidParameter(format!(
                    "face {f} references a missing vertex"
                )));
            }
            for a in 0..n {
                if idx[a + 1..].contains(&idx[a]) {
                    return Err(Error::InvalidParameter(format!(
                        "face {f} repeats vertex {}",
                        idx[a]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Flat per-face vertex coordinates in structure-of-arrays order.
///
/// Component `c` of vertex `j` of face `f` lives at
/// `coords[(j * D + c) * n_faces + f]`, so one component of one vertex slot is
/// contiguous across all faces.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordListGeometry {
    dim: Dim,
    n_faces: usize,
    coords: Vec<f32>,
}

impl CoordListGeometry {
    /// Builds the list from per-face vertex arrays (third vertex ignored in 2D).
    pub fn from_faces(dim: Dim, faces: &[[Point; 3]]) -> Result<Self> {
        let n = dim.n();
        let n_faces = faces.len();
        let mut coords = vec![0.0f32; n * n * n_faces];
        for (f, face) in faces.iter().enumerate() {
            for (j, v) in face[..n].iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "face {f} has non-finite vertex {:?}",
                        v.0
                    )));
                }
                for c in 0..n {
                    coords[(j * n + c) * n_faces + f] = v[c];
                }
            }
        }
        Ok(CoordListGeometry {
            dim,
            n_faces,
            coords,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn n_faces(&self) -> usize {
        self.n_faces
    }

    pub fn is_empty(&self) -> bool {
        self.n_faces == 0
    }

    /// Contiguous slice of component `comp` of vertex slot `vertex` over all faces.
    pub fn component(&self, vertex: usize, comp: usize) -> &[f32] {
        let n = self.dim.n();
        let start = (vertex * n + comp) * self.n_faces;
        &self.coords[start..start + self.n_faces]
    }

    pub fn vertex(&self, face: usize, j: usize) -> Point {
        let n = self.dim.n();
        let mut p = Point::default();
        for c in 0..n {
            p.0[c] = self.coords[(j * n + c) * self.n_faces + face];
        }
        p
    }

    /// The face's vertices; the third entry is zero for 2D edges.
    pub fn face(&self, face: usize) -> [Point; 3] {
        let mut out = [Point::default(); 3];
        for (j, slot) in out.iter_mut().enumerate().take(self.dim.n()) {
            *slot = self.vertex(face, j);
        }
        out
    }

    /// Rejects faces whose edge (2D) or triangle (3D) is degenerate.
    pub fn check_faces(&self) -> Result<()> {
        for f in 0..self.n_faces {
            let [a, b, c] = self.face(f);
            let ok = match self.dim {
                Dim::Two => crate::distance::edge_is_valid(a, b),
                Dim::Three => crate::distance::triangle_is_valid(a, b, c),
            };
            if !ok {
                return Err(Error::DegenerateFace { face: f });
            }
        }
        Ok(())
    }
}

/// Expands shared vertices into the per-face coordinate list.
pub fn index_to_coords(g: &IndexedGeometry) -> Result<CoordListGeometry> {
    g.validate()?;
    let n = g.dim.n();
    let faces: Vec<[Point; 3]> = g
        .face_indices
        .iter()
        .map(|idx| {
            let mut face = [Point::default(); 3];
            for j in 0..n {
                face[j] = g.vertices[idx[j]];
            }
            face
        })
        .collect();
    CoordListGeometry::from_faces(g.dim, &faces)
}

/// Componentwise bounds over every vertex entry.
pub fn bounding_box(g: &CoordListGeometry) -> Result<Aabb> {
    if g.is_empty() {
        return Err(Error::EmptyGeometry);
    }
    let n = g.dim.n();
    let mut min = Point::default();
    let mut max = Point::default();
    for c in 0..n {
        let (lo, hi) = (0..n)
            .flat_map(|j| g.component(j, c).iter().copied())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        min.0[c] = lo;
        max.0[c] = hi;
    }
    Ok(Aabb { min, max })
}
