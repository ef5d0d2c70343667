//! Embedding of boundary meshes (edges in 2D, triangles in 3D) into a
//! forest-of-octrees Cartesian grid, with near-wall refinement accelerated by
//! spatial binning of the mesh faces.
//!
//! The pipeline has three stages:
//!
//! 1. [`geometry`]: import primitives or STL files and flatten them into a
//!    per-face coordinate list.
//! 2. [`binning`]: distribute faces into a regular grid of bins.
//! 3. [`nearwall`]: mark blocks whose cells lie near a face, propagate the
//!    marks, and subdivide, one grid level at a time.
//!
//! Every data-parallel pass runs on a [`Backend`]; the serial and parallel
//! backends produce identical results.

#![allow(clippy::needless_range_loop)]

pub mod binning;
pub mod distance;
mod error;
pub mod exec;
pub mod forest;
pub mod geometry;
pub mod nearwall;

pub use binning::{BinFraction, BinGrid, BinnedFaces, BinningOptions};
pub use distance::NearWallRadius;
pub use error::{Error, ErrorKind, Result};
pub use exec::Backend;
pub use forest::{BlockId, Forest, RefineMark};
pub use geometry::{Aabb, CoordListGeometry, Dim, IndexedGeometry, Point};
pub use nearwall::{CellFaceLinks, RefineOutcome, RefineParams, Strategy, Timings};
