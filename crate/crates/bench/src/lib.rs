//! Shared fixtures for the benchmarks.

use nearwall_core::geometry::{generate_circle, generate_sphere, index_to_coords};
use nearwall_core::{Aabb, CoordListGeometry, Dim, Forest, Point};

/// Circle of radius 0.25 in the unit square.
pub fn circle(n_edges: usize) -> CoordListGeometry {
    index_to_coords(&generate_circle(Point::new2(0.5, 0.5), 0.25, n_edges).unwrap()).unwrap()
}

/// Sphere of radius 0.3 in the unit cube with `2 * n_lon * (n_lat - 1)` triangles.
pub fn sphere(n_lat: usize, n_lon: usize) -> CoordListGeometry {
    index_to_coords(&generate_sphere(Point::new3(0.5, 0.5, 0.5), 0.3, n_lat, n_lon).unwrap())
        .unwrap()
}

pub fn unit_forest(dim: Dim, root: usize) -> Forest {
    Forest::init_root_grid(Aabb::unit(dim), dim, &vec![root; dim.n()]).unwrap()
}
