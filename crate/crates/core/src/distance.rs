//! Point-to-face proximity predicates.
//!
//! [`check_near_triangle`] tests membership in the union of three vertex
//! balls, three edge cylinders clipped at the endpoint planes, and a
//! triangular prism of half-thickness `d` along the face normal. The 2D
//! analogue, [`check_near_edge`], uses two disks and a rectangle. Both run in
//! single precision.
//!
//! [`exact_point_triangle_distance`] and [`point_segment_distance_sq`] compute
//! true closest-point distances in double precision and serve as referees for
//! the predicates.

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Relative tolerance below which a triangle counts as degenerate:
/// `|(v2 - v1) x (v3 - v1)| < DEGENERATE_REL * max_edge^2`.
pub const DEGENERATE_REL: f64 = 1e-12;

/// The near-wall distance criterion.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NearWallRadius(f32);

impl NearWallRadius {
    pub fn new(d: f32) -> Result<Self> {
        if d > 0.0 && d.is_finite() {
            Ok(NearWallRadius(d))
        } else {
            Err(Error::InvalidParameter(format!(
                "near-wall distance must be positive, got {d}"
            )))
        }
    }

    pub fn get(self) -> f32 {
        self.0
    }
}

/// Which parts of the inflated triangle contain a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TriangleRegions {
    pub vertex_ball: [bool; 3],
    pub edge_cylinder: [bool; 3],
    pub prism: bool,
}

impl TriangleRegions {
    pub fn any(&self) -> bool {
        self.vertex_ball.iter().any(|&b| b) || self.edge_cylinder.iter().any(|&b| b) || self.prism
    }
}

fn sub64(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot64(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross64(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn triangle_is_valid(v1: Point, v2: Point, v3: Point) -> bool {
    let (a, b, c) = (v1.to_f64(), v2.to_f64(), v3.to_f64());
    let scale_sq = [sub64(b, a), sub64(c, b), sub64(a, c)]
        .iter()
        .map(|e| dot64(*e, *e))
        .fold(0.0, f64::max);
    let n = cross64(sub64(b, a), sub64(c, a));
    scale_sq > 0.0 && dot64(n, n).sqrt() >= DEGENERATE_REL * scale_sq
}

pub(crate) fn edge_is_valid(v1: Point, v2: Point) -> bool {
    (v2 - v1).norm_sq() > f32::MIN_POSITIVE
}

#[inline]
fn in_ball(x: Point, v: Point, d_sq: f32) -> bool {
    (x - v).norm_sq() <= d_sq
}

/// Finite cylinder of radius `d` around the segment `a -> b`, clipped by the
/// planes through `a` and `b` normal to the segment.
#[inline]
fn in_cylinder(x: Point, a: Point, b: Point, d_sq: f32) -> bool {
    let e = b - a;
    let len_sq = e.norm_sq();
    let dist_sq = e.cross(a - x).norm_sq() / len_sq;
    if dist_sq > d_sq {
        return false;
    }
    let unit = e.scale(1.0 / len_sq.sqrt());
    let along_from_a = -(a - x).dot(unit);
    let along_to_b = (b - x).dot(unit);
    along_from_a >= 0.0 && along_to_b >= 0.0
}

/// Prism over the triangle: `x` projects inside all three edges and lies
/// within `d` of the supporting plane.
#[inline]
fn in_prism(x: Point, v: [Point; 3], d: f32) -> bool {
    let n = (v[1] - v[0]).cross(v[2] - v[0]);
    let n = n.scale(1.0 / n.norm_sq().sqrt());
    for k in 0..3 {
        let e = v[(k + 1) % 3] - v[k];
        let e = e.scale(1.0 / e.norm_sq().sqrt());
        // e x n points away from the interior for counterclockwise winding about n
        if (v[k] - x).dot(e.cross(n)) < 0.0 {
            return false;
        }
    }
    let below = -(v[0] - n.scale(d) - x).dot(n);
    let above = (v[0] + n.scale(d) - x).dot(n);
    below >= 0.0 && above >= 0.0
}

/// Single-precision near test for a triangle known to be non-degenerate.
#[inline]
pub(crate) fn near_triangle(x: Point, v: [Point; 3], d: f32) -> bool {
    let d_sq = d * d;
    for k in 0..3 {
        if in_ball(x, v[k], d_sq) || in_cylinder(x, v[k], v[(k + 1) % 3], d_sq) {
            return true;
        }
    }
    in_prism(x, v, d)
}

/// Single-precision near test for an edge known to be non-degenerate.
#[inline]
pub(crate) fn near_edge(x: Point, a: Point, b: Point, d: f32) -> bool {
    let d_sq = d * d;
    in_ball(x, a, d_sq) || in_ball(x, b, d_sq) || in_cylinder(x, a, b, d_sq)
}

/// Whether `x_p` lies within `d_spec` of the triangle `(v1, v2, v3)`.
pub fn check_near_triangle(
    x_p: Point,
    v1: Point,
    v2: Point,
    v3: Point,
    d_spec: NearWallRadius,
) -> Result<bool> {
    if !triangle_is_valid(v1, v2, v3) {
        return Err(Error::DegenerateFace { face: 0 });
    }
    Ok(near_triangle(x_p, [v1, v2, v3], d_spec.get()))
}

/// Evaluates every sub-region of the inflated triangle without short-circuiting.
pub fn triangle_regions(
    x_p: Point,
    v1: Point,
    v2: Point,
    v3: Point,
    d_spec: NearWallRadius,
) -> Result<TriangleRegions> {
    if !triangle_is_valid(v1, v2, v3) {
        return Err(Error::DegenerateFace { face: 0 });
    }
    let v = [v1, v2, v3];
    let d = d_spec.get();
    let mut r = TriangleRegions::default();
    for k in 0..3 {
        r.vertex_ball[k] = in_ball(x_p, v[k], d * d);
        r.edge_cylinder[k] = in_cylinder(x_p, v[k], v[(k + 1) % 3], d * d);
    }
    r.prism = in_prism(x_p, v, d);
    Ok(r)
}

/// Whether the 2D point `x_p` lies within `d_spec` of the segment `[v1, v2]`.
pub fn check_near_edge(x_p: Point, v1: Point, v2: Point, d_spec: NearWallRadius) -> Result<bool> {
    if !edge_is_valid(v1, v2) {
        return Err(Error::DegenerateFace { face: 0 });
    }
    Ok(near_edge(x_p, v1, v2, d_spec.get()))
}

/// Squared distance from `x_p` to the closed segment `[a, b]`, in double precision.
pub fn point_segment_distance_sq(x_p: Point, a: Point, b: Point) -> Result<f64> {
    if a == b {
        return Err(Error::DegenerateFace { face: 0 });
    }
    let (x, a, b) = (x_p.to_f64(), a.to_f64(), b.to_f64());
    let ab = sub64(b, a);
    let t = (dot64(sub64(x, a), ab) / dot64(ab, ab)).clamp(0.0, 1.0);
    let foot = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    let d = sub64(x, foot);
    Ok(dot64(d, d))
}

/// Euclidean distance from `x_p` to the closed triangle, in double precision.
///
/// Classifies `x_p` against the vertex, edge, and face Voronoi regions of the
/// triangle and measures to the closest point of the matching feature.
pub fn exact_point_triangle_distance(x_p: Point, v1: Point, v2: Point, v3: Point) -> Result<f64> {
    if !triangle_is_valid(v1, v2, v3) {
        return Err(Error::DegenerateFace { face: 0 });
    }
    let p = x_p.to_f64();
    let c = closest_point_on_triangle(p, v1.to_f64(), v2.to_f64(), v3.to_f64());
    let d = sub64(p, c);
    Ok(dot64(d, d).sqrt())
}

fn closest_point_on_triangle(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let lerp = |o: [f64; 3], dir: [f64; 3], t: f64| {
        [o[0] + t * dir[0], o[1] + t * dir[1], o[2] + t * dir[2]]
    };
    let ab = sub64(b, a);
    let ac = sub64(c, a);
    let ap = sub64(p, a);
    let d1 = dot64(ab, ap);
    let d2 = dot64(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = sub64(p, b);
    let d3 = dot64(ab, bp);
    let d4 = dot64(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return lerp(a, ab, d1 / (d1 - d3));
    }

    let cp = sub64(p, c);
    let d5 = dot64(ab, cp);
    let d6 = dot64(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return lerp(a, ac, d2 / (d2 - d6));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return lerp(b, sub64(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}
