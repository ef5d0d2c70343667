//! Primitive sub-mesh generators and the text format that drives them.
//!
//! One primitive per line:
//!
//! ```text
//! # comment
//! circle  cx cy r n_edges
//! sphere  cx cy cz r n_lat n_lon
//! ```

use std::f64::consts::PI;
use std::path::Path;

use super::{Dim, IndexedGeometry, Point};
use crate::error::{Error, Result};

/// Closed counterclockwise polygon with `n_edges` vertices on the circle;
/// vertex 0 sits at angle zero.
pub fn generate_circle(center: Point, radius: f32, n_edges: usize) -> Result<IndexedGeometry> {
    if n_edges < 3 {
        return Err(Error::InvalidParameter(format!(
            "circle needs at least 3 edges, got {n_edges}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    let (cx, cy, r) = (center[0] as f64, center[1] as f64, radius as f64);
    let vertices = (0..n_edges)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n_edges as f64;
            Point::new2((cx + r * theta.cos()) as f32, (cy + r * theta.sin()) as f32)
        })
        .collect();
    let face_indices = (0..n_edges).map(|k| [k, (k + 1) % n_edges, 0]).collect();
    Ok(IndexedGeometry {
        dim: Dim::Two,
        vertices,
        face_indices,
    })
}

/// Latitude-longitude sphere: fans at both poles and two triangles per
/// interior quad, wound so that normals point outward.
///
/// Produces `2 * n_lon * (n_lat - 1)` triangles.
pub fn generate_sphere(
    center: Point,
    radius: f32,
    n_lat: usize,
    n_lon: usize,
) -> Result<IndexedGeometry> {
    if n_lat < 2 || n_lon < 3 {
        return Err(Error::InvalidParameter(format!(
            "sphere needs n_lat >= 2 and n_lon >= 3, got {n_lat} and {n_lon}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let c = center.to_f64();
    let r = radius as f64;
    let at = |theta: f64, phi: f64| {
        Point::new3(
            (c[0] + r * theta.sin() * phi.cos()) as f32,
            (c[1] + r * theta.sin() * phi.sin()) as f32,
            (c[2] + r * theta.cos()) as f32,
        )
    };

    let mut vertices = Vec::with_capacity(2 + (n_lat - 1) * n_lon);
    vertices.push(at(0.0, 0.0));
    for i in 1..n_lat {
        let theta = PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            vertices.push(at(theta, 2.0 * PI * j as f64 / n_lon as f64));
        }
    }
    vertices.push(at(PI, 0.0));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + j % n_lon;

    let mut faces = Vec::with_capacity(2 * n_lon * (n_lat - 1));
    for j in 0..n_lon {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_lat - 1 {
        for j in 0..n_lon {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..n_lon {
        faces.push([ring(n_lat - 1, j), south, ring(n_lat - 1, j + 1)]);
    }
    Ok(IndexedGeometry {
        dim: Dim::Three,
        vertices,
        face_indices: faces,
    })
}

/// Reads a primitive file and concatenates every primitive it lists.
///
/// Primitives whose dimension differs from `dim` are rejected. An empty file
/// yields an empty geometry.
pub fn import_text_primitives(path: impl AsRef<Path>, dim: Dim) -> Result<IndexedGeometry> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        msg: format!("cannot read file: {e}"),
    })?;
    parse_primitives(&text, dim).map_err(|(line, msg)| Error::Parse {
        path: path.into(),
        line,
        msg,
    })
}

fn parse_primitives(text: &str, dim: Dim) -> std::result::Result<IndexedGeometry, (usize, String)> {
    let mut out = IndexedGeometry::empty(dim);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let args = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| (line_no, format!("cannot parse number {t:?}")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let (prim_dim, arity) = match kind {
            "circle" => (Dim::Two, 4),
            "sphere" => (Dim::Three, 6),
            other => return Err((line_no, format!("unknown primitive {other:?}"))),
        };
        if args.len() != arity {
            return Err((
                line_no,
                format!("{kind} takes {arity} values, got {}", args.len()),
            ));
        }
        if prim_dim != dim {
            return Err((
                line_no,
                format!("{kind} is {}D but the run is {}D", prim_dim.n(), dim.n()),
            ));
        }
        let count = |v: f64| -> std::result::Result<usize, (usize, String)> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err((line_no, format!("expected a non-negative integer, got {v}")))
            }
        };
        let generated = match kind {
            "circle" => generate_circle(
                Point::new2(args[0] as f32, args[1] as f32),
                args[2] as f32,
                count(args[3])?,
            ),
            _ => generate_sphere(
                Point::new3(args[0] as f32, args[1] as f32, args[2] as f32),
                args[3] as f32,
                count(args[4])?,
                count(args[5])?,
            ),
        }
        .map_err(|e| (line_no, e.to_string()))?;
        out.append(generated)
            .map_err(|e| (line_no, e.to_string()))?;
    }
    Ok(out)
}
