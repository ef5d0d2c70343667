//! Legacy ASCII VTK export of the leaf blocks.
//!
//! Corner points are written once per cell, without welding shared corners.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nearwall_core::{Dim, Forest, RefineMark};

use crate::error::CliError;

const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

pub fn write_vtk(forest: &Forest, mut w: impl Write) -> std::io::Result<()> {
    let leaves: Vec<_> = forest.leaves().collect();
    let (corners, cell_type): (&[[usize; 3]], u8) = match forest.dim() {
        Dim::Two => (&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], VTK_QUAD),
        Dim::Three => (
            &[
                [0, 0, 0],
                [1, 0, 0],
                [1, 1, 0],
                [0, 1, 0],
                [0, 0, 1],
                [1, 0, 1],
                [1, 1, 1],
                [0, 1, 1],
            ],
            VTK_HEXAHEDRON,
        ),
    };
    let k = corners.len();
    let n = leaves.len();

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "nearwall leaf blocks")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} float", n * k)?;
    for &id in &leaves {
        let b = forest.block_bounds(id);
        for c in corners {
            let p: Vec<f32> = (0..3)
                .map(|a| if c[a] == 0 { b.min[a] } else { b.max[a] })
                .collect();
            writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
        }
    }
    writeln!(w, "CELLS {} {}", n, n * (k + 1))?;
    for i in 0..n {
        write!(w, "{k}")?;
        for j in 0..k {
            write!(w, " {}", i * k + j)?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "{cell_type}")?;
    }
    writeln!(w, "CELL_DATA {n}")?;
    writeln!(w, "SCALARS level int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &id in &leaves {
        writeln!(w, "{}", forest.block(id).level)?;
    }
    writeln!(w, "SCALARS marked int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &id in &leaves {
        writeln!(w, "{}", u8::from(forest.mark(id) != RefineMark::None))?;
    }
    Ok(())
}

pub fn export_vtk(forest: &Forest, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_vtk(forest, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}
