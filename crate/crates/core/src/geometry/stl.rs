//! ASCII and binary STL import.
//!
//! A file is read as ASCII when its first token is `solid` and the whole file
//! parses as ASCII STL; anything else is read as binary. Stored normals are
//! discarded.

use std::path::Path;

use super::{CoordListGeometry, Dim, Point};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

pub fn import_stl(path: impl AsRef<Path>) -> Result<CoordListGeometry> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        msg: format!("cannot read file: {e}"),
    })?;
    let faces = parse_stl(&bytes).map_err(|(line, msg)| Error::Parse {
        path: path.into(),
        line,
        msg,
    })?;
    CoordListGeometry::from_faces(Dim::Three, &faces)
}

/// Parses STL bytes into triangles. Errors carry a line number for ASCII
/// input and 0 for binary input.
pub fn parse_stl(bytes: &[u8]) -> std::result::Result<Vec<[Point; 3]>, (usize, String)> {
    let starts_with_solid = std::str::from_utf8(&bytes[..bytes.len().min(512)])
        .map(|s| s.split_whitespace().next() == Some("solid"))
        .unwrap_or_else(|e| {
            // the 512-byte window may cut a multi-byte character
            std::str::from_utf8(&bytes[..e.valid_up_to()])
                .map(|s| s.split_whitespace().next() == Some("solid"))
                .unwrap_or(false)
        });
    if starts_with_solid {
        let ascii = std::str::from_utf8(bytes)
            .map_err(|_| (0, "file is not valid UTF-8".to_string()))
            .and_then(parse_ascii);
        match ascii {
            Ok(faces) => return Ok(faces),
            Err(ascii_err) => {
                // binary files are allowed to start with "solid" in their header
                return parse_binary(bytes).map_err(|_| ascii_err);
            }
        }
    }
    parse_binary(bytes).map_err(|msg| (0, msg))
}

fn parse_binary(bytes: &[u8]) -> std::result::Result<Vec<[Point; 3]>, String> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(format!(
            "binary STL needs at least {} bytes, got {}",
            HEADER_LEN + 4,
            bytes.len()
        ));
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN + 4..];
    if body.len() < count * RECORD_LEN {
        return Err(format!(
            "binary STL declares {count} facets but holds only {} complete records",
            body.len() / RECORD_LEN
        ));
    }
    let read_f32 =
        |rec: &[u8], i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap());
    let mut faces = Vec::with_capacity(count);
    for (f, rec) in body.chunks_exact(RECORD_LEN).take(count).enumerate() {
        let mut tri = [Point::default(); 3];
        for (v, p) in tri.iter_mut().enumerate() {
            // floats 0..3 are the stored normal
            *p = Point::new3(
                read_f32(rec, 3 + 3 * v),
                read_f32(rec, 4 + 3 * v),
                read_f32(rec, 5 + 3 * v),
            );
            if !p.is_finite() {
                return Err(format!("facet {f} has a non-finite vertex"));
            }
        }
        faces.push(tri);
    }
    Ok(faces)
}

struct Tokens<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    current: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&'a str> {
        loop {
            if let Some(t) = self.current.next() {
                return Some(t);
            }
            let (i, l) = self.lines.next()?;
            self.line = i + 1;
            self.current = l.split_whitespace();
        }
    }

    /// Drops the rest of the current line.
    fn skip_line(&mut self) {
        self.current = "".split_whitespace();
    }

    fn expect(&mut self, word: &str) -> std::result::Result<(), (usize, String)> {
        match self.next() {
            Some(t) if t == word => Ok(()),
            Some(t) => Err((self.line, format!("expected {word:?}, found {t:?}"))),
            None => Err((self.line, format!("expected {word:?}, found end of file"))),
        }
    }

    fn float(&mut self) -> std::result::Result<f32, (usize, String)> {
        let t = self.next().ok_or_else(|| {
            (
                self.line,
                "expected a number, found end of file".to_string(),
            )
        })?;
        let v: f32 = t
            .parse()
            .map_err(|_| (self.line, format!("cannot parse number {t:?}")))?;
        if !v.is_finite() {
            return Err((self.line, format!("non-finite number {t:?}")));
        }
        Ok(v)
    }
}

fn parse_ascii(text: &str) -> std::result::Result<Vec<[Point; 3]>, (usize, String)> {
    let mut tok = Tokens {
        lines: text.lines().enumerate().peekable(),
        current: "".split_whitespace(),
        line: 0,
    };
    tok.expect("solid")?;
    // the solid name runs to the end of its line
    tok.skip_line();
    let mut faces = Vec::new();
    loop {
        match tok.next() {
            Some("facet") => {
                tok.expect("normal")?;
                for _ in 0..3 {
                    tok.float()?;
                }
                tok.expect("outer")?;
                tok.expect("loop")?;
                let mut tri = [Point::default(); 3];
                for p in &mut tri {
                    tok.expect("vertex")?;
                    *p = Point::new3(tok.float()?, tok.float()?, tok.float()?);
                }
                tok.expect("endloop")?;
                tok.expect("endfacet")?;
                faces.push(tri);
            }
            Some("endsolid") => {
                tok.skip_line();
                break;
            }
            Some(t) => {
                return Err((
                    tok.line,
                    format!("expected \"facet\" or \"endsolid\", found {t:?}"),
                ))
            }
            None => return Err((tok.line, "missing \"endsolid\"".to_string())),
        }
    }
    if let Some(t) = tok.next() {
        return Err((tok.line, format!("unexpected {t:?} after \"endsolid\"")));
    }
    Ok(faces)
}
