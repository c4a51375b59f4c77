//! Line-oriented mesh text format.
//!
//! ```text
//! # comments and blank lines are ignored
//! rect <x_max> <y_max>
//! counts <n_vertices> <n_triangles> <n_tagged_faces>
//! v <x> <y>                 (n_vertices lines, coordinates with 17 significant digits)
//! t <i> <j> <k>             (n_triangles lines, counter-clockwise vertex indices)
//! b <face_index> <tag>      (tag: gamma_c | gamma_d_only | gamma_d_prime)
//! ```
//!
//! Face indices refer to the enumeration rebuilt from the triangle list, which is
//! deterministic, so a round trip reproduces the same faces.

use std::io::{BufRead, Write};

use super::{BoundaryPart, Mesh, Rect};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    let tagged: Vec<(usize, BoundaryPart)> =
        mesh.faces().iter().enumerate().filter_map(|(f, face)| face.part.map(|p| (f, p))).collect();
    writeln!(out, "rect {:.16e} {:.16e}", mesh.rect().x_max(), mesh.rect().y_max())?;
    writeln!(out, "counts {} {} {}", mesh.n_vertices(), mesh.n_triangles(), tagged.len())?;
    for p in mesh.vertices() {
        writeln!(out, "v {:.16e} {:.16e}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "t {} {} {}", t[0], t[1], t[2])?;
    }
    for (f, part) in tagged {
        writeln!(out, "b {} {}", f, part.name())?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut rect = None;
    let mut counts: Option<[usize; 3]> = None;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut tags = Vec::new();

    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let err = |msg: &str| Error::Parse { line: line_no, msg: msg.to_string() };
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        if kind.starts_with('#') {
            continue;
        }
        let rest: Vec<&str> = tok.collect();
        let floats = |n: usize| -> Result<Vec<f64>> {
            if rest.len() != n {
                return Err(err(&format!("expected {n} fields")));
            }
            rest.iter().map(|s| s.parse::<f64>().map_err(|_| err(&format!("bad number `{s}`")))).collect()
        };
        let ints = |n: usize| -> Result<Vec<usize>> {
            if rest.len() < n {
                return Err(err(&format!("expected {n} fields")));
            }
            rest[..n].iter().map(|s| s.parse::<usize>().map_err(|_| err(&format!("bad index `{s}`")))).collect()
        };
        match kind {
            "rect" => {
                let v = floats(2)?;
                rect = Some(Rect::new(v[0], v[1])?);
            }
            "counts" => {
                let v = ints(3)?;
                counts = Some([v[0], v[1], v[2]]);
            }
            "v" => {
                let v = floats(2)?;
                vertices.push([v[0], v[1]]);
            }
            "t" => {
                let v = ints(3)?;
                triangles.push([v[0], v[1], v[2]]);
            }
            "b" => {
                if rest.len() != 2 {
                    return Err(err("expected `b <face> <tag>`"));
                }
                let f = rest[0].parse::<usize>().map_err(|_| err("bad face index"))?;
                let part = BoundaryPart::from_name(rest[1]).ok_or_else(|| err(&format!("unknown tag `{}`", rest[1])))?;
                tags.push((f, part));
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }

    let rect = rect.ok_or_else(|| Error::Parse { line: 0, msg: "missing `rect` record".into() })?;
    if let Some([nv, nt, nb]) = counts {
        if nv != vertices.len() || nt != triangles.len() || nb != tags.len() {
            return Err(Error::Parse { line: 0, msg: "record counts do not match header".into() });
        }
    }
    let mut mesh = Mesh::from_parts(rect, vertices, triangles)?;
    if !tags.is_empty() {
        for (f, part) in tags {
            let face = mesh
                .faces
                .get_mut(f)
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("face {f} out of range") })?;
            if !face.is_boundary() {
                return Err(Error::Tagging(format!("face {f} is interior")));
            }
            face.part = Some(part);
        }
        mesh.validate_tagging()?;
    }
    Ok(mesh)
}
