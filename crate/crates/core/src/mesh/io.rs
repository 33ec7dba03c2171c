//! Mesh and field file formats.
//!
//! The plain-text mesh format is line oriented; `#` starts a comment:
//!
//! ```text
//! dim 2
//! domain <lo_0> .. <lo_{d-1}> <hi_0> .. <hi_{d-1}>
//! nodes <n>
//! <x> <y> [<z>]            (n lines)
//! elements <m>
//! <i0> <i1> <i2> [<i3>]    (m lines, zero-based)
//! boundary <k>
//! <i0> <i1> [<i2>] <segment_id>   (k lines)
//! ```
//!
//! The boundary table is written for reference; on reading, facets and
//! segment IDs are rederived from the topology and checked against it.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{BoxDomain, SimplicialMesh, NONE};
use crate::{Error, Result};

pub fn write_mesh_string(mesh: &SimplicialMesh) -> String {
    let dim = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "# anisocont mesh");
    let _ = writeln!(s, "dim {dim}");
    let dom = mesh.domain();
    let mut line = String::from("domain");
    for k in 0..dim {
        let _ = write!(line, " {:e}", dom.lo[k]);
    }
    for k in 0..dim {
        let _ = write!(line, " {:e}", dom.hi[k]);
    }
    let _ = writeln!(s, "{line}");
    let _ = writeln!(s, "nodes {}", mesh.num_nodes());
    for i in 0..mesh.num_nodes() {
        let coords: Vec<String> = mesh.node(i).iter().map(|c| format!("{c:e}")).collect();
        let _ = writeln!(s, "{}", coords.join(" "));
    }
    let _ = writeln!(s, "elements {}", mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let ids: Vec<String> = mesh.element(e).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_facets().len());
    for f in mesh.boundary_facets() {
        let ids: Vec<String> = f.nodes[..dim].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{} {}", ids.join(" "), f.segment_id);
    }
    s
}

pub fn write_mesh(mesh: &SimplicialMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.split('#').next().unwrap_or("").trim();
            if !l.is_empty() {
                return Ok(l.split_whitespace().collect());
            }
        }
        Err(Error::Parse { line: self.line + 1, msg: "unexpected end of file".into() })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    fn header(&mut self, name: &str) -> Result<Vec<&'a str>> {
        let t = self.next_tokens()?;
        if t[0] != name {
            return Err(self.err(format!("expected '{name}', found '{}'", t[0])));
        }
        Ok(t[1..].to_vec())
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse '{tok}'")))
    }
}

pub fn parse_mesh(text: &str) -> Result<SimplicialMesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let t = lines.header("dim")?;
    let dim: usize = lines.parse(t.first().ok_or_else(|| lines.err("missing dimension"))?)?;
    if dim != 2 && dim != 3 {
        return Err(lines.err(format!("dimension must be 2 or 3, got {dim}")));
    }
    let t = lines.header("domain")?;
    if t.len() != 2 * dim {
        return Err(lines.err(format!("domain needs {} values", 2 * dim)));
    }
    let mut domain = BoxDomain { lo: [0.0; 3], hi: [0.0; 3] };
    for k in 0..dim {
        domain.lo[k] = lines.parse(t[k])?;
        domain.hi[k] = lines.parse(t[dim + k])?;
    }
    let t = lines.header("nodes")?;
    let n: usize = lines.parse(t.first().ok_or_else(|| lines.err("missing node count"))?)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let t = lines.next_tokens()?;
        if t.len() != dim {
            return Err(lines.err(format!("node needs {dim} coordinates")));
        }
        let mut x = [0.0; 3];
        for k in 0..dim {
            x[k] = lines.parse(t[k])?;
        }
        nodes.push(x);
    }
    let t = lines.header("elements")?;
    let m: usize = lines.parse(t.first().ok_or_else(|| lines.err("missing element count"))?)?;
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let t = lines.next_tokens()?;
        if t.len() != dim + 1 {
            return Err(lines.err(format!("element needs {} node indices", dim + 1)));
        }
        let mut el = [NONE; 4];
        for k in 0..=dim {
            let v: usize = lines.parse(t[k])?;
            if v >= n {
                return Err(lines.err(format!("node index {v} out of range")));
            }
            el[k] = v;
        }
        elements.push(el);
    }
    let mesh = SimplicialMesh::from_parts(dim, domain, nodes, elements)?;
    if let Ok(t) = lines.header("boundary") {
        let k: usize = lines.parse(t.first().ok_or_else(|| lines.err("missing facet count"))?)?;
        if k != mesh.boundary_facets().len() {
            return Err(lines.err(format!(
                "boundary table lists {k} facets, topology has {}",
                mesh.boundary_facets().len()
            )));
        }
    }
    Ok(mesh)
}

pub fn read_mesh(path: &Path) -> Result<SimplicialMesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

/// One value per line.
pub fn write_field(values: &[f64], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 24);
    for v in values {
        let _ = writeln!(s, "{v:e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        out.push(l.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("cannot parse '{l}'") })?);
    }
    Ok(out)
}

/// Legacy ASCII VTK unstructured grid with optional point scalars.
pub fn write_vtk<W: Write>(
    mesh: &SimplicialMesh,
    fields: &[(&str, &[f64])],
    title: &str,
    out: &mut W,
) -> Result<()> {
    let dim = mesh.dim();
    let nv = dim + 1;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.points() {
        writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    let ne = mesh.num_elements();
    writeln!(out, "CELLS {} {}", ne, ne * (nv + 1))?;
    for e in 0..ne {
        let ids: Vec<String> = mesh.element(e).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{} {}", nv, ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    let cell_type = if dim == 2 { 5 } else { 10 };
    for _ in 0..ne {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, values) in fields {
            if values.len() != mesh.num_nodes() {
                return Err(Error::Argument(format!("field '{name}' has wrong length")));
            }
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(out, "{v:e}")?;
            }
        }
    }
    Ok(())
}

pub fn write_vtk_file(mesh: &SimplicialMesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(mesh, fields, "anisocont", &mut f)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_round_trip() {
        for m in [
            SimplicialMesh::rect(2.0, 1.0, 5, 4).unwrap(),
            SimplicialMesh::cuboid(1.0, 1.5, 1.0, 3, 4, 3).unwrap(),
        ] {
            let text = write_mesh_string(&m);
            let back = parse_mesh(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(write_mesh_string(&back), text);
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "dim 2\ndomain 0 0 1 1\nnodes 1\n0 zero\n";
        match parse_mesh(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vtk_layout() {
        let m = SimplicialMesh::rect(1.0, 1.0, 2, 2).unwrap();
        let u = vec![0.0, 1.0, 2.0, 3.0];
        let mut buf = Vec::new();
        write_vtk(&m, &[("u", &u)], "t", &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 4 double\n"));
        assert!(s.contains("CELLS 2 8\n3 "));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(s.contains("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
    }
}
