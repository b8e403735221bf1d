//! Text file formats for meshes and fracture networks.
//!
//! Mesh format (ASCII, whitespace-separated):
//! line 1 `NV NT NB`; NV lines `x y`; NT lines `i0 i1 i2` (0-based, CCW);
//! NB lines `boundary_vertex_index`.
//!
//! Fracture format: line 1 `NP`; per polyline a line `M` followed by M
//! lines `x y`.
//!
//! Coordinates are printed with 17 significant digits, so a save/load
//! round trip reproduces them bit-exactly.

use super::fracture::FractureNetwork;
use super::point::Point2;
use super::trimesh::TriMesh;
use crate::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

struct Tokens {
    items: Vec<String>,
    pos: usize,
}

impl Tokens {
    fn from_reader(r: impl BufRead) -> Result<Self> {
        let mut items = Vec::new();
        for line in r.lines() {
            let line = line?;
            // '#' starts a comment.
            let body = line.split('#').next().unwrap_or("");
            items.extend(body.split_whitespace().map(str::to_string));
        }
        Ok(Self { items, pos: 0 })
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.next_token(what)?;
        tok.parse()
            .map_err(|_| Error::MeshFormat(format!("expected integer for {what}, got '{tok}'")))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64> {
        let tok = self.next_token(what)?;
        tok.parse()
            .map_err(|_| Error::MeshFormat(format!("expected number for {what}, got '{tok}'")))
    }

    fn next_token(&mut self, what: &str) -> Result<String> {
        if self.pos >= self.items.len() {
            return Err(Error::MeshFormat(format!(
                "unexpected end of file at {what}"
            )));
        }
        let tok = self.items[self.pos].clone();
        self.pos += 1;
        Ok(tok)
    }

    fn finished(&self) -> bool {
        self.pos >= self.items.len()
    }
}

/// Loads a mesh and validates conformity, orientation, and the declared
/// boundary list.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let file = std::fs::File::open(path)?;
    let mut tok = Tokens::from_reader(std::io::BufReader::new(file))?;
    let nv = tok.next_usize("NV")?;
    let nt = tok.next_usize("NT")?;
    let nb = tok.next_usize("NB")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let x = tok.next_f64(&format!("vertex {i} x"))?;
        let y = tok.next_f64(&format!("vertex {i} y"))?;
        vertices.push(Point2::new(x, y));
    }
    let mut triangles = Vec::with_capacity(nt);
    for i in 0..nt {
        let a = tok.next_usize(&format!("triangle {i} i0"))?;
        let b = tok.next_usize(&format!("triangle {i} i1"))?;
        let c = tok.next_usize(&format!("triangle {i} i2"))?;
        triangles.push([a, b, c]);
    }
    let mut declared = vec![false; nv];
    for i in 0..nb {
        let v = tok.next_usize(&format!("boundary index {i}"))?;
        if v >= nv {
            return Err(Error::MeshFormat(format!(
                "boundary index {v} out of range ({nv} vertices)"
            )));
        }
        declared[v] = true;
    }
    if !tok.finished() {
        return Err(Error::MeshFormat(
            "trailing tokens after boundary list".into(),
        ));
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    if mesh.boundary_flags() != declared.as_slice() {
        return Err(Error::MeshFormat(
            "declared boundary list does not match the edge-derived boundary".into(),
        ));
    }
    Ok(mesh)
}

/// Writes a mesh in the text format above.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let boundary: Vec<usize> = (0..mesh.num_vertices())
        .filter(|&v| mesh.is_boundary_vertex(v))
        .collect();
    writeln!(
        out,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        boundary.len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", v.x, v.y)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for v in boundary {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Loads a fracture network.
pub fn load_fracture(path: impl AsRef<Path>) -> Result<FractureNetwork> {
    let file = std::fs::File::open(path)?;
    let mut tok = Tokens::from_reader(std::io::BufReader::new(file))?;
    let np = tok.next_usize("NP")?;
    let mut polylines = Vec::with_capacity(np);
    for p in 0..np {
        let m = tok.next_usize(&format!("polyline {p} point count"))?;
        let mut chain = Vec::with_capacity(m);
        for i in 0..m {
            let x = tok.next_f64(&format!("polyline {p} point {i} x"))?;
            let y = tok.next_f64(&format!("polyline {p} point {i} y"))?;
            chain.push(Point2::new(x, y));
        }
        polylines.push(chain);
    }
    if !tok.finished() {
        return Err(Error::MeshFormat("trailing tokens after polylines".into()));
    }
    FractureNetwork::new(polylines)
}

/// Writes a fracture network.
pub fn save_fracture(network: &FractureNetwork, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", network.num_polylines())?;
    for p in 0..network.num_polylines() {
        let chain = network.polyline(p);
        writeln!(out, "{}", chain.len())?;
        for pt in chain {
            writeln!(out, "{:.16e} {:.16e}", pt.x, pt.y)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_structured;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("fraclod_io_{name}_{}", std::process::id()));
        p
    }

    #[test]
    fn mesh_round_trip_bit_exact() {
        let m = unit_square_structured(1).unwrap();
        let path = tmp("roundtrip");
        save_mesh(&m, &path).unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(loaded.num_vertices(), m.num_vertices());
        assert_eq!(loaded.num_triangles(), m.num_triangles());
        for v in 0..m.num_vertices() {
            assert_eq!(loaded.vertex(v), m.vertex(v));
        }
        assert_eq!(loaded.triangles(), m.triangles());
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn hand_written_fixture() {
        let path = tmp("fixture");
        std::fs::write(
            &path,
            "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0\n1\n2\n3\n",
        )
        .unwrap();
        let m = load_mesh(&path).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert!((m.tri_area(0) - 0.5).abs() < 1e-15);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn short_vertex_list_errors() {
        let path = tmp("short");
        std::fs::write(&path, "3 2 0\n0 0\n1 0\n").unwrap();
        assert!(matches!(load_mesh(&path), Err(Error::MeshFormat(_))));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn zero_area_triangle_errors() {
        let path = tmp("flat");
        std::fs::write(&path, "3 1 3\n0 0\n1 0\n2 0\n0 1 2\n0\n1\n2\n").unwrap();
        assert!(matches!(
            load_mesh(&path),
            Err(Error::DegenerateTriangle { .. })
        ));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn wrong_boundary_list_errors() {
        let path = tmp("badboundary");
        // Vertex 0 is on the boundary but the list omits it.
        std::fs::write(&path, "4 2 3\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n1\n2\n3\n").unwrap();
        assert!(matches!(load_mesh(&path), Err(Error::MeshFormat(_))));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn fracture_round_trip() {
        let n = FractureNetwork::new(vec![vec![
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.377),
            Point2::new(0.25, 1.0),
        ]])
        .unwrap();
        let path = tmp("fracture");
        save_fracture(&n, &path).unwrap();
        let loaded = load_fracture(&path).unwrap();
        assert_eq!(loaded.num_polylines(), 1);
        for (a, b) in loaded.polyline(0).iter().zip(n.polyline(0)) {
            assert_eq!(a, b);
        }
        std::fs::remove_file(path).ok();
    }
}
