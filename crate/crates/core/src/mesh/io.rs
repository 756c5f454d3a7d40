use std::fmt::Write as _;
use std::path::Path;

use super::{MeshOptions, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            other => Err(Error::InvalidArgument(format!("unknown mesh format {other:?} (expected off or obj)"))),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    load_mesh_with_options(path, format, &MeshOptions::default())
}

pub fn load_mesh_with_options(path: &Path, format: MeshFormat, opts: &MeshOptions) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let (v, f) = match format {
        MeshFormat::Off => parse_off(&text, &name)?,
        MeshFormat::Obj => parse_obj(&text, &name)?,
    };
    TriangleMesh::with_options(v, f, opts)
}

type Parsed = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, path: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| parse_err(path, line, format!("cannot parse {tok:?}")))
}

/// Parses OFF text. Only triangular faces are accepted.
pub fn parse_off(text: &str, path: &str) -> Result<Parsed> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut rest: Vec<&str> = header.split_whitespace().collect();
    if rest.first() != Some(&"OFF") {
        return Err(parse_err(path, ln, "missing OFF header"));
    }
    rest.remove(0);
    let (ln, counts) = if rest.is_empty() {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(path, ln, "missing counts line"))?;
        (ln, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (ln, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(path, ln, "counts line needs vertex and face counts"));
    }
    let nv: usize = parse_num(counts[0], path, ln)?;
    let nf: usize = parse_num(counts[1], path, ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(path, ln, "unexpected end of vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(path, ln, "vertex line needs 3 coordinates"));
        }
        vertices.push([parse_num(t[0], path, ln)?, parse_num(t[1], path, ln)?, parse_num(t[2], path, ln)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(path, ln, "unexpected end of face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let arity: usize = parse_num(t[0], path, ln)?;
        if arity != 3 {
            return Err(parse_err(path, ln, format!("face has arity {arity}; only triangles are supported")));
        }
        if t.len() < 4 {
            return Err(parse_err(path, ln, "face line needs 3 vertex indices"));
        }
        faces.push([parse_num(t[1], path, ln)?, parse_num(t[2], path, ln)?, parse_num(t[3], path, ln)?]);
    }
    Ok((vertices, faces))
}

/// Parses OBJ text: `v` and `f` records, 1-based or negative (relative)
/// indices, `a/b/c` tokens, polygons fan-triangulated from the first corner.
pub fn parse_obj(text: &str, path: &str) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(path, ln, "vertex record needs 3 coordinates"));
                }
                vertices.push([parse_num(c[0], path, ln)?, parse_num(c[1], path, ln)?, parse_num(c[2], path, ln)?]);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in t {
                    let head = tok.split('/').next().unwrap_or("");
                    let k: i64 = parse_num(head, path, ln)?;
                    let resolved = match k {
                        0 => return Err(parse_err(path, ln, "OBJ indices are 1-based; found 0")),
                        k if k > 0 => k - 1,
                        k => vertices.len() as i64 + k,
                    };
                    if resolved < 0 {
                        return Err(parse_err(path, ln, format!("relative index {k} before first vertex")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, ln, format!("face with {} corners", idx.len())));
                }
                for w in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn write_off(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_faces());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// ASCII PLY with per-vertex scalar properties for visualization.
pub fn write_ply_scalars(mesh: &TriangleMesh, path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != mesh.num_vertices()) {
        return Err(Error::InvalidArgument("one scalar column per name, one value per vertex".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", mesh.num_vertices());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    for n in names {
        let _ = writeln!(s, "property double {n}");
    }
    let _ = writeln!(s, "element face {}\nproperty list uchar int vertex_indices\nend_header", mesh.num_faces());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
        for c in columns {
            let _ = write!(s, " {:e}", c[i]);
        }
        s.push('\n');
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
