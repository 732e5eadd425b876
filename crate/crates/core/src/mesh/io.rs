//! ASCII OFF, OBJ and PLY readers and writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::MeshError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
    /// Detect from the extension, falling back to the file header.
    Auto,
}

impl FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            "auto" => Ok(MeshFormat::Auto),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl MeshFormat {
    pub fn from_extension(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }

    fn sniff(text: &str) -> Option<MeshFormat> {
        let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))?;
        if first.starts_with("OFF") {
            Some(MeshFormat::Off)
        } else if first == "ply" {
            Some(MeshFormat::Ply)
        } else if first.starts_with("v ") || first.starts_with("o ") || first.starts_with("g ") || first.starts_with("mtllib") {
            Some(MeshFormat::Obj)
        } else {
            None
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })?;
    let format = match format {
        MeshFormat::Auto => MeshFormat::from_extension(path)
            .or_else(|| MeshFormat::sniff(&text))
            .ok_or_else(|| MeshError::UnsupportedFormat(path.display().to_string()))?,
        f => f,
    };
    parse_mesh(&text, format)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriMesh, MeshError> {
    let format = match format {
        MeshFormat::Auto => MeshFormat::sniff(text).ok_or_else(|| MeshError::UnsupportedFormat("unrecognized header".into()))?,
        f => f,
    };
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Ply => parse_ply(text)?,
        MeshFormat::Auto => unreachable!(),
    };
    TriMesh::new(vertices, faces)
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<(), MeshError> {
    let path = path.as_ref();
    let format = match format {
        MeshFormat::Auto => MeshFormat::from_extension(path).unwrap_or(MeshFormat::Off),
        f => f,
    };
    fs::write(path, write_mesh(mesh, format)).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })
}

/// Serializes with shortest round-trip float formatting.
pub fn write_mesh(mesh: &TriMesh, format: MeshFormat) -> String {
    let mut out = String::new();
    match format {
        MeshFormat::Off | MeshFormat::Auto => {
            let _ = writeln!(out, "OFF\n{} {} {}", mesh.vertex_count(), mesh.face_count(), mesh.edge_count());
            for p in mesh.vertices() {
                let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for p in mesh.vertices() {
                let _ = writeln!(out, "v {:?} {:?} {:?}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::Ply => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
                 element face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.vertex_count(),
                mesh.face_count()
            );
            for p in mesh.vertices() {
                let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

type Parsed = (Vec<Point3<f64>>, Vec<[usize; 3]>);

/// Content lines with 1-based line numbers, comments and blanks removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_off(text: &str) -> Result<Parsed, MeshError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(MeshError::Empty)?;
    let rest = header.strip_prefix("OFF").ok_or_else(|| parse_err(hline, "expected OFF header"))?.trim();
    let counts_line = if rest.is_empty() { lines.next().ok_or(MeshError::Empty)? } else { (hline, rest) };
    let mut toks = counts_line.1.split_whitespace();
    let nv: usize = num(toks.next(), counts_line.0, "vertex count")?;
    let nf: usize = num(toks.next(), counts_line.0, "face count")?;
    if nv == 0 || nf == 0 {
        return Err(MeshError::Empty);
    }

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file in vertex block"))?;
        let mut t = l.split_whitespace();
        vertices.push(Point3::new(num(t.next(), ln, "x")?, num(t.next(), ln, "y")?, num(t.next(), ln, "z")?));
    }
    let mut faces = Vec::with_capacity(nf);
    for fi in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file in face block"))?;
        let mut t = l.split_whitespace();
        let count: usize = num(t.next(), ln, "face size")?;
        if count != 3 {
            return Err(MeshError::NonTriangularFace(fi));
        }
        faces.push([num(t.next(), ln, "index")?, num(t.next(), ln, "index")?, num(t.next(), ln, "index")?]);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<Parsed, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                vertices.push(Point3::new(num(t.next(), ln, "x")?, num(t.next(), ln, "y")?, num(t.next(), ln, "z")?));
            }
            Some("f") => {
                let fi = faces.len();
                let idx: Vec<&str> = t.collect();
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangularFace(fi));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(idx) {
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| parse_err(ln, format!("invalid index '{tok}'")))?;
                    let resolved = match raw {
                        r if r > 0 => r - 1,
                        r if r < 0 => vertices.len() as i64 + r,
                        _ => return Err(parse_err(ln, "OBJ indices are 1-based")),
                    };
                    if resolved < 0 {
                        return Err(parse_err(ln, format!("index '{tok}' out of range")));
                    }
                    *slot = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    scalar_props: Vec<String>,
    list_prop: Option<String>,
}

fn parse_ply(text: &str) -> Result<Parsed, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((ln, _)) => return Err(parse_err(ln, "expected 'ply' magic")),
        None => return Err(MeshError::Empty),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "missing end_header"))?;
        let mut t = l.split_whitespace();
        match t.next() {
            Some("format") => {
                if t.next() != Some("ascii") {
                    return Err(MeshError::UnsupportedFormat("binary PLY".into()));
                }
            }
            Some("element") => {
                let name = t.next().ok_or_else(|| parse_err(ln, "element without name"))?.to_string();
                let count = num(t.next(), ln, "element count")?;
                elements.push(PlyElement { name, count, scalar_props: Vec::new(), list_prop: None });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(ln, "property before element"))?;
                let toks: Vec<&str> = t.collect();
                if toks.first() == Some(&"list") {
                    if toks.len() != 4 || el.list_prop.is_some() || !el.scalar_props.is_empty() {
                        return Err(parse_err(ln, "unsupported list property layout"));
                    }
                    el.list_prop = Some(toks[3].to_string());
                } else {
                    let name = toks.get(1).ok_or_else(|| parse_err(ln, "property without name"))?;
                    if el.list_prop.is_some() {
                        return Err(parse_err(ln, "scalar property after list property is not supported"));
                    }
                    el.scalar_props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(parse_err(ln, format!("unexpected header keyword '{other}'"))),
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let pos = |n: &str| el.scalar_props.iter().position(|p| p == n);
                let (xi, yi, zi) = match (pos("x"), pos("y"), pos("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(parse_err(0, "vertex element lacks x, y, z")),
                };
                for _ in 0..el.count {
                    let (ln, l) = body.next().ok_or_else(|| parse_err(0, "unexpected end of vertex data"))?;
                    let vals: Vec<&str> = l.split_whitespace().collect();
                    let get = |i: usize| num::<f64>(vals.get(i).copied(), ln, "coordinate");
                    vertices.push(Point3::new(get(xi)?, get(yi)?, get(zi)?));
                }
            }
            "face" => {
                match el.list_prop.as_deref() {
                    Some("vertex_indices") | Some("vertex_index") => {}
                    _ => return Err(parse_err(0, "face element lacks vertex_indices list")),
                }
                for fi in 0..el.count {
                    let (ln, l) = body.next().ok_or_else(|| parse_err(0, "unexpected end of face data"))?;
                    let mut t = l.split_whitespace();
                    let count: usize = num(t.next(), ln, "face size")?;
                    if count != 3 {
                        return Err(MeshError::NonTriangularFace(fi));
                    }
                    faces.push([num(t.next(), ln, "index")?, num(t.next(), ln, "index")?, num(t.next(), ln, "index")?]);
                }
            }
            _ => {
                for _ in 0..el.count {
                    body.next();
                }
            }
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok((vertices, faces))
}
