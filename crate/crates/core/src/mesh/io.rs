//! ASCII OBJ and ASCII/binary PLY reading and writing.
//!
//! OBJ: `v x y z`, `vn x y z`, `f a b c` with 1-based (or negative, relative)
//! indices in any of the `i`, `i/t`, `i//n`, `i/t/n` forms. Polygons are
//! fan-triangulated. Normals are kept only when there is one per vertex.
//!
//! PLY: `element vertex` with `x y z` and optional `nx ny nz` and `view`,
//! `element face` with a `vertex_indices` (or `vertex_index`) list. Any scalar
//! type is accepted on read; writing uses `double` coordinates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{PointCloud, TriMesh, Vec3, ViewTag};
use crate::error::{MorphError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyBinary),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::PlyAscii | MeshFormat::PlyBinary => "ply",
        }
    }
}

impl FromStr for MeshFormat {
    type Err = MorphError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" | "ply-binary" => Ok(MeshFormat::PlyBinary),
            "ply-ascii" => Ok(MeshFormat::PlyAscii),
            other => Err(MorphError::Parameter(format!("unknown mesh format {other:?}"))),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let bytes = fs::read(path).map_err(|e| MorphError::io(path, e))?;
    match format {
        MeshFormat::Obj => parse_obj(&String::from_utf8_lossy(&bytes)),
        MeshFormat::PlyAscii | MeshFormat::PlyBinary => {
            let ply = parse_ply(&bytes)?;
            TriMesh::with_normals(ply.vertices, ply.faces, unit_normals(ply.normals))
        }
    }
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let bytes = match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::PlyAscii => write_ply(mesh.vertices(), mesh.normals(), None, mesh.faces(), false),
        MeshFormat::PlyBinary => write_ply(mesh.vertices(), mesh.normals(), None, mesh.faces(), true),
    };
    fs::write(path, bytes).map_err(|e| MorphError::io(path, e))
}

/// Reads the vertex element of a PLY file (faces, if any, are ignored).
pub fn load_point_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| MorphError::io(path, e))?;
    let ply = parse_ply(&bytes)?;
    let cloud = PointCloud::try_new(ply.vertices)?;
    match ply.views {
        Some(v) => cloud.with_views(v),
        None => Ok(cloud),
    }
}

pub fn save_point_cloud(cloud: &PointCloud, path: &Path, binary: bool) -> Result<()> {
    let bytes = write_ply(cloud.points(), None, cloud.views(), &[], binary);
    fs::write(path, bytes).map_err(|e| MorphError::io(path, e))
}

fn unit_normals(normals: Option<Vec<Vec3>>) -> Option<Vec<Vec3>> {
    let ns = normals?;
    if ns.iter().any(|n| n.norm() == 0.0 || !n.norm().is_finite()) {
        return None;
    }
    Some(ns.into_iter().map(|n| n.normalize()).collect())
}

fn fmt_coord(out: &mut String, v: f64) {
    // 16 significant digits
    let _ = write!(out, "{v:.15e}");
}

fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 72);
    for v in mesh.vertices() {
        out.push('v');
        for c in v.iter() {
            out.push(' ');
            fmt_coord(&mut out, *c);
        }
        out.push('\n');
    }
    if let Some(ns) = mesh.normals() {
        for n in ns {
            out.push_str("vn");
            for c in n.iter() {
                out.push(' ');
                fmt_coord(&mut out, *c);
            }
            out.push('\n');
        }
    }
    let with_normals = mesh.normals().is_some();
    for f in mesh.faces() {
        let [a, b, c] = f.map(|i| i + 1);
        if with_normals {
            let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(out, "f {a} {b} {c}");
        }
    }
    out
}

fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    let err = |line: usize, msg: String| MorphError::format("obj", format!("line {line}"), msg);

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" | "vn" => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(line_no, format!("{t:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err(line_no, format!("{tag} needs 3 coordinates")));
                }
                let p = Vec3::new(coords[0], coords[1], coords[2]);
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(MorphError::Validation(format!(
                        "non-finite coordinate on obj line {line_no}"
                    )));
                }
                if tag == "v" {
                    vertices.push(p);
                } else {
                    normals.push(p);
                }
            }
            "f" => {
                let mut idx = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|e| err(line_no, format!("face index {t:?}: {e}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err(line_no, "face index 0 is invalid in obj".into()));
                    };
                    if resolved < 0 {
                        return Err(err(line_no, format!("relative index {i} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(err(line_no, "face with fewer than 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let normals = (normals.len() == vertices.len() && !normals.is_empty()).then_some(normals);
    TriMesh::with_normals(vertices, faces, unit_normals(normals))
}

fn write_ply(
    points: &[Vec3],
    normals: Option<&[Vec3]>,
    views: Option<&[ViewTag]>,
    faces: &[[usize; 3]],
    binary: bool,
) -> Vec<u8> {
    let mut header = String::from("ply\n");
    header.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(header, "element vertex {}", points.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if views.is_some() {
        header.push_str("property uchar view\n");
    }
    if !faces.is_empty() {
        let _ = writeln!(header, "element face {}", faces.len());
        header.push_str("property list uchar int vertex_indices\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    let view_code = |v: ViewTag| match v {
        ViewTag::Left => 0u8,
        ViewTag::Middle => 1,
        ViewTag::Right => 2,
    };
    if binary {
        for (i, p) in points.iter().enumerate() {
            for c in p.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
            if let Some(ns) = normals {
                for c in ns[i].iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            if let Some(vs) = views {
                out.push(view_code(vs[i]));
            }
        }
        for f in faces {
            out.push(3);
            for &i in f {
                out.extend_from_slice(&(i as i32).to_le_bytes());
            }
        }
    } else {
        let mut text = String::new();
        for (i, p) in points.iter().enumerate() {
            let mut first = true;
            let mut push = |text: &mut String, c: f64| {
                if !first {
                    text.push(' ');
                }
                first = false;
                fmt_coord(text, c);
            };
            for c in p.iter() {
                push(&mut text, *c);
            }
            if let Some(ns) = normals {
                for c in ns[i].iter() {
                    push(&mut text, *c);
                }
            }
            if let Some(vs) = views {
                let _ = write!(text, " {}", view_code(vs[i]));
            }
            text.push('\n');
        }
        for f in faces {
            let _ = writeln!(text, "3 {} {} {}", f[0], f[1], f[2]);
        }
        out.extend_from_slice(text.as_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8], little: bool) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if little {
                    <$t>::from_le_bytes(arr)
                } else {
                    <$t>::from_be_bytes(arr)
                }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

struct PlyData {
    vertices: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    views: Option<Vec<ViewTag>>,
    faces: Vec<[usize; 3]>,
}

fn parse_ply(bytes: &[u8]) -> Result<PlyData> {
    let herr = |line: usize, msg: String| MorphError::format("ply", format!("header line {line}"), msg);

    // header is ASCII lines up to and including end_header
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(herr(lines.len() + 1, "missing end_header".into()));
        };
        let line = String::from_utf8_lossy(&rest[..nl]).trim().to_string();
        offset += nl + 1;
        let done = line == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(herr(1, "missing ply magic".into()));
    }

    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                encoding = Some(match t.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some("binary_big_endian") => Encoding::BinaryBe,
                    other => return Err(herr(i + 1, format!("unknown format {other:?}"))),
                })
            }
            Some("element") => {
                if t.len() != 3 {
                    return Err(herr(i + 1, "element needs a name and count".into()));
                }
                elements.push(Element {
                    name: t[1].to_string(),
                    count: t[2].parse().map_err(|e| herr(i + 1, format!("element count: {e}")))?,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| herr(i + 1, "property before any element".into()))?;
                let prop = if t.get(1) == Some(&"list") {
                    if t.len() != 5 {
                        return Err(herr(i + 1, "malformed list property".into()));
                    }
                    let ct = Scalar::parse(t[2]).ok_or_else(|| herr(i + 1, format!("type {}", t[2])))?;
                    let it = Scalar::parse(t[3]).ok_or_else(|| herr(i + 1, format!("type {}", t[3])))?;
                    Property::List(t[4].to_string(), ct, it)
                } else {
                    if t.len() != 3 {
                        return Err(herr(i + 1, "malformed property".into()));
                    }
                    let ty = Scalar::parse(t[1]).ok_or_else(|| herr(i + 1, format!("type {}", t[1])))?;
                    Property::Scalar(t[2].to_string(), ty)
                };
                el.props.push(prop);
            }
            Some("comment") | Some("obj_info") | Some("end_header") | None => {}
            Some(other) => return Err(herr(i + 1, format!("unexpected keyword {other:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| herr(2, "missing format line".into()))?;

    let mut reader: Box<dyn ValueReader> = match encoding {
        Encoding::Ascii => Box::new(AsciiReader::new(&bytes[offset..], lines.len())),
        Encoding::BinaryLe => Box::new(BinaryReader {
            data: &bytes[offset..],
            pos: 0,
            little: true,
            base: offset,
        }),
        Encoding::BinaryBe => Box::new(BinaryReader {
            data: &bytes[offset..],
            pos: 0,
            little: false,
            base: offset,
        }),
    };

    let mut data = PlyData {
        vertices: Vec::new(),
        normals: None,
        views: None,
        faces: Vec::new(),
    };
    for el in &elements {
        let col = |name: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(n, _) if n == name))
        };
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let (xi, yi, zi) = (col("x"), col("y"), col("z"));
        let normal_cols = match (col("nx"), col("ny"), col("nz")) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        let view_col = col("view");
        if is_vertex {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(MorphError::format("ply", "header", "vertex element lacks x/y/z"));
            }
            data.vertices.reserve(el.count);
            if normal_cols.is_some() {
                data.normals = Some(Vec::with_capacity(el.count));
            }
            if view_col.is_some() {
                data.views = Some(Vec::with_capacity(el.count));
            }
        }
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Option<Vec<f64>> = None;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => scalars[pi] = reader.scalar(*ty)?,
                    Property::List(name, ct, it) => {
                        let n = reader.scalar(*ct)?;
                        if !(n >= 0.0) {
                            return Err(reader.error("negative list length"));
                        }
                        let items = (0..n as usize)
                            .map(|_| reader.scalar(*it))
                            .collect::<Result<Vec<_>>>()?;
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = Some(items);
                        }
                    }
                }
            }
            if is_vertex {
                let p = Vec3::new(scalars[xi.unwrap()], scalars[yi.unwrap()], scalars[zi.unwrap()]);
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(MorphError::Validation(format!(
                        "non-finite coordinate in ply vertex {}",
                        data.vertices.len()
                    )));
                }
                data.vertices.push(p);
                if let (Some(ns), Some([a, b, c])) = (data.normals.as_mut(), normal_cols) {
                    ns.push(Vec3::new(scalars[a], scalars[b], scalars[c]));
                }
                if let (Some(vs), Some(vc)) = (data.views.as_mut(), view_col) {
                    vs.push(match scalars[vc] as u8 {
                        0 => ViewTag::Left,
                        1 => ViewTag::Middle,
                        2 => ViewTag::Right,
                        other => return Err(reader.error(&format!("unknown view code {other}"))),
                    });
                }
            } else if is_face {
                let idx = list.ok_or_else(|| reader.error("face without vertex_indices"))?;
                if idx.len() < 3 {
                    return Err(reader.error("face with fewer than 3 vertices"));
                }
                let idx: Vec<usize> = idx
                    .into_iter()
                    .map(|v| {
                        if v < 0.0 {
                            Err(reader.error("negative vertex index"))
                        } else {
                            Ok(v as usize)
                        }
                    })
                    .collect::<Result<_>>()?;
                for k in 1..idx.len() - 1 {
                    data.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
        }
    }
    Ok(data)
}

trait ValueReader {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn error(&self, msg: &str) -> MorphError;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
    little: bool,
    base: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(self.error("unexpected end of data"));
        }
        let v = ty.read(&self.data[self.pos..], self.little);
        self.pos += n;
        Ok(v)
    }

    fn error(&self, msg: &str) -> MorphError {
        MorphError::format("ply", format!("byte offset {}", self.base + self.pos), msg)
    }
}

struct AsciiReader<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(data: &'a [u8], header_lines: usize) -> Self {
        let text = std::str::from_utf8(data).unwrap_or("");
        let tokens = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (header_lines + i + 1, t)))
            .collect();
        Self { tokens, pos: 0 }
    }
}

impl ValueReader for AsciiReader<'_> {
    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let (line, tok) = *self
            .tokens
            .get(self.pos)
            .ok_or_else(|| self.error("unexpected end of data"))?;
        self.pos += 1;
        tok.parse::<f64>()
            .map_err(|e| MorphError::format("ply", format!("line {line}"), format!("{tok:?}: {e}")))
    }

    fn error(&self, msg: &str) -> MorphError {
        let line = self.tokens.get(self.pos.saturating_sub(1)).map_or(0, |t| t.0);
        MorphError::format("ply", format!("line {line}"), msg)
    }
}
