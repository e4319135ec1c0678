//! `.p3dm` model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic | `b"P3DM"` |
//! | version | `u32` (= 1) |
//! | header length | `u32`, bytes of UTF-8 JSON that follow |
//! | header | JSON [`ModelHeader`] |
//! | mean | `3n` × `f64` |
//! | shape basis | `3n·k_s` × `f64`, column-major |
//! | shape variances | `k_s` × `f64` |
//! | expression basis | `3n·k_e` × `f64`, column-major |
//! | expression variances | `k_e` × `f64` |
//! | faces | `3·n_faces` × `u32` |
//!
//! Nothing may follow the faces.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::MorphableModel;
use crate::error::{MorphError, Result};
use crate::mesh::LandmarkScheme;

pub const MAGIC: &[u8; 4] = b"P3DM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub n_vertices: usize,
    pub k_s: usize,
    pub k_e: usize,
    pub n_faces: usize,
    pub landmark_scheme: LandmarkScheme,
    /// `[landmark id, template vertex]` pairs.
    pub landmark_vertices: Vec<(u32, usize)>,
}

pub fn encode_model(model: &MorphableModel) -> Vec<u8> {
    let header = ModelHeader {
        n_vertices: model.vertex_count(),
        k_s: model.shape_components(),
        k_e: model.expression_components(),
        n_faces: model.faces().len(),
        landmark_scheme: model.scheme().clone(),
        landmark_vertices: model.landmark_vertices().to_vec(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut floats = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    floats(model.mean().as_slice());
    floats(model.shape_basis().as_slice());
    floats(model.shape_variances());
    floats(model.expression_basis().as_slice());
    floats(model.expression_variances());
    for f in model.faces() {
        for &i in f {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| {
                MorphError::format(
                    "p3dm",
                    format!("byte {}", self.at),
                    format!("truncated while reading {what}"),
                )
            })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| MorphError::format("p3dm", "header", "array too large"))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MorphableModel> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(MorphError::format("p3dm", "byte 0", "bad magic, not a P3DM file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(MorphError::format(
            "p3dm",
            "byte 4",
            format!("unsupported version {version}"),
        ));
    }
    let len = r.u32("header length")? as usize;
    let header: ModelHeader =
        serde_json::from_slice(r.take(len, "header")?).map_err(|e| MorphError::format("p3dm", "header", e))?;
    let rows = 3 * header.n_vertices;
    let mean = r.f64s(rows, "mean")?;
    let shape = r.f64s(rows * header.k_s, "shape basis")?;
    let shape_var = r.f64s(header.k_s, "shape variances")?;
    let expr = r.f64s(rows * header.k_e, "expression basis")?;
    let expr_var = r.f64s(header.k_e, "expression variances")?;
    let mut faces = Vec::with_capacity(header.n_faces);
    for _ in 0..header.n_faces {
        let a = r.u32("faces")? as usize;
        let b = r.u32("faces")? as usize;
        let c = r.u32("faces")? as usize;
        faces.push([a, b, c]);
    }
    if r.at != bytes.len() {
        return Err(MorphError::format(
            "p3dm",
            format!("byte {}", r.at),
            "trailing bytes after faces",
        ));
    }
    MorphableModel::from_parts(
        DVector::from_vec(mean),
        DMatrix::from_vec(rows, header.k_s, shape),
        shape_var,
        DMatrix::from_vec(rows, header.k_e, expr),
        expr_var,
        faces,
        header.landmark_scheme,
        header.landmark_vertices,
    )
}

pub fn save_model(model: &MorphableModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| MorphError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MorphableModel> {
    let bytes = std::fs::read(path).map_err(|e| MorphError::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphable::model::tests::small_model;

    #[test]
    fn round_trip_is_exact() {
        let m = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.p3dm");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
        assert_eq!(&std::fs::read(&path).unwrap()[..4], b"P3DM");
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = encode_model(&small_model());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        let mut trailing = bytes.clone();
        trailing.push(0);
        for b in [bad_magic, bad_version, bytes[..bytes.len() - 3].to_vec(), trailing] {
            assert!(matches!(decode_model(&b), Err(MorphError::Format { .. })));
        }
    }
}
