use std::collections::HashMap;
use std::fmt::Debug;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};

/// Names a landmark convention and the semantic ids of the three points the
/// evaluation protocol depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkScheme {
    pub id: String,
    pub left_eye: u32,
    pub right_eye: u32,
    pub nose_tip: u32,
}

/// Coordinates a landmark may carry: pixels (2D) or model units (3D).
pub trait LandmarkPoint: Copy + Debug + PartialEq {
    const DIM: usize;
    fn coords(&self) -> Vec<f64>;
    fn from_coords(c: &[f64]) -> Option<Self>;
    fn distance(&self, other: &Self) -> f64;
    /// The first two coordinates, used for the landmark bounding box.
    fn xy(&self) -> (f64, f64);
}

impl LandmarkPoint for Vector3<f64> {
    const DIM: usize = 3;
    fn coords(&self) -> Vec<f64> {
        vec![self.x, self.y, self.z]
    }
    fn from_coords(c: &[f64]) -> Option<Self> {
        (c.len() == 3).then(|| Vector3::new(c[0], c[1], c[2]))
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

impl LandmarkPoint for Vector2<f64> {
    const DIM: usize = 2;
    fn coords(&self) -> Vec<f64> {
        vec![self.x, self.y]
    }
    fn from_coords(c: &[f64]) -> Option<Self> {
        (c.len() == 2).then(|| Vector2::new(c[0], c[1]))
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark<P> {
    pub id: u32,
    pub position: P,
    /// Mesh or cloud vertex the landmark sits on, when it is a vertex landmark.
    pub vertex: Option<usize>,
}

/// Ordered semantic keypoints under one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<P> {
    scheme: LandmarkScheme,
    entries: Vec<Landmark<P>>,
}

pub type LandmarkSet3 = LandmarkSet<Vector3<f64>>;
pub type LandmarkSet2 = LandmarkSet<Vector2<f64>>;

impl<P: LandmarkPoint> LandmarkSet<P> {
    pub fn new(scheme: LandmarkScheme, entries: Vec<Landmark<P>>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(prev) = seen.insert(e.id, i) {
                return Err(MorphError::Validation(format!(
                    "landmark id {} appears at positions {prev} and {i}",
                    e.id
                )));
            }
            if !e.position.coords().iter().all(|c| c.is_finite()) {
                return Err(MorphError::Validation(format!(
                    "landmark {} has a non-finite position",
                    e.id
                )));
            }
        }
        Ok(Self { scheme, entries })
    }

    pub fn scheme(&self) -> &LandmarkScheme {
        &self.scheme
    }

    pub fn entries(&self) -> &[Landmark<P>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Landmark<P>> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn position(&self, id: u32) -> Option<P> {
        self.get(id).map(|e| e.position)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn ensure_same_scheme<Q>(&self, other: &LandmarkSet<Q>) -> Result<()> {
        if self.scheme != other.scheme {
            return Err(MorphError::SchemeMismatch {
                left: self.scheme.id.clone(),
                right: other.scheme.id.clone(),
            });
        }
        Ok(())
    }

    /// Position pairs for the ids both sets carry, in `self`'s order.
    pub fn common_pairs<Q: LandmarkPoint>(&self, other: &LandmarkSet<Q>) -> Vec<(u32, P, Q)> {
        self.entries
            .iter()
            .filter_map(|e| other.position(e.id).map(|q| (e.id, e.position, q)))
            .collect()
    }

    fn designated(&self, id: u32, what: &str) -> Result<P> {
        self.position(id).ok_or_else(|| {
            MorphError::Data(format!(
                "scheme {} designates landmark {id} as {what} but it is missing",
                self.scheme.id
            ))
        })
    }

    pub fn left_eye(&self) -> Result<P> {
        self.designated(self.scheme.left_eye, "left-eye center")
    }

    pub fn right_eye(&self) -> Result<P> {
        self.designated(self.scheme.right_eye, "right-eye center")
    }

    pub fn nose_tip(&self) -> Result<P> {
        self.designated(self.scheme.nose_tip, "nose tip")
    }

    pub fn map_positions<Q: LandmarkPoint>(&self, f: impl Fn(&P) -> Q) -> LandmarkSet<Q> {
        LandmarkSet {
            scheme: self.scheme.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| Landmark {
                    id: e.id,
                    position: f(&e.position),
                    vertex: e.vertex,
                })
                .collect(),
        }
    }

    pub fn retain(&self, keep: impl Fn(&Landmark<P>) -> bool) -> Self {
        Self {
            scheme: self.scheme.clone(),
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    /// Appends landmarks whose id is not yet present.
    pub fn extended_with(&self, extra: impl IntoIterator<Item = Landmark<P>>) -> Self {
        let mut out = self.clone();
        for e in extra {
            if out.get(e.id).is_none() {
                out.entries.push(e);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = LandmarkFile {
            scheme: self.scheme.clone(),
            dim: P::DIM,
            landmarks: self
                .entries
                .iter()
                .map(|e| LandmarkRecord {
                    id: e.id,
                    position: e.position.coords(),
                    vertex: e.vertex,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("landmark serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LandmarkFile = serde_json::from_str(text)
            .map_err(|e| MorphError::format("landmark json", format!("line {}", e.line()), e))?;
        if file.dim != P::DIM {
            return Err(MorphError::Validation(format!(
                "expected {}D landmarks, file holds {}D",
                P::DIM,
                file.dim
            )));
        }
        let entries = file
            .landmarks
            .into_iter()
            .map(|r| {
                P::from_coords(&r.position)
                    .map(|position| Landmark {
                        id: r.id,
                        position,
                        vertex: r.vertex,
                    })
                    .ok_or_else(|| MorphError::Validation(format!("landmark {} has wrong arity", r.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.scheme, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| MorphError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkFile {
    scheme: LandmarkScheme,
    dim: usize,
    landmarks: Vec<LandmarkRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkRecord {
    id: u32,
    position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertex: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> LandmarkScheme {
        LandmarkScheme {
            id: "toy".into(),
            left_eye: 0,
            right_eye: 1,
            nose_tip: 2,
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = |id| Landmark {
            id,
            position: Vector3::zeros(),
            vertex: None,
        };
        assert!(LandmarkSet::new(scheme(), vec![e(0), e(1), e(0)]).is_err());
    }

    #[test]
    fn json_round_trip_and_dimension_check() {
        let set = LandmarkSet::new(
            scheme(),
            vec![
                Landmark {
                    id: 0,
                    position: Vector3::new(0.1, 0.2, 0.3),
                    vertex: Some(4),
                },
                Landmark {
                    id: 2,
                    position: Vector3::new(-1.0, 2.0, 0.5),
                    vertex: None,
                },
            ],
        )
        .unwrap();
        let text = set.to_json();
        assert_eq!(LandmarkSet3::from_json(&text).unwrap(), set);
        assert!(LandmarkSet2::from_json(&text).is_err());
    }

    #[test]
    fn missing_designated_landmark_is_reported() {
        let set: LandmarkSet3 = LandmarkSet::new(scheme(), vec![]).unwrap();
        assert!(set.nose_tip().is_err());
    }
}
