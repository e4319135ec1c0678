use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Part {
    pub id: String,
    pub lambda: f64,
}

impl Part {
    pub fn new(id: &str, lambda: f64) -> Self {
        Self { id: id.into(), lambda }
    }
}

/// Per-vertex part labels on the template, with per-part stiffness and
/// per-vertex data weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PartSegmentation {
    parts: Vec<Part>,
    labels: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentationRecord {
    parts: Vec<Part>,
    vertex_labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertex_weights: Option<Vec<f64>>,
}

impl PartSegmentation {
    /// `labels[i]` indexes `parts`. Weights default to 1.
    pub fn new(parts: Vec<Part>, labels: Vec<usize>, weights: Option<Vec<f64>>) -> Result<Self> {
        for p in &parts {
            if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
                return Err(MorphError::Validation(format!(
                    "part {} has stiffness {}; it must be finite and >= 0",
                    p.id, p.lambda
                )));
            }
        }
        let mut ids: Vec<&str> = parts.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(MorphError::Validation("part ids must be unique".into()));
        }
        if let Some(i) = labels.iter().position(|&l| l >= parts.len()) {
            return Err(MorphError::Validation(format!(
                "vertex {i} has label {} but only {} parts exist",
                labels[i],
                parts.len()
            )));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; labels.len()]);
        if weights.len() != labels.len() {
            return Err(MorphError::Validation(format!(
                "{} vertex weights for {} labels",
                weights.len(),
                labels.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(MorphError::Validation("vertex weights must be finite and >= 0".into()));
        }
        Ok(Self { parts, labels, weights })
    }

    /// One part covering every vertex.
    pub fn uniform(vertex_count: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![Part::new("all", lambda)], vec![0; vertex_count], None)
    }

    /// Face parts with their default stiffness.
    pub fn default_parts() -> Vec<Part> {
        vec![
            Part::new("cheek", 1.0),
            Part::new("forehead", 1.0),
            Part::new("nose", 5.0),
            Part::new("eyes", 5.0),
            Part::new("mouth", 3.0),
            Part::new("boundary", 10.0),
        ]
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn part_of(&self, vertex: usize) -> usize {
        self.labels[vertex]
    }

    pub fn lambda_of(&self, vertex: usize) -> f64 {
        self.parts[self.labels[vertex]].lambda
    }

    /// Every stiffness multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let parts = self.parts.iter().map(|p| Part::new(&p.id, p.lambda * k)).collect();
        Self::new(parts, self.labels.clone(), Some(self.weights.clone()))
    }

    /// Replaces the stiffness of named parts; unknown names are an error.
    pub fn with_lambda_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut parts = self.parts.clone();
        for (name, lambda) in overrides {
            let part = parts
                .iter_mut()
                .find(|p| &p.id == name)
                .ok_or_else(|| MorphError::Parameter(format!("no part named {name:?}")))?;
            part.lambda = *lambda;
        }
        Self::new(parts, self.labels.clone(), Some(self.weights.clone()))
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.parts.clone(), self.labels.clone(), Some(weights))
    }

    pub fn to_json(&self) -> String {
        let weights_are_default = self.weights.iter().all(|w| *w == 1.0);
        let record = SegmentationRecord {
            parts: self.parts.clone(),
            vertex_labels: self.labels.clone(),
            vertex_weights: (!weights_are_default).then(|| self.weights.clone()),
        };
        serde_json::to_string(&record).expect("segmentation serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: SegmentationRecord = serde_json::from_str(text)
            .map_err(|e| MorphError::format("segmentation", format!("line {}", e.line()), e))?;
        Self::new(r.parts, r.vertex_labels, r.vertex_weights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| MorphError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let seg = PartSegmentation::new(PartSegmentation::default_parts(), vec![0, 2, 5, 1], None).unwrap();
        let back = PartSegmentation::from_json(&seg.to_json()).unwrap();
        assert_eq!(seg, back);
        let weighted = seg.with_weights(vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert_eq!(PartSegmentation::from_json(&weighted.to_json()).unwrap(), weighted);
    }

    #[test]
    fn invariants_enforced() {
        assert!(PartSegmentation::new(vec![Part::new("a", -1.0)], vec![0], None).is_err());
        assert!(PartSegmentation::new(vec![Part::new("a", 1.0)], vec![1], None).is_err());
        assert!(PartSegmentation::new(vec![Part::new("a", 1.0), Part::new("a", 2.0)], vec![0], None).is_err());
        assert!(PartSegmentation::from_json(r#"{"parts":[],"vertex_labels":[],"extra":1}"#).is_err());
    }

    #[test]
    fn overrides_by_name() {
        let seg = PartSegmentation::new(PartSegmentation::default_parts(), vec![2], None).unwrap();
        let mut o = BTreeMap::new();
        o.insert("nose".to_string(), 0.5);
        assert_eq!(seg.with_lambda_overrides(&o).unwrap().lambda_of(0), 0.5);
        o.insert("ear".to_string(), 1.0);
        assert!(seg.with_lambda_overrides(&o).is_err());
    }
}
