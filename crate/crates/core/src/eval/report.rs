use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{align_prediction, armse, nme_for_mode, normalize_interocular, to_nose_frame, AlignMode, NmeMode};
use crate::error::{MorphError, Result};
use crate::mesh::{LandmarkSet3, TriMesh};
use crate::par::map_range;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Crop radii in interocular units, strictly increasing.
    pub radii: Vec<f64>,
    pub alignment: AlignMode,
    pub nme_mode: NmeMode,
    /// Fixed NME normaliser; `None` uses the ground-truth landmark box.
    pub bbox_size: Option<f64>,
    /// Sample attributes that define subgroups.
    pub group_by: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            alignment: AlignMode::Similarity,
            nme_mode: NmeMode::Landmarks3d,
            bbox_size: None,
            group_by: vec!["age_band".into(), "expression".into()],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(MorphError::Parameter("at least one crop radius is required".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MorphError::Parameter(format!(
                "crop radii must be positive and strictly increasing, got {:?}",
                self.radii
            )));
        }
        if let Some(b) = self.bbox_size {
            if !(b > 0.0 && b.is_finite()) {
                return Err(MorphError::Parameter(format!("bbox_size must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalSample {
    pub id: String,
    pub prediction: TriMesh,
    pub prediction_landmarks: LandmarkSet3,
    pub ground_truth: TriMesh,
    pub ground_truth_landmarks: LandmarkSet3,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    /// `None` when the sample failed; see `error`.
    pub nme: Option<f64>,
    /// One entry per configured radius.
    pub armse: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    /// Statistics of `values`, reduced in the given order.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Some(Self {
            count: values.len(),
            mean,
            median,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// `all`, or `attribute=value`.
    pub group: String,
    pub nme: Option<Summary>,
    /// One entry per configured radius.
    pub armse: Vec<Option<Summary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub radii: Vec<f64>,
    pub alignment: AlignMode,
    pub nme_mode: NmeMode,
    /// Normaliser description, e.g. `gt-landmark-bbox`.
    pub nme_normalizer: String,
    pub samples: Vec<SampleMetrics>,
    pub groups: Vec<GroupSummary>,
}

fn evaluate_sample(s: &EvalSample, config: &EvalConfig) -> Result<(f64, Vec<f64>)> {
    let (gt, gt_lms, _) = normalize_interocular(&s.ground_truth, &s.ground_truth_landmarks)?;
    let (pred, pred_lms) = align_prediction(&s.prediction, &s.prediction_landmarks, &gt_lms, config.alignment)?;
    let (gt, gt_lms) = to_nose_frame(&gt, &gt_lms)?;
    let nme = nme_for_mode(&pred_lms, &gt_lms, config.bbox_size, config.nme_mode)?;
    let armse = config
        .radii
        .iter()
        .map(|&r| armse(&pred, &gt, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((nme, armse))
}

/// Group statistics recomputed from per-sample entries.
pub fn aggregate(samples: &[SampleMetrics], radii: usize, group_by: &[String]) -> Vec<GroupSummary> {
    let mut keys: Vec<String> = vec!["all".into()];
    let mut seen = std::collections::BTreeSet::new();
    for attr in group_by {
        for s in samples {
            if let Some(v) = s.attributes.get(attr) {
                if seen.insert(format!("{attr}={v}")) {
                    keys.push(format!("{attr}={v}"));
                }
            }
        }
    }
    // "all" first, then attribute groups in sorted order
    keys[1..].sort();
    keys.into_iter()
        .map(|key| {
            let members: Vec<&SampleMetrics> = samples
                .iter()
                .filter(|s| s.error.is_none())
                .filter(|s| match key.split_once('=') {
                    None => true,
                    Some((a, v)) => s.attributes.get(a).map(String::as_str) == Some(v),
                })
                .collect();
            let nme: Vec<f64> = members.iter().filter_map(|s| s.nme).collect();
            let armse = (0..radii)
                .map(|k| {
                    let vals: Vec<f64> = members.iter().filter_map(|s| s.armse.as_ref().map(|a| a[k])).collect();
                    Summary::of(&vals)
                })
                .collect();
            GroupSummary {
                group: key,
                nme: Summary::of(&nme),
                armse,
            }
        })
        .collect()
}

/// Runs the protocol on every sample. A failing sample is recorded with its
/// error and left out of the aggregates.
pub fn benchmark(samples: &[EvalSample], config: &EvalConfig) -> Result<EvaluationReport> {
    config.validate()?;
    if samples.is_empty() {
        return Err(MorphError::Data("benchmark needs at least one sample".into()));
    }
    let results = map_range(samples.len(), |i| evaluate_sample(&samples[i], config));
    let metrics: Vec<SampleMetrics> = samples
        .iter()
        .zip(results)
        .map(|(s, r)| {
            let (nme, armse, error) = match r {
                Ok((n, a)) => (Some(n), Some(a), None),
                Err(e) => {
                    log::warn!("sample {} failed: {e}", s.id);
                    (None, None, Some(e.to_string()))
                }
            };
            SampleMetrics {
                id: s.id.clone(),
                attributes: s.attributes.clone(),
                nme,
                armse,
                error,
            }
        })
        .collect();
    let groups = aggregate(&metrics, config.radii.len(), &config.group_by);
    Ok(EvaluationReport {
        radii: config.radii.clone(),
        alignment: config.alignment,
        nme_mode: config.nme_mode,
        nme_normalizer: match config.bbox_size {
            Some(b) => format!("fixed:{b}"),
            None => "gt-landmark-bbox".into(),
        },
        samples: metrics,
        groups,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| MorphError::io(path, e))
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.12e}"))
}

fn slug(group: &str) -> String {
    group
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per sample: id, status, nme, armse per radius.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("id,status,nme");
        for r in &self.radii {
            let _ = write!(out, ",armse_r{r}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(
                out,
                "{},{},{}",
                s.id,
                if s.error.is_some() { "failed" } else { "ok" },
                num(s.nme)
            );
            for k in 0..self.radii.len() {
                let _ = write!(out, ",{}", num(s.armse.as_ref().map(|a| a[k])));
            }
            out.push('\n');
        }
        out
    }

    /// One row per group and radius.
    pub fn groups_csv(&self) -> String {
        let mut out =
            String::from("group,radius,count,armse_mean,armse_median,armse_std,nme_mean,nme_median,nme_std\n");
        for g in &self.groups {
            for (k, r) in self.radii.iter().enumerate() {
                let a = g.armse[k];
                let _ = writeln!(
                    out,
                    "{},{r},{},{},{},{},{},{},{}",
                    g.group,
                    a.map_or(0, |s| s.count),
                    num(a.map(|s| s.mean)),
                    num(a.map(|s| s.median)),
                    num(a.map(|s| s.std)),
                    num(g.nme.map(|s| s.mean)),
                    num(g.nme.map(|s| s.median)),
                    num(g.nme.map(|s| s.std)),
                );
            }
        }
        out
    }

    /// Writes `report.json`, `samples.csv`, `groups.csv`, one gnuplot data
    /// file per group (`curves/<group>.dat`: radius, ARMSE mean, NME mean)
    /// and `curves/plot.gp`. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let curves = dir.join("curves");
        std::fs::create_dir_all(&curves).map_err(|e| MorphError::io(&curves, e))?;
        let mut paths = Vec::new();
        for (name, text) in [
            ("report.json", self.to_json()),
            ("samples.csv", self.samples_csv()),
            ("groups.csv", self.groups_csv()),
        ] {
            let p = dir.join(name);
            write(&p, &text)?;
            paths.push(p);
        }
        let mut script = String::from("set xlabel 'crop radius r'\nset ylabel 'ARMSE'\nset key outside\nplot \\\n");
        for (i, g) in self.groups.iter().enumerate() {
            let file = format!("{}.dat", slug(&g.group));
            let mut dat = String::from("# radius armse_mean nme_mean\n");
            for (k, r) in self.radii.iter().enumerate() {
                let _ = writeln!(
                    dat,
                    "{r} {} {}",
                    g.armse[k].map_or("nan".into(), |s| format!("{:.12e}", s.mean)),
                    g.nme.map_or("nan".into(), |s| format!("{:.12e}", s.mean))
                );
            }
            let p = curves.join(&file);
            write(&p, &dat)?;
            paths.push(p);
            let sep = if i + 1 == self.groups.len() { "\n" } else { ", \\\n" };
            let _ = write!(script, "  '{file}' using 1:2 with linespoints title '{}'{sep}", g.group);
        }
        let p = curves.join("plot.gp");
        write(&p, &script)?;
        paths.push(p);
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_head, SyntheticHeadParams};

    fn sample(id: &str, band: &str, offset: f64) -> EvalSample {
        let h = generate_head(&SyntheticHeadParams {
            subdivisions: 3,
            ..SyntheticHeadParams::default()
        })
        .unwrap();
        let pred = h
            .mesh
            .with_vertices(h.mesh.vertices().iter().map(|v| v * (1.0 + offset)).collect())
            .unwrap();
        EvalSample {
            id: id.into(),
            prediction: pred,
            prediction_landmarks: h.landmarks.clone(),
            ground_truth: h.mesh.clone(),
            ground_truth_landmarks: h.landmarks.clone(),
            attributes: [("age_band".to_string(), band.to_string())].into(),
        }
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let r = benchmark(
            &[sample("a", "18-30", 0.0), sample("b", "61+", 0.0)],
            &EvalConfig::default(),
        )
        .unwrap();
        for s in &r.samples {
            assert!(s.nme.unwrap() < 1e-12);
            assert!(s.armse.as_ref().unwrap().iter().all(|v| *v < 1e-12));
        }
        assert_eq!(r.groups[0].group, "all");
        assert_eq!(r.groups.len(), 3);
    }

    #[test]
    fn failed_sample_is_isolated() {
        let mut bad = sample("bad", "18-30", 0.0);
        // far-away prediction landmarks map the mesh outside every crop
        bad.prediction = bad.prediction.translated(&crate::mesh::Vec3::new(100.0, 0.0, 0.0));
        let r = benchmark(&[sample("ok", "18-30", 0.01), bad], &EvalConfig::default()).unwrap();
        assert!(r.samples[1].error.is_some());
        assert_eq!(r.groups[0].nme.unwrap().count, 1);
        assert_eq!(
            r.groups[0].armse[0].unwrap().mean,
            r.samples[0].armse.as_ref().unwrap()[0]
        );
    }

    #[test]
    fn aggregates_match_two_sample_arithmetic() {
        let r = benchmark(
            &[sample("a", "x", 0.01), sample("b", "x", 0.03)],
            &EvalConfig::default(),
        )
        .unwrap();
        let (a, b) = (&r.samples[0], &r.samples[1]);
        for k in 0..r.radii.len() {
            let (x, y) = (a.armse.as_ref().unwrap()[k], b.armse.as_ref().unwrap()[k]);
            let s = r.groups[0].armse[k].unwrap();
            assert_eq!(s.mean, (x + y) / 2.0);
            assert_eq!(s.median, 0.5 * (x.min(y) + x.max(y)));
        }
        assert_eq!(
            aggregate(&r.samples, r.radii.len(), &EvalConfig::default().group_by),
            r.groups
        );
    }

    #[test]
    fn invalid_radii_are_rejected() {
        let c = EvalConfig {
            radii: vec![0.8, 0.6],
            ..EvalConfig::default()
        };
        assert!(matches!(
            benchmark(&[sample("a", "x", 0.0)], &c),
            Err(MorphError::Parameter(_))
        ));
    }

    #[test]
    fn files_are_written() {
        let r = benchmark(&[sample("a", "18-30", 0.02)], &EvalConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = r.write(dir.path()).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        let back: EvaluationReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
