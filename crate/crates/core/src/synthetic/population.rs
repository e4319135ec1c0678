use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::head::{
    angle, displace_radially, generate_head, unit, Bump, ExpressionMode, SyntheticHead, SyntheticHeadParams,
};
use super::scan::{simulate_scan, ScanSimParams};
use crate::error::{MorphError, Result};
use crate::fusion::RigidTransform;
use crate::mesh::{save_mesh, save_point_cloud, MeshFormat, Vec3};
use crate::registration::PartSegmentation;

/// Radial shape modes; subject `s` gets `Σ_k z_sk · mode_k(u)` on top of the
/// base head, so centred neutral shapes span exactly the first
/// `latent_modes` fields.
pub fn shape_mode(k: usize, u: &Vec3) -> f64 {
    let b = |d: [f64; 3], w: f64| Bump::profile(angle(u, &unit(d)), w);
    match k {
        0 => u.x * u.x,
        1 => u.y * u.y,
        2 => b([0.0, 0.0, 1.0], 0.45),
        3 => b([0.0, -0.7, 0.7], 0.5),
        4 => b([0.35, 0.45, 0.82], 0.35) + b([-0.35, 0.45, 0.82], 0.35),
        5 => b([0.6, 0.0, 0.8], 0.5) + b([-0.6, 0.0, 0.8], 0.5),
        _ => panic!("shape mode {k} is not defined"),
    }
}

pub const SHAPE_MODES: usize = 6;

const AGE_BANDS: [&str; 4] = ["18-30", "31-45", "46-60", "61+"];
const GENDERS: [&str; 2] = ["female", "male"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationParams {
    pub n_subjects: usize,
    /// Samples per subject, the first being neutral.
    pub n_expressions: usize,
    pub latent_modes: usize,
    /// Standard deviation of the first latent coefficient.
    pub mode_scale: f64,
    /// Ratio between successive latent standard deviations.
    pub mode_decay: f64,
    /// Standard deviation of expression weights.
    pub expression_scale: f64,
    pub head: SyntheticHeadParams,
    pub seed: u64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            n_subjects: 5,
            n_expressions: 3,
            latent_modes: 3,
            mode_scale: 0.06,
            mode_decay: 0.7,
            expression_scale: 0.05,
            head: SyntheticHeadParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub expression: usize,
    pub category: String,
    pub head: SyntheticHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub latent: Vec<f64>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Base head with zero latent coefficients and no expression.
    pub template: SyntheticHead,
    pub subjects: Vec<Subject>,
    /// Expression weights over [`ExpressionMode::ALL`]; row 0 is neutral.
    pub expression_weights: Vec<Vec<f64>>,
}

/// Category of expression `index` with the given mode weights: neutral for
/// index 0, otherwise positive when the smile weight is positive.
pub fn expression_category(index: usize, weights: &[f64]) -> &'static str {
    let smile = ExpressionMode::ALL
        .iter()
        .position(|m| *m == ExpressionMode::Smile)
        .expect("smile mode");
    if index == 0 {
        "neutral"
    } else if weights[smile] > 0.0 {
        "positive"
    } else {
        "negative"
    }
}

pub fn generate_population(params: &PopulationParams) -> Result<Population> {
    if params.n_subjects < 2 {
        return Err(MorphError::Parameter("a population needs at least 2 subjects".into()));
    }
    if params.n_expressions < 1 {
        return Err(MorphError::Parameter(
            "n_expressions counts the neutral sample and must be >= 1".into(),
        ));
    }
    if params.latent_modes < 1 || params.latent_modes > SHAPE_MODES {
        return Err(MorphError::Parameter(format!(
            "latent_modes must lie in 1..={SHAPE_MODES}"
        )));
    }
    if !(params.mode_scale > 0.0 && params.mode_decay > 0.0 && params.expression_scale >= 0.0) {
        return Err(MorphError::Parameter("population scales must be positive".into()));
    }
    let base = SyntheticHeadParams {
        expression: Vec::new(),
        ..params.head.clone()
    };
    let template = generate_head(&base)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut expression_weights = vec![vec![0.0; ExpressionMode::ALL.len()]];
    for _ in 1..params.n_expressions {
        expression_weights.push(
            (0..ExpressionMode::ALL.len())
                .map(|_| params.expression_scale * unit_normal.sample(&mut rng))
                .collect(),
        );
    }

    let mut subjects = Vec::with_capacity(params.n_subjects);
    for s in 0..params.n_subjects {
        let latent: Vec<f64> = (0..params.latent_modes)
            .map(|k| params.mode_scale * params.mode_decay.powi(k as i32) * unit_normal.sample(&mut rng))
            .collect();
        let mut attributes = BTreeMap::new();
        attributes.insert(
            "age_band".to_string(),
            AGE_BANDS[rng.random_range(0..AGE_BANDS.len())].to_string(),
        );
        attributes.insert(
            "gender".to_string(),
            GENDERS[rng.random_range(0..GENDERS.len())].to_string(),
        );

        let mut samples = Vec::with_capacity(params.n_expressions);
        for (e, w) in expression_weights.iter().enumerate() {
            let head = displace_radially(&template, |u| {
                let shape: f64 = latent.iter().enumerate().map(|(k, z)| z * shape_mode(k, u)).sum();
                let expr: f64 = ExpressionMode::ALL.iter().zip(w).map(|(m, w)| w * m.field(u)).sum();
                shape + expr
            })?;
            samples.push(Sample {
                expression: e,
                category: expression_category(e, w).to_string(),
                head,
            });
        }
        subjects.push(Subject {
            id: format!("s{s:03}"),
            attributes,
            latent,
            samples,
        });
    }
    Ok(Population {
        template,
        subjects,
        expression_weights,
    })
}

/// Face-part labels for a synthetic head, from vertex directions.
pub fn head_parts(head: &SyntheticHead) -> PartSegmentation {
    let parts = PartSegmentation::default_parts();
    let id = |name: &str| parts.iter().position(|p| p.id == name).expect("default part");
    let (nose, eyes, mouth, forehead, cheek, boundary) = (
        id("nose"),
        id("eyes"),
        id("mouth"),
        id("forehead"),
        id("cheek"),
        id("boundary"),
    );
    let near = |u: &Vec3, d: [f64; 3], w: f64| angle(u, &unit(d)) < w;
    let labels = head
        .directions
        .iter()
        .map(|u| {
            if near(u, [0.0, 0.0, 1.0], 0.3) {
                nose
            } else if near(u, [0.35, 0.22, 0.9], 0.2) || near(u, [-0.35, 0.22, 0.9], 0.2) {
                eyes
            } else if near(u, [0.0, -0.38, 0.92], 0.32) {
                mouth
            } else if u.z > 0.2 && u.y > 0.35 {
                forehead
            } else if u.z > 0.25 {
                cheek
            } else {
                boundary
            }
        })
        .collect();
    PartSegmentation::new(parts, labels, None).expect("labels index default parts")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub tag: String,
    pub cloud_path: String,
    pub landmarks_path: String,
    pub landmarks_2d_path: String,
    pub camera_path: String,
    /// Exact view-to-world transform, for oracle checks only.
    pub ground_truth_to_world: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub expression: usize,
    pub category: String,
    pub mesh_path: String,
    pub landmarks_path: String,
    pub views: Vec<ManifestView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub samples: Vec<ManifestSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTemplate {
    pub mesh_path: String,
    pub landmarks_path: String,
    pub parts_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub template: ManifestTemplate,
    pub subjects: Vec<ManifestSubject>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| MorphError::format("manifest", path.display(), e))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MorphError::io(path, e))
}

/// Writes meshes, landmarks, part labels and (with `scan`) simulated views
/// under `dir`, plus `manifest.json` with paths relative to `dir`.
pub fn write_population(
    pop: &Population,
    dir: &Path,
    format: MeshFormat,
    scan: Option<&ScanSimParams>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| MorphError::io(dir, e))?;
    let ext = format.extension();
    let template = ManifestTemplate {
        mesh_path: format!("template.{ext}"),
        landmarks_path: "template.landmarks.json".into(),
        parts_path: "template.parts.json".into(),
    };
    save_mesh(&pop.template.mesh, &dir.join(&template.mesh_path), format)?;
    pop.template.landmarks.save(&dir.join(&template.landmarks_path))?;
    write_text(&dir.join(&template.parts_path), &head_parts(&pop.template).to_json())?;

    let mut subjects = Vec::with_capacity(pop.subjects.len());
    for (si, subject) in pop.subjects.iter().enumerate() {
        let rel = format!("subjects/{}", subject.id);
        let sdir = dir.join(&rel);
        fs::create_dir_all(&sdir).map_err(|e| MorphError::io(&sdir, e))?;
        let mut samples = Vec::new();
        for sample in &subject.samples {
            let stem = format!("{rel}/e{}", sample.expression);
            let mesh_path = format!("{stem}.{ext}");
            let landmarks_path = format!("{stem}.landmarks.json");
            save_mesh(&sample.head.mesh, &dir.join(&mesh_path), format)?;
            sample.head.landmarks.save(&dir.join(&landmarks_path))?;
            let mut views = Vec::new();
            if let Some(sp) = scan {
                let params = ScanSimParams {
                    seed: sp.seed ^ ((si as u64) << 32) ^ sample.expression as u64,
                    ..sp.clone()
                };
                for v in simulate_scan(&sample.head.mesh, &sample.head.landmarks, &params)? {
                    let tag = serde_json::to_value(v.tag)
                        .ok()
                        .and_then(|t| t.as_str().map(str::to_string))
                        .expect("view tags serialise to strings");
                    let vstem = format!("{stem}.{tag}");
                    let view = ManifestView {
                        cloud_path: format!("{vstem}.ply"),
                        landmarks_path: format!("{vstem}.landmarks.json"),
                        landmarks_2d_path: format!("{vstem}.landmarks2d.json"),
                        camera_path: format!("{vstem}.camera.json"),
                        ground_truth_to_world: v.to_world,
                        tag,
                    };
                    save_point_cloud(&v.cloud, &dir.join(&view.cloud_path), true)?;
                    v.landmarks.save(&dir.join(&view.landmarks_path))?;
                    v.landmarks_2d.save(&dir.join(&view.landmarks_2d_path))?;
                    let cam = serde_json::to_string_pretty(&v.camera).expect("camera serialises");
                    write_text(&dir.join(&view.camera_path), &cam)?;
                    views.push(view);
                }
            }
            samples.push(ManifestSample {
                expression: sample.expression,
                category: sample.category.clone(),
                mesh_path,
                landmarks_path,
                views,
            });
        }
        subjects.push(ManifestSubject {
            id: subject.id.clone(),
            attributes: subject.attributes.clone(),
            samples,
        });
    }
    let manifest = Manifest { template, subjects };
    let path = dir.join("manifest.json");
    write_text(
        &path,
        &serde_json::to_string_pretty(&manifest).expect("manifest serialises"),
    )?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn small(seed: u64) -> PopulationParams {
        PopulationParams {
            n_subjects: 2,
            n_expressions: 1,
            head: SyntheticHeadParams {
                subdivisions: 3,
                ..SyntheticHeadParams::default()
            },
            seed,
            ..PopulationParams::default()
        }
    }

    #[test]
    fn smallest_population_writes_two_entries() {
        let dir = tempfile::tempdir().unwrap();
        let pop = generate_population(&small(1)).unwrap();
        let path = write_population(&pop, dir.path(), MeshFormat::Obj, None).unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.subjects.len(), 2);
        assert!(m
            .subjects
            .iter()
            .all(|s| s.samples.len() == 1 && s.samples[0].category == "neutral"));
        assert!(dir.path().join(&m.subjects[1].samples[0].mesh_path).exists());
    }

    #[test]
    fn same_seed_same_manifest() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let scan = ScanSimParams::default();
        let params = PopulationParams {
            n_expressions: 2,
            ..small(5)
        };
        let pa = write_population(
            &generate_population(&params).unwrap(),
            a.path(),
            MeshFormat::PlyBinary,
            Some(&scan),
        )
        .unwrap();
        let pb = write_population(
            &generate_population(&params).unwrap(),
            b.path(),
            MeshFormat::PlyBinary,
            Some(&scan),
        )
        .unwrap();
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        let m = Manifest::load(&a.path().join("manifest.json")).unwrap();
        let mesh = &m.subjects[0].samples[1].mesh_path;
        assert_eq!(
            fs::read(a.path().join(mesh)).unwrap(),
            fs::read(b.path().join(mesh)).unwrap()
        );
    }

    #[test]
    fn neutral_shapes_span_latent_dimension() {
        for k in [1, 3, 5] {
            let params = PopulationParams {
                n_subjects: 12,
                latent_modes: k,
                ..small(k as u64)
            };
            let pop = generate_population(&params).unwrap();
            let rows: Vec<Vec<f64>> = pop
                .subjects
                .iter()
                .map(|s| {
                    s.samples[0]
                        .head
                        .mesh
                        .vertices()
                        .iter()
                        .flat_map(|v| [v.x, v.y, v.z])
                        .collect()
                })
                .collect();
            let n = rows.len();
            let d = rows[0].len();
            let mut m = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
            let mean = m.row_mean();
            for mut r in m.row_iter_mut() {
                r -= &mean;
            }
            let sv = m.singular_values();
            let rank = sv.iter().filter(|s| **s > 1e-9 * sv[0]).count();
            assert_eq!(rank, k);
        }
    }

    #[test]
    fn parts_cover_every_vertex() {
        let pop = generate_population(&small(2)).unwrap();
        let parts = head_parts(&pop.template);
        assert_eq!(parts.vertex_count(), pop.template.mesh.vertex_count());
        let nose = parts.part_of(pop.template.landmarks.get(2).unwrap().vertex.unwrap());
        assert_eq!(parts.parts()[nose].id, "nose");
    }
}
