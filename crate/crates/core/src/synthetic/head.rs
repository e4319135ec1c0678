use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::mesh::{Landmark, LandmarkScheme, LandmarkSet3, TriMesh, Vec3};

/// Compact radial bump `a·(1 − (θ/w)²)³` for angular distance `θ < w` from
/// its centre direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub name: String,
    pub direction: [f64; 3],
    pub amplitude: f64,
    /// Angular half-width in radians.
    pub width: f64,
}

impl Bump {
    pub fn new(name: &str, direction: [f64; 3], amplitude: f64, width: f64) -> Self {
        Self {
            name: name.into(),
            direction,
            amplitude,
            width,
        }
    }

    pub fn profile(theta: f64, width: f64) -> f64 {
        if theta >= width {
            0.0
        } else {
            let t = theta / width;
            (1.0 - t * t).powi(3)
        }
    }
}

/// Fixed radial displacement patterns used for synthetic expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpressionMode {
    JawDrop,
    Smile,
    BrowRaise,
    CheekPuff,
}

impl ExpressionMode {
    pub const ALL: [ExpressionMode; 4] = [
        ExpressionMode::JawDrop,
        ExpressionMode::Smile,
        ExpressionMode::BrowRaise,
        ExpressionMode::CheekPuff,
    ];

    /// Unit-magnitude radial displacement at direction `u`.
    pub fn field(self, u: &Vec3) -> f64 {
        let b = |d: [f64; 3], w: f64| Bump::profile(angle(u, &unit(d)), w);
        match self {
            ExpressionMode::JawDrop => b([0.0, -0.7, 0.7], 0.6) - 0.5 * b([0.0, -0.33, 0.94], 0.3),
            ExpressionMode::Smile => b([0.25, -0.4, 0.88], 0.35) + b([-0.25, -0.4, 0.88], 0.35),
            ExpressionMode::BrowRaise => b([0.35, 0.45, 0.82], 0.4) + b([-0.35, 0.45, 0.82], 0.4),
            ExpressionMode::CheekPuff => b([0.6, -0.1, 0.8], 0.5) + b([-0.6, -0.1, 0.8], 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticHeadParams {
    /// Ellipsoid semi-axes along x (width), y (height), z (depth).
    pub radii: [f64; 3],
    pub bumps: Vec<Bump>,
    /// Weighted expression fields added radially.
    pub expression: Vec<(ExpressionMode, f64)>,
    /// Icosphere subdivision level; vertex count is `10·4^level + 2`.
    pub subdivisions: u32,
    /// Relative Gaussian jitter of bump amplitudes, drawn from `seed`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticHeadParams {
    fn default() -> Self {
        Self {
            radii: [0.8, 1.0, 0.9],
            bumps: default_bumps(),
            expression: Vec::new(),
            subdivisions: 4,
            jitter: 0.0,
            seed: 0,
        }
    }
}

pub fn default_bumps() -> Vec<Bump> {
    vec![
        Bump::new("nose", NOSE, 0.25, 0.35),
        Bump::new("left-brow", [0.35, 0.45, 0.82], 0.06, 0.3),
        Bump::new("right-brow", [-0.35, 0.45, 0.82], 0.06, 0.3),
        Bump::new("left-eye", [0.35, 0.22, 0.9], -0.05, 0.18),
        Bump::new("right-eye", [-0.35, 0.22, 0.9], -0.05, 0.18),
        Bump::new("lips", [0.0, -0.36, 0.93], 0.04, 0.25),
        Bump::new("chin", [0.0, -0.7, 0.7], 0.08, 0.4),
        Bump::new("left-cheek", [0.6, 0.0, 0.8], 0.04, 0.4),
        Bump::new("right-cheek", [-0.6, 0.0, 0.8], 0.04, 0.4),
    ]
}

const NOSE: [f64; 3] = [0.0, 0.0, 1.0];

/// Landmark ids and canonical directions. The subject faces +z with +y up,
/// so the subject's left is +x.
pub const LANDMARKS: [(u32, &str, [f64; 3]); 13] = [
    (0, "left-eye", [0.35, 0.22, 0.9]),
    (1, "right-eye", [-0.35, 0.22, 0.9]),
    (2, "nose-tip", NOSE),
    (3, "left-mouth", [0.25, -0.4, 0.88]),
    (4, "right-mouth", [-0.25, -0.4, 0.88]),
    (5, "upper-lip", [0.0, -0.3, 0.95]),
    (6, "chin", [0.0, -0.7, 0.7]),
    (7, "left-brow", [0.35, 0.45, 0.82]),
    (8, "right-brow", [-0.35, 0.45, 0.82]),
    (9, "left-jaw", [0.7, -0.5, 0.5]),
    (10, "right-jaw", [-0.7, -0.5, 0.5]),
    (11, "left-cheek", [0.6, 0.0, 0.8]),
    (12, "right-cheek", [-0.6, 0.0, 0.8]),
];

pub fn landmark_scheme() -> LandmarkScheme {
    LandmarkScheme {
        id: "synthetic-13".into(),
        left_eye: 0,
        right_eye: 1,
        nose_tip: 2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHead {
    pub mesh: TriMesh,
    pub landmarks: LandmarkSet3,
    /// Unit direction of every vertex on the undeformed sphere.
    pub directions: Vec<Vec3>,
}

pub(crate) fn unit(d: [f64; 3]) -> Vec3 {
    Vec3::new(d[0], d[1], d[2]).normalize()
}

pub(crate) fn angle(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 form stays accurate for nearly parallel directions
    a.cross(b).norm().atan2(a.dot(b))
}

/// Unit icosphere: vertex directions and outward-oriented faces.
pub fn icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|&d| unit(d))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Index of the direction closest to `d`; ties go to the lowest index.
pub(crate) fn snap(directions: &[Vec3], d: &Vec3) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, u) in directions.iter().enumerate() {
        let dot = u.dot(d);
        if dot > best_dot {
            best_dot = dot;
            best = i;
        }
    }
    best
}

/// Radius of the ellipsoid with semi-axes `r` along unit direction `u`.
pub fn ellipsoid_radius(r: &[f64; 3], u: &Vec3) -> f64 {
    1.0 / ((u.x / r[0]).powi(2) + (u.y / r[1]).powi(2) + (u.z / r[2]).powi(2)).sqrt()
}

impl SyntheticHeadParams {
    pub fn validate(&self) -> Result<()> {
        if !self.radii.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(MorphError::Parameter("ellipsoid radii must be positive".into()));
        }
        if self.subdivisions < 1 {
            return Err(MorphError::Parameter("subdivision level must be at least 1".into()));
        }
        if self.subdivisions > 7 {
            return Err(MorphError::Parameter(
                "subdivision level above 7 is not supported".into(),
            ));
        }
        for b in &self.bumps {
            if !(b.width > 0.0 && b.width <= std::f64::consts::PI) || !b.amplitude.is_finite() {
                return Err(MorphError::Parameter(format!("bump {} has an invalid shape", b.name)));
            }
            if Vec3::from(b.direction).norm() == 0.0 {
                return Err(MorphError::Parameter(format!("bump {} has no direction", b.name)));
            }
        }
        if !(self.jitter >= 0.0) {
            return Err(MorphError::Parameter("jitter must be non-negative".into()));
        }
        Ok(())
    }
}

/// Radial offset of direction `u` over the base ellipsoid contributed by
/// bumps centred at the given (snapped) directions.
fn bump_offset(u: &Vec3, bumps: &[(Vec3, f64, f64)]) -> f64 {
    bumps.iter().map(|(c, a, w)| a * Bump::profile(angle(u, c), *w)).sum()
}

/// Builds a head: an icosphere pushed onto an ellipsoid, with radial feature
/// bumps and expression fields. Bumps and landmarks are centred on mesh
/// vertices, so a bump's peak displacement is attained exactly.
pub fn generate_head(params: &SyntheticHeadParams) -> Result<SyntheticHead> {
    params.validate()?;
    let (dirs, faces) = icosphere(params.subdivisions);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let bumps: Vec<(Vec3, f64, f64)> = params
        .bumps
        .iter()
        .map(|b| {
            let centre = dirs[snap(&dirs, &unit(b.direction))];
            let scale = if params.jitter > 0.0 {
                1.0 + params.jitter * normal.sample(&mut rng)
            } else {
                1.0
            };
            (centre, b.amplitude * scale, b.width)
        })
        .collect();

    let vertices: Vec<Vec3> = dirs
        .iter()
        .map(|u| {
            let expr: f64 = params.expression.iter().map(|(m, w)| w * m.field(u)).sum();
            u * (ellipsoid_radius(&params.radii, u) + bump_offset(u, &bumps) + expr)
        })
        .collect();
    if vertices.iter().zip(&dirs).any(|(v, u)| v.dot(u) <= 0.0) {
        return Err(MorphError::Parameter(
            "bumps or expressions fold the surface through the centre".into(),
        ));
    }

    let mut used = HashMap::new();
    let mut entries = Vec::with_capacity(LANDMARKS.len());
    for (id, name, d) in LANDMARKS {
        let v = snap(&dirs, &unit(d));
        if let Some(other) = used.insert(v, name) {
            return Err(MorphError::Parameter(format!(
                "subdivision level {} too coarse: landmarks {other} and {name} share vertex {v}",
                params.subdivisions
            )));
        }
        entries.push(Landmark {
            id,
            position: vertices[v],
            vertex: Some(v),
        });
    }
    let landmarks = LandmarkSet3::new(landmark_scheme(), entries)?;
    let mesh = TriMesh::new(vertices, faces)?;
    Ok(SyntheticHead {
        mesh,
        landmarks,
        directions: dirs,
    })
}

/// Displaces a head along its vertex directions; landmarks follow their
/// vertices.
pub fn displace_radially(head: &SyntheticHead, offset: impl Fn(&Vec3) -> f64) -> Result<SyntheticHead> {
    let vertices: Vec<Vec3> = head
        .mesh
        .vertices()
        .iter()
        .zip(&head.directions)
        .map(|(v, u)| v + u * offset(u))
        .collect();
    let landmarks = relocate_landmarks(&head.landmarks, &vertices);
    Ok(SyntheticHead {
        mesh: head.mesh.with_vertices(vertices)?,
        landmarks,
        directions: head.directions.clone(),
    })
}

/// Moves vertex landmarks onto new vertex positions.
pub fn relocate_landmarks(lms: &LandmarkSet3, vertices: &[Vec3]) -> LandmarkSet3 {
    let entries = lms
        .entries()
        .iter()
        .map(|e| Landmark {
            id: e.id,
            position: e.vertex.map_or(e.position, |v| vertices[v]),
            vertex: e.vertex,
        })
        .collect();
    LandmarkSet3::new(lms.scheme().clone(), entries).expect("ids stay unique")
}
