//! Pinhole projection, 2D-to-3D landmark retrieval and z-buffer depth images.
//!
//! Camera frame: x right, y down, z forward. A world point `p` maps to the
//! camera frame through the extrinsics and then to pixel
//! `(fx·X/Z + cx, fy·Y/Z + cy)`. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{MorphError, Result};
use crate::fusion::RigidTransform;
use crate::mesh::{Landmark, LandmarkSet2, LandmarkSet3, PointCloud, SpatialIndex, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World to camera.
    pub extrinsics: RigidTransform,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        extrinsics: RigidTransform,
    ) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            extrinsics,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` projecting to image-up.
    /// The principal point sits at the image centre.
    pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3, focal: f64, width: u32, height: u32) -> Result<Self> {
        let forward = target - eye;
        let right = forward.cross(up);
        if forward.norm() == 0.0 || right.norm() == 0.0 {
            return Err(MorphError::Parameter(
                "look_at needs distinct eye/target and an up vector off the view axis".into(),
            ));
        }
        let f = forward.normalize();
        let r = right.normalize();
        let d = f.cross(&r);
        let rotation = Matrix3::from_rows(&[r.transpose(), d.transpose(), f.transpose()]);
        let extrinsics = RigidTransform::from_parts(rotation, -(rotation * eye), 1.0)?;
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            extrinsics,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(MorphError::Parameter("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(MorphError::Parameter(format!(
                "principal point ({}, {}) outside a {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Camera-frame position of a world point.
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.extrinsics.apply(p)
    }

    /// Pixel position and depth of a world point if it lies in front of the
    /// camera and inside the image.
    pub fn project(&self, p: &Vec3) -> Option<(Vector2<f64>, f64)> {
        let c = self.to_camera(p);
        if !(c.z > 0.0) {
            return None;
        }
        let u = self.fx * c.x / c.z + self.cx;
        let v = self.fy * c.y / c.z + self.cy;
        let inside = u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64;
        inside.then(|| (Vector2::new(u, v), c.z))
    }

    /// Camera-frame centre expressed in world coordinates.
    pub fn centre(&self) -> Vec3 {
        self.extrinsics.inverse().apply(&Vec3::zeros())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub vertex: usize,
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

/// Projections of every visible vertex, in vertex order.
pub fn project_vertices(cloud: &PointCloud, cam: &Camera) -> Result<Vec<Projection>> {
    cam.validate()?;
    Ok(cloud
        .points()
        .iter()
        .enumerate()
        .filter_map(|(vertex, p)| cam.project(p).map(|(pixel, depth)| Projection { vertex, pixel, depth }))
        .collect())
}

/// Lifts 2D landmarks to the cloud vertex whose projection is nearest in
/// pixel space. Ties go to the lowest vertex index. Ids are preserved and the
/// returned positions are the cloud's own coordinates.
pub fn retrieve_3d_landmarks(cloud: &PointCloud, cam: &Camera, lms2d: &LandmarkSet2) -> Result<LandmarkSet3> {
    let proj = project_vertices(cloud, cam)?;
    if proj.is_empty() {
        return Err(MorphError::EmptyProjection);
    }
    // projections are in vertex order, so index ties resolve to the lower vertex
    let flat: Vec<Vec3> = proj.iter().map(|p| Vec3::new(p.pixel.x, p.pixel.y, 0.0)).collect();
    let index = SpatialIndex::new(&flat);
    let mut entries = Vec::with_capacity(lms2d.len());
    for lm in lms2d.entries() {
        let (k, _) = index.nearest(&Vec3::new(lm.position.x, lm.position.y, 0.0))?;
        let vertex = proj[k].vertex;
        entries.push(Landmark {
            id: lm.id,
            position: cloud.points()[vertex],
            vertex: Some(vertex),
        });
    }
    LandmarkSet3::new(lms2d.scheme().clone(), entries)
}

/// Per-pixel camera depth. Uncovered pixels hold the sentinel `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    /// Row-major, row 0 at the top.
    depth: Vec<f64>,
}

impl DepthImage {
    pub const SENTINEL: f64 = 0.0;

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            depth: vec![Self::SENTINEL; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        let d = self.depth[y as usize * self.width as usize + x as usize];
        (d != Self::SENTINEL).then_some(d)
    }

    pub fn covered(&self) -> usize {
        self.depth.iter().filter(|&&d| d != Self::SENTINEL).count()
    }

    pub fn max_depth(&self) -> f64 {
        self.depth.iter().copied().fold(0.0, f64::max)
    }

    /// Writes a little-endian PFM (`Pf`, negative scale, rows bottom-up).
    pub fn save_pfm(&self, path: &Path) -> Result<()> {
        let mut buf = format!("Pf\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        for row in (0..self.height as usize).rev() {
            let start = row * self.width as usize;
            for d in &self.depth[start..start + self.width as usize] {
                buf.extend_from_slice(&(*d as f32).to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|e| MorphError::io(path, e))
    }

    pub fn load_pfm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| MorphError::io(path, e))?;
        let mut fields = Vec::new();
        let mut pos = 0;
        // three whitespace-delimited header tokens lines: magic, size, scale
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(MorphError::format("pfm", format!("byte {pos}"), "truncated header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "Pf" {
            return Err(MorphError::format(
                "pfm",
                "byte 0",
                format!("expected Pf, found {}", fields[0]),
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<u32>()
                .map_err(|_| MorphError::format("pfm", "header", format!("bad {what} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let scale: f64 = fields[3]
            .parse()
            .map_err(|_| MorphError::format("pfm", "header", format!("bad scale {:?}", fields[3])))?;
        let n = width as usize * height as usize;
        if bytes.len() < pos + 4 * n {
            return Err(MorphError::format("pfm", format!("byte {pos}"), "truncated pixel data"));
        }
        let mut depth = vec![0.0; n];
        for row in 0..height as usize {
            for col in 0..width as usize {
                let k = pos + 4 * (row * width as usize + col);
                let raw = [bytes[k], bytes[k + 1], bytes[k + 2], bytes[k + 3]];
                let v = if scale < 0.0 {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                depth[(height as usize - 1 - row) * width as usize + col] = v as f64;
            }
        }
        Ok(Self { width, height, depth })
    }

    /// Writes a 16-bit binary PGM with `value = round(depth / depth_scale)`
    /// and a sidecar `<path>.json` recording the scale. Without an explicit
    /// scale the deepest pixel maps to 65535.
    pub fn save_pgm16(&self, path: &Path, depth_scale: Option<f64>) -> Result<f64> {
        let scale = match depth_scale {
            Some(s) if s > 0.0 => s,
            Some(s) => return Err(MorphError::Parameter(format!("depth scale must be positive, got {s}"))),
            None => (self.max_depth() / 65535.0).max(f64::MIN_POSITIVE),
        };
        let mut buf = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for d in &self.depth {
            let q = (d / scale).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&q.to_be_bytes());
        }
        fs::write(path, buf).map_err(|e| MorphError::io(path, e))?;
        let sidecar = sidecar_path(path);
        let meta = serde_json::json!({ "depth_scale": scale, "sentinel": 0 });
        let mut f = fs::File::create(&sidecar).map_err(|e| MorphError::io(&sidecar, e))?;
        writeln!(f, "{meta}").map_err(|e| MorphError::io(&sidecar, e))?;
        Ok(scale)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Point-splat z-buffer: each covered pixel keeps the smallest depth among the
/// points landing in it.
pub fn render_depth(cloud: &PointCloud, cam: &Camera) -> Result<DepthImage> {
    cam.validate()?;
    let mut img = DepthImage::empty(cam.width, cam.height);
    for p in cloud.points() {
        if let Some((px, z)) = cam.project(p) {
            let k = px.y.floor() as usize * cam.width as usize + px.x.floor() as usize;
            let slot = &mut img.depth[k];
            if *slot == DepthImage::SENTINEL || z < *slot {
                *slot = z;
            }
        }
    }
    Ok(img)
}
