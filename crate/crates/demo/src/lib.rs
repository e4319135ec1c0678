//! Browser demo of three morphkit operations on synthetic heads.
//!
//! The plain functions are ordinary Rust and are tested natively; the
//! `#[wasm_bindgen]` wrappers below only convert errors to strings.

use morphkit::eval::{align_prediction, armse, normalize_interocular, to_nose_frame, AlignMode};
use morphkit::projection::{render_depth, Camera};
use morphkit::registration::{build_stiffness_edges, nicp_register, NicpParams};
use morphkit::synthetic::{displace_radially, generate_head, head_parts, shape_mode, Bump, SyntheticHeadParams};
use morphkit::{PointCloud, Result, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::*;

const CAMERA_DISTANCE: f64 = 4.0;
/// Surface samples per projected square pixel.
const SAMPLE_DENSITY: f64 = 3.0;
const BUMP_CENTRE: [f64; 3] = [0.6, 0.0, 0.8];
const BUMP_WIDTH: f64 = 0.7;
/// Stiffness radius as a fraction of the bounding-box diagonal; the coarse
/// demo head needs more than the library default to stay connected.
const DEMO_RADIUS_FRACTION: f64 = 0.08;

fn angle(u: &Vec3, c: &Vec3) -> f64 {
    u.normalize().dot(&c.normalize()).clamp(-1.0, 1.0).acos()
}

/// Greyscale depth render. `rgba` is row-major with row 0 at the top;
/// nearer surface is brighter and empty pixels are black.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
    pub covered: usize,
    pub near: f64,
    pub far: f64,
}

/// Renders the default head from `azimuth_deg` around the vertical axis.
/// Camera-facing faces are sampled at a fixed density per pixel and
/// perturbed by Gaussian noise of standard deviation `noise` per axis.
pub fn depth_frame(azimuth_deg: f64, noise: f64, seed: u64, size: u32) -> Result<DepthFrame> {
    if !(noise >= 0.0) || size < 8 {
        return Err(morphkit::MorphError::Parameter(
            "noise must be >= 0 and size >= 8".into(),
        ));
    }
    let head = generate_head(&SyntheticHeadParams::default())?;
    let v = head.mesh.vertices();
    let az = azimuth_deg.to_radians();
    let eye = Vec3::new(az.sin(), 0.0, az.cos()) * CAMERA_DISTANCE;
    let focal = size as f64 * 1.6;
    let cam = Camera::look_at(&eye, &Vec3::zeros(), &Vec3::y(), focal, size, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("noise validated above");
    let mut points = Vec::new();
    for f in head.mesh.faces() {
        let (e0, e1) = (v[f[1]] - v[f[0]], v[f[2]] - v[f[0]]);
        let n = e0.cross(&e1);
        let to_eye = eye - v[f[0]];
        // back faces would leak through gaps between front samples
        if n.dot(&to_eye) <= 0.0 {
            continue;
        }
        let pixel_area = 0.5 * n.norm() * (focal / to_eye.norm()).powi(2);
        let count = (SAMPLE_DENSITY * pixel_area).ceil() as usize;
        for _ in 0..count {
            let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                (a, b) = (1.0 - a, 1.0 - b);
            }
            let e = Vec3::new(
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
            );
            points.push(v[f[0]] + e0 * a + e1 * b + e);
        }
    }
    let depth = render_depth(&PointCloud::new(points), &cam)?;

    let hits = depth.values().iter().copied().filter(|&z| z > 0.0);
    let (near, far) = hits.fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z), hi.max(z)));
    let span = (far - near).max(1e-12);
    let mut rgba = Vec::with_capacity(depth.values().len() * 4);
    for &z in depth.values() {
        let g = if z > 0.0 {
            (255.0 - 200.0 * (z - near) / span).round() as u8
        } else {
            0
        };
        rgba.extend_from_slice(&[g, g, g, 255]);
    }
    Ok(DepthFrame {
        width: size,
        height: size,
        rgba,
        covered: depth.covered(),
        near: if near.is_finite() { near } else { 0.0 },
        far,
    })
}

/// Radial offsets around the bump after registration, sorted by angle from
/// the bump centre.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct BumpRegistration {
    pub angles: Vec<f64>,
    pub target: Vec<f64>,
    pub registered: Vec<f64>,
    /// Mean residual as a percentage of the bump amplitude.
    pub residual_percent: f64,
    /// Largest difference between any two per-vertex transforms.
    pub transform_spread: f64,
    pub solves: usize,
}

/// Registers a coarse head onto a copy carrying one smooth bump of height
/// `amplitude`, with every part's stiffness multiplied by `lambda_scale`.
pub fn register_bump(amplitude: f64, lambda_scale: f64) -> Result<BumpRegistration> {
    if !(amplitude > 0.0 && lambda_scale > 0.0) {
        return Err(morphkit::MorphError::Parameter(
            "amplitude and lambda scale must be positive".into(),
        ));
    }
    let template = generate_head(&SyntheticHeadParams {
        subdivisions: 3,
        ..SyntheticHeadParams::default()
    })?;
    let c = Vec3::from(BUMP_CENTRE);
    let target = displace_radially(&template, |u| amplitude * Bump::profile(angle(u, &c), BUMP_WIDTH))?;
    let parts = head_parts(&template).scaled(lambda_scale)?;
    let radius = DEMO_RADIUS_FRACTION * template.mesh.bounding_box_diagonal();
    let graph = build_stiffness_edges(&template.mesh, radius)?;
    let out = nicp_register(&template.mesh, &target.mesh, &parts, &graph, &NicpParams::default())?;

    let mut rows: Vec<(f64, f64, f64)> = template
        .mesh
        .vertices()
        .iter()
        .zip(out.mesh.vertices())
        .map(|(v, r)| {
            let a = angle(v, &c);
            (a, amplitude * Bump::profile(a, BUMP_WIDTH), (r - v).dot(&v.normalize()))
        })
        .filter(|row| row.0 < 2.0 * BUMP_WIDTH)
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(BumpRegistration {
        angles: rows.iter().map(|r| r.0).collect(),
        target: rows.iter().map(|r| r.1).collect(),
        registered: rows.iter().map(|r| r.2).collect(),
        residual_percent: 100.0 * out.mean_residual() / amplitude,
        transform_spread: out.field.max_pairwise_difference(),
        solves: out.solves.len(),
    })
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    /// Crop radii in interocular units.
    pub radii: Vec<f64>,
    pub armse: Vec<f64>,
}

/// ARMSE against crop radius for a prediction that differs from the ground
/// truth by a random smooth shape change of size `shape` plus a cheek bump
/// of height `bump`.
pub fn error_curve(shape: f64, bump: f64, seed: u64, steps: usize) -> Result<ErrorCurve> {
    if steps < 2 {
        return Err(morphkit::MorphError::Parameter("need at least two radii".into()));
    }
    let gt = generate_head(&SyntheticHeadParams::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cheek = Vec3::new(-0.7, -0.2, 0.7);
    let pred = displace_radially(&gt, |u| {
        let smooth: f64 = weights.iter().enumerate().map(|(k, w)| w * shape_mode(k, u)).sum();
        shape * smooth + bump * Bump::profile(angle(u, &cheek), 0.5)
    })?;

    let (gt_mesh, gt_lms) = to_nose_frame(&gt.mesh, &gt.landmarks)?;
    let (gt_mesh, _, s) = normalize_interocular(&gt_mesh, &gt_lms)?;
    let (pred_mesh, _) = align_prediction(&pred.mesh, &pred.landmarks, &gt.landmarks, AlignMode::Rigid)?;
    let pred_mesh = pred_mesh.scaled(s);

    let radii: Vec<f64> = (0..steps).map(|i| 0.2 + 1.4 * i as f64 / (steps - 1) as f64).collect();
    let armse = radii
        .iter()
        .map(|&r| armse(&pred_mesh, &gt_mesh, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurve { radii, armse })
}

fn js(e: morphkit::MorphError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = depthFrame)]
pub fn depth_frame_js(azimuth_deg: f64, noise: f64, seed: u32, size: u32) -> std::result::Result<DepthFrame, JsError> {
    depth_frame(azimuth_deg, noise, seed as u64, size).map_err(js)
}

#[wasm_bindgen(js_name = registerBump)]
pub fn register_bump_js(amplitude: f64, lambda_scale: f64) -> std::result::Result<BumpRegistration, JsError> {
    register_bump(amplitude, lambda_scale).map_err(js)
}

#[wasm_bindgen(js_name = errorCurve)]
pub fn error_curve_js(shape: f64, bump: f64, seed: u32, steps: usize) -> std::result::Result<ErrorCurve, JsError> {
    error_curve(shape, bump, seed as u64, steps).map_err(js)
}
