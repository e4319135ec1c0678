//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! terminal. Pass a criterion number or a fragment of its name to run a
//! subset; the process exits non-zero when any selected criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use morphkit::eval::{armse, benchmark, landmark_bbox_size, nme, EvalConfig, EvalSample};
use morphkit::fusion::{
    estimate_rigid_from_landmarks, fuse_views, icp_refine, FusionParams, IcpParams, Rejection, ViewScan,
};
use morphkit::mesh::{Landmark, LandmarkScheme, SpatialIndex, ViewTag};
use morphkit::morphable::{
    build_expression_model, build_shape_model, fit_dense, stack, Coefficients, MorphableModel, Regularization,
    Truncation,
};
use morphkit::projection::{retrieve_3d_landmarks, Camera};
use morphkit::registration::{
    build_stiffness_edges, default_stiffness_radius, nicp_cost, nicp_register, NicpParams, Part, PartSegmentation,
    VertexTransformField,
};
use morphkit::synthetic::{
    displace_radially, generate_head, generate_population, head_parts, shape_mode, simulate_scan, Bump,
    PopulationParams, ScanSimParams, SyntheticHeadParams,
};
use morphkit::{LandmarkSet2, LandmarkSet3, PointCloud, RigidTransform, TriMesh, Vec3};
use nalgebra::{DMatrix, Matrix3, Matrix3x4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "rigid-recovery", rigid_recovery),
    (2, "icp-convergence", icp_convergence),
    (3, "fusion-fidelity", fusion_fidelity),
    (4, "registration-cost-oracle", registration_cost_oracle),
    (5, "nicp-registration", nicp_registration),
    (6, "pca-correctness", pca_correctness),
    (7, "fit-inversion", fit_inversion),
    (8, "metric-oracles", metric_oracles),
    (9, "landmark-retrieval", landmark_retrieval),
    (10, "end-to-end-determinism", end_to_end_determinism),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |n: u32, name: &str| {
        filters.is_empty() || filters.iter().any(|f| f == &n.to_string() || name.contains(f.as_str()))
    };
    let mut failures = 0;
    let mut ran = 0;
    for (n, name, run) in CRITERIA {
        if !selected(n, name) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            verdict(false, format!("panicked: {msg}"))
        });
        failures += usize::from(!v.pass);
        println!(
            "criterion {n:>2} {name}: {} ({}; {:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

fn scheme(id: &str) -> LandmarkScheme {
    LandmarkScheme {
        id: id.into(),
        left_eye: 0,
        right_eye: 1,
        nose_tip: 2,
    }
}

fn landmark_set(id: &str, points: &[Vec3]) -> LandmarkSet3 {
    let entries = points
        .iter()
        .enumerate()
        .map(|(i, p)| Landmark {
            id: i as u32,
            position: *p,
            vertex: None,
        })
        .collect();
    LandmarkSet3::new(scheme(id), entries).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Angle between two rotations from the chord length, accurate near zero.
fn rotation_gap(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    2.0 * ((a - b).norm() / 8f64.sqrt()).min(1.0).asin()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn small_head(subdivisions: u32, jitter: f64, seed: u64) -> morphkit::synthetic::SyntheticHead {
    generate_head(&SyntheticHeadParams {
        subdivisions,
        jitter,
        seed,
        ..SyntheticHeadParams::default()
    })
    .unwrap()
}

// 1 ------------------------------------------------------------------------

fn rigid_recovery() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut rot, mut trans) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(3..=24);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let axis = random_unit(&mut rng);
        let t = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let truth = RigidTransform::from_axis_angle(&axis, rng.random_range(-PI..PI), t);
        let moved: Vec<Vec3> = pts.iter().map(|p| truth.apply(p)).collect();
        let est = estimate_rigid_from_landmarks(&landmark_set("c1", &pts), &landmark_set("c1", &moved), false).unwrap();
        rot = rot.max(rotation_gap(est.rotation(), truth.rotation()));
        trans = trans.max((est.translation() - truth.translation()).norm());
    }
    let elapsed = start.elapsed();
    verdict(
        rot < 1e-9 && trans < 1e-9 && elapsed < Duration::from_secs(1),
        format!(
            "max rotation error {rot:.2e} rad, max translation error {trans:.2e}, {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

// 2 ------------------------------------------------------------------------

/// Uniform points in an anisotropic box: no symmetry for ICP to slide along.
fn random_cloud(rng: &mut ChaCha8Rng) -> PointCloud {
    PointCloud::new(
        (0..800)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.3..0.3),
                )
            })
            .collect(),
    )
}

fn icp_convergence() -> Verdict {
    let params = IcpParams {
        rejection: Rejection::None,
        ..IcpParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut converged, mut monotone, mut worst_rise) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let target = random_cloud(&mut rng);
        let diameter = target.diameter_estimate();
        let angle = rng.random_range(0.0..15f64.to_radians());
        let axis = random_unit(&mut rng);
        let shift = random_unit(&mut rng) * rng.random_range(0.0..0.1 * diameter);
        let perturb = RigidTransform::from_axis_angle(&axis, angle, shift);
        let source = target.transformed(&perturb);
        let out = icp_refine(&source, &target, &RigidTransform::identity(), &params).unwrap();
        if out.rms < 1e-6 && out.iterations <= 50 {
            converged += 1;
        }
        let rise = max_of(out.history.windows(2).map(|w| w[1] - w[0]));
        worst_rise = worst_rise.max(rise);
        if rise <= 0.0 {
            monotone += 1;
        }
    }
    verdict(
        converged >= 95 && monotone == 100,
        format!("{converged}/100 reached rms < 1e-6, {monotone}/100 non-increasing (largest rise {worst_rise:.1e})"),
    )
}

// 3 ------------------------------------------------------------------------

fn fusion_fidelity() -> Verdict {
    let params = FusionParams::default();
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for seed in 0..20u64 {
        let head = small_head(4, 0.3, seed);
        let scan = ScanSimParams {
            seed,
            ..ScanSimParams::default()
        };
        let views = simulate_scan(&head.mesh, &head.landmarks, &scan).unwrap();
        let pick = |tag: ViewTag| views.iter().find(|v| v.tag == tag).unwrap();
        let (l, m, r) = (pick(ViewTag::Left), pick(ViewTag::Middle), pick(ViewTag::Right));
        let as_scan = |v: &morphkit::synthetic::ScanView| ViewScan {
            cloud: v.cloud.clone(),
            landmarks: v.landmarks.clone(),
        };
        let fused = fuse_views(&as_scan(l), &as_scan(m), &as_scan(r), &params).unwrap();
        let world: Vec<Vec3> = fused.cloud.points().iter().map(|p| m.to_world.apply(p)).collect();

        let mut visible: Vec<usize> = views.iter().flat_map(|v| v.source_vertices.iter().copied()).collect();
        visible.sort_unstable();
        visible.dedup();
        let truth: Vec<Vec3> = visible.iter().map(|&i| head.mesh.vertices()[i]).collect();
        let (ti, fi) = (SpatialIndex::new(&truth), SpatialIndex::new(&world));
        let forward = max_of(world.iter().map(|p| ti.nearest(p).unwrap().1));
        let backward = max_of(truth.iter().map(|p| fi.nearest(p).unwrap().1));
        let d = forward.max(backward);
        worst = worst.max(d);
        if d >= params.merge_epsilon {
            failed.push(seed);
        }
    }
    verdict(
        failed.is_empty(),
        format!(
            "worst symmetric set distance {worst:.2e} vs merge_epsilon {:.0e}, failing seeds {failed:?}",
            params.merge_epsilon
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn grid(nx: usize, ny: usize, rng: &mut ChaCha8Rng, lift: f64) -> TriMesh {
    let mut v = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            v.push(Vec3::new(
                i as f64 / nx as f64,
                j as f64 / ny as f64,
                lift + 0.15 * rng.random::<f64>(),
            ));
        }
    }
    let mut f = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let k = i * ny + j;
            f.push([k, k + ny, k + 1]);
            f.push([k + 1, k + ny, k + ny + 1]);
        }
    }
    TriMesh::new(v, f).unwrap()
}

/// Distance to a triangle by minimising over a barycentric parametrisation:
/// interior stationary point if feasible, else each edge.
fn triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (u, v) = (b - a, c - a);
    let w = p - a;
    let (uu, uv, vv, wu, wv) = (u.dot(&u), u.dot(&v), v.dot(&v), w.dot(&u), w.dot(&v));
    let det = uu * vv - uv * uv;
    let s = (vv * wu - uv * wv) / det;
    let t = (uu * wv - uv * wu) / det;
    if s >= 0.0 && t >= 0.0 && s + t <= 1.0 {
        return (w - u * s - v * t).norm();
    }
    let edge = |x: &Vec3, y: &Vec3| {
        let d = y - x;
        let k = ((p - x).dot(&d) / d.dot(&d)).clamp(0.0, 1.0);
        (p - x - d * k).norm()
    };
    edge(a, b).min(edge(b, c)).min(edge(a, c))
}

/// Registration objective evaluated term by term from its definition: each
/// vertex's data term uses the target triangles touching its part's region,
/// and every graph neighbour contributes the Frobenius difference.
fn cost_from_definition(
    x: &[Matrix3x4<f64>],
    template: &TriMesh,
    target: &TriMesh,
    parts: &PartSegmentation,
    edges: &[(usize, usize)],
) -> (f64, f64) {
    let region_label: Vec<usize> = target
        .vertices()
        .iter()
        .map(|t| {
            let d: Vec<f64> = template.vertices().iter().map(|v| (t - v).norm()).collect();
            let best = (0..d.len()).fold(0, |b, i| if d[i] < d[b] { i } else { b });
            parts.labels()[best]
        })
        .collect();
    let mut neighbours = vec![Vec::new(); template.vertex_count()];
    for &(a, b) in edges {
        neighbours[a].push(b);
        neighbours[b].push(a);
    }
    let (mut literal, mut squared) = (0.0, 0.0);
    for (i, v) in template.vertices().iter().enumerate() {
        let part = parts.labels()[i];
        let lambda = parts.parts()[part].lambda;
        let moved = x[i] * Vector4::new(v.x, v.y, v.z, 1.0);
        let own: Vec<&[usize; 3]> = target
            .faces()
            .iter()
            .filter(|f| f.iter().any(|&k| region_label[k] == part))
            .collect();
        let faces = if own.is_empty() {
            target.faces().iter().collect()
        } else {
            own
        };
        let t = target.vertices();
        let d = faces
            .iter()
            .map(|f| triangle_distance(&moved, &t[f[0]], &t[f[1]], &t[f[2]]))
            .fold(f64::INFINITY, f64::min);
        let w = parts.weights()[i];
        literal += w * d;
        squared += w * d * d;
        for &j in &neighbours[i] {
            let diff = (x[i] - x[j]).norm();
            literal += lambda * diff;
            squared += lambda * diff * diff;
        }
    }
    (literal, squared)
}

fn registration_cost_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let template = grid(6, 5, &mut rng, 0.0);
        let target = grid(7, 6, &mut rng, 0.08);
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let parts = PartSegmentation::new(
            vec![
                Part::new("a", rng.random_range(0.0..4.0)),
                Part::new("b", rng.random_range(0.0..4.0)),
                Part::new("c", rng.random_range(0.0..4.0)),
            ],
            labels,
            Some((0..30).map(|_| rng.random_range(0.2..2.0)).collect()),
        )
        .unwrap();
        let graph = build_stiffness_edges(&template, 0.3).unwrap();
        let x: Vec<Matrix3x4<f64>> = (0..30)
            .map(|_| Matrix3x4::identity() + Matrix3x4::from_fn(|_, _| rng.random_range(-0.1..0.1)))
            .collect();
        let field = VertexTransformField::new(x.clone()).unwrap();
        let got = nicp_cost(&field, &template, &target, &parts, &graph).unwrap();
        let (literal, squared) = cost_from_definition(&x, &template, &target, &parts, graph.edges());
        worst = worst
            .max((got.literal - literal).abs())
            .max((got.surrogate - squared).abs());
    }
    verdict(
        worst < 1e-10,
        format!("largest deviation over 50 instances {worst:.2e}"),
    )
}

// 5 ------------------------------------------------------------------------

fn nicp_registration() -> Verdict {
    let amplitude = 0.05 * 0.9;
    let template = small_head(4, 0.0, 0);
    let parts = head_parts(&template);
    let graph = build_stiffness_edges(&template.mesh, default_stiffness_radius(&template.mesh)).unwrap();
    let mut residuals = Vec::new();
    let (mut monotone, mut topology) = (true, true);
    for centre in [[0.6, 0.0, 0.8], [0.0, 0.5, 0.85], [-0.7, -0.2, 0.7]] {
        let c = Vec3::from(centre).normalize();
        let target = displace_radially(&template, |u| {
            amplitude * Bump::profile(u.dot(&c).clamp(-1.0, 1.0).acos(), 0.7)
        })
        .unwrap();
        let out = nicp_register(&template.mesh, &target.mesh, &parts, &graph, &NicpParams::default()).unwrap();
        residuals.push(out.mean_residual());
        monotone &= out.solves.iter().all(|s| s.surrogate_after <= s.surrogate_before);
        topology &= out.mesh.faces() == template.mesh.faces();
    }
    let c = Vec3::new(0.6, 0.0, 0.8);
    let target = displace_radially(&template, |u| {
        amplitude * Bump::profile(u.dot(&c).clamp(-1.0, 1.0).acos(), 0.7)
    })
    .unwrap();
    let rigid = PartSegmentation::uniform(template.mesh.vertex_count(), 1e6).unwrap();
    let stiff = nicp_register(&template.mesh, &target.mesh, &rigid, &graph, &NicpParams::default()).unwrap();
    let spread = stiff.field.max_pairwise_difference();
    topology &= stiff.mesh.faces() == template.mesh.faces();
    let worst = max_of(residuals.iter().copied());
    verdict(
        worst < 0.01 * amplitude && monotone && spread < 1e-3 && topology,
        format!(
            "worst mean residual {:.2}% of amplitude, surrogate monotone {monotone}, stiff spread {spread:.1e}, topology kept {topology}",
            100.0 * worst / amplitude
        ),
    )
}

// 6 ------------------------------------------------------------------------

/// Orthonormal basis of the radial displacement fields that generated the
/// population.
fn generating_span(directions: &[Vec3], k: usize) -> DMatrix<f64> {
    let n = directions.len();
    let g = DMatrix::from_fn(3 * n, k, |r, c| {
        let u = &directions[r / 3];
        u[r % 3] * shape_mode(c, u)
    });
    g.qr().q()
}

fn orthonormality_error(b: &DMatrix<f64>) -> f64 {
    (b.transpose() * b - DMatrix::identity(b.ncols(), b.ncols())).amax()
}

fn pca_correctness() -> Verdict {
    let full = Truncation {
        variance_target: 1.0,
        max_components: 200,
    };
    let (mut angle, mut ortho, mut recon) = (0.0f64, 0.0f64, 0.0f64);
    let mut contract = true;
    let mut notes = Vec::new();
    for k in [1usize, 3, 5] {
        let pop = generate_population(&PopulationParams {
            n_subjects: 20,
            n_expressions: 3,
            latent_modes: k,
            head: SyntheticHeadParams {
                subdivisions: 3,
                ..SyntheticHeadParams::default()
            },
            seed: 60 + k as u64,
            ..PopulationParams::default()
        })
        .unwrap();
        let neutrals: Vec<TriMesh> = pop.subjects.iter().map(|s| s.samples[0].head.mesh.clone()).collect();
        let (mean, shape) = build_shape_model(&neutrals, &full).unwrap();
        contract &= shape.components() == k;

        let q = generating_span(&pop.template.directions, k);
        let u = shape.basis.columns(0, k).into_owned();
        let residual = &u - &q * (q.transpose() * &u);
        let sin_max = residual.singular_values().max();
        angle = angle.max(sin_max.min(1.0).asin());
        ortho = ortho.max(orthonormality_error(&shape.basis));
        for mesh in &neutrals {
            let x = stack(mesh);
            let back = &mean + &shape.basis * (shape.basis.transpose() * (&x - &mean));
            recon = recon.max((back - x).amax());
        }

        let by_subject: BTreeMap<String, TriMesh> = pop
            .subjects
            .iter()
            .map(|s| (s.id.clone(), s.samples[0].head.mesh.clone()))
            .collect();
        let expressions: Vec<(String, TriMesh)> = pop
            .subjects
            .iter()
            .flat_map(|s| s.samples[1..].iter().map(move |x| (s.id.clone(), x.head.mesh.clone())))
            .collect();
        let expr = build_expression_model(&expressions, &by_subject, &full).unwrap();
        ortho = ortho.max(orthonormality_error(&expr.basis));

        for target in [0.5, 0.9, 0.99] {
            let t = Truncation {
                variance_target: target,
                max_components: 200,
            };
            let (_, cut) = build_shape_model(&neutrals, &t).unwrap();
            let kept = cut.components();
            let cumulative: f64 = shape.variances[..kept].iter().sum();
            let short: f64 = shape.variances[..kept - 1].iter().sum();
            let total: f64 = shape.variances.iter().sum();
            contract &= cumulative >= target * total * (1.0 - 1e-12) && short < target * total;
            contract &= (cut.retained_fraction() - cumulative / cut.total_variance).abs() < 1e-12;
        }
        notes.push(format!("k={k}: {} components", shape.components()));
    }
    verdict(
        angle < 1e-6 && ortho < 1e-8 && recon < 1e-6 && contract,
        format!(
            "{}; max principal angle {angle:.1e} rad, orthonormality {ortho:.1e}, reconstruction {recon:.1e}, retained-variance contract {contract}",
            notes.join(", ")
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn fit_model() -> MorphableModel {
    let pop = generate_population(&PopulationParams {
        n_subjects: 8,
        n_expressions: 3,
        head: SyntheticHeadParams {
            subdivisions: 3,
            ..SyntheticHeadParams::default()
        },
        seed: 70,
        ..PopulationParams::default()
    })
    .unwrap();
    let trunc = Truncation {
        variance_target: 0.999,
        max_components: 10,
    };
    let neutrals: Vec<TriMesh> = pop.subjects.iter().map(|s| s.samples[0].head.mesh.clone()).collect();
    let by_subject: BTreeMap<String, TriMesh> = pop
        .subjects
        .iter()
        .map(|s| (s.id.clone(), s.samples[0].head.mesh.clone()))
        .collect();
    let expressions: Vec<(String, TriMesh)> = pop
        .subjects
        .iter()
        .flat_map(|s| s.samples[1..].iter().map(move |x| (s.id.clone(), x.head.mesh.clone())))
        .collect();
    let (mean, shape) = build_shape_model(&neutrals, &trunc).unwrap();
    let expr = build_expression_model(&expressions, &by_subject, &trunc).unwrap();
    let lms = pop
        .template
        .landmarks
        .entries()
        .iter()
        .map(|e| (e.id, e.vertex.unwrap()))
        .collect();
    MorphableModel::new(
        mean,
        shape,
        expr,
        pop.template.mesh.faces().to_vec(),
        pop.template.landmarks.scheme().clone(),
        lms,
    )
    .unwrap()
}

fn fit_inversion() -> Verdict {
    let model = fit_model();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reg = Regularization::uniform(1e-12);
    let config = EvalConfig {
        radii: vec![0.6],
        ..EvalConfig::default()
    };
    let (mut rel, mut worst_armse) = (0.0f64, 0.0f64);
    for trial in 0..8 {
        let draw = |v: &[f64], rng: &mut ChaCha8Rng| v.iter().map(|s| s.sqrt() * rng.random_range(-1.5..1.5)).collect();
        let truth = Coefficients {
            shape: draw(model.shape_variances(), &mut rng),
            expression: draw(model.expression_variances(), &mut rng),
        };
        let pose = RigidTransform::from_parts(
            Matrix3::from(nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(random_unit(&mut rng)),
                rng.random_range(-0.5..0.5),
            )),
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
            rng.random_range(0.7..1.4),
        )
        .unwrap();
        let target = model.synthesize(&truth).unwrap().transformed(&pose);
        let target_lms = model.landmarks(&truth).unwrap().map_positions(|p| pose.apply(p));
        let fit = fit_dense(&model, &target, &target_lms, &reg, 30).unwrap();
        rel = rel.max((fit.coefficients.to_vector() - truth.to_vector()).norm() / truth.norm());

        let prediction = model.synthesize(&fit.coefficients).unwrap().transformed(&fit.transform);
        let prediction_landmarks = model
            .landmarks(&fit.coefficients)
            .unwrap()
            .map_positions(|p| fit.transform.apply(p));
        let sample = EvalSample {
            id: format!("t{trial}"),
            prediction,
            prediction_landmarks,
            ground_truth: target,
            ground_truth_landmarks: target_lms,
            attributes: BTreeMap::new(),
        };
        let report = benchmark(&[sample], &config).unwrap();
        let a = report.samples[0].armse.as_ref().expect("sample scored")[0];
        worst_armse = worst_armse.max(a);
    }
    verdict(
        rel < 1e-4 && worst_armse < 1e-4,
        format!("worst relative coefficient error {rel:.1e}, worst aligned ARMSE at r=0.6 {worst_armse:.1e}"),
    )
}

// 8 ------------------------------------------------------------------------

fn toy_surface(rng: &mut ChaCha8Rng) -> TriMesh {
    let mut m = grid(6, 5, rng, 0.0);
    let v: Vec<Vec3> = m
        .vertices()
        .iter()
        .map(|p| Vec3::new(p.x * 1.5 - 0.75, p.y * 1.5 - 0.6, p.z))
        .collect();
    m = m.with_vertices(v).unwrap();
    m
}

/// Directed RMS from cropped `from` to cropped `to`, brute force.
fn directed_rms(from: &TriMesh, to: &TriMesh, r: f64) -> f64 {
    let inside = |m: &TriMesh| -> Vec<bool> { m.vertices().iter().map(|v| v.norm() <= r).collect() };
    let (keep_from, keep_to) = (inside(from), inside(to));
    let t = to.vertices();
    let faces: Vec<&[usize; 3]> = to.faces().iter().filter(|f| f.iter().all(|&i| keep_to[i])).collect();
    let pts: Vec<&Vec3> = from
        .vertices()
        .iter()
        .zip(&keep_from)
        .filter(|(_, k)| **k)
        .map(|(v, _)| v)
        .collect();
    let sum: f64 = pts
        .iter()
        .map(|p| {
            faces
                .iter()
                .map(|f| triangle_distance(p, &t[f[0]], &t[f[1]], &t[f[2]]))
                .fold(f64::INFINITY, f64::min)
                .powi(2)
        })
        .sum();
    (sum / pts.len() as f64).sqrt()
}

fn metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut armse_gap, mut nme_gap, mut self_zero) = (0.0f64, 0.0f64, true);
    for _ in 0..50 {
        let (gt, pred) = (toy_surface(&mut rng), toy_surface(&mut rng));
        for r in [0.6, 0.8, 1.0] {
            let oracle = 0.5 * (directed_rms(&gt, &pred, r) + directed_rms(&pred, &gt, r));
            armse_gap = armse_gap.max((armse(&pred, &gt, r).unwrap() - oracle).abs());
        }
        self_zero &= armse(&gt, &gt, 1.0).unwrap() == 0.0;

        let g: Vec<Vec3> = (0..10)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let p: Vec<Vec3> = g
            .iter()
            .map(|x| x + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.05)
            .collect();
        let xs: Vec<f64> = g.iter().map(|x| x.x).collect();
        let ys: Vec<f64> = g.iter().map(|x| x.y).collect();
        let span = |v: &[f64]| v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min);
        let bbox = (span(&xs) * span(&ys)).sqrt();
        let expected = g.iter().zip(&p).map(|(a, b)| (a - b).norm()).sum::<f64>() / g.len() as f64 / bbox;
        let (gl, pl) = (landmark_set("c8", &g), landmark_set("c8", &p));
        nme_gap = nme_gap.max((nme(&pl, &gl, landmark_bbox_size(&gl)).unwrap() - expected).abs());
    }

    let mut scaling = true;
    for e in -10..=10 {
        let g: Vec<Vec3> = (0..6)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let p: Vec<Vec3> = g.iter().map(|x| x * 1.02).collect();
        let (gl, pl) = (landmark_set("c8", &g), landmark_set("c8", &p));
        let k = 2f64.powi(e);
        scaling &= nme(&pl, &gl, k * 0.8).unwrap() == nme(&pl, &gl, 0.8).unwrap() / k;
    }

    let head = small_head(3, 0.0, 0);
    let shifted = displace_radially(&head, |u| 0.01 * u.x).unwrap();
    let report = benchmark(
        &[EvalSample {
            id: "sweep".into(),
            prediction: shifted.mesh,
            prediction_landmarks: shifted.landmarks,
            ground_truth: head.mesh,
            ground_truth_landmarks: head.landmarks,
            attributes: BTreeMap::new(),
        }],
        &EvalConfig::default(),
    )
    .unwrap();
    let sweep = report.samples[0].armse.clone().unwrap_or_default();
    let swept = report.radii == [0.6, 0.7, 0.8, 0.9, 1.0] && sweep.len() == 5 && sweep.iter().all(|v| v.is_finite());

    verdict(
        armse_gap < 1e-10 && nme_gap < 1e-10 && self_zero && scaling && swept,
        format!(
            "ARMSE gap {armse_gap:.1e}, NME gap {nme_gap:.1e}, armse(M,M)=0 {self_zero}, exact inverse scaling {scaling}, radius sweep [{}]",
            sweep.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn landmark_retrieval() -> Verdict {
    let pop = generate_population(&PopulationParams {
        n_subjects: 10,
        n_expressions: 2,
        head: SyntheticHeadParams {
            subdivisions: 3,
            ..SyntheticHeadParams::default()
        },
        seed: 90,
        ..PopulationParams::default()
    })
    .unwrap();
    let heads: Vec<_> = pop
        .subjects
        .iter()
        .flat_map(|s| s.samples.iter().map(|x| &x.head))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut trials, mut recovered, mut redraws) = (0, 0, 0);
    while trials < 100 {
        let head = heads[rng.random_range(0..heads.len())];
        let cloud = PointCloud::new(head.mesh.vertices().to_vec());
        let dir = Vec3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.4..0.4), 1.0).normalize();
        let eye = dir * rng.random_range(3.0..6.0);
        let cam = Camera::look_at(
            &eye,
            &Vec3::zeros(),
            &Vec3::y(),
            rng.random_range(300.0..900.0),
            640,
            640,
        )
        .unwrap();

        let mut entries = Vec::new();
        let mut unique = true;
        for lm in head.landmarks.entries() {
            let v = lm.vertex.unwrap();
            let Some((px, _)) = cam.project(&cloud.points()[v]) else {
                continue;
            };
            unique &= cloud
                .points()
                .iter()
                .enumerate()
                .all(|(i, p)| i == v || cam.project(p).is_none_or(|(q, _)| (q - px).norm() > 1e-9));
            entries.push(Landmark {
                id: lm.id,
                position: Vector2::new(px.x, px.y),
                vertex: Some(v),
            });
        }
        if !unique || entries.len() < 3 {
            redraws += 1;
            continue;
        }
        trials += 1;
        let lms2d = LandmarkSet2::new(head.landmarks.scheme().clone(), entries.clone()).unwrap();
        let back = retrieve_3d_landmarks(&cloud, &cam, &lms2d).unwrap();
        if entries
            .iter()
            .all(|e| back.get(e.id).and_then(|b| b.vertex) == e.vertex)
        {
            recovered += 1;
        }
    }
    verdict(
        recovered == 100,
        format!("{recovered}/100 trials recovered every landmark vertex ({redraws} draws without unique projections skipped)"),
    )
}

// 10 -----------------------------------------------------------------------

fn run_pipeline(out: &Path) -> (bool, Duration) {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_morphkit"))
        .args(["pipeline", "--seed", "11", "--out"])
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .expect("morphkit binary runs");
    (status.success(), start.elapsed())
}

fn end_to_end_determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let (ok_a, t_a) = run_pipeline(&a);
    let (ok_b, t_b) = run_pipeline(&b);
    let limit = Duration::from_secs(300);
    let mut identical = ok_a && ok_b;
    let mut compared = 0;
    if identical {
        for stage in ["", "synth/", "fuse/", "register/", "build-model/", "fit/", "evaluate/"] {
            let rel = format!("{stage}run-manifest.json");
            identical &= std::fs::read(a.join(&rel)).unwrap() == std::fs::read(b.join(&rel)).unwrap();
            compared += 1;
        }
        identical &= a.join("build-model/model.p3dm").exists() && a.join("evaluate/report.json").exists();
    }
    verdict(
        ok_a && ok_b && identical && t_a < limit && t_b < limit,
        format!(
            "runs took {:.1}s and {:.1}s, {compared} run manifests byte-identical {identical}",
            t_a.as_secs_f64(),
            t_b.as_secs_f64()
        ),
    )
}
