use std::collections::BTreeMap;
use std::sync::OnceLock;

use morphkit::morphable::{
    build_expression_model, build_shape_model, fit_landmarks, stack, Coefficients, MorphableModel, Regularization,
    Truncation,
};
use morphkit::synthetic::{generate_population, PopulationParams, SyntheticHeadParams};
use morphkit::TriMesh;
use nalgebra::DMatrix;
use proptest::prelude::*;

struct Fixture {
    model: MorphableModel,
    neutrals: Vec<TriMesh>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let pop = generate_population(&PopulationParams {
            n_subjects: 6,
            n_expressions: 4,
            latent_modes: 4,
            head: SyntheticHeadParams {
                subdivisions: 3,
                ..SyntheticHeadParams::default()
            },
            seed: 21,
            ..PopulationParams::default()
        })
        .unwrap();
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
        let full = Truncation {
            variance_target: 1.0,
            max_components: 100,
        };
        let (mean, shape) = build_shape_model(&neutrals, &full).unwrap();
        let expr = build_expression_model(&expressions, &by_subject, &full).unwrap();
        let lms = pop
            .template
            .landmarks
            .entries()
            .iter()
            .map(|e| (e.id, e.vertex.unwrap()))
            .collect();
        let model = MorphableModel::new(
            mean,
            shape,
            expr,
            pop.template.mesh.faces().to_vec(),
            pop.template.landmarks.scheme().clone(),
            lms,
        )
        .unwrap();
        Fixture { model, neutrals }
    })
}

fn coefficients(model: &MorphableModel) -> impl Strategy<Value = Coefficients> {
    let ks = model.shape_components();
    let ke = model.expression_components();
    (
        prop::collection::vec(-2.0..2.0f64, ks),
        prop::collection::vec(-2.0..2.0f64, ke),
    )
        .prop_map(|(shape, expression)| Coefficients { shape, expression })
}

#[test]
fn bases_are_orthonormal() {
    let m = &fixture().model;
    for b in [m.shape_basis(), m.expression_basis()] {
        let gram = b.transpose() * b;
        assert!((gram - DMatrix::identity(b.ncols(), b.ncols())).amax() < 1e-8);
    }
    assert!(m.shape_variances().windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn full_basis_reconstructs_every_neutral() {
    let f = fixture();
    let u = f.model.shape_basis();
    for mesh in &f.neutrals {
        let x = stack(mesh);
        let back = f.model.mean() + u * (u.transpose() * (&x - f.model.mean()));
        assert!((back - x).amax() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesis_is_affine(c1 in coefficients(&fixture().model), c2 in coefficients(&fixture().model)) {
        let m = &fixture().model;
        let ks = m.shape_components();
        let zero = Coefficients::zeros(ks, m.expression_components());
        let sum = Coefficients::from_vector(&(c1.to_vector() + c2.to_vector()), ks);
        let lhs = m.evaluate(&c1).unwrap() + m.evaluate(&c2).unwrap() - m.evaluate(&zero).unwrap();
        prop_assert!((lhs - m.evaluate(&sum).unwrap()).amax() < 1e-9);
    }

    #[test]
    fn landmark_fit_cost_never_increases(c in coefficients(&fixture().model), reg in 1e-8..1e-1f64) {
        let m = &fixture().model;
        let target = m.landmarks(&c).unwrap().map_positions(|p| p * 1.3 + nalgebra::Vector3::new(0.2, -0.1, 0.5));
        let out = fit_landmarks(m, &target, &Regularization::uniform(reg)).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-18);
        }
    }
}
