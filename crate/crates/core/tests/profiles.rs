use hypersurf::acceptance::{FAMILY_INIT, FAMILY_LAMBDA0};
use hypersurf::classify::Samples;
use hypersurf::profiles::*;
use hypersurf::{AmbientSpace, Epsilon};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(eps: Epsilon, n: usize) -> AmbientSpace {
    AmbientSpace::new(eps, n).unwrap()
}

fn family(kind: &str, eps: Epsilon, span: (f64, f64)) -> Family {
    let sp = space(eps, 4);
    let rel = relation_constant(kind, &FAMILY_INIT, FAMILY_LAMBDA0, sp).unwrap();
    integrate_family(rel, FAMILY_INIT, sp, span, StepControl::default()).unwrap()
}

#[test]
fn constant_scalar_family_has_constant_scalar_curvature() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let fam = family("constant_scalar", eps, (-0.3, 0.3));
        let RelationSpec::ConstantScalar { rho } = fam.relation else { panic!() };
        let chart = fam.chart().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let us = chart.domain().sample_random(&mut rng, 20, 0.05);
        let samples = Samples::evaluate(&chart, &us).unwrap();
        let scalars: Vec<f64> = samples.points.iter().map(|p| p.geometry.curvature.scalar).collect();
        let (lo, hi) = scalars.iter().fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
        assert!(hi - lo < 1e-5, "spread {}", hi - lo);
        assert!((hi - rho).abs() < 1e-5);
        assert!(fam.max_speed_defect() < 1e-9);
    }
}

#[test]
fn arclength_is_preserved_at_every_node() {
    for kind in ["semi_parallel", "soliton", "constant_scalar"] {
        for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
            let fam = family(kind, eps, (-0.2, 0.2));
            assert!(fam.max_speed_defect() < 1e-9);
            let (t0, t1) = fam.curve.t_range;
            for k in 0..=10 {
                let t = t0 + (t1 - t0) * k as f64 / 10.0;
                let j = fam.curve.jet(t.min(t1)).unwrap();
                assert!((j.phi[1].hypot(j.a[1]) - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn third_derivatives_match_differences_of_second() {
    let fam = family("semi_parallel", Epsilon::Sphere, (-0.2, 0.2));
    let h = 1e-4;
    for t in [-0.15, -0.05, 0.0, 0.05, 0.1] {
        let j = fam.curve.jet(t).unwrap();
        let (p, m) = (fam.curve.jet(t + h).unwrap(), fam.curve.jet(t - h).unwrap());
        assert!((j.phi[3] - (p.phi[2] - m.phi[2]) / (2.0 * h)).abs() < 1e-5 * (1.0 + j.phi[3].abs()));
        let d = (j.a[3] - (p.a[2] - m.a[2]) / (2.0 * h)).abs();
        assert!(d < 1e-5 * (1.0 + j.a[3].abs()), "t {t} a3 {} d {d} range {:?}", j.a[3], fam.curve.t_range);
        assert!((j.phi[1] - (p.phi[0] - m.phi[0]) / (2.0 * h)).abs() < 1e-7);
    }
}

#[test]
fn vanishing_orbit_curvature_halts_integration() {
    let fam = family("semi_parallel", Epsilon::Sphere, (-2.0, 2.0));
    assert!(!fam.halts.is_empty());
    let (t0, t1) = fam.curve.t_range;
    assert!(t0 > -2.0 || t1 < 2.0);
    for h in &fam.halts {
        assert!(h.direction == "forward" || h.direction == "backward");
        assert!(!h.reason.is_empty());
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let sp = space(Epsilon::Sphere, 4);
    let slow = OdeState { dphi: 0.5, ..FAMILY_INIT };
    assert!(integrate_family(RelationSpec::SemiParallel, slow, sp, (-0.1, 0.1), StepControl::default()).is_err());
    assert!(integrate_family(RelationSpec::SemiParallel, FAMILY_INIT, sp, (0.1, 0.2), StepControl::default()).is_err());
    assert!(integrate_family(RelationSpec::ConstantAngle { theta: 0.3 }, FAMILY_INIT, sp, (-0.1, 0.1), StepControl::default()).is_err());
    assert!(relation_constant("harmonic", &FAMILY_INIT, 0.5, sp).is_err());
    assert!(constant_angle_chart(0.0, sp).is_err());
}

#[test]
fn relation_specs_round_trip_through_json() {
    let specs = [
        RelationSpec::SemiParallel,
        RelationSpec::ConstantScalar { rho: 3.5 },
        RelationSpec::Soliton { c: -1.25 },
        RelationSpec::ConstantAngle { theta: 0.7 },
    ];
    for s in specs {
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<RelationSpec>(&text).unwrap(), s);
    }
    let s: RelationSpec = serde_json::from_str(r#"{"kind":"soliton","c":2.0}"#).unwrap();
    assert_eq!(s, RelationSpec::Soliton { c: 2.0 });
}

proptest! {
    #[test]
    fn lambda_target_zeroes_the_residual(
        sign in any::<bool>(),
        n in 2usize..7,
        mu in prop_oneof![-3.0..-0.01f64, 0.01..3.0f64],
        cos in 0.0..1.0f64,
        k in 0usize..3,
        constant in -5.0..5.0f64,
    ) {
        let eps = if sign { 1.0 } else { -1.0 };
        let rel = [RelationSpec::SemiParallel, RelationSpec::ConstantScalar { rho: constant }, RelationSpec::Soliton { c: constant }][k];
        let lambda = rel.lambda_target(eps, n, mu, cos).unwrap();
        prop_assert!(rel.residual(eps, n, lambda, mu, cos).abs() < 1e-9 * (1.0 + lambda.abs() * mu.abs()));
    }
}
