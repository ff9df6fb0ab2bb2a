use hypersurf::classify::{self, RadialVerdict, RelationParams, Samples, Tolerances, UmbilicityTag};
use hypersurf::geometry::{self, frame, frame_and_curvature, point_geometry, sectional, Tensor4};
use hypersurf::profiles::constant_angle_chart;
use hypersurf::surface::*;
use hypersurf::{AmbientSpace, Epsilon};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(eps: Epsilon, n: usize) -> AmbientSpace {
    AmbientSpace::new(eps, n).unwrap()
}

fn eps_of(sign: bool) -> Epsilon {
    if sign {
        Epsilon::Sphere
    } else {
        Epsilon::Hyperbolic
    }
}

fn random_points(chart: &Chart, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chart.domain().sample_random(&mut rng, count, 0.05)
}

fn riemann_symmetry_defect(r: &Tensor4) -> f64 {
    let n = r.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = r.get(i, j, k, l);
                    worst = worst
                        .max((v + r.get(j, i, k, l)).abs())
                        .max((v + r.get(i, j, l, k)).abs())
                        .max((v - r.get(k, l, i, j)).abs())
                        .max((v + r.get(j, k, i, l) + r.get(k, i, j, l)).abs());
                }
            }
        }
    }
    worst
}

fn sp_frobenius(pg: &geometry::PointGeometry) -> f64 {
    let e = pg.frame.orthonormal_frame().unwrap();
    geometry::semi_parallel_tensor(&pg.frame, &pg.curvature).frobenius(&e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        sign in any::<bool>(),
        x in prop::collection::vec(-3.0..3.0f64, 6),
        y in prop::collection::vec(-3.0..3.0f64, 6),
        z in prop::collection::vec(-3.0..3.0f64, 6),
        a in -2.0..2.0f64,
    ) {
        let sp = space(eps_of(sign), 4);
        let (x, y, z) = (DVector::from_vec(x), DVector::from_vec(y), DVector::from_vec(z));
        let xy = sp.inner(&x, &y).unwrap();
        prop_assert!((xy - sp.inner(&y, &x).unwrap()).abs() < 1e-12);
        let lhs = sp.inner(&(&x * a + &z), &y).unwrap();
        let rhs = a * xy + sp.inner(&z, &y).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn curvature_symmetries_on_random_rotation_profiles(
        sign in any::<bool>(),
        phi_c in 1.0..1.4f64,
        radius in 0.3..0.8f64,
        phase in 0.0..6.28f64,
        n in 3usize..6,
        seed in any::<u64>(),
    ) {
        let profile = AnalyticProfile::Circle { phi_c, a_c: 0.0, radius, phase };
        let chart = rotation_chart(ProfileCurve::analytic(profile, (-0.2, 0.2)), space(eps_of(sign), n)).unwrap();
        let u = &random_points(&chart, 1, seed)[0];
        let pg = point_geometry(&chart, u).unwrap();
        prop_assert!(riemann_symmetry_defect(&pg.riemann_intrinsic) < 1e-8);
        prop_assert!(pg.curvature.riemann.max_abs_diff(&pg.riemann_intrinsic) < 1e-8);
        prop_assert!((pg.frame.t_norm2 + pg.frame.cos_theta.powi(2) - 1.0).abs() < 1e-10);
        let trace: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| pg.frame.metric_inv[(i, j)] * pg.curvature.ricci[(i, j)]).sum();
        prop_assert!((trace - pg.curvature.scalar).abs() < 1e-10);
    }
}

/// Independent closed forms for a rotation chart with profile (φ, a):
/// with σ = sign φ′ and speed v, cos θ = |φ′|/v, μ = σa′C_ε(φ)/(v S_ε(φ)),
/// λ = σ(φ′a″ − a′φ″)/v³.
#[test]
fn rotation_chart_matches_profile_formulas() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let profile = AnalyticProfile::Wave { phi0: 1.1, amp: 0.2, freq: 3.0, slope: 0.6 };
        let curve = ProfileCurve::analytic(profile, (-0.5, 0.5));
        let chart = rotation_chart(curve.clone(), space(eps, 4)).unwrap();
        for u in random_points(&chart, 20, 5) {
            let j = curve.jet(u[0]).unwrap();
            let [phi, p1, p2, _] = j.phi;
            let [_, a1, a2, _] = j.a;
            let v = p1.hypot(a1);
            let sigma = p1.signum();
            let fp = frame(&chart, &u).unwrap();
            let spec = classify::spectrum(&fp, 1e-6).unwrap();
            let mu = sigma * a1 * eps.c(phi) / (v * eps.s(phi));
            let lambda = sigma * (p1 * a2 - a1 * p2) / v.powi(3);
            assert!((fp.cos_theta - p1.abs() / v).abs() < 1e-12);
            assert!((fp.t_norm2.sqrt() - a1.abs() / v).abs() < 1e-12);
            assert!((spec.lambda_t.unwrap() - lambda).abs() < 1e-10);
            let orbit: Vec<f64> = spec.eigenvalues.iter().zip(&spec.multiplicities).filter(|(_, m)| **m == 3).map(|(e, _)| *e).collect();
            assert_eq!(orbit.len(), 1);
            assert!((orbit[0] - mu).abs() < 1e-10);
        }
    }
}

#[test]
fn invariants_are_constant_along_orbits() {
    let chart = rotation_chart(
        ProfileCurve::analytic(AnalyticProfile::Circle { phi_c: 1.2, a_c: 0.3, radius: 0.5, phase: 0.4 }, (-0.3, 0.3)),
        space(Epsilon::Hyperbolic, 4),
    )
    .unwrap();
    let pts = random_points(&chart, 10, 17);
    let (fp0, cd0) = frame_and_curvature(&chart, &pts[0]).unwrap();
    let sp0 = classify::spectrum(&fp0, 1e-6).unwrap();
    for mut u in pts.into_iter().skip(1) {
        u[0] = fp0.u[0];
        let (fp, cd) = frame_and_curvature(&chart, &u).unwrap();
        let sp = classify::spectrum(&fp, 1e-6).unwrap();
        assert!((fp.cos_theta - fp0.cos_theta).abs() < 1e-12);
        assert!((cd.scalar - cd0.scalar).abs() < 1e-10);
        for (a, b) in sp.eigenvalues.iter().zip(&sp0.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn verdicts_survive_affine_reparametrization() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let charts = [
        rotation_chart(ProfileCurve::analytic(AnalyticProfile::Wave { phi0: 1.0, amp: 0.1, freq: 2.0, slope: 0.8 }, (-0.4, 0.4)), space(Epsilon::Sphere, 4)).unwrap(),
        tojeiro_chart(TubeBase { dim: 1, radius: 0.6 }, HeightFunction { coeffs: [0.0, 0.9, 0.4, 0.0] }, (-0.2, 0.2), space(Epsilon::Hyperbolic, 4)).unwrap(),
    ];
    let tol = Tolerances::default();
    for chart in charts {
        let a = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * (rand::Rng::random::<f64>(&mut rng) - 0.5));
        let re = chart.reparametrize(a.clone()).unwrap();
        let ws = re.domain().sample_random(&mut rng, 5, 0.1);
        let c = chart.domain().center();
        let us: Vec<Vec<f64>> = ws
            .iter()
            .map(|w| {
                let d = DVector::from_iterator(4, w.iter().zip(&c).map(|(x, y)| x - y));
                let v = &a * d;
                (0..4).map(|i| c[i] + v[i]).collect()
            })
            .collect();
        let s1 = Samples::evaluate(&chart, &us).unwrap();
        let s2 = Samples::evaluate(&re, &ws).unwrap();
        let r1 = classify::classify(&s1, RelationParams::default(), &tol).unwrap();
        let r2 = classify::classify(&s2, RelationParams::default(), &tol).unwrap();
        for (p, q) in r1.points.iter().zip(&r2.points) {
            assert_eq!(p.umbilicity, q.umbilicity);
            assert_eq!(p.multiplicities, q.multiplicities);
            assert_eq!(p.t_principal, q.t_principal);
            assert!((p.scalar - q.scalar).abs() < 1e-9);
            assert!((p.cos_theta - q.cos_theta).abs() < 1e-12);
            assert!((p.weyl_norm.unwrap() - q.weyl_norm.unwrap()).abs() < 1e-9);
            for (x, y) in p.eigenvalues.iter().zip(&q.eigenvalues) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        for (x, y) in s1.points.iter().zip(&s2.points) {
            let fx = sp_frobenius(&x.geometry);
            let fy = sp_frobenius(&y.geometry);
            assert!((fx - fy).abs() < 1e-9 * (1.0 + fx), "{fx} vs {fy}");
        }
        assert_eq!(r1.radial.verdict, r2.radial.verdict);
        assert_eq!(r1.semi_parallel.1, r2.semi_parallel.1);
        assert_eq!(r1.conformal.as_ref().unwrap().umbilic_criterion, r2.conformal.as_ref().unwrap().umbilic_criterion);
    }
}

/// Gauss curvature of a surface of revolution from the metric alone:
/// K = R_0110 / det g with R from the Christoffel symbols.
#[test]
fn surface_gauss_curvature_two_routes() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let chart = rotation_chart(
            ProfileCurve::analytic(AnalyticProfile::Circle { phi_c: 1.1, a_c: 0.0, radius: 0.7, phase: 1.0 }, (-0.4, 0.4)),
            space(eps, 2),
        )
        .unwrap();
        for u in random_points(&chart, 20, 3) {
            let pg = point_geometry(&chart, &u).unwrap();
            let g = &pg.frame.metric;
            let k_intrinsic = pg.riemann_intrinsic.get(0, 1, 1, 0) / g.determinant();
            let x = DVector::from_vec(vec![1.0, 0.0]);
            let y = DVector::from_vec(vec![0.0, 1.0]);
            let k = sectional(&pg.curvature, &pg.frame, &x, &y).unwrap();
            assert!((k - k_intrinsic).abs() < 1e-9, "{k} vs {k_intrinsic}");
        }
    }
}

#[test]
fn constant_curvature_slice() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let n = 4;
        let chart = slice_chart(1.0, space(eps, n)).unwrap();
        for u in random_points(&chart, 5, 1) {
            let (fp, cd) = frame_and_curvature(&chart, &u).unwrap();
            assert!((cd.scalar - eps.value() * (n * (n - 1)) as f64).abs() < 1e-10);
            let x = DVector::from_vec(vec![1.0, 0.5, 0.0, 0.2]);
            let y = DVector::from_vec(vec![0.0, 1.0, -0.3, 0.0]);
            assert!((sectional(&cd, &fp, &x, &y).unwrap() - eps.value()).abs() < 1e-10);
            if eps == Epsilon::Sphere {
                assert!(geometry::soliton_residual(&fp, &cd, (n - 1) as f64).amax() < 1e-10);
            }
        }
    }
}

#[test]
fn product_over_equator_is_totally_geodesic() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let chart = product_chart(TubeBase::equator(4), (-1.0, 1.0), space(eps, 4)).unwrap();
        for u in random_points(&chart, 5, 2) {
            let (fp, cd) = frame_and_curvature(&chart, &u).unwrap();
            assert!(fp.shape.amax() < 1e-12);
            assert!(fp.cos_theta.abs() < 1e-12);
            assert!((fp.t_norm2 - 1.0).abs() < 1e-12);
            let x = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
            assert!(sectional(&cd, &fp, &fp.t, &x).unwrap().abs() < 1e-12);
            let (a, b) = geometry::t_field_residuals(&chart, &u).unwrap();
            assert!(a < 1e-12 && b < 1e-12);
        }
    }
}

#[test]
fn weyl_tensor_is_trace_free_with_curvature_symmetries() {
    let chart = tojeiro_chart(TubeBase { dim: 1, radius: 0.6 }, HeightFunction { coeffs: [0.0, 0.9, 0.4, 0.3] }, (-0.2, 0.2), space(Epsilon::Sphere, 5))
        .unwrap();
    for u in random_points(&chart, 5, 4) {
        let (fp, cd) = frame_and_curvature(&chart, &u).unwrap();
        let w = cd.weyl().unwrap();
        assert!(riemann_symmetry_defect(w) < 1e-8);
        let n = 5;
        for j in 0..n {
            for k in 0..n {
                let tr: f64 = (0..n).flat_map(|i| (0..n).map(move |l| (i, l))).map(|(i, l)| fp.metric_inv[(i, l)] * w.get(i, j, k, l)).sum();
                assert!(tr.abs() < 1e-8);
            }
        }
        assert!(w.frobenius(&fp.orthonormal_frame().unwrap()) > 1e-3);
    }
}

#[test]
fn generic_rotation_chart_is_not_semi_parallel() {
    let chart = rotation_chart(
        ProfileCurve::analytic(AnalyticProfile::Wave { phi0: 1.0, amp: 0.2, freq: 2.0, slope: 0.7 }, (-0.4, 0.4)),
        space(Epsilon::Sphere, 4),
    )
    .unwrap();
    let samples = Samples::evaluate(&chart, &random_points(&chart, 10, 8)).unwrap();
    let tol = Tolerances::default();
    let (norm, ok) = classify::semi_parallel_verdict(&samples, &tol).unwrap();
    assert!(!ok && norm > 1e-2);
    assert_eq!(classify::radially_flat_verdict(&samples, &tol).unwrap().verdict, RadialVerdict::NotFlat);
    let rig = classify::rigidity_verdict(&samples, &tol).unwrap();
    assert!(!rig.rigid && !rig.constant_scalar);
    // the closed form of R·h agrees and is nonzero
    for p in &samples.points {
        let (exp, pf) = geometry::semi_parallel_expansion(&p.geometry.frame).unwrap();
        let tr = geometry::semi_parallel_tensor(&p.geometry.frame, &p.geometry.curvature).in_frame(&pf.basis);
        assert!(exp.max_abs_diff(&tr) < 1e-9);
    }
}

#[test]
fn expansion_requires_principal_t() {
    let chart = tojeiro_chart(TubeBase::geodesic_sphere(0.7), HeightFunction::linear(1.0), (-0.2, 0.2), space(Epsilon::Sphere, 3)).unwrap();
    let mut fp = frame(&chart, &chart.domain().center()).unwrap();
    fp.h[(0, 1)] += 0.3;
    fp.h[(1, 0)] += 0.3;
    fp.shape = &fp.metric_inv * &fp.h;
    assert!(geometry::semi_parallel_expansion(&fp).is_err());
}

#[test]
fn constant_angle_chart_properties() {
    for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
        let chart = constant_angle_chart(0.9, space(eps, 4)).unwrap();
        let pts = random_points(&chart, 10, 6);
        for u in &pts {
            let fp = frame(&chart, u).unwrap();
            assert!((fp.cos_theta - 0.9_f64.cos()).abs() < 1e-10);
            let (_, b) = geometry::t_field_residuals(&chart, u).unwrap();
            assert!(b < 1e-8);
            let spec = classify::spectrum(&fp, 1e-6).unwrap();
            assert!(spec.t_alignment > 1.0 - 1e-8);
        }
        let product = constant_angle_chart(std::f64::consts::FRAC_PI_2, space(eps, 4)).unwrap();
        let fp = frame(&product, &product.domain().center()).unwrap();
        assert!(fp.cos_theta.abs() < 1e-10, "{}", fp.cos_theta);
        let samples = Samples::evaluate(&product, &random_points(&product, 5, 7)).unwrap();
        let rec = classify::point_record(&samples.points[0], RelationParams::default(), &Tolerances::default()).unwrap();
        assert_eq!(rec.umbilicity, UmbilicityTag::QuasiUmbilical);
    }
}
