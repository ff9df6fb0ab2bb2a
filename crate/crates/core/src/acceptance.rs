//! Acceptance suite: fixed-seed numerical checks of the structure equations
//! and classification results on built-in charts.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambient::{AmbientSpace, Epsilon};
use crate::classify::{
    self, orbital_sectional_extent, point_record, radially_flat_verdict, rigidity_verdict, semi_parallel_verdict,
    soliton_norm, spectrum, PointRecord, RadialVerdict, RelationParams, Samples, Tolerances, UmbilicityTag,
};
use crate::error::Result;
use crate::geometry::{self, principal_frame, semi_parallel_expansion, semi_parallel_tensor};
use crate::profiles::{self, integrate_family, Family, OdeState, RelationSpec, StepControl};
use crate::surface::*;

/// Name of the sampling generator recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng";
pub const DEFAULT_SEED: u64 = 20240611;
/// Random interior points per chart.
pub const POINTS_PER_CHART: usize = 20;
/// Margin (fraction of the box width) kept between samples and the chart boundary.
pub const SAMPLE_MARGIN: f64 = 0.05;

/// Initial profile state of the generated families.
pub const FAMILY_INIT: OdeState = OdeState { t: 0.0, phi: 1.0, a: 0.0, dphi: 0.8, da: 0.6 };
/// Profile curvature at the initial state used to fix the soliton constant.
pub const FAMILY_LAMBDA0: f64 = 0.5;
pub const FAMILY_SPAN: (f64, f64) = (-0.5, 0.5);

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// A chart with its evaluated sample set.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub label: String,
    pub chart: Chart,
    pub samples: Samples,
    pub records: Vec<PointRecord>,
    pub generated: bool,
}

impl Fixture {
    fn build(label: String, chart: Chart, seed: u64, params: RelationParams, generated: bool) -> Result<Fixture> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let us = chart.domain().sample_random(&mut rng, POINTS_PER_CHART, SAMPLE_MARGIN);
        let samples = Samples::evaluate(&chart, &us)?;
        let tol = Tolerances::default();
        let records = samples.points.iter().map(|s| point_record(s, params, &tol)).collect::<Result<Vec<_>>>()?;
        Ok(Fixture { label, chart, samples, records, generated })
    }

    fn quasi_umbilical(&self) -> impl Iterator<Item = (usize, &PointRecord)> {
        self.records.iter().enumerate().filter(|(_, r)| r.umbilicity == UmbilicityTag::QuasiUmbilical && r.t_principal)
    }
}

/// All charts the suite runs on.
#[derive(Debug)]
pub struct Fixtures {
    pub seed: u64,
    /// slice, product, Tojeiro, analytic rotation and semi-parallel family, for ε = ±1, n = 4.
    pub core: Vec<Fixture>,
    /// analytic rotation charts with n = 4 and n = 5.
    pub rotations: Vec<Fixture>,
    /// Tojeiro charts over tubes with two base curvature groups.
    pub tube_tojeiro: Vec<Fixture>,
    pub semi_parallel: Vec<(Family, Fixture)>,
    pub soliton: Vec<(Family, Fixture)>,
}

pub fn wave_profile() -> ProfileCurve {
    ProfileCurve::analytic(AnalyticProfile::Wave { phi0: 1.0, amp: 0.15, freq: 2.0, slope: 0.7 }, (-0.5, 0.5))
}

pub fn tojeiro_height() -> HeightFunction {
    HeightFunction { coeffs: [0.0, 0.9, 0.4, 0.3] }
}

fn family(rel: &str, space: AmbientSpace) -> Result<Family> {
    let spec = profiles::relation_constant(rel, &FAMILY_INIT, FAMILY_LAMBDA0, space)?;
    integrate_family(spec, FAMILY_INIT, space, FAMILY_SPAN, StepControl::default())
}

impl Fixtures {
    pub fn build(seed: u64) -> Result<Fixtures> {
        let mut next = seed;
        let mut seed_for = || {
            next = next.wrapping_add(0x9E37_79B9);
            next
        };
        let none = RelationParams::default();
        let mut core = Vec::new();
        let mut rotations = Vec::new();
        let mut tube_tojeiro = Vec::new();
        let mut semi_parallel = Vec::new();
        let mut soliton = Vec::new();
        for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
            let e = eps.sign();
            let sp = AmbientSpace::new(eps, 4)?;
            core.push(Fixture::build(format!("slice eps={e}"), slice_chart(0.2, sp)?, seed_for(), none, false)?);
            core.push(Fixture::build(
                format!("product over geodesic sphere eps={e}"),
                product_chart(TubeBase::geodesic_sphere(0.8), (-1.0, 1.0), sp)?,
                seed_for(),
                none,
                false,
            )?);
            core.push(Fixture::build(
                format!("tojeiro over geodesic sphere eps={e}"),
                tojeiro_chart(TubeBase::geodesic_sphere(0.7), tojeiro_height(), (-0.3, 0.3), sp)?,
                seed_for(),
                none,
                false,
            )?);
            core.push(Fixture::build(format!("rotation wave eps={e}"), rotation_chart(wave_profile(), sp)?, seed_for(), none, false)?);
            let fam = family("semi_parallel", sp)?;
            let fx = Fixture::build(format!("semi-parallel family eps={e}"), fam.chart()?, seed_for(), none, true)?;
            core.push(fx.clone());
            semi_parallel.push((fam, fx));

            for n in [4, 5] {
                let spn = AmbientSpace::new(eps, n)?;
                rotations.push(Fixture::build(
                    format!("rotation wave n={n} eps={e}"),
                    rotation_chart(wave_profile(), spn)?,
                    seed_for(),
                    none,
                    false,
                )?);
            }
            tube_tojeiro.push(Fixture::build(
                format!("tojeiro over tube q=1 eps={e}"),
                tojeiro_chart(TubeBase { dim: 1, radius: 0.6 }, tojeiro_height(), (-0.2, 0.2), sp)?,
                seed_for(),
                none,
                false,
            )?);
            let fam = family("soliton", sp)?;
            let c = match fam.relation {
                RelationSpec::Soliton { c } => c,
                _ => unreachable!(),
            };
            let fx = Fixture::build(format!("soliton family eps={e}"), fam.chart()?, seed_for(), RelationParams { c: Some(c) }, true)?;
            soliton.push((fam, fx));
        }
        Ok(Fixtures { seed, core, rotations, tube_tojeiro, semi_parallel, soliton })
    }

    fn all(&self) -> impl Iterator<Item = &Fixture> {
        self.core
            .iter()
            .chain(&self.rotations)
            .chain(&self.tube_tojeiro)
            .chain(self.soliton.iter().map(|(_, f)| f))
    }

    fn quasi_umbilical_charts(&self) -> impl Iterator<Item = &Fixture> {
        self.core.iter().chain(&self.rotations).chain(self.soliton.iter().map(|(_, f)| f))
    }
}

fn fmt_metrics(m: &BTreeMap<String, f64>) -> String {
    m.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect::<Vec<_>>().join(" ")
}

fn result(name: &'static str, passed: bool, metrics: BTreeMap<String, f64>, extra: &str) -> CriterionResult {
    let mut detail = fmt_metrics(&metrics);
    if !extra.is_empty() {
        detail = format!("{detail} ({extra})");
    }
    CriterionResult { name, passed, metrics, detail }
}

fn max_over<'a>(it: impl Iterator<Item = &'a PointRecord>, f: impl Fn(&PointRecord) -> f64) -> f64 {
    it.map(f).fold(0.0, f64::max)
}

/// Gauss-equation curvature against the Christoffel-symbol curvature.
pub fn gauss_oracle(fx: &Fixtures) -> CriterionResult {
    let closed = max_over(fx.core.iter().filter(|f| !f.generated).flat_map(|f| &f.records), |r| r.oracle_defect);
    let generated = max_over(fx.core.iter().filter(|f| f.generated).flat_map(|f| &f.records), |r| r.oracle_defect);
    let m = BTreeMap::from([("closed_form_max".into(), closed), ("generated_max".into(), generated)]);
    result("gauss-equation oracle", closed < 1e-5 && generated < 1e-4, m, "tol 1e-5, generated 1e-4")
}

/// Codazzi equation and the two T-field identities.
pub fn codazzi_and_t_field(fx: &Fixtures) -> CriterionResult {
    let recs = || fx.core.iter().flat_map(|f| &f.records);
    let m = BTreeMap::from([
        ("codazzi_max".into(), max_over(recs(), |r| r.codazzi)),
        ("t_parallel_max".into(), max_over(recs(), |r| r.t_field.0)),
        ("angle_derivative_max".into(), max_over(recs(), |r| r.t_field.1)),
    ]);
    let ok = m.values().all(|v| *v < 1e-4);
    result("codazzi and T-field identities", ok, m, "tol 1e-4")
}

/// Rotation hypersurfaces are conformally flat and quasi-umbilical.
pub fn rotation_conformally_flat(fx: &Fixtures) -> CriterionResult {
    let tol = Tolerances::default();
    let mut weyl: f64 = 0.0;
    let mut umbilic = true;
    for f in &fx.rotations {
        match classify::conformally_flat_verdict(&f.samples, &tol) {
            Ok(v) => {
                weyl = weyl.max(v.weyl_max);
                umbilic &= v.umbilic_criterion;
            }
            Err(e) => return result("rotation charts conformally flat", false, BTreeMap::new(), &e.to_string()),
        }
    }
    let m = BTreeMap::from([("weyl_max".into(), weyl), ("umbilic_criterion".into(), f64::from(u8::from(umbilic)))]);
    result("rotation charts conformally flat", weyl < 1e-5 && umbilic, m, "n = 4, 5; tol 1e-5")
}

/// Weyl tensor and quasi-umbilicity fail together on a non-quasi-umbilical chart.
pub fn weyl_umbilicity_dichotomy(fx: &Fixtures) -> CriterionResult {
    let tol = Tolerances::default();
    let mut ok = true;
    let mut weyl_min: f64 = f64::INFINITY;
    let mut notes = Vec::new();
    for f in &fx.tube_tojeiro {
        match classify::conformally_flat_verdict(&f.samples, &tol) {
            Ok(v) => {
                weyl_min = weyl_min.min(v.weyl_max);
                ok &= v.weyl_max > 1e-3 && !v.umbilic_criterion;
                notes.push(format!("{}: umbilic_criterion={}", f.label, v.umbilic_criterion));
            }
            Err(e) => {
                ok = false;
                notes.push(e.to_string());
            }
        }
    }
    let m = BTreeMap::from([("weyl_max_smallest_chart".into(), weyl_min)]);
    result("weyl and quasi-umbilicity fail together", ok, m, &notes.join("; "))
}

fn qu_residual(fx: &Fixtures, key: &str) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for f in fx.quasi_umbilical_charts() {
        for (_, r) in f.quasi_umbilical() {
            if let Some(v) = r.relation_residuals[key].value() {
                worst = worst.max(v);
                count += 1;
            }
        }
    }
    (worst, count)
}

/// Sectional curvature of planes through T in terms of λ, μ_i and θ.
pub fn radial_curvature_identity(fx: &Fixtures) -> CriterionResult {
    let (worst, count) = qu_residual(fx, "radial_curvature");
    let m = BTreeMap::from([("max".into(), worst), ("points".into(), count as f64)]);
    result("radial curvature identity", count > 0 && worst < 1e-6, m, "tol 1e-6")
}

/// Generated semi-parallel families: relation, semi-parallelism, radial flatness, shape.
pub fn semi_parallel_family(fx: &Fixtures) -> CriterionResult {
    let tol = Tolerances::for_generated();
    let mut ok = true;
    let mut bookkeeping: f64 = 0.0;
    let mut sp_max: f64 = 0.0;
    let mut radial_max: f64 = 0.0;
    let mut notes = Vec::new();
    for (fam, f) in &fx.semi_parallel {
        let eps = fam.space.epsilon.value();
        match profiles::family_table(fam, 50) {
            Ok(rows) => {
                for r in rows {
                    bookkeeping = bookkeeping.max((r.lambda * r.mu + eps * r.cos_theta * r.cos_theta).abs());
                }
            }
            Err(e) => {
                ok = false;
                notes.push(e.to_string());
            }
        }
        let (sp, _) = semi_parallel_verdict(&f.samples, &tol).unwrap_or((f64::INFINITY, false));
        sp_max = sp_max.max(sp);
        match radially_flat_verdict(&f.samples, &tol) {
            Ok(r) => {
                radial_max = radial_max.max(r.max_defect);
                ok &= r.verdict == RadialVerdict::Flat;
            }
            Err(_) => ok = false,
        }
        let shape_ok = f.records.iter().all(|r| r.umbilicity == UmbilicityTag::QuasiUmbilical && r.t_principal);
        if !shape_ok {
            notes.push(format!("{}: not quasi-umbilical with T principal everywhere", f.label));
        }
        ok &= shape_ok;
        notes.push(format!("{} interval [{:.3}, {:.3}]", f.label, fam.curve.t_range.0, fam.curve.t_range.1));
    }
    ok &= bookkeeping < 1e-8 && sp_max < 1e-5;
    let m = BTreeMap::from([
        ("relation_max".into(), bookkeeping),
        ("semi_parallel_max".into(), sp_max),
        ("radial_defect_max".into(), radial_max),
    ]);
    result("semi-parallel family chain", ok, m, &notes.join("; "))
}

/// Product over a geodesic sphere is radially flat.
pub fn product_radially_flat(fx: &Fixtures) -> CriterionResult {
    let tol = Tolerances::default();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut cos_max: f64 = 0.0;
    for f in fx.core.iter().filter(|f| f.label.starts_with("product")) {
        match radially_flat_verdict(&f.samples, &tol) {
            Ok(r) => {
                worst = worst.max(r.max_defect);
                ok &= r.verdict == RadialVerdict::Flat;
            }
            Err(_) => ok = false,
        }
        cos_max = cos_max.max(max_over(f.records.iter(), |r| r.cos_theta.abs()));
    }
    let m = BTreeMap::from([("radial_defect_max".into(), worst), ("cos_theta_max".into(), cos_max)]);
    result("product over geodesic sphere radially flat", ok && cos_max < 1e-12, m, "")
}

/// Closed form of R·h on the principal frame against the transported tensor.
pub fn semi_parallel_expansion_agrees(fx: &Fixtures) -> CriterionResult {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut failures = 0;
    for f in fx.quasi_umbilical_charts() {
        for (i, _) in f.quasi_umbilical() {
            let pg = &f.samples.points[i].geometry;
            match semi_parallel_expansion(&pg.frame) {
                Ok((expansion, pf)) => {
                    let transported = semi_parallel_tensor(&pg.frame, &pg.curvature).in_frame(&pf.basis);
                    worst = worst.max(expansion.max_abs_diff(&transported));
                    count += 1;
                }
                Err(_) => failures += 1,
            }
        }
    }
    let m = BTreeMap::from([("max".into(), worst), ("points".into(), count as f64), ("precondition_failures".into(), failures as f64)]);
    result("semi-parallel tensor closed form", count > 0 && failures == 0 && worst < 1e-6, m, "tol 1e-6")
}

/// Scalar curvature and orbit Ricci curvature closed forms.
pub fn scalar_and_ricci_closed_forms(fx: &Fixtures) -> CriterionResult {
    let (rho, n1) = qu_residual(fx, "scalar_curvature");
    let (ric, n2) = qu_residual(fx, "orbit_ricci");
    let m = BTreeMap::from([("scalar_max".into(), rho), ("orbit_ricci_max".into(), ric), ("points".into(), n1.min(n2) as f64)]);
    result("scalar and Ricci closed forms", n1 > 0 && n2 > 0 && rho < 1e-6 && ric < 1e-6, m, "tol 1e-6")
}

/// Ricci soliton family: full soliton tensor and the rigidity equivalence.
pub fn soliton_family(fx: &Fixtures) -> CriterionResult {
    let tol = Tolerances::for_generated();
    let mut full: f64 = 0.0;
    let mut orbit: f64 = 0.0;
    let mut equivalence = true;
    let mut notes = Vec::new();
    for (fam, f) in &fx.soliton {
        let c = match fam.relation {
            RelationSpec::Soliton { c } => c,
            _ => unreachable!(),
        };
        for s in &f.samples.points {
            let pg = &s.geometry;
            full = full.max(soliton_norm(&pg.frame, &pg.curvature, c).unwrap_or(f64::INFINITY));
        }
        orbit = orbit.max(max_over(f.records.iter(), |r| r.relation_residuals["soliton_orbit"].value().unwrap_or(f64::INFINITY)));
        match rigidity_verdict(&f.samples, &tol) {
            Ok(r) => {
                let radial_flat = r.radial == RadialVerdict::Flat;
                equivalence &= r.constant_scalar == radial_flat;
                notes.push(format!("{}: constant_scalar={} radial={:?}", f.label, r.constant_scalar, r.radial));
            }
            Err(e) => {
                equivalence = false;
                notes.push(e.to_string());
            }
        }
    }
    let m = BTreeMap::from([
        ("soliton_residual_max".into(), full),
        ("orbit_block_max".into(), orbit),
        ("rigidity_equivalence".into(), f64::from(u8::from(equivalence))),
    ]);
    result("soliton family", full < 1e-4 && equivalence, m, &format!("tol 1e-4; {}", notes.join("; ")))
}

/// Tojeiro principal curvatures against the closed forms in the height function
/// and the parallel-family curvatures. Orientation: cos θ ≥ 0, h = ⟨∇_X Y, N⟩,
/// base curvatures with respect to the unit normal ∂_ρ of the parallel family.
pub fn tojeiro_closed_forms(fx: &Fixtures) -> CriterionResult {
    let mut orbit_err: f64 = 0.0;
    let mut profile_err: f64 = 0.0;
    let mut count = 0;
    let mut notes = Vec::new();
    let charts = fx.core.iter().filter(|f| f.label.starts_with("tojeiro")).chain(&fx.tube_tojeiro);
    for f in charts {
        let (base, radius) = if f.label.contains("tube") { (TubeBase { dim: 1, radius: 0.6 }, 0.6) } else { (TubeBase::geodesic_sphere(0.7), 0.7) };
        let space = *f.chart.space();
        for s in &f.samples.points {
            let fp = &s.geometry.frame;
            let sv = fp.u[0];
            let [_, a1, a2, _] = tojeiro_height().derivs(sv);
            let w = (1.0 + a1 * a1).sqrt();
            let mut expected: Vec<f64> = Vec::new();
            for (k, mult) in base.principal_curvatures(space.epsilon, space.n, radius + sv) {
                expected.extend(std::iter::repeat_n(-a1 / w * k, mult));
            }
            expected.sort_by(f64::total_cmp);
            let k_n = a2 / (w * w * w);
            match principal_frame(fp) {
                Ok(pf) => {
                    let mut orbit = pf.mu[1..].to_vec();
                    orbit.sort_by(f64::total_cmp);
                    let e = orbit.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    orbit_err = orbit_err.max(e);
                    profile_err = profile_err.max((pf.mu[0] - k_n).abs());
                    count += 1;
                }
                Err(e) => notes.push(format!("{}: {e}", f.label)),
            }
        }
    }
    let spec_ok = spectrum_sanity(fx);
    let m = BTreeMap::from([("orbit_max".into(), orbit_err), ("profile_max".into(), profile_err), ("points".into(), count as f64)]);
    let ok = notes.is_empty() && spec_ok && orbit_err < 1e-6 && profile_err < 1e-6;
    result("tojeiro principal curvatures", ok, m, &notes.join("; "))
}

fn spectrum_sanity(fx: &Fixtures) -> bool {
    fx.core.iter().filter(|f| f.label.starts_with("tojeiro")).all(|f| {
        f.samples.points.iter().all(|s| {
            spectrum(&s.geometry.frame, 1e-6).map(|sp| sp.t_alignment > 1.0 - 1e-8 && sp.multiplicities.len() <= 2).unwrap_or(false)
        })
    })
}

/// T is the gradient of the height function.
pub fn height_gradient(fx: &Fixtures) -> CriterionResult {
    let worst = max_over(fx.all().flat_map(|f| &f.records), |r| r.height_gradient);
    let m = BTreeMap::from([("max".into(), worst)]);
    result("T is the height gradient", worst < 1e-6, m, "tol 1e-6")
}

/// Semi-parallel families with λ ≠ 0 are not intrinsically flat.
pub fn no_flatness_witness(fx: &Fixtures) -> CriterionResult {
    let mut ok = true;
    let mut smallest: f64 = f64::INFINITY;
    for (_, f) in &fx.semi_parallel {
        let best = f
            .samples
            .points
            .iter()
            .map(|s| orbital_sectional_extent(&s.geometry.frame, &s.geometry.curvature).unwrap_or(0.0))
            .fold(0.0, f64::max);
        smallest = smallest.min(best);
        ok &= best > 1e-3;
    }
    let m = BTreeMap::from([("orbital_sectional_max".into(), smallest)]);
    result("no intrinsically flat semi-parallel family", ok, m, "threshold 1e-3")
}

pub type Criterion = fn(&Fixtures) -> CriterionResult;

/// All criteria, in report order.
pub const CRITERIA: [Criterion; 13] = [
    gauss_oracle,
    codazzi_and_t_field,
    rotation_conformally_flat,
    weyl_umbilicity_dichotomy,
    radial_curvature_identity,
    semi_parallel_family,
    product_radially_flat,
    semi_parallel_expansion_agrees,
    scalar_and_ricci_closed_forms,
    soliton_family,
    tojeiro_closed_forms,
    height_gradient,
    no_flatness_witness,
];

pub fn run_all(fx: &Fixtures) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| c(fx)).collect()
}

/// The Gauss-equation oracle run on a rotation-chart frame whose second
/// fundamental form has been perturbed; a working harness reports it as failed.
pub fn perturbed_fixture() -> Result<CriterionResult> {
    let space = AmbientSpace::new(Epsilon::Sphere, 4)?;
    let chart = rotation_chart(wave_profile(), space)?;
    let u = chart.domain().center();
    let (mut fp, _) = geometry::frame_and_curvature(&chart, &u)?;
    fp.h[(1, 1)] += 0.05;
    fp.shape = &fp.metric_inv * &fp.h;
    let cd = geometry::curvature_from_frame(&fp, &space, Vec::new());
    let defect = geometry::riemann_intrinsic(&chart, &u)?.max_abs_diff(&cd.riemann);
    let m = BTreeMap::from([("closed_form_max".into(), defect)]);
    Ok(result("gauss-equation oracle (perturbed shape operator)", defect < 1e-5, m, "tol 1e-5"))
}
