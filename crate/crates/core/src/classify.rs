//! Classification verdicts built from pointwise frame and curvature data.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::AmbientSpace;
use crate::error::{GeomError, Result};
use crate::geometry::{
    self, height_gradient_residual, point_geometry, principal_frame, riemann_form, CurvatureData, FramePoint,
    PointGeometry,
};
use crate::surface::Chart;

/// Step of the central differences used for the height-gradient check.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Tolerances of the verdicts and identity checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue clustering tolerance.
    pub cluster: f64,
    /// T is principal when its alignment with an eigenspace exceeds `1 − t_principal`.
    pub t_principal: f64,
    pub t_degenerate: f64,
    pub weyl: f64,
    pub radial: f64,
    pub semi_parallel: f64,
    /// Spread tolerance for constancy tests, scaled by max(1, |value|).
    pub constancy: f64,
    pub relation: f64,
    pub soliton: f64,
    pub oracle: f64,
    pub codazzi: f64,
    pub t_field: f64,
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cluster: 1e-6,
            t_principal: 1e-8,
            t_degenerate: 1e-8,
            weyl: 1e-5,
            radial: 1e-6,
            semi_parallel: 1e-5,
            constancy: 1e-5,
            relation: 1e-6,
            soliton: 1e-4,
            oracle: 1e-5,
            codazzi: 1e-4,
            t_field: 1e-4,
            gradient: 1e-6,
        }
    }
}

impl Tolerances {
    /// Looser identity tolerances for charts over ODE-generated profiles.
    pub fn for_generated() -> Self {
        Tolerances { oracle: 1e-4, ..Self::default() }
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(GeomError::Input(format!("tolerance {key} must be positive, got {value}")));
        }
        let slot = match key {
            "cluster" => &mut self.cluster,
            "t_principal" => &mut self.t_principal,
            "t_degenerate" => &mut self.t_degenerate,
            "weyl" => &mut self.weyl,
            "radial" => &mut self.radial,
            "semi_parallel" => &mut self.semi_parallel,
            "constancy" => &mut self.constancy,
            "relation" => &mut self.relation,
            "soliton" => &mut self.soliton,
            "oracle" => &mut self.oracle,
            "codazzi" => &mut self.codazzi,
            "t_field" => &mut self.t_field,
            "gradient" => &mut self.gradient,
            _ => return Err(GeomError::Input(format!("unknown tolerance key {key:?}"))),
        };
        *slot = value;
        Ok(())
    }
}

/// Clustered eigenvalues of the shape operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeSpectrum {
    /// Group values (mean of each cluster), increasing.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Norm of the projection of T/|T| onto its closest eigenspace; 1 when T = 0.
    pub t_alignment: f64,
    /// Index into `eigenvalues` of the group closest to T; None when T = 0.
    pub t_group: Option<usize>,
    pub lambda_t: Option<f64>,
    pub cluster_tol: f64,
}

impl ShapeSpectrum {
    pub fn n(&self) -> usize {
        self.multiplicities.iter().sum()
    }
}

fn cluster(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if {
                let prev = values[*g.last().unwrap()];
                values[i] - prev <= tol * (1.0 + prev.abs())
            } =>
            {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups
}

pub fn spectrum(fp: &FramePoint, cluster_tol: f64) -> Result<ShapeSpectrum> {
    spectrum_with(fp, cluster_tol, geometry::T_DEGENERATE_TOL)
}

fn spectrum_with(fp: &FramePoint, cluster_tol: f64, t_degenerate: f64) -> Result<ShapeSpectrum> {
    if !(cluster_tol > 0.0) {
        return Err(GeomError::Input(format!("cluster tolerance must be positive, got {cluster_tol}")));
    }
    let a = fp.symmetric_shape()?;
    let eig = SymmetricEigen::new(a);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let groups = cluster(&values, cluster_tol);
    let eigenvalues: Vec<f64> = groups.iter().map(|g| g.iter().map(|&i| values[i]).sum::<f64>() / g.len() as f64).collect();
    let multiplicities = groups.iter().map(Vec::len).collect();
    let t_orth = fp.cholesky_factor()?.transpose() * &fp.t;
    let tn = t_orth.norm();
    let (t_alignment, t_group) = if tn <= t_degenerate {
        (1.0, None)
    } else {
        let t_hat = t_orth / tn;
        groups
            .iter()
            .enumerate()
            .map(|(gi, g)| (g.iter().map(|&i| eig.eigenvectors.column(i).dot(&t_hat).powi(2)).sum::<f64>().sqrt(), Some(gi)))
            .fold((f64::NEG_INFINITY, None), |best, cur| if cur.0 > best.0 { cur } else { best })
    };
    let lambda_t = t_group.map(|g| eigenvalues[g]);
    Ok(ShapeSpectrum { eigenvalues, multiplicities, t_alignment: t_alignment.min(1.0), t_group, lambda_t, cluster_tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UmbilicityTag {
    TotallyGeodesic,
    TotallyUmbilical,
    QuasiUmbilical,
    Generic,
}

pub fn umbilicity(spec: &ShapeSpectrum) -> UmbilicityTag {
    let n = spec.n();
    match spec.multiplicities.as_slice() {
        [_] if spec.eigenvalues[0].abs() < spec.cluster_tol => UmbilicityTag::TotallyGeodesic,
        [_] => UmbilicityTag::TotallyUmbilical,
        [a, b] if (*a == 1 && *b == n - 1) || (*a == n - 1 && *b == 1) => UmbilicityTag::QuasiUmbilical,
        _ => UmbilicityTag::Generic,
    }
}

/// Residual of a named relation, or the reason it does not apply at this point.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Residual {
    Value(f64),
    NotApplicable(String),
}

impl Residual {
    pub fn value(&self) -> Option<f64> {
        match self {
            Residual::Value(v) => Some(*v),
            Residual::NotApplicable(_) => None,
        }
    }
}

/// Eigenvalue data of a frame whose T is principal: λ on T, the orbit values μ_i.
#[derive(Clone, Debug)]
struct AdaptedValues {
    lambda: f64,
    mu: Vec<f64>,
    basis: Option<DMatrix<f64>>,
}

fn adapted_values(fp: &FramePoint, spec: &ShapeSpectrum, tol: &Tolerances) -> std::result::Result<AdaptedValues, String> {
    if spec.t_group.is_none() {
        return match spec.multiplicities.as_slice() {
            [n] => Ok(AdaptedValues { lambda: spec.eigenvalues[0], mu: vec![spec.eigenvalues[0]; n - 1], basis: None }),
            _ => Err("T vanishes and the shape operator is not umbilical".into()),
        };
    }
    if spec.t_alignment < 1.0 - tol.t_principal {
        return Err(format!("T is not principal (alignment {:.3e} short of 1)", 1.0 - spec.t_alignment));
    }
    let pf = principal_frame(fp).map_err(|e| e.to_string())?;
    Ok(AdaptedValues { lambda: pf.mu[0], mu: pf.mu[1..].to_vec(), basis: Some(pf.basis) })
}

/// Relation parameters for [`relation_residuals`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationParams {
    /// Soliton constant of the Ricci soliton relation; None skips it.
    pub c: Option<f64>,
}

/// Residuals of the closed-form relations between λ, μ, θ and the curvature:
/// `radial_curvature`: `max_i |R(e_i,T,T,e_i) − |T|²(μ_iλ + εcos²θ)|`;
/// `orbit_ricci`: `max_i |Ric(e_i,e_i) − (n−2)(μ²+ε) − εcos²θ − λμ|` on the orbit directions;
/// `soliton_orbit`: `|μcosθ + (n−2)(μ²+ε) + εcos²θ + λμ − c|`;
/// `scalar_curvature`: `|ρ − (n−1)(n−2)(μ²+ε) − 2(n−1)(λμ + εcos²θ)|`;
/// `semi_parallel_relation`: `|λμ + εcos²θ|`;
/// `product_relation`: `|λ| + |cosθ| + |μ_1μ_2 + ε|` for exactly two orbit groups.
pub fn relation_residuals(
    fp: &FramePoint,
    cd: &CurvatureData,
    params: RelationParams,
    tol: &Tolerances,
) -> Result<BTreeMap<String, Residual>> {
    let spec = spectrum_with(fp, tol.cluster, tol.t_degenerate)?;
    let tag = umbilicity(&spec);
    let n = fp.n();
    let nf = n as f64;
    let eps = fp.epsilon;
    let cos2 = fp.cos_theta * fp.cos_theta;
    let mut out = BTreeMap::new();
    let na = |s: &str| Residual::NotApplicable(s.to_string());
    let adapted = adapted_values(fp, &spec, tol);

    let radial_curvature = match &adapted {
        Ok(AdaptedValues { lambda, mu, basis: Some(basis) }) => {
            let t = &fp.t;
            let worst = (1..n)
                .map(|i| {
                    let e = basis.column(i).clone_owned();
                    let lhs = riemann_form(cd, &e, t, t, &e);
                    (lhs - fp.t_norm2 * (mu[i - 1] * lambda + eps * cos2)).abs()
                })
                .fold(0.0, f64::max);
            Residual::Value(worst)
        }
        Ok(_) => na("T vanishes"),
        Err(e) => Residual::NotApplicable(e.clone()),
    };
    out.insert("radial_curvature".to_string(), radial_curvature);

    let quasi = matches!(tag, UmbilicityTag::QuasiUmbilical | UmbilicityTag::TotallyUmbilical | UmbilicityTag::TotallyGeodesic);
    let qu_values = match (&adapted, quasi) {
        (Ok(v), true) => {
            let mu = v.mu.iter().sum::<f64>() / v.mu.len() as f64;
            let spread = v.mu.iter().map(|m| (m - mu).abs()).fold(0.0, f64::max);
            if spread > tol.cluster * (1.0 + mu.abs()) {
                Err("T lies in the multiple eigenspace".to_string())
            } else {
                Ok((v.lambda, mu, v.basis.clone()))
            }
        }
        (Ok(_), false) => Err(format!("shape operator is {tag:?}, not quasi-umbilical")),
        (Err(e), _) => Err(e.clone()),
    };
    match &qu_values {
        Ok((lambda, mu, basis)) => {
            let orbit_ricci = (n - 2) as f64 * (mu * mu + eps) + eps * cos2 + lambda * mu;
            let e = match basis {
                Some(b) => b.clone(),
                None => fp.orthonormal_frame()?,
            };
            let first = if basis.is_some() { 1 } else { 0 };
            let orbit_ricci_residual = (first..n)
                .map(|i| {
                    let v = e.column(i).clone_owned();
                    ((v.transpose() * &cd.ricci * &v)[(0, 0)] - orbit_ricci).abs()
                })
                .fold(0.0, f64::max);
            out.insert("orbit_ricci".to_string(), Residual::Value(orbit_ricci_residual));
            out.insert(
                "soliton_orbit".to_string(),
                match params.c {
                    Some(c) => Residual::Value((mu * fp.cos_theta + orbit_ricci - c).abs()),
                    None => na("no soliton constant given"),
                },
            );
            let rho = (nf - 1.0) * (nf - 2.0) * (mu * mu + eps) + 2.0 * (nf - 1.0) * (lambda * mu + eps * cos2);
            out.insert("scalar_curvature".to_string(), Residual::Value((cd.scalar - rho).abs()));
            out.insert("semi_parallel_relation".to_string(), Residual::Value((lambda * mu + eps * cos2).abs()));
        }
        Err(reason) => {
            for key in ["orbit_ricci", "soliton_orbit", "scalar_curvature", "semi_parallel_relation"] {
                out.insert(key.to_string(), Residual::NotApplicable(reason.clone()));
            }
        }
    }

    let product = match &adapted {
        Ok(AdaptedValues { lambda, mu, basis: Some(_) }) => {
            let groups = cluster(mu, tol.cluster);
            if groups.len() == 2 {
                let m1 = groups[0].iter().map(|&i| mu[i]).sum::<f64>() / groups[0].len() as f64;
                let m2 = groups[1].iter().map(|&i| mu[i]).sum::<f64>() / groups[1].len() as f64;
                Residual::Value(lambda.abs() + fp.cos_theta.abs() + (m1 * m2 + eps).abs())
            } else {
                Residual::NotApplicable(format!("{} orbit eigenvalue groups, expected 2", groups.len()))
            }
        }
        Ok(_) => na("T vanishes"),
        Err(e) => Residual::NotApplicable(e.clone()),
    };
    out.insert("product_relation".to_string(), product);
    Ok(out)
}

/// Sup-norm of `R(E_a, T̂, T̂, E_b)` over a g-orthonormal frame; None when |T| ≤ `t_degenerate`.
pub fn radial_defect(fp: &FramePoint, cd: &CurvatureData, t_degenerate: f64) -> Result<Option<f64>> {
    let tn = fp.t_norm2.max(0.0).sqrt();
    if tn <= t_degenerate {
        return Ok(None);
    }
    let t_hat = &fp.t / tn;
    let e = fp.orthonormal_frame()?;
    let n = fp.n();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let ea = e.column(a).clone_owned();
        for b in a..n {
            let eb = e.column(b).clone_owned();
            worst = worst.max(riemann_form(cd, &ea, &t_hat, &t_hat, &eb).abs());
        }
    }
    Ok(Some(worst))
}

/// Pointwise evaluation record of a sample.
#[derive(Clone, Debug)]
pub struct PointSample {
    pub geometry: PointGeometry,
    pub height_gradient: f64,
}

/// Geometry evaluated at a set of sample points of one chart.
#[derive(Clone, Debug)]
pub struct Samples {
    pub space: AmbientSpace,
    pub points: Vec<PointSample>,
}

impl Samples {
    /// Evaluates every sample in parallel; the output order follows `us`.
    pub fn evaluate(chart: &Chart, us: &[Vec<f64>]) -> Result<Samples> {
        let points = us
            .par_iter()
            .map(|u| {
                let geometry = point_geometry(chart, u)?;
                let height_gradient = height_gradient_residual(chart, &geometry.frame, GRADIENT_STEP)?;
                Ok(PointSample { geometry, height_gradient })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Samples { space: *chart.space(), points })
    }

    /// Like [`Samples::evaluate`], but keeps the points that evaluate and
    /// returns the failures with their sample index.
    pub fn evaluate_partial(chart: &Chart, us: &[Vec<f64>]) -> (Samples, Vec<(usize, GeomError)>) {
        let results: Vec<Result<PointSample>> = us
            .par_iter()
            .map(|u| {
                let geometry = point_geometry(chart, u)?;
                let height_gradient = height_gradient_residual(chart, &geometry.frame, GRADIENT_STEP)?;
                Ok(PointSample { geometry, height_gradient })
            })
            .collect();
        let mut points = Vec::new();
        let mut failures = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(p) => points.push(p),
                Err(e) => failures.push((i, e)),
            }
        }
        (Samples { space: *chart.space(), points }, failures)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn frames(&self) -> impl Iterator<Item = (&FramePoint, &CurvatureData)> {
        self.points.iter().map(|p| (&p.geometry.frame, &p.geometry.curvature))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConformalVerdict {
    pub weyl_max: f64,
    pub umbilic_criterion: bool,
}

/// Weyl norm and the quasi-umbilicity criterion, reported independently.
pub fn conformally_flat_verdict(samples: &Samples, tol: &Tolerances) -> Result<ConformalVerdict> {
    if samples.space.n <= 3 {
        return Err(GeomError::Dimension(format!("conformal flatness check requires n >= 4, got n = {}", samples.space.n)));
    }
    let mut weyl_max: f64 = 0.0;
    let mut umbilic = true;
    for (fp, cd) in samples.frames() {
        weyl_max = weyl_max.max(cd.weyl()?.frobenius(&fp.orthonormal_frame()?));
        let tag = umbilicity(&spectrum_with(fp, tol.cluster, tol.t_degenerate)?);
        umbilic &= tag != UmbilicityTag::Generic;
    }
    Ok(ConformalVerdict { weyl_max, umbilic_criterion: umbilic })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialVerdict {
    Flat,
    NotFlat,
    /// T vanishes at every sample.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialReport {
    pub verdict: RadialVerdict,
    pub max_defect: f64,
    pub degenerate_points: usize,
}

pub fn radially_flat_verdict(samples: &Samples, tol: &Tolerances) -> Result<RadialReport> {
    let mut max_defect: f64 = 0.0;
    let mut degenerate_points = 0;
    for (fp, cd) in samples.frames() {
        match radial_defect(fp, cd, tol.t_degenerate)? {
            Some(d) => max_defect = max_defect.max(d),
            None => degenerate_points += 1,
        }
    }
    let verdict = if degenerate_points == samples.len() {
        RadialVerdict::Degenerate
    } else if max_defect < tol.radial {
        RadialVerdict::Flat
    } else {
        RadialVerdict::NotFlat
    };
    Ok(RadialReport { verdict, max_defect, degenerate_points })
}

/// Sup-norm of R·h on a g-orthonormal frame.
pub fn semi_parallel_norm(fp: &FramePoint, cd: &CurvatureData) -> Result<f64> {
    Ok(geometry::semi_parallel_tensor(fp, cd).in_frame(&fp.orthonormal_frame()?).max_abs())
}

pub fn semi_parallel_verdict(samples: &Samples, tol: &Tolerances) -> Result<(f64, bool)> {
    let mut worst: f64 = 0.0;
    for (fp, cd) in samples.frames() {
        worst = worst.max(semi_parallel_norm(fp, cd)?);
    }
    Ok((worst, worst < tol.semi_parallel))
}

/// Sup-norm of the soliton residual on a g-orthonormal frame.
pub fn soliton_norm(fp: &FramePoint, cd: &CurvatureData, c: f64) -> Result<f64> {
    let e = fp.orthonormal_frame()?;
    Ok((e.transpose() * geometry::soliton_residual(fp, cd, c) * e).amax())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityReport {
    pub scalar_min: f64,
    pub scalar_max: f64,
    pub constant_scalar: bool,
    pub radial: RadialVerdict,
    pub rigid: bool,
    /// True when the radial test was vacuous (T = 0) and rigidity holds by convention.
    pub degenerate: bool,
}

pub fn rigidity_verdict(samples: &Samples, tol: &Tolerances) -> Result<RigidityReport> {
    let (lo, hi) = samples.frames().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, cd)| (lo.min(cd.scalar), hi.max(cd.scalar)));
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let constant_scalar = hi - lo < tol.constancy * scale;
    let radial = radially_flat_verdict(samples, tol)?.verdict;
    let degenerate = radial == RadialVerdict::Degenerate;
    let rigid = constant_scalar && radial != RadialVerdict::NotFlat;
    Ok(RigidityReport { scalar_min: lo, scalar_max: hi, constant_scalar, radial, rigid, degenerate })
}

/// Per-point record of the classification report.
#[derive(Clone, Debug, Serialize)]
pub struct PointRecord {
    pub u: Vec<f64>,
    pub umbilicity: UmbilicityTag,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub t_principal: bool,
    pub t_alignment: f64,
    pub cos_theta: f64,
    pub t_norm: f64,
    pub weyl_norm: Option<f64>,
    pub radial_defect: Option<f64>,
    pub radially_flat: Option<bool>,
    pub semi_parallel_norm: f64,
    pub soliton_residual_norm: Option<f64>,
    pub scalar: f64,
    pub oracle_defect: f64,
    pub codazzi: f64,
    pub t_field: (f64, f64),
    pub height_gradient: f64,
    pub unit_defect: f64,
    pub relation_residuals: BTreeMap<String, Residual>,
}

pub fn point_record(sample: &PointSample, params: RelationParams, tol: &Tolerances) -> Result<PointRecord> {
    let pg = &sample.geometry;
    let (fp, cd) = (&pg.frame, &pg.curvature);
    let spec = spectrum_with(fp, tol.cluster, tol.t_degenerate)?;
    let e = fp.orthonormal_frame()?;
    let radial = radial_defect(fp, cd, tol.t_degenerate)?;
    Ok(PointRecord {
        u: fp.u.clone(),
        umbilicity: umbilicity(&spec),
        eigenvalues: spec.eigenvalues.clone(),
        multiplicities: spec.multiplicities.clone(),
        t_principal: spec.t_alignment >= 1.0 - tol.t_principal,
        t_alignment: spec.t_alignment,
        cos_theta: fp.cos_theta,
        t_norm: fp.t_norm2.max(0.0).sqrt(),
        weyl_norm: cd.weyl().ok().map(|w| w.frobenius(&e)),
        radial_defect: radial,
        radially_flat: radial.map(|d| d < tol.radial),
        semi_parallel_norm: semi_parallel_norm(fp, cd)?,
        soliton_residual_norm: params.c.map(|c| soliton_norm(fp, cd, c)).transpose()?,
        scalar: cd.scalar,
        oracle_defect: cd.riemann.max_abs_diff(&pg.riemann_intrinsic),
        codazzi: pg.codazzi,
        t_field: pg.t_field,
        height_gradient: sample.height_gradient,
        unit_defect: (fp.t_norm2 + fp.cos_theta * fp.cos_theta - 1.0).abs(),
        relation_residuals: relation_residuals(fp, cd, params, tol)?,
    })
}

/// Aggregated classification of a sample set.
#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub points: Vec<PointRecord>,
    pub conformal: Option<ConformalVerdict>,
    pub radial: RadialReport,
    pub semi_parallel: (f64, bool),
    pub rigidity: RigidityReport,
}

pub fn classify(samples: &Samples, params: RelationParams, tol: &Tolerances) -> Result<ClassificationReport> {
    let points = samples.points.iter().map(|s| point_record(s, params, tol)).collect::<Result<Vec<_>>>()?;
    let conformal = match conformally_flat_verdict(samples, tol) {
        Ok(v) => Some(v),
        Err(GeomError::Dimension(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationReport {
        points,
        conformal,
        radial: radially_flat_verdict(samples, tol)?,
        semi_parallel: semi_parallel_verdict(samples, tol)?,
        rigidity: rigidity_verdict(samples, tol)?,
    })
}

/// Largest |K| over the planes spanned by two principal directions orthogonal to T.
pub fn orbital_sectional_extent(fp: &FramePoint, cd: &CurvatureData) -> Result<f64> {
    let n = fp.n();
    let pf = match principal_frame(fp) {
        Ok(pf) => pf.basis,
        Err(_) => fp.orthonormal_frame()?,
    };
    let mut worst: f64 = 0.0;
    for i in 1..n {
        for j in (i + 1)..n {
            let x: DVector<f64> = pf.column(i).clone_owned();
            let y: DVector<f64> = pf.column(j).clone_owned();
            worst = worst.max(geometry::sectional(cd, fp, &x, &y)?.abs());
        }
    }
    Ok(worst)
}
