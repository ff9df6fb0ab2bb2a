//! Report assembly and output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hypersurf::classify::{self, PointRecord, RadialVerdict, RelationParams, Residual, Samples, Tolerances};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{CheckName, CheckSpec};

pub const RNG_NAME: &str = hypersurf::acceptance::RNG_NAME;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn threshold(value: f64, tolerance: f64) -> Self {
        let status = if value < tolerance { Status::Pass } else { Status::Fail };
        Verdict { status, value: Some(value), tolerance: Some(tolerance), flags: vec![], detail: None }
    }

    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Verdict { status: Status::NotApplicable, value: None, tolerance: None, flags: vec![], detail: Some(reason.into()) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn flag(mut self, f: impl Into<String>) -> Self {
        self.flags.push(f.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Diagnostic {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Diagnostic { kind, message: message.into(), sample: None, t: None }
    }
}

/// Functional dependence λ = λ(μ, θ) in general is not tested.
pub const SCOPE_NOTE: &str =
    "only the named relations (semi-parallel, soliton, constant scalar, constant angle) are checked; an arbitrary functional relation between lambda, mu and theta is not detected";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Pass,
    Fail,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub scenario: Value,
    pub points: Vec<Value>,
    pub aggregates: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub diagnostics: Vec<Diagnostic>,
    pub meta: BTreeMap<String, Value>,
}

impl Report {
    pub fn overall(&self) -> Overall {
        let failed_points = self.diagnostics.iter().any(|d| d.kind == "regularity");
        if failed_points || self.verdicts.values().any(|v| v.status == Status::Fail) {
            Overall::Fail
        } else {
            Overall::Pass
        }
    }

    pub fn finish(&mut self, wall_clock: f64) {
        let overall = self.overall();
        self.meta.insert("overall".into(), json!(overall));
        self.meta.insert("timing".into(), json!({ "wall_clock_s": wall_clock }));
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .map(|(k, v)| {
                let tag = match v.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::NotApplicable => "N/A ",
                };
                let value = v.value.map(|x| format!(" value={x:.3e}")).unwrap_or_default();
                let tol = v.tolerance.map(|x| format!(" tol={x:.1e}")).unwrap_or_default();
                let flags = if v.flags.is_empty() { String::new() } else { format!(" [{}]", v.flags.join(", ")) };
                let detail = v.detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default();
                format!("{tag} {k}:{value}{tol}{flags}{detail}")
            })
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        fs::write(path, text)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Aggregate {
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

fn aggregate(values: impl Iterator<Item = f64>) -> Option<Aggregate> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    Some(Aggregate {
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        count: v.len(),
    })
}

pub fn aggregates(records: &[PointRecord]) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    let mut put = |name: &str, a: Option<Aggregate>| {
        if let Some(a) = a {
            out.insert(name.to_string(), serde_json::to_value(a).unwrap());
        }
    };
    put("gauss_oracle_defect", aggregate(records.iter().map(|r| r.oracle_defect)));
    put("codazzi", aggregate(records.iter().map(|r| r.codazzi)));
    put("t_field_tangent", aggregate(records.iter().map(|r| r.t_field.0)));
    put("t_field_angle", aggregate(records.iter().map(|r| r.t_field.1)));
    put("height_gradient", aggregate(records.iter().map(|r| r.height_gradient)));
    put("unit_defect", aggregate(records.iter().map(|r| r.unit_defect)));
    put("weyl_norm", aggregate(records.iter().filter_map(|r| r.weyl_norm)));
    put("radial_defect", aggregate(records.iter().filter_map(|r| r.radial_defect)));
    put("semi_parallel_norm", aggregate(records.iter().map(|r| r.semi_parallel_norm)));
    put("soliton_residual_norm", aggregate(records.iter().filter_map(|r| r.soliton_residual_norm)));
    put("scalar_curvature", aggregate(records.iter().map(|r| r.scalar)));
    let keys: std::collections::BTreeSet<String> = records.iter().flat_map(|r| r.relation_residuals.keys().cloned()).collect();
    for k in keys {
        let a = aggregate(records.iter().filter_map(|r| r.relation_residuals.get(&k).and_then(Residual::value)));
        put(&format!("relation.{k}"), a);
    }
    out
}

pub fn point_rows(records: &[PointRecord], indices: &[usize]) -> Vec<Value> {
    records
        .iter()
        .zip(indices)
        .map(|(r, i)| {
            let mut v = serde_json::to_value(r).expect("record serializes");
            v.as_object_mut().unwrap().insert("sample".into(), json!(i));
            v
        })
        .collect()
}

/// Evaluates one requested check against the evaluated samples.
pub fn run_check(
    check: CheckName,
    samples: &Samples,
    records: &[PointRecord],
    params: RelationParams,
    tol: &Tolerances,
) -> Verdict {
    if samples.is_empty() {
        return Verdict { status: Status::Fail, value: None, tolerance: None, flags: vec![], detail: Some("no sample point evaluated".into()) };
    }
    let max = |f: &dyn Fn(&PointRecord) -> f64| records.iter().map(f).fold(0.0_f64, f64::max);
    match check {
        CheckName::Gauss => Verdict::threshold(max(&|r| r.oracle_defect), tol.oracle),
        CheckName::Codazzi => Verdict::threshold(max(&|r| r.codazzi), tol.codazzi),
        CheckName::TField => Verdict::threshold(max(&|r| r.t_field.0.max(r.t_field.1)), tol.t_field),
        CheckName::HeightGradient => Verdict::threshold(max(&|r| r.height_gradient), tol.gradient),
        CheckName::ConformallyFlat => match classify::conformally_flat_verdict(samples, tol) {
            Ok(c) => Verdict::threshold(c.weyl_max, tol.weyl).with_detail(format!(
                "quasi-umbilical at every sample: {}; agrees with the Weyl test: {}",
                c.umbilic_criterion,
                c.umbilic_criterion == (c.weyl_max < tol.weyl)
            )),
            Err(e) => Verdict::not_applicable(e.to_string()),
        },
        CheckName::RadiallyFlat => match classify::radially_flat_verdict(samples, tol) {
            Ok(r) => match r.verdict {
                RadialVerdict::Flat => Verdict::threshold(r.max_defect, tol.radial),
                RadialVerdict::NotFlat => Verdict::threshold(r.max_defect, tol.radial),
                RadialVerdict::Degenerate => Verdict {
                    status: Status::Pass,
                    value: None,
                    tolerance: Some(tol.t_degenerate),
                    flags: vec!["degenerate".into()],
                    detail: Some("degenerate (T = 0): no plane contains T; flat by convention".into()),
                },
            }
            .with_detail_if(r.degenerate_points > 0 && r.verdict != RadialVerdict::Degenerate, || {
                format!("{} sample(s) with T = 0 skipped", r.degenerate_points)
            }),
            Err(e) => Verdict::not_applicable(e.to_string()),
        },
        CheckName::SemiParallel => match classify::semi_parallel_verdict(samples, tol) {
            Ok((norm, _)) => Verdict::threshold(norm, tol.semi_parallel),
            Err(e) => Verdict::not_applicable(e.to_string()),
        },
        CheckName::Rigidity => match classify::rigidity_verdict(samples, tol) {
            Ok(r) => {
                let radial_flat = r.radial != RadialVerdict::NotFlat;
                let agree = r.constant_scalar == radial_flat;
                let mut v = Verdict {
                    status: if agree { Status::Pass } else { Status::Fail },
                    value: Some(r.scalar_max - r.scalar_min),
                    tolerance: None,
                    flags: vec![],
                    detail: Some(format!(
                        "constant scalar curvature: {}; radially flat: {:?}; equivalence holds: {agree}",
                        r.constant_scalar, r.radial
                    )),
                };
                if r.degenerate {
                    v = v.flag("degenerate");
                }
                v
            }
            Err(e) => Verdict::not_applicable(e.to_string()),
        },
        CheckName::ConstantScalar => match classify::rigidity_verdict(samples, tol) {
            Ok(r) => {
                Verdict::threshold(r.scalar_max - r.scalar_min, tol.constancy)
                    .with_detail(format!("scalar curvature in [{:.9}, {:.9}]", r.scalar_min, r.scalar_max))
            }
            Err(e) => Verdict::not_applicable(e.to_string()),
        },
        CheckName::ClosedForms => {
            let keys = ["radial_curvature", "orbit_ricci", "scalar_curvature"];
            let values: Vec<f64> = records
                .iter()
                .flat_map(|r| keys.iter().filter_map(|k| r.relation_residuals.get(*k).and_then(Residual::value)))
                .collect();
            if values.is_empty() {
                Verdict::not_applicable("no sample is quasi-umbilical with T principal")
            } else {
                let applicable = records.iter().filter(|r| r.relation_residuals.get("scalar_curvature").and_then(Residual::value).is_some()).count();
                Verdict::threshold(values.iter().copied().fold(0.0, f64::max), tol.relation)
                    .with_detail(format!("{applicable} of {} samples applicable", records.len()))
            }
        }
        CheckName::Soliton => match params.c {
            None => Verdict::not_applicable("no soliton constant given (set soliton_c)"),
            Some(c) => {
                let full = max(&|r| r.soliton_residual_norm.unwrap_or(f64::INFINITY));
                let orbit = records
                    .iter()
                    .filter_map(|r| r.relation_residuals.get("soliton_orbit").and_then(Residual::value))
                    .fold(f64::NAN, f64::max);
                Verdict::threshold(full, tol.soliton).with_detail(format!("c = {c}; orbit block max = {orbit:.3e}"))
            }
        },
    }
}

trait DetailIf {
    fn with_detail_if(self, cond: bool, f: impl FnOnce() -> String) -> Self;
}

impl DetailIf for Verdict {
    fn with_detail_if(self, cond: bool, f: impl FnOnce() -> String) -> Self {
        if cond {
            self.with_detail(f())
        } else {
            self
        }
    }
}

/// Verdicts of the requested checks, keyed by check name.
pub fn verdicts(checks: &[CheckSpec], samples: &Samples, records: &[PointRecord], params: RelationParams, tols: &[Tolerances]) -> BTreeMap<String, Verdict> {
    checks
        .iter()
        .zip(tols)
        .map(|(c, tol)| (c.name().as_str().to_string(), run_check(c.name(), samples, records, params, tol)))
        .collect()
}

pub fn base_meta(seed: Option<u64>) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("tool".into(), json!(env!("CARGO_PKG_NAME"))),
        ("version".into(), json!(env!("CARGO_PKG_VERSION"))),
        ("rng".into(), json!(RNG_NAME)),
        ("seed".into(), json!(seed)),
    ])
}

/// Writes one CSV row per evaluated sample.
pub fn write_points_csv(path: &Path, records: &[PointRecord], indices: &[usize]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    let n = records.first().map(|r| r.u.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["sample".into()];
    header.extend((0..n).map(|i| format!("u{i}")));
    header.extend(
        [
            "umbilicity",
            "eigenvalues",
            "multiplicities",
            "t_principal",
            "cos_theta",
            "t_norm",
            "weyl_norm",
            "radial_defect",
            "semi_parallel_norm",
            "soliton_residual_norm",
            "scalar",
            "gauss_oracle_defect",
            "codazzi",
            "height_gradient",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(|e| e.to_string())?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    let join = |xs: Vec<String>| xs.join(" ");
    for (r, i) in records.iter().zip(indices) {
        let mut row = vec![i.to_string()];
        row.extend(r.u.iter().map(|x| format!("{x:e}")));
        row.push(serde_json::to_value(r.umbilicity).unwrap().as_str().unwrap_or_default().to_string());
        row.push(join(r.eigenvalues.iter().map(|x| format!("{x:e}")).collect()));
        row.push(join(r.multiplicities.iter().map(|x| x.to_string()).collect()));
        row.push(r.t_principal.to_string());
        row.push(format!("{:e}", r.cos_theta));
        row.push(format!("{:e}", r.t_norm));
        row.push(opt(r.weyl_norm));
        row.push(opt(r.radial_defect));
        row.push(format!("{:e}", r.semi_parallel_norm));
        row.push(opt(r.soliton_residual_norm));
        row.push(format!("{:e}", r.scalar));
        row.push(format!("{:e}", r.oracle_defect));
        row.push(format!("{:e}", r.codazzi));
        row.push(format!("{:e}", r.height_gradient));
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}
