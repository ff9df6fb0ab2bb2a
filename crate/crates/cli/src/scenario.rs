//! Scenario files: what to build, where to sample and which checks to run.

use std::collections::BTreeMap;

use hypersurf::classify::{RelationParams, Tolerances};
use hypersurf::profiles::{self, integrate_family, Family, OdeState, RelationSpec, StepControl};
use hypersurf::surface::{
    product_chart, rotation_chart, slice_chart, tojeiro_chart, AnalyticProfile, Chart, HeightFunction, ProfileCurve, TubeBase,
};
use hypersurf::{AmbientSpace, Epsilon, GeomError};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub space: SpaceSpec,
    pub chart: ChartSpec,
    pub sampling: Sampling,
    pub checks: Vec<CheckSpec>,
    /// Global tolerance overrides, applied on top of the defaults.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Soliton constant for the soliton check.
    #[serde(default)]
    pub soliton_c: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub epsilon: i32,
    pub n: usize,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<AmbientSpace, GeomError> {
        AmbientSpace::new(Epsilon::from_sign(self.epsilon)?, self.n)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    Rotation { profile: AnalyticProfile, t_range: (f64, f64) },
    Tojeiro { base: TubeBase, height: HeightFunction, s_range: (f64, f64) },
    Slice { t0: f64 },
    Product { base: TubeBase, s_range: (f64, f64) },
    ConstantAngle { theta: f64 },
    Family(FamilySpec),
}

/// Rotation hypersurface over an integrated profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub relation: RelationSpec,
    pub init: OdeState,
    pub t_span: (f64, f64),
    #[serde(default)]
    pub step: StepControl,
}

impl FamilySpec {
    pub fn integrate(&self, space: AmbientSpace) -> Result<Family, GeomError> {
        integrate_family(self.relation, self.init, space, self.t_span, self.step)
    }
}

pub enum Built {
    Closed(Chart),
    Generated(Family, Chart),
}

impl Built {
    pub fn chart(&self) -> &Chart {
        match self {
            Built::Closed(c) | Built::Generated(_, c) => c,
        }
    }
}

impl ChartSpec {
    pub fn build(&self, space: AmbientSpace) -> Result<Built, GeomError> {
        Ok(match self {
            ChartSpec::Rotation { profile, t_range } => Built::Closed(rotation_chart(ProfileCurve::analytic(*profile, *t_range), space)?),
            ChartSpec::Tojeiro { base, height, s_range } => Built::Closed(tojeiro_chart(*base, *height, *s_range, space)?),
            ChartSpec::Slice { t0 } => Built::Closed(slice_chart(*t0, space)?),
            ChartSpec::Product { base, s_range } => Built::Closed(product_chart(*base, *s_range, space)?),
            ChartSpec::ConstantAngle { theta } => Built::Closed(profiles::constant_angle_chart(*theta, space)?),
            ChartSpec::Family(f) => {
                let fam = f.integrate(space)?;
                let chart = fam.chart()?;
                Built::Generated(fam, chart)
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    Random {
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    Grid {
        per_dim: usize,
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    0.05
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Gauss,
    Codazzi,
    TField,
    HeightGradient,
    ConformallyFlat,
    RadiallyFlat,
    SemiParallel,
    Rigidity,
    ConstantScalar,
    ClosedForms,
    Soliton,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Gauss => "gauss",
            CheckName::Codazzi => "codazzi",
            CheckName::TField => "t_field",
            CheckName::HeightGradient => "height_gradient",
            CheckName::ConformallyFlat => "conformally_flat",
            CheckName::RadiallyFlat => "radially_flat",
            CheckName::SemiParallel => "semi_parallel",
            CheckName::Rigidity => "rigidity",
            CheckName::ConstantScalar => "constant_scalar",
            CheckName::ClosedForms => "closed_forms",
            CheckName::Soliton => "soliton",
        }
    }
}

/// A check given either by name or as `{"name": …, "tolerances": {…}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSpec {
    Name(CheckName),
    WithTolerances {
        name: CheckName,
        #[serde(default)]
        tolerances: BTreeMap<String, f64>,
    },
}

impl CheckSpec {
    pub fn name(&self) -> CheckName {
        match self {
            CheckSpec::Name(n) | CheckSpec::WithTolerances { name: n, .. } => *n,
        }
    }

    pub fn overrides(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            CheckSpec::Name(_) => None,
            CheckSpec::WithTolerances { tolerances, .. } => Some(tolerances),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default)]
    pub points_csv: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { report: default_report(), points_csv: None }
    }
}

fn default_report() -> String {
    "report.json".into()
}

/// Parses scenario text; errors carry the line and column of the offending field.
pub fn parse(text: &str) -> Result<Scenario, String> {
    serde_json::from_str(text).map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))
}

impl Scenario {
    /// Structural checks that serde cannot express.
    pub fn validate(&self) -> Result<AmbientSpace, String> {
        let space = self.space.build().map_err(|e| format!("space: {e}"))?;
        if self.checks.is_empty() {
            return Err("checks: at least one check is required".into());
        }
        if self.checks.iter().any(|c| c.name() == CheckName::ConformallyFlat) && space.n < 4 {
            return Err(format!("checks: conformally_flat requires n >= 4, got n = {}", space.n));
        }
        match self.sampling {
            Sampling::Random { count, seed, margin } => {
                if count == 0 {
                    return Err("sampling.count must be positive".into());
                }
                if seed.is_none() {
                    return Err("sampling.seed is required for random sampling (or pass --seed)".into());
                }
                check_margin(margin)?;
            }
            Sampling::Grid { per_dim, margin } => {
                if per_dim == 0 {
                    return Err("sampling.per_dim must be positive".into());
                }
                check_margin(margin)?;
            }
        }
        self.tolerances(None).map_err(|e| format!("tolerances: {e}"))?;
        for c in &self.checks {
            self.tolerances(Some(c)).map_err(|e| format!("checks.{}.tolerances: {e}", c.name().as_str()))?;
        }
        Ok(space)
    }

    pub fn generated(&self) -> bool {
        matches!(self.chart, ChartSpec::Family(_))
    }

    /// Defaults, then scenario overrides, then the check's own overrides.
    pub fn tolerances(&self, check: Option<&CheckSpec>) -> Result<Tolerances, GeomError> {
        let mut tol = if self.generated() { Tolerances::for_generated() } else { Tolerances::default() };
        for (k, v) in &self.tolerances {
            tol.set(k, *v)?;
        }
        if let Some(over) = check.and_then(CheckSpec::overrides) {
            for (k, v) in over {
                tol.set(k, *v)?;
            }
        }
        Ok(tol)
    }

    pub fn relation_params(&self) -> RelationParams {
        let c = self.soliton_c.or(match &self.chart {
            ChartSpec::Family(FamilySpec { relation: RelationSpec::Soliton { c }, .. }) => Some(*c),
            _ => None,
        });
        RelationParams { c }
    }
}

fn check_margin(m: f64) -> Result<(), String> {
    if (0.0..0.5).contains(&m) {
        Ok(())
    } else {
        Err(format!("sampling.margin must lie in [0, 0.5), got {m}"))
    }
}
