//! Profile curves of rotation hypersurfaces obeying a curvature relation.
//!
//! The profile (φ(t), a(t)) is parametrized by arclength. Its second
//! derivatives solve the 2×2 linear system
//!
//! ```text
//! φ'φ'' + a'a'' = 0
//! λ(φ'', a'')   = λ_target(μ, cos θ)
//! ```
//!
//! where λ, the principal curvature along the profile, is affine in (φ'', a'')
//! and is read off the geometry engine by three trial evaluations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ambient::AmbientSpace;
use crate::error::{GeomError, Result};
use crate::geometry::{frame, frame_and_curvature};
use crate::surface::{rotation_chart, AnalyticProfile, Chart, ProfileCurve, ProfileEval, ProfileJet};

/// Curvature relation imposed on a rotation hypersurface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationSpec {
    /// λμ = −εcos²θ
    SemiParallel,
    /// constant scalar curvature ρ₀
    ConstantScalar { rho: f64 },
    /// μcosθ + (n−2)(μ²+ε) + εcos²θ + λμ = c
    Soliton { c: f64 },
    /// constant angle θ₀, closed form
    ConstantAngle { theta: f64 },
}

impl RelationSpec {
    /// The principal curvature λ the relation prescribes given μ and cos θ.
    pub fn lambda_target(&self, eps: f64, n: usize, mu: f64, cos_theta: f64) -> Result<f64> {
        let nf = n as f64;
        let cos2 = cos_theta * cos_theta;
        let numerator = match *self {
            RelationSpec::SemiParallel => -eps * cos2,
            RelationSpec::ConstantScalar { rho } => {
                rho / (2.0 * (nf - 1.0)) - 0.5 * (nf - 2.0) * (mu * mu + eps) - eps * cos2
            }
            RelationSpec::Soliton { c } => c - mu * cos_theta - (nf - 2.0) * (mu * mu + eps) - eps * cos2,
            RelationSpec::ConstantAngle { .. } => {
                return Err(GeomError::Input("constant-angle profiles are closed form, not integrated".into()))
            }
        };
        if mu.abs() < MU_CROSSING {
            return Err(GeomError::Precondition(format!("mu = {mu:e} crosses zero; lambda target undefined")));
        }
        Ok(numerator / mu)
    }

    /// Residual of the relation in terms of (λ, μ, cos θ).
    pub fn residual(&self, eps: f64, n: usize, lambda: f64, mu: f64, cos_theta: f64) -> f64 {
        let nf = n as f64;
        let cos2 = cos_theta * cos_theta;
        match *self {
            RelationSpec::SemiParallel => lambda * mu + eps * cos2,
            RelationSpec::ConstantScalar { rho } => {
                (nf - 1.0) * (nf - 2.0) * (mu * mu + eps) + 2.0 * (nf - 1.0) * (lambda * mu + eps * cos2) - rho
            }
            RelationSpec::Soliton { c } => mu * cos_theta + (nf - 2.0) * (mu * mu + eps) + eps * cos2 + lambda * mu - c,
            RelationSpec::ConstantAngle { theta } => cos_theta - theta.cos().abs(),
        }
    }
}

/// |μ| below this halts integration.
pub const MU_CROSSING: f64 = 1e-6;

/// Profile state at parameter t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub t: f64,
    pub phi: f64,
    pub a: f64,
    pub dphi: f64,
    pub da: f64,
}

impl OdeState {
    fn vec(&self) -> [f64; 4] {
        [self.phi, self.a, self.dphi, self.da]
    }

    fn from_vec(t: f64, y: [f64; 4]) -> Self {
        OdeState { t, phi: y[0], a: y[1], dphi: y[2], da: y[3] }
    }

    pub fn speed_defect(&self) -> f64 {
        (self.dphi * self.dphi + self.da * self.da - 1.0).abs()
    }
}

/// Profile with a fixed jet at every t; used for trial evaluations at one point.
#[derive(Debug)]
struct FixedJet(ProfileJet);

impl ProfileEval for FixedJet {
    fn jet(&self, t: f64) -> Result<ProfileJet> {
        let mut j = self.0;
        j.phi[0] += j.phi[1] * t;
        j.a[0] += j.a[1] * t;
        Ok(j)
    }
}

fn trial_chart(state: &OdeState, ddphi: f64, dda: f64, space: AmbientSpace) -> Result<Chart> {
    let jet = ProfileJet { phi: [state.phi, state.dphi, ddphi, 0.0], a: [state.a, state.da, dda, 0.0] };
    rotation_chart(ProfileCurve::new(Arc::new(FixedJet(jet)), (-0.5, 0.5), true, false), space)
}

/// First-order invariants at a profile state: the orbit principal curvature μ,
/// cos θ and |T|, read from the frame of the rotation chart at (0, v₀).
pub fn pointwise_invariants(state: &OdeState, space: AmbientSpace) -> Result<(f64, f64, f64)> {
    let chart = trial_chart(state, 0.0, 0.0, space)?;
    let fp = frame(&chart, &chart.domain().center())?;
    let mu = fp.h[(1, 1)] / fp.metric[(1, 1)];
    Ok((mu, fp.cos_theta, fp.t_norm2.max(0.0).sqrt()))
}

/// λ = h_tt/g_tt of the chart whose profile has the given second derivatives.
fn profile_curvature(state: &OdeState, ddphi: f64, dda: f64, space: AmbientSpace) -> Result<(f64, f64, f64)> {
    let chart = trial_chart(state, ddphi, dda, space)?;
    let fp = frame(&chart, &chart.domain().center())?;
    Ok((fp.h[(0, 0)] / fp.metric[(0, 0)], fp.h[(1, 1)] / fp.metric[(1, 1)], fp.cos_theta))
}

/// (φ'', a'') keeping arclength and imposing the relation.
pub fn solve_second_derivatives(state: &OdeState, rel: &RelationSpec, space: AmbientSpace) -> Result<(f64, f64)> {
    let (l0, mu, cos_theta) = profile_curvature(state, 0.0, 0.0, space)?;
    let target = rel.lambda_target(space.epsilon.value(), space.n, mu, cos_theta)?;
    let (l1, _, _) = profile_curvature(state, 1.0, 0.0, space)?;
    let (l2, _, _) = profile_curvature(state, 0.0, 1.0, space)?;
    let (p, q) = (l1 - l0, l2 - l0);
    let det = state.dphi * q - state.da * p;
    if det.abs() < 1e-12 {
        return Err(GeomError::Precondition(format!("singular second-derivative system at t = {}", state.t)));
    }
    let rhs = target - l0;
    Ok((-state.da * rhs / det, state.dphi * rhs / det))
}

/// Step control of the embedded Runge–Kutta integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub initial_step: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { initial_step: 1e-3, rtol: 1e-10, max_steps: 100_000 }
    }
}

/// Why integration stopped short of the requested end of the span.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HaltDiagnostic {
    pub direction: &'static str,
    pub t: f64,
    pub reason: String,
}

type Vec4 = [f64; 4];

fn rhs(y: &Vec4, rel: &RelationSpec, space: AmbientSpace) -> Result<Vec4> {
    let state = OdeState::from_vec(0.0, *y);
    let (pp, aa) = solve_second_derivatives(&state, rel, space)?;
    Ok([y[2], y[3], pp, aa])
}

fn axpy(y: &Vec4, h: f64, terms: &[(f64, &Vec4)]) -> Vec4 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn renormalize(mut y: Vec4) -> Vec4 {
    let s = y[2].hypot(y[3]);
    y[2] /= s;
    y[3] /= s;
    y
}

/// One Dormand–Prince 5(4) step; returns the fifth-order solution and the error estimate.
fn dopri_step(y: &Vec4, h: f64, f: &dyn Fn(&Vec4) -> Result<Vec4>) -> Result<(Vec4, Vec4)> {
    let k1 = f(y)?;
    let k2 = f(&axpy(y, h, &[(1.0 / 5.0, &k1)]))?;
    let k3 = f(&axpy(y, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]))?;
    let k5 = f(&axpy(
        y,
        h,
        &[(19372.0 / 6561.0, &k1), (-25360.0 / 2187.0, &k2), (64448.0 / 6561.0, &k3), (-212.0 / 729.0, &k4)],
    ))?;
    let k6 = f(&axpy(
        y,
        h,
        &[(9017.0 / 3168.0, &k1), (-355.0 / 33.0, &k2), (46732.0 / 5247.0, &k3), (49.0 / 176.0, &k4), (-5103.0 / 18656.0, &k5)],
    ))?;
    let y5 = axpy(
        y,
        h,
        &[(35.0 / 384.0, &k1), (500.0 / 1113.0, &k3), (125.0 / 192.0, &k4), (-2187.0 / 6784.0, &k5), (11.0 / 84.0, &k6)],
    );
    let k7 = f(&y5)?;
    let e = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let mut err = [0.0; 4];
    for (c, k) in e.iter().zip(ks) {
        for i in 0..4 {
            err[i] += h * c * k[i];
        }
    }
    Ok((y5, err))
}

/// Integrates from `t0` towards `t_end`; returns the accepted nodes (excluding
/// the start) and the halt diagnostic when `t_end` was not reached.
fn integrate_direction(
    y0: Vec4,
    t0: f64,
    t_end: f64,
    rel: &RelationSpec,
    space: AmbientSpace,
    ctl: &StepControl,
) -> (Vec<(f64, Vec4)>, Option<HaltDiagnostic>) {
    let dir = (t_end - t0).signum();
    let direction = if dir > 0.0 { "forward" } else { "backward" };
    let f = |y: &Vec4| rhs(y, rel, space);
    let mut nodes = Vec::new();
    let (mut t, mut y) = (t0, y0);
    let mut h = ctl.initial_step.min((t_end - t0).abs());
    let halt = |t: f64, reason: String| Some(HaltDiagnostic { direction, t, reason });
    for _ in 0..ctl.max_steps {
        if (t_end - t) * dir <= 1e-14 {
            return (nodes, None);
        }
        h = h.min((t_end - t).abs());
        match dopri_step(&y, dir * h, &f) {
            Ok((y_new, err)) => {
                let scale = |i: usize| ctl.rtol * (1.0 + y[i].abs().max(y_new[i].abs()));
                let norm = (0..4).map(|i| err[i].abs() / scale(i)).fold(0.0, f64::max);
                if norm <= 1.0 {
                    t += dir * h;
                    y = renormalize(y_new);
                    nodes.push((t, y));
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
            }
            Err(e) => {
                h *= 0.25;
                if h < 1e-9 {
                    return (nodes, halt(t, e.to_string()));
                }
            }
        }
        if h < 1e-12 {
            return (nodes, halt(t, "step size underflow".into()));
        }
    }
    (nodes, halt(t, format!("maximum of {} steps reached", ctl.max_steps)))
}

/// Dense evaluator over the accepted nodes of an integration.
#[derive(Debug)]
pub struct OdeProfile {
    rel: RelationSpec,
    space: AmbientSpace,
    t0: f64,
    nodes: Vec<(f64, Vec4)>,
}

/// Step of the difference quotient for third derivatives.
pub const JET_FD_STEP: f64 = 1e-6;

impl OdeProfile {
    /// State at t: one Dormand–Prince step from the nearest node on the t0 side.
    pub fn state(&self, t: f64) -> Result<Vec4> {
        let (lo, hi) = (self.nodes[0].0, self.nodes[self.nodes.len() - 1].0);
        if !(lo - 1e-12..=hi + 1e-12).contains(&t) {
            return Err(GeomError::Input(format!("t = {t} outside the integrated interval [{lo}, {hi}]")));
        }
        let idx = self.nodes.partition_point(|(s, _)| *s <= t);
        let k = if t >= self.t0 { idx.saturating_sub(1) } else { idx.min(self.nodes.len() - 1) };
        let (s, y) = self.nodes[k];
        if s == t {
            return Ok(y);
        }
        let (y_new, _) = dopri_step(&y, t - s, &|y| rhs(y, &self.rel, self.space))?;
        Ok(renormalize(y_new))
    }
}

impl ProfileEval for OdeProfile {
    fn jet(&self, t: f64) -> Result<ProfileJet> {
        let y = self.state(t)?;
        let f = rhs(&y, &self.rel, self.space)?;
        let h = JET_FD_STEP;
        let plus = rhs(&axpy(&y, h, &[(1.0, &f)]), &self.rel, self.space)?;
        let minus = rhs(&axpy(&y, -h, &[(1.0, &f)]), &self.rel, self.space)?;
        let third = |i: usize| (plus[i] - minus[i]) / (2.0 * h);
        Ok(ProfileJet { phi: [y[0], y[2], f[2], third(2)], a: [y[1], y[3], f[3], third(3)] })
    }
}

/// Result of [`integrate_family`].
#[derive(Clone, Debug)]
pub struct Family {
    pub relation: RelationSpec,
    pub space: AmbientSpace,
    pub init: OdeState,
    pub curve: ProfileCurve,
    pub nodes: Vec<OdeState>,
    pub halts: Vec<HaltDiagnostic>,
}

impl Family {
    pub fn chart(&self) -> Result<Chart> {
        rotation_chart(self.curve.clone(), self.space)
    }

    pub fn max_speed_defect(&self) -> f64 {
        self.nodes.iter().map(OdeState::speed_defect).fold(0.0, f64::max)
    }
}

/// Integrates the relation from `init` over `t_span` (which must contain init.t).
pub fn integrate_family(
    rel: RelationSpec,
    init: OdeState,
    space: AmbientSpace,
    t_span: (f64, f64),
    ctl: StepControl,
) -> Result<Family> {
    if matches!(rel, RelationSpec::ConstantAngle { .. }) {
        return Err(GeomError::Input("constant-angle profiles are built by constant_angle_chart".into()));
    }
    if init.speed_defect() > 1e-12 {
        return Err(GeomError::Input(format!("initial state is not unit speed (defect {:e})", init.speed_defect())));
    }
    if !(t_span.0 < init.t && init.t < t_span.1) {
        return Err(GeomError::Input(format!("t span {t_span:?} must contain the initial t = {}", init.t)));
    }
    if !(ctl.rtol > 0.0 && ctl.initial_step > 0.0 && ctl.max_steps > 0) {
        return Err(GeomError::Input("invalid step control".into()));
    }
    let y0 = init.vec();
    rhs(&y0, &rel, space)?;
    let (fwd, halt_f) = integrate_direction(y0, init.t, t_span.1, &rel, space, &ctl);
    let (bwd, halt_b) = integrate_direction(y0, init.t, t_span.0, &rel, space, &ctl);
    let mut nodes: Vec<(f64, Vec4)> = bwd.into_iter().rev().collect();
    nodes.push((init.t, y0));
    nodes.extend(fwd);
    let range = (nodes[0].0, nodes[nodes.len() - 1].0);
    if !(range.1 - range.0 > 1e-6) {
        return Err(GeomError::Domain(format!(
            "integration halted immediately: {}",
            halt_f.or(halt_b).map(|h| h.reason).unwrap_or_default()
        )));
    }
    let states = nodes.iter().map(|&(t, y)| OdeState::from_vec(t, y)).collect();
    let profile = OdeProfile { rel, space, t0: init.t, nodes };
    let curve = ProfileCurve::new(Arc::new(profile), range, true, true);
    Ok(Family {
        relation: rel,
        space,
        init,
        curve,
        nodes: states,
        halts: [halt_b, halt_f].into_iter().flatten().collect(),
    })
}

/// λ, μ and cos θ at a state for an initial λ; used to pick relation constants.
pub fn relation_constant(rel_kind: &str, state: &OdeState, lambda: f64, space: AmbientSpace) -> Result<RelationSpec> {
    let (mu, cos_theta, _) = pointwise_invariants(state, space)?;
    let eps = space.epsilon.value();
    let n = space.n;
    let probe = |r: RelationSpec| -r.residual(eps, n, lambda, mu, cos_theta);
    match rel_kind {
        "semi_parallel" => Ok(RelationSpec::SemiParallel),
        "soliton" => Ok(RelationSpec::Soliton { c: probe(RelationSpec::Soliton { c: 0.0 }) }),
        "constant_scalar" => Ok(RelationSpec::ConstantScalar { rho: probe(RelationSpec::ConstantScalar { rho: 0.0 }) }),
        other => Err(GeomError::Input(format!("unknown relation {other:?}"))),
    }
}

/// Rotation hypersurface whose angle function is the constant |cos θ₀|: a
/// straight unit-speed profile whose slope is found by bisection on
/// [`pointwise_invariants`].
pub fn constant_angle_chart(theta: f64, space: AmbientSpace) -> Result<Chart> {
    let target = theta.cos();
    if !(target > -1.0 && target < 1.0) {
        return Err(GeomError::Input(format!("cos(theta0) must lie in (-1, 1), got {target}")));
    }
    let target = target.abs();
    let phi0 = 1.0;
    let cos_at = |x: f64| -> Result<f64> {
        let (dphi, da) = (x.cos(), x.sin());
        let state = OdeState { t: 0.0, phi: phi0, a: 0.0, dphi, da };
        Ok(pointwise_invariants(&state, space)?.1)
    };
    // profile direction angle x ∈ [0, π/2]: cos θ runs from 1 down to 0
    let (mut lo, mut hi) = (0.0_f64, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cos_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let profile = AnalyticProfile::Line { phi0, dphi: x.cos(), a0: 0.0, da: x.sin() };
    rotation_chart(ProfileCurve::analytic(profile, (-0.5, 0.5)), space)
}

/// One row of a sampled family table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FamilyRow {
    pub t: f64,
    pub phi: f64,
    pub a: f64,
    pub dphi: f64,
    pub da: f64,
    pub mu: f64,
    pub lambda: f64,
    pub cos_theta: f64,
    pub rho: f64,
}

/// Samples `count` evenly spaced rows over the integrated interval, evaluated
/// on the generated chart at the centre of the orbit sphere.
pub fn family_table(family: &Family, count: usize) -> Result<Vec<FamilyRow>> {
    let chart = family.chart()?;
    let (t0, t1) = family.curve.t_range;
    let v0 = chart.domain().center();
    (0..count.max(2))
        .map(|k| {
            let t = (t0 + (t1 - t0) * k as f64 / (count.max(2) - 1) as f64).min(t1);
            let mut u = v0.clone();
            u[0] = t;
            let j = family.curve.jet(t)?;
            let (fp, cd) = frame_and_curvature(&chart, &u)?;
            Ok(FamilyRow {
                t,
                phi: j.phi[0],
                a: j.a[0],
                dphi: j.phi[1],
                da: j.a[1],
                mu: fp.h[(1, 1)] / fp.metric[(1, 1)],
                lambda: fp.h[(0, 0)] / fp.metric[(0, 0)],
                cos_theta: fp.cos_theta,
                rho: cd.scalar,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::Epsilon;

    fn sp(eps: Epsilon, n: usize) -> AmbientSpace {
        AmbientSpace::new(eps, n).unwrap()
    }

    #[test]
    fn invariants_of_special_states() {
        let s = sp(Epsilon::Sphere, 4);
        let cyl = OdeState { t: 0.0, phi: std::f64::consts::FRAC_PI_2, a: 0.0, dphi: 0.0, da: 1.0 };
        let (mu, c, t) = pointwise_invariants(&cyl, s).unwrap();
        assert!(mu.abs() < 1e-12 && c.abs() < 1e-12 && (t - 1.0).abs() < 1e-12);
        let flat = OdeState { t: 0.0, phi: 1.0, a: 0.0, dphi: 1.0, da: 0.0 };
        let (_, c, t) = pointwise_invariants(&flat, s).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && t < 1e-12);
    }

    #[test]
    fn vertical_start_only_bends_horizontally() {
        let s = sp(Epsilon::Hyperbolic, 4);
        let st = OdeState { t: 0.0, phi: 1.0, a: 0.0, dphi: 0.0, da: 1.0 };
        let (pp, aa) = solve_second_derivatives(&st, &RelationSpec::Soliton { c: 1.0 }, s).unwrap();
        assert!(aa.abs() < 1e-14);
        assert!(pp.abs() > 1e-3);
        // a horizontal start has μ = 0
        let flat = OdeState { t: 0.0, phi: 1.0, a: 0.0, dphi: 1.0, da: 0.0 };
        assert!(solve_second_derivatives(&flat, &RelationSpec::SemiParallel, s).is_err());
    }

    #[test]
    fn mu_crossing_is_rejected() {
        let s = sp(Epsilon::Sphere, 4);
        let cyl = OdeState { t: 0.0, phi: std::f64::consts::FRAC_PI_2, a: 0.0, dphi: 0.0, da: 1.0 };
        assert!(matches!(
            solve_second_derivatives(&cyl, &RelationSpec::SemiParallel, s),
            Err(GeomError::Precondition(_))
        ));
    }

    #[test]
    fn semi_parallel_family_keeps_relation_and_speed() {
        for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
            let s = sp(eps, 4);
            let init = OdeState { t: 0.0, phi: 1.0, a: 0.0, dphi: 0.8, da: 0.6 };
            let fam = integrate_family(RelationSpec::SemiParallel, init, s, (-0.3, 0.3), StepControl::default()).unwrap();
            assert!(fam.max_speed_defect() < 1e-9);
            for row in family_table(&fam, 9).unwrap() {
                assert!((row.lambda * row.mu + eps.value() * row.cos_theta.powi(2)).abs() < 1e-8, "{row:?}");
            }
        }
    }

    #[test]
    fn constant_angle_hits_target() {
        let s = sp(Epsilon::Sphere, 3);
        let chart = constant_angle_chart(1.1, s).unwrap();
        let fp = frame(&chart, &chart.domain().center()).unwrap();
        assert!((fp.cos_theta - 1.1_f64.cos()).abs() < 1e-12);
        assert!(constant_angle_chart(0.0, s).is_err());
    }
}
