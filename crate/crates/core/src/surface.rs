//! Parametric hypersurfaces of Q^n(ε)×R.
//!
//! A [`Chart`] maps an n-dimensional parameter box into the flat ambient space.
//! Its evaluator consumes [`Taylor`] inputs, so jets up to order 3 come out of
//! the same closed-form code path that produces the points.
//!
//! Parameter conventions used by the built-in constructors: coordinate `u[0]`
//! is always the "profile" direction (the profile parameter `t` of a rotation
//! chart, the parallel-family parameter `s` of a Tojeiro chart, the height of
//! a product chart, the radial coordinate of a slice chart); the remaining
//! coordinates are angles of the orbit spheres or coordinates of the base.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientSpace, AmbientVector, Epsilon};
use crate::error::{GeomError, Result};
use crate::taylor::Taylor;

/// Margin kept between the angular coordinates and the poles of the
/// spherical parametrization.
pub const POLE_MARGIN: f64 = 0.1;

/// Closed n-dimensional parameter box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(GeomError::Input(format!("invalid parameter box {lo:?} .. {hi:?}")));
        }
        Ok(ParamBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim() && u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a <= x && x <= b)
    }

    /// Box shrunk by `fraction` of its width on every side.
    pub fn shrink(&self, fraction: f64) -> ParamBox {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let m = fraction * (b - a);
                (a + m, b - m)
            })
            .unzip();
        ParamBox { lo, hi }
    }

    /// Uniform random interior points, kept `margin` (fraction of width) away from the faces.
    pub fn sample_random<R: Rng>(&self, rng: &mut R, count: usize, margin: f64) -> Vec<Vec<f64>> {
        let inner = self.shrink(margin);
        (0..count)
            .map(|_| {
                inner
                    .lo
                    .iter()
                    .zip(&inner.hi)
                    .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_dim` nodes per axis on the box shrunk by `margin`.
    pub fn grid(&self, per_dim: usize, margin: f64) -> Vec<Vec<f64>> {
        let inner = self.shrink(margin);
        let per_dim = per_dim.max(1);
        let axis = |d: usize| -> Vec<f64> {
            if per_dim == 1 {
                vec![0.5 * (inner.lo[d] + inner.hi[d])]
            } else {
                (0..per_dim)
                    .map(|k| inner.lo[d] + (inner.hi[d] - inner.lo[d]) * k as f64 / (per_dim - 1) as f64)
                    .collect()
            }
        };
        let mut points = vec![Vec::new()];
        for d in 0..self.dim() {
            let nodes = axis(d);
            points = points
                .into_iter()
                .flat_map(|p| {
                    nodes.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Value and derivatives of an immersion at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub order: usize,
    pub value: AmbientVector,
    /// `d1[i] = ∂_i f`
    pub d1: Vec<AmbientVector>,
    /// `d2[i][j] = ∂_i ∂_j f`
    pub d2: Vec<Vec<AmbientVector>>,
    /// `d3[i][j][k] = ∂_i ∂_j ∂_k f`
    pub d3: Vec<Vec<Vec<AmbientVector>>>,
}

impl Jet {
    fn from_taylor(f: &[Taylor], order: usize) -> Jet {
        let n = f[0].vars();
        let col = |g: &dyn Fn(&Taylor) -> f64| DVector::from_iterator(f.len(), f.iter().map(g));
        let value = col(&|t| t.value());
        let d1 = if order >= 1 { (0..n).map(|i| col(&|t| t.d1(i))).collect() } else { vec![] };
        let d2 = if order >= 2 {
            (0..n).map(|i| (0..n).map(|j| col(&|t| t.d2(i, j))).collect()).collect()
        } else {
            vec![]
        };
        let d3 = if order >= 3 {
            (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| col(&|t| t.d3(i, j, k))).collect()).collect())
                .collect()
        } else {
            vec![]
        };
        Jet { order, value, d1, d2, d3 }
    }
}

/// Value and first three derivatives of the profile functions φ(t), a(t).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileJet {
    pub phi: [f64; 4],
    pub a: [f64; 4],
}

pub trait ProfileEval: Send + Sync + fmt::Debug {
    fn jet(&self, t: f64) -> Result<ProfileJet>;
}

/// Closed-form planar profiles (φ(t), a(t)) in Q^1(ε)×R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnalyticProfile {
    /// φ = phi0 + dphi·t, a = a0 + da·t.
    Line { phi0: f64, dphi: f64, a0: f64, da: f64 },
    /// Arclength-parametrized circle of the (φ, a) plane:
    /// φ = phi_c + R cos(t/R + phase), a = a_c + R sin(t/R + phase).
    Circle { phi_c: f64, a_c: f64, radius: f64, phase: f64 },
    /// φ = phi0 + amp·sin(freq·t), a = slope·t.
    Wave { phi0: f64, amp: f64, freq: f64, slope: f64 },
}

impl AnalyticProfile {
    pub fn is_arclength(&self) -> bool {
        match *self {
            AnalyticProfile::Line { dphi, da, .. } => (dphi * dphi + da * da - 1.0).abs() < 1e-12,
            AnalyticProfile::Circle { .. } => true,
            AnalyticProfile::Wave { .. } => false,
        }
    }
}

impl ProfileEval for AnalyticProfile {
    fn jet(&self, t: f64) -> Result<ProfileJet> {
        Ok(match *self {
            AnalyticProfile::Line { phi0, dphi, a0, da } => ProfileJet {
                phi: [phi0 + dphi * t, dphi, 0.0, 0.0],
                a: [a0 + da * t, da, 0.0, 0.0],
            },
            AnalyticProfile::Circle { phi_c, a_c, radius, phase } => {
                let w = 1.0 / radius;
                let (s, c) = (t * w + phase).sin_cos();
                ProfileJet {
                    phi: [phi_c + radius * c, -s, -w * c, w * w * s],
                    a: [a_c + radius * s, c, -w * s, -w * w * c],
                }
            }
            AnalyticProfile::Wave { phi0, amp, freq, slope } => {
                let (s, c) = (freq * t).sin_cos();
                ProfileJet {
                    phi: [phi0 + amp * s, amp * freq * c, -amp * freq * freq * s, -amp * freq.powi(3) * c],
                    a: [slope * t, slope, 0.0, 0.0],
                }
            }
        })
    }
}

/// Profile curve feeding [`rotation_chart`].
#[derive(Clone, Debug)]
pub struct ProfileCurve {
    eval: Arc<dyn ProfileEval>,
    pub t_range: (f64, f64),
    pub arclength: bool,
    /// True for ODE-generated curves (looser manifold tolerance).
    pub generated: bool,
}

impl ProfileCurve {
    pub fn new(eval: Arc<dyn ProfileEval>, t_range: (f64, f64), arclength: bool, generated: bool) -> Self {
        ProfileCurve { eval, t_range, arclength, generated }
    }

    pub fn analytic(profile: AnalyticProfile, t_range: (f64, f64)) -> Self {
        let arclength = profile.is_arclength();
        ProfileCurve::new(Arc::new(profile), t_range, arclength, false)
    }

    pub fn jet(&self, t: f64) -> Result<ProfileJet> {
        self.eval.jet(t)
    }
}

/// Height function `a(s)` of the Tojeiro construction: a cubic polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightFunction {
    pub coeffs: [f64; 4],
}

impl HeightFunction {
    pub fn linear(slope: f64) -> Self {
        HeightFunction { coeffs: [0.0, slope, 0.0, 0.0] }
    }

    /// `[a, a', a'', a''']` at `s`.
    pub fn derivs(&self, s: f64) -> [f64; 4] {
        let [c0, c1, c2, c3] = self.coeffs;
        [
            c0 + s * (c1 + s * (c2 + s * c3)),
            c1 + s * (2.0 * c2 + 3.0 * c3 * s),
            2.0 * c2 + 6.0 * c3 * s,
            6.0 * c3,
        ]
    }
}

/// Tube of radius `radius` around a totally geodesic Q^dim(ε) inside Q^n(ε).
///
/// `dim = 0` is the geodesic sphere of radius `radius` centred at e_1;
/// `dim = n − 1` with radius 0 is a totally geodesic hypersurface (an equator).
/// Tubes with `0 < dim < n − 1` have two constant principal curvatures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeBase {
    pub dim: usize,
    pub radius: f64,
}

impl TubeBase {
    pub fn geodesic_sphere(radius: f64) -> Self {
        TubeBase { dim: 0, radius }
    }

    pub fn equator(n: usize) -> Self {
        TubeBase { dim: n - 1, radius: 0.0 }
    }

    /// Principal curvatures of the parallel tube at distance `rho`, with
    /// respect to the unit normal pointing away from the core, as
    /// `(value, multiplicity)` pairs. Zero multiplicities are omitted.
    pub fn principal_curvatures(&self, eps: Epsilon, n: usize, rho: f64) -> Vec<(f64, usize)> {
        let (c, s) = (eps.c(rho), eps.s(rho));
        let mut out = Vec::new();
        if self.dim > 0 {
            out.push((eps.value() * s / c, self.dim));
        }
        if n - 1 > self.dim {
            out.push((-c / s, n - 1 - self.dim));
        }
        out
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.dim > n - 1 {
            return Err(GeomError::Input(format!("tube core dimension {} exceeds n - 1 = {}", self.dim, n - 1)));
        }
        Ok(())
    }

    /// Parameter ranges of the base coordinates (`n − 1` of them).
    fn param_ranges(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        if self.dim > 0 {
            lo.push(0.3);
            hi.push(1.0);
            let (l, h) = sphere_angle_ranges(self.dim - 1);
            lo.extend(l);
            hi.extend(h);
        }
        let (l, h) = sphere_angle_ranges(n - 1 - self.dim);
        lo.extend(l);
        hi.extend(h);
        (lo, hi)
    }

    /// Points of the parallel tube at distance `rho` (Taylor), coordinates 1..=n+1.
    fn embed(&self, eps: Epsilon, n: usize, rho: &Taylor, x: &[Taylor]) -> Vec<Taylor> {
        let (cr, sr) = (c_eps(eps, rho), s_eps(eps, rho));
        let core: Vec<Taylor> = if self.dim == 0 {
            vec![Taylor::constant(1.0, rho.vars(), rho.order())]
        } else {
            let z = &x[0];
            let mut y = vec![c_eps(eps, z)];
            let sz = s_eps(eps, z);
            y.extend(unit_sphere(&x[1..self.dim], z.vars(), z.order()).iter().map(|v| &sz * v));
            y
        };
        let w = unit_sphere(&x[self.dim..], rho.vars(), rho.order());
        debug_assert_eq!(core.len() + w.len(), n + 1);
        core.iter().map(|v| &cr * v).chain(w.iter().map(|v| &sr * v)).collect()
    }

    fn check_regular(&self, eps: Epsilon, n: usize, rho: f64, u: &[Taylor]) -> Result<()> {
        let fail = |reason: String| GeomError::Regularity { u: u.iter().map(Taylor::value).collect(), reason };
        if n - 1 > self.dim && eps.s(rho).abs() < 1e-9 {
            return Err(fail(format!("parallel tube collapses onto its core at rho = {rho}")));
        }
        if self.dim > 0 && eps.c(rho).abs() < 1e-9 {
            return Err(fail(format!("parallel tube reaches its focal set at rho = {rho}")));
        }
        Ok(())
    }
}

/// Tag describing which constructor produced a chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    Rotation,
    Tojeiro,
    Slice,
    Product,
    Custom,
}

pub trait ChartMap: Send + Sync + fmt::Debug {
    /// Evaluates the immersion on Taylor inputs `u` (length n), returning the
    /// n + 2 ambient coordinates.
    fn eval(&self, space: &AmbientSpace, u: &[Taylor]) -> Result<Vec<Taylor>>;
}

/// Parametric immersion of a parameter box into Q^n(ε)×R.
#[derive(Clone, Debug)]
pub struct Chart {
    space: AmbientSpace,
    domain: ParamBox,
    kind: ChartKind,
    map: Arc<dyn ChartMap>,
    manifold_tol: f64,
    pub(crate) orientation: Arc<OnceLock<f64>>,
}

impl Chart {
    pub fn new(
        space: AmbientSpace,
        domain: ParamBox,
        kind: ChartKind,
        map: Arc<dyn ChartMap>,
        manifold_tol: f64,
    ) -> Result<Self> {
        if domain.dim() != space.n {
            return Err(GeomError::Input(format!(
                "parameter box has dimension {}, expected {}",
                domain.dim(),
                space.n
            )));
        }
        Ok(Chart { space, domain, kind, map, manifold_tol, orientation: Arc::new(OnceLock::new()) })
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn domain(&self) -> &ParamBox {
        &self.domain
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.space.n
    }

    /// Tolerance for `on_manifold` checks of this chart's points.
    pub fn manifold_tol(&self) -> f64 {
        self.manifold_tol
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(GeomError::Input(format!("parameter point has {} coordinates, expected {}", u.len(), self.dim())));
        }
        if !self.domain.contains(u) {
            return Err(GeomError::Input(format!("parameter point {u:?} outside the chart domain")));
        }
        Ok(())
    }

    /// Taylor expansion of the immersion at `u` to the given order.
    pub fn taylor(&self, u: &[f64], order: usize) -> Result<Vec<Taylor>> {
        self.check_point(u)?;
        let n = self.dim();
        let vars: Vec<Taylor> = u.iter().enumerate().map(|(i, &x)| Taylor::variable(x, i, n, order)).collect();
        let out = self.map.eval(&self.space, &vars)?;
        debug_assert_eq!(out.len(), self.space.ambient_dim());
        Ok(out)
    }

    pub fn point(&self, u: &[f64]) -> Result<AmbientVector> {
        Ok(DVector::from_iterator(self.space.ambient_dim(), self.taylor(u, 0)?.iter().map(Taylor::value)))
    }

    /// Jet of order 1..=3 by forward Taylor propagation.
    pub fn jet(&self, u: &[f64], order: usize) -> Result<Jet> {
        if !(1..=3).contains(&order) {
            return Err(GeomError::Input(format!("jet order must be 1, 2 or 3, got {order}")));
        }
        Ok(Jet::from_taylor(&self.taylor(u, order)?, order))
    }

    /// Order-3 jet by central differences with step `h`. The first derivatives
    /// difference point values; derivatives of order k ≥ 2 difference the
    /// Taylor jets of order k − 1 at the displaced points, which checks each
    /// order-raising rule separately without amplifying round-off by h^-k.
    pub fn jet_fd(&self, u: &[f64], h: f64) -> Result<Jet> {
        let n = self.dim();
        let m = self.space.ambient_dim();
        let shifted = |i: usize, sign: f64, order: usize| -> Result<Vec<Taylor>> {
            let mut v = u.to_vec();
            v[i] += sign * h;
            let vars: Vec<Taylor> = v.iter().enumerate().map(|(k, &x)| Taylor::variable(x, k, n, order)).collect();
            self.map.eval(&self.space, &vars)
        };
        self.check_point(u)?;
        let value = self.point(u)?;
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = vec![Vec::with_capacity(n); n];
        let mut d3 = vec![vec![Vec::with_capacity(n); n]; n];
        for i in 0..n {
            let (p1, m1) = (shifted(i, 1.0, 1)?, shifted(i, -1.0, 1)?);
            d1.push(DVector::from_iterator(m, (0..m).map(|c| (p1[c].value() - m1[c].value()) / (2.0 * h))));
            for j in 0..n {
                d2[i].push(DVector::from_iterator(m, (0..m).map(|c| (p1[c].d1(j) - m1[c].d1(j)) / (2.0 * h))));
            }
            let (p2, m2) = (shifted(i, 1.0, 2)?, shifted(i, -1.0, 2)?);
            for j in 0..n {
                for k in 0..n {
                    d3[i][j].push(DVector::from_iterator(
                        m,
                        (0..m).map(|c| (p2[c].d2(j, k) - m2[c].d2(j, k)) / (2.0 * h)),
                    ));
                }
            }
        }
        Ok(Jet { order: 3, value, d1, d2, d3 })
    }

    /// Chart composed with the affine parameter change `u = center + A (w − center)`.
    /// The new domain is a box around `center` whose image stays inside the old domain.
    pub fn reparametrize(&self, matrix: nalgebra::DMatrix<f64>) -> Result<Chart> {
        let n = self.dim();
        if matrix.nrows() != n || matrix.ncols() != n || matrix.clone().try_inverse().is_none() {
            return Err(GeomError::Input("reparametrization matrix must be invertible n x n".into()));
        }
        let center = self.domain.center();
        let row_sum = (0..n).map(|i| matrix.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let half = (0..n).map(|i| 0.5 * (self.domain.hi[i] - self.domain.lo[i])).fold(f64::INFINITY, f64::min);
        let r = 0.95 * half / row_sum;
        let domain = ParamBox::new(center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())?;
        let map = AffineMap { inner: self.map.clone(), center, matrix };
        Chart::new(self.space, domain, ChartKind::Custom, Arc::new(map), self.manifold_tol)
    }
}

#[derive(Debug)]
struct AffineMap {
    inner: Arc<dyn ChartMap>,
    center: Vec<f64>,
    matrix: nalgebra::DMatrix<f64>,
}

impl ChartMap for AffineMap {
    fn eval(&self, space: &AmbientSpace, w: &[Taylor]) -> Result<Vec<Taylor>> {
        let n = w.len();
        let u: Vec<Taylor> = (0..n)
            .map(|i| {
                (0..n).fold(Taylor::constant(self.center[i], w[0].vars(), w[0].order()), |acc, j| {
                    acc.axpy(self.matrix[(i, j)], &w[j].add_scalar(-self.center[j]))
                })
            })
            .collect();
        self.inner.eval(space, &u)
    }
}

pub(crate) fn c_eps(eps: Epsilon, x: &Taylor) -> Taylor {
    match eps {
        Epsilon::Sphere => x.cos(),
        Epsilon::Hyperbolic => x.cosh(),
    }
}

pub(crate) fn s_eps(eps: Epsilon, x: &Taylor) -> Taylor {
    match eps {
        Epsilon::Sphere => x.sin(),
        Epsilon::Hyperbolic => x.sinh(),
    }
}

/// Nested spherical coordinates of S^k ⊂ R^(k+1) from k angles.
pub(crate) fn unit_sphere(angles: &[Taylor], vars: usize, order: usize) -> Vec<Taylor> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut prefix = Taylor::constant(1.0, vars, order);
    for a in angles {
        out.push(&prefix * &a.cos());
        prefix = &prefix * &a.sin();
    }
    out.push(prefix);
    out
}

/// Parameter ranges of the k angles of S^k, away from the coordinate poles.
fn sphere_angle_ranges(k: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = vec![POLE_MARGIN; k];
    let mut hi = vec![PI - POLE_MARGIN; k];
    if k > 0 {
        hi[k - 1] = 2.0 * PI - POLE_MARGIN;
    }
    (lo, hi)
}

#[derive(Debug)]
struct RotationMap {
    profile: ProfileCurve,
}

impl ChartMap for RotationMap {
    fn eval(&self, space: &AmbientSpace, u: &[Taylor]) -> Result<Vec<Taylor>> {
        let t = &u[0];
        let pj = self.profile.jet(t.value())?;
        let phi = t.compose(pj.phi);
        let a = t.compose(pj.a);
        let s = s_eps(space.epsilon, &phi);
        if s.value().abs() < 1e-12 {
            return Err(GeomError::Domain(format!(
                "profile touches the rotation axis at t = {} (phi = {})",
                t.value(),
                phi.value()
            )));
        }
        let mut out = vec![c_eps(space.epsilon, &phi)];
        out.extend(unit_sphere(&u[1..], t.vars(), t.order()).iter().map(|v| &s * v));
        out.push(a);
        Ok(out)
    }
}

/// Spherical rotation hypersurface with the given profile: the orbit of
/// (C_ε(φ), S_ε(φ), 0, …, 0, a) under the rotations of coordinates 2..=n+1.
pub fn rotation_chart(profile: ProfileCurve, space: AmbientSpace) -> Result<Chart> {
    let (t0, t1) = profile.t_range;
    let (lo_a, hi_a) = sphere_angle_ranges(space.n - 1);
    let domain = ParamBox::new([vec![t0], lo_a].concat(), [vec![t1], hi_a].concat())?;
    let tol = if profile.generated { 1e-6 } else { 1e-9 };
    Chart::new(space, domain, ChartKind::Rotation, Arc::new(RotationMap { profile }), tol)
}

#[derive(Debug)]
struct TojeiroMap {
    base: TubeBase,
    height: HeightFunction,
}

impl ChartMap for TojeiroMap {
    fn eval(&self, space: &AmbientSpace, u: &[Taylor]) -> Result<Vec<Taylor>> {
        let s = &u[0];
        let rho = s.add_scalar(self.base.radius);
        self.base.check_regular(space.epsilon, space.n, rho.value(), u)?;
        let mut out = self.base.embed(space.epsilon, space.n, &rho, &u[1..]);
        out.push(s.compose(self.height.derivs(s.value())));
        Ok(out)
    }
}

/// The Tojeiro hypersurface f(x, s) = g_s(x) + a(s) ∂_{n+2} over a tube base;
/// g_s is the parallel tube at distance `radius + s`.
pub fn tojeiro_chart(base: TubeBase, height: HeightFunction, s_range: (f64, f64), space: AmbientSpace) -> Result<Chart> {
    base.validate(space.n)?;
    let eps = space.epsilon;
    let samples = 200;
    for k in 0..=samples {
        let s = s_range.0 + (s_range.1 - s_range.0) * k as f64 / samples as f64;
        if !(height.derivs(s)[1] > 0.0) {
            return Err(GeomError::Input(format!("height function must have a' > 0; a'({s}) = {}", height.derivs(s)[1])));
        }
        let rho = base.radius + s;
        let s_bad = space.n - 1 > base.dim && (eps.s(rho).abs() < 1e-6 || eps.s(rho).signum() != eps.s(base.radius + s_range.0).signum());
        let c_bad = base.dim > 0 && (eps.c(rho).abs() < 1e-6 || eps.c(rho).signum() != eps.c(base.radius + s_range.0).signum());
        if s_bad || c_bad {
            return Err(GeomError::Regularity {
                u: vec![s],
                reason: format!("parallel family meets a focal point near rho = {rho}"),
            });
        }
    }
    let (blo, bhi) = base.param_ranges(space.n);
    let domain = ParamBox::new([vec![s_range.0], blo].concat(), [vec![s_range.1], bhi].concat())?;
    Chart::new(space, domain, ChartKind::Tojeiro, Arc::new(TojeiroMap { base, height }), 1e-9)
}

#[derive(Debug)]
struct SliceMap {
    t0: f64,
}

impl ChartMap for SliceMap {
    fn eval(&self, space: &AmbientSpace, u: &[Taylor]) -> Result<Vec<Taylor>> {
        let z = &u[0];
        let s = s_eps(space.epsilon, z);
        let mut out = vec![c_eps(space.epsilon, z)];
        out.extend(unit_sphere(&u[1..], z.vars(), z.order()).iter().map(|v| &s * v));
        out.push(Taylor::constant(self.t0, z.vars(), z.order()));
        Ok(out)
    }
}

/// Chart of Q^n(ε)×{t0} in geodesic polar coordinates around e_1.
pub fn slice_chart(t0: f64, space: AmbientSpace) -> Result<Chart> {
    let (lo_a, hi_a) = sphere_angle_ranges(space.n - 1);
    let domain = ParamBox::new([vec![0.3], lo_a].concat(), [vec![1.2], hi_a].concat())?;
    Chart::new(space, domain, ChartKind::Slice, Arc::new(SliceMap { t0 }), 1e-9)
}

#[derive(Debug)]
struct ProductMap {
    base: TubeBase,
}

impl ChartMap for ProductMap {
    fn eval(&self, space: &AmbientSpace, u: &[Taylor]) -> Result<Vec<Taylor>> {
        let s = &u[0];
        let rho = Taylor::constant(self.base.radius, s.vars(), s.order());
        self.base.check_regular(space.epsilon, space.n, rho.value(), u)?;
        let mut out = self.base.embed(space.epsilon, space.n, &rho, &u[1..]);
        out.push(s.clone());
        Ok(out)
    }
}

/// The vertical cylinder (base(x), s) over a tube base of Q^n(ε).
pub fn product_chart(base: TubeBase, s_range: (f64, f64), space: AmbientSpace) -> Result<Chart> {
    base.validate(space.n)?;
    let (blo, bhi) = base.param_ranges(space.n);
    let domain = ParamBox::new([vec![s_range.0], blo].concat(), [vec![s_range.1], bhi].concat())?;
    Chart::new(space, domain, ChartKind::Product, Arc::new(ProductMap { base }), 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(eps: Epsilon, n: usize) -> AmbientSpace {
        AmbientSpace::new(eps, n).unwrap()
    }

    fn all_charts(eps: Epsilon, n: usize) -> Vec<Chart> {
        let sp = space(eps, n);
        let circle = AnalyticProfile::Circle { phi_c: 1.2, a_c: 0.0, radius: 0.5, phase: 0.0 };
        vec![
            slice_chart(0.4, sp).unwrap(),
            product_chart(TubeBase::geodesic_sphere(0.8), (-1.0, 1.0), sp).unwrap(),
            product_chart(TubeBase { dim: 1, radius: 0.6 }, (-1.0, 1.0), sp).unwrap(),
            tojeiro_chart(TubeBase::geodesic_sphere(0.7), HeightFunction { coeffs: [0.0, 1.0, 0.3, 0.1] }, (-0.3, 0.3), sp)
                .unwrap(),
            rotation_chart(ProfileCurve::analytic(circle, (-0.5, 0.5)), sp).unwrap(),
        ]
    }

    #[test]
    fn constructors_stay_on_manifold_and_immersed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
            for n in [2, 3, 4, 5] {
                for chart in all_charts(eps, n) {
                    for u in chart.domain().sample_random(&mut rng, 20, 0.0) {
                        let p = chart.point(&u).unwrap();
                        assert!(chart.space().on_manifold(&p, chart.manifold_tol()).unwrap(), "{:?} {u:?}", chart.kind());
                        let jet = chart.jet(&u, 1).unwrap();
                        let gram = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                            chart.space().inner(&jet.d1[i], &jet.d1[j]).unwrap()
                        });
                        let sv = gram.singular_values();
                        assert!(sv.min() > 1e-8, "{:?} not immersed at {u:?}", chart.kind());
                    }
                }
            }
        }
    }

    #[test]
    fn taylor_jets_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for chart in all_charts(Epsilon::Hyperbolic, 4).into_iter().chain(all_charts(Epsilon::Sphere, 3)) {
            for u in chart.domain().sample_random(&mut rng, 10, 0.05) {
                let a = chart.jet(&u, 3).unwrap();
                let b = chart.jet_fd(&u, 1e-5).unwrap();
                let rel = |x: &AmbientVector, y: &AmbientVector| (x - y).amax() / (1.0 + x.amax());
                let n = chart.dim();
                for i in 0..n {
                    assert!(rel(&a.d1[i], &b.d1[i]) < 1e-6);
                    for j in 0..n {
                        assert!(rel(&a.d2[i][j], &b.d2[i][j]) < 1e-6);
                        for k in 0..n {
                            assert!(rel(&a.d3[i][j][k], &b.d3[i][j][k]) < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn slice_has_constant_height_and_arclength_rotation_has_unit_speed() {
        let sp = space(Epsilon::Sphere, 3);
        let slice = slice_chart(2.0, sp).unwrap();
        let jet = slice.jet(&slice.domain().center(), 1).unwrap();
        assert!(jet.d1.iter().all(|v| v[4] == 0.0));
        let circle = AnalyticProfile::Circle { phi_c: 1.2, a_c: 0.0, radius: 0.5, phase: 0.3 };
        for eps in [Epsilon::Sphere, Epsilon::Hyperbolic] {
            let rot = rotation_chart(ProfileCurve::analytic(circle, (-0.5, 0.5)), space(eps, 3)).unwrap();
            let jet = rot.jet(&[0.2, 1.0, 2.0], 1).unwrap();
            let speed = rot.space().inner(&jet.d1[0], &jet.d1[0]).unwrap();
            assert!((speed - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_d2_d3_symmetric() {
        let chart = &all_charts(Epsilon::Sphere, 3)[3];
        let jet = chart.jet(&chart.domain().center(), 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(jet.d2[i][j], jet.d2[j][i]);
                for k in 0..3 {
                    assert_eq!(jet.d3[i][j][k], jet.d3[k][i][j]);
                }
            }
        }
    }

    #[test]
    fn rotation_axis_contact_is_domain_error() {
        let line = AnalyticProfile::Line { phi0: 0.0, dphi: 1.0, a0: 0.0, da: 0.0 };
        let chart = rotation_chart(ProfileCurve::analytic(line, (-0.5, 0.5)), space(Epsilon::Sphere, 3)).unwrap();
        assert!(matches!(chart.point(&[0.0, 1.0, 1.0]), Err(GeomError::Domain(_))));
    }

    #[test]
    fn tojeiro_rejects_bad_height_and_focal_points() {
        let sp = space(Epsilon::Sphere, 3);
        assert!(tojeiro_chart(TubeBase::geodesic_sphere(0.5), HeightFunction::linear(-1.0), (0.0, 0.1), sp).is_err());
        // geodesic sphere of radius 0.5 collapses at rho = 0
        let err = tojeiro_chart(TubeBase::geodesic_sphere(0.5), HeightFunction::linear(1.0), (-1.0, 0.0), sp);
        assert!(matches!(err, Err(GeomError::Regularity { .. })));
        assert!(tojeiro_chart(TubeBase { dim: 3, radius: 0.0 }, HeightFunction::linear(1.0), (0.0, 0.1), sp).is_err());
    }

    #[test]
    fn outside_domain_is_input_error() {
        let chart = slice_chart(0.0, space(Epsilon::Hyperbolic, 2)).unwrap();
        assert!(matches!(chart.jet(&[5.0, 1.0], 1), Err(GeomError::Input(_))));
        assert!(chart.jet(&[0.5], 1).is_err());
    }

    #[test]
    fn grid_sampling_counts() {
        let b = ParamBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
        let g = b.grid(4, 0.1);
        assert_eq!(g.len(), 64);
        assert!(g.iter().all(|p| b.contains(p)));
    }
}
