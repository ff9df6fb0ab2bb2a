//! Pointwise extrinsic and intrinsic invariants of a chart and the residuals
//! of the structure equations of hypersurfaces in Q^n(ε)×R.
//!
//! Everything is computed from Taylor jets of the immersion. A jet of order J
//! yields the metric to order J − 1 and the normal, second fundamental form,
//! shape operator, angle function and tangent field T to order J − 2, so the
//! order-3 jet is enough to differentiate all of them once.
//!
//! Index conventions: `R_ijkl = ⟨R(∂_i, ∂_j)∂_k, ∂_l⟩` with
//! `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`, so the sectional curvature of the
//! plane (X, Y) is `R(X, Y, Y, X) / |X ∧ Y|²`, and `Ric_jk = g^il R_ijkl`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ambient::{AmbientSpace, AmbientVector};
use crate::error::{GeomError, Result};
use crate::surface::Chart;
use crate::taylor::{self, Taylor};

/// Below this |cos θ| the normal orientation is taken from the chart seed.
pub const ORIENTATION_CUTOFF: f64 = 1e-12;

/// Dense rank-4 array over the n parameter directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.data[((i * n + j) * n + k) * n + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Components on the frame whose vectors are the columns of `frame`
    /// (expressed in the chart basis).
    pub fn in_frame(&self, frame: &DMatrix<f64>) -> Tensor4 {
        let n = self.n;
        let mut cur = self.data.clone();
        // contract one slot at a time; slot `s` has stride n^(3-s)
        for slot in 0..4 {
            let stride = n.pow(3 - slot as u32);
            let mut next = vec![0.0; cur.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let a = (idx / stride) % n;
                let base = idx - a * stride;
                *out = (0..n).map(|i| frame[(i, a)] * cur[base + i * stride]).sum();
            }
            cur = next;
        }
        Tensor4 { n, data: cur }
    }

    /// Norm of the tensor computed from its components on a g-orthonormal frame.
    pub fn frobenius(&self, orthonormal: &DMatrix<f64>) -> f64 {
        self.in_frame(orthonormal).data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// All pointwise extrinsic data at one parameter value.
#[derive(Clone, Debug, Serialize)]
pub struct FramePoint {
    pub u: Vec<f64>,
    pub epsilon: f64,
    pub point: AmbientVector,
    pub tangent_basis: Vec<AmbientVector>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub normal: AmbientVector,
    /// Second fundamental form `h_ij = ⟨∂_i∂_j f, N⟩`.
    pub h: DMatrix<f64>,
    /// Shape operator `g⁻¹h` in the chart basis (column j is S∂_j).
    pub shape: DMatrix<f64>,
    /// Components T^i of the tangent part of ∂_{n+2}.
    pub t: DVector<f64>,
    /// `⟨∂_i, T⟩ = (gT)_i`
    pub t_lower: DVector<f64>,
    pub cos_theta: f64,
    pub t_norm2: f64,
}

impl FramePoint {
    pub fn n(&self) -> usize {
        self.metric.nrows()
    }

    pub fn g(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }

    /// Lower-triangular Cholesky factor L of the metric (g = L Lᵀ).
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        self.metric
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| GeomError::Regularity { u: self.u.clone(), reason: "metric not positive definite".into() })
    }

    /// A g-orthonormal frame (columns, chart basis): `L⁻ᵀ`.
    pub fn orthonormal_frame(&self) -> Result<DMatrix<f64>> {
        let l = self.cholesky_factor()?;
        let inv = l.try_inverse().ok_or_else(|| GeomError::Regularity { u: self.u.clone(), reason: "singular metric".into() })?;
        Ok(inv.transpose())
    }

    /// Shape operator on the orthonormal frame `orthonormal_frame()`: the
    /// symmetric matrix `L⁻¹ h L⁻ᵀ`.
    pub fn symmetric_shape(&self) -> Result<DMatrix<f64>> {
        let e = self.orthonormal_frame()?;
        let a = e.transpose() * &self.h * &e;
        Ok(0.5 * (&a + a.transpose()))
    }
}

/// Intrinsic curvature data at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureData {
    pub riemann: Tensor4,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    weyl: Option<Tensor4>,
    /// `christoffel[k][i][j] = Γ^k_ij`
    pub christoffel: Vec<Vec<Vec<f64>>>,
}

impl CurvatureData {
    pub fn weyl(&self) -> Result<&Tensor4> {
        self.weyl
            .as_ref()
            .ok_or_else(|| GeomError::Dimension(format!("Weyl tensor requires n >= 4, got n = {}", self.riemann.dim())))
    }
}

/// Taylor-valued local fields derived from a jet of order `order`.
pub(crate) struct LocalFields {
    pub n: usize,
    pub f: Vec<Taylor>,
    pub tangents: Vec<Vec<Taylor>>,
    pub g: Vec<Vec<Taylor>>,
    pub g_inv: Vec<Vec<Taylor>>,
    pub normal: Vec<Taylor>,
    pub h: Vec<Vec<Taylor>>,
    pub cos_theta: Taylor,
    pub t_lower: Vec<Taylor>,
    pub t_up: Vec<Taylor>,
    /// `christoffel[k][i][j] = Γ^k_ij`
    pub christoffel: Vec<Vec<Vec<Taylor>>>,
}

fn raw_normal(space: &AmbientSpace, f: &[Taylor], tangents: &[Vec<Taylor>], order: usize) -> Vec<Taylor> {
    let m = space.ambient_dim();
    let n = space.n;
    let mut rows: Vec<Vec<Taylor>> = tangents.iter().map(|r| r.iter().map(|x| x.truncate(order)).collect()).collect();
    let mut xi: Vec<Taylor> = f.iter().map(|x| x.truncate(order)).collect();
    xi[n + 1] = Taylor::constant(0.0, n, order);
    rows.push(xi);
    (0..m)
        .map(|col| {
            let minor: Vec<Vec<Taylor>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, x)| x.clone()).collect())
                .collect();
            let det = taylor::determinant(minor);
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            // lower the index so the Euclidean cofactor becomes signed-orthogonal
            det.scale(sign * space.weight(col))
        })
        .collect()
}

fn inner_t(space: &AmbientSpace, x: &[Taylor], y: &[Taylor]) -> Taylor {
    let mut acc = (x[0].clone() * y[0].clone()).scale(space.weight(0));
    for c in 1..x.len() {
        acc = acc.axpy(space.weight(c), &(&x[c] * &y[c]));
    }
    acc
}

fn orientation_seed(chart: &Chart) -> f64 {
    *chart.orientation.get_or_init(|| {
        let center = chart.domain().center();
        let seed = || -> Result<f64> {
            let f = chart.taylor(&center, 1)?;
            let tangents: Vec<Vec<Taylor>> = (0..chart.dim()).map(|i| f.iter().map(|x| x.derivative(i)).collect()).collect();
            let raw = raw_normal(chart.space(), &f, &tangents, 0);
            let last = raw[chart.dim() + 1].value();
            Ok(if last.abs() > ORIENTATION_CUTOFF { last.signum() } else { 1.0 })
        };
        seed().unwrap_or(1.0)
    })
}

impl LocalFields {
    pub fn new(chart: &Chart, u: &[f64], order: usize) -> Result<Self> {
        assert!((2..=3).contains(&order));
        let space = *chart.space();
        let n = space.n;
        let f = chart.taylor(u, order)?;
        let regularity = |reason: &str| GeomError::Regularity { u: u.to_vec(), reason: reason.to_string() };
        let tangents: Vec<Vec<Taylor>> = (0..n).map(|i| f.iter().map(|x| x.derivative(i)).collect()).collect();
        let g: Vec<Vec<Taylor>> =
            (0..n).map(|i| (0..n).map(|j| inner_t(&space, &tangents[i], &tangents[j])).collect()).collect();
        let low = order - 2;
        let g_low: Vec<Vec<Taylor>> = g.iter().map(|r| r.iter().map(|x| x.truncate(low)).collect()).collect();
        let gm = DMatrix::from_fn(n, n, |i, j| g[i][j].value());
        if gm.clone().cholesky().is_none() || gm.singular_values().min() < 1e-12 {
            return Err(regularity("metric is singular or not positive definite (not an immersion)"));
        }
        let g_inv = taylor::inverse(&g_low).ok_or_else(|| regularity("singular metric"))?;

        let raw = raw_normal(&space, &f, &tangents, low);
        let norm2 = inner_t(&space, &raw, &raw);
        if !(norm2.value() > 0.0) {
            return Err(GeomError::Signature(norm2.value()));
        }
        let last = raw[n + 1].value() / norm2.value().sqrt();
        let sign = if last.abs() > ORIENTATION_CUTOFF { last.signum() } else { orientation_seed(chart) };
        let inv_norm = norm2.sqrt().recip().scale(sign);
        let normal: Vec<Taylor> = raw.iter().map(|x| x * &inv_norm).collect();

        let h: Vec<Vec<Taylor>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let fij: Vec<Taylor> = tangents[i].iter().map(|x| x.derivative(j)).collect();
                        inner_t(&space, &fij, &normal)
                    })
                    .collect()
            })
            .collect();
        let cos_theta = normal[n + 1].clone();
        let t_lower: Vec<Taylor> = (0..n).map(|i| tangents[i][n + 1].clone()).collect();
        let t_up: Vec<Taylor> = (0..n)
            .map(|a| (1..n).fold(&g_inv[a][0] * &t_lower[0], |acc, b| acc + &g_inv[a][b] * &t_lower[b]))
            .collect();

        // Γ^k_ij = ½ g^kl (∂_i g_lj + ∂_j g_li − ∂_l g_ij)
        let dg: Vec<Vec<Vec<Taylor>>> =
            (0..n).map(|l| (0..n).map(|i| (0..n).map(|j| g[i][j].derivative(l)).collect()).collect()).collect();
        let christoffel: Vec<Vec<Vec<Taylor>>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let mut acc = Taylor::constant(0.0, n, low);
                                for l in 0..n {
                                    let bracket = &(&dg[i][l][j] + &dg[j][l][i]) - &dg[l][i][j];
                                    acc = acc + &g_inv[k][l] * &bracket;
                                }
                                acc.scale(0.5)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Ok(LocalFields { n, f, tangents, g, g_inv, normal, h, cos_theta, t_lower, t_up, christoffel })
    }

    pub fn frame_point(&self, chart: &Chart, u: &[f64]) -> FramePoint {
        let n = self.n;
        let m = chart.space().ambient_dim();
        let vec_of = |v: &[Taylor]| DVector::from_iterator(v.len(), v.iter().map(Taylor::value));
        let mat_of = |v: &[Vec<Taylor>]| DMatrix::from_fn(n, n, |i, j| v[i][j].value());
        let metric = mat_of(&self.g);
        let metric_inv = mat_of(&self.g_inv);
        let h = mat_of(&self.h);
        let h = 0.5 * (&h + h.transpose());
        let shape = &metric_inv * &h;
        let t = vec_of(&self.t_up);
        let t_lower = vec_of(&self.t_lower);
        let t_norm2 = t.dot(&t_lower);
        FramePoint {
            u: u.to_vec(),
            epsilon: chart.space().epsilon.value(),
            point: DVector::from_iterator(m, self.f.iter().map(Taylor::value)),
            tangent_basis: self.tangents.iter().map(|r| vec_of(r)).collect(),
            metric,
            metric_inv,
            normal: vec_of(&self.normal),
            h,
            shape,
            t,
            t_lower,
            cos_theta: self.cos_theta.value(),
            t_norm2,
        }
    }

    fn christoffel_values(&self) -> Vec<Vec<Vec<f64>>> {
        self.christoffel.iter().map(|a| a.iter().map(|b| b.iter().map(Taylor::value).collect()).collect()).collect()
    }
}

/// Frame at `u`: normal, metric, second fundamental form, shape operator, T and cos θ.
pub fn frame(chart: &Chart, u: &[f64]) -> Result<FramePoint> {
    let fields = LocalFields::new(chart, u, 2)?;
    Ok(fields.frame_point(chart, u))
}

/// Riemann tensor from the Gauss equation of Q^n(ε)×R.
pub fn riemann_gauss(fp: &FramePoint, space: &AmbientSpace) -> Tensor4 {
    let eps = space.epsilon.value();
    let g = &fp.metric;
    let h = &fp.h;
    let t = &fp.t_lower;
    Tensor4::from_fn(fp.n(), |i, j, k, l| {
        eps * (g[(i, l)] * g[(j, k)] - g[(i, k)] * g[(j, l)] + t[i] * t[k] * g[(j, l)] + t[j] * t[l] * g[(i, k)]
            - t[j] * t[k] * g[(i, l)]
            - t[i] * t[l] * g[(j, k)])
            + h[(i, l)] * h[(j, k)]
            - h[(i, k)] * h[(j, l)]
    })
}

fn riemann_from_fields(fields: &LocalFields) -> Tensor4 {
    let n = fields.n;
    let gam = &fields.christoffel;
    // R^m_ijk = ∂_i Γ^m_jk − ∂_j Γ^m_ik + Γ^m_ip Γ^p_jk − Γ^m_jp Γ^p_ik
    let mut up = vec![0.0; n * n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = gam[m][j][k].d1(i) - gam[m][i][k].d1(j);
                    for p in 0..n {
                        v += gam[m][i][p].value() * gam[p][j][k].value() - gam[m][j][p].value() * gam[p][i][k].value();
                    }
                    up[((m * n + i) * n + j) * n + k] = v;
                }
            }
        }
    }
    Tensor4::from_fn(n, |i, j, k, l| (0..n).map(|m| fields.g[l][m].value() * up[((m * n + i) * n + j) * n + k]).sum())
}

/// Riemann tensor from the Christoffel symbols of the induced metric (needs order-3 jets).
pub fn riemann_intrinsic(chart: &Chart, u: &[f64]) -> Result<Tensor4> {
    let fields = LocalFields::new(chart, u, 3)?;
    Ok(riemann_from_fields(&fields))
}

fn contract_curvature(riemann: Tensor4, fp: &FramePoint, christoffel: Vec<Vec<Vec<f64>>>) -> CurvatureData {
    let n = fp.n();
    let gi = &fp.metric_inv;
    let ricci = DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for i in 0..n {
            for l in 0..n {
                s += gi[(i, l)] * riemann.get(i, j, k, l);
            }
        }
        s
    });
    let ricci = 0.5 * (&ricci + ricci.transpose());
    let scalar = (gi.component_mul(&ricci)).sum();
    let weyl = (n >= 4).then(|| {
        let g = &fp.metric;
        let nf = n as f64;
        let schouten = (&ricci - g * (scalar / (2.0 * (nf - 1.0)))) / (nf - 2.0);
        Tensor4::from_fn(n, |i, j, k, l| {
            let kn = schouten[(i, l)] * g[(j, k)] + schouten[(j, k)] * g[(i, l)]
                - schouten[(i, k)] * g[(j, l)]
                - schouten[(j, l)] * g[(i, k)];
            riemann.get(i, j, k, l) - kn
        })
    });
    CurvatureData { riemann, ricci, scalar, weyl, christoffel }
}

/// Curvature data from a frame: Gauss-equation Riemann tensor, Ricci, scalar, Weyl.
pub fn curvature_from_frame(fp: &FramePoint, space: &AmbientSpace, christoffel: Vec<Vec<Vec<f64>>>) -> CurvatureData {
    contract_curvature(riemann_gauss(fp, space), fp, christoffel)
}

/// Frame and curvature package at `u`, sharing one jet evaluation.
pub fn frame_and_curvature(chart: &Chart, u: &[f64]) -> Result<(FramePoint, CurvatureData)> {
    let fields = LocalFields::new(chart, u, 2)?;
    let fp = fields.frame_point(chart, u);
    let cd = curvature_from_frame(&fp, chart.space(), fields.christoffel_values());
    Ok((fp, cd))
}

pub fn curvature_package(chart: &Chart, u: &[f64]) -> Result<CurvatureData> {
    Ok(frame_and_curvature(chart, u)?.1)
}

/// Everything the verification checks need at one point, from a single
/// order-3 jet: frame, Gauss curvature, intrinsic oracle and the residuals.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub frame: FramePoint,
    pub curvature: CurvatureData,
    pub riemann_intrinsic: Tensor4,
    pub codazzi: f64,
    pub t_field: (f64, f64),
}

pub fn point_geometry(chart: &Chart, u: &[f64]) -> Result<PointGeometry> {
    let fields = LocalFields::new(chart, u, 3)?;
    let frame = fields.frame_point(chart, u);
    let curvature = curvature_from_frame(&frame, chart.space(), fields.christoffel_values());
    let riemann_intrinsic = riemann_from_fields(&fields);
    let codazzi = codazzi_from_fields(&fields, &frame);
    let t_field = t_field_from_fields(&fields, &frame);
    Ok(PointGeometry { frame, curvature, riemann_intrinsic, codazzi, t_field })
}

fn shape_field(fields: &LocalFields) -> Vec<Vec<Taylor>> {
    let n = fields.n;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (1..n).fold(&fields.g_inv[i][0] * &fields.h[0][j], |acc, l| acc + &fields.g_inv[i][l] * &fields.h[l][j]))
                .collect()
        })
        .collect()
}

fn codazzi_from_fields(fields: &LocalFields, fp: &FramePoint) -> f64 {
    let n = fields.n;
    let s = shape_field(fields);
    let gam = &fields.christoffel;
    // (∇_k S)^i_j = ∂_k S^i_j + Γ^i_km S^m_j − Γ^m_kj S^i_m
    let nabla_s = |k: usize, i: usize, j: usize| -> f64 {
        let mut v = s[i][j].d1(k);
        for m in 0..n {
            v += gam[i][k][m].value() * s[m][j].value() - gam[m][k][j].value() * s[i][m].value();
        }
        v
    };
    let eps = fp.epsilon;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for j in 0..n {
            if k == j {
                continue;
            }
            let v = DVector::from_fn(n, |i, _| {
                let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                nabla_s(k, i, j) - nabla_s(j, i, k)
                    - eps * fp.cos_theta * (fp.t_lower[j] * delta(i, k) - fp.t_lower[k] * delta(i, j))
            });
            let norm = fp.g(&v, &v).max(0.0).sqrt() / (fp.metric[(k, k)] * fp.metric[(j, j)]).sqrt();
            worst = worst.max(norm);
        }
    }
    worst
}

fn t_field_from_fields(fields: &LocalFields, fp: &FramePoint) -> (f64, f64) {
    let n = fields.n;
    let gam = &fields.christoffel;
    let (mut r1, mut r2): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let v = DVector::from_fn(n, |a, _| {
            let mut nabla = fields.t_up[a].d1(i);
            for b in 0..n {
                nabla += gam[a][i][b].value() * fp.t[b];
            }
            nabla - fp.cos_theta * fp.shape[(a, i)]
        });
        let len = fp.metric[(i, i)].sqrt();
        r1 = r1.max(fp.g(&v, &v).max(0.0).sqrt() / len);
        let st = (0..n).map(|j| fp.h[(i, j)] * fp.t[j]).sum::<f64>();
        r2 = r2.max((fields.cos_theta.d1(i) + st).abs() / len);
    }
    (r1, r2)
}

/// Largest Codazzi defect over pairs of unit coordinate directions.
pub fn codazzi_residual(chart: &Chart, u: &[f64]) -> Result<f64> {
    let fields = LocalFields::new(chart, u, 3)?;
    let fp = fields.frame_point(chart, u);
    Ok(codazzi_from_fields(&fields, &fp))
}

/// `(max_i |∇_{e_i}T − cos θ S e_i|, max_i |e_i[cos θ] + ⟨e_i, ST⟩|)` over unit coordinate directions.
pub fn t_field_residuals(chart: &Chart, u: &[f64]) -> Result<(f64, f64)> {
    let fields = LocalFields::new(chart, u, 3)?;
    let fp = fields.frame_point(chart, u);
    Ok(t_field_from_fields(&fields, &fp))
}

/// Largest g-norm difference between T and the gradient of the height
/// function x_{n+2}∘f, the gradient taken by central differences with step `step`.
pub fn height_gradient_residual(chart: &Chart, fp: &FramePoint, step: f64) -> Result<f64> {
    let n = fp.n();
    let top = n + 1;
    let mut dh = DVector::zeros(n);
    for i in 0..n {
        let mut up = fp.u.clone();
        let mut down = fp.u.clone();
        up[i] += step;
        down[i] -= step;
        dh[i] = (chart.point(&up)?[top] - chart.point(&down)?[top]) / (2.0 * step);
    }
    let grad = &fp.metric_inv * dh;
    let diff = grad - &fp.t;
    Ok(fp.g(&diff, &diff).max(0.0).sqrt())
}

/// `(R·h)_ijkl = −h(R(∂_i,∂_j)∂_k, ∂_l) − h(R(∂_i,∂_j)∂_l, ∂_k)` in the chart basis.
pub fn semi_parallel_tensor(fp: &FramePoint, cd: &CurvatureData) -> Tensor4 {
    let n = fp.n();
    let gi = &fp.metric_inv;
    let h = &fp.h;
    // R^m_ijk = g^mp R_ijkp
    let up = |m: usize, i: usize, j: usize, k: usize| -> f64 { (0..n).map(|p| gi[(m, p)] * cd.riemann.get(i, j, k, p)).sum() };
    Tensor4::from_fn(n, |i, j, k, l| {
        let mut v = 0.0;
        for m in 0..n {
            v -= up(m, i, j, k) * h[(m, l)] + up(m, i, j, l) * h[(m, k)];
        }
        v
    })
}

/// Orthonormal principal frame with `e_1 = T/|T|`.
#[derive(Clone, Debug)]
pub struct PrincipalFrame {
    /// Frame vectors as columns, chart basis.
    pub basis: DMatrix<f64>,
    /// Principal curvatures; `mu[0]` belongs to T.
    pub mu: Vec<f64>,
}

/// Relative tolerance for T being an eigenvector of S.
pub const T_PRINCIPAL_TOL: f64 = 1e-6;
/// |T| at or below this is treated as T = 0.
pub const T_DEGENERATE_TOL: f64 = 1e-8;

/// Builds the principal frame adapted to T; fails when T vanishes or is not principal.
pub fn principal_frame(fp: &FramePoint) -> Result<PrincipalFrame> {
    let n = fp.n();
    let l = fp.cholesky_factor()?;
    let e = fp.orthonormal_frame()?;
    let a = fp.symmetric_shape()?;
    let t_orth = l.transpose() * &fp.t;
    let tn = t_orth.norm();
    if tn <= T_DEGENERATE_TOL {
        return Err(GeomError::Precondition(format!("T vanishes (|T| = {tn:e})")));
    }
    let t_hat = t_orth / tn;
    let at = &a * &t_hat;
    let lambda = t_hat.dot(&at);
    let scale = 1.0 + a.amax();
    if (&at - &t_hat * lambda).norm() > T_PRINCIPAL_TOL * scale {
        return Err(GeomError::Precondition("T is not a principal direction".into()));
    }
    // orthonormal completion of t_hat, then diagonalise the complement block
    let mut q = DMatrix::zeros(n, n);
    q.set_column(0, &t_hat);
    let mut filled = 1;
    for c in 0..n {
        if filled == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[c] = 1.0;
        for k in 0..filled {
            let col = q.column(k).clone_owned();
            v -= &col * col.dot(&v);
        }
        if v.norm() > 1e-6 {
            q.set_column(filled, &(v.normalize()));
            filled += 1;
        }
    }
    let b = q.transpose() * &a * &q;
    let block = b.view((1, 1), (n - 1, n - 1)).clone_owned();
    let eig = nalgebra::SymmetricEigen::new(0.5 * (&block + block.transpose()));
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut orth = DMatrix::zeros(n, n);
    orth.set_column(0, &t_hat);
    let mut mu = vec![lambda];
    for (slot, &idx) in order.iter().enumerate() {
        let mut full = DVector::zeros(n);
        full.rows_mut(1, n - 1).copy_from(&eig.eigenvectors.column(idx));
        orth.set_column(slot + 1, &(&q * full));
        mu.push(eig.eigenvalues[idx]);
    }
    Ok(PrincipalFrame { basis: e * orth, mu })
}

/// Closed form of R·h on the principal frame with e_1 = T/|T|:
/// `−(μ_l − μ_k)[(ε + μ_iμ_j) R⁰_ijkl + ε|T|²(δ_k1 R⁰_ijl1 + δ_l1 R⁰_ij1k)]`,
/// `R⁰_abcd = δ_ad δ_bc − δ_ac δ_bd`.
pub fn semi_parallel_expansion(fp: &FramePoint) -> Result<(Tensor4, PrincipalFrame)> {
    let pf = principal_frame(fp)?;
    let eps = fp.epsilon;
    let t2 = fp.t_norm2;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let r0 = |a: usize, b: usize, c: usize, e: usize| d(a, e) * d(b, c) - d(a, c) * d(b, e);
    let mu = &pf.mu;
    let tensor = Tensor4::from_fn(fp.n(), |i, j, k, l| {
        -(mu[l] - mu[k]) * ((eps + mu[i] * mu[j]) * r0(i, j, k, l) + eps * t2 * (d(k, 0) * r0(i, j, l, 0) + d(l, 0) * r0(i, j, 0, k)))
    });
    Ok((tensor, pf))
}

/// `Ric + ½ L_T g − c g`, using `½ L_T g = cos θ · h`.
pub fn soliton_residual(fp: &FramePoint, cd: &CurvatureData, c: f64) -> DMatrix<f64> {
    &cd.ricci + &fp.h * fp.cos_theta - &fp.metric * c
}

/// Sectional curvature of the plane spanned by the chart vectors `x`, `y`.
pub fn sectional(cd: &CurvatureData, fp: &FramePoint, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let area = fp.g(x, x) * fp.g(y, y) - fp.g(x, y).powi(2);
    let scale = fp.g(x, x) * fp.g(y, y);
    if !(area > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(GeomError::Domain("degenerate plane for sectional curvature".into()));
    }
    Ok(riemann_form(cd, x, y, y, x) / area)
}

/// `R(x, y, z, w)` for chart vectors.
pub fn riemann_form(cd: &CurvatureData, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        if x[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if y[j] == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    s += x[i] * y[j] * z[k] * w[l] * cd.riemann.get(i, j, k, l);
                }
            }
        }
    }
    s
}
