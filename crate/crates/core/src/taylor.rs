//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] carries the value of a scalar function of `vars` parameters
//! together with all of its partial derivatives up to a fixed order (at most
//! 3). Arithmetic propagates the derivatives exactly (Leibniz rule for
//! products, Faà di Bruno for composition with univariate functions), so a
//! chart evaluated on Taylor inputs yields its jet without finite differences.
//!
//! Derivative tensors are stored densely and fully symmetrised, which wastes
//! some memory but keeps indexing trivial for the small dimensions used here.

use std::ops::{Add, Mul, Neg, Sub};

/// Highest derivative order carried by a [`Taylor`].
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor {
    vars: usize,
    order: usize,
    coef: Vec<f64>,
}

fn len_for(vars: usize, order: usize) -> usize {
    (0..=order).map(|k| vars.pow(k as u32)).sum()
}

impl Taylor {
    pub fn constant(value: f64, vars: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "Taylor order {order} exceeds {MAX_ORDER}");
        let mut coef = vec![0.0; len_for(vars, order)];
        coef[0] = value;
        Taylor { vars, order, coef }
    }

    /// The coordinate function `u_index`, expanded at `value`.
    pub fn variable(value: f64, index: usize, vars: usize, order: usize) -> Self {
        assert!(index < vars);
        let mut t = Self::constant(value, vars, order);
        if order >= 1 {
            t.coef[1 + index] = 1.0;
        }
        t
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    #[inline]
    pub fn d1(&self, i: usize) -> f64 {
        debug_assert!(self.order >= 1);
        self.coef[1 + i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.order >= 2);
        let n = self.vars;
        self.coef[1 + n + i * n + j]
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(self.order >= 3);
        let n = self.vars;
        self.coef[1 + n + n * n + (i * n + j) * n + k]
    }

    #[inline]
    fn off2(&self) -> usize {
        1 + self.vars
    }

    #[inline]
    fn off3(&self) -> usize {
        1 + self.vars + self.vars * self.vars
    }

    /// Drops every derivative above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Taylor {
            vars: self.vars,
            order,
            coef: self.coef[..len_for(self.vars, order)].to_vec(),
        }
    }

    /// Partial derivative with respect to `u_index`; the result has one order less.
    pub fn derivative(&self, index: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 Taylor value");
        let n = self.vars;
        let order = self.order - 1;
        let mut out = Self::constant(self.d1(index), n, order);
        if order >= 1 {
            for j in 0..n {
                out.coef[1 + j] = self.d2(index, j);
            }
        }
        if order >= 2 {
            let o = out.off2();
            for j in 0..n {
                for k in 0..n {
                    out.coef[o + j * n + k] = self.d3(index, j, k);
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Taylor {
            vars: self.vars,
            order: self.order,
            coef: self.coef.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coef[0] += s;
        out
    }

    /// `self + s * other`, truncated to the lower order.
    pub fn axpy(&self, s: f64, other: &Taylor) -> Self {
        debug_assert_eq!(self.vars, other.vars);
        let order = self.order.min(other.order);
        let len = len_for(self.vars, order);
        Taylor {
            vars: self.vars,
            order,
            coef: (0..len).map(|i| self.coef[i] + s * other.coef[i]).collect(),
        }
    }

    /// Composition `f(self)` given `f` and its first three derivatives at `self.value()`.
    pub fn compose(&self, f: [f64; 4]) -> Self {
        let n = self.vars;
        let mut out = Self::constant(f[0], n, self.order);
        if self.order >= 1 {
            for i in 0..n {
                out.coef[1 + i] = f[1] * self.d1(i);
            }
        }
        if self.order >= 2 {
            let o = self.off2();
            for i in 0..n {
                for j in 0..n {
                    out.coef[o + i * n + j] =
                        f[2] * self.d1(i) * self.d1(j) + f[1] * self.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            let o = self.off3();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let (xi, xj, xk) = (self.d1(i), self.d1(j), self.d1(k));
                        out.coef[o + (i * n + j) * n + k] = f[3] * xi * xj * xk
                            + f[2]
                                * (self.d2(i, j) * xk + self.d2(i, k) * xj + self.d2(j, k) * xi)
                            + f[1] * self.d3(i, j, k);
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sqrt(&self) -> Self {
        let x = self.value();
        let s = x.sqrt();
        self.compose([
            s,
            0.5 / s,
            -0.25 / (x * s),
            0.375 / (x * x * s),
        ])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn sinh(&self) -> Self {
        let x = self.value();
        let (s, c) = (x.sinh(), x.cosh());
        self.compose([s, c, s, c])
    }

    pub fn cosh(&self) -> Self {
        let x = self.value();
        let (s, c) = (x.sinh(), x.cosh());
        self.compose([c, s, c, s])
    }

    fn mul_impl(&self, rhs: &Taylor) -> Taylor {
        debug_assert_eq!(self.vars, rhs.vars);
        let n = self.vars;
        let order = self.order.min(rhs.order);
        let (a, b) = (self, rhs);
        let mut out = Self::constant(a.value() * b.value(), n, order);
        if order >= 1 {
            for i in 0..n {
                out.coef[1 + i] = a.d1(i) * b.value() + a.value() * b.d1(i);
            }
        }
        if order >= 2 {
            let o = out.off2();
            for i in 0..n {
                for j in 0..n {
                    out.coef[o + i * n + j] = a.d2(i, j) * b.value()
                        + a.d1(i) * b.d1(j)
                        + a.d1(j) * b.d1(i)
                        + a.value() * b.d2(i, j);
                }
            }
        }
        if order >= 3 {
            let o = out.off3();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.coef[o + (i * n + j) * n + k] = a.d3(i, j, k) * b.value()
                            + a.d2(i, j) * b.d1(k)
                            + a.d2(i, k) * b.d1(j)
                            + a.d2(j, k) * b.d1(i)
                            + a.d1(i) * b.d2(j, k)
                            + a.d1(j) * b.d2(i, k)
                            + a.d1(k) * b.d2(i, j)
                            + a.value() * b.d3(i, j, k);
                    }
                }
            }
        }
        out
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        self.axpy(-1.0, rhs)
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        self.mul_impl(rhs)
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, rhs: Taylor) -> Taylor {
        &self + &rhs
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, rhs: Taylor) -> Taylor {
        &self - &rhs
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        &self * &rhs
    }
}

/// Determinant of a square matrix of Taylor values by Gaussian elimination
/// with partial pivoting on the values.
pub fn determinant(mut m: Vec<Vec<Taylor>>) -> Taylor {
    let size = m.len();
    assert!(size > 0);
    let vars = m[0][0].vars();
    let order = m.iter().flatten().map(Taylor::order).min().unwrap_or(0);
    let mut det = Taylor::constant(1.0, vars, order);
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&a, &b| m[a][col].value().abs().total_cmp(&m[b][col].value().abs()))
            .unwrap();
        if m[pivot][col].value() == 0.0 {
            return Taylor::constant(0.0, vars, order);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -&det;
        }
        det = &det * &m[col][col];
        let inv = m[col][col].recip();
        for row in col + 1..size {
            let factor = &m[row][col] * &inv;
            for k in col + 1..size {
                let update = &factor * &m[col][k];
                m[row][k] = &m[row][k] - &update;
            }
        }
    }
    det
}

/// Inverse of a square Taylor matrix by Gauss-Jordan elimination.
/// Returns `None` when a pivot value vanishes.
pub fn inverse(m: &[Vec<Taylor>]) -> Option<Vec<Vec<Taylor>>> {
    let size = m.len();
    let vars = m[0][0].vars();
    let order = m.iter().flatten().map(Taylor::order).min().unwrap_or(0);
    let mut a: Vec<Vec<Taylor>> = m
        .iter()
        .map(|row| row.iter().map(|x| x.truncate(order)).collect())
        .collect();
    let mut inv: Vec<Vec<Taylor>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| Taylor::constant(if i == j { 1.0 } else { 0.0 }, vars, order))
                .collect()
        })
        .collect();
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| a[x][col].value().abs().total_cmp(&a[y][col].value().abs()))
            .unwrap();
        if a[pivot][col].value().abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(pivot, col);
        inv.swap(pivot, col);
        let p = a[col][col].recip();
        for k in 0..size {
            a[col][k] = &a[col][k] * &p;
            inv[col][k] = &inv[col][k] * &p;
        }
        for row in 0..size {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for k in 0..size {
                let ua = &factor * &a[col][k];
                a[row][k] = &a[row][k] - &ua;
                let ui = &factor * &inv[col][k];
                inv[row][k] = &inv[row][k] - &ui;
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_of_variables() {
        let x = Taylor::variable(2.0, 0, 2, 3);
        let y = Taylor::variable(3.0, 1, 2, 3);
        let p = &(&x * &x) * &y; // x^2 y
        assert_eq!(p.value(), 12.0);
        assert_eq!(p.d1(0), 12.0);
        assert_eq!(p.d1(1), 4.0);
        assert_eq!(p.d2(0, 0), 6.0);
        assert_eq!(p.d2(0, 1), 4.0);
        assert_eq!(p.d3(0, 0, 1), 2.0);
        assert_eq!(p.d3(1, 0, 0), 2.0);
        assert_eq!(p.d3(0, 0, 0), 0.0);
    }

    #[test]
    fn composition_matches_closed_form() {
        // sin(x*y) at (0.7, -0.4)
        let (x0, y0) = (0.7, -0.4);
        let x = Taylor::variable(x0, 0, 2, 3);
        let y = Taylor::variable(y0, 1, 2, 3);
        let f = (&x * &y).sin();
        let p = x0 * y0;
        assert!(close(f.d1(0), y0 * p.cos(), 1e-14));
        assert!(close(f.d2(0, 1), p.cos() - x0 * y0 * p.sin(), 1e-14));
        // d^3/dx^2 dy sin(xy) = -2y sin(xy) - x y^2 cos(xy)
        let expect = -2.0 * y0 * p.sin() - x0 * y0 * y0 * p.cos();
        assert!(close(f.d3(0, 0, 1), expect, 1e-14));
    }

    #[test]
    fn sqrt_and_recip_roundtrip() {
        let x = Taylor::variable(1.7, 0, 1, 3);
        let z = &x.sqrt() * &x.sqrt();
        assert!(close(z.value(), 1.7, 1e-15));
        assert!(close(z.d1(0), 1.0, 1e-14));
        assert!(z.d2(0, 0).abs() < 1e-14);
        assert!(z.d3(0, 0, 0).abs() < 1e-13);
        let r = &x * &x.recip();
        assert!(close(r.value(), 1.0, 1e-15));
        assert!(r.d3(0, 0, 0).abs() < 1e-13);
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Taylor::variable(0.3, 0, 2, 3);
        let y = Taylor::variable(0.5, 1, 2, 3);
        let f = (&x * &y).cosh();
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        assert_eq!(fx.value(), f.d1(0));
        assert_eq!(fx.d1(1), f.d2(0, 1));
        assert_eq!(fx.d2(1, 1), f.d3(0, 1, 1));
    }

    #[test]
    fn determinant_and_inverse() {
        let t = Taylor::variable(0.2, 0, 1, 2);
        let one = Taylor::constant(1.0, 1, 2);
        // [[1, t], [t, 2]] -> det = 2 - t^2
        let m = vec![vec![one.clone(), t.clone()], vec![t.clone(), one.scale(2.0)]];
        let d = determinant(m.clone());
        assert!(close(d.value(), 2.0 - 0.04, 1e-15));
        assert!(close(d.d1(0), -0.4, 1e-15));
        assert!(close(d.d2(0, 0), -2.0, 1e-14));
        let inv = inverse(&m).unwrap();
        let prod = &(&m[0][0] * &inv[0][0]) + &(&m[0][1] * &inv[1][0]);
        assert!(close(prod.value(), 1.0, 1e-15));
        assert!(prod.d1(0).abs() < 1e-14 && prod.d2(0, 0).abs() < 1e-13);
    }

    #[test]
    fn mixed_orders_truncate() {
        let a = Taylor::variable(1.0, 0, 2, 3);
        let b = Taylor::variable(1.0, 1, 2, 1);
        assert_eq!((&a * &b).order(), 1);
        assert_eq!((&a + &b).order(), 1);
    }
}
