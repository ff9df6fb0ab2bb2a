//! The flat ambient spaces E^(n+2) and L^(n+2) and the product Q^n(ε)×R inside them.
//!
//! Q^n(+1) is the unit sphere `x_1² + … + x_{n+1}² = 1`; Q^n(−1) is the upper
//! sheet of `−x_1² + x_2² + … + x_{n+1}² = −1`. The last coordinate is the R factor.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Sign of the curvature of the space-form factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Epsilon {
    Sphere,
    Hyperbolic,
}

impl Epsilon {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Epsilon::Sphere),
            -1 => Ok(Epsilon::Hyperbolic),
            other => Err(GeomError::Input(format!("epsilon must be +1 or -1, got {other}"))),
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Epsilon::Sphere => 1.0,
            Epsilon::Hyperbolic => -1.0,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Epsilon::Sphere => 1,
            Epsilon::Hyperbolic => -1,
        }
    }

    /// `C_ε(s)`: cos for the sphere, cosh for hyperbolic space.
    pub fn c(self, s: f64) -> f64 {
        match self {
            Epsilon::Sphere => s.cos(),
            Epsilon::Hyperbolic => s.cosh(),
        }
    }

    /// `S_ε(s)`: sin for the sphere, sinh for hyperbolic space.
    pub fn s(self, s: f64) -> f64 {
        match self {
            Epsilon::Sphere => s.sin(),
            Epsilon::Hyperbolic => s.sinh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbientSpace {
    pub epsilon: Epsilon,
    /// Dimension of the Q factor (and of the hypersurfaces).
    pub n: usize,
}

/// Point or vector of the flat ambient space, `n + 2` coordinates.
pub type AmbientVector = DVector<f64>;

impl AmbientSpace {
    pub fn new(epsilon: Epsilon, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(GeomError::Input(format!("dimension n must be >= 2, got {n}")));
        }
        Ok(AmbientSpace { epsilon, n })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 2
    }

    /// Signature weight of coordinate `i` (0-based).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 && self.epsilon == Epsilon::Hyperbolic {
            -1.0
        } else {
            1.0
        }
    }

    fn check_len(&self, v: &AmbientVector) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(GeomError::Input(format!(
                "ambient vector has {} components, expected {}",
                v.len(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Signed inner product of E^(n+2) (ε = 1) or L^(n+2) (ε = −1).
    pub fn inner(&self, x: &AmbientVector, y: &AmbientVector) -> Result<f64> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.inner_unchecked(x.as_slice(), y.as_slice()))
    }

    #[inline]
    pub(crate) fn inner_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (a, b))| self.weight(i) * a * b)
            .sum()
    }

    /// Membership test for Q^n(ε)×R; the lower sheet of the hyperboloid is rejected.
    pub fn on_manifold(&self, p: &AmbientVector, tol: f64) -> Result<bool> {
        self.check_len(p)?;
        if !(tol > 0.0) {
            return Err(GeomError::Input(format!("tolerance must be positive, got {tol}")));
        }
        let q: f64 = (0..=self.n).map(|i| self.weight(i) * p[i] * p[i]).sum();
        let on_quadric = (q - self.epsilon.value()).abs() <= tol;
        let right_sheet = self.epsilon == Epsilon::Sphere || p[0] > 0.0;
        Ok(on_quadric && right_sheet)
    }

    /// The parallel unit field ∂_{x_{n+2}}.
    pub fn vertical_field(&self) -> AmbientVector {
        let mut v = DVector::zeros(self.ambient_dim());
        v[self.n + 1] = 1.0;
        v
    }

    /// Normal of Q^n(ε)×R at `p` with respect to the signed metric: the position
    /// vector with its last coordinate dropped. It satisfies `inner(ξ, ξ) = ε` on the manifold.
    pub fn quadric_normal(&self, p: &AmbientVector) -> AmbientVector {
        let mut xi = p.clone();
        xi[self.n + 1] = 0.0;
        xi
    }
}
