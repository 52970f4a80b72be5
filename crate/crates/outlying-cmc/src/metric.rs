//! Ambient metric of the model: the mass-2 conformally flat background
//! (1 + |x|^-1)^4 delta plus the homogeneous perturbation tensor, with
//! analytic first derivatives, positivity checking, and the derived
//! quantities (inverse, Christoffel symbols, volume density) that the
//! surface geometry needs.

use crate::error::{Error, Result};
use crate::tensor::{Mat3, PerturbationTensor, ZeroTensor};

/// Metric selector: the conformal background plus an optional perturbation,
/// or the exact flat metric as an internal test mode.
pub struct MetricSpec {
    tensor: Box<dyn PerturbationTensor>,
    flat: bool,
}

/// One metric evaluation: components, coordinate derivatives, and the
/// Cholesky factor that witnessed positive definiteness.
#[derive(Debug, Clone)]
pub struct MetricEval {
    pub g: Mat3,
    /// dg[k][i][j] = d g_ij / d x_k
    pub dg: [Mat3; 3],
    chol: Mat3,
}

impl MetricSpec {
    pub fn schwarzschild() -> Self {
        MetricSpec { tensor: Box::new(ZeroTensor), flat: false }
    }

    /// Flat euclidean metric; only for validating the geometry pipeline
    /// against round-sphere closed forms.
    pub fn flat() -> Self {
        MetricSpec { tensor: Box::new(ZeroTensor), flat: true }
    }

    pub fn with_tensor(tensor: Box<dyn PerturbationTensor>) -> Self {
        MetricSpec { tensor, flat: false }
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn tensor(&self) -> &dyn PerturbationTensor {
        self.tensor.as_ref()
    }

    pub fn eval(&self, x: [f64; 3]) -> Result<MetricEval> {
        if self.flat {
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                g[i][i] = 1.0;
            }
            return Ok(MetricEval { g, dg: [[[0.0; 3]; 3]; 3], chol: g });
        }
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 == 0.0 {
            return Err(Error::Domain(
                "metric evaluated at the origin".to_string(),
            ));
        }
        let r = r2.sqrt();
        let phi = 1.0 + 1.0 / r;
        let phi2 = phi * phi;
        let conf = phi2 * phi2;
        // d/dx_k (1 + 1/r)^4 = -4 (1 + 1/r)^3 x_k / r^3
        let dconf_scale = -4.0 * phi * phi2 / (r2 * r);
        let mut g = if self.tensor.is_zero() {
            [[0.0; 3]; 3]
        } else {
            self.tensor.components(x)
        };
        for i in 0..3 {
            g[i][i] += conf;
        }
        let mut dg = if self.tensor.is_zero() {
            [[[0.0; 3]; 3]; 3]
        } else {
            self.tensor.first_derivatives(x)
        };
        for k in 0..3 {
            let d = dconf_scale * x[k];
            for i in 0..3 {
                dg[k][i][i] += d;
            }
        }
        let chol = cholesky(&g)
            .ok_or(Error::MetricDegenerate { x: x[0], y: x[1], z: x[2] })?;
        Ok(MetricEval { g, dg, chol })
    }
}

/// Lower-triangular Cholesky factor, None if not positive definite.
fn cholesky(g: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

impl MetricEval {
    pub fn sqrt_det(&self) -> f64 {
        self.chol[0][0] * self.chol[1][1] * self.chol[2][2]
    }

    /// Inverse metric from the Cholesky factor.
    pub fn inverse(&self) -> Mat3 {
        // solve L L^T X = I column by column
        let l = &self.chol;
        let mut inv = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut y = [0.0; 3];
            for i in 0..3 {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[i][k] * y[k];
                }
                y[i] = s / l[i][i];
            }
            for i in (0..3).rev() {
                let mut s = y[i];
                for k in (i + 1)..3 {
                    s -= l[k][i] * inv[k][c];
                }
                inv[i][c] = s / l[i][i];
            }
        }
        inv
    }

    /// Christoffel symbols gamma[k][i][j] = Gamma^k_ij of the Levi-Civita
    /// connection.
    pub fn christoffels(&self) -> [Mat3; 3] {
        let inv = self.inverse();
        let mut gamma = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..=i {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += inv[k][l]
                            * (self.dg[i][j][l] + self.dg[j][i][l] - self.dg[l][i][j]);
                    }
                    let v = 0.5 * s;
                    gamma[k][i][j] = v;
                    gamma[k][j][i] = v;
                }
            }
        }
        gamma
    }
}
