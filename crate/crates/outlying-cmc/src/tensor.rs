//! The homogeneous degree -2 symmetric perturbation tensor: evaluation,
//! analytic differentiation, traces, and the linearized scalar-curvature
//! density.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Mat3 = [[f64; 3]; 3];

fn norm2(x: [f64; 3]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

fn check_nonzero(x: [f64; 3]) -> Result<()> {
    if norm2(x) == 0.0 {
        return Err(Error::Domain("tensor evaluated at the origin".into()));
    }
    Ok(())
}

/// Symmetric perturbation tensor with two orders of derivatives.
///
/// Components are homogeneous of degree -2; implementations with analytic
/// derivatives report full precision, finite-difference-backed ones are
/// flagged `reduced_precision`.
pub trait PerturbationTensor: Send + Sync {
    fn components(&self, x: [f64; 3]) -> Mat3;
    /// `[k]` holds the matrix of D_k T_ij.
    fn first_derivatives(&self, x: [f64; 3]) -> [Mat3; 3];
    /// `[k][m]` holds the matrix of D_k D_m T_ij.
    fn second_derivatives(&self, x: [f64; 3]) -> [[Mat3; 3]; 3];

    fn reduced_precision(&self) -> bool {
        false
    }

    /// Structural zero test; lets integral code skip vanishing terms.
    fn is_zero(&self) -> bool {
        false
    }

    /// Fast-path hook: tensors of the form -2|x|^-2 psi(x3/|x|) diag(1,1,-2)
    /// expose their profile so integrals can use ring-resolved quadrature.
    fn axisymmetric(&self) -> Option<&AxisymmetricTensor> {
        None
    }

    /// Ambient trace; structurally zero for the axisymmetric family.
    fn trace(&self, x: [f64; 3]) -> f64 {
        let t = self.components(x);
        t[0][0] + t[1][1] + t[2][2]
    }
}

/// T = 0; the Schwarzschild background.
pub struct ZeroTensor;

impl PerturbationTensor for ZeroTensor {
    fn components(&self, _x: [f64; 3]) -> Mat3 {
        [[0.0; 3]; 3]
    }
    fn first_derivatives(&self, _x: [f64; 3]) -> [Mat3; 3] {
        [[[0.0; 3]; 3]; 3]
    }
    fn second_derivatives(&self, _x: [f64; 3]) -> [[Mat3; 3]; 3] {
        [[[[0.0; 3]; 3]; 3]; 3]
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn trace(&self, _x: [f64; 3]) -> f64 {
        0.0
    }
}

/// Smooth profile psi on [-1, 1] with two derivatives.
pub trait AxisymmetricProfile: Send + Sync {
    fn psi(&self, t: f64) -> f64;
    fn dpsi(&self, t: f64) -> f64;
    fn ddpsi(&self, t: f64) -> f64;

    /// All three values at once; hot loops use this to share work.
    fn psi_all(&self, t: f64) -> (f64, f64, f64) {
        (self.psi(t), self.dpsi(t), self.ddpsi(t))
    }
}

/// Constant profile; the tensor it generates is the simplest trace-free case.
pub struct ConstantProfile(pub f64);

impl AxisymmetricProfile for ConstantProfile {
    fn psi(&self, _t: f64) -> f64 {
        self.0
    }
    fn dpsi(&self, _t: f64) -> f64 {
        0.0
    }
    fn ddpsi(&self, _t: f64) -> f64 {
        0.0
    }
}

/// T = -2 |x|^-2 psi(x3/|x|) (dx1 dx1 + dx2 dx2 - 2 dx3 dx3).
///
/// Trace-free by the coefficient sum 1 + 1 - 2 = 0; all derivatives are
/// analytic chain rules through (psi, psi', psi'').
pub struct AxisymmetricTensor {
    profile: Box<dyn AxisymmetricProfile>,
}

const DIAG: [f64; 3] = [1.0, 1.0, -2.0];

impl AxisymmetricTensor {
    pub fn new(profile: Box<dyn AxisymmetricProfile>) -> Self {
        AxisymmetricTensor { profile }
    }

    pub fn profile(&self) -> &dyn AxisymmetricProfile {
        self.profile.as_ref()
    }

    /// Scalar prefactor f(x) = -2 |x|^-2 psi(x3/|x|).
    pub fn prefactor(&self, x: [f64; 3]) -> f64 {
        let r2 = norm2(x);
        -2.0 / r2 * self.profile.psi(x[2] / r2.sqrt())
    }

    /// Gradient of the prefactor.
    fn prefactor_gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = norm2(x);
        let r = r2.sqrt();
        let t = x[2] / r;
        let (p, dp, _) = self.profile.psi_all(t);
        let ir4 = 1.0 / (r2 * r2);
        let ir2 = 1.0 / r2;
        let ir3 = ir2 / r;
        let mut g = [0.0; 3];
        for k in 0..3 {
            let tk = if k == 2 { 1.0 / r - x[2] * x[2] * ir3 } else { -x[2] * x[k] * ir3 };
            g[k] = 4.0 * x[k] * ir4 * p - 2.0 * ir2 * dp * tk;
        }
        g
    }

    /// Hessian of the prefactor.
    fn prefactor_hessian(&self, x: [f64; 3]) -> Mat3 {
        let r2 = norm2(x);
        let r = r2.sqrt();
        let t = x[2] / r;
        let (p, dp, ddp) = self.profile.psi_all(t);
        let ir2 = 1.0 / r2;
        let ir3 = ir2 / r;
        let ir4 = ir2 * ir2;
        let ir5 = ir4 / r;
        let ir6 = ir4 * ir2;
        let tk = |k: usize| {
            if k == 2 {
                1.0 / r - x[2] * x[2] * ir3
            } else {
                -x[2] * x[k] * ir3
            }
        };
        let mut h = [[0.0; 3]; 3];
        for k in 0..3 {
            for m in k..3 {
                let dkm = if k == m { 1.0 } else { 0.0 };
                let dk3 = if k == 2 { 1.0 } else { 0.0 };
                let dm3 = if m == 2 { 1.0 } else { 0.0 };
                let tkm = -dk3 * x[m] * ir3 - dm3 * x[k] * ir3 - x[2] * dkm * ir3
                    + 3.0 * x[2] * x[k] * x[m] * ir5;
                let v = 4.0 * dkm * ir4 * p - 16.0 * x[k] * x[m] * ir6 * p
                    + 4.0 * x[k] * ir4 * dp * tk(m)
                    + 4.0 * x[m] * ir4 * dp * tk(k)
                    - 2.0 * ir2 * ddp * tk(k) * tk(m)
                    - 2.0 * ir2 * dp * tkm;
                h[k][m] = v;
                h[m][k] = v;
            }
        }
        h
    }

    /// tr_S(T) as a function of (x3, |x|^2, nu3) for unit normals; with the
    /// ambient trace vanishing this is -T(nu, nu) = 2 |x|^-2 psi (1 - 3 nu3^2).
    pub fn trace_sphere_profile(&self, x3: f64, n2: f64, nu3: f64) -> f64 {
        2.0 / n2 * self.profile.psi(x3 / n2.sqrt()) * (1.0 - 3.0 * nu3 * nu3)
    }

    /// Linearized scalar-curvature density as a function of (x3, |x|^2);
    /// the ring-quadrature fast path feeds it per azimuthal node.
    pub fn density_profile(&self, x3: f64, r2: f64) -> f64 {
        let r = r2.sqrt();
        let t = x3 / r;
        let (p, dp, ddp) = self.profile.psi_all(t);
        let ir = 1.0 / r;
        let ir2 = 1.0 / r2;
        let ir3 = ir2 * ir;
        let ir4 = ir2 * ir2;
        let ir5 = ir4 * ir;
        let ir6 = ir4 * ir2;
        let rho2 = r2 - x3 * x3;
        let s_xk2 = rho2 - 2.0 * x3 * x3;
        let t3 = ir - x3 * x3 * ir3;
        let s_xt = -x3 * rho2 * ir3 - 2.0 * x3 * t3;
        let s_t2 = x3 * x3 * rho2 * ir6 - 2.0 * t3 * t3;
        let s_tkk = 4.0 * x3 * ir3 + 3.0 * x3 * s_xk2 * ir5;
        -16.0 * ir6 * p * s_xk2 + 8.0 * ir4 * dp * s_xt - 2.0 * ir2 * ddp * s_t2
            - 2.0 * ir2 * dp * s_tkk
    }
}

impl PerturbationTensor for AxisymmetricTensor {
    fn components(&self, x: [f64; 3]) -> Mat3 {
        let f = self.prefactor(x);
        let mut t = [[0.0; 3]; 3];
        for i in 0..3 {
            t[i][i] = f * DIAG[i];
        }
        t
    }

    fn first_derivatives(&self, x: [f64; 3]) -> [Mat3; 3] {
        let g = self.prefactor_gradient(x);
        let mut out = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            for i in 0..3 {
                out[k][i][i] = g[k] * DIAG[i];
            }
        }
        out
    }

    fn second_derivatives(&self, x: [f64; 3]) -> [[Mat3; 3]; 3] {
        let h = self.prefactor_hessian(x);
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for k in 0..3 {
            for m in 0..3 {
                for i in 0..3 {
                    out[k][m][i][i] = h[k][m] * DIAG[i];
                }
            }
        }
        out
    }

    fn axisymmetric(&self) -> Option<&AxisymmetricTensor> {
        Some(self)
    }

    fn trace(&self, _x: [f64; 3]) -> f64 {
        0.0
    }
}

/// Arbitrary user tensor; derivatives by high-order central differences,
/// reported as reduced precision.
pub struct GenericTensor<F: Fn([f64; 3]) -> Mat3 + Send + Sync> {
    components: F,
}

impl<F: Fn([f64; 3]) -> Mat3 + Send + Sync> GenericTensor<F> {
    pub fn new(components: F) -> Self {
        GenericTensor { components }
    }

    fn step(x: [f64; 3]) -> f64 {
        1e-4 * norm2(x).sqrt().max(1.0)
    }

    fn shifted(&self, x: [f64; 3], k: usize, d: f64) -> Mat3 {
        let mut y = x;
        y[k] += d;
        (self.components)(y)
    }
}

fn mat_combine(terms: &[(f64, Mat3)], scale: f64) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for &(c, m) in terms {
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += c * m[i][j];
            }
        }
    }
    for row in &mut out {
        for v in row {
            *v *= scale;
        }
    }
    out
}

impl<F: Fn([f64; 3]) -> Mat3 + Send + Sync> PerturbationTensor for GenericTensor<F> {
    fn components(&self, x: [f64; 3]) -> Mat3 {
        (self.components)(x)
    }

    fn first_derivatives(&self, x: [f64; 3]) -> [Mat3; 3] {
        let h = Self::step(x);
        std::array::from_fn(|k| {
            // five-point fourth-order central stencil
            mat_combine(
                &[
                    (1.0, self.shifted(x, k, -2.0 * h)),
                    (-8.0, self.shifted(x, k, -h)),
                    (8.0, self.shifted(x, k, h)),
                    (-1.0, self.shifted(x, k, 2.0 * h)),
                ],
                1.0 / (12.0 * h),
            )
        })
    }

    fn second_derivatives(&self, x: [f64; 3]) -> [[Mat3; 3]; 3] {
        let h = Self::step(x);
        let deriv_k = |y: [f64; 3], k: usize| -> Mat3 {
            let shift = |d: f64| {
                let mut z = y;
                z[k] += d;
                (self.components)(z)
            };
            mat_combine(
                &[
                    (1.0, shift(-2.0 * h)),
                    (-8.0, shift(-h)),
                    (8.0, shift(h)),
                    (-1.0, shift(2.0 * h)),
                ],
                1.0 / (12.0 * h),
            )
        };
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for k in 0..3 {
            // diagonal: fourth-order second-difference stencil
            out[k][k] = mat_combine(
                &[
                    (-1.0, self.shifted(x, k, -2.0 * h)),
                    (16.0, self.shifted(x, k, -h)),
                    (-30.0, (self.components)(x)),
                    (16.0, self.shifted(x, k, h)),
                    (-1.0, self.shifted(x, k, 2.0 * h)),
                ],
                1.0 / (12.0 * h * h),
            );
            for m in (k + 1)..3 {
                // cross: outer fourth-order stencil over inner derivatives
                let at = |d: f64| {
                    let mut y = x;
                    y[m] += d;
                    deriv_k(y, k)
                };
                let v = mat_combine(
                    &[
                        (1.0, at(-2.0 * h)),
                        (-8.0, at(-h)),
                        (8.0, at(h)),
                        (-1.0, at(2.0 * h)),
                    ],
                    1.0 / (12.0 * h),
                );
                out[k][m] = v;
                out[m][k] = v;
            }
        }
        out
    }

    fn reduced_precision(&self) -> bool {
        true
    }
}

fn quadratic_form(m: &Mat3, v: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += m[i][j] * v[i] * v[j];
        }
    }
    s
}

fn mat_trace(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

/// tr_{R^3}(T) at x.
pub fn trace_ambient(tensor: &dyn PerturbationTensor, x: [f64; 3]) -> Result<f64> {
    check_nonzero(x)?;
    Ok(tensor.trace(x))
}

fn check_on_sphere(xi: [f64; 3], x: [f64; 3]) -> Result<[f64; 3]> {
    let nu = [x[0] - xi[0], x[1] - xi[1], x[2] - xi[2]];
    if (norm2(nu).sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "point ({}, {}, {}) is not on the unit sphere about ({}, {}, {})",
            x[0], x[1], x[2], xi[0], xi[1], xi[2]
        )));
    }
    Ok(nu)
}

/// Spherical trace tr_S(T) = tr(T) - T(nu, nu) at x on the unit sphere
/// about xi.
pub fn trace_sphere(tensor: &dyn PerturbationTensor, xi: [f64; 3], x: [f64; 3]) -> Result<f64> {
    check_nonzero(x)?;
    let nu = check_on_sphere(xi, x)?;
    let t = tensor.components(x);
    Ok(tensor.trace(x) - quadratic_form(&t, nu))
}

/// tr_S(D_nu T) at x on the unit sphere about xi, frame-free as
/// tr(D_nu T) - (D_nu T)(nu, nu).
pub fn normal_derivative_trace(
    tensor: &dyn PerturbationTensor,
    xi: [f64; 3],
    x: [f64; 3],
) -> Result<f64> {
    check_nonzero(x)?;
    let nu = check_on_sphere(xi, x)?;
    let d = tensor.first_derivatives(x);
    let mut dn = [[0.0; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                dn[i][j] += nu[k] * d[k][i][j];
            }
        }
    }
    Ok(mat_trace(&dn) - quadratic_form(&dn, nu))
}

/// Linearized scalar-curvature density
/// sum_{i,j} (D_i D_j T_ij - D_i D_i T_jj); homogeneous of degree -4.
pub fn scalar_density(tensor: &dyn PerturbationTensor, x: [f64; 3]) -> Result<f64> {
    check_nonzero(x)?;
    if let Some(axi) = tensor.axisymmetric() {
        return Ok(axi.density_profile(x[2], norm2(x)));
    }
    let dd = tensor.second_derivatives(x);
    let mut div_div = 0.0;
    let mut lap_tr = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            div_div += dd[i][j][i][j];
        }
        lap_tr += mat_trace(&dd[i][i]);
    }
    Ok(div_div - lap_tr)
}

/// Max-norm of sum_k x_k D_k T_ij + 2 T_ij; zero for exactly homogeneous
/// degree -2 tensors.
pub fn euler_residual(tensor: &dyn PerturbationTensor, x: [f64; 3]) -> Result<f64> {
    check_nonzero(x)?;
    let t = tensor.components(x);
    let d = tensor.first_derivatives(x);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 2.0 * t[i][j];
            for k in 0..3 {
                v += x[k] * d[k][i][j];
            }
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Natural cubic spline through (t, psi) samples; backs table profiles.
pub struct SplineProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl SplineProfile {
    pub fn new(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidArgument(
                "table profile needs at least 3 samples".into(),
            ));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = samples.len();
        for w in samples.windows(2) {
            if w[1].0 - w[0].0 <= 0.0 {
                return Err(Error::InvalidArgument(
                    "table profile has duplicate abscissae".into(),
                ));
            }
        }
        let knots: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        // Thomas solve for natural second derivatives
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        b[0] = 1.0;
        b[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            d[i] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
        }
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / b[0];
        dp[0] = d[0] / b[0];
        for i in 1..n {
            let m = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / m;
            dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
        }
        let mut second = vec![0.0; n];
        second[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = dp[i] - cp[i] * second[i + 1];
        }
        Ok(SplineProfile {
            knots,
            values,
            second,
        })
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let n = self.knots.len();
        let t = t.clamp(self.knots[0], self.knots[n - 1]);
        let i = match self
            .knots
            .binary_search_by(|k| k.total_cmp(&t))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        (i, t, self.knots[i + 1] - self.knots[i])
    }
}

impl AxisymmetricProfile for SplineProfile {
    fn psi(&self, t: f64) -> f64 {
        let (i, t, h) = self.segment(t);
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }

    fn dpsi(&self, t: f64) -> f64 {
        let (i, t, h) = self.segment(t);
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (self.values[i + 1] - self.values[i]) / h
            + ((3.0 * b * b - 1.0) * self.second[i + 1] - (3.0 * a * a - 1.0) * self.second[i]) * h
                / 6.0
    }

    fn ddpsi(&self, t: f64) -> f64 {
        let (i, t, h) = self.segment(t);
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.second[i] + b * self.second[i + 1]
    }
}

/// JSON wire format for tensors accepted by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TensorSpec {
    Zero,
    Axisymmetric { profile: ProfileSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProfileSpec {
    Counterexample {
        k: u32,
        s0: f64,
        amplitude: f64,
    },
    Table {
        samples: Vec<(f64, f64)>,
    },
}
