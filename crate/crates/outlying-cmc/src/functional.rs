//! The reduced area functional F on sphere centers, its closed-form
//! background part, the flux pair G and K with their differential identity,
//! and Newton search for critical points of F.

use crate::error::{Error, Result};
use crate::quadrature::{
    build_sphere_grid, integrate_ball, integrate_ball_profile, integrate_sphere,
    integrate_sphere_profile, OriginSingular, QuadratureGrid, RadialRule,
};
use crate::tensor::{scalar_density, AxisymmetricTensor, PerturbationTensor};
use nalgebra::{Matrix3, Vector3};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Immutable evaluation context: the perturbation tensor plus the quadrature
/// rules every integral term shares.
pub struct FunctionalContext {
    tensor: Box<dyn PerturbationTensor>,
    sphere_grid: QuadratureGrid,
    radial: RadialRule,
}

impl FunctionalContext {
    /// Polynomial exactness of at least degree 31 keeps the low spherical
    /// harmonics in the integrands exact, so `n_polar >= 16`.
    pub fn new(
        tensor: Box<dyn PerturbationTensor>,
        n_polar: usize,
        n_radial: usize,
    ) -> Result<Self> {
        let sphere_grid = build_sphere_grid(n_polar)?;
        if sphere_grid.exactness_degree < 31 {
            return Err(Error::InvalidArgument(format!(
                "sphere grid exactness {} is below 31; use n_polar >= 16",
                sphere_grid.exactness_degree
            )));
        }
        let radial = RadialRule::new(n_radial)?;
        Ok(FunctionalContext {
            tensor,
            sphere_grid,
            radial,
        })
    }

    pub fn tensor(&self) -> &dyn PerturbationTensor {
        self.tensor.as_ref()
    }

    pub fn sphere_grid(&self) -> &QuadratureGrid {
        &self.sphere_grid
    }

    pub fn radial(&self) -> &RadialRule {
        &self.radial
    }
}

fn check_radius(r: f64, what: &str) -> Result<()> {
    if !(r > 1.0) {
        return Err(Error::Domain(format!("{what} requires radius > 1, got {r}")));
    }
    Ok(())
}

/// Expanding the logs in powers of u = 1/r gives
/// schwarzschild_part(r) = sum_{m>=3} c_m u^(2m) with
/// c_m = -16/(m+1) + 30/(2m+1) - 2/(2m-1); the m = 0, 1, 2 coefficients
/// vanish identically, which is why the value decays like r^-6 while the
/// closed form subtracts terms of size ~30. Past the crossover radius the
/// series is exact to machine precision and the closed form is not.
const SERIES_RADIUS: f64 = 8.0;

fn background_tail(u2: f64, radial_derivative: bool) -> f64 {
    let mut sum = 0.0;
    let mut pw = u2 * u2 * u2;
    for m in 3..=60 {
        let mf = m as f64;
        let c = -16.0 / (mf + 1.0) + 30.0 / (2.0 * mf + 1.0) - 2.0 / (2.0 * mf - 1.0);
        let term = if radial_derivative { -2.0 * mf * c } else { c } * pw;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        pw *= u2;
    }
    sum
}

/// Closed-form background part of F:
/// -14 + 16 r^2 log((r^2-1)/r^2) + (15r - 1/r) log((r+1)/(r-1)).
///
/// The logs go through `ln_1p`, and large radii switch to the exact power
/// series so the three-way cancellation down to the r^-6 tail never loses
/// relative accuracy.
pub fn schwarzschild_part(r: f64) -> Result<f64> {
    check_radius(r, "schwarzschild_part")?;
    if r >= SERIES_RADIUS {
        return Ok(background_tail(1.0 / (r * r), false));
    }
    let log_ratio = (-1.0 / (r * r)).ln_1p();
    let log_frac = (2.0 / (r - 1.0)).ln_1p();
    Ok(-14.0 + 16.0 * r * r * log_ratio + (15.0 * r - 1.0 / r) * log_frac)
}

/// Lower-bound kernel for the radial derivative of F:
/// 32 r^2 log((r^2-1)/r^2) + (15r + 1/r) log((r+1)/(r-1)) + 2(r^2+1)/(r^2-1).
///
/// Equals d/ds schwarzschild_part(s r) at s = 1 (term by term in the series),
/// and is strictly positive for all r > 1.
pub fn phi_lower_bound(r: f64) -> Result<f64> {
    check_radius(r, "phi_lower_bound")?;
    if r >= SERIES_RADIUS {
        return Ok(background_tail(1.0 / (r * r), true));
    }
    let log_ratio = (-1.0 / (r * r)).ln_1p();
    let log_frac = (2.0 / (r - 1.0)).ln_1p();
    Ok(32.0 * r * r * log_ratio
        + (15.0 * r + 1.0 / r) * log_frac
        + 2.0 * (r * r + 1.0) / (r * r - 1.0))
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn check_center(c: [f64; 3]) -> Result<f64> {
    let r = norm(c);
    if r <= 1.0 + 1e-6 {
        return Err(Error::Domain(format!(
            "unit sphere about ({}, {}, {}) reaches the origin region (|center| = {r} <= 1 + 1e-6)",
            c[0], c[1], c[2]
        )));
    }
    Ok(r)
}

/// Surface trace integral for an axisymmetric tensor after rotating the
/// center into the x1-x3 half-plane (exact by symmetry): the integrand is
/// 2 |x|^-2 psi(x3/|x|) (1 - 3 nu3^2) with nu3 = x3 - c3.
fn surface_term_axi(
    axi: &AxisymmetricTensor,
    center: [f64; 3],
    grid: &QuadratureGrid,
) -> Result<f64> {
    let rho = center[0].hypot(center[1]);
    let cz = center[2];
    integrate_sphere_profile(
        &|x3: f64, n2: f64| {
            let nu3 = x3 - cz;
            axi.trace_sphere_profile(x3, n2, nu3)
        },
        rho,
        cz,
        grid,
    )
}

fn ball_density_axi(
    axi: &AxisymmetricTensor,
    center: [f64; 3],
    grid: &QuadratureGrid,
    radial: &RadialRule,
) -> Result<f64> {
    let rho = center[0].hypot(center[1]);
    let cz = center[2];
    integrate_ball_profile(
        &|x3: f64, n2: f64| axi.density_profile(x3, n2),
        rho,
        cz,
        grid,
        radial,
    )
}

/// G(s) = integral of tr_S(T) over the sphere of radius 1 about s*xi minus
/// twice the ambient trace over the enclosed ball.
pub fn eval_g(ctx: &FunctionalContext, xi: [f64; 3], s: f64) -> Result<f64> {
    let center = [s * xi[0], s * xi[1], s * xi[2]];
    check_center(center)?;
    if ctx.tensor.is_zero() {
        return Ok(0.0);
    }
    if let Some(axi) = ctx.tensor.axisymmetric() {
        // ambient trace vanishes structurally, only the surface term remains
        return surface_term_axi(axi, center, &ctx.sphere_grid);
    }
    let t = ctx.tensor.as_ref();
    let surface = integrate_sphere(
        &|x: [f64; 3]| {
            let nu = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            let m = t.components(x);
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    q += m[i][j] * nu[i] * nu[j];
                }
            }
            t.trace(x) - q
        },
        center,
        &ctx.sphere_grid,
    )?;
    let ball = integrate_ball(
        &OriginSingular(|x: [f64; 3]| t.trace(x)),
        center,
        &ctx.sphere_grid,
        &ctx.radial,
    )?;
    Ok(surface - 2.0 * ball)
}

/// K(s) = integral of the linearized scalar-curvature density over the unit
/// ball about s*xi.
pub fn eval_k(ctx: &FunctionalContext, xi: [f64; 3], s: f64) -> Result<f64> {
    let center = [s * xi[0], s * xi[1], s * xi[2]];
    check_center(center)?;
    if ctx.tensor.is_zero() {
        return Ok(0.0);
    }
    if let Some(axi) = ctx.tensor.axisymmetric() {
        return ball_density_axi(axi, center, &ctx.sphere_grid, &ctx.radial);
    }
    let t = ctx.tensor.as_ref();
    integrate_ball(
        &OriginSingular(|x: [f64; 3]| scalar_density(t, x).unwrap_or(f64::NAN)),
        center,
        &ctx.sphere_grid,
        &ctx.radial,
    )
}

/// K(s) again, but as the first-derivative surface integral the divergence
/// theorem produces from the density form:
/// K(s) = integral over the sphere about s*xi of
/// 2 tr(T) - 3 tr_S(T) - tr_S(D_nu T), nu = x - s*xi.
///
/// An independent route to the same number as [`eval_k`]; disagreement
/// between the two flags under-resolved quadrature or broken tensor
/// derivatives.
pub fn eval_k_surface(ctx: &FunctionalContext, xi: [f64; 3], s: f64) -> Result<f64> {
    let center = [s * xi[0], s * xi[1], s * xi[2]];
    check_center(center)?;
    if ctx.tensor.is_zero() {
        return Ok(0.0);
    }
    let t = ctx.tensor.as_ref();
    integrate_sphere(
        &|x: [f64; 3]| {
            let nu = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            let m = t.components(x);
            let trace = t.trace(x);
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    q += m[i][j] * nu[i] * nu[j];
                }
            }
            let d = t.first_derivatives(x);
            let mut dn_trace = 0.0;
            let mut dn_q = 0.0;
            for k in 0..3 {
                let dk = &d[k];
                let mut tr = 0.0;
                let mut qq = 0.0;
                for i in 0..3 {
                    tr += dk[i][i];
                    for j in 0..3 {
                        qq += dk[i][j] * nu[i] * nu[j];
                    }
                }
                dn_trace += nu[k] * tr;
                dn_q += nu[k] * qq;
            }
            // 2 tr - 3 (tr - q) - (dn_trace - dn_q)
            -trace + 3.0 * q - dn_trace + dn_q
        },
        center,
        &ctx.sphere_grid,
    )
}

/// F(xi) = schwarzschild_part(|xi|) + G(1)/(4 pi) with the sphere centered
/// at xi itself.
pub fn eval_f(ctx: &FunctionalContext, xi: [f64; 3]) -> Result<f64> {
    let r = norm(xi);
    if r <= 1.0 + 1e-6 {
        return Err(Error::Domain(format!(
            "F needs |xi| > 1 + 1e-6, got {r}"
        )));
    }
    let background = schwarzschild_part(r)?;
    if ctx.tensor.is_zero() {
        return Ok(background);
    }
    Ok(background + eval_g(ctx, xi, 1.0)? / FOUR_PI)
}

/// Richardson-extrapolated central difference of `f` at `x` with base
/// step `h`.
fn central_derivative<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, h: f64) -> Result<f64> {
    let coarse = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let fine = (f(x + 0.5 * h)? - f(x - 0.5 * h)?) / h;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// |s G'(s) - G(s) - K(s)|, the defect in the differential identity relating
/// the flux pair; G' by Richardson-extrapolated central difference with step
/// 1e-4 * s.
pub fn flux_residual(ctx: &FunctionalContext, xi: [f64; 3], s: f64) -> Result<f64> {
    check_center([s * xi[0], s * xi[1], s * xi[2]])?;
    if ctx.tensor.is_zero() {
        return Ok(0.0);
    }
    let g = eval_g(ctx, xi, s)?;
    let k = eval_k(ctx, xi, s)?;
    let dg = central_derivative(|t| eval_g(ctx, xi, t), s, 1e-4 * s)?;
    Ok((s * dg - g - k).abs())
}

/// Radial derivative of F at xi computed two ways.
#[derive(Clone, Copy, Debug)]
pub struct RadialDerivative {
    /// d/ds F(s xi) at s = 1 by finite differences of F.
    pub value: f64,
    /// Same quantity through the flux identity:
    /// phi_lower_bound(|xi|) + (G(1) + K(1))/(4 pi).
    pub flux_value: f64,
}

/// Computes d/ds F(s xi)|_{s=1}; the finite-difference value is returned
/// with the flux-identity value attached, and the two must agree to 1e-4
/// or the quadrature is declared under-resolved.
pub fn radial_derivative_f(ctx: &FunctionalContext, xi: [f64; 3]) -> Result<RadialDerivative> {
    let r = norm(xi);
    if r <= 1.0 + 1e-6 {
        return Err(Error::Domain(format!(
            "radial derivative needs |xi| > 1 + 1e-6, got {r}"
        )));
    }
    let value = central_derivative(
        |s| eval_f(ctx, [s * xi[0], s * xi[1], s * xi[2]]),
        1.0,
        1e-4,
    )?;
    let flux_value = if ctx.tensor.is_zero() {
        phi_lower_bound(r)?
    } else {
        phi_lower_bound(r)? + (eval_g(ctx, xi, 1.0)? + eval_k(ctx, xi, 1.0)?) / FOUR_PI
    };
    if (value - flux_value).abs() > 1e-4 {
        return Err(Error::Inconsistency(format!(
            "radial derivative paths disagree: finite-difference {value} vs flux {flux_value}; \
             quadrature is under-resolved for this tensor"
        )));
    }
    Ok(RadialDerivative { value, flux_value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    StrictMin,
    Saddle,
    Max,
    Degenerate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::StrictMin => "strict-min",
            Classification::Saddle => "saddle",
            Classification::Max => "max",
            Classification::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CriticalPointReport {
    pub xi_star: [f64; 3],
    pub gradient_norm: f64,
    /// Ascending.
    pub hessian_eigenvalues: [f64; 3],
    pub classification: Classification,
    pub iterations: u32,
    /// False when the iteration budget ran out before the gradient tolerance.
    pub converged: bool,
}

const GRAD_TOL: f64 = 1e-8;
const MAX_ITERS: u32 = 200;
const CLAMP_RADIUS: f64 = 1.02;
const TRUST_RADIUS: f64 = 0.25;

fn fd_gradient(ctx: &FunctionalContext, xi: [f64; 3]) -> Result<Vector3<f64>> {
    let h = 1e-4 * norm(xi).max(1.0);
    let mut g = Vector3::zeros();
    for i in 0..3 {
        g[i] = central_derivative(
            |t| {
                let mut y = xi;
                y[i] = t;
                eval_f(ctx, y)
            },
            xi[i],
            h,
        )?;
    }
    Ok(g)
}

fn fd_hessian(ctx: &FunctionalContext, xi: [f64; 3]) -> Result<Matrix3<f64>> {
    let h = 1e-3 * norm(xi).max(1.0);
    let at = |d: [f64; 3]| {
        eval_f(
            ctx,
            [xi[0] + d[0] * h, xi[1] + d[1] * h, xi[2] + d[2] * h],
        )
    };
    let f0 = at([0.0; 3])?;
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        let me = [-e[0], -e[1], -e[2]];
        m[(i, i)] = (at(e)? - 2.0 * f0 + at(me)?) / (h * h);
        for j in (i + 1)..3 {
            let mut pp = [0.0; 3];
            pp[i] = 1.0;
            pp[j] = 1.0;
            let mut pm = [0.0; 3];
            pm[i] = 1.0;
            pm[j] = -1.0;
            let mm = [-pp[0], -pp[1], -pp[2]];
            let mp = [-pm[0], -pm[1], -pm[2]];
            let v = (at(pp)? - at(pm)? - at(mp)? + at(mm)?) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

pub(crate) fn classify(eigs: [f64; 3]) -> Classification {
    let max_abs = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let min_abs = eigs.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    if max_abs < 1e-10 || min_abs < 1e-6 * max_abs {
        return Classification::Degenerate;
    }
    if eigs.iter().all(|&e| e > 0.0) {
        Classification::StrictMin
    } else if eigs.iter().all(|&e| e < 0.0) {
        Classification::Max
    } else {
        Classification::Saddle
    }
}

fn sorted_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let sym = nalgebra::SymmetricEigen::new(*m);
    let mut e = [sym.eigenvalues[0], sym.eigenvalues[1], sym.eigenvalues[2]];
    e.sort_by(f64::total_cmp);
    e
}

/// Damped Newton descent on F with a steepest-descent fallback when the
/// Newton direction is not downhill. Iterates are clamped to |xi| >= 1.02;
/// a clamped iterate that still wants to move inward means F has no interior
/// critical point along the descent path and is reported as a boundary error.
pub fn find_critical_point(
    ctx: &FunctionalContext,
    xi0: [f64; 3],
) -> Result<CriticalPointReport> {
    if norm(xi0) <= 1.05 {
        return Err(Error::Domain(format!(
            "search start must satisfy |xi| > 1.05, got {}",
            norm(xi0)
        )));
    }
    let mut xi = Vector3::new(xi0[0], xi0[1], xi0[2]);
    let mut clamped_streak = 0u32;
    for iter in 1..=MAX_ITERS {
        let g = fd_gradient(ctx, [xi[0], xi[1], xi[2]])?;
        let grad_norm = g.norm();
        if grad_norm <= GRAD_TOL {
            let h = fd_hessian(ctx, [xi[0], xi[1], xi[2]])?;
            let eigs = sorted_eigenvalues(&h);
            return Ok(CriticalPointReport {
                xi_star: [xi[0], xi[1], xi[2]],
                gradient_norm: grad_norm,
                hessian_eigenvalues: eigs,
                classification: classify(eigs),
                iterations: iter,
                converged: true,
            });
        }
        let h = fd_hessian(ctx, [xi[0], xi[1], xi[2]])?;
        let mut step = h
            .lu()
            .solve(&(-g))
            .filter(|d| d.dot(&g) < 0.0)
            .unwrap_or_else(|| -g.normalize() * TRUST_RADIUS);
        if step.norm() > TRUST_RADIUS {
            step *= TRUST_RADIUS / step.norm();
        }
        let mut next = xi + step;
        if next.norm() < CLAMP_RADIUS {
            next *= CLAMP_RADIUS / next.norm();
            clamped_streak += 1;
            if clamped_streak >= 2 {
                return Err(Error::Boundary(format!(
                    "descent from ({}, {}, {}) ran into the |xi| = {CLAMP_RADIUS} guard; \
                     no interior critical point found along this path",
                    xi0[0], xi0[1], xi0[2]
                )));
            }
        } else {
            clamped_streak = 0;
        }
        xi = next;
    }
    let g = fd_gradient(ctx, [xi[0], xi[1], xi[2]])?;
    let h = fd_hessian(ctx, [xi[0], xi[1], xi[2]])?;
    let eigs = sorted_eigenvalues(&h);
    Ok(CriticalPointReport {
        xi_star: [xi[0], xi[1], xi[2]],
        gradient_norm: g.norm(),
        hessian_eigenvalues: eigs,
        classification: Classification::Degenerate,
        iterations: MAX_ITERS,
        converged: false,
    })
}
