//! Construction of trace-free perturbations whose reduced functional has a
//! strict interior minimum.
//!
//! The building block is a steep angular cutoff `phi` in the variable
//! t = x3/|x|: it vanishes on the cone t >= t0 + 1/k, equals exp(-4) on the
//! critical cone t = t0, and saturates to 1 at wide angles. With
//! t0 = sqrt(1 - s0^-2) that cone is exactly tangent to the unit sphere
//! centered at s0 e3, so the sphere only ever sees the tail of the cutoff.
//! Subtracting the slope ratio a_k = J'(s0)/I'(s0) makes the resulting
//! moment Q stationary in the radial direction at s0 e3, and the steepness
//! k controls the transverse Hessian, which grows without bound as the
//! cutoff sharpens. Scaling the profile by a large enough amplitude then
//! drags the minimizer of the full functional F into the interior next to
//! s0 e3; `build_metric` runs that amplitude search and returns the
//! perturbed metric together with the certificates.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{
    find_critical_point, Classification, CriticalPointReport, FunctionalContext,
};
use crate::metric::MetricSpec;
use crate::quadrature::{build_sphere_grid, gauss_legendre, integrate_sphere, QuadratureGrid};
use crate::tensor::{
    AxisymmetricProfile, AxisymmetricTensor, PerturbationTensor, ProfileSpec, SplineProfile,
    TensorSpec, ZeroTensor,
};

/// Gradient threshold for accepting s0 e3 as a critical point of Q.
const CERT_GRAD_TOL: f64 = 1e-5;
/// Smallest Hessian eigenvalue still accepted as strictly positive.
const CERT_EIG_FLOOR: f64 = 1e-6;
/// Finite-difference step for the Q gradient and Hessian.
const CERT_FD_STEP: f64 = 1e-4;
/// How often `certify_minimum` may double k before giving up.
const CERT_MAX_DOUBLINGS: u32 = 4;
/// Radial slopes below this leave the ratio a_k meaningless.
const MIN_AXIS_SLOPE: f64 = 1e-6;
/// Largest amplitude `build_metric` will try.
const AMPLITUDE_CAP: f64 = (1u64 << 20) as f64;

/// Cutoff steepness, tangency radius, and the cached slope ratio.
///
/// Everything downstream (profile evaluation, moments, certification,
/// metric assembly) reads from this one value object; the expensive part
/// of construction is the one-dimensional slope computation for a_k.
#[derive(Clone, Copy, Debug)]
pub struct BumpParams {
    k: u32,
    s0: f64,
    t0: f64,
    amplitude: f64,
    a_k: f64,
}

impl BumpParams {
    /// Builds the profile parameters for steepness `k` about radius `s0`,
    /// at the default overall amplitude 64.
    pub fn new(k: u32, s0: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "cutoff steepness k must be at least 1".to_string(),
            ));
        }
        if k > (1 << 24) {
            return Err(Error::InvalidArgument(format!(
                "cutoff steepness k = {k} is beyond any resolvable scale"
            )));
        }
        if !(s0 >= 2.0) || !s0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "construction radius must satisfy s0 >= 2, got {s0}"
            )));
        }
        let t0 = (1.0 - s0.powi(-2)).sqrt();
        let rule = moment_rule(k);
        let di = axis_moment_slope(&rule, s0, 1e-5, |_| 1.0);
        guard_slope(di, s0)?;
        let dj = axis_moment_slope(&rule, s0, 1e-5, |t| bump_raw(k as f64, t0, t));
        Ok(BumpParams {
            k,
            s0,
            t0,
            amplitude: 64.0,
            a_k: dj / di,
        })
    }

    /// Same parameters at a different overall amplitude. The slope ratio
    /// does not depend on the amplitude, so this is cheap.
    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be positive and finite, got {amplitude}"
            )));
        }
        self.amplitude = amplitude;
        Ok(self)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Cosine of the tangency angle, sqrt(1 - s0^-2).
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// The cached slope ratio a_k = J'(s0) / I'(s0).
    pub fn slope_ratio(&self) -> f64 {
        self.a_k
    }
}

/// The raw cutoff value phi_k(t) before amplitude and offset are applied.
pub fn bump(p: &BumpParams, t: f64) -> f64 {
    bump_raw(p.k as f64, p.t0, t)
}

fn bump_raw(k: f64, t0: f64, t: f64) -> f64 {
    let d = k * (t0 - t) + 1.0;
    if d <= 0.0 {
        return 0.0;
    }
    (-4.0 / d).exp()
}

/// Value, first, and second t-derivative of the raw cutoff.
///
/// d = k (t0 - t) + 1 and phi = exp(-4/d) give
///   phi'  = -4 k phi / d^2,
///   phi'' = 8 k^2 phi (2 - d) / d^4.
/// Once exp(-4/d) underflows the factors k/d^2 can no longer overflow the
/// product back to a finite value, so the jet is cut to zero there; that
/// keeps the piecewise definition free of NaNs right up to the support edge.
fn bump_jet(k: f64, t0: f64, t: f64) -> (f64, f64, f64) {
    let d = k * (t0 - t) + 1.0;
    if d <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let phi = (-4.0 / d).exp();
    if phi == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let d2 = d * d;
    let dphi = -4.0 * k * phi / d2;
    let ddphi = 8.0 * k * k * phi * (2.0 - d) / (d2 * d2);
    (phi, dphi, ddphi)
}

/// The offset cutoff psi(t) = amplitude (phi_k(t) - a_k) as an
/// axisymmetric profile with analytic derivatives.
#[derive(Clone, Copy, Debug)]
pub struct CounterexampleProfile {
    params: BumpParams,
}

impl CounterexampleProfile {
    pub fn new(params: BumpParams) -> Self {
        CounterexampleProfile { params }
    }

    pub fn params(&self) -> &BumpParams {
        &self.params
    }
}

impl AxisymmetricProfile for CounterexampleProfile {
    fn psi(&self, t: f64) -> f64 {
        let p = &self.params;
        p.amplitude * (bump_raw(p.k as f64, p.t0, t) - p.a_k)
    }

    fn dpsi(&self, t: f64) -> f64 {
        let p = &self.params;
        p.amplitude * bump_jet(p.k as f64, p.t0, t).1
    }

    fn ddpsi(&self, t: f64) -> f64 {
        let p = &self.params;
        p.amplitude * bump_jet(p.k as f64, p.t0, t).2
    }

    fn psi_all(&self, t: f64) -> (f64, f64, f64) {
        let p = &self.params;
        let (phi, dphi, ddphi) = bump_jet(p.k as f64, p.t0, t);
        (
            p.amplitude * (phi - p.a_k),
            p.amplitude * dphi,
            p.amplitude * ddphi,
        )
    }
}

/// Polar node count that resolves the transition layer of the cutoff on
/// unit spheres near the construction radius. The layer has width 1/k in t,
/// but t depends quadratically on the polar cosine at the tangent circle,
/// so the layer occupies a polar window of width ~ k^-1/2 and a fixed
/// multiple of sqrt(k) nodes keeps a constant node count per layer. The
/// factor 24 puts the slope error at the certification point below 1e-8.
pub fn polar_resolution(k: u32) -> usize {
    let root = (k as f64).sqrt().ceil() as usize;
    (24 * root).max(64)
}

fn moment_nodes(k: u32) -> usize {
    let root = (k as f64).sqrt().ceil() as usize;
    (32 * root).max(512)
}

fn moment_rule(k: u32) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(moment_nodes(k))
}

/// One-dimensional reduction of the axis moments: for a center s e3 the
/// azimuth integrates out and
///   M(s) = 2 pi int_{-1}^{1} w(t(z)) (1 - 3 z^2) / (s^2 + 1 + 2 s z) dz
/// with t(z) = (s + z) / sqrt(s^2 + 1 + 2 s z) the polar cosine seen from
/// the origin.
fn axis_moment<W: Fn(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), s: f64, weight: W) -> f64 {
    let mut acc = 0.0;
    for (&z, &w) in rule.0.iter().zip(rule.1.iter()) {
        let q = s * s + 1.0 + 2.0 * s * z;
        let t = (s + z) / q.sqrt();
        acc += w * weight(t) * (1.0 - 3.0 * z * z) / q;
    }
    2.0 * std::f64::consts::PI * acc
}

/// Radial derivative of an axis moment by Richardson-extrapolated central
/// differences.
fn axis_moment_slope<W: Fn(f64) -> f64 + Copy>(
    rule: &(Vec<f64>, Vec<f64>),
    s: f64,
    step: f64,
    weight: W,
) -> f64 {
    let central = |h: f64| {
        (axis_moment(rule, s + h, weight) - axis_moment(rule, s - h, weight)) / (2.0 * h)
    };
    (4.0 * central(step / 2.0) - central(step)) / 3.0
}

/// The bare slope normalizes the ratio a_k; a vanishing slope means s0 sits
/// at a critical radius of the moment itself and the construction breaks.
fn guard_slope(di: f64, s0: f64) -> Result<()> {
    if di.abs() <= MIN_AXIS_SLOPE {
        return Err(Error::DegenerateProfile(format!(
            "radial slope of the bare moment at s0 = {s0} is {di:.3e}; \
             the slope ratio is undefined, choose another s0"
        )));
    }
    Ok(())
}

/// Recomputes the slope ratio with a caller-chosen difference step; used to
/// confirm the cached value is step-independent.
pub fn compute_a(p: &BumpParams, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "difference step must be positive, got {step}"
        )));
    }
    let rule = moment_rule(p.k);
    let di = axis_moment_slope(&rule, p.s0, step, |_| 1.0);
    guard_slope(di, p.s0)?;
    let (k, t0) = (p.k as f64, p.t0);
    Ok(axis_moment_slope(&rule, p.s0, step, |t| bump_raw(k, t0, t)) / di)
}

fn check_center(xi: [f64; 3]) -> Result<f64> {
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    if !(r > 1.0) {
        return Err(Error::Domain(format!(
            "moment center must lie outside the unit ball, got |xi| = {r}"
        )));
    }
    Ok(r)
}

/// The bare quadratic moment I(s) over the unit sphere centered at s e3.
pub fn eval_i(s: f64, grid: &QuadratureGrid) -> Result<f64> {
    check_center([0.0, 0.0, s])?;
    integrate_sphere(
        &|x: [f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let nu3 = x[2] - s;
            (1.0 - 3.0 * nu3 * nu3) / r2
        },
        [0.0, 0.0, s],
        grid,
    )
}

/// The cutoff-weighted moment J(s) over the unit sphere centered at s e3;
/// the raw cutoff enters without amplitude or offset.
pub fn eval_j(p: &BumpParams, s: f64, grid: &QuadratureGrid) -> Result<f64> {
    check_center([0.0, 0.0, s])?;
    let (k, t0) = (p.k as f64, p.t0);
    integrate_sphere(
        &|x: [f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let nu3 = x[2] - s;
            bump_raw(k, t0, x[2] / r2.sqrt()) * (1.0 - 3.0 * nu3 * nu3) / r2
        },
        [0.0, 0.0, s],
        grid,
    )
}

/// The offset moment Q(xi) over the unit sphere centered at xi, with the
/// full profile psi = amplitude (phi - a_k). On the axis this equals
/// amplitude (J(s) - a_k I(s)).
pub fn eval_q(p: &BumpParams, xi: [f64; 3], grid: &QuadratureGrid) -> Result<f64> {
    check_center(xi)?;
    let (k, t0, a, amp) = (p.k as f64, p.t0, p.a_k, p.amplitude);
    integrate_sphere(
        &|x: [f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let nu3 = x[2] - xi[2];
            amp * (bump_raw(k, t0, x[2] / r2.sqrt()) - a) * (1.0 - 3.0 * nu3 * nu3) / r2
        },
        xi,
        grid,
    )
}

/// Strict-minimum certificate for Q at s0 e3.
#[derive(Clone, Copy, Debug)]
pub struct MinimumCertificate {
    pub xi_star: [f64; 3],
    pub gradient_norm: f64,
    /// Ascending.
    pub hessian_eigenvalues: [f64; 3],
    /// Steepness that finally certified; larger than the requested k when
    /// the check had to sharpen the cutoff.
    pub k_used: u32,
    /// Relative gap of the closest eigenvalue pair; axisymmetry forces one
    /// transverse pair to coincide.
    pub axis_eigenvalue_pair_gap: f64,
}

fn q_gradient_and_hessian(
    p: &BumpParams,
    xi: [f64; 3],
    grid: &QuadratureGrid,
    h: f64,
) -> Result<(f64, Matrix3<f64>)> {
    let at = |dx: [f64; 3]| eval_q(p, [xi[0] + dx[0], xi[1] + dx[1], xi[2] + dx[2]], grid);
    let f0 = at([0.0; 3])?;
    let mut grad = [0.0; 3];
    let mut hess = Matrix3::zeros();
    let mut plus = [0.0; 3];
    let mut minus = [0.0; 3];
    for i in 0..3 {
        let mut e = [0.0; 3];
        e[i] = h;
        plus[i] = at(e)?;
        e[i] = -h;
        minus[i] = at(e)?;
        e[i] = h / 2.0;
        let ph = at(e)?;
        e[i] = -h / 2.0;
        let mh = at(e)?;
        // Richardson-extrapolated first difference: the third derivative of
        // Q grows like k^(3/2) times the amplitude, which a plain central
        // difference at this step would feel at the certification tolerance
        let full = (plus[i] - minus[i]) / (2.0 * h);
        let half = (ph - mh) / h;
        grad[i] = (4.0 * half - full) / 3.0;
        hess[(i, i)] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let mut e = [0.0; 3];
            e[i] = h;
            e[j] = h;
            let pp = at(e)?;
            e[j] = -h;
            let pm = at(e)?;
            e[i] = -h;
            let mm = at(e)?;
            e[j] = h;
            let mp = at(e)?;
            let v = (pp + mm - pm - mp) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let gnorm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
    Ok((gnorm, hess))
}

fn sorted_eigenvalues(hess: &Matrix3<f64>) -> [f64; 3] {
    let eigs = hess.symmetric_eigenvalues();
    let mut out = [eigs[0], eigs[1], eigs[2]];
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn closest_pair_gap(eigs: &[f64; 3]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let scale = eigs[i].abs().max(eigs[j].abs());
            if scale > 0.0 {
                gap = gap.min((eigs[i] - eigs[j]).abs() / scale);
            }
        }
    }
    gap
}

/// Checks by finite differences that Q has a strict local minimum at s0 e3:
/// gradient below 1e-5 and all Hessian eigenvalues at least 1e-6, both
/// measured per unit amplitude since Q is linear in the amplitude. When the
/// check fails the cutoff is sharpened (k doubled, with a matching finer
/// grid) up to four times before reporting failure.
pub fn certify_minimum(p: &BumpParams, grid: &QuadratureGrid) -> Result<MinimumCertificate> {
    let mut params = *p;
    let mut finer: Option<QuadratureGrid> = None;
    let mut last_grad = f64::NAN;
    let mut last_eig = f64::NAN;
    let scale = p.amplitude;
    for round in 0..=CERT_MAX_DOUBLINGS {
        let active = finer.as_ref().unwrap_or(grid);
        let xi0 = [0.0, 0.0, params.s0];
        let (gradient_norm, hess) = q_gradient_and_hessian(&params, xi0, active, CERT_FD_STEP)?;
        let eigs = sorted_eigenvalues(&hess);
        if gradient_norm <= CERT_GRAD_TOL * scale && eigs[0] >= CERT_EIG_FLOOR * scale {
            return Ok(MinimumCertificate {
                xi_star: xi0,
                gradient_norm,
                hessian_eigenvalues: eigs,
                k_used: params.k,
                axis_eigenvalue_pair_gap: closest_pair_gap(&eigs),
            });
        }
        last_grad = gradient_norm;
        last_eig = eigs[0];
        if round == CERT_MAX_DOUBLINGS {
            break;
        }
        params = BumpParams::new(params.k * 2, params.s0)?.with_amplitude(params.amplitude)?;
        finer = Some(build_sphere_grid(polar_resolution(params.k))?);
    }
    Err(Error::ConstructionFailure(format!(
        "no strict minimum certificate up to k = {}: last gradient {last_grad:.3e}, \
         smallest eigenvalue {last_eig:.3e}",
        p.k << CERT_MAX_DOUBLINGS
    )))
}

/// Output of `build_metric`: the Q-level certificate, the amplitude the
/// doubling search settled on, and the located minimum of F.
#[derive(Clone, Copy, Debug)]
pub struct ConstructionReport {
    pub certificate: MinimumCertificate,
    pub amplitude: f64,
    pub minimum: CriticalPointReport,
}

fn profile_tensor(params: BumpParams) -> Box<dyn PerturbationTensor> {
    Box::new(AxisymmetricTensor::new(Box::new(
        CounterexampleProfile::new(params),
    )))
}

/// Assembles a perturbed metric whose reduced functional has a strict
/// interior minimum near s0 e3.
///
/// First certifies the Q-level minimum (sharpening k if needed), then
/// doubles the amplitude from `p.amplitude` until the critical-point search
/// on F reports a strict interior minimum; amplitudes beyond 2^20 are
/// treated as failure. Boundary exits and non-minimal critical points both
/// trigger another doubling, every other error aborts.
pub fn build_metric(p: &BumpParams) -> Result<(MetricSpec, ConstructionReport)> {
    let grid = build_sphere_grid(polar_resolution(p.k))?;
    let certificate = certify_minimum(p, &grid)?;
    let mut params = if certificate.k_used == p.k {
        *p
    } else {
        BumpParams::new(certificate.k_used, p.s0)?.with_amplitude(p.amplitude)?
    };
    let n_polar = polar_resolution(params.k);
    loop {
        let ctx = FunctionalContext::new(profile_tensor(params), n_polar, 48)?;
        match find_critical_point(&ctx, [0.0, 0.0, params.s0]) {
            Ok(report)
                if report.converged && report.classification == Classification::StrictMin =>
            {
                let spec = MetricSpec::with_tensor(profile_tensor(params));
                return Ok((
                    spec,
                    ConstructionReport {
                        certificate,
                        amplitude: params.amplitude,
                        minimum: report,
                    },
                ));
            }
            Ok(_) | Err(Error::Boundary(_)) => {}
            Err(e) => return Err(e),
        }
        let next = params.amplitude * 2.0;
        if next > AMPLITUDE_CAP {
            return Err(Error::ConstructionFailure(format!(
                "no strict interior minimum of the reduced functional up to \
                 amplitude {AMPLITUDE_CAP}"
            )));
        }
        params = params.with_amplitude(next)?;
    }
}

/// Instantiates the tensor described by a wire-format spec.
pub fn tensor_from_spec(spec: &TensorSpec) -> Result<Box<dyn PerturbationTensor>> {
    match spec {
        TensorSpec::Zero => Ok(Box::new(ZeroTensor)),
        TensorSpec::Axisymmetric { profile } => {
            let profile: Box<dyn AxisymmetricProfile> = match profile {
                ProfileSpec::Counterexample { k, s0, amplitude } => Box::new(
                    CounterexampleProfile::new(BumpParams::new(*k, *s0)?.with_amplitude(*amplitude)?),
                ),
                ProfileSpec::Table { samples } => Box::new(SplineProfile::new(samples.clone())?),
            };
            Ok(Box::new(AxisymmetricTensor::new(profile)))
        }
    }
}

/// Serializable snapshot of a profile: parameters plus 2048 uniform samples
/// of psi on [-1, 1], dense enough for the table path to reproduce it.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileExport {
    pub k: u32,
    pub s0: f64,
    pub t0: f64,
    pub a_k: f64,
    pub amplitude: f64,
    pub samples: Vec<(f64, f64)>,
}

pub fn export_profile(p: &BumpParams) -> ProfileExport {
    const N: usize = 2048;
    let profile = CounterexampleProfile::new(*p);
    let samples = (0..N)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (N - 1) as f64;
            (t, profile.psi(t))
        })
        .collect();
    ProfileExport {
        k: p.k,
        s0: p.s0,
        t0: p.t0,
        a_k: p.a_k,
        amplitude: p.amplitude,
        samples,
    }
}
