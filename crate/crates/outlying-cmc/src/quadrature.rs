//! Product quadrature over translated unit spheres and balls.
//!
//! Grids are Gauss-Legendre in the polar cosine crossed with a uniform
//! azimuthal rule; a grid with `n_polar` nodes integrates all spherical
//! harmonics of degree <= 2*n_polar - 1 exactly. Ball integrals add a
//! Gauss-Legendre rule on the radius, mapped to [0,1].

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Compensated (Kahan) accumulator; keeps long node sums at O(eps) error.
#[derive(Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the degree-n Legendre polynomial from the classical
/// cosine initial guess; nodes are symmetric about 0 by construction.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                let (p2, d2) = legendre_with_derivative(n, z);
                dp = d2;
                z -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    // ascending order for reproducible summation
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Spherical quadrature grid: Gauss-Legendre polar cosines crossed with
/// 2*n_polar uniform azimuthal nodes.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    /// (cosine of colatitude, Gauss-Legendre weight) pairs, ascending cosine.
    pub polar_nodes: Vec<(f64, f64)>,
    pub azimuthal_count: usize,
    pub exactness_degree: usize,
    /// Cached (cos phi_j, sin phi_j) for phi_j = 2 pi j / azimuthal_count.
    azimuth: Vec<(f64, f64)>,
}

impl QuadratureGrid {
    pub fn n_polar(&self) -> usize {
        self.polar_nodes.len()
    }

    /// Azimuthal step weight 2*pi / azimuthal_count.
    pub fn azimuthal_weight(&self) -> f64 {
        2.0 * PI / self.azimuthal_count as f64
    }

    pub(crate) fn azimuth_table(&self) -> &[(f64, f64)] {
        &self.azimuth
    }

    /// Sum of all node weights; equals 4*pi up to rounding.
    pub fn total_weight(&self) -> f64 {
        let mut acc = KahanSum::default();
        for &(_, w) in &self.polar_nodes {
            acc.add(w);
        }
        acc.value() * 2.0 * PI
    }
}

/// Build the sphere grid for a given polar resolution.
pub fn build_sphere_grid(n_polar: usize) -> Result<QuadratureGrid> {
    if n_polar < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_polar must be >= 2, got {n_polar}"
        )));
    }
    let (nodes, weights) = gauss_legendre(n_polar);
    let azimuthal_count = 2 * n_polar;
    let azimuth = (0..azimuthal_count)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / azimuthal_count as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    Ok(QuadratureGrid {
        polar_nodes: nodes.into_iter().zip(weights).collect(),
        azimuthal_count,
        exactness_degree: 2 * n_polar - 1,
        azimuth,
    })
}

/// Gauss-Legendre rule on [0, 1] for the radial factor of ball integrals.
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub node_count: usize,
    /// Nodes in (0, 1), ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialRule {
    pub fn new(node_count: usize) -> Result<Self> {
        if node_count < 1 {
            return Err(Error::InvalidArgument(
                "radial rule needs at least one node".into(),
            ));
        }
        let (x, w) = gauss_legendre(node_count);
        Ok(RadialRule {
            node_count,
            nodes: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        })
    }
}

/// Scalar integrand over R^3. Closures implement it with the default
/// (non-singular) origin behaviour; wrap in [`OriginSingular`] for fields
/// unbounded at the coordinate origin so ball integrals can reject centers
/// whose ball touches the singularity.
pub trait ScalarField {
    fn eval(&self, x: [f64; 3]) -> f64;
    fn origin_singular(&self) -> bool {
        false
    }
}

impl<F: Fn([f64; 3]) -> f64> ScalarField for F {
    fn eval(&self, x: [f64; 3]) -> f64 {
        self(x)
    }
}

/// Marker wrapper: the wrapped field is unbounded at the origin.
pub struct OriginSingular<F>(pub F);

impl<F: Fn([f64; 3]) -> f64> ScalarField for OriginSingular<F> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        (self.0)(x)
    }
    fn origin_singular(&self) -> bool {
        true
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Centers just outside the unit ball get one automatic refinement so the
/// near-singular |x|^-2 factors stay resolved; no further adaptivity.
fn effective_grid<'a>(grid: &'a QuadratureGrid, center: [f64; 3]) -> Result<std::borrow::Cow<'a, QuadratureGrid>> {
    let r = norm(center);
    if r > 1.0 && r <= 1.1 {
        Ok(std::borrow::Cow::Owned(build_sphere_grid(2 * grid.n_polar())?))
    } else {
        Ok(std::borrow::Cow::Borrowed(grid))
    }
}

/// Integral of `f` over the unit sphere centered at `center`.
pub fn integrate_sphere<F: ScalarField>(f: &F, center: [f64; 3], grid: &QuadratureGrid) -> Result<f64> {
    let grid = effective_grid(grid, center)?;
    let wphi = grid.azimuthal_weight();
    let mut acc = KahanSum::default();
    for &(z, wz) in &grid.polar_nodes {
        let st = (1.0 - z * z).sqrt();
        let mut ring = KahanSum::default();
        for &(c, s) in grid.azimuth_table() {
            let x = [center[0] + st * c, center[1] + st * s, center[2] + z];
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    x: x[0],
                    y: x[1],
                    z: x[2],
                });
            }
            ring.add(v);
        }
        acc.add(wz * ring.value());
    }
    Ok(acc.value() * wphi)
}

/// Integral of `f` over the unit ball centered at `center`, radial x
/// spherical product rule.
pub fn integrate_ball<F: ScalarField>(
    f: &F,
    center: [f64; 3],
    grid: &QuadratureGrid,
    radial: &RadialRule,
) -> Result<f64> {
    if f.origin_singular() && norm(center) <= 1.0 {
        return Err(Error::Domain(format!(
            "ball about ({}, {}, {}) touches the origin singularity",
            center[0], center[1], center[2]
        )));
    }
    let grid = effective_grid(grid, center)?;
    let wphi = grid.azimuthal_weight();
    let mut acc = KahanSum::default();
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        let mut shell = KahanSum::default();
        for &(z, wz) in &grid.polar_nodes {
            let st = (1.0 - z * z).sqrt();
            let mut ring = KahanSum::default();
            for &(c, s) in grid.azimuth_table() {
                let x = [
                    center[0] + r * st * c,
                    center[1] + r * st * s,
                    center[2] + r * z,
                ];
                let v = f.eval(x);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample {
                        x: x[0],
                        y: x[1],
                        z: x[2],
                    });
                }
                ring.add(v);
            }
            shell.add(wz * ring.value());
        }
        acc.add(wr * r * r * shell.value());
    }
    Ok(acc.value() * wphi)
}

/// Ring-resolved sphere integral for integrands of the form
/// f(x) = F(x3, |x|^2).
///
/// Every integrand in this crate built from an axisymmetric tensor has this
/// form once the center is rotated into the x1-x3 plane (the profile depends
/// on x only through x3/|x| and |x|, and the center enters through x3 - c3
/// and |x - c| = const). On each quadrature ring x3 and the shell radius are
/// fixed and |x|^2 = a + b cos(phi), so the azimuthal sum folds over the
/// mirror symmetry phi <-> -phi; on-axis centers (b = 0) collapse to one
/// evaluation per ring. Node set and weights are identical to
/// [`integrate_sphere`]; only the evaluation order differs.
pub fn integrate_sphere_profile<F: Fn(f64, f64) -> f64>(
    f: &F,
    center_rho: f64,
    center_z: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let grid = effective_grid(grid, [center_rho, 0.0, center_z])?;
    ring_sum(&grid, 1.0, center_rho, center_z, f).map(|v| v * grid.azimuthal_weight())
}

/// Ball analogue of [`integrate_sphere_profile`].
pub fn integrate_ball_profile<F: Fn(f64, f64) -> f64>(
    f: &F,
    center_rho: f64,
    center_z: f64,
    grid: &QuadratureGrid,
    radial: &RadialRule,
) -> Result<f64> {
    let grid = effective_grid(grid, [center_rho, 0.0, center_z])?;
    let mut acc = KahanSum::default();
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        let shell = ring_sum(&grid, r, center_rho, center_z, f)?;
        acc.add(wr * r * r * shell);
    }
    Ok(acc.value() * grid.azimuthal_weight())
}

/// Shared polar x folded-azimuth sweep over one shell of radius `r`.
fn ring_sum<F: Fn(f64, f64) -> f64>(
    grid: &QuadratureGrid,
    r: f64,
    center_rho: f64,
    center_z: f64,
    f: &F,
) -> Result<f64> {
    let naz = grid.azimuthal_count;
    let half = naz / 2;
    let cnorm2 = center_rho * center_rho + center_z * center_z;
    let mut acc = KahanSum::default();
    for &(z, wz) in &grid.polar_nodes {
        let st = (1.0 - z * z).sqrt();
        let x3 = center_z + r * z;
        let a = cnorm2 + r * r + 2.0 * r * center_z * z;
        let b = 2.0 * r * center_rho * st;
        let ring = if b == 0.0 {
            let v = f(x3, a);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    x: center_rho + r * st,
                    y: 0.0,
                    z: x3,
                });
            }
            v * naz as f64
        } else {
            let mut ring = KahanSum::default();
            for j in 0..=half {
                let (c, _) = grid.azimuth_table()[j];
                let v = f(x3, a + b * c);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample {
                        x: center_rho + r * st * c,
                        y: r * st * grid.azimuth_table()[j].1,
                        z: x3,
                    });
                }
                let fold = if j == 0 || j == half { 1.0 } else { 2.0 };
                ring.add(fold * v);
            }
            ring.value()
        };
        acc.add(wz * ring);
    }
    Ok(acc.value())
}
