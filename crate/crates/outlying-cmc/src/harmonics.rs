//! Real spherical harmonics on the quadrature grid: normalized associated
//! Legendre tables with two polar derivatives, synthesis of a field and its
//! angular derivatives from coefficients, and the adjoint analysis by
//! Gauss-Legendre projection.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;

/// Basis tables bound to one grid. Coefficients are indexed l^2 + l + m for
/// degree l and signed order m; positive m pairs with cos(m phi), negative
/// with sin(|m| phi), and everything is orthonormal on the unit sphere.
pub struct HarmonicsTable {
    l_max: usize,
    n_polar: usize,
    n_az: usize,
    polar_weights: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    // normalized P_l^m(cos theta) and theta-derivatives, [node * n_pairs + pair]
    p: Vec<f64>,
    dp: Vec<f64>,
    ddp: Vec<f64>,
    // cos(m phi_j), sin(m phi_j), [m][j]
    cos_m: Vec<Vec<f64>>,
    sin_m: Vec<Vec<f64>>,
}

/// A scalar field on the grid together with its first and second angular
/// derivatives, each stored [polar * n_az + az].
pub struct SurfaceFields {
    pub n_polar: usize,
    pub n_az: usize,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub up: Vec<f64>,
    pub utt: Vec<f64>,
    pub utp: Vec<f64>,
    pub upp: Vec<f64>,
}

fn pair_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl HarmonicsTable {
    pub fn new(l_max: usize, grid: &QuadratureGrid) -> Result<Self> {
        let n_polar = grid.n_polar();
        if n_polar < l_max + 1 {
            return Err(Error::InvalidArgument(format!(
                "grid with {n_polar} polar nodes cannot project degree {l_max} exactly"
            )));
        }
        let n_az = grid.azimuthal_count;
        if n_az <= 2 * l_max {
            return Err(Error::InvalidArgument(format!(
                "{n_az} azimuthal nodes alias order {l_max} modes"
            )));
        }
        let n_pairs = pair_index(l_max, l_max) + 1;
        let mut p = vec![0.0; n_polar * n_pairs];
        let mut dp = vec![0.0; n_polar * n_pairs];
        let mut ddp = vec![0.0; n_polar * n_pairs];
        let mut polar_weights = Vec::with_capacity(n_polar);
        let mut sin_theta = Vec::with_capacity(n_polar);
        let mut cos_theta = Vec::with_capacity(n_polar);
        for (i, &(x, w)) in grid.polar_nodes.iter().enumerate() {
            polar_weights.push(w);
            let st = (1.0 - x * x).sqrt();
            sin_theta.push(st);
            cos_theta.push(x);
            let row = &mut p[i * n_pairs..(i + 1) * n_pairs];
            // diagonal seed, then upward recurrence in l at fixed m
            row[pair_index(0, 0)] = 0.5 / std::f64::consts::PI.sqrt();
            for m in 1..=l_max {
                row[pair_index(m, m)] = row[pair_index(m - 1, m - 1)]
                    * st
                    * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            }
            for m in 0..l_max {
                row[pair_index(m + 1, m)] =
                    x * ((2 * m + 3) as f64).sqrt() * row[pair_index(m, m)];
            }
            for m in 0..=l_max {
                for l in (m + 2)..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let b = (((lf - 1.0) * (lf - 1.0) - mf * mf)
                        / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                        .sqrt();
                    row[pair_index(l, m)] =
                        a * (x * row[pair_index(l - 1, m)] - b * row[pair_index(l - 2, m)]);
                }
            }
            // (x^2-1) dP_l/dx = l x P_l - (l+m) P_{l-1} gives
            // dP/dtheta = (l x P_l - e_lm P_{l-1}) / sin theta,
            // e_lm = sqrt((2l+1)(l^2-m^2)/(2l-1)); grid nodes avoid the poles
            let row = &p[i * n_pairs..(i + 1) * n_pairs];
            let drow = &mut dp[i * n_pairs..(i + 1) * n_pairs];
            for m in 0..=l_max {
                for l in m..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    let below = if l > m { row[pair_index(l - 1, m)] } else { 0.0 };
                    let e = if l == 0 {
                        0.0
                    } else {
                        ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt()
                    };
                    drow[pair_index(l, m)] =
                        (lf * x * row[pair_index(l, m)] - e * below) / st;
                }
            }
            // second derivative from the associated Legendre equation
            let ddrow = &mut ddp[i * n_pairs..(i + 1) * n_pairs];
            for m in 0..=l_max {
                for l in m..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    ddrow[pair_index(l, m)] = -(x / st) * drow[pair_index(l, m)]
                        + (mf * mf / (st * st) - lf * (lf + 1.0)) * row[pair_index(l, m)];
                }
            }
        }
        let mut cos_m = Vec::with_capacity(l_max + 1);
        let mut sin_m = Vec::with_capacity(l_max + 1);
        for m in 0..=l_max {
            let mut c = Vec::with_capacity(n_az);
            let mut s = Vec::with_capacity(n_az);
            for j in 0..n_az {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / n_az as f64;
                c.push((m as f64 * phi).cos());
                s.push((m as f64 * phi).sin());
            }
            cos_m.push(c);
            sin_m.push(s);
        }
        Ok(HarmonicsTable {
            l_max,
            n_polar,
            n_az,
            polar_weights,
            sin_theta,
            cos_theta,
            p,
            dp,
            ddp,
            cos_m,
            sin_m,
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_polar(&self) -> usize {
        self.n_polar
    }

    pub fn n_az(&self) -> usize {
        self.n_az
    }

    pub fn n_coeffs(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    /// Flat coefficient index of (l, m), m in [-l, l].
    pub fn coeff_index(l: usize, m: isize) -> usize {
        (l * l) as usize + (m + l as isize) as usize
    }

    pub fn sin_theta(&self, i: usize) -> f64 {
        self.sin_theta[i]
    }

    pub fn cos_theta(&self, i: usize) -> f64 {
        self.cos_theta[i]
    }

    pub fn azimuth(&self, j: usize) -> (f64, f64) {
        (self.cos_m[1][j], self.sin_m[1][j])
    }

    pub fn polar_weight(&self, i: usize) -> f64 {
        self.polar_weights[i]
    }

    pub fn azimuthal_weight(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_az as f64
    }

    fn n_pairs(&self) -> usize {
        pair_index(self.l_max, self.l_max) + 1
    }

    /// Field and derivatives on the grid from coefficients, by separated
    /// sums: polar tables contract with the coefficients per order m, then a
    /// short Fourier sum runs over the azimuths.
    pub fn synthesize(&self, coeffs: &[f64]) -> SurfaceFields {
        assert_eq!(coeffs.len(), self.n_coeffs(), "coefficient count mismatch");
        let npairs = self.n_pairs();
        let n = self.n_polar * self.n_az;
        let mut out = SurfaceFields {
            n_polar: self.n_polar,
            n_az: self.n_az,
            u: vec![0.0; n],
            ut: vec![0.0; n],
            up: vec![0.0; n],
            utt: vec![0.0; n],
            utp: vec![0.0; n],
            upp: vec![0.0; n],
        };
        let sqrt2 = std::f64::consts::SQRT_2;
        // per polar node: a[m], b[m] hold the cos/sin mode amplitudes of the
        // value, da/db of the theta-derivative, dda/ddb of the second
        let mut a = vec![0.0; self.l_max + 1];
        let mut b = vec![0.0; self.l_max + 1];
        let mut da = vec![0.0; self.l_max + 1];
        let mut db = vec![0.0; self.l_max + 1];
        let mut dda = vec![0.0; self.l_max + 1];
        let mut ddb = vec![0.0; self.l_max + 1];
        for i in 0..self.n_polar {
            let row = &self.p[i * npairs..(i + 1) * npairs];
            let drow = &self.dp[i * npairs..(i + 1) * npairs];
            let ddrow = &self.ddp[i * npairs..(i + 1) * npairs];
            for m in 0..=self.l_max {
                let scale = if m == 0 { 1.0 } else { sqrt2 };
                let (mut va, mut vb, mut vda, mut vdb, mut vdda, mut vddb) =
                    (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for l in m..=self.l_max {
                    let pi = pair_index(l, m);
                    let cp = coeffs[Self::coeff_index(l, m as isize)];
                    va += cp * row[pi];
                    vda += cp * drow[pi];
                    vdda += cp * ddrow[pi];
                    if m > 0 {
                        let cm = coeffs[Self::coeff_index(l, -(m as isize))];
                        vb += cm * row[pi];
                        vdb += cm * drow[pi];
                        vddb += cm * ddrow[pi];
                    }
                }
                a[m] = scale * va;
                b[m] = scale * vb;
                da[m] = scale * vda;
                db[m] = scale * vdb;
                dda[m] = scale * vdda;
                ddb[m] = scale * vddb;
            }
            for j in 0..self.n_az {
                let idx = i * self.n_az + j;
                let (mut u, mut ut, mut up, mut utt, mut utp, mut upp) =
                    (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for m in 0..=self.l_max {
                    let c = self.cos_m[m][j];
                    let s = self.sin_m[m][j];
                    let mf = m as f64;
                    let even = a[m] * c + b[m] * s;
                    let odd = -a[m] * s + b[m] * c;
                    u += even;
                    ut += da[m] * c + db[m] * s;
                    utt += dda[m] * c + ddb[m] * s;
                    up += mf * odd;
                    utp += mf * (-da[m] * s + db[m] * c);
                    upp -= mf * mf * even;
                }
                out.u[idx] = u;
                out.ut[idx] = ut;
                out.up[idx] = up;
                out.utt[idx] = utt;
                out.utp[idx] = utp;
                out.upp[idx] = upp;
            }
        }
        out
    }

    /// Field values at the two poles, where only the m = 0 modes survive:
    /// Y_l0(north) = sqrt((2l+1)/4pi), south alternates sign with l.
    pub fn pole_values(&self, coeffs: &[f64]) -> (f64, f64) {
        let mut north = 0.0;
        let mut south = 0.0;
        for l in 0..=self.l_max {
            let c = coeffs[Self::coeff_index(l, 0)];
            let y = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
            north += c * y;
            south += c * y * if l % 2 == 0 { 1.0 } else { -1.0 };
        }
        (north, south)
    }

    /// Orthonormal projections of grid values onto every basis function.
    /// Exact for fields of degree <= l_max on this grid.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(
            values.len(),
            self.n_polar * self.n_az,
            "grid value count mismatch"
        );
        let npairs = self.n_pairs();
        let wphi = self.azimuthal_weight();
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut coeffs = vec![0.0; self.n_coeffs()];
        let mut gc = vec![0.0; self.l_max + 1];
        let mut gs = vec![0.0; self.l_max + 1];
        for i in 0..self.n_polar {
            for m in 0..=self.l_max {
                let (mut c_acc, mut s_acc) = (0.0, 0.0);
                for j in 0..self.n_az {
                    let v = values[i * self.n_az + j];
                    c_acc += v * self.cos_m[m][j];
                    s_acc += v * self.sin_m[m][j];
                }
                gc[m] = c_acc * wphi;
                gs[m] = s_acc * wphi;
            }
            let w = self.polar_weights[i];
            let row = &self.p[i * npairs..(i + 1) * npairs];
            for m in 0..=self.l_max {
                let scale = if m == 0 { 1.0 } else { sqrt2 };
                for l in m..=self.l_max {
                    let basis = scale * row[pair_index(l, m)];
                    coeffs[Self::coeff_index(l, m as isize)] += w * gc[m] * basis;
                    if m > 0 {
                        coeffs[Self::coeff_index(l, -(m as isize))] += w * gs[m] * basis;
                    }
                }
            }
        }
        coeffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_sphere_grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(l_max: usize, n_polar: usize) -> HarmonicsTable {
        let grid = build_sphere_grid(n_polar).unwrap();
        HarmonicsTable::new(l_max, &grid).unwrap()
    }

    #[test]
    fn rejects_grids_too_coarse_for_the_degree() {
        let grid = build_sphere_grid(8).unwrap();
        assert!(HarmonicsTable::new(10, &grid).is_err());
        assert!(HarmonicsTable::new(7, &grid).is_ok());
    }

    #[test]
    fn basis_is_orthonormal_on_the_grid() {
        let l_max = 6;
        let t = table(l_max, 16);
        // synthesize each basis vector, analyze it back: identity matrix
        for k in 0..t.n_coeffs() {
            let mut c = vec![0.0; t.n_coeffs()];
            c[k] = 1.0;
            let f = t.synthesize(&c);
            let back = t.analyze(&f.u);
            for (k2, &v) in back.iter().enumerate() {
                let expected = if k2 == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_random_coefficients() {
        let t = table(10, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c: Vec<f64> = (0..t.n_coeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = t.synthesize(&c);
        let back = t.analyze(&f.u);
        for (a, b) in c.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_harmonics_are_the_coordinates() {
        // Y_{1,-1}, Y_{1,0}, Y_{1,1} span (y2, y3, y1) with factor
        // sqrt(3/4pi)
        let t = table(2, 8);
        let n = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        for (m, pick) in [(-1isize, 1usize), (0, 2), (1, 0)] {
            let mut c = vec![0.0; t.n_coeffs()];
            c[HarmonicsTable::coeff_index(1, m)] = 1.0;
            let f = t.synthesize(&c);
            for i in 0..t.n_polar() {
                for j in 0..t.n_az() {
                    let st = t.sin_theta(i);
                    let (cp, sp) = t.azimuth(j);
                    let y = [st * cp, st * sp, t.cos_theta(i)];
                    assert_abs_diff_eq!(f.u[i * t.n_az() + j], n * y[pick], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn angular_derivatives_match_finite_differences() {
        // compare synthesized derivatives against differences of the value
        // synthesis on rotated grids is unavailable, so probe the analytic
        // basis directly: f = Y_{5,3} as a closed function of (theta, phi)
        // via a fine synthesis is circular; instead check internal
        // consistency through the Laplace-Beltrami identity below and a
        // derivative sum rule here: d/dtheta sum_m Y_lm^2 = 0 by the
        // addition theorem
        let t = table(8, 20);
        for l in [3usize, 8] {
            for i in [0usize, 7, 15] {
                let mut val = 0.0;
                let mut dval = 0.0;
                let npairs = t.n_pairs();
                let row = &t.p[i * npairs..(i + 1) * npairs];
                let drow = &t.dp[i * npairs..(i + 1) * npairs];
                for m in 0..=l {
                    let scale = if m == 0 { 1.0 } else { 2.0 };
                    let pi = pair_index(l, m);
                    val += scale * row[pi] * row[pi];
                    dval += scale * 2.0 * row[pi] * drow[pi];
                }
                // addition theorem: sum_m |Y_lm|^2 = (2l+1)/4pi, constant
                assert_relative_eq!(
                    val,
                    (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI),
                    max_relative = 1e-12
                );
                assert_abs_diff_eq!(dval, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn polar_derivatives_match_closed_forms() {
        // the sum rule and eigenvalue checks are blind to an overall sign of
        // d/dtheta, so pin low modes against explicit derivatives
        let t = table(4, 12);
        let n = t.n_pairs();
        let c10 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        let c20 = (5.0 / (16.0 * std::f64::consts::PI)).sqrt();
        let c11 = (3.0 / (8.0 * std::f64::consts::PI)).sqrt();
        for i in 0..t.n_polar() {
            let st = t.sin_theta(i);
            let ct = t.cos_theta(i);
            let drow = &t.dp[i * n..(i + 1) * n];
            // Y10 = c10 cos(theta): d/dtheta = -c10 sin(theta)
            assert_relative_eq!(drow[pair_index(1, 0)], -c10 * st, max_relative = 1e-12);
            // Y20 = c20 (3cos^2-1): d/dtheta = -6 c20 cos sin
            assert_relative_eq!(
                drow[pair_index(2, 0)],
                -6.0 * c20 * ct * st,
                max_relative = 1e-12
            );
            // P11 = -c11 sin(theta) in the Condon-Shortley-free table is
            // +c11 sin(theta): d/dtheta = c11 cos(theta)
            assert_relative_eq!(drow[pair_index(1, 1)], c11 * ct, max_relative = 1e-12);
        }
    }

    #[test]
    fn laplace_beltrami_eigenvalues() {
        // utt + cot(theta) ut + upp / sin^2(theta) = -l(l+1) u for each mode
        let l_max = 10;
        let t = table(l_max, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<f64> = (0..t.n_coeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = t.synthesize(&c);
        // coefficient-space reference: scale each mode by -l(l+1)
        let mut scaled = c.clone();
        for l in 0..=l_max {
            for m in -(l as isize)..=(l as isize) {
                scaled[HarmonicsTable::coeff_index(l, m)] *= -((l * (l + 1)) as f64);
            }
        }
        let reference = t.synthesize(&scaled);
        for i in 0..t.n_polar() {
            let st = t.sin_theta(i);
            let ct = t.cos_theta(i);
            for j in 0..t.n_az() {
                let idx = i * t.n_az() + j;
                let lap = f.utt[idx] + (ct / st) * f.ut[idx] + f.upp[idx] / (st * st);
                assert_abs_diff_eq!(lap, reference.u[idx], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mixed_derivative_is_symmetric_in_construction() {
        // utp synthesized directly must equal the phi-derivative of ut:
        // check via analysis of ut against order-shifted coefficients
        let t = table(6, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..t.n_coeffs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = t.synthesize(&c);
        // phi-rotate coefficients: d/dphi maps (cos, sin) -> (-m sin, m cos)
        let mut rotated = vec![0.0; t.n_coeffs()];
        for l in 0..=t.l_max() {
            for m in 1..=(l as isize) {
                let plus = c[HarmonicsTable::coeff_index(l, m)];
                let minus = c[HarmonicsTable::coeff_index(l, -m)];
                rotated[HarmonicsTable::coeff_index(l, m)] = m as f64 * minus;
                rotated[HarmonicsTable::coeff_index(l, -m)] = -(m as f64) * plus;
            }
        }
        let g = t.synthesize(&rotated);
        for idx in 0..f.u.len() {
            assert_abs_diff_eq!(f.up[idx], g.u[idx], epsilon = 1e-11);
            assert_abs_diff_eq!(f.utp[idx], g.ut[idx], epsilon = 1e-10);
        }
    }
}
