//! Spherical graphs over coordinate spheres and their extrinsic geometry:
//! induced area element, enclosed volume by radial fibers from the center,
//! and mean curvature from the first and second fundamental forms with
//! analytic ambient Christoffel symbols.

use crate::error::{Error, Result};
use crate::harmonics::HarmonicsTable;
use crate::metric::MetricSpec;
use crate::quadrature::{KahanSum, RadialRule};

/// Surface x(y) = lambda (xi + (1 + u(y)) y) over the unit sphere, u stored
/// as dimensionless real-harmonic coefficients with the degree-1 band
/// structurally zero; reported heights are the paper-scaled lambda * u.
#[derive(Debug, Clone)]
pub struct SphericalGraph {
    pub xi: [f64; 3],
    pub lambda: f64,
    pub degree: usize,
    coeffs: Vec<f64>,
}

impl SphericalGraph {
    pub fn round(xi: [f64; 3], lambda: f64, degree: usize) -> Self {
        SphericalGraph {
            xi,
            lambda,
            degree,
            coeffs: vec![0.0; (degree + 1) * (degree + 1)],
        }
    }

    /// Coefficient vector including the zeroed degree-1 band.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn set_coeffs(&mut self, coeffs: Vec<f64>) -> Result<()> {
        if coeffs.len() != (self.degree + 1) * (self.degree + 1) {
            return Err(Error::InvalidArgument(
                "coefficient count does not match the graph degree".into(),
            ));
        }
        for m in -1..=1 {
            let idx = HarmonicsTable::coeff_index(1, m);
            if coeffs[idx] != 0.0 {
                return Err(Error::InvalidArgument(
                    "degree-1 coefficients must stay zero".into(),
                ));
            }
        }
        self.coeffs = coeffs;
        Ok(())
    }
}

/// Geometry of one graph on one grid. `h` holds mean-curvature samples at
/// the grid nodes, row-major in (polar, azimuth).
pub struct SurfaceGeometry {
    pub area: f64,
    pub volume: f64,
    pub h: Vec<f64>,
    pub mean_h: f64,
    pub rho_min: f64,
    pub max_abs_height: f64,
    /// d(volume)/d(u_00 coefficient), used as a Jacobian model entry.
    pub dvol_du00: f64,
    /// Outward unit normals (in the ambient metric) at the grid nodes.
    pub(crate) normals: Vec<[f64; 3]>,
    /// Per-node area weights; their sum is `area`.
    pub(crate) da: Vec<f64>,
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(s: f64, a: [f64; 3]) -> [f64; 3] {
    [s * a[0], s * a[1], s * a[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Full geometry pass. The harmonics table fixes the evaluation grid and
/// must match the graph degree; the radial rule integrates the volume
/// fibers.
pub fn graph_geometry(
    metric: &MetricSpec,
    graph: &SphericalGraph,
    table: &HarmonicsTable,
    radial: &RadialRule,
) -> Result<SurfaceGeometry> {
    if table.n_coeffs() != graph.coeffs.len() {
        return Err(Error::InvalidArgument(
            "harmonics table degree does not match the graph".into(),
        ));
    }
    let lambda = graph.lambda;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let fields = table.synthesize(&graph.coeffs);
    let n_az = table.n_az();
    let wphi = table.azimuthal_weight();
    let center = scale3(lambda, graph.xi);

    let mut area = KahanSum::default();
    let mut volume = KahanSum::default();
    let mut h_weighted = KahanSum::default();
    let mut dvol = KahanSum::default();
    let mut h = vec![0.0; table.n_polar() * n_az];
    let mut normals = vec![[0.0; 3]; table.n_polar() * n_az];
    let mut da_nodes = vec![0.0; table.n_polar() * n_az];
    let mut rho_min = f64::INFINITY;
    let mut max_u: f64 = 0.0;

    for i in 0..table.n_polar() {
        let st = table.sin_theta(i);
        let ct = table.cos_theta(i);
        let w = table.polar_weight(i);
        for j in 0..n_az {
            let idx = i * n_az + j;
            let (cp, sp) = table.azimuth(j);
            let y = [st * cp, st * sp, ct];
            let y_t = [ct * cp, ct * sp, -st];
            let y_p = [-st * sp, st * cp, 0.0];
            let y_tt = scale3(-1.0, y);
            let y_tp = [-ct * sp, ct * cp, 0.0];
            let y_pp = [-st * cp, -st * sp, 0.0];

            let u = fields.u[idx];
            max_u = max_u.max(u.abs());
            if u.abs() > 0.1 {
                return Err(Error::Domain(format!(
                    "graph height {u} leaves the star-shaped regime"
                )));
            }
            let (ut, up) = (fields.ut[idx], fields.up[idx]);
            let (utt, utp, upp) = (fields.utt[idx], fields.utp[idx], fields.upp[idx]);
            let radial_factor = 1.0 + u;

            let x = add3(center, scale3(lambda * radial_factor, y));
            let x_t = scale3(lambda, add3(scale3(ut, y), scale3(radial_factor, y_t)));
            let x_p = scale3(lambda, add3(scale3(up, y), scale3(radial_factor, y_p)));
            let x_tt = scale3(
                lambda,
                add3(
                    add3(scale3(utt, y), scale3(2.0 * ut, y_t)),
                    scale3(radial_factor, y_tt),
                ),
            );
            let x_tp = scale3(
                lambda,
                add3(
                    add3(scale3(utp, y), scale3(ut, y_p)),
                    add3(scale3(up, y_t), scale3(radial_factor, y_tp)),
                ),
            );
            let x_pp = scale3(
                lambda,
                add3(
                    add3(scale3(upp, y), scale3(2.0 * up, y_p)),
                    scale3(radial_factor, y_pp),
                ),
            );

            let rho_x = dot3(x, x).sqrt();
            rho_min = rho_min.min(rho_x);

            let ev = metric.eval(x)?;
            let g = &ev.g;
            let mdot = |a: [f64; 3], b: [f64; 3]| -> f64 {
                let mut s = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        s += a[p] * g[p][q] * b[q];
                    }
                }
                s
            };

            let e_tt = mdot(x_t, x_t);
            let e_tp = mdot(x_t, x_p);
            let e_pp = mdot(x_p, x_p);
            let det_e = e_tt * e_pp - e_tp * e_tp;
            if det_e <= 0.0 {
                return Err(Error::Geometry(format!(
                    "area element degenerate at node ({i}, {j})"
                )));
            }
            let sqrt_det_e = det_e.sqrt();

            // g-orthogonal normal from the euclidean cross product: g^-1 c
            // is g-perpendicular to both tangents
            let c = cross3(x_t, x_p);
            let inv = ev.inverse();
            let mut n = [0.0; 3];
            for p in 0..3 {
                n[p] = inv[p][0] * c[0] + inv[p][1] * c[1] + inv[p][2] * c[2];
            }
            let nn = mdot(n, n).sqrt();
            let mut n = scale3(1.0 / nn, n);
            let outward = add3(x, scale3(-1.0, center));
            if dot3(n, outward) < 0.0 {
                n = scale3(-1.0, n);
            }

            let gamma = ev.christoffels();
            let second_form = |vec_ab: [f64; 3], a: [f64; 3], b: [f64; 3]| -> f64 {
                let mut total = vec_ab;
                for k in 0..3 {
                    let mut s = 0.0;
                    for p in 0..3 {
                        for q in 0..3 {
                            s += gamma[k][p][q] * a[p] * b[q];
                        }
                    }
                    total[k] += s;
                }
                mdot(n, total)
            };
            let s_tt = second_form(x_tt, x_t, x_t);
            let s_tp = second_form(x_tp, x_t, x_p);
            let s_pp = second_form(x_pp, x_p, x_p);
            // round spheres with outward normal get positive H
            let h_val = -(e_pp * s_tt - 2.0 * e_tp * s_tp + e_tt * s_pp) / det_e;
            h[idx] = h_val;
            normals[idx] = n;

            // area element divided by sin(theta): the polar weights carry
            // the sin factor of the round measure
            let da = w * wphi * sqrt_det_e / st;
            da_nodes[idx] = da;
            area.add(da);
            h_weighted.add(da * h_val);

            // volume fiber from the center along y, Gauss-Legendre in the
            // scaled radius
            let rho = lambda * radial_factor;
            let mut fiber = KahanSum::default();
            for q in 0..radial.node_count {
                let tq = radial.nodes[q];
                let xs = add3(center, scale3(rho * tq, y));
                let dens = metric.eval(xs)?.sqrt_det();
                fiber.add(radial.weights[q] * tq * tq * dens);
            }
            volume.add(w * wphi * rho * rho * rho * fiber.value());
            dvol.add(w * wphi * ev.sqrt_det() * rho * rho);
        }
    }

    // grid nodes exclude the poles; add them so axis-aligned minima are hit
    let (u_n, u_s) = table.pole_values(&graph.coeffs);
    for (pole_u, pole_dir) in [(u_n, 1.0), (u_s, -1.0)] {
        let x = add3(center, scale3(lambda * (1.0 + pole_u), [0.0, 0.0, pole_dir]));
        rho_min = rho_min.min(dot3(x, x).sqrt());
    }

    let area = area.value();
    Ok(SurfaceGeometry {
        area,
        volume: volume.value(),
        h,
        mean_h: h_weighted.value() / area,
        rho_min,
        max_abs_height: lambda * max_u,
        dvol_du00: dvol.value() * lambda / (4.0 * std::f64::consts::PI).sqrt(),
        normals,
        da: da_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::HarmonicsTable;
    use crate::quadrature::build_sphere_grid;
    use crate::special::legendre;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const PI: f64 = std::f64::consts::PI;

    fn setup(degree: usize, n_polar: usize) -> (HarmonicsTable, RadialRule) {
        let grid = build_sphere_grid(n_polar).unwrap();
        (
            HarmonicsTable::new(degree, &grid).unwrap(),
            RadialRule::new(16).unwrap(),
        )
    }

    #[test]
    fn flat_round_sphere_is_exact() {
        let (table, radial) = setup(8, 24);
        let metric = MetricSpec::flat();
        let lam = 250.0;
        let graph = SphericalGraph::round([0.0, 0.0, 2.0], lam, 8);
        let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
        assert_relative_eq!(geo.area, 4.0 * PI * lam * lam, max_relative = 1e-13);
        assert_relative_eq!(
            geo.volume,
            4.0 * PI * lam * lam * lam / 3.0,
            max_relative = 1e-13
        );
        for &hv in &geo.h {
            assert_relative_eq!(hv, 2.0 / lam, max_relative = 1e-11);
        }
        assert_relative_eq!(geo.mean_h, 2.0 / lam, max_relative = 1e-11);
        // center offset 2 lambda minus the radius
        assert_relative_eq!(geo.rho_min, lam, max_relative = 1e-12);
    }

    #[test]
    fn flat_constant_height_rescales_the_sphere() {
        let (table, radial) = setup(6, 20);
        let metric = MetricSpec::flat();
        let lam = 100.0;
        let c = 0.05;
        let mut graph = SphericalGraph::round([0.0, 0.0, 1.5], lam, 6);
        let mut coeffs = graph.coeffs().to_vec();
        coeffs[HarmonicsTable::coeff_index(0, 0)] = c * (4.0 * PI).sqrt();
        graph.set_coeffs(coeffs).unwrap();
        let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
        let radius = lam * (1.0 + c);
        assert_relative_eq!(geo.area, 4.0 * PI * radius * radius, max_relative = 1e-13);
        assert_relative_eq!(
            geo.volume,
            4.0 * PI * radius.powi(3) / 3.0,
            max_relative = 1e-13
        );
        for &hv in &geo.h {
            assert_relative_eq!(hv, 2.0 / radius, max_relative = 1e-11);
        }
        assert_abs_diff_eq!(geo.max_abs_height, lam * c, epsilon = 1e-10);
    }

    #[test]
    fn linearized_curvature_of_small_modes() {
        // flat space: H(u Y_lm) = 2/lam + (l(l+1) - 2) u Y_lm / lam + O(u^2)
        let (table, radial) = setup(6, 20);
        let metric = MetricSpec::flat();
        let lam = 100.0;
        let eps = 1e-5;
        for (l, m) in [(2usize, 1isize), (3, -2), (5, 0)] {
            let mut graph = SphericalGraph::round([0.0, 0.0, 1.5], lam, 6);
            let mut coeffs = graph.coeffs().to_vec();
            coeffs[HarmonicsTable::coeff_index(l, m)] = eps;
            graph.set_coeffs(coeffs).unwrap();
            let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
            let fields = table.synthesize(graph.coeffs());
            let factor = (l * (l + 1)) as f64 - 2.0;
            for idx in 0..geo.h.len() {
                let predicted = (2.0 + factor * fields.u[idx]) / lam;
                assert_abs_diff_eq!(geo.h[idx], predicted, epsilon = 100.0 * eps * eps / lam);
            }
        }
    }

    #[test]
    fn flat_volume_and_area_ignore_the_center_offset() {
        let (table, radial) = setup(4, 12);
        let metric = MetricSpec::flat();
        let lam = 80.0;
        for xi in [[0.0, 0.0, 1.2], [2.0, -1.0, 3.0]] {
            let graph = SphericalGraph::round(xi, lam, 4);
            let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
            assert_relative_eq!(geo.area, 4.0 * PI * lam * lam, max_relative = 1e-12);
            assert_relative_eq!(
                geo.volume,
                4.0 * PI * lam.powi(3) / 3.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn schwarzschild_sphere_matches_the_closed_form_expansions() {
        // area: 4 pi lam^2 + 16 pi lam / s + 12 pi s^-1 log((s+1)/(s-1)),
        // volume: (4pi/3) lam^3 (1 + 6/(lam s))
        //         + 30 pi lam (1 - ((s^2-1)/(2s)) log((s+1)/(s-1)))
        let (table, radial) = setup(8, 32);
        let metric = MetricSpec::schwarzschild();
        let lam = 1.0e3;
        let graph = SphericalGraph::round([0.0, 0.0, 2.0], lam, 8);
        let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
        assert_relative_eq!(geo.area, 12591524.063941662639, max_relative = 1e-5);
        assert_relative_eq!(geo.volume, 4201373166.8537153293, max_relative = 1e-6);
        assert!(geo.rho_min > lam * 0.99 && geo.rho_min < lam * 1.01);
    }

    fn curvature_expansion_sup(lam: f64) -> f64 {
        let (table, radial) = setup(8, 32);
        let metric = MetricSpec::schwarzschild();
        let s = 2.0;
        let graph = SphericalGraph::round([0.0, 0.0, s], lam, 8);
        let geo = graph_geometry(&metric, &graph, &table, &radial).unwrap();
        let mut sup: f64 = 0.0;
        for i in 0..table.n_polar() {
            for j in 0..table.n_az() {
                // P_l argument: -<y, xi>/|xi| = -cos(theta) on the axis
                let t = -table.cos_theta(i);
                let mut series = 0.0;
                for l in 0..=30usize {
                    series += (l as f64 - 1.0) * s.powi(-(l as i32) - 1) * legendre(l, t).unwrap();
                }
                let predicted = 4.0 / (lam * lam) * series;
                let dev = (geo.h[i * table.n_az() + j] - 2.0 / lam - predicted).abs();
                sup = sup.max(dev);
            }
        }
        sup
    }

    #[test]
    fn curvature_expansion_error_decays_cubically() {
        let e1 = curvature_expansion_sup(1.0e3);
        let e2 = curvature_expansion_sup(2.0e3);
        assert!(e1 < 1e-7, "expansion defect {e1} at lambda = 1e3");
        let ratio = e1 / e2;
        assert!(
            ratio >= 6.0,
            "halving lambda should cut the defect ~8x, got {ratio}"
        );
    }

    #[test]
    fn degree_one_coefficients_are_rejected() {
        let mut graph = SphericalGraph::round([0.0, 0.0, 2.0], 100.0, 4);
        let mut coeffs = graph.coeffs().to_vec();
        coeffs[HarmonicsTable::coeff_index(1, 0)] = 1e-3;
        assert!(graph.set_coeffs(coeffs).is_err());
    }

    #[test]
    fn oversized_heights_are_rejected() {
        let (table, radial) = setup(4, 12);
        let metric = MetricSpec::flat();
        let mut graph = SphericalGraph::round([0.0, 0.0, 2.0], 100.0, 4);
        let mut coeffs = graph.coeffs().to_vec();
        coeffs[HarmonicsTable::coeff_index(0, 0)] = 0.2 * (4.0 * PI).sqrt();
        graph.set_coeffs(coeffs).unwrap();
        assert!(matches!(
            graph_geometry(&metric, &graph, &table, &radial),
            Err(Error::Domain(_))
        ));
    }
}
