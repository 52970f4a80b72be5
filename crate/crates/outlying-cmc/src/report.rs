//! Deterministic report serialization: fixed column order, fixed JSON key
//! order, every float printed with 17 significant digits. Identical inputs
//! therefore produce byte-identical files, and parsing a report back
//! reproduces the exact binary values.

use std::fmt::Write as _;

use crate::counterexample::ConstructionReport;
use crate::error::{Error, Result};
use crate::functional::CriticalPointReport;
use crate::solve::{FindReport, SolveReport};

/// 17 significant digits round-trip every f64 exactly.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SCAN_COLUMNS: [&str; 10] = [
    "xi1",
    "xi2",
    "xi3",
    "abs_xi",
    "F",
    "dF_radial",
    "phi_lower_bound",
    "G1",
    "K1",
    "flux_residual",
];

/// One scan result set; rows follow `SCAN_COLUMNS`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<[f64; 10]>,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = SCAN_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| g17(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n  \"columns\": [");
        for (i, c) in SCAN_COLUMNS.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{c}\"");
        }
        out.push_str("],\n  \"rows\": [");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i > 0 { ",\n    [" } else { "\n    [" });
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&g17(*v));
            }
            out.push(']');
        }
        if !self.rows.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]\n}\n");
        out
    }

    pub fn parse_csv(text: &str) -> Result<ScanTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty scan file".to_string()))?;
        if header != SCAN_COLUMNS.join(",") {
            return Err(Error::InvalidArgument(format!(
                "unexpected scan header: {header}"
            )));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != SCAN_COLUMNS.len() {
                return Err(Error::InvalidArgument(format!(
                    "scan line {}: expected {} fields, got {}",
                    lineno + 2,
                    SCAN_COLUMNS.len(),
                    fields.len()
                )));
            }
            let mut row = [0.0; 10];
            for (i, f) in fields.iter().enumerate() {
                row[i] = f.parse::<f64>().map_err(|e| {
                    Error::InvalidArgument(format!("scan line {}: {e}", lineno + 2))
                })?;
            }
            rows.push(row);
        }
        Ok(ScanTable { rows })
    }

    pub fn parse_json(text: &str) -> Result<ScanTable> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let columns = value
            .get("columns")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::InvalidArgument("scan JSON lacks \"columns\"".to_string()))?;
        let names: Vec<&str> = columns.iter().filter_map(|c| c.as_str()).collect();
        if names != SCAN_COLUMNS {
            return Err(Error::InvalidArgument(format!(
                "unexpected scan columns: {names:?}"
            )));
        }
        let rows_value = value
            .get("rows")
            .and_then(|r| r.as_array())
            .ok_or_else(|| Error::InvalidArgument("scan JSON lacks \"rows\"".to_string()))?;
        let mut rows = Vec::new();
        for (i, entry) in rows_value.iter().enumerate() {
            let cells = entry
                .as_array()
                .ok_or_else(|| Error::InvalidArgument(format!("scan row {i} is not an array")))?;
            if cells.len() != SCAN_COLUMNS.len() {
                return Err(Error::InvalidArgument(format!(
                    "scan row {i}: expected {} cells, got {}",
                    SCAN_COLUMNS.len(),
                    cells.len()
                )));
            }
            let mut row = [0.0; 10];
            for (j, cell) in cells.iter().enumerate() {
                row[j] = cell.as_f64().ok_or_else(|| {
                    Error::InvalidArgument(format!("scan row {i}, cell {j} is not a number"))
                })?;
            }
            rows.push(row);
        }
        Ok(ScanTable { rows })
    }

    /// Detects CSV vs JSON from the leading byte.
    pub fn parse_auto(text: &str) -> Result<ScanTable> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_csv(text)
        }
    }
}

/// Canonical JSON encoding of a solve report; key order is part of the
/// format.
pub fn solve_report_json(r: &SolveReport) -> String {
    let mut out = String::from("{\n");
    let _ = write!(
        out,
        "  \"xi\": [{}, {}, {}],\n",
        g17(r.xi[0]),
        g17(r.xi[1]),
        g17(r.xi[2])
    );
    let _ = write!(out, "  \"lambda\": {},\n", g17(r.lambda));
    let _ = write!(out, "  \"degree\": {},\n", r.degree);
    let _ = write!(out, "  \"area\": {},\n", g17(r.area));
    let _ = write!(out, "  \"volume\": {},\n", g17(r.volume));
    let _ = write!(
        out,
        "  \"h\": [{}, {}, {}, {}],\n",
        g17(r.h[0]),
        g17(r.h[1]),
        g17(r.h[2]),
        g17(r.h[3])
    );
    let _ = write!(out, "  \"residual\": {},\n", g17(r.residual_norm));
    let _ = write!(out, "  \"rho_sigma\": {},\n", g17(r.rho_sigma));
    let _ = write!(out, "  \"mean_H\": {},\n", g17(r.mean_h));
    let _ = write!(out, "  \"outlying_a\": {},\n", g17(r.outlying_a));
    let _ = write!(out, "  \"f_lambda\": {},\n", g17(r.f_lambda));
    let _ = write!(out, "  \"iterations\": {}\n}}\n", r.newton_iterations);
    out
}

fn vec3(v: [f64; 3]) -> String {
    format!("[{}, {}, {}]", g17(v[0]), g17(v[1]), g17(v[2]))
}

fn critical_point_json(r: &CriticalPointReport, indent: &str) -> String {
    let mut out = String::from("{\n");
    let _ = write!(out, "{indent}  \"classification\": \"{}\",\n", r.classification);
    let _ = write!(out, "{indent}  \"converged\": {},\n", r.converged);
    let _ = write!(out, "{indent}  \"gradient_norm\": {},\n", g17(r.gradient_norm));
    let _ = write!(
        out,
        "{indent}  \"hessian_eigenvalues\": {},\n",
        vec3(r.hessian_eigenvalues)
    );
    let _ = write!(out, "{indent}  \"iterations\": {},\n", r.iterations);
    let _ = write!(out, "{indent}  \"xi_star\": {}\n{indent}}}", vec3(r.xi_star));
    out
}

/// JSON for a minimization run: keys sorted, the embedded solve report in
/// its canonical order.
pub fn find_report_json(r: &FindReport) -> String {
    let mut out = String::from("{\n");
    let _ = write!(out, "  \"calibration\": {},\n", g17(r.calibration));
    let _ = write!(
        out,
        "  \"critical_point\": {},\n",
        critical_point_json(&r.critical_point, "  ")
    );
    let _ = write!(out, "  \"h_sum_final\": {},\n", g17(r.h_sum_final));
    let _ = write!(out, "  \"h_sum_start\": {},\n", g17(r.h_sum_start));
    let _ = write!(out, "  \"h_threshold\": {},\n", g17(r.h_threshold));
    let solve = solve_report_json(&r.solve);
    let solve = solve.trim_end().replace('\n', "\n  ");
    let _ = write!(out, "  \"solve\": {solve}\n}}\n");
    out
}

/// JSON for a profile construction run: requested parameters, the
/// certificate, the settled amplitude, and the located minimum.
pub fn construction_json(k: u32, s0: f64, r: &ConstructionReport) -> String {
    let c = &r.certificate;
    let mut out = String::from("{\n");
    let _ = write!(out, "  \"amplitude\": {},\n", g17(r.amplitude));
    out.push_str("  \"certificate\": {\n");
    let _ = write!(
        out,
        "    \"axis_eigenvalue_pair_gap\": {},\n",
        g17(c.axis_eigenvalue_pair_gap)
    );
    let _ = write!(out, "    \"gradient_norm\": {},\n", g17(c.gradient_norm));
    let _ = write!(
        out,
        "    \"hessian_eigenvalues\": {},\n",
        vec3(c.hessian_eigenvalues)
    );
    let _ = write!(out, "    \"k_used\": {},\n", c.k_used);
    let _ = write!(out, "    \"xi_star\": {}\n  }},\n", vec3(c.xi_star));
    let _ = write!(out, "  \"k\": {k},\n");
    let _ = write!(
        out,
        "  \"minimum\": {},\n",
        critical_point_json(&r.minimum, "  ")
    );
    let _ = write!(out, "  \"s0\": {}\n}}\n", g17(s0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> ScanTable {
        ScanTable {
            rows: vec![
                [
                    0.0,
                    0.0,
                    2.0,
                    2.0,
                    -2.5901212047434599e-3,
                    1.7702863882720209e-2,
                    1.7702863882720209e-2,
                    -9.950941672e-1,
                    4.673901954714,
                    3.1e-9,
                ],
                [1.0, -0.5, 1.25, 1.675, -1.0e-3, 2.0e-2, 2.0e-2, -0.9, 4.0, 1.0e-8],
            ],
        }
    }

    #[test]
    fn seventeen_digit_format_round_trips_exactly() {
        for &x in &[
            0.1,
            -2.5901212047434599503e-3,
            1.0 / 3.0,
            6.02e23,
            -7.1154829459e0,
            f64::MIN_POSITIVE,
        ] {
            let printed = g17(x);
            let back: f64 = printed.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{printed}");
        }
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let table = sample_table();
        let text = table.to_csv();
        let back = ScanTable::parse_csv(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn json_round_trips_bit_exactly() {
        let table = sample_table();
        let text = table.to_json();
        let back = ScanTable::parse_json(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn formats_encode_identical_numbers() {
        let table = sample_table();
        let from_csv = ScanTable::parse_auto(&table.to_csv()).unwrap();
        let from_json = ScanTable::parse_auto(&table.to_json()).unwrap();
        assert_eq!(from_csv, from_json);
    }

    #[test]
    fn empty_scan_serializes_as_header_only() {
        let table = ScanTable::default();
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.ends_with('\n'));
        let back = ScanTable::parse_csv(&csv).unwrap();
        assert!(back.rows.is_empty());
        let json = table.to_json();
        assert!(ScanTable::parse_json(&json).unwrap().rows.is_empty());
    }

    #[test]
    fn malformed_scan_inputs_are_rejected_with_location() {
        assert!(ScanTable::parse_csv("").is_err());
        assert!(ScanTable::parse_csv("a,b\n").is_err());
        let good = sample_table().to_csv();
        let truncated = good.replace(",4.673901954714e0,", ",");
        let err = ScanTable::parse_csv(&truncated).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ScanTable::parse_json("{\"columns\": []}").is_err());
    }

    #[test]
    fn solve_report_keys_appear_in_canonical_order() {
        let report = SolveReport {
            xi: [0.0, 0.0, 2.0],
            lambda: 300.0,
            degree: 8,
            area: 1.1353e6,
            volume: 1.1310e8,
            h: [1e-7, 0.0, 0.0, 4.9e-7],
            residual_norm: 3.0e-13,
            rho_sigma: 300.4,
            mean_h: 6.64e-3,
            outlying_a: 0.9973,
            f_lambda: -2.59e-3,
            newton_iterations: 4,
        };
        let text = solve_report_json(&report);
        let keys = [
            "\"xi\"",
            "\"lambda\"",
            "\"degree\"",
            "\"area\"",
            "\"volume\"",
            "\"h\"",
            "\"residual\"",
            "\"rho_sigma\"",
            "\"mean_H\"",
            "\"outlying_a\"",
            "\"f_lambda\"",
            "\"iterations\"",
        ];
        let mut last = 0;
        for key in keys {
            let pos = text.find(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(pos > last, "{key} out of order");
            last = pos;
        }
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["degree"], 8);
        assert_eq!(parsed["iterations"], 4);
        assert_eq!(parsed["xi"][2].as_f64().unwrap(), 2.0);
        assert_eq!(parsed["mean_H"].as_f64().unwrap(), 6.64e-3);
    }

    #[test]
    fn find_report_json_is_sorted_and_parseable() {
        use crate::functional::{Classification, CriticalPointReport};
        let solve = SolveReport {
            xi: [0.0, 0.0, 1.9998],
            lambda: 1000.0,
            degree: 8,
            area: 1.26e7,
            volume: 4.19e9,
            h: [2e-8, 1e-10, 1e-10, 3e-10],
            residual_norm: 1e-13,
            rho_sigma: 1000.4,
            mean_h: 2e-3,
            outlying_a: 0.9998,
            f_lambda: -2.7e-3,
            newton_iterations: 5,
        };
        let report = FindReport {
            solve,
            critical_point: CriticalPointReport {
                xi_star: [0.0, 0.0, 1.9998],
                gradient_norm: 3e-9,
                hessian_eigenvalues: [1.2e-3, 1.9e-3, 1.9e-3],
                classification: Classification::StrictMin,
                iterations: 11,
                converged: true,
            },
            calibration: 0.49,
            h_sum_start: 5.1e-9,
            h_sum_final: 4.8e-10,
            h_threshold: 4.9e-9,
        };
        let text = find_report_json(&report);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["critical_point"]["classification"], "strict-min");
        assert_eq!(parsed["solve"]["iterations"], 5);
        assert_eq!(parsed["h_sum_final"].as_f64().unwrap(), 4.8e-10);
        // top-level keys alphabetical
        let top = ["\"calibration\"", "\"critical_point\"", "\"h_sum_final\"", "\"h_sum_start\"", "\"h_threshold\"", "\"solve\""];
        let mut last = 0;
        for key in top {
            let pos = text.find(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(pos > last, "{key} out of order");
            last = pos;
        }
    }

    #[test]
    fn construction_json_is_sorted_and_parseable() {
        use crate::counterexample::{ConstructionReport, MinimumCertificate};
        use crate::functional::{Classification, CriticalPointReport};
        let report = ConstructionReport {
            certificate: MinimumCertificate {
                xi_star: [0.0, 0.0, 2.0],
                gradient_norm: 2.6e-8,
                hessian_eigenvalues: [13.5076, 20.411068, 20.411068],
                k_used: 200,
                axis_eigenvalue_pair_gap: 3.1e-9,
            },
            amplitude: 64.0,
            minimum: CriticalPointReport {
                xi_star: [0.0, 0.0, 1.99987],
                gradient_norm: 4e-9,
                hessian_eigenvalues: [0.8, 1.3, 1.3],
                classification: Classification::StrictMin,
                iterations: 9,
                converged: true,
            },
        };
        let text = construction_json(200, 2.0, &report);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["certificate"]["k_used"], 200);
        assert_eq!(parsed["k"], 200);
        assert_eq!(parsed["s0"].as_f64().unwrap(), 2.0);
        assert_eq!(parsed["minimum"]["converged"], true);
        assert_eq!(
            parsed["certificate"]["hessian_eigenvalues"][0].as_f64().unwrap(),
            13.5076
        );
    }
}
