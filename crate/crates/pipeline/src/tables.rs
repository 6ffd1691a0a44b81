//! Result tables (CSV and Markdown) rendered from an evaluation report.

use std::fmt::Write as _;

use arbor_core::ErrorStats;
use serde::{Deserialize, Serialize};

use crate::report::{EvalReport, MeanStd};

/// Wall-clock timings supplied by the user for the throughput comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputInput {
    /// Time the reference survey took for `trees` trees, hours.
    pub reference_hours: f64,
    /// Time the robot pass took for the same trees, seconds.
    pub robot_seconds: f64,
    pub trees: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub reference_seconds_per_tree: f64,
    pub robot_seconds_per_tree: f64,
    pub ratio: f64,
}

impl ThroughputInput {
    pub fn ratio(&self) -> arbor_core::Result<ThroughputReport> {
        if !(self.reference_hours > 0.0 && self.robot_seconds > 0.0 && self.trees > 0)
            || !(self.reference_hours.is_finite() && self.robot_seconds.is_finite())
        {
            return Err(arbor_core::Error::InvalidInput(
                "throughput timings and tree count must be positive".into(),
            ));
        }
        let reference = self.reference_hours * 3600.0 / self.trees as f64;
        let robot = self.robot_seconds / self.trees as f64;
        Ok(ThroughputReport {
            reference_seconds_per_tree: reference,
            robot_seconds_per_tree: robot,
            ratio: reference / robot,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub geometry_csv: String,
    pub geometry_md: String,
    pub diameter_csv: String,
    pub diameter_md: String,
    pub branches_csv: String,
    pub branches_md: String,
}

impl Tables {
    /// `(file name, contents)` pairs.
    pub fn files(&self) -> [(&'static str, &str); 6] {
        [
            ("geometry.csv", &self.geometry_csv),
            ("geometry.md", &self.geometry_md),
            ("trunk_diameter.csv", &self.diameter_csv),
            ("trunk_diameter.md", &self.diameter_md),
            ("branch_count.csv", &self.branches_csv),
            ("branch_count.md", &self.branches_md),
        ]
    }

    pub fn write(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in self.files() {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

const MISSING: &str = "--";

fn fmt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => MISSING.into(),
    }
}

fn mean_std_cells(v: Option<MeanStd>, digits: usize) -> [String; 2] {
    [fmt(v.map(|m| m.mean), digits), fmt(v.map(|m| m.std), digits)]
}

fn error_cells(s: &Option<ErrorStats>) -> [String; 6] {
    let g = |f: fn(&ErrorStats) -> f64| fmt(s.as_ref().map(f), 2);
    [
        g(|s| s.mae_mean),
        g(|s| s.mae_std),
        g(|s| s.mae_p75),
        g(|s| s.mape_mean),
        g(|s| s.mape_std),
        g(|s| s.mape_p75),
    ]
}

fn render(header: &[&str], rows: &[Vec<String>]) -> (String, String) {
    let mut csv = header.join(",");
    csv.push('\n');
    let mut md = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for r in rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
        let _ = writeln!(md, "| {} |", r.join(" | "));
    }
    (csv, md)
}

const ERROR_HEADER: [&str; 7] = ["method", "mae_mean", "mae_std", "mae_p75", "mape_mean", "mape_std", "mape_p75"];

/// Geometry table (method, CD mean/std, JSD mean/std) and trait-error tables
/// (MAE and MAPE mean/std/75th); missing values render as `--`.
pub fn make_tables(report: &EvalReport) -> arbor_core::Result<Tables> {
    if report.trees.is_empty() || report.methods.is_empty() {
        return Err(arbor_core::Error::InvalidInput("report has no trees or no methods".into()));
    }
    let geo_rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| {
            let mut r = vec![m.method.clone()];
            r.extend(mean_std_cells(m.chamfer_l2, 4));
            r.extend(mean_std_cells(m.jsd, 4));
            r
        })
        .collect();
    let (geometry_csv, geometry_md) = render(&["method", "cd_mean", "cd_std", "jsd_mean", "jsd_std"], &geo_rows);
    let trait_rows = |pick: fn(&crate::report::MethodSummary) -> &Option<ErrorStats>| -> Vec<Vec<String>> {
        report
            .methods
            .iter()
            .map(|m| {
                let mut r = vec![m.method.clone()];
                r.extend(error_cells(pick(m)));
                r
            })
            .collect()
    };
    let (diameter_csv, diameter_md) = render(&ERROR_HEADER, &trait_rows(|m| &m.trunk_diameter_cm));
    let (branches_csv, branches_md) = render(&ERROR_HEADER, &trait_rows(|m| &m.branch_count));
    Ok(Tables {
        geometry_csv,
        geometry_md,
        diameter_csv,
        diameter_md,
        branches_csv,
        branches_md,
    })
}
