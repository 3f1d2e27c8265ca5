//! Plot-ready CSV and JSON output of a completed run.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::controller::RunReport;

pub const CSV_HEADER: &str =
    "t,maxH2_over_K,min_margin_strict,max_cyl_deficit_ratio,max_gradA_ratio,max_kbar_over_F,area_times_Kpow,fplus_max,components";

pub fn timeseries_csv(report: &RunReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in &report.series {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            s.t,
            s.max_h2_over_k,
            s.min_margin_strict,
            s.max_cyl_deficit_ratio,
            s.max_grad_a_ratio,
            s.max_kbar_over_f,
            s.area_times_kpow,
            s.fplus_max,
            s.components
        );
    }
    out
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_timeseries(report: &RunReport, path: &Path) -> io::Result<()> {
    std::fs::write(path, timeseries_csv(report))
}

pub fn emit_report(report: &RunReport, path: &Path) -> io::Result<()> {
    std::fs::write(path, report_json(report))
}
