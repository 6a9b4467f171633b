//! Report emission: a per-configuration statistics table plus plot-ready
//! trade-off data (mean speed vs windowed 1st-percentile TTC with
//! per-configuration covariance for ellipse drawing).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::batch::AggregateDoc;
use crate::error::AppError;

pub fn load_aggregate(path: &Path) -> Result<AggregateDoc, AppError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("{}: schema mismatch: {e}", path.display())))
}

/// Expand an input glob (or plain path) into aggregate documents sorted by
/// configuration name.
pub fn load_aggregates(pattern: &str) -> Result<Vec<AggregateDoc>, AppError> {
    let mut paths: Vec<PathBuf> = Vec::new();
    if Path::new(pattern).exists() {
        paths.push(PathBuf::from(pattern));
    } else {
        let matches =
            glob::glob(pattern).map_err(|e| AppError::Config(format!("bad glob: {e}")))?;
        for entry in matches {
            paths.push(entry.map_err(|e| AppError::Config(e.to_string()))?);
        }
    }
    if paths.is_empty() {
        return Err(AppError::Config(format!(
            "no aggregate files match '{pattern}'"
        )));
    }
    paths.sort();
    let mut docs = paths
        .iter()
        .map(|p| load_aggregate(p))
        .collect::<Result<Vec<_>, _>>()?;
    docs.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(docs)
}

pub fn report_csv(docs: &[AggregateDoc]) -> String {
    let mut out = String::new();
    out.push_str("name,planner,controller,scheme,");
    out.push_str(reachstack_core::metrics::AggregateStats::csv_header());
    out.push('\n');
    for d in docs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            d.name,
            d.planner,
            d.controller,
            d.scheme,
            d.stats.csv_row()
        );
    }
    out
}

pub fn report_text(docs: &[AggregateDoc]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>6}",
        "config",
        "TTC>=3",
        "TTC p10",
        "BTN<=1",
        "BTN p90",
        "STN<=1",
        "STN p90",
        "mean v",
        "mean|a|",
        "intv %",
        "colls"
    );
    for d in docs {
        let s = &d.stats;
        let _ = writeln!(
            out,
            "{:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>7.1} {:>6}",
            d.name,
            s.frac_ttc_ge_3,
            s.ttc_p10,
            s.frac_btn_le_1,
            s.btn_p90,
            s.frac_stn_le_1,
            s.stn_p90,
            s.mean_v,
            s.mean_abs_a,
            s.intervention_pct,
            s.collision_count
        );
    }
    out
}

pub fn tradeoff_points_csv(docs: &[AggregateDoc]) -> String {
    let mut out = String::from("name,window,mean_v,ttc_p1\n");
    for d in docs {
        for (i, w) in d.windows.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", d.name, i, w[0], w[1]);
        }
    }
    out
}

/// Mean and sample covariance of each configuration's window points.
pub fn tradeoff_summary_csv(docs: &[AggregateDoc]) -> String {
    let mut out = String::from("name,n_windows,mean_v,mean_ttc_p1,cov_vv,cov_vt,cov_tt\n");
    for d in docs {
        let n = d.windows.len();
        let (mut mv, mut mt) = (0.0, 0.0);
        for w in &d.windows {
            mv += w[0];
            mt += w[1];
        }
        if n > 0 {
            mv /= n as f64;
            mt /= n as f64;
        }
        let (mut cvv, mut cvt, mut ctt) = (0.0, 0.0, 0.0);
        if n > 1 {
            for w in &d.windows {
                cvv += (w[0] - mv) * (w[0] - mv);
                cvt += (w[0] - mv) * (w[1] - mt);
                ctt += (w[1] - mt) * (w[1] - mt);
            }
            let denom = (n - 1) as f64;
            cvv /= denom;
            cvt /= denom;
            ctt /= denom;
        }
        let _ = writeln!(out, "{},{},{},{},{},{},{}", d.name, n, mv, mt, cvv, cvt, ctt);
    }
    out
}

/// Write all report artifacts; returns the text table for display.
pub fn write_report(docs: &[AggregateDoc], out_dir: &Path) -> Result<String, AppError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.csv"), report_csv(docs))?;
    let text = report_text(docs);
    fs::write(out_dir.join("report.txt"), &text)?;
    fs::write(out_dir.join("tradeoff_points.csv"), tradeoff_points_csv(docs))?;
    fs::write(out_dir.join("tradeoff_summary.csv"), tradeoff_summary_csv(docs))?;
    Ok(text)
}
