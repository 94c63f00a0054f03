//! Comma-separated metric reports with fixed 6-decimal formatting, so
//! reports diff cleanly and identical inputs produce identical bytes.

use crate::metrics::MetricReport;
use crate::scalar::Real;

fn fmt<T: Real>(v: T) -> String {
    format!("{:.6}", v.to_f64().expect("metric converts to f64"))
}

pub const EVAL_HEADER: &str = "name,mae,f_ave,e_m";
pub const ABLATION_HEADER: &str = "config,mae,f_ave,e_m";
pub const SWEEP_HEADER: &str = "w1,w2,mae,f_ave,e_m";

pub fn metric_fields<T: Real>(r: &MetricReport<T>) -> String {
    format!("{},{},{}", fmt(r.mae), fmt(r.f_ave), fmt(r.e_m))
}

/// Per-image rows plus a final `mean` row.
pub fn eval_report<T: Real>(
    rows: &[(String, MetricReport<T>)],
    mean: &MetricReport<T>,
) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name},{}\n", metric_fields(r)));
    }
    out.push_str(&format!("mean,{}\n", metric_fields(mean)));
    out
}

pub fn ablation_report<T: Real>(rows: &[(String, MetricReport<T>)]) -> String {
    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name},{}\n", metric_fields(r)));
    }
    out
}

pub fn sweep_report<T: Real>(rows: &[(f64, f64, MetricReport<T>)]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (w1, w2, r) in rows {
        out.push_str(&format!("{w1:.1},{w2:.1},{}\n", metric_fields(r)));
    }
    out
}
