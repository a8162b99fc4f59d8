use std::fmt::Write;

use super::episode::{EpisodeRow, SuiteMetrics};
use super::timing::TimingRow;
use super::tune::TuneReport;
use crate::conformal::StepRecord;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-step diagnostics: `step[,r],score,p_1..p_k,log_m,s,alarm`. `k` is the
/// number of p-values in the first record.
pub fn diagnostics_csv<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (Option<f64>, &'a StepRecord)>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    let with_r = rows.first().is_some_and(|(r, _)| r.is_some());
    let k = rows.first().map_or(1, |(_, rec)| rec.p_values.len());
    let mut out = String::from("step");
    if with_r {
        out.push_str(",r");
    }
    out.push_str(",score");
    for i in 1..=k {
        let _ = write!(out, ",p_{i}");
    }
    out.push_str(",log_m,s,alarm\n");
    for (r, rec) in rows {
        let _ = write!(out, "{}", rec.step);
        if with_r {
            let _ = write!(out, ",{}", opt(r));
        }
        let _ = write!(out, ",{}", rec.score);
        for i in 0..k {
            let _ = write!(out, ",{}", opt(rec.p_values.get(i).copied()));
        }
        let _ = writeln!(out, ",{},{},{}", rec.m_log, opt(rec.s), u8::from(rec.alarm));
    }
    out
}

pub fn episode_csv(rows: &[EpisodeRow]) -> String {
    diagnostics_csv(rows.iter().map(|row| (Some(row.r), &row.record)))
}

pub fn metrics_csv(metrics: &[SuiteMetrics]) -> String {
    let mut out = String::from("parameters,false_positive,false_negative,average_delay\n");
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.parameters,
            m.false_positive_cell(),
            m.false_negative_cell(),
            m.delay_cell()
        );
    }
    out
}

pub fn tune_csv(report: &TuneReport) -> String {
    let mut out = String::from("delta,tau,false_positive,false_negative,average_delay,selected\n");
    for (i, p) in report.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.delta,
            p.tau,
            p.metrics.false_positive_cell(),
            p.metrics.false_negative_cell(),
            p.metrics.delay_cell(),
            u8::from(i == report.best)
        );
    }
    out
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("method,N,min,Q1,Q2,Q3,max\n");
    for r in rows {
        let [a, b, c, d, e] = r.millis;
        let _ = writeln!(out, "{},{},{a:.6},{b:.6},{c:.6},{d:.6},{e:.6}", r.method.name(), r.n);
    }
    out
}
