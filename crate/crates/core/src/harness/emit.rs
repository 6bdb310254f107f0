use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::hit_time::HitTime;
use super::runner::RunRecord;
use crate::error::{Error, Result};

const RUNS_HEADER: &str = "config_hash,seed,agent,step,metric_name,value";
const SUMMARY_HEADER: &str = "agent,step,metric_name,n,mean,std,se";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitOptions {
    pub svg: bool,
    pub log_y: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            svg: true,
            log_y: true,
        }
    }
}

/// One data row of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub config_hash: String,
    pub seed: usize,
    pub agent: String,
    pub step: u64,
    pub metric_name: String,
    pub value: f64,
}

/// Aggregate over seeds at one (agent, step).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: String,
    pub step: u64,
    pub metric_name: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitSummary {
    pub agent: String,
    pub solved: usize,
    pub not_solved: usize,
    /// Over solved runs only; NaN when nothing was solved.
    pub mean: f64,
    pub std: f64,
}

fn rows(records: &[RunRecord]) -> impl Iterator<Item = RunRow> + '_ {
    records.iter().flat_map(|r| {
        r.series.iter().map(move |&(step, value)| RunRow {
            config_hash: r.config_hash.clone(),
            seed: r.seed,
            agent: r.agent.clone(),
            step,
            metric_name: r.metric_name.clone(),
            value,
        })
    })
}

pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for row in rows(records) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.config_hash,
            row.seed,
            row.agent,
            row.step,
            row.metric_name,
            float(row.value)
        );
    }
    out
}

pub fn read_runs_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == RUNS_HEADER => {}
        _ => return Err(Error::Parse(format!("expected header `{RUNS_HEADER}`"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.trim_end().split(',').collect();
            if f.len() != 6 {
                return Err(bad("column count"));
            }
            Ok(RunRow {
                config_hash: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad("seed"))?,
                agent: f[2].to_string(),
                step: f[3].parse().map_err(|_| bad("step"))?,
                metric_name: f[4].to_string(),
                value: f[5].parse().map_err(|_| bad("value"))?,
            })
        })
        .collect()
}

/// Mean, sample std and standard error per (agent, step). Agents keep
/// their first-appearance order.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), (String, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        let idx = match order.iter().position(|a| *a == row.agent) {
            Some(i) => i,
            None => {
                order.push(row.agent.clone());
                order.len() - 1
            }
        };
        groups
            .entry((idx, row.step))
            .or_insert_with(|| (row.metric_name.clone(), Vec::new()))
            .1
            .push(row.value);
    }
    groups
        .into_iter()
        .map(|((idx, step), (metric_name, values))| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                agent: order[idx].clone(),
                step,
                metric_name,
                n,
                mean,
                std,
                se: std / (n as f64).sqrt(),
            }
        })
        .collect()
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.agent,
            s.step,
            s.metric_name,
            s.n,
            float(s.mean),
            float(s.std),
            float(s.se)
        );
    }
    out
}

pub fn hit_summary(records: &[RunRecord]) -> Vec<HitSummary> {
    let mut order: Vec<String> = Vec::new();
    let mut by_agent: BTreeMap<usize, Vec<HitTime>> = BTreeMap::new();
    for r in records {
        let Some(hit) = r.hit_time else { continue };
        let idx = match order.iter().position(|a| *a == r.agent) {
            Some(i) => i,
            None => {
                order.push(r.agent.clone());
                order.len() - 1
            }
        };
        by_agent.entry(idx).or_default().push(hit);
    }
    by_agent
        .into_iter()
        .map(|(idx, hits)| {
            let solved: Vec<f64> = hits
                .iter()
                .filter_map(|h| h.episodes())
                .map(|e| e as f64)
                .collect();
            let n = solved.len();
            let mean = if n > 0 {
                solved.iter().sum::<f64>() / n as f64
            } else {
                f64::NAN
            };
            let std = if n > 1 {
                (solved.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            HitSummary {
                agent: order[idx].clone(),
                solved: n,
                not_solved: hits.len() - n,
                mean,
                std,
            }
        })
        .collect()
}

fn hit_times_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("config_hash,seed,agent,hit_episode\n");
    for r in records {
        if let Some(hit) = r.hit_time {
            let cell = hit
                .episodes()
                .map_or_else(|| "not_solved".to_string(), |e| e.to_string());
            let _ = writeln!(out, "{},{},{},{}", r.config_hash, r.seed, r.agent, cell);
        }
    }
    out
}

fn hit_summary_csv(summary: &[HitSummary]) -> String {
    let mut out = String::from("agent,solved,not_solved,mean,std\n");
    for h in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            h.agent,
            h.solved,
            h.not_solved,
            float(h.mean),
            float(h.std)
        );
    }
    out
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Static line plot of the per-agent means. With `log_y` non-positive
/// means are dropped.
pub fn render_svg(summary: &[SummaryRow], log_y: bool) -> String {
    let (w, h, pad) = (720.0, 440.0, 60.0);
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let pts: Vec<&SummaryRow> = summary
        .iter()
        .filter(|s| s.mean.is_finite() && (!log_y || s.mean > 0.0))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let x_lo = pts.iter().map(|s| s.step).min().unwrap_or(0) as f64;
    let mut x_hi = pts.iter().map(|s| s.step).max().unwrap_or(1) as f64;
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let y_lo = pts.iter().map(|s| ty(s.mean)).fold(f64::INFINITY, f64::min);
    let mut y_hi = pts
        .iter()
        .map(|s| ty(s.mean))
        .fold(f64::NEG_INFINITY, f64::max);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let px = |x: f64| pad + (x - x_lo) / (x_hi - x_lo) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y_lo) / (y_hi - y_lo) * (h - 2.0 * pad);
    let _ = writeln!(
        svg,
        "<path d=\"M{pad} {pad} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        h - pad,
        w - pad
    );
    let label = |y: f64| {
        if log_y {
            format!("1e{y:.2}")
        } else {
            format!("{y:.4e}")
        }
    };
    let _ = writeln!(
        svg,
        "<text x=\"4\" y=\"{}\" font-size=\"11\">{}</text>",
        h - pad,
        label(y_lo)
    );
    let _ = writeln!(
        svg,
        "<text x=\"4\" y=\"{}\" font-size=\"11\">{}</text>",
        pad + 4.0,
        label(y_hi)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
        w - pad,
        h - pad + 18.0,
        x_hi
    );
    let mut agents: Vec<&str> = Vec::new();
    for s in &pts {
        if !agents.contains(&s.agent.as_str()) {
            agents.push(&s.agent);
        }
    }
    for (i, agent) in agents.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|s| s.agent == *agent)
            .map(|s| format!("{:.2},{:.2}", px(s.step as f64), py(ty(s.mean))))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{agent}</text>",
            w - pad + 6.0,
            pad + 16.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write all result files into `out_dir` and return their paths.
pub fn emit_results(
    records: &[RunRecord],
    out_dir: &Path,
    options: EmitOptions,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Validation(vec!["records: nothing to emit".into()]));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("runs.csv", runs_csv(records))?;
    let all: Vec<RunRow> = rows(records).collect();
    let summary = summarize(&all);
    put("summary.csv", summary_csv(&summary))?;
    if records.iter().any(|r| r.hit_time.is_some()) {
        put("hit_times.csv", hit_times_csv(records))?;
        put("hit_summary.csv", hit_summary_csv(&hit_summary(records)))?;
    }
    if options.svg {
        put("summary.svg", render_svg(&summary, options.log_y))?;
    }
    Ok(written)
}
